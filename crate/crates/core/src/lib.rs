pub mod ares;
pub mod dataset;
pub mod error;
pub mod gce;
pub mod generation;
pub mod pipeline;
pub mod predictors;
pub mod report;
pub mod rules;
pub mod schema;
pub mod synthetic;
