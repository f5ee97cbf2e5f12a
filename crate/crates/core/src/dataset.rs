//! Encoded datasets, CSV ingestion, affected-input selection and subgroup slicing.

use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::predictors::Predictor;
use crate::schema::{FeatureKind, FeatureSchema, RawValue};

/// Rows of encoded vectors sharing one schema.
///
/// Rows are stored row-major. `ids` are the 0-based row indices of the source
/// CSV and survive every slicing operation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Arc<FeatureSchema>,
    data: Vec<f64>,
    ids: Vec<usize>,
    labels: Option<Vec<u8>>,
}

impl Dataset {
    /// Builds a dataset from encoded rows, checking the one-hot and range invariants.
    pub fn from_rows(schema: Arc<FeatureSchema>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * schema.dim());
        for row in &rows {
            schema.validate_row(row)?;
            data.extend_from_slice(row);
        }
        let ids = (0..rows.len()).collect();
        Ok(Dataset {
            schema,
            data,
            ids,
            labels: None,
        })
    }

    pub fn from_raw(schema: Arc<FeatureSchema>, rows: &[Vec<RawValue>]) -> Result<Self> {
        let encoded = rows
            .iter()
            .map(|r| schema.encode(r))
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(schema, encoded)
    }

    pub fn empty(schema: Arc<FeatureSchema>) -> Self {
        Dataset {
            schema,
            data: Vec::new(),
            ids: Vec::new(),
            labels: None,
        }
    }

    pub fn with_labels(mut self, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: labels.len(),
            });
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::InvalidArgument("labels must be 0 or 1".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_ids(mut self, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                got: ids.len(),
            });
        }
        self.ids = ids;
        Ok(self)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn schema_arc(&self) -> &Arc<FeatureSchema> {
        &self.schema
    }

    pub fn dim(&self) -> usize {
        self.schema.dim()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim().max(1)).take(self.len())
    }

    /// Flat row-major matrix.
    pub fn as_matrix(&self) -> &[f64] {
        &self.data
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn labels(&self) -> Option<&[u8]> {
        self.labels.as_deref()
    }

    /// Keeps rows at the given positions, in the given order.
    pub fn select(&self, positions: &[usize]) -> Dataset {
        let d = self.dim();
        let mut data = Vec::with_capacity(positions.len() * d);
        for &p in positions {
            data.extend_from_slice(self.row(p));
        }
        Dataset {
            schema: Arc::clone(&self.schema),
            data,
            ids: positions.iter().map(|&p| self.ids[p]).collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| positions.iter().map(|&p| l[p]).collect()),
        }
    }

    pub fn filter(&self, mut keep: impl FnMut(&[f64]) -> bool) -> Dataset {
        let positions: Vec<usize> = (0..self.len()).filter(|&i| keep(self.row(i))).collect();
        self.select(&positions)
    }

    /// Decodes every row back to raw values.
    pub fn decode_rows(&self) -> Result<Vec<Vec<RawValue>>> {
        self.rows().map(|r| self.schema.decode(r)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Replace empty continuous cells by the column median instead of failing.
    pub median_fill: bool,
}

/// Loads an RFC-4180 CSV with a header row and encodes it under the schema file.
pub fn load_dataset(csv_path: impl AsRef<Path>, schema_path: impl AsRef<Path>) -> Result<Dataset> {
    let schema = FeatureSchema::load(schema_path)?;
    load_dataset_with(csv_path, Arc::new(schema), LoadOptions::default())
}

pub fn load_dataset_with(
    csv_path: impl AsRef<Path>,
    schema: Arc<FeatureSchema>,
    options: LoadOptions,
) -> Result<Dataset> {
    let path = csv_path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_csv(file, schema, options).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

/// Parses CSV text from any reader; see [`load_dataset`].
pub fn parse_csv(
    reader: impl std::io::Read,
    schema: Arc<FeatureSchema>,
    options: LoadOptions,
) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse("<csv>", e))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();

    let label_col = schema.label_column();
    let mut column_feature: Vec<Option<usize>> = Vec::with_capacity(headers.len());
    let mut label_index = None;
    for (c, h) in headers.iter().enumerate() {
        if Some(h.as_str()) == label_col {
            label_index = Some(c);
            column_feature.push(None);
            continue;
        }
        match schema.index_of(h) {
            Some(f) => column_feature.push(Some(f)),
            None => {
                return Err(Error::Load {
                    row: 0,
                    column: h.clone(),
                    message: "unknown column".into(),
                })
            }
        }
    }
    for f in schema.features() {
        if !headers.iter().any(|h| h == &f.name) {
            return Err(Error::Load {
                row: 0,
                column: f.name.clone(),
                message: "missing column".into(),
            });
        }
    }

    let mut cells: Vec<Vec<Option<RawValue>>> = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::parse("<csv>", e))?;
        let mut row: Vec<Option<RawValue>> = vec![None; schema.len()];
        for (c, cell) in record.iter().enumerate() {
            let column = headers.get(c).cloned().unwrap_or_default();
            let load_err = |message: String| Error::Load {
                row: r,
                column: column.clone(),
                message,
            };
            if Some(c) == label_index {
                let label = match cell {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(load_err(format!("label `{other}` is not 0 or 1"))),
                };
                labels.push(label);
                continue;
            }
            let Some(f) = column_feature.get(c).copied().flatten() else {
                return Err(load_err("extra cell beyond header".into()));
            };
            let spec = schema.feature(f);
            if cell.is_empty() {
                if options.median_fill && !spec.is_categorical() {
                    continue;
                }
                return Err(load_err("missing value".into()));
            }
            row[f] = Some(match &spec.kind {
                FeatureKind::Categorical { .. } => {
                    if spec.value_index(cell).is_none() {
                        return Err(load_err(format!("label `{cell}` not in schema values")));
                    }
                    RawValue::Category(cell.to_string())
                }
                FeatureKind::Continuous { min, max, .. } => {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| load_err(format!("cannot parse `{cell}` as a number")))?;
                    if !(v >= *min && v <= *max) {
                        return Err(load_err(format!("value {v} outside [{min}, {max}]")));
                    }
                    RawValue::Number(v)
                }
            });
        }
        if record.len() < headers.len() {
            return Err(Error::Load {
                row: r,
                column: headers[record.len()].clone(),
                message: "row has too few cells".into(),
            });
        }
        cells.push(row);
    }

    if options.median_fill {
        for f in 0..schema.len() {
            if schema.feature(f).is_categorical() {
                continue;
            }
            let mut present: Vec<f64> = cells
                .iter()
                .filter_map(|row| match &row[f] {
                    Some(RawValue::Number(v)) => Some(*v),
                    _ => None,
                })
                .collect();
            if present.len() == cells.len() {
                continue;
            }
            if present.is_empty() {
                return Err(Error::Load {
                    row: 0,
                    column: schema.feature(f).name.clone(),
                    message: "column has no values to compute a median".into(),
                });
            }
            let median = median(&mut present);
            for row in &mut cells {
                row[f].get_or_insert(RawValue::Number(median));
            }
        }
    }

    let raw: Vec<Vec<RawValue>> = cells
        .into_iter()
        .map(|row| row.into_iter().map(|v| v.expect("cell filled")).collect())
        .collect();
    let ds = Dataset::from_raw(schema, &raw)?;
    if label_index.is_some() {
        ds.with_labels(labels)
    } else {
        Ok(ds)
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Writes the dataset as CSV with raw labels (plus the label column when present).
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| Error::parse(path, e);
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let schema = dataset.schema();
    let mut header: Vec<String> = schema.features().iter().map(|f| f.name.clone()).collect();
    let label_col = schema.label_column().unwrap_or("label").to_string();
    if dataset.labels().is_some() {
        header.push(label_col);
    }
    w.write_record(&header).map_err(io)?;
    for (i, row) in dataset.rows().enumerate() {
        let mut record: Vec<String> = schema
            .decode(row)?
            .into_iter()
            .map(|v| match v {
                RawValue::Category(s) => s,
                RawValue::Number(x) => format!("{x}"),
            })
            .collect();
        if let Some(labels) = dataset.labels() {
            record.push(labels[i].to_string());
        }
        w.write_record(&record).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Rows the predictor assigns the undesired class 0.
pub fn select_affected(dataset: &Dataset, predictor: &dyn Predictor) -> Result<Dataset> {
    dataset.schema().check_dim(predictor.dim())?;
    let keep: Vec<usize> = (0..dataset.len())
        .filter(|&i| predictor.predict(dataset.row(i)) == 0)
        .collect();
    Ok(dataset.select(&keep))
}

/// Seeded proportional split into `(train, test)`; `train_fraction` in `[0, 1]`.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::InvalidArgument(format!(
            "train fraction {train_fraction} not in [0, 1]"
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (train_fraction * dataset.len() as f64).round() as usize;
    let (a, b) = order.split_at(cut);
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    Ok((dataset.select(&a), dataset.select(&b)))
}

/// Conjunction of categorical equality predicates, validated against a schema.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SubgroupDescriptor {
    /// `(feature index, value index)`, sorted by feature, at most one per feature.
    predicates: Vec<(usize, usize)>,
}

impl SubgroupDescriptor {
    /// The empty conjunction (matches every row).
    pub fn all() -> Self {
        Self::default()
    }

    pub fn new<F: AsRef<str>, V: AsRef<str>>(
        schema: &FeatureSchema,
        predicates: impl IntoIterator<Item = (F, V)>,
    ) -> Result<Self> {
        let mut out = SubgroupDescriptor::all();
        for (f, v) in predicates {
            let (f, v) = (f.as_ref(), v.as_ref());
            let fi = schema.index_of(f).ok_or_else(|| {
                Error::Schema(format!("subgroup references unknown feature `{f}`"))
            })?;
            let spec = schema.feature(fi);
            if !spec.is_categorical() {
                return Err(Error::Schema(format!(
                    "subgroup feature `{f}` is not categorical"
                )));
            }
            let vi = spec
                .value_index(v)
                .ok_or_else(|| Error::Schema(format!("feature `{f}` has no value `{v}`")))?;
            out = out.and(&SubgroupDescriptor {
                predicates: vec![(fi, vi)],
            })?;
        }
        Ok(out)
    }

    pub fn predicates(&self) -> &[(usize, usize)] {
        &self.predicates
    }

    pub fn is_empty(&self) -> bool {
        self.predicates.is_empty()
    }

    /// Conjunction; fails when both sides pin one feature to different values.
    pub fn and(&self, other: &SubgroupDescriptor) -> Result<Self> {
        let mut preds = self.predicates.clone();
        for &(f, v) in &other.predicates {
            match preds.iter().find(|(pf, _)| *pf == f) {
                Some(&(_, pv)) if pv != v => {
                    return Err(Error::Schema(format!(
                        "unsatisfiable subgroup: feature {f} pinned to values {pv} and {v}"
                    )))
                }
                Some(_) => {}
                None => preds.push((f, v)),
            }
        }
        preds.sort_unstable();
        Ok(SubgroupDescriptor { predicates: preds })
    }

    pub fn matches(&self, schema: &FeatureSchema, row: &[f64]) -> bool {
        self.predicates
            .iter()
            .all(|&(f, v)| row[schema.offset(f) + v] == 1.0)
    }

    /// True when no row can satisfy both descriptors.
    pub fn is_disjoint_from(&self, other: &SubgroupDescriptor) -> bool {
        self.and(other).is_err()
    }

    pub fn describe(&self, schema: &FeatureSchema) -> String {
        if self.predicates.is_empty() {
            return "all".into();
        }
        self.predicates
            .iter()
            .map(|&(f, v)| {
                let spec = schema.feature(f);
                format!("{} = {}", spec.name, spec.values().expect("categorical")[v])
            })
            .collect::<Vec<_>>()
            .join(" AND ")
    }

    fn check_schema(&self, schema: &FeatureSchema) -> Result<()> {
        for &(f, v) in &self.predicates {
            let ok = f < schema.len()
                && schema
                    .feature(f)
                    .values()
                    .is_some_and(|vals| v < vals.len());
            if !ok {
                return Err(Error::Schema(format!(
                    "subgroup predicate ({f}, {v}) does not fit the schema"
                )));
            }
        }
        Ok(())
    }
}

/// Rows satisfying every predicate of `descriptor`.
pub fn slice_subgroup(dataset: &Dataset, descriptor: &SubgroupDescriptor) -> Result<Dataset> {
    descriptor.check_schema(dataset.schema())?;
    let schema = Arc::clone(dataset.schema_arc());
    Ok(dataset.filter(|row| descriptor.matches(&schema, row)))
}

/// Rows failing at least one predicate (the complement of [`slice_subgroup`]).
pub fn slice_complement(dataset: &Dataset, descriptor: &SubgroupDescriptor) -> Result<Dataset> {
    descriptor.check_schema(dataset.schema())?;
    let schema = Arc::clone(dataset.schema_arc());
    Ok(dataset.filter(|row| !descriptor.matches(&schema, row)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predictors::Model;
    use crate::schema::FeatureSpec;

    fn ab_schema() -> Arc<FeatureSchema> {
        Arc::new(
            FeatureSchema::new(vec![
                FeatureSpec::categorical("c", ["A", "B"]),
                FeatureSpec::continuous("x", 0.0, 10.0),
            ])
            .unwrap(),
        )
    }

    fn parse(text: &str, schema: Arc<FeatureSchema>) -> Result<Dataset> {
        parse_csv(text.as_bytes(), schema, LoadOptions::default())
    }

    #[test]
    fn csv_encodes_rows() {
        let ds = parse("c,x\nA,4.2\nB,0\nA,10\n", ab_schema()).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.row(0), &[1.0, 0.0, 4.2]);
        assert_eq!(ds.row(1), &[0.0, 1.0, 0.0]);
        assert_eq!(ds.ids(), &[0, 1, 2]);
    }

    #[test]
    fn csv_column_order_is_free() {
        let ds = parse("x,c\n4.2,A\n", ab_schema()).unwrap();
        assert_eq!(ds.row(0), &[1.0, 0.0, 4.2]);
    }

    #[test]
    fn csv_errors_name_row_and_column() {
        let err = parse("c,x\nA,1\nC,4.2\n", ab_schema()).unwrap_err();
        match err {
            Error::Load { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "c");
            }
            other => panic!("unexpected {other}"),
        }
        assert!(
            matches!(parse("c,x,z\nA,1,2\n", ab_schema()), Err(Error::Load { column, .. }) if column == "z")
        );
        assert!(
            matches!(parse("c,x\nA,abc\n", ab_schema()), Err(Error::Load { column, .. }) if column == "x")
        );
        assert!(matches!(
            parse("c,x\nA,11\n", ab_schema()),
            Err(Error::Load { .. })
        ));
        assert!(
            matches!(parse("c\nA\n", ab_schema()), Err(Error::Load { column, .. }) if column == "x")
        );
    }

    #[test]
    fn missing_values_rejected_unless_median_fill() {
        let text = "c,x\nA,1\nB,\nA,5\nB,9\n";
        assert!(matches!(
            parse(text, ab_schema()),
            Err(Error::Load { row: 1, .. })
        ));
        let ds = parse_csv(
            text.as_bytes(),
            ab_schema(),
            LoadOptions { median_fill: true },
        )
        .unwrap();
        assert_eq!(ds.row(1)[2], 5.0);
        let cat_missing = "c,x\n,1\n";
        assert!(parse_csv(
            cat_missing.as_bytes(),
            ab_schema(),
            LoadOptions { median_fill: true }
        )
        .is_err());
    }

    #[test]
    fn label_column() {
        let schema = Arc::new((*ab_schema()).clone().with_label_column("y"));
        let ds = parse("c,x,y\nA,1,0\nB,2,1\n", schema.clone()).unwrap();
        assert_eq!(ds.labels(), Some(&[0u8, 1][..]));
        assert!(parse("c,x,y\nA,1,3\n", schema).is_err());
    }

    #[test]
    fn select_affected_examples() {
        let schema =
            Arc::new(FeatureSchema::new(vec![FeatureSpec::continuous("x", -5.0, 5.0)]).unwrap());
        let ds = Dataset::from_rows(schema.clone(), vec![vec![-1.0], vec![2.0]]).unwrap();
        let model = Model::logistic(vec![1.0], 0.0);
        let aff = select_affected(&ds, &model).unwrap();
        assert_eq!(aff.len(), 1);
        assert_eq!(aff.row(0), &[-1.0]);
        assert_eq!(aff.ids(), &[0]);

        let none = select_affected(&ds, &Model::logistic(vec![0.0], 1.0)).unwrap();
        assert!(none.is_empty());

        let wrong = Model::logistic(vec![1.0, 1.0], 0.0);
        assert!(matches!(
            select_affected(&ds, &wrong),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn select_affected_matches_per_row_prediction() {
        let schema = Arc::new(
            FeatureSchema::new(vec![
                FeatureSpec::continuous("x", 0.0, 10.0),
                FeatureSpec::continuous("y", 0.0, 10.0),
            ])
            .unwrap(),
        );
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![i as f64, (7 * i % 10) as f64])
            .collect();
        let ds = Dataset::from_rows(schema, rows.clone()).unwrap();
        let model = Model::logistic(vec![1.0, -0.5], -2.0);
        let expected: Vec<usize> = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r[0] - 0.5 * r[1] - 2.0 <= 0.0)
            .map(|(i, _)| i)
            .collect();
        let aff = select_affected(&ds, &model).unwrap();
        assert_eq!(aff.ids(), expected.as_slice());
    }

    fn people() -> Dataset {
        let schema = Arc::new(
            FeatureSchema::new(vec![
                FeatureSpec::categorical("sex", ["Male", "Female"]),
                FeatureSpec::categorical("job", ["a", "b", "c"]),
            ])
            .unwrap(),
        );
        let raw =
            |s: &str, j: &str| vec![RawValue::Category(s.into()), RawValue::Category(j.into())];
        Dataset::from_raw(
            schema,
            &[
                raw("Male", "a"),
                raw("Female", "b"),
                raw("Male", "c"),
                raw("Male", "b"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn slice_examples() {
        let ds = people();
        let male = SubgroupDescriptor::new(ds.schema(), [("sex", "Male")]).unwrap();
        let sliced = slice_subgroup(&ds, &male).unwrap();
        assert_eq!(sliced.ids(), &[0, 2, 3]);
        assert_eq!(slice_complement(&ds, &male).unwrap().ids(), &[1]);
        assert_eq!(slice_subgroup(&ds, &SubgroupDescriptor::all()).unwrap(), ds);

        let both = SubgroupDescriptor::new(ds.schema(), [("sex", "Male"), ("job", "b")]).unwrap();
        let job_b = SubgroupDescriptor::new(ds.schema(), [("job", "b")]).unwrap();
        let inter: Vec<usize> = sliced
            .ids()
            .iter()
            .copied()
            .filter(|id| slice_subgroup(&ds, &job_b).unwrap().ids().contains(id))
            .collect();
        assert_eq!(slice_subgroup(&ds, &both).unwrap().ids(), inter.as_slice());
    }

    #[test]
    fn descriptor_errors() {
        let ds = people();
        assert!(SubgroupDescriptor::new(ds.schema(), [("age", "x")]).is_err());
        assert!(SubgroupDescriptor::new(ds.schema(), [("sex", "Other")]).is_err());
        assert!(
            SubgroupDescriptor::new(ds.schema(), [("sex", "Male"), ("sex", "Female")]).is_err()
        );
        let m = SubgroupDescriptor::new(ds.schema(), [("sex", "Male")]).unwrap();
        let f = SubgroupDescriptor::new(ds.schema(), [("sex", "Female")]).unwrap();
        assert!(m.is_disjoint_from(&f));
        assert!(!m.is_disjoint_from(&m));
        assert_eq!(m.describe(ds.schema()), "sex = Male");
    }

    #[test]
    fn split_is_seeded_and_proportional() {
        let ds = people();
        let (a, b) = split(&ds, 0.5, 3).unwrap();
        assert_eq!(a.len(), 2);
        assert_eq!(b.len(), 2);
        let (a2, _) = split(&ds, 0.5, 3).unwrap();
        assert_eq!(a, a2);
        assert!(split(&ds, 1.5, 3).is_err());
    }
}
