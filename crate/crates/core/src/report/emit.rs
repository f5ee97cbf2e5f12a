use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::svg::{histogram_chart, line_chart, Panel, Series};
use super::{BiasReport, Histogram, ProfilePoint};
use crate::error::{Error, Result};
use crate::rules::RuleChart;

/// Writes artifacts into one output directory and records their names.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ArtifactWriter {
            dir,
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// File names written so far, in write order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn text(&mut self, name: &str, content: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, content).map_err(|e| Error::io(&path, e))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| Error::parse(self.dir.join(name), e))?;
        s.push('\n');
        self.text(name, &s)
    }

    /// `profile_{i}.csv` and `profile_{i}.svg`.
    pub fn profile(&mut self, i: usize, profile: &[ProfilePoint]) -> Result<()> {
        write_profile(
            self,
            &format!("profile_{i}"),
            &format!("translation {i}"),
            profile,
        )
    }

    /// `hist_{i}.csv` and `hist_{i}.svg`.
    pub fn histogram(&mut self, i: usize, hist: &Histogram) -> Result<()> {
        write_histogram(
            self,
            &format!("hist_{i}"),
            &format!("translation {i}"),
            hist,
        )
    }

    /// `crc_{i}.md` and `crc_{i}.csv`.
    pub fn crc(&mut self, i: usize, chart: &RuleChart) -> Result<()> {
        write_crc(self, &format!("crc_{i}"), chart)
    }
}

pub fn profile_csv(profile: &[ProfilePoint]) -> String {
    let mut out = String::from("k,coverage,avg_cost\n");
    for p in profile {
        let _ = writeln!(out, "{},{},{}", p.k, p.coverage, p.avg_cost);
    }
    out
}

pub fn histogram_csv(hist: &Histogram) -> String {
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in hist.counts.iter().enumerate() {
        let (lo, hi) = hist.bin_range(i);
        let _ = writeln!(out, "{lo},{hi},{c}");
    }
    out
}

pub fn write_profile(
    w: &mut ArtifactWriter,
    stem: &str,
    title: &str,
    profile: &[ProfilePoint],
) -> Result<()> {
    w.text(&format!("{stem}.csv"), &profile_csv(profile))?;
    let series = |name: &str, f: fn(&ProfilePoint) -> f64| Series {
        name: name.into(),
        points: profile.iter().map(|p| (p.k, f(p))).collect(),
    };
    let svg = line_chart(&[
        Panel {
            title: format!("Coverage, {title}"),
            x_label: "k".into(),
            y_label: "coverage".into(),
            series: vec![series("coverage", |p| p.coverage)],
        },
        Panel {
            title: format!("Average cost, {title}"),
            x_label: "k".into(),
            y_label: "average cost".into(),
            series: vec![series("average cost", |p| p.avg_cost)],
        },
    ]);
    w.text(&format!("{stem}.svg"), &svg)
}

pub fn write_histogram(
    w: &mut ArtifactWriter,
    stem: &str,
    title: &str,
    hist: &Histogram,
) -> Result<()> {
    w.text(&format!("{stem}.csv"), &histogram_csv(hist))?;
    let note = format!("uncovered: {}", hist.uncovered);
    let svg = histogram_chart(
        &format!("Minimum costs per input, {title}"),
        "minimum cost",
        hist.width,
        &hist.counts,
        Some(&note),
    );
    w.text(&format!("{stem}.svg"), &svg)
}

pub fn write_crc(w: &mut ArtifactWriter, stem: &str, chart: &RuleChart) -> Result<()> {
    w.text(&format!("{stem}.md"), &chart.to_markdown())?;
    w.text(&format!("{stem}.csv"), &chart.to_delimited(','))
}

/// `bias_report.json`, `bias_summary.csv`, and per-subgroup profiles and
/// histograms (native and under the other subgroup's translation).
pub fn write_bias_report(w: &mut ArtifactWriter, report: &BiasReport) -> Result<()> {
    w.json("bias_report.json", report)?;
    for (tag, side) in [("a", &report.a), ("b", &report.b)] {
        let title = format!("subgroup {}", side.label);
        write_profile(w, &format!("profile_{tag}"), &title, &side.profile)?;
        write_histogram(w, &format!("hist_{tag}"), &title, &side.native.histogram)?;
        write_histogram(
            w,
            &format!("hist_{tag}_fluid"),
            &format!("{title}, other translation"),
            &side.fluid.histogram,
        )?;
    }
    let mut summary =
        String::from("subgroup,translation_from,n_inputs,coverage,avg_cost,median_cost\n");
    let cell = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    for (side, other) in [(&report.a, &report.b), (&report.b, &report.a)] {
        for (from, s) in [(&side.label, &side.native), (&other.label, &side.fluid)] {
            let _ = writeln!(
                summary,
                "{},{},{},{},{},{}",
                side.label,
                from,
                s.n_inputs,
                s.coverage,
                cell(s.avg_cost),
                cell(s.median_cost)
            );
        }
    }
    w.text("bias_summary.csv", &summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_format_and_repeatability() {
        let dir = tempfile::tempdir().unwrap();
        let p = vec![
            ProfilePoint {
                k: 0.0,
                coverage: 0.0,
                avg_cost: 0.0,
            },
            ProfilePoint {
                k: 0.5,
                coverage: 0.25,
                avg_cost: 1.5,
            },
        ];
        let mut w = ArtifactWriter::new(dir.path().join("out")).unwrap();
        w.profile(0, &p).unwrap();
        let first = fs::read(w.dir().join("profile_0.csv")).unwrap();
        assert_eq!(
            String::from_utf8(first.clone()).unwrap(),
            "k,coverage,avg_cost\n0,0,0\n0.5,0.25,1.5\n"
        );
        w.profile(0, &p).unwrap();
        assert_eq!(fs::read(w.dir().join("profile_0.csv")).unwrap(), first);
        assert_eq!(w.written(), ["profile_0.csv", "profile_0.svg"]);
    }

    #[test]
    fn histogram_format() {
        let h = Histogram {
            width: 0.5,
            counts: vec![2, 0, 1],
            uncovered: 4,
        };
        assert_eq!(
            histogram_csv(&h),
            "bin_start,bin_end,count\n0,0.5,2\n0.5,1,0\n1,1.5,1\n"
        );
    }
}
