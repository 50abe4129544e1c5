//! Report rows and their JSON / CSV forms.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::CheckName;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Rule {
    /// `|z| <= max`.
    ZScore { max: f64 },
    /// `|estimate - analytic| <= tol`.
    AbsTol { tol: f64 },
    /// `estimate >= min`.
    AtLeast { min: f64 },
    /// `estimate` is 1 for yes.
    Flag,
}

impl Rule {
    fn describe(&self) -> String {
        match self {
            Rule::ZScore { max } => format!("|z|<={max}"),
            Rule::AbsTol { tol } => format!("abs<={tol:e}"),
            Rule::AtLeast { min } => format!(">={min}"),
            Rule::Flag => "flag".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metric {
    pub name: String,
    pub analytic: Option<f64>,
    pub estimate: f64,
    pub se: Option<f64>,
    pub z: Option<f64>,
    pub rule: Rule,
    pub passed: bool,
}

impl Metric {
    pub fn z_test(name: &str, analytic: f64, estimate: f64, se: f64, max: f64) -> Self {
        let diff = estimate - analytic;
        let z = if diff == 0.0 { 0.0 } else { diff / se };
        Self {
            name: name.into(),
            analytic: Some(analytic),
            estimate,
            se: Some(se),
            z: Some(z),
            rule: Rule::ZScore { max },
            passed: z.abs() <= max,
        }
    }

    pub fn abs_tol(name: &str, analytic: f64, estimate: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            analytic: Some(analytic),
            estimate,
            se: None,
            z: None,
            rule: Rule::AbsTol { tol },
            passed: (estimate - analytic).abs() <= tol,
        }
    }

    pub fn at_least(name: &str, estimate: f64, min: f64) -> Self {
        Self { name: name.into(), analytic: None, estimate, se: None, z: None, rule: Rule::AtLeast { min }, passed: estimate >= min }
    }

    pub fn flag(name: &str, ok: bool) -> Self {
        Self {
            name: name.into(),
            analytic: None,
            estimate: if ok { 1.0 } else { 0.0 },
            se: None,
            z: None,
            rule: Rule::Flag,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// One simulated replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: u64,
    pub t: f64,
    pub masses: Vec<f64>,
    /// `e^{-X_t(f)}`, or `e^{-X_t(f) - ∫X_s(g)ds}` for occupation runs.
    pub laplace: f64,
    pub integral: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub check: CheckName,
    pub target: Option<String>,
    pub status: Status,
    pub metrics: Vec<Metric>,
    pub message: Option<String>,
    #[serde(skip)]
    pub replicates: Vec<ReplicateRow>,
}

impl Row {
    pub fn finished(check: CheckName, target: Option<String>, metrics: Vec<Metric>, replicates: Vec<ReplicateRow>) -> Self {
        let status = if metrics.iter().all(|m| m.passed) { Status::Pass } else { Status::Fail };
        Self { check, target, status, metrics, message: None, replicates }
    }

    pub fn errored(check: CheckName, target: Option<String>, message: String) -> Self {
        Self { check, target, status: Status::Error, metrics: Vec::new(), message: Some(message), replicates: Vec::new() }
    }

    pub fn metric(&self, name: &str) -> Option<&Metric> {
        self.metrics.iter().find(|m| m.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub name: String,
    pub seed: u64,
    pub version: String,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub metadata: Metadata,
    pub rows: Vec<Row>,
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    check: &'a str,
    target: &'a str,
    status: Status,
    metric: &'a str,
    analytic: Option<f64>,
    estimate: Option<f64>,
    se: Option<f64>,
    z: Option<f64>,
    rule: String,
    passed: Option<bool>,
    message: &'a str,
}

#[derive(Serialize)]
struct ReplicateLine<'a> {
    check: &'a str,
    target: &'a str,
    replicate: u64,
    t: f64,
    masses: String,
    laplace: f64,
    integral: Option<f64>,
}

impl Report {
    pub fn status(&self, status: Status) -> usize {
        self.rows.iter().filter(|r| r.status == status).count()
    }

    /// 2 if any check errored, else 1 if any failed, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.status(Status::Error) > 0 {
            2
        } else if self.status(Status::Fail) > 0 {
            1
        } else {
            0
        }
    }

    /// Everything except the wall time, replicate rows included, serialized
    /// with round-trip float formatting.
    pub fn fingerprint(&self) -> String {
        let reps: Vec<&Vec<ReplicateRow>> = self.rows.iter().map(|r| &r.replicates).collect();
        let mut meta = self.metadata.clone();
        meta.wall_time = 0.0;
        serde_json::to_string(&(meta, &self.rows, reps)).expect("report serializes")
    }

    pub fn same_results(&self, other: &Self) -> bool {
        self.fingerprint() == other.fingerprint()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write_summary_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            let target = row.target.as_deref().unwrap_or("");
            let message = row.message.as_deref().unwrap_or("");
            if row.metrics.is_empty() {
                out.serialize(SummaryLine {
                    check: row.check.as_str(),
                    target,
                    status: row.status,
                    metric: "",
                    analytic: None,
                    estimate: None,
                    se: None,
                    z: None,
                    rule: String::new(),
                    passed: None,
                    message,
                })?;
            }
            for m in &row.metrics {
                out.serialize(SummaryLine {
                    check: row.check.as_str(),
                    target,
                    status: row.status,
                    metric: &m.name,
                    analytic: m.analytic,
                    estimate: Some(m.estimate),
                    se: m.se,
                    z: m.z,
                    rule: m.rule.describe(),
                    passed: Some(m.passed),
                    message,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_replicates_csv<W: io::Write>(&self, w: W) -> csv::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for row in &self.rows {
            for r in &row.replicates {
                out.serialize(ReplicateLine {
                    check: row.check.as_str(),
                    target: row.target.as_deref().unwrap_or(""),
                    replicate: r.replicate,
                    t: r.t,
                    masses: r.masses.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"),
                    laplace: r.laplace,
                    integral: r.integral,
                })?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes `report.json`, `summary.csv` and `replicates.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> anyhow::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json())?;
        self.write_summary_csv(fs::File::create(dir.join("summary.csv"))?)?;
        self.write_replicates_csv(fs::File::create(dir.join("replicates.csv"))?)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(rows: Vec<Row>) -> Report {
        Report { metadata: Metadata { name: "t".into(), seed: 1, version: "0".into(), wall_time: 1.5 }, rows }
    }

    #[test]
    fn exit_codes() {
        let pass = Row::finished(CheckName::MomentFlow, None, vec![Metric::z_test("m", 1.0, 1.1, 0.1, 4.0)], vec![]);
        let fail = Row::finished(CheckName::MomentFlow, None, vec![Metric::abs_tol("m", 0.0, 1.0, 1e-5)], vec![]);
        let err = Row::errored(CheckName::Stationary, None, "boom".into());
        assert_eq!(report(vec![]).exit_code(), 0);
        assert_eq!(report(vec![pass.clone()]).exit_code(), 0);
        assert_eq!(report(vec![pass.clone(), fail.clone()]).exit_code(), 1);
        assert_eq!(report(vec![fail, err]).exit_code(), 2);
    }

    #[test]
    fn fingerprint_ignores_wall_time_only() {
        let row = Row::finished(
            CheckName::MomentFlow,
            Some("x".into()),
            vec![Metric::flag("ok", true)],
            vec![ReplicateRow { replicate: 0, t: 1.0, masses: vec![0.5], laplace: 0.6, integral: None }],
        );
        let a = report(vec![row.clone()]);
        let mut b = a.clone();
        b.metadata.wall_time = 99.0;
        assert!(a.same_results(&b));
        b.rows[0].replicates[0].laplace = 0.6000000000000001;
        assert!(!a.same_results(&b));
    }

    #[test]
    fn csv_has_a_line_per_metric() {
        let row = Row::finished(
            CheckName::MomentFlow,
            None,
            vec![Metric::flag("a", true), Metric::at_least("b", 0.5, 0.9)],
            vec![],
        );
        let mut buf = Vec::new();
        report(vec![row, Row::errored(CheckName::NearBirth, None, "x".into())]).write_summary_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().next().unwrap().starts_with("check,target,status,metric"));
    }
}
