use crate::error::Error;
use crate::linalg::{mean, quantile};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Mean RSS of one method on one test environment of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RssRow {
    pub method: String,
    pub replicate: usize,
    /// Sweep parameter, when the experiment has one.
    pub setting: Option<f64>,
    pub env: String,
    pub mean_rss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum ReplicateStatus {
    Ok,
    Skipped { reason: String },
}

/// What happened in one replicate besides the numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateLog {
    pub replicate: usize,
    pub setting: Option<f64>,
    #[serde(flatten)]
    pub status: ReplicateStatus,
    /// Candidates used by each IMP method.
    pub selected: BTreeMap<String, Vec<String>>,
    /// Fallbacks and method failures.
    pub notes: Vec<String>,
}

impl ReplicateLog {
    pub fn new(replicate: usize, setting: Option<f64>) -> Self {
        ReplicateLog { replicate, setting, status: ReplicateStatus::Ok, selected: BTreeMap::new(), notes: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: String,
    pub rows: Vec<RssRow>,
    pub logs: Vec<ReplicateLog>,
}

/// Aggregate of per-replicate mean RSS values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub replicates: usize,
    pub mean: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub iqr: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let (q25, q75) = (quantile(values, 0.25), quantile(values, 0.75));
        Some(Aggregate { replicates: values.len(), mean: mean(values), median: quantile(values, 0.5), q25, q75, iqr: q75 - q25 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting: f64,
    pub methods: BTreeMap<String, Aggregate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub kind: String,
    pub methods: BTreeMap<String, Aggregate>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub settings: Vec<SettingSummary>,
    pub skipped: usize,
    pub replicates: Vec<ReplicateLog>,
}

pub const QUANTILE_LEVELS: [f64; 7] = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    /// `rss_long.csv`: one row per method, replicate and test environment.
    Csv,
    /// `summary.json`: per-method aggregates and replicate logs.
    Json,
    /// `quantiles.csv`: per-method quantiles of the replicate means.
    Quantiles,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::Csv, ReportFormat::Json, ReportFormat::Quantiles];
}

fn setting_key(s: Option<f64>) -> Option<u64> {
    s.map(f64::to_bits)
}

impl EvalReport {
    /// Methods in order of first appearance.
    pub fn methods(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.method) {
                out.push(r.method.clone());
            }
        }
        out
    }

    /// Sweep values in order of first appearance.
    pub fn settings(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in self.rows.iter().filter_map(|r| r.setting) {
            if !out.iter().any(|&v| v.to_bits() == s.to_bits()) {
                out.push(s);
            }
        }
        out
    }

    /// Per-replicate means over test environments, in replicate order.
    /// `setting = None` pools all settings.
    pub fn replicate_means(&self, method: &str, setting: Option<f64>) -> Vec<f64> {
        let mut acc: BTreeMap<(usize, Option<u64>), (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.method == method) {
            if setting.is_some() && setting_key(r.setting) != setting_key(setting) {
                continue;
            }
            let e = acc.entry((r.replicate, setting_key(r.setting))).or_insert((0.0, 0));
            e.0 += r.mean_rss;
            e.1 += 1;
        }
        acc.values().map(|&(s, c)| s / c as f64).collect()
    }

    /// Mean RSS of `method` on each test environment, averaged over replicates.
    pub fn per_env(&self, method: &str) -> Vec<(String, f64)> {
        let mut order: Vec<String> = Vec::new();
        let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.method == method) {
            if !acc.contains_key(&r.env) {
                order.push(r.env.clone());
            }
            let e = acc.entry(r.env.clone()).or_insert((0.0, 0));
            e.0 += r.mean_rss;
            e.1 += 1;
        }
        order.into_iter().map(|env| {
            let (s, c) = acc[&env];
            (env, s / c as f64)
        }).collect()
    }

    pub fn aggregate(&self, method: &str, setting: Option<f64>) -> Option<Aggregate> {
        Aggregate::of(&self.replicate_means(method, setting))
    }

    pub fn summary(&self) -> Summary {
        let methods = self.methods();
        let by_method = methods.iter().filter_map(|m| self.aggregate(m, None).map(|a| (m.clone(), a))).collect();
        let settings = self
            .settings()
            .into_iter()
            .map(|s| SettingSummary {
                setting: s,
                methods: methods.iter().filter_map(|m| self.aggregate(m, Some(s)).map(|a| (m.clone(), a))).collect(),
            })
            .collect();
        Summary {
            kind: self.kind.clone(),
            methods: by_method,
            settings,
            skipped: self.logs.iter().filter(|l| matches!(l.status, ReplicateStatus::Skipped { .. })).count(),
            replicates: self.logs.clone(),
        }
    }

    pub fn write_long_csv<W: std::io::Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "replicate", "setting", "env", "mean_rss"])?;
        for r in &self.rows {
            w.write_record([
                r.method.clone(),
                r.replicate.to_string(),
                r.setting.map(|s| s.to_string()).unwrap_or_default(),
                r.env.clone(),
                r.mean_rss.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_quantiles<W: std::io::Write>(&self, out: W) -> Result<(), Error> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["method".to_string(), "setting".to_string(), "replicates".to_string()];
        header.extend(QUANTILE_LEVELS.iter().map(|q| format!("q{:02}", (q * 100.0).round() as u32)));
        w.write_record(&header)?;
        let mut settings: Vec<Option<f64>> = self.settings().into_iter().map(Some).collect();
        if settings.is_empty() {
            settings.push(None);
        }
        for m in self.methods() {
            for &s in &settings {
                let values = self.replicate_means(&m, s);
                if values.is_empty() {
                    continue;
                }
                let mut rec = vec![m.clone(), s.map(|v| v.to_string()).unwrap_or_default(), values.len().to_string()];
                rec.extend(QUANTILE_LEVELS.iter().map(|&q| quantile(&values, q).to_string()));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Write the requested formats into `dir` (created if missing) and return the file paths.
pub fn emit_report(report: &EvalReport, dir: impl AsRef<Path>, formats: &[ReportFormat]) -> Result<Vec<PathBuf>, Error> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for f in formats {
        let path = match f {
            ReportFormat::Csv => {
                let p = dir.join("rss_long.csv");
                report.write_long_csv(fs::File::create(&p)?)?;
                p
            }
            ReportFormat::Json => {
                let p = dir.join("summary.json");
                let mut text = serde_json::to_string_pretty(&report.summary())?;
                text.push('\n');
                fs::write(&p, text)?;
                p
            }
            ReportFormat::Quantiles => {
                let p = dir.join("quantiles.csv");
                report.write_quantiles(fs::File::create(&p)?)?;
                p
            }
        };
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, replicate: usize, env: &str, v: f64) -> RssRow {
        RssRow { method: method.into(), replicate, setting: None, env: env.into(), mean_rss: v }
    }

    fn two_methods() -> EvalReport {
        EvalReport {
            kind: "test".into(),
            rows: vec![
                row("imp", 0, "a", 1.0),
                row("imp", 0, "b", 3.0),
                row("ols", 0, "a", 4.0),
                row("ols", 0, "b", 6.0),
                row("imp", 1, "a", 5.0),
                row("imp", 1, "b", 5.0),
                row("ols", 1, "a", 1.0),
                row("ols", 1, "b", 1.0),
            ],
            logs: vec![ReplicateLog::new(0, None), ReplicateLog::new(1, None)],
        }
    }

    #[test]
    fn empty_report_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        emit_report(&EvalReport::default(), dir.path(), &ReportFormat::ALL).unwrap();
        let text = fs::read_to_string(dir.path().join("rss_long.csv")).unwrap();
        assert_eq!(text, "method,replicate,setting,env,mean_rss\n");
    }

    #[test]
    fn summary_has_one_key_per_method_and_is_recomputable() {
        let report = two_methods();
        let s = report.summary();
        assert_eq!(s.methods.keys().collect::<Vec<_>>(), ["imp", "ols"]);
        // Replicate means are 2 and 5 for imp, 5 and 1 for ols.
        assert_eq!(report.replicate_means("imp", None), vec![2.0, 5.0]);
        assert_eq!(s.methods["imp"].median, 3.5);
        assert_eq!(s.methods["ols"].mean, 3.0);
        let json: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(json["methods"].as_object().unwrap().len(), 2);
        assert_eq!(report.per_env("imp"), vec![("a".to_string(), 3.0), ("b".to_string(), 4.0)]);
    }

    #[test]
    fn rerun_is_byte_identical() {
        let report = two_methods();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let fa = emit_report(&report, a.path(), &ReportFormat::ALL).unwrap();
        let fb = emit_report(&report, b.path(), &ReportFormat::ALL).unwrap();
        for (x, y) in fa.iter().zip(&fb) {
            assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
        }
    }

    #[test]
    fn settings_are_summarised_separately() {
        let mut report = two_methods();
        for (i, r) in report.rows.iter_mut().enumerate() {
            r.setting = Some(if i < 4 { 0.0 } else { 0.5 });
        }
        let s = report.summary();
        assert_eq!(s.settings.len(), 2);
        assert_eq!(s.settings[1].methods["imp"].median, 5.0);
        let mut buf = Vec::new();
        report.write_quantiles(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 4);
    }
}
