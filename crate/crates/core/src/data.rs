//! In-memory panels and CSV ingestion.

use crate::error::{DataError, ScmError};
use crate::scm::{rng_for, sample_with_rng, toy_scm, EnvId, InterventionSpec, LinearScm};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Observations from one discrete environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub label: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl Environment {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Split a sampled matrix whose last column is the response.
    pub fn from_joint(label: impl Into<String>, joint: &DMatrix<f64>) -> Self {
        let d = joint.ncols() - 1;
        Environment {
            label: label.into(),
            x: joint.columns(0, d).into_owned(),
            y: joint.column(d).into_owned(),
        }
    }
}

/// Observations grouped by discrete environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub feature_names: Vec<String>,
    pub envs: Vec<Environment>,
}

impl Panel {
    pub fn new(envs: Vec<Environment>) -> Self {
        let d = envs.first().map_or(0, |e| e.x.ncols());
        Panel { feature_names: (0..d).map(|j| format!("X{j}")).collect(), envs }
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_total(&self) -> usize {
        self.envs.iter().map(Environment::n).sum()
    }

    pub fn min_n(&self) -> usize {
        self.envs.iter().map(Environment::n).min().unwrap_or(0)
    }

    /// Stacked predictors and responses in environment order, with the environment index per row.
    pub fn pooled(&self) -> (DMatrix<f64>, DVector<f64>, Vec<usize>) {
        let n = self.n_total();
        let d = self.d();
        let mut x = DMatrix::zeros(n, d);
        let mut y = DVector::zeros(n);
        let mut labels = Vec::with_capacity(n);
        let mut row = 0;
        for (e, env) in self.envs.iter().enumerate() {
            x.rows_mut(row, env.n()).copy_from(&env.x);
            y.rows_mut(row, env.n()).copy_from(&env.y);
            labels.extend(std::iter::repeat_n(e, env.n()));
            row += env.n();
        }
        (x, y, labels)
    }
}

/// Observations indexed by a continuous environment value `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousData {
    pub feature_names: Vec<String>,
    pub u: Vec<f64>,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl ContinuousData {
    pub fn new(u: Vec<f64>, joint: &DMatrix<f64>) -> Self {
        let env = Environment::from_joint("", joint);
        ContinuousData {
            feature_names: (0..env.x.ncols()).map(|j| format!("X{j}")).collect(),
            u,
            x: env.x,
            y: env.y,
        }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        ContinuousData {
            feature_names: self.feature_names.clone(),
            u: rows.iter().map(|&i| self.u[i]).collect(),
            x: self.x.select_rows(rows),
            y: self.y.select_rows(rows),
        }
    }
}

/// Sample `n` rows from each `(label, model)` pair, environment `e` using stream `e` of `seed`.
pub fn sample_panel(models: &[(String, LinearScm)], n: usize, seed: u64) -> Result<Panel, ScmError> {
    let envs = models
        .iter()
        .enumerate()
        .map(|(e, (label, scm))| {
            let spec = InterventionSpec::observational(EnvId::discrete(label.clone()));
            let joint = sample_with_rng(scm, &spec, n, &mut rng_for(seed, e as u64))?;
            Ok(Environment::from_joint(label.clone(), &joint))
        })
        .collect::<Result<Vec<_>, ScmError>>()?;
    Ok(Panel::new(envs))
}

/// Panel from the three-predictor toy model, one environment per coefficient `a`.
pub fn toy_panel(coefs: &[f64], n: usize, seed: u64) -> Panel {
    let models: Vec<(String, LinearScm)> = coefs.iter().enumerate().map(|(e, &a)| (format!("e{e}"), toy_scm(a))).collect();
    sample_panel(&models, n, seed).expect("toy model is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub enum PanelDataset {
    Discrete(Panel),
    Continuous(ContinuousData),
}

/// Column roles in a CSV file. Exactly one of `env_col` and `u_col` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(default)]
    pub env_col: Option<String>,
    #[serde(default)]
    pub u_col: Option<String>,
    pub y_col: String,
    pub feature_cols: Vec<String>,
}

/// Outcome of a CSV load besides the data itself.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    /// False when the response column is absent (prediction-only files).
    pub has_response: bool,
}

/// Load a training panel: the response column is required and discrete panels
/// need at least two environments.
pub fn load_panel_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<(PanelDataset, LoadReport), DataError> {
    let (data, report) = read_csv(path.as_ref(), schema, true)?;
    if let PanelDataset::Discrete(p) = &data {
        if p.envs.len() < 2 {
            return Err(DataError::SingleEnvironment(p.envs.len()));
        }
    }
    Ok((data, report))
}

/// Load a test file: the response column may be missing (filled with NaN) and
/// a single environment is allowed.
pub fn load_test_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<(PanelDataset, LoadReport), DataError> {
    read_csv(path.as_ref(), schema, false)
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize, DataError> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| DataError::MissingColumn(name.to_string()))
}

fn parse_cell(raw: &str, row: usize, name: &str) -> Result<Option<f64>, DataError> {
    let s = raw.trim();
    if s.is_empty() || s.eq_ignore_ascii_case("nan") || s.eq_ignore_ascii_case("na") {
        return Ok(None);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(DataError::NonNumeric { row, column: name.to_string(), value: raw.to_string() }),
    }
}

fn read_csv(path: &Path, schema: &Schema, require_y: bool) -> Result<(PanelDataset, LoadReport), DataError> {
    let continuous = match (&schema.env_col, &schema.u_col) {
        (Some(_), None) => false,
        (None, Some(_)) => true,
        _ => return Err(DataError::Schema),
    };
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let key_col = column(&headers, schema.env_col.as_deref().or(schema.u_col.as_deref()).unwrap())?;
    let y_col = match column(&headers, &schema.y_col) {
        Ok(c) => Some(c),
        Err(e) if require_y => return Err(e),
        Err(_) => None,
    };
    let feature_cols = schema
        .feature_cols
        .iter()
        .map(|c| column(&headers, c))
        .collect::<Result<Vec<_>, _>>()?;
    let d = feature_cols.len();

    let mut report = LoadReport { has_response: y_col.is_some(), ..LoadReport::default() };
    // Environments keep their order of first appearance.
    let mut env_order: Vec<String> = Vec::new();
    let mut env_rows: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    let (mut us, mut xs, mut ys) = (Vec::new(), Vec::new(), Vec::new());

    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let row = i + 2; // header is line 1
        report.rows_read += 1;
        let mut values = Vec::with_capacity(d);
        let mut missing = false;
        for (&c, name) in feature_cols.iter().zip(&schema.feature_cols) {
            match parse_cell(&record[c], row, name)? {
                Some(v) => values.push(v),
                None => missing = true,
            }
        }
        let y = match y_col {
            Some(c) => parse_cell(&record[c], row, &schema.y_col)?,
            None => Some(f64::NAN),
        };
        let key = &record[key_col];
        let u = if continuous { parse_cell(key, row, schema.u_col.as_deref().unwrap())? } else { Some(0.0) };
        let (Some(y), Some(u), false) = (y, u, missing || key.trim().is_empty()) else {
            report.rows_dropped += 1;
            continue;
        };
        if continuous {
            us.push(u);
            xs.extend(values);
            ys.push(y);
        } else {
            let entry = env_rows.entry(key.to_string()).or_insert_with(|| {
                env_order.push(key.to_string());
                (Vec::new(), Vec::new())
            });
            entry.0.extend(values);
            entry.1.push(y);
        }
    }
    if report.rows_dropped > 0 {
        log::warn!("dropped {} rows with missing values from {}", report.rows_dropped, path.display());
    }
    let names = schema.feature_cols.clone();
    let data = if continuous {
        if us.is_empty() {
            return Err(DataError::Empty);
        }
        let n = us.len();
        PanelDataset::Continuous(ContinuousData {
            feature_names: names,
            u: us,
            x: DMatrix::from_row_slice(n, d, &xs),
            y: DVector::from_vec(ys),
        })
    } else {
        if env_order.is_empty() {
            return Err(DataError::Empty);
        }
        let envs = env_order
            .into_iter()
            .map(|label| {
                let (x, y) = env_rows.remove(&label).expect("label recorded");
                let n = y.len();
                Environment { label, x: DMatrix::from_row_slice(n, d, &x), y: DVector::from_vec(y) }
            })
            .collect();
        PanelDataset::Discrete(Panel { feature_names: names, envs })
    };
    Ok((data, report))
}

/// Write a discrete panel in the layout read by [`load_panel_csv`].
pub fn write_panel_csv(path: impl AsRef<Path>, panel: &Panel, env_col: &str, y_col: &str) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![env_col.to_string()];
    header.extend(panel.feature_names.iter().cloned());
    header.push(y_col.to_string());
    w.write_record(&header)?;
    for env in &panel.envs {
        for i in 0..env.n() {
            let mut rec = vec![env.label.clone()];
            rec.extend(env.x.row(i).iter().map(|v| format!("{v:?}")));
            rec.push(format!("{:?}", env.y[i]));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write continuous data in the layout read by [`load_panel_csv`].
pub fn write_continuous_csv(path: impl AsRef<Path>, data: &ContinuousData, u_col: &str, y_col: &str) -> Result<(), DataError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![u_col.to_string()];
    header.extend(data.feature_names.iter().cloned());
    header.push(y_col.to_string());
    w.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![format!("{:?}", data.u[i])];
        rec.extend(data.x.row(i).iter().map(|v| format!("{v:?}")));
        rec.push(format!("{:?}", data.y[i]));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn schema() -> Schema {
        Schema {
            env_col: Some("city".into()),
            u_col: None,
            y_col: "y".into(),
            feature_cols: vec!["a".into(), "b".into()],
        }
    }

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("panel.csv");
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        p
    }

    #[test]
    fn three_environment_round_trip_is_exact() {
        let envs = (0..3)
            .map(|e| Environment {
                label: format!("env{e}"),
                x: DMatrix::from_fn(4, 2, |i, j| 0.1 * (i + 3 * j + e) as f64 + 1.0 / 3.0),
                y: DVector::from_fn(4, |i, _| (i as f64).sqrt() - e as f64),
            })
            .collect();
        let mut panel = Panel::new(envs);
        panel.feature_names = vec!["a".into(), "b".into()];
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("p.csv");
        write_panel_csv(&p, &panel, "city", "y").unwrap();
        let (back, report) = load_panel_csv(&p, &schema()).unwrap();
        assert_eq!(back, PanelDataset::Discrete(panel));
        assert_eq!(report.rows_dropped, 0);
    }

    #[test]
    fn missing_value_row_is_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "city,a,b,y\nx,1,2,3\nx,1,NaN,3\nz,4,5,6\nz,4,5,7\n");
        let (data, report) = load_panel_csv(&p, &schema()).unwrap();
        assert_eq!(report.rows_dropped, 1);
        let PanelDataset::Discrete(panel) = data else { panic!() };
        assert_eq!(panel.envs[0].n(), 1);
        assert_eq!(panel.envs[1].label, "z");
    }

    #[test]
    fn errors_are_specific() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "city,a,y\nx,1,2\n");
        assert!(matches!(load_panel_csv(&p, &schema()), Err(DataError::MissingColumn(c)) if c == "b"));
        let p = write(&dir, "city,a,b,y\nx,1,oops,2\n");
        assert!(matches!(load_panel_csv(&p, &schema()), Err(DataError::NonNumeric { row: 2, .. })));
        let p = write(&dir, "city,a,b,y\nx,1,2,3\nx,1,2,3\n");
        assert!(matches!(load_panel_csv(&p, &schema()), Err(DataError::SingleEnvironment(1))));
        assert!(load_test_csv(&p, &schema()).is_ok());
    }

    #[test]
    fn test_files_may_omit_response() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "city,a,b\nx,1,2\n");
        let (data, report) = load_test_csv(&p, &schema()).unwrap();
        assert!(!report.has_response);
        let PanelDataset::Discrete(panel) = data else { panic!() };
        assert!(panel.envs[0].y[0].is_nan());
    }

    #[test]
    fn continuous_schema() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "u,a,b,y\n0.5,1,2,3\n0.25,1,2,3\n");
        let s = Schema { env_col: None, u_col: Some("u".into()), ..schema() };
        let (data, _) = load_panel_csv(&p, &s).unwrap();
        let PanelDataset::Continuous(c) = data else { panic!() };
        assert_eq!(c.u, vec![0.5, 0.25]);
        let bad = Schema { u_col: Some("u".into()), ..schema() };
        assert!(matches!(load_panel_csv(&p, &bad), Err(DataError::Schema)));
    }
}
