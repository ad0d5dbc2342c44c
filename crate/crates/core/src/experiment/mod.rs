//! Seeded replication of the simulated benchmarks and CSV panels, with
//! mean-RSS evaluation on the test environments.

mod config;
mod recipes;
mod report;

pub use config::{ContinuousSettings, CsvSettings, ExperimentConfig, ExperimentKind, MethodName, RobustnessSettings};
pub use recipes::{continuous_task, discrete_task, robustness_tasks, ContinuousTask, DiscreteTask, Rejection};
pub use report::{emit_report, Aggregate, EvalReport, ReplicateLog, ReplicateStatus, ReportFormat, RssRow, SettingSummary, Summary, QUANTILE_LEVELS};

use crate::baselines::{anchor_cv, pooled_ols};
use crate::continuous::{fit_continuous, sample_uniform_u};
use crate::data::{load_panel_csv, load_test_csv, ContinuousData, Environment, Panel, PanelDataset};
use crate::discrete::{fit_discrete, ScoreKind, SelectionConfig};
use crate::error::{Error, ScmError};
use crate::estimators::ols_fit;
use crate::nodeset::NodeSet;
use crate::scm::{population_lmmse, rng_for, sample_with_rng, EnvId, InterventionSpec, LinearScm, Node, ScmDocument};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

/// Stream offset separating test-environment samples from training ones.
const TEST_STREAM: u64 = 1 << 32;

/// A test environment together with the population regression of `Y` on all
/// predictors, when the generating model is known.
struct TestEnv {
    label: String,
    u: Option<Vec<f64>>,
    x: DMatrix<f64>,
    y: DVector<f64>,
    oracle: Option<DVector<f64>>,
}

fn mean_rss(pred: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (pred - y).norm_squared() / y.len() as f64
}

fn oracle_predictions(scm: &LinearScm, spec: &InterventionSpec, x: &DMatrix<f64>) -> Result<DVector<f64>, ScmError> {
    let l = population_lmmse(scm, spec, Node::Y, NodeSet::full(scm.d()))?;
    let row = |i: usize| x.row(i).iter().copied().collect::<Vec<f64>>();
    Ok(DVector::from_iterator(x.nrows(), (0..x.nrows()).map(|i| l.predict_row(&row(i)))))
}

/// Training data of one replicate.
enum Train {
    Discrete(Panel),
    Continuous(ContinuousData),
}

impl Train {
    fn pooled_ols(&self) -> Result<(DVector<f64>, f64), Error> {
        match self {
            Train::Discrete(p) => {
                let m = pooled_ols(p)?;
                Ok((DVector::from_vec(m.coefficients), m.intercept))
            }
            Train::Continuous(c) => {
                let f = ols_fit(&c.x, &c.y, true)?;
                Ok((f.coefficients, f.intercept.unwrap_or(0.0)))
            }
        }
    }
}

fn linear_predict((beta, b): &(DVector<f64>, f64), x: &DMatrix<f64>) -> DVector<f64> {
    (x * beta).add_scalar(*b)
}

/// Run every requested method and append one row per test environment.
fn evaluate(config: &ExperimentConfig, replicate: usize, setting: Option<f64>, train: &Train, tests: &[TestEnv], log: &mut ReplicateLog) -> Vec<RssRow> {
    let mut rows = Vec::new();
    let mut push = |method: MethodName, preds: Vec<DVector<f64>>| {
        for (t, p) in tests.iter().zip(preds) {
            rows.push(RssRow { method: method.to_string(), replicate, setting, env: t.label.clone(), mean_rss: mean_rss(&p, &t.y) });
        }
    };
    let fallback = |log: &mut ReplicateLog, method: MethodName, why: &str| -> Option<Vec<DVector<f64>>> {
        log.notes.push(format!("{method}: {why}; used pooled OLS"));
        match train.pooled_ols() {
            Ok(m) => Some(tests.iter().map(|t| linear_predict(&m, &t.x)).collect()),
            Err(e) => {
                log.notes.push(format!("{method}: pooled OLS failed: {e}"));
                None
            }
        }
    };
    let selection = |kind: ScoreKind| SelectionConfig {
        score_kind: kind,
        seed: config.selection.seed.wrapping_add(replicate as u64),
        ..config.selection.clone()
    };

    for &method in &config.methods {
        let preds: Option<Vec<DVector<f64>>> = match (method, train) {
            (MethodName::Imp | MethodName::ImpInv, Train::Discrete(panel)) => {
                let kind = if method == MethodName::Imp { ScoreKind::Residual } else { ScoreKind::Invariance };
                match fit_discrete(panel, config.limits, &selection(kind)).and_then(|r| r.model().cloned()) {
                    Ok(model) => {
                        log.selected.insert(method.to_string(), model.predictors.iter().map(|p| p.candidate().to_string()).collect());
                        let preds: Result<Vec<_>, Error> = tests.iter().map(|t| model.predict(&t.x)).collect();
                        match preds {
                            Ok(p) => Some(p),
                            Err(e) => fallback(log, method, &e.to_string()),
                        }
                    }
                    Err(Error::NoImpFound) => fallback(log, method, "no invariant matching candidate found"),
                    Err(e) => fallback(log, method, &e.to_string()),
                }
            }
            (MethodName::Imp, Train::Continuous(data)) => {
                let h = config.continuous.bandwidth;
                match fit_continuous(data, config.limits, h, &selection(ScoreKind::Residual)).and_then(|r| r.model().cloned()) {
                    Ok(model) => {
                        log.selected.insert(method.to_string(), model.predictors.iter().map(|p| p.candidate().to_string()).collect());
                        let preds: Result<Vec<_>, Error> =
                            tests.iter().map(|t| model.predict(t.u.as_deref().expect("continuous test data"), &t.x)).collect();
                        match preds {
                            Ok(p) => Some(p),
                            Err(e) => fallback(log, method, &e.to_string()),
                        }
                    }
                    Err(Error::NoImpFound) => fallback(log, method, "no invariant matching candidate found"),
                    Err(e) => fallback(log, method, &e.to_string()),
                }
            }
            (MethodName::ImpInv | MethodName::AnchorCv, Train::Continuous(_)) => {
                log.notes.push(format!("{method}: not applicable to continuous environments"));
                None
            }
            (MethodName::Ols, _) => match train.pooled_ols() {
                Ok(m) => Some(tests.iter().map(|t| linear_predict(&m, &t.x)).collect()),
                Err(e) => {
                    log.notes.push(format!("ols: {e}"));
                    None
                }
            },
            (MethodName::AnchorCv, Train::Discrete(panel)) => {
                match anchor_cv(panel, &config.anchor_grid, config.anchor_folds, config.seed.wrapping_add(replicate as u64)) {
                    Ok(m) => Some(tests.iter().map(|t| m.predict(&t.x)).collect()),
                    Err(e) => {
                        log.notes.push(format!("anchor_cv: {e}"));
                        None
                    }
                }
            }
            (MethodName::Oracle, _) => {
                let preds: Option<Vec<_>> = tests.iter().map(|t| t.oracle.clone()).collect();
                if preds.is_none() {
                    log.notes.push("oracle: generating model unknown".into());
                }
                preds
            }
        };
        if let Some(p) = preds {
            push(method, p);
        }
    }
    rows
}

fn sample_discrete(task: &DiscreteTask, n: usize, seed: u64, want_oracle: bool) -> Result<(Panel, Vec<TestEnv>), ScmError> {
    let label = |spec: &InterventionSpec| spec.env.to_string();
    let train = task
        .train
        .iter()
        .enumerate()
        .map(|(e, spec)| Ok(Environment::from_joint(label(spec), &sample_with_rng(&task.scm, spec, n, &mut rng_for(seed, e as u64))?)))
        .collect::<Result<Vec<_>, ScmError>>()?;
    let tests = task
        .test
        .iter()
        .enumerate()
        .map(|(e, spec)| {
            let env = Environment::from_joint(label(spec), &sample_with_rng(&task.scm, spec, n, &mut rng_for(seed, TEST_STREAM + e as u64))?);
            let oracle = if want_oracle { Some(oracle_predictions(&task.scm, spec, &env.x)?) } else { None };
            Ok(TestEnv { label: env.label, u: None, x: env.x, y: env.y, oracle })
        })
        .collect::<Result<Vec<_>, ScmError>>()?;
    Ok((Panel::new(train), tests))
}

fn sample_continuous_task(config: &ExperimentConfig, task: &ContinuousTask, seed: u64, want_oracle: bool) -> Result<(ContinuousData, Vec<TestEnv>), ScmError> {
    let cs = &config.continuous;
    let train = sample_uniform_u(&task.scm, &task.train_edits, cs.u_train, cs.n_train, seed)?;
    let test = sample_uniform_u(&task.scm, &task.test_edits, cs.u_test, cs.n_test, seed.wrapping_add(TEST_STREAM))?;
    let oracle = if want_oracle {
        let d = task.scm.d();
        let values = (0..test.n())
            .map(|i| {
                let spec = InterventionSpec::new(EnvId::Continuous(test.u[i]), task.test_edits.clone());
                let l = population_lmmse(&task.scm, &spec, Node::Y, NodeSet::full(d))?;
                Ok(l.predict_row(&test.x.row(i).iter().copied().collect::<Vec<_>>()))
            })
            .collect::<Result<Vec<f64>, ScmError>>()?;
        Some(DVector::from_vec(values))
    } else {
        None
    };
    let t = TestEnv { label: "test".into(), u: Some(test.u), x: test.x, y: test.y, oracle };
    Ok((train, vec![t]))
}

fn skipped(replicate: usize, reason: String) -> (Vec<RssRow>, Vec<ReplicateLog>) {
    log::warn!("replicate {replicate} skipped: {reason}");
    let mut l = ReplicateLog::new(replicate, None);
    l.status = ReplicateStatus::Skipped { reason };
    (Vec::new(), vec![l])
}

fn run_replicate(config: &ExperimentConfig, replicate: usize) -> (Vec<RssRow>, Vec<ReplicateLog>) {
    let mut rng = rng_for(config.seed, replicate as u64);
    let want_oracle = config.methods.contains(&MethodName::Oracle);
    let mut last = String::from("no attempt made");
    for _ in 0..config.max_attempts.max(1) {
        let sample_seed: u64 = rng.random();
        match config.kind {
            ExperimentKind::DiscreteX | ExperimentKind::DiscreteY | ExperimentKind::DiscreteXy => {
                let task = match discrete_task(config, &mut rng) {
                    Ok(t) => t,
                    Err(r) => {
                        last = format!("{r:?}");
                        continue;
                    }
                };
                match sample_discrete(&task, config.n_e, sample_seed, want_oracle) {
                    Ok((panel, tests)) => {
                        let mut log = ReplicateLog::new(replicate, None);
                        let rows = evaluate(config, replicate, None, &Train::Discrete(panel), &tests, &mut log);
                        return (rows, vec![log]);
                    }
                    Err(e) => last = e.to_string(),
                }
            }
            ExperimentKind::RobustnessSweep => {
                let tasks = match robustness_tasks(config, &mut rng) {
                    Ok(t) => t,
                    Err(r) => {
                        last = format!("{r:?}");
                        continue;
                    }
                };
                // Every λ uses the same sampling streams, so the sweep is paired.
                let sampled: Result<Vec<_>, ScmError> = tasks
                    .iter()
                    .map(|(l, t)| sample_discrete(t, config.n_e, sample_seed, want_oracle).map(|s| (*l, s)))
                    .collect();
                match sampled {
                    Ok(sampled) => {
                        let (mut rows, mut logs) = (Vec::new(), Vec::new());
                        for (lambda, (panel, tests)) in sampled {
                            let mut log = ReplicateLog::new(replicate, Some(lambda));
                            rows.extend(evaluate(config, replicate, Some(lambda), &Train::Discrete(panel), &tests, &mut log));
                            logs.push(log);
                        }
                        return (rows, logs);
                    }
                    Err(e) => last = e.to_string(),
                }
            }
            ExperimentKind::ContinuousXy => {
                let task = match continuous_task(config, &mut rng) {
                    Ok(t) => t,
                    Err(r) => {
                        last = format!("{r:?}");
                        continue;
                    }
                };
                match sample_continuous_task(config, &task, sample_seed, want_oracle) {
                    Ok((train, tests)) => {
                        let mut log = ReplicateLog::new(replicate, None);
                        let rows = evaluate(config, replicate, None, &Train::Continuous(train), &tests, &mut log);
                        return (rows, vec![log]);
                    }
                    Err(e) => last = e.to_string(),
                }
            }
            ExperimentKind::CsvPanel => unreachable!("handled separately"),
        }
    }
    skipped(replicate, format!("no valid draw in {} attempts; last: {last}", config.max_attempts))
}

fn run_csv(config: &ExperimentConfig) -> Result<EvalReport, Error> {
    let csv = config.csv.as_ref().expect("validated");
    let (train, train_report) = load_panel_csv(&csv.train, &csv.schema)?;
    let (test, test_report) = load_test_csv(&csv.test, &csv.schema)?;
    if !test_report.has_response {
        return Err(Error::Config(format!("test file {} has no response column", csv.test.display())));
    }
    log::info!("loaded {} training rows ({} dropped) and {} test rows ({} dropped)", train_report.rows_read, train_report.rows_dropped, test_report.rows_read, test_report.rows_dropped);
    let (train, tests) = match (train, test) {
        (PanelDataset::Discrete(p), PanelDataset::Discrete(t)) => {
            let tests = t.envs.into_iter().map(|e| TestEnv { label: e.label, u: None, x: e.x, y: e.y, oracle: None }).collect();
            (Train::Discrete(p), tests)
        }
        (PanelDataset::Continuous(c), PanelDataset::Continuous(t)) => {
            (Train::Continuous(c), vec![TestEnv { label: "test".into(), u: Some(t.u), x: t.x, y: t.y, oracle: None }])
        }
        _ => return Err(Error::Config("train and test files must use the same environment column type".into())),
    };
    let mut log = ReplicateLog::new(0, None);
    let rows = evaluate(config, 0, None, &train, &tests, &mut log);
    Ok(EvalReport { kind: "csv_panel".into(), rows, logs: vec![log] })
}

/// One simulated draw of a recipe: the generating model with its
/// environments, plus the sampled training and test data.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub document: ScmDocument,
    pub train: PanelDataset,
    pub test: PanelDataset,
}

/// Draw a single replicate of `config.kind` on the stream of `seed`. The
/// robustness sweep uses its first `λ`.
pub fn simulate(config: &ExperimentConfig, seed: u64) -> Result<Simulation, Error> {
    config.validate()?;
    let mut rng = rng_for(seed, 0);
    let mut last = String::from("no attempt made");
    for _ in 0..config.max_attempts.max(1) {
        let sample_seed: u64 = rng.random();
        let discrete = match config.kind {
            ExperimentKind::DiscreteX | ExperimentKind::DiscreteY | ExperimentKind::DiscreteXy => discrete_task(config, &mut rng),
            ExperimentKind::RobustnessSweep => robustness_tasks(config, &mut rng).map(|mut t| t.swap_remove(0).1),
            ExperimentKind::ContinuousXy => {
                let task = match continuous_task(config, &mut rng) {
                    Ok(t) => t,
                    Err(r) => {
                        last = format!("{r:?}");
                        continue;
                    }
                };
                match sample_continuous_task(config, &task, sample_seed, false) {
                    Ok((train, tests)) => {
                        let t = tests.into_iter().next().expect("one test sample");
                        let test = ContinuousData { feature_names: train.feature_names.clone(), u: t.u.expect("continuous"), x: t.x, y: t.y };
                        let specs = vec![
                            InterventionSpec::new(EnvId::discrete("train"), task.train_edits.clone()),
                            InterventionSpec::new(EnvId::discrete("test"), task.test_edits.clone()),
                        ];
                        return Ok(Simulation {
                            document: ScmDocument::new(&task.scm, specs),
                            train: PanelDataset::Continuous(train),
                            test: PanelDataset::Continuous(test),
                        });
                    }
                    Err(e) => {
                        last = e.to_string();
                        continue;
                    }
                }
            }
            ExperimentKind::CsvPanel => return Err(Error::Config("csv_panel has nothing to simulate".into())),
        };
        let task = match discrete {
            Ok(t) => t,
            Err(r) => {
                last = format!("{r:?}");
                continue;
            }
        };
        match sample_discrete(&task, config.n_e, sample_seed, false) {
            Ok((train, tests)) => {
                let envs = tests.into_iter().map(|t| Environment { label: t.label, x: t.x, y: t.y }).collect();
                let specs = task.train.iter().chain(&task.test).cloned().collect();
                return Ok(Simulation {
                    document: ScmDocument::new(&task.scm, specs),
                    train: PanelDataset::Discrete(train),
                    test: PanelDataset::Discrete(Panel::new(envs)),
                });
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(Error::Config(format!("no valid draw in {} attempts; last: {last}", config.max_attempts)))
}

fn kind_name(kind: ExperimentKind) -> String {
    serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default()
}

/// Run all replicates of an experiment. Replicates run in parallel on
/// independent random streams keyed by `(seed, replicate)`, so the report
/// does not depend on scheduling.
pub fn run_experiment(config: &ExperimentConfig) -> Result<EvalReport, Error> {
    config.validate()?;
    if config.kind == ExperimentKind::CsvPanel {
        return run_csv(config);
    }
    let parts: Vec<(Vec<RssRow>, Vec<ReplicateLog>)> = (0..config.replicates).into_par_iter().map(|r| run_replicate(config, r)).collect();
    let mut report = EvalReport { kind: kind_name(config.kind), ..EvalReport::default() };
    for (rows, logs) in parts {
        report.rows.extend(rows);
        report.logs.extend(logs);
    }
    Ok(report)
}
