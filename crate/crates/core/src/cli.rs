//! Command-line front end of `imp-lab`.
//!
//! Every command writes its results to files whose contents depend only on
//! the inputs and the seed, so reruns are byte-identical.

use crate::artifact::{GroupPrediction, ModelArtifact};
use crate::continuous::fit_continuous;
use crate::data::{load_panel_csv, load_test_csv, write_continuous_csv, write_panel_csv, PanelDataset, Schema};
use crate::discrete::{fit_discrete, ScoreKind, SearchLimits, SelectionConfig};
use crate::error::Error;
use crate::experiment::{emit_report, run_experiment, simulate, ExperimentConfig, ExperimentKind, ReportFormat};
use clap::{Args, Parser, Subcommand, ValueEnum};
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "imp-lab", version, about = "Invariant matching regression across environments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one dataset from an experiment recipe.
    Simulate(SimulateArgs),
    /// Fit an IMP model on a training CSV.
    Fit(FitArgs),
    /// Predict a test CSV with a fitted model.
    Predict(PredictArgs),
    /// Run a replicated experiment and write its reports.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Experiment config (JSON). Defaults to the discrete_y recipe.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "simulated")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Score {
    Residual,
    Invariance,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub schema: PathBuf,
    /// Inferred from the schema when omitted.
    #[arg(long, value_enum)]
    pub mode: Option<Mode>,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    /// Also write the per-candidate score table to this CSV.
    #[arg(long)]
    pub scores: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "residual")]
    pub score: Score,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub bootstrap_rounds: usize,
    /// Kernel bandwidth for continuous environments.
    #[arg(long, default_value_t = 0.1)]
    pub bandwidth: f64,
    /// Largest conditioning set searched.
    #[arg(long)]
    pub max_s_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long, default_value = "predictions.csv")]
    pub out: PathBuf,
    /// Also write the per-environment mean-RSS table to this CSV.
    #[arg(long)]
    pub rss: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "report")]
    pub out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', default_values = ["csv", "json", "quantiles"])]
    pub formats: Vec<String>,
}

pub fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Predict(a) => cmd_predict(&a),
        Command::Experiment(a) => cmd_experiment(&a),
    }
}

fn read_config(path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => ExperimentConfig::from_json(&std::fs::read_to_string(p)?),
        None => Ok(ExperimentConfig::preset(ExperimentKind::DiscreteY)),
    }
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn cmd_simulate(a: &SimulateArgs) -> Result<(), Error> {
    let config = read_config(a.config.as_deref())?;
    let seed = a.seed.unwrap_or(config.seed);
    let sim = simulate(&config, seed)?;
    std::fs::create_dir_all(&a.out)?;
    let (train, test) = (a.out.join("train.csv"), a.out.join("test.csv"));
    let schema = match (&sim.train, &sim.test) {
        (PanelDataset::Discrete(tr), PanelDataset::Discrete(te)) => {
            write_panel_csv(&train, tr, "env", "y")?;
            write_panel_csv(&test, te, "env", "y")?;
            Schema { env_col: Some("env".into()), u_col: None, y_col: "y".into(), feature_cols: tr.feature_names.clone() }
        }
        (PanelDataset::Continuous(tr), PanelDataset::Continuous(te)) => {
            write_continuous_csv(&train, tr, "u", "y")?;
            write_continuous_csv(&test, te, "u", "y")?;
            Schema { env_col: None, u_col: Some("u".into()), y_col: "y".into(), feature_cols: tr.feature_names.clone() }
        }
        _ => unreachable!("simulated train and test share a layout"),
    };
    write_json(&a.out.join("schema.json"), &schema)?;
    std::fs::write(a.out.join("scm.json"), sim.document.to_json() + "\n")?;
    println!("wrote train.csv, test.csv, schema.json and scm.json to {}", a.out.display());
    Ok(())
}

fn cmd_fit(a: &FitArgs) -> Result<(), Error> {
    let schema: Schema = serde_json::from_str(&std::fs::read_to_string(&a.schema)?)?;
    let mode = a.mode.unwrap_or(if schema.u_col.is_some() { Mode::Continuous } else { Mode::Discrete });
    match (mode, schema.u_col.is_some()) {
        (Mode::Discrete, true) => return Err(Error::Config("discrete mode needs an env_col in the schema".into())),
        (Mode::Continuous, false) => return Err(Error::Config("continuous mode needs a u_col in the schema".into())),
        _ => {}
    }
    let (data, load) = load_panel_csv(&a.train, &schema)?;
    if load.rows_dropped > 0 {
        eprintln!("dropped {} of {} rows with missing values", load.rows_dropped, load.rows_read);
    }
    let limits = SearchLimits { max_s_size: a.max_s_size, ..SearchLimits::NONE };
    let score_kind = match a.score {
        Score::Residual => ScoreKind::Residual,
        Score::Invariance => ScoreKind::Invariance,
    };
    let selection = SelectionConfig { score_kind, seed: a.seed, bootstrap_rounds: a.bootstrap_rounds, ..Default::default() };

    let (artifact, described) = match data {
        PanelDataset::Discrete(panel) => {
            let report = fit_discrete(&panel, limits, &selection)?;
            if let Some(path) = &a.scores {
                report.write_score_table(std::fs::File::create(path)?)?;
            }
            let model = report.model()?.clone();
            let described: Vec<String> = model.predictors.iter().map(|p| p.candidate().to_string()).collect();
            (ModelArtifact::Discrete { schema, model }, described)
        }
        PanelDataset::Continuous(data) => {
            let report = fit_continuous(&data, limits, a.bandwidth, &selection)?;
            if let Some(path) = &a.scores {
                report.write_score_table(std::fs::File::create(path)?)?;
            }
            let model = report.model()?.clone();
            let described: Vec<String> = model.predictors.iter().map(|p| p.candidate().to_string()).collect();
            (ModelArtifact::Continuous { schema, model }, described)
        }
    };
    artifact.save(&a.out)?;
    println!("selected {} predictor(s):", described.len());
    for c in described {
        println!("  {c}");
    }
    println!("model written to {}", a.out.display());
    Ok(())
}

fn write_predictions(path: &Path, schema: &Schema, groups: &[GroupPrediction]) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path)?;
    let first = schema.env_col.as_deref().or(schema.u_col.as_deref()).unwrap_or("env");
    let has_y = groups.iter().all(|g| g.mean_rss().is_some());
    let mut header = vec![first.to_string(), "y_hat".into()];
    if has_y {
        header.push(schema.y_col.clone());
    }
    w.write_record(&header)?;
    for g in groups {
        for i in 0..g.y_hat.len() {
            let key = match &g.u {
                Some(u) => format!("{:?}", u[i]),
                None => g.label.clone(),
            };
            let mut rec = vec![key, format!("{:?}", g.y_hat[i])];
            if has_y {
                rec.push(format!("{:?}", g.y[i]));
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<(), Error> {
    let artifact = ModelArtifact::load(&a.model)?;
    let (data, load) = load_test_csv(&a.test, artifact.schema())?;
    if load.rows_dropped > 0 {
        eprintln!("dropped {} of {} rows with missing predictors", load.rows_dropped, load.rows_read);
    }
    let groups = artifact.predict(&data)?;
    write_predictions(&a.out, artifact.schema(), &groups)?;
    println!("predictions written to {}", a.out.display());
    if !load.has_response {
        return Ok(());
    }
    let table: Vec<(String, usize, f64)> = groups.iter().filter_map(|g| g.mean_rss().map(|r| (g.label.clone(), g.y.len(), r))).collect();
    let width = table.iter().map(|(l, ..)| l.len()).max().unwrap_or(0).max(11);
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<width$}  {:>6}  {:>12}", "environment", "n", "mean_rss")?;
    for (label, n, rss) in &table {
        writeln!(out, "{label:<width$}  {n:>6}  {rss:>12.6}")?;
    }
    if let Some(path) = &a.rss {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["env", "n", "mean_rss"])?;
        for (label, n, rss) in &table {
            w.write_record([label.clone(), n.to_string(), format!("{rss:?}")])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn parse_format(name: &str) -> Result<ReportFormat, Error> {
    match name.trim() {
        "csv" => Ok(ReportFormat::Csv),
        "json" => Ok(ReportFormat::Json),
        "quantiles" => Ok(ReportFormat::Quantiles),
        other => Err(Error::Config(format!("unknown report format {other:?}; expected csv, json or quantiles"))),
    }
}

fn cmd_experiment(a: &ExperimentArgs) -> Result<(), Error> {
    let mut config = read_config(Some(&a.config))?;
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    let formats = a.formats.iter().map(|f| parse_format(f)).collect::<Result<Vec<_>, _>>()?;
    let report = run_experiment(&config)?;
    std::fs::create_dir_all(&a.out)?;
    let files = emit_report(&report, &a.out, &formats)?;
    let summary = report.summary();
    println!("{}: {} replicate run(s), {} skipped", summary.kind, summary.replicates.len(), summary.skipped);
    let print = |methods: &std::collections::BTreeMap<String, crate::experiment::Aggregate>| {
        for (method, agg) in methods {
            println!("  {method:<10} median {:>10.4}  iqr {:>10.4}", agg.median, agg.iqr);
        }
    };
    if summary.settings.is_empty() {
        print(&summary.methods);
    }
    for s in &summary.settings {
        println!("lambda = {}", s.setting);
        print(&s.methods);
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
