//! Response interventions on random nine-variable models: IMP against pooled
//! OLS, anchor regression and the population oracle.
//!
//! Usage: cargo run --release --example discrete_experiment [replicates] [out_dir]

use imp_lab::experiment::{emit_report, run_experiment, ExperimentConfig, ExperimentKind, ReportFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::init();
    let mut args = std::env::args().skip(1);
    let mut config = ExperimentConfig::preset(ExperimentKind::DiscreteY);
    config.replicates = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);
    config.seed = 2024;

    let start = std::time::Instant::now();
    let report = run_experiment(&config)?;
    println!("{} replicates in {:.1?}", config.replicates, start.elapsed());
    println!("{:<10} {:>10} {:>10} {:>10}", "method", "median", "q25", "q75");
    for (method, agg) in &report.summary().methods {
        println!("{method:<10} {:>10.3} {:>10.3} {:>10.3}", agg.median, agg.q25, agg.q75);
    }
    if let Some(dir) = args.next() {
        for path in emit_report(&report, &dir, &ReportFormat::ALL)? {
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}
