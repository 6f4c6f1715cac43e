//! Replay the bundled 12-query experiment: one run, a shot sweep, and the
//! correlation and failure reports.
//!
//!     cargo run --release --example mini_experiment

use std::path::Path;

use cad_icl::harness::{correlation_report, failure_report, run_experiment, sweep_shots, ExperimentConfig};

fn main() -> cad_icl::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/mini/experiment.toml");
    let config = ExperimentConfig::load(&path)?;

    let report = run_experiment(config.clone())?;
    for a in &report.aggregates {
        println!(
            "{:>6}: {}/{} valid (VSR {:.1}%), IoU {:?}, CD {:?}, ratio {:?}",
            a.scope, a.valid, a.total, a.vsr, a.mean_iou, a.mean_cd, a.mean_tiling_ratio
        );
    }

    let sweep = sweep_shots(config, &[0, 1, 2, 3])?;
    let corr = correlation_report(&sweep);
    print!("{}", corr.scatter_csv()?);
    println!("pearson vs tiling ratio: vsr {:?} iou {:?} cd {:?} ecd {:?}", corr.vsr, corr.iou, corr.cd, corr.ecd);
    print!("{}", failure_report(&sweep).to_csv()?);
    Ok(())
}
