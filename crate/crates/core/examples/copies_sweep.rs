//! Infidelity against copies per operator for all three estimators.
use dnnqst::bench::{run_experiment, summary_table, ExperimentConfig, ExperimentKind};

fn main() -> dnnqst::Result<()> {
    let mut cfg = ExperimentConfig::template(ExperimentKind::CopiesSweep);
    cfg.experiment.output_dir = std::env::temp_dir().join("dnnqst-copies").to_string_lossy().into_owned();
    let report = run_experiment(&cfg)?;
    print!("{}", summary_table(&cfg, &report));
    for path in &report.artifacts {
        println!("wrote {}", path.display());
    }
    Ok(())
}
