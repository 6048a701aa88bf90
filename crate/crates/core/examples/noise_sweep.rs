//! Robustness to unitary rotation noise on the measurement projectors.
use dnnqst::bench::{run_experiment, summary_table, ExperimentConfig, ExperimentKind};

fn main() -> dnnqst::Result<()> {
    let mut cfg = ExperimentConfig::template(ExperimentKind::NoiseSweep);
    cfg.experiment.output_dir = std::env::temp_dir().join("dnnqst-noise").to_string_lossy().into_owned();
    if let Some(dist) = std::env::args().nth(1) {
        cfg.experiment.noise_distribution = dist;
    }
    let report = run_experiment(&cfg)?;
    print!("{}", summary_table(&cfg, &report));
    Ok(())
}
