//! Full-size comparison at S = 100: 98,800 training states, 1,000 test
//! states. Takes a long while on one core.
use dnnqst::bench::{run_experiment, summary_table, ExperimentConfig, ExperimentKind};

fn main() -> dnnqst::Result<()> {
    let mut cfg = ExperimentConfig::template(ExperimentKind::CopiesSweep);
    cfg.experiment.name = "full-scale".into();
    cfg.experiment.grid = vec![100.0];
    cfg.experiment.paper_scale = true;
    cfg.experiment.record_timing = true;
    cfg.experiment.output_dir = std::env::temp_dir().join("dnnqst-full").to_string_lossy().into_owned();
    let report = run_experiment(&cfg)?;
    print!("{}", summary_table(&cfg, &report));
    Ok(())
}
