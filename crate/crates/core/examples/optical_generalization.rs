//! Networks trained on generic mixtures, tested on optical-gate states.
use dnnqst::bench::{run_optical_generalization, summary_table, ExperimentConfig, ExperimentKind};

fn main() -> dnnqst::Result<()> {
    let mut cfg = ExperimentConfig::template(ExperimentKind::OpticalGeneralization);
    cfg.experiment.output_dir = std::env::temp_dir().join("dnnqst-optical").to_string_lossy().into_owned();
    let report = run_optical_generalization(&cfg)?;
    print!("{}", summary_table(&cfg, &report));
    Ok(())
}
