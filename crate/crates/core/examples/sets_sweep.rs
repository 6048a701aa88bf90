//! Infidelity against the number of measured sets, cube versus MUB.
use dnnqst::bench::{run_experiment, summary_table, ExperimentConfig, ExperimentKind};

fn main() -> dnnqst::Result<()> {
    for suite in ["cube", "mub"] {
        let mut cfg = ExperimentConfig::template(ExperimentKind::SetsSweep);
        cfg.experiment.suite = suite.into();
        cfg.experiment.name = format!("sets-{suite}");
        cfg.experiment.estimators = vec!["mle".into(), "lre".into()];
        cfg.experiment.test_size = 50;
        if suite == "mub" {
            cfg.experiment.grid = (1..=5).map(f64::from).collect();
        }
        cfg.experiment.output_dir = std::env::temp_dir().join("dnnqst-sets").to_string_lossy().into_owned();
        let report = run_experiment(&cfg)?;
        print!("{}", summary_table(&cfg, &report));
    }
    Ok(())
}
