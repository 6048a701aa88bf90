//! Accuracy across mixture weights, with the purity of each population.
use dnnqst::bench::{sweep_purity, summary_table, ExperimentConfig, ExperimentKind};

fn main() -> dnnqst::Result<()> {
    let mut cfg = ExperimentConfig::template(ExperimentKind::PuritySweep);
    cfg.experiment.estimators = vec!["mle".into(), "lre".into()];
    cfg.experiment.test_size = 100;
    cfg.experiment.output_dir = std::env::temp_dir().join("dnnqst-purity").to_string_lossy().into_owned();
    let report = sweep_purity(&cfg)?;
    for point in &report.purity {
        println!("p = {:.1}: purity {:.4}", point.p, point.purity);
    }
    print!("{}", summary_table(&cfg, &report));
    Ok(())
}
