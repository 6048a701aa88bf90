//! Generate a dataset, train the network, save it and predict states.
use dnnqst::dnn::{generate_dataset, init_model, load_model, predict_state, save_model, train, DatasetSpec, StateFamily, TrainConfig};
use dnnqst::measure::{NoiseSpec, SuiteDescriptor, SuiteKind};
use dnnqst::qstate::infidelity;

fn main() -> dnnqst::Result<()> {
    let spec = |count, seed| DatasetSpec {
        suite: SuiteDescriptor {
            kind: SuiteKind::Cube,
            qubits: 2,
            sets: 9,
        },
        family: StateFamily::Pure,
        noise: NoiseSpec::noiseless(),
        shots: Some(100),
        count,
        seed,
    };
    let train_set = generate_dataset(&spec(2000, 1))?;
    let test_set = generate_dataset(&spec(200, 2))?;

    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 64,
        ..TrainConfig::default()
    };
    let model = init_model(train_set.feature_len(), cfg.hidden_width, train_set.target_len(), 1)?;
    let (model, history) = train(model, &train_set, &cfg)?;
    for (epoch, loss) in history.iter().enumerate().step_by(10) {
        println!("epoch {epoch:>3}: mse {loss:.3e}");
    }

    let dir = std::env::temp_dir().join("dnnqst-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("cube.dnnqst");
    save_model(&model, &path)?;
    let model = load_model(&path)?;

    let mut total = 0.0;
    for (i, row) in test_set.rows.iter().enumerate() {
        let rho = predict_state(&model, &test_set.frequencies(i)?)?;
        let truth = row.truth.as_ref().expect("generated rows keep their state");
        total += infidelity(truth, &rho)?;
    }
    println!("mean test infidelity {:.4} over {} states", total / test_set.len() as f64, test_set.len());
    Ok(())
}
