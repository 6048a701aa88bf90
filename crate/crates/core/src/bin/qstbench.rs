use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dnnqst::bench::{
    evaluate, mean_and_stderr, run_experiment, summary_table, Estimator, ExperimentConfig,
    ExperimentKind,
};
use dnnqst::dnn::{
    generate_dataset, init_model, load_model, save_model, train, Dataset, DatasetSpec,
    StateFamily, TrainConfig,
};
use dnnqst::measure::{NoiseSpec, SuiteDescriptor, SuiteKind};
use dnnqst::mle::MleConfig;
use dnnqst::{QstError, Result};

#[derive(Parser)]
#[command(name = "qstbench", version, about = "Quantum state tomography benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Experiment config helpers.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
    /// Generate a dataset file.
    Generate(GenerateArgs),
    /// Train a network on a dataset file.
    Train(TrainArgs),
    /// Score one estimator on a dataset file.
    Eval(EvalArgs),
    /// Run a sweep experiment from a config file.
    Sweep(SweepArgs),
    /// Run the optical-state generalization protocol.
    Optical(OpticalArgs),
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print a config with every field at its default.
    Init {
        #[arg(long, default_value = "copies_sweep")]
        kind: String,
    },
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "cube")]
    suite: SuiteKind,
    #[arg(long, default_value_t = 2)]
    qubits: usize,
    /// Set-prefix length; 0 keeps the complete suite.
    #[arg(long, default_value_t = 0)]
    sets: usize,
    /// pure | mixed:<p> | optical:<basis>x<gates>
    #[arg(long, default_value = "pure")]
    family: StateFamily,
    /// none | uniform:<xi> | gaussian:<x1>,<x2>,<x3>
    #[arg(long, default_value = "none")]
    noise: NoiseSpec,
    /// Copies per operator, or `exact`.
    #[arg(long, default_value = "exact")]
    shots: String,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Defaults to 128 for 2-qubit pure data and 256 otherwise.
    #[arg(long)]
    hidden_width: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    estimator: String,
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    max_iters: Option<usize>,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long)]
    paper_scale: bool,
    #[arg(long)]
    train_size: Option<usize>,
    #[arg(long)]
    test_size: Option<usize>,
    #[arg(long)]
    shots: Option<String>,
    #[arg(long)]
    estimators: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    record_timing: bool,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        let e = &mut cfg.experiment;
        if let Some(s) = self.seed {
            e.seed = s;
        }
        if let Some(d) = &self.output_dir {
            e.output_dir = d.clone();
        }
        e.paper_scale |= self.paper_scale;
        e.record_timing |= self.record_timing;
        if let Some(n) = self.train_size {
            e.train_size = n;
        }
        if let Some(n) = self.test_size {
            e.test_size = n;
        }
        if let Some(s) = &self.shots {
            e.shots = s.clone();
        }
        if let Some(list) = &self.estimators {
            e.estimators = list.split(',').map(|s| s.trim().to_string()).collect();
        }
        if let Some(n) = self.epochs {
            cfg.train.epochs = n;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: Overrides,
}

#[derive(Args)]
struct OpticalArgs {
    #[command(flatten)]
    common: Overrides,
    #[arg(long)]
    cube_model: Option<String>,
    #[arg(long)]
    mub_model: Option<String>,
    #[arg(long)]
    gates_per_state: Option<usize>,
}

fn parse_shots(s: &str) -> Result<Option<u64>> {
    if s == "exact" {
        return Ok(None);
    }
    match s.parse::<u64>() {
        Ok(n) if n > 0 => Ok(Some(n)),
        _ => Err(QstError::InvalidParameter {
            name: "shots",
            reason: format!("`{s}` is not `exact` or a positive integer"),
        }),
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Config {
            action: ConfigAction::Init { kind },
        } => {
            let kind: ExperimentKind = kind.parse()?;
            print!("{}", ExperimentConfig::template(kind).to_toml());
        }
        Command::Generate(a) => {
            let sets = if a.sets == 0 {
                match a.suite {
                    SuiteKind::Cube => 3usize.pow(a.qubits as u32),
                    SuiteKind::Mub => 5,
                }
            } else {
                a.sets
            };
            let spec = DatasetSpec {
                suite: SuiteDescriptor {
                    kind: a.suite,
                    qubits: a.qubits,
                    sets,
                },
                family: a.family,
                noise: a.noise,
                shots: parse_shots(&a.shots)?,
                count: a.count,
                seed: a.seed,
            };
            let ds = generate_dataset(&spec)?;
            ds.save(&a.out)?;
            println!("wrote {} rows ({} features, {} targets) to {}", ds.len(), ds.feature_len(), ds.target_len(), a.out.display());
        }
        Command::Train(a) => {
            let ds = Dataset::load(&a.data)?;
            let qubits = dnnqst::qstate::QubitCount::new(ds.spec.suite.qubits)?;
            let mut cfg = TrainConfig {
                seed: a.seed,
                hidden_width: TrainConfig::paper_hidden_width(qubits, &ds.spec.family),
                ..TrainConfig::default()
            };
            if let Some(v) = a.epochs {
                cfg.epochs = v;
            }
            if let Some(v) = a.batch_size {
                cfg.batch_size = v;
            }
            if let Some(v) = a.learning_rate {
                cfg.learning_rate = v;
            }
            if let Some(v) = a.hidden_width {
                cfg.hidden_width = v;
            }
            let init = init_model(ds.feature_len(), cfg.hidden_width, ds.target_len(), a.seed)?;
            let (mut model, history) = train(init, &ds, &cfg)?;
            model.set_manifest(format!("{}{}init_seed={}\n", ds.spec.to_manifest(), cfg.to_manifest(), a.seed));
            save_model(&model, &a.out)?;
            println!(
                "epochs={} first_loss={:e} final_loss={:e} model={}",
                history.len(),
                history[0],
                history[history.len() - 1],
                a.out.display()
            );
        }
        Command::Eval(a) => {
            let ds = Dataset::load(&a.data)?;
            let suite = ds.spec.suite.build()?;
            let est: Estimator = a.estimator.parse()?;
            let model = match (&a.model, est) {
                (Some(p), _) if p.exists() => Some(load_model(p)?),
                (Some(p), _) => return Err(QstError::MissingModel(p.clone())),
                (None, Estimator::Dnn) => return Err(QstError::MissingModel(PathBuf::from("<none>"))),
                (None, _) => None,
            };
            let mut mle = MleConfig::default();
            if let Some(n) = a.max_iters {
                mle.max_iters = n;
            }
            let ev = evaluate(est, &ds, &suite, model.as_ref(), &mle)?;
            let (mean, se) = mean_and_stderr(&ev.infidelities);
            println!(
                "estimator={} mean_infidelity={mean:e} std_error={se:e} n_samples={} failed={} seconds={:.3}",
                est.name(),
                ev.infidelities.len(),
                ev.failed,
                ev.seconds
            );
        }
        Command::Sweep(a) => {
            let cfg = a.common.load()?;
            let report = run_experiment(&cfg)?;
            print!("{}", summary_table(&cfg, &report));
            for p in &report.artifacts {
                println!("wrote {}", p.display());
            }
        }
        Command::Optical(a) => {
            let mut cfg = a.common.load()?;
            if cfg.experiment.kind != ExperimentKind::OpticalGeneralization {
                return Err(QstError::Config {
                    field: "experiment.kind".into(),
                    reason: "optical needs kind = \"optical_generalization\"".into(),
                });
            }
            if let Some(p) = a.cube_model {
                cfg.optical.cube_model = p;
            }
            if let Some(p) = a.mub_model {
                cfg.optical.mub_model = p;
            }
            if let Some(g) = a.gates_per_state {
                cfg.optical.gates_per_state = g;
            }
            let report = run_experiment(&cfg)?;
            print!("{}", summary_table(&cfg, &report));
            for p in &report.artifacts {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"");
            eprintln!("error kind={} message=\"{msg}\"", e.kind());
            ExitCode::from(2)
        }
    }
}
