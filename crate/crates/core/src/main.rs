use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gated_rnn::cells::{param_count, Activation, CellRegistry, Variant};
use gated_rnn::data::{Dataset, FETCH_HINT, NUM_CLASSES};
use gated_rnn::gradcheck::{check_gradients, GradCheckConfig};
use gated_rnn::harness::{best_of, run_grid, train_with, GridSpec, TrainConfig, STUDY_ETAS};
use gated_rnn::Error;

const EXIT_FAILURE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gated-rnn",
    version,
    about = "Train and check LSTM variants on row-wise MNIST"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant and stream per-epoch metrics to CSV.
    Train {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, default_value = "lstm")]
        variant: String,
        #[arg(long, default_value = "tanh", value_parser = parse_activation)]
        activation: Activation,
        #[arg(long, default_value_t = 1e-3)]
        eta: f64,
        /// Metrics CSV path.
        #[arg(long, default_value = "metrics.csv")]
        out: PathBuf,
    },
    /// Train every (variant, activation, eta) combination and write a summary.
    Grid {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated variants.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "lstm,lstm4,lstm5,lstm4a,lstm5a,lstm6"
        )]
        variant: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "tanh,sigmoid,relu", value_parser = parse_activation)]
        activation: Vec<Activation>,
        #[arg(long, value_delimiter = ',')]
        eta: Vec<f64>,
        /// Output directory for per-cell metrics and summary.csv.
        #[arg(long, default_value = "grid")]
        out: PathBuf,
    },
    /// Print trainable parameter counts (cell plus output head).
    CountParams {
        /// Restrict to one variant; all variants by default.
        #[arg(long)]
        variant: Option<String>,
        #[arg(long, default_value_t = 100)]
        hidden: usize,
        #[arg(long, default_value_t = 28)]
        inputs: usize,
        #[arg(long, default_value_t = NUM_CLASSES)]
        outputs: usize,
    },
    /// Compare BPTT gradients with central finite differences.
    GradCheck {
        /// Restrict to one variant; all variants by default.
        #[arg(long)]
        variant: Option<String>,
        /// Restrict to one activation; all three by default.
        #[arg(long, value_parser = parse_activation)]
        activation: Option<Activation>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5)]
        hidden: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

#[derive(Args, Clone)]
struct CommonArgs {
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    train_limit: Option<usize>,
    #[arg(long)]
    test_limit: Option<usize>,
    /// Directory holding the four MNIST IDX files (plain or .gz).
    #[arg(long, default_value = "data/mnist")]
    data_dir: PathBuf,
    /// RMSprop decay.
    #[arg(long, default_value_t = gated_rnn::optim::DEFAULT_RHO)]
    rho: f64,
    /// RMSprop stabilizer.
    #[arg(long, default_value_t = gated_rnn::optim::DEFAULT_EPS)]
    rms_eps: f64,
}

impl CommonArgs {
    fn config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            hidden: self.hidden,
            seed: self.seed,
            train_limit: self.train_limit,
            test_limit: self.test_limit,
            rho: self.rho,
            eps: self.rms_eps,
            ..TrainConfig::default()
        }
    }

    fn load(&self) -> gated_rnn::Result<Dataset> {
        Dataset::load(&self.data_dir, self.train_limit, self.test_limit)
    }
}

fn parse_activation(s: &str) -> Result<Activation, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_data_error() {
                eprintln!("{FETCH_HINT}");
                ExitCode::from(EXIT_DATA)
            } else if matches!(e, Error::Config(_) | Error::UnknownVariant { .. }) {
                ExitCode::from(EXIT_CONFIG)
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
    }
}

fn variant_keys(registry: &CellRegistry, only: Option<String>) -> gated_rnn::Result<Vec<String>> {
    match only {
        Some(name) => {
            registry.build(&name, Activation::Tanh)?;
            Ok(vec![name])
        }
        None => Ok(Variant::ALL.iter().map(|v| v.key().to_string()).collect()),
    }
}

fn run(command: Command) -> gated_rnn::Result<ExitCode> {
    let registry = CellRegistry::builtin();
    match command {
        Command::Train {
            common,
            variant,
            activation,
            eta,
            out,
        } => {
            let config = TrainConfig {
                variant,
                activation,
                eta,
                metrics_path: Some(out.clone()),
                ..common.config()
            };
            config.validate(registry)?;
            let dataset = common.load()?;
            let outcome = train_with(&config, &dataset, registry, |m| {
                println!(
                    "epoch {:>3}  loss {:.4}  train {:.4}  test {:.4}  {:.2}s",
                    m.epoch, m.train_loss, m.train_acc, m.test_acc, m.epoch_seconds
                );
            })?;
            let best = best_of(&outcome.metrics)?;
            println!(
                "best train {:.4}  best test {:.4} (epoch {})  params {}  metrics {}",
                best.train,
                best.test,
                best.test_epoch,
                outcome.param_count,
                out.display()
            );
        }
        Command::Grid {
            common,
            variant,
            activation,
            eta,
            out,
        } => {
            let grid = GridSpec {
                variants: variant,
                activations: activation,
                etas: if eta.is_empty() {
                    STUDY_ETAS.to_vec()
                } else {
                    eta
                },
            };
            let base = common.config();
            let dataset = common.load()?;
            let rows = run_grid(&grid, &base, &dataset, registry, &out, |row| {
                match &row.error {
                    None => println!(
                        "{:<7} {:<8} eta {:<7} best train {:.4} best test {:.4}",
                        row.variant, row.activation, row.eta, row.best_train, row.best_test
                    ),
                    Some(e) => println!(
                        "{:<7} {:<8} eta {:<7} FAILED: {e}",
                        row.variant, row.activation, row.eta
                    ),
                }
            })?;
            println!(
                "{} cells, summary in {}",
                rows.len(),
                out.join("summary.csv").display()
            );
        }
        Command::CountParams {
            variant,
            hidden,
            inputs,
            outputs,
        } => {
            if hidden == 0 || inputs == 0 || outputs == 0 {
                return Err(Error::Config("layer sizes must be positive".into()));
            }
            for key in variant_keys(registry, variant)? {
                let cell = registry.build(&key, Activation::Tanh)?;
                println!(
                    "{:<7} {}",
                    cell.name(),
                    param_count(cell.as_ref(), inputs, hidden, outputs)
                );
            }
        }
        Command::GradCheck {
            variant,
            activation,
            seed,
            hidden,
            tolerance,
        } => {
            let activations = activation.map_or(Activation::ALL.to_vec(), |a| vec![a]);
            let cfg = GradCheckConfig {
                n_h: hidden,
                seed,
                ..GradCheckConfig::default()
            };
            let mut all_ok = true;
            for key in variant_keys(registry, variant)? {
                for &act in &activations {
                    let cell = registry.build(&key, act)?;
                    let report = check_gradients(cell.as_ref(), &cfg)?;
                    let ok = report.max_rel_error < tolerance && report.checked > 0;
                    all_ok &= ok;
                    println!(
                        "{} {:<7} {:<8} max rel error {:.3e} at {}[{}]  checked {} masked {}",
                        if ok { "PASS" } else { "FAIL" },
                        cell.name(),
                        act,
                        report.max_rel_error,
                        report.worst.0,
                        report.worst.1,
                        report.checked,
                        report.masked
                    );
                }
            }
            if !all_ok {
                return Ok(ExitCode::from(EXIT_FAILURE));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
