use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use regen_hdc::data::SyntheticSpec;
use regen_hdc::experiments::DropOrder;
use regen_hdc::Strategy;
use regen_hdc_cli::{
    cmd_analyze, cmd_bench, cmd_dropsweep, cmd_eval, cmd_noise_sweep, cmd_synth, cmd_train, write_atomic, CliError,
    Result, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "regen-hdc",
    version,
    about = "Hyperdimensional classifier with encoder regeneration"
)]
struct Cli {
    /// JSON config file (train: run config, synth: generator spec).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed from the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output path. For train this is the model file; elsewhere the
    /// machine-readable output goes here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress diagnostics on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a run config.
    Train,
    /// Top-k accuracy of a saved model on a CSV.
    Eval {
        #[command(flatten)]
        io: ModelData,
        /// k values to report, one JSON line each.
        #[arg(long, value_delimiter = ',', default_value = "1")]
        k: Vec<usize>,
    },
    /// Run a dimension detector on a saved model.
    Analyze {
        #[arg(long)]
        model: PathBuf,
        /// Evidence CSV, needed for misleading and domain_variant.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "label")]
        label_column: String,
        #[arg(long)]
        domain_column: Option<String>,
        #[arg(long, default_value = "insignificant")]
        strategy: Strategy,
        #[arg(long = "rate", alias = "R", default_value_t = 0.1)]
        rate: f64,
    },
    /// Accuracy after zeroing dimensions by class variance rank.
    Dropsweep {
        #[command(flatten)]
        io: ModelData,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3,0.4,0.5")]
        fractions: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "lowest,highest")]
        order: Vec<DropOrder>,
    },
    /// Accuracy under Gaussian noise on a fraction of model entries.
    Noisesweep {
        #[command(flatten)]
        io: ModelData,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.4,0.6,0.8,1")]
        q: Vec<f64>,
        /// Noise standard deviation relative to the RMS model entry.
        #[arg(long, default_value_t = 1.0)]
        magnitude: f64,
    },
    /// Encode and score throughput.
    Bench {
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long = "dim", alias = "D", default_value_t = 4096)]
        dim: usize,
        #[arg(long, default_value_t = 1000)]
        batch: usize,
        #[arg(long, default_value_t = 10)]
        classes: usize,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Write synthetic Gaussian blobs as CSV.
    Synth {
        #[arg(long)]
        n_features: Option<usize>,
        #[arg(long)]
        n_classes: Option<usize>,
        #[arg(long)]
        n_domains: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        separation: Option<f64>,
        #[arg(long)]
        intra_std: Option<f64>,
        #[arg(long)]
        domain_std: Option<f64>,
    },
}

#[derive(Args)]
struct ModelData {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_line(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string(value).expect("output records serialize");
    s.push('\n');
    s
}

fn no_config(cli: &Cli, name: &str) -> Result<()> {
    match &cli.config {
        Some(_) => Err(CliError::Config(format!("{name} does not take --config"))),
        None => Ok(()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let out = cli.out.as_deref();
    let say = |msg: String| {
        if !cli.quiet {
            eprintln!("{msg}");
        }
    };
    match &cli.command {
        Command::Train => {
            let path = cli
                .config
                .as_deref()
                .ok_or_else(|| CliError::Config("train needs --config".into()))?;
            let mut cfg = RunConfig::load(path)?;
            if let Some(seed) = cli.seed {
                cfg.params.seed = seed;
            }
            if let Some(p) = out {
                cfg.model_out = p.to_path_buf();
            }
            say(format!(
                "training D={} rounds={} strategy={} on {}",
                cfg.params.dim,
                cfg.params.rounds,
                cfg.params.strategy,
                cfg.data.train_csv.display()
            ));
            let (summary, report) = cmd_train(&cfg)?;
            if cfg.report_out.is_none() {
                print!("{report}");
            } else {
                print!("{}", to_line(&summary));
            }
            say(format!("model written to {}", summary.model_path.display()));
        }
        Command::Eval { io, k } => {
            no_config(cli, "eval")?;
            let records = cmd_eval(&io.model, &io.data, &io.label_column, k)?;
            let text: String = records.iter().map(to_line).collect();
            emit_text(out, &text)?;
        }
        Command::Analyze {
            model,
            data,
            label_column,
            domain_column,
            strategy,
            rate,
        } => {
            no_config(cli, "analyze")?;
            let rec = cmd_analyze(
                model,
                data.as_deref(),
                label_column,
                domain_column.as_deref(),
                *strategy,
                *rate,
            )?;
            say(format!("selected {} dimensions", rec.selected_indices.len()));
            emit_text(out, &to_line(&rec))?;
        }
        Command::Dropsweep { io, fractions, order } => {
            no_config(cli, "dropsweep")?;
            let rec = cmd_dropsweep(&io.model, &io.data, &io.label_column, fractions, order)?;
            emit_text(out, &to_line(&rec))?;
        }
        Command::Noisesweep { io, q, magnitude } => {
            no_config(cli, "noisesweep")?;
            let rec = cmd_noise_sweep(
                &io.model,
                &io.data,
                &io.label_column,
                q,
                *magnitude,
                cli.seed.unwrap_or(0),
            )?;
            emit_text(out, &to_line(&rec))?;
        }
        Command::Bench {
            n,
            dim,
            batch,
            classes,
            reps,
        } => {
            no_config(cli, "bench")?;
            let rec = cmd_bench(*n, *dim, *batch, *classes, *reps, cli.seed.unwrap_or(0))?;
            emit_text(out, &to_line(&rec))?;
        }
        Command::Synth {
            n_features,
            n_classes,
            n_domains,
            samples,
            separation,
            intra_std,
            domain_std,
        } => {
            let mut spec = match &cli.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                        path: p.clone(),
                        source,
                    })?;
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
                }
                None => SyntheticSpec::default(),
            };
            spec.n_features = n_features.unwrap_or(spec.n_features);
            spec.n_classes = n_classes.unwrap_or(spec.n_classes);
            spec.n_domains = n_domains.unwrap_or(spec.n_domains);
            spec.samples_per_class_per_domain = samples.unwrap_or(spec.samples_per_class_per_domain);
            spec.separation = separation.unwrap_or(spec.separation);
            spec.intra_class_std = intra_std.unwrap_or(spec.intra_class_std);
            spec.domain_offset_std = domain_std.unwrap_or(spec.domain_offset_std);
            spec.seed = cli.seed.unwrap_or(spec.seed);
            let csv = cmd_synth(&spec)?;
            emit_text(out, &csv)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !cli.quiet {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
