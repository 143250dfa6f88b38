mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "idgp", version, about = "Instance-dependent partial-label learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a clean labelled dataset into a partial-label dataset.
    Corrupt(CorruptArgs),
    /// Train the main and auxiliary networks.
    Train(TrainArgs),
    /// Append the accuracy of a trained model to a metrics CSV.
    Eval(EvalArgs),
    /// Compare analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Produce plot-ready CSV from histories, metrics or a sensitivity sweep.
    Report(ReportArgs),
    /// Write a clean Gaussian-blob dataset.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Instance,
    Uniform,
}

fn open_probability(s: &str) -> Result<f64, String> {
    let p: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if p > 0.0 && p < 1.0 {
        Ok(p)
    } else {
        Err(format!("must lie strictly between 0 and 1, got {p}"))
    }
}

#[derive(Debug, Args)]
struct CorruptArgs {
    /// Clean dataset (singleton candidate sets with true labels).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value_t = Mode::Instance)]
    mode: Mode,
    /// Flip probability for `--mode uniform`.
    #[arg(long, value_parser = open_probability)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Epochs of the clean scorer used by `--mode instance`.
    #[arg(long, default_value_t = 20)]
    scorer_epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    scorer_lr: f64,
    /// Comma-separated hidden widths of the clean scorer; `none` for linear.
    #[arg(long, default_value = "64")]
    scorer_hidden: String,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Flat `key=value` file; missing keys keep their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Train on the likelihood term alone.
    #[arg(long)]
    ml_only: bool,
    /// Validation set; without it 10% of `--data` is held out.
    #[arg(long)]
    val: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Metrics CSV; created with a header if missing, appended otherwise.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "idgp")]
    method: String,
    /// Dataset name for the CSV row; defaults to the file stem.
    #[arg(long)]
    dataset: Option<String>,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    /// Write a run manifest here.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(subcommand)]
    kind: ReportKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurveMetric {
    Loss,
    ValAcc,
    BoundGap,
}

#[derive(Debug, Subcommand)]
enum ReportKind {
    /// Per-epoch curves from one or more history files.
    Curves {
        #[arg(long, num_args = 1.., required = true)]
        history: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = CurveMetric::Loss)]
        metric: CurveMetric,
        #[arg(long)]
        out: PathBuf,
    },
    /// Final validation accuracy over a grid of transform settings.
    Sweep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        val: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',', required = true)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean and standard deviation per method and dataset across metrics rows.
    Merge {
        #[arg(long, num_args = 1.., required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long, default_value_t = 4)]
    classes: usize,
    #[arg(long, default_value_t = 4.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    std: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Corrupt(a) => commands::corrupt(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Report(a) => commands::report(a.kind),
        Command::Synth(a) => commands::synth(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
