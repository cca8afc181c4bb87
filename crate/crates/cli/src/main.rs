//! `geodrop` command-line front end.

mod commands;
mod config;
mod expr;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use geodrop::{Error, Result};

use config::Settings;

#[derive(Parser, Debug)]
#[command(name = "geodrop", version, about = "Dropout geometry experiments and calculators")]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

/// Settings shared by every subcommand. Each one can also come from the
/// `--config` file; flags win.
#[derive(Args, Debug, Default)]
struct GlobalArgs {
    /// Plain-text `key = value` settings file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    mnist_images: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    mnist_labels: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    mnist_test_images: Option<String>,
    #[arg(long, global = true, value_name = "PATH")]
    mnist_test_labels: Option<String>,
    /// Training examples read from the MNIST files.
    #[arg(long, global = true)]
    limit: Option<String>,
    #[arg(long, global = true)]
    test_limit: Option<String>,
    /// Comma-separated dropout rates.
    #[arg(long, global = true, value_name = "CSV")]
    rates: Option<String>,
    #[arg(long, global = true)]
    trials: Option<String>,
    /// frobenius, trace or spectral.
    #[arg(long, global = true)]
    norm: Option<String>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<String>,
    /// Comma-separated hidden layer widths.
    #[arg(long, global = true, value_name = "CSV")]
    hidden: Option<String>,
    /// relu or sigmoid.
    #[arg(long, global = true)]
    activation: Option<String>,
    #[arg(long, global = true)]
    epochs: Option<String>,
    #[arg(long, global = true)]
    batch_size: Option<String>,
    #[arg(long, global = true)]
    learning_rate: Option<String>,
    /// Leading training inputs used for FIM measurement.
    #[arg(long, global = true)]
    fim_inputs: Option<String>,
    /// masks_off or under_dropout.
    #[arg(long, global = true)]
    fim_measurement: Option<String>,
    #[arg(long, global = true)]
    synth_classes: Option<String>,
    #[arg(long, global = true)]
    synth_per_class: Option<String>,
    #[arg(long, global = true)]
    synth_dim: Option<String>,
    #[arg(long, global = true)]
    synth_separation: Option<String>,
}

impl GlobalArgs {
    fn overrides(&self) -> BTreeMap<&'static str, String> {
        let pairs: [(&'static str, &Option<String>); 23] = [
            ("seed", &self.seed),
            ("mnist_images", &self.mnist_images),
            ("mnist_labels", &self.mnist_labels),
            ("mnist_test_images", &self.mnist_test_images),
            ("mnist_test_labels", &self.mnist_test_labels),
            ("limit", &self.limit),
            ("test_limit", &self.test_limit),
            ("rates", &self.rates),
            ("trials", &self.trials),
            ("norm", &self.norm),
            ("alpha", &self.alpha),
            ("out", &self.out),
            ("hidden", &self.hidden),
            ("activation", &self.activation),
            ("epochs", &self.epochs),
            ("batch_size", &self.batch_size),
            ("learning_rate", &self.learning_rate),
            ("fim_inputs", &self.fim_inputs),
            ("fim_measurement", &self.fim_measurement),
            ("synth_classes", &self.synth_classes),
            ("synth_per_class", &self.synth_per_class),
            ("synth_dim", &self.synth_dim),
            ("synth_separation", &self.synth_separation),
        ];
        pairs
            .into_iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k, v.clone())))
            .collect()
    }

    fn settings(&self) -> Result<Settings> {
        let mut s = Settings::default();
        if let Some(path) = &self.config {
            s.apply_file(path)?;
        }
        s.apply_overrides(&self.overrides())?;
        s.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train one model with dropout and report its FIM norm and accuracy.
    Train(commands::TrainArgs),
    /// Dropout-rate sweep: CSV, summary CSV, SVG plot and metadata.
    Sweep,
    /// Train masked projections and combine them.
    Ensemble(commands::EnsembleArgs),
    /// Estimate the Fisher information of a trained model.
    Fim(commands::FimArgs),
    /// Connection and curvature quantities of a metric family.
    Geometry(commands::GeometryArgs),
    /// α-integration of categorical distributions with an optimality check.
    AlphaMix(commands::AlphaMixArgs),
    /// Second fundamental form of an embedded family.
    Sff(commands::SffArgs),
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("GEODROP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("GEODROP_THREADS must be a positive integer, got '{v}'")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let settings = cli.global.settings()?;
    match cli.command {
        Command::Train(a) => commands::train(&settings, &a),
        Command::Sweep => commands::sweep(&settings),
        Command::Ensemble(a) => commands::ensemble(&settings, &a),
        Command::Fim(a) => commands::fim(&settings, &a),
        Command::Geometry(a) => commands::geometry(&a),
        Command::AlphaMix(a) => commands::alpha_mix(&settings, &a),
        Command::Sff(a) => commands::sff(&a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(1))
        }
    }
}
