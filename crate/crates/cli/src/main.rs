//! `ncbf`: dataset generation, training, evaluation, pattern export and
//! benchmarking for near-field nulling-control beam focusing.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ncbf::benchtime::CovarianceMode;
use ncbf::LossKind;
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ncbf", version, about = "Near-field nulling-control beam focusing toolkit")]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true, env = "NCBF_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample scenarios and write an LCMV-labelled dataset.
    GenData(GenDataArgs),
    /// Rank candidate architectures by validation loss.
    Tune(TuneArgs),
    /// Train one network (phase or magnitude).
    Train(TrainArgs),
    /// Compare a trained estimator with LCMV on random scenarios.
    Eval(EvalArgs),
    /// Export a polar beam pattern as CSV.
    Pattern(PatternArgs),
    /// Time LCMV synthesis against network inference.
    Bench(BenchArgs),
    /// Run the built-in self-check suite.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Sort interferers by angle in the feature vector.
    #[arg(long)]
    pub canonical_order: bool,
    #[arg(long, default_value_t = 24)]
    pub elements: usize,
    #[arg(long = "users", default_value_t = 3)]
    pub num_users: usize,
    /// Fraction of samples in the training split.
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    /// `phase` (CMAE) or `magnitude` (RMSE).
    #[arg(long)]
    pub loss: LossKind,
    #[arg(long)]
    pub data: PathBuf,
    /// Full layer sizes, e.g. `6,1024,1024,24`. Defaults to six hidden
    /// layers of 1024 between the dataset's input and output widths.
    #[arg(long, value_delimiter = ',')]
    pub arch: Option<Vec<usize>>,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    /// Defaults to 0.01 for phase and 0.001 for magnitude.
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub decay: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct TuneArgs {
    #[arg(long)]
    pub loss: LossKind,
    #[arg(long)]
    pub data: PathBuf,
    /// Hidden stacks as `WIDTHxDEPTH`, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "256x3,512x3,1024x3,256x6,512x6,1024x6")]
    pub hidden: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1024)]
    pub batch: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub decay: f64,
    #[arg(long, default_value_t = 300)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct EvalArgs {
    #[arg(long)]
    pub phase_model: PathBuf,
    #[arg(long)]
    pub mag_model: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub scenarios: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub canonical_order: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum WeightSource {
    Lcmv,
    Model,
}

#[derive(Args, Debug, Serialize)]
pub struct PatternArgs {
    #[arg(long, value_enum, default_value_t = WeightSource::Lcmv)]
    pub weights_from: WeightSource,
    /// Desired user as `theta_deg,range_m`.
    #[arg(long, allow_hyphen_values = true)]
    pub desired: String,
    /// Interferers as `theta_deg,range_m` pairs, flattened.
    #[arg(long, allow_hyphen_values = true, default_value = "")]
    pub interferers: String,
    #[arg(long)]
    pub phase_model: Option<PathBuf>,
    #[arg(long)]
    pub mag_model: Option<PathBuf>,
    /// Angle axis `lo,hi,step` in degrees.
    #[arg(long, allow_hyphen_values = true, default_value = "-60,60,0.25")]
    pub angles: String,
    /// Range axis `lo,hi,step` in meters.
    #[arg(long, default_value = "0.5,10,0.05")]
    pub ranges: String,
    /// Used when weights come from LCMV; models fix their own size.
    #[arg(long, default_value_t = 24)]
    pub elements: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "24,64,128,256")]
    pub grid_n: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,64,1024")]
    pub batches: Vec<usize>,
    #[arg(long, default_value_t = ncbf::benchtime::DEFAULT_REPEATS)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Hidden widths of the randomly initialised networks.
    #[arg(long, value_delimiter = ',', default_value = "1024,1024,1024,1024,1024,1024")]
    pub hidden: Vec<usize>,
    /// Time trained networks instead of random ones (needs both models).
    #[arg(long, requires = "mag_model")]
    pub phase_model: Option<PathBuf>,
    #[arg(long, requires = "phase_model")]
    pub mag_model: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Covariance::Signal)]
    pub covariance: Covariance,
    /// Measure with the full thread pool instead of a single thread.
    #[arg(long)]
    pub multi_threaded: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Covariance {
    Identity,
    Signal,
}

impl From<Covariance> for CovarianceMode {
    fn from(c: Covariance) -> Self {
        match c {
            Covariance::Identity => CovarianceMode::Identity,
            Covariance::Signal => CovarianceMode::Signal,
        }
    }
}

#[derive(Args, Debug, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Writes `verify.json` and a run manifest here when given.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Tune(_) => "tune",
            Command::Train(_) => "train",
            Command::Eval(_) => "eval",
            Command::Pattern(_) => "pattern",
            Command::Bench(_) => "bench",
            Command::Verify(_) => "verify",
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "thread count must be at least 1");
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match &cli.command {
        Command::GenData(a) => commands::gen_data(a).map(|_| true),
        Command::Tune(a) => commands::tune(a).map(|_| true),
        Command::Train(a) => commands::train(a).map(|_| true),
        Command::Eval(a) => commands::eval(a).map(|_| true),
        Command::Pattern(a) => commands::pattern(a).map(|_| true),
        Command::Bench(a) => commands::bench(a).map(|_| true),
        Command::Verify(a) => commands::verify(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = serde_json::json!({
                "subcommand": name,
                "error": format!("{e:#}"),
            });
            eprintln!("{msg}");
            ExitCode::from(1)
        }
    }
}
