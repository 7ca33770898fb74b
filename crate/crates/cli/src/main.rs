//! `gdpmeans` command-line harness.
//!
//! Exit codes: 0 on success, 2 for bad input, 3 for numerical failures.
//! Errors are also written to stderr as one line of JSON.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gdpmeans::{Divergence, Error, ErrorKind, FSpec, Generator};

#[derive(Parser)]
#[command(name = "gdpmeans", version, about = "Generalized DP-means clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a CSV file once and print the result as JSON.
    Cluster(ClusterArgs),
    /// Sweep λ and β over shuffled copies of a labeled CSV file.
    Sweep(SweepArgs),
    /// Write one-dimensional influence curves and robustness labels.
    Influence(InfluenceArgs),
    /// Quantize a PPM image with 8x8 blocks as data points.
    Quantize(QuantizeArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FArg {
    Linear,
    Pow,
    Lse,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum DivArg {
    Sqdist,
    /// Squared distance averaged over dimensions.
    SqdistAvg,
    Alpha,
    Exploss,
    Binomial,
}

#[derive(Args, Clone, Debug)]
pub struct FOpts {
    /// Family of the function f.
    #[arg(long = "f", value_enum, default_value = "linear")]
    pub f: FArg,
    /// β of the power mean or log-sum-exp.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub beta: f64,
    /// β* for log-sum-exp; replaced by (β* − 1)/L + 1 on L-dimensional data.
    #[arg(long, allow_negative_numbers = true)]
    pub beta_star: Option<f64>,
    /// Offset a of the power mean.
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
}

#[derive(Args, Clone, Debug)]
pub struct DivOpts {
    #[arg(long = "div", value_enum, default_value = "sqdist")]
    pub div: DivArg,
    /// α of the alpha-divergence (0: Itakura-Saito, 1: generalized KL).
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// N of the binomial loss.
    #[arg(long, default_value_t = 100)]
    pub binomial_n: u32,
    /// Use the total Bregman divergence with this c.
    #[arg(long)]
    pub tbd_c: Option<f64>,
    /// Divide the divergence by the number of dimensions.
    #[arg(long)]
    pub dim_average: bool,
}

impl DivOpts {
    pub fn divergence(&self) -> Divergence {
        let g = match self.div {
            DivArg::Sqdist | DivArg::SqdistAvg => Generator::SquaredDistance,
            DivArg::Alpha => Generator::Alpha(self.alpha),
            DivArg::Exploss => Generator::ExpLoss,
            DivArg::Binomial => Generator::Binomial(self.binomial_n),
        };
        let mut d = Divergence::bregman(g);
        if let Some(c) = self.tbd_c {
            d = d.total(c);
        }
        if self.dim_average || self.div == DivArg::SqdistAvg {
            d = d.averaged();
        }
        d
    }
}

#[derive(Args, Clone, Debug)]
pub struct DataOpts {
    /// Input CSV file.
    #[arg(long)]
    pub input: PathBuf,
    /// Label column, by header name or 0-based index (negative from the end).
    #[arg(long)]
    pub label: Option<String>,
    /// Two-column CSV (from_label,to_label) used to merge labels.
    #[arg(long)]
    pub label_map: Option<PathBuf>,
    /// Divide every column by its root mean square.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    pub standardize: bool,
}

#[derive(Args, Debug)]
pub struct ClusterArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[command(flatten)]
    pub f: FOpts,
    #[command(flatten)]
    pub div: DivOpts,
    #[arg(long)]
    pub lambda: f64,
    /// Threshold on the objective decrease (default 1e-6 · n).
    #[arg(long)]
    pub delta: Option<f64>,
    /// Write cluster.json here instead of printing it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataOpts,
    #[arg(long = "f", value_enum, default_value = "pow")]
    pub f: FArg,
    #[arg(long, default_value_t = 0.0)]
    pub a: f64,
    #[command(flatten)]
    pub div: DivOpts,
    /// Sweep a single β instead of the grid.
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = -2.0, allow_negative_numbers = true)]
    pub beta_min: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub beta_max: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta_step: f64,
    /// Initial λ (default: largest single-cluster maximum distortion).
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 1.01)]
    pub lambda_decay: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_lambda_steps: usize,
    #[arg(long, default_value_t = 10)]
    pub shuffles: usize,
    /// Use 100 shuffles.
    #[arg(long)]
    pub paper_scale: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 3.0)]
    pub k_cap_multiplier: f64,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Run all cells on the calling thread.
    #[arg(long)]
    pub sequential: bool,
    /// Write sweep.csv here instead of printing it.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InfluenceArgs {
    #[arg(long = "f", value_enum, default_value = "pow")]
    pub f: FArg,
    /// Comma-separated β values (default depends on --f).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub beta: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub a: f64,
    #[command(flatten)]
    pub div: DivOpts,
    /// Center θ (default depends on the divergence).
    #[arg(long, allow_negative_numbers = true)]
    pub theta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub x_max: Option<f64>,
    #[arg(long, default_value_t = 401)]
    pub points: usize,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug)]
pub struct QuantizeArgs {
    /// Binary PPM (P6) image whose sides are multiples of 8.
    #[arg(long)]
    pub image: PathBuf,
    #[command(flatten)]
    pub f: FOpts,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    /// Shuffle the block order with this seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

impl FOpts {
    /// The `f` for data of dimension `dims`, and the β actually used.
    pub fn spec(&self, dims: usize) -> (FSpec, Option<f64>) {
        match self.f {
            FArg::Linear => (FSpec::Linear, None),
            FArg::Pow => (FSpec::power_mean(self.beta, self.a), Some(self.beta)),
            FArg::Lse => {
                let b = match self.beta_star {
                    Some(s) => gdpmeans::effective_beta(s, dims),
                    None => self.beta,
                };
                (FSpec::log_sum_exp(b), Some(b))
            }
        }
    }
}

fn report(err: &Error) -> ExitCode {
    let kind = match err.kind() {
        ErrorKind::Input => "input",
        ErrorKind::Numerical => "numerical",
    };
    let line = serde_json::json!({
        "error": err.code(),
        "kind": kind,
        "message": err.to_string(),
    });
    eprintln!("{line}");
    ExitCode::from(match err.kind() {
        ErrorKind::Input => 2,
        ErrorKind::Numerical => 3,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(a) => commands::cluster(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Influence(a) => commands::influence(&a),
        Command::Quantize(a) => commands::quantize(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(&e),
    }
}
