//! `pmpl`: matrix validation, dealer pools, training, benchmarks and
//! oracle checks.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pmpl", version, about = "Three-party secret-shared training with a droppable assistant")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validates a 4x3 public matrix and prints its coefficients.
    MatrixCheck {
        /// Four rows of three integers. The built-in matrix when omitted.
        #[arg(long)]
        matrix: Option<PathBuf>,
        #[arg(long, default_value_t = 64)]
        ell: u32,
    },
    /// Writes per-party preprocessing pools sized for a training run.
    DealerGen(RunArgs),
    /// Trains a model, as one party or as all three in this process.
    Train(RunArgs),
    /// Measures rounds and bits of single operations.
    Bench(BenchArgs),
    /// Compares protocol outputs with cleartext oracles.
    Verify(VerifyArgs),
}

/// Flags shared by `train` and `dealer-gen`. Each may also come from `--config`.
#[derive(Args, Clone, Debug, Default)]
pub struct RunArgs {
    /// File of key=value lines using the flag names below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// p0, p1, p2, dealer or local-sim.
    #[arg(long)]
    pub role: Option<String>,
    /// inproc or tcp.
    #[arg(long)]
    pub transport: Option<String>,
    /// Three comma-separated host:port addresses, P0 first.
    #[arg(long)]
    pub peers: Option<String>,
    /// A pool file, a directory of p0.pool/p1.pool/p2.pool, or three comma-separated files.
    #[arg(long)]
    pub pool: Option<String>,
    /// linear, logistic or bpnn.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub batch: Option<String>,
    #[arg(long)]
    pub lr: Option<String>,
    #[arg(long)]
    pub epochs: Option<String>,
    /// P2 leaves before this iteration.
    #[arg(long = "drop-at")]
    pub drop_at: Option<String>,
    #[arg(long)]
    pub ell: Option<String>,
    #[arg(long)]
    pub ellf: Option<String>,
    #[arg(long)]
    pub sigma: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// IDX directory or CSV file.
    #[arg(long)]
    pub data: Option<String>,
    /// idx or csv.
    #[arg(long)]
    pub format: Option<String>,
    /// Model file for train, pool directory for dealer-gen.
    #[arg(long)]
    pub out: Option<String>,
    /// Use only the first N training samples.
    #[arg(long)]
    pub samples: Option<String>,
    /// Feature count when dealer-gen runs without --data.
    #[arg(long)]
    pub features: Option<String>,
    /// Class treated as positive by the binary models.
    #[arg(long)]
    pub positive: Option<String>,
    /// Hidden layer widths for bpnn, comma separated.
    #[arg(long)]
    pub hidden: Option<String>,
}

#[derive(Args, Clone, Debug)]
pub struct BenchArgs {
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 4)]
    pub d: usize,
    #[arg(long, default_value_t = 4)]
    pub m: usize,
    #[arg(long, default_value_t = 64)]
    pub ell: u32,
    #[arg(long, default_value_t = 20)]
    pub ellf: u32,
    #[arg(long, default_value_t = 8)]
    pub sigma: u32,
}

#[derive(Args, Clone, Debug)]
pub struct VerifyArgs {
    /// mul, trunc, msb, bit2a, relu, sigmoid or all.
    #[arg(long, default_value = "all")]
    pub op: String,
    /// Trials per mode. For msb, sharings per ring element at l = 8.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("pmpl=info,pmpl_core=warn"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    // Failed checks exit 1 (bench) or 2 (verify); errors use their own codes.
    let res = match cli.cmd {
        Command::MatrixCheck { matrix, ell } => commands::matrix_check(matrix.as_deref(), ell).map(|_| 0),
        Command::DealerGen(a) => commands::dealer_gen(&a).map(|_| 0),
        Command::Train(a) => commands::train(&a).map(|_| 0),
        Command::Bench(a) => commands::bench(&a).map(|ok| if ok { 0 } else { 1 }),
        Command::Verify(a) => verify::run(&a).map(|ok| if ok { 0 } else { 2 }),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
