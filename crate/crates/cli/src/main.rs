//! `rmtest`: batch driver for tester runs, soundness sweeps, adversary games,
//! agreement checks and bound calculations.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use rmtest::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_PROTOCOL: i32 = 3;
pub const EXIT_LEMMA: i32 = 4;

#[derive(Parser, Serialize, Debug)]
#[command(
    name = "rmtest",
    version,
    about = "Reed-Muller and lifted-code testing lab"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Serialize, Debug)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    /// Run one tester on a table, offline or against an adversary.
    #[command(args_override_self = true)]
    Test(TestArgs),
    /// Rejection rates of planted instances against the soundness floor (CSV).
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Play one game between a tester and an adversary.
    #[command(args_override_self = true)]
    Game(GameArgs),
    /// Play many games and summarize them; traces go to JSON lines.
    #[command(args_override_self = true)]
    Arena(GameArgs),
    /// Exact sampling and Chebyshev checks over random hyperplane collections.
    #[command(args_override_self = true)]
    Agreement(AgreementArgs),
    /// Query lower bounds, online tester sizing and rank witnesses.
    #[command(args_override_self = true)]
    Bounds(BoundsArgs),
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct Common {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Confidence level in standard deviations.
    #[arg(long, default_value_t = 3.0)]
    pub sigma: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key=value` file; flags on the command line win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct CodeArgs {
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    /// Irreducible modulus coefficients, low degree first (e.g. `1,1,1`).
    #[arg(long)]
    pub modulus: Option<String>,
    /// `rm` or `lifted`.
    #[arg(long, default_value = "rm")]
    pub code: String,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Directory with a lifted code's base (manifest plus tables).
    #[arg(long)]
    pub lifted_base: Option<PathBuf>,
    /// `semi`, `sample`, `blr` or `flat`.
    #[arg(long, default_value = "semi")]
    pub tester: String,
    #[arg(long)]
    pub k: Option<usize>,
    /// Points per round; defaults to `Q_k`.
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub reps: Option<usize>,
    /// Proximity parameter; sets the repetition count when `--reps` is absent.
    #[arg(long)]
    pub eps: Option<String>,
}

#[derive(Args, Serialize, Debug, Clone)]
pub struct AdversaryArgs {
    /// `none_adv`, `random_eraser`, `sum_eraser`, `span_inference_eraser` or `random_corruptor`.
    #[arg(long)]
    pub adversary: Option<String>,
    /// `erasure` or `corruption`.
    #[arg(long, default_value = "erasure")]
    pub mode: String,
    /// `fixed:<t>` or `budget:<t>`.
    #[arg(long, default_value = "fixed:1")]
    pub accounting: String,
}

#[derive(Args, Serialize, Debug)]
pub struct TestArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub code: CodeArgs,
    #[command(flatten)]
    pub adversary: AdversaryArgs,
    #[arg(long)]
    pub input: PathBuf,
}

#[derive(Args, Serialize, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub code: CodeArgs,
    #[arg(long, default_value_t = 10)]
    pub n: usize,
    /// Comma-separated subspace dimensions; defaults to `--k` or `t_{q,d}`.
    #[arg(long, default_value = "")]
    pub ks: String,
    /// Comma-separated query counts; defaults to `--queries` or `Q_k`.
    #[arg(long = "query-list", default_value = "")]
    pub query_list: String,
    /// Comma-separated planted noise weights.
    #[arg(long, default_value = "0,1,2,4")]
    pub weights: String,
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,
}

#[derive(Args, Serialize, Debug)]
pub struct GameArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub code: CodeArgs,
    #[command(flatten)]
    pub adversary: AdversaryArgs,
    /// Input table; without it a codeword plus `--weight` noise is planted.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub weight: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Trial index replayed by `game`.
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Args, Serialize, Debug)]
pub struct AgreementArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value = "2,3")]
    pub qs: String,
    #[arg(long, default_value = "4,5,6,7,8")]
    pub ns: String,
    #[arg(long, default_value_t = 100)]
    pub instances: u64,
    /// Comma-separated Chebyshev constants.
    #[arg(long, default_value = "1/2,1,2")]
    pub cs: String,
    /// Planted pipeline runs per (q, n) with n <= 6.
    #[arg(long, default_value_t = 0)]
    pub planted: u64,
}

#[derive(Args, Serialize, Debug)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 2)]
    pub q: u32,
    #[arg(long, default_value_t = 8)]
    pub n: usize,
    #[arg(long, default_value_t = 1)]
    pub d: usize,
    /// Comma-separated erasure rates `t`.
    #[arg(long, default_value = "1,2,4")]
    pub ts: String,
    #[arg(long, default_value = "1/4")]
    pub eps: String,
    /// Target for `t Q_total^2 / q^k`.
    #[arg(long, default_value = "1/5")]
    pub safety: String,
    /// Largest `r` for rank witnesses on `M_q^n(q^r)`; none when absent.
    #[arg(long)]
    pub rank_r: Option<usize>,
}

/// Maps library errors to exit codes.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::Io(_) => EXIT_PARSE,
        Error::Protocol(_) => EXIT_PROTOCOL,
        Error::LemmaViolation(_) | Error::Integrity(_) => EXIT_LEMMA,
        _ => EXIT_USAGE,
    }
}

fn run(args: Vec<OsString>) -> i32 {
    if let Some(t) = std::env::var("RMTEST_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        rmtest::par::configure_threads(t.max(1));
    }
    let args = match config::merge(args) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn main() {
    std::process::exit(run(std::env::args_os().collect()));
}
