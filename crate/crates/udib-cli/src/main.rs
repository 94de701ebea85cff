//! `udib` — cluster embedding corpora, pick a cluster count, and report
//! prompt/answer topic divergences, all from JSONL corpora on disk.
//!
//! Every run writes a `manifest.json` capturing the resolved configuration
//! and a digest of the input; re-running from that manifest reproduces the
//! output tree byte for byte.

mod error;
mod manifest;
mod outputs;
mod pipeline;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "udib", version, about = "Entropy-regularized clustering and topic-divergence reports for embedding corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a corpus and print summary statistics; writes nothing
    Validate(CommonArgs),
    /// Run one clustering at a fixed temperature
    Cluster(CommonArgs),
    /// Sweep the temperature grid with one seed and write the profile
    Sweep(CommonArgs),
    /// Sweep several seeds and recommend a cluster count
    Select(CommonArgs),
    /// Compute divergence metrics at the recommended cluster count
    Metrics(CommonArgs),
    /// Select, cluster, and report metrics in one pass
    Report(CommonArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Cluster(_) => "cluster",
            Command::Sweep(_) => "sweep",
            Command::Select(_) => "select",
            Command::Metrics(_) => "metrics",
            Command::Report(_) => "report",
        }
    }

    fn args(&self) -> &CommonArgs {
        match self {
            Command::Validate(a)
            | Command::Cluster(a)
            | Command::Sweep(a)
            | Command::Select(a)
            | Command::Metrics(a)
            | Command::Report(a) => a,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// JSONL corpus of embedding records
    #[arg(long, value_name = "PATH")]
    input: Option<String>,

    /// Directory for output files (created if missing)
    #[arg(long, value_name = "DIR", default_value = ".")]
    out: String,

    /// Re-run a saved manifest; excludes all configuration flags
    #[arg(long, value_name = "PATH")]
    manifest: Option<String>,

    /// Maximum number of clusters; default min(30, N/5), at least 2
    #[arg(long, value_name = "INT")]
    k_max: Option<usize>,

    /// Temperature grid as MIN:MAX:COUNT, geometric spacing
    #[arg(long, value_name = "MIN:MAX:COUNT")]
    tau_grid: Option<String>,

    /// Fixed temperature for `cluster`
    #[arg(long, value_name = "FLOAT")]
    tau: Option<f64>,

    /// Comma-separated seed list; a bare integer N means seeds 0..N for
    /// multi-seed commands, or the seed itself for cluster and sweep
    #[arg(long, value_name = "LIST|COUNT")]
    seeds: Option<String>,

    /// Additive smoothing for topic distributions
    #[arg(long, value_name = "FLOAT")]
    alpha: Option<f64>,

    /// Smallest cluster count the kink heuristic may recommend
    #[arg(long, value_name = "INT")]
    min_clusters: Option<usize>,

    /// Comma-separated kink window sizes
    #[arg(long, value_name = "LIST")]
    windows: Option<String>,

    /// Format for profile tables
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = pipeline::run(&cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
