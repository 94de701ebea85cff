use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::{CommonArgs, OutputFormat};

/// Everything needed to reproduce a run: the subcommand, the input and its
/// digest, and the fully resolved configuration. Deliberately contains no
/// timestamps or machine state so reruns are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub input: String,
    pub input_sha256: String,
    pub config: Config,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub k_max: usize,
    pub tau_grid: TauGrid,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau: Option<f64>,
    pub seeds: Vec<u64>,
    pub alpha: f64,
    pub min_clusters: usize,
    pub windows: Vec<usize>,
    pub format: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}

fn parse_tau_grid(text: &str) -> Result<TauGrid, CliError> {
    let parts: Vec<&str> = text.split(':').collect();
    let [min, max, count] = parts.as_slice() else {
        return Err(CliError::Config(format!(
            "--tau-grid expects MIN:MAX:COUNT, got {text:?}"
        )));
    };
    let bad = |what: &str| CliError::Config(format!("--tau-grid: cannot parse {what} in {text:?}"));
    Ok(TauGrid {
        min: min.parse().map_err(|_| bad("MIN"))?,
        max: max.parse().map_err(|_| bad("MAX"))?,
        count: count.parse().map_err(|_| bad("COUNT"))?,
    })
}

/// Either an explicit comma-separated list or a bare integer. For
/// multi-seed commands a bare N is a count meaning seeds 0..N; for the
/// single-seed commands (cluster, sweep) it is the seed itself.
fn parse_seeds(text: &str, single_seed: bool) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Config(format!("--seeds expects a count or a comma-separated list, got {text:?}"));
    if text.contains(',') {
        text.split(',')
            .filter(|s| !s.is_empty())
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect()
    } else {
        let n: u64 = text.trim().parse().map_err(|_| bad())?;
        if single_seed {
            Ok(vec![n])
        } else {
            Ok((0..n).collect())
        }
    }
}

fn parse_windows(text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| CliError::Config(format!("--windows expects integers, got {text:?}")))
        })
        .collect()
}

impl Config {
    /// Resolves flag values against the documented defaults. `n_records`
    /// feeds the k_max default of min(30, N/5), floored at 2.
    pub fn resolve(args: &CommonArgs, command: &str, n_records: usize) -> Result<Config, CliError> {
        let single_seed = matches!(command, "cluster" | "sweep");
        let tau_grid = match &args.tau_grid {
            Some(text) => parse_tau_grid(text)?,
            None => TauGrid { min: 1e-3, max: 1.0, count: 40 },
        };
        let seeds = match &args.seeds {
            Some(text) => parse_seeds(text, single_seed)?,
            None if single_seed => vec![0],
            None => (0..10).collect(),
        };
        if seeds.is_empty() {
            return Err(CliError::Config("--seeds resolved to an empty list".into()));
        }
        if single_seed && seeds.len() != 1 {
            return Err(CliError::Config(format!(
                "{command} uses exactly one seed, got {}",
                seeds.len()
            )));
        }
        let windows = match &args.windows {
            Some(text) => parse_windows(text)?,
            None => vec![2, 3],
        };
        let format = match args.format {
            Some(OutputFormat::Json) => "json",
            _ => "csv",
        };
        Ok(Config {
            k_max: args.k_max.unwrap_or_else(|| (n_records / 5).clamp(2, 30)),
            tau_grid,
            tau: args.tau,
            seeds,
            alpha: args.alpha.unwrap_or(1e-4),
            min_clusters: args.min_clusters.unwrap_or(3),
            windows,
            format: format.to_string(),
        })
    }

    pub fn grid(&self) -> Result<Vec<f64>, CliError> {
        udib::geometric_grid(self.tau_grid.min, self.tau_grid.max, self.tau_grid.count)
            .map_err(|e| CliError::Config(e.to_string()))
    }
}

/// Loads a manifest for re-execution and enforces that no conflicting
/// configuration flags were passed alongside it.
pub fn load_for_rerun(path: &str, command: &str, args: &CommonArgs) -> Result<RunManifest, CliError> {
    let conflicting = args.input.is_some()
        || args.k_max.is_some()
        || args.tau_grid.is_some()
        || args.tau.is_some()
        || args.seeds.is_some()
        || args.alpha.is_some()
        || args.min_clusters.is_some()
        || args.windows.is_some()
        || args.format.is_some();
    if conflicting {
        return Err(CliError::Config(
            "--manifest replaces --input and all configuration flags; drop the extras".into(),
        ));
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read manifest {path}: {e}")))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| CliError::Input(format!("malformed manifest {path}: {e}")))?;
    if manifest.command != command {
        return Err(CliError::Config(format!(
            "manifest records command {:?} but {command:?} was invoked",
            manifest.command
        )));
    }
    Ok(manifest)
}
