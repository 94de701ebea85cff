use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use udib::select::{summarize, sweep_profiles, sweep_tau};
use udib::{
    cooccurrence, default_smoothing_scale, pairwise_stats, parse_corpus, representative_run,
    run_udib, sdm_report, EmbeddingSet, Role, UdibConfig,
};

use crate::error::CliError;
use crate::manifest::{self, Config, RunManifest};
use crate::outputs;
use crate::{Command, CommonArgs};

struct Prepared {
    manifest: RunManifest,
    set: EmbeddingSet,
}

fn read_input(path: &str) -> Result<(String, Vec<u8>), CliError> {
    let bytes =
        fs::read(path).map_err(|e| CliError::Input(format!("cannot read {path}: {e}")))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::Input(format!("{path} is not valid UTF-8")))?;
    Ok((text, bytes))
}

/// Loads the corpus and resolves the configuration, either from flags or
/// from a saved manifest (whose input digest must still match).
fn prepare(command: &str, args: &CommonArgs) -> Result<Prepared, CliError> {
    if let Some(manifest_path) = &args.manifest {
        let manifest = manifest::load_for_rerun(manifest_path, command, args)?;
        let (text, bytes) = read_input(&manifest.input)?;
        let digest = manifest::sha256_hex(&bytes);
        if digest != manifest.input_sha256 {
            return Err(CliError::Input(format!(
                "input {} does not match the manifest digest; the corpus changed since the manifest was written",
                manifest.input
            )));
        }
        let set = parse_corpus(&text)?;
        return Ok(Prepared { manifest, set });
    }

    let input = args
        .input
        .clone()
        .ok_or_else(|| CliError::Config("--input is required (or pass --manifest)".into()))?;
    let (text, bytes) = read_input(&input)?;
    let set = parse_corpus(&text)?;
    let config = Config::resolve(args, command, set.len())?;
    Ok(Prepared {
        manifest: RunManifest {
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            input,
            input_sha256: manifest::sha256_hex(&bytes),
            config,
        },
        set,
    })
}

pub fn run(command: &Command) -> Result<(), CliError> {
    let name = command.name();
    let args = command.args();
    let prepared = prepare(name, args)?;
    let set = &prepared.set;
    let config = &prepared.manifest.config;

    if name == "validate" {
        return validate(set);
    }

    let out_dir = Path::new(&args.out);
    fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", out_dir.display())))?;

    match name {
        "cluster" => cluster(set, config, out_dir)?,
        "sweep" => sweep(set, config, out_dir)?,
        "select" => select(set, config, out_dir)?,
        "metrics" => metrics(set, config, out_dir, false)?,
        "report" => metrics(set, config, out_dir, true)?,
        other => return Err(CliError::Internal(format!("unhandled command {other}"))),
    }
    outputs::write_json(out_dir, "manifest.json", &prepared.manifest)
}

fn validate(set: &EmbeddingSet) -> Result<(), CliError> {
    let stats = pairwise_stats(set);
    let prompts = set.metas().iter().filter(|m| m.role == Role::Prompt).count();
    let groups: BTreeSet<&str> = set.metas().iter().map(|m| m.group_id.as_str()).collect();
    println!("records: {}", set.len());
    println!("dimension: {}", set.dim());
    println!("prompts: {prompts}");
    println!("answers: {}", set.len() - prompts);
    println!("groups: {}", groups.len());
    println!("total_variance: {}", stats.total_variance);
    println!("mean_sq_pair_dist: {}", stats.mean_sq_pair_dist);
    match default_smoothing_scale(&stats, set.len()) {
        Ok(s_sq) => println!("default_smoothing_scale: {s_sq}"),
        Err(_) => println!("default_smoothing_scale: undefined (all points identical)"),
    }
    Ok(())
}

fn cluster(set: &EmbeddingSet, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let tau = config
        .tau
        .ok_or_else(|| CliError::Config("cluster requires --tau".into()))?;
    let result = run_udib(set, &UdibConfig::new(config.k_max, tau, config.seeds[0]))?;
    outputs::write_json(out_dir, "clustering.json", &result)
}

fn sweep(set: &EmbeddingSet, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let profile = sweep_tau(set, &config.grid()?, config.k_max, config.seeds[0])?;
    if config.format == "json" {
        outputs::write_json(out_dir, "profile.json", &profile)
    } else {
        outputs::write_profiles_csv(out_dir, "profile.csv", std::slice::from_ref(&profile))
    }
}

fn select(set: &EmbeddingSet, config: &Config, out_dir: &Path) -> Result<(), CliError> {
    let profiles = sweep_profiles(set, &config.seeds, &config.grid()?, config.k_max)?;
    let summary = summarize(&profiles, config.min_clusters, &config.windows)?;
    write_profiles(config, out_dir, &profiles)?;
    outputs::write_json(out_dir, "summary.json", &summary)
}

/// The metrics stage; `full` additionally writes the selection outputs and
/// the representative clustering (the `report` command).
fn metrics(set: &EmbeddingSet, config: &Config, out_dir: &Path, full: bool) -> Result<(), CliError> {
    let profiles = sweep_profiles(set, &config.seeds, &config.grid()?, config.k_max)?;
    let summary = summarize(&profiles, config.min_clusters, &config.windows)?;
    let rep = representative_run(&profiles, summary.final_k).ok_or_else(|| {
        CliError::Input(format!(
            "no sweep run realized the recommended cluster count {}",
            summary.final_k
        ))
    })?;
    let clustering = run_udib(set, &UdibConfig::new(config.k_max, rep.tau, rep.seed))?;

    let report = sdm_report(&clustering.assignments, set, clustering.k_final, config.alpha)?;
    let matrix = cooccurrence(&clustering.assignments, set, clustering.k_final, config.alpha)?;

    if full {
        write_profiles(config, out_dir, &profiles)?;
        outputs::write_json(out_dir, "summary.json", &summary)?;
        outputs::write_json(out_dir, "clustering.json", &clustering)?;
    }
    outputs::write_json(out_dir, "sdm_report.json", &report)?;
    outputs::write_cooccurrence(out_dir, &matrix)
}

fn write_profiles(
    config: &Config,
    out_dir: &Path,
    profiles: &[udib::InformationProfile],
) -> Result<(), CliError> {
    if config.format == "json" {
        outputs::write_json(out_dir, "profiles.json", &profiles)
    } else {
        outputs::write_profiles_csv(out_dir, "profiles.csv", profiles)
    }
}
