//! Command-line front end: `synth`, `build`, `locate`, `eval` and `report`.
//!
//! Exit codes: 0 on success, 1 on data errors, 2 on usage errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::builder::{build, BuilderConfig};
use crate::error::{Error, Result};
use crate::eval::compare_report;
use crate::io;
use crate::model::{InitMode, Location, PositionEstimate, PositioningConfig, RawRfm, WeightForm};
use crate::positioner::{iterate_locate, knn_locate};
use crate::synth::{generate_dataset, Contamination, EnvironmentParams, SurveyPlan, SyntheticEnvironment};

#[derive(Debug, Parser)]
#[command(name = "rfmpos", version, about = "Variability-weighted fingerprint positioning")]
struct Cli {
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    /// Plain kNN: unit penalties on unshared features, uniform weights.
    Knn,
    /// kNN on the compound dissimilarity, uniform weights.
    Cdm,
    /// Iterative variability-weighted search.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum WeightFormArg {
    Paper,
    Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum InitArg {
    Knn,
    Random,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic environment and survey.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 40.0)]
        width: f64,
        #[arg(long, default_value_t = 20.0)]
        height: f64,
        #[arg(long, default_value_t = 12)]
        aps: usize,
        #[arg(long, default_value_t = 3)]
        passes: usize,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        /// Fraction of heavy-tailed contaminated samples.
        #[arg(long)]
        contamination: Option<f64>,
    },
    /// Build the extended reference fingerprint map.
    Build {
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Override a config field, `key=value`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Locate every observation of a JSON-lines file.
    Locate {
        #[arg(long)]
        rfm: PathBuf,
        #[arg(long)]
        obs: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Method::Iterative)]
        method: Method,
        #[arg(long, value_enum)]
        weight_form: Option<WeightFormArg>,
        #[arg(long, value_enum)]
        init: Option<InitArg>,
        /// Seed for random initialization.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Error statistics of one estimate file against ground truth.
    Eval {
        #[arg(long)]
        estimates: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare every `*.jsonl` estimate file of a directory.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Output directory (defaults to the runs directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    match pool.install(|| dispatch(cli.command)) {
        Ok(()) => 0,
        Err(Error::Invalid(msg)) if msg.starts_with("usage:") => {
            eprintln!("{msg}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn usage(msg: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("usage: {msg}"))
}

fn split_override(s: &str) -> Result<(&str, &str)> {
    s.split_once('=')
        .map(|(k, v)| (k.trim(), v.trim()))
        .ok_or_else(|| usage(format!("--set expects KEY=VALUE, got `{s}`")))
}

fn dispatch(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth {
            seed,
            out_dir,
            width,
            height,
            aps,
            passes,
            spacing,
            contamination,
        } => {
            let params = EnvironmentParams {
                width,
                height,
                n_aps: aps,
                contamination: contamination.map(|rate| Contamination {
                    rate,
                    ..Default::default()
                }),
                ..Default::default()
            };
            let plan = SurveyPlan {
                seed: seed.wrapping_add(1),
                n_passes: passes,
                sample_spacing: spacing,
                ..Default::default()
            };
            synth_to_dir(seed, &params, &plan, &out_dir)
        }
        Command::Build {
            raw,
            config,
            out,
            overrides,
        } => {
            let mut cfg = match &config {
                Some(p) => io::read_builder_config(p)?,
                None => BuilderConfig::default(),
            };
            for o in &overrides {
                let (k, v) = split_override(o)?;
                io::set_builder_key(&mut cfg, k, v).map_err(usage)?;
            }
            cfg.validate().map_err(usage)?;
            let raw_rfm = RawRfm::from_records(io::read_fingerprints(&raw)?).map_err(|e| Error::Data {
                path: raw.clone(),
                line: 0,
                msg: e.to_string(),
            })?;
            let rfm = build(&raw_rfm, &cfg)?;
            io::write_text(&out, &io::rfm_to_json(&rfm))
        }
        Command::Locate {
            rfm,
            obs,
            config,
            out,
            method,
            weight_form,
            init,
            seed,
            k,
            beta,
            overrides,
        } => {
            let mut cfg = match &config {
                Some(p) => io::read_positioning_config(p)?,
                None => PositioningConfig::default(),
            };
            for o in &overrides {
                let (key, v) = split_override(o)?;
                io::set_positioning_key(&mut cfg, key, v).map_err(usage)?;
            }
            if let Some(w) = weight_form {
                cfg.weight_form = match w {
                    WeightFormArg::Paper => WeightForm::PaperVerbatim,
                    WeightFormArg::Precision => WeightForm::PrecisionSoftmax,
                };
            }
            match (init, seed) {
                (Some(InitArg::Knn), _) => cfg.init_mode = InitMode::Knn,
                (Some(InitArg::Random), s) => cfg.init_mode = InitMode::Random(s.unwrap_or(0)),
                (None, Some(s)) => {
                    if let InitMode::Random(_) = cfg.init_mode {
                        cfg.init_mode = InitMode::Random(s);
                    }
                }
                (None, None) => {}
            }
            if let Some(k) = k {
                cfg.k = k;
            }
            if let Some(b) = beta {
                cfg.beta = b;
            }
            cfg.validate().map_err(usage)?;
            let map = io::read_rfm(&rfm)?;
            let observations = io::read_fingerprints(&obs)?;
            for fp in &observations {
                fp.check_gamma(cfg.gamma).map_err(|e| Error::Data {
                    path: obs.clone(),
                    line: 0,
                    msg: e.to_string(),
                })?;
            }
            let results = locate_all(&observations, &map, &cfg, method)?;
            io::write_text(&out, &io::estimates_to_jsonl(&results))
        }
        Command::Eval { estimates, truth, out } => {
            let method = estimates
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "estimates".into());
            let est = io::read_estimates(&estimates)?;
            let truth_locs = aligned_truth(&est, &truth)?;
            let runs = BTreeMap::from([(method.clone(), est.into_iter().map(|(_, e)| e).collect())]);
            let report = compare_report(&runs, &truth_locs, Some(&method))?;
            io::write_text(&out, &report.to_csv())
        }
        Command::Report { runs, truth, out } => {
            let out = out.unwrap_or_else(|| runs.clone());
            report_dir(&runs, &truth, &out)
        }
    }
}

/// Writes `env.json`, `raw.jsonl` and `test.jsonl`.
pub fn synth_to_dir(seed: u64, params: &EnvironmentParams, plan: &SurveyPlan, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let env = SyntheticEnvironment::generate(seed, params)?;
    let (raw, test) = generate_dataset(&env, plan)?;
    let mut env_json = serde_json::to_string_pretty(&env)?;
    env_json.push('\n');
    io::write_text(&out_dir.join("env.json"), &env_json)?;
    io::write_fingerprints(&out_dir.join("raw.jsonl"), raw.records())?;
    io::write_fingerprints(&out_dir.join("test.jsonl"), &test)
}

fn locate_one(
    obs: &crate::model::Fingerprint,
    map: &crate::model::ExtendedRfm,
    cfg: &PositioningConfig,
    method: Method,
) -> Result<PositionEstimate> {
    match method {
        Method::Knn => {
            let plain = PositioningConfig {
                alpha1: 1.0,
                alpha2: 1.0,
                ..cfg.clone()
            };
            knn_locate(obs, map, &plain, None).map(PositionEstimate::single)
        }
        Method::Cdm => knn_locate(obs, map, cfg, None).map(PositionEstimate::single),
        Method::Iterative => iterate_locate(obs, map, cfg),
    }
}

/// Locates every observation in parallel; output order follows input order.
fn locate_all(
    observations: &[crate::model::Fingerprint],
    map: &crate::model::ExtendedRfm,
    cfg: &PositioningConfig,
    method: Method,
) -> Result<Vec<(u64, PositionEstimate)>> {
    observations
        .par_iter()
        .map(|fp| locate_one(fp, map, cfg, method).map(|e| (fp.id, e)))
        .collect()
}

fn aligned_truth(est: &[(u64, PositionEstimate)], truth: &Path) -> Result<Vec<Location>> {
    let fps = io::read_fingerprints(truth)?;
    if fps.len() != est.len() {
        return Err(Error::LengthMismatch {
            left: est.len(),
            right: fps.len(),
        });
    }
    est.iter()
        .zip(&fps)
        .enumerate()
        .map(|(i, ((id, _), fp))| {
            if *id != fp.id {
                return Err(Error::Data {
                    path: truth.to_path_buf(),
                    line: i + 1,
                    msg: format!("estimate id {id} does not match truth id {}", fp.id),
                });
            }
            fp.location.ok_or_else(|| Error::Data {
                path: truth.to_path_buf(),
                line: i + 1,
                msg: format!("record {} has no ground-truth location", fp.id),
            })
        })
        .collect()
}

/// Loads every `*.jsonl` estimate file of `runs` (except the truth file),
/// writes `report.csv` and one `ecdf_<method>.csv` per row.
pub fn report_dir(runs: &Path, truth: &Path, out: &Path) -> Result<()> {
    let io_err = |source| Error::Io {
        path: runs.to_path_buf(),
        source,
    };
    let truth_canon = fs::canonicalize(truth).ok();
    let mut files: Vec<PathBuf> = fs::read_dir(runs)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .filter(|p| fs::canonicalize(p).ok() != truth_canon)
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut truth_locs: Option<Vec<Location>> = None;
    let mut all = BTreeMap::new();
    for f in files {
        let name = f.file_stem().expect("file name").to_string_lossy().into_owned();
        let est = io::read_estimates(&f)?;
        let t = aligned_truth(&est, truth)?;
        truth_locs.get_or_insert(t);
        all.insert(name, est.into_iter().map(|(_, e)| e).collect::<Vec<_>>());
    }
    let truth_locs = truth_locs.expect("at least one run");
    let opt = all.contains_key("iterative").then_some("iterative");
    let report = compare_report(&all, &truth_locs, opt)?;
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    io::write_text(&out.join("report.csv"), &report.to_csv())?;
    for method in report.ecdfs.keys() {
        io::write_text(
            &out.join(format!("ecdf_{method}.csv")),
            &report.ecdf_csv(method).expect("present"),
        )?;
    }
    Ok(())
}
