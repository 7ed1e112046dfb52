//! Experiment runner behind the `ballet` binary.
//!
//! A run reads a config file, expands it into one experiment per
//! (section, method), runs every seed, and writes
//!
//! ```text
//! <out>/<section>/<method>/trace_seed<seed>.csv
//! <out>/<section>/<method>/summary.csv
//! ```
//!
//! Summaries are written after all traces of their arm. Output bytes do not
//! depend on the number of worker threads.

pub mod config;
pub mod output;

use std::path::{Path, PathBuf};

use ballet_core::ballet::MethodName;
use ballet_core::bench::{aggregate, run_trial, ExperimentConfig, TrialTrace};
use rayon::prelude::*;
use thiserror::Error;

pub use config::{parse_config, parse_config_str, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} already exists (pass --overwrite to replace it)")]
    WouldOverwrite { path: String },
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            _ => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io { .. } | CliError::WouldOverwrite { .. } => "io",
            CliError::Runtime(_) => "runtime",
        }
    }

    /// One-line, tab-separated description for scripts.
    pub fn machine_line(&self) -> String {
        let mut line = format!("error\tkind={}", self.kind());
        if let CliError::Config(c) = self {
            if let Some(k) = c.key() {
                line.push_str(&format!("\tkey={k}"));
            }
        }
        line.push_str(&format!("\tmessage={}", one_line(&self.to_string())));
        line
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\t'], " ")
}

/// What to run and where to put it.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub out_dir: PathBuf,
    /// Worker threads; 0 means rayon's default.
    pub jobs: usize,
    pub overwrite: bool,
    /// Added to every configured seed.
    pub seed_offset: u64,
    /// Run only these methods; `None` runs every method in the config.
    pub methods: Option<Vec<MethodName>>,
}

/// A trial that raised an error.
#[derive(Debug, Clone)]
pub struct TrialFailure {
    pub experiment: String,
    pub method: String,
    pub seed: u64,
    pub message: String,
}

impl TrialFailure {
    pub fn machine_line(&self) -> String {
        format!(
            "error\tkind=trial\texperiment={}\tmethod={}\tseed={}\tmessage={}",
            self.experiment,
            self.method,
            self.seed,
            one_line(&self.message)
        )
    }
}

#[derive(Debug, Default)]
pub struct RunReport {
    pub trials_ok: usize,
    pub failures: Vec<TrialFailure>,
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            3
        }
    }
}

/// Output directory for one arm.
pub fn arm_dir(out_dir: &Path, config: &ExperimentConfig) -> PathBuf {
    out_dir.join(&config.name).join(config.acquisition.label())
}

pub fn trace_path(out_dir: &Path, config: &ExperimentConfig, seed: u64) -> PathBuf {
    arm_dir(out_dir, config).join(format!("trace_seed{seed}.csv"))
}

pub fn summary_path(out_dir: &Path, config: &ExperimentConfig) -> PathBuf {
    arm_dir(out_dir, config).join("summary.csv")
}

/// Applies the seed offset to every config.
fn offset_seeds(configs: &mut [ExperimentConfig], offset: u64) -> Result<(), CliError> {
    for c in configs {
        for s in &mut c.seeds {
            *s = s
                .checked_add(offset)
                .ok_or_else(|| CliError::Runtime(format!("seed {s} + offset {offset} overflows")))?;
        }
    }
    Ok(())
}

fn planned_outputs(out_dir: &Path, configs: &[ExperimentConfig]) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for c in configs {
        paths.extend(c.seeds.iter().map(|&s| trace_path(out_dir, c, s)));
        paths.push(summary_path(out_dir, c));
    }
    paths
}

/// Runs every experiment in the manifest's config.
pub fn run(manifest: &RunManifest) -> Result<RunReport, CliError> {
    let mut configs = parse_config(&manifest.config_path)?;
    if let Some(methods) = &manifest.methods {
        configs = select_methods(configs, methods)?;
    }
    offset_seeds(&mut configs, manifest.seed_offset)?;
    run_configs(&configs, &manifest.out_dir, manifest.jobs, manifest.overwrite)
}

fn select_methods(configs: Vec<ExperimentConfig>, methods: &[MethodName]) -> Result<Vec<ExperimentConfig>, CliError> {
    if methods.is_empty() {
        return Err(CliError::Runtime("method filter is empty".into()));
    }
    let kept: Vec<ExperimentConfig> = configs
        .into_iter()
        .filter(|c| {
            methods
                .iter()
                .any(|m| m.family == c.acquisition.family && m.scope == c.acquisition.scope)
        })
        .collect();
    if kept.is_empty() {
        return Err(CliError::Runtime(
            "no configured experiment uses the requested methods".into(),
        ));
    }
    Ok(kept)
}

/// Runs already-expanded configs. Seeds are used as given.
pub fn run_configs(
    configs: &[ExperimentConfig],
    out_dir: &Path,
    jobs: usize,
    overwrite: bool,
) -> Result<RunReport, CliError> {
    if !overwrite {
        if let Some(p) = planned_outputs(out_dir, configs).into_iter().find(|p| p.exists()) {
            return Err(CliError::WouldOverwrite {
                path: p.display().to_string(),
            });
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let tasks: Vec<(usize, u64)> = configs
        .iter()
        .enumerate()
        .flat_map(|(k, c)| c.seeds.iter().map(move |&s| (k, s)))
        .collect();
    let results: Vec<ballet_core::Result<TrialTrace>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(k, s)| {
                log_line(&format!(
                    "running {} / {} seed {s}",
                    configs[k].name,
                    configs[k].acquisition.label()
                ));
                run_trial(&configs[k], s)
            })
            .collect()
    });

    let mut report = RunReport::default();
    let mut results = results.into_iter();
    for c in configs {
        let label = c.acquisition.label();
        let mut traces = Vec::with_capacity(c.seeds.len());
        for &seed in &c.seeds {
            match results.next().expect("one result per task") {
                Ok(trace) => {
                    let path = trace_path(out_dir, c, seed);
                    output::write_atomic(&path, &output::trace_csv(&trace))?;
                    report.files.push(path);
                    report.trials_ok += 1;
                    traces.push(trace);
                }
                Err(e) => report.failures.push(TrialFailure {
                    experiment: c.name.clone(),
                    method: label.clone(),
                    seed,
                    message: e.to_string(),
                }),
            }
        }
        if traces.is_empty() {
            continue;
        }
        let summary = aggregate(&traces).map_err(|e| CliError::Runtime(e.to_string()))?;
        let path = summary_path(out_dir, c);
        output::write_atomic(&path, &output::summary_csv(&summary))?;
        report.files.push(path);
    }
    Ok(report)
}

fn log_line(msg: &str) {
    if std::env::var_os("BALLET_QUIET").is_none() {
        eprintln!("{msg}");
    }
}

/// One line per acquisition family with its scopes; the first is the default.
///
/// Methods are written `family` or `family-scope` in configs.
pub fn method_listing() -> String {
    use ballet_core::ballet::AcquisitionFamily;
    let mut out = String::new();
    for fam in AcquisitionFamily::ALL {
        let scopes: Vec<&str> = fam.allowed_scopes().iter().map(|s| s.name()).collect();
        out.push_str(&format!("{:<8} scopes: {}\n", fam.name(), scopes.join(", ")));
    }
    out
}
