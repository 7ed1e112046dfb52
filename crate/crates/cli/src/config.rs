//! Experiment config files.
//!
//! ```text
//! # comment
//! [toy]
//! objective = toy1d          # toy1d | hdbo | csv
//! methods   = ici, rci, ciwidth-global
//! horizon   = 40
//! seeds     = 1..10          # inclusive range, or a comma list
//! ```
//!
//! One section per experiment; each section expands to one config per method.
//! Lines are `key = value`; lists are comma-separated and may be wrapped in
//! `[...]`. Unknown keys, duplicate keys and duplicate sections are errors.
//! See the README for the full key table and defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ballet_core::ballet::{IntersectMode, MethodName};
use ballet_core::bench::{default_pool_size, ExperimentConfig, FilterSchedule, ObjectiveKind, ObjectiveSpec, HDBO_DIM};
use ballet_core::gp::{HyperBudget, KernelFamily};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key {key:?} in section [{section}]")]
    UnknownKey { section: String, key: String, line: usize },
    #[error("line {line}: key {key:?} given twice in section [{section}]")]
    DuplicateKey { section: String, key: String, line: usize },
    #[error("line {line}: section [{section}] defined twice")]
    DuplicateSection { section: String, line: usize },
    #[error("line {line}: invalid value {value:?} for key {key:?}: {reason}")]
    BadValue {
        key: String,
        value: String,
        line: usize,
        reason: String,
    },
    #[error("section [{section}]: missing required key {key:?}")]
    Missing { section: String, key: String },
    #[error("section [{section}]: {message}")]
    Invalid { section: String, message: String },
    #[error("config defines no experiments")]
    NoExperiments,
}

impl ConfigError {
    /// The key this error is about, when there is one.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. }
            | ConfigError::DuplicateKey { key, .. }
            | ConfigError::BadValue { key, .. }
            | ConfigError::Missing { key, .. } => Some(key),
            _ => None,
        }
    }
}

const KEYS: &[&str] = &[
    "objective",
    "path",
    "methods",
    "method",
    "horizon",
    "t",
    "seeds",
    "n_warmup",
    "delta",
    "beta_sqrt_filter",
    "filter_schedule",
    "beta_trace",
    "beta_sqrt_acq",
    "refit_interval",
    "pool_size",
    "intersection",
    "kernel",
    "noise_std",
    "restarts",
    "max_sweeps",
    "standardize",
    "init_noise",
];

fn canonical(key: &str) -> &str {
    match key {
        "method" => "methods",
        "t" => "horizon",
        k => k,
    }
}

#[derive(Debug)]
struct Section {
    name: String,
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

/// Reads and expands a config file.
pub fn parse_config(path: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

/// Parses config text; relative `path` values resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let sections = split_sections(text)?;
    if sections.is_empty() {
        return Err(ConfigError::NoExperiments);
    }
    let mut out = Vec::new();
    for s in &sections {
        out.extend(expand(s, base_dir)?);
    }
    Ok(out)
}

fn split_sections(text: &str) -> Result<Vec<Section>, ConfigError> {
    let mut sections: Vec<Section> = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .map(str::trim)
                .filter(|n| !n.is_empty() && !n.contains(['/', '\\']))
                .ok_or_else(|| ConfigError::Syntax {
                    line,
                    message: format!("malformed section header {content:?}"),
                })?;
            if sections.iter().any(|s| s.name == name) {
                return Err(ConfigError::DuplicateSection {
                    section: name.to_string(),
                    line,
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("expected `key = value`, got {content:?}"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim().to_string();
        let section = sections.last_mut().ok_or_else(|| ConfigError::Syntax {
            line,
            message: format!("key {key:?} appears before any [section]"),
        })?;
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                section: section.name.clone(),
                key,
                line,
            });
        }
        let canon = canonical(&key).to_string();
        if section.entries.contains_key(&canon) {
            return Err(ConfigError::DuplicateKey {
                section: section.name.clone(),
                key,
                line,
            });
        }
        section.entries.insert(canon, (value, line));
    }
    Ok(sections)
}

fn list(value: &str) -> Vec<String> {
    let v = value.trim();
    let v = v.strip_prefix('[').and_then(|s| s.strip_suffix(']')).unwrap_or(v);
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

struct Reader<'a> {
    section: &'a Section,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<&'a (String, usize)> {
        self.section.entries.get(key)
    }

    fn bad(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        let (value, line) = self.raw(key).cloned().unwrap_or_default();
        ConfigError::BadValue {
            key: key.to_string(),
            value,
            line,
            reason: reason.into(),
        }
    }

    fn required(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.raw(key)
            .map(|(v, _)| v.as_str())
            .ok_or_else(|| ConfigError::Missing {
                section: self.section.name.clone(),
                key: key.to_string(),
            })
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some((v, _)) => v.parse::<T>().map_err(|e| self.bad(key, e.to_string())),
        }
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v: f64 = self.parsed(key, default)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.bad(key, "must be finite"))
        }
    }
}

fn seeds(r: &Reader<'_>) -> Result<Vec<u64>, ConfigError> {
    let value = r.required("seeds")?;
    let mut out = Vec::new();
    for item in list(value) {
        if let Some((a, b)) = item.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u64 = a
                .trim()
                .parse()
                .map_err(|_| r.bad("seeds", format!("bad range start {a:?}")))?;
            let hi: u64 = b
                .trim()
                .parse()
                .map_err(|_| r.bad("seeds", format!("bad range end {b:?}")))?;
            if hi < lo {
                return Err(r.bad("seeds", format!("empty range {item}")));
            }
            out.extend(lo..=hi);
        } else {
            out.push(item.parse().map_err(|_| r.bad("seeds", format!("bad seed {item:?}")))?);
        }
    }
    if out.is_empty() {
        return Err(r.bad("seeds", "no seeds given"));
    }
    let mut sorted = out.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(r.bad("seeds", format!("duplicate seed {}", w[0])));
    }
    Ok(out)
}

fn expand(section: &Section, base_dir: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let r = Reader { section };
    let objective_name = r.required("objective")?.to_ascii_lowercase();
    let kind = match objective_name.as_str() {
        "toy1d" => ObjectiveKind::Toy1D,
        "hdbo" | "hdbo200" => ObjectiveKind::HdboSum { dim: HDBO_DIM },
        "csv" | "tabular" => {
            let p = PathBuf::from(r.required("path")?);
            ObjectiveKind::Tabular {
                path: if p.is_absolute() { p } else { base_dir.join(p) },
            }
        }
        _ => return Err(r.bad("objective", "expected toy1d, hdbo or csv")),
    };
    if r.raw("path").is_some() && !matches!(kind, ObjectiveKind::Tabular { .. }) {
        return Err(r.bad("path", "only valid with objective = csv"));
    }
    let default_noise = 0.0;
    let objective = ObjectiveSpec {
        noise_std: r.real("noise_std", default_noise)?,
        kind,
    };
    if objective.noise_std < 0.0 {
        return Err(r.bad("noise_std", "must be >= 0"));
    }

    let methods: Vec<MethodName> = list(r.required("methods")?)
        .iter()
        .map(|m| m.parse::<MethodName>().map_err(|e| r.bad("methods", e.to_string())))
        .collect::<Result<_, _>>()?;
    if methods.is_empty() {
        return Err(r.bad("methods", "no methods given"));
    }
    let mut labels: Vec<String> = methods.iter().map(|m| m.to_string()).collect();
    labels.sort();
    if labels.windows(2).any(|w| w[0] == w[1]) {
        return Err(r.bad("methods", "duplicate method"));
    }

    let horizon: usize = r.parsed("horizon", 0)?;
    r.required("horizon")?;
    if horizon == 0 {
        return Err(r.bad("horizon", "must be at least 1"));
    }
    let seeds = seeds(&r)?;
    let beta_sqrt_acq = r.real("beta_sqrt_acq", std::f64::consts::SQRT_2)?;
    let kernel = match r.raw("kernel").map(|(v, _)| v.to_ascii_lowercase()) {
        None => KernelFamily::Rbf,
        Some(k) if k == "rbf" || k == "se" => KernelFamily::Rbf,
        Some(k) if k == "linear" => KernelFamily::Linear,
        Some(_) => return Err(r.bad("kernel", "expected rbf or linear")),
    };
    let intersection = match r.raw("intersection").map(|(v, _)| v.to_ascii_lowercase()) {
        None => IntersectMode::PerStep,
        Some(v) if v == "per_step" || v == "perstep" => IntersectMode::PerStep,
        Some(v) if v == "historical" => IntersectMode::Historical,
        Some(_) => return Err(r.bad("intersection", "expected per_step or historical")),
    };
    let filter_schedule = match r.raw("filter_schedule").map(|(v, _)| v.to_ascii_lowercase()) {
        None => FilterSchedule::Fixed,
        Some(v) if v == "fixed" => FilterSchedule::Fixed,
        Some(v) if v == "theoretical" => FilterSchedule::Theoretical,
        Some(_) => return Err(r.bad("filter_schedule", "expected fixed or theoretical")),
    };
    let defaults = HyperBudget::default();
    let pool_size = r.parsed("pool_size", default_pool_size(&objective.kind))?;
    if r.raw("pool_size").is_some() && matches!(objective.kind, ObjectiveKind::Tabular { .. }) {
        return Err(r.bad("pool_size", "not used with objective = csv"));
    }

    let mut out = Vec::with_capacity(methods.len());
    for m in methods {
        let spec = m
            .into_spec(beta_sqrt_acq)
            .map_err(|e| r.bad("beta_sqrt_acq", e.to_string()))?;
        let mut c = ExperimentConfig::new(section.name.clone(), objective.clone(), spec);
        c.kernel = kernel;
        c.horizon = horizon;
        c.seeds = seeds.clone();
        c.n_warmup = r.parsed("n_warmup", c.n_warmup)?;
        c.delta = r.real("delta", c.delta)?;
        c.beta_sqrt_filter = r.real("beta_sqrt_filter", c.beta_sqrt_filter)?;
        c.filter_schedule = filter_schedule;
        c.beta_trace = r.real("beta_trace", c.beta_trace)?;
        c.refit_interval = r.parsed("refit_interval", c.refit_interval)?;
        c.pool_size = pool_size;
        c.intersection = intersection;
        c.hyper_budget = HyperBudget {
            restarts: r.parsed("restarts", defaults.restarts)?,
            max_sweeps: r.parsed("max_sweeps", defaults.max_sweeps)?,
        };
        c.standardize = r.parsed("standardize", c.standardize)?;
        c.init_noise_variance = r.real("init_noise", c.init_noise_variance)?;
        c.validate().map_err(|e| ConfigError::Invalid {
            section: section.name.clone(),
            message: e.to_string(),
        })?;
        out.push(c);
    }
    let _ = section.line;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ballet_core::ballet::{AcquisitionFamily, Scope};

    fn parse(text: &str) -> Result<Vec<ExperimentConfig>, ConfigError> {
        parse_config_str(text, Path::new("/data"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfgs = parse("[toy]\nobjective = toy1d\nmethod = ICI\nT = 40\nseeds = [1..10]\n").unwrap();
        assert_eq!(cfgs.len(), 1);
        let c = &cfgs[0];
        assert_eq!(c.name, "toy");
        assert_eq!(c.acquisition.family, AcquisitionFamily::Ici);
        assert_eq!(c.acquisition.scope, Scope::Intersect);
        assert_eq!(c.horizon, 40);
        assert_eq!(c.seeds, (1..=10).collect::<Vec<u64>>());
        assert_eq!(c.n_warmup, 10);
        assert_eq!(c.delta, 0.2);
        assert_eq!(c.beta_sqrt_filter, 0.2);
        assert_eq!(c.beta_trace, 2.0);
        assert_eq!(c.pool_size, 1000);
        assert_eq!(c.acquisition.beta_sqrt_acq, std::f64::consts::SQRT_2);
    }

    #[test]
    fn sections_expand_per_method() {
        let text = "# two arms\n[a]\nobjective = toy1d\nmethods = ici, rci, ts-global\nhorizon = 5\nseeds = 1, 2\n\n[b]\nobjective = csv\npath = pools/gb1.csv\nmethods = ucb-roi\nhorizon = 3\nseeds = 7\nkernel = linear\n";
        let cfgs = parse(text).unwrap();
        assert_eq!(cfgs.len(), 4);
        assert_eq!(cfgs[2].acquisition.family, AcquisitionFamily::Ts);
        assert_eq!(
            cfgs[3].objective.kind,
            ObjectiveKind::Tabular {
                path: PathBuf::from("/data/pools/gb1.csv")
            }
        );
        assert_eq!(cfgs[3].kernel, KernelFamily::Linear);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("[toy]\nobjective = toy1d\nmethods = ici\nhorizon = 4\nseeds = 1\nbta = 2\n").unwrap_err();
        assert_eq!(err.key(), Some("bta"));
        assert!(err.to_string().contains("\"bta\""));
    }

    #[test]
    fn duplicate_seeds_rejected() {
        let err = parse("[toy]\nobjective = toy1d\nmethods = ici\nhorizon = 4\nseeds = 1, 2, 2\n").unwrap_err();
        assert_eq!(err.key(), Some("seeds"));
        let err = parse("[toy]\nobjective = toy1d\nmethods = ici\nhorizon = 4\nseeds = 1..3, 3\n").unwrap_err();
        assert_eq!(err.key(), Some("seeds"));
    }

    #[test]
    fn missing_and_type_errors_name_the_key() {
        let err = parse("[toy]\nobjective = toy1d\nhorizon = 4\nseeds = 1\n").unwrap_err();
        assert!(matches!(&err, ConfigError::Missing { key, .. } if key == "methods"));
        let err = parse("[toy]\nobjective = toy1d\nmethods = ici\nhorizon = four\nseeds = 1\n").unwrap_err();
        assert_eq!(err.key(), Some("horizon"));
        let err = parse("[toy]\nobjective = toy1d\nmethods = ici-global\nhorizon = 4\nseeds = 1\n").unwrap_err();
        assert_eq!(err.key(), Some("methods"));
        let err = parse("[toy]\nobjective = toy1d\nmethods = ici\nhorizon = 4\nseeds = 1\nstandardize = maybe\n")
            .unwrap_err();
        assert_eq!(err.key(), Some("standardize"));
    }

    #[test]
    fn structural_errors() {
        assert!(matches!(parse(""), Err(ConfigError::NoExperiments)));
        assert!(matches!(
            parse("objective = toy1d\n"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse("[a]\nobjective\n"),
            Err(ConfigError::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse("[a]\nobjective = toy1d\nobjective = hdbo\n"),
            Err(ConfigError::DuplicateKey { .. })
        ));
        assert!(matches!(
            parse("[a]\nobjective = toy1d\nmethods = ici\nhorizon = 1\nseeds = 1\n[a]\n"),
            Err(ConfigError::DuplicateSection { .. })
        ));
        assert!(matches!(
            parse("[a]\nobjective = toy1d\nmethods = ici\nhorizon = 1\nseeds = 1\nn_warmup = 0\n"),
            Err(ConfigError::Invalid { .. })
        ));
    }
}
