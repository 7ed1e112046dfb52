use nalgebra::DVector;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use super::pool::{generate_pool, CandidatePool, ObjectiveKind, ObjectiveSpec};
use crate::ballet::{
    AcquisitionSpec, BalletConfig, BalletState, FilterBeta, IntersectMode, Observation, StepDiagnostics,
};
use crate::gp::{HyperBudget, KernelFamily};
use crate::{Error, Result};

// ChaCha stream ids; the optimizer state uses streams 0 and 1.
const POOL_STREAM: u64 = 2;
const WARMUP_STREAM: u64 = 3;
const NOISE_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterSchedule {
    /// Use `beta_sqrt_filter` at every step.
    Fixed,
    /// Use the confidence schedule with `delta`.
    Theoretical,
}

/// Everything that defines one experiment arm; a trial is this plus a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub objective: ObjectiveSpec,
    pub acquisition: AcquisitionSpec,
    pub kernel: KernelFamily,
    pub horizon: usize,
    pub n_warmup: usize,
    pub seeds: Vec<u64>,
    pub delta: f64,
    pub beta_sqrt_filter: f64,
    pub filter_schedule: FilterSchedule,
    /// `beta_t` (not its square root) for the confidence-width traces.
    pub beta_trace: f64,
    pub refit_interval: usize,
    /// Synthetic pool size; ignored for tabular objectives.
    pub pool_size: usize,
    pub intersection: IntersectMode,
    pub hyper_budget: HyperBudget,
    pub standardize: bool,
    pub init_noise_variance: f64,
}

impl ExperimentConfig {
    /// Defaults: 10 warm-up points, delta 0.2, filtering `beta^{1/2}` 0.2,
    /// trace `beta_t` 2, refit every step, per-step intersection.
    pub fn new(name: impl Into<String>, objective: ObjectiveSpec, acquisition: AcquisitionSpec) -> Self {
        let pool_size = default_pool_size(&objective.kind);
        ExperimentConfig {
            name: name.into(),
            objective,
            acquisition,
            kernel: KernelFamily::Rbf,
            horizon: 40,
            n_warmup: 10,
            seeds: (1..=10).collect(),
            delta: 0.2,
            beta_sqrt_filter: 0.2,
            filter_schedule: FilterSchedule::Fixed,
            beta_trace: 2.0,
            refit_interval: 1,
            pool_size,
            intersection: IntersectMode::PerStep,
            hyper_budget: HyperBudget::default(),
            standardize: true,
            init_noise_variance: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("at least one seed is required".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.seeds {
            if !seen.insert(*s) {
                return Err(Error::InvalidInput(format!("duplicate seed {s}")));
            }
        }
        self.validate_trial()
    }

    fn validate_trial(&self) -> Result<()> {
        if self.n_warmup == 0 {
            return Err(Error::InvalidInput("n_warmup must be at least 1".into()));
        }
        if !(self.beta_trace >= 0.0 && self.beta_trace.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "beta_trace must be >= 0, got {}",
                self.beta_trace
            )));
        }
        if !(self.objective.noise_std >= 0.0 && self.objective.noise_std.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "noise_std must be >= 0, got {}",
                self.objective.noise_std
            )));
        }
        self.ballet_config().validate()
    }

    pub fn ballet_config(&self) -> BalletConfig {
        BalletConfig {
            kernel: self.kernel,
            init_noise_variance: self.init_noise_variance,
            filter: match self.filter_schedule {
                FilterSchedule::Fixed => FilterBeta::Fixed(self.beta_sqrt_filter),
                FilterSchedule::Theoretical => FilterBeta::Schedule { delta: self.delta },
            },
            acquisition: self.acquisition,
            beta_sqrt_trace: self.beta_trace.sqrt(),
            refit_interval: self.refit_interval,
            hyper_budget: self.hyper_budget,
            intersection: self.intersection,
            standardize: self.standardize,
            ..BalletConfig::default()
        }
    }

    /// Stable digest of every setting except the seed list.
    pub fn config_hash(&self) -> String {
        let mut c = self.clone();
        c.seeds.clear();
        let digest = Sha256::digest(format!("{c:?}").as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

pub fn default_pool_size(kind: &ObjectiveKind) -> usize {
    match kind {
        ObjectiveKind::Toy1D => 1000,
        ObjectiveKind::HdboSum { .. } => 2000,
        ObjectiveKind::Tabular { .. } => 0,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Warmup,
    Step,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Step => "step",
        }
    }
}

/// One row of a trial trace. Row `t = 0` summarizes the warm-up set; the
/// diagnostics of every row describe the models after that row's observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub phase: Phase,
    pub chosen_index: Option<usize>,
    pub observed_y: f64,
    pub best_y: f64,
    pub simple_regret: f64,
    pub roi_ratio: f64,
    pub roi_threshold: f64,
    pub width_global: f64,
    pub width_roi: f64,
    pub width_intersect: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialTrace {
    pub seed: u64,
    pub config_hash: String,
    pub f_star: f64,
    pub records: Vec<TraceRecord>,
}

impl TrialTrace {
    pub fn final_regret(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.simple_regret)
    }

    /// Running sum of `f_star - y_t` over the adaptive steps.
    pub fn cumulative_regret(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.phase == Phase::Step)
            .scan(0.0, |acc, r| {
                *acc += self.f_star - r.observed_y;
                Some(*acc)
            })
            .collect()
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the pool for a trial seed.
pub fn trial_pool(config: &ExperimentConfig, seed: u64) -> Result<CandidatePool> {
    generate_pool(&config.objective, config.pool_size, &mut stream_rng(seed, POOL_STREAM))
}

/// Runs one seeded trial: random warm-up, then `horizon` optimization steps.
pub fn run_trial(config: &ExperimentConfig, seed: u64) -> Result<TrialTrace> {
    let pool = trial_pool(config, seed)?;
    run_trial_on_pool(config, &pool, seed)
}

/// [`run_trial`] on a prebuilt pool.
pub fn run_trial_on_pool(config: &ExperimentConfig, pool: &CandidatePool, seed: u64) -> Result<TrialTrace> {
    config.validate_trial()?;
    let (labels, f_star) = match (&pool.labels, pool.f_star) {
        (Some(l), Some(f)) => (l, f),
        _ => return Err(Error::InvalidInput(format!("pool {} has no labels", pool.name))),
    };
    let required = config.n_warmup + config.horizon;
    if pool.len() < required {
        return Err(Error::InsufficientPool {
            required,
            available: pool.len(),
        });
    }

    let mut noise_rng = stream_rng(seed, NOISE_STREAM);
    let noise_std = config.objective.noise_std;
    let mut observe = |i: usize, labels: &DVector<f64>| -> f64 {
        if noise_std > 0.0 {
            labels[i] + noise_std * noise_rng.sample::<f64, _>(StandardNormal)
        } else {
            labels[i]
        }
    };

    let warm = index::sample(&mut stream_rng(seed, WARMUP_STREAM), pool.len(), config.n_warmup).into_vec();
    let warmup: Vec<Observation> = warm
        .iter()
        .map(|&i| Observation {
            index: i,
            y: observe(i, labels),
        })
        .collect();
    let mut best_y = warmup.iter().map(|o| o.y).fold(f64::NEG_INFINITY, f64::max);
    let mut best_label = warm.iter().map(|&i| labels[i]).fold(f64::NEG_INFINITY, f64::max);

    let mut state = BalletState::new(&pool.features, warmup, config.ballet_config(), seed)?;
    let mut records = Vec::with_capacity(config.horizon + 1);
    records.push(record(
        0,
        Phase::Warmup,
        None,
        best_y,
        best_y,
        f_star - best_label,
        &state.diagnostics()?,
    ));

    for _ in 0..config.horizon {
        let out = state.step(|i| observe(i, labels))?;
        best_y = best_y.max(out.y);
        best_label = best_label.max(labels[out.index]);
        records.push(record(
            state.iteration(),
            Phase::Step,
            Some(out.index),
            out.y,
            best_y,
            f_star - best_label,
            &out.diagnostics,
        ));
    }
    Ok(TrialTrace {
        seed,
        config_hash: config.config_hash(),
        f_star,
        records,
    })
}

fn record(
    t: usize,
    phase: Phase,
    chosen_index: Option<usize>,
    observed_y: f64,
    best_y: f64,
    simple_regret: f64,
    d: &StepDiagnostics,
) -> TraceRecord {
    TraceRecord {
        t,
        phase,
        chosen_index,
        observed_y,
        best_y,
        simple_regret,
        roi_ratio: d.roi_ratio,
        roi_threshold: d.roi_threshold,
        width_global: d.width_global,
        width_roi: d.width_roi,
        width_intersect: d.width_intersect,
    }
}
