use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::acquisition::{expected_improvement, select_next, AcquisitionFamily, AcquisitionSpec, Scope};
use super::bounds::{
    beta_schedule, filter_roi, intersect_bounds, intersect_bounds_historical, max_interval_width,
    partition_observations, ConfidenceBounds, IntersectMode, IntersectedBounds, ModelTag, Observation,
    RegionOfInterest,
};
use crate::gp::{
    optimize_hyperparams, standardize, GpHyperparams, GpModel, HyperBudget, KernelFamily, KernelSpec, PosteriorSummary,
};
use crate::{Error, Result};

/// How the filtering confidence width is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterBeta {
    /// Constant `beta^{1/2}`.
    Fixed(f64),
    /// `beta_t^{1/2}` from [`beta_schedule`] over the whole pool.
    Schedule { delta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalletConfig {
    pub kernel: KernelFamily,
    /// Starting noise variance (standardized scale) for the first fit.
    pub init_noise_variance: f64,
    pub filter: FilterBeta,
    pub acquisition: AcquisitionSpec,
    /// `beta^{1/2}` used for the width diagnostics.
    pub beta_sqrt_trace: f64,
    /// Refit hyperparameters every this many steps; 0 fits them once.
    pub refit_interval: usize,
    pub hyper_budget: HyperBudget,
    pub intersection: IntersectMode,
    pub standardize: bool,
    /// Cap on the number of candidates in one joint Thompson draw.
    pub ts_max_candidates: usize,
}

impl Default for BalletConfig {
    fn default() -> Self {
        BalletConfig {
            kernel: KernelFamily::Rbf,
            init_noise_variance: 0.1,
            filter: FilterBeta::Fixed(0.2),
            acquisition: AcquisitionSpec {
                family: AcquisitionFamily::Ici,
                scope: Scope::Intersect,
                beta_sqrt_acq: std::f64::consts::SQRT_2,
            },
            beta_sqrt_trace: std::f64::consts::SQRT_2,
            refit_interval: 1,
            hyper_budget: HyperBudget::default(),
            intersection: IntersectMode::PerStep,
            standardize: true,
            ts_max_candidates: 2000,
        }
    }
}

impl BalletConfig {
    pub fn validate(&self) -> Result<()> {
        AcquisitionSpec::new(
            self.acquisition.family,
            self.acquisition.scope,
            self.acquisition.beta_sqrt_acq,
        )?;
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        match self.filter {
            FilterBeta::Fixed(b) if !nonneg(b) => {
                return Err(Error::InvalidInput(format!(
                    "filtering beta_sqrt must be >= 0, got {b}"
                )))
            }
            FilterBeta::Schedule { delta } if !(delta > 0.0 && delta < 1.0) => {
                return Err(Error::InvalidInput(format!("delta must lie in (0, 1), got {delta}")))
            }
            _ => {}
        }
        if !nonneg(self.beta_sqrt_trace) {
            return Err(Error::InvalidInput(format!(
                "trace beta_sqrt must be >= 0, got {}",
                self.beta_sqrt_trace
            )));
        }
        if self.ts_max_candidates == 0 {
            return Err(Error::InvalidInput("ts_max_candidates must be positive".into()));
        }
        self.initial_hyper().map(|_| ())
    }

    fn initial_hyper(&self) -> Result<GpHyperparams> {
        GpHyperparams::new(KernelSpec::default_for(self.kernel), self.init_noise_variance)
    }
}

/// Region and confidence-width summary of the current state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub roi_size: usize,
    pub roi_ratio: f64,
    pub roi_threshold: f64,
    /// Filtering `beta^{1/2}` actually applied (after any widening).
    pub filter_beta_sqrt: f64,
    pub width_global: f64,
    pub width_roi: f64,
    pub width_intersect: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub index: usize,
    pub y: f64,
    pub diagnostics: StepDiagnostics,
}

/// Acquisition values over the eligible pool indices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub indices: Vec<usize>,
    pub scores: Vec<f64>,
}

/// State of one optimization run over a fixed candidate pool.
///
/// After construction and after every [`step`](Self::step) the state holds
/// the global model fit on all observations, the region of interest, and the
/// ROI model fit on the observations inside it.
#[derive(Debug, Clone)]
pub struct BalletState<'a> {
    features: &'a DMatrix<f64>,
    config: BalletConfig,
    all_indices: Vec<usize>,
    selected: Vec<Observation>,
    taken: Vec<bool>,
    t: usize,
    global_hyper: GpHyperparams,
    roi_hyper: GpHyperparams,
    global_model: GpModel,
    roi_model: GpModel,
    roi_shares_global: bool,
    roi: RegionOfInterest,
    filter_beta_sqrt: f64,
    global_post: PosteriorSummary,
    roi_post: PosteriorSummary,
    historical: Option<IntersectedBounds>,
    fit_rng: ChaCha8Rng,
    acq_rng: ChaCha8Rng,
}

impl<'a> BalletState<'a> {
    /// Starts from the warm-up observations and fits both models.
    pub fn new(features: &'a DMatrix<f64>, warmup: Vec<Observation>, config: BalletConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let n_pool = features.nrows();
        if warmup.is_empty() {
            return Err(Error::InvalidInput(
                "at least one warm-up observation is required".into(),
            ));
        }
        let mut taken = vec![false; n_pool];
        for o in &warmup {
            if o.index >= n_pool {
                return Err(Error::InvalidInput(format!(
                    "observation index {} outside pool of {n_pool}",
                    o.index
                )));
            }
            if std::mem::replace(&mut taken[o.index], true) {
                return Err(Error::InvalidInput(format!(
                    "duplicate observation of pool index {}",
                    o.index
                )));
            }
            if !o.y.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite observation at pool index {}",
                    o.index
                )));
            }
        }
        let hyper = config.initial_hyper()?;
        let prior = GpModel::prior(features.ncols(), hyper)?;
        let fit_rng = ChaCha8Rng::seed_from_u64(seed);
        let mut acq_rng = ChaCha8Rng::seed_from_u64(seed);
        acq_rng.set_stream(1);
        let mut state = BalletState {
            features,
            config,
            all_indices: (0..n_pool).collect(),
            selected: warmup,
            taken,
            t: 0,
            global_hyper: hyper,
            roi_hyper: hyper,
            global_model: prior.clone(),
            roi_model: prior,
            roi_shares_global: true,
            roi: RegionOfInterest {
                indices: Vec::new(),
                threshold: f64::NAN,
                ratio: 0.0,
            },
            filter_beta_sqrt: 0.0,
            global_post: PosteriorSummary {
                mean: Vec::new(),
                std: Vec::new(),
            },
            roi_post: PosteriorSummary {
                mean: Vec::new(),
                std: Vec::new(),
            },
            historical: None,
            fit_rng,
            acq_rng,
        };
        state.prepare()?;
        Ok(state)
    }

    pub fn config(&self) -> &BalletConfig {
        &self.config
    }

    /// Adaptive steps completed so far.
    pub fn iteration(&self) -> usize {
        self.t
    }

    pub fn selected(&self) -> &[Observation] {
        &self.selected
    }

    pub fn is_selected(&self, pool_index: usize) -> bool {
        self.taken[pool_index]
    }

    pub fn roi(&self) -> &RegionOfInterest {
        &self.roi
    }

    pub fn global_model(&self) -> &GpModel {
        &self.global_model
    }

    pub fn roi_model(&self) -> &GpModel {
        &self.roi_model
    }

    /// True when the ROI model is the global model (too few or all observations inside the region).
    pub fn roi_shares_global(&self) -> bool {
        self.roi_shares_global
    }

    pub fn global_posterior(&self) -> &PosteriorSummary {
        &self.global_post
    }

    pub fn roi_posterior(&self) -> &PosteriorSummary {
        &self.roi_post
    }

    pub fn historical_bounds(&self) -> Option<&IntersectedBounds> {
        self.historical.as_ref()
    }

    fn refit_due(&self) -> bool {
        self.t == 0 || (self.config.refit_interval > 0 && self.t.is_multiple_of(self.config.refit_interval))
    }

    fn targets_for_search(&self, y: &DVector<f64>) -> DVector<f64> {
        if self.config.standardize {
            standardize(y).0
        } else {
            y.clone()
        }
    }

    fn fit_model(
        &mut self,
        obs: &[Observation],
        hyper: GpHyperparams,
        refit: bool,
    ) -> Result<(GpModel, GpHyperparams)> {
        let x = self.features.select_rows(obs.iter().map(|o| &o.index));
        let y = DVector::from_iterator(obs.len(), obs.iter().map(|o| o.y));
        let mut hyper = hyper;
        if refit && obs.len() >= 2 {
            let ys = self.targets_for_search(&y);
            hyper = optimize_hyperparams(&x, &ys, &hyper, self.config.hyper_budget, &mut self.fit_rng)?.hyper;
        }
        let model = GpModel::fit(&x, &y, hyper, self.config.standardize)?;
        Ok((model, hyper))
    }

    fn base_filter_beta(&self) -> Result<f64> {
        match self.config.filter {
            FilterBeta::Fixed(b) => Ok(b),
            FilterBeta::Schedule { delta } => Ok(beta_schedule(self.t + 1, self.features.nrows(), delta)?.sqrt()),
        }
    }

    /// Refits both models on the current observations and recomputes the region.
    fn prepare(&mut self) -> Result<()> {
        let refit = self.refit_due();
        let selected = self.selected.clone();
        let (global, global_hyper) = self.fit_model(&selected, self.global_hyper, refit)?;
        self.global_hyper = global_hyper;
        self.global_post = global.posterior_mean_var(self.features)?;
        self.global_model = global;

        // Widen the filter while every candidate in the region has already
        // been observed; the region grows monotonically with beta.
        let mut beta = self.base_filter_beta()?;
        let has_free = self.selected.len() < self.features.nrows();
        let mut roi = filter_roi(&self.global_bounds(beta)?)?;
        let mut widenings = 0;
        while has_free && roi.indices.iter().all(|&i| self.taken[i]) {
            if widenings == 64 {
                roi = RegionOfInterest {
                    indices: self.all_indices.clone(),
                    threshold: roi.threshold,
                    ratio: 1.0,
                };
                break;
            }
            beta = (beta * 2.0).max(1e-3);
            roi = filter_roi(&self.global_bounds(beta)?)?;
            widenings += 1;
        }
        self.filter_beta_sqrt = beta;
        self.roi = roi;

        let inside = partition_observations(&self.selected, &self.roi);
        if inside.len() < 2 || inside.len() == self.selected.len() {
            self.roi_model = self.global_model.clone();
            self.roi_hyper = self.global_hyper;
            self.roi_shares_global = true;
            self.roi_post = PosteriorSummary {
                mean: self.roi.indices.iter().map(|&i| self.global_post.mean[i]).collect(),
                std: self.roi.indices.iter().map(|&i| self.global_post.std[i]).collect(),
            };
        } else {
            let (model, hyper) = self.fit_model(&inside, self.roi_hyper, refit)?;
            self.roi_hyper = hyper;
            self.roi_post = model.posterior_mean_var(&self.features.select_rows(self.roi.indices.iter()))?;
            self.roi_model = model;
            self.roi_shares_global = false;
        }

        if self.config.intersection == IntersectMode::Historical {
            let step = self.intersected(self.config.acquisition.beta_sqrt_acq)?;
            self.historical = Some(match &self.historical {
                Some(prev) => intersect_bounds_historical(prev, &step),
                None => IntersectedBounds {
                    mode: IntersectMode::Historical,
                    ..step
                },
            });
        }
        Ok(())
    }

    /// Global-model bounds over the whole pool.
    pub fn global_bounds(&self, beta_sqrt: f64) -> Result<ConfidenceBounds> {
        ConfidenceBounds::from_summary(&self.all_indices, &self.global_post, beta_sqrt, ModelTag::Global)
    }

    /// ROI-model bounds over the region.
    pub fn roi_bounds(&self, beta_sqrt: f64) -> Result<ConfidenceBounds> {
        ConfidenceBounds::from_summary(&self.roi.indices, &self.roi_post, beta_sqrt, ModelTag::Roi)
    }

    /// Per-step intersection of global and ROI intervals over the region.
    pub fn intersected(&self, beta_sqrt: f64) -> Result<IntersectedBounds> {
        intersect_bounds(&self.global_bounds(beta_sqrt)?, &self.roi_bounds(beta_sqrt)?, &self.roi)
    }

    /// Width of the interval for the optimum value, `max UCB - max LCB`,
    /// over the pool (global) or the region (ROI, intersection).
    pub fn ci_width_estimate_at(&self, scope: Scope, beta_sqrt: f64) -> Result<f64> {
        Ok(match scope {
            Scope::Global => {
                let b = self.global_bounds(beta_sqrt)?;
                max_interval_width(&b.lcb, &b.ucb)
            }
            Scope::Roi => {
                let b = self.roi_bounds(beta_sqrt)?;
                max_interval_width(&b.lcb, &b.ucb)
            }
            Scope::Intersect => {
                let b = self.intersected(beta_sqrt)?;
                max_interval_width(&b.lcb, &b.ucb)
            }
        })
    }

    /// [`ci_width_estimate_at`](Self::ci_width_estimate_at) with the configured trace width.
    pub fn ci_width_estimate(&self, scope: Scope) -> Result<f64> {
        self.ci_width_estimate_at(scope, self.config.beta_sqrt_trace)
    }

    pub fn diagnostics(&self) -> Result<StepDiagnostics> {
        Ok(StepDiagnostics {
            roi_size: self.roi.len(),
            roi_ratio: self.roi.ratio,
            roi_threshold: self.roi.threshold,
            filter_beta_sqrt: self.filter_beta_sqrt,
            width_global: self.ci_width_estimate(Scope::Global)?,
            width_roi: self.ci_width_estimate(Scope::Roi)?,
            width_intersect: self.ci_width_estimate(Scope::Intersect)?,
        })
    }

    fn eligible(&self, scope: Scope) -> Vec<usize> {
        let domain = match scope {
            Scope::Global => &self.all_indices,
            Scope::Roi | Scope::Intersect => &self.roi.indices,
        };
        domain.iter().copied().filter(|&i| !self.taken[i]).collect()
    }

    /// Intersected bounds used for scoring: the running intersection in
    /// historical mode, the per-step one otherwise.
    fn scoring_intersection(&self, beta_sqrt: f64) -> Result<IntersectedBounds> {
        match (&self.historical, self.config.intersection) {
            (Some(h), IntersectMode::Historical) if beta_sqrt == self.config.acquisition.beta_sqrt_acq => Ok(h.clone()),
            _ => self.intersected(beta_sqrt),
        }
    }

    /// Scores every eligible candidate: unobserved pool points, restricted
    /// to the region for ROI and intersection scopes.
    pub fn acquisition_scores(&mut self, spec: &AcquisitionSpec) -> Result<ScoredCandidates> {
        let spec = AcquisitionSpec::new(spec.family, spec.scope, spec.beta_sqrt_acq)?;
        let mut eligible = self.eligible(spec.scope);
        if eligible.is_empty() {
            return Err(Error::PoolExhausted);
        }
        let beta = spec.beta_sqrt_acq;
        let roi_pos =
            |i: usize, roi: &RegionOfInterest| roi.indices.binary_search(&i).expect("eligible index inside region");

        if spec.is_sampling() {
            if eligible.len() > self.config.ts_max_candidates {
                let mut pick: Vec<usize> =
                    index::sample(&mut self.acq_rng, eligible.len(), self.config.ts_max_candidates)
                        .into_iter()
                        .map(|k| eligible[k])
                        .collect();
                pick.sort_unstable();
                eligible = pick;
            }
            let rows = self.features.select_rows(eligible.iter());
            let model = match spec.scope {
                Scope::Global => &self.global_model,
                Scope::Roi | Scope::Intersect => &self.roi_model,
            };
            let draw = model.sample_posterior(&rows, &mut self.acq_rng)?;
            let mut scores: Vec<f64> = draw.iter().copied().collect();
            if spec.scope == Scope::Intersect {
                let x = self.scoring_intersection(beta)?;
                for (s, &i) in scores.iter_mut().zip(&eligible) {
                    *s = clamp_to(&x, x.position(i).expect("eligible index inside region"), *s);
                }
            }
            return Ok(ScoredCandidates {
                indices: eligible,
                scores,
            });
        }

        let scores: Vec<f64> = match spec.scope {
            Scope::Global | Scope::Roi => {
                let post_at = |i: usize| -> (f64, f64) {
                    if spec.scope == Scope::Global {
                        (self.global_post.mean[i], self.global_post.std[i])
                    } else {
                        let k = roi_pos(i, &self.roi);
                        (self.roi_post.mean[k], self.roi_post.std[k])
                    }
                };
                let best = self.best_observed();
                eligible
                    .iter()
                    .map(|&i| {
                        let (mu, sd) = post_at(i);
                        match spec.family {
                            _ if spec.is_width() => (mu + beta * sd) - (mu - beta * sd),
                            AcquisitionFamily::Ucb => mu + beta * sd,
                            AcquisitionFamily::Ei => expected_improvement(mu, sd, best),
                            _ => unreachable!("sampling families handled above"),
                        }
                    })
                    .collect()
            }
            Scope::Intersect => {
                let x = self.scoring_intersection(beta)?;
                let best = self.best_observed();
                eligible
                    .iter()
                    .map(|&i| {
                        let k = x.position(i).expect("eligible index inside region");
                        match spec.family {
                            AcquisitionFamily::Ici | AcquisitionFamily::CiWidth => x.width(k),
                            AcquisitionFamily::Ucb => x.ucb[k],
                            AcquisitionFamily::Ei => {
                                let r = roi_pos(i, &self.roi);
                                let mu = clamp_to(&x, k, self.roi_post.mean[r]);
                                let sd = self.roi_post.std[r].min(self.global_post.std[i]);
                                expected_improvement(mu, sd, best)
                            }
                            _ => unreachable!("families without an intersect scope"),
                        }
                    })
                    .collect()
            }
        };
        Ok(ScoredCandidates {
            indices: eligible,
            scores,
        })
    }

    fn best_observed(&self) -> f64 {
        self.selected.iter().map(|o| o.y).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Picks the next candidate with the configured acquisition, observes it
    /// through `observe`, and refits both models.
    pub fn step<F: FnMut(usize) -> f64>(&mut self, mut observe: F) -> Result<StepOutcome> {
        let iteration = self.t + 1;
        let mut inner = |state: &mut Self| -> Result<StepOutcome> {
            let spec = state.config.acquisition;
            let scored = state.acquisition_scores(&spec)?;
            let index = select_next(&scored.scores, &scored.indices)?;
            let y = observe(index);
            if !y.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite observation at pool index {index}"
                )));
            }
            state.selected.push(Observation { index, y });
            state.taken[index] = true;
            state.t += 1;
            state.prepare()?;
            Ok(StepOutcome {
                index,
                y,
                diagnostics: state.diagnostics()?,
            })
        };
        inner(self).map_err(|e| e.at_iteration(iteration))
    }
}

/// Clamps `v` into the intersected interval at position `k`; an empty
/// intersection collapses to the midpoint of its crossed bounds.
fn clamp_to(x: &IntersectedBounds, k: usize, v: f64) -> f64 {
    if x.empty_mask[k] {
        0.5 * (x.lcb[k] + x.ucb[k])
    } else {
        v.clamp(x.lcb[k], x.ucb[k])
    }
}
