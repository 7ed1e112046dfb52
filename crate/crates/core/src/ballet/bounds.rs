use nalgebra::DMatrix;

use crate::gp::{GpModel, PosteriorSummary};
use crate::{Error, Result};

/// `beta_t = 2 log(2 |D| pi_t / delta)` with `pi_t = pi^2 t^2 / 6`.
pub fn beta_schedule(t: usize, pool_size: usize, delta: f64) -> Result<f64> {
    if t == 0 || pool_size == 0 || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "beta schedule needs t >= 1, |D| >= 1 and 0 < delta < 1 (got t={t}, |D|={pool_size}, delta={delta})"
        )));
    }
    let pi_t = std::f64::consts::PI.powi(2) * (t as f64).powi(2) / 6.0;
    Ok(beta_from_weight(pool_size as f64 * pi_t, delta))
}

fn beta_from_weight(pool_times_pi: f64, delta: f64) -> f64 {
    2.0 * (2.0 * pool_times_pi / delta).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelTag {
    Global,
    Roi,
}

/// Per-candidate confidence bounds of one model. `indices` are pool indices
/// in ascending order; `lcb[k]` and `ucb[k]` belong to `indices[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBounds {
    pub indices: Vec<usize>,
    pub lcb: Vec<f64>,
    pub ucb: Vec<f64>,
    pub beta_sqrt: f64,
    pub tag: ModelTag,
}

impl ConfidenceBounds {
    /// Builds `mean -/+ beta_sqrt * std` from a posterior summary over `indices`.
    pub fn from_summary(indices: &[usize], post: &PosteriorSummary, beta_sqrt: f64, tag: ModelTag) -> Result<Self> {
        if !(beta_sqrt >= 0.0 && beta_sqrt.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "beta_sqrt must be finite and >= 0, got {beta_sqrt}"
            )));
        }
        if post.mean.len() != indices.len() || post.std.len() != indices.len() {
            return Err(Error::DimensionMismatch {
                expected: indices.len(),
                got: post.mean.len(),
            });
        }
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let lcb = post
            .mean
            .iter()
            .zip(&post.std)
            .map(|(m, s)| m - beta_sqrt * s)
            .collect();
        let ucb = post
            .mean
            .iter()
            .zip(&post.std)
            .map(|(m, s)| m + beta_sqrt * s)
            .collect();
        Ok(ConfidenceBounds {
            indices: indices.to_vec(),
            lcb,
            ucb,
            beta_sqrt,
            tag,
        })
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn width(&self, k: usize) -> f64 {
        self.ucb[k] - self.lcb[k]
    }

    /// Position of a pool index inside this bound set.
    pub fn position(&self, pool_index: usize) -> Option<usize> {
        self.indices.binary_search(&pool_index).ok()
    }
}

/// Confidence bounds of `model` at the pool rows `indices` (ascending).
pub fn confidence_bounds(
    model: &GpModel,
    features: &DMatrix<f64>,
    indices: &[usize],
    beta_sqrt: f64,
    tag: ModelTag,
) -> Result<ConfidenceBounds> {
    let rows = features.select_rows(indices.iter());
    let post = model.posterior_mean_var(&rows)?;
    ConfidenceBounds::from_summary(indices, &post, beta_sqrt, tag)
}

/// Superlevel-set region of interest: pool indices whose UCB reaches the
/// largest LCB.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionOfInterest {
    pub indices: Vec<usize>,
    pub threshold: f64,
    pub ratio: f64,
}

impl RegionOfInterest {
    pub fn contains(&self, pool_index: usize) -> bool {
        self.indices.binary_search(&pool_index).is_ok()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Filters the pool with the global model's bounds, which must cover every
/// pool index. The candidate attaining the maximal LCB always passes, so the
/// region is never empty.
pub fn filter_roi(global: &ConfidenceBounds) -> Result<RegionOfInterest> {
    if global.is_empty() {
        return Err(Error::InvalidInput("cannot filter an empty candidate set".into()));
    }
    let threshold = global.lcb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let indices: Vec<usize> = global
        .indices
        .iter()
        .zip(&global.ucb)
        .filter(|(_, &u)| u >= threshold)
        .map(|(&i, _)| i)
        .collect();
    let ratio = indices.len() as f64 / global.len() as f64;
    Ok(RegionOfInterest {
        indices,
        threshold,
        ratio,
    })
}

/// One observed pool candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub index: usize,
    pub y: f64,
}

/// The observations whose candidates lie inside the region, in original order.
pub fn partition_observations(selected: &[Observation], roi: &RegionOfInterest) -> Vec<Observation> {
    selected.iter().filter(|o| roi.contains(o.index)).copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntersectMode {
    /// Global and ROI intervals of the current step only.
    PerStep,
    /// Running intersection over every step so far.
    Historical,
}

/// Intersection of confidence intervals over the region's indices.
///
/// `lcb`/`ucb` hold the raw max-of-LCBs and min-of-UCBs. Where they cross the
/// intersection is empty: `empty_mask` is set and [`width`](Self::width) is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectedBounds {
    pub indices: Vec<usize>,
    pub lcb: Vec<f64>,
    pub ucb: Vec<f64>,
    pub empty_mask: Vec<bool>,
    pub mode: IntersectMode,
}

impl IntersectedBounds {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn width(&self, k: usize) -> f64 {
        if self.empty_mask[k] {
            0.0
        } else {
            self.ucb[k] - self.lcb[k]
        }
    }

    pub fn position(&self, pool_index: usize) -> Option<usize> {
        self.indices.binary_search(&pool_index).ok()
    }
}

/// Per-step intersection of the global and ROI intervals on the region.
pub fn intersect_bounds(
    global: &ConfidenceBounds,
    roi_bounds: &ConfidenceBounds,
    roi: &RegionOfInterest,
) -> Result<IntersectedBounds> {
    let n = roi.len();
    let mut out = IntersectedBounds {
        indices: roi.indices.clone(),
        lcb: Vec::with_capacity(n),
        ucb: Vec::with_capacity(n),
        empty_mask: Vec::with_capacity(n),
        mode: IntersectMode::PerStep,
    };
    for &i in &roi.indices {
        let (g, r) = match (global.position(i), roi_bounds.position(i)) {
            (Some(g), Some(r)) => (g, r),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "pool index {i} missing from the bounds being intersected"
                )))
            }
        };
        let lo = global.lcb[g].max(roi_bounds.lcb[r]);
        let hi = global.ucb[g].min(roi_bounds.ucb[r]);
        out.lcb.push(lo);
        out.ucb.push(hi);
        out.empty_mask.push(hi < lo);
    }
    Ok(out)
}

/// Folds a new per-step intersection into the running one. The result lives
/// on `step`'s indices; indices absent from `prev` start fresh.
pub fn intersect_bounds_historical(prev: &IntersectedBounds, step: &IntersectedBounds) -> IntersectedBounds {
    let mut out = IntersectedBounds {
        indices: step.indices.clone(),
        lcb: step.lcb.clone(),
        ucb: step.ucb.clone(),
        empty_mask: step.empty_mask.clone(),
        mode: IntersectMode::Historical,
    };
    for (k, &i) in step.indices.iter().enumerate() {
        if let Some(p) = prev.position(i) {
            out.lcb[k] = out.lcb[k].max(prev.lcb[p]);
            out.ucb[k] = out.ucb[k].min(prev.ucb[p]);
            out.empty_mask[k] = prev.empty_mask[p] || out.ucb[k] < out.lcb[k];
        }
    }
    out
}

/// Width of the interval for the maximum over a candidate set:
/// `max ucb - max lcb`, clamped at zero.
pub fn max_interval_width(lcb: &[f64], ucb: &[f64]) -> f64 {
    let max_u = ucb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let max_l = lcb.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lcb.is_empty() {
        return 0.0;
    }
    (max_u - max_l).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bounds(indices: Vec<usize>, lcb: Vec<f64>, ucb: Vec<f64>, tag: ModelTag) -> ConfidenceBounds {
        ConfidenceBounds {
            indices,
            lcb,
            ucb,
            beta_sqrt: 1.0,
            tag,
        }
    }

    fn summary(mean: &[f64], std: &[f64]) -> PosteriorSummary {
        PosteriorSummary {
            mean: mean.to_vec(),
            std: std.to_vec(),
        }
    }

    #[test]
    fn beta_first_step() {
        let b = beta_schedule(1, 100, 0.2).unwrap();
        let expected = 2.0 * (2.0 * 100.0 * (std::f64::consts::PI.powi(2) / 6.0) / 0.2).ln();
        assert!((b - expected).abs() < 1e-12);
        assert!((b - 14.811).abs() < 1e-3);
        assert!((b.sqrt() - 3.849).abs() < 1e-3);
    }

    #[test]
    fn beta_doubling_t_adds_2_ln_4() {
        for t in [1, 3, 17] {
            let d = beta_schedule(2 * t, 50, 0.3).unwrap() - beta_schedule(t, 50, 0.3).unwrap();
            assert!((d - 2.0 * 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_vanishes_at_log_one() {
        // |D| * pi_t = 1/2 cannot be hit with integer |D|; check the formula directly.
        assert!(beta_from_weight(0.5, 1.0 - 1e-12).abs() < 1e-10);
        assert!(beta_from_weight(0.5, 0.5) > beta_from_weight(0.5, 0.9));
    }

    #[test]
    fn beta_domain_errors() {
        assert!(beta_schedule(0, 10, 0.2).is_err());
        assert!(beta_schedule(1, 0, 0.2).is_err());
        assert!(beta_schedule(1, 10, 0.0).is_err());
        assert!(beta_schedule(1, 10, 1.0).is_err());
    }

    #[test]
    fn bounds_from_summary() {
        let b = ConfidenceBounds::from_summary(&[0], &summary(&[1.0], &[0.1]), 1.0, ModelTag::Roi).unwrap();
        assert!((b.lcb[0] - 0.9).abs() < 1e-15 && (b.ucb[0] - 1.1).abs() < 1e-15);
        let b =
            ConfidenceBounds::from_summary(&[0, 1], &summary(&[1.0, 2.0], &[0.1, 0.3]), 0.0, ModelTag::Roi).unwrap();
        assert_eq!(b.lcb, b.ucb);
        assert!(ConfidenceBounds::from_summary(&[0], &summary(&[1.0], &[0.1]), -1.0, ModelTag::Roi).is_err());
    }

    #[test]
    fn filter_hand_example() {
        let g =
            ConfidenceBounds::from_summary(&[0, 1], &summary(&[1.0, 0.0], &[0.1, 0.1]), 1.0, ModelTag::Global).unwrap();
        let roi = filter_roi(&g).unwrap();
        assert!((roi.threshold - 0.9).abs() < 1e-15);
        assert_eq!(roi.indices, vec![0]);
        assert_eq!(roi.ratio, 0.5);
    }

    #[test]
    fn filter_vacuous_and_collapsed() {
        let post = summary(&[0.3, 0.1, 0.9, 0.5], &[0.2, 0.2, 0.2, 0.2]);
        let wide = ConfidenceBounds::from_summary(&[0, 1, 2, 3], &post, 100.0, ModelTag::Global).unwrap();
        assert_eq!(filter_roi(&wide).unwrap().indices, vec![0, 1, 2, 3]);
        assert_eq!(filter_roi(&wide).unwrap().ratio, 1.0);
        let tight = ConfidenceBounds::from_summary(&[0, 1, 2, 3], &post, 0.0, ModelTag::Global).unwrap();
        assert_eq!(filter_roi(&tight).unwrap().indices, vec![2]);
    }

    #[test]
    fn partition_keeps_order() {
        let roi = RegionOfInterest {
            indices: vec![7, 9],
            threshold: 0.0,
            ratio: 0.2,
        };
        let s = vec![Observation { index: 3, y: 1.0 }, Observation { index: 7, y: 2.0 }];
        assert_eq!(partition_observations(&s, &roi), vec![Observation { index: 7, y: 2.0 }]);
        let full = RegionOfInterest {
            indices: (0..10).collect(),
            threshold: 0.0,
            ratio: 1.0,
        };
        assert_eq!(partition_observations(&s, &full), s);
        let disjoint = RegionOfInterest {
            indices: vec![0, 1],
            threshold: 0.0,
            ratio: 0.2,
        };
        assert!(partition_observations(&s, &disjoint).is_empty());
    }

    fn roi_of(indices: Vec<usize>) -> RegionOfInterest {
        RegionOfInterest {
            indices,
            threshold: 0.0,
            ratio: 1.0,
        }
    }

    #[test]
    fn intersect_overlapping_and_disjoint() {
        let g = bounds(vec![0, 1], vec![0.0, 0.0], vec![2.0, 1.0], ModelTag::Global);
        let r = bounds(vec![0, 1], vec![1.0, 2.0], vec![3.0, 3.0], ModelTag::Roi);
        let x = intersect_bounds(&g, &r, &roi_of(vec![0, 1])).unwrap();
        assert_eq!((x.lcb[0], x.ucb[0]), (1.0, 2.0));
        assert!(!x.empty_mask[0]);
        assert_eq!(x.width(0), 1.0);
        assert!(x.empty_mask[1]);
        assert_eq!(x.width(1), 0.0);
    }

    #[test]
    fn intersect_idempotent() {
        let g = bounds(
            vec![0, 1, 2],
            vec![0.0, -1.0, 0.5],
            vec![2.0, 1.0, 0.7],
            ModelTag::Global,
        );
        let x = intersect_bounds(&g, &g, &roi_of(vec![0, 2])).unwrap();
        assert_eq!(x.lcb, vec![0.0, 0.5]);
        assert_eq!(x.ucb, vec![2.0, 0.7]);
        let again = intersect_bounds_historical(&x, &x);
        assert_eq!(again.lcb, x.lcb);
        assert_eq!(again.ucb, x.ucb);
    }

    #[test]
    fn intersect_missing_index_is_error() {
        let g = bounds(vec![0, 1], vec![0.0, 0.0], vec![1.0, 1.0], ModelTag::Global);
        let r = bounds(vec![0], vec![0.0], vec![1.0], ModelTag::Roi);
        assert!(intersect_bounds(&g, &r, &roi_of(vec![0, 1])).is_err());
    }

    #[test]
    fn historical_fold_example_and_domain_change() {
        let prev = IntersectedBounds {
            indices: vec![1, 2],
            lcb: vec![0.0, 0.0],
            ucb: vec![3.0, 3.0],
            empty_mask: vec![false, false],
            mode: IntersectMode::Historical,
        };
        let step = IntersectedBounds {
            indices: vec![1, 5],
            lcb: vec![1.0, -1.0],
            ucb: vec![4.0, 9.0],
            empty_mask: vec![false, false],
            mode: IntersectMode::PerStep,
        };
        let h = intersect_bounds_historical(&prev, &step);
        assert_eq!(h.indices, vec![1, 5]);
        assert_eq!((h.lcb[0], h.ucb[0]), (1.0, 3.0));
        assert_eq!((h.lcb[1], h.ucb[1]), (-1.0, 9.0));
        assert_eq!(h.mode, IntersectMode::Historical);
    }

    #[test]
    fn max_width_rules() {
        assert_eq!(max_interval_width(&[1.0, 0.5], &[1.0, 0.5]), 0.0);
        assert_eq!(max_interval_width(&[0.0, 1.0], &[2.0, 1.5]), 1.0);
        // every interval crossed
        assert_eq!(max_interval_width(&[2.0, 3.0], &[1.0, 2.5]), 0.0);
        assert_eq!(max_interval_width(&[], &[]), 0.0);
    }

    proptest! {
        #[test]
        fn roi_nonempty_and_monotone(
            mean in proptest::collection::vec(-5.0f64..5.0, 1..40),
            seed_std in proptest::collection::vec(0.0f64..2.0, 40),
            b1 in 0.0f64..3.0,
            extra in 0.0f64..3.0,
        ) {
            let n = mean.len();
            let idx: Vec<usize> = (0..n).collect();
            let post = summary(&mean, &seed_std[..n]);
            let small = filter_roi(&ConfidenceBounds::from_summary(&idx, &post, b1, ModelTag::Global).unwrap()).unwrap();
            let large = filter_roi(&ConfidenceBounds::from_summary(&idx, &post, b1 + extra, ModelTag::Global).unwrap()).unwrap();
            prop_assert!(!small.is_empty());
            prop_assert!(small.indices.iter().all(|i| large.contains(*i)));
        }

        #[test]
        fn intersection_inside_both(
            a in proptest::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 1..30),
            b in proptest::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 30),
        ) {
            let n = a.len();
            let idx: Vec<usize> = (0..n).collect();
            let g = bounds(idx.clone(), a.iter().map(|p| p.0).collect(), a.iter().map(|p| p.0 + p.1).collect(), ModelTag::Global);
            let r = bounds(idx.clone(), b[..n].iter().map(|p| p.0).collect(), b[..n].iter().map(|p| p.0 + p.1).collect(), ModelTag::Roi);
            let x = intersect_bounds(&g, &r, &roi_of(idx)).unwrap();
            for k in 0..n {
                prop_assert!(x.lcb[k] >= g.lcb[k] && x.lcb[k] >= r.lcb[k]);
                prop_assert!(x.ucb[k] <= g.ucb[k] && x.ucb[k] <= r.ucb[k]);
                prop_assert!(x.width(k) <= g.width(k).min(r.width(k)));
                prop_assert!(x.width(k) >= 0.0);
            }
            prop_assert!(max_interval_width(&x.lcb, &x.ucb) <= max_interval_width(&g.lcb, &g.ucb).min(max_interval_width(&r.lcb, &r.ucb)));
        }
    }
}
