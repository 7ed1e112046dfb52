use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcquisitionFamily {
    /// Width of the intersected global/ROI interval.
    Ici,
    /// Interval width of the ROI model.
    Rci,
    /// Thompson sampling from the ROI model.
    Rts,
    Ucb,
    Ts,
    Ei,
    /// Interval width of the scoped model.
    CiWidth,
}

impl AcquisitionFamily {
    pub const ALL: [AcquisitionFamily; 7] = [
        AcquisitionFamily::Ici,
        AcquisitionFamily::Rci,
        AcquisitionFamily::Rts,
        AcquisitionFamily::Ucb,
        AcquisitionFamily::Ts,
        AcquisitionFamily::Ei,
        AcquisitionFamily::CiWidth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AcquisitionFamily::Ici => "ici",
            AcquisitionFamily::Rci => "rci",
            AcquisitionFamily::Rts => "rts",
            AcquisitionFamily::Ucb => "ucb",
            AcquisitionFamily::Ts => "ts",
            AcquisitionFamily::Ei => "ei",
            AcquisitionFamily::CiWidth => "ciwidth",
        }
    }

    /// Scopes a family may be combined with; the first is its default.
    pub fn allowed_scopes(self) -> &'static [Scope] {
        match self {
            AcquisitionFamily::Ici => &[Scope::Intersect],
            AcquisitionFamily::Rci | AcquisitionFamily::Rts => &[Scope::Roi],
            _ => &[Scope::Global, Scope::Roi, Scope::Intersect],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scope {
    Global,
    Roi,
    Intersect,
}

impl Scope {
    pub fn name(self) -> &'static str {
        match self {
            Scope::Global => "global",
            Scope::Roi => "roi",
            Scope::Intersect => "intersect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionSpec {
    pub family: AcquisitionFamily,
    pub scope: Scope,
    pub beta_sqrt_acq: f64,
}

impl AcquisitionSpec {
    pub fn new(family: AcquisitionFamily, scope: Scope, beta_sqrt_acq: f64) -> Result<Self> {
        if !family.allowed_scopes().contains(&scope) {
            return Err(Error::InvalidInput(format!(
                "acquisition {} cannot use scope {}",
                family.name(),
                scope.name()
            )));
        }
        if !(beta_sqrt_acq >= 0.0 && beta_sqrt_acq.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "beta_sqrt_acq must be >= 0, got {beta_sqrt_acq}"
            )));
        }
        Ok(AcquisitionSpec {
            family,
            scope,
            beta_sqrt_acq,
        })
    }

    /// A family at its default scope.
    pub fn with_default_scope(family: AcquisitionFamily, beta_sqrt_acq: f64) -> Result<Self> {
        AcquisitionSpec::new(family, family.allowed_scopes()[0], beta_sqrt_acq)
    }

    /// Short method label such as `ici` or `ucb-roi`.
    pub fn label(&self) -> String {
        match self.family {
            AcquisitionFamily::Ici | AcquisitionFamily::Rci | AcquisitionFamily::Rts => self.family.name().to_string(),
            _ => format!("{}-{}", self.family.name(), self.scope.name()),
        }
    }

    /// Whether the score is an interval width (so the family ignores model means).
    pub(crate) fn is_width(&self) -> bool {
        matches!(
            self.family,
            AcquisitionFamily::Ici | AcquisitionFamily::Rci | AcquisitionFamily::CiWidth
        )
    }

    pub(crate) fn is_sampling(&self) -> bool {
        matches!(self.family, AcquisitionFamily::Ts | AcquisitionFamily::Rts)
    }
}

/// Parsed method name: `family` or `family-scope`, e.g. `ici`, `ts-roi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MethodName {
    pub family: AcquisitionFamily,
    pub scope: Scope,
}

impl MethodName {
    pub fn into_spec(self, beta_sqrt_acq: f64) -> Result<AcquisitionSpec> {
        AcquisitionSpec::new(self.family, self.scope, beta_sqrt_acq)
    }
}

impl FromStr for MethodName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        let (fam, scope) = match lower.split_once('-') {
            Some((f, sc)) => (f.to_string(), Some(sc.to_string())),
            None => (lower.clone(), None),
        };
        let family = AcquisitionFamily::ALL
            .into_iter()
            .find(|f| f.name() == fam)
            .ok_or_else(|| Error::InvalidInput(format!("unknown acquisition method {s:?}")))?;
        let scope = match scope.as_deref() {
            None => family.allowed_scopes()[0],
            Some("global") => Scope::Global,
            Some("roi") => Scope::Roi,
            Some("intersect") => Scope::Intersect,
            Some(other) => return Err(Error::InvalidInput(format!("unknown scope {other:?} in method {s:?}"))),
        };
        if !family.allowed_scopes().contains(&scope) {
            return Err(Error::InvalidInput(format!(
                "method {s:?}: {} cannot use scope {}",
                family.name(),
                scope.name()
            )));
        }
        Ok(MethodName { family, scope })
    }
}

impl fmt::Display for MethodName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family {
            AcquisitionFamily::Ici | AcquisitionFamily::Rci | AcquisitionFamily::Rts => f.write_str(self.family.name()),
            _ => write!(f, "{}-{}", self.family.name(), self.scope.name()),
        }
    }
}

pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement over `best` for a Gaussian with mean `mu`, std `sigma`.
pub fn expected_improvement(mu: f64, sigma: f64, best: f64) -> f64 {
    if sigma <= 0.0 {
        return (mu - best).max(0.0);
    }
    let z = (mu - best) / sigma;
    ((mu - best) * normal_cdf(z) + sigma * normal_pdf(z)).max(0.0)
}

/// Argmax of `scores`; ties go to the lowest pool index. NaN never wins.
pub fn select_next(scores: &[f64], eligible: &[usize]) -> Result<usize> {
    if scores.len() != eligible.len() {
        return Err(Error::DimensionMismatch {
            expected: eligible.len(),
            got: scores.len(),
        });
    }
    let mut best: Option<(f64, usize)> = None;
    for (&s, &i) in scores.iter().zip(eligible) {
        let s = if s.is_nan() { f64::NEG_INFINITY } else { s };
        best = match best {
            None => Some((s, i)),
            Some((bs, bi)) if s > bs || (s == bs && i < bi) => Some((s, i)),
            keep => keep,
        };
    }
    best.map(|(_, i)| i).ok_or(Error::PoolExhausted)
}
