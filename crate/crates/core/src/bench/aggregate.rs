use super::trial::{Phase, TrialTrace};
use crate::{Error, Result};

/// Mean and standard error (sample std / sqrt(n)) of one metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub t: usize,
    pub phase: Phase,
    pub n_trials: usize,
    pub simple_regret: MeanSe,
    pub best_y: MeanSe,
    pub roi_ratio: MeanSe,
    pub roi_threshold: MeanSe,
    pub width_global: MeanSe,
    pub width_roi: MeanSe,
    pub width_intersect: MeanSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceSummary {
    pub config_hash: String,
    pub rows: Vec<SummaryRow>,
}

/// Mean and standard error; values are summed in sorted order so the
/// result does not depend on trial order. A single value has SE 0.
pub fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
        };
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return MeanSe { mean, se: 0.0 };
    }
    let mut dev: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    dev.sort_by(f64::total_cmp);
    let var = dev.iter().sum::<f64>() / (n - 1) as f64;
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Per-iteration mean and standard error across trials of one configuration.
pub fn aggregate(traces: &[TrialTrace]) -> Result<TraceSummary> {
    let first = traces
        .first()
        .ok_or_else(|| Error::MismatchedTraces("no traces given".into()))?;
    for tr in traces {
        if tr.config_hash != first.config_hash {
            return Err(Error::MismatchedTraces(format!(
                "config hash {} differs from {}",
                tr.config_hash, first.config_hash
            )));
        }
        if tr.records.len() != first.records.len() {
            return Err(Error::MismatchedTraces(format!(
                "trace for seed {} has {} rows, expected {}",
                tr.seed,
                tr.records.len(),
                first.records.len()
            )));
        }
    }
    let rows = (0..first.records.len())
        .map(|k| {
            let col = |f: fn(&super::trial::TraceRecord) -> f64| {
                mean_se(&traces.iter().map(|tr| f(&tr.records[k])).collect::<Vec<_>>())
            };
            let head = &first.records[k];
            if let Some(bad) = traces
                .iter()
                .find(|tr| tr.records[k].t != head.t || tr.records[k].phase != head.phase)
            {
                return Err(Error::MismatchedTraces(format!(
                    "row {k} of seed {} is misaligned",
                    bad.seed
                )));
            }
            Ok(SummaryRow {
                t: head.t,
                phase: head.phase,
                n_trials: traces.len(),
                simple_regret: col(|r| r.simple_regret),
                best_y: col(|r| r.best_y),
                roi_ratio: col(|r| r.roi_ratio),
                roi_threshold: col(|r| r.roi_threshold),
                width_global: col(|r| r.width_global),
                width_roi: col(|r| r.width_roi),
                width_intersect: col(|r| r.width_intersect),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceSummary {
        config_hash: first.config_hash.clone(),
        rows,
    })
}
