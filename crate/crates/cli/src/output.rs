//! Trace and summary CSV files.

use std::io::Write;
use std::path::Path;

use ballet_core::bench::{MeanSe, Phase, TraceRecord, TraceSummary, TrialTrace};

use crate::CliError;

pub const TRACE_COLUMNS: [&str; 12] = [
    "trial_seed",
    "t",
    "phase",
    "chosen_index",
    "observed_y",
    "best_y",
    "simple_regret",
    "roi_ratio",
    "roi_threshold",
    "width_global",
    "width_roi",
    "width_intersect",
];

const SUMMARY_METRICS: [&str; 7] = [
    "simple_regret",
    "best_y",
    "roi_ratio",
    "roi_threshold",
    "width_global",
    "width_roi",
    "width_intersect",
];

pub fn summary_columns() -> Vec<String> {
    let mut cols = vec!["config_hash".to_string(), "t".into(), "phase".into(), "n_trials".into()];
    for m in SUMMARY_METRICS {
        cols.push(format!("{m}_mean"));
        cols.push(format!("{m}_se"));
    }
    cols
}

// `Display` for f64 is the shortest string that parses back to the same value.
fn num(v: f64) -> String {
    format!("{v}")
}

fn csv_err(path: &Path, e: csv::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn trace_csv(trace: &TrialTrace) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(TRACE_COLUMNS).expect("in-memory write");
    for r in &trace.records {
        w.write_record([
            trace.seed.to_string(),
            r.t.to_string(),
            r.phase.as_str().to_string(),
            r.chosen_index.map(|i| i.to_string()).unwrap_or_default(),
            num(r.observed_y),
            num(r.best_y),
            num(r.simple_regret),
            num(r.roi_ratio),
            num(r.roi_threshold),
            num(r.width_global),
            num(r.width_roi),
            num(r.width_intersect),
        ])
        .expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn summary_csv(summary: &TraceSummary) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(summary_columns()).expect("in-memory write");
    for row in &summary.rows {
        let mut rec = vec![
            summary.config_hash.clone(),
            row.t.to_string(),
            row.phase.as_str().to_string(),
            row.n_trials.to_string(),
        ];
        for m in [
            row.simple_regret,
            row.best_y,
            row.roi_ratio,
            row.roi_threshold,
            row.width_global,
            row.width_roi,
            row.width_intersect,
        ] {
            rec.push(num(m.mean));
            rec.push(num(m.se));
        }
        w.write_record(&rec).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Writes `bytes` to a temp file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

fn parse_phase(s: &str) -> Option<Phase> {
    match s {
        "warmup" => Some(Phase::Warmup),
        "step" => Some(Phase::Step),
        _ => None,
    }
}

/// Reads a trace file back. The file carries neither the config hash nor f*;
/// the caller supplies the hash and `f_star` is NaN.
pub fn read_trace_csv(path: &Path, config_hash: &str) -> Result<TrialTrace, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(TRACE_COLUMNS) {
        return Err(malformed(path, "unexpected header"));
    }
    let mut seed = None;
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let f = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .parse()
                .map_err(|_| malformed(path, &format!("bad number {:?}", &rec[k])))
        };
        let s: u64 = rec[0].parse().map_err(|_| malformed(path, "bad trial_seed"))?;
        if *seed.get_or_insert(s) != s {
            return Err(malformed(path, "mixed trial seeds"));
        }
        records.push(TraceRecord {
            t: rec[1].parse().map_err(|_| malformed(path, "bad t"))?,
            phase: parse_phase(&rec[2]).ok_or_else(|| malformed(path, "bad phase"))?,
            chosen_index: if rec[3].is_empty() {
                None
            } else {
                Some(rec[3].parse().map_err(|_| malformed(path, "bad chosen_index"))?)
            },
            observed_y: f(4)?,
            best_y: f(5)?,
            simple_regret: f(6)?,
            roi_ratio: f(7)?,
            roi_threshold: f(8)?,
            width_global: f(9)?,
            width_roi: f(10)?,
            width_intersect: f(11)?,
        });
    }
    if records.is_empty() {
        return Err(malformed(path, "no rows"));
    }
    Ok(TrialTrace {
        seed: seed.unwrap_or_default(),
        config_hash: config_hash.to_string(),
        f_star: f64::NAN,
        records,
    })
}

/// Reads a summary file back.
pub fn read_summary_csv(path: &Path) -> Result<TraceSummary, CliError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let headers = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if headers.iter().ne(summary_columns().iter().map(String::as_str)) {
        return Err(malformed(path, "unexpected header"));
    }
    let mut hash = String::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let f = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .parse()
                .map_err(|_| malformed(path, &format!("bad number {:?}", &rec[k])))
        };
        let ms = |k: usize| -> Result<MeanSe, CliError> {
            Ok(MeanSe {
                mean: f(k)?,
                se: f(k + 1)?,
            })
        };
        hash = rec[0].to_string();
        rows.push(ballet_core::bench::SummaryRow {
            t: rec[1].parse().map_err(|_| malformed(path, "bad t"))?,
            phase: parse_phase(&rec[2]).ok_or_else(|| malformed(path, "bad phase"))?,
            n_trials: rec[3].parse().map_err(|_| malformed(path, "bad n_trials"))?,
            simple_regret: ms(4)?,
            best_y: ms(6)?,
            roi_ratio: ms(8)?,
            roi_threshold: ms(10)?,
            width_global: ms(12)?,
            width_roi: ms(14)?,
            width_intersect: ms(16)?,
        });
    }
    Ok(TraceSummary {
        config_hash: hash,
        rows,
    })
}

fn malformed(path: &Path, what: &str) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, what.to_string()),
    }
}
