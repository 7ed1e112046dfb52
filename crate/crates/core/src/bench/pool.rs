use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::objectives::{hdbo_eval, toy1d_eval, HDBO_DIM};
use crate::{Error, PoolCsvError, Result};

/// A finite set of admissible query points, optionally with precomputed labels.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    pub name: String,
    /// One candidate per row.
    pub features: DMatrix<f64>,
    pub labels: Option<DVector<f64>>,
    /// Largest label, when labels are present.
    pub f_star: Option<f64>,
}

impl CandidatePool {
    pub fn new(name: impl Into<String>, features: DMatrix<f64>, labels: Option<DVector<f64>>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "candidate pool needs N >= 1 and d >= 1, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if let Some(l) = &labels {
            if l.len() != features.nrows() {
                return Err(Error::DimensionMismatch {
                    expected: features.nrows(),
                    got: l.len(),
                });
            }
        }
        let f_star = labels.as_ref().map(|l| l.max());
        Ok(CandidatePool {
            name: name.into(),
            features,
            labels,
            f_star,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveKind {
    Toy1D,
    HdboSum { dim: usize },
    Tabular { path: std::path::PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub kind: ObjectiveKind,
    /// Standard deviation of Gaussian noise added to each observation.
    pub noise_std: f64,
}

impl ObjectiveSpec {
    pub fn name(&self) -> String {
        match &self.kind {
            ObjectiveKind::Toy1D => "toy1d".into(),
            ObjectiveKind::HdboSum { dim } => format!("hdbo{dim}"),
            ObjectiveKind::Tabular { path } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "tabular".into()),
        }
    }
}

/// Builds the candidate pool for an objective. The 1-D toy pool is an even
/// grid over `[-1, 1]`; the additive pool draws i.i.d. standard-normal
/// vectors; tabular pools are read from CSV and ignore `pool_size`.
pub fn generate_pool<R: Rng + ?Sized>(
    objective: &ObjectiveSpec,
    pool_size: usize,
    rng: &mut R,
) -> Result<CandidatePool> {
    if !(objective.noise_std >= 0.0 && objective.noise_std.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "noise_std must be >= 0, got {}",
            objective.noise_std
        )));
    }
    let check_size = || {
        if pool_size == 0 {
            Err(Error::InsufficientPool {
                required: 1,
                available: 0,
            })
        } else {
            Ok(())
        }
    };
    match &objective.kind {
        ObjectiveKind::Toy1D => {
            check_size()?;
            let xs: Vec<f64> = if pool_size == 1 {
                vec![0.0]
            } else {
                (0..pool_size)
                    .map(|i| (-1.0 + 2.0 * i as f64 / (pool_size - 1) as f64).clamp(-1.0, 1.0))
                    .collect()
            };
            let labels = xs.iter().map(|&x| toy1d_eval(x)).collect::<Result<Vec<_>>>()?;
            CandidatePool::new(
                objective.name(),
                DMatrix::from_column_slice(pool_size, 1, &xs),
                Some(DVector::from_vec(labels)),
            )
        }
        ObjectiveKind::HdboSum { dim } => {
            check_size()?;
            if *dim != HDBO_DIM {
                return Err(Error::DimensionMismatch {
                    expected: HDBO_DIM,
                    got: *dim,
                });
            }
            // Draw row by row so the pool prefix is stable across pool sizes.
            let mut data = Vec::with_capacity(pool_size * dim);
            for _ in 0..pool_size {
                data.extend((0..*dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
            }
            let features = DMatrix::from_row_slice(pool_size, *dim, &data);
            let labels = features
                .row_iter()
                .map(|r| hdbo_eval(&r.iter().copied().collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            CandidatePool::new(objective.name(), features, Some(DVector::from_vec(labels)))
        }
        ObjectiveKind::Tabular { path } => load_pool_csv(path),
    }
}

/// Reads a candidate pool: one header row, numeric body, last column is the label.
pub fn load_pool_csv(path: impl AsRef<Path>) -> Result<CandidatePool> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| PoolCsvError::Io {
        path: shown.clone(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let malformed = |e: csv::Error| PoolCsvError::Malformed {
        path: shown.clone(),
        message: e.to_string(),
    };
    let columns = reader.headers().map_err(malformed)?.len();
    if columns == 0 {
        return Err(PoolCsvError::Empty { path: shown }.into());
    }
    if columns < 2 {
        return Err(PoolCsvError::TooFewColumns { path: shown, columns }.into());
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(malformed)?;
        let row = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != columns {
            return Err(PoolCsvError::Ragged {
                path: shown,
                row,
                expected: columns,
                found: record.len(),
            }
            .into());
        }
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| PoolCsvError::NonNumeric {
                path: shown.clone(),
                row,
                column: c + 1,
                value: cell.to_string(),
            })?;
            if c + 1 == columns {
                labels.push(v);
            } else {
                features.push(v);
            }
        }
    }
    if labels.is_empty() {
        return Err(PoolCsvError::Empty { path: shown }.into());
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tabular".into());
    let n = labels.len();
    CandidatePool::new(
        name,
        DMatrix::from_row_slice(n, columns - 1, &features),
        Some(DVector::from_vec(labels)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::io::Write;

    fn toy(noise: f64) -> ObjectiveSpec {
        ObjectiveSpec {
            kind: ObjectiveKind::Toy1D,
            noise_std: noise,
        }
    }

    #[test]
    fn toy_grid_endpoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = generate_pool(&toy(0.0), 3, &mut rng).unwrap();
        assert_eq!(p.features.as_slice(), &[-1.0, 0.0, 1.0]);
        let labels = p.labels.as_ref().unwrap();
        assert!((p.f_star.unwrap() - labels.max()).abs() == 0.0);
        assert!(generate_pool(&toy(0.0), 0, &mut rng).is_err());
        assert!(generate_pool(&toy(-1.0), 3, &mut rng).is_err());
    }

    #[test]
    fn hdbo_pool_is_standard_normal_and_seeded() {
        let spec = ObjectiveSpec {
            kind: ObjectiveKind::HdboSum { dim: HDBO_DIM },
            noise_std: 0.0,
        };
        let a = generate_pool(&spec, 1000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        let b = generate_pool(&spec, 1000, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
        assert_eq!(a, b);
        let bound = 3.0 / 1000f64.sqrt();
        for c in 0..HDBO_DIM {
            let m = a.features.column(c).mean();
            assert!(m.abs() < bound + 0.02, "column {c} mean {m}");
        }
        // Over 200 columns, roughly 0.3% exceed 3 sigma; allow a few.
        let outside = (0..HDBO_DIM)
            .filter(|&c| a.features.column(c).mean().abs() >= bound)
            .count();
        assert!(outside <= 4, "{outside} columns outside 3 SE");
        let wrong = ObjectiveSpec {
            kind: ObjectiveKind::HdboSum { dim: 3 },
            noise_std: 0.0,
        };
        assert!(generate_pool(&wrong, 10, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn csv_small_file() {
        let f = write("x1,x2,y\n0,0,1\n1,1,2\n");
        let p = load_pool_csv(f.path()).unwrap();
        assert_eq!((p.len(), p.dim(), p.f_star), (2, 2, Some(2.0)));
        assert_eq!(p.features.row(1).iter().copied().collect::<Vec<_>>(), vec![1.0, 1.0]);
    }

    #[test]
    fn csv_errors_name_location() {
        let f = write("x1,x2,y\n");
        assert!(matches!(
            load_pool_csv(f.path()),
            Err(Error::PoolCsv(PoolCsvError::Empty { .. }))
        ));

        let f = write("x1,x2,y\n0,0,1\nabc,1,2\n");
        match load_pool_csv(f.path()) {
            Err(Error::PoolCsv(PoolCsvError::NonNumeric { row, column, .. })) => assert_eq!((row, column), (3, 1)),
            other => panic!("unexpected {other:?}"),
        }

        let f = write("x1,x2,y\n0,0,1\n1,2\n");
        match load_pool_csv(f.path()) {
            Err(Error::PoolCsv(e @ PoolCsvError::Ragged { row: 3, .. })) => assert!(e.to_string().contains("row 3")),
            other => panic!("unexpected {other:?}"),
        }

        let f = write("");
        assert!(matches!(
            load_pool_csv(f.path()),
            Err(Error::PoolCsv(PoolCsvError::Empty { .. }))
        ));

        let f = write("y\n1\n");
        assert!(matches!(
            load_pool_csv(f.path()),
            Err(Error::PoolCsv(PoolCsvError::TooFewColumns { .. }))
        ));

        assert!(matches!(
            load_pool_csv("/definitely/not/here.csv"),
            Err(Error::PoolCsv(PoolCsvError::Io { .. }))
        ));
    }
}
