use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::maxmin::{ci_maxmin_scan, MIN_GRID};
use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::spd::SpdMatrix;

/// Smallest accepted ratio of extreme singular values for a random draw.
const RANK_TOL: f64 = 1e-8;
const MAX_REDRAWS: u64 = 64;

/// Best CI found among random projections.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionBaseline {
    pub best_ci: f64,
    /// Index of the winning draw (0-based).
    pub best_index: usize,
    /// CI of every draw, in draw order.
    pub scores: Vec<f64>,
}

fn full_rank(a: &DMatrix<f64>) -> bool {
    let sv = a.singular_values();
    let max = sv.max();
    let min = sv.min();
    max > 0.0 && min / max > RANK_TOL
}

fn draw(n_o: usize, n: usize, base_seed: u64, index: usize) -> Result<DMatrix<f64>> {
    for attempt in 0..MAX_REDRAWS {
        let mut rng = seed::stream(base_seed, &[index as u64, attempt]);
        let a = DMatrix::from_fn(n_o, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        if full_rank(&a) {
            return Ok(a);
        }
    }
    Err(Error::Invariant(format!("no full-rank draw for projection {index}")))
}

/// Scores `count` seeded Gaussian `N_O x N` projections with the dense
/// max-min scan. When `n_o == N` the first draw is replaced by the identity.
pub fn random_projection_baseline(
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    n_o: usize,
    count: usize,
    seed: u64,
) -> Result<ProjectionBaseline> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::DimensionMismatch(n, s2.dim()));
    }
    if n_o == 0 || n_o > n {
        return Err(Error::ParameterRange(format!("reduced dimension {n_o} outside 1..={n}")));
    }
    if count == 0 {
        return Err(Error::ParameterRange("projection count must be positive".into()));
    }
    let results = par::map_indexed(count, |i| -> Result<f64> {
        let a = if i == 0 && n_o == n { DMatrix::identity(n, n) } else { draw(n_o, n, seed, i)? };
        let p1 = s1.congruence(&a)?;
        let p2 = s2.congruence(&a)?;
        Ok(ci_maxmin_scan(&p1, &p2, MIN_GRID)?.0)
    });
    let scores = results.into_iter().collect::<Result<Vec<f64>>>()?;
    let (best_index, best_ci) = scores
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    Ok(ProjectionBaseline { best_ci, best_index, scores })
}
