use crate::dimred::golden_max;
use crate::error::{Error, Result};
use crate::spd::SpdMatrix;
use crate::spectral::{kl, sigma_lambda};

/// Smallest admissible scan grid.
pub const MIN_GRID: usize = 64;
const REFINE_ITERS: usize = 80;

fn objective(s1: &SpdMatrix, s2: &SpdMatrix, lam: f64) -> Result<f64> {
    let mixed = sigma_lambda(s1, s2, lam)?;
    Ok(kl(&mixed, s1)?.min(kl(&mixed, s2)?))
}

/// `max_λ min(D(Σ_λ || Σ1), D(Σ_λ || Σ2))` by a `grid`-cell scan on
/// `[0, 1]`, refined by golden-section search over the two cells around the
/// best grid point. Returns `(ci, λ)`; works for unequal determinants.
pub fn ci_maxmin_scan(s1: &SpdMatrix, s2: &SpdMatrix, grid: usize) -> Result<(f64, f64)> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(s1.dim(), s2.dim()));
    }
    if grid < MIN_GRID {
        return Err(Error::ParameterRange(format!("scan grid {grid} < {MIN_GRID}")));
    }
    let step = 1.0 / grid as f64;
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..=grid {
        let v = objective(s1, s2, i as f64 * step)?;
        if v > best.1 {
            best = (i, v);
        }
    }
    let lo = best.0.saturating_sub(1) as f64 * step;
    let hi = (best.0 + 1).min(grid) as f64 * step;
    // The objective is finite on [0, 1]; errors cannot occur past the scan.
    let f = |l: f64| objective(s1, s2, l).unwrap_or(f64::NEG_INFINITY);
    let lam = golden_max(&f, lo, hi, REFINE_ITERS);
    let v = f(lam);
    if v >= best.1 {
        Ok((v, lam))
    } else {
        Ok((best.1, best.0 as f64 * step))
    }
}
