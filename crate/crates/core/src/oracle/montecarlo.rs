use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par;
use crate::seed;
use crate::spectral::{chernoff_trees, ENTROPY_TOL};
use crate::tree::GaussianTree;

/// Smallest accepted trial count per sequence length.
pub const MIN_TRIALS: usize = 10_000;
/// Cells with fewer errors are left out of the slope fit.
pub const MIN_FIT_ERRORS: u64 = 50;
const WILSON_Z: f64 = 1.959964;

/// Error-rate estimate for one sequence length.
#[derive(Debug, Clone, PartialEq)]
pub struct PeCell {
    pub t: usize,
    pub trials: usize,
    pub errors: u64,
    pub pe: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

/// Monte Carlo estimate of the classification error exponent. The true
/// model is drawn uniformly; the classifier picks the maximum likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub t_values: Vec<usize>,
    pub cells: Vec<PeCell>,
    /// Least-squares slope of `-ln Pe` against `T` over cells with at least
    /// [`MIN_FIT_ERRORS`] errors; `None` when no cell qualifies.
    pub slope: Option<f64>,
    /// Smallest pairwise CI among the models.
    pub predicted: f64,
    pub trials: usize,
    pub seed: u64,
    pub models: usize,
}

impl SimulationReport {
    /// Header, one row per `T`, then a `#` summary line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("T,trials,errors,pe,wilson_lo,wilson_hi\n");
        for c in &self.cells {
            writeln!(s, "{},{},{},{},{},{}", c.t, c.trials, c.errors, c.pe, c.wilson_lo, c.wilson_hi).unwrap();
        }
        let slope = self.slope.map_or_else(|| "NA".to_string(), |v| v.to_string());
        writeln!(
            s,
            "# slope={slope},predicted_ci={},models={},seed={},priors=uniform",
            self.predicted, self.models, self.seed
        )
        .unwrap();
        s
    }
}

/// Wilson score interval for `errors` out of `n`.
pub fn wilson_interval(errors: u64, n: usize) -> (f64, f64) {
    let n = n as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Slope of the least-squares line through `(x, y)`.
fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    match points {
        [] => None,
        [(x, y)] => Some(y / x),
        _ => {
            let n = points.len() as f64;
            let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
            let my = points.iter().map(|p| p.1).sum::<f64>() / n;
            let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = points.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
            Some(sxy / sxx)
        }
    }
}

struct Model {
    chol: DMatrix<f64>,
    precision: DMatrix<f64>,
    log_det: f64,
}

/// Index of the most likely model for the scatter matrix `S = Σ x xᵀ` of
/// `t` samples; ties go to the smallest index.
fn classify(models: &[Model], scatter: &DMatrix<f64>, t: usize) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (k, m) in models.iter().enumerate() {
        let quad = m.precision.component_mul(scatter).sum();
        let ll = -0.5 * quad - 0.5 * t as f64 * m.log_det;
        if ll > best.1 {
            best = (k, ll);
        }
    }
    best.0
}

fn run_trial(models: &[Model], n: usize, t: usize, base_seed: u64, trial: usize) -> bool {
    let mut rng = seed::stream(base_seed, &[t as u64, trial as u64]);
    let truth = rng.random_range(0..models.len());
    let l = &models[truth].chol;
    let mut scatter = DMatrix::<f64>::zeros(n, n);
    let mut z = DVector::<f64>::zeros(n);
    for _ in 0..t {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let x = l * &z;
        scatter.ger(1.0, &x, &x, 1.0);
    }
    classify(models, &scatter, t) != truth
}

/// Estimates `Pe(T)` for each `T` and fits the decay rate. Each trial draws
/// from its own seeded stream, so the report does not depend on the number
/// of worker threads.
pub fn mc_error_exponent(
    trees: &[GaussianTree],
    t_values: &[usize],
    trials: usize,
    seed: u64,
) -> Result<SimulationReport> {
    if trees.len() < 2 {
        return Err(Error::ParameterRange("need at least two models".into()));
    }
    if trials < MIN_TRIALS {
        return Err(Error::ParameterRange(format!("trials = {trials} < {MIN_TRIALS}")));
    }
    if t_values.is_empty() || t_values.contains(&0) {
        return Err(Error::ParameterRange("sequence lengths must be positive".into()));
    }
    let n = trees[0].node_count();
    for t in trees {
        if t.node_count() != n {
            return Err(Error::DimensionMismatch(n, t.node_count()));
        }
        let ratio = t.log_det() - trees[0].log_det();
        if ratio.abs() > ENTROPY_TOL {
            return Err(Error::EntropyMismatch { log_det_ratio: ratio });
        }
    }
    let mut predicted = f64::INFINITY;
    for i in 0..trees.len() {
        for j in i + 1..trees.len() {
            predicted = predicted.min(chernoff_trees(&trees[i], &trees[j])?.ci);
        }
    }
    let models: Vec<Model> = trees
        .iter()
        .map(|t| {
            let cov = t.covariance();
            Model { chol: cov.cholesky_factor().clone(), precision: t.precision().matrix().clone(), log_det: t.log_det() }
        })
        .collect();
    let cells: Vec<PeCell> = t_values
        .iter()
        .map(|&t| {
            let errors = par::count(trials, |k| run_trial(&models, n, t, seed, k));
            let (wilson_lo, wilson_hi) = wilson_interval(errors, trials);
            PeCell { t, trials, errors, pe: errors as f64 / trials as f64, wilson_lo, wilson_hi }
        })
        .collect();
    let points: Vec<(f64, f64)> = cells
        .iter()
        .filter(|c| c.errors >= MIN_FIT_ERRORS)
        .map(|c| (c.t as f64, -c.pe.ln()))
        .collect();
    Ok(SimulationReport {
        t_values: t_values.to_vec(),
        cells,
        slope: ls_slope(&points),
        predicted,
        trials,
        seed,
        models: trees.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::ThreeNodePair;

    #[test]
    fn wilson_bounds() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
        assert!((0.5 - lo - (hi - 0.5)).abs() < 1e-12);
        assert_eq!(wilson_interval(0, 100).0, 0.0);
        assert!(wilson_interval(0, 100).1 > 0.0);
    }

    #[test]
    fn slope_fit() {
        assert_eq!(ls_slope(&[]), None);
        assert_eq!(ls_slope(&[(10.0, 1.0)]), Some(0.1));
        let s = ls_slope(&[(1.0, 3.0), (2.0, 5.0), (3.0, 7.0)]).unwrap();
        assert!((s - 2.0).abs() < 1e-12);
    }

    #[test]
    fn identical_trees_give_coin_flips() {
        let pair = ThreeNodePair::new(0.5, 0.6).unwrap();
        let t = pair.first_tree();
        let r = mc_error_exponent(&[t.clone(), t], &[5, 10], MIN_TRIALS, 3).unwrap();
        for c in &r.cells {
            assert!((c.pe - 0.5).abs() < 0.03, "{c:?}");
        }
        assert!(r.slope.unwrap().abs() < 0.01);
        assert_eq!(r.predicted, 0.0);
    }

    #[test]
    fn deterministic_csv() {
        let pair = ThreeNodePair::new(0.5, 0.6).unwrap();
        let trees = [pair.first_tree(), pair.second_tree()];
        let a = mc_error_exponent(&trees, &[10, 20], MIN_TRIALS, 42).unwrap();
        let b = par::with_threads(1, || mc_error_exponent(&trees, &[10, 20], MIN_TRIALS, 42).unwrap());
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with("T,trials,errors,pe,wilson_lo,wilson_hi\n10,10000,"));
        assert!(a.cells[0].pe > a.cells[1].pe);
    }

    #[test]
    fn preconditions() {
        let pair = ThreeNodePair::new(0.5, 0.6).unwrap();
        let t = pair.first_tree();
        assert!(mc_error_exponent(std::slice::from_ref(&t), &[5], MIN_TRIALS, 1).is_err());
        assert!(mc_error_exponent(&[t.clone(), t.clone()], &[5], 100, 1).is_err());
        let other = GaussianTree::from_triples(3, &[(1, 2, 0.1), (2, 3, 0.6)]).unwrap();
        assert!(matches!(
            mc_error_exponent(&[t, other], &[5], MIN_TRIALS, 1),
            Err(Error::EntropyMismatch { .. })
        ));
    }
}
