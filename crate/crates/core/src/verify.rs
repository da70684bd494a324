//! A fast self-check: small seeded samples of every core invariant.

use crate::closed_form::{ci_3node, lambda_max_3node, ThreeNodePair};
use crate::dimred::{interlacing_check, optimal_reduction, whitening_transform};
use crate::error::Result;
use crate::graph_ops::{apply_add_leaf, apply_division, simplify_pair};
use crate::oracle::{ci_maxmin_scan, random_equal_entropy_pair, random_independent_chain, MIN_GRID};
use crate::seed;
use crate::spectral::{chernoff, chernoff_trees, gen_eigs, reciprocal_pairing};
use crate::symmetry::{construct_congruence, random_orthogonal, verify_witness};
use crate::tree::marginal_covariance;

/// Outcome of one invariant family.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub pass: bool,
    /// Worst observed deviation or a failure description.
    pub detail: String,
}

const SAMPLES: u64 = 20;
const W_MIN: f64 = 0.1;
const W_MAX: f64 = 0.95;

fn check(name: &'static str, tol: f64, f: impl FnOnce() -> Result<f64>) -> Check {
    match f() {
        Ok(worst) => Check { name, pass: worst <= tol, detail: format!("worst={worst:.3e} tol={tol:.0e}") },
        Err(e) => Check { name, pass: false, detail: e.to_string() },
    }
}

fn closed_form() -> Result<f64> {
    let mut worst: f64 = 0.0;
    for a in 0..10 {
        for b in 0..10 {
            let w1 = -0.9 + 0.2 * a as f64;
            let w2 = -0.9 + 0.2 * b as f64;
            let pair = ThreeNodePair::new(w1, w2)?;
            let r = chernoff(&pair.sigma1, &pair.sigma2)?;
            let lm = lambda_max_3node(w1, w2)?;
            worst = worst.max((r.ci - ci_3node(w1, w2)?).abs());
            worst = worst.max((r.spectrum.values[2] - lm).abs() * 0.1);
        }
    }
    Ok(worst)
}

fn oracle(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..SAMPLES {
        let mut rng = seed::stream(seed, &[1, k]);
        let (a, b) = random_equal_entropy_pair(&mut rng, 2 + (k as usize % 7), W_MIN, W_MAX)?;
        let r = chernoff_trees(&a, &b)?;
        let (scan, _) = ci_maxmin_scan(&a.covariance(), &b.covariance(), MIN_GRID)?;
        worst = worst.max((r.ci - scan).abs());
    }
    Ok(worst)
}

fn shared_operations(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..SAMPLES {
        let mut rng = seed::stream(seed, &[2, k]);
        let (a, b) = random_equal_entropy_pair(&mut rng, 5, W_MIN, W_MAX)?;
        let base = chernoff_trees(&a, &b)?;
        let leaf = chernoff_trees(&apply_add_leaf(&a, 2, 0.5)?, &apply_add_leaf(&b, 2, 0.5)?)?;
        worst = worst.max((leaf.ci - base.ci).abs()).max((leaf.lambda_star - base.lambda_star).abs());
        let simp = simplify_pair(&a, &b)?;
        let reduced = chernoff_trees(&simp.first, &simp.second)?;
        worst = worst.max((reduced.ci - base.ci).abs());
        if let Some(e) = a.edges().iter().find(|e| b.edge_weight(e.a, e.b) == Some(e.w)) {
            let w1 = e.w.signum() * e.w.abs().sqrt();
            let split = chernoff_trees(&apply_division(&a, e.a, e.b, w1)?, &apply_division(&b, e.a, e.b, w1)?)?;
            worst = worst.max((split.ci - base.ci).abs());
        }
    }
    Ok(worst)
}

fn congruence(seed: u64) -> Result<f64> {
    let pair = ThreeNodePair::new(0.5, 0.6)?;
    let mut rng = seed::stream(seed, &[3]);
    let mut worst: f64 = 0.0;
    for _ in 0..SAMPLES {
        let f = random_orthogonal(&mut rng, 3);
        let q = construct_congruence(&pair.sigma1, &pair.sigma2, &f)?;
        worst = worst.max(verify_witness(&q, &pair.sigma1, &pair.sigma2)?.congruence_residual);
    }
    let swap = crate::symmetry::permutation_matrix(&[1, 0, 2]);
    let w = verify_witness(&swap, &pair.sigma1, &pair.sigma2)?;
    let spectrum = gen_eigs(&pair.sigma1, &pair.sigma2)?;
    if !w.accepted || !reciprocal_pairing(&spectrum, 1e-9) {
        return Ok(f64::INFINITY);
    }
    Ok(worst)
}

fn independent_chains(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..SAMPLES {
        let mut rng = seed::stream(seed, &[4, k]);
        let chain = random_independent_chain(&mut rng, 1 + k as usize % 3, 12, W_MIN, W_MAX)?;
        let t = chain.trees();
        let r = chernoff_trees(&t[0], &t[t.len() - 1])?;
        worst = worst.max((r.lambda_star - 0.5).abs()).max(r.trace_residual);
    }
    Ok(worst)
}

fn marginals(seed: u64) -> Result<f64> {
    let mut worst: f64 = f64::NEG_INFINITY;
    for k in 0..SAMPLES {
        let mut rng = seed::stream(seed, &[5, k]);
        let (a, b) = random_equal_entropy_pair(&mut rng, 6, W_MIN, W_MAX)?;
        let full = chernoff_trees(&a, &b)?.ci;
        let keep = [1, 3, 4];
        let (ma, mb) = (marginal_covariance(&a.covariance(), &keep)?, marginal_covariance(&b.covariance(), &keep)?);
        let (part, _) = ci_maxmin_scan(&ma, &mb, MIN_GRID)?;
        worst = worst.max(part - full);
    }
    Ok(worst.max(0.0))
}

fn reduction(seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..SAMPLES {
        let mut rng = seed::stream(seed, &[6, k]);
        let (a, b) = random_equal_entropy_pair(&mut rng, 5, W_MIN, W_MAX)?;
        let (s1, s2) = (a.covariance(), b.covariance());
        let (r2, r1) = whitening_transform(&s1, &s2)?.residuals(&s1, &s2);
        worst = worst.max(r1).max(r2);
        let mut prev = 0.0;
        for n_o in 1..=5 {
            let ci = optimal_reduction(&s1, &s2, n_o)?.reduced_ci;
            worst = worst.max(prev - ci);
            prev = ci;
        }
        for drop in 0..5 {
            if !interlacing_check(&s1, &s2, drop)? {
                return Ok(f64::INFINITY);
            }
        }
    }
    Ok(worst)
}

/// Runs every check with the given seed.
pub fn run_invariant_suite(seed: u64) -> Vec<Check> {
    vec![
        check("closed-form-3node", 1e-9, closed_form),
        check("oracle-equivalence", 1e-6, || oracle(seed)),
        check("shared-operations", 1e-9, || shared_operations(seed)),
        check("congruence", 1e-8, || congruence(seed)),
        check("independent-grafts", 1e-8, || independent_chains(seed)),
        check("marginal-ci", 1e-9, || marginals(seed)),
        check("dimension-reduction", 1e-8, || reduction(seed)),
    ]
}
