//! Exact formulas for the 3-node pair that differs by one graft.
//!
//! `Σ1` is the path `1 - 2 - 3` with weights `(w1, w2)`; `Σ2` is the star
//! centered at 1 with the same weights, obtained by moving node 3 from
//! node 2 to node 1. Any graft pair reduces to this shape on its anchors.

use crate::error::{Error, Result};
use crate::graph_ops::GraftingOp;
use crate::spd::SpdMatrix;
use crate::tree::{Edge, GaussianTree, MAX_WEIGHT};

fn check_weight(name: &str, w: f64) -> Result<()> {
    if !w.is_finite() || w.abs() > MAX_WEIGHT {
        return Err(Error::ParameterRange(format!("{name} = {w} must satisfy |{name}| <= {MAX_WEIGHT}")));
    }
    Ok(())
}

/// `β = w2² + 2 (1 - w2²) / (1 - w1)`.
pub fn beta_of(w1: f64, w2: f64) -> Result<f64> {
    check_weight("w1", w1)?;
    check_weight("w2", w2)?;
    Ok(w2 * w2 + 2.0 * (1.0 - w2 * w2) / (1.0 - w1))
}

/// The non-unit eigenvalue `λ >= 1` of the spectrum `{1/λ, 1, λ}`.
pub fn lambda_max_3node(w1: f64, w2: f64) -> Result<f64> {
    let s = beta_of(w1, w2)?.sqrt();
    let a = w2.abs();
    Ok((s + a) / (s - a))
}

/// `½ ln(1 + ½ · w2² / (1 - w2²) · (1 - w1))`.
pub fn ci_3node(w1: f64, w2: f64) -> Result<f64> {
    check_weight("w1", w1)?;
    check_weight("w2", w2)?;
    let q = w2 * w2;
    Ok(0.5 * (0.5 * q / (1.0 - q) * (1.0 - w1)).ln_1p())
}

/// The same value through the spectrum: `ln(√λ + 1/√λ) - ln 2`.
pub fn ci_3node_from_lambda_max(lambda_max: f64) -> f64 {
    let r = lambda_max.sqrt();
    (r + 1.0 / r).ln() - std::f64::consts::LN_2
}

/// The canonical single-graft 3-node pair.
#[derive(Debug, Clone)]
pub struct ThreeNodePair {
    pub w1: f64,
    pub w2: f64,
    pub sigma1: SpdMatrix,
    pub sigma2: SpdMatrix,
}

impl ThreeNodePair {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        let first = path_tree(w1, w2)?;
        let second = star_tree(w1, w2)?;
        Ok(Self { w1, w2, sigma1: first.covariance(), sigma2: second.covariance() })
    }

    pub fn first_tree(&self) -> GaussianTree {
        path_tree(self.w1, self.w2).expect("weights validated")
    }

    pub fn second_tree(&self) -> GaussianTree {
        star_tree(self.w1, self.w2).expect("weights validated")
    }

    /// The graft taking the first tree to the second.
    pub fn graft() -> GraftingOp {
        GraftingOp::new(3, 2, 1)
    }
}

fn path_tree(w1: f64, w2: f64) -> Result<GaussianTree> {
    centered(2, w1, w2)
}

fn star_tree(w1: f64, w2: f64) -> Result<GaussianTree> {
    centered(1, w1, w2)
}

/// 3-node tree with center `c`; the smaller leaf gets `x`, the larger `y`.
fn centered(c: usize, x: f64, y: f64) -> Result<GaussianTree> {
    let leaves: Vec<usize> = (1..=3).filter(|&v| v != c).collect();
    let edge = |leaf: usize, w: f64| Edge::new(leaf.min(c), leaf.max(c), w);
    GaussianTree::new(3, vec![edge(leaves[0], x), edge(leaves[1], y)])
}

/// All labeled 3-node trees carrying the weights `{w1, w2}`: every choice of
/// center times both weight placements. Entries 0 and 1 are the
/// [`ThreeNodePair`] trees.
pub fn enumerate_3node_patterns(w1: f64, w2: f64) -> Result<Vec<GaussianTree>> {
    let mut out = Vec::with_capacity(6);
    for (x, y) in [(w1, w2), (w2, w1)] {
        for c in [2, 1, 3] {
            out.push(centered(c, x, y)?);
        }
    }
    Ok(out)
}
