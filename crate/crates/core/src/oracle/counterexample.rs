use std::fmt::Write as _;

use super::sampling::random_graft;
use crate::graph_ops::{apply_graft, GraftStep, GraftingChain};
use crate::par;
use crate::seed;
use crate::spectral::chernoff_trees;
use crate::tree::random_tree_with;

const BASE_NODES: usize = 7;
const W_MIN: f64 = 0.1;
const W_MAX: f64 = 0.95;
/// Eigenvalues within this distance of one count as unit eigenvalues.
pub const UNIT_TOL: f64 = 1e-6;

/// A two-graft chain whose outer pair has lower CI than its first step.
#[derive(Debug, Clone)]
pub struct Counterexample {
    /// 0-based attempt index that produced the instance.
    pub attempt: usize,
    pub chain: GraftingChain,
    pub lambda_star_13: f64,
    /// Ascending generalized eigenvalues of `(T1, T3)`.
    pub eigenvalues_13: Vec<f64>,
    pub ci_12: f64,
    pub ci_13: f64,
    pub ci_23: f64,
}

impl Counterexample {
    pub fn unit_count(&self) -> usize {
        self.eigenvalues_13.iter().filter(|v| (*v - 1.0).abs() <= UNIT_TOL).count()
    }

    pub fn ci_23_is_minimal(&self) -> bool {
        self.ci_23 < self.ci_12 && self.ci_23 < self.ci_13
    }

    /// One header and one data row: `λ*`, the eigenvalues, then the three CIs.
    pub fn to_table(&self, precision: usize) -> String {
        let p = precision;
        let eigs: Vec<String> = self.eigenvalues_13.iter().map(|v| format!("{v:.p$}")).collect();
        let mut s = String::from("lambda_star\teigenvalues\tci_13\tci_12\tci_23\n");
        writeln!(
            s,
            "{:.p$}\t{}\t{:.p$}\t{:.p$}\t{:.p$}",
            self.lambda_star_13,
            eigs.join(", "),
            self.ci_13,
            self.ci_12,
            self.ci_23
        )
        .unwrap();
        s
    }
}

/// Extra conditions a hit must meet beyond `CI(T1,T3) < CI(T1,T2)`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CounterexampleFilter {
    pub unit_eigenvalues: Option<usize>,
    /// Open interval for `λ*(T1, T3)`.
    pub lambda_star_range: Option<(f64, f64)>,
    pub require_ci_23_minimal: bool,
}

impl CounterexampleFilter {
    /// Four unit eigenvalues, `λ* ∈ (0.5, 0.55)`, `CI(T2,T3)` strictly minimal.
    pub fn table_pattern() -> Self {
        Self { unit_eigenvalues: Some(4), lambda_star_range: Some((0.5, 0.55)), require_ci_23_minimal: true }
    }

    pub fn accepts(&self, c: &Counterexample) -> bool {
        self.unit_eigenvalues.is_none_or(|u| c.unit_count() == u)
            && self.lambda_star_range.is_none_or(|(lo, hi)| c.lambda_star_13 > lo && c.lambda_star_13 < hi)
            && (!self.require_ci_23_minimal || c.ci_23_is_minimal())
    }
}

/// The second graft interacts with the first: one backbone carries an edge
/// the other graft removes or creates. Chains where the second graft simply
/// undoes or re-cuts the first are excluded.
fn is_dependent(a: &GraftStep, b: &GraftStep) -> bool {
    if a.removed_edge() == b.removed_edge() || a.created_edge() == b.removed_edge() {
        return false;
    }
    let (ea, eb) = (a.backbone_edges(), b.backbone_edges());
    ea.contains(&b.created_edge()) || ea.contains(&b.removed_edge()) || eb.contains(&a.created_edge())
}

fn attempt(seed: u64, index: usize, filter: &CounterexampleFilter) -> Option<Counterexample> {
    let mut rng = seed::stream(seed, &[index as u64]);
    let base = random_tree_with(&mut rng, BASE_NODES, W_MIN, W_MAX).ok()?;
    let op1 = random_graft(&mut rng, &base);
    let mid = apply_graft(&base, op1).ok()?;
    let op2 = random_graft(&mut rng, &mid);
    let chain = GraftingChain::new(base, vec![op1, op2]).ok()?;
    let steps = chain.steps();
    if !is_dependent(&steps[0], &steps[1]) {
        return None;
    }
    let t = chain.trees();
    let r13 = chernoff_trees(&t[0], &t[2]).ok()?;
    let ci_12 = chernoff_trees(&t[0], &t[1]).ok()?.ci;
    if r13.ci >= ci_12 {
        return None;
    }
    let ci_23 = chernoff_trees(&t[1], &t[2]).ok()?.ci;
    let found = Counterexample {
        attempt: index,
        lambda_star_13: r13.lambda_star,
        eigenvalues_13: r13.spectrum.values.clone(),
        ci_12,
        ci_13: r13.ci,
        ci_23,
        chain,
    };
    filter.accepts(&found).then_some(found)
}

/// Samples dependent two-graft chains on random 7-node trees (`|w|` uniform
/// in `[0.1, 0.95]`, random signs) and returns the lowest-index attempt with
/// `CI(T1,T3) < CI(T1,T2)` that also passes `filter`.
pub fn search_dependent_counterexample(
    seed: u64,
    attempts: usize,
    filter: &CounterexampleFilter,
) -> Option<Counterexample> {
    par::find_first(attempts, |i| attempt(seed, i, filter))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_is_deterministic() {
        let f = CounterexampleFilter::default();
        let a = search_dependent_counterexample(3, 5000, &f).expect("hit");
        let b = par::with_threads(1, || search_dependent_counterexample(3, 5000, &f)).expect("hit");
        assert_eq!(a.attempt, b.attempt);
        assert_eq!(a.to_table(12), b.to_table(12));
        assert!(a.ci_13 < a.ci_12);
        assert_eq!(a.eigenvalues_13.len(), 7);
        assert!(a.to_table(4).starts_with("lambda_star\teigenvalues\tci_13\tci_12\tci_23\n"));
    }
}
