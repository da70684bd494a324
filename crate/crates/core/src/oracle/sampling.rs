//! Random instances for property tests and the oracles.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph_ops::{GraftingChain, GraftingOp};
use crate::tree::{random_tree_with, Edge, GaussianTree};

/// Uniformly random applicable graft on `t`.
pub fn random_graft<R: Rng + ?Sized>(rng: &mut R, t: &GaussianTree) -> GraftingOp {
    let n = t.node_count();
    let mut ops = Vec::new();
    for e in t.edges() {
        for (i, p) in [(e.a, e.b), (e.b, e.a)] {
            let side = t.side_of(i, p);
            for q in 1..=n {
                if q != p && side.binary_search(&q).is_err() {
                    ops.push(GraftingOp::new(i, p, q));
                }
            }
        }
    }
    ops[rng.random_range(0..ops.len())]
}

/// Two random trees on `n` nodes sharing one weight multiset (hence equal
/// determinants) but with independent topologies and weight placement.
pub fn random_equal_entropy_pair<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    wmin: f64,
    wmax: f64,
) -> Result<(GaussianTree, GaussianTree)> {
    let first = random_tree_with(rng, n, wmin, wmax)?;
    let shape = random_tree_with(rng, n, wmin, wmax)?;
    let mut weights: Vec<f64> = first.edges().iter().map(|e| e.w).collect();
    weights.shuffle(rng);
    let edges = shape.edges().iter().zip(weights).map(|(e, w)| Edge::new(e.a, e.b, w)).collect();
    Ok((first, GaussianTree::new(n, edges)?))
}

/// Random chain of `n_ops` grafts that pass the independence test.
///
/// Each graft lives in its own branch hanging off node 1: a backbone of two
/// or three nodes with the moved node attached to one of them. The remaining
/// node budget (up to `max_nodes`) is spent on leaves attached anywhere.
/// Node labels and graft order are shuffled.
pub fn random_independent_chain<R: Rng + ?Sized>(
    rng: &mut R,
    n_ops: usize,
    max_nodes: usize,
    wmin: f64,
    wmax: f64,
) -> Result<GraftingChain> {
    let need = 1 + 3 * n_ops;
    if n_ops == 0 || max_nodes < need {
        return Err(Error::ParameterRange(format!(
            "{n_ops} independent grafts need at least one graft and max_nodes >= {need}, got {max_nodes}"
        )));
    }
    let mut links: Vec<(usize, usize)> = Vec::new();
    let mut ops = Vec::with_capacity(n_ops);
    let mut next = 2;
    let mut spare = rng.random_range(0..=max_nodes - need);
    for _ in 0..n_ops {
        let len = if spare > 0 && rng.random_bool(0.5) {
            spare -= 1;
            3
        } else {
            2
        };
        let backbone: Vec<usize> = (next..next + len).collect();
        next += len;
        links.push((1, backbone[0]));
        for w in backbone.windows(2) {
            links.push((w[0], w[1]));
        }
        let mut pick = backbone.clone();
        pick.shuffle(rng);
        let (p, q) = (pick[0], pick[1]);
        let i = next;
        next += 1;
        links.push((p, i));
        ops.push(GraftingOp::new(i, p, q));
    }
    for _ in 0..spare {
        let at = rng.random_range(1..next);
        links.push((at, next));
        next += 1;
    }
    let n = next - 1;
    let mut label: Vec<usize> = (1..=n).collect();
    label.shuffle(rng);
    let relabel = |v: usize| label[v - 1];
    let edges = links
        .into_iter()
        .map(|(a, b)| {
            let mag = rng.random_range(wmin..=wmax);
            let w = if rng.random_bool(0.5) { mag } else { -mag };
            Edge::new(relabel(a), relabel(b), w)
        })
        .collect();
    let base = GaussianTree::new(n, edges)?;
    let mut ops: Vec<GraftingOp> = ops
        .into_iter()
        .map(|o| GraftingOp::new(relabel(o.cut_child), relabel(o.old_parent), relabel(o.new_parent)))
        .collect();
    ops.shuffle(rng);
    let chain = GraftingChain::new(base, ops)?;
    if !chain.is_independent() {
        return Err(Error::Invariant("sampled chain failed the independence test".into()));
    }
    Ok(chain)
}
