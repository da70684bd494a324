//! Tree operations that preserve or order Chernoff information.
//!
//! * adding / division append a shared leaf or split a shared edge; applied to
//!   both trees of a pair they leave CI unchanged.
//! * cutting / merging are their inverses.
//! * grafting cuts edge `(i, p)` and re-attaches `i` to `q` with the same
//!   weight, the smallest topological change between equal-entropy trees.
//!
//! Removing a node renumbers the survivors contiguously; every operation that
//! removes nodes also returns the map from new ids to original ids.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::par;
use crate::spectral::{chernoff_trees, ChernoffReport};
use crate::tree::{self, weight_in_range, Edge, GaussianTree};

/// Weights closer than this are treated as identical when matching shared
/// structure.
pub const WEIGHT_MATCH_TOL: f64 = 1e-12;

/// Move node `cut_child` from `old_parent` to `new_parent`, keeping the
/// weight of the moved edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GraftingOp {
    pub cut_child: usize,
    pub old_parent: usize,
    pub new_parent: usize,
}

impl GraftingOp {
    pub fn new(cut_child: usize, old_parent: usize, new_parent: usize) -> Self {
        Self { cut_child, old_parent, new_parent }
    }

    /// The graft that undoes this one.
    pub fn inverse(&self) -> Self {
        Self::new(self.cut_child, self.new_parent, self.old_parent)
    }

    pub fn anchors(&self) -> [usize; 3] {
        [self.cut_child, self.old_parent, self.new_parent]
    }
}

/// Appends node `n + 1` as a leaf of `attach` with weight `w`.
pub fn apply_add_leaf(t: &GaussianTree, attach: usize, w: f64) -> Result<GaussianTree> {
    if !t.contains(attach) {
        return Err(Error::NodeNotFound(attach));
    }
    let n = t.node_count() + 1;
    if !weight_in_range(w) {
        return Err(Error::WeightRange { i: attach, j: n, w });
    }
    let mut edges = t.edges().to_vec();
    edges.push(Edge::new(attach, n, w));
    GaussianTree::new(n, edges)
}

/// Splits edge `(p, q)` of weight `w` by inserting node `n + 1` with weight
/// `w1` towards `p` and `w / w1` towards `q`.
pub fn apply_division(t: &GaussianTree, p: usize, q: usize, w1: f64) -> Result<GaussianTree> {
    let idx = t.edge_index(p, q).ok_or(Error::EdgeNotFound(p, q))?;
    let w = t.edges()[idx].w;
    let w2 = w / w1;
    if !weight_in_range(w1) || !weight_in_range(w2) {
        return Err(Error::SplitInfeasible { w, w1, w2 });
    }
    let n = t.node_count() + 1;
    let mut edges = t.edges().to_vec();
    edges[idx] = Edge::new(p, n, w1);
    edges.push(Edge::new(n, q, w2));
    GaussianTree::new(n, edges)
}

/// Drops node `v` and the listed edges touching it, renumbering ids above
/// `v` down by one. Returns the new tree and `kept[new - 1] = old`.
fn remove_node(t: &GaussianTree, v: usize, extra: Option<Edge>) -> Result<(GaussianTree, Vec<usize>)> {
    let n = t.node_count();
    if n <= 2 {
        return Err(Error::ParameterRange(format!(
            "removing node {v} from a {n}-node tree leaves fewer than 2 nodes"
        )));
    }
    let renum = |x: usize| if x > v { x - 1 } else { x };
    let mut edges: Vec<Edge> = Vec::with_capacity(n - 2);
    let mut placed = false;
    for e in t.edges() {
        if e.touches(v) {
            // The first removed edge's slot receives the merged edge.
            if let (Some(m), false) = (extra, placed) {
                edges.push(Edge::new(renum(m.a), renum(m.b), m.w));
                placed = true;
            }
            continue;
        }
        edges.push(Edge::new(renum(e.a), renum(e.b), e.w));
    }
    let kept = (1..=n).filter(|&x| x != v).collect();
    Ok((GaussianTree::new(n - 1, edges)?, kept))
}

/// Removes a degree-one node.
pub fn apply_cut_leaf(t: &GaussianTree, leaf: usize) -> Result<(GaussianTree, Vec<usize>)> {
    if !t.contains(leaf) {
        return Err(Error::NodeNotFound(leaf));
    }
    if t.degree(leaf) != 1 {
        return Err(Error::NotALeaf(leaf));
    }
    remove_node(t, leaf, None)
}

/// Replaces the 2-path `p - mid - q` by the single edge `(p, q, w1 w2)`.
pub fn apply_merge_path(t: &GaussianTree, mid: usize) -> Result<(GaussianTree, Vec<usize>)> {
    if !t.contains(mid) {
        return Err(Error::NodeNotFound(mid));
    }
    let nb = t.neighbors(mid);
    if nb.len() != 2 {
        return Err(Error::NotDegreeTwo(mid));
    }
    let (p, w1) = nb[0];
    let (q, w2) = nb[1];
    let w = w1 * w2;
    if !weight_in_range(w) {
        return Err(Error::WeightRange { i: p, j: q, w });
    }
    remove_node(t, mid, Some(Edge::new(p, q, w)))
}

/// Applies a graft; the moved edge keeps its weight and its slot in the edge
/// list, so the log-determinant is reproduced bit for bit.
pub fn apply_graft(t: &GaussianTree, op: GraftingOp) -> Result<GaussianTree> {
    graft_step(t, op).map(|(tree, _)| tree)
}

/// Bookkeeping for one applied graft.
#[derive(Debug, Clone, PartialEq)]
pub struct GraftStep {
    pub op: GraftingOp,
    /// Weight of the moved edge.
    pub weight: f64,
    /// Path `old_parent -> new_parent` in the tree before the graft.
    pub backbone: Vec<usize>,
    /// Nodes on the `cut_child` side of the removed edge (sorted).
    pub child_side: Vec<usize>,
    /// Nodes on the `old_parent` side of the removed edge (sorted).
    pub parent_side: Vec<usize>,
}

impl GraftStep {
    /// Backbone nodes plus the moved node.
    pub fn region(&self) -> HashSet<usize> {
        let mut r: HashSet<usize> = self.backbone.iter().copied().collect();
        r.insert(self.op.cut_child);
        r
    }

    pub fn backbone_edges(&self) -> HashSet<(usize, usize)> {
        self.backbone.windows(2).map(|w| edge_key(w[0], w[1])).collect()
    }

    pub fn removed_edge(&self) -> (usize, usize) {
        edge_key(self.op.cut_child, self.op.old_parent)
    }

    pub fn created_edge(&self) -> (usize, usize) {
        edge_key(self.op.cut_child, self.op.new_parent)
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn graft_step(t: &GaussianTree, op: GraftingOp) -> Result<(GaussianTree, GraftStep)> {
    let GraftingOp { cut_child: i, old_parent: p, new_parent: q } = op;
    for v in op.anchors() {
        if !t.contains(v) {
            return Err(Error::NodeNotFound(v));
        }
    }
    let idx = t.edge_index(i, p).ok_or(Error::EdgeNotFound(i, p))?;
    if q == p {
        return Err(Error::NoOp { cut: i, parent: p });
    }
    let child_side = t.side_of(i, p);
    if child_side.binary_search(&q).is_ok() {
        return Err(Error::Cycle { i, j: q });
    }
    let parent_side = t.side_of(p, i);
    let backbone = t.path(p, q)?;
    let w = t.edges()[idx].w;
    let mut edges = t.edges().to_vec();
    edges[idx] = Edge::new(i, q, w);
    let tree = GaussianTree::new(t.node_count(), edges)?;
    Ok((tree, GraftStep { op, weight: w, backbone, child_side, parent_side }))
}

/// Reduced pair from [`simplify_pair`].
#[derive(Debug, Clone, PartialEq)]
pub struct SimplifiedPair {
    pub first: GaussianTree,
    pub second: GaussianTree,
    /// `kept[new - 1]` is the original id of reduced node `new`.
    pub kept: Vec<usize>,
    /// The inputs had the same weighted edge set.
    pub identical: bool,
}

fn same_weight(a: f64, b: f64) -> bool {
    (a - b).abs() <= WEIGHT_MATCH_TOL
}

fn shared_leaf(t1: &GaussianTree, t2: &GaussianTree, v: usize) -> bool {
    match (t1.neighbors(v), t2.neighbors(v)) {
        ([(u1, w1)], [(u2, w2)]) => u1 == u2 && same_weight(*w1, *w2),
        _ => false,
    }
}

fn shared_two_path(t1: &GaussianTree, t2: &GaussianTree, v: usize) -> bool {
    let (a, b) = (t1.neighbors(v), t2.neighbors(v));
    if a.len() != 2 || b.len() != 2 {
        return false;
    }
    a.iter().all(|&(x, wx)| b.iter().any(|&(y, wy)| x == y && same_weight(wx, wy)))
}

/// Repeatedly cuts shared identical leaves and merges shared identical
/// degree-two nodes until neither rule applies. CI of the result equals CI
/// of the input pair.
pub fn simplify_pair(t1: &GaussianTree, t2: &GaussianTree) -> Result<SimplifiedPair> {
    if t1.node_count() != t2.node_count() {
        return Err(Error::DimensionMismatch(t1.node_count(), t2.node_count()));
    }
    let identical = t1.same_structure(t2);
    let mut a = t1.clone();
    let mut b = t2.clone();
    let mut kept: Vec<usize> = (1..=t1.node_count()).collect();
    while a.node_count() > 2 {
        let n = a.node_count();
        let next = (1..=n)
            .find(|&v| shared_leaf(&a, &b, v))
            .map(|v| (v, true))
            .or_else(|| (1..=n).find(|&v| shared_two_path(&a, &b, v)).map(|v| (v, false)));
        let Some((v, is_leaf)) = next else { break };
        let ((na, map), (nb, _)) = if is_leaf {
            (apply_cut_leaf(&a, v)?, apply_cut_leaf(&b, v)?)
        } else {
            (apply_merge_path(&a, v)?, apply_merge_path(&b, v)?)
        };
        kept = map.iter().map(|&old| kept[old - 1]).collect();
        a = na;
        b = nb;
    }
    Ok(SimplifiedPair { first: a, second: b, kept, identical })
}

/// A base tree and a sequence of grafts, with every intermediate tree.
#[derive(Debug, Clone)]
pub struct GraftingChain {
    ops: Vec<GraftingOp>,
    trees: Vec<GaussianTree>,
    steps: Vec<GraftStep>,
}

impl GraftingChain {
    pub fn new(base: GaussianTree, ops: Vec<GraftingOp>) -> Result<Self> {
        let mut trees = vec![base];
        let mut steps = Vec::with_capacity(ops.len());
        for (k, &op) in ops.iter().enumerate() {
            let (next, step) = graft_step(trees.last().expect("non-empty"), op).map_err(|e| {
                Error::InapplicableChain { step: k + 1, reason: Box::new(e) }
            })?;
            trees.push(next);
            steps.push(step);
        }
        Ok(Self { ops, trees, steps })
    }

    pub fn base(&self) -> &GaussianTree {
        &self.trees[0]
    }

    pub fn ops(&self) -> &[GraftingOp] {
        &self.ops
    }

    /// `T_1 ..= T_{n+1}` (index 0 is the base).
    pub fn trees(&self) -> &[GaussianTree] {
        &self.trees
    }

    pub fn steps(&self) -> &[GraftStep] {
        &self.steps
    }

    pub fn op_count(&self) -> usize {
        self.ops.len()
    }

    pub fn is_independent(&self) -> bool {
        steps_independent(&self.steps)
    }
}

/// Sufficient test for independence of the grafts applied from `base`.
///
/// Each graft occupies a region: its backbone `p .. q` plus the moved node
/// `i`. The set is accepted when
/// * no graft's anchors lie in another graft's region,
/// * no graft's backbone uses an edge another graft removes or creates, and
/// * for every graft, one side of its cut edge holds no other graft's region
///   (each graft sits in its own branch off a shared center).
///
/// The test may reject some independent configurations; it never accepts a
/// dependent one.
pub fn are_independent(base: &GaussianTree, ops: &[GraftingOp]) -> Result<bool> {
    Ok(GraftingChain::new(base.clone(), ops.to_vec())?.is_independent())
}

pub(crate) fn steps_independent(steps: &[GraftStep]) -> bool {
    let regions: Vec<HashSet<usize>> = steps.iter().map(GraftStep::region).collect();
    for (a, sa) in steps.iter().enumerate() {
        let bb = sa.backbone_edges();
        let mut others: HashSet<usize> = HashSet::new();
        for (b, sb) in steps.iter().enumerate() {
            if a == b {
                continue;
            }
            if sa.op.anchors().iter().any(|v| regions[b].contains(v)) {
                return false;
            }
            if bb.contains(&sb.removed_edge()) || bb.contains(&sb.created_edge()) {
                return false;
            }
            others.extend(regions[b].iter().copied());
        }
        let child_hit = sa.child_side.iter().any(|v| others.contains(v));
        let parent_hit = sa.parent_side.iter().any(|v| others.contains(v));
        if child_hit && parent_hit {
            return false;
        }
    }
    true
}

/// Pairwise reports `R[i][j]` for `i < j` (0-based tree indices); the
/// diagonal and lower triangle are `None`.
pub fn chain_pairwise_reports(chain: &GraftingChain) -> Result<Vec<Vec<Option<ChernoffReport>>>> {
    let m = chain.trees().len();
    let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let trees = chain.trees();
    let results = par::map_indexed(pairs.len(), |k| {
        let (i, j) = pairs[k];
        chernoff_trees(&trees[i], &trees[j])
    });
    let mut out = vec![vec![None; m]; m];
    for (&(i, j), r) in pairs.iter().zip(results) {
        out[i][j] = Some(r?);
    }
    Ok(out)
}

/// Symmetric matrix of `CI(T_i || T_j)` with zero diagonal.
pub fn chain_pairwise_ci(chain: &GraftingChain) -> Result<Vec<Vec<f64>>> {
    let reports = chain_pairwise_reports(chain)?;
    let m = reports.len();
    let mut ci = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let v = reports[i][j].as_ref().expect("upper triangle filled").ci;
            ci[i][j] = v;
            ci[j][i] = v;
        }
    }
    Ok(ci)
}

/// How [`chain_min_ci`] searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMethod {
    /// Only `(T_k, T_{k+1})`; valid for independent chains.
    AdjacentOnly,
    Exhaustive,
}

impl ScanMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            ScanMethod::AdjacentOnly => "adjacent-only",
            ScanMethod::Exhaustive => "exhaustive",
        }
    }
}

/// Minimum pairwise CI in a chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainMin {
    /// 1-based tree indices `(i, j)`, `i < j`.
    pub pair: (usize, usize),
    pub value: f64,
    pub method: ScanMethod,
}

/// Minimum CI over the chain. Independent chains scan adjacent pairs only
/// unless `force_exhaustive` is set. Ties go to the lexicographically first
/// pair.
pub fn chain_min_ci(chain: &GraftingChain, force_exhaustive: bool) -> Result<ChainMin> {
    let m = chain.trees().len();
    if m < 2 {
        return Err(Error::ParameterRange("chain has no grafting operations".into()));
    }
    let method = if !force_exhaustive && chain.is_independent() {
        ScanMethod::AdjacentOnly
    } else {
        ScanMethod::Exhaustive
    };
    let pairs: Vec<(usize, usize)> = match method {
        ScanMethod::AdjacentOnly => (0..m - 1).map(|i| (i, i + 1)).collect(),
        ScanMethod::Exhaustive => (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect(),
    };
    let trees = chain.trees();
    let values = par::map_indexed(pairs.len(), |k| {
        let (i, j) = pairs[k];
        chernoff_trees(&trees[i], &trees[j]).map(|r| r.ci)
    });
    let mut best: Option<((usize, usize), f64)> = None;
    for (&pair, v) in pairs.iter().zip(values) {
        let v = v?;
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((pair, v));
        }
    }
    let ((i, j), value) = best.expect("at least one pair");
    Ok(ChainMin { pair: (i + 1, j + 1), value, method })
}

// ---------------------------------------------------------------------------
// chain file format: a gtree block followed by `G <i> <p> <q>` lines.

/// Parses a chain file into its base tree and graft list.
pub fn parse_chain(text: &str) -> Result<(GaussianTree, Vec<GraftingOp>)> {
    let lines = tree::lex(text);
    let (n, edges, used) = tree::parse_tree_block(&lines)?;
    let base = GaussianTree::new(n, edges)?;
    let mut ops = Vec::new();
    for line in &lines[used..] {
        let (col, tok) = line.tokens[0];
        if tok != "G" {
            return Err(tree::syntax(line.number, col, format!("expected `G <i> <p> <q>`, found `{tok}`")));
        }
        if line.tokens.len() != 4 {
            return Err(tree::syntax(line.number, col, "`G` takes exactly three fields"));
        }
        ops.push(GraftingOp::new(
            tree::parse_field(line, 1, "node id")?,
            tree::parse_field(line, 2, "node id")?,
            tree::parse_field(line, 3, "node id")?,
        ));
    }
    Ok((base, ops))
}

pub fn write_chain(base: &GaussianTree, ops: &[GraftingOp]) -> String {
    let mut out = tree::write_gtree(base);
    for op in ops {
        writeln!(out, "G {} {} {}", op.cut_child, op.old_parent, op.new_parent).unwrap();
    }
    out
}
