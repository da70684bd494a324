//! Normalized Gaussian trees: validation, covariance/precision algebra and the
//! line-oriented `gtree` text format.
//!
//! Node ids are 1-based and contiguous. Every variance is 1, so the model is
//! fully described by its edge list: the covariance between two nodes is the
//! product of the weights along the unique path joining them.

use std::collections::{HashSet, VecDeque};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;

/// Largest admissible `|w|`.
pub const MAX_WEIGHT: f64 = 0.999;

/// An undirected weighted edge between 1-based nodes `a` and `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub w: f64,
}

impl Edge {
    pub fn new(a: usize, b: usize, w: f64) -> Self {
        Self { a, b, w }
    }

    pub fn touches(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }

    pub fn joins(&self, u: usize, v: usize) -> bool {
        (self.a == u && self.b == v) || (self.a == v && self.b == u)
    }

    /// The endpoint that is not `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.a == v {
            self.b
        } else {
            self.a
        }
    }

    fn key(&self) -> (usize, usize) {
        (self.a.min(self.b), self.a.max(self.b))
    }
}

/// `0 < |w| <= 0.999`, finite.
pub fn weight_in_range(w: f64) -> bool {
    w.is_finite() && w != 0.0 && w.abs() <= MAX_WEIGHT
}

/// A validated Gaussian tree `G = (V, E, W)` on nodes `1..=n`.
#[derive(Debug, Clone)]
pub struct GaussianTree {
    n: usize,
    edges: Vec<Edge>,
    adj: Vec<Vec<(usize, f64)>>,
}

impl PartialEq for GaussianTree {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.edges == other.edges
    }
}

/// Checks every tree invariant on a raw edge list.
pub fn validate(n: usize, edges: &[Edge]) -> Result<()> {
    if n < 2 {
        return Err(Error::ParameterRange(format!("tree needs at least 2 nodes, got {n}")));
    }
    for e in edges {
        for v in [e.a, e.b] {
            if v == 0 || v > n {
                return Err(Error::NodeNotFound(v));
            }
        }
        if e.a == e.b {
            return Err(Error::Cycle { i: e.a, j: e.b });
        }
        if !weight_in_range(e.w) {
            return Err(Error::WeightRange { i: e.a, j: e.b, w: e.w });
        }
    }
    let mut seen = HashSet::with_capacity(edges.len());
    for e in edges {
        if !seen.insert(e.key()) {
            return Err(Error::DuplicateEdge { i: e.a, j: e.b });
        }
    }
    let mut uf = UnionFind::new(n);
    for e in edges {
        if !uf.union(e.a - 1, e.b - 1) {
            return Err(Error::Cycle { i: e.a, j: e.b });
        }
    }
    // Acyclic with fewer than n-1 edges means some node is cut off.
    let root = uf.find(0);
    if let Some(v) = (1..n).find(|&v| uf.find(v) != root) {
        return Err(Error::Disconnected { node: v + 1 });
    }
    Ok(())
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self { parent: (0..n).collect() }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

impl GaussianTree {
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        validate(n, &edges)?;
        let mut adj = vec![Vec::new(); n];
        for e in &edges {
            adj[e.a - 1].push((e.b, e.w));
            adj[e.b - 1].push((e.a, e.w));
        }
        Ok(Self { n, edges, adj })
    }

    /// Convenience constructor from `(i, j, w)` triples.
    pub fn from_triples(n: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(n, triples.iter().map(|&(a, b, w)| Edge::new(a, b, w)).collect())
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Edges in insertion order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `v` with the connecting weight.
    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adj[v - 1]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v - 1].len()
    }

    pub fn contains(&self, v: usize) -> bool {
        v >= 1 && v <= self.n
    }

    pub fn edge_weight(&self, u: usize, v: usize) -> Option<f64> {
        if !self.contains(u) || !self.contains(v) {
            return None;
        }
        self.adj[u - 1].iter().find(|&&(x, _)| x == v).map(|&(_, w)| w)
    }

    /// Index of edge `{u, v}` in [`GaussianTree::edges`].
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        self.edges.iter().position(|e| e.joins(u, v))
    }

    /// Nodes on the unique path from `from` to `to`, both ends included.
    pub fn path(&self, from: usize, to: usize) -> Result<Vec<usize>> {
        for v in [from, to] {
            if !self.contains(v) {
                return Err(Error::NodeNotFound(v));
            }
        }
        let mut prev = vec![usize::MAX; self.n];
        prev[from - 1] = from;
        let mut queue = VecDeque::from([from]);
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for &(x, _) in &self.adj[u - 1] {
                if prev[x - 1] == usize::MAX {
                    prev[x - 1] = u;
                    queue.push_back(x);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[cur - 1];
            path.push(cur);
        }
        path.reverse();
        Ok(path)
    }

    /// Nodes reachable from `start` without crossing the edge `{start, blocked}`.
    pub fn side_of(&self, start: usize, blocked: usize) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        seen[start - 1] = true;
        let mut stack = vec![start];
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            out.push(u);
            for &(x, _) in &self.adj[u - 1] {
                if seen[x - 1] || (u == start && x == blocked) {
                    continue;
                }
                seen[x - 1] = true;
                stack.push(x);
            }
        }
        out.sort_unstable();
        out
    }

    /// `ln |Σ| = Σ_edges ln(1 - w²)`.
    pub fn log_det(&self) -> f64 {
        self.edges.iter().map(|e| (1.0 - e.w * e.w).ln()).sum()
    }

    /// Covariance with unit diagonal and path-product off-diagonal entries.
    pub fn covariance(&self) -> SpdMatrix {
        let n = self.n;
        let mut m = DMatrix::<f64>::identity(n, n);
        let mut stack = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        for s in 0..n {
            seen.iter_mut().for_each(|x| *x = false);
            seen[s] = true;
            stack.push((s, 1.0));
            while let Some((u, prod)) = stack.pop() {
                m[(s, u)] = prod;
                for &(x, w) in &self.adj[u] {
                    if !seen[x - 1] {
                        seen[x - 1] = true;
                        stack.push((x - 1, prod * w));
                    }
                }
            }
        }
        SpdMatrix::with_log_det(m, self.log_det()).expect("valid tree covariance is SPD")
    }

    /// Closed-form inverse covariance: `-w/(1-w²)` on edges, zero for
    /// non-adjacent pairs, `1 + Σ w²/(1-w²)` on the diagonal.
    pub fn precision(&self) -> SpdMatrix {
        let n = self.n;
        let mut m = DMatrix::<f64>::identity(n, n);
        for e in &self.edges {
            let d = 1.0 - e.w * e.w;
            let (a, b) = (e.a - 1, e.b - 1);
            m[(a, b)] = -e.w / d;
            m[(b, a)] = -e.w / d;
            m[(a, a)] += e.w * e.w / d;
            m[(b, b)] += e.w * e.w / d;
        }
        SpdMatrix::with_log_det(m, -self.log_det()).expect("valid tree precision is SPD")
    }

    /// Edge list sorted by `(min, max)` endpoint, orientation-free.
    pub fn canonical_edges(&self) -> Vec<Edge> {
        let mut out: Vec<Edge> = self
            .edges
            .iter()
            .map(|e| {
                let (a, b) = e.key();
                Edge::new(a, b, e.w)
            })
            .collect();
        out.sort_by_key(|e| (e.a, e.b));
        out
    }

    /// Same node count and the same weighted edge set, ignoring edge order
    /// and orientation.
    pub fn same_structure(&self, other: &GaussianTree) -> bool {
        self.n == other.n && self.canonical_edges() == other.canonical_edges()
    }

    /// Relabels nodes: old node `v` becomes `map[v - 1]`. `map` must be a
    /// permutation of `1..=n`.
    pub fn relabeled(&self, map: &[usize]) -> Result<GaussianTree> {
        if map.len() != self.n {
            return Err(Error::DimensionMismatch(map.len(), self.n));
        }
        let mut hit = vec![false; self.n];
        for &m in map {
            if m == 0 || m > self.n || std::mem::replace(&mut hit[m - 1], true) {
                return Err(Error::ParameterRange("relabel map is not a permutation".into()));
            }
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge::new(map[e.a - 1], map[e.b - 1], e.w))
            .collect();
        GaussianTree::new(self.n, edges)
    }
}

/// Covariance of the tree (free-function form).
pub fn covariance_of(tree: &GaussianTree) -> SpdMatrix {
    tree.covariance()
}

/// Precision of the tree (free-function form).
pub fn precision_of(tree: &GaussianTree) -> SpdMatrix {
    tree.precision()
}

/// Gaussian marginal on the 1-based node subset `keep`, in the given order.
pub fn marginal_covariance(cov: &SpdMatrix, keep: &[usize]) -> Result<SpdMatrix> {
    if keep.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut seen = HashSet::new();
    let mut rows = Vec::with_capacity(keep.len());
    for &k in keep {
        if k == 0 || k > cov.dim() {
            return Err(Error::NodeNotFound(k));
        }
        if !seen.insert(k) {
            return Err(Error::ParameterRange(format!("node {k} listed twice")));
        }
        rows.push(k - 1);
    }
    cov.principal_submatrix(&rows)
}

/// Uniformly random labeled tree (random Prüfer sequence) with `|w|` uniform
/// in `[wmin, wmax]` and a random sign. Deterministic in `seed`.
pub fn random_tree(seed: u64, n: usize, wmin: f64, wmax: f64) -> Result<GaussianTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_tree_with(&mut rng, n, wmin, wmax)
}

pub fn random_tree_with<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    wmin: f64,
    wmax: f64,
) -> Result<GaussianTree> {
    if n < 2 {
        return Err(Error::ParameterRange(format!("n = {n} < 2")));
    }
    if !(wmin > 0.0 && wmin < wmax && wmax <= MAX_WEIGHT) {
        return Err(Error::ParameterRange(format!(
            "need 0 < wmin < wmax <= {MAX_WEIGHT}, got [{wmin}, {wmax}]"
        )));
    }
    let seq: Vec<usize> = (0..n - 2).map(|_| rng.random_range(0..n)).collect();
    let mut degree = vec![1usize; n];
    for &x in &seq {
        degree[x] += 1;
    }
    let mut pairs = Vec::with_capacity(n - 1);
    for &x in &seq {
        let leaf = (0..n).find(|&j| degree[j] == 1).expect("Prüfer decode always has a leaf");
        pairs.push((leaf, x));
        degree[leaf] -= 1;
        degree[x] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&j| degree[j] == 1).collect();
    pairs.push((rest[0], rest[1]));
    let edges = pairs
        .into_iter()
        .map(|(a, b)| {
            let mag = rng.random_range(wmin..=wmax);
            let w = if rng.random_bool(0.5) { mag } else { -mag };
            Edge::new(a + 1, b + 1, w)
        })
        .collect();
    GaussianTree::new(n, edges)
}

// ---------------------------------------------------------------------------
// gtree text format

/// One non-empty, comment-stripped input line.
pub(crate) struct Line<'a> {
    pub number: usize,
    pub tokens: Vec<(usize, &'a str)>,
}

pub(crate) fn lex(text: &str) -> Vec<Line<'_>> {
    let mut out = Vec::new();
    for (idx, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let body = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let mut tokens = Vec::new();
        let mut start = None;
        for (pos, ch) in body.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    tokens.push((s, &body[s..pos]));
                }
            } else if start.is_none() {
                start = Some(pos);
            }
        }
        if let Some(s) = start {
            tokens.push((s, &body[s..]));
        }
        if !tokens.is_empty() {
            let tokens = tokens
                .into_iter()
                .map(|(s, t)| (body[..s].chars().count() + 1, t))
                .collect();
            out.push(Line { number: idx + 1, tokens });
        }
    }
    out
}

pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax { line, column, message: message.into() }
}

pub(crate) fn parse_field<T: std::str::FromStr>(line: &Line<'_>, idx: usize, what: &str) -> Result<T> {
    let (col, tok) = line.tokens[idx];
    tok.parse()
        .map_err(|_| syntax(line.number, col, format!("invalid {what} `{tok}`")))
}

/// Parses the `N` header and `E` lines from the front of `lines`, returning
/// the raw node count, edges and the number of lines consumed.
pub(crate) fn parse_tree_block(lines: &[Line<'_>]) -> Result<(usize, Vec<Edge>, usize)> {
    let Some(head) = lines.first() else {
        return Err(syntax(1, 1, "empty input, expected `N <count>`"));
    };
    if head.tokens[0].1 != "N" {
        return Err(syntax(head.number, head.tokens[0].0, "expected `N <count>` header"));
    }
    if head.tokens.len() != 2 {
        return Err(syntax(head.number, head.tokens[0].0, "`N` takes exactly one field"));
    }
    let n: usize = parse_field(head, 1, "node count")?;
    let mut edges = Vec::new();
    let mut used = 1;
    for line in &lines[1..] {
        if line.tokens[0].1 != "E" {
            break;
        }
        if line.tokens.len() != 4 {
            return Err(syntax(line.number, line.tokens[0].0, "`E` takes exactly three fields"));
        }
        let a = parse_field(line, 1, "node id")?;
        let b = parse_field(line, 2, "node id")?;
        let w = parse_field(line, 3, "weight")?;
        edges.push(Edge::new(a, b, w));
        used += 1;
    }
    Ok((n, edges, used))
}

/// Parses a `gtree` document.
pub fn parse_gtree(text: &str) -> Result<GaussianTree> {
    let lines = lex(text);
    let (n, edges, used) = parse_tree_block(&lines)?;
    if let Some(extra) = lines.get(used) {
        let (col, tok) = extra.tokens[0];
        return Err(syntax(extra.number, col, format!("unexpected directive `{tok}`")));
    }
    GaussianTree::new(n, edges)
}

/// Parses a `gtree` document from raw bytes (must be UTF-8).
pub fn parse_gtree_bytes(bytes: &[u8]) -> Result<GaussianTree> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let prefix = &bytes[..e.valid_up_to()];
        let line = prefix.iter().filter(|&&b| b == b'\n').count() + 1;
        let column = prefix.iter().rev().take_while(|&&b| b != b'\n').count() + 1;
        syntax(line, column, "input is not valid UTF-8")
    })?;
    parse_gtree(text)
}

/// Canonical `gtree` text: header plus one `E` line per edge in stored order.
/// Weights use the shortest decimal that round-trips.
pub fn write_gtree(tree: &GaussianTree) -> String {
    let mut out = String::new();
    writeln!(out, "N {}", tree.node_count()).unwrap();
    for e in tree.edges() {
        writeln!(out, "E {} {} {}", e.a, e.b, e.w).unwrap();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::max_abs_diff;

    fn path3() -> GaussianTree {
        GaussianTree::from_triples(3, &[(1, 2, 0.5), (2, 3, 0.6)]).unwrap()
    }

    #[test]
    fn validate_examples() {
        assert!(path3().node_count() == 3);
        let tri = GaussianTree::from_triples(3, &[(1, 2, 0.5), (2, 3, 0.6), (1, 3, 0.3)]);
        assert!(matches!(tri, Err(Error::Cycle { .. })));
        let bound = GaussianTree::from_triples(3, &[(1, 2, 1.0), (2, 3, 0.6)]);
        assert!(matches!(bound, Err(Error::WeightRange { .. })));
        let zero = GaussianTree::from_triples(2, &[(1, 2, 0.0)]);
        assert!(matches!(zero, Err(Error::WeightRange { .. })));
        let ok_edge = GaussianTree::from_triples(2, &[(1, 2, -0.999)]);
        assert!(ok_edge.is_ok());
        let dis = GaussianTree::from_triples(3, &[(1, 2, 0.5)]);
        assert_eq!(dis, Err(Error::Disconnected { node: 3 }));
        let dup = GaussianTree::from_triples(2, &[(1, 2, 0.5), (2, 1, 0.5)]);
        assert!(matches!(dup, Err(Error::DuplicateEdge { .. })));
        let self_loop = GaussianTree::from_triples(2, &[(1, 1, 0.5)]);
        assert!(matches!(self_loop, Err(Error::Cycle { .. })));
        let bad_id = GaussianTree::from_triples(2, &[(1, 3, 0.5)]);
        assert_eq!(bad_id, Err(Error::NodeNotFound(3)));
    }

    #[test]
    fn covariance_path_products() {
        let c = path3().covariance();
        let want = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.3, 0.5, 1.0, 0.6, 0.3, 0.6, 1.0]);
        assert!(max_abs_diff(c.matrix(), &want) < 1e-15);
        let star = GaussianTree::from_triples(3, &[(2, 1, 0.5), (2, 3, 0.6)]).unwrap();
        assert!((star.covariance().get(0, 2) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn precision_closed_form() {
        let t = path3();
        let p = t.precision();
        assert_eq!(p.get(0, 2), 0.0);
        assert!((p.get(0, 1) + 0.5 / 0.75).abs() < 1e-15);
        assert!((p.get(0, 1) + 0.666_667).abs() < 1e-6);
        let prod = p.matrix() * t.covariance().matrix();
        assert!(max_abs_diff(&prod, &DMatrix::identity(3, 3)) < 1e-12);
        let dense = SpdMatrix::new(t.covariance().matrix().clone()).unwrap();
        assert!((dense.log_det() - t.log_det()).abs() < 1e-14);
    }

    #[test]
    fn marginal_examples() {
        let c = path3().covariance();
        let all = marginal_covariance(&c, &[1, 2, 3]).unwrap();
        assert_eq!(all.matrix(), c.matrix());
        let m12 = marginal_covariance(&c, &[1, 2]).unwrap();
        assert_eq!(m12.matrix(), &DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]));
        let m13 = marginal_covariance(&c, &[1, 3]).unwrap();
        assert!((m13.get(0, 1) - 0.3).abs() < 1e-15);
        assert_eq!(marginal_covariance(&c, &[]), Err(Error::EmptySubset));
        assert_eq!(marginal_covariance(&c, &[4]), Err(Error::NodeNotFound(4)));
    }

    #[test]
    fn parse_examples() {
        let t = parse_gtree("N 2\nE 1 2 0.5\n").unwrap();
        assert_eq!(t.node_count(), 2);
        assert_eq!(t.edge_weight(1, 2), Some(0.5));
        let dup = parse_gtree("N 2\nE 1 2 0.5\nE 1 2 0.5\n");
        assert!(matches!(dup, Err(Error::DuplicateEdge { .. })));
        let crlf = parse_gtree("# header comment\r\nN 3\r\nE 1 2 0.5 # trailing\r\n\r\nE 2 3 -0.25\r\n").unwrap();
        assert_eq!(write_gtree(&crlf), "N 3\nE 1 2 0.5\nE 2 3 -0.25\n");
    }

    #[test]
    fn parse_syntax_errors_carry_position() {
        match parse_gtree("N 2\nE 1 2 abc\n") {
            Err(Error::Syntax { line: 2, column: 7, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_gtree("  M 2\n") {
            Err(Error::Syntax { line: 1, column: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        match parse_gtree("N 2\nE 1 2 0.5\nV 1 2.0\n") {
            Err(Error::Syntax { line: 3, column: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_gtree(""), Err(Error::Syntax { .. })));
        assert!(matches!(parse_gtree_bytes(b"N 2\nE 1 2 \xff\n"), Err(Error::Syntax { line: 2, .. })));
    }

    #[test]
    fn random_tree_examples() {
        let a = random_tree(7, 5, 0.2, 0.9).unwrap();
        let b = random_tree(7, 5, 0.2, 0.9).unwrap();
        assert_eq!(a, b);
        assert!(a.edges().iter().all(|e| (0.2..=0.9).contains(&e.w.abs())));
        let two = random_tree(3, 2, 0.2, 0.9).unwrap();
        assert_eq!(two.edges().len(), 1);
        assert!(matches!(random_tree(1, 1, 0.2, 0.9), Err(Error::ParameterRange(_))));
        assert!(matches!(random_tree(1, 4, 0.5, 0.2), Err(Error::ParameterRange(_))));
        assert!(matches!(random_tree(1, 4, 0.2, 1.0), Err(Error::ParameterRange(_))));
    }

    #[test]
    fn path_and_sides() {
        let t = GaussianTree::from_triples(4, &[(1, 2, 0.5), (2, 3, 0.5), (2, 4, 0.5)]).unwrap();
        assert_eq!(t.path(1, 4).unwrap(), vec![1, 2, 4]);
        assert_eq!(t.path(3, 3).unwrap(), vec![3]);
        assert_eq!(t.side_of(2, 1), vec![2, 3, 4]);
        assert_eq!(t.side_of(1, 2), vec![1]);
    }
}
