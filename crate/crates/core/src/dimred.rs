//! Optimal linear reduction from `N` to `N_O` observed dimensions for the
//! binary test between `N(0, Σ1)` and `N(0, Σ2)`.
//!
//! After whitening, `P Σ2 Pᵀ = I` and `P Σ1 Pᵀ = diag(λ)`. The best `N_O`
//! rows keep the `k` largest and `N_O - k` smallest eigenvalues for some `k`
//! in a short admissible range, so only those candidates are scored.
//! Reduced pairs rarely have equal determinants, so scoring uses the general
//! max-min definition.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::par;
use crate::spd::{max_abs_diff, SpdMatrix};
use crate::spectral::{bisect_decreasing, gen_eig_decomposition, gen_eigs};

/// Residual bound for the whitening identities.
pub const WHITENING_TOL: f64 = 1e-8;
/// Eigenvalues above `1 + UNIT_GAP` count as "greater than one".
pub const UNIT_GAP: f64 = 1e-9;
/// Candidate scores within this distance are ties.
pub const TIE_TOL: f64 = 1e-12;
/// Relative slack for interlacing.
pub const INTERLACE_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 2048;
const GOLDEN_ITERS: usize = 100;

/// Whitening rows in descending eigenvalue order.
#[derive(Debug, Clone)]
pub struct Whitening {
    /// `P` with `P Σ2 Pᵀ = I` and `P Σ1 Pᵀ = diag(values)`.
    pub p: DMatrix<f64>,
    /// Descending; equal eigenvalues are adjacent.
    pub values: Vec<f64>,
}

impl Whitening {
    /// `(max |P Σ2 Pᵀ - I|, max |P Σ1 Pᵀ - Λ|)`.
    pub fn residuals(&self, s1: &SpdMatrix, s2: &SpdMatrix) -> (f64, f64) {
        residuals(&self.p, &self.values, s1, s2)
    }
}

fn residuals(a: &DMatrix<f64>, values: &[f64], s1: &SpdMatrix, s2: &SpdMatrix) -> (f64, f64) {
    let k = a.nrows();
    let r2 = max_abs_diff(&(a * s2.matrix() * a.transpose()), &DMatrix::identity(k, k));
    let diag = DMatrix::from_fn(k, k, |i, j| if i == j { values[i] } else { 0.0 });
    let r1 = max_abs_diff(&(a * s1.matrix() * a.transpose()), &diag);
    (r2, r1)
}

pub fn whitening_transform(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<Whitening> {
    let d = gen_eig_decomposition(s1, s2)?;
    let n = s1.dim();
    let p = DMatrix::from_fn(n, n, |r, c| d.transform[(n - 1 - r, c)]);
    let values = d.spectrum.values.iter().rev().copied().collect();
    Ok(Whitening { p, values })
}

/// One admissible projection.
#[derive(Debug, Clone)]
pub struct Candidate {
    /// Number of leading (largest) eigenvalues kept.
    pub k: usize,
    pub a: DMatrix<f64>,
    /// The `k` largest then the `N_O - k` smallest eigenvalues.
    pub chosen: Vec<f64>,
}

/// Every `A_k` for `max(N_O + m - N, 0) <= k <= min(m, N_O)`, where `m`
/// counts eigenvalues above one.
pub fn candidate_matrices(w: &Whitening, n_o: usize) -> Result<Vec<Candidate>> {
    let n = w.values.len();
    if n_o == 0 || n_o > n {
        return Err(Error::ParameterRange(format!("reduced dimension {n_o} outside 1..={n}")));
    }
    let m = w.values.iter().filter(|&&v| v > 1.0 + UNIT_GAP).count();
    let lo = (n_o + m).saturating_sub(n);
    let hi = m.min(n_o);
    Ok((lo..=hi)
        .map(|k| {
            let rows: Vec<usize> = (0..k).chain(n - (n_o - k)..n).collect();
            let a = DMatrix::from_fn(n_o, n, |r, c| w.p[(rows[r], c)]);
            let chosen = rows.iter().map(|&r| w.values[r]).collect();
            Candidate { k, a, chosen }
        })
        .collect())
}

/// `(D(Σ_λ || Σ1), D(Σ_λ || Σ2))` for the diagonal pair `(diag(μ), I)`.
pub fn reduced_divergences(mu: &[f64], lam: f64) -> (f64, f64) {
    let (mut d1, mut d2) = (0.0, 0.0);
    for &m in mu {
        let r = lam + (1.0 - lam) * m;
        d1 += r.ln() + 1.0 / r - 1.0;
        d2 += (r / m).ln() + m / r - 1.0;
    }
    (0.5 * d1.max(0.0), 0.5 * d2.max(0.0))
}

/// `D1 - D2 = ½ Σ (ln μ + (1 - μ) / r)`, decreasing in λ.
fn divergence_gap(mu: &[f64], lam: f64) -> f64 {
    0.5 * mu.iter().map(|&m| m.ln() + (1.0 - m) / (lam + (1.0 - lam) * m)).sum::<f64>()
}

/// Max-min CI `(ci, λ*)` of the diagonal pair `(diag(chosen), I)`.
pub fn reduced_ci(chosen: &[f64]) -> Result<(f64, f64)> {
    if chosen.is_empty() {
        return Err(Error::ParameterRange("no eigenvalues chosen".into()));
    }
    if let Some(bad) = chosen.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::ParameterRange(format!("eigenvalue {bad} is not positive")));
    }
    let objective = |lam: f64| {
        let (a, b) = reduced_divergences(chosen, lam);
        a.min(b)
    };
    let (g0, g1) = (divergence_gap(chosen, 0.0), divergence_gap(chosen, 1.0));
    let lam = if g0 > 0.0 && g1 < 0.0 {
        bisect_decreasing(|l| divergence_gap(chosen, l), 0.0, 1.0)
    } else if chosen.iter().all(|&v| v == 1.0) {
        0.5
    } else {
        scan_and_refine(objective)
    };
    Ok((objective(lam), lam))
}

/// Argmax of `f` on `[0, 1]`: a uniform scan followed by golden-section
/// search on the bracketing cells.
pub(crate) fn scan_and_refine<F: Fn(f64) -> f64>(f: F) -> f64 {
    let step = 1.0 / SCAN_POINTS as f64;
    let mut best = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=SCAN_POINTS {
        let v = f(i as f64 * step);
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    let lo = best.saturating_sub(1) as f64 * step;
    let hi = ((best + 1).min(SCAN_POINTS)) as f64 * step;
    let x = golden_max(&f, lo, hi, GOLDEN_ITERS);
    if f(x) >= best_v {
        x
    } else {
        best as f64 * step
    }
}

pub(crate) fn golden_max<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if b - a <= 1e-15 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// CI of the projected pair `(A Σ1 Aᵀ, A Σ2 Aᵀ)`.
pub fn projected_ci(s1: &SpdMatrix, s2: &SpdMatrix, a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let p1 = s1.congruence(a)?;
    let p2 = s2.congruence(a)?;
    reduced_ci(&gen_eigs(&p1, &p2)?.values)
}

/// The selected projection and its score.
#[derive(Debug, Clone)]
pub struct ReductionPlan {
    pub p: DMatrix<f64>,
    pub k: usize,
    pub a_k: DMatrix<f64>,
    pub chosen: Vec<f64>,
    pub reduced_ci: f64,
    pub reduced_lambda_star: f64,
    /// `(k, ci)` for every admissible candidate.
    pub scores: Vec<(usize, f64)>,
}

impl ReductionPlan {
    pub fn n_o(&self) -> usize {
        self.a_k.nrows()
    }

    /// Text export: header fields, then one `row` line per row of `A_k`,
    /// all numbers in shortest round-trip form.
    pub fn to_text(&self) -> String {
        let join = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let mut s = String::new();
        writeln!(s, "n={}", self.p.nrows()).unwrap();
        writeln!(s, "n_o={}", self.n_o()).unwrap();
        writeln!(s, "k={}", self.k).unwrap();
        writeln!(s, "chosen={}", join(&mut self.chosen.iter().copied())).unwrap();
        writeln!(s, "ci={}", self.reduced_ci).unwrap();
        writeln!(s, "lambda_star={}", self.reduced_lambda_star).unwrap();
        for r in 0..self.a_k.nrows() {
            writeln!(s, "row {}", join(&mut self.a_k.row(r).iter().copied())).unwrap();
        }
        s
    }
}

/// Scores every candidate and returns the best; ties go to the smallest `k`.
pub fn optimal_reduction(s1: &SpdMatrix, s2: &SpdMatrix, n_o: usize) -> Result<ReductionPlan> {
    let w = whitening_transform(s1, s2)?;
    let cands = candidate_matrices(&w, n_o)?;
    let scored = par::map_indexed(cands.len(), |i| reduced_ci(&cands[i].chosen));
    let mut scores = Vec::with_capacity(cands.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, r) in scored.into_iter().enumerate() {
        let (ci, lam) = r?;
        scores.push((cands[i].k, ci));
        if best.is_none_or(|(_, b, _)| ci > b + TIE_TOL) {
            best = Some((i, ci, lam));
        }
    }
    let (i, ci, lam) = best.expect("candidate range is never empty");
    let c = cands.into_iter().nth(i).expect("index in range");
    let (r2, r1) = residuals(&c.a, &c.chosen, s1, s2);
    if r1.max(r2) > WHITENING_TOL {
        return Err(Error::Invariant(format!("reduction residuals {r2:e}, {r1:e} exceed {WHITENING_TOL:e}")));
    }
    Ok(ReductionPlan {
        p: w.p,
        k: c.k,
        a_k: c.a,
        chosen: c.chosen,
        reduced_ci: ci,
        reduced_lambda_star: lam,
        scores,
    })
}

/// True iff the `N - 1` generalized eigenvalues of the pair with row and
/// column `drop` (0-based) removed interlace the `N` parent eigenvalues.
pub fn interlacing_check(s1: &SpdMatrix, s2: &SpdMatrix, drop: usize) -> Result<bool> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::DimensionMismatch(n, s2.dim()));
    }
    if n < 2 {
        return Err(Error::ParameterRange("interlacing needs at least 2 dimensions".into()));
    }
    if drop >= n {
        return Err(Error::NodeNotFound(drop + 1));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| i != drop).collect();
    let parent = gen_eigs(s1, s2)?.values;
    let child = gen_eigs(&s1.principal_submatrix(&keep)?, &s2.principal_submatrix(&keep)?)?.values;
    let slack = |x: f64| INTERLACE_TOL * x.abs().max(1.0);
    Ok(child
        .iter()
        .enumerate()
        .all(|(i, &c)| c >= parent[i] - slack(parent[i]) && c <= parent[i + 1] + slack(parent[i + 1])))
}
