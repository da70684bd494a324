//! Involutory congruences between covariance matrices.
//!
//! If `Σ2 = Q Σ1 Qᵀ` with `Q² = I`, the generalized spectrum is closed under
//! reciprocals and `λ* = 1/2`. Every congruence has the form
//! `Q = L2 F L1⁻¹` with `F` orthogonal and `Σk = Lk Lkᵀ`; only some of them
//! are involutions.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::par;
use crate::spd::{max_abs_diff, SpdMatrix};

/// Residual bound for accepting a witness.
pub const WITNESS_TOL: f64 = 1e-8;
/// `max |FᵀF - I|` accepted as orthogonal.
pub const ORTHOGONAL_TOL: f64 = 1e-10;
/// Default size limit for the permutation search.
pub const DEFAULT_PERMUTATION_LIMIT: usize = 8;

/// A candidate `Q` with its residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct CongruenceWitness {
    pub q: DMatrix<f64>,
    /// `max |Q² - I|`.
    pub involutory_residual: f64,
    /// `max |Σ2 - Q Σ1 Qᵀ|`.
    pub congruence_residual: f64,
    pub accepted: bool,
}

/// Measures `q` against both witness conditions.
pub fn verify_witness(q: &DMatrix<f64>, s1: &SpdMatrix, s2: &SpdMatrix) -> Result<CongruenceWitness> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::DimensionMismatch(n, s2.dim()));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(n, q.nrows().max(q.ncols())));
    }
    let id = DMatrix::<f64>::identity(n, n);
    let involutory_residual = max_abs_diff(&(q * q), &id);
    let congruence_residual = max_abs_diff(s2.matrix(), &(q * s1.matrix() * q.transpose()));
    Ok(CongruenceWitness {
        q: q.clone(),
        involutory_residual,
        congruence_residual,
        accepted: involutory_residual <= WITNESS_TOL && congruence_residual <= WITNESS_TOL,
    })
}

/// `max |FᵀF - I|`.
pub fn orthogonality_residual(f: &DMatrix<f64>) -> f64 {
    if !f.is_square() {
        return f64::INFINITY;
    }
    let n = f.nrows();
    max_abs_diff(&(f.transpose() * f), &DMatrix::identity(n, n))
}

/// `Q = L2 F L1⁻¹`, which always satisfies `Σ2 = Q Σ1 Qᵀ`.
pub fn construct_congruence(s1: &SpdMatrix, s2: &SpdMatrix, f: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::DimensionMismatch(n, s2.dim()));
    }
    if f.nrows() != n || f.ncols() != n {
        return Err(Error::DimensionMismatch(n, f.nrows().max(f.ncols())));
    }
    let res = orthogonality_residual(f);
    if res > ORTHOGONAL_TOL {
        return Err(Error::NotOrthogonal(res));
    }
    let l1_inv = s1.solve_lower(&DMatrix::identity(n, n));
    Ok(s2.cholesky_factor() * f * l1_inv)
}

/// `F = L2⁻¹ Q L1`, orthogonal whenever `Q` is a congruence from `Σ1` to `Σ2`.
pub fn recover_orthogonal(s1: &SpdMatrix, s2: &SpdMatrix, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::DimensionMismatch(n, s2.dim()));
    }
    if q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(n, q.nrows().max(q.ncols())));
    }
    Ok(s2.solve_lower(&(q * s1.cholesky_factor())))
}

/// Permutation matrix with `Q[r][image[r]] = 1` (0-based images).
pub fn permutation_matrix(image: &[usize]) -> DMatrix<f64> {
    let n = image.len();
    DMatrix::from_fn(n, n, |r, c| if image[r] == c { 1.0 } else { 0.0 })
}

/// All involutions of `0..n` as image vectors, in lexicographic order.
pub fn involutions(n: usize) -> Vec<Vec<usize>> {
    fn rec(image: &mut Vec<Option<usize>>, out: &mut Vec<Vec<usize>>) {
        let Some(i) = image.iter().position(Option::is_none) else {
            out.push(image.iter().map(|x| x.expect("assigned")).collect());
            return;
        };
        image[i] = Some(i);
        rec(image, out);
        for j in i + 1..image.len() {
            if image[j].is_none() {
                image[i] = Some(j);
                image[j] = Some(i);
                rec(image, out);
                image[j] = None;
            }
        }
        image[i] = None;
    }
    let mut out = Vec::new();
    rec(&mut vec![None; n], &mut out);
    out
}

/// First involutory permutation (lexicographic in the image vector) that
/// maps `Σ1` onto `Σ2`.
pub fn find_involutory_permutation(
    s1: &SpdMatrix,
    s2: &SpdMatrix,
    n_limit: usize,
) -> Result<Option<CongruenceWitness>> {
    let n = s1.dim();
    if s2.dim() != n {
        return Err(Error::DimensionMismatch(n, s2.dim()));
    }
    if n > n_limit {
        return Err(Error::SizeLimitExceeded { n, limit: n_limit });
    }
    let candidates = involutions(n);
    let a = s1.matrix();
    let b = s2.matrix();
    let hit = par::find_first(candidates.len(), |k| {
        let p = &candidates[k];
        let ok = (0..n).all(|r| (0..n).all(|c| (b[(r, c)] - a[(p[r], p[c])]).abs() <= WITNESS_TOL));
        ok.then_some(k)
    });
    match hit {
        Some(k) => verify_witness(&permutation_matrix(&candidates[k]), s1, s2).map(Some),
        None => Ok(None),
    }
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `R`'s diagonal folded into `Q`.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed_form::ThreeNodePair;
    use crate::seed;

    #[test]
    fn involution_counts() {
        let counts: Vec<usize> = (0..=8).map(|n| involutions(n).len()).collect();
        assert_eq!(counts, vec![1, 1, 2, 4, 10, 26, 76, 232, 764]);
        let three = involutions(3);
        assert_eq!(three, vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2], vec![2, 1, 0]]);
        let mut sorted = involutions(6);
        sorted.sort();
        assert_eq!(sorted, involutions(6));
    }

    #[test]
    fn identity_witness() {
        let pair = ThreeNodePair::new(0.5, 0.6).unwrap();
        let w = verify_witness(&DMatrix::identity(3, 3), &pair.sigma1, &pair.sigma1).unwrap();
        assert!(w.accepted);
        let found = find_involutory_permutation(&pair.sigma1, &pair.sigma1, 8).unwrap().unwrap();
        assert_eq!(found.q, DMatrix::identity(3, 3));
    }

    #[test]
    fn swap_witness_for_three_node_pair() {
        let pair = ThreeNodePair::new(0.5, 0.6).unwrap();
        let q = permutation_matrix(&[1, 0, 2]);
        let w = verify_witness(&q, &pair.sigma1, &pair.sigma2).unwrap();
        assert!(w.accepted);
        let found = find_involutory_permutation(&pair.sigma1, &pair.sigma2, 8).unwrap().unwrap();
        assert_eq!(found.q, q);
        assert!(found.congruence_residual < 1e-15);
    }

    #[test]
    fn random_q_rejected() {
        let pair = ThreeNodePair::new(0.5, 0.6).unwrap();
        let q = random_orthogonal(&mut seed::stream(5, &[]), 3);
        let w = verify_witness(&q, &pair.sigma1, &pair.sigma2).unwrap();
        assert!(!w.accepted);
        assert!(w.congruence_residual > 1e-3);
    }

    #[test]
    fn construction_and_recovery() {
        let pair = ThreeNodePair::new(0.3, -0.7).unwrap();
        let mut rng = seed::stream(11, &[]);
        for _ in 0..20 {
            let f = random_orthogonal(&mut rng, 3);
            assert!(orthogonality_residual(&f) < 1e-12);
            let q = construct_congruence(&pair.sigma1, &pair.sigma2, &f).unwrap();
            let w = verify_witness(&q, &pair.sigma1, &pair.sigma2).unwrap();
            assert!(w.congruence_residual < 1e-8);
            assert!(w.involutory_residual > 1e-6);
            let back = recover_orthogonal(&pair.sigma1, &pair.sigma2, &q).unwrap();
            assert!(max_abs_diff(&back, &f) < 1e-8);
        }
        let id = DMatrix::identity(3, 3);
        let q = construct_congruence(&pair.sigma1, &pair.sigma1, &id).unwrap();
        assert!(max_abs_diff(&q, &id) < 1e-12);
        let not = DMatrix::from_element(3, 3, 0.5);
        assert!(matches!(construct_congruence(&pair.sigma1, &pair.sigma2, &not), Err(Error::NotOrthogonal(_))));
    }

    #[test]
    fn size_limit() {
        let s = SpdMatrix::identity(9);
        assert_eq!(
            find_involutory_permutation(&s, &s, DEFAULT_PERMUTATION_LIMIT),
            Err(Error::SizeLimitExceeded { n: 9, limit: 8 })
        );
    }
}
