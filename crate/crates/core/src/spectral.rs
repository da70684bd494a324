//! Generalized eigenvalues of SPD pairs and the equal-entropy Chernoff
//! information built on them.
//!
//! For `Σ2 = L Lᵀ` the pencil `(Σ1, Σ2)` has the same spectrum as the
//! symmetric matrix `L⁻¹ Σ1 L⁻ᵀ`, so the nonsymmetric product `Σ1 Σ2⁻¹` is
//! never formed.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spd::SpdMatrix;
use crate::tree::GaussianTree;

/// `|ln|Σ1| - ln|Σ2||` accepted as equal entropy.
pub const ENTROPY_TOL: f64 = 1e-9;
/// Spectra within this distance of all-ones are treated as identical models.
pub const IDENTICAL_TOL: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;
const BISECTION_WIDTH: f64 = 1e-14;

/// Ascending generalized eigenvalues together with `ln|Σ1| - ln|Σ2|`.
#[derive(Debug, Clone, PartialEq)]
pub struct GenEigSpectrum {
    pub values: Vec<f64>,
    pub log_det_ratio: f64,
}

impl GenEigSpectrum {
    pub fn new(mut values: Vec<f64>, log_det_ratio: f64) -> Self {
        values.sort_by(f64::total_cmp);
        Self { values, log_det_ratio }
    }

    /// Spectrum of the diagonal pair `(diag(values), I)`.
    pub fn from_values(values: Vec<f64>) -> Self {
        let ldr = values.iter().map(|v| v.ln()).sum();
        Self::new(values, ldr)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.values.iter().all(|v| (v - 1.0).abs() <= IDENTICAL_TOL)
    }

    /// Number of eigenvalues within `tol` of one.
    pub fn unit_count(&self, tol: f64) -> usize {
        self.values.iter().filter(|v| (*v - 1.0).abs() <= tol).count()
    }

    /// Groups adjacent eigenvalues that agree to relative tolerance `rel_tol`,
    /// returning `(representative, multiplicity)` pairs in ascending order.
    pub fn multiplicities(&self, rel_tol: f64) -> Vec<(f64, usize)> {
        let mut out: Vec<(f64, usize)> = Vec::new();
        for &v in &self.values {
            match out.last_mut() {
                Some((rep, count)) if (v - *rep).abs() <= rel_tol * rep.abs().max(v.abs()) => {
                    *count += 1;
                }
                _ => out.push((v, 1)),
            }
        }
        out
    }

    /// `Σ (1 - λ_i) / (λ + (1-λ) λ_i)`: the difference of the two sides of
    /// the λ* equation, which vanishes at λ*.
    pub fn stationarity_residual(&self, lam: f64) -> f64 {
        self.values
            .iter()
            .map(|&l| (1.0 - l) / (lam + (1.0 - lam) * l))
            .sum()
    }

    /// `(Σ 1/(λ+(1-λ)λ_i), Σ λ_i/(λ+(1-λ)λ_i))`.
    pub fn trace_sums(&self, lam: f64) -> (f64, f64) {
        self.values.iter().fold((0.0, 0.0), |(a, b), &l| {
            let d = lam + (1.0 - lam) * l;
            (a + 1.0 / d, b + l / d)
        })
    }
}

/// Eigenvalues plus the whitening rows `P` with `P Σ2 Pᵀ = I` and
/// `P Σ1 Pᵀ = diag(values)`, both in ascending eigenvalue order.
#[derive(Debug, Clone)]
pub struct GenEigDecomposition {
    pub spectrum: GenEigSpectrum,
    pub transform: DMatrix<f64>,
}

/// Full generalized eigendecomposition of `(s1, s2)`.
pub fn gen_eig_decomposition(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<GenEigDecomposition> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(s1.dim(), s2.dim()));
    }
    let n = s1.dim();
    // M = L⁻¹ Σ1 L⁻ᵀ
    let half = s2.solve_lower(s1.matrix());
    let m = s2.solve_lower(&half.transpose());
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    if values.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::NotSpd);
    }
    let linv = s2.solve_lower(&DMatrix::identity(n, n));
    let vt = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(c, order[r])]);
    let transform = vt * linv;
    Ok(GenEigDecomposition {
        spectrum: GenEigSpectrum { values, log_det_ratio: s1.log_det() - s2.log_det() },
        transform,
    })
}

/// Ascending eigenvalues of the pencil `(s1, s2)`.
pub fn gen_eigs(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<GenEigSpectrum> {
    gen_eig_decomposition(s1, s2).map(|d| d.spectrum)
}

/// `D(N(0,Σ1) || N(0,Σ2))` in nats.
pub fn kl(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(s1.dim(), s2.dim()));
    }
    let n = s1.dim() as f64;
    let tr = s2.trace_solve(s1.matrix());
    let d = 0.5 * (s2.log_det() - s1.log_det()) + 0.5 * tr - 0.5 * n;
    Ok(d.max(0.0))
}

/// `(λ Σ1⁻¹ + (1-λ) Σ2⁻¹)⁻¹`.
pub fn sigma_lambda(s1: &SpdMatrix, s2: &SpdMatrix, lam: f64) -> Result<SpdMatrix> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch(s1.dim(), s2.dim()));
    }
    if !(0.0..=1.0).contains(&lam) {
        return Err(Error::ParameterRange(format!("lambda = {lam} outside [0, 1]")));
    }
    if lam == 1.0 {
        return Ok(s1.clone());
    }
    if lam == 0.0 {
        return Ok(s2.clone());
    }
    let mix = s1.inverse().matrix() * lam + s2.inverse().matrix() * (1.0 - lam);
    let mix = SpdMatrix::from_symmetrized(mix)?;
    Ok(mix.inverse())
}

fn check_entropy(spectrum: &GenEigSpectrum) -> Result<()> {
    if spectrum.log_det_ratio.abs() > ENTROPY_TOL {
        return Err(Error::EntropyMismatch { log_det_ratio: spectrum.log_det_ratio });
    }
    Ok(())
}

/// Root in `[0, 1]` of `Σ 1/(λ+(1-λ)λ_i) = Σ λ_i/(λ+(1-λ)λ_i)` by bisection.
/// An all-ones spectrum returns 0.5.
pub fn lambda_star(spectrum: &GenEigSpectrum) -> Result<f64> {
    check_entropy(spectrum)?;
    if spectrum.is_identity() {
        return Ok(0.5);
    }
    Ok(bisect_decreasing(|lam| spectrum.stationarity_residual(lam), 0.0, 1.0))
}

/// Bisection for the sign change of a function that is `>= 0` at `lo` and
/// `<= 0` at `hi`.
pub(crate) fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    if flo <= 0.0 {
        return lo;
    }
    if f(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if fm > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_WIDTH {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Chernoff information of an equal-entropy pair with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChernoffReport {
    pub lambda_star: f64,
    /// Nats.
    pub ci: f64,
    pub spectrum: GenEigSpectrum,
    /// `tr(Σ1⁻¹ Σ_λ*)`, which equals N at the optimum.
    pub trace_1: f64,
    /// `tr(Σ2⁻¹ Σ_λ*)`.
    pub trace_2: f64,
    pub trace_residual: f64,
    /// `½ ln(|Σ1| / |Σ_λ*|)`, an independent route to the same value.
    pub ci_log_det: f64,
}

impl ChernoffReport {
    pub fn ci_bits(&self) -> f64 {
        self.ci / std::f64::consts::LN_2
    }
}

/// CI from the eigenvalue formula `½ Σ ln((1-λ*)√λ_i + λ*/√λ_i)`.
pub fn ci_from_spectrum(spectrum: &GenEigSpectrum, lam: f64) -> f64 {
    let s: f64 = spectrum
        .values
        .iter()
        .map(|&l| {
            let r = l.sqrt();
            ((1.0 - lam) * r + lam / r).ln()
        })
        .sum();
    (0.5 * s).max(0.0)
}

/// Chernoff information between two equal-entropy zero-mean Gaussians.
pub fn chernoff(s1: &SpdMatrix, s2: &SpdMatrix) -> Result<ChernoffReport> {
    let spectrum = gen_eigs(s1, s2)?;
    check_entropy(&spectrum)?;
    if spectrum.is_identity() {
        let n = s1.dim() as f64;
        return Ok(ChernoffReport {
            lambda_star: 0.5,
            ci: 0.0,
            spectrum,
            trace_1: n,
            trace_2: n,
            trace_residual: 0.0,
            ci_log_det: 0.0,
        });
    }
    let lam = lambda_star(&spectrum)?;
    let ci = ci_from_spectrum(&spectrum, lam);
    let mixed = sigma_lambda(s1, s2, lam)?;
    let trace_1 = s1.trace_solve(mixed.matrix());
    let trace_2 = s2.trace_solve(mixed.matrix());
    Ok(ChernoffReport {
        lambda_star: lam,
        ci,
        spectrum,
        trace_1,
        trace_2,
        trace_residual: (trace_1 - trace_2).abs(),
        ci_log_det: 0.5 * (s1.log_det() - mixed.log_det()),
    })
}

/// [`chernoff`] on the covariances of two trees.
pub fn chernoff_trees(t1: &GaussianTree, t2: &GaussianTree) -> Result<ChernoffReport> {
    if t1.node_count() != t2.node_count() {
        return Err(Error::DimensionMismatch(t1.node_count(), t2.node_count()));
    }
    chernoff(&t1.covariance(), &t2.covariance())
}

/// True iff the multiset of eigenvalues is closed under `λ -> 1/λ` to
/// relative tolerance `tol`.
pub fn reciprocal_pairing(spectrum: &GenEigSpectrum, tol: f64) -> bool {
    let v = &spectrum.values;
    let n = v.len();
    (0..n).all(|i| (v[i] * v[n - 1 - i] - 1.0).abs() <= tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spd::max_abs_diff;

    fn fig3() -> (SpdMatrix, SpdMatrix) {
        let (w1, w2) = (0.5, 0.6);
        let s1 = SpdMatrix::from_row_slice(3, &[1.0, w1, w1 * w2, w1, 1.0, w2, w1 * w2, w2, 1.0]).unwrap();
        let s2 = SpdMatrix::from_row_slice(3, &[1.0, w1, w2, w1, 1.0, w1 * w2, w2, w1 * w2, 1.0]).unwrap();
        (s1, s2)
    }

    #[test]
    fn gen_eigs_examples() {
        let (s1, s2) = fig3();
        let same = gen_eigs(&s1, &s1).unwrap();
        assert!(same.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
        let spectrum = gen_eigs(&s1, &s2).unwrap();
        for (got, want) in spectrum.values.iter().zip([0.4802, 1.0, 2.0823]) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
        let d = SpdMatrix::diagonal(&[2.0, 0.5]).unwrap();
        let spectrum = gen_eigs(&d, &SpdMatrix::identity(2)).unwrap();
        assert!((spectrum.values[0] - 0.5).abs() < 1e-14 && (spectrum.values[1] - 2.0).abs() < 1e-14);
        assert_eq!(gen_eigs(&s1, &SpdMatrix::identity(2)), Err(Error::DimensionMismatch(3, 2)));
    }

    #[test]
    fn decomposition_whitens() {
        let (s1, s2) = fig3();
        let d = gen_eig_decomposition(&s1, &s2).unwrap();
        let p = &d.transform;
        let id = p * s2.matrix() * p.transpose();
        assert!(max_abs_diff(&id, &DMatrix::identity(3, 3)) < 1e-12);
        let lam = p * s1.matrix() * p.transpose();
        let want = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d.spectrum.values.clone()));
        assert!(max_abs_diff(&lam, &want) < 1e-12);
    }

    #[test]
    fn kl_examples() {
        let (s1, s2) = fig3();
        assert!(kl(&s1, &s1).unwrap().abs() < 1e-14);
        let mu = SpdMatrix::diagonal(&[2.0]).unwrap();
        let one = SpdMatrix::identity(1);
        let want = 0.5 * (2.0 - 2f64.ln() - 1.0);
        assert!((kl(&mu, &one).unwrap() - want).abs() < 1e-14);
        assert!((want - 0.153_426).abs() < 1e-6);
        assert!(kl(&s1, &s2).unwrap() > 0.0);
    }

    #[test]
    fn sigma_lambda_examples() {
        let (s1, s2) = fig3();
        assert_eq!(sigma_lambda(&s1, &s2, 1.0).unwrap().matrix(), s1.matrix());
        assert_eq!(sigma_lambda(&s1, &s2, 0.0).unwrap().matrix(), s2.matrix());
        assert!(matches!(sigma_lambda(&s1, &s2, 1.5), Err(Error::ParameterRange(_))));
        let vals = [3.0, 0.25, 1.5];
        let d = SpdMatrix::diagonal(&vals).unwrap();
        let lam = 0.3;
        let got = sigma_lambda(&d, &SpdMatrix::identity(3), lam).unwrap();
        for (k, &l) in vals.iter().enumerate() {
            assert!((got.get(k, k) - l / (lam + (1.0 - lam) * l)).abs() < 1e-14);
        }
    }

    #[test]
    fn lambda_star_examples() {
        let a = GenEigSpectrum::from_values(vec![0.5, 1.0, 2.0]);
        assert!((lambda_star(&a).unwrap() - 0.5).abs() < 1e-12);
        let b = GenEigSpectrum::from_values(vec![4.0, 0.5, 0.5]);
        let lb = lambda_star(&b).unwrap();
        assert!((lb - 0.5556).abs() < 1e-3);
        assert!(b.stationarity_residual(lb).abs() < 1e-10);
        let ones = GenEigSpectrum::from_values(vec![1.0; 4]);
        assert_eq!(lambda_star(&ones).unwrap(), 0.5);
        let bad = GenEigSpectrum::from_values(vec![2.0, 1.0]);
        assert!(matches!(lambda_star(&bad), Err(Error::EntropyMismatch { .. })));
    }

    #[test]
    fn chernoff_examples() {
        let (s1, s2) = fig3();
        let same = chernoff(&s1, &s1).unwrap();
        assert_eq!((same.ci, same.lambda_star), (0.0, 0.5));
        let r = chernoff(&s1, &s2).unwrap();
        assert!((r.lambda_star - 0.5).abs() < 1e-9);
        assert!((r.ci - 0.065_788).abs() < 1e-5);
        assert!((r.ci - 0.5 * 1.140_625f64.ln()).abs() < 1e-12);
        assert!((r.ci - r.ci_log_det).abs() < 1e-9);
        assert!(r.trace_residual < 1e-8 && (r.trace_1 - 3.0).abs() < 1e-6);

        let d1 = SpdMatrix::diagonal(&[4.0, 0.5, 0.5]).unwrap();
        let r = chernoff(&d1, &SpdMatrix::identity(3)).unwrap();
        assert!((r.ci - 0.1723).abs() < 1e-3);

        let big = SpdMatrix::diagonal(&[2.0, 1.0, 1.0]).unwrap();
        assert!(matches!(chernoff(&big, &SpdMatrix::identity(3)), Err(Error::EntropyMismatch { .. })));
    }

    #[test]
    fn reciprocal_pairing_examples() {
        assert!(reciprocal_pairing(&GenEigSpectrum::from_values(vec![0.5, 1.0, 2.0]), 1e-12));
        assert!(!reciprocal_pairing(&GenEigSpectrum::from_values(vec![4.0, 0.5, 0.5]), 1e-6));
    }

    #[test]
    fn multiplicity_grouping() {
        let s = GenEigSpectrum::from_values(vec![0.5, 1.0, 1.0 + 1e-12, 1.0, 2.0]);
        assert_eq!(s.multiplicities(1e-9).iter().map(|g| g.1).collect::<Vec<_>>(), vec![1, 3, 1]);
        assert_eq!(s.unit_count(1e-6), 3);
    }
}
