use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{AdmissibilityMethod, AdmissibilityReport};
use crate::{Error, Result};

/// Relative tolerance for the strict positive-definiteness test: the smallest
/// eigenvalue must exceed this fraction of the largest.
const PD_RELATIVE_TOL: f64 = 1e-10;

/// Number of quasi-random points scanned when certifying a non-centered mixture.
const DENSITY_SCAN_POINTS: usize = 1_000_000;

/// Two-component Gaussian mixture `alpha * N(mean1, diag(cov1)) + (1 - alpha) * N(mean2, cov2)`.
///
/// The first component doubles as the product reference measure `nu`, so
/// densities returned by [`mixture_density_wrt_nu`] are Radon-Nikodym
/// derivatives with respect to `N(mean1, diag(cov1))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureRecord", into = "MixtureRecord")]
pub struct GaussianMixtureSpec {
    alpha: f64,
    mean1: Vec<f64>,
    mean2: Vec<f64>,
    cov1_diag: Vec<f64>,
    cov2: DMatrix<f64>,
    chol2: DMatrix<f64>,
    cov2_inv: DMatrix<f64>,
    log_det2: f64,
}

/// JSON shape of a mixture specification.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MixtureRecord {
    alpha: f64,
    mean1: Vec<f64>,
    mean2: Vec<f64>,
    cov1_diag: Vec<f64>,
    cov2: Vec<Vec<f64>>,
}

impl TryFrom<MixtureRecord> for GaussianMixtureSpec {
    type Error = Error;

    fn try_from(r: MixtureRecord) -> Result<Self> {
        GaussianMixtureSpec::new(r.alpha, r.mean1, r.mean2, r.cov1_diag, r.cov2)
    }
}

impl From<GaussianMixtureSpec> for MixtureRecord {
    fn from(s: GaussianMixtureSpec) -> Self {
        let p = s.dim();
        MixtureRecord {
            alpha: s.alpha,
            cov2: (0..p)
                .map(|i| (0..p).map(|j| s.cov2[(i, j)]).collect())
                .collect(),
            mean1: s.mean1,
            mean2: s.mean2,
            cov1_diag: s.cov1_diag,
        }
    }
}

impl GaussianMixtureSpec {
    pub fn new(
        alpha: f64,
        mean1: Vec<f64>,
        mean2: Vec<f64>,
        cov1_diag: Vec<f64>,
        cov2: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let p = mean1.len();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidSpec(format!("alpha must lie in (0,1), got {alpha}")));
        }
        if p == 0 {
            return Err(Error::InvalidSpec("dimension must be at least 1".into()));
        }
        if mean2.len() != p || cov1_diag.len() != p || cov2.len() != p {
            return Err(Error::InvalidSpec(format!(
                "inconsistent dimensions: mean1 {p}, mean2 {}, cov1_diag {}, cov2 {} rows",
                mean2.len(),
                cov1_diag.len(),
                cov2.len()
            )));
        }
        if mean1.iter().chain(&mean2).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("means must be finite".into()));
        }
        if let Some(bad) = cov1_diag.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidSpec(format!(
                "reference variances must be strictly positive, got {bad}"
            )));
        }
        if let Some(row) = cov2.iter().position(|r| r.len() != p) {
            return Err(Error::InvalidSpec(format!("cov2 row {row} has wrong length")));
        }
        let cov2 = DMatrix::from_fn(p, p, |i, j| cov2[i][j]);
        if cov2.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("cov2 must be finite".into()));
        }
        let scale = cov2.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..p {
            for j in 0..i {
                if (cov2[(i, j)] - cov2[(j, i)]).abs() > 1e-12 * scale.max(1.0) {
                    return Err(Error::InvalidSpec(format!(
                        "cov2 is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let eig = SymmetricEigen::new(cov2.clone());
        let min_eig = eig.eigenvalues.min();
        if !(min_eig > 0.0) {
            return Err(Error::NotPositiveDefinite(format!(
                "cov2 has eigenvalue {min_eig:.6e}"
            )));
        }
        let chol = cov2
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("cov2 Cholesky factorization failed".into()))?;
        let chol2 = chol.l();
        let log_det2 = 2.0 * chol2.diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let cov2_inv = chol.inverse();
        Ok(Self {
            alpha,
            mean1,
            mean2,
            cov1_diag,
            cov2,
            chol2,
            cov2_inv,
            log_det2,
        })
    }

    /// Both components centered at the origin.
    pub fn centered(alpha: f64, cov1_diag: Vec<f64>, cov2: Vec<Vec<f64>>) -> Result<Self> {
        let p = cov1_diag.len();
        Self::new(alpha, vec![0.0; p], vec![0.0; p], cov1_diag, cov2)
    }

    /// Centered 2-D mixture with reference `N(0, I)` and
    /// `cov2 = [[omega1_sq, cov12], [cov12, omega2_sq]]`.
    pub fn centered_pair(alpha: f64, omega1_sq: f64, omega2_sq: f64, cov12: f64) -> Result<Self> {
        Self::centered(
            alpha,
            vec![1.0, 1.0],
            vec![vec![omega1_sq, cov12], vec![cov12, omega2_sq]],
        )
    }

    pub fn dim(&self) -> usize {
        self.mean1.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mean1(&self) -> &[f64] {
        &self.mean1
    }

    pub fn mean2(&self) -> &[f64] {
        &self.mean2
    }

    pub fn cov1_diag(&self) -> &[f64] {
        &self.cov1_diag
    }

    pub fn cov2(&self) -> &DMatrix<f64> {
        &self.cov2
    }

    pub fn is_centered(&self) -> bool {
        self.mean1 == self.mean2
    }

    /// Mean of the mixture law.
    pub fn mean(&self) -> Vec<f64> {
        self.mean1
            .iter()
            .zip(&self.mean2)
            .map(|(a, b)| self.alpha * a + (1.0 - self.alpha) * b)
            .collect()
    }

    /// Covariance matrix of the mixture law, including the spread of the means.
    pub fn covariance(&self) -> DMatrix<f64> {
        let p = self.dim();
        let mu = self.mean();
        DMatrix::from_fn(p, p, |i, j| {
            let d1 = (self.mean1[i] - mu[i]) * (self.mean1[j] - mu[j]);
            let d2 = (self.mean2[i] - mu[i]) * (self.mean2[j] - mu[j]);
            let s1 = if i == j { self.cov1_diag[i] } else { 0.0 };
            self.alpha * (s1 + d1) + (1.0 - self.alpha) * (self.cov2[(i, j)] + d2)
        })
    }

    /// Sub-mixture of the coordinates in `indices` (in that order).
    pub fn marginal(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() || indices.iter().any(|&i| i >= self.dim()) {
            return Err(Error::InvalidSpec(format!(
                "marginal indices {indices:?} out of range for dimension {}",
                self.dim()
            )));
        }
        let pick = |v: &[f64]| indices.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let cov2 = indices
            .iter()
            .map(|&i| indices.iter().map(|&j| self.cov2[(i, j)]).collect())
            .collect();
        Self::new(
            self.alpha,
            pick(&self.mean1),
            pick(&self.mean2),
            pick(&self.cov1_diag),
            cov2,
        )
    }

    fn log_reference_density(&self, x: &[f64]) -> f64 {
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for ((xi, mi), si) in x.iter().zip(&self.mean1).zip(&self.cov1_diag) {
            quad += (xi - mi) * (xi - mi) / si;
            log_det += si.ln();
        }
        -0.5 * (quad + log_det + self.dim() as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    fn log_second_density(&self, x: &[f64]) -> f64 {
        let d = DVector::from_iterator(self.dim(), x.iter().zip(&self.mean2).map(|(a, b)| a - b));
        let quad = (&self.cov2_inv * &d).dot(&d);
        -0.5 * (quad + self.log_det2 + self.dim() as f64 * (2.0 * std::f64::consts::PI).ln())
    }

    /// Lebesgue density of the mixture.
    pub fn lebesgue_density(&self, x: &[f64]) -> f64 {
        self.alpha * self.log_reference_density(x).exp()
            + (1.0 - self.alpha) * self.log_second_density(x).exp()
    }

    /// Density with respect to the reference measure `N(mean1, diag(cov1))`.
    pub fn density_wrt_nu(&self, x: &[f64]) -> f64 {
        let log_ratio = self.log_second_density(x) - self.log_reference_density(x);
        self.alpha + (1.0 - self.alpha) * log_ratio.exp()
    }

    /// `Omega^{-1} - Sigma^{-1}`, whose definiteness decides boundedness of the density.
    pub fn precision_gap(&self) -> DMatrix<f64> {
        let mut gap = self.cov2_inv.clone();
        for i in 0..self.dim() {
            gap[(i, i)] -= 1.0 / self.cov1_diag[i];
        }
        // symmetrize away rounding from the Cholesky inverse
        (&gap + gap.transpose()) * 0.5
    }

    /// `|Sigma|^{1/2} |Omega|^{-1/2}`.
    pub fn determinant_ratio(&self) -> f64 {
        let log_det1: f64 = self.cov1_diag.iter().map(|s| s.ln()).sum();
        (0.5 * (log_det1 - self.log_det2)).exp()
    }

    /// Draws `n` rows into `p` column vectors: component choice first, then the
    /// component draw.
    pub(crate) fn sample_columns(&self, n: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
        let p = self.dim();
        let mut cols = vec![Vec::with_capacity(n); p];
        let mut z = vec![0.0; p];
        let sd1: Vec<f64> = self.cov1_diag.iter().map(|v| v.sqrt()).collect();
        for _ in 0..n {
            let first = rng.random::<f64>() < self.alpha;
            z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
            if first {
                for j in 0..p {
                    cols[j].push(self.mean1[j] + sd1[j] * z[j]);
                }
            } else {
                for j in 0..p {
                    let mut v = self.mean2[j];
                    for k in 0..=j {
                        v += self.chol2[(j, k)] * z[k];
                    }
                    cols[j].push(v);
                }
            }
        }
        cols
    }
}

/// Draws `n` i.i.d. points from the mixture; returns `p` columns of length `n`.
/// Deterministic for a given seed.
pub fn sample_mixture(spec: &GaussianMixtureSpec, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::EmptyRequest("sample size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(spec.sample_columns(n, &mut rng))
}

/// Density of the mixture with respect to the reference measure at `x`.
pub fn mixture_density_wrt_nu(spec: &GaussianMixtureSpec, x: &[f64]) -> f64 {
    spec.density_wrt_nu(x)
}

/// Certifies the density lower-bound condition for a Gaussian mixture.
///
/// The density with respect to `nu` is bounded above iff `Omega^{-1} - Sigma^{-1}`
/// is positive definite; it is always bounded below by `alpha`. With
/// `M1 <= p_X <= M2` the certified constant is `M1 / M2^2`.
pub fn check_c2_gaussian(spec: &GaussianMixtureSpec) -> Result<AdmissibilityReport> {
    let gap = spec.precision_gap();
    if gap.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen("precision gap has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(gap, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Eigen("symmetric eigen-decomposition did not converge".into()))?;
    let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.total_cmp(b));
    let smallest = eigenvalues[0];
    let largest = *eigenvalues.last().unwrap();
    let positive_definite = largest > 0.0 && smallest > PD_RELATIVE_TOL * largest;
    let method = if spec.is_centered() {
        AdmissibilityMethod::GaussianPdTest
    } else {
        AdmissibilityMethod::DensityBounds
    };
    if !positive_definite {
        return Ok(AdmissibilityReport::fail(
            method,
            format!(
                "Omega^-1 - Sigma^-1 is not positive definite: eigenvalues {eigenvalues:?} \
                 (smallest must exceed {PD_RELATIVE_TOL:e} x largest)"
            ),
        ));
    }
    let m1 = spec.alpha();
    if spec.is_centered() {
        let m2 = spec.alpha() + (1.0 - spec.alpha()) * spec.determinant_ratio();
        let bound = (m1 / (m2 * m2)).min(1.0);
        return Ok(AdmissibilityReport::pass(
            method,
            bound,
            format!(
                "Omega^-1 - Sigma^-1 eigenvalues {eigenvalues:?}; M1 = {m1}, M2 = {m2}, M = M1/M2^2"
            ),
        ));
    }
    let m2 = scan_density_sup(spec);
    let bound = (m1 / (m2 * m2)).min(1.0);
    let mut report = AdmissibilityReport::pass(
        method,
        bound,
        format!(
            "non-centered mixture: M1 = alpha = {m1}, M2 = {m2} from a {DENSITY_SCAN_POINTS}-point \
             scan of the 6-sigma box plus the stationary point; M = M1/M2^2"
        ),
    );
    report.caveat = true;
    Ok(report)
}

/// Supremum of the density ratio: quasi-uniform Halton scan of the 6-sigma box,
/// plus the stationary point of the Gaussian ratio.
fn scan_density_sup(spec: &GaussianMixtureSpec) -> f64 {
    let p = spec.dim();
    let centre = spec.mean();
    let half: Vec<f64> = (0..p)
        .map(|i| {
            let spread = spec.cov1_diag[i].max(spec.cov2[(i, i)]).sqrt();
            6.0 * spread + (spec.mean1[i] - spec.mean2[i]).abs()
        })
        .collect();
    let primes = first_primes(p);
    let mut sup = f64::MIN;
    let mut x = vec![0.0; p];
    for k in 1..=DENSITY_SCAN_POINTS {
        for i in 0..p {
            let h = radical_inverse(k as u64, primes[i]);
            x[i] = centre[i] + (2.0 * h - 1.0) * half[i];
        }
        sup = sup.max(spec.density_wrt_nu(&x));
    }
    // stationary point of -(x-mu)' O^-1 (x-mu) + (x-m)' S^-1 (x-m)
    let gap = spec.precision_gap();
    let mu = DVector::from_column_slice(&spec.mean2);
    let s_inv_m = DVector::from_iterator(p, (0..p).map(|i| spec.mean1[i] / spec.cov1_diag[i]));
    let rhs = &spec.cov2_inv * mu - s_inv_m;
    if let Some(chol) = gap.cholesky() {
        let stationary = chol.solve(&rhs);
        sup = sup.max(spec.density_wrt_nu(stationary.as_slice()));
    }
    sup
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes.iter().all(|p| !candidate.is_multiple_of(*p)) {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

fn radical_inverse(mut k: u64, base: u64) -> f64 {
    let mut inv = 1.0 / base as f64;
    let mut value = 0.0;
    while k > 0 {
        value += (k % base) as f64 * inv;
        k /= base;
        inv /= base as f64;
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;

    fn bilinear_pair() -> GaussianMixtureSpec {
        GaussianMixtureSpec::centered_pair(0.2, 0.5, 0.5, 0.4).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GaussianMixtureSpec::centered_pair(0.0, 0.5, 0.5, 0.0).is_err());
        assert!(GaussianMixtureSpec::centered_pair(1.0, 0.5, 0.5, 0.0).is_err());
        assert!(matches!(
            GaussianMixtureSpec::centered_pair(0.2, 0.5, 0.5, 0.6),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(GaussianMixtureSpec::centered(0.2, vec![1.0, -1.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).is_err());
        assert!(GaussianMixtureSpec::centered(0.2, vec![1.0, 1.0], vec![vec![1.0, 0.1], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn zero_samples_rejected() {
        assert!(matches!(sample_mixture(&bilinear_pair(), 0, 1), Err(Error::EmptyRequest(_))));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_mixture(&bilinear_pair(), 50, 9).unwrap();
        let b = sample_mixture(&bilinear_pair(), 50, 9).unwrap();
        let c = sample_mixture(&bilinear_pair(), 50, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn degenerate_mixture_mean() {
        let spec = GaussianMixtureSpec::new(
            1.0 - 1e-12,
            vec![1.5, -2.0],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![vec![0.5, 0.0], vec![0.0, 0.5]],
        )
        .unwrap();
        let n = 10_000;
        let cols = sample_mixture(&spec, n, 3).unwrap();
        let tol = 4.0 / (n as f64).sqrt();
        assert!((stats::mean(&cols[0]) - 1.5).abs() < tol);
        assert!((stats::mean(&cols[1]) + 2.0).abs() < tol);
    }

    #[test]
    fn density_equals_one_when_components_coincide() {
        let spec = GaussianMixtureSpec::centered(
            0.3,
            vec![1.0, 2.0],
            vec![vec![1.0, 0.0], vec![0.0, 2.0]],
        )
        .unwrap();
        for x in [[0.0, 0.0], [1.0, -3.0], [5.0, 2.5]] {
            assert!((spec.density_wrt_nu(&x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_at_origin_matches_closed_form() {
        // alpha + (1 - alpha) |Sigma|^{1/2} |Omega|^{-1/2}, |Omega| = 0.25 - 0.16
        let expected = 0.2 + 0.8 * (1.0f64 / 0.09).sqrt();
        let got = mixture_density_wrt_nu(&bilinear_pair(), &[0.0, 0.0]);
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        assert!((got - 2.8667).abs() < 1e-4);
    }

    #[test]
    fn density_tends_to_alpha_far_out() {
        let spec = bilinear_pair();
        for dir in [[1.0, 0.0], [0.6, 0.8], [-1.0, 1.0]] {
            let x = [40.0 * dir[0], 40.0 * dir[1]];
            assert!((spec.density_wrt_nu(&x) - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn certifies_bilinear_pair() {
        let report = check_c2_gaussian(&bilinear_pair()).unwrap();
        assert!(report.holds);
        assert_eq!(report.method, AdmissibilityMethod::GaussianPdTest);
        let m2 = 0.2 + 0.8 / 0.3;
        assert!((report.bound_m.unwrap() - 0.2 / (m2 * m2)).abs() < 1e-12);
        let eig = SymmetricEigen::new(bilinear_pair().precision_gap()).eigenvalues;
        let mut e: Vec<f64> = eig.iter().copied().collect();
        e.sort_by(|a, b| a.total_cmp(b));
        assert!((e[0] - 1.0 / 9.0).abs() < 1e-9);
        assert!((e[1] - 9.0).abs() < 1e-9);
    }

    #[test]
    fn wider_second_component_fails() {
        // omega1^2 > sigma1^2
        let spec = GaussianMixtureSpec::centered_pair(0.2, 1.3, 0.5, 0.1).unwrap();
        let report = check_c2_gaussian(&spec).unwrap();
        assert!(!report.holds);
        assert!(report.bound_m.is_none());
        assert!(report.details.contains("not positive definite"));
    }

    #[test]
    fn equal_components_fail_strictly() {
        let spec = GaussianMixtureSpec::centered_pair(0.2, 1.0, 1.0, 0.0).unwrap();
        assert!(!check_c2_gaussian(&spec).unwrap().holds);
    }

    #[test]
    fn non_centered_uses_density_scan() {
        let spec = GaussianMixtureSpec::new(
            0.4,
            vec![0.0, 0.0],
            vec![0.3, -0.2],
            vec![1.0, 1.0],
            vec![vec![0.5, 0.1], vec![0.1, 0.5]],
        )
        .unwrap();
        let report = check_c2_gaussian(&spec).unwrap();
        assert!(report.holds);
        assert!(report.caveat);
        assert_eq!(report.method, AdmissibilityMethod::DensityBounds);
        let m = report.bound_m.unwrap();
        assert!(m > 0.0 && m <= 1.0);
    }

    #[test]
    fn marginal_drops_coordinates() {
        let spec = GaussianMixtureSpec::centered(
            0.2,
            vec![1.0, 1.0, 1.0],
            vec![vec![0.15, 0.3, 0.0], vec![0.3, 0.85, 0.0], vec![0.0, 0.0, 0.75]],
        )
        .unwrap();
        let m = spec.marginal(&[2]).unwrap();
        assert_eq!(m.dim(), 1);
        assert!((m.cov2()[(0, 0)] - 0.75).abs() < 1e-15);
        assert!(spec.marginal(&[3]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = bilinear_pair();
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"cov1_diag\""));
        let back: GaussianMixtureSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(back, spec);
        let bad = r#"{"alpha":0.2,"mean1":[0,0],"mean2":[0,0],"cov1_diag":[1,1],"cov2":[[0.5,0.9],[0.9,0.5]]}"#;
        assert!(serde_json::from_str::<GaussianMixtureSpec>(bad).is_err());
    }
}
