//! Leave-one-out local polynomial regression.
//!
//! At a query point `x` the conditional mean `E(Y | X = x)` is the intercept of
//! a kernel-weighted least-squares polynomial fit in `X_i - x`. With the normal
//! matrix `S_n(x) = sum_i w_i b_i b_i'` the fit that omits observation `k` is
//! obtained from `S_n^{-1}` by a Sherman-Morrison rank-one downdate
//!
//! ```text
//! S_{-k}^{-1} = S_n^{-1} + S_n^{-1} phi phi' S_n^{-1} / (1 - phi' S_n^{-1} phi),   phi = sqrt(w_k) b_k
//! ```
//!
//! so each of the `n` leave-one-out estimates costs one small inversion.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{stats, Error, Result};

/// Downdates whose denominator (one minus the own leverage) falls below this
/// lose digits to cancellation and are redone by a direct solve.
const DOWNDATE_TOL: f64 = 1e-2;

/// Squared Cholesky pivot ratio below which the ridge is switched on.
const CONDITION_FLOOR: f64 = 1e-10;

/// Extrapolation limit used by the decomposition defaults. At squared
/// Mahalanobis distance `D^2` the local linear intercept has roughly `1 + D^2`
/// times the variance of the local constant one, so 1 caps the inflation at two.
pub const DEFAULT_EXTRAPOLATION_GUARD: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandwidthRule {
    Silverman,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    /// Total polynomial degree `q` (at most 3).
    pub degree: usize,
    pub bandwidth_rule: BandwidthRule,
    /// One bandwidth per conditioning dimension; required iff the rule is `Fixed`.
    pub fixed_h: Option<Vec<f64>>,
    pub kernel: Kernel,
    /// Relative ridge: `ridge * trace(S_n) / basis_size` is added to the
    /// non-intercept diagonal entries of near-collinear normal matrices.
    pub ridge: f64,
    /// When set, a query whose squared Mahalanobis distance from the
    /// kernel-weighted cloud of the other points exceeds this value gets the
    /// local constant fit instead of an extrapolated polynomial.
    #[serde(default)]
    pub extrapolation_guard: Option<f64>,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            degree: 1,
            bandwidth_rule: BandwidthRule::Silverman,
            fixed_h: None,
            kernel: Kernel::Gaussian,
            ridge: 1e-8,
            extrapolation_guard: None,
        }
    }
}

impl SmootherConfig {
    /// The default configuration with [`DEFAULT_EXTRAPOLATION_GUARD`] switched on.
    pub fn guarded() -> Self {
        Self {
            extrapolation_guard: Some(DEFAULT_EXTRAPOLATION_GUARD),
            ..Self::default()
        }
    }

    pub fn fixed(h: Vec<f64>) -> Self {
        Self {
            bandwidth_rule: BandwidthRule::Fixed,
            fixed_h: Some(h),
            ..Self::default()
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        if self.degree > 3 {
            return Err(Error::InvalidSpec(format!(
                "polynomial degree must be at most 3, got {}",
                self.degree
            )));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidSpec(format!("ridge must be non-negative, got {}", self.ridge)));
        }
        if let Some(g) = self.extrapolation_guard {
            if !(g > 0.0) {
                return Err(Error::InvalidSpec(format!("extrapolation guard must be positive, got {g}")));
            }
        }
        match (self.bandwidth_rule, &self.fixed_h) {
            (BandwidthRule::Silverman, None) => Ok(()),
            (BandwidthRule::Silverman, Some(_)) => Err(Error::InvalidSpec(
                "fixed_h given but the bandwidth rule is silverman".into(),
            )),
            (BandwidthRule::Fixed, None) => {
                Err(Error::InvalidSpec("fixed bandwidth rule needs fixed_h".into()))
            }
            (BandwidthRule::Fixed, Some(h)) => {
                if h.len() != dims {
                    return Err(Error::InvalidSpec(format!(
                        "fixed_h has {} entries for {dims} conditioning dimensions",
                        h.len()
                    )));
                }
                if h.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidSpec("fixed bandwidths must be positive".into()));
                }
                Ok(())
            }
        }
    }

    /// Per-dimension bandwidths for the given conditioning columns.
    pub fn bandwidths(&self, x_cond: &[&[f64]]) -> Result<Vec<f64>> {
        self.validate(x_cond.len())?;
        match &self.fixed_h {
            Some(h) => Ok(h.clone()),
            None => x_cond
                .iter()
                .enumerate()
                .map(|(j, col)| {
                    bandwidth(col).map_err(|e| match e {
                        Error::DegenerateConditioning { .. } => {
                            Error::DegenerateConditioning { column: j }
                        }
                        other => other,
                    })
                })
                .collect(),
        }
    }
}

/// Silverman's rule `1.06 * min(sd, IQR / 1.349) * n^{-1/5}`.
///
/// Falls back to the standard deviation alone when the interquartile range is zero.
pub fn bandwidth(x_col: &[f64]) -> Result<f64> {
    let n = x_col.len();
    if n < 2 {
        return Err(Error::InvalidSpec(format!(
            "bandwidth needs at least 2 observations, got {n}"
        )));
    }
    let sd = stats::sample_std(x_col);
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::DegenerateConditioning { column: 0 });
    }
    let mut sorted = x_col.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let iqr = stats::quantile_sorted(&sorted, 0.75) - stats::quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.349) } else { sd };
    Ok(1.06 * spread * (n as f64).powf(-0.2))
}

/// Monomials of total degree at most `q` in `d` variables, intercept first.
#[derive(Debug, Clone)]
struct Basis {
    exponents: Vec<Vec<u32>>,
}

impl Basis {
    fn new(dims: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        for total in 0..=degree as u32 {
            match dims {
                1 => exponents.push(vec![total]),
                2 => {
                    for a in (0..=total).rev() {
                        exponents.push(vec![a, total - a]);
                    }
                }
                _ => unreachable!("dimension checked by caller"),
            }
        }
        Self { exponents }
    }

    fn len(&self) -> usize {
        self.exponents.len()
    }

    fn eval(&self, z: &[f64], out: &mut [f64]) {
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = z.iter().zip(e).map(|(v, &p)| v.powi(p as i32)).product();
        }
    }
}

/// Kernel weights and basis rows around one query point.
struct LocalDesign {
    weights: Vec<f64>,
    /// Row-major `n x L`, basis evaluated at `(X_i - x) / h`.
    rows: Vec<f64>,
    len: usize,
}

struct Problem<'a> {
    x: &'a [&'a [f64]],
    h: Vec<f64>,
    basis: Basis,
    ridge: f64,
    guard: Option<f64>,
}

impl<'a> Problem<'a> {
    fn new(x: &'a [&'a [f64]], cfg: &SmootherConfig) -> Result<Self> {
        let dims = x.len();
        if !(1..=2).contains(&dims) {
            return Err(Error::InvalidSpec(format!(
                "conditioning dimension must be 1 or 2, got {dims}"
            )));
        }
        let n = x[0].len();
        if x.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidSpec("conditioning columns differ in length".into()));
        }
        let h = cfg.bandwidths(x)?;
        let basis = Basis::new(dims, cfg.degree);
        if n < 10 * basis.len() {
            return Err(Error::InvalidSpec(format!(
                "need at least {} observations for {} basis terms, got {n}",
                10 * basis.len(),
                basis.len()
            )));
        }
        Ok(Self {
            x,
            h,
            basis,
            ridge: cfg.ridge,
            guard: cfg.extrapolation_guard,
        })
    }

    fn n(&self) -> usize {
        self.x[0].len()
    }

    fn design(&self, k: usize) -> LocalDesign {
        let n = self.n();
        let len = self.basis.len();
        let dims = self.x.len();
        let mut weights = Vec::with_capacity(n);
        let mut rows = vec![0.0; n * len];
        let mut z = [0.0; 2];
        for i in 0..n {
            let mut log_w = 0.0;
            for j in 0..dims {
                z[j] = (self.x[j][i] - self.x[j][k]) / self.h[j];
                log_w -= 0.5 * z[j] * z[j];
            }
            weights.push(log_w.exp());
            self.basis.eval(&z[..dims], &mut rows[i * len..(i + 1) * len]);
        }
        LocalDesign { weights, rows, len }
    }

    /// `S_{-k} = sum_{i != k} w_i b_i b_i'`, the query's own term `w_k b_k b_k'`,
    /// and the ridge derived from the full sum. The two parts are accumulated
    /// separately so that a query far from every other point keeps its tiny
    /// remaining mass instead of losing it to cancellation.
    fn normal_parts(&self, d: &LocalDesign, k: usize) -> (DMatrix<f64>, DMatrix<f64>, f64) {
        let len = d.len;
        let mut loo = DMatrix::zeros(len, len);
        let mut own = DMatrix::zeros(len, len);
        for (i, w) in d.weights.iter().enumerate() {
            let b = &d.rows[i * len..(i + 1) * len];
            let target = if i == k { &mut own } else { &mut loo };
            for r in 0..len {
                for c in 0..=r {
                    target[(r, c)] += w * b[r] * b[c];
                }
            }
        }
        for m in [&mut loo, &mut own] {
            for r in 0..len {
                for c in 0..r {
                    m[(c, r)] = m[(r, c)];
                }
            }
        }
        let ridge = self.ridge * (loo.trace() + own.trace()) / len as f64;
        (loo, own, ridge)
    }

    /// Squared Mahalanobis distance between the query and the kernel-weighted
    /// mean of the other points, in the weighted covariance of those points.
    /// Infinite when that covariance is singular.
    fn extrapolation_distance(&self, loo: &DMatrix<f64>) -> f64 {
        let dims = self.x.len();
        let mass = loo[(0, 0)];
        if !(mass > 0.0) {
            return f64::INFINITY;
        }
        // linear monomials sit right after the intercept
        let zbar = DVector::from_fn(dims, |r, _| loo[(r + 1, 0)] / mass);
        let cov = DMatrix::from_fn(dims, dims, |r, c| loo[(r + 1, c + 1)] / mass - zbar[r] * zbar[c]);
        match cov.cholesky() {
            Some(ch) => zbar.dot(&ch.solve(&zbar)),
            None => f64::INFINITY,
        }
    }

    /// `S_{-k}^{-1} e_1`, the vector whose inner products with `w_i b_i` give the
    /// leave-one-out smoothing weights at query `k`.
    ///
    /// `S_{-k}^{-1}` comes from `S_n^{-1}` by the Sherman-Morrison downdate; a
    /// near-zero denominator or a singular `S_n` falls back to inverting
    /// `S_{-k}` directly. When the guard is on and the query lies too far
    /// outside the other points, the local constant fit is used instead.
    fn loo_intercept_direction(&self, k: usize, d: &LocalDesign) -> Result<DVector<f64>> {
        let len = d.len;
        let (loo, own, ridge) = self.normal_parts(d, k);
        let e1 = DVector::from_fn(len, |i, _| if i == 0 { 1.0 } else { 0.0 });
        if let Some(limit) = self.guard {
            if len > 1 && self.extrapolation_distance(&loo) > limit {
                let mass = loo[(0, 0)];
                if !(mass > 0.0) {
                    return Err(Error::SingularNormalMatrix { query: k });
                }
                // b_i[0] = 1, so the weights become w_i / mass
                return Ok(e1 / mass);
            }
        }
        if let Some(a_inv) = invert(&loo + &own, ridge) {
            let w = d.weights[k].sqrt();
            let phi = DVector::from_iterator(len, d.rows[k * len..(k + 1) * len].iter().map(|b| w * b));
            let g = &a_inv * &phi;
            let denom = 1.0 - phi.dot(&g);
            if denom.abs() >= DOWNDATE_TOL {
                let a_inv_e1 = a_inv.column(0).into_owned();
                return Ok(a_inv_e1 + &g * (g[0] / denom));
            }
        }
        invert(loo, ridge)
            .map(|inv| inv * e1)
            .ok_or(Error::SingularNormalMatrix { query: k })
    }

    fn loo_row(&self, k: usize) -> Result<Vec<f64>> {
        let d = self.design(k);
        let dir = self.loo_intercept_direction(k, &d)?;
        let len = d.len;
        Ok((0..self.n())
            .map(|i| {
                if i == k {
                    0.0
                } else {
                    let b = &d.rows[i * len..(i + 1) * len];
                    d.weights[i] * b.iter().zip(dir.iter()).map(|(x, y)| x * y).sum::<f64>()
                }
            })
            .collect())
    }

    /// Intercept of the fit omitting `k`.
    fn loo_estimate(&self, k: usize, y: &[f64]) -> Result<f64> {
        let d = self.design(k);
        let dir = self.loo_intercept_direction(k, &d)?;
        let len = d.len;
        Ok((0..self.n())
            .filter(|&i| i != k)
            .map(|i| {
                let b = &d.rows[i * len..(i + 1) * len];
                d.weights[i] * b.iter().zip(dir.iter()).map(|(x, y)| x * y).sum::<f64>() * y[i]
            })
            .sum())
    }
}

/// Inverts a normal matrix; the ridge is added to the non-intercept diagonal
/// only when the Cholesky pivots show near-collinearity.
fn invert(s: DMatrix<f64>, ridge: f64) -> Option<DMatrix<f64>> {
    if s.iter().any(|v| !v.is_finite()) {
        return None;
    }
    if let Some(c) = s.clone().cholesky() {
        let pivots = c.l_dirty().diagonal();
        let lo = pivots.min();
        let hi = pivots.max();
        if lo * lo > CONDITION_FLOOR * hi * hi {
            return Some(c.inverse());
        }
    }
    let mut r = s;
    for i in 1..r.nrows() {
        r[(i, i)] += ridge;
    }
    match r.clone().cholesky() {
        Some(c) => Some(c.inverse()),
        None => r.try_inverse(),
    }
}

/// Leave-one-out estimates `m^(X_k)` of `E(Y | X_cond)` at every observation.
///
/// `x_cond` holds one or two conditioning columns of equal length `n`.
pub fn loo_conditional_mean(x_cond: &[&[f64]], y: &[f64], cfg: &SmootherConfig) -> Result<Vec<f64>> {
    let problem = Problem::new(x_cond, cfg)?;
    if y.len() != problem.n() {
        return Err(Error::InvalidSpec(format!(
            "response has {} entries for {} observations",
            y.len(),
            problem.n()
        )));
    }
    (0..problem.n())
        .into_par_iter()
        .map(|k| problem.loo_estimate(k, y))
        .collect()
}

/// The leave-one-out smoother as an explicit `n x n` linear operator.
///
/// Bandwidths and design are fixed at construction, so repeated application to
/// different responses (as in the Gauss-Seidel sweeps) costs one matrix-vector
/// product each.
#[derive(Debug, Clone)]
pub struct LooSmoother {
    n: usize,
    bandwidths: Vec<f64>,
    /// Row-major; row `k` holds the weights producing `m^(X_k)`, zero at `k`.
    weights: Vec<f64>,
}

impl LooSmoother {
    pub fn fit(x_cond: &[&[f64]], cfg: &SmootherConfig) -> Result<Self> {
        let problem = Problem::new(x_cond, cfg)?;
        let n = problem.n();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| problem.loo_row(k))
            .collect::<Result<_>>()?;
        Ok(Self {
            n,
            bandwidths: problem.h.clone(),
            weights: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.n..(k + 1) * self.n]
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.n, "response length mismatch");
        self.weights
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(y).map(|(w, v)| w * v).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn normals(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.sample(StandardNormal)).collect()
    }

    #[test]
    fn silverman_on_standard_normal() {
        let x = normals(1000, 1);
        let h = bandwidth(&x).unwrap();
        // 1.06 * 1000^{-1/5} = 0.2661 with unit spread
        assert!((h - 0.2661).abs() < 0.02, "{h}");
    }

    #[test]
    fn constant_column_is_degenerate() {
        assert!(matches!(
            bandwidth(&[2.0; 50]),
            Err(Error::DegenerateConditioning { .. })
        ));
    }

    #[test]
    fn two_point_bandwidth_is_finite() {
        let h = bandwidth(&[0.0, 1.0]).unwrap();
        assert!(h > 0.0 && h.is_finite());
    }

    #[test]
    fn constant_response_reproduced() {
        let x = normals(100, 2);
        for degree in 0..=3 {
            let cfg = SmootherConfig { degree, ..Default::default() };
            let m = loo_conditional_mean(&[&x], &[3.5; 100], &cfg).unwrap();
            let worst = m.iter().map(|v| (v - 3.5).abs()).fold(0.0, f64::max);
            assert!(worst < 1e-9, "degree {degree}: {worst}");
        }
    }

    #[test]
    fn local_linear_reproduces_lines() {
        let x = normals(200, 3);
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let m = loo_conditional_mean(&[&x], &y, &SmootherConfig::default()).unwrap();
        for (a, b) in m.iter().zip(&y) {
            assert!((a - b).abs() < 1e-8, "{a} {b} {}", a - b);
        }
    }

    #[test]
    fn operator_matches_direct_estimates() {
        let x1 = normals(150, 4);
        let x2 = normals(150, 5);
        let y: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| (a * b).sin() + a).collect();
        let cfg = SmootherConfig::default();
        let op = LooSmoother::fit(&[&x1, &x2], &cfg).unwrap();
        let direct = loo_conditional_mean(&[&x1, &x2], &y, &cfg).unwrap();
        for (a, b) in op.apply(&y).iter().zip(&direct) {
            assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
        }
        assert_eq!(op.row(7)[7], 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(SmootherConfig { degree: 4, ..Default::default() }.validate(1).is_err());
        assert!(SmootherConfig { ridge: -1.0, ..Default::default() }.validate(1).is_err());
        assert!(SmootherConfig::fixed(vec![0.3]).validate(2).is_err());
        assert!(SmootherConfig::fixed(vec![0.0]).validate(1).is_err());
        let cfg = SmootherConfig { fixed_h: Some(vec![0.2]), ..SmootherConfig::default() };
        assert!(cfg.validate(1).is_err());
        assert!(SmootherConfig::fixed(vec![0.3, 0.4]).validate(2).is_ok());
    }

    #[test]
    fn too_few_points_rejected() {
        let x = normals(15, 6);
        assert!(loo_conditional_mean(&[&x], &x, &SmootherConfig::default()).is_err());
    }

    #[test]
    fn reports_degenerate_column_index() {
        let x = normals(100, 7);
        let c = vec![1.0; 100];
        match LooSmoother::fit(&[&x, &c], &SmootherConfig::default()) {
            Err(Error::DegenerateConditioning { column }) => assert_eq!(column, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn guard_replaces_extrapolation_by_local_mean() {
        let mut x = normals(200, 10);
        x[0] = 9.0;
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
        let guarded = loo_conditional_mean(&[&x], &y, &SmootherConfig::guarded()).unwrap();
        // far from everything: the nearest points dominate the local mean
        let nearest = x[1..].iter().fold(f64::MIN, |a, &b| a.max(b));
        assert!(guarded[0] <= 2.0 * nearest + 1.0 + 1e-9, "{}", guarded[0]);
        // interior points keep the exact local linear fit
        let interior = (1..200).filter(|&k| x[k].abs() < 1.0);
        for k in interior {
            assert!((guarded[k] - y[k]).abs() < 1e-8);
        }
        assert!(SmootherConfig { extrapolation_guard: Some(0.0), ..Default::default() }.validate(1).is_err());
    }

    #[test]
    fn loo_ignores_own_response() {
        let x = normals(80, 8);
        let mut y = normals(80, 9);
        let cfg = SmootherConfig::default();
        let before = loo_conditional_mean(&[&x], &y, &cfg).unwrap();
        y[10] += 5.0;
        let after = loo_conditional_mean(&[&x], &y, &cfg).unwrap();
        assert!((before[10] - after[10]).abs() < 1e-12);
        assert!((0..80).filter(|&j| j != 10).all(|j| before[j] != after[j]));
    }
}
