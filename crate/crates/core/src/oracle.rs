//! Ground truth for the benchmark models.
//!
//! Three kinds of reference values:
//!
//! - closed forms from Gaussian-mixture moments ([`bilinear_model_indices`],
//!   [`linear4_model_indices`]);
//! - a population HOFD computed by Gauss-Seidel on a fine tensor grid of the
//!   bivariate density ([`grid_hofd`], [`ishigami_indices`]);
//! - large-sample reruns of the estimation pipeline ([`brute_force_indices`]).
//!
//! The bilinear closed form takes `eta1 = X1`, `eta2 = X2`,
//! `eta12 = X1 X2 - E(X1 X2)` as the components. Under a mixture with
//! correlated second component `E(X1 X2 | X1)` is not zero, so these are not
//! hierarchically orthogonal and the grid solution differs from them.

use serde::{Deserialize, Serialize};

use crate::distributions::{GaussianMixtureSpec, IpdvLaw};
use crate::hofd::{ipdv_decompose, GaussSeidelConfig};
use crate::indices::{generalized_indices, PairIndex, SensitivityReport, VariableIndex};
use crate::{stats, Error, Result};

/// Second and fourth-order moments of a zero-mean bivariate mixture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureMoments {
    pub variances: [f64; 2],
    pub covariance: f64,
    /// `E[X1^2 X2^2]`.
    pub fourth_product: f64,
}

impl MixtureMoments {
    /// Uses `E[X^2 Y^2] = Vx Vy + 2 Cov^2` within each Gaussian component.
    pub fn of(spec: &GaussianMixtureSpec) -> Result<Self> {
        require_zero_mean(spec, 2)?;
        let a = spec.alpha();
        let s = spec.cov1_diag();
        let o = spec.cov2();
        let variances = [a * s[0] + (1.0 - a) * o[(0, 0)], a * s[1] + (1.0 - a) * o[(1, 1)]];
        let covariance = (1.0 - a) * o[(0, 1)];
        let fourth_product =
            a * s[0] * s[1] + (1.0 - a) * (o[(0, 0)] * o[(1, 1)] + 2.0 * o[(0, 1)] * o[(0, 1)]);
        Ok(Self {
            variances,
            covariance,
            fourth_product,
        })
    }

    /// `V(X1 X2)`.
    pub fn product_variance(&self) -> f64 {
        self.fourth_product - self.covariance * self.covariance
    }
}

fn require_zero_mean(spec: &GaussianMixtureSpec, dim: usize) -> Result<()> {
    if spec.dim() != dim {
        return Err(Error::InvalidSpec(format!(
            "expected a {dim}-dimensional mixture, got dimension {}",
            spec.dim()
        )));
    }
    if spec.mean1().iter().chain(spec.mean2()).any(|&m| m != 0.0) {
        return Err(Error::InvalidSpec("closed-form moments need zero-mean components".into()));
    }
    Ok(())
}

fn pair_report(
    columns: (usize, usize),
    v: [f64; 2],
    c: f64,
    v12: f64,
    v_y: f64,
) -> (Vec<VariableIndex>, PairIndex) {
    let vars = [columns.0, columns.1]
        .into_iter()
        .zip(v)
        .map(|(column, v)| VariableIndex {
            column,
            s: (v + c) / v_y,
            s_v: v / v_y,
            s_c: c / v_y,
        })
        .collect();
    (vars, PairIndex { columns, s12: v12 / v_y })
}

fn assemble(variables: Vec<VariableIndex>, pairs: Vec<PairIndex>, between: f64, v_y: f64) -> SensitivityReport {
    let mut variables = variables;
    variables.sort_by_key(|v| v.column);
    let sum_all =
        variables.iter().map(|v| v.s).sum::<f64>() + pairs.iter().map(|p| p.s12).sum::<f64>() + between;
    SensitivityReport {
        variables,
        pairs,
        between_pairs: between,
        total_variance: v_y,
        sum_all,
    }
}

/// Indices of `Y = X1 + X2 + X1 X2` from the components `X1`, `X2`,
/// `X1 X2 - E(X1 X2)`. Odd moments vanish, so `Cov(Xi, X1 X2) = 0`.
pub fn bilinear_model_indices(spec: &GaussianMixtureSpec) -> Result<SensitivityReport> {
    let m = MixtureMoments::of(spec)?;
    let v12 = m.product_variance();
    let v_y = m.variances[0] + m.variances[1] + 2.0 * m.covariance + v12;
    let (vars, pair) = pair_report((0, 1), m.variances, m.covariance, v12, v_y);
    Ok(assemble(vars, vec![pair], 0.0, v_y))
}

/// Indices of `Y = c1 X1 + c2 X2 + c3 X3 + c4 X4` with independent pairs
/// `(X1, X3) ~ spec1` and `(X2, X4) ~ spec2`. The model is additive, so its
/// decomposition is exact and both interaction indices are zero.
pub fn linear4_model_indices(
    spec1: &GaussianMixtureSpec,
    spec2: &GaussianMixtureSpec,
    coeffs: [f64; 4],
) -> Result<SensitivityReport> {
    let mut parts = Vec::new();
    let mut v_y = 0.0;
    for (spec, (i, j)) in [(spec1, (0, 2)), (spec2, (1, 3))] {
        let m = MixtureMoments::of(spec)?;
        let (a, b) = (coeffs[i], coeffs[j]);
        let v = [a * a * m.variances[0], b * b * m.variances[1]];
        let c = a * b * m.covariance;
        v_y += v[0] + v[1] + 2.0 * c;
        parts.push(((i, j), v, c));
    }
    if v_y <= 0.0 {
        return Err(Error::DegenerateOutput);
    }
    let mut variables = Vec::new();
    let mut pairs = Vec::new();
    for (columns, v, c) in parts {
        let (vars, pair) = pair_report(columns, v, c, 0.0, v_y);
        variables.extend(vars);
        pairs.push(pair);
    }
    Ok(assemble(variables, pairs, 0.0, v_y))
}

/// Moments of the population HOFD of `f(X1, X2)` on a discretized density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHofd {
    pub mean: f64,
    pub var_eta1: f64,
    pub var_eta2: f64,
    pub cov_eta1_eta2: f64,
    pub var_eta12: f64,
    /// `V(f(X1, X2))`.
    pub var_target: f64,
    /// Largest of `|Cov(eta1, eta12)|`, `|Cov(eta2, eta12)|` relative to `var_target`.
    pub hierarchical_residual: f64,
    pub iterations: usize,
}

impl GridHofd {
    /// Indices on columns `(0, 1)` when `f` is the whole model.
    pub fn report(&self) -> SensitivityReport {
        let v_y = self.var_target;
        let (vars, pair) = pair_report(
            (0, 1),
            [self.var_eta1, self.var_eta2],
            self.cov_eta1_eta2,
            self.var_eta12,
            v_y,
        );
        assemble(vars, vec![pair], 0.0, v_y)
    }
}

/// Tensor grid over a box holding all but a negligible part of the mass.
struct Grid {
    x1: Vec<f64>,
    x2: Vec<f64>,
    /// Row-major `p[i * k + j]`, normalized to sum to one.
    p: Vec<f64>,
}

impl Grid {
    fn new(spec: &GaussianMixtureSpec, k: usize) -> Self {
        let axis = |c: usize| {
            let sd = spec.cov1_diag()[c].max(spec.cov2()[(c, c)]).sqrt();
            let lo = spec.mean1()[c].min(spec.mean2()[c]) - 9.0 * sd;
            let hi = spec.mean1()[c].max(spec.mean2()[c]) + 9.0 * sd;
            (0..k)
                .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
                .collect::<Vec<f64>>()
        };
        let (x1, x2) = (axis(0), axis(1));
        let mut p: Vec<f64> = x1
            .iter()
            .flat_map(|&a| x2.iter().map(move |&b| (a, b)))
            .map(|(a, b)| spec.lebesgue_density(&[a, b]))
            .collect();
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= total);
        Self { x1, x2, p }
    }
}

/// Population HOFD of `f` under a bivariate mixture by Gauss-Seidel on a
/// `nodes x nodes` grid. The conditional expectations are exact sums over
/// the grid, so the only approximation is the discretization of the density.
pub fn grid_hofd(
    spec: &GaussianMixtureSpec,
    f: impl Fn(f64, f64) -> f64,
    nodes: usize,
) -> Result<GridHofd> {
    if spec.dim() != 2 {
        return Err(Error::InvalidSpec(format!("grid oracle needs a bivariate law, got dimension {}", spec.dim())));
    }
    if nodes < 11 {
        return Err(Error::InvalidSpec(format!("grid needs at least 11 nodes per axis, got {nodes}")));
    }
    let k = nodes;
    let grid = Grid::new(spec, k);
    let p = &grid.p;
    let fv: Vec<f64> = grid
        .x1
        .iter()
        .flat_map(|&a| grid.x2.iter().map(move |&b| (a, b)))
        .map(|(a, b)| f(a, b))
        .collect();
    let mean: f64 = p.iter().zip(&fv).map(|(w, v)| w * v).sum();
    let t: Vec<f64> = fv.iter().map(|v| v - mean).collect();
    let var_target: f64 = p.iter().zip(&t).map(|(w, v)| w * v * v).sum();
    if !(var_target > 0.0) {
        return Err(Error::DegenerateOutput);
    }

    let p1: Vec<f64> = (0..k).map(|i| p[i * k..(i + 1) * k].iter().sum()).collect();
    let p2: Vec<f64> = (0..k).map(|j| (0..k).map(|i| p[i * k + j]).sum()).collect();
    let mut eta1 = vec![0.0; k];
    let mut eta2 = vec![0.0; k];
    let tol = 1e-14 * var_target.sqrt();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut change = 0.0f64;
        // E(T - eta2 | X1); T is centered and so is eta2, so no constant to remove
        let next1: Vec<f64> = (0..k)
            .map(|i| {
                if p1[i] <= 0.0 {
                    return 0.0;
                }
                (0..k).map(|j| p[i * k + j] * (t[i * k + j] - eta2[j])).sum::<f64>() / p1[i]
            })
            .collect();
        for i in 0..k {
            change = change.max((next1[i] - eta1[i]).abs());
        }
        eta1 = next1;
        let next2: Vec<f64> = (0..k)
            .map(|j| {
                if p2[j] <= 0.0 {
                    return 0.0;
                }
                (0..k).map(|i| p[i * k + j] * (t[i * k + j] - eta1[i])).sum::<f64>() / p2[j]
            })
            .collect();
        for j in 0..k {
            change = change.max((next2[j] - eta2[j]).abs());
        }
        eta2 = next2;
        if change <= tol {
            break;
        }
        if iterations >= 100_000 {
            return Err(Error::InvalidSpec("grid Gauss-Seidel did not converge".into()));
        }
    }

    let m1: f64 = p1.iter().zip(&eta1).map(|(w, v)| w * v).sum();
    let m2: f64 = p2.iter().zip(&eta2).map(|(w, v)| w * v).sum();
    eta1.iter_mut().for_each(|v| *v -= m1);
    eta2.iter_mut().for_each(|v| *v -= m2);
    let (mut v1, mut v2, mut c12, mut v12, mut c1r, mut c2r) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..k {
        for j in 0..k {
            let w = p[i * k + j];
            let r = t[i * k + j] - eta1[i] - eta2[j];
            v1 += w * eta1[i] * eta1[i];
            v2 += w * eta2[j] * eta2[j];
            c12 += w * eta1[i] * eta2[j];
            v12 += w * r * r;
            c1r += w * eta1[i] * r;
            c2r += w * eta2[j] * r;
        }
    }
    Ok(GridHofd {
        mean,
        var_eta1: v1,
        var_eta2: v2,
        cov_eta1_eta2: c12,
        var_eta12: v12,
        var_target,
        hierarchical_residual: c1r.abs().max(c2r.abs()) / var_target,
        iterations,
    })
}

/// Default grid resolution for the population oracles.
pub const GRID_NODES: usize = 401;

/// Indices of `Y = sin X1 + a sin^2 X2 + b X3^3 sin X1` with `(X1, X2) ~ pair`
/// independent of `X3 ~ single`, both zero-mean.
///
/// `E(Y | X1, X2) = sin X1 + a sin^2 X2` is decomposed on the grid. `E(X3^3) = 0`
/// and `E(sin X1) = 0` make the `X3` index zero, and the cross-block term
/// `b X3^3 sin X1` is uncorrelated with the pair projection; its variance
/// `b^2 E(X3^6) E(sin^2 X1)` is reported as `between_pairs`.
pub fn ishigami_indices(
    pair: &GaussianMixtureSpec,
    single: &GaussianMixtureSpec,
    a: f64,
    b: f64,
) -> Result<SensitivityReport> {
    require_zero_mean(pair, 2)?;
    require_zero_mean(single, 1)?;
    let g = grid_hofd(pair, |x1, x2| x1.sin() + a * x2.sin().powi(2), GRID_NODES)?;
    let s1 = pair.marginal(&[0])?;
    let e_sin2 = mixture_expectation_1d(&s1, |x| x.sin().powi(2));
    let w = single.alpha();
    let sixth = 15.0 * (w * single.cov1_diag()[0].powi(3) + (1.0 - w) * single.cov2()[(0, 0)].powi(3));
    let v_cross = b * b * sixth * e_sin2;
    let v_y = g.var_target + v_cross;
    let (mut vars, pair_index) = pair_report(
        (0, 1),
        [g.var_eta1, g.var_eta2],
        g.cov_eta1_eta2,
        g.var_eta12,
        v_y,
    );
    vars.push(VariableIndex { column: 2, s: 0.0, s_v: 0.0, s_c: 0.0 });
    Ok(assemble(vars, vec![pair_index], v_cross / v_y, v_y))
}

/// `E g(X)` for a univariate zero-mean mixture, as a Riemann sum over +-12
/// standard deviations.
fn mixture_expectation_1d(spec: &GaussianMixtureSpec, g: impl Fn(f64) -> f64) -> f64 {
    let sd = spec.cov1_diag()[0].max(spec.cov2()[(0, 0)]).sqrt();
    let k = 20_001;
    let (lo, hi) = (-12.0 * sd, 12.0 * sd);
    let h = (hi - lo) / (k - 1) as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for i in 0..k {
        let x = lo + h * i as f64;
        let d = spec.lebesgue_density(&[x]);
        num += d * g(x);
        den += d;
    }
    num / den
}

/// One index estimated by repeated pipeline runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEstimate {
    pub name: String,
    pub mean: f64,
    /// Standard deviation of the replications (n-1 denominator).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceIndices {
    pub replications: usize,
    pub n_per_replication: usize,
    pub estimates: Vec<IndexEstimate>,
}

impl BruteForceIndices {
    pub fn get(&self, name: &str) -> Option<&IndexEstimate> {
        self.estimates.iter().find(|e| e.name == name)
    }
}

/// Sample size of each brute-force replication.
pub const BRUTE_FORCE_N: usize = 5000;

/// Reference indices for models without closed forms: the estimation pipeline
/// rerun on `n_mc / 5000` independent samples of size 5000, reporting the mean
/// and spread of each index. Intended for magnitudes and trends, since the
/// smoothing bias of the pipeline is not averaged away.
pub fn brute_force_indices(
    model: impl Fn(&[f64]) -> f64,
    law: &IpdvLaw,
    n_mc: usize,
    seed: u64,
) -> Result<BruteForceIndices> {
    if n_mc < 100_000 {
        return Err(Error::InvalidSpec(format!("n_mc must be at least 100000, got {n_mc}")));
    }
    let reps = n_mc / BRUTE_FORCE_N;
    let pairs = law.pair_structure();
    let cfg = GaussSeidelConfig::default();
    let mut rows: Vec<Vec<(String, f64)>> = Vec::with_capacity(reps);
    // sequential: each run already holds several n x n smoothing operators
    for r in 0..reps {
        let sample = law.sample(BRUTE_FORCE_N, crate::distributions::derive_seed(seed, r as u64), &model)?;
        let d = ipdv_decompose(&sample, &pairs, &cfg)?;
        rows.push(generalized_indices(&d, sample.y())?.named_values());
    }
    let estimates = (0..rows[0].len())
        .map(|i| {
            let values: Vec<f64> = rows.iter().map(|r| r[i].1).collect();
            IndexEstimate {
                name: rows[0][i].0.clone(),
                mean: stats::mean(&values),
                std: stats::sample_std(&values),
            }
        })
        .collect();
    Ok(BruteForceIndices {
        replications: reps,
        n_per_replication: BRUTE_FORCE_N,
        estimates,
    })
}
