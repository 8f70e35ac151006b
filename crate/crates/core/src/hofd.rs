//! Hierarchically orthogonal functional decomposition (HOFD).
//!
//! For a pair `(X1, X2)` the components `(eta1, eta2)` solve the block system
//!
//! ```text
//! [ Id    P1 ] [eta1]   [E(Y|X1) - E(Y)]
//! [ P2    Id ] [eta2] = [E(Y|X2) - E(Y)]      P_i(U) = E(U|X_i) - E(U)
//! ```
//!
//! which [`hofd_bivariate`] solves by Gauss-Seidel sweeps with leave-one-out
//! smoothers standing in for the conditional expectations. The interaction is
//! what remains: `eta12 = Y - eta0 - eta1 - eta2`.
//!
//! [`ipdv_decompose`] handles inputs that split into independent pairs: a
//! first stage projects `Y` onto each block, a second stage decomposes each
//! block projection with the bivariate solver.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{Block, PairStructure, SampleSet};
use crate::smoother::{loo_conditional_mean, LooSmoother, SmootherConfig};
use crate::{stats, Error, Result};

/// Minimum sample size accepted by the bivariate solver.
pub const MIN_OBSERVATIONS: usize = 50;

/// Stopping tolerance on the root-mean-square change of `(eta1, eta2)` between sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Tolerance {
    /// Multiple of the sample standard deviation of the target.
    RelativeToStd(f64),
    Absolute(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussSeidelConfig {
    pub epsilon: Tolerance,
    pub max_iter: usize,
    pub smoother: SmootherConfig,
    /// Rescale `eta1`, `eta2` by least squares after the sweeps so that the
    /// remainder `eta12` is exactly empirically orthogonal to both.
    pub orthogonalize: bool,
}

impl Default for GaussSeidelConfig {
    fn default() -> Self {
        Self {
            epsilon: Tolerance::RelativeToStd(1e-4),
            max_iter: 100,
            smoother: SmootherConfig::guarded(),
            orthogonalize: true,
        }
    }
}

impl GaussSeidelConfig {
    pub fn validate(&self) -> Result<()> {
        let eps = match self.epsilon {
            Tolerance::RelativeToStd(v) | Tolerance::Absolute(v) => v,
        };
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidSpec(format!("tolerance must be positive, got {eps}")));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidSpec("max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Absolute epsilon for a given target. A tiny floor keeps constant
    /// targets from demanding an exact zero change.
    pub fn epsilon_for(&self, target: &[f64]) -> f64 {
        let floor = 1e-12 * stats::rms(target).max(1.0);
        match self.epsilon {
            Tolerance::RelativeToStd(r) => (r * stats::sample_std(target)).max(floor),
            Tolerance::Absolute(a) => a.max(floor),
        }
    }
}

/// Component values at the sample points for one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentTable {
    pub pair_id: usize,
    pub eta0: f64,
    pub eta1: Vec<f64>,
    pub eta2: Vec<f64>,
    pub eta12: Vec<f64>,
}

impl ComponentTable {
    pub fn n(&self) -> usize {
        self.eta1.len()
    }

    /// `eta0 + eta1 + eta2 + eta12` at each sample point.
    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.n())
            .map(|k| self.eta0 + self.eta1[k] + self.eta2[k] + self.eta12[k])
            .collect()
    }

    /// CSV with a `# pair_id=..,eta0=..` header record, then
    /// `row_index,eta1,eta2,eta12` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# pair_id={},eta0={}", self.pair_id, self.eta0)?;
        writeln!(out, "row_index,eta1,eta2,eta12")?;
        for k in 0..self.n() {
            writeln!(out, "{k},{},{},{}", self.eta1[k], self.eta2[k], self.eta12[k])?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty component table".into()))??;
        let meta = header
            .strip_prefix("# ")
            .ok_or_else(|| Error::Parse(format!("missing header record: {header}")))?;
        let mut pair_id = None;
        let mut eta0 = None;
        for field in meta.split(',') {
            match field.split_once('=') {
                Some(("pair_id", v)) => pair_id = Some(parse::<usize>(v)?),
                Some(("eta0", v)) => eta0 = Some(parse::<f64>(v)?),
                _ => return Err(Error::Parse(format!("unknown header field {field}"))),
            }
        }
        let columns = lines
            .next()
            .ok_or_else(|| Error::Parse("missing column header".into()))??;
        if columns.trim() != "row_index,eta1,eta2,eta12" {
            return Err(Error::Parse(format!("unexpected columns: {columns}")));
        }
        let mut table = ComponentTable {
            pair_id: pair_id.ok_or_else(|| Error::Parse("missing pair_id".into()))?,
            eta0: eta0.ok_or_else(|| Error::Parse("missing eta0".into()))?,
            eta1: Vec::new(),
            eta2: Vec::new(),
            eta12: Vec::new(),
        };
        for (expected, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 || parse::<usize>(fields[0])? != expected {
                return Err(Error::Parse(format!("malformed row {expected}: {line}")));
            }
            table.eta1.push(parse(fields[1])?);
            table.eta2.push(parse(fields[2])?);
            table.eta12.push(parse(fields[3])?);
        }
        Ok(table)
    }
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("cannot parse '{s}'")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub final_change: f64,
    pub epsilon: f64,
    pub converged: bool,
    pub per_iteration_changes: Vec<f64>,
    /// Least-squares factors applied to `(eta1, eta2)`; `(1, 1)` when disabled.
    pub rescale: (f64, f64),
}

impl ConvergenceReport {
    /// True when the change sequence never increases over its second half.
    pub fn monotone_tail(&self) -> bool {
        let c = &self.per_iteration_changes;
        let start = c.len() / 2;
        c[start..].windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-300)
    }
}

fn check_columns(x1: &[f64], x2: &[f64], y: &[f64]) -> Result<()> {
    let n = y.len();
    if x1.len() != n || x2.len() != n {
        return Err(Error::InvalidSpec(format!(
            "column lengths differ: x1 {}, x2 {}, target {n}",
            x1.len(),
            x2.len()
        )));
    }
    if n < MIN_OBSERVATIONS {
        return Err(Error::InvalidSpec(format!(
            "bivariate decomposition needs at least {MIN_OBSERVATIONS} observations, got {n}"
        )));
    }
    Ok(())
}

/// Gauss-Seidel solution of the bivariate HOFD system from a sample.
///
/// Starting from zero, each sweep updates
/// `eta1 <- S1(y - eta2) - mean(y - eta2)` then `eta2 <- S2(y - eta1) - mean(y - eta1)`
/// with fixed leave-one-out smoothers `S1`, `S2`, until the RMS change of the
/// stacked components is at most epsilon. Afterwards `eta1` and `eta2` are
/// re-centered, `eta0 = mean(y)` and `eta12` is the remainder.
///
/// Non-convergence is not an error: the report says `converged = false`.
pub fn hofd_bivariate(
    x1: &[f64],
    x2: &[f64],
    y: &[f64],
    cfg: &GaussSeidelConfig,
) -> Result<(ComponentTable, ConvergenceReport)> {
    cfg.validate()?;
    check_columns(x1, x2, y)?;
    let wrap = |e: Error| Error::Iteration {
        iteration: 0,
        source: Box::new(e),
    };
    let (s1, s2) = rayon::join(
        || LooSmoother::fit(&[x1], &cfg.smoother),
        || LooSmoother::fit(&[x2], &cfg.smoother),
    );
    let (s1, s2) = (s1.map_err(wrap)?, s2.map_err(wrap)?);
    Ok(solve_with(&s1, &s2, y, cfg, 0))
}

/// Sweeps with prebuilt smoothers; `pair_id` labels the resulting table.
pub(crate) fn solve_with(
    s1: &LooSmoother,
    s2: &LooSmoother,
    y: &[f64],
    cfg: &GaussSeidelConfig,
    pair_id: usize,
) -> (ComponentTable, ConvergenceReport) {
    let n = y.len();
    let epsilon = cfg.epsilon_for(y);
    let mut eta1 = vec![0.0; n];
    let mut eta2 = vec![0.0; n];
    let mut residual = vec![0.0; n];
    let mut changes = Vec::new();
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        let mut change = 0.0;
        for (r, (yk, e)) in residual.iter_mut().zip(y.iter().zip(&eta2)) {
            *r = yk - e;
        }
        let next1 = centered_smooth(s1, &residual);
        change += squared_distance(&next1, &eta1);
        eta1 = next1;

        for (r, (yk, e)) in residual.iter_mut().zip(y.iter().zip(&eta1)) {
            *r = yk - e;
        }
        let next2 = centered_smooth(s2, &residual);
        change += squared_distance(&next2, &eta2);
        eta2 = next2;

        let rms_change = (change / (2 * n) as f64).sqrt();
        changes.push(rms_change);
        if rms_change <= epsilon {
            converged = true;
            break;
        }
    }

    stats::center(&mut eta1);
    stats::center(&mut eta2);
    let eta0 = stats::mean(y);
    let rescale = if cfg.orthogonalize {
        let (a, b) = orthogonal_rescale(&eta1, &eta2, y, eta0);
        eta1.iter_mut().for_each(|v| *v *= a);
        eta2.iter_mut().for_each(|v| *v *= b);
        (a, b)
    } else {
        (1.0, 1.0)
    };
    let eta12 = (0..n).map(|k| y[k] - eta0 - eta1[k] - eta2[k]).collect();
    let report = ConvergenceReport {
        iterations: changes.len(),
        final_change: *changes.last().expect("max_iter >= 1"),
        epsilon,
        converged,
        per_iteration_changes: changes,
        rescale,
    };
    (
        ComponentTable {
            pair_id,
            eta0,
            eta1,
            eta2,
            eta12,
        },
        report,
    )
}

/// Coefficients of the least-squares fit of `y - eta0` on `(eta1, eta2)`.
/// Degenerate directions keep a factor of one.
fn orthogonal_rescale(eta1: &[f64], eta2: &[f64], y: &[f64], eta0: f64) -> (f64, f64) {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let t: Vec<f64> = y.iter().map(|v| v - eta0).collect();
    let (g11, g12, g22) = (dot(eta1, eta1), dot(eta1, eta2), dot(eta2, eta2));
    let (r1, r2) = (dot(eta1, &t), dot(eta2, &t));
    let scale = dot(&t, &t).max(f64::MIN_POSITIVE);
    let live1 = g11 > 1e-20 * scale;
    let live2 = g22 > 1e-20 * scale;
    let det = g11 * g22 - g12 * g12;
    match (live1, live2) {
        (true, true) if det > 1e-10 * g11 * g22 => {
            ((g22 * r1 - g12 * r2) / det, (g11 * r2 - g12 * r1) / det)
        }
        (true, false) => (r1 / g11, 1.0),
        (false, true) => (1.0, r2 / g22),
        _ => (1.0, 1.0),
    }
}

/// `S r - mean(r)`.
fn centered_smooth(s: &LooSmoother, r: &[f64]) -> Vec<f64> {
    let m = stats::mean(r);
    let mut out = s.apply(r);
    out.iter_mut().for_each(|v| *v -= m);
    out
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Decomposition of one block of an IPDV partition.
#[derive(Debug, Clone, PartialEq)]
pub enum BlockComponents {
    Pair {
        columns: (usize, usize),
        /// First-stage block projection `E(Y | X^(i)) - E(Y)` at the sample points.
        target: Vec<f64>,
        table: ComponentTable,
        report: ConvergenceReport,
    },
    Single {
        column: usize,
        /// Centered first-order component `E(Y | X_j) - E(Y)`.
        component: Vec<f64>,
    },
}

impl BlockComponents {
    /// The block's first-stage projection, reconstructed from its components.
    pub fn target(&self) -> &[f64] {
        match self {
            BlockComponents::Pair { target, .. } => target,
            BlockComponents::Single { component, .. } => component,
        }
    }

    pub fn converged(&self) -> bool {
        match self {
            BlockComponents::Pair { report, .. } => report.converged,
            BlockComponents::Single { .. } => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpdvDecomposition {
    /// `mean(y)`.
    pub eta0: f64,
    pub blocks: Vec<BlockComponents>,
}

impl IpdvDecomposition {
    /// Wraps a bivariate run on columns `(0, 1)` as a one-block decomposition.
    pub fn from_bivariate(table: ComponentTable, report: ConvergenceReport) -> Self {
        let target = table.reconstruct().iter().map(|v| v - table.eta0).collect();
        Self {
            eta0: table.eta0,
            blocks: vec![BlockComponents::Pair {
                columns: (0, 1),
                target,
                table,
                report,
            }],
        }
    }

    pub fn converged(&self) -> bool {
        self.blocks.iter().all(BlockComponents::converged)
    }

    pub fn tables(&self) -> impl Iterator<Item = &ComponentTable> {
        self.blocks.iter().filter_map(|b| match b {
            BlockComponents::Pair { table, .. } => Some(table),
            BlockComponents::Single { .. } => None,
        })
    }
}

/// Two-stage decomposition for independent pairs of dependent variables.
///
/// Stage 1 estimates each block projection `E(Y | X^(i)) - E(Y)` by leave-one-out
/// smoothing on the block's columns. When a single block covers every input the
/// projection is `Y - E(Y)` itself and no smoothing is done. Stage 2 runs
/// [`hofd_bivariate`] on each pair with its projection as the target.
pub fn ipdv_decompose(
    sample: &SampleSet,
    pairs: &PairStructure,
    cfg: &GaussSeidelConfig,
) -> Result<IpdvDecomposition> {
    cfg.validate()?;
    if pairs.dim() != sample.p() {
        return Err(Error::InvalidSpec(format!(
            "pair structure covers {} columns, sample has {}",
            pairs.dim(),
            sample.p()
        )));
    }
    let y = sample.y();
    let eta0 = stats::mean(y);
    let whole = pairs.blocks().len() == 1;
    let blocks = pairs
        .blocks()
        .par_iter()
        .enumerate()
        .map(|(id, block)| -> Result<BlockComponents> {
            let cols: Vec<&[f64]> = block.columns().iter().map(|&c| sample.column(c)).collect();
            let mut target = if whole {
                y.to_vec()
            } else {
                loo_conditional_mean(&cols, y, &cfg.smoother)?
            };
            stats::center(&mut target);
            match *block {
                Block::Single(column) => Ok(BlockComponents::Single {
                    column,
                    component: target,
                }),
                Block::Pair(a, b) => {
                    check_columns(cols[0], cols[1], &target)?;
                    let wrap = |e: Error| Error::Iteration {
                        iteration: 0,
                        source: Box::new(e),
                    };
                    let s1 = LooSmoother::fit(&cols[..1], &cfg.smoother).map_err(wrap)?;
                    let s2 = LooSmoother::fit(&cols[1..], &cfg.smoother).map_err(wrap)?;
                    let (table, report) = solve_with(&s1, &s2, &target, cfg, id);
                    Ok(BlockComponents::Pair {
                        columns: (a, b),
                        target,
                        table,
                        report,
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IpdvDecomposition { eta0, blocks })
}

/// Empirical checks of hierarchical orthogonality and of the norm inequality
/// `E[(sum h_u)^2] >= delta^{#T-1} sum E[h_u^2]`, `delta = 1 - sqrt(1 - M)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintDiagnostics {
    pub corr_eta1_eta12: f64,
    pub corr_eta2_eta12: f64,
    /// Allowed to be nonzero: orthogonality is hierarchical, not mutual.
    pub corr_eta1_eta2_allowed: f64,
    /// `max_k |E^(eta12 | X1 = x1_k)|` and the same given `X2`.
    pub cond_mean_sup: [f64; 2],
    pub delta: f64,
    pub stone_lhs: f64,
    pub stone_rhs: f64,
}

pub fn constraint_diagnostics(
    components: &ComponentTable,
    x1: &[f64],
    x2: &[f64],
    m_bound: f64,
    cfg: &SmootherConfig,
) -> Result<ConstraintDiagnostics> {
    if !(m_bound > 0.0 && m_bound <= 1.0) {
        return Err(Error::InvalidSpec(format!("bound M must lie in (0,1], got {m_bound}")));
    }
    let t = &components;
    let sup = |x: &[f64]| -> Result<f64> {
        let m = loo_conditional_mean(&[x], &t.eta12, cfg)?;
        Ok(m.iter().fold(0.0f64, |acc, v| acc.max(v.abs())))
    };
    let delta = 1.0 - (1.0 - m_bound).sqrt();
    let n = t.n() as f64;
    let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>() / n;
    let sum: Vec<f64> = (0..t.n()).map(|k| t.eta1[k] + t.eta2[k] + t.eta12[k]).collect();
    // three components, so the exponent #T - 1 is 2
    let stone_rhs = delta * delta * (sq(&t.eta1) + sq(&t.eta2) + sq(&t.eta12));
    Ok(ConstraintDiagnostics {
        corr_eta1_eta12: stats::correlation(&t.eta1, &t.eta12),
        corr_eta2_eta12: stats::correlation(&t.eta2, &t.eta12),
        corr_eta1_eta2_allowed: stats::correlation(&t.eta1, &t.eta2),
        cond_mean_sup: [sup(x1)?, sup(x2)?],
        delta,
        stone_lhs: sq(&sum),
        stone_rhs,
    })
}
