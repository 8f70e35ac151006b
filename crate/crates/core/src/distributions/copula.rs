use serde::{Deserialize, Serialize};

use super::{AdmissibilityMethod, AdmissibilityReport};
use crate::{Error, Result};

/// Default node count of a tabulated generator.
pub const DEFAULT_GENERATOR_NODES: usize = 1001;

const AXIOM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CopulaFamily {
    Morgenstern,
    Frank,
    ArchimedeanTabulated,
}

/// Archimedean generator `phi` with its first two derivatives, tabulated on the
/// uniform grid `u_j = j / (k - 1)` of `[0, 1]`.
///
/// Only the node at `u = 0` may be unbounded (`phi(0) = +inf` for a strict
/// generator); JSON encodes those entries as `null`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorTable {
    phi: Vec<f64>,
    dphi: Vec<f64>,
    ddphi: Vec<f64>,
}

impl GeneratorTable {
    pub fn new(phi: Vec<f64>, dphi: Vec<f64>, ddphi: Vec<f64>) -> Result<Self> {
        let k = phi.len();
        if k < 3 || dphi.len() != k || ddphi.len() != k {
            return Err(Error::InvalidSpec(format!(
                "generator table needs three columns of equal length >= 3 (got {}, {}, {})",
                phi.len(),
                dphi.len(),
                ddphi.len()
            )));
        }
        for j in 1..k {
            if !(phi[j].is_finite() && dphi[j].is_finite() && ddphi[j].is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "generator entries must be finite away from u = 0 (node {j})"
                )));
            }
        }
        if phi[k - 1].abs() > 1e-12 {
            return Err(Error::InvalidSpec(format!("phi(1) must be 0, got {}", phi[k - 1])));
        }
        for j in 0..k {
            if phi[j].is_nan() || dphi[j].is_nan() || ddphi[j].is_nan() {
                return Err(Error::InvalidSpec(format!("NaN in generator table at node {j}")));
            }
            if !(dphi[j] < 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "phi' must be negative at every node (node {j}: {})",
                    dphi[j]
                )));
            }
            if !(ddphi[j] > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "phi'' must be positive at every node (node {j}: {})",
                    ddphi[j]
                )));
            }
            if j > 0 && !(phi[j] < phi[j - 1]) {
                return Err(Error::InvalidSpec(format!(
                    "phi must be strictly decreasing (nodes {} and {j})",
                    j - 1
                )));
            }
        }
        Ok(Self { phi, dphi, ddphi })
    }

    /// Tabulates closures at `nodes` grid points.
    pub fn from_fn(
        nodes: usize,
        phi: impl Fn(f64) -> f64,
        dphi: impl Fn(f64) -> f64,
        ddphi: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        if nodes < 3 {
            return Err(Error::InvalidSpec("generator table needs at least 3 nodes".into()));
        }
        let grid: Vec<f64> = (0..nodes).map(|j| j as f64 / (nodes - 1) as f64).collect();
        Self::new(
            grid.iter().map(|&u| phi(u)).collect(),
            grid.iter().map(|&u| dphi(u)).collect(),
            grid.iter().map(|&u| ddphi(u)).collect(),
        )
    }

    /// Frank generator `-ln((e^{-theta u} - 1) / (e^{-theta} - 1))`.
    pub fn frank(theta: f64, nodes: usize) -> Result<Self> {
        if theta == 0.0 || !theta.is_finite() {
            return Err(Error::InvalidSpec("Frank parameter must be finite and non-zero".into()));
        }
        Self::from_fn(
            nodes,
            |u| {
                if u == 0.0 {
                    f64::INFINITY
                } else {
                    -((-theta * u).exp_m1() / (-theta).exp_m1()).ln()
                }
            },
            |u| {
                if u == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -theta / (theta * u).exp_m1()
                }
            },
            |u| {
                if u == 0.0 {
                    f64::INFINITY
                } else {
                    let e = (theta * u).exp_m1();
                    theta * theta * (theta * u).exp() / (e * e)
                }
            },
        )
    }

    pub fn nodes(&self) -> usize {
        self.phi.len()
    }

    fn step(&self) -> f64 {
        1.0 / (self.nodes() - 1) as f64
    }

    fn interp(&self, values: &[f64], u: f64) -> f64 {
        let k = self.nodes();
        let pos = u.clamp(0.0, 1.0) * (k - 1) as f64;
        let lo = (pos.floor() as usize).min(k - 2);
        let frac = pos - lo as f64;
        if frac == 0.0 {
            return values[lo];
        }
        if frac == 1.0 {
            return values[lo + 1];
        }
        values[lo] + frac * (values[lo + 1] - values[lo])
    }

    pub fn phi(&self, u: f64) -> f64 {
        self.interp(&self.phi, u)
    }

    pub fn dphi(&self, u: f64) -> f64 {
        self.interp(&self.dphi, u)
    }

    pub fn ddphi(&self, u: f64) -> f64 {
        self.interp(&self.ddphi, u)
    }

    /// Pseudo-inverse of the piecewise-linear generator.
    ///
    /// Returns the inverse together with a flag telling whether it was resolved
    /// inside the table; values beyond `phi(u_1)` of a strict generator are
    /// extrapolated linearly from node 1 and clamped to `[0, u_1]`.
    fn inverse(&self, t: f64) -> (f64, bool) {
        let k = self.nodes();
        if t <= 0.0 {
            return (1.0, true);
        }
        if t >= self.phi[0] {
            return (0.0, true);
        }
        if t > self.phi[1] && !self.phi[0].is_finite() {
            let u1 = self.step();
            let u = u1 - (t - self.phi[1]) / (-self.dphi[1]);
            return (u.clamp(0.0, u1), false);
        }
        // phi is decreasing: find j with phi[j] >= t >= phi[j+1]
        let (mut lo, mut hi) = (0usize, k - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.phi[mid] >= t {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let frac = (self.phi[lo] - t) / (self.phi[lo] - self.phi[hi]);
        ((lo as f64 + frac) * self.step(), true)
    }

    fn cdf(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        self.inverse(self.phi(u) + self.phi(v)).0
    }

    /// `-phi''(C) phi'(u) phi'(v) / phi'(C)^3`; zero on the zero set of a
    /// non-strict generator, `None` where the table cannot resolve `C`.
    fn density(&self, u: f64, v: f64) -> Option<f64> {
        let t = self.phi(u) + self.phi(v);
        if self.phi[0].is_finite() && t >= self.phi[0] {
            return Some(0.0);
        }
        let (c, resolved) = self.inverse(t);
        if !resolved || c <= 0.0 {
            return None;
        }
        let dc = self.dphi(c);
        Some(-self.ddphi(c) * self.dphi(u) * self.dphi(v) / (dc * dc * dc))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CopulaRecord {
    family: CopulaFamily,
    #[serde(default)]
    theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    generator_grid: Option<Vec<[Option<f64>; 3]>>,
}

/// Bivariate copula: Morgenstern, Frank, or Archimedean with a tabulated generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CopulaRecord", into = "CopulaRecord")]
pub struct CopulaSpec {
    family: CopulaFamily,
    theta: f64,
    generator: Option<GeneratorTable>,
}

impl TryFrom<CopulaRecord> for CopulaSpec {
    type Error = Error;

    fn try_from(r: CopulaRecord) -> Result<Self> {
        let generator = r
            .generator_grid
            .map(|grid| {
                let col = |i: usize, unbounded: f64| -> Vec<f64> {
                    grid.iter().map(|node| node[i].unwrap_or(unbounded)).collect()
                };
                GeneratorTable::new(
                    col(0, f64::INFINITY),
                    col(1, f64::NEG_INFINITY),
                    col(2, f64::INFINITY),
                )
            })
            .transpose()?;
        CopulaSpec::new(r.family, r.theta, generator)
    }
}

impl From<CopulaSpec> for CopulaRecord {
    fn from(s: CopulaSpec) -> Self {
        let finite = |v: f64| v.is_finite().then_some(v);
        CopulaRecord {
            family: s.family,
            theta: s.theta,
            generator_grid: s.generator.map(|g| {
                (0..g.nodes())
                    .map(|j| [finite(g.phi[j]), finite(g.dphi[j]), finite(g.ddphi[j])])
                    .collect()
            }),
        }
    }
}

impl CopulaSpec {
    /// Morgenstern accepts `theta` in `[-1, 1]`; the endpoints are valid copulas
    /// that fail the lower-bound condition.
    pub fn new(family: CopulaFamily, theta: f64, generator: Option<GeneratorTable>) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidSpec("copula parameter must be finite".into()));
        }
        match family {
            CopulaFamily::Morgenstern if theta.abs() > 1.0 => {
                return Err(Error::InvalidSpec(format!(
                    "Morgenstern parameter must lie in [-1, 1], got {theta}"
                )))
            }
            CopulaFamily::Frank if theta == 0.0 => {
                return Err(Error::InvalidSpec("Frank parameter must be non-zero".into()))
            }
            CopulaFamily::ArchimedeanTabulated if generator.is_none() => {
                return Err(Error::InvalidSpec("tabulated Archimedean copula needs a generator".into()))
            }
            _ => {}
        }
        Ok(Self {
            family,
            theta,
            generator: if family == CopulaFamily::ArchimedeanTabulated { generator } else { None },
        })
    }

    pub fn morgenstern(theta: f64) -> Result<Self> {
        Self::new(CopulaFamily::Morgenstern, theta, None)
    }

    pub fn frank(theta: f64) -> Result<Self> {
        Self::new(CopulaFamily::Frank, theta, None)
    }

    pub fn archimedean(generator: GeneratorTable) -> Result<Self> {
        Self::new(CopulaFamily::ArchimedeanTabulated, 0.0, Some(generator))
    }

    pub fn family(&self) -> CopulaFamily {
        self.family
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn generator(&self) -> Option<&GeneratorTable> {
        self.generator.as_ref()
    }

    pub fn cdf(&self, u: f64, v: f64) -> f64 {
        let (u, v) = (u.clamp(0.0, 1.0), v.clamp(0.0, 1.0));
        let theta = self.theta;
        match self.family {
            CopulaFamily::Morgenstern => u * v * (1.0 + theta * (1.0 - u) * (1.0 - v)),
            CopulaFamily::Frank => {
                if u == 0.0 || v == 0.0 {
                    return 0.0;
                }
                let num = (-theta * u).exp_m1() * (-theta * v).exp_m1();
                -(num / (-theta).exp_m1()).ln_1p() / theta
            }
            CopulaFamily::ArchimedeanTabulated => self.table().cdf(u, v),
        }
    }

    /// Copula density; `None` only where a tabulated generator cannot resolve it.
    pub fn density(&self, u: f64, v: f64) -> Option<f64> {
        let theta = self.theta;
        match self.family {
            CopulaFamily::Morgenstern => Some(1.0 + theta * (1.0 - 2.0 * u) * (1.0 - 2.0 * v)),
            CopulaFamily::Frank => {
                let a = -(-theta).exp_m1();
                let d = a - (-(-theta * u).exp_m1()) * (-(-theta * v).exp_m1());
                Some(theta * a * (-theta * (u + v)).exp() / (d * d))
            }
            CopulaFamily::ArchimedeanTabulated => self.table().density(u, v),
        }
    }

    fn table(&self) -> &GeneratorTable {
        self.generator.as_ref().expect("validated at construction")
    }
}

/// Lower bound `M` with `c(u, v) >= M` on the unit square.
pub fn copula_lower_bound(spec: &CopulaSpec) -> AdmissibilityReport {
    let method = AdmissibilityMethod::CopulaLowerBound;
    let theta = spec.theta;
    match spec.family {
        CopulaFamily::Morgenstern => {
            if theta.abs() < 1.0 {
                AdmissibilityReport::pass(
                    method,
                    1.0 - theta.abs(),
                    format!("Morgenstern density 1 + theta(1-2u)(1-2v) >= 1 - |theta| = {}", 1.0 - theta.abs()),
                )
            } else {
                AdmissibilityReport::fail(
                    method,
                    "Morgenstern with |theta| = 1 has density vanishing at a corner".into(),
                )
            }
        }
        CopulaFamily::Frank => {
            let closed_form = if theta > 0.0 {
                -theta * (-theta).exp_m1() * (-2.0 * theta).exp()
            } else {
                -theta * (-theta).exp_m1()
            };
            // exact density minimum, attained at a corner
            let t = theta.abs();
            let exact_min = t / t.exp_m1();
            let bound = closed_form.min(exact_min).min(1.0);
            let mut details = format!(
                "Frank closed-form bound {closed_form}; exact corner minimum {exact_min}"
            );
            if closed_form > exact_min {
                details.push_str("; closed form exceeds the attained minimum, using the minimum");
            }
            AdmissibilityReport::pass(method, bound, details)
        }
        CopulaFamily::ArchimedeanTabulated => archimedean_bound(spec.table()),
    }
}

fn archimedean_bound(table: &GeneratorTable) -> AdmissibilityReport {
    let method = AdmissibilityMethod::CopulaLowerBound;
    let k = table.nodes();
    // -phi' >= M1 and d/du (1 / (2 phi'^2)) = -phi'' / phi'^3 >= M2
    let m1 = (1..k).map(|j| -table.dphi[j]).fold(f64::INFINITY, f64::min);
    let m2 = (1..k)
        .map(|j| -table.ddphi[j] / table.dphi[j].powi(3))
        .fold(f64::INFINITY, f64::min);
    let nodes: Vec<f64> = (1..k).map(|j| j as f64 * table.step()).collect();
    let mut min_density = f64::INFINITY;
    let mut unresolved = 0usize;
    for &u in &nodes {
        for &v in &nodes {
            match table.density(u, v) {
                Some(c) => min_density = min_density.min(c),
                None => unresolved += 1,
            }
        }
    }
    let details = format!(
        "min -phi' = {m1}, min -phi''/phi'^3 = {m2}, grid-minimum density = {min_density} \
         over {} nodes ({unresolved} unresolved near the origin)",
        nodes.len() * nodes.len()
    );
    if m1 > 0.0 && m2 > 0.0 && min_density > 0.0 && min_density.is_finite() {
        AdmissibilityReport::pass(method, min_density.min(1.0), details)
    } else {
        AdmissibilityReport::fail(method, details)
    }
}

/// `C~ = (C - m uv) / (1 - m)` tabulated on a `k x k` grid of `[0,1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedCopula {
    k: usize,
    values: Vec<f64>,
}

impl TabulatedCopula {
    pub fn nodes(&self) -> usize {
        self.k
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 / (self.k - 1) as f64
    }

    /// Value at grid node `(u_i, v_j)`.
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn rectangle_mass(&self, i: usize, j: usize) -> f64 {
        self.value(i + 1, j + 1) - self.value(i, j + 1) - self.value(i + 1, j) + self.value(i, j)
    }

    pub fn min_rectangle_mass(&self) -> f64 {
        let mut min = f64::INFINITY;
        for i in 0..self.k - 1 {
            for j in 0..self.k - 1 {
                min = min.min(self.rectangle_mass(i, j));
            }
        }
        min
    }
}

/// Splits `C = m uv + (1 - m) C~` and checks that `C~` is a copula on the grid.
pub fn copula_decompose(spec: &CopulaSpec, m: f64, k: usize) -> Result<TabulatedCopula> {
    if k < 2 {
        return Err(Error::InvalidSpec("grid needs at least 2 nodes".into()));
    }
    let report = copula_lower_bound(spec);
    let bound = report
        .bound_m
        .ok_or_else(|| Error::Inadmissible(format!("copula has no positive density bound: {}", report.details)))?;
    if !(m > 0.0 && m < 1.0 && m <= bound * (1.0 + 1e-12)) {
        return Err(Error::InvalidSpec(format!(
            "split weight must satisfy 0 < m <= {bound} and m < 1, got {m}"
        )));
    }
    let node = |i: usize| i as f64 / (k - 1) as f64;
    let mut values = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let (u, v) = (node(i), node(j));
            values.push((spec.cdf(u, v) - m * u * v) / (1.0 - m));
        }
    }
    let table = TabulatedCopula { k, values };
    for i in 0..k {
        let u = node(i);
        let margins = [
            table.value(i, 0),
            table.value(0, i),
            table.value(i, k - 1) - u,
            table.value(k - 1, i) - u,
        ];
        if let Some(err) = margins.iter().find(|e| e.abs() > AXIOM_TOL) {
            return Err(Error::InvalidSpec(format!(
                "margin condition fails at u = {u}: deviation {err}"
            )));
        }
    }
    for i in 0..k - 1 {
        for j in 0..k - 1 {
            let mass = table.rectangle_mass(i, j);
            if mass < -AXIOM_TOL {
                return Err(Error::CopulaAxiom {
                    u0: node(i),
                    u1: node(i + 1),
                    v0: node(j),
                    v1: node(j + 1),
                    mass,
                });
            }
        }
    }
    Ok(table)
}
