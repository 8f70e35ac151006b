//! Sensitivity indices from decomposition components.
//!
//! For a pair with components `(phi1, phi2, phi12)` the generalized first-order
//! index of the first variable is
//!
//! ```text
//! S_1 = [V(phi1) + Cov(phi1, phi2)] / V(Y)  =  S_1^v + S_1^c
//! ```
//!
//! and the pair index is `S_12 = V(phi12) / V(Y)`. Nested components do not
//! enter each other's covariance terms, which is what makes the indices add up
//! to one. All moments use the 1/n normalization.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::distributions::SampleSet;
use crate::hofd::{BlockComponents, IpdvDecomposition};
use crate::smoother::{loo_conditional_mean, SmootherConfig};
use crate::{stats, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableIndex {
    /// 0-based input column.
    pub column: usize,
    pub s: f64,
    pub s_v: f64,
    pub s_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairIndex {
    pub columns: (usize, usize),
    pub s12: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    /// Sorted by column.
    pub variables: Vec<VariableIndex>,
    pub pairs: Vec<PairIndex>,
    /// Share of `V(Y)` outside the block projections: covariances between
    /// blocks plus whatever the blocks do not explain jointly.
    pub between_pairs: f64,
    pub total_variance: f64,
    pub sum_all: f64,
}

impl SensitivityReport {
    pub fn variable(&self, column: usize) -> Option<&VariableIndex> {
        self.variables.iter().find(|v| v.column == column)
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<&PairIndex> {
        self.pairs
            .iter()
            .find(|p| p.columns == (a, b) || p.columns == (b, a))
    }

    /// Flat `(name, value)` list with 1-based names: `S1`, `Sv1`, `Sc1`, ...,
    /// `S1_2` for pairs, then `between` and `sum`.
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out = Vec::new();
        for v in &self.variables {
            let j = v.column + 1;
            out.push((format!("S{j}"), v.s));
            out.push((format!("Sv{j}"), v.s_v));
            out.push((format!("Sc{j}"), v.s_c));
        }
        for p in &self.pairs {
            out.push((format!("S{}_{}", p.columns.0 + 1, p.columns.1 + 1), p.s12));
        }
        out.push(("between".into(), self.between_pairs));
        out.push(("sum".into(), self.sum_all));
        out
    }

    /// Rows `scope,name,s,s_v,s_c`; pair rows leave the split empty, summary
    /// rows carry their value in `s`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "scope,name,s,s_v,s_c")?;
        for v in &self.variables {
            writeln!(out, "variable,S{},{},{},{}", v.column + 1, v.s, v.s_v, v.s_c)?;
        }
        for p in &self.pairs {
            writeln!(out, "pair,S{}_{},{},,", p.columns.0 + 1, p.columns.1 + 1, p.s12)?;
        }
        writeln!(out, "between,between_pairs,{},,", self.between_pairs)?;
        writeln!(out, "summary,sum_all,{},,", self.sum_all)?;
        writeln!(out, "summary,total_variance,{},,", self.total_variance)?;
        Ok(())
    }

    fn finish(mut variables: Vec<VariableIndex>, pairs: Vec<PairIndex>, between: f64, v_y: f64) -> Self {
        variables.sort_by_key(|v| v.column);
        let sum_all =
            variables.iter().map(|v| v.s).sum::<f64>() + pairs.iter().map(|p| p.s12).sum::<f64>() + between;
        Self {
            variables,
            pairs,
            between_pairs: between,
            total_variance: v_y,
            sum_all,
        }
    }
}

fn total_variance(y: &[f64]) -> Result<f64> {
    let v_y = stats::variance(y);
    let scale = stats::rms(y).max(f64::MIN_POSITIVE);
    if !(v_y > 1e-24 * scale * scale) {
        return Err(Error::DegenerateOutput);
    }
    Ok(v_y)
}

/// Generalized indices of every variable and pair of a decomposition of `y`.
pub fn generalized_indices(decomposition: &IpdvDecomposition, y: &[f64]) -> Result<SensitivityReport> {
    let v_y = total_variance(y)?;
    let mut variables = Vec::new();
    let mut pairs = Vec::new();
    let mut explained = 0.0;
    for block in &decomposition.blocks {
        if block.target().len() != y.len() {
            return Err(Error::InvalidSpec(format!(
                "components have {} rows, output has {}",
                block.target().len(),
                y.len()
            )));
        }
        match block {
            BlockComponents::Pair { columns, table, .. } => {
                let c = stats::covariance(&table.eta1, &table.eta2);
                for (column, eta) in [(columns.0, &table.eta1), (columns.1, &table.eta2)] {
                    let v = stats::variance(eta);
                    variables.push(VariableIndex {
                        column,
                        s: (v + c) / v_y,
                        s_v: v / v_y,
                        s_c: c / v_y,
                    });
                }
                pairs.push(PairIndex {
                    columns: *columns,
                    s12: stats::variance(&table.eta12) / v_y,
                });
                explained += stats::variance(block.target());
            }
            BlockComponents::Single { column, component } => {
                let v = stats::variance(component);
                variables.push(VariableIndex {
                    column: *column,
                    s: v / v_y,
                    s_v: v / v_y,
                    s_c: 0.0,
                });
                explained += v;
            }
        }
    }
    Ok(SensitivityReport::finish(variables, pairs, (v_y - explained) / v_y, v_y))
}

/// Hoeffding-Sobol indices of components estimated under independent inputs.
///
/// With independent inputs the decomposition is mutually orthogonal, the
/// covariance terms vanish and the generalized indices are the classical Sobol
/// indices `V(eta_u) / V(Y)`. The covariance parts are still reported so that a
/// caller can see how far the sample departs from that situation.
pub fn classical_hoeffding_reference(
    decomposition: &IpdvDecomposition,
    y: &[f64],
) -> Result<SensitivityReport> {
    generalized_indices(decomposition, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvpEntry {
    /// 0-based columns, one or two.
    pub subset: Vec<usize>,
    pub s: f64,
}

/// Classical Sobol indices from nonparametric conditional means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DvpReport {
    pub entries: Vec<DvpEntry>,
    /// Not constrained to one under dependent inputs.
    pub sum_all: f64,
}

impl DvpReport {
    pub fn get(&self, subset: &[usize]) -> Option<f64> {
        let key = normalized(subset);
        self.entries.iter().find(|e| e.subset == key).map(|e| e.s)
    }

    /// `S1`, `S1_2`, ... and `sum`, matching [`SensitivityReport::named_values`].
    pub fn named_values(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = self
            .entries
            .iter()
            .map(|e| {
                let name = e.subset.iter().map(|c| (c + 1).to_string()).collect::<Vec<_>>().join("_");
                (format!("S{name}"), e.s)
            })
            .collect();
        out.push(("sum".into(), self.sum_all));
        out
    }
}

fn normalized(subset: &[usize]) -> Vec<usize> {
    let mut s = subset.to_vec();
    s.sort_unstable();
    s
}

/// Classical Sobol indices `S_u = V(eta_u) / V(Y)` of the Hoeffding components
/// built from nonparametric conditional means: `eta_j = m_j - mean(y)` and
/// `eta_jk = m_jk - m_j - m_k + mean(y)`, with `m_u` the leave-one-out local
/// polynomial estimate of `E(Y | X_u)`.
///
/// Under independence these are the usual Sobol indices. Under dependence the
/// components are correlated and the indices no longer add up to one.
pub fn dvp_sobol(sample: &SampleSet, subsets: &[Vec<usize>], cfg: &SmootherConfig) -> Result<DvpReport> {
    let y = sample.y();
    let v_y = total_variance(y)?;
    let mut means: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for u in subsets {
        let u = normalized(u);
        if u.is_empty() || u.len() > 2 || (u.len() == 2 && u[0] == u[1]) {
            return Err(Error::InvalidSpec(format!("subset {u:?} must hold one or two distinct columns")));
        }
        if let Some(&c) = u.iter().find(|&&c| c >= sample.p()) {
            return Err(Error::InvalidSpec(format!("column {c} out of range")));
        }
        for &c in &u {
            means.insert(vec![c], Vec::new());
        }
        means.insert(u, Vec::new());
    }
    for (u, m) in means.iter_mut() {
        let cols: Vec<&[f64]> = u.iter().map(|&c| sample.column(c)).collect();
        *m = loo_conditional_mean(&cols, y, cfg)?;
    }
    let y_bar = stats::mean(y);
    let entries: Vec<DvpEntry> = subsets
        .iter()
        .map(|u| {
            let u = normalized(u);
            let m = &means[&u];
            let v = if u.len() == 2 {
                let (a, b) = (&means[&vec![u[0]]], &means[&vec![u[1]]]);
                let eta: Vec<f64> = (0..y.len()).map(|k| m[k] - a[k] - b[k] + y_bar).collect();
                stats::variance(&eta)
            } else {
                stats::variance(m)
            };
            DvpEntry { subset: u, s: v / v_y }
        })
        .collect();
    let sum_all = entries.iter().map(|e| e.s).sum();
    Ok(DvpReport { entries, sum_all })
}
