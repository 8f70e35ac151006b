//! Input laws: Gaussian mixtures and bivariate copulas, with admissibility
//! certification of the density lower-bound condition
//! `p_X >= M * p_{X_u} * p_{X_{u^c}}`.

mod copula;
mod mixture;
mod sample;

pub use copula::{
    copula_decompose, copula_lower_bound, CopulaFamily, DEFAULT_GENERATOR_NODES, CopulaSpec, GeneratorTable,
    TabulatedCopula,
};
pub use mixture::{check_c2_gaussian, mixture_density_wrt_nu, sample_mixture, GaussianMixtureSpec};
pub use sample::{derive_seed, Block, IpdvLaw, LawBlock, PairStructure, SampleSet};

use serde::{Deserialize, Serialize};

/// How an [`AdmissibilityReport`] was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibilityMethod {
    GaussianPdTest,
    CopulaLowerBound,
    DensityBounds,
}

/// Verdict on the density lower-bound condition.
///
/// `bound_m` is present exactly when `holds` is true, and then lies in `(0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub holds: bool,
    pub bound_m: Option<f64>,
    pub method: AdmissibilityMethod,
    pub details: String,
    /// Set when the bound comes from a numeric scan rather than a closed form.
    #[serde(default)]
    pub caveat: bool,
}

impl AdmissibilityReport {
    pub(crate) fn pass(method: AdmissibilityMethod, bound: f64, details: String) -> Self {
        debug_assert!(bound > 0.0 && bound <= 1.0);
        Self {
            holds: true,
            bound_m: Some(bound),
            method,
            details,
            caveat: false,
        }
    }

    pub(crate) fn fail(method: AdmissibilityMethod, details: String) -> Self {
        Self {
            holds: false,
            bound_m: None,
            method,
            details,
            caveat: false,
        }
    }
}
