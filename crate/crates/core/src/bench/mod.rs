//! Seeded replication harness for the benchmark experiments.
//!
//! Each replication `r` draws its sample from the seed `derive_seed(seed, r)`,
//! decomposes it, and records the generalized indices together with the
//! classical nonparametric (DVP) comparator. Replications run in parallel and
//! are collected in order, so output files do not depend on the thread count.

mod records;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use records::{
    read_records, summarize, write_boxplot, write_records, write_summary, Method, RunRecord, SummaryRow,
};

use crate::distributions::{derive_seed, Block, GaussianMixtureSpec, IpdvLaw, LawBlock};
use crate::hofd::{ipdv_decompose, GaussSeidelConfig};
use crate::indices::{dvp_sobol, generalized_indices, SensitivityReport};
use crate::oracle::{bilinear_model_indices, ishigami_indices, linear4_model_indices};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    /// `Y = X1 + X2 + X1 X2` on one correlated pair.
    Bilinear,
    /// The same model with an uncorrelated second mixture component.
    BilinearIndep,
    /// `Y = 5 X1 + 4 X2 + 3 X3 + 2 X4` with pairs `(X1, X3)` and `(X2, X4)`.
    Linear4,
    /// `Y = sin X1 + a sin^2 X2 + b X3^3 sin X1` with pair `(X1, X2)` and `X3` alone.
    Ishigami,
}

impl Experiment {
    pub const ALL: [Experiment; 4] = [
        Experiment::Bilinear,
        Experiment::BilinearIndep,
        Experiment::Linear4,
        Experiment::Ishigami,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Bilinear => "bilinear",
            Experiment::BilinearIndep => "bilinear_indep",
            Experiment::Linear4 => "linear4",
            Experiment::Ishigami => "ishigami",
        }
    }

    /// Input law used when the configuration does not override it.
    pub fn default_law(self) -> IpdvLaw {
        let pair = |o11, o22, o12| GaussianMixtureSpec::centered_pair(0.2, o11, o22, o12).expect("valid preset");
        let law = match self {
            Experiment::Bilinear => IpdvLaw::single(pair(0.5, 0.5, 0.4)),
            Experiment::BilinearIndep => IpdvLaw::single(pair(0.5, 0.5, 0.0)),
            Experiment::Linear4 => IpdvLaw::new(vec![
                LawBlock { columns: vec![0, 2], spec: pair(0.5, 0.5, 0.4) },
                LawBlock { columns: vec![1, 3], spec: pair(0.7, 0.3, 0.37) },
            ]),
            Experiment::Ishigami => IpdvLaw::new(vec![
                LawBlock { columns: vec![0, 1], spec: pair(0.15, 0.85, 0.3) },
                LawBlock {
                    columns: vec![2],
                    spec: GaussianMixtureSpec::centered(0.2, vec![1.0], vec![vec![0.75]]).expect("valid preset"),
                },
            ]),
        };
        law.expect("valid preset")
    }

    pub fn dim(self) -> usize {
        match self {
            Experiment::Bilinear | Experiment::BilinearIndep => 2,
            Experiment::Linear4 => 4,
            Experiment::Ishigami => 3,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown experiment '{s}'")))
    }
}

/// A benchmark model evaluated on one input row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Bilinear,
    Linear4 { coeffs: [f64; 4] },
    Ishigami { a: f64, b: f64 },
}

impl Model {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Model::Bilinear => x[0] + x[1] + x[0] * x[1],
            Model::Linear4 { coeffs } => coeffs.iter().zip(x).map(|(c, v)| c * v).sum(),
            Model::Ishigami { a, b } => x[0].sin() + a * x[1].sin().powi(2) + b * x[2].powi(3) * x[0].sin(),
        }
    }
}

pub const LINEAR4_COEFFS: [f64; 4] = [5.0, 4.0, 3.0, 2.0];

fn default_n() -> usize {
    1000
}
fn default_reps() -> usize {
    50
}
fn default_a_grid() -> Vec<f64> {
    vec![3.0, 5.0, 7.0, 9.0]
}
fn default_b() -> f64 {
    0.1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_a_grid")]
    pub ishigami_a_grid: Vec<f64>,
    #[serde(default = "default_b")]
    pub ishigami_b: f64,
    /// Replaces the experiment's preset input law; must have the same dimension.
    #[serde(default)]
    pub law: Option<IpdvLaw>,
    #[serde(default)]
    pub gauss_seidel: GaussSeidelConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: default_n(),
            reps: default_reps(),
            seed: 0,
            ishigami_a_grid: default_a_grid(),
            ishigami_b: default_b(),
            law: None,
            gauss_seidel: GaussSeidelConfig::default(),
            output_dir: default_output_dir(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 100 {
            return Err(Error::InvalidSpec(format!("n must be at least 100, got {}", self.n)));
        }
        if self.reps == 0 {
            return Err(Error::InvalidSpec("reps must be at least 1".into()));
        }
        if self.experiment == Experiment::Ishigami {
            if self.ishigami_a_grid.is_empty() {
                return Err(Error::InvalidSpec("the a-grid is empty".into()));
            }
            if self.ishigami_a_grid.iter().chain([&self.ishigami_b]).any(|v| !v.is_finite()) {
                return Err(Error::InvalidSpec("Ishigami parameters must be finite".into()));
            }
        }
        if let Some(law) = &self.law {
            if law.dim() != self.experiment.dim() {
                return Err(Error::InvalidSpec(format!(
                    "{} needs {} inputs, the law has {}",
                    self.experiment,
                    self.experiment.dim(),
                    law.dim()
                )));
            }
        }
        self.gauss_seidel.validate()
    }

    pub fn law(&self) -> IpdvLaw {
        self.law.clone().unwrap_or_else(|| self.experiment.default_law())
    }

    /// One `(label, model)` per model variant: a single entry, or one per `a`
    /// for Ishigami, labelled `ishigami[a=..]`.
    pub fn variants(&self) -> Vec<(String, Model)> {
        match self.experiment {
            Experiment::Bilinear | Experiment::BilinearIndep => vec![(self.experiment.to_string(), Model::Bilinear)],
            Experiment::Linear4 => vec![(self.experiment.to_string(), Model::Linear4 { coeffs: LINEAR4_COEFFS })],
            Experiment::Ishigami => self
                .ishigami_a_grid
                .iter()
                .map(|&a| (format!("ishigami[a={a}]"), Model::Ishigami { a, b: self.ishigami_b }))
                .collect(),
        }
    }
}

/// Ground truth for a model under a law, when one is available.
pub fn oracle_indices(experiment: Experiment, law: &IpdvLaw, model: Model) -> Result<SensitivityReport> {
    let blocks = law.blocks();
    match (experiment, model) {
        (Experiment::Bilinear | Experiment::BilinearIndep, Model::Bilinear) => bilinear_model_indices(&blocks[0].spec),
        (Experiment::Linear4, Model::Linear4 { coeffs }) => {
            if blocks[0].columns != [0, 2] || blocks[1].columns != [1, 3] {
                return Err(Error::InvalidSpec("linear4 oracle needs pairs (0,2) and (1,3)".into()));
            }
            linear4_model_indices(&blocks[0].spec, &blocks[1].spec, coeffs)
        }
        (Experiment::Ishigami, Model::Ishigami { a, b }) => {
            if blocks[0].columns != [0, 1] {
                return Err(Error::InvalidSpec("Ishigami oracle needs the pair (0,1) first".into()));
            }
            ishigami_indices(&blocks[0].spec, &blocks[1].spec, a, b)
        }
        _ => Err(Error::InvalidSpec(format!("no oracle for {experiment} with {model:?}"))),
    }
}

/// Seed of replication `r`; shared by every model variant of a run.
pub fn replication_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, r as u64)
}

/// Records of one replication.
pub fn run_replication(label: &str, law: &IpdvLaw, model: Model, cfg: &ExperimentConfig, r: usize) -> Result<Vec<RunRecord>> {
    let sample = law.sample(cfg.n, replication_seed(cfg.seed, r), |x| model.eval(x))?;
    let pairs = law.pair_structure();
    let decomposition = ipdv_decompose(&sample, &pairs, &cfg.gauss_seidel)?;
    let converged = decomposition.converged();
    let generalized = generalized_indices(&decomposition, sample.y())?;
    let mut subsets: Vec<Vec<usize>> = (0..sample.p()).map(|c| vec![c]).collect();
    subsets.extend(pairs.blocks().iter().filter_map(|b| match *b {
        Block::Pair(a, c) => Some(vec![a, c]),
        Block::Single(_) => None,
    }));
    let dvp = dvp_sobol(&sample, &subsets, &cfg.gauss_seidel.smoother)?;
    let record = |method, (index, estimate): (String, f64)| RunRecord {
        experiment: label.to_string(),
        replication: r as i64,
        index,
        estimate,
        method,
        converged,
    };
    let mut out: Vec<RunRecord> = generalized
        .named_values()
        .into_iter()
        .map(|v| record(Method::Generalized, v))
        .collect();
    out.extend(dvp.named_values().into_iter().map(|v| record(Method::Dvp, v)));
    Ok(out)
}

/// Everything a run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    /// Replications per model variant.
    pub reps: usize,
    /// Non-convergent replications per model variant.
    pub excluded: Vec<(String, usize)>,
    /// Variants whose oracle could not be computed, with the reason.
    pub missing_oracles: Vec<(String, String)>,
}

impl RunOutcome {
    /// Fails when more than 20% of the replications of any variant did not converge.
    pub fn check_convergence(&self) -> Result<()> {
        match self.excluded.iter().map(|(_, f)| *f).max() {
            Some(failed) if failed * 5 > self.reps => Err(Error::NonConvergence { failed, total: self.reps }),
            _ => Ok(()),
        }
    }
}

/// Runs every replication of every model variant and returns the records and
/// their summary, without touching the file system.
///
/// The input law is certified first; a failed certification aborts before any
/// sampling.
pub fn execute(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let law = cfg.law();
    for (block, report) in law.blocks().iter().zip(law.certify()?) {
        if !report.holds {
            return Err(Error::Inadmissible(format!(
                "block on columns {:?}: {}",
                block.columns, report.details
            )));
        }
    }
    let mut records = Vec::new();
    let mut excluded = Vec::new();
    let mut missing_oracles = Vec::new();
    for (label, model) in cfg.variants() {
        match oracle_indices(cfg.experiment, &law, model) {
            Ok(oracle) => records.extend(oracle.named_values().into_iter().map(|(index, estimate)| RunRecord {
                experiment: label.clone(),
                replication: -1,
                index,
                estimate,
                method: Method::Oracle,
                converged: true,
            })),
            Err(e) => missing_oracles.push((label.clone(), e.to_string())),
        }
        let reps: Vec<Vec<RunRecord>> = (0..cfg.reps)
            .into_par_iter()
            .map(|r| run_replication(&label, &law, model, cfg, r))
            .collect::<Result<_>>()?;
        let failed = reps.iter().filter(|r| r.first().is_some_and(|x| !x.converged)).count();
        excluded.push((label, failed));
        records.extend(reps.into_iter().flatten());
    }
    let summary = summarize(&records)?;
    Ok(RunOutcome {
        records,
        summary,
        reps: cfg.reps,
        excluded,
        missing_oracles,
    })
}

/// [`execute`] followed by writing `records.csv`, `summary.csv` and
/// `boxplot.csv` into the output directory. The files are written even when
/// too many replications failed to converge, and the error is returned after.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let outcome = execute(cfg)?;
    write_outputs(&cfg.output_dir, &outcome)?;
    outcome.check_convergence()?;
    Ok(outcome)
}

pub fn write_outputs(dir: &Path, outcome: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
        Ok(std::io::BufWriter::new(std::fs::File::create(dir.join(name))?))
    };
    write_records(create("records.csv")?, &outcome.records)?;
    write_summary(create("summary.csv")?, &outcome.summary)?;
    write_boxplot(create("boxplot.csv")?, &outcome.records)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            assert_eq!(e.default_law().dim(), e.dim());
        }
        assert!("sobol".parse::<Experiment>().is_err());
    }

    #[test]
    fn presets_are_admissible() {
        for e in Experiment::ALL {
            assert!(e.default_law().certify().unwrap().iter().all(|r| r.holds), "{e}");
        }
    }

    #[test]
    fn config_json_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(r#"{"experiment": "ishigami", "seed": 3}"#).unwrap();
        assert_eq!(cfg.n, 1000);
        assert_eq!(cfg.reps, 50);
        assert_eq!(cfg.ishigami_a_grid, vec![3.0, 5.0, 7.0, 9.0]);
        assert_eq!(cfg.variants()[2].0, "ishigami[a=7]");
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "bilinear", "m": 3}"#).is_err());
        let small = ExperimentConfig { n: 50, ..ExperimentConfig::new(Experiment::Bilinear) };
        assert!(small.validate().is_err());
    }

    #[test]
    fn inadmissible_law_aborts() {
        let bad = GaussianMixtureSpec::centered_pair(0.2, 1.5, 0.5, 0.1).unwrap();
        let cfg = ExperimentConfig {
            law: Some(IpdvLaw::single(bad).unwrap()),
            reps: 1,
            ..ExperimentConfig::new(Experiment::Bilinear)
        };
        match execute(&cfg) {
            Err(Error::Inadmissible(msg)) => assert!(msg.contains("positive definite"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn models() {
        assert_eq!(Model::Bilinear.eval(&[2.0, 3.0]), 11.0);
        assert_eq!(Model::Linear4 { coeffs: LINEAR4_COEFFS }.eval(&[1.0, 1.0, 1.0, 1.0]), 14.0);
        let ish = Model::Ishigami { a: 7.0, b: 0.1 };
        assert!((ish.eval(&[0.0, std::f64::consts::FRAC_PI_2, 2.0]) - 7.0).abs() < 1e-12);
    }
}
