use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_c2_gaussian, AdmissibilityReport, GaussianMixtureSpec};
use crate::{Error, Result};

/// Mixes a master seed with a stream index (splitmix64 finalizer), so parallel
/// workers never share generator state.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One block of an IPDV partition (0-based column indices).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Block {
    Pair(usize, usize),
    Single(usize),
}

impl Block {
    pub fn columns(&self) -> Vec<usize> {
        match *self {
            Block::Pair(a, b) => vec![a, b],
            Block::Single(a) => vec![a],
        }
    }
}

/// Partition of the input columns into mutually independent blocks of size one or two.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairStructure {
    blocks: Vec<Block>,
    dim: usize,
}

impl PairStructure {
    pub fn new(blocks: Vec<Block>, dim: usize) -> Result<Self> {
        let mut seen = vec![false; dim];
        for block in &blocks {
            if let Block::Pair(a, b) = *block {
                if a == b {
                    return Err(Error::InvalidSpec(format!("pair ({a},{b}) repeats a column")));
                }
            }
            for c in block.columns() {
                if c >= dim {
                    return Err(Error::InvalidSpec(format!(
                        "column {c} out of range for {dim} inputs"
                    )));
                }
                if std::mem::replace(&mut seen[c], true) {
                    return Err(Error::InvalidSpec(format!("column {c} appears in two blocks")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidSpec(format!("column {missing} belongs to no block")));
        }
        Ok(Self { blocks, dim })
    }

    /// `(0,1), (2,3), ...` with a trailing singleton when `dim` is odd.
    pub fn consecutive(dim: usize) -> Result<Self> {
        let mut blocks: Vec<Block> = (0..dim / 2).map(|i| Block::Pair(2 * i, 2 * i + 1)).collect();
        if dim % 2 == 1 {
            blocks.push(Block::Single(dim - 1));
        }
        Self::new(blocks, dim)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Inputs (stored column-wise) and model outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    columns: Vec<Vec<f64>>,
    y: Vec<f64>,
    seed: u64,
}

impl SampleSet {
    pub fn new(columns: Vec<Vec<f64>>, y: Vec<f64>, seed: u64) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::InvalidSpec(format!("need at least 2 observations, got {n}")));
        }
        if columns.is_empty() {
            return Err(Error::InvalidSpec("no input columns".into()));
        }
        if let Some(j) = columns.iter().position(|c| c.len() != n) {
            return Err(Error::InvalidSpec(format!(
                "column {j} has {} rows but y has {n}",
                columns[j].len()
            )));
        }
        if columns.iter().flatten().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("sample contains NaN or infinite values".into()));
        }
        Ok(Self { columns, y, seed })
    }

    /// Evaluates `model` on each row of `columns`.
    pub fn from_model(
        columns: Vec<Vec<f64>>,
        model: impl Fn(&[f64]) -> f64,
        seed: u64,
    ) -> Result<Self> {
        let n = columns.first().map_or(0, Vec::len);
        let mut row = vec![0.0; columns.len()];
        let y = (0..n)
            .map(|k| {
                for (r, c) in row.iter_mut().zip(&columns) {
                    *r = c[k];
                }
                model(&row)
            })
            .collect();
        Self::new(columns, y, seed)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Same inputs, new outputs.
    pub fn with_output(&self, y: Vec<f64>) -> Result<Self> {
        Self::new(self.columns.clone(), y, self.seed)
    }
}

/// One independent block of an IPDV input law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawBlock {
    pub columns: Vec<usize>,
    pub spec: GaussianMixtureSpec,
}

/// Product of independent Gaussian-mixture blocks of dimension one or two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IpdvLaw {
    blocks: Vec<LawBlock>,
    dim: usize,
}

impl IpdvLaw {
    pub fn new(blocks: Vec<LawBlock>) -> Result<Self> {
        let dim = blocks.iter().map(|b| b.columns.len()).sum();
        let mut structure = Vec::with_capacity(blocks.len());
        for b in &blocks {
            if b.columns.len() != b.spec.dim() {
                return Err(Error::InvalidSpec(format!(
                    "block {:?} has {} columns but its mixture has dimension {}",
                    b.columns,
                    b.columns.len(),
                    b.spec.dim()
                )));
            }
            structure.push(match b.columns[..] {
                [a] => Block::Single(a),
                [a, c] => Block::Pair(a, c),
                _ => {
                    return Err(Error::InvalidSpec(format!(
                        "block {:?} must have one or two columns",
                        b.columns
                    )))
                }
            });
        }
        PairStructure::new(structure, dim)?;
        Ok(Self { blocks, dim })
    }

    /// A single block covering columns `0..spec.dim()`.
    pub fn single(spec: GaussianMixtureSpec) -> Result<Self> {
        let columns = (0..spec.dim()).collect();
        Self::new(vec![LawBlock { columns, spec }])
    }

    pub fn blocks(&self) -> &[LawBlock] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn pair_structure(&self) -> PairStructure {
        let blocks = self
            .blocks
            .iter()
            .map(|b| match b.columns[..] {
                [a] => Block::Single(a),
                [a, c] => Block::Pair(a, c),
                _ => unreachable!("validated at construction"),
            })
            .collect();
        PairStructure::new(blocks, self.dim).expect("validated at construction")
    }

    /// Admissibility report per block.
    pub fn certify(&self) -> Result<Vec<AdmissibilityReport>> {
        self.blocks.iter().map(|b| check_c2_gaussian(&b.spec)).collect()
    }

    /// Draws `n` rows; each block uses its own derived stream.
    pub fn sample_columns(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        if n == 0 {
            return Err(Error::EmptyRequest("sample size must be at least 1".into()));
        }
        let mut columns = vec![Vec::new(); self.dim];
        for (i, block) in self.blocks.iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            for (c, values) in block.columns.iter().zip(block.spec.sample_columns(n, &mut rng)) {
                columns[*c] = values;
            }
        }
        Ok(columns)
    }

    pub fn sample(&self, n: usize, seed: u64, model: impl Fn(&[f64]) -> f64) -> Result<SampleSet> {
        SampleSet::from_model(self.sample_columns(n, seed)?, model, seed)
    }
}
