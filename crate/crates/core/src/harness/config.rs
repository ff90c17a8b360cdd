//! TOML experiment configuration.

use serde::{Deserialize, Serialize};

use crate::cocycle::{uniform_markov, MatrixCocycle};
use crate::error::{LabError, Result};
use crate::linalg::Mat;
use crate::symbolic::{parse_word, Law, Subshift};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    MainTheorem,
    ExampleBound,
    Semicontinuity,
    NormProperties,
    CorollaryScan,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 5] = [
        ExperimentKind::MainTheorem,
        ExperimentKind::ExampleBound,
        ExperimentKind::Semicontinuity,
        ExperimentKind::NormProperties,
        ExperimentKind::CorollaryScan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::MainTheorem => "main_theorem",
            ExperimentKind::ExampleBound => "example_bound",
            ExperimentKind::Semicontinuity => "semicontinuity",
            ExperimentKind::NormProperties => "norm_properties",
            ExperimentKind::CorollaryScan => "corollary_scan",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown experiment kind `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubshiftSpec {
    #[serde(default = "default_alphabet")]
    pub alphabet: usize,
    /// Transition matrix as bit rows ("11", "10"); omitted means the full shift.
    #[serde(default)]
    pub transitions: Option<Vec<String>>,
    #[serde(default = "default_theta")]
    pub theta: f64,
}

fn default_alphabet() -> usize {
    2
}

fn default_theta() -> f64 {
    0.5
}

impl Default for SubshiftSpec {
    fn default() -> Self {
        SubshiftSpec {
            alphabet: 2,
            transitions: None,
            theta: 0.5,
        }
    }
}

impl SubshiftSpec {
    pub fn build(&self) -> Result<Subshift> {
        match &self.transitions {
            Some(rows) => {
                if rows.len() != self.alphabet {
                    return Err(LabError::Config(format!(
                        "subshift.transitions has {} rows for an alphabet of {}",
                        rows.len(),
                        self.alphabet
                    )));
                }
                Subshift::from_bit_rows(rows, self.theta)
            }
            None => Subshift::full(self.alphabet, self.theta),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableEntry {
    /// Central word `x_{-r} .. x_r`.
    pub word: String,
    pub matrix: Vec<Vec<f64>>,
}

/// Cocycle descriptor; matrices are given row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CocycleSpec {
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    /// One matrix per symbol.
    OneStep {
        matrices: Vec<Vec<Vec<f64>>>,
    },
    LocallyConstant {
        window: usize,
        table: Vec<TableEntry>,
    },
    RandomLocallyConstant {
        window: usize,
        dim: usize,
        lo: f64,
        hi: f64,
        seed: u64,
    },
    PaperExample {
        a: f64,
        #[serde(default)]
        extra_diagonal: Vec<f64>,
    },
    BlockDiagonal {
        blocks: Vec<CocycleSpec>,
    },
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(LabError::Config(format!("matrix must be square and non-empty, got {n} rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LabError::Config("matrix entries must be finite".into()));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn matrix_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

impl CocycleSpec {
    pub fn build(&self, shift: &Subshift) -> Result<MatrixCocycle> {
        match self {
            CocycleSpec::Constant { matrix } => MatrixCocycle::constant(matrix_from_rows(matrix)?),
            CocycleSpec::OneStep { matrices } => {
                if matrices.len() != shift.k() {
                    return Err(LabError::Config(format!(
                        "one_step needs {} matrices, got {}",
                        shift.k(),
                        matrices.len()
                    )));
                }
                MatrixCocycle::one_step(matrices.iter().map(|m| matrix_from_rows(m)).collect::<Result<_>>()?)
            }
            CocycleSpec::LocallyConstant { window, table } => {
                let entries = table
                    .iter()
                    .map(|e| Ok((parse_word(&e.word)?, matrix_from_rows(&e.matrix)?)))
                    .collect::<Result<Vec<_>>>()?;
                MatrixCocycle::locally_constant(shift.k(), *window, entries)
            }
            CocycleSpec::RandomLocallyConstant {
                window,
                dim,
                lo,
                hi,
                seed,
            } => MatrixCocycle::random_locally_constant(shift.k(), *window, *dim, *lo, *hi, *seed),
            CocycleSpec::PaperExample { a, extra_diagonal } => {
                MatrixCocycle::paper_example(shift.theta(), *a, extra_diagonal.clone())
            }
            CocycleSpec::BlockDiagonal { blocks } => {
                MatrixCocycle::block_diagonal(blocks.iter().map(|b| b.build(shift)).collect::<Result<_>>()?)
            }
        }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = values.len();
        CocycleSpec::Constant {
            matrix: (0..d).map(|i| (0..d).map(|j| if i == j { values[i] } else { 0.0 }).collect()).collect(),
        }
    }
}

/// Numeric knobs. Every field has an explicit default so the echoed config is complete.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Knobs {
    /// Steps per Monte Carlo sample.
    pub n: usize,
    pub samples: usize,
    pub max_period: usize,
    /// Recurrence levels `k = 1..=levels`, `ρ_k = θ^k`.
    pub levels: u32,
    /// Recurrences shorter than this are skipped.
    pub min_return: u64,
    pub max_return: u64,
    /// Fixed δ for the norm suite; `None` uses the gate grid.
    pub delta: Option<f64>,
    pub delta_fractions: Vec<f64>,
    pub delta_cap: f64,
    pub min_gap: f64,
    pub random_vectors: usize,
    /// Per-exponent tolerance at the last level.
    pub tolerance: f64,
    pub discrepancy_tolerance: f64,
    pub word_length: usize,
    pub kingman_n: Vec<usize>,
    /// Truncation level; `None` truncates at `m = n`.
    pub kingman_m: Option<f64>,
    pub kingman_samples: usize,
    pub kingman_min_drop: f64,
    pub de_bruijn_orders: Vec<usize>,
    pub family_max: usize,
}

impl Default for Knobs {
    fn default() -> Self {
        Knobs {
            n: 2000,
            samples: 64,
            max_period: 8,
            levels: 5,
            min_return: 256,
            max_return: 1 << 18,
            delta: None,
            delta_fractions: vec![0.25, 0.5, 0.75],
            delta_cap: 0.2,
            min_gap: 0.2,
            random_vectors: 4,
            tolerance: 0.05,
            discrepancy_tolerance: 0.02,
            word_length: 4,
            kingman_n: vec![10, 20, 50],
            kingman_m: None,
            kingman_samples: 20_000,
            kingman_min_drop: 1.0,
            de_bruijn_orders: vec![2, 3, 4, 5, 6],
            family_max: 8,
        }
    }
}

/// Module budgets for the knobs.
const MAX_STEPS: usize = 1_000_000;
const MAX_SAMPLES: usize = 1_000_000;
const MAX_PERIOD: usize = 20;

impl Knobs {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(LabError::Config(format!("knobs.{field}: {why}")));
        if self.n == 0 || self.n > MAX_STEPS {
            return bad("n", "must lie in 1..=1000000");
        }
        if self.samples == 0 || self.samples > MAX_SAMPLES || self.kingman_samples == 0 || self.kingman_samples > MAX_SAMPLES {
            return bad("samples", "must lie in 1..=1000000");
        }
        if self.max_period == 0 || self.max_period > MAX_PERIOD {
            return bad("max_period", "must lie in 1..=20");
        }
        if self.levels == 0 || self.levels > 20 {
            return bad("levels", "must lie in 1..=20");
        }
        if self.max_return < self.min_return || self.max_return > 1 << 24 {
            return bad("max_return", "must be at least min_return and at most 2^24");
        }
        if self.delta.is_some_and(|d| !(d > 0.0)) {
            return bad("delta", "must be positive");
        }
        if self.delta_fractions.is_empty() || self.delta_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
            return bad("delta_fractions", "must be non-empty fractions in (0, 1)");
        }
        if !(self.delta_cap > 0.0) {
            return bad("delta_cap", "must be positive");
        }
        if !(self.tolerance > 0.0 && self.discrepancy_tolerance > 0.0) {
            return bad("tolerance", "tolerances must be positive");
        }
        if self.word_length == 0 || self.word_length > 12 {
            return bad("word_length", "must lie in 1..=12");
        }
        if self.kingman_n.is_empty() || self.kingman_n.contains(&0) {
            return bad("kingman_n", "must be non-empty positive step counts");
        }
        if self.kingman_m.is_some_and(|m| !(m > 0.0)) {
            return bad("kingman_m", "must be positive");
        }
        if self.de_bruijn_orders.iter().any(|&l| l == 0 || l > 12) {
            return bad("de_bruijn_orders", "orders must lie in 1..=12");
        }
        if self.family_max < 2 || self.family_max > 40 {
            return bad("family_max", "must lie in 2..=40");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: u64,
    #[serde(default)]
    pub subshift: SubshiftSpec,
    pub cocycle: CocycleSpec,
    #[serde(default)]
    pub measure: Option<Law>,
    #[serde(default)]
    pub knobs: Knobs,
    #[serde(default)]
    pub output: OutputSpec,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind, seed: u64, cocycle: CocycleSpec) -> Self {
        ExperimentConfig {
            kind,
            seed,
            subshift: SubshiftSpec::default(),
            cocycle,
            measure: None,
            knobs: Knobs::default(),
            output: OutputSpec::default(),
        }
    }

    /// Stock configuration for `kind`: the example cocycle for the example and
    /// corollary runs, the nilpotent pair for semicontinuity, diag(2, 1/2) for the
    /// norm suite and a seeded random 2×2 cocycle under the fair coin otherwise.
    pub fn default_for(kind: ExperimentKind, seed: u64) -> Self {
        let cocycle = match kind {
            ExperimentKind::MainTheorem => CocycleSpec::RandomLocallyConstant {
                window: 0,
                dim: 2,
                lo: 0.5,
                hi: 1.5,
                seed,
            },
            ExperimentKind::ExampleBound | ExperimentKind::CorollaryScan => CocycleSpec::PaperExample {
                a: 3.0,
                extra_diagonal: vec![],
            },
            ExperimentKind::Semicontinuity => CocycleSpec::OneStep {
                matrices: vec![vec![vec![0.0, 1.0], vec![0.0, 0.0]], vec![vec![2.0, 0.0], vec![0.0, 2.0]]],
            },
            ExperimentKind::NormProperties => CocycleSpec::diagonal(&[2.0, 0.5]),
        };
        let mut cfg = Self::new(kind, seed, cocycle);
        match kind {
            ExperimentKind::MainTheorem => cfg.measure = Some(Law::fair_coin()),
            ExperimentKind::ExampleBound => cfg.knobs.max_period = 12,
            _ => {}
        }
        cfg
    }

    /// Parse and validate; errors carry the TOML line/field diagnostic.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| LabError::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            LabError::Config(msg) => LabError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Fully resolved config with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.knobs.validate()?;
        let shift = self.subshift.build()?;
        self.cocycle.build(&shift).map_err(|e| LabError::Config(format!("cocycle: {e}")))?;
        if let Some(law) = &self.measure {
            law.validate().map_err(|e| LabError::Config(format!("measure: {e}")))?;
            law.check_compatible(&shift)?;
        }
        Ok(())
    }

    pub fn shift(&self) -> Result<Subshift> {
        self.subshift.build()
    }

    pub fn cocycle(&self) -> Result<MatrixCocycle> {
        self.cocycle.build(&self.shift()?)
    }

    /// Configured law; otherwise uniform Bernoulli on a full shift and the
    /// uniform-transition Markov chain on a proper subshift.
    pub fn law(&self) -> Result<Law> {
        if let Some(l) = &self.measure {
            return Ok(l.clone());
        }
        let shift = self.shift()?;
        Ok(if shift.is_full() {
            Law::uniform(shift.k())
        } else {
            uniform_markov(&shift)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "example_bound"
seed = 7

[cocycle]
type = "paper_example"
a = 3.0
"#,
        )
        .unwrap();
        assert_eq!(cfg.kind, ExperimentKind::ExampleBound);
        assert_eq!(cfg.knobs, Knobs::default());
        assert_eq!(cfg.cocycle().unwrap().dim(), 1);
    }

    #[test]
    fn echo_round_trips() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::MainTheorem, 3, CocycleSpec::diagonal(&[2.0, 0.5]));
        cfg.measure = Some(Law::fair_coin());
        let back = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn nested_blocks_and_markov() {
        let cfg = ExperimentConfig::from_toml(
            r#"
kind = "corollary_scan"
seed = 1

[subshift]
transitions = ["11", "10"]

[cocycle]
type = "block_diagonal"
[[cocycle.blocks]]
type = "paper_example"
a = 3.0
[[cocycle.blocks]]
type = "constant"
matrix = [[2.0]]

[measure]
type = "markov"
matrix = [[0.5, 0.5], [1.0, 0.0]]
"#,
        )
        .unwrap();
        assert_eq!(cfg.cocycle().unwrap().dim(), 2);
    }

    #[test]
    fn diagnostics_name_the_problem() {
        let e = ExperimentConfig::from_toml("kind = \"main_theorem\"\nseed = 1\n[cocycle]\ntype = \"constant\"\nmatrix = [[1.0, 2.0]]\n").unwrap_err();
        assert!(e.to_string().contains("square"), "{e}");
        let e = ExperimentConfig::from_toml("kind = \"main_theorem\"\n[cocycle]\ntype = \"constant\"\nmatrix = [[1.0]]\n").unwrap_err();
        assert!(e.to_string().contains("seed"), "{e}");
        let e = ExperimentConfig::from_toml("kind = \"main_theorem\"\nseed = 1\nbogus = 2\n[cocycle]\ntype = \"constant\"\nmatrix = [[1.0]]\n").unwrap_err();
        assert!(e.to_string().contains("line"), "{e}");
        let e = ExperimentConfig::from_toml("kind = \"main_theorem\"\nseed = 1\n[knobs]\nmax_period = 99\n[cocycle]\ntype = \"constant\"\nmatrix = [[1.0]]\n").unwrap_err();
        assert!(e.to_string().contains("max_period"), "{e}");
    }
}
