//! The experiment file: one JSON document, unknown keys rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::estimators::Observable;
use crate::measures::{LevyMeasure, PhiTable, PhiVariant, RadialProfile, TruncationConfig};
use crate::operators::{ComparisonCase, Q0Profile, Sigma, TestFunction};
use crate::simulate::{CouplingSpec, Record, Scheme, SdeSpec, DEFAULT_EXPLOSION_BOUND, DEFAULT_MAX_STEP};

/// `f64` that also reads and writes `"inf"` for `+∞`.
mod extended {
    use serde::{de, Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) if matches!(t.as_str(), "inf" | "infinity" | "Infinity") => Ok(f64::INFINITY),
            Repr::Text(t) => Err(de::Error::custom(format!("expected a number or \"inf\", got {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    pub point: Vec<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Zero { dim: usize },
    Stable { dim: usize, alpha: f64, scale: f64 },
    TruncatedStable { dim: usize, alpha: f64, scale: f64, range: f64 },
    TemperedStable { dim: usize, alpha: f64, scale: f64, rate: f64 },
    Atoms { dim: usize, atoms: Vec<AtomConfig> },
    /// Rows `z_1, ..., z_d, mass`; relative paths resolve against the config file.
    AtomsCsv { path: PathBuf },
}

impl MeasureConfig {
    pub fn build(&self, base: &Path) -> Result<LevyMeasure> {
        match self {
            MeasureConfig::Zero { dim } => Ok(LevyMeasure::zero(*dim)),
            MeasureConfig::Stable { dim, alpha, scale } => LevyMeasure::stable(*dim, *alpha, *scale),
            MeasureConfig::TruncatedStable { dim, alpha, scale, range } => {
                LevyMeasure::radial(*dim, RadialProfile::truncated_stable(*dim, *alpha, *scale, *range))
            }
            MeasureConfig::TemperedStable { dim, alpha, scale, rate } => {
                LevyMeasure::radial(*dim, RadialProfile::tempered_stable(*dim, *alpha, *scale, *rate))
            }
            MeasureConfig::Atoms { dim, atoms } => {
                LevyMeasure::atoms(*dim, atoms.iter().map(|a| (a.point.clone(), a.mass)))
            }
            MeasureConfig::AtomsCsv { path } => {
                let p = base.join(path);
                let f = std::fs::File::open(&p)
                    .map_err(|e| Error::InvalidMeasure(format!("cannot open {}: {e}", p.display())))?;
                LevyMeasure::atoms_from_csv(f)
            }
        }
    }
}

fn default_eta() -> f64 {
    0.5
}

fn default_kappa() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Q0Config {
    Full,
    Zero,
    Ball { radius: f64 },
    HalfDistance,
    Scaled { factor: f64 },
}

impl Q0Config {
    fn build(&self) -> Q0Profile {
        match *self {
            Q0Config::Full => Q0Profile::Full,
            Q0Config::Zero => Q0Profile::Zero,
            Q0Config::Ball { radius } => Q0Profile::Ball { radius },
            Q0Config::HalfDistance => Q0Profile::HalfDistance,
            Q0Config::Scaled { factor } => Q0Profile::Scaled { factor },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeConfig {
    Reflection {
        #[serde(default = "default_eta", with = "extended")]
        eta: f64,
    },
    Basic {
        #[serde(default = "default_kappa", with = "extended")]
        kappa: f64,
    },
    Refbasic {
        #[serde(default = "default_q0")]
        q0: Q0Config,
    },
}

fn default_q0() -> Q0Config {
    Q0Config::Full
}

impl SchemeConfig {
    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "reflection" => SchemeConfig::Reflection { eta: default_eta() },
            "basic" => SchemeConfig::Basic { kappa: default_kappa() },
            "refbasic" => SchemeConfig::Refbasic { q0: default_q0() },
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            SchemeConfig::Reflection { .. } => "reflection",
            SchemeConfig::Basic { .. } => "basic",
            SchemeConfig::Refbasic { .. } => "refbasic",
        }
    }

    pub fn build(&self) -> Scheme {
        match self {
            SchemeConfig::Reflection { eta } => Scheme::Reflection { eta: *eta },
            SchemeConfig::Basic { kappa } => Scheme::RefinedBasic { kappa: *kappa },
            SchemeConfig::Refbasic { q0 } => Scheme::ReflectionBasic { q0: q0.build() },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordConfig {
    Off,
    Jumps,
    Full,
}

impl From<RecordConfig> for Record {
    fn from(r: RecordConfig) -> Self {
        match r {
            RecordConfig::Off => Record::Off,
            RecordConfig::Jumps => Record::Jumps,
            RecordConfig::Full => Record::Full,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub horizon: f64,
    pub max_step: f64,
    pub explosion_bound: f64,
    pub record: RecordConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            max_step: DEFAULT_MAX_STEP,
            explosion_bound: DEFAULT_EXPLOSION_BOUND,
            record: RecordConfig::Jumps,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    pub t_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            t_grid: vec![0.5, 1.0, 2.0, 4.0],
            delta_grid: vec![0.01, 0.05, 0.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiVariantConfig {
    ReflectionA,
    BasicB,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TestFunctionConfig {
    Identity,
    Capped { c: f64 },
    Exponential { a: f64 },
    Phi { variant: PhiVariantConfig },
}

impl TestFunctionConfig {
    pub fn build(&self, nu: &LevyMeasure, cfg: &TruncationConfig) -> Result<TestFunction> {
        let f = match *self {
            TestFunctionConfig::Identity => TestFunction::Identity,
            TestFunctionConfig::Capped { c } => TestFunction::Capped { c },
            TestFunctionConfig::Exponential { a } => TestFunction::Exponential { a },
            TestFunctionConfig::Phi { variant } => {
                let v = match variant {
                    PhiVariantConfig::ReflectionA => PhiVariant::ReflectionA,
                    PhiVariantConfig::BasicB => PhiVariant::BasicB,
                };
                TestFunction::PhiProfile(Arc::new(PhiTable::build(nu, v, cfg)?))
            }
        };
        f.validate()?;
        Ok(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseConfig {
    InfiniteRange,
    FiniteRange,
}

impl From<CaseConfig> for ComparisonCase {
    fn from(c: CaseConfig) -> Self {
        match c {
            CaseConfig::InfiniteRange => ComparisonCase::InfiniteRange,
            CaseConfig::FiniteRange => ComparisonCase::FiniteRange,
        }
    }
}

/// A pair of starting points `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub case: CaseConfig,
    /// Empty means the single pair `(x0, y0)`.
    pub pairs: Vec<PairConfig>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            case: CaseConfig::InfiniteRange,
            pairs: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaConfig {
    Identity,
    OnePlusSquare,
}

impl SigmaConfig {
    pub fn build(self) -> Sigma {
        match self {
            SigmaConfig::Identity => Sigma::identity(),
            SigmaConfig::OnePlusSquare => Sigma::one_plus_square(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Lifts the system to `σ(x) dZ` noise.
    pub sigma: Option<SigmaConfig>,
    /// Empty means the single pair `(x0, y0)`.
    pub pairs: Vec<PairConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Main artifact; standard output when absent.
    pub path: Option<PathBuf>,
    pub format: Format,
    /// JSON summary written next to a CSV artifact.
    pub summary: Option<PathBuf>,
}

fn default_paths() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub measure: MeasureConfig,
    pub drift: Drift,
    pub scheme: SchemeConfig,
    /// `δ_meet`; scheme default when absent.
    #[serde(default)]
    pub meet_threshold: Option<f64>,
    #[serde(default)]
    pub truncation: TruncationConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// Starting points; `0.1 e₁` and `0` when absent.
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default = "default_observable")]
    pub observable: Observable,
    #[serde(default = "default_test_function")]
    pub test_function: TestFunctionConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_observable() -> Observable {
    Observable::Tanh { scale: 1.0 }
}

fn default_test_function() -> TestFunctionConfig {
    TestFunctionConfig::Exponential { a: 1.0 }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            measure: MeasureConfig::Stable {
                dim: 1,
                alpha: 1.0,
                scale: 1.0,
            },
            drift: Drift::Linear { k: -1.0 },
            scheme: SchemeConfig::Reflection { eta: default_eta() },
            meet_threshold: None,
            truncation: TruncationConfig::default(),
            simulation: SimulationConfig::default(),
            x0: None,
            y0: None,
            grids: Grids::default(),
            n_paths: default_paths(),
            seed: 0,
            threads: None,
            observable: default_observable(),
            test_function: default_test_function(),
            compare: CompareConfig::default(),
            verify: VerifyConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Digest of everything that can change numeric results; worker count and
    /// output locations are excluded.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.threads = None;
        c.output = OutputConfig::default();
        crate::report::digest(&serde_json::to_vec(&c).expect("config serializes"))
    }
}

/// Everything a subcommand needs, validated before any computation.
#[derive(Debug, Clone)]
pub struct Setup {
    pub nu: LevyMeasure,
    pub spec: SdeSpec,
    pub coupling: CouplingSpec,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig, base: &Path) -> Result<Self> {
        let nu = cfg.measure.build(base)?;
        let d = nu.dim();
        let mut spec = SdeSpec::new(cfg.drift.clone(), nu.clone(), cfg.truncation, cfg.simulation.horizon)?;
        spec.max_step = cfg.simulation.max_step;
        spec.explosion_bound = cfg.simulation.explosion_bound;
        spec.validate()?;
        let coupling = CouplingSpec {
            scheme: cfg.scheme.build(),
            meet_threshold: cfg.meet_threshold,
        };
        let x0 = cfg.x0.clone().unwrap_or_else(|| {
            let mut v = vec![0.0; d];
            v[0] = 0.1;
            v
        });
        let y0 = cfg.y0.clone().unwrap_or_else(|| vec![0.0; d]);
        let pairs = cfg.compare.pairs.iter().chain(&cfg.verify.pairs);
        for p in [&x0, &y0].into_iter().chain(pairs.flat_map(|p| [&p.x, &p.y])) {
            if p.len() != d {
                return Err(Error::InvalidArgument(format!("point {p:?} does not have dimension {d}")));
            }
        }
        if cfg.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be positive".into()));
        }
        cfg.observable.validate()?;
        Ok(Self {
            nu,
            spec,
            coupling,
            x0,
            y0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_defaults() {
        let c = ExperimentConfig::default();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::to_string(&ExperimentConfig::from_json(&text).unwrap()).unwrap(), text);
        let minimal = r#"{"measure": {"kind": "zero", "dim": 2}, "drift": "zero", "scheme": {"kind": "basic"}}"#;
        let m = ExperimentConfig::from_json(minimal).unwrap();
        assert_eq!(m.scheme, SchemeConfig::Basic { kappa: 1.0 });
        assert_eq!(m.n_paths, 1000);
        let s = Setup::new(&m, Path::new(".")).unwrap();
        assert_eq!((s.x0, s.y0), (vec![0.1, 0.0], vec![0.0, 0.0]));
    }

    #[test]
    fn infinite_eta() {
        let text = r#"{"measure": {"kind": "stable", "dim": 1, "alpha": 1.0, "scale": 1.0},
                       "drift": {"linear": {"k": -1.0}}, "scheme": {"kind": "reflection", "eta": "inf"}}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        assert_eq!(c.scheme, SchemeConfig::Reflection { eta: f64::INFINITY });
        assert!(serde_json::to_string(&c).unwrap().contains("\"eta\":\"inf\""));
    }

    #[test]
    fn rejects_bad_documents() {
        let missing = ExperimentConfig::from_json(r#"{"drift": "zero", "scheme": {"kind": "basic"}}"#).unwrap_err();
        assert!(missing.to_string().contains("measure"), "{missing}");
        let unknown = ExperimentConfig::from_json(
            r#"{"measure": {"kind": "zero", "dim": 1}, "drift": "zero", "scheme": {"kind": "basic"}, "colour": 1}"#,
        )
        .unwrap_err();
        assert!(unknown.to_string().contains("colour"), "{unknown}");
        let nested = ExperimentConfig::from_json(
            r#"{"measure": {"kind": "zero", "dim": 1, "alpha": 1}, "drift": "zero", "scheme": {"kind": "basic"}}"#,
        );
        assert!(nested.is_err());
    }

    #[test]
    fn hash_ignores_workers_and_outputs() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.threads = Some(7);
        b.output.path = Some("x.csv".into());
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
    }
}
