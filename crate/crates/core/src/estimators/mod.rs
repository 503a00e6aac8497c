//! Monte Carlo estimators built on coupled paths: coupling-time tails, total
//! variation bounds, the semigroup regularity ratio, the drift modulus `B(r)`
//! and the drift inequality `L̃Φ <= -c₀`.

mod coupling;
mod drift_check;
mod modulus;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::measures::{LevyMeasure, PhiVariant};
use crate::operators::JumpSystem;
use crate::simulate::Scheme;

pub use coupling::{coupling_time_tail, regularity_ratio, tv_bound, RegularityCell, RegularityTable, TvBound};
pub use drift_check::{drift_inequality_check, DriftCheck, DriftRow, LimsupCheck, LIMSUP_MARGIN};
pub use modulus::{drift_modulus, DriftModulus, ModulusOptions};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub value: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub config_hash: String,
}

/// Sample size, seed and worker count of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq)]
pub struct McOptions {
    pub n_paths: usize,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Digest of the configuration, copied into every result.
    pub config_hash: String,
}

impl McOptions {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            threads: None,
            config_hash: String::new(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::InvalidArgument("n_paths must be positive".into()));
        }
        Ok(())
    }

    fn result(&self, value: f64, std_error: f64) -> EstimateResult {
        EstimateResult {
            value,
            std_error,
            n_paths: self.n_paths,
            seed: self.seed,
            config_hash: self.config_hash.clone(),
        }
    }
}

/// Bounded observables `f` for `P_t f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Observable {
    Constant { value: f64 },
    /// `tanh(x₁ / scale)`
    Tanh { scale: f64 },
    /// Logistic approximation of `1{x₁ > center}` with transition width `width`.
    SmoothIndicator { center: f64, width: f64 },
}

impl Observable {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match *self {
            Observable::Constant { value } => value,
            Observable::Tanh { scale } => (x[0] / scale).tanh(),
            Observable::SmoothIndicator { center, width } => 1.0 / (1.0 + (-(x[0] - center) / width).exp()),
        }
    }

    /// `‖f‖_∞`
    pub fn sup_norm(&self) -> f64 {
        match *self {
            Observable::Constant { value } => value.abs(),
            Observable::Tanh { .. } | Observable::SmoothIndicator { .. } => 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            Observable::Constant { value } => value.is_finite(),
            Observable::Tanh { scale } => scale > 0.0,
            Observable::SmoothIndicator { center, width } => center.is_finite() && width > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid observable {self:?}")))
        }
    }
}

/// `Φ` variant paired with each scheme: `s/4` for the reflection-based
/// schemes, `s/2` for the refined basic coupling.
pub fn phi_variant_for(scheme: &Scheme) -> PhiVariant {
    match scheme {
        Scheme::Reflection { .. } | Scheme::ReflectionBasic { .. } => PhiVariant::ReflectionA,
        Scheme::RefinedBasic { .. } => PhiVariant::BasicB,
    }
}

/// The jump system whose generator drives `scheme`.
pub fn jump_system_for(scheme: &Scheme, nu: &LevyMeasure) -> Result<JumpSystem> {
    match scheme {
        Scheme::Reflection { eta } => JumpSystem::reflection(nu.clone(), *eta),
        Scheme::RefinedBasic { kappa } => JumpSystem::refined_basic(nu.clone(), *kappa),
        Scheme::ReflectionBasic { q0 } => JumpSystem::reflection_basic(nu.clone(), q0.clone()),
    }
}

/// Two-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsTest {
    pub statistic: f64,
    /// `sqrt(-ln(α/2)/2) sqrt((n+m)/(nm))`
    pub critical_value: f64,
    pub reject: bool,
}

pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> Result<KsTest> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("KS test needs two nonempty samples".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) || a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("KS test needs alpha in (0,1) and NaN-free samples".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut stat) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] == v {
            i += 1;
        }
        while j < b.len() && b[j] == v {
            j += 1;
        }
        stat = stat.max((i as f64 / n - j as f64 / m).abs());
    }
    let critical_value = (-0.5 * (alpha / 2.0).ln()).sqrt() * ((n + m) / (n * m)).sqrt();
    Ok(KsTest {
        statistic: stat,
        critical_value,
        reject: stat > critical_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_ks(a: &[f64], b: &[f64]) -> f64 {
        let cdf = |s: &[f64], t: f64| s.iter().filter(|v| **v <= t).count() as f64 / s.len() as f64;
        a.iter().chain(b).map(|&t| (cdf(a, t) - cdf(b, t)).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn ks_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a: Vec<f64> = (0..300).map(|_| (rng.random::<f64>() * 10.0).floor()).collect();
        let b: Vec<f64> = (0..200).map(|_| (rng.random::<f64>() * 11.0).floor()).collect();
        let t = ks_two_sample(&a, &b, 0.01).unwrap();
        assert!((t.statistic - brute_ks(&a, &b)).abs() < 1e-15);
        let c = ks_two_sample(&vec![0.0; 10_000], &vec![0.0; 10_000], 0.01).unwrap();
        assert!((c.critical_value - 0.023_018).abs() < 1e-5, "{}", c.critical_value);
        assert_eq!(c.statistic, 0.0);
        let shifted: Vec<f64> = a.iter().map(|v| v + 5.0).collect();
        assert!(ks_two_sample(&a, &shifted, 0.01).unwrap().reject);
    }

    #[test]
    fn observables() {
        let s = Observable::SmoothIndicator { center: 1.0, width: 0.1 };
        assert!((s.eval(&[1.0]) - 0.5).abs() < 1e-15);
        assert!(s.eval(&[3.0]) > 0.99 && s.eval(&[-1.0]) < 0.01);
        assert_eq!(Observable::Constant { value: -2.0 }.sup_norm(), 2.0);
        assert!(Observable::Tanh { scale: 0.0 }.validate().is_err());
    }
}
