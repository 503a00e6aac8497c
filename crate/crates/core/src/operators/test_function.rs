//! Radial test functions `f` applied to the distance `|x - y|`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::measures::PhiTable;

#[derive(Debug, Clone)]
pub enum TestFunction {
    /// `f(r) = r`
    Identity,
    /// `f(r) = r ∧ c`
    Capped { c: f64 },
    /// `f(r) = 1 - e^{-a r}`
    Exponential { a: f64 },
    /// `f = Φ` from a tabulated rate.
    PhiProfile(Arc<PhiTable>),
}

/// Below this ratio `δ/r` second differences switch to their Taylor expansion.
const TAYLOR_RATIO: f64 = 1e-3;

impl TestFunction {
    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Identity => "identity",
            TestFunction::Capped { .. } => "capped",
            TestFunction::Exponential { .. } => "exponential",
            TestFunction::PhiProfile(_) => "phi",
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            TestFunction::Identity => r,
            TestFunction::Capped { c } => r.min(*c),
            TestFunction::Exponential { a } => -(-a * r).exp_m1(),
            TestFunction::PhiProfile(t) => t.value(r),
        }
    }

    pub fn d1(&self, r: f64) -> f64 {
        match self {
            TestFunction::Identity => 1.0,
            TestFunction::Capped { c } => (r < *c) as u8 as f64,
            TestFunction::Exponential { a } => a * (-a * r).exp(),
            TestFunction::PhiProfile(t) => t.derivative(r),
        }
    }

    pub fn d2(&self, r: f64) -> f64 {
        match self {
            TestFunction::Identity | TestFunction::Capped { .. } => 0.0,
            TestFunction::Exponential { a } => -a * a * (-a * r).exp(),
            TestFunction::PhiProfile(t) => t.second_derivative(r),
        }
    }

    pub fn d3(&self, r: f64) -> f64 {
        match self {
            TestFunction::Identity | TestFunction::Capped { .. } => 0.0,
            TestFunction::Exponential { a } => a.powi(3) * (-a * r).exp(),
            TestFunction::PhiProfile(t) => t.third_derivative(r),
        }
    }

    pub fn d4(&self, r: f64) -> f64 {
        match self {
            TestFunction::Identity | TestFunction::Capped { .. } => 0.0,
            TestFunction::Exponential { a } => -a.powi(4) * (-a * r).exp(),
            TestFunction::PhiProfile(t) => t.fourth_derivative(r),
        }
    }

    /// Points where `f` fails to be smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            TestFunction::Capped { c } => vec![*c],
            _ => vec![],
        }
    }

    /// `f(r + δ) + f(|r - δ|) - 2 f(r)`, expanded to fourth order for small `δ/r`.
    pub fn second_difference(&self, r: f64, delta: f64) -> f64 {
        let smooth = !matches!(self, TestFunction::Capped { .. });
        if smooth && delta < TAYLOR_RATIO * r {
            let d2 = delta * delta;
            return self.d2(r) * d2 + self.d4(r) * d2 * d2 / 12.0;
        }
        self.value(r + delta) + self.value((r - delta).abs()) - 2.0 * self.value(r)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            TestFunction::Identity | TestFunction::PhiProfile(_) => true,
            TestFunction::Capped { c } => *c > 0.0 && c.is_finite(),
            TestFunction::Exponential { a } => *a > 0.0 && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("test function parameter out of range: {self:?}")))
        }
    }

    /// Checks `f(0) = 0`, `f' >= 0` on `(0, increasing_to]` and that `f''` is
    /// nonpositive and nondecreasing on `(0, concave_to]`, on a log grid.
    pub fn check_hypotheses(&self, increasing_to: f64, concave_to: f64) -> Result<()> {
        self.validate()?;
        if self.value(0.0).abs() > 1e-12 {
            return Err(Error::HypothesisViolation(format!("f(0) = {} is not 0", self.value(0.0))));
        }
        if let TestFunction::Capped { c } = self {
            if *c < concave_to {
                return Err(Error::HypothesisViolation(format!(
                    "r ∧ {c} is not twice differentiable on (0, {concave_to}]"
                )));
            }
        }
        let grid = |top: f64| (0..=200).map(move |k| top * 1e-6f64.powf(1.0 - k as f64 / 200.0));
        for r in grid(increasing_to) {
            if self.d1(r) < -1e-12 {
                return Err(Error::HypothesisViolation(format!("f'({r}) = {} < 0", self.d1(r))));
            }
        }
        let mut prev = f64::NEG_INFINITY;
        for r in grid(concave_to) {
            let h = self.d2(r);
            if h > 1e-12 {
                return Err(Error::HypothesisViolation(format!("f''({r}) = {h} > 0")));
            }
            if h < prev - 1e-9 * prev.abs().max(1.0) {
                return Err(Error::HypothesisViolation(format!("f'' decreases near r = {r}")));
            }
            prev = h;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{LevyMeasure, PhiVariant, TruncationConfig};
    use proptest::prelude::*;

    fn phi_stable() -> TestFunction {
        let nu = LevyMeasure::stable(1, 1.0, 1.0).unwrap();
        TestFunction::PhiProfile(Arc::new(PhiTable::build(&nu, PhiVariant::ReflectionA, &TruncationConfig::default()).unwrap()))
    }

    #[test]
    fn derivatives_match_differences() {
        for f in [TestFunction::Exponential { a: 1.3 }, phi_stable()] {
            for r in [0.05, 0.3, 0.9] {
                let h = 1e-5 * r;
                let fd1 = (f.value(r + h) - f.value(r - h)) / (2.0 * h);
                let fd2 = (f.d1(r + h) - f.d1(r - h)) / (2.0 * h);
                let fd3 = (f.d2(r + h) - f.d2(r - h)) / (2.0 * h);
                assert!((fd1 - f.d1(r)).abs() < 1e-6 * f.d1(r).abs().max(1.0), "{} f' at {r}", f.name());
                assert!((fd2 - f.d2(r)).abs() < 1e-5 * f.d2(r).abs().max(1.0), "{} f'' at {r}", f.name());
                assert!((fd3 - f.d3(r)).abs() < 1e-4 * f.d3(r).abs().max(1.0), "{} f''' at {r}", f.name());
            }
        }
    }

    #[test]
    fn taylor_branch_is_continuous() {
        let f = TestFunction::Exponential { a: 2.0 };
        let r = 0.4;
        let below = f.second_difference(r, 0.999e-3 * r);
        let d = 1.001e-3 * r;
        let above = f.value(r + d) + f.value(r - d) - 2.0 * f.value(r);
        assert!((below / (0.999f64 * 0.999) - above / (1.001f64 * 1.001)).abs() < 1e-6 * above.abs());
    }

    #[test]
    fn hypotheses() {
        assert!(TestFunction::Identity.check_hypotheses(2.0, 2.0).is_ok());
        assert!(TestFunction::Exponential { a: 1.0 }.check_hypotheses(2.0, 2.0).is_ok());
        assert!(phi_stable().check_hypotheses(1.0, 2.0).is_ok());
        // Φ' turns negative beyond r = 1
        assert!(matches!(phi_stable().check_hypotheses(2.0, 2.0), Err(Error::HypothesisViolation(_))));
        assert!(matches!(
            TestFunction::Capped { c: 1.0 }.check_hypotheses(2.0, 2.0),
            Err(Error::HypothesisViolation(_))
        ));
        assert!(TestFunction::Capped { c: 3.0 }.check_hypotheses(2.0, 2.0).is_ok());
        assert!(TestFunction::Exponential { a: -1.0 }.validate().is_err());
    }

    proptest! {
        #[test]
        fn second_difference_bound(a in 0.1f64..5.0, r in 0.01f64..2.0, frac in 0.0f64..1.0) {
            // concave f with increasing f'': f(r+δ)+f(r-δ)-2f(r) <= f''(r+δ)δ²
            let f = TestFunction::Exponential { a };
            let delta = frac * r;
            let lhs = f.value(r + delta) + f.value(r - delta) - 2.0 * f.value(r);
            prop_assert!(lhs <= f.d2(r + delta) * delta * delta + 1e-13);
        }

        #[test]
        fn second_difference_bound_phi(r in 0.01f64..1.0, frac in 0.0f64..1.0) {
            let f = phi_stable();
            let delta = frac * r;
            let lhs = f.value(r + delta) + f.value(r - delta) - 2.0 * f.value(r);
            prop_assert!(lhs <= f.d2(r + delta) * delta * delta + 1e-12 * f.value(r));
        }
    }
}
