//! Drift coefficients `b: R^d → R^d`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type DriftFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Drift {
    Zero,
    /// `b(x) = k x`.
    Linear { k: f64 },
    /// One-dimensional piecewise-linear drift through `(knots[i], values[i])`,
    /// constant beyond the outer knots.
    Table { knots: Vec<f64>, values: Vec<f64> },
    #[serde(skip)]
    Custom {
        label: String,
        lipschitz: f64,
        f: DriftFn,
    },
}

impl fmt::Debug for Drift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Drift::Zero => write!(f, "Zero"),
            Drift::Linear { k } => write!(f, "Linear {{ k: {k} }}"),
            Drift::Table { knots, values } => f
                .debug_struct("Table")
                .field("knots", knots)
                .field("values", values)
                .finish(),
            Drift::Custom { label, lipschitz, .. } => f
                .debug_struct("Custom")
                .field("label", label)
                .field("lipschitz", lipschitz)
                .finish(),
        }
    }
}

impl Drift {
    pub fn custom(label: impl Into<String>, lipschitz: f64, f: DriftFn) -> Self {
        Drift::Custom {
            label: label.into(),
            lipschitz,
            f,
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Drift::Zero => Ok(()),
            Drift::Linear { k } if k.is_finite() => Ok(()),
            Drift::Linear { k } => Err(Error::InvalidArgument(format!("linear drift coefficient {k} is not finite"))),
            Drift::Table { knots, values } => {
                if dim != 1 {
                    return Err(Error::InvalidArgument("tabulated drift is one-dimensional".into()));
                }
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::InvalidArgument("drift table needs matching, nonempty knots and values".into()));
                }
                if knots.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::InvalidArgument("drift knots must be strictly increasing".into()));
                }
                if knots.iter().chain(values).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("drift table holds non-finite entries".into()));
                }
                Ok(())
            }
            Drift::Custom { f, .. } => {
                let probe = f(&vec![0.5; dim]);
                if probe.len() != dim || probe.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidArgument("custom drift is not finite or has the wrong dimension".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Drift::Zero => vec![0.0; x.len()],
            Drift::Linear { k } => x.iter().map(|v| k * v).collect(),
            Drift::Table { knots, values } => vec![interpolate(knots, values, x[0])],
            Drift::Custom { f, .. } => f(x),
        }
    }

    /// Declared (or exact, for the builtins) Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match self {
            Drift::Zero => 0.0,
            Drift::Linear { k } => k.abs(),
            Drift::Table { knots, values } => knots
                .windows(2)
                .zip(values.windows(2))
                .map(|(k, v)| ((v[1] - v[0]) / (k[1] - k[0])).abs())
                .fold(0.0, f64::max),
            Drift::Custom { lipschitz, .. } => *lipschitz,
        }
    }
}

fn interpolate(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let n = knots.len();
    if x <= knots[0] {
        return values[0];
    }
    if x >= knots[n - 1] {
        return values[n - 1];
    }
    let i = knots.partition_point(|k| *k <= x) - 1;
    let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
    values[i] + w * (values[i + 1] - values[i])
}
