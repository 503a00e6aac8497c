use std::sync::Arc;

use serde::Serialize;

use super::{drift_modulus, jump_system_for, phi_variant_for, ModulusOptions};
use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::measures::rate::check_integrability;
use crate::measures::{LevyMeasure, PhiTable, PhiVariant, TruncationConfig};
use crate::operators::{eval_generator, TestFunction};
use crate::simulate::Scheme;

/// Required gap below the bound in the `limsup` condition.
pub const LIMSUP_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftRow {
    pub delta: f64,
    /// `B(δ)`
    pub b: f64,
    /// `Φ'(δ) B(δ)`
    pub drift_term: f64,
    /// `L̃Φ(δ)` with zero drift.
    pub jump_part: f64,
    pub jump_std_error: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimsupCheck {
    /// `(r, B(r) Φ'(r))` for `r = 2^{-k}`, `k = 4..=12`.
    pub values: Vec<(f64, f64)>,
    /// Maximum over the three smallest radii.
    pub tail_max: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCheck {
    /// Largest grid `δ` with `L̃Φ < 0` on every grid point of `(0, δ]`; zero if none.
    pub epsilon0_hat: f64,
    /// `min -L̃Φ` over that range.
    pub c0_hat: f64,
    pub ok: bool,
    /// Grid points where `L̃Φ >= 0`.
    pub failure_region: Vec<f64>,
    pub table: Vec<DriftRow>,
    pub limsup: LimsupCheck,
    pub integrability: f64,
}

/// Evaluates `L̃Φ(δ) <= Φ'(δ) B(δ) + L̃_jump Φ(δ)` on `delta_grid ⊂ (0, 1]`,
/// after checking both hypotheses on `ν` and `B`.
pub fn drift_inequality_check(
    scheme: &Scheme,
    nu: &LevyMeasure,
    b: &Drift,
    delta_grid: &[f64],
    cfg: &TruncationConfig,
    modulus: &ModulusOptions,
) -> Result<DriftCheck> {
    if delta_grid.is_empty() || delta_grid.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) || delta_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument("delta_grid must increase within (0, 1]".into()));
    }
    let dim = nu.dim();
    let variant = phi_variant_for(scheme);
    let integrability = check_integrability(nu, variant, cfg)?;
    let phi = Arc::new(PhiTable::build(nu, variant, cfg)?);

    let bound = match variant {
        PhiVariant::ReflectionA => 2.0 / dim as f64,
        PhiVariant::BasicB => 0.5,
    };
    let mut values = Vec::new();
    for k in 4..=12 {
        let r = 0.5f64.powi(k);
        values.push((r, drift_modulus(b, r, dim, modulus)?.value * phi.derivative(r)));
    }
    let tail_max = values[values.len() - 3..].iter().map(|v| v.1).fold(f64::NEG_INFINITY, f64::max);
    let limsup = LimsupCheck { values, tail_max, bound };
    if !(tail_max < bound - LIMSUP_MARGIN) {
        return Err(Error::HypothesisViolation(format!(
            "limsup B(r) Φ'(r) ≈ {tail_max:.4} is not below {bound} - {LIMSUP_MARGIN}"
        )));
    }

    let js = jump_system_for(scheme, nu)?;
    let f = TestFunction::PhiProfile(phi.clone());
    let origin = vec![0.0; dim];
    let mut table = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let mut x = origin.clone();
        x[0] = delta;
        let jump = eval_generator(&js, &f, &Drift::Zero, &x, &origin, cfg)?;
        let bd = drift_modulus(b, delta, dim, modulus)?.value;
        let drift_term = phi.derivative(delta) * bd;
        table.push(DriftRow {
            delta,
            b: bd,
            drift_term,
            jump_part: jump.value,
            jump_std_error: jump.std_error,
            total: drift_term + jump.value,
        });
    }
    let negative = |r: &DriftRow| r.total + 3.0 * r.jump_std_error < 0.0;
    let prefix = table.iter().take_while(|r| negative(r)).count();
    let (epsilon0_hat, c0_hat) = if prefix == 0 {
        (0.0, 0.0)
    } else {
        let c0 = table[..prefix].iter().map(|r| -r.total).fold(f64::INFINITY, f64::min);
        (table[prefix - 1].delta, c0)
    };
    Ok(DriftCheck {
        epsilon0_hat,
        c0_hat,
        ok: c0_hat > 0.0,
        failure_region: table.iter().filter(|r| !negative(r)).map(|r| r.delta).collect(),
        table,
        limsup,
        integrability,
    })
}
