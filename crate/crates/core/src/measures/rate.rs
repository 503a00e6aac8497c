//! The concave distance profile
//! `Φ(r) = ∫_0^r ∫_u^1 h(s) ds du`, `h(s) = 1/ψ(s/k)`,
//! with `k = 4` and the symmetric `ψ` for reflection couplings and `k = 2`
//! and the overlap-based `ψ` for basic couplings.
//!
//! For `r <= 1` this is `∫_0^1 (s ∧ r) h(s) ds`. Past `r = 1` the inner
//! integral changes sign and `Φ(r) = Φ(1) - ∫_1^r (r - s) h(s) ds`, so `Φ'`
//! turns negative but `Φ'' = -h` stays negative everywhere.

use serde::{Deserialize, Serialize};

use super::{LevyMeasure, TruncationConfig};
use crate::error::{Error, Result};
use crate::quadrature::{self, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhiVariant {
    /// `ψ(s/4)` with the symmetric second moment (reflection couplings).
    ReflectionA,
    /// `ψ(s/2)` with `r² inf_{|x|<=r} μ_x(R^d)` (basic couplings).
    BasicB,
}

impl PhiVariant {
    pub fn scale_divisor(self) -> f64 {
        match self {
            PhiVariant::ReflectionA => 4.0,
            PhiVariant::BasicB => 2.0,
        }
    }

    pub fn psi(self, nu: &LevyMeasure, r: f64, cfg: &TruncationConfig) -> Result<f64> {
        match self {
            PhiVariant::ReflectionA => nu.psi_symmetric(r),
            PhiVariant::BasicB => nu.psi_general(r, cfg),
        }
    }
}

fn integrability_error(e: Error) -> Error {
    Error::IntegrabilityViolation(format!("∫_0^1 s/ψ(s) ds does not converge numerically ({e})"))
}

/// Checks `∫_0^1 s/ψ(s) ds < ∞` by geometric panels toward the origin.
pub fn check_integrability(nu: &LevyMeasure, variant: PhiVariant, cfg: &TruncationConfig) -> Result<f64> {
    let opts = QuadOptions::with_rel_tol(1e-6);
    let g = |s: f64| match variant.psi(nu, s, cfg) {
        Ok(p) if p > 0.0 => s / p,
        _ => f64::INFINITY,
    };
    quadrature::integrate_from_zero(&g, 1.0, &opts)
        .map(|i| i.value)
        .map_err(integrability_error)
}

fn rate_fn<'a>(nu: &'a LevyMeasure, variant: PhiVariant, cfg: &'a TruncationConfig) -> impl Fn(f64) -> f64 + 'a {
    let k = variant.scale_divisor();
    move |s: f64| match variant.psi(nu, s / k, cfg) {
        Ok(p) if p > 0.0 => 1.0 / p,
        _ => f64::INFINITY,
    }
}

/// `Φ(r)` by direct adaptive quadrature of the single-integral form.
pub fn phi(nu: &LevyMeasure, r: f64, variant: PhiVariant, cfg: &TruncationConfig) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::InvalidArgument(format!("Φ needs r >= 0, got {r}")));
    }
    check_integrability(nu, variant, cfg)?;
    if r == 0.0 {
        return Ok(0.0);
    }
    let h = rate_fn(nu, variant, cfg);
    let opts = cfg.quad_options();
    let near = |s: f64| s.min(r) * h(s);
    let head = quadrature::integrate_radial(&near, 1.0, &[r.min(1.0)], &opts).map_err(integrability_error)?;
    if r <= 1.0 {
        return Ok(head.value);
    }
    let far = quadrature::integrate(&|s: f64| (r - s) * h(s), 1.0, r, &[], &opts)?;
    Ok(head.value - far.value)
}

/// `Φ'(r) = ∫_r^1 h(s) ds` by direct quadrature.
pub fn phi_derivative(nu: &LevyMeasure, r: f64, variant: PhiVariant, cfg: &TruncationConfig) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("Φ' needs r > 0, got {r}")));
    }
    let h = rate_fn(nu, variant, cfg);
    let opts = cfg.quad_options();
    let (lo, hi, sign) = if r <= 1.0 { (r, 1.0, 1.0) } else { (1.0, r, -1.0) };
    Ok(sign * quadrature::integrate(&h, lo, hi, &[], &opts)?.value)
}

/// `∫_a^t s^m h_a (s/a)^p ds`, signed when `t < a`.
fn power_integral(a: f64, h_a: f64, p: f64, m: i32, t: f64) -> f64 {
    let q = p + m as f64 + 1.0;
    let l = (t / a).ln();
    let x = q * l;
    let factor = if x.abs() < 1e-12 { l } else { x.exp_m1() / q };
    h_a * a.powi(m + 1) * factor
}

/// `Φ` tabulated on log-spaced nodes with `h` interpolated as a piecewise
/// power law; exact for stable measures, whose `h` is a single power.
#[derive(Debug, Clone)]
pub struct PhiTable {
    variant: Option<PhiVariant>,
    nodes: Vec<f64>,
    h: Vec<f64>,
    /// exponent of segment `j` on `[nodes[j], nodes[j+1]]`
    p: Vec<f64>,
    /// `∫_{nodes[0]}^{nodes[j]} h`
    c0: Vec<f64>,
    /// `∫_0^{nodes[j]} s h`
    c1: Vec<f64>,
    g0_one: f64,
    phi_one: f64,
    g1_one: f64,
}

impl PhiTable {
    pub const LOWEST_NODE: f64 = 1e-8;
    pub const HIGHEST_NODE: f64 = 8.0;

    /// Tabulates `Φ` for `nu`. The basic variant uses a coarser grid because
    /// each `ψ` node costs a full overlap minimization.
    pub fn build(nu: &LevyMeasure, variant: PhiVariant, cfg: &TruncationConfig) -> Result<Self> {
        let n = match variant {
            PhiVariant::ReflectionA => cfg.quad_points,
            PhiVariant::BasicB => (cfg.quad_points / 8).max(64),
        };
        let h = rate_fn(nu, variant, cfg);
        let mut t = Self::from_rate(|s| Ok(h(s)), n, Self::LOWEST_NODE, Self::HIGHEST_NODE)?;
        t.variant = Some(variant);
        Ok(t)
    }

    /// Tabulates `Φ` for an arbitrary positive rate `h`.
    pub fn from_rate<H: Fn(f64) -> Result<f64>>(h: H, n: usize, lo: f64, hi: f64) -> Result<Self> {
        if n < 2 || !(lo > 0.0 && hi > lo.max(1.0)) {
            return Err(Error::InvalidArgument("Φ table needs n >= 2 and 0 < lo < 1 < hi".into()));
        }
        let ratio = (hi / lo).ln() / (n - 1) as f64;
        let nodes: Vec<f64> = (0..n).map(|i| lo * (ratio * i as f64).exp()).collect();
        let hv = nodes.iter().map(|&s| h(s)).collect::<Result<Vec<f64>>>()?;
        if let Some((s, v)) = nodes.iter().zip(&hv).find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::IntegrabilityViolation(format!(
                "ψ vanishes or is undefined near s = {s:e} (1/ψ = {v}); ∫_0^1 s/ψ(s) ds diverges"
            )));
        }
        let p: Vec<f64> = (0..n - 1)
            .map(|j| (hv[j + 1] / hv[j]).ln() / (nodes[j + 1] / nodes[j]).ln())
            .collect();
        if !(p[0] + 2.0 > 1e-6) {
            return Err(Error::IntegrabilityViolation(format!(
                "1/ψ grows like s^{:.3} at the origin; ∫_0 s/ψ(s) ds diverges",
                p[0]
            )));
        }
        let mut c0 = vec![0.0; n];
        let mut c1 = vec![0.0; n];
        c1[0] = hv[0] * nodes[0] * nodes[0] / (p[0] + 2.0);
        for j in 0..n - 1 {
            c0[j + 1] = c0[j] + power_integral(nodes[j], hv[j], p[j], 0, nodes[j + 1]);
            c1[j + 1] = c1[j] + power_integral(nodes[j], hv[j], p[j], 1, nodes[j + 1]);
        }
        let mut t = Self {
            variant: None,
            nodes,
            h: hv,
            p,
            c0,
            c1,
            g0_one: 0.0,
            phi_one: 0.0,
            g1_one: 0.0,
        };
        t.g0_one = t.g0(1.0);
        t.g1_one = t.f1(1.0);
        t.phi_one = t.g1_one;
        Ok(t)
    }

    pub fn variant(&self) -> Option<PhiVariant> {
        self.variant
    }

    fn segment(&self, t: f64) -> usize {
        let n = self.nodes.len();
        match self.nodes.binary_search_by(|v| v.total_cmp(&t)) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// `∫_{nodes[0]}^t h`.
    fn g0(&self, t: f64) -> f64 {
        let j = self.segment(t);
        self.c0[j] + power_integral(self.nodes[j], self.h[j], self.p[j], 0, t)
    }

    /// `∫_0^t s h`.
    fn f1(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t < self.nodes[0] {
            return self.c1[0] * (t / self.nodes[0]).powf(self.p[0] + 2.0);
        }
        let j = self.segment(t);
        self.c1[j] + power_integral(self.nodes[j], self.h[j], self.p[j], 1, t)
    }

    /// The rate `h(s) = 1/ψ(s/k)` as interpolated by the table.
    pub fn rate(&self, s: f64) -> f64 {
        let j = self.segment(s);
        self.h[j] * (s / self.nodes[j]).powf(self.p[j])
    }

    pub fn value(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        if r <= 1.0 {
            return self.f1(r) + r * (self.g0_one - self.g0(r));
        }
        let g0 = self.g0(r) - self.g0_one;
        let g1 = self.f1(r) - self.g1_one;
        self.phi_one - r * g0 + g1
    }

    pub fn derivative(&self, r: f64) -> f64 {
        self.g0_one - self.g0(r)
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        -self.rate(r)
    }

    pub fn third_derivative(&self, r: f64) -> f64 {
        let j = self.segment(r);
        -self.p[j] * self.rate(r) / r
    }

    pub fn fourth_derivative(&self, r: f64) -> f64 {
        let j = self.segment(r);
        let p = self.p[j];
        -p * (p - 1.0) * self.rate(r) / (r * r)
    }
}
