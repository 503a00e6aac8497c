//! `L̃ g(x, y)` for `g(x, y) = f(|x - y|)`, the comparisons between the
//! reflection, refined basic and combined operators, and the generator bounds
//! used for the regularity estimates.
//!
//! Discrete bases are summed exactly over the kernel. For radial densities the
//! synchronous remainder contributes nothing and each row splits into
//!
//! * a reflection part `½ ∫ w(|z|) [f(r + 2t) + f(|r - 2t|) - 2 f(r)] ν(dz)` with
//!   `t = ⟨e, z⟩`, where the compensation terms cancel after `z ↦ -z`, and
//! * a finite part `∫ I(z) λ(dz)` against a finite rate `λ` (shift rows,
//!   and the coalescing overlap of the combined system).
//!
//! Rotational symmetry lets every pair be rotated to `x - y = r e₁`.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{build_kernel, kernel_generator, PairFunction};
use super::system::{JumpSystem, Map, Q0Profile, RowRate};
use super::test_function::TestFunction;
use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::geometry::{dot, norm, scale, sub};
use crate::measures::{sample_direction, unit_sphere_area, Approx, JumpSampler, LevyMeasure, TruncationConfig};
use crate::quadrature;

/// Slack allowed in the comparison `lhs <= rhs` of the generator bounds.
pub const LEMMA_TOL: f64 = 1e-6;

fn accumulate(acc: &mut Approx, part: Approx, sign: f64) {
    acc.value += sign * part.value;
    acc.std_error = acc.std_error.hypot(part.std_error);
}

/// `L̃ g(x, y)` with `g = f(|x - y|)`; the standard error is nonzero only
/// when Monte Carlo integration was used (densities in d >= 2).
pub fn eval_generator(
    js: &JumpSystem,
    f: &TestFunction,
    drift: &Drift,
    x: &[f64],
    y: &[f64],
    cfg: &TruncationConfig,
) -> Result<Approx> {
    cfg.validate()?;
    f.validate()?;
    let d = js.dim();
    if x.len() != d || y.len() != d {
        return Err(Error::InvalidArgument(format!("pair dimension differs from d = {d}")));
    }
    let u = sub(x, y);
    let r = norm(&u);
    if r == 0.0 {
        return Ok(Approx::exact(0.0));
    }
    if js.base.is_atomic() {
        return eval_on_kernel(js, f, drift, x, y, &u, r);
    }
    if js.is_multiplicative() {
        return Err(Error::InvalidArgument(
            "multiplicative systems are evaluated on discrete bases only".into(),
        ));
    }
    let mut total = Approx::exact(f.d1(r) * dot(&sub(&drift.eval(x), &drift.eval(y)), &u) / r);
    let ev = DensityEvaluator {
        nu: &js.base,
        q0: js.q0.as_ref(),
        f,
        r,
        cfg,
    };
    for row in &js.rows {
        match (row.rate, row.map) {
            (RowRate::Derived(sub), Map::Reflection) => {
                accumulate(&mut total, ev.reflection_part(&|s| sub.weight(s, r), sub.radius(r))?, 1.0);
            }
            (RowRate::Derived(sub), Map::Shift { kappa, sign }) => {
                let k = r.min(kappa);
                let part = ev.finite_part(&|s| Ok(sub.weight(s, r)), sub.radius(r), sign * k, &|t, zn, wn| {
                    ev.shift_integrand(sign * k, t, zn, wn)
                })?;
                accumulate(&mut total, part, 1.0);
            }
            (RowRate::Q0Overlap, Map::Shift { kappa, sign }) if sign > 0.0 && kappa >= r => {
                let part = ev.finite_part(&|s| ev.q0_ratio(s), ev.q0_support(), r, &|t, zn, wn| {
                    ev.shift_integrand(r, t, zn, wn)
                })?;
                accumulate(&mut total, part, 1.0);
            }
            (RowRate::Q0Remainder, Map::Reflection) => {
                let w = |s: f64| ev.q0_ratio(s).unwrap_or(0.0);
                accumulate(&mut total, ev.reflection_part(&w, ev.q0_support())?, 1.0);
                // minus the reflected integrand against the coalescing overlap
                let part = ev.finite_part(&|s| ev.q0_ratio(s), ev.q0_support(), r, &|t, zn, _| {
                    ev.reflection_integrand(t, zn)
                })?;
                accumulate(&mut total, part, -1.0);
            }
            (rate, map) => {
                return Err(Error::InvalidArgument(format!(
                    "row ({rate:?}, {map:?}) has no density evaluation"
                )))
            }
        }
    }
    Ok(total)
}

fn eval_on_kernel(
    js: &JumpSystem,
    f: &TestFunction,
    drift: &Drift,
    x: &[f64],
    y: &[f64],
    u: &[f64],
    r: f64,
) -> Result<Approx> {
    let kernel = build_kernel(js, x, y)?;
    let grad_x = scale(u, f.d1(r) / r);
    let g = PairFunction {
        value: &|a: &[f64], b: &[f64]| f.value(norm(&sub(a, b))),
        grad_y: scale(&grad_x, -1.0),
        grad_x,
    };
    Ok(Approx::exact(kernel_generator(&kernel, &g, drift)))
}

struct DensityEvaluator<'a> {
    nu: &'a LevyMeasure,
    q0: Option<&'a Q0Profile>,
    f: &'a TestFunction,
    r: f64,
    cfg: &'a TruncationConfig,
}

impl DensityEvaluator<'_> {
    fn dim(&self) -> usize {
        self.nu.dim()
    }

    fn q0_ratio(&self, s: f64) -> Result<f64> {
        match self.q0 {
            Some(p) => p.ratio(self.nu, s, self.r),
            None => Ok(0.0),
        }
    }

    fn q0_support(&self) -> f64 {
        self.q0.map_or(0.0, |p| p.support(self.r))
    }

    /// Radius beyond which a row weight supported on `|z| <= radius` vanishes.
    fn support(&self, radius: f64) -> f64 {
        radius.min(self.nu.range_bound().unwrap_or(f64::INFINITY))
    }

    /// Integrand of a shift row with displacement `shift e` of `y - x`
    /// (`t = ⟨e, z⟩`, `zn = |z|`, `wn = |z + shift e|`).
    fn shift_integrand(&self, shift: f64, t: f64, zn: f64, wn: f64) -> f64 {
        let r = self.r;
        let f = self.f;
        let mut v = f.value((r - shift).abs()) - f.value(r);
        let mut comp = 0.0;
        if zn < 1.0 {
            comp += t;
        }
        if wn < 1.0 {
            comp -= t + shift;
        }
        v -= f.d1(r) * comp;
        v
    }

    /// Integrand of the reflection row before symmetrization.
    fn reflection_integrand(&self, t: f64, zn: f64) -> f64 {
        let r = self.r;
        let mut v = self.f.value((r + 2.0 * t).abs()) - self.f.value(r);
        if zn < 1.0 {
            v -= 2.0 * self.f.d1(r) * t;
        }
        v
    }

    fn kink_breaks(&self) -> Vec<f64> {
        let r = self.r;
        let mut b = vec![0.5 * r];
        for c in self.f.kinks() {
            b.extend([0.5 * (c - r), 0.5 * (r - c), 0.5 * (r + c)]);
        }
        b
    }

    fn mc_rng(&self, tag: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.mc_seed);
        rng.set_stream(tag);
        rng
    }

    /// `½ ∫ w(|z|) [f(r + 2t) + f(|r - 2t|) - 2 f(r)] ν(dz)`.
    fn reflection_part(&self, w: &dyn Fn(f64) -> f64, radius: f64) -> Result<Approx> {
        let top = self.support(radius);
        if top <= 0.0 {
            return Ok(Approx::exact(0.0));
        }
        let (r, f) = (self.r, self.f);
        let divergence = |e: Error| Error::CompensationDivergence(e.to_string());
        if self.dim() == 1 {
            let g = |s: f64| {
                let q = self.nu.radial_density(s);
                if q == 0.0 {
                    return 0.0;
                }
                w(s) * f.second_difference(r, 2.0 * s) * q
            };
            let mut breaks: Vec<f64> = self.kink_breaks().into_iter().filter(|b| *b > 0.0).collect();
            breaks.extend(self.nu.profile_breaks());
            breaks.push(radius);
            let v = quadrature::integrate_radial(&g, top, &breaks, &self.cfg.quad_options()).map_err(divergence)?;
            return Ok(Approx::exact(v.value));
        }
        let d = self.dim() as f64;
        let split = self.cfg.epsilon.min(1e-2 * r).min(top);
        // small jumps: the second difference is 4 t² f''(r) and ∫ t² = ψ / d
        let second = self
            .nu
            .radial_integral(&|s| w(s) * s * s, 0.0, split, &self.cfg.quad_options())
            .map_err(divergence)?;
        let mut out = Approx::exact(2.0 * f.d2(r) * second / d);
        let sampler = JumpSampler::new(self.nu, split, self.cfg)?;
        if sampler.rate() > 0.0 {
            let mut rng = self.mc_rng(1);
            let part = mc_mean(self.cfg.mc_points, || {
                let z = sampler.sample(&mut rng).expect("positive rate");
                let zn = norm(&z);
                if zn > top {
                    return 0.0;
                }
                0.5 * w(zn) * f.second_difference(r, 2.0 * z[0].abs())
            });
            accumulate(&mut out, scaled(part, sampler.rate()), 1.0);
        }
        Ok(out)
    }

    /// `∫ I(z) λ(z) dz` with `λ(z) = a(|z|) q(|z|) ∧ a(|z + shift e|) q(|z + shift e|)`.
    fn finite_part(
        &self,
        a: &dyn Fn(f64) -> Result<f64>,
        radius: f64,
        shift: f64,
        integrand: &dyn Fn(f64, f64, f64) -> f64,
    ) -> Result<Approx> {
        let rho = self.support(radius);
        let k = shift.abs();
        // both |z| <= ρ and |z + shift e| <= ρ: empty (or null) once k >= 2ρ
        if !(k < 2.0 * rho) {
            return Ok(Approx::exact(0.0));
        }
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let weight = |s: f64| -> f64 {
            if s > rho {
                return 0.0;
            }
            let q = self.nu.radial_density(s);
            if q == 0.0 {
                return 0.0;
            }
            match a(s) {
                Ok(v) => v * q,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let out = if self.dim() == 1 {
            let g = |z: f64| {
                let (zn, wn) = (z.abs(), (z + shift).abs());
                let lam = weight(zn).min(weight(wn));
                if lam == 0.0 {
                    0.0
                } else {
                    lam * integrand(z, zn, wn)
                }
            };
            let mut breaks = vec![0.0, -shift, -0.5 * shift, 1.0, -1.0, 1.0 - shift, -1.0 - shift, -0.5 * self.r];
            for b in self.nu.profile_breaks().into_iter().chain([radius]).chain(self.f.kinks()) {
                if b.is_finite() {
                    breaks.extend([b, -b, b - shift, -b - shift, 0.5 * (b - self.r), 0.5 * (-b - self.r)]);
                }
            }
            let opts = self.cfg.quad_options();
            let v = if rho.is_finite() {
                let lo = (-rho).max(-rho - shift);
                let hi = rho.min(rho - shift);
                quadrature::integrate(&g, lo, hi, &breaks, &opts)?
            } else {
                quadrature::integrate_line(&g, &breaks, &opts)?
            };
            Approx::exact(v.value)
        } else {
            self.finite_part_monte_carlo(&weight, rho, shift, integrand)?
        };
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(out)
    }

    /// Importance sampling from `ν(· | |z| > k/4)` plus uniform sampling of the
    /// ball `|z| <= k/4`, where `λ` is bounded.
    fn finite_part_monte_carlo(
        &self,
        weight: &dyn Fn(f64) -> f64,
        rho: f64,
        shift: f64,
        integrand: &dyn Fn(f64, f64, f64) -> f64,
    ) -> Result<Approx> {
        let d = self.dim();
        let k = shift.abs();
        let split = 0.25 * k;
        let eval = |z: &[f64]| -> (f64, f64) {
            let zn = norm(z);
            let mut w = z.to_vec();
            w[0] += shift;
            let wn = norm(&w);
            let lam = weight(zn).min(weight(wn));
            if lam == 0.0 {
                (0.0, 0.0)
            } else {
                (lam, lam * integrand(z[0], zn, wn))
            }
        };
        let mut out = Approx::exact(0.0);
        let sampler = JumpSampler::new(self.nu, split, self.cfg)?;
        if sampler.rate() > 0.0 {
            let mut rng = self.mc_rng(2);
            let part = mc_mean(self.cfg.mc_points, || {
                let z = sampler.sample(&mut rng).expect("positive rate");
                let q = self.nu.radial_density(norm(&z));
                if q > 0.0 {
                    eval(&z).1 / q
                } else {
                    0.0
                }
            });
            accumulate(&mut out, scaled(part, sampler.rate()), 1.0);
        }
        let ball = split.min(rho);
        if ball > 0.0 {
            let vol = unit_sphere_area(d) / d as f64 * ball.powi(d as i32);
            let mut rng = self.mc_rng(3);
            let part = mc_mean(self.cfg.mc_points, || {
                let s = ball * rng.random::<f64>().powf(1.0 / d as f64);
                let z = scale(&sample_direction(d, &mut rng), s);
                eval(&z).1
            });
            accumulate(&mut out, scaled(part, vol), 1.0);
        }
        Ok(out)
    }
}

fn mc_mean(n: usize, mut sample: impl FnMut() -> f64) -> Approx {
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = sample();
        s1 += v;
        s2 += v * v;
    }
    let mean = s1 / n as f64;
    let var = (s2 / n as f64 - mean * mean).max(0.0);
    Approx {
        value: mean,
        std_error: (var / n as f64).sqrt(),
    }
}

fn scaled(a: Approx, c: f64) -> Approx {
    Approx {
        value: a.value * c,
        std_error: a.std_error * c.abs(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonCase {
    /// `L̃_r` with `η = ∞`, `L̃_{r,b}` with `q₀ = q`, `L̃_b` with `κ = ∞`.
    InfiniteRange,
    /// `L̃_r` with `η = ½`, `L̃_{r,b}` with `q₀ = q 1_{|z| <= |x-y|/2}`,
    /// `L̃_b` with `ν_1 = ν_2 = ½ 1_{|z| <= |x-y|/2} ν` and the untruncated shift.
    FiniteRange,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub distance: f64,
    pub reflection: Approx,
    pub reflection_basic: Approx,
    pub basic: Approx,
}

/// The three coupling operators for `f`, without drift, at each pair.
pub fn compare_operators(
    case: ComparisonCase,
    nu: &LevyMeasure,
    f: &TestFunction,
    pairs: &[(Vec<f64>, Vec<f64>)],
    cfg: &TruncationConfig,
) -> Result<Vec<ComparisonRow>> {
    if nu.is_atomic() {
        return Err(Error::InvalidArgument("operator comparisons need a radial density".into()));
    }
    let (reflection, combined, basic) = match case {
        ComparisonCase::InfiniteRange => (
            JumpSystem::reflection(nu.clone(), f64::INFINITY)?,
            JumpSystem::reflection_basic(nu.clone(), Q0Profile::Full)?,
            JumpSystem::refined_basic(nu.clone(), f64::INFINITY)?,
        ),
        ComparisonCase::FiniteRange => {
            if nu.range_bound().is_none() {
                return Err(Error::InvalidArgument("the finite-range comparison needs a finite-range measure".into()));
            }
            (
                JumpSystem::reflection(nu.clone(), 0.5)?,
                JumpSystem::reflection_basic(nu.clone(), Q0Profile::HalfDistance)?,
                JumpSystem::refined_basic_ball(nu.clone(), f64::INFINITY, 0.5)?,
            )
        }
    };
    pairs
        .par_iter()
        .map(|(x, y)| {
            Ok(ComparisonRow {
                x: x.clone(),
                y: y.clone(),
                distance: norm(&sub(x, y)),
                reflection: eval_generator(&reflection, f, &Drift::Zero, x, y, cfg)?,
                reflection_basic: eval_generator(&combined, f, &Drift::Zero, x, y, cfg)?,
                basic: eval_generator(&basic, f, &Drift::Zero, x, y, cfg)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaKind {
    /// Reflection with `η = ½`, `0 < |x-y| <= 1`.
    Reflection,
    /// Refined basic coupling, `0 < |x-y| <= κ`.
    Basic { kappa: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub lhs: Approx,
    pub rhs: Approx,
    pub ok: bool,
}

/// Evaluates `L̃ f(|x-y|)` for the coupling and the closed-form upper bound
///
/// * reflection: `f'(r) ⟨b(x)-b(y), e⟩ + (2/d) f''(2r) ψ(r/2)`,
/// * basic: `f'(r) ⟨b(x)-b(y), e⟩ + ½ μ_{x-y}(R^d) r² f''(2r)`.
pub fn check_lemma_bound(
    which: LemmaKind,
    nu: &LevyMeasure,
    drift: &Drift,
    f: &TestFunction,
    x: &[f64],
    y: &[f64],
    cfg: &TruncationConfig,
) -> Result<LemmaCheck> {
    let u = sub(x, y);
    let r = norm(&u);
    if !(r > 0.0) {
        return Err(Error::HypothesisViolation("the bound needs x != y".into()));
    }
    f.check_hypotheses(r, 2.0 * r)?;
    let drift_term = f.d1(r) * dot(&sub(&drift.eval(x), &drift.eval(y)), &u) / r;
    let (js, bound) = match which {
        LemmaKind::Reflection => {
            if r > 1.0 {
                return Err(Error::HypothesisViolation(format!("|x-y| = {r} exceeds 1")));
            }
            let psi = nu.psi_symmetric(0.5 * r)?;
            let d = nu.dim() as f64;
            (
                JumpSystem::reflection(nu.clone(), 0.5)?,
                Approx::exact(drift_term + 2.0 / d * f.d2(2.0 * r) * psi),
            )
        }
        LemmaKind::Basic { kappa } => {
            if r > kappa {
                return Err(Error::HypothesisViolation(format!("|x-y| = {r} exceeds κ = {kappa}")));
            }
            let m = nu.overlap_mass(&u, 0.0, cfg)?;
            let c = 0.5 * r * r * f.d2(2.0 * r);
            (
                JumpSystem::refined_basic(nu.clone(), kappa)?,
                Approx {
                    value: drift_term + c * m.value,
                    std_error: c.abs() * m.std_error,
                },
            )
        }
    };
    let lhs = eval_generator(&js, f, drift, x, y, cfg)?;
    let slack = LEMMA_TOL + 3.0 * lhs.std_error.hypot(bound.std_error);
    Ok(LemmaCheck {
        ok: lhs.value <= bound.value + slack,
        lhs,
        rhs: bound,
    })
}
