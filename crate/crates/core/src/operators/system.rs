//! Jump systems: rows `(x, y) ↦ (x + z, y + Ψ_i(z))` with intensity
//! `μ_{ν_i,Ψ_i} = ν_i ∧ (ν_i ∘ Ψ_i)`, plus the synchronous remainder.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{add, norm, reflect_along, scale, sub, truncate_kappa};
use crate::measures::{LevyMeasure, RadialProfile};

/// Sub-measure `ν_i` of the base measure, as a function of the pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SubMeasure {
    /// `w ν`
    Fraction(f64),
    /// `w 1_{|z| <= η|x-y|} ν`; `η = ∞` is the whole space.
    Ball { fraction: f64, eta: f64 },
}

impl SubMeasure {
    /// Fraction of `ν(dz)` carried at `|z|` for a pair at distance `r`.
    pub fn weight(&self, radius: f64, r: f64) -> f64 {
        match *self {
            SubMeasure::Fraction(w) => w,
            SubMeasure::Ball { fraction, eta } => {
                if eta.is_infinite() || radius <= eta * r {
                    fraction
                } else {
                    0.0
                }
            }
        }
    }

    pub fn fraction(&self) -> f64 {
        match *self {
            SubMeasure::Fraction(w) => w,
            SubMeasure::Ball { fraction, .. } => fraction,
        }
    }

    /// Radius of the ball carrying the sub-measure (`∞` if unrestricted).
    pub fn radius(&self, r: f64) -> f64 {
        match *self {
            SubMeasure::Fraction(_) => f64::INFINITY,
            SubMeasure::Ball { eta, .. } if eta.is_infinite() => f64::INFINITY,
            SubMeasure::Ball { eta, .. } => eta * r,
        }
    }
}

/// `q₀` of the combined reflection-and-basic system, described relative to `q`.
#[derive(Debug, Clone)]
pub enum Q0Profile {
    Full,
    Zero,
    /// `q₀ = q 1_{|z| <= radius}`
    Ball { radius: f64 },
    /// `q₀ = q 1_{|z| <= |x-y|/2}`
    HalfDistance,
    /// `q₀ = factor q`
    Scaled { factor: f64 },
    /// An explicit radial density; `q₀ <= q` is checked where it is used.
    Density(RadialProfile),
}

impl Q0Profile {
    /// `q₀(s)/q(s)` for a pair at distance `r`.
    pub fn ratio(&self, nu: &LevyMeasure, s: f64, r: f64) -> Result<f64> {
        Ok(match self {
            Q0Profile::Full => 1.0,
            Q0Profile::Zero => 0.0,
            Q0Profile::Ball { radius } => (s <= *radius) as u8 as f64,
            Q0Profile::HalfDistance => (s <= 0.5 * r) as u8 as f64,
            Q0Profile::Scaled { factor } => {
                if *factor > 1.0 {
                    return Err(Error::DensityDominationViolation {
                        radius: s,
                        q0: factor * nu.radial_density(s),
                        q: nu.radial_density(s),
                    });
                }
                *factor
            }
            Q0Profile::Density(p) => {
                let q = nu.radial_density(s);
                let q0 = p.eval(s);
                if q0 > q * (1.0 + 1e-12) {
                    return Err(Error::DensityDominationViolation { radius: s, q0, q });
                }
                if q > 0.0 {
                    q0 / q
                } else {
                    0.0
                }
            }
        })
    }

    /// Radius outside which `q₀` vanishes for a pair at distance `r`.
    pub fn support(&self, r: f64) -> f64 {
        match self {
            Q0Profile::Zero => 0.0,
            Q0Profile::Scaled { factor } if *factor == 0.0 => 0.0,
            Q0Profile::Full | Q0Profile::Scaled { .. } => f64::INFINITY,
            Q0Profile::Ball { radius } => *radius,
            Q0Profile::HalfDistance => 0.5 * r,
            Q0Profile::Density(p) => p.range().unwrap_or(f64::INFINITY),
        }
    }

    /// Checks `0 <= q₀ <= q` on a log grid of radii.
    pub fn validate(&self, nu: &LevyMeasure) -> Result<()> {
        if let Q0Profile::Scaled { factor } = self {
            if !(*factor >= 0.0) {
                return Err(Error::InvalidArgument(format!("q0 factor {factor} is negative")));
            }
        }
        if matches!(self, Q0Profile::Density(_)) && nu.is_atomic() {
            return Err(Error::InvalidArgument("an explicit q0 density needs a density base measure".into()));
        }
        for k in 0..=120 {
            let s = 1e-6 * 10f64.powf(k as f64 / 10.0);
            self.ratio(nu, s, 1.0)?;
        }
        Ok(())
    }
}

/// Intensity of a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RowRate {
    /// `μ_{ν_i,Ψ_i}` from a sub-measure.
    Derived(SubMeasure),
    /// `q₀(|z|) ∧ q₀(|x - y + z|)`, the coalescing row of the combined system.
    Q0Overlap,
    /// `q₀(|z|) - q₀(|z|) ∧ q₀(|x - y + z|)`, its reflected remainder.
    Q0Remainder,
}

/// The bijection `Ψ_i`, frozen for each pair `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Map {
    /// `R_{x,y}(z)`
    Reflection,
    /// `z + sign (x - y)_κ`; `κ = ∞` means no truncation.
    Shift { kappa: f64, sign: f64 },
    /// `σ(y)^{-1} σ(x) R(z)` for `sign = 1`, its inverse `R(σ(x)^{-1} σ(y) z)` for `sign = -1`.
    LiftedReflection { sign: f64 },
    /// `σ(y)^{-1}(σ(x) z + (x-y)_κ)` for `sign = 1`, its inverse for `sign = -1`.
    LiftedShift { kappa: f64, sign: f64 },
}

impl Map {
    pub fn is_lifted(&self) -> bool {
        matches!(self, Map::LiftedReflection { .. } | Map::LiftedShift { .. })
    }

    fn forward_signed(&self, ctx: &PairContext, z: &[f64], sign_flip: f64) -> Vec<f64> {
        match *self {
            Map::Reflection => reflect_along(&ctx.u, z),
            Map::Shift { kappa, sign } => add(z, &scale(&truncate_kappa(&ctx.u, kappa), sign * sign_flip)),
            Map::LiftedReflection { sign } => {
                if sign * sign_flip > 0.0 {
                    ctx.sy_inv(&ctx.sx(&reflect_along(&ctx.u, z)))
                } else {
                    reflect_along(&ctx.u, &ctx.sx_inv(&ctx.sy(z)))
                }
            }
            Map::LiftedShift { kappa, sign } => {
                let s = truncate_kappa(&ctx.u, kappa);
                if sign * sign_flip > 0.0 {
                    ctx.sy_inv(&add(&ctx.sx(z), &s))
                } else {
                    ctx.sx_inv(&sub(&ctx.sy(z), &s))
                }
            }
        }
    }

    pub fn forward(&self, ctx: &PairContext, z: &[f64]) -> Vec<f64> {
        self.forward_signed(ctx, z, 1.0)
    }

    pub fn inverse(&self, ctx: &PairContext, z: &[f64]) -> Vec<f64> {
        self.forward_signed(ctx, z, -1.0)
    }

    pub fn event_name(&self) -> &'static str {
        match *self {
            Map::Reflection | Map::LiftedReflection { .. } => "reflect",
            Map::Shift { sign, .. } | Map::LiftedShift { sign, .. } if sign > 0.0 => "contract",
            Map::Shift { .. } | Map::LiftedShift { .. } => "expand",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Row {
    pub rate: RowRate,
    pub map: Map,
}

/// A matrix-valued noise coefficient `σ(x)`.
#[derive(Clone)]
pub struct Sigma {
    label: String,
    f: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>,
}

impl fmt::Debug for Sigma {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Sigma({})", self.label)
    }
}

/// Matrices with reciprocal condition number below this are singular.
pub const SIGMA_RCOND_MIN: f64 = 1e-10;

impl Sigma {
    pub fn from_fn(label: impl Into<String>, f: Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>) -> Self {
        Self { label: label.into(), f }
    }

    pub fn identity() -> Self {
        Self::from_fn("identity", Arc::new(|x: &[f64]| DMatrix::identity(x.len(), x.len())))
    }

    /// `σ(x) = (1 + |x|²) I`.
    pub fn one_plus_square() -> Self {
        Self::from_fn(
            "1+|x|^2",
            Arc::new(|x: &[f64]| DMatrix::identity(x.len(), x.len()) * (1.0 + x.iter().map(|v| v * v).sum::<f64>())),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `σ(x)` and its inverse, rejecting ill-conditioned matrices.
    pub fn at(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let m = (self.f)(x);
        let d = x.len();
        if m.nrows() != d || m.ncols() != d {
            return Err(Error::InvalidArgument(format!("σ(x) must be {d}x{d}, got {}x{}", m.nrows(), m.ncols())));
        }
        let sv = m.clone().svd(false, false).singular_values;
        let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
        if !(rcond >= SIGMA_RCOND_MIN) {
            return Err(Error::SingularSigma { point: x.to_vec(), rcond });
        }
        let inv = m.clone().try_inverse().ok_or(Error::SingularSigma { point: x.to_vec(), rcond })?;
        Ok((m, inv))
    }
}

/// Pair-dependent data shared by every row evaluation.
#[derive(Debug, Clone)]
pub struct PairContext {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `x - y`
    pub u: Vec<f64>,
    /// `|x - y|`
    pub r: f64,
    sigma: Option<[DMatrix<f64>; 4]>,
}

fn apply(m: &DMatrix<f64>, z: &[f64]) -> Vec<f64> {
    (m * DVector::from_column_slice(z)).as_slice().to_vec()
}

impl PairContext {
    pub fn new(x: &[f64], y: &[f64], sigma: Option<&Sigma>) -> Result<Self> {
        let u = sub(x, y);
        let sigma = match sigma {
            None => None,
            Some(s) => {
                let (sx, sx_inv) = s.at(x)?;
                let (sy, sy_inv) = s.at(y)?;
                Some([sx, sx_inv, sy, sy_inv])
            }
        };
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            r: norm(&u),
            u,
            sigma,
        })
    }

    pub fn sx(&self, z: &[f64]) -> Vec<f64> {
        self.sigma.as_ref().map_or_else(|| z.to_vec(), |m| apply(&m[0], z))
    }
    pub fn sx_inv(&self, z: &[f64]) -> Vec<f64> {
        self.sigma.as_ref().map_or_else(|| z.to_vec(), |m| apply(&m[1], z))
    }
    pub fn sy(&self, z: &[f64]) -> Vec<f64> {
        self.sigma.as_ref().map_or_else(|| z.to_vec(), |m| apply(&m[2], z))
    }
    pub fn sy_inv(&self, z: &[f64]) -> Vec<f64> {
        self.sigma.as_ref().map_or_else(|| z.to_vec(), |m| apply(&m[3], z))
    }
}

/// Drift-free description of a coupling: base measure, rows and the
/// optional multiplicative noise coefficient.
#[derive(Debug, Clone)]
pub struct JumpSystem {
    pub base: LevyMeasure,
    pub rows: Vec<Row>,
    pub q0: Option<Q0Profile>,
    pub sigma: Option<Sigma>,
}

impl JumpSystem {
    /// Only the synchronous row.
    pub fn synchronous(base: LevyMeasure) -> Self {
        Self {
            base,
            rows: vec![],
            q0: None,
            sigma: None,
        }
    }

    /// Reflection of jumps with `|z| <= η|x-y|`.
    pub fn reflection(base: LevyMeasure, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must lie in (0, ∞], got {eta}")));
        }
        Ok(Self {
            base,
            rows: vec![Row {
                rate: RowRate::Derived(SubMeasure::Ball { fraction: 1.0, eta }),
                map: Map::Reflection,
            }],
            q0: None,
            sigma: None,
        })
    }

    /// Refined basic coupling: half of `ν` contracts by `(x-y)_κ`, half expands.
    pub fn refined_basic(base: LevyMeasure, kappa: f64) -> Result<Self> {
        Self::shift_pair(base, kappa, SubMeasure::Fraction(0.5))
    }

    /// Refined basic coupling built from `ν_1 = ν_2 = ½ 1_{|z| <= η|x-y|} ν`.
    pub fn refined_basic_ball(base: LevyMeasure, kappa: f64, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
        }
        Self::shift_pair(base, kappa, SubMeasure::Ball { fraction: 0.5, eta })
    }

    fn shift_pair(base: LevyMeasure, kappa: f64, sub: SubMeasure) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
        }
        Ok(Self {
            base,
            rows: vec![
                Row {
                    rate: RowRate::Derived(sub),
                    map: Map::Shift { kappa, sign: 1.0 },
                },
                Row {
                    rate: RowRate::Derived(sub),
                    map: Map::Shift { kappa, sign: -1.0 },
                },
            ],
            q0: None,
            sigma: None,
        })
    }

    /// Combined reflection-and-basic coupling with `q₀ <= q`.
    pub fn reflection_basic(base: LevyMeasure, q0: Q0Profile) -> Result<Self> {
        q0.validate(&base)?;
        Ok(Self {
            base,
            rows: vec![
                Row {
                    rate: RowRate::Q0Overlap,
                    map: Map::Shift {
                        kappa: f64::INFINITY,
                        sign: 1.0,
                    },
                },
                Row {
                    rate: RowRate::Q0Remainder,
                    map: Map::Reflection,
                },
            ],
            q0: Some(q0),
            sigma: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    pub fn is_multiplicative(&self) -> bool {
        self.sigma.is_some()
    }

    pub fn context(&self, x: &[f64], y: &[f64]) -> Result<PairContext> {
        if x.len() != self.dim() || y.len() != self.dim() {
            return Err(Error::InvalidArgument(format!("pair dimension differs from d = {}", self.dim())));
        }
        PairContext::new(x, y, self.sigma.as_ref())
    }

    /// `q₀(|z|)/q(|z|)` (atoms: `m₀(z)/m(z)`).
    pub fn q0_ratio(&self, s: f64, r: f64) -> Result<f64> {
        match &self.q0 {
            Some(p) => p.ratio(&self.base, s, r),
            None => Ok(0.0),
        }
    }
}

/// Lifts an additive system to multiplicative noise `σ(X_{t-}) dZ_t`:
/// displacements become `(σ(x) z, σ(y) Ψ_i(z))` and the maps absorb `σ`.
/// Each reflection row becomes two half rows `Ψ_1 = σ(y)^{-1}σ(x)R` and
/// `Ψ_2 = Ψ_1^{-1}`; shift rows keep their sub-measures.
pub fn build_multiplicative_system(js: &JumpSystem, sigma: Sigma) -> Result<JumpSystem> {
    if js.sigma.is_some() {
        return Err(Error::InvalidArgument("system is already multiplicative".into()));
    }
    let mut rows = Vec::with_capacity(js.rows.len() * 2);
    for row in &js.rows {
        let RowRate::Derived(sub) = row.rate else {
            return Err(Error::InvalidArgument(
                "rows with explicit q0 rates have no multiplicative counterpart".into(),
            ));
        };
        match row.map {
            Map::Reflection => {
                let half = match sub {
                    SubMeasure::Fraction(w) => SubMeasure::Fraction(0.5 * w),
                    SubMeasure::Ball { fraction, eta } => SubMeasure::Ball {
                        fraction: 0.5 * fraction,
                        eta,
                    },
                };
                for sign in [1.0, -1.0] {
                    rows.push(Row {
                        rate: RowRate::Derived(half),
                        map: Map::LiftedReflection { sign },
                    });
                }
            }
            Map::Shift { kappa, sign } => rows.push(Row {
                rate: row.rate,
                map: Map::LiftedShift { kappa, sign },
            }),
            Map::LiftedReflection { .. } | Map::LiftedShift { .. } => unreachable!("additive system"),
        }
    }
    Ok(JumpSystem {
        base: js.base.clone(),
        rows,
        q0: None,
        sigma: Some(sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
    }

    #[test]
    fn inverses_on_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let sigma = Sigma::from_fn(
            "rot",
            Arc::new(|x: &[f64]| {
                let t = x[0];
                DMatrix::from_row_slice(2, 2, &[1.0 + t * t, 0.3, -0.2, 2.0 + t.sin()])
            }),
        );
        let maps = [
            Map::Reflection,
            Map::Shift { kappa: 0.5, sign: 1.0 },
            Map::Shift {
                kappa: f64::INFINITY,
                sign: -1.0,
            },
            Map::LiftedReflection { sign: 1.0 },
            Map::LiftedReflection { sign: -1.0 },
            Map::LiftedShift { kappa: 0.7, sign: 1.0 },
            Map::LiftedShift { kappa: 0.7, sign: -1.0 },
        ];
        for _ in 0..200 {
            let (x, y, z) = (random_vec(&mut rng, 2), random_vec(&mut rng, 2), random_vec(&mut rng, 2));
            let ctx = PairContext::new(&x, &y, Some(&sigma)).unwrap();
            for m in maps {
                let back = m.forward(&ctx, &m.inverse(&ctx, &z));
                assert!(crate::geometry::distance(&back, &z) < 1e-12 * (1.0 + norm(&z)), "{m:?}");
            }
            // the second lifted reflection map is the inverse of the first
            let p1 = Map::LiftedReflection { sign: 1.0 };
            let p2 = Map::LiftedReflection { sign: -1.0 };
            let w = p2.forward(&ctx, &p1.forward(&ctx, &z));
            assert!(crate::geometry::distance(&w, &z) < 1e-12 * (1.0 + norm(&z)));
        }
    }

    #[test]
    fn identity_sigma_reduces_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let nu = LevyMeasure::stable(3, 1.0, 1.0).unwrap();
        for base in [
            JumpSystem::reflection(nu.clone(), 0.5).unwrap(),
            JumpSystem::refined_basic(nu.clone(), 0.8).unwrap(),
        ] {
            let lifted = build_multiplicative_system(&base, Sigma::identity()).unwrap();
            for _ in 0..50 {
                let (x, y, z) = (random_vec(&mut rng, 3), random_vec(&mut rng, 3), random_vec(&mut rng, 3));
                let c0 = base.context(&x, &y).unwrap();
                let c1 = lifted.context(&x, &y).unwrap();
                for row in &lifted.rows {
                    let orig = base
                        .rows
                        .iter()
                        .find(|b| b.map.event_name() == row.map.event_name())
                        .unwrap();
                    let a = orig.map.forward(&c0, &z);
                    let b = row.map.forward(&c1, &z);
                    assert!(crate::geometry::distance(&a, &b) < 1e-12);
                }
            }
        }
    }

    #[test]
    fn singular_sigma_rejected() {
        let s = Sigma::from_fn("zero", Arc::new(|x: &[f64]| DMatrix::zeros(x.len(), x.len())));
        assert!(matches!(s.at(&[1.0]), Err(Error::SingularSigma { .. })));
        let nearly = Sigma::from_fn(
            "flat",
            Arc::new(|_: &[f64]| DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-12])),
        );
        assert!(matches!(nearly.at(&[0.0, 0.0]), Err(Error::SingularSigma { .. })));
        assert!(Sigma::one_plus_square().at(&[3.0]).is_ok());
    }

    #[test]
    fn q0_domination() {
        let nu = LevyMeasure::stable(1, 1.0, 1.0).unwrap();
        assert!(Q0Profile::Scaled { factor: 0.5 }.validate(&nu).is_ok());
        assert!(matches!(
            Q0Profile::Scaled { factor: 1.5 }.validate(&nu),
            Err(Error::DensityDominationViolation { .. })
        ));
        let too_big = RadialProfile::new("2q", Arc::new(|r: f64| 2.0 / (r * r)), None, vec![]);
        assert!(matches!(
            JumpSystem::reflection_basic(nu, Q0Profile::Density(too_big)),
            Err(Error::DensityDominationViolation { .. })
        ));
    }
}
