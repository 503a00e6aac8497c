//! Lévy measures and the scalar functionals built from them: second
//! moments `ψ`, the distance profile `Φ`, overlap masses `ν ∧ (δ_x ∗ ν)`,
//! the control function `ρ`, tail masses and jump sampling.
//!
//! Three representations are supported. Discrete atoms are exact and back
//! the brute-force checks; radial densities `q(|z|) dz` and the closed-form
//! stable density `c |z|^{-d-α}` are handled by radial quadrature (d = 1 also
//! by line quadrature) and, for non-radial integrands in d ≥ 2, by Monte Carlo.

pub mod atoms;
pub mod rate;
pub mod sampling;

use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{norm, scale, sub};
use crate::quadrature::{self, QuadOptions};

pub use atoms::AtomSet;
pub use rate::{phi, phi_derivative, PhiTable, PhiVariant};
pub use sampling::{sample_direction, JumpSampler};

/// Surface area of the unit sphere in `R^d` (`2` for d = 1).
pub fn unit_sphere_area(dim: usize) -> f64 {
    match dim {
        0 => 0.0,
        1 => 2.0,
        2 => 2.0 * PI,
        d => 2.0 * PI / (d as f64 - 2.0) * unit_sphere_area(d - 2),
    }
}

/// A value with a Monte Carlo standard error (zero for deterministic quadrature).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Approx {
    pub value: f64,
    pub std_error: f64,
}

impl Approx {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
        }
    }
}

/// Truncation and numerical resolution shared by quadrature, sampling and
/// Monte Carlo integration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    /// Small-jump cutoff: only jumps with `|z| > epsilon` are simulated.
    pub epsilon: f64,
    /// Table resolution for radial inverse-CDF sampling and `Φ` tabulation.
    pub quad_points: usize,
    /// Sample count for Monte Carlo quadrature in d ≥ 2.
    pub mc_points: usize,
    /// Relative tolerance of the adaptive quadrature.
    pub quad_tol: f64,
    /// Seed of the (deterministic) Monte Carlo quadrature stream.
    pub mc_seed: u64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-3,
            quad_points: 512,
            mc_points: 20_000,
            quad_tol: 1e-11,
            mc_seed: 0x5eed,
        }
    }
}

impl TruncationConfig {
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "truncation epsilon must lie in (0, 1), got {}",
                self.epsilon
            )));
        }
        if self.quad_points < 64 {
            return Err(Error::InvalidArgument(format!(
                "quad_points must be >= 64, got {}",
                self.quad_points
            )));
        }
        if self.mc_points == 0 || !(self.quad_tol > 0.0) {
            return Err(Error::InvalidArgument(
                "mc_points and quad_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn quad_options(&self) -> QuadOptions {
        QuadOptions::with_rel_tol(self.quad_tol)
    }
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A radial profile `r ↦ q(r)` with optional finite range and known kinks.
#[derive(Clone)]
pub struct RadialProfile {
    label: String,
    q: RadialFn,
    range: Option<f64>,
    breaks: Vec<f64>,
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RadialProfile")
            .field("label", &self.label)
            .field("range", &self.range)
            .finish()
    }
}

impl RadialProfile {
    pub fn new(label: impl Into<String>, q: RadialFn, range: Option<f64>, breaks: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            q,
            range,
            breaks,
        }
    }

    /// `c r^{-d-α}` on `r <= range`.
    pub fn truncated_stable(dim: usize, alpha: f64, scale: f64, range: f64) -> Self {
        let p = dim as f64 + alpha;
        Self::new(
            format!("truncated_stable(alpha={alpha}, c={scale}, R={range})"),
            Arc::new(move |r: f64| if r <= range { scale * r.powf(-p) } else { 0.0 }),
            Some(range),
            vec![range],
        )
    }

    /// `c r^{-d-α} e^{-λ r}`.
    pub fn tempered_stable(dim: usize, alpha: f64, scale: f64, rate: f64) -> Self {
        let p = dim as f64 + alpha;
        Self::new(
            format!("tempered_stable(alpha={alpha}, c={scale}, lambda={rate})"),
            Arc::new(move |r: f64| scale * r.powf(-p) * (-rate * r).exp()),
            None,
            vec![],
        )
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.q)(r)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn range(&self) -> Option<f64> {
        self.range
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MeasureKind {
    DiscreteAtoms,
    RadialDensity,
    StableClosedForm,
}

#[derive(Debug, Clone)]
enum Repr {
    Atoms { atoms: AtomSet, symmetric: bool },
    Radial(RadialProfile),
    Stable { alpha: f64, scale: f64 },
}

/// A pure-jump Lévy measure on `R^d \ {0}`.
#[derive(Debug, Clone)]
pub struct LevyMeasure {
    dim: usize,
    repr: Repr,
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        return Err(Error::InvalidMeasure("dimension must be >= 1".into()));
    }
    Ok(())
}

impl LevyMeasure {
    pub fn atoms(dim: usize, entries: impl IntoIterator<Item = (Vec<f64>, f64)>) -> Result<Self> {
        check_dim(dim)?;
        let mut set = AtomSet::new(dim);
        for (loc, mass) in entries {
            if loc.len() != dim {
                return Err(Error::InvalidMeasure(format!(
                    "atom {loc:?} has dimension {}, expected {dim}",
                    loc.len()
                )));
            }
            if !(mass >= 0.0 && mass.is_finite()) {
                return Err(Error::InvalidMeasure(format!("atom mass {mass} is not a finite nonnegative number")));
            }
            if norm(&loc) == 0.0 {
                return Err(Error::InvalidMeasure("Levy measures carry no atom at the origin".into()));
            }
            if mass > 0.0 {
                set.add(loc, mass);
            }
        }
        let symmetric = set.iter().all(|(l, m)| {
            let mirrored = set.mass_at(&scale(l, -1.0));
            (mirrored - m).abs() <= 1e-12 * (1.0 + m)
        });
        Ok(Self {
            dim,
            repr: Repr::Atoms {
                atoms: set,
                symmetric,
            },
        })
    }

    /// The zero measure (no jumps).
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            repr: Repr::Atoms {
                atoms: AtomSet::new(dim),
                symmetric: true,
            },
        }
    }

    /// Rotationally symmetric α-stable measure `c |z|^{-d-α} dz`.
    pub fn stable(dim: usize, alpha: f64, scale: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::InvalidMeasure(format!("stability index {alpha} outside (0, 2)")));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidMeasure(format!("scale {scale} must be positive")));
        }
        Ok(Self {
            dim,
            repr: Repr::Stable { alpha, scale },
        })
    }

    /// Radial density `q(|z|) dz`; the Lévy integrability `∫(1 ∧ |z|²) ν(dz) < ∞`
    /// is checked by quadrature.
    pub fn radial(dim: usize, profile: RadialProfile) -> Result<Self> {
        check_dim(dim)?;
        let m = Self {
            dim,
            repr: Repr::Radial(profile),
        };
        let opts = QuadOptions::with_rel_tol(1e-8);
        let small = m
            .radial_integral(&|s| s * s, 0.0, 1.0, &opts)
            .map_err(|e| Error::InvalidMeasure(format!("∫_{{|z|<=1}} |z|² ν(dz) diverges: {e}")))?;
        let large = m
            .radial_integral(&|_| 1.0, 1.0, f64::INFINITY, &opts)
            .map_err(|e| Error::InvalidMeasure(format!("ν(|z| > 1) diverges: {e}")))?;
        if !(small.is_finite() && large.is_finite()) {
            return Err(Error::InvalidMeasure("Levy integrability fails".into()));
        }
        let probe = [1e-3, 0.1, 0.5, 1.0];
        if probe.iter().any(|&r| m.radial_density(r) < 0.0) {
            return Err(Error::InvalidMeasure("negative radial density".into()));
        }
        Ok(m)
    }

    /// Loads atoms from CSV rows `z_1, ..., z_d, mass`; a non-numeric first
    /// row is treated as a header.
    pub fn atoms_from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::InvalidMeasure(format!("csv: {e}")))?;
            let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
            match parsed {
                Ok(v) => rows.push(v),
                Err(_) if i == 0 => continue,
                Err(e) => return Err(Error::InvalidMeasure(format!("csv row {}: {e}", i + 1))),
            }
        }
        let Some(first) = rows.first() else {
            return Err(Error::InvalidMeasure("csv contains no atoms".into()));
        };
        let width = first.len();
        if width < 2 || rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidMeasure("csv rows must all hold d coordinates and a mass".into()));
        }
        let dim = width - 1;
        LevyMeasure::atoms(dim, rows.into_iter().map(|mut r| {
            let m = r.pop().expect("width >= 2");
            (r, m)
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> MeasureKind {
        match self.repr {
            Repr::Atoms { .. } => MeasureKind::DiscreteAtoms,
            Repr::Radial(_) => MeasureKind::RadialDensity,
            Repr::Stable { .. } => MeasureKind::StableClosedForm,
        }
    }

    /// Rotational symmetry for densities; `ν(-A) = ν(A)` for atoms.
    pub fn is_symmetric(&self) -> bool {
        match &self.repr {
            Repr::Atoms { symmetric, .. } => *symmetric,
            _ => true,
        }
    }

    /// Invariance under every reflection `z ↦ z - 2⟨z, e⟩e`: symmetric atoms
    /// qualify only on the line.
    pub fn is_reflection_invariant(&self) -> bool {
        match &self.repr {
            Repr::Atoms { symmetric, .. } => *symmetric && self.dim == 1,
            _ => true,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.repr, Repr::Atoms { .. })
    }

    pub fn atom_set(&self) -> Option<&AtomSet> {
        match &self.repr {
            Repr::Atoms { atoms, .. } => Some(atoms),
            _ => None,
        }
    }

    pub fn stable_params(&self) -> Option<(f64, f64)> {
        match self.repr {
            Repr::Stable { alpha, scale } => Some((alpha, scale)),
            _ => None,
        }
    }

    /// Finite `R` with `ν(|z| > R) = 0`, if any.
    pub fn range_bound(&self) -> Option<f64> {
        match &self.repr {
            Repr::Atoms { atoms, .. } => Some(atoms.max_radius()),
            Repr::Radial(p) => p.range,
            Repr::Stable { .. } => None,
        }
    }

    /// `q(r)` for density-backed measures, `0` for atoms.
    pub fn radial_density(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Atoms { .. } => 0.0,
            Repr::Radial(p) => p.eval(r),
            Repr::Stable { alpha, scale } => scale * r.powf(-(self.dim as f64) - alpha),
        }
    }

    /// Point mass (atoms) or density value (densities) at `z`.
    pub fn weight_at(&self, z: &[f64]) -> f64 {
        match &self.repr {
            Repr::Atoms { atoms, .. } => atoms.mass_at(z),
            _ => self.radial_density(norm(z)),
        }
    }

    pub(crate) fn profile_breaks(&self) -> Vec<f64> {
        match &self.repr {
            Repr::Radial(p) => p.breaks.clone(),
            _ => vec![],
        }
    }

    /// `ω_d ∫_lo^hi g(s) q(s) s^{d-1} ds` for density-backed measures.
    pub(crate) fn radial_integral<G: Fn(f64) -> f64>(&self, g: &G, lo: f64, hi: f64, opts: &QuadOptions) -> Result<f64> {
        let d = self.dim as i32;
        let hi = match self.range_bound() {
            Some(r) if !self.is_atomic() => hi.min(r),
            _ => hi,
        };
        if hi <= lo {
            return Ok(0.0);
        }
        let f = |s: f64| g(s) * self.radial_density(s) * s.powi(d - 1);
        let mut breaks = self.profile_breaks();
        breaks.push(1.0);
        let v = if lo == 0.0 {
            quadrature::integrate_radial(&f, hi, &breaks, opts)?
        } else if hi.is_finite() {
            quadrature::integrate(&f, lo, hi, &breaks, opts)?
        } else {
            let top = breaks.iter().copied().filter(|b| *b > lo).fold(lo, f64::max);
            quadrature::integrate(&f, lo, top, &breaks, opts)? + quadrature::integrate_to_infinity(&f, top, opts)?
        };
        Ok(unit_sphere_area(self.dim) * v.value)
    }

    /// `ν(R^d)`, possibly infinite.
    pub fn total_mass(&self) -> f64 {
        match &self.repr {
            Repr::Atoms { atoms, .. } => atoms.total(),
            Repr::Stable { .. } => f64::INFINITY,
            Repr::Radial(_) => self
                .radial_integral(&|_| 1.0, 0.0, f64::INFINITY, &QuadOptions::with_rel_tol(1e-9))
                .unwrap_or(f64::INFINITY),
        }
    }

    /// `ν({|z| >= r})`.
    pub fn tail_mass(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("tail radius must be positive, got {r}")));
        }
        match &self.repr {
            Repr::Atoms { atoms, .. } => Ok(atoms.iter().filter(|(l, _)| norm(l) >= r).map(|(_, m)| m).sum()),
            Repr::Stable { alpha, scale } => Ok(unit_sphere_area(self.dim) * scale * r.powf(-alpha) / alpha),
            Repr::Radial(_) => self.radial_integral(&|_| 1.0, r, f64::INFINITY, &QuadOptions::default()),
        }
    }

    /// `ν({|z| > r})`; differs from [`tail_mass`](Self::tail_mass) only for atoms on the sphere.
    pub fn mass_beyond(&self, r: f64) -> Result<f64> {
        match &self.repr {
            Repr::Atoms { atoms, .. } => Ok(atoms.iter().filter(|(l, _)| norm(l) > r).map(|(_, m)| m).sum()),
            _ => self.tail_mass(r),
        }
    }

    /// `∫_{|z|<=r} |z|² ν(dz)` without a symmetry requirement.
    pub fn second_moment(&self, r: f64) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
        }
        match &self.repr {
            Repr::Atoms { atoms, .. } => Ok(atoms
                .iter()
                .map(|(l, m)| (norm(l), m))
                .filter(|(n, _)| *n <= r)
                .map(|(n, m)| n * n * m)
                .sum()),
            Repr::Stable { alpha, scale } => {
                Ok(unit_sphere_area(self.dim) * scale * r.powf(2.0 - alpha) / (2.0 - alpha))
            }
            Repr::Radial(_) => self.radial_integral(&|s| s * s, 0.0, r, &QuadOptions::default()),
        }
    }

    /// `ψ(r) = ∫_{|z|<=r} |z|² ν(dz)` for symmetric measures.
    pub fn psi_symmetric(&self, r: f64) -> Result<f64> {
        if !self.is_symmetric() {
            return Err(Error::NonSymmetricMeasure);
        }
        self.second_moment(r)
    }

    /// `-∫_{ε<|z|<1} z ν(dz)`, the drift correction of the truncated scheme.
    pub fn compensator(&self, epsilon: f64) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        if let Repr::Atoms { atoms, symmetric } = &self.repr {
            if !symmetric {
                for (l, m) in atoms.iter() {
                    let n = norm(l);
                    if n > epsilon && n < 1.0 {
                        for (ci, li) in c.iter_mut().zip(l) {
                            *ci -= li * m;
                        }
                    }
                }
            }
        }
        c
    }

    /// Control function `ρ(x, z) = d[ν ∧ (δ_x ∗ ν)]/dν (z)`.
    pub fn rho(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        let w = self.weight_at(z);
        if !(w > 0.0) {
            return Err(Error::UnsupportedPoint(z.to_vec()));
        }
        if norm(x) == 0.0 {
            return Ok(1.0);
        }
        let shifted = self.weight_at(&sub(z, x));
        Ok((w.min(shifted) / w).clamp(0.0, 1.0))
    }

    /// Overlap mass `(ν ∧ (δ_x ∗ ν))({|z| > ε})`.
    ///
    /// Exact for atoms, line quadrature in d = 1, Monte Carlo in d ≥ 2.
    pub fn overlap_mass(&self, x: &[f64], epsilon: f64, cfg: &TruncationConfig) -> Result<Approx> {
        if norm(x) == 0.0 {
            let total = self.total_mass();
            if !total.is_finite() {
                return Err(Error::ZeroShift);
            }
            return if epsilon > 0.0 {
                self.mass_beyond(epsilon).map(Approx::exact)
            } else {
                Ok(Approx::exact(total))
            };
        }
        match &self.repr {
            Repr::Atoms { atoms, .. } => Ok(Approx::exact(
                atoms
                    .iter()
                    .filter(|(l, _)| norm(l) > epsilon)
                    .map(|(l, m)| m.min(atoms.mass_at(&sub(l, x))))
                    .sum(),
            )),
            _ if self.dim == 1 => self.overlap_line(x[0], epsilon, cfg).map(Approx::exact),
            _ => self.overlap_monte_carlo(x, epsilon, cfg),
        }
    }

    fn overlap_line(&self, x: f64, epsilon: f64, cfg: &TruncationConfig) -> Result<f64> {
        let integrand = |z: f64| {
            if z.abs() <= epsilon {
                0.0
            } else {
                self.radial_density(z.abs()).min(self.radial_density((z - x).abs()))
            }
        };
        let mut breaks = vec![0.0, x, 0.5 * x, epsilon, -epsilon, x + epsilon, x - epsilon];
        for b in self.profile_breaks() {
            breaks.extend([b, -b, x + b, x - b]);
        }
        let opts = cfg.quad_options();
        let v = match self.range_bound() {
            Some(r) => {
                let lo = (-r).max(x - r);
                let hi = r.min(x + r);
                if hi <= lo {
                    return Ok(0.0);
                }
                quadrature::integrate(&integrand, lo, hi, &breaks, &opts)?
            }
            None => quadrature::integrate_line(&integrand, &breaks, &opts)?,
        };
        Ok(v.value)
    }

    fn overlap_monte_carlo(&self, x: &[f64], epsilon: f64, cfg: &TruncationConfig) -> Result<Approx> {
        use rand::Rng;
        let d = self.dim;
        let n = cfg.mc_points;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.mc_seed);
        let split = epsilon.max(0.25 * norm(x));
        let overlap_at = |z: &[f64]| self.radial_density(norm(z)).min(self.radial_density(norm(&sub(z, x))));

        // outer part: importance sampling from ν(· | |z| > split)
        let sampler = JumpSampler::new(self, split, cfg)?;
        let (mut s1, mut s2) = (0.0, 0.0);
        if sampler.rate() > 0.0 {
            for _ in 0..n {
                let z = sampler.sample(&mut rng).expect("positive rate");
                let q = self.radial_density(norm(&z));
                let w = if q > 0.0 { overlap_at(&z) / q } else { 0.0 };
                s1 += w;
                s2 += w * w;
            }
        }
        let mean = s1 / n as f64;
        let var = (s2 / n as f64 - mean * mean).max(0.0);
        let outer = sampler.rate() * mean;
        let outer_se = sampler.rate() * (var / n as f64).sqrt();

        // inner shell ε < |z| <= split: uniform sampling in the shell
        let (mut inner, mut inner_se) = (0.0, 0.0);
        if split > epsilon {
            let vol = unit_sphere_area(d) / d as f64 * (split.powi(d as i32) - epsilon.powi(d as i32));
            let (mut t1, mut t2) = (0.0, 0.0);
            for _ in 0..n {
                let u: f64 = rng.random();
                let r = (epsilon.powi(d as i32) + u * (split.powi(d as i32) - epsilon.powi(d as i32)))
                    .powf(1.0 / d as f64);
                let z = scale(&sample_direction(d, &mut rng), r);
                let v = overlap_at(&z);
                t1 += v;
                t2 += v * v;
            }
            let m = t1 / n as f64;
            let var = (t2 / n as f64 - m * m).max(0.0);
            inner = vol * m;
            inner_se = vol * (var / n as f64).sqrt();
        }
        Ok(Approx {
            value: outer + inner,
            std_error: (outer_se * outer_se + inner_se * inner_se).sqrt(),
        })
    }

    fn shift_directions(&self, n_dirs: usize) -> Vec<Vec<f64>> {
        let d = self.dim;
        let mut e1 = vec![0.0; d];
        e1[0] = 1.0;
        if !self.is_atomic() {
            // rotational symmetry: the overlap depends on |x| only
            return vec![e1];
        }
        if d == 1 {
            return vec![vec![1.0], vec![-1.0]];
        }
        let mut dirs = Vec::with_capacity(n_dirs);
        for i in 0..d.min(n_dirs / 2) {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            dirs.push(e.clone());
            e[i] = -1.0;
            dirs.push(e);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0xd1ec7);
        while dirs.len() < n_dirs {
            dirs.push(sample_direction(d, &mut rng));
        }
        dirs
    }

    /// `ψ(r) = r² inf_{|x|<=r} μ_x(R^d)` with the infimum over a geometric grid
    /// of `n_magnitudes` values in `(r/100, r]` and `n_dirs` directions.
    pub fn psi_general_with_grid(
        &self,
        r: f64,
        n_magnitudes: usize,
        n_dirs: usize,
        cfg: &TruncationConfig,
    ) -> Result<f64> {
        if !(r > 0.0) {
            return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
        }
        let eps = if self.is_atomic() || self.dim == 1 { 0.0 } else { cfg.epsilon };
        let dirs = self.shift_directions(n_dirs);
        let mut best = f64::INFINITY;
        for j in 0..n_magnitudes {
            let m = r * 100f64.powf(-(j as f64) / n_magnitudes as f64);
            for dir in &dirs {
                let mass = self.overlap_mass(&scale(dir, m), eps, cfg)?.value;
                best = best.min(mass);
            }
        }
        Ok(r * r * best.max(0.0))
    }

    pub fn psi_general(&self, r: f64, cfg: &TruncationConfig) -> Result<f64> {
        self.psi_general_with_grid(r, 32, 16, cfg)
    }

    /// Draws one jump from `ν(· | |z| > ε)`.
    pub fn sample_jump<R: rand::Rng + ?Sized>(&self, epsilon: f64, rng: &mut R) -> Result<Vec<f64>> {
        let sampler = JumpSampler::new(self, epsilon, &TruncationConfig::default())?;
        sampler.sample(rng).ok_or(Error::EmptyTail(epsilon))
    }
}
