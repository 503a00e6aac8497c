//! Exact coupling kernels `ν̃(x, y, du, dv)` for discrete base measures and
//! the structural checks built on them.

use serde::Serialize;

use super::system::{JumpSystem, PairContext, RowRate};
use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::geometry::{add, dot, norm};
use crate::measures::{AtomSet, LevyMeasure};

/// Masses below this magnitude are treated as rounding noise.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelAtom {
    /// Driving jump of the first marginal (`z`).
    pub jump_x: Vec<f64>,
    /// Driving jump of the second marginal (`Ψ_i(z)`, or `z` when synchronous).
    pub jump_y: Vec<f64>,
    /// Displacement of `x`: `σ(x) z`.
    pub u: Vec<f64>,
    /// Displacement of `y`: `σ(y) Ψ_i(z)`.
    pub v: Vec<f64>,
    pub mass: f64,
    /// Row index, `None` for the synchronous remainder.
    pub row: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct CouplingKernel {
    pub atoms: Vec<KernelAtom>,
    ctx: PairContext,
}

impl CouplingKernel {
    pub fn x(&self) -> &[f64] {
        &self.ctx.x
    }

    pub fn y(&self) -> &[f64] {
        &self.ctx.y
    }

    pub fn context(&self) -> &PairContext {
        &self.ctx
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// `ν̃(x, y, · × R^d)` as an atom list of `u`.
    pub fn first_marginal(&self) -> AtomSet {
        AtomSet::from_entries(self.ctx.x.len(), self.atoms.iter().map(|a| (a.u.clone(), a.mass)))
    }

    /// `ν̃(x, y, R^d × ·)` as an atom list of `v`.
    pub fn second_marginal(&self) -> AtomSet {
        AtomSet::from_entries(self.ctx.x.len(), self.atoms.iter().map(|a| (a.v.clone(), a.mass)))
    }
}

fn atoms_of(nu: &LevyMeasure) -> Result<&AtomSet> {
    nu.atom_set().ok_or(Error::NonAtomicBase)
}

/// Per-row intensities `μ_i` as atom lists over the driving jump `z`.
fn row_intensities(js: &JumpSystem, ctx: &PairContext) -> Result<Vec<AtomSet>> {
    let atoms = atoms_of(&js.base)?;
    let d = js.dim();
    let r = ctx.r;
    let mut out = Vec::with_capacity(js.rows.len());
    let m0 = |z: &[f64]| -> Result<f64> {
        let m = atoms.mass_at(z);
        if m == 0.0 {
            return Ok(0.0);
        }
        Ok(m * js.q0_ratio(norm(z), r)?)
    };
    for row in &js.rows {
        let mu = match row.rate {
            RowRate::Derived(sub) => {
                let nu_i = sub_measure_atoms(atoms, sub, r);
                // ν_i ∘ Ψ_i carries the mass of each atom a at Ψ_i^{-1}(a)
                let composed = nu_i.pushforward(|a| row.map.inverse(ctx, a), d);
                nu_i.min_with(&composed)
            }
            RowRate::Q0Overlap | RowRate::Q0Remainder => {
                let mut set = AtomSet::new(d);
                for (z, _) in atoms.iter() {
                    let own = m0(z)?;
                    let overlap = own.min(m0(&add(z, &ctx.u))?);
                    let mass = if row.rate == RowRate::Q0Overlap { overlap } else { own - overlap };
                    if mass > 0.0 {
                        set.add(z.to_vec(), mass);
                    }
                }
                set
            }
        };
        out.push(mu);
    }
    Ok(out)
}

fn sub_measure_atoms(atoms: &AtomSet, sub: super::system::SubMeasure, r: f64) -> AtomSet {
    AtomSet::from_entries(
        atoms.dim(),
        atoms
            .iter()
            .map(|(a, m)| (a.to_vec(), m * sub.weight(norm(a), r)))
            .filter(|(_, m)| *m > 0.0),
    )
}

/// The kernel `Σ μ_i(du) δ_{Ψ_i(u)}(dv) + (ν - Σ μ_i)(du) δ_u(dv)` at `(x, y)`.
pub fn build_kernel(js: &JumpSystem, x: &[f64], y: &[f64]) -> Result<CouplingKernel> {
    let atoms = atoms_of(&js.base)?;
    let ctx = js.context(x, y)?;
    // Σ ν_i <= ν, atom by atom
    for (a, m) in atoms.iter() {
        let mut used = 0.0;
        for row in &js.rows {
            used += match row.rate {
                RowRate::Derived(sub) => sub.weight(norm(a), ctx.r),
                RowRate::Q0Overlap => 0.0,
                RowRate::Q0Remainder => js.q0_ratio(norm(a), ctx.r)?,
            };
        }
        if used > 1.0 + MASS_TOL {
            return Err(Error::SubMeasureViolation((used - 1.0) * m));
        }
    }
    let intensities = row_intensities(js, &ctx)?;
    let mut kernel_atoms = Vec::new();
    for (i, (row, mu)) in js.rows.iter().zip(&intensities).enumerate() {
        for (z, mass) in mu.iter() {
            let w = row.map.forward(&ctx, z);
            kernel_atoms.push(KernelAtom {
                u: ctx.sx(z),
                v: ctx.sy(&w),
                jump_x: z.to_vec(),
                jump_y: w,
                mass,
                row: Some(i),
            });
        }
    }
    for (z, m) in atoms.iter() {
        let used: f64 = intensities.iter().map(|mu| mu.mass_at(z)).sum();
        let rest = m - used;
        if rest < -MASS_TOL {
            return Err(Error::SubMeasureViolation(-rest));
        }
        if rest > MASS_TOL {
            kernel_atoms.push(KernelAtom {
                u: ctx.sx(z),
                v: ctx.sy(z),
                jump_x: z.to_vec(),
                jump_y: z.to_vec(),
                mass: rest,
                row: None,
            });
        }
    }
    Ok(CouplingKernel {
        atoms: kernel_atoms,
        ctx,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarginalityReport {
    pub ok: bool,
    pub max_defect: f64,
    pub first_defect: f64,
    pub second_defect: f64,
}

/// Compares both marginals of the kernel with `σ(x)#ν` and `σ(y)#ν`.
pub fn verify_marginality(kernel: &CouplingKernel, nu: &LevyMeasure) -> Result<MarginalityReport> {
    let atoms = atoms_of(nu)?;
    let ctx = &kernel.ctx;
    let d = atoms.dim();
    let expected_x = atoms.pushforward(|a| ctx.sx(a), d);
    let expected_y = atoms.pushforward(|a| ctx.sy(a), d);
    let first_defect = kernel.first_marginal().max_abs_diff(&expected_x);
    let second_defect = kernel.second_marginal().max_abs_diff(&expected_y);
    let max_defect = first_defect.max(second_defect);
    Ok(MarginalityReport {
        ok: max_defect <= MASS_TOL,
        max_defect,
        first_defect,
        second_defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    /// `Σ μ_{ν_i,Ψ_i} = Σ μ_{ν_i,Ψ_i^{-1}}` within tolerance.
    pub ok: bool,
    pub max_defect: f64,
    /// `max_i |ν_i ∘ Ψ_i - ν_i|`: whether each sub-measure is itself invariant.
    pub invariance_defect: f64,
}

/// Both sides of `Σ μ_{ν_i,Ψ_i} = Σ μ_{ν_i,Ψ_i^{-1}}` as atom lists.
///
/// For explicit-rate rows the right side is `Ψ_i # λ_i`, which equals
/// `μ_{ν_i,Ψ_i^{-1}}` whenever `λ_i = μ_{ν_i,Ψ_i}`.
pub fn verify_symmetry_condition(js: &JumpSystem, x: &[f64], y: &[f64]) -> Result<SymmetryReport> {
    let atoms = atoms_of(&js.base)?;
    let ctx = js.context(x, y)?;
    let d = js.dim();
    let intensities = row_intensities(js, &ctx)?;
    let mut lhs = AtomSet::new(d);
    let mut rhs = AtomSet::new(d);
    let mut invariance_defect: f64 = 0.0;
    for (row, mu) in js.rows.iter().zip(&intensities) {
        for (z, m) in mu.iter() {
            lhs.add(z.to_vec(), m);
        }
        match row.rate {
            RowRate::Derived(sub) => {
                let nu_i = sub_measure_atoms(atoms, sub, ctx.r);
                // ν_i ∘ Ψ_i^{-1} carries the mass of a at Ψ_i(a)
                let composed_inv = nu_i.pushforward(|a| row.map.forward(&ctx, a), d);
                for (z, m) in nu_i.min_with(&composed_inv).iter() {
                    rhs.add(z.to_vec(), m);
                }
                let composed = nu_i.pushforward(|a| row.map.inverse(&ctx, a), d);
                invariance_defect = invariance_defect.max(composed.max_abs_diff(&nu_i));
            }
            RowRate::Q0Overlap | RowRate::Q0Remainder => {
                for (z, m) in mu.iter() {
                    rhs.add(row.map.forward(&ctx, z), m);
                }
            }
        }
    }
    let max_defect = lhs.max_abs_diff(&rhs);
    Ok(SymmetryReport {
        ok: max_defect <= MASS_TOL,
        max_defect,
        invariance_defect,
    })
}

/// A function on pairs together with its gradients at the base point.
pub struct PairFunction<'a> {
    pub value: &'a dyn Fn(&[f64], &[f64]) -> f64,
    pub grad_x: Vec<f64>,
    pub grad_y: Vec<f64>,
}

/// `L̃ g(x, y)` summed exactly over the kernel atoms; small-jump compensation
/// uses the driving jumps `|z| < 1` and `|Ψ_i(z)| < 1`.
pub fn kernel_generator(kernel: &CouplingKernel, g: &PairFunction<'_>, drift: &Drift) -> f64 {
    let (x, y) = (kernel.x(), kernel.y());
    let base = (g.value)(x, y);
    let mut total = dot(&g.grad_x, &drift.eval(x)) + dot(&g.grad_y, &drift.eval(y));
    for a in &kernel.atoms {
        let mut term = (g.value)(&add(x, &a.u), &add(y, &a.v)) - base;
        if norm(&a.jump_x) < 1.0 {
            term -= dot(&g.grad_x, &a.u);
        }
        if norm(&a.jump_y) < 1.0 {
            term -= dot(&g.grad_y, &a.v);
        }
        total += a.mass * term;
    }
    total
}

/// `L f(x)` of the marginal `dX = b dt + σ(X) dZ` directly from the atoms.
pub fn marginal_generator(
    nu: &LevyMeasure,
    ctx_sigma: Option<&super::system::Sigma>,
    x: &[f64],
    f: &dyn Fn(&[f64]) -> f64,
    grad: &[f64],
    drift: &Drift,
) -> Result<f64> {
    let atoms = atoms_of(nu)?;
    let ctx = PairContext::new(x, x, ctx_sigma)?;
    let fx = f(x);
    let mut total = dot(grad, &drift.eval(x));
    for (z, m) in atoms.iter() {
        let u = ctx.sx(z);
        let mut term = f(&add(x, &u)) - fx;
        if norm(z) < 1.0 {
            term -= dot(grad, &u);
        }
        total += m * term;
    }
    Ok(total)
}
