use std::collections::HashMap;

use serde::Serialize;

use super::{phi_variant_for, EstimateResult, McOptions, Observable};
use crate::error::{Error, Result};
use crate::measures::PhiTable;
use crate::simulate::{simulate_pairs, CouplingSpec, PathPair, Prepared, Record, SdeSpec};

fn check_grid(grid: &[f64], what: &str) -> Result<()> {
    if grid.is_empty() || grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidArgument(format!("{what} must be a nonempty increasing grid of positive values")));
    }
    Ok(())
}

fn run_pairs(
    spec: &SdeSpec,
    coupling: &CouplingSpec,
    x0: &[f64],
    y0: &[f64],
    t_grid: &[f64],
    opts: &McOptions,
) -> Result<Vec<PathPair>> {
    opts.validate()?;
    check_grid(t_grid, "t_grid")?;
    let spec = spec.with_horizon(*t_grid.last().expect("nonempty grid"))?;
    let prep = Prepared::new(&spec)?;
    simulate_pairs(&prep, coupling, x0, y0, t_grid, opts.n_paths, opts.seed, opts.threads, Record::Off)
}

fn tail_at(pairs: &[PathPair], t: f64, opts: &McOptions) -> EstimateResult {
    let n = pairs.len() as f64;
    let p = pairs.iter().filter(|p| p.uncoupled_at(t)).count() as f64 / n;
    opts.result(p, (p * (1.0 - p) / n).sqrt())
}

/// `P(τ > t)` for each `t` in `t_grid`, with binomial standard errors.
pub fn coupling_time_tail(
    spec: &SdeSpec,
    coupling: &CouplingSpec,
    x0: &[f64],
    y0: &[f64],
    t_grid: &[f64],
    opts: &McOptions,
) -> Result<Vec<EstimateResult>> {
    let pairs = run_pairs(spec, coupling, x0, y0, t_grid, opts)?;
    Ok(t_grid.iter().map(|&t| tail_at(&pairs, t, opts)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TvBound {
    /// `2 P(τ > t)`, an upper bound for `‖p_t(x,·) - p_t(y,·)‖_TV`.
    pub upper: EstimateResult,
    /// Histogram `L¹` distance between the two marginal samples.
    pub lower: f64,
    pub bins_per_axis: usize,
}

/// Coupling inequality bound on the total variation distance at time `t`.
pub fn tv_bound(
    spec: &SdeSpec,
    coupling: &CouplingSpec,
    x0: &[f64],
    y0: &[f64],
    t: f64,
    opts: &McOptions,
) -> Result<TvBound> {
    let pairs = run_pairs(spec, coupling, x0, y0, &[t], opts)?;
    let tail = tail_at(&pairs, t, opts);
    let upper = opts.result(2.0 * tail.value, 2.0 * tail.std_error);
    let xs: Vec<&[f64]> = pairs.iter().map(|p| p.observations[0].x.as_slice()).collect();
    let ys: Vec<&[f64]> = pairs.iter().map(|p| p.observations[0].y.as_slice()).collect();
    let (lower, bins_per_axis) = histogram_l1(&xs, &ys);
    Ok(TvBound {
        upper,
        lower,
        bins_per_axis,
    })
}

/// `Σ_B |P̂_X(B) - P̂_Y(B)|` over a product grid of `n^{1/(d+2)}` bins per
/// axis between the pooled 0.5% and 99.5% quantiles, outer bins unbounded.
/// Pairs with `X = Y` put their two points in the same bin, so the result
/// never exceeds twice the uncoupled fraction.
fn histogram_l1(xs: &[&[f64]], ys: &[&[f64]]) -> (f64, usize) {
    let n = xs.len();
    let d = xs[0].len();
    let bins = ((n as f64).powf(1.0 / (d as f64 + 2.0)).ceil() as usize).max(1);
    let mut lo = vec![0.0; d];
    let mut hi = vec![0.0; d];
    for k in 0..d {
        let mut v: Vec<f64> = xs.iter().chain(ys).map(|p| p[k]).collect();
        v.sort_by(f64::total_cmp);
        let q = |p: f64| v[((v.len() - 1) as f64 * p).round() as usize];
        lo[k] = q(0.005);
        hi[k] = q(0.995);
    }
    let cell = |p: &[f64]| -> Vec<usize> {
        (0..d)
            .map(|k| {
                let w = hi[k] - lo[k];
                if w > 0.0 {
                    ((p[k] - lo[k]) / w * bins as f64).clamp(0.0, (bins - 1) as f64) as usize
                } else {
                    0
                }
            })
            .collect()
    };
    let mut counts: HashMap<Vec<usize>, i64> = HashMap::new();
    for (x, y) in xs.iter().zip(ys) {
        *counts.entry(cell(x)).or_default() += 1;
        *counts.entry(cell(y)).or_default() -= 1;
    }
    let total: i64 = counts.values().map(|c| c.abs()).sum();
    (total as f64 / n as f64, bins)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityCell {
    pub delta: f64,
    pub t: f64,
    /// `|P̂_t f(x) - P̂_t f(y)| / Φ(δ)`
    pub ratio: EstimateResult,
    /// `2 ‖f‖_∞ P̂(τ > t) / Φ(δ)` from the same paths.
    pub ceiling: EstimateResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegularityTable {
    pub cells: Vec<RegularityCell>,
    /// `max ratio / (1 ∧ 1/t)` over the grid.
    pub c_hat: f64,
}

/// Regularity ratio on the grid `delta_grid × t_grid`, with `y = x + δ e₁`.
/// Both `P_t f(x)` and `P_t f(y)` are read from the same coupled pairs.
#[allow(clippy::too_many_arguments)]
pub fn regularity_ratio(
    spec: &SdeSpec,
    coupling: &CouplingSpec,
    f: &Observable,
    x: &[f64],
    delta_grid: &[f64],
    t_grid: &[f64],
    phi: Option<&PhiTable>,
    opts: &McOptions,
) -> Result<RegularityTable> {
    f.validate()?;
    check_grid(delta_grid, "delta_grid")?;
    let built;
    let phi = match phi {
        Some(p) => p,
        None => {
            built = PhiTable::build(&spec.noise, phi_variant_for(&coupling.scheme), &spec.truncation)?;
            &built
        }
    };
    let mut cells = Vec::with_capacity(delta_grid.len() * t_grid.len());
    for (i, &delta) in delta_grid.iter().enumerate() {
        let mut y = x.to_vec();
        y[0] += delta;
        let cell_opts = McOptions {
            seed: opts.seed.wrapping_add(i as u64),
            ..opts.clone()
        };
        let pairs = run_pairs(spec, coupling, x, &y, t_grid, &cell_opts)?;
        let scale = phi.value(delta);
        let n = pairs.len() as f64;
        for (k, &t) in t_grid.iter().enumerate() {
            let diffs: Vec<f64> = pairs
                .iter()
                .map(|p| {
                    let o = &p.observations[k];
                    f.eval(&o.x) - f.eval(&o.y)
                })
                .collect();
            let mean = diffs.iter().sum::<f64>() / n;
            let var = if pairs.len() > 1 {
                diffs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            let tail = tail_at(&pairs, t, &cell_opts);
            let c = 2.0 * f.sup_norm() / scale;
            cells.push(RegularityCell {
                delta,
                t,
                ratio: cell_opts.result(mean.abs() / scale, (var / n).sqrt() / scale),
                ceiling: cell_opts.result(c * tail.value, c * tail.std_error),
            });
        }
    }
    let c_hat = cells
        .iter()
        .map(|c| c.ratio.value / (1.0f64).min(1.0 / c.t))
        .fold(0.0, f64::max);
    Ok(RegularityTable { cells, c_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::Drift;
    use crate::measures::{LevyMeasure, TruncationConfig};
    use crate::simulate::Scheme;

    fn stable_spec(eps: f64) -> SdeSpec {
        SdeSpec::new(
            Drift::Linear { k: -1.0 },
            LevyMeasure::stable(1, 1.0, 1.0).unwrap(),
            TruncationConfig::with_epsilon(eps),
            1.0,
        )
        .unwrap()
    }

    fn basic() -> CouplingSpec {
        CouplingSpec::new(Scheme::RefinedBasic { kappa: 1.0 })
    }

    #[test]
    fn trivial_tails() {
        let opts = McOptions::new(200, 1);
        let grid = [0.5, 1.0, 2.0];
        let same = coupling_time_tail(&stable_spec(1e-2), &basic(), &[0.3], &[0.3], &grid, &opts).unwrap();
        assert!(same.iter().all(|e| e.value == 0.0 && e.std_error == 0.0));

        let still = SdeSpec::new(Drift::Zero, LevyMeasure::zero(1), TruncationConfig::default(), 1.0).unwrap();
        for scheme in [Scheme::RefinedBasic { kappa: 1.0 }, Scheme::Reflection { eta: 0.5 }] {
            let c = CouplingSpec {
                scheme,
                meet_threshold: Some(0.0),
            };
            let tail = coupling_time_tail(&still, &c, &[0.3], &[0.0], &grid, &opts).unwrap();
            assert!(tail.iter().all(|e| e.value == 1.0));
        }
    }

    #[test]
    fn tail_decreases() {
        let opts = McOptions::new(4000, 9);
        let grid = [0.5, 1.0, 2.0, 4.0];
        let tail = coupling_time_tail(&stable_spec(1e-2), &basic(), &[0.1], &[0.0], &grid, &opts).unwrap();
        for w in tail.windows(2) {
            assert!(w[1].value <= w[0].value, "tail is not monotone");
        }
        let (a, b) = (&tail[0], &tail[3]);
        assert!(a.value - b.value > 3.0 * (a.std_error.powi(2) + b.std_error.powi(2)).sqrt());
    }

    #[test]
    fn tv_bounds() {
        let opts = McOptions::new(2000, 4);
        let same = tv_bound(&stable_spec(1e-2), &basic(), &[0.2], &[0.2], 1.0, &opts).unwrap();
        assert_eq!((same.upper.value, same.lower), (0.0, 0.0));
        let tv = tv_bound(&stable_spec(1e-2), &basic(), &[0.1], &[0.0], 4.0, &opts).unwrap();
        assert!((0.0..=2.0).contains(&tv.upper.value));
        assert!(tv.lower <= tv.upper.value + 3.0 * tv.upper.std_error);
        let far = tv_bound(&stable_spec(1e-2), &basic(), &[5.0], &[-5.0], 0.1, &opts).unwrap();
        assert!(far.lower > 1.0 && far.lower <= far.upper.value + 1e-12);
    }

    #[test]
    fn regularity() {
        let spec = stable_spec(1e-2);
        let c = CouplingSpec::new(Scheme::Reflection { eta: 0.5 });
        let opts = McOptions::new(2000, 21);
        let flat = regularity_ratio(&spec, &c, &Observable::Constant { value: 3.0 }, &[0.0], &[0.05], &[1.0], None, &opts).unwrap();
        assert_eq!(flat.cells[0].ratio.value, 0.0);
        assert_eq!(flat.c_hat, 0.0);

        let tanh = Observable::Tanh { scale: 1.0 };
        let table = regularity_ratio(&spec, &c, &tanh, &[0.0], &[0.01, 0.1], &[1.0, 4.0], None, &opts).unwrap();
        assert_eq!(table.cells.len(), 4);
        for cell in &table.cells {
            assert!(cell.ratio.value <= cell.ceiling.value + 3.0 * cell.ceiling.std_error);
            assert!(cell.ratio.value.is_finite());
        }
        let at = |d: f64, t: f64| table.cells.iter().find(|c| c.delta == d && c.t == t).unwrap().ratio.clone();
        let (late, early) = (at(0.01, 4.0), at(0.01, 1.0));
        assert!(late.value <= early.value + 3.0 * (late.std_error.powi(2) + early.std_error.powi(2)).sqrt());
    }
}
