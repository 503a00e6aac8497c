//! Adaptive Gauss–Kronrod (7/15) quadrature with geometric panels for
//! integrable singularities at the origin and slowly decaying tails.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for the adaptive rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-11,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            abs_tol: (rel_tol * 1e-2).min(1e-13),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, o: Integral) -> Integral {
        Integral {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

const ZERO: Integral = Integral {
    value: 0.0,
    error: 0.0,
};

fn kronrod15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<(f64, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[7] * fc;
    let mut resg = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    let k = resk * h;
    let g = resg * h;
    if !k.is_finite() {
        return Err(Error::QuadratureFailure(format!(
            "non-finite integrand on [{a:e}, {b:e}]"
        )));
    }
    Ok((k, (k - g).abs()))
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Globally adaptive bisection on `[a, b]`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, opts: &QuadOptions) -> Result<Integral> {
    if a == b {
        return Ok(ZERO);
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::QuadratureFailure("infinite interval".into()));
    }
    if a > b {
        let r = adaptive(f, b, a, opts)?;
        return Ok(Integral {
            value: -r.value,
            error: r.error,
        });
    }
    let (v, e) = kronrod15(f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value: v, error: e });
    let (mut total, mut err) = (v, e);
    while err > opts.abs_tol.max(opts.rel_tol * total.abs()) {
        if heap.len() >= opts.max_intervals {
            // accept a loosely converged result, reject a wild one
            if err > 1e3 * opts.abs_tol.max(opts.rel_tol * total.abs()) {
                return Err(Error::QuadratureFailure(format!(
                    "no convergence on [{a:e}, {b:e}]: estimate {total:e} +- {err:e}"
                )));
            }
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod15(f, worst.a, mid)?;
        let (v2, e2) = kronrod15(f, mid, worst.b)?;
        total += v1 + v2 - worst.value;
        err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // resum to shed accumulated cancellation in the running totals
    let (value, error) = heap
        .iter()
        .fold((0.0, 0.0), |(s, e), p| (s + p.value, e + p.error));
    Ok(Integral { value, error })
}

fn sorted_breaks(a: f64, b: f64, breaks: &[f64]) -> Vec<f64> {
    let mut pts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > a && *p < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts
}

/// Adaptive integration on `[a, b]` split at the given interior breakpoints.
pub fn integrate<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Integral> {
    let pts = sorted_breaks(a, b, breaks);
    let mut acc = ZERO;
    for w in pts.windows(2) {
        acc = acc + adaptive(f, w[0], w[1], opts)?;
    }
    Ok(acc)
}

/// Sums geometric panels produced by `panel(k)` until the estimated
/// geometric remainder is negligible.
fn geometric_panels<P>(mut panel: P, opts: &QuadOptions, what: &str) -> Result<Integral>
where
    P: FnMut(usize) -> Result<Option<Integral>>,
{
    const MAX_PANELS: usize = 1040;
    let mut total = ZERO;
    let mut prev: Option<f64> = None;
    let mut zero_run = 0;
    let mut growth_run = 0;
    for k in 0..MAX_PANELS {
        let Some(p) = panel(k)? else {
            return Ok(total);
        };
        total = total + p;
        let mag = p.value.abs();
        if mag == 0.0 {
            zero_run += 1;
            if zero_run >= 8 {
                return Ok(total);
            }
            prev = Some(0.0);
            continue;
        }
        zero_run = 0;
        if let Some(pm) = prev.filter(|pm| *pm > 0.0) {
            let q = mag / pm;
            if q >= 0.999 && k >= 40 {
                growth_run += 1;
                if growth_run >= 12 {
                    return Err(Error::QuadratureFailure(format!(
                        "{what}: panel contributions do not decay (divergent integral)"
                    )));
                }
            } else {
                growth_run = 0;
            }
            if q < 0.999 {
                let remainder = mag * q / (1.0 - q);
                if remainder <= opts.rel_tol * total.value.abs() || remainder <= opts.abs_tol {
                    total.value += p.value.signum() * remainder;
                    total.error += remainder;
                    return Ok(total);
                }
            }
        }
        prev = Some(mag);
    }
    Err(Error::QuadratureFailure(format!(
        "{what}: no convergence after {MAX_PANELS} panels"
    )))
}

/// `∫_0^b f`, with `f` allowed an integrable singularity at 0.
/// Panels `[b 2^{-k-1}, b 2^{-k}]` are summed down toward the origin.
pub fn integrate_from_zero<F: Fn(f64) -> f64>(f: &F, b: f64, opts: &QuadOptions) -> Result<Integral> {
    if b <= 0.0 {
        return Ok(ZERO);
    }
    let panel_opts = QuadOptions {
        abs_tol: opts.abs_tol * 1e-3,
        ..*opts
    };
    geometric_panels(
        |k| {
            let hi = b * 0.5f64.powi(k as i32);
            let lo = hi * 0.5;
            if lo == 0.0 {
                return Ok(None);
            }
            adaptive(f, lo, hi, &panel_opts).map(Some)
        },
        opts,
        "integral toward the origin",
    )
}

/// `∫_a^∞ f` for `a > 0`, by panels `[a 2^k, a 2^{k+1}]`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: &F, a: f64, opts: &QuadOptions) -> Result<Integral> {
    if !(a > 0.0) {
        return Err(Error::QuadratureFailure(
            "tail integral needs a positive lower limit".into(),
        ));
    }
    let panel_opts = QuadOptions {
        abs_tol: opts.abs_tol * 1e-3,
        ..*opts
    };
    geometric_panels(
        |k| {
            let lo = a * 2f64.powi(k as i32);
            let hi = lo * 2.0;
            if !hi.is_finite() {
                return Ok(None);
            }
            adaptive(f, lo, hi, &panel_opts).map(Some)
        },
        opts,
        "tail integral",
    )
}

/// `∫_0^b f` with breakpoints; the first panel `[0, p_1]` is handled
/// geometrically so `f` may be singular at 0. `b` may be infinite.
pub fn integrate_radial<F: Fn(f64) -> f64>(
    f: &F,
    b: f64,
    breaks: &[f64],
    opts: &QuadOptions,
) -> Result<Integral> {
    if b <= 0.0 {
        return Ok(ZERO);
    }
    let finite_top = if b.is_finite() {
        b
    } else {
        breaks
            .iter()
            .copied()
            .filter(|p| p.is_finite() && *p > 0.0)
            .fold(1.0, f64::max)
    };
    let pts = sorted_breaks(0.0, finite_top, breaks);
    let mut acc = integrate_from_zero(f, pts[1], opts)?;
    for w in pts[1..].windows(2) {
        acc = acc + adaptive(f, w[0], w[1], opts)?;
    }
    if !b.is_finite() {
        acc = acc + integrate_to_infinity(f, finite_top, opts)?;
    }
    Ok(acc)
}

/// `∫_{-∞}^{∞} f` with breakpoints; tails use geometric panels.
pub fn integrate_line<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], opts: &QuadOptions) -> Result<Integral> {
    let finite: Vec<f64> = breaks.iter().copied().filter(|p| p.is_finite()).collect();
    let lo = finite.iter().copied().fold(-1.0, f64::min) - 1.0;
    let hi = finite.iter().copied().fold(1.0, f64::max) + 1.0;
    let mid = integrate(f, lo, hi, &finite, opts)?;
    let right = integrate_to_infinity(&|s| f(s + hi - 1.0), 1.0, opts)?;
    let left = integrate_to_infinity(&|s| f(lo + 1.0 - s), 1.0, opts)?;
    Ok(mid + right + left)
}
