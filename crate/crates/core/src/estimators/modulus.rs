use rand::Rng;
use serde::Serialize;

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::geometry::{add, dot, scale, sub};
use crate::measures::sample_direction;
use crate::simulate::{parallel::domain, path_rng};

/// Search region and effort for the supremum in `B(r)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusOptions {
    /// Midpoints are searched in `[-half_width, half_width]^d`.
    pub half_width: f64,
    pub samples: usize,
    /// Local refinement rounds around the best pairs (d > 1).
    pub refinements: usize,
    pub seed: u64,
}

impl Default for ModulusOptions {
    fn default() -> Self {
        Self {
            half_width: 10.0,
            samples: 4001,
            refinements: 200,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DriftModulus {
    /// Lower estimate of `B(r)`; exact for linear and constant drifts.
    pub value: f64,
    pub samples: usize,
}

/// `B(r) = sup_{|x-y|=r} <b(x)-b(y), x-y> / r`.
pub fn drift_modulus(b: &Drift, r: f64, dim: usize, opts: &ModulusOptions) -> Result<DriftModulus> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("B(r) needs r > 0, got {r}")));
    }
    b.validate(dim)?;
    match b {
        Drift::Zero => return Ok(DriftModulus { value: 0.0, samples: 0 }),
        Drift::Linear { k } => return Ok(DriftModulus { value: k * r, samples: 0 }),
        _ => {}
    }
    if opts.samples < 2 {
        return Err(Error::InvalidArgument("drift modulus search needs at least two samples".into()));
    }
    // the pair is (m + r θ/2, m - r θ/2)
    let score = |m: &[f64], theta: &[f64]| {
        let half = scale(theta, 0.5 * r);
        let x = add(m, &half);
        let y = sub(m, &half);
        dot(&sub(&b.eval(&x), &b.eval(&y)), &sub(&x, &y)) / r
    };
    let w = opts.half_width;
    if dim == 1 {
        let mut best = f64::NEG_INFINITY;
        let mut grid: Vec<f64> = (0..opts.samples)
            .map(|i| -w + 2.0 * w * i as f64 / (opts.samples - 1) as f64)
            .collect();
        if let Drift::Table { knots, .. } = b {
            for k in knots {
                grid.extend([k - 0.5 * r, k + 0.5 * r]);
            }
        }
        for m in grid {
            best = best.max(score(&[m], &[1.0]));
        }
        return Ok(DriftModulus {
            value: best,
            samples: opts.samples,
        });
    }
    let mut rng = path_rng(opts.seed, domain::DRIFT_SEARCH, 0);
    let mut best = (f64::NEG_INFINITY, vec![0.0; dim], vec![0.0; dim]);
    for _ in 0..opts.samples {
        let m: Vec<f64> = (0..dim).map(|_| rng.random_range(-w..=w)).collect();
        let theta = sample_direction(dim, &mut rng);
        let s = score(&m, &theta);
        if s > best.0 {
            best = (s, m, theta);
        }
    }
    let mut step = 0.1 * w;
    for _ in 0..opts.refinements {
        let m: Vec<f64> = best.1.iter().map(|v| v + step * rng.random_range(-1.0..=1.0)).collect();
        let mut theta: Vec<f64> = best.2.iter().map(|v| v + 0.1 * rng.random_range(-1.0..=1.0)).collect();
        let n = dot(&theta, &theta).sqrt();
        theta.iter_mut().for_each(|v| *v /= n);
        let s = score(&m, &theta);
        if s > best.0 {
            best = (s, m, theta);
        } else {
            step *= 0.98;
        }
    }
    Ok(DriftModulus {
        value: best.0,
        samples: opts.samples + opts.refinements,
    })
}
