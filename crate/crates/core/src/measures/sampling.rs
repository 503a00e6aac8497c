//! Sampling from the normalized restriction `ν(· | |z| > ε)`.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{unit_sphere_area, LevyMeasure, Repr, TruncationConfig};
use crate::error::{Error, Result};
use crate::geometry::{norm, scale};
use crate::quadrature::QuadOptions;

/// Uniform point on the unit sphere `S^{d-1}` (a random sign for d = 1).
pub fn sample_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    if dim == 1 {
        return vec![if rng.random::<bool>() { 1.0 } else { -1.0 }];
    }
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-300 {
            return scale(&v, 1.0 / n);
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Empty,
    Atoms {
        locations: Vec<Vec<f64>>,
        cumulative: Vec<f64>,
    },
    Pareto {
        alpha: f64,
    },
    Table {
        /// radial nodes
        nodes: Vec<f64>,
        /// `ν(ε < |z| <= nodes[i])` normalized to end at 1
        cdf: Vec<f64>,
        /// power-law exponent of the radial law on each segment
        shape: Vec<f64>,
    },
}

/// A frozen sampler for `ν(· | |z| > ε)` together with the jump rate `ν(|z| > ε)`.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    dim: usize,
    epsilon: f64,
    rate: f64,
    kind: Kind,
}

impl JumpSampler {
    pub fn new(nu: &LevyMeasure, epsilon: f64, cfg: &TruncationConfig) -> Result<Self> {
        let dim = nu.dim();
        let (rate, kind) = match &nu.repr {
            Repr::Atoms { atoms, .. } => {
                let mut locations = Vec::new();
                let mut cumulative = Vec::new();
                let mut acc = 0.0;
                for (l, m) in atoms.iter() {
                    if norm(l) > epsilon && m > 0.0 {
                        acc += m;
                        locations.push(l.to_vec());
                        cumulative.push(acc);
                    }
                }
                if locations.is_empty() {
                    (0.0, Kind::Empty)
                } else {
                    (acc, Kind::Atoms { locations, cumulative })
                }
            }
            Repr::Stable { alpha, .. } => {
                if !(epsilon > 0.0) {
                    return Err(Error::InvalidArgument("stable jumps need epsilon > 0".into()));
                }
                (nu.tail_mass(epsilon)?, Kind::Pareto { alpha: *alpha })
            }
            Repr::Radial(_) => {
                if !(epsilon > 0.0) {
                    return Err(Error::InvalidArgument("radial jumps need epsilon > 0".into()));
                }
                let rate = nu.mass_beyond(epsilon)?;
                if !(rate > 0.0) {
                    (0.0, Kind::Empty)
                } else {
                    (rate, radial_table(nu, epsilon, rate, cfg)?)
                }
            }
        };
        Ok(Self {
            dim,
            epsilon,
            rate,
            kind,
        })
    }

    /// `ν(|z| > ε)`.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// One jump, or `None` when `ν(|z| > ε) = 0`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Vec<f64>> {
        match &self.kind {
            Kind::Empty => None,
            Kind::Atoms { locations, cumulative } => {
                let total = *cumulative.last().expect("nonempty");
                let u = rng.random::<f64>() * total;
                let i = cumulative.partition_point(|c| *c <= u).min(locations.len() - 1);
                Some(locations[i].clone())
            }
            Kind::Pareto { alpha } => {
                let u = 1.0 - rng.random::<f64>();
                let r = self.epsilon * u.powf(-1.0 / alpha);
                Some(scale(&sample_direction(self.dim, rng), r))
            }
            Kind::Table { nodes, cdf, shape } => {
                let u = rng.random::<f64>();
                let j = cdf.partition_point(|c| *c <= u).clamp(1, nodes.len() - 1) - 1;
                let w = ((u - cdf[j]) / (cdf[j + 1] - cdf[j])).clamp(0.0, 1.0);
                let r = invert_power_segment(nodes[j], nodes[j + 1], shape[j], w);
                Some(scale(&sample_direction(self.dim, rng), r))
            }
        }
    }
}

/// Inverse of the CDF of the density `∝ s^p` on `[a, b]` at level `w`.
fn invert_power_segment(a: f64, b: f64, p: f64, w: f64) -> f64 {
    let q = p + 1.0;
    if !q.is_finite() {
        return a + w * (b - a);
    }
    let l = (b / a).ln();
    if (q * l).abs() < 1e-10 {
        return a * (w * l).exp();
    }
    // a^q + w (b^q - a^q), scaled by a^q to stay in range
    let t = 1.0 + w * (q * l).exp_m1();
    a * t.powf(1.0 / q)
}

fn radial_table(nu: &LevyMeasure, epsilon: f64, rate: f64, cfg: &TruncationConfig) -> Result<Kind> {
    let d = nu.dim() as i32;
    let top = match nu.range_bound() {
        Some(r) => r,
        None => {
            let mut s = epsilon.max(1.0);
            while nu.tail_mass(s)? > 1e-14 * rate {
                s *= 4.0;
                if s > 1e30 {
                    return Err(Error::InvalidMeasure("radial tail does not decay".into()));
                }
            }
            s
        }
    };
    if top <= epsilon {
        return Ok(Kind::Empty);
    }
    let n = cfg.quad_points;
    let step = (top / epsilon).ln() / (n - 1) as f64;
    let mut nodes: Vec<f64> = (0..n).map(|i| epsilon * (step * i as f64).exp()).collect();
    *nodes.last_mut().expect("n >= 64") = top;
    let opts = QuadOptions::with_rel_tol(1e-10);
    let mut cdf = vec![0.0; n];
    for j in 0..n - 1 {
        let m = nu.radial_integral(&|_| 1.0, nodes[j], nodes[j + 1], &opts)?;
        cdf[j + 1] = cdf[j] + m.max(0.0);
    }
    let total = cdf[n - 1];
    if !(total > 0.0) {
        return Ok(Kind::Empty);
    }
    for c in cdf.iter_mut() {
        *c /= total;
    }
    let g = |s: f64| nu.radial_density(s) * s.powi(d - 1) * unit_sphere_area(nu.dim());
    let shape = (0..n - 1)
        .map(|j| {
            let (a, b) = (nodes[j], nodes[j + 1]);
            let (ga, gb) = (g(a), g(b * (1.0 - 1e-12)));
            if ga > 0.0 && gb > 0.0 {
                (gb / ga).ln() / (b / a).ln()
            } else {
                f64::NAN
            }
        })
        .collect();
    Ok(Kind::Table { nodes, cdf, shape })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::RadialProfile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn categorical_atoms() {
        let nu = LevyMeasure::atoms(1, [(vec![1.0], 1.0), (vec![-1.0], 1.0)]).unwrap();
        let s = JumpSampler::new(&nu, 0.5, &TruncationConfig::default()).unwrap();
        assert_eq!(s.rate(), 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mut plus = 0;
        for _ in 0..n {
            let z = s.sample(&mut rng).unwrap();
            assert!(z[0] == 1.0 || z[0] == -1.0);
            plus += (z[0] > 0.0) as usize;
        }
        let p = plus as f64 / n as f64;
        assert!((p - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        let none = JumpSampler::new(&nu, 1.0, &TruncationConfig::default()).unwrap();
        assert!(none.sample(&mut rng).is_none());
        assert!(matches!(nu.sample_jump(2.0, &mut rng), Err(Error::EmptyTail(_))));
    }

    #[test]
    fn pareto_radius() {
        let nu = LevyMeasure::stable(1, 1.0, 1.0).unwrap();
        let s = JumpSampler::new(&nu, 1.0, &TruncationConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 10_000;
        let mut beyond = 0;
        for _ in 0..n {
            let z = s.sample(&mut rng).unwrap();
            assert!(z[0].abs() >= 1.0);
            beyond += (z[0].abs() > 2.0) as usize;
        }
        let target = nu.tail_mass(2.0).unwrap() / nu.tail_mass(1.0).unwrap();
        let p = beyond as f64 / n as f64;
        assert!((p - target).abs() < 3.0 * (target * (1.0 - target) / n as f64).sqrt());
    }

    #[test]
    fn radial_table_matches_tail_ratios() {
        for d in [1usize, 3] {
            let nu = LevyMeasure::radial(d, RadialProfile::tempered_stable(d, 0.7, 1.0, 2.0)).unwrap();
            let eps = 0.01;
            let s = JumpSampler::new(&nu, eps, &TruncationConfig::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let n = 20_000;
            let probe = 0.05;
            let mut beyond = 0;
            for _ in 0..n {
                let z = s.sample(&mut rng).unwrap();
                assert_eq!(z.len(), d);
                assert!(norm(&z) > eps * (1.0 - 1e-12));
                beyond += (norm(&z) > probe) as usize;
            }
            let target = nu.tail_mass(probe).unwrap() / nu.tail_mass(eps).unwrap();
            let p = beyond as f64 / n as f64;
            assert!((p - target).abs() < 3.5 * (target * (1.0 - target) / n as f64).sqrt(), "d={d}: {p} vs {target}");
        }
    }

    #[test]
    fn directions_are_unit_and_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut mean = [0.0; 3];
        let n = 20_000;
        for _ in 0..n {
            let v = sample_direction(3, &mut rng);
            assert!((norm(&v) - 1.0).abs() < 1e-14);
            for (m, x) in mean.iter_mut().zip(&v) {
                *m += x / n as f64;
            }
        }
        // each coordinate has variance 1/3
        assert!(mean.iter().all(|m| m.abs() < 4.0 * (1.0 / 3.0 / n as f64).sqrt()));
    }

    #[test]
    fn power_segment_inversion() {
        for p in [-3.0, -1.0, 0.0, 2.0] {
            let (a, b) = (0.5, 2.0);
            assert!((invert_power_segment(a, b, p, 0.0) - a).abs() < 1e-14);
            assert!((invert_power_segment(a, b, p, 1.0) - b).abs() < 1e-12);
        }
        // uniform density: midpoint at w = 1/2
        assert!((invert_power_segment(1.0, 3.0, 0.0, 0.5) - 2.0).abs() < 1e-14);
    }
}
