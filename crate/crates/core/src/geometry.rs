//! Deterministic vector maps shared by every coupling: the hyperplane
//! reflection `R_{x,y}` and the radial truncation `(v)_kappa`.

/// Pairs closer than this are treated as coincident by [`reflect`].
pub const DEGENERATE_DISTANCE: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p - q).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(p, q)| p + q).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|p| p * s).collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Reflection of `z` at the hyperplane orthogonal to `x - y`.
///
/// Returns `z` unchanged when `|x - y| < DEGENERATE_DISTANCE`.
pub fn reflect(x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
    let u = sub(x, y);
    reflect_along(&u, z)
}

/// Same as [`reflect`] with the normal direction `u = x - y` given directly.
pub fn reflect_along(u: &[f64], z: &[f64]) -> Vec<f64> {
    let uu = dot(u, u);
    if uu.sqrt() < DEGENERATE_DISTANCE {
        return z.to_vec();
    }
    let coef = 2.0 * dot(u, z) / uu;
    z.iter().zip(u).map(|(zi, ui)| zi - coef * ui).collect()
}

/// `(1 ∧ kappa/|v|) v`, with the convention `0 ↦ 0`.
///
/// `kappa = f64::INFINITY` disables the truncation.
pub fn truncate_kappa(v: &[f64], kappa: f64) -> Vec<f64> {
    debug_assert!(kappa > 0.0);
    let n = norm(v);
    if n <= kappa || n == 0.0 {
        v.to_vec()
    } else {
        scale(v, kappa / n)
    }
}

/// A reflection map frozen for one pair `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionMap {
    normal: Vec<f64>,
}

impl ReflectionMap {
    pub fn new(x: &[f64], y: &[f64]) -> Self {
        Self { normal: sub(x, y) }
    }

    pub fn is_identity(&self) -> bool {
        norm(&self.normal) < DEGENERATE_DISTANCE
    }

    pub fn apply(&self, z: &[f64]) -> Vec<f64> {
        reflect_along(&self.normal, z)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], scale: f64) -> bool {
        distance(a, b) <= 1e-12 * scale.max(1.0)
    }

    #[test]
    fn reflects_component_along_normal() {
        assert_eq!(reflect(&[1.0], &[-1.0], &[2.0]), vec![-2.0]);
        let r = reflect(&[1.0, 0.0], &[-1.0, 0.0], &[2.0, 3.0]);
        assert_eq!(r, vec![-2.0, 3.0]);
    }

    #[test]
    fn coincident_pair_is_identity() {
        let z = [0.3, -1.2, 4.0];
        assert_eq!(reflect(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], &z), z.to_vec());
        // below the degeneracy threshold
        assert_eq!(reflect(&[1.0], &[1.0 + 1e-13], &[0.5]), vec![0.5]);
        assert!(ReflectionMap::new(&[0.0], &[0.0]).is_identity());
    }

    #[test]
    fn maps_difference_to_its_negative() {
        let x = [0.4, -0.7];
        let y = [-1.1, 0.2];
        let u = sub(&x, &y);
        let r = reflect(&x, &y, &u);
        assert!(close(&r, &sub(&y, &x), 1.0));
    }

    #[test]
    fn truncation_examples() {
        assert_eq!(truncate_kappa(&[0.3], 0.5), vec![0.3]);
        assert!((truncate_kappa(&[0.8], 0.5)[0] - 0.5).abs() < 1e-15);
        assert_eq!(truncate_kappa(&[0.0, 0.0], 0.5), vec![0.0, 0.0]);
        assert_eq!(truncate_kappa(&[-3.0], f64::INFINITY), vec![-3.0]);
        let t = truncate_kappa(&[3.0, 4.0], 1.0);
        assert!((t[0] - 0.6).abs() < 1e-15 && (t[1] - 0.8).abs() < 1e-15);
    }

    fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, d)
    }

    fn triples() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>)> {
        (1usize..6).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), vec_strategy(d), vec_strategy(d)))
    }

    proptest! {
        #[test]
        fn reflection_identities((x, y, z, w) in triples()) {
            let r = reflect(&x, &y, &z);
            let s = norm(&z) + distance(&x, &y) + norm(&w);
            prop_assert!((norm(&r) - norm(&z)).abs() <= 1e-12 * s.max(1.0));
            prop_assert!(close(&reflect(&x, &y, &r), &z, s));
            prop_assert!(close(&reflect(&y, &x, &z), &r, s));
            let u = sub(&x, &y);
            prop_assert!(close(&reflect(&x, &y, &add(&z, &u)), &sub(&r, &u), s));
            let lin = add(&reflect(&x, &y, &z), &reflect(&x, &y, &w));
            prop_assert!(close(&reflect(&x, &y, &add(&z, &w)), &lin, s));
        }

        #[test]
        fn truncation_is_bounded_parallel_and_lipschitz(
            (v, w, kappa) in (1usize..5).prop_flat_map(|d| (vec_strategy(d), vec_strategy(d), 0.01f64..3.0))
        ) {
            let tv = truncate_kappa(&v, kappa);
            prop_assert!(norm(&tv) <= kappa * (1.0 + 1e-12));
            // parallel: tv = c v with c in (0, 1]
            let c = if norm(&v) > 0.0 { norm(&tv) / norm(&v) } else { 1.0 };
            prop_assert!(close(&tv, &scale(&v, c), 1.0));
            let tw = truncate_kappa(&w, kappa);
            prop_assert!(distance(&tv, &tw) <= distance(&v, &w) * (1.0 + 1e-12) + 1e-15);
        }
    }
}
