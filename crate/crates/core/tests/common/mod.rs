#![allow(dead_code)]

use levy_couple::measures::LevyMeasure;
use rand::Rng;

/// Lattice spacing of the random discrete measures.
pub const H: f64 = 0.125;

/// A symmetric measure on `H Z^d` with at most `max_atoms` atoms, `±a`
/// carrying equal random masses.
pub fn random_lattice_measure<R: Rng>(rng: &mut R, dim: usize, max_atoms: usize) -> LevyMeasure {
    let pairs = (17usize.pow(dim as u32) - 1) / 2;
    let half = rng.random_range(1..=(max_atoms / 2).min(pairs));
    let mut entries: Vec<(Vec<f64>, f64)> = Vec::new();
    while entries.len() < 2 * half {
        let p: Vec<f64> = (0..dim).map(|_| H * rng.random_range(-8i32..=8) as f64).collect();
        if p.iter().all(|v| *v == 0.0) || entries.iter().any(|(q, _)| *q == p) {
            // also rejects -p, since it was pushed together with p
            continue;
        }
        let m = rng.random_range(0.05..2.0);
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        entries.push((p, m));
        entries.push((neg, m));
    }
    LevyMeasure::atoms(dim, entries).expect("valid atoms")
}

/// A pair `(x, y)` whose difference is a lattice vector, so shifted atoms overlap.
pub fn lattice_pair<R: Rng>(rng: &mut R, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    loop {
        let k: Vec<f64> = (0..dim).map(|_| H * rng.random_range(-6i32..=6) as f64).collect();
        if k.iter().any(|v| *v != 0.0) {
            let x = y.iter().zip(&k).map(|(a, b)| a + b).collect();
            return (x, y);
        }
    }
}
