mod common;

use levy_couple::drift::Drift;
use levy_couple::estimators::ks_two_sample;
use levy_couple::measures::{LevyMeasure, TruncationConfig};
use levy_couple::operators::{
    build_kernel, build_multiplicative_system, verify_marginality, verify_symmetry_condition, JumpSystem, Q0Profile, Sigma,
};
use levy_couple::simulate::{simulate_pairs, simulate_paths, CouplingSpec, EventKind, Prepared, Record, Scheme, SdeSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn systems(nu: &LevyMeasure) -> Vec<(&'static str, JumpSystem)> {
    let mut out = vec![
        ("reflection", JumpSystem::reflection(nu.clone(), 0.5).unwrap()),
        ("reflection_all", JumpSystem::reflection(nu.clone(), f64::INFINITY).unwrap()),
        ("basic_0.5", JumpSystem::refined_basic(nu.clone(), 0.5).unwrap()),
        ("basic_1", JumpSystem::refined_basic(nu.clone(), 1.0).unwrap()),
    ];
    // the combined coupling reflects its q0 part outright, which needs a
    // reflection-invariant base; lattice measures are only that on the line
    if nu.dim() == 1 {
        out.push(("refbasic", JumpSystem::reflection_basic(nu.clone(), Q0Profile::Full).unwrap()));
        out.push(("refbasic_half", JumpSystem::reflection_basic(nu.clone(), Q0Profile::HalfDistance).unwrap()));
    }
    let lifted = build_multiplicative_system(&JumpSystem::refined_basic(nu.clone(), 1.0).unwrap(), Sigma::one_plus_square()).unwrap();
    out.push(("multiplicative_basic", lifted));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every coupling kernel built from a jump system has the base measure as
    /// both marginals, and the symmetry condition of the rows holds.
    #[test]
    fn kernels_are_couplings(seed in any::<u64>(), dim in 1usize..=2) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nu = common::random_lattice_measure(&mut rng, dim, 50);
        for _ in 0..3 {
            let (x, y) = common::lattice_pair(&mut rng, dim);
            for (name, js) in systems(&nu) {
                let k = build_kernel(&js, &x, &y).unwrap();
                let m = verify_marginality(&k, &nu).unwrap();
                prop_assert!(m.max_defect <= 1e-12, "{name}: marginality defect {}", m.max_defect);
                if !js.is_multiplicative() {
                    let s = verify_symmetry_condition(&js, &x, &y).unwrap();
                    prop_assert!(s.max_defect <= 1e-12, "{name}: symmetry defect {}", s.max_defect);
                }
            }
        }
    }
}

fn stable_spec(eps: f64) -> SdeSpec {
    SdeSpec::new(
        Drift::Linear { k: -1.0 },
        LevyMeasure::stable(1, 1.0, 1.0).unwrap(),
        TruncationConfig::with_epsilon(eps),
        1.0,
    )
    .unwrap()
}

fn schemes() -> [Scheme; 3] {
    [
        Scheme::Reflection { eta: 0.5 },
        Scheme::RefinedBasic { kappa: 1.0 },
        Scheme::ReflectionBasic { q0: Q0Profile::Full },
    ]
}

#[test]
fn coupled_marginals_match_the_sde() {
    let prep = Prepared::new(&stable_spec(1e-2)).unwrap();
    let n = 3000;
    let single: Vec<f64> = simulate_paths(&prep, &[0.5], &[], n, 101, None, Record::Off)
        .unwrap()
        .iter()
        .map(|p| p.x_final[0])
        .collect();
    for scheme in schemes() {
        let pairs = simulate_pairs(&prep, &CouplingSpec::new(scheme.clone()), &[0.5], &[0.0], &[], n, 202, None, Record::Off).unwrap();
        let xs: Vec<f64> = pairs.iter().map(|p| p.x_final[0]).collect();
        let ks = ks_two_sample(&xs, &single, 0.01).unwrap();
        assert!(!ks.reject, "{}: KS {} > {}", scheme.name(), ks.statistic, ks.critical_value);
        // the second marginal is the SDE started at y
        let ys: Vec<f64> = pairs.iter().map(|p| p.y_final[0] + 0.5 * (-1.0f64).exp()).collect();
        let ks = ks_two_sample(&ys, &single, 0.01).unwrap();
        assert!(!ks.reject, "{} (Y): KS {} > {}", scheme.name(), ks.statistic, ks.critical_value);
    }
}

#[test]
fn coalesced_pairs_stay_together() {
    let prep = Prepared::new(&stable_spec(1e-2)).unwrap();
    for scheme in schemes() {
        let pairs = simulate_pairs(&prep, &CouplingSpec::new(scheme.clone()), &[0.05], &[0.0], &[], 200, 3, None, Record::Full).unwrap();
        assert!(pairs.iter().any(|p| p.coalesced), "{}: no pair met", scheme.name());
        for p in pairs.iter().filter(|p| p.coalesced) {
            let first = p.trace.iter().position(|tp| tp.event == EventKind::Coalesce).expect("coalesce event");
            assert_eq!(p.trace[first].t, p.tau.unwrap());
            let gap = p.trace[first..].iter().map(|tp| (tp.x[0] - tp.y[0]).abs()).fold(0.0, f64::max);
            assert_eq!(gap, 0.0, "{}", scheme.name());
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let prep = Prepared::new(&stable_spec(1e-2)).unwrap();
    for scheme in schemes() {
        let c = CouplingSpec::new(scheme);
        let a = simulate_pairs(&prep, &c, &[0.3], &[0.0], &[0.5], 50, 77, Some(1), Record::Jumps).unwrap();
        let b = simulate_pairs(&prep, &c, &[0.3], &[0.0], &[0.5], 50, 77, Some(3), Record::Jumps).unwrap();
        assert_eq!(a, b);
    }
}
