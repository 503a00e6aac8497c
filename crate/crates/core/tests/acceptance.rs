mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use levy_couple::drift::Drift;
use levy_couple::estimators::{coupling_time_tail, drift_inequality_check, ks_two_sample, McOptions, ModulusOptions};
use levy_couple::geometry::{add, distance, norm, reflect, sub};
use levy_couple::measures::{LevyMeasure, PhiTable, PhiVariant, RadialProfile, TruncationConfig};
use levy_couple::operators::{
    build_kernel, build_multiplicative_system, check_lemma_bound, compare_operators, verify_marginality, ComparisonCase, JumpSystem,
    LemmaKind, Sigma, TestFunction,
};
use levy_couple::report::{digest, fmt_f64, Table};
use levy_couple::simulate::{simulate_pairs, simulate_paths, CouplingSpec, EventKind, Prepared, Record, Scheme, SdeSpec};
use levy_couple::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

struct Harness {
    failed: usize,
}

impl Harness {
    fn run(&mut self, id: u32, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let mut out = f();
        let elapsed = start.elapsed();
        if let (Ok(detail), Some(limit)) = (&out, budget) {
            if elapsed > limit {
                out = Err(format!("{detail}; runtime {elapsed:.1?} exceeds {limit:?}"));
            }
        }
        match out {
            Ok(detail) => println!("PASS [{id}] {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                self.failed += 1;
                println!("FAIL [{id}] {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn err(e: Error) -> String {
    e.to_string()
}

fn geometry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let n = 100_000;
    for d in [1usize, 2, 3, 10] {
        let v = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-10.0..10.0)).collect() };
        for _ in 0..n {
            let (x, y, z, w) = (v(&mut rng), v(&mut rng), v(&mut rng), v(&mut rng));
            let u = sub(&x, &y);
            let s = (norm(&z) + norm(&u) + norm(&w)).max(1.0);
            let r = reflect(&x, &y, &z);
            let defects = [
                (norm(&r) - norm(&z)).abs(),
                distance(&reflect(&x, &y, &r), &z),
                distance(&reflect(&y, &x, &z), &r),
                distance(&reflect(&x, &y, &add(&z, &u)), &sub(&r, &u)),
                distance(&reflect(&x, &y, &add(&z, &w)), &add(&r, &reflect(&x, &y, &w))),
            ];
            worst = defects.iter().fold(worst, |m, e| m.max(e / s));
        }
    }
    check(worst <= 1e-12, format!("4 x {n} triples, max relative defect {worst:.2e}"))
}

fn marginality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut kernels = 0;
    for m in 0..20 {
        let dim = 1 + m % 2;
        let nu = common::random_lattice_measure(&mut rng, dim, 50);
        let basic = JumpSystem::refined_basic(nu.clone(), 1.0).map_err(err)?;
        let systems = [
            JumpSystem::reflection(nu.clone(), 0.5).map_err(err)?,
            JumpSystem::refined_basic(nu.clone(), 0.5).map_err(err)?,
            build_multiplicative_system(&basic, Sigma::one_plus_square()).map_err(err)?,
            basic,
        ];
        for _ in 0..5 {
            let (x, y) = common::lattice_pair(&mut rng, dim);
            for js in &systems {
                let k = build_kernel(js, &x, &y).map_err(err)?;
                worst = worst.max(verify_marginality(&k, &nu).map_err(err)?.max_defect);
                kernels += 1;
            }
        }
    }
    check(worst <= 1e-12, format!("{kernels} kernels, max defect {worst:.2e}"))
}

fn stable_spec(horizon: f64) -> SdeSpec {
    SdeSpec::new(
        Drift::Linear { k: -1.0 },
        LevyMeasure::stable(1, 1.0, 1.0).unwrap(),
        TruncationConfig::with_epsilon(1e-3),
        horizon,
    )
    .unwrap()
}

fn schemes() -> [Scheme; 3] {
    [
        Scheme::Reflection { eta: 0.5 },
        Scheme::RefinedBasic { kappa: 1.0 },
        Scheme::ReflectionBasic {
            q0: levy_couple::operators::Q0Profile::Full,
        },
    ]
}

const N: usize = 10_000;

/// Coupled and independent `X_1` samples per scheme as CSV, plus the KS verdicts.
fn marginal_laws(threads: usize) -> Result<(Vec<u8>, Vec<String>, bool), String> {
    let prep = Prepared::new(&stable_spec(1.0)).map_err(err)?;
    let single: Vec<f64> =
        simulate_paths(&prep, &[0.5], &[], N, 31, Some(threads), Record::Off).map_err(err)?.iter().map(|p| p.x_final[0]).collect();
    let mut table = Table::new(["path", "single", "reflection", "basic", "refbasic"]);
    let mut columns = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for scheme in schemes() {
        let start = Instant::now();
        let pairs =
            simulate_pairs(&prep, &CouplingSpec::new(scheme.clone()), &[0.5], &[0.0], &[], N, 32, Some(threads), Record::Off).map_err(err)?;
        let xs: Vec<f64> = pairs.iter().map(|p| p.x_final[0]).collect();
        let ks = ks_two_sample(&xs, &single, 0.01).map_err(err)?;
        ok &= !ks.reject;
        lines.push(format!("{} D = {:.4} ({:.1?})", scheme.name(), ks.statistic, start.elapsed()));
        if start.elapsed() > Duration::from_secs(300) {
            ok = false;
        }
        columns.push(xs);
    }
    for i in 0..N {
        table.push([i.to_string(), fmt_f64(single[i]), fmt_f64(columns[0][i]), fmt_f64(columns[1][i]), fmt_f64(columns[2][i])]);
    }
    let crit = ks_two_sample(&single, &single, 0.01).map_err(err)?.critical_value;
    lines.push(format!("critical {crit:.4}"));
    Ok((table.to_csv().map_err(|e| e.to_string())?, lines, ok))
}

fn distance_arithmetic() -> Outcome {
    let prep = Prepared::new(&stable_spec(1.0)).map_err(err)?;
    let kappa = 1.0;
    let coupling = CouplingSpec::new(Scheme::RefinedBasic { kappa });
    let mut jumps = 0usize;
    let mut worst: f64 = 0.0;
    let mut counts = [0usize; 3];
    // starting distances on both sides of κ
    for (x0, seed) in [(0.3, 41), (2.0, 42)] {
        let pairs = simulate_pairs(&prep, &coupling, &[x0], &[0.0], &[], 500, seed, None, Record::Jumps).map_err(err)?;
        for p in &pairs {
            for tp in p.trace.iter().filter(|tp| tp.event != EventKind::Drift) {
                let pre = tp.pre_distance;
                let step = pre.min(kappa);
                let change = (tp.x[0] - tp.y[0]).abs() - pre;
                let (k, e) = [0.0, -step, step]
                    .iter()
                    .map(|c| (change - c).abs())
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .unwrap();
                counts[k] += 1;
                worst = worst.max(e);
                jumps += 1;
            }
        }
    }
    check(
        worst <= 1e-10 && counts[1] > 0 && counts[2] > 0,
        format!("{jumps} jumps (sync {}, contract {}, expand {}), max deviation {worst:.2e}", counts[0], counts[1], counts[2]),
    )
}

fn comparisons() -> Outcome {
    let cfg = TruncationConfig::default();
    let f = TestFunction::Exponential { a: 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let stable = LevyMeasure::stable(1, 1.0, 1.0).map_err(err)?;
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|_| {
            let y = rng.random_range(-1.0..1.0);
            (vec![y + rng.random_range(0.02..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 }], vec![y])
        })
        .collect();
    let rows = compare_operators(ComparisonCase::InfiniteRange, &stable, &f, &pairs, &cfg).map_err(err)?;
    let gap1 = rows.iter().map(|r| r.reflection_basic.value - r.reflection.value).fold(f64::NEG_INFINITY, f64::max);
    let range = 0.5;
    let finite = LevyMeasure::radial(1, RadialProfile::truncated_stable(1, 1.0, 1.0, range)).map_err(err)?;
    let far: Vec<(Vec<f64>, Vec<f64>)> = (0..10)
        .map(|_| {
            let y = rng.random_range(-1.0..1.0);
            (vec![y + rng.random_range(2.0 * range + 0.01..3.0)], vec![y])
        })
        .collect();
    let rows2 = compare_operators(ComparisonCase::FiniteRange, &finite, &f, &far, &cfg).map_err(err)?;
    let basic_zero = rows2.iter().all(|r| r.basic.value == 0.0);
    let gap2 = rows2.iter().map(|r| (r.reflection_basic.value - r.reflection.value).abs()).fold(0.0, f64::max);
    check(
        gap1 <= 1e-6 && basic_zero && gap2 <= 1e-8,
        format!("case 1 max(L_rb - L_r) = {gap1:.3e}; case 2 L_b = 0: {basic_zero}, max |L_rb - L_r| = {gap2:.2e}"),
    )
}

fn lemma_bounds() -> Outcome {
    let cfg = TruncationConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut passed = [0usize; 2];
    let mut worst = f64::NEG_INFINITY;
    for (i, kind) in ["reflection", "basic"].iter().enumerate() {
        for _ in 0..25 {
            let dim = rng.random_range(1..=2);
            let nu = LevyMeasure::stable(dim, rng.random_range(0.3..1.9), rng.random_range(0.5..2.0)).map_err(err)?;
            let drift = Drift::Linear { k: rng.random_range(-2.0..1.0) };
            let f = TestFunction::Exponential { a: rng.random_range(0.2..3.0) };
            let (which, max_r) = if i == 0 {
                (LemmaKind::Reflection, 1.0)
            } else {
                let kappa = [0.5, 1.0, 2.0][rng.random_range(0..3)];
                (LemmaKind::Basic { kappa }, kappa)
            };
            let r = rng.random_range(0.01..max_r);
            let y: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let dir = levy_couple::measures::sample_direction(dim, &mut rng);
            let x = add(&y, &dir.iter().map(|v| v * r).collect::<Vec<_>>());
            let c = check_lemma_bound(which, &nu, &drift, &f, &x, &y, &cfg).map_err(err)?;
            worst = worst.max(c.lhs.value - c.rhs.value);
            if c.ok {
                passed[i] += 1;
            } else {
                eprintln!("{kind}: {c:?} at x = {x:?}, y = {y:?}");
            }
        }
    }
    check(
        passed == [25, 25],
        format!("reflection {}/25, basic {}/25, max lhs - rhs = {worst:.3e}", passed[0], passed[1]),
    )
}

fn drift_inequality() -> Outcome {
    let cfg = TruncationConfig {
        quad_tol: 1e-8,
        ..TruncationConfig::default()
    };
    let nu = LevyMeasure::stable(1, 1.0, 1.0).map_err(err)?;
    let grid = [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0];
    let c = drift_inequality_check(&Scheme::Reflection { eta: 0.5 }, &nu, &Drift::Linear { k: -1.0 }, &grid, &cfg, &ModulusOptions::default())
        .map_err(err)?;
    check(
        c.c0_hat > 0.0 && c.epsilon0_hat >= 0.1,
        format!("c0_hat = {:.4}, epsilon0_hat = {}", c.c0_hat, c.epsilon0_hat),
    )
}

/// Tail table for δ in {0.01, 0.05, 0.1}: `delta, t, estimate, std_error`.
fn tail_scaling(threads: usize) -> Result<(Vec<u8>, Vec<(f64, f64, f64, f64)>), String> {
    let coupling = CouplingSpec::new(Scheme::RefinedBasic { kappa: 1.0 });
    let spec = stable_spec(1.0);
    let mut rows = Vec::new();
    for (i, delta) in [0.01, 0.05, 0.1].into_iter().enumerate() {
        let grid: &[f64] = if delta == 0.05 { &[0.5, 1.0, 4.0] } else { &[1.0] };
        let opts = McOptions {
            threads: Some(threads),
            ..McOptions::new(N, 80 + i as u64)
        };
        for (t, e) in grid.iter().zip(coupling_time_tail(&spec, &coupling, &[delta], &[0.0], grid, &opts).map_err(err)?) {
            rows.push((delta, *t, e.value, e.std_error));
        }
    }
    let mut table = Table::new(["delta", "t", "estimate", "std_error"]);
    for (d, t, v, s) in &rows {
        table.push([fmt_f64(*d), fmt_f64(*t), fmt_f64(*v), fmt_f64(*s)]);
    }
    Ok((table.to_csv().map_err(|e| e.to_string())?, rows))
}

fn judge_tail(rows: &[(f64, f64, f64, f64)]) -> Outcome {
    let nu = LevyMeasure::stable(1, 1.0, 1.0).map_err(err)?;
    let phi = PhiTable::build(&nu, PhiVariant::BasicB, &TruncationConfig::default()).map_err(err)?;
    let ratios: Vec<(f64, f64)> = rows.iter().filter(|r| r.1 == 1.0).map(|r| (r.0, r.2 / phi.value(r.0))).collect();
    let hi = ratios.iter().map(|r| r.1).fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let spread = hi / lo;
    let at = |t: f64| *rows.iter().find(|r| r.0 == 0.05 && r.1 == t).unwrap();
    let (early, late) = (at(0.5), at(4.0));
    let z = (early.2 - late.2) / early.3.hypot(late.3);
    let c_fit = ratios.iter().map(|r| r.1).sum::<f64>() / ratios.len() as f64;
    let shown: Vec<String> = ratios.iter().map(|(d, r)| format!("{d}: {r:.4}")).collect();
    check(
        lo > 0.0 && spread < 3.0 && z > 3.0,
        format!(
            "P/Phi at t=1 [{}], spread {spread:.2}, fitted c {c_fit:.4}; P(0.5) = {:.4}, P(4) = {:.4}, z = {z:.1}",
            shown.join(", "),
            early.2,
            late.2
        ),
    )
}

fn main() -> ExitCode {
    let mut h = Harness { failed: 0 };
    h.run(1, "reflection identities", Some(Duration::from_secs(5)), geometry);
    h.run(2, "kernel marginality", Some(Duration::from_secs(10)), marginality);
    let mut first = None;
    h.run(3, "coupled marginal laws (KS)", Some(Duration::from_secs(900)), || {
        let (csv, lines, ok) = marginal_laws(1)?;
        first = Some(csv);
        check(ok, lines.join(", "))
    });
    h.run(4, "refined basic distance arithmetic", None, distance_arithmetic);
    h.run(5, "operator comparisons", Some(Duration::from_secs(30)), comparisons);
    h.run(6, "lemma bounds", None, lemma_bounds);
    h.run(7, "drift inequality", None, drift_inequality);
    let mut tails = None;
    h.run(8, "coupling time tail scaling", Some(Duration::from_secs(600)), || {
        let (csv, rows) = tail_scaling(1)?;
        tails = Some(csv);
        judge_tail(&rows)
    });
    h.run(9, "determinism across worker counts", None, || {
        let (Some(a), Some(b)) = (&first, &tails) else {
            return Err("criteria 3 and 8 produced no output".into());
        };
        let (a2, _, _) = marginal_laws(4)?;
        let (b2, _) = tail_scaling(3)?;
        check(
            *a == a2 && *b == b2,
            format!("marginals {} vs {}, tails {} vs {}", &digest(a)[..12], &digest(&a2)[..12], &digest(b)[..12], &digest(&b2)[..12]),
        )
    });
    if h.failed == 0 {
        println!("all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} criteria failed", h.failed);
        ExitCode::FAILURE
    }
}
