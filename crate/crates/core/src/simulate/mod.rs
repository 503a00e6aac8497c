//! Pathwise simulation of `dX_t = b(X_t) dt + dZ_t` and of the reflection,
//! refined basic and combined reflection-and-basic couplings.
//!
//! Jumps with `|z| > ε` arrive as one Poisson stream of rate `ν(|z| > ε)`
//! shared by both marginals; the drift is integrated by explicit Euler
//! substeps of size at most `h` between events. Row choices use the left
//! limits `X_{t-}`, `Y_{t-}`.

pub mod parallel;

use std::fmt;

use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::geometry::{add, distance, norm, reflect_along, scale, sub, truncate_kappa};
use crate::measures::{JumpSampler, LevyMeasure, TruncationConfig};
use crate::operators::Q0Profile;

pub use parallel::{path_rng, run_indexed, SeedRecord};

/// Default Euler substep.
pub const DEFAULT_MAX_STEP: f64 = 1e-3;
/// Default `|X|` beyond which a path counts as exploded.
pub const DEFAULT_EXPLOSION_BOUND: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct SdeSpec {
    pub drift: Drift,
    pub noise: LevyMeasure,
    pub truncation: TruncationConfig,
    /// Euler substep bound `h`.
    pub max_step: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub explosion_bound: f64,
}

impl SdeSpec {
    pub fn new(drift: Drift, noise: LevyMeasure, truncation: TruncationConfig, horizon: f64) -> Result<Self> {
        let spec = Self {
            drift,
            noise,
            truncation,
            max_step: DEFAULT_MAX_STEP.min(horizon),
            horizon,
            explosion_bound: DEFAULT_EXPLOSION_BOUND,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.noise.dim()
    }

    pub fn with_horizon(&self, horizon: f64) -> Result<Self> {
        let mut s = self.clone();
        s.horizon = horizon;
        s.max_step = s.max_step.min(horizon);
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        self.truncation.validate()?;
        self.drift.validate(self.dim())?;
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(self.max_step > 0.0 && self.max_step <= self.horizon) {
            return Err(Error::InvalidArgument(format!(
                "max_step must lie in (0, horizon], got {}",
                self.max_step
            )));
        }
        if !(self.explosion_bound > 0.0) {
            return Err(Error::InvalidArgument("explosion bound must be positive".into()));
        }
        if self.drift.lipschitz() * self.max_step > 0.5 {
            log::warn!(
                "Euler step {} is coarse for a drift with Lipschitz constant {}",
                self.max_step,
                self.drift.lipschitz()
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub enum Scheme {
    /// Reflect jumps with `|z| <= η |X_{t-} - Y_{t-}|`.
    Reflection { eta: f64 },
    /// Contract or expand by `(X_{t-} - Y_{t-})_κ` with probability given by `ρ`.
    RefinedBasic { kappa: f64 },
    /// Coalesce or reflect on the `q₀` part, synchronous on `q - q₀`.
    ReflectionBasic { q0: Q0Profile },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::Reflection { .. } => "reflection",
            Scheme::RefinedBasic { .. } => "basic",
            Scheme::ReflectionBasic { .. } => "refbasic",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CouplingSpec {
    pub scheme: Scheme,
    /// `δ_meet`; `None` picks `1e-4 |x₀ - y₀|` for reflection and `0` otherwise.
    pub meet_threshold: Option<f64>,
}

impl CouplingSpec {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            meet_threshold: None,
        }
    }

    pub fn meet_threshold_for(&self, initial_distance: f64) -> f64 {
        match (self.meet_threshold, &self.scheme) {
            (Some(d), _) => d,
            (None, Scheme::Reflection { .. }) => 1e-4 * initial_distance,
            (None, _) => 0.0,
        }
    }

    pub fn validate(&self, nu: &LevyMeasure) -> Result<()> {
        if let Some(d) = self.meet_threshold {
            if !(d >= 0.0) {
                return Err(Error::InvalidArgument(format!("meet threshold must be >= 0, got {d}")));
            }
        }
        match &self.scheme {
            Scheme::Reflection { eta } => {
                if !(*eta > 0.0) {
                    return Err(Error::InvalidArgument(format!("eta must lie in (0, ∞], got {eta}")));
                }
                if !nu.is_reflection_invariant() {
                    return Err(Error::NonSymmetricMeasure);
                }
            }
            Scheme::RefinedBasic { kappa } => {
                if !(*kappa > 0.0) {
                    return Err(Error::InvalidArgument(format!("kappa must be positive, got {kappa}")));
                }
            }
            Scheme::ReflectionBasic { q0 } => {
                if !nu.is_reflection_invariant() {
                    return Err(Error::NonSymmetricMeasure);
                }
                q0.validate(nu)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Drift,
    Sync,
    Reflect,
    Contract,
    Expand,
    Coalesce,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Drift => "drift",
            EventKind::Sync => "sync",
            EventKind::Reflect => "reflect",
            EventKind::Contract => "contract",
            EventKind::Expand => "expand",
            EventKind::Coalesce => "coalesce",
        }
    }

    pub fn is_jump(self) -> bool {
        self != EventKind::Drift
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How much of a path to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Record {
    /// Final state and observations only.
    #[default]
    Off,
    /// Initial state and every jump.
    Jumps,
    /// Also every Euler substep.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub event: EventKind,
    /// `|X_{t-} - Y_{t-}|` for jump events.
    pub pre_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation {
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathPair {
    /// Coupling time, `None` when the pair has not met by the horizon.
    pub tau: Option<f64>,
    pub coalesced: bool,
    pub x_final: Vec<f64>,
    pub y_final: Vec<f64>,
    pub jumps: usize,
    pub observations: Vec<Observation>,
    pub trace: Vec<TracePoint>,
    pub seed: Option<SeedRecord>,
}

impl PathPair {
    /// `τ > t`, counting unmet pairs as `τ = ∞`.
    pub fn uncoupled_at(&self, t: f64) -> bool {
        self.tau.is_none_or(|tau| tau > t)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SinglePath {
    pub x_final: Vec<f64>,
    pub jumps: usize,
    pub observations: Vec<Observation>,
    pub trace: Vec<TracePoint>,
    pub seed: Option<SeedRecord>,
}

/// Per-run data shared by every path: the jump sampler and the compensator.
#[derive(Debug, Clone)]
pub struct Prepared {
    spec: SdeSpec,
    sampler: JumpSampler,
    compensator: Vec<f64>,
}

impl Prepared {
    pub fn new(spec: &SdeSpec) -> Result<Self> {
        spec.validate()?;
        let eps = spec.truncation.epsilon;
        let sampler = JumpSampler::new(&spec.noise, eps, &spec.truncation)?;
        Ok(Self {
            spec: spec.clone(),
            compensator: spec.noise.compensator(eps),
            sampler,
        })
    }

    pub fn spec(&self) -> &SdeSpec {
        &self.spec
    }

    /// Jump rate `ν(|z| > ε)`.
    pub fn rate(&self) -> f64 {
        self.sampler.rate()
    }

    fn next_arrival<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        if self.rate() > 0.0 {
            let e: f64 = rng.sample(Exp1);
            t + e / self.rate()
        } else {
            f64::INFINITY
        }
    }

    fn euler(&self, x: &mut Vec<f64>, dt: f64) {
        let b = self.spec.drift.eval(x);
        for ((xi, bi), ci) in x.iter_mut().zip(&b).zip(&self.compensator) {
            *xi += (bi + ci) * dt;
        }
    }

    fn check(&self, t: f64, x: &[f64]) -> Result<()> {
        let n = norm(x);
        if !(n <= self.spec.explosion_bound) {
            return Err(Error::ExplosionDetected { t, norm: n });
        }
        Ok(())
    }
}

fn check_times(obs: &[f64], horizon: f64) -> Result<()> {
    if obs.windows(2).any(|w| !(w[0] < w[1])) || obs.iter().any(|t| !(*t >= 0.0 && *t <= horizon)) {
        return Err(Error::InvalidArgument(format!(
            "observation times must increase within [0, {horizon}]"
        )));
    }
    Ok(())
}

/// Event loop shared by single paths and pairs. `jump(t, z, rng)` applies a
/// jump at time `t`; `drift(dt)` advances the state by one substep;
/// `observe(t)` records the state.
fn event_loop<R: Rng + ?Sized>(
    prep: &Prepared,
    obs: &[f64],
    rng: &mut R,
    mut drift: impl FnMut(f64, f64) -> Result<()>,
    mut jump: impl FnMut(f64, Vec<f64>, &mut R) -> Result<()>,
    mut observe: impl FnMut(f64),
) -> Result<usize> {
    let horizon = prep.spec.horizon;
    let h = prep.spec.max_step;
    let mut t = 0.0;
    let mut next_jump = prep.next_arrival(0.0, rng);
    let mut next_obs = 0;
    let mut jumps = 0;
    while next_obs < obs.len() && obs[next_obs] == 0.0 {
        observe(0.0);
        next_obs += 1;
    }
    loop {
        let obs_t = obs.get(next_obs).copied().unwrap_or(f64::INFINITY);
        let target = next_jump.min(obs_t).min(horizon);
        let span = target - t;
        if span > 0.0 {
            let n = (span / h).ceil().max(1.0);
            let dt = span / n;
            for i in 1..=n as usize {
                let ti = if i == n as usize { target } else { t + i as f64 * dt };
                drift(ti, dt)?;
            }
        }
        t = target;
        if t == obs_t {
            observe(t);
            next_obs += 1;
        }
        if t == next_jump && t <= horizon {
            let z = prep.sampler.sample(rng).expect("arrivals only occur at positive rate");
            jump(t, z, rng)?;
            jumps += 1;
            next_jump = prep.next_arrival(t, rng);
        }
        if t >= horizon {
            return Ok(jumps);
        }
    }
}

/// One path of the SDE from `x0`, observed at the increasing times `obs`.
pub fn simulate_single<R: Rng + ?Sized>(
    prep: &Prepared,
    x0: &[f64],
    obs: &[f64],
    record: Record,
    rng: &mut R,
) -> Result<SinglePath> {
    let d = prep.spec.dim();
    if x0.len() != d {
        return Err(Error::InvalidArgument(format!("x0 must have dimension {d}")));
    }
    check_times(obs, prep.spec.horizon)?;
    let x = std::cell::RefCell::new(x0.to_vec());
    let trace = std::cell::RefCell::new(Vec::new());
    let mut observations = Vec::with_capacity(obs.len());
    let point = |t: f64, x: &[f64], event| TracePoint {
        t,
        x: x.to_vec(),
        y: vec![],
        event,
        pre_distance: 0.0,
    };
    if record != Record::Off {
        trace.borrow_mut().push(point(0.0, x0, EventKind::Drift));
    }
    let jumps = event_loop(
        prep,
        obs,
        rng,
        |t, dt| {
            let mut x = x.borrow_mut();
            prep.euler(&mut x, dt);
            if record == Record::Full {
                trace.borrow_mut().push(point(t, &x, EventKind::Drift));
            }
            prep.check(t, &x)
        },
        |t, z, _| {
            let mut x = x.borrow_mut();
            *x = add(&x, &z);
            if record != Record::Off {
                trace.borrow_mut().push(point(t, &x, EventKind::Sync));
            }
            prep.check(t, &x)
        },
        |t| {
            let x = x.borrow();
            observations.push(Observation {
                t,
                x: x.clone(),
                y: vec![],
            })
        },
    )?;
    Ok(SinglePath {
        x_final: x.into_inner(),
        jumps,
        observations,
        trace: trace.into_inner(),
        seed: None,
    })
}

struct PairState {
    x: Vec<f64>,
    y: Vec<f64>,
    tau: Option<f64>,
}

impl PairState {
    fn coalesce(&mut self, t: f64) {
        self.y = self.x.clone();
        self.tau.get_or_insert(t);
    }
}

/// Chooses the `Y` displacement for a jump `z` of `X` at the left limits.
fn coupled_jump<R: Rng + ?Sized>(
    nu: &LevyMeasure,
    scheme: &Scheme,
    x: &[f64],
    y: &[f64],
    z: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, EventKind)> {
    let u = sub(x, y);
    let r = norm(&u);
    Ok(match scheme {
        Scheme::Reflection { eta } => {
            if eta.is_infinite() || norm(z) <= eta * r {
                (reflect_along(&u, z), EventKind::Reflect)
            } else {
                (z.to_vec(), EventKind::Sync)
            }
        }
        Scheme::RefinedBasic { kappa } => {
            let s = truncate_kappa(&u, *kappa);
            let neg = scale(&s, -1.0);
            let mark: f64 = rng.random();
            let contract = 0.5 * nu.rho(&neg, z)?;
            if mark <= contract {
                (add(z, &s), EventKind::Contract)
            } else if mark <= contract + 0.5 * nu.rho(&s, z)? {
                (add(z, &neg), EventKind::Expand)
            } else {
                (z.to_vec(), EventKind::Sync)
            }
        }
        Scheme::ReflectionBasic { q0 } => {
            let thin: f64 = rng.random();
            let member = q0.ratio(nu, norm(z), r)?;
            if thin >= member {
                (z.to_vec(), EventKind::Sync)
            } else {
                // r(z, x - y) = q₀(|z|) ∧ q₀(|x - y + z|) / q₀(|z|)
                let w0 = |p: &[f64]| -> Result<f64> {
                    let w = nu.weight_at(p);
                    Ok(if w > 0.0 { w * q0.ratio(nu, norm(p), r)? } else { 0.0 })
                };
                let own = w0(z)?;
                let shifted = add(z, &u);
                let ratio = if own > 0.0 { own.min(w0(&shifted)?) / own } else { 0.0 };
                let mark: f64 = rng.random();
                if mark <= ratio {
                    (shifted, EventKind::Coalesce)
                } else {
                    (reflect_along(&u, z), EventKind::Reflect)
                }
            }
        }
    })
}

/// One coupled path from `(x0, y0)`.
pub fn simulate_pair<R: Rng + ?Sized>(
    prep: &Prepared,
    coupling: &CouplingSpec,
    x0: &[f64],
    y0: &[f64],
    obs: &[f64],
    record: Record,
    rng: &mut R,
) -> Result<PathPair> {
    let d = prep.spec.dim();
    if x0.len() != d || y0.len() != d {
        return Err(Error::InvalidArgument(format!("initial points must have dimension {d}")));
    }
    check_times(obs, prep.spec.horizon)?;
    let nu = &prep.spec.noise;
    coupling.validate(nu)?;
    let meet = coupling.meet_threshold_for(distance(x0, y0));
    let state = std::cell::RefCell::new(PairState {
        x: x0.to_vec(),
        y: y0.to_vec(),
        tau: None,
    });
    let trace = std::cell::RefCell::new(Vec::new());
    let mut observations = Vec::with_capacity(obs.len());
    {
        let mut s = state.borrow_mut();
        if distance(x0, y0) <= meet {
            s.coalesce(0.0);
        }
        if record != Record::Off {
            trace.borrow_mut().push(TracePoint {
                t: 0.0,
                x: s.x.clone(),
                y: s.y.clone(),
                event: EventKind::Drift,
                pre_distance: distance(x0, y0),
            });
        }
    }
    let push = |s: &PairState, t: f64, event, pre_distance| {
        trace.borrow_mut().push(TracePoint {
            t,
            x: s.x.clone(),
            y: s.y.clone(),
            event,
            pre_distance,
        })
    };
    let jumps = event_loop(
        prep,
        obs,
        rng,
        |t, dt| {
            let mut s = state.borrow_mut();
            let pre = distance(&s.x, &s.y);
            prep.euler(&mut s.x, dt);
            let mut met = false;
            if s.tau.is_some() {
                s.y = s.x.clone();
            } else {
                prep.euler(&mut s.y, dt);
                if distance(&s.x, &s.y) <= meet {
                    s.coalesce(t);
                    met = true;
                }
            }
            if met && record != Record::Off {
                push(&s, t, EventKind::Coalesce, pre);
            } else if record == Record::Full {
                push(&s, t, EventKind::Drift, pre);
            }
            prep.check(t, &s.x)?;
            prep.check(t, &s.y)
        },
        |t, z, rng| {
            let mut s = state.borrow_mut();
            let pre = distance(&s.x, &s.y);
            let event = if s.tau.is_some() {
                s.x = add(&s.x, &z);
                s.y = s.x.clone();
                EventKind::Sync
            } else {
                let (w, mut event) = coupled_jump(nu, &coupling.scheme, &s.x, &s.y, &z, rng)?;
                let new_x = add(&s.x, &z);
                let exact_meet = match event {
                    EventKind::Coalesce => true,
                    EventKind::Contract => matches!(coupling.scheme, Scheme::RefinedBasic { kappa } if pre <= kappa),
                    _ => false,
                };
                s.y = add(&s.y, &w);
                s.x = new_x;
                if exact_meet || distance(&s.x, &s.y) <= meet {
                    s.coalesce(t);
                    event = EventKind::Coalesce;
                }
                event
            };
            if record != Record::Off {
                push(&s, t, event, pre);
            }
            prep.check(t, &s.x)?;
            prep.check(t, &s.y)
        },
        |t| {
            let s = state.borrow();
            observations.push(Observation {
                t,
                x: s.x.clone(),
                y: s.y.clone(),
            })
        },
    )?;
    let s = state.into_inner();
    Ok(PathPair {
        coalesced: s.tau.is_some(),
        tau: s.tau,
        x_final: s.x,
        y_final: s.y,
        jumps,
        observations,
        trace: trace.into_inner(),
        seed: None,
    })
}

/// `n` independent single paths, path `i` on stream `i`.
pub fn simulate_paths(
    prep: &Prepared,
    x0: &[f64],
    obs: &[f64],
    n: usize,
    seed: u64,
    threads: Option<usize>,
    record: Record,
) -> Result<Vec<SinglePath>> {
    run_indexed(n, seed, parallel::domain::SINGLE, threads, |i, rng| {
        let mut p = simulate_single(prep, x0, obs, record, rng)?;
        p.seed = Some(SeedRecord {
            master: seed,
            domain: parallel::domain::SINGLE,
            stream: i as u64,
        });
        Ok(p)
    })
}

/// `n` independent coupled pairs, pair `i` on stream `i`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_pairs(
    prep: &Prepared,
    coupling: &CouplingSpec,
    x0: &[f64],
    y0: &[f64],
    obs: &[f64],
    n: usize,
    seed: u64,
    threads: Option<usize>,
    record: Record,
) -> Result<Vec<PathPair>> {
    coupling.validate(&prep.spec.noise)?;
    run_indexed(n, seed, parallel::domain::PAIR, threads, |i, rng| {
        let mut p = simulate_pair(prep, coupling, x0, y0, obs, record, rng)?;
        p.seed = Some(SeedRecord {
            master: seed,
            domain: parallel::domain::PAIR,
            stream: i as u64,
        });
        Ok(p)
    })
}
