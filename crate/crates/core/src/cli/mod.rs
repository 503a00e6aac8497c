//! The `levy-couple` executable: configuration, subcommands and artifacts.
//!
//! Exit codes: 0 on success, 1 when the configuration or input is invalid
//! (including I/O), 2 when a computation fails or a verification does not pass.

pub mod config;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::Error;
use crate::estimators::{self, McOptions, ModulusOptions};
use crate::operators::{
    build_kernel, build_multiplicative_system, compare_operators, verify_marginality, verify_symmetry_condition,
};
use crate::report::{self, fmt_f64, Table};
use crate::simulate::{simulate_pairs, simulate_paths, Prepared};

pub use config::{ExperimentConfig, Format, Setup};

/// Marginality defects above this fail `verify`.
pub const VERIFY_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "levy-couple", version, about = "Couplings of SDEs driven by pure-jump Lévy noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    /// Experiment file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Replace the configured scheme by this one with default parameters.
    #[arg(long, value_parser = ["reflection", "basic", "refbasic"])]
    pub scheme: Option<String>,
    #[arg(long)]
    pub paths: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// JSON summary file written beside a CSV artifact.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Worker threads; numeric results do not depend on it.
    #[arg(long, env = "LEVY_COUPLE_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact marginality and symmetry checks of the coupling kernel on atoms.
    Verify(Common),
    /// Coupled (or single) sample paths.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Simulate the uncoupled SDE from x0 only.
        #[arg(long)]
        single: bool,
    },
    /// P(τ > t) on the time grid.
    Tail(Common),
    /// Total variation bounds on the time grid.
    Tv(Common),
    /// |P_t f(x) - P_t f(y)| / Φ(|x - y|) on the (δ, t) grid.
    Regularity(Common),
    /// The drift inequality L̃Φ <= -c₀ on the δ grid.
    Driftcheck(Common),
    /// Reflection, combined and basic generators on the configured pairs.
    Compare(Common),
    /// Print the effective configuration with every default filled in.
    PrintConfig(Common),
}

#[derive(Debug)]
pub enum CliError {
    ConfigInvalid(String),
    Io(String),
    NumericFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigInvalid(_) | CliError::Io(_) => 1,
            CliError::NumericFailure(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::ConfigInvalid(m) => write!(f, "invalid configuration: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::NumericFailure(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

fn invalid(e: Error) -> CliError {
    CliError::ConfigInvalid(e.to_string())
}

fn numeric(e: Error) -> CliError {
    CliError::NumericFailure(e.to_string())
}

fn io(e: std::io::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Reads the config (or the defaults) and applies command-line overrides.
pub fn load_config(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let (mut cfg, base) = match &common.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
            let cfg = ExperimentConfig::from_json(&text).map_err(|e| CliError::ConfigInvalid(format!("{}: {e}", p.display())))?;
            let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
            (cfg, base)
        }
        None => (ExperimentConfig::default(), PathBuf::new()),
    };
    if let Some(name) = &common.scheme {
        if cfg.scheme.name() != name {
            cfg.scheme = config::SchemeConfig::from_name(name).expect("clap restricts scheme names");
        }
    }
    if let Some(n) = common.paths {
        cfg.n_paths = n;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    if let Some(o) = &common.out {
        cfg.output.path = Some(o.clone());
    }
    if let Some(f) = common.format {
        cfg.output.format = f;
    }
    if let Some(s) = &common.summary {
        cfg.output.summary = Some(s.clone());
    }
    if cfg.threads == Some(0) {
        return Err(CliError::ConfigInvalid("threads must be positive".into()));
    }
    Ok((cfg, base))
}

/// A subcommand result: the tabular artifact, its JSON twin and a summary.
struct Artifact {
    table: Table,
    rows: Value,
    summary: Value,
    /// Whether the run passed its own check.
    passed: bool,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("results serialize")
}

fn emit(cfg: &ExperimentConfig, command: &str, art: Artifact) -> Result<(), CliError> {
    let hash = cfg.hash();
    let summary = json!({ "command": command, "config_hash": hash, "summary": art.summary });
    let body = match cfg.output.format {
        Format::Csv => art.table.to_csv().map_err(io)?,
        Format::Json => report::to_json(&json!({
            "command": command,
            "config_hash": hash,
            "summary": art.summary,
            "rows": art.rows,
        }))
        .map_err(io)?,
    };
    match &cfg.output.path {
        Some(p) => report::write_atomic(p, &body).map_err(io)?,
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&body).map_err(io)?;
        }
    }
    if let (Format::Csv, Some(p)) = (cfg.output.format, &cfg.output.summary) {
        report::write_atomic(p, &report::to_json(&summary).map_err(io)?).map_err(io)?;
    }
    let line = serde_json::to_string(&summary).expect("summary serializes");
    if cfg.output.path.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
    if art.passed {
        Ok(())
    } else {
        Err(CliError::NumericFailure(format!("{command} check did not pass")))
    }
}

fn mc(cfg: &ExperimentConfig) -> McOptions {
    McOptions {
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        // the worker pool is installed around the whole subcommand
        threads: None,
        config_hash: cfg.hash(),
    }
}

fn pairs_or_default(pairs: &[config::PairConfig], setup: &Setup) -> Vec<(Vec<f64>, Vec<f64>)> {
    if pairs.is_empty() {
        vec![(setup.x0.clone(), setup.y0.clone())]
    } else {
        pairs.iter().map(|p| (p.x.clone(), p.y.clone())).collect()
    }
}

fn verify(cfg: &ExperimentConfig, setup: &Setup) -> Result<Artifact, CliError> {
    let mut js = estimators::jump_system_for(&setup.coupling.scheme, &setup.nu).map_err(invalid)?;
    if let Some(s) = cfg.verify.sigma {
        js = build_multiplicative_system(&js, s.build()).map_err(invalid)?;
    }
    let mut table = Table::new([
        "x", "y", "marginality_defect", "first_defect", "second_defect", "symmetry_defect", "invariance_defect", "total_mass",
    ]);
    let mut rows = Vec::new();
    let (mut worst, mut worst_symmetry) = (0.0f64, 0.0f64);
    for (x, y) in pairs_or_default(&cfg.verify.pairs, setup) {
        let kernel = build_kernel(&js, &x, &y).map_err(numeric)?;
        let m = verify_marginality(&kernel, &setup.nu).map_err(numeric)?;
        let s = verify_symmetry_condition(&js, &x, &y).map_err(numeric)?;
        worst = worst.max(m.max_defect);
        worst_symmetry = worst_symmetry.max(s.max_defect);
        let point = |p: &[f64]| p.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ");
        table.push([
            point(&x),
            point(&y),
            fmt_f64(m.max_defect),
            fmt_f64(m.first_defect),
            fmt_f64(m.second_defect),
            fmt_f64(s.max_defect),
            fmt_f64(s.invariance_defect),
            fmt_f64(kernel.total_mass()),
        ]);
        rows.push(json!({
            "x": x, "y": y, "marginality": to_value(&m), "symmetry": to_value(&s), "total_mass": kernel.total_mass(),
        }));
    }
    Ok(Artifact {
        table,
        rows: Value::Array(rows),
        summary: json!({ "marginality_defect": worst, "symmetry_defect": worst_symmetry, "ok": worst <= VERIFY_TOL }),
        passed: worst <= VERIFY_TOL,
    })
}

fn simulate(cfg: &ExperimentConfig, setup: &Setup, single: bool) -> Result<Artifact, CliError> {
    let prep = Prepared::new(&setup.spec).map_err(invalid)?;
    let record = cfg.simulation.record.into();
    let d = setup.nu.dim();
    if single {
        let paths = simulate_paths(&prep, &setup.x0, &[], cfg.n_paths, cfg.seed, None, record).map_err(numeric)?;
        let jumps: usize = paths.iter().map(|p| p.jumps).sum();
        return Ok(Artifact {
            table: report::single_paths_table(&paths, d),
            rows: to_value(&paths),
            summary: json!({ "paths": paths.len(), "jumps": jumps }),
            passed: true,
        });
    }
    setup.coupling.validate(&setup.nu).map_err(invalid)?;
    let pairs = simulate_pairs(&prep, &setup.coupling, &setup.x0, &setup.y0, &[], cfg.n_paths, cfg.seed, None, record)
        .map_err(numeric)?;
    let coalesced = pairs.iter().filter(|p| p.coalesced).count();
    Ok(Artifact {
        table: report::pair_paths_table(&pairs, d),
        rows: to_value(&pairs),
        summary: json!({ "paths": pairs.len(), "coalesced": coalesced, "scheme": cfg.scheme.name() }),
        passed: true,
    })
}

fn tail(cfg: &ExperimentConfig, setup: &Setup) -> Result<Artifact, CliError> {
    setup.coupling.validate(&setup.nu).map_err(invalid)?;
    let grid = &cfg.grids.t_grid;
    let est = estimators::coupling_time_tail(&setup.spec, &setup.coupling, &setup.x0, &setup.y0, grid, &mc(cfg))
        .map_err(numeric)?;
    let mut table = Table::new(["t", "estimate", "std_error", "n_paths", "seed"]);
    for (t, e) in grid.iter().zip(&est) {
        table.push([fmt_f64(*t), fmt_f64(e.value), fmt_f64(e.std_error), e.n_paths.to_string(), e.seed.to_string()]);
    }
    let rows: Vec<Value> = grid.iter().zip(&est).map(|(t, e)| json!({ "t": t, "estimate": to_value(e) })).collect();
    Ok(Artifact {
        table,
        summary: json!({ "tail": est.iter().map(|e| e.value).collect::<Vec<_>>() }),
        rows: Value::Array(rows),
        passed: true,
    })
}

fn tv(cfg: &ExperimentConfig, setup: &Setup) -> Result<Artifact, CliError> {
    setup.coupling.validate(&setup.nu).map_err(invalid)?;
    let mut table = Table::new(["t", "upper", "upper_std_error", "lower", "n_paths", "seed"]);
    let mut rows = Vec::new();
    for &t in &cfg.grids.t_grid {
        let b = estimators::tv_bound(&setup.spec, &setup.coupling, &setup.x0, &setup.y0, t, &mc(cfg)).map_err(numeric)?;
        table.push([
            fmt_f64(t),
            fmt_f64(b.upper.value),
            fmt_f64(b.upper.std_error),
            fmt_f64(b.lower),
            b.upper.n_paths.to_string(),
            b.upper.seed.to_string(),
        ]);
        rows.push(json!({ "t": t, "bound": to_value(&b) }));
    }
    Ok(Artifact {
        table,
        summary: json!({ "rows": rows.len() }),
        rows: Value::Array(rows),
        passed: true,
    })
}

fn regularity(cfg: &ExperimentConfig, setup: &Setup) -> Result<Artifact, CliError> {
    setup.coupling.validate(&setup.nu).map_err(invalid)?;
    let g = &cfg.grids;
    let r = estimators::regularity_ratio(
        &setup.spec,
        &setup.coupling,
        &cfg.observable,
        &setup.x0,
        &g.delta_grid,
        &g.t_grid,
        None,
        &mc(cfg),
    )
    .map_err(numeric)?;
    let mut table = Table::new(["delta", "t", "ratio", "ratio_std_error", "ceiling", "ceiling_std_error"]);
    for c in &r.cells {
        table.push([
            fmt_f64(c.delta),
            fmt_f64(c.t),
            fmt_f64(c.ratio.value),
            fmt_f64(c.ratio.std_error),
            fmt_f64(c.ceiling.value),
            fmt_f64(c.ceiling.std_error),
        ]);
    }
    Ok(Artifact {
        table,
        rows: to_value(&r.cells),
        summary: json!({ "c_hat": r.c_hat }),
        passed: true,
    })
}

fn driftcheck(cfg: &ExperimentConfig, setup: &Setup) -> Result<Artifact, CliError> {
    let modulus = ModulusOptions {
        seed: cfg.seed,
        ..ModulusOptions::default()
    };
    let r = estimators::drift_inequality_check(
        &setup.coupling.scheme,
        &setup.nu,
        &cfg.drift,
        &cfg.grids.delta_grid,
        &cfg.truncation,
        &modulus,
    )
    .map_err(numeric)?;
    let mut table = Table::new(["delta", "b", "drift_term", "jump_part", "jump_std_error", "total"]);
    for row in &r.table {
        table.push([
            fmt_f64(row.delta),
            fmt_f64(row.b),
            fmt_f64(row.drift_term),
            fmt_f64(row.jump_part),
            fmt_f64(row.jump_std_error),
            fmt_f64(row.total),
        ]);
    }
    Ok(Artifact {
        table,
        rows: to_value(&r.table),
        summary: json!({
            "epsilon0_hat": r.epsilon0_hat,
            "c0_hat": r.c0_hat,
            "ok": r.ok,
            "failure_region": r.failure_region,
            "limsup": to_value(&r.limsup),
        }),
        passed: true,
    })
}

fn compare(cfg: &ExperimentConfig, setup: &Setup) -> Result<Artifact, CliError> {
    let f = cfg.test_function.build(&setup.nu, &cfg.truncation).map_err(invalid)?;
    let pairs = pairs_or_default(&cfg.compare.pairs, setup);
    let rows = compare_operators(cfg.compare.case.into(), &setup.nu, &f, &pairs, &cfg.truncation).map_err(numeric)?;
    let mut table = Table::new([
        "x", "y", "distance", "reflection", "reflection_std_error", "reflection_basic", "reflection_basic_std_error", "basic",
        "basic_std_error",
    ]);
    for r in &rows {
        let point = |p: &[f64]| p.iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>().join(" ");
        table.push([
            point(&r.x),
            point(&r.y),
            fmt_f64(r.distance),
            fmt_f64(r.reflection.value),
            fmt_f64(r.reflection.std_error),
            fmt_f64(r.reflection_basic.value),
            fmt_f64(r.reflection_basic.std_error),
            fmt_f64(r.basic.value),
            fmt_f64(r.basic.std_error),
        ]);
    }
    Ok(Artifact {
        table,
        rows: to_value(&rows),
        summary: json!({ "pairs": rows.len(), "case": cfg.compare.case }),
        passed: true,
    })
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("levy-couple: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: &Command) -> Result<(), CliError> {
    let (common, name) = match command {
        Command::Verify(c) => (c, "verify"),
        Command::Simulate { common, .. } => (common, "simulate"),
        Command::Tail(c) => (c, "tail"),
        Command::Tv(c) => (c, "tv"),
        Command::Regularity(c) => (c, "regularity"),
        Command::Driftcheck(c) => (c, "driftcheck"),
        Command::Compare(c) => (c, "compare"),
        Command::PrintConfig(c) => (c, "print-config"),
    };
    let (cfg, base) = load_config(common)?;
    if let Command::PrintConfig(_) = command {
        let text = report::to_json(&cfg).map_err(io)?;
        match &cfg.output.path {
            Some(p) => report::write_atomic(p, &text).map_err(io)?,
            None => print!("{}", String::from_utf8_lossy(&text)),
        }
        return Ok(());
    }
    let setup = Setup::new(&cfg, &base).map_err(invalid)?;
    let pool_threads = cfg.threads;
    let work = || -> Result<Artifact, CliError> {
        match command {
            Command::Verify(_) => verify(&cfg, &setup),
            Command::Simulate { single, .. } => simulate(&cfg, &setup, *single),
            Command::Tail(_) => tail(&cfg, &setup),
            Command::Tv(_) => tv(&cfg, &setup),
            Command::Regularity(_) => regularity(&cfg, &setup),
            Command::Driftcheck(_) => driftcheck(&cfg, &setup),
            Command::Compare(_) => compare(&cfg, &setup),
            Command::PrintConfig(_) => unreachable!("handled above"),
        }
    };
    let art = match pool_threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| CliError::ConfigInvalid(format!("cannot start {k} workers: {e}")))?
            .install(work)?,
        None => work()?,
    };
    emit(&cfg, name, art)
}
