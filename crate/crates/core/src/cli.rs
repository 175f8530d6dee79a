//! Command-line pipeline: config merging, the six commands, exit codes.
//!
//! Exit codes: 0 success, 1 F not Hurwitz, 2 small-gain condition fails,
//! 3 a numerical check (mean-square bound, operator identities) fails,
//! 64 bad configuration, 66 I/O failure, 70 internal numerical failure.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::certify::{certify_with, hinf_condition, CertifyOptions, StabilityCertificate, Verdict};
use crate::error::{Error, Result};
use crate::focksim::{
    build_algebra, check_commutator_identities, check_ms_bound, random_block_hermitian,
    simulate_opa, simulate_system, SimConfig,
};
use crate::io::{self, ConfigFile, OpaSpec, SimSpec, SweepSpec};
use crate::linalg::C64;
use crate::model::LinearQuantumSystem;
use crate::opa::{
    amplitudes_for, build_opa, invariant_ellipsoid, lambda_bar, region_curve, OpaParams,
};
use crate::perturbation::{scan_sector_region, MagnitudeGrid, PerturbationSeries, SectorBounds};

/// `println!` that ignores a closed stdout (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_HURWITZ: i32 = 1;
pub const EXIT_SMALL_GAIN: i32 = 2;
pub const EXIT_CHECK_FAILED: i32 = 3;
pub const EXIT_CONFIG: i32 = 64;
pub const EXIT_IO: i32 = 66;
pub const EXIT_INTERNAL: i32 = 70;

/// `χ` used when an OPA config leaves it out; it does not enter the
/// certificate, only the region and the simulation.
pub const DEFAULT_CHI: f64 = 0.1;
pub const DEFAULT_SAMPLES: usize = 200;
pub const DEFAULT_GRID: usize = 50;
pub const DEFAULT_SIM_DIM: usize = 12;
pub const DEFAULT_IDENTITY_DIM: usize = 6;
pub const DEFAULT_OUT: &str = "qstab";
/// Target `(|z₁|², |z₂|²)` of the default OPA initial state.
pub const DEFAULT_Z_SQ: [f64; 2] = [0.25, 0.25];
/// Largest identity residual accepted by `check-identities`.
pub const IDENTITY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Validate,
    Certify,
    OpaRegion,
    Simulate,
    Sweep,
    CheckIdentities,
}

/// Values given on the command line; each one overrides the config file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub kappa1: Option<f64>,
    pub kappa2: Option<f64>,
    pub chi: Option<f64>,
    pub gamma: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub dim: Option<usize>,
    pub dt: Option<f64>,
    pub t_final: Option<f64>,
    pub grid: Option<usize>,
    pub samples: Option<usize>,
    pub out: Option<String>,
    pub seed: Option<u64>,
    pub eps: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub file: ConfigFile,
}

impl RunConfig {
    pub fn new(command: Command, file: Option<ConfigFile>, o: &Overrides) -> Self {
        let mut f = file.unwrap_or_default();
        if o.kappa1.is_some() || o.kappa2.is_some() || o.chi.is_some() {
            let opa = f.opa.get_or_insert_with(OpaSpec::default);
            opa.kappa1 = o.kappa1.or(opa.kappa1);
            opa.kappa2 = o.kappa2.or(opa.kappa2);
            opa.chi = o.chi.or(opa.chi);
        }
        f.bounds.gamma = o.gamma.or(f.bounds.gamma);
        f.bounds.delta1 = o.delta1.or(f.bounds.delta1);
        f.bounds.delta2 = o.delta2.or(f.bounds.delta2);
        if o.dim.is_some() || o.dt.is_some() || o.t_final.is_some() {
            let sim = f.sim.get_or_insert_with(SimSpec::default);
            sim.dim = o.dim.or(sim.dim);
            sim.dt = o.dt.or(sim.dt);
            sim.t_final = o.t_final.or(sim.t_final);
        }
        f.grid = o.grid.or(f.grid);
        f.samples = o.samples.or(f.samples);
        f.out = o.out.clone().or(f.out);
        f.seed = o.seed.or(f.seed);
        f.eps = o.eps.or(f.eps);
        RunConfig { command, file: f }
    }

    pub fn out_path(&self, suffix: &str) -> PathBuf {
        PathBuf::from(format!(
            "{}_{suffix}",
            self.file.out.as_deref().unwrap_or(DEFAULT_OUT)
        ))
    }
}

/// The system under study: the OPA or an explicit model with its series.
#[derive(Clone, Debug)]
pub struct Problem {
    pub sys: LinearQuantumSystem,
    pub series: PerturbationSeries,
    pub opa: Option<OpaParams>,
}

pub fn problem(file: &ConfigFile) -> Result<Problem> {
    match (&file.opa, &file.system) {
        (Some(_), Some(_)) => Err(Error::Config(
            "give either an OPA or a general system, not both".into(),
        )),
        (None, None) => Err(Error::Config(
            "no system given (use --kappa1/--kappa2 or a config file)".into(),
        )),
        (Some(spec), None) => {
            if file.series.is_some() {
                return Err(Error::Config("the OPA fixes its own series".into()));
            }
            let params = io::opa_params_from(spec, DEFAULT_CHI)?;
            let (sys, series) = build_opa(&params)?;
            Ok(Problem {
                sys,
                series,
                opa: Some(params),
            })
        }
        (None, Some(spec)) => {
            let sys = spec.build().map_err(|e| Error::Config(e.to_string()))?;
            let series = io::series_from_terms(sys.p, file.series.as_deref().unwrap_or(&[]))
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(Problem {
                sys,
                series,
                opa: None,
            })
        }
    }
}

pub fn bounds_from(file: &ConfigFile) -> Result<SectorBounds> {
    let gamma = file
        .bounds
        .gamma
        .ok_or_else(|| Error::Config("missing gamma".into()))?;
    SectorBounds::new(
        gamma,
        file.bounds.delta1.unwrap_or(0.0),
        file.bounds.delta2.unwrap_or(0.0),
    )
    .map_err(|e| Error::Config(e.to_string()))
}

/// Smallest `γ` (to within `tol`) passing the small-gain condition
/// `‖Ẽ(sI − F)⁻¹JẼ†‖∞ < γ/2`. The norm is computed once and the predicate is
/// bisected on `[0, hi]`; with vanishing channels every `γ > 0` passes and the
/// floor `0` is returned.
pub fn gamma_search(sys: &LinearQuantumSystem, delta1: f64, delta2: f64, tol: f64) -> Result<f64> {
    if !(delta1 >= 0.0 && delta2 >= 0.0) {
        return Err(Error::InvalidParameter(
            "delta1 and delta2 must be nonnegative".into(),
        ));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "tolerance must be positive, got {tol}"
        )));
    }
    let norm = hinf_condition(sys, 1.0)?.reduced;
    if norm == 0.0 {
        return Ok(0.0);
    }
    let pass = |g: f64| norm < g / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while !pass(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pass(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e.root() {
        Error::Config(_)
        | Error::Json(_)
        | Error::InvalidParameter(_)
        | Error::IndexOutOfRange { .. }
        | Error::Dimension { .. }
        | Error::Truncation(_) => EXIT_CONFIG,
        Error::Io(_) => EXIT_IO,
        Error::NotHurwitz { .. } => EXIT_HURWITZ,
        _ => EXIT_INTERNAL,
    }
}

pub fn verdict_code(v: Verdict) -> i32 {
    match v {
        Verdict::Certified => EXIT_OK,
        Verdict::FailedHurwitz => EXIT_HURWITZ,
        Verdict::FailedSmallGain => EXIT_SMALL_GAIN,
    }
}

/// Runs one command, printing a summary to stdout and diagnostics to stderr.
pub fn run(cfg: &RunConfig) -> i32 {
    match dispatch(cfg) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

fn dispatch(cfg: &RunConfig) -> Result<i32> {
    match cfg.command {
        Command::Validate => validate(cfg),
        Command::Certify => run_certify(cfg),
        Command::OpaRegion => opa_region(cfg),
        Command::Simulate => simulate(cfg),
        Command::Sweep => sweep(cfg),
        Command::CheckIdentities => check_identities(cfg),
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    io::write_atomic(path, text.as_bytes())?;
    out!("wrote {}", path.display());
    Ok(())
}

fn validate(cfg: &RunConfig) -> Result<i32> {
    let prob = problem(&cfg.file)?;
    let mut bad = 0;
    for v in prob.sys.validate()? {
        eprintln!("model: {v}");
        bad += 1;
    }
    for v in prob.series.validate_selfadjoint() {
        let (i, j, k, l) = v.key;
        eprintln!(
            "series: term ({}, {}, {k}, {l}) lacks its adjoint partner, residual {:.3e}",
            i + 1,
            j + 1,
            v.residual
        );
        bad += 1;
    }
    if cfg.file.bounds.gamma.is_some() {
        bounds_from(&cfg.file)?;
    }
    if bad > 0 {
        eprintln!("{bad} violation(s)");
        return Ok(EXIT_CONFIG);
    }
    out!(
        "valid: n = {}, m = {}, p = {}",
        prob.sys.n,
        prob.sys.m,
        prob.sys.p
    );
    Ok(EXIT_OK)
}

/// Certificate for the configured problem, with the invariant level filled
/// in for a certified OPA.
pub fn certificate_for(
    prob: &Problem,
    bounds: &SectorBounds,
    eps: Option<f64>,
    samples: usize,
) -> Result<StabilityCertificate> {
    let mut cert = certify_with(&prob.sys, bounds, CertifyOptions { eps })?;
    if let (Some(params), Some(p)) = (&prob.opa, &cert.p) {
        let curve = region_curve(params, bounds, samples)?;
        cert.invariant_level = Some(invariant_ellipsoid(p, &curve)?);
    }
    Ok(cert)
}

fn summarize(cert: &StabilityCertificate) {
    out!("verdict: {}", cert.verdict.as_str());
    out!("spectral abscissa: {}", cert.abscissa);
    if let Some(h) = cert.hinf_reduced {
        out!("H-infinity norm: {h} (need < {})", cert.bounds.gamma / 2.0);
    }
    if let Some(k) = cert.constants {
        out!("c1 = {}, c2 = {}, c3 = {}", k.c1, k.c2, k.c3);
    }
    if let Some(level) = cert.invariant_level {
        out!("invariant level: {level}");
    }
}

fn run_certify(cfg: &RunConfig) -> Result<i32> {
    let prob = problem(&cfg.file)?;
    let bounds = bounds_from(&cfg.file)?;
    let cert = certificate_for(
        &prob,
        &bounds,
        cfg.file.eps,
        cfg.file.samples.unwrap_or(DEFAULT_SAMPLES),
    )?;
    summarize(&cert);
    write(
        &cfg.out_path("certificate.json"),
        &io::certificate_to_json(&cert)?,
    )?;
    Ok(verdict_code(cert.verdict))
}

fn opa_region(cfg: &RunConfig) -> Result<i32> {
    let prob = problem(&cfg.file)?;
    let params = prob
        .opa
        .ok_or_else(|| Error::Config("opa-region needs OPA parameters".into()))?;
    let bounds = bounds_from(&cfg.file)?;
    let samples = cfg.file.samples.unwrap_or(DEFAULT_SAMPLES);
    let curve = region_curve(&params, &bounds, samples)?;
    let lb = lambda_bar(&params, &bounds);
    out!("lambda_bar (numerator root): {}", lb.numerator_root);
    out!("lambda_bar (caption form): {}", lb.caption);
    if lb.discrepancy() != 0.0 {
        out!("lambda_bar discrepancy: {}", lb.discrepancy());
    }
    out!("z2 ceiling: {}", curve.cap2);
    write(&cfg.out_path("region.csv"), &io::region_curve_csv(&curve))?;

    let grid = cfg.file.grid.unwrap_or(DEFAULT_GRID);
    let span = |x: f64| if x > 0.0 { 1.05 * x } else { 1.0 };
    let mg = MagnitudeGrid::uniform(&[span(curve.lambda_bar), span(curve.cap2)], grid);
    let mask = scan_sector_region(&prob.series, &bounds, &mg)?;
    write(&cfg.out_path("mask.csv"), &io::region_mask_csv(&mask))?;
    Ok(EXIT_OK)
}

fn sim_config(prob: &Problem, spec: &SimSpec) -> Result<SimConfig> {
    let dim = spec.dim.unwrap_or(DEFAULT_SIM_DIM);
    let alpha: Vec<C64> = match (spec.alpha(), &prob.opa) {
        (Some(a), _) => a,
        (None, Some(_)) => {
            let [z1, z2] = spec.z_sq.unwrap_or(DEFAULT_Z_SQ);
            if !(z1 >= 0.0 && z2 >= 0.0) {
                return Err(Error::Config("z_sq entries must be nonnegative".into()));
            }
            // z_i = α_i*
            amplitudes_for(z1, z2).iter().map(|z| z.conj()).collect()
        }
        (None, None) => {
            return Err(Error::Config(
                "sim.alpha is required for a general system".into(),
            ))
        }
    };
    if alpha.len() != prob.sys.n {
        return Err(Error::Config(format!(
            "{} initial amplitudes for {} modes",
            alpha.len(),
            prob.sys.n
        )));
    }
    let mut sc = SimConfig::new(dim, alpha);
    sc.dt = spec.dt;
    sc.t_final = spec.t_final;
    if let Some(k) = spec.sample_every {
        sc.sample_every = k;
    }
    Ok(sc)
}

fn simulate(cfg: &RunConfig) -> Result<i32> {
    let prob = problem(&cfg.file)?;
    let bounds = bounds_from(&cfg.file)?;
    let spec = cfg.file.sim.clone().unwrap_or_default();
    let sc = sim_config(&prob, &spec)?;
    let cert = certificate_for(
        &prob,
        &bounds,
        cfg.file.eps,
        cfg.file.samples.unwrap_or(DEFAULT_SAMPLES),
    )?;
    summarize(&cert);
    let Some(k) = cert.constants else {
        eprintln!("not certified; nothing to compare the trajectory against");
        return Ok(verdict_code(cert.verdict));
    };
    let traj = match &prob.opa {
        Some(params) => simulate_opa(params, &sc)?,
        None => simulate_system(
            &prob.sys,
            &prob.series,
            &sc,
            sc.dt.unwrap_or(1e-3),
            sc.t_final.unwrap_or(10.0),
        )?,
    };
    let report = check_ms_bound(&traj, k.c1, k.c2, k.c3);
    write(
        &cfg.out_path("trajectory.csv"),
        &io::trajectory_csv(&traj, &report),
    )?;
    out!("worst slack: {}", report.worst_slack);
    if report.holds {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "mean-square bound violated (worst slack {:.6e})",
            report.worst_slack
        );
        Ok(EXIT_CHECK_FAILED)
    }
}

/// One row of a parameter sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub verdict: Option<Verdict>,
    pub abscissa: Option<f64>,
    pub hinf_reduced: Option<f64>,
    pub gamma_min: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub error: Option<String>,
}

fn sweep_values(spec: &SweepSpec) -> Result<Vec<f64>> {
    if spec.steps == 0 || !spec.from.is_finite() || !spec.to.is_finite() {
        return Err(Error::Config(
            "sweep needs finite bounds and at least one step".into(),
        ));
    }
    Ok(if spec.steps == 1 {
        vec![spec.from]
    } else {
        (0..spec.steps)
            .map(|k| spec.from + (spec.to - spec.from) * k as f64 / (spec.steps - 1) as f64)
            .collect()
    })
}

fn sweep_point(base: &ConfigFile, parameter: &str, value: f64) -> Result<SweepPoint> {
    let mut file = base.clone();
    match parameter {
        "kappa1" | "kappa2" | "chi" => {
            let opa = file
                .opa
                .as_mut()
                .ok_or_else(|| Error::Config(format!("sweeping {parameter} needs an OPA")))?;
            match parameter {
                "kappa1" => opa.kappa1 = Some(value),
                "kappa2" => opa.kappa2 = Some(value),
                _ => opa.chi = Some(value),
            }
        }
        "gamma" => file.bounds.gamma = Some(value),
        "delta1" => file.bounds.delta1 = Some(value),
        "delta2" => file.bounds.delta2 = Some(value),
        other => return Err(Error::Config(format!("unknown sweep parameter {other:?}"))),
    }
    let prob = problem(&file)?;
    let bounds = bounds_from(&file)?;
    let mut pt = SweepPoint {
        value,
        verdict: None,
        abscissa: None,
        hinf_reduced: None,
        gamma_min: None,
        c1: None,
        c2: None,
        c3: None,
        error: None,
    };
    match certify_with(&prob.sys, &bounds, CertifyOptions { eps: file.eps }) {
        Ok(cert) => {
            pt.verdict = Some(cert.verdict);
            pt.abscissa = Some(cert.abscissa);
            pt.hinf_reduced = cert.hinf_reduced;
            if let Some(k) = cert.constants {
                pt.c1 = Some(k.c1);
                pt.c2 = Some(k.c2);
                pt.c3 = Some(k.c3);
            }
            if cert.verdict != Verdict::FailedHurwitz {
                pt.gamma_min = gamma_search(&prob.sys, bounds.delta1, bounds.delta2, 1e-6).ok();
            }
        }
        Err(e) => pt.error = Some(e.to_string()),
    }
    Ok(pt)
}

/// Evaluates every sweep point in parallel; results keep input order.
pub fn run_sweep(file: &ConfigFile) -> Result<Vec<SweepPoint>> {
    let spec = file
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep command needs a \"sweep\" section".into()))?;
    let values = sweep_values(spec)?;
    values
        .par_iter()
        .map(|&v| sweep_point(file, &spec.parameter, v))
        .collect()
}

pub fn sweep_csv(parameter: &str, points: &[SweepPoint]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    io::csv_string(
        &[
            parameter,
            "verdict",
            "abscissa",
            "hinf_reduced",
            "gamma_min",
            "c1",
            "c2",
            "c3",
            "error",
        ],
        points.iter().map(|p| {
            vec![
                p.value.to_string(),
                p.verdict.map_or("", Verdict::as_str).to_string(),
                opt(p.abscissa),
                opt(p.hinf_reduced),
                opt(p.gamma_min),
                opt(p.c1),
                opt(p.c2),
                opt(p.c3),
                p.error.as_deref().unwrap_or("").replace([',', '\n'], ";"),
            ]
        }),
    )
}

fn sweep(cfg: &RunConfig) -> Result<i32> {
    let points = run_sweep(&cfg.file)?;
    let parameter = cfg
        .file
        .sweep
        .as_ref()
        .map_or("value", |s| s.parameter.as_str());
    let certified = points
        .iter()
        .filter(|p| p.verdict == Some(Verdict::Certified))
        .count();
    out!("{certified} of {} points certified", points.len());
    write(&cfg.out_path("sweep.csv"), &sweep_csv(parameter, &points))?;
    Ok(EXIT_OK)
}

fn check_identities(cfg: &RunConfig) -> Result<i32> {
    let prob = problem(&cfg.file)?;
    let seed = cfg.file.seed.unwrap_or(0);
    eprintln!("seed = {seed}");
    let dim = cfg
        .file
        .sim
        .as_ref()
        .and_then(|s| s.dim)
        .unwrap_or(DEFAULT_IDENTITY_DIM);
    let alg = build_algebra(prob.sys.n, dim)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_block_hermitian(prob.sys.n, &mut rng);
    let report = check_commutator_identities(&alg, &prob.sys, &p, &prob.series)?;
    for c in &report.checks {
        out!("{:<24} {:.3e}", c.name, c.residual);
    }
    write(
        &cfg.out_path("identities.json"),
        &io::identity_report_json(&report)?,
    )?;
    if report.max_residual() <= IDENTITY_TOL {
        Ok(EXIT_OK)
    } else {
        eprintln!(
            "identity residual {:.3e} exceeds {IDENTITY_TOL:.0e}",
            report.max_residual()
        );
        Ok(EXIT_CHECK_FAILED)
    }
}
