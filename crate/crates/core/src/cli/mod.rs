//! Spec-file ingestion, pipeline orchestration and reports.

mod report;
mod specfile;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::cauchy::{check_condition2, Condition2Report};
use crate::chained::{build_chart, chart_symbols, chart_with_feedback, find_output_pair, verify_chained, OutputPair};
use crate::diffgeo::lie_bracket;
use crate::flags::{check_condition1, compute_flags_of, reference_points, Condition1Report};
use crate::harness::{
    fd_bracket, integrate_x, round_trip, simulate, HarnessError, NumericRealization, SampleBox, Signal, Trajectory,
};
use crate::symx::{parse_free, Expr};
use crate::system::SystemSpec;
use crate::triangular::{drift_feedback, extract_triangular, flat_output, flat_output_exprs, parameter_scan, TriangularRealization};

pub use report::{
    BracketOracle, ClosedLoopCheck, Construction, ConstructionReport, FlatnessRoundTrip, OutputPairReport, ParamBinding,
    Provenance, Report, SimulationSummary, Tolerances, VerificationReport, Verdicts,
};
pub use specfile::{load_spec, parse_spec, SpecFileError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Check,
    Transform,
    Verify,
    Simulate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Transform => "transform",
            Command::Verify => "verify",
            Command::Simulate => "simulate",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Spec(#[from] SpecFileError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub spec_path: PathBuf,
    pub seed: u64,
    pub samples: usize,
    pub degree: u32,
    pub rank_tol: f64,
    pub proj_tol: f64,
    pub equiv_tol: f64,
    pub regularity: f64,
    pub dt: f64,
    pub horizon: f64,
    pub out: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Construct even when the conditions fail.
    pub force: bool,
}

impl RunConfig {
    pub fn new(command: Command, spec_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            spec_path: spec_path.into(),
            seed: 0,
            samples: 100,
            degree: 2,
            rank_tol: 1e-9,
            proj_tol: 1e-8,
            equiv_tol: 1e-9,
            regularity: 1e-3,
            dt: 1e-3,
            horizon: 1.0,
            out: None,
            json: None,
            force: false,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for (name, v) in [
            ("rank tolerance", self.rank_tol),
            ("projection tolerance", self.proj_tol),
            ("equivalence tolerance", self.equiv_tol),
            ("regularity threshold", self.regularity),
            ("dt", self.dt),
            ("horizon", self.horizon),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.degree < 1 {
            return Err(CliError::Config("degree must be at least 1".into()));
        }
        if self.samples < 1 {
            return Err(CliError::Config("samples must be at least 1".into()));
        }
        Ok(())
    }

    fn sample_points(&self, spec: &SystemSpec) -> Vec<Vec<f64>> {
        SampleBox::new(spec.sample_box(), self.samples, self.seed).all_points()
    }
}

/// Condition 1 at the sampled points, then condition 2 when it passes.
pub fn run_check(spec: &SystemSpec, cfg: &RunConfig) -> (Condition1Report, Option<Condition2Report>) {
    let points = cfg.sample_points(spec);
    let refs = reference_points(spec);
    let mut table = match compute_flags_of(spec, &spec.g1, &spec.g2, &refs, cfg.rank_tol) {
        Ok(t) => t,
        Err(e) => {
            let rep = Condition1Report {
                pass: false,
                points_checked: 0,
                points_rejected: points.len(),
                records: Vec::new(),
                first_failure: None,
                lie_words: vec![e.to_string()],
                derived_words: Vec::new(),
            };
            return (rep, None);
        }
    };
    let c1 = check_condition1(&mut table, &points, cfg.rank_tol);
    if !c1.pass {
        return (c1, None);
    }
    let c2 = check_condition2(spec, &table, &points, cfg.rank_tol, cfg.proj_tol);
    (c1, Some(c2))
}

fn c1_verdict(c1: &Condition1Report) -> &'static str {
    if c1.points_checked == 0 {
        "inconclusive"
    } else if c1.pass {
        "pass"
    } else {
        "fail"
    }
}

fn strings(es: &[Expr]) -> Vec<String> {
    es.iter().map(Expr::to_string).collect()
}

/// Chart and feedback (user-supplied or searched), triangular extraction
/// and flat output.
pub fn run_construction(spec: &SystemSpec, cfg: &RunConfig) -> Result<(TriangularRealization, ConstructionReport), String> {
    let refs = SampleBox::new(spec.sample_box(), 20, cfg.seed ^ 0xc4a7).all_points();
    let (source, pair, chart, fb) = if let Some(z) = &spec.chart {
        let (c, f) = chart_with_feedback(spec, z.clone(), spec.beta.clone(), &refs).map_err(|e| e.to_string())?;
        ("chart", None, c, f)
    } else if let (Some(h1), Some(h2)) = (&spec.h1, &spec.h2) {
        let pair = OutputPair {
            h1: h1.clone(),
            h2: h2.clone(),
            ansatz: None,
        };
        let (c, f) = build_chart(&pair, spec, &refs).map_err(|e| e.to_string())?;
        let (c, f) = match &spec.beta {
            Some(b) => chart_with_feedback(spec, c.forward, Some(b.clone()), &refs).map_err(|e| e.to_string())?,
            None => (c, f),
        };
        ("output-pair", Some(pair), c, f)
    } else {
        let (pair, c, f) = find_output_pair(spec, cfg.degree, &refs).map_err(|e| e.to_string())?;
        ("search", Some(pair), c, f)
    };
    let chained = verify_chained(&chart, &fb, spec, &refs);
    if !chained.pass {
        let first = &chained.mismatches[0];
        return Err(format!(
            "chained-form check failed: {} component {} is {}, expected {}",
            first.field, first.component, first.got, first.expected
        ));
    }
    let (fb, abar) = drift_feedback(spec, &chart, &fb);
    let real = extract_triangular(spec, &chart, &fb, &abar, &refs).map_err(|e| e.to_string())?;
    let flat = flat_output(spec, &real);
    let flat_e = flat_output_exprs(spec, &real);
    let deps = parameter_scan(spec, &real, &flat_e);
    let report = ConstructionReport {
        source: source.into(),
        output_pair: pair.map(|p| OutputPairReport {
            h1: p.h1.to_string(),
            h2: p.h2.to_string(),
            ansatz: p.ansatz,
        }),
        chart_symbols: chart_symbols(spec).iter().map(|s| s.name().to_string()).collect(),
        chart: strings(&chart.forward),
        inverse: chart.inverse.as_deref().map(strings),
        min_abs_jacobian_det: chart.jacobian_dets.iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min),
        beta: strings(&real.feedback.beta),
        alpha_bar: strings(&real.alpha_bar),
        alpha: strings(&real.feedback.alpha),
        phi: real.phi.as_deref().map(strings),
        phi_x: strings(&real.phi_x),
        structure_check: real.structure_method.clone(),
        chained_check: chained,
        flat_output: flat,
        parameter_dependence: deps,
    };
    Ok((real, report))
}

/// Closed-loop inputs from the spec, defaulting to v = (1, sin t).
pub fn signal_for(spec: &SystemSpec) -> Result<Signal, HarnessError> {
    let (v1, v2) = spec
        .inputs
        .clone()
        .unwrap_or_else(|| (Expr::one(), parse_free("sin(t)").expect("literal parses")));
    Signal::new(v1, v2)
}

/// z0 from the spec, defaulting to the image of the sample-box centre.
pub fn initial_state(spec: &SystemSpec, nr: &NumericRealization) -> Result<Vec<f64>, HarnessError> {
    match &spec.z0 {
        Some(z) => Ok(z.clone()),
        None => {
            let c: Vec<f64> = spec.sample_box().iter().map(|(a, b)| 0.5 * (a + b)).collect();
            nr.to_z(&c)
        }
    }
}

fn bracket_oracle(spec: &SystemSpec, cfg: &RunConfig) -> Option<BracketOracle> {
    let g12 = lie_bracket(&spec.g1, &spec.g2).ok()?;
    let pairs = [
        ("[g1,g2]", spec.g1.clone(), spec.g2.clone()),
        ("[g1,[g1,g2]]", spec.g1.clone(), g12.clone()),
        ("[g2,[g1,g2]]", spec.g2.clone(), g12),
        ("[f,g1]", spec.f.clone(), spec.g1.clone()),
        ("[f,g2]", spec.f.clone(), spec.g2.clone()),
    ];
    let slots = spec.slots();
    let params = spec.param_vector();
    let points = cfg.sample_points(spec);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let compiled: Vec<_> = pairs
        .iter()
        .map(|(_, a, b)| lie_bracket(a, b).ok().and_then(|f| f.compile(&slots).ok()))
        .collect();
    for q in &points {
        let mut args = q.clone();
        args.extend(&params);
        let mut ok = true;
        let mut here: f64 = 0.0;
        for ((_, a, b), sym) in pairs.iter().zip(&compiled) {
            let Some(sym) = sym else {
                ok = false;
                break;
            };
            let exact: Result<Vec<f64>, _> = sym.iter().map(|c| c.eval(&args)).collect();
            let (Ok(exact), Ok(fd)) = (exact, fd_bracket(a, b, &slots, q, &params, h)) else {
                ok = false;
                break;
            };
            let scale = exact.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            let gap = exact.iter().zip(&fd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            here = here.max(gap / scale);
        }
        if ok {
            used += 1;
            worst = worst.max(here);
        }
    }
    Some(BracketOracle {
        brackets: pairs.iter().map(|p| p.0.to_string()).collect(),
        points: used,
        step: h,
        max_rel_error: worst,
        pass: used > 0 && worst <= 1e-5,
    })
}

fn closed_loop_check(spec: &SystemSpec, cfg: &RunConfig, nr: &NumericRealization) -> ClosedLoopCheck {
    let points = SampleBox::new(spec.sample_box(), 100, cfg.seed ^ 0x100).all_points();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x101);
    let mut worst: f64 = 0.0;
    let mut used = 0;
    for x in &points {
        let v = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        let pushed = nr.x_rhs(x, v).and_then(|xd| nr.push_forward(x, &xd));
        let tri = nr.to_z(x).and_then(|z| nr.z_rhs(&z, v, Some(x)));
        let (Ok(a), Ok(b)) = (pushed, tri) else { continue };
        let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let gap = a.iter().zip(&b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        worst = worst.max(gap / scale);
        used += 1;
    }
    ClosedLoopCheck {
        samples: used,
        max_rel_error: worst,
        pass: used > 0 && worst <= 1e-8,
    }
}

/// Simulates both representations; writes the CSV when `out` is given.
pub fn run_simulation(
    spec: &SystemSpec,
    cfg: &RunConfig,
    nr: &NumericRealization,
    out: Option<&Path>,
) -> (Option<Trajectory>, SimulationSummary) {
    let signal = signal_for(spec);
    let z0 = initial_state(spec, nr);
    let mut summary = SimulationSummary {
        z0: Vec::new(),
        x0: Vec::new(),
        inputs: spec
            .inputs
            .as_ref()
            .map_or(["1".into(), "sin(t)".into()], |(a, b)| [a.to_string(), b.to_string()]),
        dt: cfg.dt,
        horizon: cfg.horizon,
        steps: (cfg.horizon / cfg.dt).round() as usize,
        min_regularity: Vec::new(),
        consistency: 0.0,
        csv: None,
        error: None,
    };
    let (signal, z0) = match (signal, z0) {
        (Ok(s), Ok(z)) => (s, z),
        (Err(e), _) | (_, Err(e)) => {
            summary.error = Some(e.to_string());
            return (None, summary);
        }
    };
    summary.z0 = z0.clone();
    summary.x0 = nr.to_x(&z0, None).unwrap_or_default();
    match simulate(nr, &z0, &signal, cfg.horizon, cfg.dt, cfg.regularity) {
        Ok(traj) => {
            summary.min_regularity = traj.min_regularity.clone();
            summary.consistency = traj.consistency;
            if let Some(path) = out {
                let written = std::fs::File::create(path)
                    .map_err(HarnessError::from)
                    .and_then(|f| traj.write_csv(f));
                match written {
                    Ok(()) => summary.csv = Some(path.display().to_string()),
                    Err(e) => summary.error = Some(format!("{}: {e}", path.display())),
                }
            }
            (Some(traj), summary)
        }
        Err(e) => {
            summary.error = Some(e.to_string());
            (None, summary)
        }
    }
}

/// Round trips at dt ∈ {1e−2, 1e−3, 1e−4} against a dt = 1e−5 reference.
pub fn flatness_round_trip(spec: &SystemSpec, cfg: &RunConfig, nr: &NumericRealization, tol: f64) -> FlatnessRoundTrip {
    let mut rep = FlatnessRoundTrip {
        runs: Vec::new(),
        monotone: false,
        pass: false,
        error: None,
    };
    let run = || -> Result<Vec<crate::harness::RoundTrip>, HarnessError> {
        if !nr.has_symbolic_inverse() {
            return Err(HarnessError::NoInverse);
        }
        let signal = signal_for(spec)?;
        let z0 = initial_state(spec, nr)?;
        let x0 = nr.to_x(&z0, None)?;
        let dt_ref = 1e-5;
        let stride = ((cfg.horizon / 10.0) / dt_ref).round() as usize;
        let reference = integrate_x(nr, &x0, &signal, cfg.horizon, dt_ref, stride)?;
        [1e-2, 1e-3, 1e-4]
            .into_iter()
            .map(|dt| round_trip(nr, &x0, &signal, dt, &reference, cfg.regularity))
            .collect()
    };
    match run() {
        Ok(runs) => {
            rep.monotone = runs.windows(2).all(|w| w[1].max_rel_error < w[0].max_rel_error);
            rep.pass = rep.monotone && runs.last().is_some_and(|r| r.max_rel_error <= tol);
            rep.runs = runs;
        }
        Err(e) => rep.error = Some(e.to_string()),
    }
    rep
}

fn provenance(spec: &SystemSpec, cfg: &RunConfig) -> Provenance {
    Provenance {
        tool: "flatcheck".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        spec: cfg.spec_path.display().to_string(),
        seed: cfg.seed,
        samples: cfg.samples,
        degree: cfg.degree,
        tolerances: Tolerances {
            rank: cfg.rank_tol,
            projection: cfg.proj_tol,
            equivalence: cfg.equiv_tol,
            regularity: cfg.regularity,
        },
        dt: cfg.dt,
        horizon: cfg.horizon,
        sample_box: spec.sample_box(),
        parameters: spec
            .params()
            .iter()
            .map(|p| ParamBinding {
                name: p.name().into(),
                value: spec.param_values[p],
                source: if spec.user_bound.contains(p) { "given" } else { "seeded" }.into(),
            })
            .collect(),
        region_note: "conditions are checked at finitely many sampled points of the box, not on an open set".into(),
        timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    }
}

/// Runs a command on an already loaded system.
pub fn run_spec(spec: &SystemSpec, cfg: &RunConfig) -> Result<(Report, Option<Trajectory>), CliError> {
    cfg.validate()?;
    let (c1, c2) = run_check(spec, cfg);
    let c2_verdict = c2.as_ref().map_or("not-run".to_string(), |c| c.verdict.clone());
    let c1v = c1_verdict(&c1);
    let overall = match (c1v, c2_verdict.as_str()) {
        ("pass", "pass" | "vacuous") => "pass",
        ("inconclusive", _) => "inconclusive",
        _ => "fail",
    };
    let mut verdicts = Verdicts {
        condition1: c1v.into(),
        condition2: c2_verdict,
        overall: overall.into(),
        construction: "not-run".into(),
        verification: "not-run".into(),
    };
    let mut construction = None;
    let mut verification = None;
    let mut trajectory = None;
    if cfg.command != Command::Check {
        if overall != "pass" && !cfg.force {
            verdicts.construction = "skipped".into();
            construction = Some(Construction::Failed {
                error: "conditions not met at the sampled points (use --force to construct anyway)".into(),
            });
        } else {
            match run_construction(spec, cfg) {
                Err(e) => {
                    verdicts.construction = "failed".into();
                    construction = Some(Construction::Failed { error: e });
                    if cfg.command != Command::Transform {
                        verdicts.verification = "fail".into();
                    }
                }
                Ok((real, rep)) => {
                    verdicts.construction = "ok".into();
                    construction = Some(Construction::Built(Box::new(rep)));
                    if cfg.command != Command::Transform {
                        let nr = NumericRealization::new(spec, &real)?;
                        let mut ver = VerificationReport::default();
                        if cfg.command == Command::Verify {
                            ver.bracket_oracle = bracket_oracle(spec, cfg);
                            ver.closed_loop = Some(closed_loop_check(spec, cfg, &nr));
                            let (_, sim) = run_simulation(spec, cfg, &nr, None);
                            ver.simulation = Some(sim);
                            ver.flatness_round_trip = Some(flatness_round_trip(spec, cfg, &nr, 1e-5));
                        } else {
                            let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("trajectory.csv"));
                            let (traj, sim) = run_simulation(spec, cfg, &nr, Some(&out));
                            trajectory = traj;
                            ver.simulation = Some(sim);
                        }
                        ver.pass = ver.bracket_oracle.as_ref().is_none_or(|b| b.pass)
                            && ver.closed_loop.as_ref().is_none_or(|c| c.pass)
                            && ver
                                .simulation
                                .as_ref()
                                .is_none_or(|s| s.error.is_none() && s.consistency <= 1e-6)
                            && ver.flatness_round_trip.as_ref().is_none_or(|r| r.pass);
                        verdicts.verification = if ver.pass { "pass" } else { "fail" }.into();
                        verification = Some(ver);
                    }
                }
            }
        }
    }
    let report = Report {
        verdicts,
        condition1: Some(c1),
        condition2: c2,
        construction,
        verification,
        provenance: provenance(spec, cfg),
    };
    Ok((report, trajectory))
}

/// Loads the spec file and runs the configured command; writes the JSON
/// report when requested.
pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    cfg.validate()?;
    let spec = load_spec(&cfg.spec_path, cfg.seed)?;
    let (report, _) = run_spec(&spec, cfg)?;
    if let Some(path) = &cfg.json {
        std::fs::write(path, report.to_json() + "\n").map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(report)
}

/// 0 when everything that ran passed, 1 otherwise.
pub fn exit_code(report: &Report) -> i32 {
    let v = &report.verdicts;
    let ok = v.overall == "pass"
        && matches!(v.construction.as_str(), "ok" | "not-run")
        && matches!(v.verification.as_str(), "pass" | "not-run");
    if ok {
        0
    } else {
        1
    }
}
