//! Command-line front end.

use std::fs;
use std::io::{self, Read, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casesolver::{enumerate_cases, solve, CandidateSolution, CaseId, SolveError, SolveReport, SolverConfig, Verdict};
use crate::control::{sample_trajectory, simulate_exact, ControlSegment, StairStepControl};
use crate::hankel::{shift_sequence, MomentSequence, ShiftKind};
use crate::hausdorff::{check_conditions, ConditionReport, LemmaType};
use crate::moments::{assemble_unchecked, InitialState};
use crate::oracle::{grid_search_min_time, GridSpec, OracleOutcome};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NOT_CONTROLLABLE: i32 = 2;
pub const EXIT_NON_GENERIC: i32 = 3;
pub const EXIT_DISCREPANCY: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "moment-toc", version, about = "Time-optimal control of x1' = u, xj' = x1^(j-1) through moment problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the minimal time and the optimal control.
    Solve(SolveArgs),
    /// Write the exact trajectory of a stair-step control as CSV.
    Simulate(SimulateArgs),
    /// Check a solution against exact simulation and the grid oracle.
    Verify(VerifyArgs),
    /// Solve over a line or grid of initial states.
    Sweep(SweepArgs),
    /// Print the moment sequences for given endpoints and time.
    Moments(MomentsArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Tolerances {
    #[arg(long, env = "MOMENT_TOC_TOL_PD")]
    pub tol_pd: Option<f64>,
    #[arg(long, env = "MOMENT_TOC_TOL_ROOT")]
    pub tol_root: Option<f64>,
    #[arg(long, env = "MOMENT_TOC_TOL_SING")]
    pub tol_sing: Option<f64>,
    #[arg(long, env = "MOMENT_TOC_TOL_SIM")]
    pub tol_sim: Option<f64>,
}

impl Tolerances {
    pub fn config(&self) -> SolverConfig {
        let d = SolverConfig::default();
        SolverConfig {
            tol_pd: self.tol_pd.unwrap_or(d.tol_pd),
            tol_root: self.tol_root.unwrap_or(d.tol_root),
            tol_sing: self.tol_sing.unwrap_or(d.tol_sing),
            tol_sim: self.tol_sim.unwrap_or(d.tol_sim),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Initial state, comma separated; entries may be fractions like -12/5.
    #[arg(long, env = "MOMENT_TOC_X0", allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, env = "MOMENT_TOC_JSON")]
    pub json: bool,
    /// Leave rejected candidates out of the report.
    #[arg(long, env = "MOMENT_TOC_ACCEPTED_ONLY")]
    pub accepted_only: bool,
    #[command(flatten)]
    pub tol: Tolerances,
    /// Report destination instead of stdout.
    #[arg(long, env = "MOMENT_TOC_OUT")]
    pub out: Option<PathBuf>,
    /// CSV file for the sampled optimal trajectory.
    #[arg(long, env = "MOMENT_TOC_TRAJECTORY")]
    pub trajectory: Option<PathBuf>,
    #[arg(long, env = "MOMENT_TOC_SAMPLES", default_value_t = 1000)]
    pub samples: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Initial state; taken from the report when omitted.
    #[arg(long, env = "MOMENT_TOC_X0", allow_hyphen_values = true)]
    pub x0: Option<String>,
    /// Inline control, e.g. `+1:1.5,0:2,-1:0.3`.
    #[arg(long, env = "MOMENT_TOC_SEGMENTS", allow_hyphen_values = true, conflicts_with = "report")]
    pub segments: Option<String>,
    /// JSON report whose best control is simulated; `-` reads stdin.
    #[arg(long, env = "MOMENT_TOC_REPORT")]
    pub report: Option<String>,
    #[arg(long, env = "MOMENT_TOC_SAMPLES", default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, env = "MOMENT_TOC_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, env = "MOMENT_TOC_X0", allow_hyphen_values = true, required_unless_present = "report")]
    pub x0: Option<String>,
    /// JSON report to check instead of solving; `-` reads stdin.
    #[arg(long, env = "MOMENT_TOC_REPORT", conflicts_with = "x0")]
    pub report: Option<String>,
    /// Upper end of the oracle duration grid. Defaults to 1.25 times the
    /// reported time, or 20 without one.
    #[arg(long, env = "MOMENT_TOC_T_MAX")]
    pub t_max: Option<f64>,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long, env = "MOMENT_TOC_JSON")]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Base state; varied components are overwritten.
    #[arg(long, env = "MOMENT_TOC_X0", allow_hyphen_values = true)]
    pub x0: String,
    /// `i:lo:hi:count` with 1-based component `i`; repeat for a grid, the
    /// first varying slowest.
    #[arg(long, env = "MOMENT_TOC_VARY", allow_hyphen_values = true, value_delimiter = ';', required = true)]
    pub vary: Vec<String>,
    #[command(flatten)]
    pub tol: Tolerances,
    #[arg(long, env = "MOMENT_TOC_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long, env = "MOMENT_TOC_X0", allow_hyphen_values = true)]
    pub x0: String,
    #[arg(long, allow_hyphen_values = true, env = "MOMENT_TOC_A")]
    pub a: f64,
    #[arg(long, allow_hyphen_values = true, env = "MOMENT_TOC_B")]
    pub b: f64,
    #[arg(long, allow_hyphen_values = true, env = "MOMENT_TOC_THETA")]
    pub theta: f64,
    /// Also check the conditions of this case.
    #[arg(long, env = "MOMENT_TOC_CASE")]
    pub case: Option<u8>,
    #[arg(long, env = "MOMENT_TOC_TOL_PD")]
    pub tol_pd: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

/// Parses `v1,v2,...`; entries may be `p/q`.
pub fn parse_vector(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            let v = match t.split_once('/') {
                Some((p, q)) => {
                    let p: f64 = p.trim().parse().map_err(|_| format!("bad number `{t}`"))?;
                    let q: f64 = q.trim().parse().map_err(|_| format!("bad number `{t}`"))?;
                    p / q
                }
                None => t.parse().map_err(|_| format!("bad number `{t}`"))?,
            };
            if v.is_finite() {
                Ok(v)
            } else {
                Err(format!("non-finite entry `{t}`"))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonInput {
    pub x0: Vec<f64>,
    pub tolerances: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonCandidate {
    pub case_id: CaseId,
    #[serde(rename = "type")]
    pub lemma_type: LemmaType,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub theta: Option<f64>,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub accepted: bool,
    pub reject_reason: Option<crate::casesolver::RejectReason>,
    pub condition_report: Option<ConditionReport>,
    pub residual: Option<f64>,
    pub control: Option<Vec<ControlSegment>>,
}

impl From<&CandidateSolution> for JsonCandidate {
    fn from(c: &CandidateSolution) -> Self {
        JsonCandidate {
            case_id: c.case_id,
            lemma_type: c.lemma_type,
            k: c.k,
            a: c.a,
            b: c.b,
            theta: c.theta.is_finite().then_some(c.theta),
            nodes: c.nodes.clone(),
            weights: c.weights.clone(),
            accepted: c.accepted,
            reject_reason: c.reject_reason.clone(),
            condition_report: c.condition_report.clone(),
            residual: c.residual,
            control: c.control.as_ref().map(|u| u.segments.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonBest {
    pub case_id: CaseId,
    pub theta: f64,
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub control: Vec<ControlSegment>,
    pub mirrored: bool,
    pub residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonReport {
    pub schema_version: String,
    pub input: JsonInput,
    pub normalized_x0: Vec<f64>,
    pub candidates: Vec<JsonCandidate>,
    pub best: Option<JsonBest>,
    pub co_optimal: Vec<CaseId>,
    pub verdict: Verdict,
}

impl JsonReport {
    pub fn from_report(r: &SolveReport, cfg: &SolverConfig, accepted_only: bool) -> Self {
        let mut candidates: Vec<JsonCandidate> =
            r.candidates.iter().filter(|c| c.accepted || !accepted_only).map(JsonCandidate::from).collect();
        candidates.sort_by_key(|c| c.case_id);
        let best = r.best_candidate().map(|c| JsonBest {
            case_id: c.case_id,
            theta: c.theta,
            a: c.a,
            b: c.b,
            nodes: c.nodes.clone(),
            weights: c.weights.clone(),
            control: c.control.as_ref().map(|u| u.segments.clone()).unwrap_or_default(),
            mirrored: r.mirrored,
            residual: c.residual,
        });
        JsonReport {
            schema_version: SCHEMA_VERSION.to_string(),
            input: JsonInput { x0: r.x0.clone(), tolerances: *cfg },
            normalized_x0: r.normalized_x0.clone(),
            candidates,
            best,
            co_optimal: r.co_optimal.iter().map(|&i| r.candidates[i].case_id).collect(),
            verdict: r.verdict,
        }
    }

    pub fn best_control(&self) -> Option<StairStepControl> {
        self.best.as_ref().map(|b| StairStepControl { segments: b.control.clone() })
    }
}

pub fn verdict_exit(v: Verdict) -> i32 {
    match v {
        Verdict::OptimalFound => EXIT_OK,
        Verdict::NotControllable => EXIT_NOT_CONTROLLABLE,
        Verdict::NonGeneric => EXIT_NON_GENERIC,
    }
}

fn run_solve(x0: &[f64], cfg: &SolverConfig) -> Result<SolveReport, CliError> {
    match solve(x0, cfg) {
        Ok(r) => Ok(r),
        Err(SolveError::NonGeneric(_)) => Ok(SolveReport::non_generic(x0)),
        Err(e) => usage(e.to_string()),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => match io::stdout().write_all(text.as_bytes()) {
            Err(e) if e.kind() != io::ErrorKind::BrokenPipe => return Err(e.into()),
            _ => {}
        },
    }
    Ok(())
}

/// Shortest round-trip form, in exponent notation when very small or large.
pub fn fmt_num(v: f64) -> String {
    let m = v.abs();
    if m != 0.0 && !(1e-5..1e16).contains(&m) {
        format!("{v:e}")
    } else {
        v.to_string()
    }
}

fn read_source(src: &str) -> Result<String, CliError> {
    if src == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(fs::read_to_string(src)?)
    }
}

pub fn read_report(src: &str) -> Result<JsonReport, CliError> {
    let r: JsonReport = serde_json::from_str(&read_source(src)?)?;
    if r.schema_version != SCHEMA_VERSION {
        return usage(format!("unsupported schema_version {}", r.schema_version));
    }
    Ok(r)
}

fn text_report(r: &JsonReport) -> String {
    let mut s = String::new();
    s.push_str(&format!("x0 = {:?}\n", r.input.x0));
    for c in &r.candidates {
        let theta = c.theta.map_or("-".to_string(), |t| format!("{t:.9}"));
        let status = if c.accepted {
            "accepted".to_string()
        } else {
            c.reject_reason.as_ref().map_or("rejected".into(), |x| format!("rejected: {x}"))
        };
        s.push_str(&format!(
            "case {} ({:?}, k={}): a={:.9} b={:.9} theta={} nodes={:?} weights={:?} {}\n",
            c.case_id, c.lemma_type, c.k, c.a, c.b, theta, c.nodes, c.weights, status
        ));
    }
    match &r.best {
        Some(b) => {
            s.push_str(&format!("optimal time {:.12} via case {}\n", b.theta, b.case_id));
            let segs: Vec<String> = b.control.iter().map(segment_text).collect();
            s.push_str(&format!("control {}\n", segs.join(",")));
        }
        None => s.push_str(&format!("verdict {}\n", verdict_name(r.verdict))),
    }
    s
}

fn segment_text(g: &ControlSegment) -> String {
    match g.level {
        0 => format!("0:{}", g.duration),
        l => format!("{l:+}:{}", g.duration),
    }
}

pub fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::OptimalFound => "optimal_found",
        Verdict::NotControllable => "not_controllable",
        Verdict::NonGeneric => "non_generic",
    }
}

/// CSV with header `t,x1,...,xn,u`.
pub fn trajectory_csv(x0: &[f64], u: &StairStepControl, m: usize) -> String {
    let traj = sample_trajectory(x0, u, m);
    let mut s = String::from("t");
    for j in 1..=x0.len() {
        s.push_str(&format!(",x{j}"));
    }
    s.push_str(",u\n");
    for smp in &traj.samples {
        s.push_str(&fmt_num(smp.t));
        for v in &smp.x {
            s.push(',');
            s.push_str(&fmt_num(*v));
        }
        s.push_str(&format!(",{}\n", smp.u));
    }
    s
}

fn cmd_solve(a: &SolveArgs) -> Result<i32, CliError> {
    let x0 = parse_vector(&a.x0).map_err(CliError::Usage)?;
    if x0.len() < 4 {
        return usage("x0 needs at least 4 components");
    }
    let cfg = a.tol.config();
    let report = run_solve(&x0, &cfg)?;
    let json = JsonReport::from_report(&report, &cfg, a.accepted_only);
    let text = if a.json { serde_json::to_string_pretty(&json)? + "\n" } else { text_report(&json) };
    emit(&a.out, &text)?;
    if let (Some(path), Some(u)) = (&a.trajectory, json.best_control()) {
        fs::write(path, trajectory_csv(&x0, &u, a.samples))?;
    }
    Ok(verdict_exit(report.verdict))
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32, CliError> {
    let (x0, u) = match (&a.segments, &a.report) {
        (Some(seg), None) => {
            let Some(x) = &a.x0 else { return usage("--x0 is required with --segments") };
            (parse_vector(x).map_err(CliError::Usage)?, StairStepControl::parse(seg).map_err(CliError::Usage)?)
        }
        (None, Some(src)) => {
            let r = read_report(src)?;
            let Some(u) = r.best_control() else { return usage("report has no optimal control") };
            let x0 = match &a.x0 {
                Some(x) => parse_vector(x).map_err(CliError::Usage)?,
                None => r.input.x0.clone(),
            };
            (x0, u)
        }
        _ => return usage("give exactly one of --segments or --report"),
    };
    if x0.is_empty() {
        return usage("empty x0");
    }
    if a.samples < 2 {
        return usage("--samples must be at least 2");
    }
    emit(&a.out, &trajectory_csv(&x0, &u, a.samples))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub x0: Vec<f64>,
    pub verdict: Verdict,
    pub theta: Option<f64>,
    pub control_time: Option<f64>,
    pub resolved_theta: Option<f64>,
    pub residual: Option<f64>,
    pub residual_bound: f64,
    pub oracle_theta: Option<f64>,
    pub oracle_min_residual: Option<f64>,
    pub t_max: f64,
    pub discrepancies: Vec<String>,
}

pub fn verify_report(report: &JsonReport, cfg: &SolverConfig, t_max: Option<f64>) -> Result<VerifyReport, CliError> {
    let x0 = report.input.x0.clone();
    if x0.len() > 5 {
        return usage("the grid oracle supports n <= 5");
    }
    let scale = 1.0 + x0.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut out = VerifyReport {
        x0: x0.clone(),
        verdict: report.verdict,
        theta: report.best.as_ref().map(|b| b.theta),
        control_time: None,
        resolved_theta: None,
        residual: None,
        residual_bound: cfg.tol_sim * scale,
        oracle_theta: None,
        oracle_min_residual: None,
        t_max: 0.0,
        discrepancies: Vec::new(),
    };
    let fresh = run_solve(&x0, cfg)?;
    out.resolved_theta = fresh.best_candidate().map(|c| c.theta);
    if fresh.verdict != report.verdict {
        out.discrepancies.push(format!(
            "verdict {} but re-solving gives {}",
            verdict_name(report.verdict),
            verdict_name(fresh.verdict)
        ));
    }
    if report.verdict == Verdict::NonGeneric {
        out.t_max = t_max.unwrap_or(0.0);
        return Ok(out);
    }
    if let (Some(t), Some(f)) = (out.theta, out.resolved_theta) {
        if (t - f).abs() > 1e-6 * f.abs().max(1.0) {
            out.discrepancies.push(format!("reported time {t} but re-solving gives {f}"));
        }
    }
    if report.verdict == Verdict::OptimalFound {
        let (Some(theta), Some(u)) = (out.theta, report.best_control()) else {
            out.discrepancies.push("optimal_found without a best control".into());
            return Ok(out);
        };
        let total = u.total_time();
        out.control_time = Some(total);
        if (total - theta).abs() > 1e-9 * theta.abs().max(1.0) {
            out.discrepancies.push(format!("control lasts {total} but the reported time is {theta}"));
        }
        let (xf, _) = simulate_exact(&x0, &u);
        let res = xf.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        out.residual = Some(res);
        if !(res <= out.residual_bound) {
            out.discrepancies.push(format!("final state residual {res:e} exceeds {:e}", out.residual_bound));
        }
    }
    let t_max = t_max.unwrap_or_else(|| out.theta.map_or(20.0, |t| 1.25 * t));
    out.t_max = t_max;
    let grid = GridSpec::new(t_max);
    if !grid.is_valid() {
        return usage("invalid oracle grid");
    }
    let Ok(state) = InitialState::new(x0.clone()) else {
        return usage("x0 is not a valid initial state");
    };
    // the oracle works on the orientation with positive x1
    let state = if state.x1() < 0.0 {
        InitialState::new(crate::moments::mirror(&x0)).map_err(|e| CliError::Usage(e.to_string()))?
    } else {
        state
    };
    let cases = enumerate_cases(x0.len()).map_err(|e| CliError::Usage(e.to_string()))?;
    let oracle = grid_search_min_time(&state, &cases, &grid);
    match &oracle.outcome {
        OracleOutcome::Feasible { approx_theta, .. } => {
            out.oracle_theta = Some(*approx_theta);
            match out.theta {
                Some(theta) if *approx_theta < theta * (1.0 - 1e-3) => out
                    .discrepancies
                    .push(format!("oracle found time {approx_theta} below the reported {theta}")),
                Some(_) => {}
                None => out.discrepancies.push(format!("oracle found a control of time {approx_theta}")),
            }
        }
        OracleOutcome::InfeasibleAtResolution { min_residual } => {
            out.oracle_min_residual = Some(*min_residual);
            if out.theta.is_some() {
                out.discrepancies.push(format!("oracle infeasible at resolution (min residual {min_residual:e})"));
            }
        }
    }
    Ok(out)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32, CliError> {
    let cfg = a.tol.config();
    let report = match (&a.x0, &a.report) {
        (Some(x), None) => {
            let x0 = parse_vector(x).map_err(CliError::Usage)?;
            if x0.len() < 4 {
                return usage("x0 needs at least 4 components");
            }
            JsonReport::from_report(&run_solve(&x0, &cfg)?, &cfg, false)
        }
        (None, Some(src)) => read_report(src)?,
        _ => return usage("give exactly one of --x0 or --report"),
    };
    let v = verify_report(&report, &cfg, a.t_max)?;
    let text = if a.json {
        serde_json::to_string_pretty(&v)? + "\n"
    } else {
        let mut s = format!("verdict {}\n", verdict_name(v.verdict));
        if let Some(t) = v.theta {
            s.push_str(&format!("solver time {t:.12}\n"));
        }
        if let Some(r) = v.residual {
            s.push_str(&format!("final residual {r:e} (bound {:e})\n", v.residual_bound));
        }
        match (v.oracle_theta, v.oracle_min_residual) {
            (Some(t), _) => s.push_str(&format!("oracle time {t:.9} (t_max {})\n", v.t_max)),
            (None, Some(r)) => s.push_str(&format!("oracle infeasible at resolution, min residual {r:e}\n")),
            _ => {}
        }
        for d in &v.discrepancies {
            s.push_str(&format!("DISCREPANCY: {d}\n"));
        }
        s
    };
    emit(&None, &text)?;
    if !v.discrepancies.is_empty() {
        Ok(EXIT_DISCREPANCY)
    } else if v.verdict == Verdict::NonGeneric {
        Ok(EXIT_NON_GENERIC)
    } else {
        Ok(EXIT_OK)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vary {
    /// 0-based component.
    pub index: usize,
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl Vary {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 4 {
            return Err(format!("expected i:lo:hi:count, got `{s}`"));
        }
        let index: usize = parts[0].trim().parse().map_err(|_| format!("bad index in `{s}`"))?;
        let lo = parse_vector(parts[1])?[0];
        let hi = parse_vector(parts[2])?[0];
        let count: usize = parts[3].trim().parse().map_err(|_| format!("bad count in `{s}`"))?;
        if index == 0 || count == 0 {
            return Err(format!("index and count must be positive in `{s}`"));
        }
        Ok(Vary { index: index - 1, lo, hi, count })
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.count == 1 {
            self.lo
        } else {
            self.lo + (self.hi - self.lo) * i as f64 / (self.count - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x0: Vec<f64>,
    pub verdict: Verdict,
    pub theta: Option<f64>,
    pub case_id: Option<CaseId>,
}

/// Grid points in row-major order, the first axis slowest.
pub fn sweep_points(base: &[f64], axes: &[Vary]) -> Vec<Vec<f64>> {
    let total: usize = axes.iter().map(|v| v.count).product();
    (0..total)
        .map(|flat| {
            let mut x = base.to_vec();
            let mut rem = flat;
            for v in axes.iter().rev() {
                x[v.index] = v.value(rem % v.count);
                rem /= v.count;
            }
            x
        })
        .collect()
}

pub fn sweep(base: &[f64], axes: &[Vary], cfg: &SolverConfig) -> Vec<SweepRow> {
    sweep_points(base, axes)
        .into_par_iter()
        .map(|x| {
            let r = match solve(&x, cfg) {
                Ok(r) => r,
                Err(_) => SolveReport::non_generic(&x),
            };
            let best = r.best_candidate();
            SweepRow { theta: best.map(|c| c.theta), case_id: best.map(|c| c.case_id), verdict: r.verdict, x0: x }
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let n = rows.first().map_or(0, |r| r.x0.len());
    let mut s = String::new();
    for j in 1..=n {
        s.push_str(&format!("x{j},"));
    }
    s.push_str("verdict,theta,case_id\n");
    for r in rows {
        for v in &r.x0 {
            s.push_str(&fmt_num(*v));
            s.push(',');
        }
        s.push_str(verdict_name(r.verdict));
        s.push(',');
        if let Some(t) = r.theta {
            s.push_str(&fmt_num(t));
        }
        s.push(',');
        if let Some(c) = r.case_id {
            s.push_str(&c.to_string());
        }
        s.push('\n');
    }
    s
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32, CliError> {
    let base = parse_vector(&a.x0).map_err(CliError::Usage)?;
    if base.len() < 4 {
        return usage("x0 needs at least 4 components");
    }
    let axes: Vec<Vary> = a.vary.iter().map(|s| Vary::parse(s)).collect::<Result<_, _>>().map_err(CliError::Usage)?;
    if let Some(v) = axes.iter().find(|v| v.index >= base.len()) {
        return usage(format!("component {} out of range", v.index + 1));
    }
    let rows = sweep(&base, &axes, &a.tol.config());
    emit(&a.out, &sweep_csv(&rows))?;
    Ok(EXIT_OK)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentsView {
    pub c: Vec<f64>,
    pub c_a: Vec<f64>,
    pub c_b: Vec<f64>,
    pub c_ab: Vec<f64>,
    pub case_id: Option<CaseId>,
    pub conditions: Option<ConditionReport>,
}

fn cmd_moments(a: &MomentsArgs) -> Result<i32, CliError> {
    let x0 = parse_vector(&a.x0).map_err(CliError::Usage)?;
    let state = InitialState::new(x0.clone()).map_err(|e| CliError::Usage(e.to_string()))?;
    let c = assemble_unchecked(&state, a.a, a.b, a.theta);
    let shift = |k: ShiftKind| -> Vec<f64> { shift_sequence(&c, k, a.a, a.b).map(|s| s.c).unwrap_or_default() };
    let mut view = MomentsView {
        c: c.c.clone(),
        c_a: shift(ShiftKind::A),
        c_b: shift(ShiftKind::B),
        c_ab: shift(ShiftKind::AB),
        case_id: None,
        conditions: None,
    };
    if let Some(id) = a.case {
        let cases = enumerate_cases(x0.len()).map_err(|e| CliError::Usage(e.to_string()))?;
        let Some(case) = cases.iter().find(|c| c.id == CaseId(id)) else {
            return usage(format!("case {id} does not apply to n = {}", x0.len()));
        };
        let tol = a.tol_pd.unwrap_or(SolverConfig::default().tol_pd);
        let seq = MomentSequence { c: c.c.clone() };
        let rep = check_conditions(&seq, case.lemma_type, case.k, a.a, a.b, tol)
            .map_err(|e| CliError::Usage(e.to_string()))?;
        view.case_id = Some(case.id);
        view.conditions = Some(rep);
    }
    emit(&None, &(serde_json::to_string_pretty(&view)? + "\n"))?;
    Ok(EXIT_OK)
}

pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Moments(a) => cmd_moments(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn main_entry() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            }
        }
    }
}
