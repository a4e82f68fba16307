//! The nine generic cases: endpoint and time equations, candidate
//! filtering through the moment conditions, and selection of the optimum.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{simulate_exact, synthesize_control, StairStepControl};
use crate::hankel::{hankel_det_generic, hankel_matrix, normalized_det, shift_generic, shift_sequence};
use crate::hausdorff::{check_conditions, recover_nodes, solve_weights, ConditionReport, LemmaType, StepFunction};
use crate::moments::{
    assemble_unchecked, case_polynomials, normalize_initial_state, EndpointPair, InitialState, MomentsError,
};
use crate::polyalg::{
    det_real, real_roots_with, sylvester_resultant_at, PolyInTwoStages, Polynomial, RootOptions, Ring,
};

/// Slack for the strict inequalities `a < 0`, `b > x_1^0`.
pub const ENDPOINT_SLACK: f64 = 1e-9;
/// Accepted candidates closer than this in `(a, b, theta)` are merged.
pub const DEDUP_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("non-generic initial state: {0}")]
    NonGeneric(String),
    #[error(transparent)]
    Input(#[from] MomentsError),
    #[error("no cases for n = {0}")]
    Dimension(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseId(pub u8);

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDescriptor {
    pub id: CaseId,
    pub odd: bool,
    pub k: usize,
    pub lemma_type: LemmaType,
    /// `a = 0`
    pub a_fixed: bool,
    /// `b = x_1^0`
    pub b_fixed: bool,
    pub d_range: Vec<usize>,
}

impl CaseDescriptor {
    pub fn free_count(&self) -> usize {
        (!self.a_fixed) as usize + (!self.b_fixed) as usize
    }
}

/// The cases available for dimension `n`, in id order.
pub fn enumerate_cases(n: usize) -> Result<Vec<CaseDescriptor>, SolveError> {
    if n < 4 {
        return Err(SolveError::Dimension(n));
    }
    let m = n / 2;
    let odd = n % 2 == 1;
    use LemmaType::*;
    let table: &[(u8, bool, usize, LemmaType, bool, bool)] = &[
        (1, true, m + 1, A, true, true),
        (2, false, m, A, true, false),
        (3, true, m, C, true, false),
        (4, false, m, A, false, true),
        (5, true, m, A, false, false),
        (6, false, m - 1, C, false, false),
        (7, true, m, D, false, true),
        (8, false, m - 1, D, false, false),
        (9, true, m - 1, B, false, false),
    ];
    Ok(table
        .iter()
        .filter(|row| row.1 == odd)
        .map(|&(id, odd, k, lemma_type, a_fixed, b_fixed)| {
            let free = (!a_fixed) as usize + (!b_fixed) as usize;
            CaseDescriptor { id: CaseId(id), odd, k, lemma_type, a_fixed, b_fixed, d_range: (0..=free).collect() }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub tol_pd: f64,
    pub tol_root: f64,
    pub tol_sing: f64,
    pub tol_sim: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { tol_pd: 1e-9, tol_root: 1e-10, tol_sing: 1e-7, tol_sim: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RejectReason {
    DegenerateTheta,
    NonPositiveTheta { theta: f64 },
    ConditionsFailed { failed: Vec<String> },
    NodeRecovery { detail: String },
    NodeOutsideInterval { node: f64 },
    NodeAtZero { node: f64 },
    NodesNotDistinct,
    WeightRecovery { detail: String },
    NonPositiveWeight { index: usize, weight: f64 },
    ControlSynthesis { detail: String },
    ResidualTooLarge { residual: f64, bound: f64 },
    Duplicate { case_id: CaseId },
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::DegenerateTheta => write!(f, "degenerate theta equation"),
            RejectReason::NonPositiveTheta { theta } => write!(f, "theta = {theta} is not positive"),
            RejectReason::ConditionsFailed { failed } => write!(f, "conditions failed: {}", failed.join(", ")),
            RejectReason::NodeRecovery { detail } => write!(f, "node recovery: {detail}"),
            RejectReason::NodeOutsideInterval { node } => write!(f, "node {node} outside (a, b)"),
            RejectReason::NodeAtZero { node } => write!(f, "node {node} is zero"),
            RejectReason::NodesNotDistinct => write!(f, "nodes not distinct"),
            RejectReason::WeightRecovery { detail } => write!(f, "weight recovery: {detail}"),
            RejectReason::NonPositiveWeight { index, weight } => write!(f, "weight {index} = {weight} is not positive"),
            RejectReason::ControlSynthesis { detail } => write!(f, "control synthesis: {detail}"),
            RejectReason::ResidualTooLarge { residual, bound } => write!(f, "residual {residual:e} > {bound:e}"),
            RejectReason::Duplicate { case_id } => write!(f, "duplicate of case {case_id}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSolution {
    pub case_id: CaseId,
    #[serde(rename = "type")]
    pub lemma_type: LemmaType,
    pub k: usize,
    pub a: f64,
    pub b: f64,
    pub theta: f64,
    /// Interior nodes, descending.
    pub nodes: Vec<f64>,
    /// At `b` (if present), interior, at `a` (if present).
    pub weights: Vec<f64>,
    pub accepted: bool,
    pub reject_reason: Option<RejectReason>,
    pub condition_report: Option<ConditionReport>,
    pub residual: Option<f64>,
    pub control: Option<StairStepControl>,
}

impl CandidateSolution {
    fn new(case: &CaseDescriptor, a: f64, b: f64) -> Self {
        CandidateSolution {
            case_id: case.id,
            lemma_type: case.lemma_type,
            k: case.k,
            a,
            b,
            theta: f64::NAN,
            nodes: Vec::new(),
            weights: Vec::new(),
            accepted: false,
            reject_reason: None,
            condition_report: None,
            residual: None,
            control: None,
        }
    }

    fn reject(mut self, reason: RejectReason) -> Self {
        self.accepted = false;
        self.reject_reason = Some(reason);
        self
    }

    pub fn endpoints(&self) -> EndpointPair {
        EndpointPair { a: self.a, b: self.b }
    }

    pub fn step_function(&self) -> StepFunction {
        StepFunction::of_type(self.lemma_type, &self.nodes, &self.weights, self.a, self.b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    OptimalFound,
    NotControllable,
    NonGeneric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// The state as given.
    pub x0: Vec<f64>,
    /// The state with positive first component actually solved.
    pub normalized_x0: Vec<f64>,
    pub mirrored: bool,
    /// Sorted by case id; controls are in the orientation of `x0`.
    pub candidates: Vec<CandidateSolution>,
    /// Index into `candidates`.
    pub best: Option<usize>,
    /// Indices of accepted candidates tying with the best time.
    pub co_optimal: Vec<usize>,
    pub verdict: Verdict,
}

impl SolveReport {
    pub fn non_generic(x0: &[f64]) -> Self {
        SolveReport {
            x0: x0.to_vec(),
            normalized_x0: x0.to_vec(),
            mirrored: false,
            candidates: Vec::new(),
            best: None,
            co_optimal: Vec::new(),
            verdict: Verdict::NonGeneric,
        }
    }

    pub fn best_candidate(&self) -> Option<&CandidateSolution> {
        self.best.map(|i| &self.candidates[i])
    }

    pub fn accepted(&self) -> impl Iterator<Item = &CandidateSolution> {
        self.candidates.iter().filter(|c| c.accepted)
    }
}

/// Bounds `a >= a_lo`, `b <= b_hi` implied by nonnegativity of the even-power
/// moments `c_j`, odd `j >= 3`. `None` when no admissible pair exists.
pub fn endpoint_bounds(x0: &InitialState) -> Option<(f64, f64)> {
    let x1 = x0.x1();
    let mut a_lo = f64::NEG_INFINITY;
    let mut b_hi = f64::INFINITY;
    for j in (3..=x0.dim()).step_by(2) {
        let jf = j as f64;
        let p = x1.powi(j as i32);
        let r = jf * (-x0.x(j) + p / jf) / 2.0;
        if r < p * (1.0 - 1e-9) {
            return None;
        }
        b_hi = b_hi.min(r.powf(1.0 / jf));
        a_lo = a_lo.max(-(r - p).max(0.0).powf(1.0 / jf));
    }
    Some((a_lo * (1.0 + 1e-6) - 1e-9, b_hi * (1.0 + 1e-6) + 1e-9))
}

/// Search region for free endpoints: the moment bounds widened threefold,
/// so that the report also lists nearby inadmissible solutions.
fn search_box(x0: &InitialState) -> Option<(f64, f64)> {
    let (a_lo, b_hi) = endpoint_bounds(x0)?;
    let x1 = x0.x1();
    let r = a_lo.abs().max(b_hi - x1).max(x1);
    Some((-3.0 * r, x1 + 3.0 * r))
}

fn driving_symbolic(x0: &InitialState, case: &CaseDescriptor) -> Vec<PolyInTwoStages> {
    let mp = case_polynomials(x0, case);
    let a = if case.a_fixed { PolyInTwoStages::zero() } else { PolyInTwoStages::inner_var() };
    let b = if case.b_fixed {
        PolyInTwoStages::constant(x0.x1())
    } else {
        PolyInTwoStages::outer_var()
    };
    shift_generic(&mp.cj, case.lemma_type.driving_shift(), &a, &b).unwrap_or_default()
}

/// The `k x k` driving determinant at shift `d` as a polynomial in
/// `(a, b)` (inner `a`, outer `b`); it does not involve `theta` for `d >= 1`.
pub fn endpoint_determinant(x0: &InitialState, case: &CaseDescriptor, d: usize) -> Option<PolyInTwoStages> {
    let s = driving_symbolic(x0, case);
    hankel_det_generic(&s, case.k, d).map(|p| p.trim_relative(1e-15))
}

struct AbsPoly(PolyInTwoStages);

impl AbsPoly {
    fn of(p: &PolyInTwoStages) -> Self {
        AbsPoly(PolyInTwoStages::new(
            p.outer.iter().map(|q| Polynomial::new(q.coeffs().iter().map(|c| c.abs()).collect())).collect(),
        ))
    }

    fn eval(&self, a: f64, b: f64) -> f64 {
        self.0.eval(a.abs(), b.abs()).max(f64::MIN_POSITIVE)
    }
}

struct PairSystem {
    f: [PolyInTwoStages; 2],
    fa: [PolyInTwoStages; 2],
    fb: [PolyInTwoStages; 2],
    abs: [AbsPoly; 2],
}

impl PairSystem {
    fn new(f1: PolyInTwoStages, f2: PolyInTwoStages) -> Self {
        let fa = [f1.d_inner(), f2.d_inner()];
        let fb = [f1.d_outer(), f2.d_outer()];
        let abs = [AbsPoly::of(&f1), AbsPoly::of(&f2)];
        PairSystem { f: [f1, f2], fa, fb, abs }
    }

    fn scaled(&self, a: f64, b: f64) -> [f64; 2] {
        [self.f[0].eval(a, b) / self.abs[0].eval(a, b), self.f[1].eval(a, b) / self.abs[1].eval(a, b)]
    }

    fn norm(&self, a: f64, b: f64) -> f64 {
        let r = self.scaled(a, b);
        r[0].abs().max(r[1].abs())
    }

    /// Damped Newton on the scaled equations.
    fn newton(&self, a0: f64, b0: f64) -> Option<(f64, f64)> {
        let (mut a, mut b) = (a0, b0);
        let mut res = self.norm(a, b);
        for _ in 0..100 {
            if !res.is_finite() {
                return None;
            }
            if res < 1e-15 {
                break;
            }
            let s = [self.abs[0].eval(a, b), self.abs[1].eval(a, b)];
            let f = [self.f[0].eval(a, b) / s[0], self.f[1].eval(a, b) / s[1]];
            let j = [
                [self.fa[0].eval(a, b) / s[0], self.fb[0].eval(a, b) / s[0]],
                [self.fa[1].eval(a, b) / s[1], self.fb[1].eval(a, b) / s[1]],
            ];
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            let da = -(f[0] * j[1][1] - f[1] * j[0][1]) / det;
            let db = -(j[0][0] * f[1] - j[1][0] * f[0]) / det;
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let (na, nb) = (a + t * da, b + t * db);
                let nr = self.norm(na, nb);
                if nr < res {
                    a = na;
                    b = nb;
                    res = nr;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            let scale = 1.0 + a.abs() + b.abs();
            if !improved || (t * da).abs().max((t * db).abs()) <= 1e-15 * scale {
                break;
            }
        }
        (res <= 1e-9).then_some((a, b))
    }
}

fn roots_in(p: &Polynomial, lo: f64, hi: f64) -> Vec<f64> {
    if p.degree().unwrap_or(0) == 0 {
        return Vec::new();
    }
    let opts = RootOptions { tol_root: 1e-8, ..RootOptions::default() };
    real_roots_with(p, Some((lo, hi)), &opts)
        .map(|r| r.into_iter().map(|r| r.value).collect())
        .unwrap_or_default()
}

fn scan_grid(a_lo: f64) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..1500).map(|i| a_lo * (1.0 - i as f64 / 1500.0)).collect();
    grid.extend((0..600).map(|i| a_lo / 3.0 * (1.0 - i as f64 / 600.0)));
    grid.extend((0..=300).map(|i| a_lo * 10f64.powf(-9.0 * i as f64 / 300.0)));
    grid.sort_by(|x, y| x.partial_cmp(y).unwrap());
    grid.dedup();
    grid
}

/// Follows the real branches `b(a)` of `g = 0` over the grid and reports
/// points where the scaled `h` changes sign along a branch.
fn branch_crossings(
    g: &PolyInTwoStages,
    h: &PolyInTwoStages,
    h_abs: &AbsPoly,
    grid: &[f64],
    b_lo: f64,
    b_hi: f64,
) -> Vec<(f64, f64)> {
    let mut starts = Vec::new();
    let mut prev: Vec<(f64, f64)> = Vec::new();
    let mut prev_a = f64::NAN;
    let width = b_hi - b_lo;
    for &a in grid {
        let cur: Vec<(f64, f64)> = roots_in(&g.at_inner(a), b_lo, b_hi)
            .into_iter()
            .map(|b| (b, h.eval(a, b) / h_abs.eval(a, b)))
            .collect();
        for &(b, v) in &cur {
            if v.abs() < 1e-6 {
                starts.push((a, b));
            }
        }
        for &(b, v) in &cur {
            let nearest = prev
                .iter()
                .min_by(|x, y| (x.0 - b).abs().partial_cmp(&(y.0 - b).abs()).unwrap());
            if let Some(&(pb, pv)) = nearest {
                if (pb - b).abs() < 0.1 * width && pv.signum() != v.signum() {
                    starts.push((0.5 * (a + prev_a), 0.5 * (b + pb)));
                    starts.push((prev_a, pb));
                    starts.push((a, b));
                }
            }
        }
        prev = cur;
        prev_a = a;
    }
    starts
}

fn resultant_crossings(sys: &PairSystem, grid: &[f64], b_lo: f64, b_hi: f64) -> Vec<(f64, f64)> {
    let (f1, f2) = (&sys.f[0], &sys.f[1]);
    let sign = |a: f64| sylvester_resultant_at(f1, f2, a).0;
    let mut starts = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for &a in grid {
        let s = sign(a);
        if let Some((pa, ps)) = prev {
            if s != 0.0 && ps != 0.0 && s != ps {
                let (mut lo, mut hi, slo) = (pa, a, ps);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if mid == lo || mid == hi {
                        break;
                    }
                    if sign(mid) == slo {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let a_star = 0.5 * (lo + hi);
                for b in roots_in(&f1.at_inner(a_star), b_lo, b_hi) {
                    let v = f2.eval(a_star, b) / sys.abs[1].eval(a_star, b);
                    if v.abs() < 1e-3 {
                        starts.push((a_star, b));
                    }
                }
            }
        }
        if s != 0.0 {
            prev = Some((a, s));
        }
    }
    starts
}

fn push_unique(out: &mut Vec<EndpointPair>, p: EndpointPair) {
    let close = |u: f64, v: f64| (u - v).abs() <= 1e-8 * (1.0 + u.abs().max(v.abs()));
    if !out.iter().any(|q| close(q.a, p.a) && close(q.b, p.b)) {
        out.push(p);
    }
}

fn admissible(p: &EndpointPair, x1: f64, case: &CaseDescriptor) -> bool {
    let a_ok = if case.a_fixed { p.a == 0.0 } else { p.a < -ENDPOINT_SLACK };
    let b_ok = if case.b_fixed { p.b == x1 } else { p.b > x1 + ENDPOINT_SLACK };
    a_ok && b_ok && p.a.is_finite() && p.b.is_finite()
}

/// Candidate endpoint pairs for a case, deduplicated.
pub fn solve_endpoints(x0: &InitialState, case: &CaseDescriptor) -> Result<Vec<EndpointPair>, SolveError> {
    let x1 = x0.x1();
    if case.a_fixed && case.b_fixed {
        return Ok(vec![EndpointPair { a: 0.0, b: x1 }]);
    }
    let Some((a_lo, b_hi)) = search_box(x0) else {
        return Ok(Vec::new());
    };
    let f1 = endpoint_determinant(x0, case, 1).unwrap_or_default();
    if f1.is_zero() {
        return Err(SolveError::NonGeneric(format!("case {} endpoint equation vanishes identically", case.id)));
    }
    let b_lo = x1 + ENDPOINT_SLACK;
    let a_hi = -ENDPOINT_SLACK;
    let mut out = Vec::new();
    if case.free_count() == 1 {
        if case.a_fixed {
            for b in roots_in(&f1.at_inner(0.0), b_lo, b_hi) {
                push_unique(&mut out, EndpointPair { a: 0.0, b });
            }
        } else {
            for a in roots_in(&f1.at_outer(x1), a_lo, a_hi) {
                push_unique(&mut out, EndpointPair { a, b: x1 });
            }
        }
        return Ok(out);
    }
    let f2 = endpoint_determinant(x0, case, 2).unwrap_or_default();
    if f2.is_zero() {
        return Err(SolveError::NonGeneric(format!("case {} endpoint equation vanishes identically", case.id)));
    }
    let sys = PairSystem::new(f1, f2);
    let grid = scan_grid(a_lo);
    let mut starts = branch_crossings(&sys.f[0], &sys.f[1], &sys.abs[1], &grid, x1, b_hi);
    starts.extend(branch_crossings(&sys.f[1], &sys.f[0], &sys.abs[0], &grid, x1, b_hi));
    starts.extend(resultant_crossings(&sys, &grid, x1, b_hi));
    for (a0, b0) in starts {
        if let Some((a, b)) = sys.newton(a0, b0) {
            let p = EndpointPair { a, b };
            if admissible(&p, x1, case) && a >= a_lo && b <= b_hi {
                push_unique(&mut out, p);
            }
        }
    }
    out.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap());
    Ok(out)
}

/// `theta` from the `d = 0` driving determinant, which is affine in its
/// first entry and hence in `theta`.
pub fn solve_theta(x0: &InitialState, case: &CaseDescriptor, a: f64, b: f64) -> Result<f64, RejectReason> {
    let ty = case.lemma_type;
    let k = case.k;
    let c0 = assemble_unchecked(x0, a, b, 0.0);
    let s = shift_sequence(&c0, ty.driving_shift(), a, b).map_err(|_| RejectReason::DegenerateTheta)?;
    let mut h = hankel_matrix(&s, k, 0).map_err(|_| RejectReason::DegenerateTheta)?;
    let slope = match ty {
        LemmaType::A => 1.0,
        LemmaType::B => -a * b,
        LemmaType::C => b,
        LemmaType::D => -a,
    };
    if slope.abs() < 1e-12 {
        return Err(RejectReason::DegenerateTheta);
    }
    let s1_at_zero = h[0][0];
    h[0][0] = 0.0;
    let cof: Vec<Vec<f64>> = h[1..].iter().map(|r| r[1..].to_vec()).collect();
    if k > 1 && normalized_det(&cof) < 1e-13 {
        return Err(RejectReason::DegenerateTheta);
    }
    let s1 = -det_real(&h) / det_real(&cof);
    Ok((s1 - s1_at_zero) / slope)
}

fn validate_nodes(nodes: &[f64], a: f64, b: f64) -> Result<(), RejectReason> {
    let scale = a.abs().max(b.abs());
    for &z in nodes {
        if !(z > a && z < b) {
            return Err(RejectReason::NodeOutsideInterval { node: z });
        }
        if z.abs() <= 1e-10 * scale {
            return Err(RejectReason::NodeAtZero { node: z });
        }
    }
    if nodes.windows(2).any(|w| w[0] - w[1] <= 1e-9 * scale) {
        return Err(RejectReason::NodesNotDistinct);
    }
    Ok(())
}

fn validate_weights(w: &[f64]) -> Result<(), RejectReason> {
    match w.iter().position(|&v| !(v > 0.0)) {
        Some(index) => Err(RejectReason::NonPositiveWeight { index, weight: w[index] }),
        None => Ok(()),
    }
}

struct Unknowns {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

/// Newton refinement of the full moment system `c_j(a, b) = sum w p^(j-1)`,
/// `j = 2..n`, in the free endpoints, nodes and weights.
fn polish_full(x0: &InitialState, case: &CaseDescriptor, start: Unknowns) -> Unknowns {
    let n = x0.dim();
    let ty = case.lemma_type;
    let (fa, fb) = (!case.a_fixed, !case.b_fixed);
    let nz = start.nodes.len();
    let nw = start.weights.len();
    let dim = fa as usize + fb as usize + nz + nw;
    if dim != n - 1 {
        return start;
    }
    let eval = |u: &Unknowns| -> (Vec<f64>, Vec<f64>) {
        let c = assemble_unchecked(x0, u.a, u.b, 0.0);
        let sf = StepFunction::of_type(ty, &u.nodes, &u.weights, u.a, u.b);
        let mut r = Vec::with_capacity(n - 1);
        let mut scale = Vec::with_capacity(n - 1);
        for j in 2..=n {
            let e = (j - 1) as i32;
            let mut v = c.get(j);
            let mut s = x0.x(j).abs()
                + (x0.x1().abs().powi(j as i32) + 2.0 * u.b.abs().powi(j as i32) + 2.0 * u.a.abs().powi(j as i32))
                    / j as f64;
            for (p, w) in sf.points.iter().zip(&sf.weights) {
                let t = w * p.powi(e);
                v -= t;
                s += t.abs();
            }
            r.push(v);
            scale.push(s.max(f64::MIN_POSITIVE));
        }
        (r, scale)
    };
    let norm = |r: &[f64], s: &[f64]| r.iter().zip(s).fold(0.0_f64, |m, (x, y)| m.max((x / y).abs()));
    let mut u = start;
    let (mut r, mut s) = eval(&u);
    let mut res = norm(&r, &s);
    for _ in 0..50 {
        if res < 1e-16 {
            break;
        }
        let wb = if ty.weight_at_b() { u.weights[0] } else { 0.0 };
        let wa = if ty.weight_at_a() { u.weights[nw - 1] } else { 0.0 };
        let interior_w = &u.weights[ty.weight_at_b() as usize..ty.weight_at_b() as usize + nz];
        let sf = StepFunction::of_type(ty, &u.nodes, &u.weights, u.a, u.b);
        let jac = DMatrix::from_fn(n - 1, dim, |row, col| {
            let j = row + 2;
            let e = (j - 1) as i32;
            let jm1 = (j - 1) as f64;
            let mut col = col;
            let val = 'v: {
                if fa {
                    if col == 0 {
                        break 'v 2.0 * u.a.powi(e) - wa * jm1 * u.a.powi(e - 1);
                    }
                    col -= 1;
                }
                if fb {
                    if col == 0 {
                        break 'v -2.0 * u.b.powi(e) - wb * jm1 * u.b.powi(e - 1);
                    }
                    col -= 1;
                }
                if col < nz {
                    break 'v -interior_w[col] * jm1 * u.nodes[col].powi(e - 1);
                }
                -sf.points[col - nz].powi(e)
            };
            val / s[row]
        });
        let rhs = DVector::from_iterator(n - 1, r.iter().zip(&s).map(|(x, y)| -x / y));
        let Some(step) = jac.lu().solve(&rhs) else {
            break;
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let mut v = Unknowns { a: u.a, b: u.b, nodes: u.nodes.clone(), weights: u.weights.clone() };
            let mut i = 0;
            if fa {
                v.a += t * step[i];
                i += 1;
            }
            if fb {
                v.b += t * step[i];
                i += 1;
            }
            for z in v.nodes.iter_mut() {
                *z += t * step[i];
                i += 1;
            }
            for w in v.weights.iter_mut() {
                *w += t * step[i];
                i += 1;
            }
            let (nr, ns) = eval(&v);
            let nres = norm(&nr, &ns);
            if nres < res {
                u = v;
                r = nr;
                s = ns;
                res = nres;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    u
}

fn theta_of(x0: &InitialState, a: f64, b: f64, weights: &[f64]) -> f64 {
    let mut s = crate::compensated::CompensatedSum::new(2.0 * b);
    s.add(-2.0 * a);
    s.add(-x0.x1());
    for &w in weights {
        s.add(w);
    }
    s.value()
}

/// Runs the full pipeline for one endpoint pair.
pub fn evaluate_candidate(
    x0: &InitialState,
    case: &CaseDescriptor,
    pair: EndpointPair,
    cfg: &SolverConfig,
) -> CandidateSolution {
    let (a, b) = (pair.a, pair.b);
    let ty = case.lemma_type;
    let k = case.k;
    let mut cand = CandidateSolution::new(case, a, b);
    let theta = match solve_theta(x0, case, a, b) {
        Ok(t) => t,
        Err(r) => return cand.reject(r),
    };
    cand.theta = theta;
    let c = assemble_unchecked(x0, a, b, theta);
    let report = match check_conditions(&c, ty, k, a, b, cfg.tol_pd) {
        Ok(r) => r,
        Err(e) => return cand.reject(RejectReason::ConditionsFailed { failed: vec![e.to_string()] }),
    };
    let passed = report.passed;
    let failed = report.failed(ty);
    cand.condition_report = Some(report);
    if !passed {
        return cand.reject(RejectReason::ConditionsFailed { failed });
    }
    let nodes = match recover_nodes(&c, ty, k, a, b) {
        Ok(z) => z,
        Err(e) => return cand.reject(RejectReason::NodeRecovery { detail: e.to_string() }),
    };
    cand.nodes = nodes.clone();
    if let Err(r) = validate_nodes(&nodes, a, b) {
        return cand.reject(r);
    }
    let weights = match solve_weights(&c, ty, &nodes, a, b) {
        Ok(w) => w,
        Err(e) => return cand.reject(RejectReason::WeightRecovery { detail: e.to_string() }),
    };
    cand.weights = weights.clone();
    if let Err(r) = validate_weights(&weights) {
        return cand.reject(r);
    }
    if !(theta > 0.0) {
        return cand.reject(RejectReason::NonPositiveTheta { theta });
    }

    let polished = polish_full(x0, case, Unknowns { a, b, nodes, weights });
    let polished_ok = validate_nodes(&polished.nodes, polished.a, polished.b).is_ok()
        && validate_weights(&polished.weights).is_ok()
        && admissible(&EndpointPair { a: polished.a, b: polished.b }, x0.x1(), case);
    if polished_ok {
        cand.a = polished.a;
        cand.b = polished.b;
        cand.nodes = polished.nodes;
        cand.weights = polished.weights;
        cand.theta = theta_of(x0, cand.a, cand.b, &cand.weights);
        let c = assemble_unchecked(x0, cand.a, cand.b, cand.theta);
        if let Ok(r) = check_conditions(&c, ty, k, cand.a, cand.b, cfg.tol_pd) {
            let (passed, failed) = (r.passed, r.failed(ty));
            cand.condition_report = Some(r);
            if !passed {
                return cand.reject(RejectReason::ConditionsFailed { failed });
            }
        }
    }

    let control = match synthesize_control(x0, ty, cand.a, cand.b, &cand.nodes, &cand.weights) {
        Ok(u) => u,
        Err(e) => return cand.reject(RejectReason::ControlSynthesis { detail: e.to_string() }),
    };
    let (xf, _) = simulate_exact(x0.as_slice(), &control);
    let residual = xf.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    cand.residual = Some(residual);
    cand.control = Some(control);
    let bound = cfg.tol_sim * (1.0 + x0.max_abs());
    if !(residual <= bound) {
        return cand.reject(RejectReason::ResidualTooLarge { residual, bound });
    }
    cand.accepted = true;
    cand
}

/// All candidates of one case, in endpoint order.
pub fn solve_case(
    x0: &InitialState,
    case: &CaseDescriptor,
    cfg: &SolverConfig,
) -> Result<Vec<CandidateSolution>, SolveError> {
    Ok(solve_endpoints(x0, case)?.into_iter().map(|p| evaluate_candidate(x0, case, p, cfg)).collect())
}

fn close(u: f64, v: f64) -> bool {
    (u - v).abs() <= DEDUP_TOL * u.abs().max(v.abs()).max(1.0)
}

/// Solves for a state with positive first component.
pub fn solve_normalized(x0: &InitialState, cfg: &SolverConfig) -> Result<Vec<CandidateSolution>, SolveError> {
    let cases = enumerate_cases(x0.dim())?;
    let per_case: Vec<Result<Vec<CandidateSolution>, SolveError>> =
        cases.par_iter().map(|case| solve_case(x0, case, cfg)).collect();
    let mut candidates = Vec::new();
    for r in per_case {
        candidates.extend(r?);
    }
    // merge accepted candidates describing the same control
    for i in 0..candidates.len() {
        if !candidates[i].accepted {
            continue;
        }
        let dup = candidates[..i].iter().find(|p| {
            p.accepted && close(p.a, candidates[i].a) && close(p.b, candidates[i].b) && close(p.theta, candidates[i].theta)
        });
        if let Some(p) = dup {
            let case_id = p.case_id;
            let c = candidates[i].clone();
            candidates[i] = c.reject(RejectReason::Duplicate { case_id });
        }
    }
    Ok(candidates)
}

pub fn solve(x0raw: &[f64], cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    let (x0, mirrored) = normalize_initial_state(x0raw).map_err(|e| match e {
        MomentsError::NonGeneric => SolveError::NonGeneric("x1 = 0".into()),
        other => SolveError::Input(other),
    })?;
    let mut candidates = solve_normalized(&x0, cfg)?;
    if mirrored {
        for c in candidates.iter_mut() {
            c.control = c.control.as_ref().map(|u| u.negated());
        }
    }
    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if c.accepted && best.is_none_or(|j| c.theta < candidates[j].theta) {
            best = Some(i);
        }
    }
    let mut co_optimal = Vec::new();
    if let Some(j) = best {
        let t = candidates[j].theta;
        co_optimal = (0..candidates.len())
            .filter(|&i| candidates[i].accepted && (candidates[i].theta - t).abs() <= 1e-9 * t.abs().max(1.0))
            .collect();
        best = co_optimal.first().copied();
    }
    Ok(SolveReport {
        x0: x0raw.to_vec(),
        normalized_x0: x0.as_slice().to_vec(),
        mirrored,
        candidates,
        best,
        co_optimal,
        verdict: if best.is_some() { Verdict::OptimalFound } else { Verdict::NotControllable },
    })
}
