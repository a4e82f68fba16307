//! Brute-force checks independent of the moment machinery: a refined grid
//! search for the minimal time over stair-step controls, and randomized
//! step-function round trips.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::casesolver::{CaseDescriptor, CaseId};
use crate::control::{ControlSegment, StairStepControl};
use crate::hausdorff::{check_conditions, recover_nodes, recover_weights, LemmaType, StepFunction};
use crate::moments::InitialState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Upper end of every duration range; lower end is 0.
    pub t_max: f64,
    /// Points per parameter on the coarse grid.
    pub coarse_steps: usize,
    pub refinements: usize,
    /// Points per parameter inside a refinement window, capped by `budget`.
    pub refine_steps: usize,
    /// Half-width of a refinement window in cells of the previous pass.
    pub window_cells: f64,
    /// Refinement windows per pass.
    pub seeds: usize,
    /// Times a window may follow its lowest point off its boundary.
    pub recentre: usize,
    /// Feasibility tolerance of the coarse pass, relative to `1 + ||x0||`.
    pub feas_tol: f64,
    /// Factor dividing the tolerance at every refinement.
    pub tighten: f64,
    /// Cap on grid points per window.
    pub budget: usize,
}

impl GridSpec {
    pub fn new(t_max: f64) -> Self {
        GridSpec {
            t_max,
            coarse_steps: 40,
            refinements: 2,
            refine_steps: 61,
            window_cells: 0.5,
            seeds: 8,
            recentre: 8,
            feas_tol: 1e-2,
            tighten: 10.0,
            budget: 600_000,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.t_max > 0.0 && self.coarse_steps >= 2 && self.refine_steps >= 2 && self.window_cells > 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum OracleOutcome {
    Feasible {
        approx_theta: f64,
        case_id: CaseId,
        best_params: Vec<f64>,
        control: StairStepControl,
        residual: f64,
    },
    InfeasibleAtResolution {
        min_residual: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub outcome: OracleOutcome,
    /// Best feasible time after the coarse pass and after each refinement,
    /// each judged at the tolerance of its own pass.
    pub pass_history: Vec<Option<f64>>,
    pub final_tol: f64,
}

impl OracleResult {
    pub fn approx_theta(&self) -> Option<f64> {
        match &self.outcome {
            OracleOutcome::Feasible { approx_theta, .. } => Some(*approx_theta),
            OracleOutcome::InfeasibleAtResolution { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Slot {
    Param(usize),
    Balance,
}

/// Segment pattern of a case with its free durations.
struct Family {
    id: CaseId,
    layout: Vec<(i8, Slot)>,
    params: usize,
    /// Parameter indices of the leading and trailing `+1` pieces.
    rise: Vec<usize>,
    descents: Vec<usize>,
}

impl Family {
    fn of(case: &CaseDescriptor) -> Self {
        let ty = case.lemma_type;
        let mut layout = Vec::new();
        let mut params = 0;
        let mut rise = Vec::new();
        let mut descents = Vec::new();
        let mut next = |layout: &mut Vec<(i8, Slot)>, level: i8| {
            layout.push((level, Slot::Param(params)));
            params += 1;
            params - 1
        };
        if !case.b_fixed {
            rise.push(next(&mut layout, 1));
        }
        if ty.weight_at_b() {
            next(&mut layout, 0);
        }
        for s in 0..case.k {
            if s + 1 == case.k {
                layout.push((-1, Slot::Balance));
            } else {
                descents.push(next(&mut layout, -1));
                next(&mut layout, 0);
            }
        }
        if ty.weight_at_a() {
            next(&mut layout, 0);
        }
        if !case.a_fixed {
            rise.push(next(&mut layout, 1));
        }
        Family { id: case.id, layout, params, rise, descents }
    }

    /// Control for the given free durations, or `None` if the balanced
    /// descent is negative.
    fn control(&self, x1: f64, p: &[f64]) -> Option<StairStepControl> {
        let balance = x1 + self.rise.iter().map(|&i| p[i]).sum::<f64>() - self.descents.iter().map(|&i| p[i]).sum::<f64>();
        if balance < 0.0 {
            return None;
        }
        let segments = self
            .layout
            .iter()
            .filter_map(|&(level, slot)| {
                let d = match slot {
                    Slot::Param(i) => p[i],
                    Slot::Balance => balance,
                };
                (d > 0.0).then_some(ControlSegment { level, duration: d })
            })
            .collect();
        Some(StairStepControl { segments })
    }

    /// Total time and final state by closed-form antiderivatives, without
    /// building the control.
    fn evaluate(&self, x0: &[f64], p: &[f64]) -> Option<(f64, [f64; 8])> {
        let n = x0.len();
        let balance = x0[0] + self.rise.iter().map(|&i| p[i]).sum::<f64>()
            - self.descents.iter().map(|&i| p[i]).sum::<f64>();
        if balance < 0.0 {
            return None;
        }
        let mut x = [0.0_f64; 8];
        x[..n].copy_from_slice(x0);
        let mut time = 0.0;
        for &(level, slot) in &self.layout {
            let tau = match slot {
                Slot::Param(i) => p[i],
                Slot::Balance => balance,
            };
            if tau <= 0.0 {
                continue;
            }
            time += tau;
            let z = x[0];
            if level == 0 {
                let mut zp = 1.0;
                for xm in x.iter_mut().take(n).skip(1) {
                    zp *= z;
                    *xm += zp * tau;
                }
            } else {
                let eps = level as f64;
                let w = z + eps * tau;
                let (mut zp, mut wp) = (z, w);
                for (m, xm) in x.iter_mut().enumerate().take(n).skip(1) {
                    zp *= z;
                    wp *= w;
                    *xm += (wp - zp) / ((m + 1) as f64 * eps);
                }
            }
            x[0] += level as f64 * tau;
        }
        Some((time, x))
    }
}

#[derive(Debug, Clone)]
struct Point {
    params: Vec<f64>,
    time: f64,
    residual: f64,
    /// For refinement candidates, `params` is the predicted zero and `rank`
    /// the predicted distance to it in cells.
    rank: f64,
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x < y;
        }
    }
    false
}

#[derive(Debug, Clone)]
struct PassStats {
    best: Option<Point>,
    /// Most promising points by `rank`, best first.
    promising: Vec<Point>,
    min_residual: f64,
}

const KEEP: usize = 64;

fn before(a: &Point, b: &Point) -> bool {
    a.rank < b.rank || (a.rank == b.rank && lex_less(&a.params, &b.params))
}

impl PassStats {
    fn empty() -> Self {
        PassStats { best: None, promising: Vec::new(), min_residual: f64::INFINITY }
    }

    fn offer_best(&mut self, pt: &Point, tol: f64) {
        if pt.residual <= tol
            && self.best.as_ref().is_none_or(|b| pt.time < b.time || (pt.time == b.time && lex_less(&pt.params, &b.params)))
        {
            self.best = Some(pt.clone());
        }
    }

    fn offer_promising(&mut self, pt: Point) {
        if self.promising.len() < KEEP || before(&pt, self.promising.last().unwrap()) {
            let at = self.promising.partition_point(|q| before(q, &pt));
            self.promising.insert(at, pt);
            self.promising.truncate(KEEP);
        }
    }

    fn merge(mut self, other: PassStats, tol: f64) -> PassStats {
        if let Some(b) = &other.best {
            self.offer_best(b, tol);
        }
        for p in other.promising {
            self.offer_promising(p);
        }
        self.min_residual = self.min_residual.min(other.min_residual);
        self
    }
}

fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Grid points ranked for refinement per window.
const RANKED: usize = 512;

/// Evaluates the tensor grid `lo_i + j h_i`, `j < steps`, clipped to
/// `[0, t_max]`. The lowest-residual points are ranked by the length, in
/// cells, of the least-squares step to a zero of the finite-difference
/// linear model. Also reports whether the most promising point sits on
/// the window boundary.
fn scan_box(fam: &Family, x0: &[f64], lo: &[f64], h: &[f64], steps: usize, t_max: f64, tol: f64) -> (PassStats, bool) {
    let dim = fam.params;
    let n = x0.len();
    let total = steps.pow(dim as u32);
    let point = |flat: usize, p: &mut [f64; 8]| -> bool {
        let mut rem = flat;
        for i in 0..dim {
            p[i] = lo[i] + (rem % steps) as f64 * h[i];
            rem /= steps;
            if p[i] < 0.0 || p[i] > t_max * (1.0 + 1e-12) {
                return false;
            }
        }
        true
    };
    let values: Vec<Option<(f64, [f64; 8])>> = (0..total)
        .into_par_iter()
        .map(|flat| {
            let mut p = [0.0; 8];
            if point(flat, &mut p) {
                fam.evaluate(x0, &p[..dim])
            } else {
                None
            }
        })
        .collect();
    let mut stats = PassStats::empty();
    let mut order: Vec<(f64, usize)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.as_ref().map(|(_, x)| (sup_norm(&x[..n]), i)))
        .collect();
    for &(residual, flat) in &order {
        let (time, _) = values[flat].unwrap();
        if residual <= tol && stats.best.as_ref().is_none_or(|b| time < b.time) {
            let mut p = [0.0; 8];
            point(flat, &mut p);
            stats.best = Some(Point { params: p[..dim].to_vec(), time, residual, rank: 0.0 });
        }
        stats.min_residual = stats.min_residual.min(residual);
    }
    if order.len() > RANKED {
        order.select_nth_unstable_by(RANKED, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        order.truncate(RANKED);
    }
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut stride = 1;
    let mut strides = Vec::with_capacity(dim);
    for _ in 0..dim {
        strides.push(stride);
        stride *= steps;
    }
    let rows = n - 1;
    for &(residual, flat) in &order {
        let (time, x) = values[flat].unwrap();
        let mut jac = DMatrix::<f64>::zeros(rows, dim);
        let mut ok = true;
        for (c, &st) in strides.iter().enumerate() {
            let j = (flat / st) % steps;
            let fwd = (j + 1 < steps).then(|| values[flat + st]).flatten();
            let bwd = (j > 0).then(|| values[flat - st]).flatten();
            let (other, sign) = match (fwd, bwd) {
                (Some(f), _) => (f.1, 1.0),
                (None, Some(b)) => (b.1, -1.0),
                _ => {
                    ok = false;
                    break;
                }
            };
            for r in 0..rows {
                jac[(r, c)] = sign * (other[r + 1] - x[r + 1]) / h[c];
            }
        }
        let mut p = [0.0; 8];
        point(flat, &mut p);
        let mut target = p[..dim].to_vec();
        let mut rank = f64::INFINITY;
        if ok {
            let rhs = DVector::from_iterator(rows, x[1..n].iter().map(|v| -v));
            if let Ok(step) = jac.svd(true, true).solve(&rhs, 1e-12) {
                rank = step.iter().zip(h).fold(0.0_f64, |m, (d, hi)| m.max(d.abs() / hi));
                for (t, d) in target.iter_mut().zip(step.iter()) {
                    *t = (*t + d).clamp(0.0, t_max);
                }
            }
        }
        if rank.is_finite() {
            stats.offer_promising(Point { params: target, time, residual, rank });
        }
    }
    let on_edge = stats.promising.first().is_some_and(|p| {
        p.params.iter().zip(lo).zip(h).any(|((x, l), hi)| {
            let j = (x - l) / hi;
            (j < 0.5 && *l > 0.0) || (j > (steps - 1) as f64 - 0.5 && l + (steps - 1) as f64 * hi < t_max)
        })
    });
    (stats, on_edge)
}

/// Most promising points, none inside another's window, plus the incumbent.
fn pick_seeds(stats: &PassStats, h: &[f64], count: usize, window: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    if let Some(b) = &stats.best {
        out.push(b.params.clone());
    }
    for p in &stats.promising {
        if out.len() >= count + stats.best.is_some() as usize {
            break;
        }
        let far = out
            .iter()
            .all(|q| q.iter().zip(&p.params).zip(h).any(|((x, y), hi)| (x - y).abs() > window * hi * (1.0 + 1e-9)));
        if far {
            out.push(p.params.clone());
        }
    }
    out
}

fn search_family(fam: &Family, x0: &[f64], grid: &GridSpec, scale: f64) -> (Option<Point>, Vec<Option<f64>>, f64) {
    let dim = fam.params;
    let mut tol = grid.feas_tol * scale;
    let h0 = grid.t_max / (grid.coarse_steps - 1) as f64;
    let mut h = vec![h0; dim];
    let (mut stats, _) = scan_box(fam, x0, &vec![0.0; dim], &h, grid.coarse_steps, grid.t_max, tol);
    let mut history = vec![stats.best.as_ref().map(|p| p.time)];
    let mut min_res = stats.min_residual;
    for _ in 0..grid.refinements {
        let seeds = pick_seeds(&stats, &h, grid.seeds, grid.window_cells);
        tol /= grid.tighten;
        let cap = (grid.budget as f64).powf(1.0 / dim as f64).floor() as usize;
        let steps = grid.refine_steps.min(cap).max(3);
        let new_h: Vec<f64> = h.iter().map(|hi| 2.0 * grid.window_cells * hi / (steps - 1) as f64).collect();
        let mut next = PassStats::empty();
        // an earlier incumbent that meets the tighter tolerance stays eligible
        if let Some(b) = stats.best.as_ref().filter(|b| b.residual <= tol) {
            next.best = Some(b.clone());
        }
        for s in seeds {
            let mut centre = s;
            for _ in 0..=grid.recentre {
                let lo: Vec<f64> = centre.iter().zip(&h).map(|(c, hi)| c - grid.window_cells * hi).collect();
                let (st, on_edge) = scan_box(fam, x0, &lo, &new_h, steps, grid.t_max, tol);
                let low = st.promising.first().map(|p| p.params.clone());
                next = next.merge(st, tol);
                match low {
                    Some(p) if on_edge => centre = p,
                    _ => break,
                }
            }
        }
        h = new_h;
        stats = next;
        min_res = min_res.min(stats.min_residual);
        history.push(stats.best.as_ref().map(|p| p.time));
    }
    (stats.best, history, min_res)
}

/// Minimal feasible time over the stair-step families of `cases`, each
/// searched on a refined grid. Intended for `n <= 5`.
pub fn grid_search_min_time(x0: &InitialState, cases: &[CaseDescriptor], grid: &GridSpec) -> OracleResult {
    let x = x0.as_slice();
    let scale = 1.0 + x0.max_abs();
    let final_tol = grid.feas_tol * scale / grid.tighten.powi(grid.refinements as i32);
    let mut best: Option<(CaseId, Point)> = None;
    let mut history: Vec<Option<f64>> = vec![None; grid.refinements + 1];
    let mut min_residual = f64::INFINITY;
    for case in cases {
        let fam = Family::of(case);
        let (b, hist, mr) = search_family(&fam, x, grid, scale);
        min_residual = min_residual.min(mr);
        for (slot, t) in history.iter_mut().zip(hist) {
            *slot = match (*slot, t) {
                (Some(u), Some(v)) => Some(u.min(v)),
                (u, v) => u.or(v),
            };
        }
        if let Some(p) = b {
            if best.as_ref().is_none_or(|(_, q)| p.time < q.time) {
                best = Some((fam.id, p));
            }
        }
    }
    let outcome = match best {
        Some((case_id, p)) => {
            let fam = Family::of(cases.iter().find(|c| c.id == case_id).unwrap());
            let control = fam.control(x[0], &p.params).unwrap_or(StairStepControl { segments: Vec::new() });
            OracleOutcome::Feasible {
                approx_theta: p.time,
                case_id,
                best_params: p.params,
                control,
                residual: p.residual,
            }
        }
        None => OracleOutcome::InfeasibleAtResolution { min_residual },
    };
    OracleResult { outcome, pass_history: history, final_tol }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrip {
    pub passed: bool,
    pub detail: String,
    pub step: StepFunction,
    pub max_node_error: f64,
    pub max_weight_error: f64,
}

/// A random step function of the given type: `[a, b]` inside `[-5, 5]`
/// with `a < 0 < b`, interior nodes at least 0.05 from zero and 0.2 apart,
/// weights in `[0.1, 10]`.
pub fn random_step_function(rng: &mut ChaCha8Rng, ty: LemmaType, k: usize) -> StepFunction {
    let interior = k.saturating_sub(1);
    loop {
        let a: f64 = rng.gen_range(-5.0..-0.5);
        let b: f64 = rng.gen_range(0.5..5.0);
        let mut nodes: Vec<f64> = Vec::with_capacity(interior);
        let mut tries = 0;
        while nodes.len() < interior && tries < 1000 {
            tries += 1;
            let z: f64 = rng.gen_range(a + 0.1..b - 0.1);
            if z.abs() >= 0.05 && nodes.iter().all(|y| (y - z).abs() >= 0.2) {
                nodes.push(z);
            }
        }
        if nodes.len() < interior {
            continue;
        }
        nodes.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let w: Vec<f64> = (0..ty.weight_count(k)).map(|_| rng.gen_range(0.1..10.0)).collect();
        return StepFunction::of_type(ty, &nodes, &w, a, b);
    }
}

/// Builds moments of a random valid step function and checks that the
/// conditions hold and recovery reproduces it to `1e-6` relative.
pub fn random_step_roundtrip(seed: u64, ty: LemmaType, k: usize, n: usize) -> RoundTrip {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let step = random_step_function(&mut rng, ty, k);
    let fail = |detail: String, step: &StepFunction| RoundTrip {
        passed: false,
        detail,
        step: step.clone(),
        max_node_error: f64::NAN,
        max_weight_error: f64::NAN,
    };
    let c = step.moments(n);
    let (a, b) = (step.a, step.b);
    match check_conditions(&c, ty, k, a, b, 1e-9) {
        Ok(r) if r.passed => {}
        Ok(r) => return fail(format!("conditions failed: {:?}", r.failed(ty)), &step),
        Err(e) => return fail(e.to_string(), &step),
    }
    let nodes = match recover_nodes(&c, ty, k, a, b) {
        Ok(z) => z,
        Err(e) => return fail(e.to_string(), &step),
    };
    let lo = ty.weight_at_b() as usize;
    let truth = &step.points[lo..lo + nodes.len()];
    let max_node_error = nodes
        .iter()
        .zip(truth)
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs() / y.abs().max(1.0)));
    let weights = match recover_weights(&c, ty, &nodes, a, b) {
        Ok(w) => w,
        Err(e) => return fail(e.to_string(), &step),
    };
    let max_weight_error =
        weights.iter().zip(&step.weights).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs() / y.abs()));
    let passed = max_node_error <= 1e-6 && max_weight_error <= 1e-6;
    RoundTrip {
        passed,
        detail: if passed { "ok".into() } else { "recovery mismatch".into() },
        step,
        max_node_error,
        max_weight_error,
    }
}

/// The same construction with one weight negated; `true` when the
/// conditions correctly fail.
pub fn negative_weight_detected(seed: u64, ty: LemmaType, k: usize, n: usize) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step = random_step_function(&mut rng, ty, k);
    let i = rng.gen_range(0..step.weights.len());
    step.weights[i] = -step.weights[i];
    match check_conditions(&step.moments(n), ty, k, step.a, step.b, 1e-9) {
        Ok(r) => !r.passed,
        Err(_) => true,
    }
}
