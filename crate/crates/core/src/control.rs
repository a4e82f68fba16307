//! Stair-step controls: synthesis from step-function data and closed-form
//! simulation of the power chain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compensated::CompensatedSum;
use crate::hausdorff::LemmaType;
use crate::moments::InitialState;

/// Segments shorter than this are dropped.
pub const MIN_DURATION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error("level {0} is not one of -1, 0, 1")]
    BadLevel(i8),
    #[error("duration {0} is not positive and finite")]
    BadDuration(f64),
    #[error("non-positive descent {index} ({value:.3e})")]
    NonPositiveDescent { index: usize, value: f64 },
    #[error("negative endpoint duration ({0:.3e})")]
    NegativeEndpoint(f64),
    #[error("negative singular duration at position {0}")]
    NegativeSingular(usize),
    #[error("duration balance off by {0:.3e}")]
    Balance(f64),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlSegment {
    pub level: i8,
    pub duration: f64,
}

impl ControlSegment {
    pub fn new(level: i8, duration: f64) -> Result<Self, ControlError> {
        if !(-1..=1).contains(&level) {
            return Err(ControlError::BadLevel(level));
        }
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(ControlError::BadDuration(duration));
        }
        Ok(ControlSegment { level, duration })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StairStepControl {
    pub segments: Vec<ControlSegment>,
}

impl StairStepControl {
    pub fn new(segments: Vec<ControlSegment>) -> Result<Self, ControlError> {
        for s in &segments {
            ControlSegment::new(s.level, s.duration)?;
        }
        Ok(StairStepControl { segments })
    }

    pub fn total_time(&self) -> f64 {
        let mut s = CompensatedSum::new(0.0);
        for seg in &self.segments {
            s.add(seg.duration);
        }
        s.value()
    }

    pub fn negated(&self) -> Self {
        let segments = self.segments.iter().map(|s| ControlSegment { level: -s.level, ..*s }).collect();
        StairStepControl { segments }
    }

    /// Parses `"+1:1.5,0:2,-1:0.3"`.
    pub fn parse(spec: &str) -> Result<Self, String> {
        let mut segments = Vec::new();
        for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (lvl, dur) = part.split_once(':').ok_or_else(|| format!("segment '{part}' lacks ':'"))?;
            let level: i8 = lvl.trim().trim_start_matches('+').parse().map_err(|_| format!("bad level '{lvl}'"))?;
            let duration: f64 = dur.trim().parse().map_err(|_| format!("bad duration '{dur}'"))?;
            segments.push(ControlSegment::new(level, duration).map_err(|e| e.to_string())?);
        }
        if segments.is_empty() {
            return Err("empty control".into());
        }
        Ok(StairStepControl { segments })
    }
}

fn push(segments: &mut Vec<ControlSegment>, level: i8, duration: f64) {
    if duration >= MIN_DURATION {
        segments.push(ControlSegment { level, duration });
    }
}

/// Builds the control from the endpoints, the interior nodes (descending)
/// and the weights laid out as at `b`, interior, at `a`.
pub fn synthesize_control(
    x0: &InitialState,
    ty: LemmaType,
    a: f64,
    b: f64,
    nodes: &[f64],
    weights: &[f64],
) -> Result<StairStepControl, ControlError> {
    let expected = nodes.len() + ty.weight_at_a() as usize + ty.weight_at_b() as usize;
    if weights.len() != expected {
        return Err(ControlError::WeightCount { expected, got: weights.len() });
    }
    let x1 = x0.x1();
    let a1 = b - x1;
    let a2 = -a;
    if a1 < -MIN_DURATION {
        return Err(ControlError::NegativeEndpoint(a1));
    }
    if a2 < -MIN_DURATION {
        return Err(ControlError::NegativeEndpoint(a2));
    }
    if let Some(i) = weights.iter().position(|&w| w < 0.0) {
        return Err(ControlError::NegativeSingular(i));
    }
    let mut w = weights.iter().copied();
    let mut segments = Vec::new();
    push(&mut segments, 1, a1);
    if ty.weight_at_b() {
        push(&mut segments, 0, w.next().unwrap_or(0.0));
    }
    let mut descents = CompensatedSum::new(0.0);
    let mut level = b;
    for (i, &z) in nodes.iter().chain(std::iter::once(&a)).enumerate() {
        let step = level - z;
        if step <= 0.0 {
            return Err(ControlError::NonPositiveDescent { index: i + 1, value: step });
        }
        descents.add(step);
        push(&mut segments, -1, step);
        if i < nodes.len() {
            push(&mut segments, 0, w.next().unwrap_or(0.0));
        }
        level = z;
    }
    if ty.weight_at_a() {
        push(&mut segments, 0, w.next().unwrap_or(0.0));
    }
    push(&mut segments, 1, a2);
    let gap = x1 + a1 + a2 - descents.value();
    if gap.abs() > 1e-9 * (1.0 + b.abs() + a.abs()) {
        return Err(ControlError::Balance(gap));
    }
    Ok(StairStepControl { segments })
}

/// `int_0^tau (z + eps t)^m dt` for `m = 0..=max_m`, each by Horner in `tau`.
fn segment_integrals(z: f64, eps: f64, tau: f64, max_m: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(max_m + 1);
    for m in 0..=max_m {
        // sum_i C(m,i) z^(m-i) eps^i tau^(i+1) / (i+1)
        let mut binom = 1.0;
        let mut terms = Vec::with_capacity(m + 1);
        for i in 0..=m {
            terms.push(binom / (i + 1) as f64);
            binom = binom * (m - i) as f64 / (i + 1) as f64;
        }
        let mut acc = 0.0;
        for i in (0..=m).rev() {
            let zi = z.powi((m - i) as i32) * eps.powi(i as i32);
            acc = acc * tau + terms[i] * zi;
        }
        out.push(acc * tau);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub x: Vec<f64>,
    pub u: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub breakpoints: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub samples: Vec<Sample>,
}

fn advance(x: &[f64], level: i8, tau: f64) -> Vec<f64> {
    let n = x.len();
    let ints = segment_integrals(x[0], level as f64, tau, n - 1);
    let mut out = Vec::with_capacity(n);
    out.push(x[0] + level as f64 * tau);
    out.extend((1..n).map(|j| x[j] + ints[j]));
    out
}

/// Exact state after the control, with the states at every breakpoint.
pub fn simulate_exact(x0: &[f64], u: &StairStepControl) -> (Vec<f64>, Trajectory) {
    let n = x0.len();
    let mut acc: Vec<CompensatedSum> = x0.iter().map(|&v| CompensatedSum::new(v)).collect();
    let mut t = CompensatedSum::new(0.0);
    let mut breakpoints = vec![0.0];
    let mut states = vec![x0.to_vec()];
    for seg in &u.segments {
        let x: Vec<f64> = acc.iter().map(|s| s.value()).collect();
        let ints = segment_integrals(x[0], seg.level as f64, seg.duration, n.saturating_sub(1));
        acc[0].add(seg.level as f64 * seg.duration);
        for j in 1..n {
            acc[j].add(ints[j]);
        }
        t.add(seg.duration);
        breakpoints.push(t.value());
        states.push(acc.iter().map(|s| s.value()).collect());
    }
    let last = states.last().cloned().unwrap_or_default();
    (last, Trajectory { breakpoints, states, samples: Vec::new() })
}

/// Exact states at `m >= 2` uniform times `i T / (m - 1)`. The control value
/// reported at a breakpoint is that of the segment starting there.
pub fn sample_trajectory(x0: &[f64], u: &StairStepControl, m: usize) -> Trajectory {
    let (last, mut traj) = simulate_exact(x0, u);
    let m = m.max(2);
    let total = *traj.breakpoints.last().unwrap_or(&0.0);
    let nseg = u.segments.len();
    let mut seg = 0;
    for i in 0..m {
        if i == m - 1 {
            let level = u.segments.last().map_or(0, |s| s.level);
            traj.samples.push(Sample { t: total, x: last.clone(), u: level });
            break;
        }
        let t = (i as f64 * total) / (m - 1) as f64;
        while seg + 1 < nseg && traj.breakpoints[seg + 1] <= t {
            seg += 1;
        }
        if nseg == 0 {
            traj.samples.push(Sample { t, x: x0.to_vec(), u: 0 });
            continue;
        }
        let level = u.segments[seg].level;
        let x = advance(&traj.states[seg], level, t - traj.breakpoints[seg]);
        traj.samples.push(Sample { t, x, u: level });
    }
    traj
}
