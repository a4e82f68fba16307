#![allow(dead_code)]

use moment_toc::casesolver::{enumerate_cases, CaseDescriptor};
use moment_toc::control::{simulate_exact, synthesize_control, StairStepControl};
use moment_toc::moments::InitialState;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn sup(x: &[f64]) -> f64 {
    x.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Initial state from which `u` ends exactly at the origin: run `u` from
/// `(-int u, 0, ..., 0)` and negate the accumulated integrals.
pub fn state_reaching_origin(u: &StairStepControl, n: usize) -> Vec<f64> {
    let rise: f64 = u.segments.iter().map(|s| s.level as f64 * s.duration).sum();
    let mut start = vec![0.0; n];
    start[0] = -rise;
    let (end, _) = simulate_exact(&start, u);
    let mut x0 = vec![-rise];
    x0.extend(end[1..].iter().map(|v| -v));
    x0
}

#[derive(Debug, Clone)]
pub struct Construction {
    pub x0: Vec<f64>,
    pub control: StairStepControl,
    pub case: CaseDescriptor,
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Construction {
    pub fn time(&self) -> f64 {
        self.control.total_time()
    }
}

/// A control with the switching structure of `case`: random endpoints,
/// interior levels at least 0.15 apart and away from zero, durations of
/// the singular pieces in `[0.2, 3]`.
pub fn conformant(rng: &mut ChaCha8Rng, n: usize, case: &CaseDescriptor) -> Construction {
    let ty = case.lemma_type;
    loop {
        let x1: f64 = rng.gen_range(0.3..2.0);
        let b = if case.b_fixed { x1 } else { x1 + rng.gen_range(0.2..1.5) };
        let a = if case.a_fixed { 0.0 } else { -rng.gen_range(0.2..1.5) };
        let interior = case.k - 1;
        let mut nodes: Vec<f64> = Vec::new();
        let mut tries = 0;
        while nodes.len() < interior && tries < 500 {
            tries += 1;
            let z: f64 = rng.gen_range(a + 0.15..b - 0.15);
            if z.abs() > 0.15 && nodes.iter().all(|y| (y - z).abs() > 0.15) {
                nodes.push(z);
            }
        }
        if nodes.len() < interior {
            continue;
        }
        nodes.sort_by(|p, q| q.partial_cmp(p).unwrap());
        let weights: Vec<f64> = (0..ty.weight_count(case.k)).map(|_| rng.gen_range(0.2..3.0)).collect();
        let mut dummy = vec![1.0; n];
        dummy[0] = x1;
        let st = InitialState::new(dummy).unwrap();
        let Ok(control) = synthesize_control(&st, ty, a, b, &nodes, &weights) else { continue };
        let x0 = state_reaching_origin(&control, n);
        return Construction { x0, control, case: case.clone(), a, b, nodes, weights };
    }
}

/// A random case of dimension `n` and a conformant construction for it.
pub fn random_conformant(rng: &mut ChaCha8Rng, n: usize) -> Construction {
    let cases = enumerate_cases(n).unwrap();
    let case = cases[rng.gen_range(0..cases.len())].clone();
    conformant(rng, n, &case)
}
