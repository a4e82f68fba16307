mod common;

use std::time::Instant;

use common::{random_conformant, sup};
use moment_toc::casesolver::{
    endpoint_determinant, enumerate_cases, solve, CandidateSolution, CaseId, RejectReason, SolveReport, SolverConfig,
    Verdict,
};
use moment_toc::control::simulate_exact;
use moment_toc::hankel::{shift_sequence, MomentSequence, ShiftKind};
use moment_toc::hausdorff::LemmaType;
use moment_toc::moments::{assemble_unchecked, mirror, InitialState};
use moment_toc::oracle::{grid_search_min_time, negative_weight_detected, random_step_roundtrip, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn near(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn solved(x0: &[f64]) -> SolveReport {
    solve(x0, &SolverConfig::default()).unwrap()
}

fn interior_weight(c: &CandidateSolution, i: usize) -> f64 {
    c.weights[i + c.lemma_type.weight_at_b() as usize]
}

fn candidate_moments(x0: &[f64], c: &CandidateSolution) -> MomentSequence {
    assemble_unchecked(&InitialState::new(x0.to_vec()).unwrap(), c.a, c.b, c.theta)
}

fn failed_condition(c: &CandidateSolution, name: &str) -> bool {
    matches!(&c.reject_reason, Some(RejectReason::ConditionsFailed { failed }) if failed.iter().any(|f| f == name))
}

const V_A: [f64; 4] = [1.0, -2.0, -6.0, 2.0];
const V_B: [f64; 4] = [1.0, -2.0, -2.4, 2.0];
const V_B_OUT: [f64; 4] = [1.0, -2.0, -2.39, 2.0];
const V_C: [f64; 4] = [1.0, 2.0, -3.0, 0.5];
const V_D1: [f64; 4] = [1.0, -8.0, -3.8289, -1.8792];
const V_D2: [f64; 4] = [1.0, -8.0, -28.4649, -1.8792];

fn worked_example_a() -> Outcome {
    let r = solved(&V_A);
    let Some(best) = r.best_candidate() else { return Err(format!("verdict {:?}", r.verdict)) };
    let accepted = r.accepted().count();
    let detail = format!(
        "case {} a={:.6} theta={:.6} z2={:.6} sigma2={:.6} accepted={accepted}",
        best.case_id, best.a, best.theta, best.nodes[0], interior_weight(best, 0)
    );
    check(
        r.verdict == Verdict::OptimalFound
            && best.case_id == CaseId(4)
            && near(best.a, -1.66366, 1e-3)
            && near(best.theta, 11.34087, 1e-3)
            && near(best.nodes[0], 0.608501, 1e-3)
            && near(interior_weight(best, 0), 7.01356, 1e-3)
            && accepted == 1,
        detail,
    )
}

fn worked_example_a_determinant() -> Outcome {
    let case = enumerate_cases(4).unwrap().into_iter().find(|c| c.id == CaseId(4)).unwrap();
    let p = endpoint_determinant(&InitialState::new(V_A.to_vec()).unwrap(), &case, 1).unwrap().at_outer(V_A[0]);
    let want: [f64; 7] = [-2555.0 / 72.0, 0.0, -9.0 / 4.0, -68.0 / 9.0, 0.75, 0.0, 1.0 / 18.0];
    let scale = want.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let err = (0..=6).fold(0.0_f64, |m, i| m.max((p.coeff(i) - want[i]).abs() / scale));
    check(p.degree() == Some(6) && err <= 1e-12, format!("degree {:?}, max relative coefficient error {err:.2e}", p.degree()))
}

fn worked_example_b() -> Outcome {
    let r = solved(&V_B);
    let out = solved(&V_B_OUT);
    let Some(best) = r.best_candidate() else { return Err(format!("verdict {:?}", r.verdict)) };
    let (t, z, s) = (best.theta, best.nodes[0], interior_weight(best, 0));
    check(
        (t - 1907.10809).abs() <= 1e-5 * 1907.10809
            && near(z, 0.001903, 1e-5)
            && (s - 1903.19513).abs() <= 1e-5 * 1903.19513
            && out.verdict == Verdict::NotControllable,
        format!("theta={t:.5} z2={z:.6} sigma2={s:.5}; perturbed verdict {:?}", out.verdict),
    )
}

fn worked_example_c() -> Outcome {
    let r = solved(&V_C);
    let Some(best) = r.best_candidate() else { return Err(format!("verdict {:?}", r.verdict)) };
    let win = best.case_id == CaseId(8)
        && near(best.a, -0.71829, 1e-3)
        && near(best.b, 1.240801, 1e-3)
        && near(best.theta, 6.43157, 1e-3)
        && near(best.weights[0], 3.51338, 1e-3);
    let c4 = r.candidates.iter().find(|c| c.case_id == CaseId(4) && !c.accepted);
    let c4_ab = c4.map(|c| shift_sequence(&candidate_moments(&V_C, c), ShiftKind::AB, c.a, c.b).unwrap().get(1));
    let c4_ok = c4.is_some_and(|c| failed_condition(c, "A3")) && c4_ab.is_some_and(|v| near(v, -0.03103, 1e-3));
    let c8 = r.candidates.iter().find(|c| c.case_id == CaseId(8) && near(c.a, -2.26126, 1e-3) && near(c.b, 1.12296, 1e-3));
    let c8_b = c8.map(|c| shift_sequence(&candidate_moments(&V_C, c), ShiftKind::B, c.a, c.b).unwrap().get(1));
    let c8_ok = c8.is_some_and(|c| !c.accepted && failed_condition(c, "D3")) && c8_b.is_some_and(|v| near(v, -3.52041, 1e-2));
    check(
        win && c4_ok && c8_ok,
        format!(
            "case {} a={:.6} b={:.6} theta={:.6} weight={:.6}; case 4 c^ab_1={c4_ab:?}; case 8 c^b_1={c8_b:?}",
            best.case_id, best.a, best.b, best.theta, best.weights[0]
        ),
    )
}

fn theta_on_line(x3: f64) -> Option<f64> {
    let mut x = V_D1;
    x[2] = x3;
    solved(&x).best_candidate().map(|c| c.theta)
}

/// Golden-section minimum of `theta_on_line` inside `[lo, hi]`.
fn refine_minimum(mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |x: f64| theta_on_line(x).unwrap_or(f64::INFINITY);
    let (mut p, mut q) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fp, mut fq) = (f(p), f(q));
    while hi - lo > 1e-4 {
        if fp < fq {
            hi = q;
            q = p;
            fq = fp;
            p = hi - g * (hi - lo);
            fp = f(p);
        } else {
            lo = p;
            p = q;
            fp = fq;
            q = lo + g * (hi - lo);
            fq = f(q);
        }
    }
    (lo + hi) / 2.0
}

fn worked_example_d() -> Outcome {
    let (r1, r2) = (solved(&V_D1), solved(&V_D2));
    let (Some(b1), Some(b2)) = (r1.best_candidate(), r2.best_candidate()) else {
        return Err(format!("verdicts {:?} {:?}", r1.verdict, r2.verdict));
    };
    let count = 200;
    let xs: Vec<f64> = (0..count).map(|i| -30.0 + 27.0 * i as f64 / (count - 1) as f64).collect();
    let ts: Vec<f64> = xs.iter().map(|&x| theta_on_line(x).unwrap_or(f64::INFINITY)).collect();
    let mut minima = Vec::new();
    for i in 1..count - 1 {
        if ts[i].is_finite() && ts[i] <= ts[i - 1] && ts[i] < ts[i + 1] {
            minima.push(refine_minimum(xs[i - 1], xs[i + 1]));
        }
    }
    let hit = |x: f64| minima.iter().any(|m| near(*m, x, 0.05));
    check(
        near(b1.theta, 17.0918, 1e-2)
            && near(b2.theta, 17.0918, 1e-2)
            && b2.case_id == CaseId(6)
            && hit(V_D1[2])
            && hit(V_D2[2]),
        format!(
            "theta {:.5} (case {}), {:.5} (case {}); sweep minima at {:?}",
            b1.theta,
            b1.case_id,
            b2.theta,
            b2.case_id,
            minima.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>()
        ),
    )
}

fn round_trips() -> Outcome {
    let start = Instant::now();
    let mut shapes = Vec::new();
    for ty in [LemmaType::A, LemmaType::B, LemmaType::C, LemmaType::D] {
        for k in 1..=4 {
            if ty.weight_count(k) == 0 {
                continue;
            }
            let ns: Vec<usize> = (4..=9).filter(|&n| ty.max_d(n, k).is_some()).collect();
            if !ns.is_empty() {
                shapes.push((ty, k, ns));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut passed, mut detected, mut worst_node, mut worst_weight) = (0, 0, 0.0_f64, 0.0_f64);
    let mut first_failure = None;
    for seed in 0..1000u64 {
        let (ty, k, ns) = &shapes[seed as usize % shapes.len()];
        let n = ns[rng.gen_range(0..ns.len())];
        let r = random_step_roundtrip(seed, *ty, *k, n);
        if r.passed {
            passed += 1;
            worst_node = worst_node.max(r.max_node_error);
            worst_weight = worst_weight.max(r.max_weight_error);
        } else if first_failure.is_none() {
            first_failure = Some(format!("seed {seed} {ty:?} k={k} n={n}: {}", r.detail));
        }
        if negative_weight_detected(seed, *ty, *k, n) {
            detected += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        passed == 1000 && detected == 1000 && secs < 30.0,
        format!(
            "{passed}/1000 recovered (node error {worst_node:.1e}, weight error {worst_weight:.1e}), \
             {detected}/1000 negative-weight variants rejected, {secs:.1}s{}",
            first_failure.map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    )
}

fn endpoint_residuals() -> Outcome {
    let mut worst = 0.0_f64;
    let mut count = 0;
    let mut problems = Vec::new();
    let mut audit = |x0: &[f64], r: &SolveReport, problems: &mut Vec<String>| {
        for c in r.accepted() {
            let (end, _) = simulate_exact(x0, c.control.as_ref().unwrap());
            let rel = sup(&end) / (1.0 + sup(x0));
            worst = worst.max(rel);
            count += 1;
            if rel > 1e-8 {
                problems.push(format!("{x0:?} case {}: {rel:.2e}", c.case_id));
            }
        }
    };
    for x0 in [V_A, V_B, V_C, V_D1, V_D2] {
        audit(&x0, &solved(&x0), &mut problems);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut slowest = f64::NEG_INFINITY;
    for i in 0..200 {
        let n = 4 + i % 4;
        let con = random_conformant(&mut rng, n);
        let r = solved(&con.x0);
        audit(&con.x0, &r, &mut problems);
        match r.best_candidate() {
            Some(b) => {
                slowest = slowest.max(b.theta - con.time());
                if b.theta > con.time() + 1e-6 {
                    problems.push(format!("{:?}: theta {} > construction {}", con.x0, b.theta, con.time()));
                }
            }
            None => problems.push(format!("{:?}: verdict {:?}", con.x0, r.verdict)),
        }
    }
    check(
        problems.is_empty(),
        format!(
            "{count} accepted candidates, worst relative residual {worst:.1e}, max theta - construction {slowest:.1e}{}",
            problems.first().map(|p| format!("; {} problems, first {p}", problems.len())).unwrap_or_default()
        ),
    )
}

fn oracle_agreement() -> Outcome {
    let start = Instant::now();
    let cases = enumerate_cases(4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut lines = Vec::new();
    let mut ok = true;
    for _ in 0..10 {
        let con = random_conformant(&mut rng, 4);
        let r = solved(&con.x0);
        let Some(theta) = r.best_candidate().map(|c| c.theta) else {
            ok = false;
            lines.push("no solution".to_string());
            continue;
        };
        let st = InitialState::new(con.x0.clone()).unwrap();
        let o = grid_search_min_time(&st, &cases, &GridSpec::new(1.25 * theta));
        match o.approx_theta() {
            Some(t) => {
                ok &= t >= theta * (1.0 - 1e-3);
                lines.push(format!("{:.4}", t / theta));
            }
            None => lines.push("none".into()),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(ok && secs < 300.0, format!("oracle time / solver time: [{}], {secs:.1}s", lines.join(", ")))
}

fn symmetry() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0_f64;
    let mut problems = Vec::new();
    for i in 0..100 {
        let con = random_conformant(&mut rng, 4 + i % 4);
        let (r, s) = (solved(&con.x0), solved(&mirror(&con.x0)));
        match (r.best_candidate(), s.best_candidate()) {
            (Some(p), Some(q)) => {
                let rel = (p.theta - q.theta).abs() / p.theta;
                worst = worst.max(rel);
                if rel > 1e-9 || p.control.as_ref().map(|u| u.negated()) != q.control {
                    problems.push(format!("{:?}", con.x0));
                }
            }
            _ => problems.push(format!("{:?}: {:?} / {:?}", con.x0, r.verdict, s.verdict)),
        }
    }
    check(
        problems.is_empty(),
        format!(
            "worst relative theta gap {worst:.1e}{}",
            problems.first().map(|p| format!("; {} problems, first {p}", problems.len())).unwrap_or_default()
        ),
    )
}

fn shift_composition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut worst = 0.0_f64;
    for _ in 0..500 {
        let len = rng.gen_range(3..12);
        let c = MomentSequence::new((0..len).map(|_| rng.gen_range(-10.0..10.0)).collect()).unwrap();
        let a: f64 = rng.gen_range(-5.0..0.0);
        let b: f64 = rng.gen_range(0.0..5.0);
        let ab = shift_sequence(&c, ShiftKind::AB, a, b).unwrap();
        let then_b = shift_sequence(&shift_sequence(&c, ShiftKind::A, a, b).unwrap(), ShiftKind::B, a, b).unwrap();
        let then_a = shift_sequence(&shift_sequence(&c, ShiftKind::B, a, b).unwrap(), ShiftKind::A, a, b).unwrap();
        for j in 1..=ab.len() {
            worst = worst.max((ab.get(j) - then_b.get(j)).abs()).max((ab.get(j) - then_a.get(j)).abs());
        }
    }
    check(worst <= 1e-12, format!("max entrywise difference {worst:.1e}"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("worked example (1,-2,-6,2)", worked_example_a),
        ("case 4 determinant coefficients for (1,-2,-6,2)", worked_example_a_determinant),
        ("worked example (1,-2,-12/5,2) and its perturbation", worked_example_b),
        ("worked example (1,2,-3,1/2) with rejected candidates", worked_example_c),
        ("two optima on the line (1,-8,x3,-1.8792)", worked_example_d),
        ("moment round trips", round_trips),
        ("endpoint residuals and construction times", endpoint_residuals),
        ("oracle agreement", oracle_agreement),
        ("mirror symmetry", symmetry),
        ("shift composition", shift_composition),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{:.1}s]", i + 1, start.elapsed().as_secs_f64());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
