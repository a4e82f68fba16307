mod common;

use common::{conformant, random_conformant, sup};
use moment_toc::casesolver::{enumerate_cases, solve, CaseId, SolverConfig, Verdict};
use moment_toc::control::simulate_exact;
use moment_toc::moments::{mirror, InitialState};
use moment_toc::oracle::{grid_search_min_time, GridSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn case_2_endpoint_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let case = enumerate_cases(4).unwrap().into_iter().find(|c| c.id == CaseId(2)).unwrap();
    for _ in 0..20 {
        let con = conformant(&mut rng, 4, &case);
        let r = solve(&con.x0, &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::OptimalFound);
        let best = r.best_candidate().unwrap();
        assert!(best.theta <= con.time() + 1e-8 * (1.0 + con.time()));
        if best.case_id == CaseId(2) {
            assert!((best.b - con.b).abs() <= 1e-6 * (1.0 + con.b), "{} vs {}", best.b, con.b);
        }
    }
}

#[test]
fn case_2_oracle_agrees_with_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let case = enumerate_cases(4).unwrap().into_iter().find(|c| c.id == CaseId(2)).unwrap();
    let cases = enumerate_cases(4).unwrap();
    for _ in 0..3 {
        let con = conformant(&mut rng, 4, &case);
        let t = con.time();
        let st = InitialState::new(con.x0.clone()).unwrap();
        let o = grid_search_min_time(&st, &cases, &GridSpec::new(1.25 * t));
        let approx = o.approx_theta().expect("oracle found no control");
        assert!(approx <= t * 1.05, "oracle {approx} vs construction {t}");
    }
}

#[test]
fn random_constructions_are_solved() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..60 {
        let n = 4 + (rand::Rng::gen_range(&mut rng, 0..3));
        let con = random_conformant(&mut rng, n);
        let r = solve(&con.x0, &SolverConfig::default()).unwrap();
        assert_eq!(r.verdict, Verdict::OptimalFound, "{:?}", con.x0);
        let best = r.best_candidate().unwrap();
        let t = con.time();
        assert!(best.theta <= t + 1e-8 * (1.0 + t), "{} > {t} for {:?}", best.theta, con.x0);
        let (end, _) = simulate_exact(&con.x0, best.control.as_ref().unwrap());
        assert!(sup(&end) <= 1e-8 * (1.0 + sup(&con.x0)));
    }
}

#[test]
fn mirrored_states_mirror_controls() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..30 {
        let con = random_conformant(&mut rng, 5);
        let m = mirror(&con.x0);
        let r = solve(&con.x0, &SolverConfig::default()).unwrap();
        let s = solve(&m, &SolverConfig::default()).unwrap();
        assert!(s.mirrored && !r.mirrored);
        assert_eq!(r.verdict, s.verdict);
        let (p, q) = (r.best_candidate().unwrap(), s.best_candidate().unwrap());
        assert!((p.theta - q.theta).abs() <= 1e-9 * p.theta);
        assert_eq!(p.case_id, q.case_id);
        let (u, v) = (p.control.as_ref().unwrap(), q.control.as_ref().unwrap());
        assert_eq!(u.negated(), *v);
        let (end, _) = simulate_exact(&m, v);
        assert!(sup(&end) <= 1e-8 * (1.0 + sup(&m)));
    }
}
