use moment_toc::casesolver::enumerate_cases;
use moment_toc::hausdorff::LemmaType;
use moment_toc::moments::InitialState;
use moment_toc::oracle::{grid_search_min_time, random_step_roundtrip, GridSpec, OracleOutcome};

fn oracle(x0: &[f64], grid: &GridSpec) -> moment_toc::oracle::OracleResult {
    let st = InitialState::new(x0.to_vec()).unwrap();
    grid_search_min_time(&st, &enumerate_cases(x0.len()).unwrap(), grid)
}

#[test]
fn brackets_case_4_time() {
    let theta = 11.34087;
    let t = oracle(&[1.0, -2.0, -6.0, 2.0], &GridSpec::new(15.0)).approx_theta().unwrap();
    assert!(t >= theta * (1.0 - 1e-3) && t <= theta * (1.0 + 5e-2), "{t}");
}

#[test]
fn outside_domain_stays_infeasible() {
    for t_max in [10.0, 20.0, 30.0] {
        match oracle(&[1.0, -2.0, -2.39, 2.0], &GridSpec::new(t_max)).outcome {
            OracleOutcome::InfeasibleAtResolution { min_residual } => assert!(min_residual > 1e-2),
            o => panic!("{o:?}"),
        }
    }
}

#[test]
fn refinement_is_monotone_at_fixed_tolerance() {
    let mut g = GridSpec::new(8.0);
    g.tighten = 1.0;
    let r = oracle(&[1.0, 2.0, -3.0, 0.5], &g);
    assert_eq!(r.pass_history.len(), g.refinements + 1);
    let mut last = f64::INFINITY;
    for t in r.pass_history.iter().flatten() {
        assert!(*t <= last, "{:?}", r.pass_history);
        last = *t;
    }
    assert!(r.pass_history[0].is_none() || r.pass_history.iter().all(|t| t.is_some()));
}

#[test]
fn step_roundtrip_any_seed() {
    for seed in 0..20 {
        assert!(random_step_roundtrip(seed, LemmaType::A, 2, 4).passed, "seed {seed}");
    }
}
