use fcp_core::engine::*;
use fcp_core::path_oracle::{reach_indicator, OracleLimits};
use fcp_core::point_process::{EdgeId, ProcessSpec};
use fcp_core::rng::derive_seed;
use fcp_core::stats::MeanEstimate;
use proptest::prelude::*;

fn line(spec: ProcessSpec, seed: u64) -> EdgeEnvironment {
    EdgeEnvironment::new(Region::half_line(), spec, seed)
}

#[test]
fn stationarized_lattice_front_speed() {
    let env = line(ProcessSpec::StationarizedLattice, 11);
    let t = hitting_time(&env, &[10_000], 0.0).unwrap().unwrap();
    assert!((t / 10_000.0 - 0.5).abs() < 0.02, "{t}");
}

#[test]
fn poisson_hitting_time_is_a_gamma_mean() {
    let n = 50u64;
    let samples: Vec<f64> = (0..1000)
        .map(|r| hitting_time(&line(ProcessSpec::poisson(1.0), derive_seed(3, r)), &[n as i64], 0.0).unwrap().unwrap())
        .collect();
    let est = MeanEstimate::from_samples(&samples);
    assert!((est.mean - n as f64).abs() < 3.0 * est.std_err, "{est:?}");
}

#[test]
fn infected_set_of_stationarized_lattice_follows_renewal_count() {
    // #{n >= 1 : U_1 + ... + U_n < 3} has mean sum_n IrwinHall_n(3).
    fn irwin_hall_cdf(n: u32, x: f64) -> f64 {
        if x >= n as f64 {
            return 1.0;
        }
        let mut s = 0.0;
        let mut binom = 1.0;
        let mut fact = 1.0;
        for k in 1..=n {
            fact *= k as f64;
        }
        for k in 0..=(x.floor() as u32) {
            if k > 0 {
                binom *= (n - k + 1) as f64 / k as f64;
            }
            s += if k % 2 == 0 { 1.0 } else { -1.0 } * binom * (x - k as f64).powi(n as i32);
        }
        s / fact
    }
    let expected = 1.0 + (1..60).map(|n| irwin_hall_cdf(n, 3.0)).sum::<f64>();
    assert!((expected - 6.6655).abs() < 0.01, "{expected}");

    let sizes: Vec<f64> = (0..4000)
        .map(|r| {
            let env = line(ProcessSpec::StationarizedLattice, derive_seed(5, r));
            let res = run_spread(&env, 0.0, Horizon::time(3.0)).unwrap();
            infected_set(&res, 3.0).unwrap().len() as f64
        })
        .collect();
    let est = MeanEstimate::from_samples(&sizes);
    assert!((est.mean - expected).abs() < 4.0 * est.std_err, "{est:?} vs {expected}");
}

#[test]
fn extra_points_never_delay_infection() {
    for seed in 0..30 {
        let base = EdgeEnvironment::new(Region::centered(2, 3), ProcessSpec::PerturbedLattice, seed);
        let mut more = base.clone();
        for e in 0..40u64 {
            let edge = EdgeId(derive_seed(seed, e) % 7);
            more.superpose(edge, &[0.1 * e as f64]);
        }
        let mut more_2d = more.clone();
        // Also superpose on real edges of the box.
        for x in -3..3 {
            more_2d.superpose(edge_id(&[x, 0], 0), &[0.05 * (x + 3) as f64]);
        }
        let a = run_spread(&base, 0.0, Horizon::unbounded()).unwrap();
        let b = run_spread(&more_2d, 0.0, Horizon::unbounded()).unwrap();
        for (v, t) in a.hitting_times() {
            assert!(b.hitting_time(v).unwrap() <= t);
        }
    }
}

#[test]
fn atoms_counterexample_in_the_plane() {
    let base = ProcessSpec::thinned(ProcessSpec::Lattice, 0.5);
    let shifted = ProcessSpec::shifted(base.clone(), vec![0.0, 0.5]);
    for seed in 0..10 {
        let a =
            run_spread(&EdgeEnvironment::new(Region::centered(2, 5), base.clone(), seed), 0.0, Horizon::unbounded())
                .unwrap();
        let b =
            run_spread(&EdgeEnvironment::new(Region::centered(2, 5), shifted.clone(), seed), 0.0, Horizon::unbounded())
                .unwrap();
        assert_eq!(a.reached(), b.reached());
        for (v, t) in a.hitting_times() {
            assert_eq!(b.hitting_time(v).unwrap().to_bits(), t.to_bits());
        }
    }
}

#[test]
fn engine_agrees_with_path_oracle() {
    let regions = [Region::HalfLine { vertices: Some(5) }, Region::Box { lo: vec![0, 0], hi: vec![1, 1] }];
    let specs = [ProcessSpec::StationarizedLattice, ProcessSpec::poisson(1.0), ProcessSpec::PerturbedLattice];
    let lim = OracleLimits::default();
    let mut checked = 0;
    for seed in 0..100u64 {
        let region = regions[(seed % 2) as usize].clone();
        let spec = specs[(seed % 3) as usize].clone();
        let env = EdgeEnvironment::new(region, spec, seed);
        let res = run_spread(&env, 0.0, Horizon::unbounded()).unwrap();
        for t in [0.4, 1.0, 1.7, 2.5] {
            let vertices: Vec<Vertex> = match &env.region {
                Region::HalfLine { .. } => (0..5).map(|x| vec![x]).collect(),
                Region::Box { .. } => vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]],
            };
            for v in vertices {
                let engine = res.hitting_time(&v).is_some_and(|h| h < t) || v == env.region.origin();
                let oracle = reach_indicator(&env, &env.region.origin(), &v, t, &lim).unwrap();
                assert_eq!(engine, oracle, "seed {seed}, v {v:?}, t {t}");
                checked += 1;
            }
        }
    }
    assert!(checked > 1000);
}

#[test]
fn trace_and_patterns_are_consistent() {
    let env = line(ProcessSpec::StationarizedLattice, 2);
    let res = run_spread(&env, 0.0, Horizon::vertices(11)).unwrap();
    assert_eq!(res.trace.len(), 11);
    assert!(res.trace.windows(2).all(|w| w[0].time <= w[1].time));
    let pats = edge_patterns(&env, &res, 0.0, 6.0).unwrap();
    assert_eq!(pats.len(), 11);
    for (v, t) in res.hitting_times().skip(1) {
        let lower = v[0] - 1;
        let p = &pats.iter().find(|(l, _, _)| l[0] == lower).unwrap().2;
        assert!(p.times.contains(&t));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn half_line_times_are_non_decreasing(seed in any::<u64>(), start in 0.0f64..5.0) {
        for spec in [ProcessSpec::poisson(1.0), ProcessSpec::StationarizedPerturbedLattice] {
            let run = half_line_sweep(&line(spec, seed), 300, start).unwrap();
            prop_assert_eq!(run.times[0], start);
            prop_assert!(run.times.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn witness_paths_are_permitted(seed in any::<u64>()) {
        let env = EdgeEnvironment::new(Region::centered(2, 2), ProcessSpec::StationarizedLattice, seed);
        let res = run_spread(&env, 0.0, Horizon::unbounded()).unwrap();
        for (v, t) in res.hitting_times() {
            let w = res.witness(v).unwrap();
            prop_assert!(w.is_permitted(&env, t.next_up()));
            prop_assert!(w.times.windows(2).all(|p| p[0] <= p[1]));
        }
    }
}
