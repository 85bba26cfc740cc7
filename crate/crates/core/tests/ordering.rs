use fcp_core::ordering::*;
use fcp_core::point_process::{hitting_prob, EmpiricalConfig, ProcessSpec};
use fcp_core::rng::{derive_seed, seeded};
use fcp_core::sets::{BorelSet, Interval};
use fcp_core::Error;
use rand::Rng;

fn random_collection(seed: u64) -> Vec<BorelSet> {
    let mut rng = seeded(seed);
    let k = rng.random_range(1..=3);
    let mut cuts: Vec<f64> = (0..2 * k).map(|_| rng.random_range(-2.0..2.0)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.chunks(2)
        .map(|c| {
            if rng.random_bool(0.5) {
                BorelSet::single(Interval::open(c[0], c[1]))
            } else {
                BorelSet::single(Interval::half_open(c[0], c[1]))
            }
        })
        .collect()
}

#[test]
fn a_process_never_refutes_itself() {
    let specs = [
        ProcessSpec::Lattice,
        ProcessSpec::StationarizedLattice,
        ProcessSpec::PerturbedLattice,
        ProcessSpec::StationarizedPerturbedLattice,
        ProcessSpec::poisson(1.0),
    ];
    for (i, spec) in specs.iter().enumerate() {
        let collections: Vec<Vec<BorelSet>> = (0..4).map(|j| random_collection(derive_seed(i as u64, j))).collect();
        let cfg = OrderTestConfig { replicas: 5_000, significance: 0.001, seed: i as u64 };
        let rep = convex_order_test(spec, spec, &collections, &TestFunction::ALL, &cfg).unwrap();
        assert!(!rep.refuted, "{spec}: {:?}", rep.trials.iter().find(|t| t.verdict == Verdict::Refutes));
        assert_eq!(rep.trials.len(), 16);
    }
}

#[test]
fn ordering_chain_is_not_contradicted() {
    let pl = ProcessSpec::PerturbedLattice;
    let poi = ProcessSpec::poisson(1.0);
    let sparse = ProcessSpec::poisson(0.5);
    let sets = separating_collections();
    let cfg = OrderTestConfig { replicas: 20_000, significance: 0.01, seed: 12 };
    let ab = convex_order_test(&pl, &poi, &sets, &TestFunction::ALL, &cfg).unwrap();
    let bc = convex_order_test(&poi, &sparse, &sets, &TestFunction::ALL, &cfg).unwrap();
    let ac = convex_order_test(&pl, &sparse, &sets, &TestFunction::ALL, &cfg).unwrap();
    assert!(!ab.refuted && !bc.refuted && !ac.refuted);
    assert!(bc.trials.iter().any(|t| t.verdict == Verdict::Supports));
}

#[test]
fn capped_sum_estimates_hitting_probability() {
    let spec = ProcessSpec::StationarizedPerturbedLattice;
    let set = vec![BorelSet::single(Interval::closed(0.2, 1.0))];
    let est = expected_value(&spec, &set, TestFunction::CappedSum, 50_000, 4).unwrap();
    let exact = hitting_prob(&spec, 0.2, 0.8).unwrap().value;
    assert!((est.mean - exact).abs() < 4.0 * est.std_err, "{est:?} vs {exact}");
}

#[test]
fn overlapping_sets_are_rejected() {
    let sets = vec![vec![BorelSet::single(Interval::closed(0.0, 1.0)), BorelSet::single(Interval::closed(1.0, 2.0))]];
    let poi = ProcessSpec::poisson(1.0);
    let r = convex_order_test(&poi, &poi, &sets, &[TestFunction::SqrtSum], &OrderTestConfig::default());
    assert!(matches!(r, Err(Error::Disjointness(_))));
}

#[test]
fn perturbed_lattice_dominates_poisson_hitting() {
    let rep = hitting_domination_test(
        &ProcessSpec::PerturbedLattice,
        &ProcessSpec::poisson(1.0),
        &IntervalGrid::default(),
        &EmpiricalConfig::default(),
    )
    .unwrap();
    assert!(rep.dominated);
    assert_eq!(rep.checked, 800);
}

#[test]
fn lattice_is_not_dominated_by_its_stationary_version() {
    let rep = hitting_domination_test(
        &ProcessSpec::StationarizedLattice,
        &ProcessSpec::Lattice,
        &IntervalGrid::default(),
        &EmpiricalConfig::default(),
    )
    .unwrap();
    assert!(!rep.dominated);
    let w = rep.worst.unwrap();
    assert!(w.p_weak > w.p_strong);
}

#[test]
fn certificate_constants_are_consistent() {
    let sl = ProcessSpec::StationarizedLattice;
    let sl4 = ProcessSpec::scaled(sl.clone(), 4.0);
    let cert =
        speedup_condition_scan(&sl, &sl4, &IntervalGrid::default(), &EmpiricalConfig::default()).unwrap().unwrap();
    assert_eq!(cert.margin, cert.p_strong - 3.0 * cert.p_weak);
    assert_eq!(cert.epsilon, cert.margin / 3.0);
    assert_eq!(cert.u_weak, cert.p_weak);
    assert_eq!(cert.m, (2 * cert.m_lower + 1).max(5));
    assert_eq!(cert.m_lower, lower_block_len(&sl4, cert.u_weak).unwrap());
    assert_eq!(cert.block_prob, fcp_core::coupling::block_probability(cert.epsilon, cert.m * cert.m));
    assert_eq!(cert.margins_by_constant[2], (3, cert.margin));
    assert!(cert.margins_by_constant.windows(2).all(|w| w[0].1 >= w[1].1));
}

#[test]
fn scan_preconditions_are_reported_in_order() {
    let sl = ProcessSpec::StationarizedLattice;
    let sl4 = ProcessSpec::scaled(sl.clone(), 4.0);
    let grid = IntervalGrid::default();
    let cfg = EmpiricalConfig::default();
    let hyp = |s: &ProcessSpec, w: &ProcessSpec| match speedup_condition_scan(s, w, &grid, &cfg) {
        Err(Error::Precondition { hypothesis, .. }) => hypothesis,
        other => panic!("expected a precondition failure, got {other:?}"),
    };
    let inhom = ProcessSpec::inhom_poisson(fcp_core::point_process::IntensityId::OnePlusInverseShift);
    assert_eq!(hyp(&inhom, &sl), "Z-stationarity");
    assert_eq!(hyp(&sl, &ProcessSpec::Lattice), "atomless weak process");
    assert_eq!(hyp(&sl4, &sl), "hitting-probability domination");
    let mixed = ProcessSpec::empty_mixture(ProcessSpec::poisson(3.0), 0.2);
    assert_eq!(hyp(&mixed, &ProcessSpec::poisson(0.1)), "finite waiting bound");
    let poi = ProcessSpec::poisson(1.0);
    assert_eq!(speedup_condition_scan(&poi, &poi, &grid, &cfg).unwrap(), None);
}
