use fcp_core::point_process::*;
use fcp_core::Error;
use proptest::prelude::*;

fn shipped() -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::Lattice,
        ProcessSpec::StationarizedLattice,
        ProcessSpec::PerturbedLattice,
        ProcessSpec::StationarizedPerturbedLattice,
        ProcessSpec::poisson(1.0),
        ProcessSpec::poisson(2.5),
        ProcessSpec::inhom_poisson(IntensityId::OnePlusInverseShift),
        ProcessSpec::thinned(ProcessSpec::PerturbedLattice, 0.4),
        ProcessSpec::shifted(ProcessSpec::thinned(ProcessSpec::Lattice, 0.5), vec![0.0, 0.5]),
        ProcessSpec::scaled(ProcessSpec::StationarizedLattice, 4.0),
        ProcessSpec::empty_mixture(ProcessSpec::poisson(1.0), 0.3),
    ]
}

fn spec_strategy() -> impl Strategy<Value = ProcessSpec> {
    (0..shipped().len()).prop_map(|i| shipped()[i].clone())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn patterns_are_sorted_and_inside_the_window(
        spec in spec_strategy(), seed in any::<u64>(), edge in any::<u64>(),
        w0 in -50.0f64..50.0, len in 0.01f64..20.0,
    ) {
        let p = sample_pattern(&spec, seed, EdgeId(edge), w0, w0 + len).unwrap();
        prop_assert!(p.is_well_formed());
        prop_assert!(p.times.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(p.times.iter().all(|&x| w0 <= x && x < w0 + len));
    }

    #[test]
    fn split_windows_agree_with_the_whole(
        spec in spec_strategy(), seed in any::<u64>(), edge in any::<u64>(),
        w0 in -20.0f64..20.0, l1 in 0.01f64..6.0, l2 in 0.01f64..6.0,
    ) {
        let mid = w0 + l1;
        let end = mid + l2;
        let whole = sample_pattern(&spec, seed, EdgeId(edge), w0, end).unwrap();
        let mut parts = sample_pattern(&spec, seed, EdgeId(edge), w0, mid).unwrap().times;
        parts.extend(sample_pattern(&spec, seed, EdgeId(edge), mid, end).unwrap().times);
        prop_assert_eq!(whole.times, parts);
    }

    #[test]
    fn next_meeting_is_the_first_point(
        spec in spec_strategy(), seed in any::<u64>(), edge in any::<u64>(), s in -10.0f64..10.0,
    ) {
        let key = EdgeKey::new(seed, EdgeId(edge));
        let p = sample_pattern(&spec, seed, EdgeId(edge), s, s + 40.0).unwrap();
        let m = next_meeting(&spec, &key, s, Some(s + 40.0));
        prop_assert_eq!(m, p.times.first().copied());
    }

    #[test]
    fn hitting_is_monotone_in_length(
        spec in spec_strategy(), a in -5.0f64..5.0, t1 in 0.0f64..3.0, t2 in 0.0f64..3.0,
    ) {
        prop_assume!(has_closed_form(&spec));
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let f1 = hitting_prob(&spec, a, lo).unwrap().value;
        let f2 = hitting_prob(&spec, a, hi).unwrap().value;
        prop_assert!(f1 <= f2 + 1e-15);
        prop_assert!((0.0..=1.0).contains(&f1));
    }

    #[test]
    fn quantile_inverts_hitting(spec in spec_strategy(), a in -5.0f64..5.0, u in 0.0f64..0.99) {
        prop_assume!(has_closed_form(&spec));
        match quantile(&spec, a, u) {
            Ok(g) => {
                prop_assert!(g >= 0.0);
                prop_assert!(hitting_prob(&spec, a, g).unwrap().value >= u - 1e-12);
                if g > 1e-9 {
                    let below = hitting_prob(&spec, a, g * (1.0 - 1e-9)).unwrap().value;
                    prop_assert!(below <= u + 1e-9);
                }
            }
            Err(Error::UnreachableQuantile { sup, .. }) => prop_assert!(sup < u),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }
}

#[test]
fn closed_forms_match_simulation() {
    let specs = [
        ProcessSpec::PerturbedLattice,
        ProcessSpec::StationarizedPerturbedLattice,
        ProcessSpec::thinned(ProcessSpec::StationarizedLattice, 0.3),
        ProcessSpec::thinned(ProcessSpec::PerturbedLattice, 0.6),
        ProcessSpec::inhom_poisson(IntensityId::OnePlusInverseShift),
        ProcessSpec::shifted(ProcessSpec::thinned(ProcessSpec::Lattice, 0.5), vec![0.0, 0.5]),
        ProcessSpec::empty_mixture(ProcessSpec::StationarizedPerturbedLattice, 0.2),
    ];
    let replicas = 40_000u64;
    for spec in &specs {
        for &(a, t) in &[(0.3, 0.4), (-0.7, 1.1), (2.25, 0.5), (0.0, 1.7)] {
            let exact = hitting_prob(spec, a, t).unwrap();
            assert_eq!(exact.method, Method::Analytic);
            let hits = (0..replicas)
                .filter(|&r| {
                    let key = EdgeKey::new(77, EdgeId(r));
                    next_meeting(spec, &key, a, Some((a + t).next_up())).is_some()
                })
                .count();
            let p = hits as f64 / replicas as f64;
            let se = (exact.value * (1.0 - exact.value) / replicas as f64).sqrt().max(1e-4);
            assert!(
                (p - exact.value).abs() < 5.0 * se,
                "{spec} on [{a}, {}]: simulated {p} vs closed form {}",
                a + t,
                exact.value
            );
        }
    }
}

#[test]
fn empirical_fallback_reports_error() {
    let spec = ProcessSpec::shifted(ProcessSpec::PerturbedLattice, vec![0.0, 0.3]);
    assert!(!has_closed_form(&spec));
    let cfg = EmpiricalConfig { replicas: 20_000, ..EmpiricalConfig::default() };
    let p = hitting_prob_with(&spec, 0.1, 0.2, &cfg).unwrap();
    assert_eq!(p.method, Method::Empirical);
    assert!(p.std_err > 0.0);
    // Each copy of PL hits [0.1, 0.3] w.p. 0.2, and the copies are dependent
    // through the shared cell uniforms, so the union lies in [0.2, 0.36].
    assert!(p.value > 0.2 - 5.0 * p.std_err && p.value < 0.36 + 5.0 * p.std_err);
    let g = quantile_with(&spec, 0.1, 0.5, &cfg).unwrap();
    assert!(g > 0.0 && g < 1.0);
}

#[test]
fn void_is_complement_of_hitting() {
    for spec in shipped() {
        if !has_closed_form(&spec) {
            continue;
        }
        for &(lo, hi) in &[(0.0, 0.5), (-1.2, 0.3), (3.0, 5.5)] {
            let v = void_prob(&spec, lo, hi).unwrap().value;
            let h = hitting_prob(&spec, lo, hi - lo).unwrap().value;
            assert_eq!(v, 1.0 - h, "{spec}");
        }
    }
}

#[test]
fn spec_round_trips_through_json() {
    for spec in shipped() {
        let json = serde_json::to_string(&spec).unwrap();
        let back: ProcessSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
    }
    assert!(serde_json::from_str::<ProcessSpec>(r#"{"kind":"poisson","rate":1.0,"extra":1}"#).is_err());
    let bad: ProcessSpec = serde_json::from_str(r#"{"kind":"poisson","rate":-1.0}"#).unwrap();
    assert!(matches!(bad.validate(), Err(Error::InvalidSpec(_))));
}

#[test]
fn perturbed_lattice_hitting_formula() {
    // [0.5, 1.25] meets cell 0 on a half and cell 1 on a quarter.
    let f = hitting_prob(&ProcessSpec::PerturbedLattice, 0.5, 0.75).unwrap().value;
    assert!((f - (1.0 - 0.5 * 0.75)).abs() < 1e-15);
    // Averaging over the common shift turns every unit window into a sure hit
    // only from length 2 on.
    let spl = ProcessSpec::StationarizedPerturbedLattice;
    assert!(hitting_prob(&spl, 0.3, 1.0).unwrap().value < 1.0);
    assert_eq!(hitting_prob(&spl, 0.3, 2.0).unwrap().value, 1.0);
    // P(hit in [0, 1]) for SPL: 1 - ∫_0^1 s(1-s) ds = 5/6.
    assert!((hitting_prob(&spl, 0.0, 1.0).unwrap().value - 5.0 / 6.0).abs() < 1e-14);
}
