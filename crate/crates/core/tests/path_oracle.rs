use fcp_core::engine::{edge_id, EdgeEnvironment, Region, Vertex};
use fcp_core::path_oracle::*;
use fcp_core::point_process::{EdgeId, ProcessSpec};
use fcp_core::Error;
use proptest::prelude::*;

fn edge_between(a: &[i64], b: &[i64]) -> EdgeId {
    let axis = a.iter().zip(b).position(|(x, y)| x != y).unwrap();
    let lower = if a[axis] < b[axis] { a } else { b };
    edge_id(lower, axis)
}

fn neighbours(region: &Region, v: &[i64]) -> Vec<Vertex> {
    let mut out = Vec::new();
    for axis in 0..v.len() {
        for step in [-1, 1] {
            let mut w = v.to_vec();
            w[axis] += step;
            if region.contains(&w) {
                out.push(w);
            }
        }
    }
    out
}

// Counts every (path, index tuple) pair by explicit enumeration.
fn brute_force(env: &EdgeEnvironment, x: &[i64], y: &[i64], t: f64) -> u64 {
    fn assignments(pats: &[Vec<f64>], from: f64) -> u64 {
        match pats.split_first() {
            None => 1,
            Some((first, rest)) => first.iter().filter(|&&p| p >= from).map(|&p| assignments(rest, p)).sum(),
        }
    }
    fn walk(env: &EdgeEnvironment, path: &mut Vec<Vertex>, y: &[i64], t: f64, total: &mut u64) {
        let v = path.last().unwrap().clone();
        if v == y {
            let pats: Vec<Vec<f64>> =
                path.windows(2).map(|w| env.edge_pattern(edge_between(&w[0], &w[1]), 0.0, t).unwrap().times).collect();
            *total += assignments(&pats, 0.0);
            return;
        }
        for w in neighbours(&env.region, &v) {
            if !path.contains(&w) {
                path.push(w);
                walk(env, path, y, t, total);
                path.pop();
            }
        }
    }
    if x == y {
        return 1;
    }
    let mut total = 0;
    walk(env, &mut vec![x.to_vec()], y, t, &mut total);
    total
}

fn small_regions() -> Vec<Region> {
    vec![
        Region::HalfLine { vertices: Some(5) },
        Region::Box { lo: vec![0, 0], hi: vec![2, 1] },
        Region::Box { lo: vec![-2], hi: vec![2] },
    ]
}

fn specs() -> Vec<ProcessSpec> {
    vec![
        ProcessSpec::StationarizedLattice,
        ProcessSpec::PerturbedLattice,
        ProcessSpec::poisson(1.5),
        ProcessSpec::scaled(ProcessSpec::StationarizedLattice, 0.5),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(150))]

    #[test]
    fn dp_count_matches_brute_force(
        seed in any::<u64>(), r in 0usize..3, s in 0usize..4, target in 0usize..6, t in 0.1f64..3.5,
    ) {
        let region = small_regions()[r].clone();
        let env = EdgeEnvironment::new(region.clone(), specs()[s].clone(), seed);
        let targets: Vec<Vertex> = match r {
            0 => (0..5).map(|x| vec![x]).collect(),
            1 => vec![vec![0, 0], vec![1, 0], vec![2, 0], vec![0, 1], vec![1, 1], vec![2, 1]],
            _ => (-2..=2).map(|x| vec![x]).collect(),
        };
        let y = &targets[target % targets.len()];
        let x = region.origin();
        let lim = OracleLimits::default();
        let dp = count_paths(&env, &x, y, t, &lim).unwrap().count;
        prop_assert_eq!(dp, brute_force(&env, &x, y, t));
        prop_assert_eq!(reach_indicator(&env, &x, y, t, &lim).unwrap(), dp > 0);
        let n = exact_subdivision(&env, &x, y, t, &lim).unwrap();
        prop_assert_eq!(count_paths_discretized(&env, &x, y, t, n, &lim).unwrap(), dp);
        prop_assert_eq!(count_paths_discretized(&env, &x, y, t, 3 * n + 1, &lim).unwrap(), dp);
    }

    #[test]
    fn counts_grow_with_time(seed in any::<u64>(), t1 in 0.0f64..3.0, t2 in 0.0f64..3.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let env = EdgeEnvironment::new(Region::Box { lo: vec![0, 0], hi: vec![2, 1] }, ProcessSpec::poisson(1.0), seed);
        let lim = OracleLimits::default();
        let a = count_paths(&env, &[0, 0], &[2, 1], lo, &lim).unwrap().count;
        let b = count_paths(&env, &[0, 0], &[2, 1], hi, &lim).unwrap().count;
        prop_assert!(a <= b);
    }
}

#[test]
fn lattice_counts_on_a_line() {
    let env = EdgeEnvironment::new(Region::Box { lo: vec![-3], hi: vec![3] }, ProcessSpec::Lattice, 0);
    let lim = OracleLimits::default();
    assert_eq!(count_paths(&env, &[0], &[0], 2.5, &lim).unwrap().count, 1);
    assert_eq!(count_paths(&env, &[0], &[1], 2.5, &lim).unwrap().count, 3);
    assert_eq!(count_paths(&env, &[0], &[2], 2.5, &lim).unwrap().count, 6);
    assert_eq!(count_paths(&env, &[0], &[-3], 2.5, &lim).unwrap().count, 10);
}

#[test]
fn witnesses_are_distinct_permitted_paths() {
    for seed in 0..40 {
        let env = EdgeEnvironment::new(Region::Box { lo: vec![0, 0], hi: vec![1, 1] }, ProcessSpec::poisson(2.0), seed);
        let lim = OracleLimits::default();
        let pc = count_paths_with_witnesses(&env, &[0, 0], &[1, 1], 2.0, &lim).unwrap();
        let ws = pc.witnesses.unwrap();
        assert_eq!(ws.len() as u64, pc.count);
        for w in &ws {
            assert!(w.is_permitted(&env, 2.0));
            assert_eq!(w.vertices.last().unwrap(), &vec![1, 1]);
        }
        for (i, a) in ws.iter().enumerate() {
            assert!(ws[i + 1..].iter().all(|b| b != a));
        }
    }
}

#[test]
fn discretized_sum_stabilises_from_the_exact_subdivision() {
    let lim = OracleLimits::default();
    for seed in 0..20 {
        let env = EdgeEnvironment::new(Region::HalfLine { vertices: Some(4) }, ProcessSpec::poisson(2.0), seed);
        let direct = count_paths(&env, &[0], &[3], 2.0, &lim).unwrap().count;
        let n0 = exact_subdivision(&env, &[0], &[3], 2.0, &lim).unwrap();
        for n in n0..n0 + 25 {
            assert_eq!(count_paths_discretized(&env, &[0], &[3], 2.0, n, &lim).unwrap(), direct);
        }
    }
}

#[test]
fn limits_and_domain_errors() {
    let env = EdgeEnvironment::new(Region::half_line(), ProcessSpec::poisson(50.0), 1);
    let tight = OracleLimits { max_points_per_edge: 4, ..OracleLimits::default() };
    assert!(matches!(count_paths(&env, &[0], &[2], 5.0, &tight), Err(Error::Budget { .. })));
    let lim = OracleLimits::default();
    assert!(matches!(count_paths_discretized(&env, &[0], &[1], 1.0, 0, &lim), Err(Error::Domain(_))));
    let tiny_work = OracleLimits { max_work: 10, ..OracleLimits::default() };
    let grid = EdgeEnvironment::new(Region::centered(2, 3), ProcessSpec::Lattice, 1);
    assert!(matches!(count_paths(&grid, &[0, 0], &[3, 3], 8.0, &tiny_work), Err(Error::Budget { .. })));
}
