mod common;

use bwdm::geometry::{
    coordinatewise_median, objective, spatial_median_of, spatial_median_traced, DESCENT_SLACK,
};
use bwdm::{spatial_median, univariate_median, DataMatrix, WeiszfeldOptions};
use common::*;
use proptest::prelude::*;
use rand::Rng;

/// Frozen from an independent Nelder–Mead run (scipy, xatol 1e-13) refined
/// by dense-grid bisection: minimum of Σ‖y − x_i‖ ≈ 3.162512412154407 at
/// (0.5448114, 0.2633213).
const TEN_POINTS: [[f64; 2]; 10] = [
    [0.874973, 0.148891],
    [0.508584, 0.147593],
    [0.049826, 0.078931],
    [0.192589, 0.435302],
    [0.566328, 0.330943],
    [0.483089, 0.865879],
    [0.845597, 0.158951],
    [0.593027, 0.202142],
    [0.602815, 0.53484],
    [0.214559, 0.002149],
];
const TEN_POINTS_MIN: f64 = 3.162512412154407;

#[test]
fn ten_uniform_points_match_frozen_oracle() {
    let data = DataMatrix::from_rows(TEN_POINTS.iter().map(|p| p.to_vec()).collect()).unwrap();
    let res = spatial_median(&data, WeiszfeldOptions::default()).unwrap();
    assert!(res.converged);
    assert!((res.objective - TEN_POINTS_MIN).abs() < 1e-5, "{}", res.objective);
    assert!(dist(res.median.coords(), &[0.5448114, 0.2633213]) < 1e-5);

    let rows: Vec<Vec<f64>> = TEN_POINTS.iter().map(|p| p.to_vec()).collect();
    let oracle = brute_force_median_objective(&rows);
    assert!((oracle - TEN_POINTS_MIN).abs() < 1e-9);
}

#[test]
fn objective_reports_sum_of_distances() {
    let mut r = rng(5);
    let data = random_data(&mut r, 12, 3, 4.0);
    let res = spatial_median(&data, WeiszfeldOptions::default()).unwrap();
    let direct: f64 = data.rows().map(|x| dist(x, res.median.coords())).sum();
    assert!((res.objective - direct).abs() <= 1e-12 * direct);
}

#[test]
fn outlier_moves_median_less_than_cloud_diameter() {
    let cloud: Vec<Vec<f64>> = (0..9)
        .map(|i| vec![(i % 3) as f64 * 0.5, (i / 3) as f64 * 0.5])
        .collect();
    let diameter = cloud
        .iter()
        .flat_map(|a| cloud.iter().map(move |b| dist(a, b)))
        .fold(0.0, f64::max);
    let mut dirty = cloud.clone();
    dirty[4] = vec![1e6, 0.0];

    let clean = DataMatrix::from_rows(cloud).unwrap();
    let dirty = DataMatrix::from_rows(dirty).unwrap();
    let m0 = spatial_median(&clean, WeiszfeldOptions::default()).unwrap().median;
    let m1 = spatial_median(&dirty, WeiszfeldOptions::default()).unwrap().median;
    assert!(dist(m0.coords(), m1.coords()) < diameter);
    assert!(dist(&clean.column_means(), &dirty.column_means()) > diameter);
}

#[test]
fn cross_shaped_data_with_centre_point() {
    // The centre point is the minimiser; the solver must recognise it.
    let rows: Vec<&[f64]> = vec![&[0.0, 0.0], &[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]];
    let res = spatial_median_of(&rows, Some(&[0.3, 0.2]), WeiszfeldOptions::default()).unwrap();
    assert!(dist(res.median.coords(), &[0.0, 0.0]) < 1e-8);
    assert!((res.objective - 4.0).abs() < 1e-8);
}

fn cloud(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_d).prop_flat_map(move |d| prop::collection::vec(prop::collection::vec(-10.0..10.0f64, d), 1..=max_n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn no_data_point_or_mean_beats_the_median(rows in cloud(15, 3)) {
        let data = DataMatrix::from_rows(rows.clone()).unwrap();
        let res = spatial_median(&data, WeiszfeldOptions::default()).unwrap();
        let slack = 1e-9 * (1.0 + res.objective);
        for x in &rows {
            prop_assert!(res.objective <= sum_dist(&rows, x) + slack);
        }
        prop_assert!(res.objective <= sum_dist(&rows, &data.column_means()) + slack);
    }

    #[test]
    fn objective_never_increases(rows in cloud(15, 3), start in prop::collection::vec(-20.0..20.0f64, 3)) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let d = rows[0].len();
        let mut trace = Vec::new();
        spatial_median_traced(&refs, Some(&start[..d]), WeiszfeldOptions::default(), |f| trace.push(f)).unwrap();
        for w in trace.windows(2) {
            prop_assert!(w[1] <= w[0] + DESCENT_SLACK * w[0], "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn one_dimensional_agrees_with_univariate(xs in prop::collection::vec(-50.0..50.0f64, 1..20)) {
        let data = DataMatrix::from_rows(xs.iter().map(|&x| vec![x]).collect()).unwrap();
        let res = spatial_median(&data, WeiszfeldOptions::default()).unwrap();
        let m = univariate_median(&xs).unwrap();
        let f_uni: f64 = xs.iter().map(|x| (x - m).abs()).sum();
        prop_assert!((res.objective - f_uni).abs() <= 1e-9 * (1.0 + f_uni));
    }

    #[test]
    fn orthogonal_equivariance(seed in any::<u64>(), n in 3usize..15, d in 2usize..4) {
        let mut r = rng(seed);
        let data = random_data(&mut r, n, d, 5.0);
        let q = random_orthogonal(d, &mut r);
        let b: Vec<f64> = (0..d).map(|_| r.random_range(-100.0..100.0)).collect();
        let moved = transform(&data, 1.0, &q, &b);
        let opts = WeiszfeldOptions::default();
        let m = spatial_median(&data, opts).unwrap().median;
        let m_moved = spatial_median(&moved, opts).unwrap().median;
        let expected = apply_similarity(m.coords(), 1.0, &q, &b);
        prop_assert!(dist(&expected, m_moved.coords()) < 1e-8, "{:?} vs {:?}", expected, m_moved);
    }

    #[test]
    fn unique_limit_from_different_starts(seed in any::<u64>(), n in 3usize..15, d in 2usize..4) {
        let mut r = rng(seed);
        let data = random_data(&mut r, n, d, 5.0);
        let rows: Vec<&[f64]> = data.rows().collect();
        let opts = WeiszfeldOptions::default();
        let a = spatial_median_of(&rows, None, opts).unwrap();
        let far: Vec<f64> = (0..d).map(|_| r.random_range(-50.0..50.0)).collect();
        let b = spatial_median_of(&rows, Some(&far), opts).unwrap();
        prop_assert!(a.converged && b.converged);
        let scale = 1.0 + a.median.coords().iter().map(|v| v * v).sum::<f64>().sqrt();
        prop_assert!(dist(a.median.coords(), b.median.coords()) <= 10.0 * opts.tol * scale,
            "{:?} vs {:?}", a.median, b.median);
    }

    #[test]
    fn coordinatewise_start_is_columnwise_median(rows in cloud(9, 3)) {
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let start = coordinatewise_median(&refs).unwrap();
        for (j, &s) in start.iter().enumerate() {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            prop_assert_eq!(s, univariate_median(&col).unwrap());
        }
        prop_assert!(objective(refs.iter().copied(), &start).is_finite());
    }
}
