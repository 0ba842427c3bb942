use divkernel::estimate::{
    double_kde, double_kde_quadrature, kde, relative_error, symmetrize, symmetrize_values, GridFunction, Sample,
};
use divkernel::grid::EvaluationGrid;
use divkernel::kernel::{Gaussian, SmoothingKernel};
use divkernel::mle::{beta_mle, beta_score};
use divkernel::model::DivisionKernelModel;
use divkernel::rng::seeded;
use divkernel::select::{cv_select, gl_select, oracle_select, BandwidthGrid};
use proptest::prelude::*;

fn beta_sample(n: usize, seed: u64) -> Sample {
    let model = DivisionKernelModel::Beta { a: 2.0 };
    let mut rng = seeded(seed);
    Sample::new((0..n).map(|_| model.sample(&mut rng)).collect()).unwrap()
}

#[test]
fn estimates_keep_unit_mass() {
    let grid = EvaluationGrid::default();
    let s = beta_sample(2000, 1);
    for ell in [0.01, 0.03, 0.05, 0.1, 0.15] {
        let m = kde(&s, &Gaussian, ell, &grid).unwrap().mass();
        assert!((m - 1.0).abs() < 1e-3, "ell={ell}: {m}");
    }
}

#[test]
fn closed_form_double_estimate_matches_quadrature() {
    let s = beta_sample(40, 2);
    let grid = EvaluationGrid::new(-0.5, 1.5, 401).unwrap();
    let h = BandwidthGrid::reciprocal(6).unwrap();
    for &l in h.values() {
        for &lp in h.values() {
            let a = double_kde(&s, &Gaussian, l, lp, &grid).unwrap();
            let b = double_kde_quadrature(&s, &Gaussian, l, lp, &grid).unwrap();
            let sup = a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(sup < 1e-6, "({l}, {lp}): {sup}");
        }
    }
}

#[test]
fn gl_bias_proxy_is_nonnegative() {
    let s = beta_sample(10_000, 3);
    let grid = EvaluationGrid::default();
    let h = BandwidthGrid::for_sample_size(s.len(), 0.05, 128).unwrap();
    let est = gl_select(&s, &Gaussian, &h, -0.68, &grid).unwrap();
    assert_eq!(est.diagnostics.rows.len(), h.len());
    for row in &est.diagnostics.rows {
        assert!(row.a.unwrap() >= 0.0);
        assert!(row.objective.is_finite() && row.objective > 0.0);
    }
    assert!(h.values().contains(&est.bandwidth));
}

#[test]
fn gl_on_singleton_grid_is_trivial() {
    let s = beta_sample(300, 4);
    let h = BandwidthGrid::from_values(vec![0.07]).unwrap();
    let est = gl_select(&s, &Gaussian, &h, -0.68, &EvaluationGrid::default()).unwrap();
    assert_eq!(est.bandwidth, 0.07);
    assert_eq!(est.diagnostics.rows[0].a, Some(0.0));
}

#[test]
fn symmetrize_is_idempotent_and_keeps_mass() {
    let grid = EvaluationGrid::default();
    let est = kde(&beta_sample(500, 5), &Gaussian, 0.04, &grid).unwrap();
    let once = symmetrize(&est).unwrap();
    let twice = symmetrize(&once).unwrap();
    assert_eq!(once.values, twice.values);
    assert!((once.mass() - est.mass()).abs() < 1e-14);
}

/// `(K_ℓ ⋆ h)(x)` for the Beta(2, 2) density, by Simpson's rule.
fn smoothed_truth(ell: f64, x: f64) -> f64 {
    let n = 4000;
    let step = 1.0 / n as f64;
    let f = |y: f64| Gaussian.scaled(ell, x - y) * 6.0 * y * (1.0 - y);
    let inner: f64 = (1..n).map(|k| f(k as f64 * step) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(0.0) + f(1.0) + inner) * step / 3.0
}

#[test]
fn variance_and_bias_structure() {
    let grid = EvaluationGrid::new(-0.5, 1.5, 1001).unwrap();
    let (n, ell) = (200, 0.05);
    let target = grid.tabulate(|x| smoothed_truth(ell, x));
    let bound = Gaussian.l2_norm().powi(2) / (n as f64 * ell);
    for replicates in [100, 400] {
        let fits: Vec<Vec<f64>> =
            (0..replicates).map(|r| kde(&beta_sample(n, 1000 + r as u64), &Gaussian, ell, &grid).unwrap().values).collect();
        let avg: Vec<f64> =
            (0..grid.n_points).map(|k| fits.iter().map(|f| f[k]).sum::<f64>() / replicates as f64).collect();
        let var: Vec<f64> = (0..grid.n_points)
            .map(|k| fits.iter().map(|f| (f[k] - avg[k]).powi(2)).sum::<f64>() / (replicates - 1) as f64)
            .collect();
        let integrated = grid.integrate(&var);
        assert!(integrated <= bound * 1.05, "R={replicates}: {integrated} > {bound}");
        let gap = grid.squared_distance(&avg, &target).sqrt();
        assert!(gap < 3.0 * (bound / replicates as f64).sqrt(), "R={replicates}: gap {gap}");
    }
}

#[test]
fn beta_mle_zeroes_the_score() {
    let s = beta_sample(5000, 6);
    let fit = beta_mle(&s).unwrap();
    assert!(beta_score(&s, fit.a).abs() < 1e-8);
    assert!((fit.a - 2.0).abs() < 0.2);
}

#[test]
fn cross_validation_is_near_the_oracle() {
    let s = beta_sample(10_000, 7);
    let grid = EvaluationGrid::default();
    let truth = GridFunction::from_model(&DivisionKernelModel::Beta { a: 2.0 }, grid);
    let h = BandwidthGrid::for_sample_size(s.len(), 0.05, 128).unwrap();
    let cv = relative_error(&cv_select(&s, &Gaussian, &h, &grid).unwrap(), &truth).unwrap();
    let oracle = relative_error(&oracle_select(&s, &Gaussian, &h, &grid, &truth).unwrap(), &truth).unwrap();
    assert!(oracle <= cv && cv <= 2.0 * oracle, "cv {cv}, oracle {oracle}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gl_ignores_sample_order(seed in 0u64..1000, n in 40usize..400, rot in 1usize..39) {
        let s = beta_sample(n, seed);
        let mut v = s.values().to_vec();
        v.rotate_left(rot);
        v.swap(0, n / 2);
        let grid = EvaluationGrid::new(-0.5, 1.5, 801).unwrap();
        let h = BandwidthGrid::for_sample_size(n, 0.1, 32).unwrap();
        let a = gl_select(&s, &Gaussian, &h, -0.68, &grid).unwrap();
        let b = gl_select(&Sample::new(v).unwrap(), &Gaussian, &h, -0.68, &grid).unwrap();
        prop_assert_eq!(a.bandwidth, b.bandwidth);
    }

    #[test]
    fn symmetrize_values_idempotent(values in prop::collection::vec(-5.0f64..5.0, 101)) {
        let grid = EvaluationGrid::new(-0.5, 1.5, 101).unwrap();
        let once = symmetrize_values(&grid, &values).unwrap();
        let twice = symmetrize_values(&grid, &once).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert!((grid.integrate(&once) - grid.integrate(&values)).abs() < 1e-12);
    }
}
