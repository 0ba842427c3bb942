//! Simulated population sizes against their exact law.

use divkernel::analytics::{inv_nt_expectation, nt_mean, PopulationLaw};
use divkernel::experiments::population_check;
use divkernel::model::DivisionKernelModel;
use divkernel::rng::{stream, StreamId};
use divkernel::sim::{simulate_with_rng, SimConfig};
use divkernel::stats::{mean, standard_error};

fn beta22() -> DivisionKernelModel {
    DivisionKernelModel::Beta { a: 2.0 }
}

#[test]
fn sizes_follow_negative_binomial() {
    for n0 in [1, 2] {
        for rt in [0.5, 1.0] {
            let check = population_check(n0, 1.0, rt, 10_000, 11 + u64::from(n0)).unwrap();
            assert!(check.p_value > 1e-3, "n0={n0} RT={rt}: p={}", check.p_value);
            assert!(check.mean_z().abs() < 3.0, "n0={n0} RT={rt}: z={}", check.mean_z());
            assert!(check.inverse_z().abs() < 3.0, "n0={n0} RT={rt}: z={}", check.inverse_z());
        }
    }
}

#[test]
fn inverse_size_matches_simulation() {
    for n0 in [1, 2, 5] {
        for rt in [0.5, 1.0, 2.0] {
            let check = population_check(n0, 0.5, 2.0 * rt, 100_000, 5).unwrap();
            assert!(check.inverse_z().abs() < 3.0, "n0={n0} RT={rt}: z={}", check.inverse_z());
        }
    }
}

#[test]
fn inverse_size_respects_bounds_on_a_grid() {
    let mut count = 0;
    for n0 in [2u32, 3, 5, 10] {
        for (r, t) in [(0.1, 0.5), (0.5, 1.0), (1.0, 1.0), (0.5, 6.0), (0.5, 13.0)] {
            let law = PopulationLaw::new(n0, r, t).unwrap();
            let v = inv_nt_expectation(&law).unwrap();
            let p = law.p();
            assert!(v >= p / f64::from(n0) && v <= p / f64::from(n0 - 1), "n0={n0} R={r} T={t}: {v}");
            count += 1;
        }
    }
    assert_eq!(count, 20);
}

#[test]
fn mean_size_at_t13() {
    let sim = SimConfig::new(1, 0.5, 0.35, 13.0, beta22(), 0);
    let sizes: Vec<f64> = (0..10_000)
        .map(|r| {
            let mut rng = stream(77, StreamId::new(0, r, 0));
            simulate_with_rng(&sim, &mut rng).unwrap().final_size() as f64
        })
        .collect();
    let exact = nt_mean(&PopulationLaw::new(1, 0.5, 13.0).unwrap());
    assert!((exact - 665.141_633).abs() < 1e-5);
    let z = (mean(&sizes) - exact) / standard_error(&sizes);
    assert!(z.abs() < 3.0, "z={z}");
}

#[test]
fn waiting_times_are_exponential_in_population_size() {
    // Scaled gaps R·n·(t_{k+1} − t_k) are Exp(1). T = 8 leaves the first three
    // gaps uncensored except with probability of order 1e-3.
    let rate = 1.0;
    let sim = SimConfig::new(1, rate, 0.0, 8.0, beta22(), 0);
    let mut scaled = vec![Vec::new(); 3];
    for r in 0..10_000 {
        let mut rng = stream(3, StreamId::new(0, r, 0));
        let traj = simulate_with_rng(&sim, &mut rng).unwrap();
        let mut last = 0.0;
        for (k, rec) in traj.records.iter().take(3).enumerate() {
            scaled[k].push(rate * (k + 1) as f64 * (rec.time - last));
            last = rec.time;
        }
    }
    for (k, gaps) in scaled.iter().enumerate() {
        let z = (mean(gaps) - 1.0) / standard_error(gaps);
        assert!(z.abs() < 3.0, "gap {k}: z={z}");
    }
}

#[test]
fn fractions_are_independent_of_division_count() {
    let sim = SimConfig::new(1, 1.0, 0.35, 3.0, beta22(), 0);
    let mut counts = Vec::new();
    let mut means = Vec::new();
    for r in 0..4000 {
        let mut rng = stream(9, StreamId::new(0, r, 0));
        let g = simulate_with_rng(&sim, &mut rng).unwrap().gammas();
        if !g.is_empty() {
            counts.push(g.len() as f64);
            means.push(mean(&g));
        }
    }
    let (mc, mm) = (mean(&counts), mean(&means));
    let cov: f64 = counts.iter().zip(&means).map(|(c, m)| (c - mc) * (m - mm)).sum::<f64>();
    let sc = counts.iter().map(|c| (c - mc).powi(2)).sum::<f64>().sqrt();
    let sm = means.iter().map(|m| (m - mm).powi(2)).sum::<f64>().sqrt();
    let corr = cov / (sc * sm);
    let se = 1.0 / (counts.len() as f64).sqrt();
    assert!(corr.abs() < 3.0 * se, "corr={corr}");
}

#[test]
fn division_count_is_population_growth() {
    let sim = SimConfig::new(3, 0.7, 0.35, 4.0, beta22(), 0);
    for r in 0..200 {
        let mut rng = stream(1, StreamId::new(0, r, 0));
        let traj = simulate_with_rng(&sim, &mut rng).unwrap();
        assert_eq!(traj.divisions(), traj.final_size() - 3);
        for rec in &traj.records {
            let (a, b) = rec.daughters();
            assert!((a + b - rec.parent_toxicity).abs() <= f64::EPSILON * rec.parent_toxicity);
        }
    }
}
