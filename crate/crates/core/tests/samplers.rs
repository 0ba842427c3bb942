use divkernel::model::{DivisionKernelModel, TabulatedDensity};
use divkernel::rng::seeded;
use divkernel::stats::{ks_statistic, mean, standard_error};

fn draws(model: &DivisionKernelModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    (0..n).map(|_| model.sample(&mut rng)).collect()
}

/// Composite Simpson rule on [0, 1].
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let inner: f64 = (1..n).map(|k| f(k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 }).sum();
    (f(0.0) + f(1.0) + inner) * h / 3.0
}

#[test]
fn beta22_mean() {
    let x = draws(&DivisionKernelModel::Beta { a: 2.0 }, 1_000_000, 1);
    assert!((mean(&x) - 0.5).abs() < 3.0 * standard_error(&x));
    assert!(x.iter().all(|g| *g > 0.0 && *g < 1.0));
}

#[test]
fn mixture_mean_and_variance() {
    let model = DivisionKernelModel::symmetric_mixture();
    let x = draws(&model, 1_000_000, 2);
    assert!((mean(&x) - 0.5).abs() < 3.0 * standard_error(&x));
    let variance = simpson(|g| g * g * model.density(g), 20_000) - 0.25;
    // Closed form: 0.5·(E₁[γ²] + E₂[γ²]) − ¼ with Beta(2,6) and Beta(6,2).
    assert!((variance - (0.5 * (6.0 / 72.0 + 42.0 / 72.0) - 0.25)).abs() < 1e-10);
    let m = mean(&x);
    let sq: Vec<f64> = x.iter().map(|g| (g - m).powi(2)).collect();
    assert!((mean(&sq) - variance).abs() < 3.0 * standard_error(&sq), "{} vs {variance}", mean(&sq));
}

#[test]
fn tabulated_uniform_passes_ks() {
    let model = DivisionKernelModel::Tabulated(TabulatedDensity::new(vec![0.0, 0.5, 1.0], vec![1.0; 3]).unwrap());
    let n = 100_000;
    let x = draws(&model, n, 3);
    let d = ks_statistic(&x, |u| u.clamp(0.0, 1.0));
    assert!(d < 1.628 / (n as f64).sqrt(), "D={d}");
}
