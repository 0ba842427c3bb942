//! Smoothing kernels.

use std::f64::consts::PI;

/// A smoothing kernel `K` with `∫K = 1`, used through `K_ℓ = K(·/ℓ)/ℓ`.
pub trait SmoothingKernel: Send + Sync {
    fn evaluate(&self, u: f64) -> f64;

    /// `‖K‖₁`.
    fn l1_norm(&self) -> f64;

    /// `‖K‖₂`.
    fn l2_norm(&self) -> f64;

    /// Order of the kernel; `None` when unbounded.
    fn order(&self) -> Option<f64>;

    /// Bandwidth `s` with `K_ℓ ⋆ K_ℓ′ = K_s`, when such a rule exists.
    fn self_convolution(&self, _ell: f64, _ell_prime: f64) -> Option<f64> {
        None
    }

    /// Fourier transform `∫K(u)e^{−iωu}du` (real for symmetric kernels).
    fn fourier(&self, _omega: f64) -> Option<f64> {
        None
    }

    /// Beyond `|u| > tail_radius()`, `K(u)` is below `1e-17 · K(0)`.
    fn tail_radius(&self) -> f64;

    /// Beyond `|ω| > fourier_radius()`, the transform is below `1e-17`.
    fn fourier_radius(&self) -> Option<f64> {
        None
    }

    fn scaled(&self, ell: f64, u: f64) -> f64 {
        self.evaluate(u / ell) / ell
    }
}

/// The standard normal density.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Gaussian;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl SmoothingKernel for Gaussian {
    fn evaluate(&self, u: f64) -> f64 {
        INV_SQRT_2PI * (-0.5 * u * u).exp()
    }

    fn l1_norm(&self) -> f64 {
        1.0
    }

    /// `2^{−1/2} π^{−1/4}`.
    fn l2_norm(&self) -> f64 {
        std::f64::consts::FRAC_1_SQRT_2 * PI.powf(-0.25)
    }

    fn order(&self) -> Option<f64> {
        Some(2.0)
    }

    fn self_convolution(&self, ell: f64, ell_prime: f64) -> Option<f64> {
        Some(ell.hypot(ell_prime))
    }

    fn fourier(&self, omega: f64) -> Option<f64> {
        Some((-0.5 * omega * omega).exp())
    }

    fn tail_radius(&self) -> f64 {
        9.0
    }

    fn fourier_radius(&self) -> Option<f64> {
        Some(9.0)
    }
}

/// `K_ℓ ⋆ K_ℓ′` tabulated by quadrature, read back with cubic interpolation.
#[derive(Debug, Clone)]
pub struct ConvolvedKernel {
    half_width: f64,
    step: f64,
    table: Vec<f64>,
}

impl ConvolvedKernel {
    const TABLE_PER_WIDTH: f64 = 400.0;
    const PANELS: usize = 2000;

    pub fn by_quadrature(kernel: &dyn SmoothingKernel, ell: f64, ell_prime: f64) -> Self {
        let radius = kernel.tail_radius();
        // Integrate against the narrower kernel so the integrand stays resolved.
        let (narrow, wide) = if ell <= ell_prime { (ell, ell_prime) } else { (ell_prime, ell) };
        let half_width = radius * (narrow + wide);
        // The convolution is at least as wide as the wider factor.
        let step = wide / Self::TABLE_PER_WIDTH;
        let n = (2.0 * half_width / step).ceil() as usize + 1;
        let step = 2.0 * half_width / (n - 1) as f64;
        let a = -radius * narrow;
        let h = 2.0 * radius * narrow / Self::PANELS as f64;
        let table = (0..n)
            .map(|i| {
                let u = -half_width + i as f64 * step;
                simpson(|v| kernel.scaled(wide, u - v) * kernel.scaled(narrow, v), a, h, Self::PANELS)
            })
            .collect();
        Self { half_width, step, table }
    }

    pub fn evaluate(&self, u: f64) -> f64 {
        if u.abs() >= self.half_width {
            return 0.0;
        }
        let pos = (u + self.half_width) / self.step;
        let i = pos.floor() as usize;
        let t = pos - i as f64;
        let at = |k: isize| -> f64 {
            if k < 0 || k as usize >= self.table.len() {
                0.0
            } else {
                self.table[k as usize]
            }
        };
        let i = i as isize;
        let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
        // Catmull–Rom spline.
        p1 + 0.5
            * t
            * (p2 - p0 + t * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + t * (3.0 * (p1 - p2) + p3 - p0)))
    }
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, h: f64, panels: usize) -> f64 {
    let mut s = f(a) + f(a + panels as f64 * h);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}
