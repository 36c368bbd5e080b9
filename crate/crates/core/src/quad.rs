//! Quadrature helpers on uniform grids.

use num_complex::Complex64;

/// Composite Simpson weights for `n + 1` uniform points (`n` even), scaled
/// so that `Σ w_i f_i ≈ (1/L)∫ f` over the grid length `L`.
pub fn simpson_mean_weights(n: usize) -> Vec<f64> {
    assert!(n >= 2 && n % 2 == 0, "Simpson needs an even number of intervals, got {n}");
    let scale = 1.0 / (3.0 * n as f64);
    (0..=n)
        .map(|i| {
            let w = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            w * scale
        })
        .collect()
}

/// Mean of `f` over `[0, L]` from `n + 1` uniform samples.
pub fn simpson_mean(samples: &[Complex64]) -> Complex64 {
    let w = simpson_mean_weights(samples.len() - 1);
    samples.iter().zip(&w).map(|(f, w)| f * w).sum()
}

/// Fourier coefficient `(1/T)∫₀ᵀ f(τ) e^{−ikδωτ} dτ` of one uniformly
/// sampled period (`n + 1` points, both endpoints included).
pub fn fourier_coefficient(samples: &[Complex64], k: i32) -> Complex64 {
    let n = samples.len() - 1;
    let w = simpson_mean_weights(n);
    let step = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
    samples.iter().zip(&w).enumerate().map(|(i, (f, w))| f * Complex64::from_polar(*w, step * i as f64)).sum()
}
