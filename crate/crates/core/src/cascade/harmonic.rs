//! Periodic orbit of the moment system by harmonic balance.
//!
//! The system is affine with coefficients containing only `e^{0, ±iδωτ}`, so
//! the Fourier coefficients `X_k` of the periodic orbit satisfy the
//! block-tridiagonal system
//! `(A₀ − ikδω)X_k + A₊X_{k−1} + A₋X_{k+1} = −b_k`, solved by block elimination.

use std::f64::consts::PI;

use nalgebra::SMatrix;
use num_complex::Complex64;

use super::moments::{Rates, N_MOMENTS};
use super::CascadeError;
use crate::ode::{OdeError, Trajectory};
use crate::params::ValidatedParams;

type Block = SMatrix<Complex64, N_MOMENTS, N_MOMENTS>;
type Vector = SMatrix<Complex64, N_MOMENTS, 1>;

const MAX_HARMONIC: usize = 2048;
const RESIDUAL_POINTS: usize = 64;

/// Fourier series of the periodic steady state, `|k| ≤ kmax`.
#[derive(Debug, Clone)]
pub struct HarmonicSolution {
    pub delta_omega: f64,
    pub kmax: usize,
    coeffs: Vec<[Complex64; N_MOMENTS]>,
    /// Largest ODE residual `|ẋ − f(τ, x)|` over sample points of one period.
    pub residual: f64,
}

struct Decomposition {
    a: [Block; 3],
    b: [Vector; 3],
}

/// Splits the right-hand side into its `e^{−iφ}`, `1`, `e^{iφ}` parts.
fn decompose(rates: &Rates) -> Decomposition {
    let dw = rates.dw;
    let eval = |j: usize, x: &[Complex64; N_MOMENTS]| {
        let tau = 0.5 * PI * j as f64 / dw;
        let mut dx = [Complex64::new(0.0, 0.0); N_MOMENTS];
        rates.full(tau, x, &mut dx);
        dx
    };
    let zero = [Complex64::new(0.0, 0.0); N_MOMENTS];
    let f0: Vec<_> = (0..4).map(|j| eval(j, &zero)).collect();
    let project = |vals: &[[Complex64; N_MOMENTS]], m: i32, row: usize| -> Complex64 {
        (0..4).map(|j| vals[j][row] * Complex64::from_polar(1.0, -0.5 * PI * (m * j as i32) as f64)).sum::<Complex64>()
            / 4.0
    };
    let mut a = [Block::zeros(); 3];
    let mut b = [Vector::zeros(); 3];
    for (idx, m) in (-1..=1).enumerate() {
        b[idx] = Vector::from_fn(|row, _| project(&f0, m, row));
    }
    for col in 0..N_MOMENTS {
        let mut unit = zero;
        unit[col] = Complex64::new(1.0, 0.0);
        let fc: Vec<_> = (0..4)
            .map(|j| {
                let mut v = eval(j, &unit);
                for (x, z) in v.iter_mut().zip(&f0[j]) {
                    *x -= z;
                }
                v
            })
            .collect();
        for (idx, m) in (-1..=1).enumerate() {
            for row in 0..N_MOMENTS {
                a[idx][(row, col)] = project(&fc, m, row);
            }
        }
    }
    Decomposition { a, b }
}

/// Solves for the harmonics `|k| ≤ kmax`.
pub fn solve_harmonic(params: &ValidatedParams, kmax: usize) -> Result<HarmonicSolution, CascadeError> {
    params.require_period()?;
    let rates = Rates::new(params);
    let Decomposition { a, b } = decompose(&rates);
    let [a_minus, a_zero, a_plus] = a;
    let n = 2 * kmax + 1;
    let k_of = |i: usize| i as i64 - kmax as i64;
    let rhs = |i: usize| -> Vector {
        match k_of(i) {
            -1 => -b[0],
            0 => -b[1],
            1 => -b[2],
            _ => Vector::zeros(),
        }
    };
    let diag = |i: usize| -> Block {
        let mut d = a_zero;
        let shift = Complex64::new(0.0, k_of(i) as f64 * rates.dw);
        for j in 0..N_MOMENTS {
            d[(j, j)] -= shift;
        }
        d
    };
    let singular = || CascadeError::Ode(OdeError::NonFinite { t: f64::NAN });
    let mut g: Vec<Block> = Vec::with_capacity(n);
    let mut y: Vec<Vector> = Vec::with_capacity(n);
    for i in 0..n {
        let (denom, r) =
            if i == 0 { (diag(i), rhs(i)) } else { (diag(i) - a_plus * g[i - 1], rhs(i) - a_plus * y[i - 1]) };
        let lu = denom.lu();
        let gi = lu.solve(&a_minus).ok_or_else(singular)?;
        let yi = lu.solve(&r).ok_or_else(singular)?;
        g.push(gi);
        y.push(yi);
    }
    let mut x = vec![Vector::zeros(); n];
    x[n - 1] = y[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = y[i] - g[i] * x[i + 1];
    }
    let coeffs: Vec<[Complex64; N_MOMENTS]> = x
        .iter()
        .map(|v| {
            let mut out = [Complex64::new(0.0, 0.0); N_MOMENTS];
            out.copy_from_slice(v.as_slice());
            out
        })
        .collect();
    if coeffs.iter().flatten().any(|z| !z.is_finite()) {
        return Err(singular());
    }
    let mut sol = HarmonicSolution { delta_omega: rates.dw, kmax, coeffs, residual: 0.0 };
    sol.residual = sol.ode_residual(&rates);
    Ok(sol)
}

/// Doubles the truncation order until the outermost harmonics fall below
/// `tol` relative to the largest coefficient.
pub fn solve_harmonic_auto(params: &ValidatedParams, tol: f64) -> Result<HarmonicSolution, CascadeError> {
    let mut kmax = 16;
    loop {
        let sol = solve_harmonic(params, kmax)?;
        let scale = sol.coeffs.iter().flatten().map(|z| z.norm()).fold(1.0, f64::max);
        let k = kmax as i32;
        let edge = [-k, -k + 1, k - 1, k]
            .iter()
            .flat_map(|&k| sol.coefficients(k).iter().map(|z| z.norm()).collect::<Vec<_>>())
            .fold(0.0, f64::max);
        if edge <= tol * scale || kmax >= MAX_HARMONIC {
            log::debug!("harmonic balance: kmax {kmax}, tail {edge:e}, residual {:e}", sol.residual);
            return Ok(sol);
        }
        kmax *= 2;
    }
}

impl HarmonicSolution {
    /// All slots of harmonic `k`; zeros outside the truncation.
    pub fn coefficients(&self, k: i32) -> &[Complex64; N_MOMENTS] {
        const ZERO: [Complex64; N_MOMENTS] = [Complex64::new(0.0, 0.0); N_MOMENTS];
        let idx = k as i64 + self.kmax as i64;
        if idx < 0 || idx as usize >= self.coeffs.len() {
            &ZERO
        } else {
            &self.coeffs[idx as usize]
        }
    }

    pub fn coefficient(&self, k: i32, slot: usize) -> Complex64 {
        self.coefficients(k)[slot]
    }

    fn eval(&self, tau: f64) -> ([Complex64; N_MOMENTS], [Complex64; N_MOMENTS]) {
        let mut x = [Complex64::new(0.0, 0.0); N_MOMENTS];
        let mut dx = x;
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = i as f64 - self.kmax as f64;
            let e = Complex64::from_polar(1.0, k * self.delta_omega * tau);
            let de = Complex64::new(0.0, k * self.delta_omega) * e;
            for j in 0..N_MOMENTS {
                x[j] += c[j] * e;
                dx[j] += c[j] * de;
            }
        }
        (x, dx)
    }

    pub fn state_at(&self, tau: f64) -> [Complex64; N_MOMENTS] {
        self.eval(tau).0
    }

    fn ode_residual(&self, rates: &Rates) -> f64 {
        let period = 2.0 * PI / self.delta_omega;
        (0..RESIDUAL_POINTS)
            .map(|j| {
                let tau = period * (j as f64 + 0.5) / RESIDUAL_POINTS as f64;
                let (x, dx) = self.eval(tau);
                let mut f = [Complex64::new(0.0, 0.0); N_MOMENTS];
                rates.full(tau, &x, &mut f);
                dx.iter().zip(&f).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// `n + 1` uniform samples over `[tau0, tau0 + T]`.
    pub fn sample_period(&self, tau0: f64, n: usize) -> Trajectory {
        let period = 2.0 * PI / self.delta_omega;
        let mut times = Vec::with_capacity(n + 1);
        let mut data = Vec::with_capacity((n + 1) * N_MOMENTS);
        let mut derivs = Vec::with_capacity((n + 1) * N_MOMENTS);
        for j in 0..=n {
            let tau = tau0 + period * j as f64 / n as f64;
            let (x, dx) = self.eval(tau);
            times.push(tau);
            data.extend_from_slice(&x);
            derivs.extend_from_slice(&dx);
        }
        Trajectory::from_samples(N_MOMENTS, times, data, derivs)
    }
}
