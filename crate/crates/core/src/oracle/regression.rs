//! Two-time correlators of the driven source by the quantum regression
//! theorem, split into dressed Rayleigh (R) and sideband (F, T) parts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{build_source_liouvillian, comm, dissipator, sigma_minus, sigma_plus, sigma_z, Liouvillian, OracleError};
use crate::params::ValidatedParams;
use crate::source::{dressed_coefficients, DressedSource, TripletComponent};

/// Ratio `γ_s/Ω′` above which the dressed-state formulas lose validity.
pub const SECULAR_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Full radiative dissipator.
    #[default]
    Exact,
    /// Dissipator restricted to the dressed components.
    Secular,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Correlator {
    /// `⟨σ_α⁺(t+τ)σ_α⁻(t)⟩`.
    Normal(TripletComponent),
    /// `⟨σ_α⁺(t+τ)σ_β⁺(t)⟩`.
    Anomalous(TripletComponent, TripletComponent),
}

/// Lowering parts `σ_F⁻ = c²|1⟩⟨2|`, `σ_T⁻ = −s²|2⟩⟨1|`,
/// `σ_R⁻ = cs(|2⟩⟨2| − |1⟩⟨1|)` with `|1⟩ = c|g⟩ − s|e⟩`, `|2⟩ = s|g⟩ + c|e⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct DressedOperators {
    pub r: DMatrix<Complex64>,
    pub f: DMatrix<Complex64>,
    pub t: DMatrix<Complex64>,
}

impl DressedOperators {
    pub fn minus(&self, comp: TripletComponent) -> &DMatrix<Complex64> {
        match comp {
            TripletComponent::R => &self.r,
            TripletComponent::F => &self.f,
            TripletComponent::T => &self.t,
        }
    }

    pub fn plus(&self, comp: TripletComponent) -> DMatrix<Complex64> {
        self.minus(comp).adjoint()
    }
}

pub fn dressed_operators(d: &DressedSource) -> DressedOperators {
    let (c, s) = (d.c, d.s);
    let ket1 = DVector::from_vec(vec![Complex64::new(-s, 0.0), Complex64::new(c, 0.0)]);
    let ket2 = DVector::from_vec(vec![Complex64::new(c, 0.0), Complex64::new(s, 0.0)]);
    let outer = |a: &DVector<Complex64>, b: &DVector<Complex64>| a * b.adjoint();
    let k = |x: f64| Complex64::new(x, 0.0);
    DressedOperators {
        r: (outer(&ket2, &ket2) - outer(&ket1, &ket1)) * k(c * s),
        f: outer(&ket1, &ket2) * k(c * c),
        t: outer(&ket2, &ket1) * k(-s * s),
    }
}

fn secular_liouvillian(params: &ValidatedParams, ops: &DressedOperators) -> Liouvillian {
    let sx = sigma_plus() + sigma_minus();
    let h = -(sigma_z() * Complex64::new(params.delta, 0.0) + sx * Complex64::new(params.omega_s_full(), 0.0));
    let mut matrix = comm(&h);
    for comp in [TripletComponent::R, TripletComponent::F, TripletComponent::T] {
        matrix += dissipator(ops.minus(comp)) * Complex64::new(params.gamma_s, 0.0);
    }
    Liouvillian { dim: 2, matrix }
}

/// Null vector of `L` with unit trace.
pub(super) fn steady_state(l: &Liouvillian) -> Result<DMatrix<Complex64>, OracleError> {
    let d = l.dim;
    let mut a = l.matrix.clone();
    let mut b = DVector::zeros(d * d);
    for c in 0..d * d {
        a[(0, c)] = Complex64::new(0.0, 0.0);
    }
    for i in 0..d {
        a[(0, i * d + i)] = Complex64::new(1.0, 0.0);
    }
    b[0] = Complex64::new(1.0, 0.0);
    let x = a.lu().solve(&b).ok_or(OracleError::NoSteadyState)?;
    Ok(DMatrix::from_row_slice(d, d, x.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionResult {
    pub tau: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Factorized long-time value `⟨σ_α⁺⟩⟨σ_β^±⟩`.
    pub asymptote: Complex64,
    pub generator: Generator,
    pub secular_mismatch: bool,
}

fn vec_rm(m: &DMatrix<Complex64>) -> DVector<Complex64> {
    let n = m.nrows();
    DVector::from_fn(n * n, |i, _| m[(i / n, i % n)])
}

/// Correlator samples on `tau` (non-decreasing, starting at any `τ ≥ 0`)
/// from the stationary state of the chosen generator.
pub fn regression_correlator(
    params: &ValidatedParams,
    kind: Correlator,
    tau: &[f64],
    generator: Generator,
) -> Result<RegressionResult, OracleError> {
    let d = dressed_coefficients(params.delta, params.omega_s_full(), params.gamma_s)
        .map_err(|e| OracleError::InvalidState(e.to_string()))?;
    let secular_mismatch = params.gamma_s / d.omega_prime > SECULAR_LIMIT;
    if secular_mismatch {
        log::warn!(
            "γ_s/Ω′ = {:.3} exceeds {SECULAR_LIMIT}: dressed-state formulas are outside their regime",
            params.gamma_s / d.omega_prime
        );
    }
    let ops = dressed_operators(&d);
    let l = match generator {
        Generator::Exact => build_source_liouvillian(params),
        Generator::Secular => secular_liouvillian(params, &ops),
    };
    let rho = steady_state(&l)?;
    let (a, b) = match kind {
        Correlator::Normal(x) => (ops.plus(x), ops.minus(x).clone()),
        Correlator::Anomalous(x, y) => (ops.plus(x), ops.plus(y)),
    };
    let asymptote = (&a * &rho).trace() * (&b * &rho).trace();
    let mut v = vec_rm(&(&b * &rho));
    let mut values = Vec::with_capacity(tau.len());
    let mut t_prev = 0.0;
    for &t in tau {
        let dt = t - t_prev;
        if dt < 0.0 {
            return Err(OracleError::InvalidState("tau grid must be non-decreasing from 0".into()));
        }
        if dt > 0.0 {
            v = (&l.matrix * Complex64::new(dt, 0.0)).exp() * v;
        }
        let m = DMatrix::from_row_slice(2, 2, v.as_slice());
        values.push((&a * m).trace());
        t_prev = t;
    }
    Ok(RegressionResult { tau: tau.to_vec(), values, asymptote, generator, secular_mismatch })
}

/// `∫ (C(τ) − C_∞) e^{iωτ} dτ` over a uniform grid starting at zero
/// (trapezoidal rule).
pub fn correlator_spectrum(res: &RegressionResult, omega: f64) -> Complex64 {
    let n = res.tau.len();
    if n < 2 {
        return Complex64::new(0.0, 0.0);
    }
    let h = res.tau[1] - res.tau[0];
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, (&t, &c)) in res.tau.iter().zip(&res.values).enumerate() {
        let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
        acc += (c - res.asymptote) * Complex64::from_polar(w * h, omega * t);
    }
    acc
}

/// Half width at half maximum of `Re S(ω)` around `center`, located by
/// bisection on `[center, center + span]`.
pub fn spectrum_half_width(res: &RegressionResult, center: f64, span: f64) -> f64 {
    let peak = correlator_spectrum(res, center).re;
    let f = |w: f64| correlator_spectrum(res, center + w).re - 0.5 * peak;
    let (mut lo, mut hi) = (0.0, span);
    if f(hi) > 0.0 {
        return f64::NAN;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Decay rate from a least-squares line through `ln|Re(C(τ) − C_∞)|` over
/// samples with `τ ≤ t_max`.
pub fn fit_decay_rate(res: &RegressionResult, t_max: f64) -> f64 {
    let pts: Vec<(f64, f64)> = res
        .tau
        .iter()
        .zip(&res.values)
        .filter(|(t, _)| **t <= t_max)
        .map(|(t, c)| (*t, (c - res.asymptote).re.abs().ln()))
        .filter(|(_, y)| y.is_finite())
        .collect();
    let n = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxy, sxx) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + (x - mx) * (y - my), b + (x - mx) * (x - mx)));
    -sxy / sxx
}
