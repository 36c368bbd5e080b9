//! Effective single-qubit model of the probe: a coherent tone plus a
//! broadband squeezed reservoir with normal and anomalous parameters `(N, M)`.
//!
//! Drive amplitudes are used in the `Half` convention here. With `φ = δω·τ`
//! and `γ = γ_pr` the rotating-frame equations are
//!
//! ```text
//! dσ₋/dτ = −γ(N+½)σ₋ − i(Ω/2)e^{iφ}σ_z − γM e^{−2iφ}σ₊
//! dσ_z/dτ = −γ(σ_z+1) − 2Nγσ_z + iΩ(σ₊e^{iφ} − σ₋e^{−iφ})
//! ```
//!
//! so the coherent tone sits at harmonic `k = +1` and the retained
//! mixing comb is `{+1, −3, +5, −7, …}`.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use thiserror::Error;

use crate::params::ValidatedParams;
use crate::quad;
use crate::spectral::{HarmonicSet, PeakSpectrum};

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum ProbeError {
    #[error("stationary system is singular at phase {phi}")]
    SingularSystem { phi: f64 },
    #[error("series undefined: (2N+1)² − 4|M|² = {discriminant} ≤ 0")]
    NonHyperbolic { discriminant: f64 },
    #[error("series order {0} not available (1..=4)")]
    UnsupportedOrder(usize),
    #[error("phase grid must have an even number ≥ 2 of intervals, got {0}")]
    BadGrid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub sigma_minus: Complex64,
    pub sigma_z: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochRate {
    pub d_sigma_minus: Complex64,
    pub d_sigma_z: f64,
}

/// Squeezed-reservoir parameters seen by the probe.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Reservoir {
    pub m: f64,
    pub n: f64,
}

impl Reservoir {
    pub fn new(m: f64, n: f64) -> Self {
        Reservoir { m, n }
    }
}

pub fn effective_rhs(state: &BlochState, params: &ValidatedParams, res: Reservoir) -> BlochRate {
    let g = params.gamma_pr;
    let om = params.omega_pr_half();
    let e = Complex64::from_polar(1.0, params.delta_omega * state.time);
    let sm = state.sigma_minus;
    let sp = sm.conj();
    let sz = state.sigma_z;
    let i = Complex64::i();
    let d_sm = -g * (res.n + 0.5) * sm - i * (0.5 * om) * e * sz - g * res.m * e.conj() * e.conj() * sp;
    let d_sz = -g * (sz + 1.0) - 2.0 * res.n * g * sz + (i * om * (sp * e - sm * e.conj())).re;
    BlochRate { d_sigma_minus: d_sm, d_sigma_z: d_sz }
}

/// Stationary `(σ₋, σ₊, σ_z)` with the drive phase frozen at `phi`.
pub fn stationary_point(params: &ValidatedParams, res: Reservoir, phi: f64) -> Result<(Complex64, f64), ProbeError> {
    let g = params.gamma_pr;
    let om = params.omega_pr_half();
    let e = Complex64::from_polar(1.0, phi);
    let i = Complex64::i();
    let damp = Complex64::from(-g * (res.n + 0.5));
    let a = Matrix3::new(
        damp,
        -g * res.m * e.conj() * e.conj(),
        -i * (0.5 * om) * e,
        -g * res.m * e * e,
        damp,
        i * (0.5 * om) * e.conj(),
        -i * om * e.conj(),
        i * om * e,
        Complex64::from(-g * (2.0 * res.n + 1.0)),
    );
    let b = Vector3::new(Complex64::from(0.0), Complex64::from(0.0), Complex64::from(g));
    let scale = a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let lu = a.lu();
    if lu.determinant().norm() <= 1e-12 * scale.powi(3) {
        return Err(ProbeError::SingularSystem { phi });
    }
    let x = lu.solve(&b).ok_or(ProbeError::SingularSystem { phi })?;
    Ok((x[0], x[2].re))
}

/// `σ₋(φ)` on `n + 1` uniform phases covering `[0, 2π]`.
pub fn stationary_profile(params: &ValidatedParams, res: Reservoir, n: usize) -> Result<Vec<Complex64>, ProbeError> {
    if n < 2 || n % 2 != 0 {
        return Err(ProbeError::BadGrid(n));
    }
    let mut out = Vec::with_capacity(n + 1);
    for j in 0..n {
        let phi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
        out.push(stationary_point(params, res, phi)?.0);
    }
    out.push(out[0]);
    Ok(out)
}

pub const STATIONARY_GRID: usize = 256;

/// Peak amplitudes of the slowly-varying-phase stationary solution.
pub fn stationary_solve(
    params: &ValidatedParams,
    res: Reservoir,
    ks: &HarmonicSet,
) -> Result<PeakSpectrum, ProbeError> {
    stationary_solve_on(params, res, ks, STATIONARY_GRID)
}

pub fn stationary_solve_on(
    params: &ValidatedParams,
    res: Reservoir,
    ks: &HarmonicSet,
    grid: usize,
) -> Result<PeakSpectrum, ProbeError> {
    if params.delta_omega.abs() > 0.1 * params.gamma_pr {
        log::warn!(
            "δω/γ_pr = {:.3}: the frozen-phase approximation needs δω ≪ γ_pr",
            params.delta_omega / params.gamma_pr
        );
    }
    let profile = stationary_profile(params, res, grid)?;
    let power = quad::simpson_mean(&profile.iter().map(|z| Complex64::from(z.norm_sqr())).collect::<Vec<_>>()).re;
    let peaks = ks.iter().map(|k| (k, quad::fourier_coefficient(&profile, k))).collect();
    Ok(PeakSpectrum::new(peaks, params.delta_omega, power))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesCoefficients {
    pub f: f64,
    pub m: f64,
}

pub fn series_coefficients(params: &ValidatedParams, res: Reservoir) -> Result<SeriesCoefficients, ProbeError> {
    let disc = (2.0 * res.n + 1.0).powi(2) - 4.0 * res.m * res.m;
    if disc <= 0.0 {
        return Err(ProbeError::NonHyperbolic { discriminant: disc });
    }
    Ok(SeriesCoefficients {
        f: params.omega_pr_half() / (params.gamma_pr * disc.sqrt()),
        m: 2.0 * res.m / (2.0 * res.n + 1.0),
    })
}

pub const MAX_SERIES_ORDER: usize = 4;

/// Weak-drive series `σ₋ ≈ (ifγ/Ω)(f e^{iφ} + fm e^{−3iφ} − f³m e^{5iφ} − f³m² e^{−7iφ})`
/// truncated to its first `order` terms.
pub fn peak_series(params: &ValidatedParams, res: Reservoir, order: usize) -> Result<PeakSpectrum, ProbeError> {
    if order == 0 || order > MAX_SERIES_ORDER {
        return Err(ProbeError::UnsupportedOrder(order));
    }
    if !params.flags().weak_probe_drive {
        log::warn!("probe drive outside the weak-drive regime; series truncation error may be large");
    }
    let sc = series_coefficients(params, res)?;
    let disc = (2.0 * res.n + 1.0).powi(2) - 4.0 * res.m * res.m;
    // i f γ/Ω written without dividing by Ω so that Ω → 0 stays finite.
    let pre = Complex64::new(0.0, 1.0 / disc.sqrt());
    let (f, m) = (sc.f, sc.m);
    let terms = [(1, f), (-3, f * m), (5, -f.powi(3) * m), (-7, -f.powi(3) * m * m)];
    let peaks = terms[..order].iter().map(|&(k, c)| (k, pre * c)).collect();
    Ok(PeakSpectrum::new(peaks, params.delta_omega, f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::{RabiConvention, SystemParams};

    fn half(omega_pr: f64) -> ValidatedParams {
        SystemParams { omega_rabi_pr: omega_pr, rabi_convention: RabiConvention::Half, ..SystemParams::default() }
            .validate()
            .unwrap()
    }

    #[test]
    fn ground_state_is_dark_without_drive() {
        let st = BlochState { sigma_minus: Complex64::from(0.0), sigma_z: -1.0, time: 0.3 };
        let r = effective_rhs(&st, &half(0.0), Reservoir::new(0.7, 0.0));
        assert_eq!(r.d_sigma_minus, Complex64::from(0.0));
        assert_eq!(r.d_sigma_z, 0.0);
    }

    #[test]
    fn drive_excites_ground_state() {
        let st = BlochState { sigma_minus: Complex64::from(0.0), sigma_z: -1.0, time: 0.0 };
        let r = effective_rhs(&st, &half(0.2), Reservoir::new(0.0, 1.0));
        assert!((r.d_sigma_minus - Complex64::new(0.0, 0.1)).norm() < 1e-15);
        // −γ(σ_z + 1) − 2Nγσ_z at σ_z = −1 with N = 1.
        assert!((r.d_sigma_z - 2.0).abs() < 1e-15);
    }

    #[test]
    fn squeezing_term_damps_real_coherence() {
        let st = BlochState { sigma_minus: Complex64::from(0.1), sigma_z: -0.9, time: 0.0 };
        let r = effective_rhs(&st, &half(0.0), Reservoir::new(1.0, 1.0));
        assert!((r.d_sigma_minus - Complex64::from(-0.25)).norm() < 1e-15);
    }

    #[test]
    fn vacuum_gives_single_tone() {
        let p = half(0.2);
        let peaks = stationary_solve(&p, Reservoir::new(0.0, 0.0), &HarmonicSet::default()).unwrap();
        for (k, a) in peaks.iter() {
            if k != 1 {
                assert!(a.norm() < 1e-12, "k={k}");
            }
        }
        assert!(peaks.get(1).unwrap().norm() > 1e-3);
    }

    #[test]
    fn squeezed_comb_has_selection_rule() {
        let p = half(0.2);
        let peaks = stationary_solve(&p, Reservoir::new(1.0, 1.0), &HarmonicSet::default()).unwrap();
        for k in [-1, 3, -5, 7] {
            assert!(peaks.get(k).unwrap().norm() < 1e-10, "k={k}");
        }
        let a1 = peaks.get(1).unwrap();
        let a3 = peaks.get(-3).unwrap();
        let ratio = Complex64::from(a3) / Complex64::from(a1);
        assert!((ratio.re - 2.0 / 3.0).abs() < 0.02 && ratio.im.abs() < 1e-10);
    }

    #[test]
    fn weak_drive_limit_of_a1() {
        let p = half(1e-4);
        let peaks = stationary_solve(&p, Reservoir::new(1.0, 1.0), &HarmonicSet::default()).unwrap();
        let a1 = Complex64::from(peaks.get(1).unwrap());
        let expect = Complex64::new(0.0, 1e-4 / 5.0);
        assert!((a1 - expect).norm() < 1e-8 * expect.norm() + 1e-14);
    }

    #[test]
    fn even_harmonics_vanish() {
        let p = half(0.8);
        let prof = stationary_profile(&p, Reservoir::new(0.6, 0.9), STATIONARY_GRID).unwrap();
        for k in [-6, -4, -2, 0, 2, 4, 6] {
            assert!(quad::fourier_coefficient(&prof, k).norm() < 1e-10);
        }
    }

    #[test]
    fn grid_doubling_is_converged() {
        let p = half(0.5);
        let res = Reservoir::new(1.0, 1.0);
        let ks = HarmonicSet::default();
        let a = stationary_solve_on(&p, res, &ks, 256).unwrap();
        let b = stationary_solve_on(&p, res, &ks, 512).unwrap();
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            assert!((Complex64::from(x) - Complex64::from(y)).norm() < 1e-10);
        }
    }

    #[test]
    fn singular_at_zero_drive_boundary() {
        let p = half(0.0);
        let err = stationary_solve(&p, Reservoir::new(1.5, 1.0), &HarmonicSet::default()).unwrap_err();
        assert!(matches!(err, ProbeError::SingularSystem { .. }));
    }

    #[test]
    fn series_reference_values() {
        let p = half(0.2);
        let sc = series_coefficients(&p, Reservoir::new(1.0, 1.0)).unwrap();
        assert!((sc.f - 0.2 / 5f64.sqrt()).abs() < 1e-15 && (sc.m - 2.0 / 3.0).abs() < 1e-15);
        let s = peak_series(&p, Reservoir::new(1.0, 1.0), 4).unwrap();
        let a1 = s.get(1).unwrap().norm();
        assert!((s.get(-3).unwrap().norm() / a1 - 2.0 / 3.0).abs() < 1e-14);
        assert!((s.get(5).unwrap().norm() / a1 - sc.f * sc.f * 2.0 / 3.0).abs() < 1e-14);
        assert!((s.get(5).unwrap().norm() / a1 - 0.005333).abs() < 1e-6);
        assert_eq!(peak_series(&p, Reservoir::new(1.0, 1.0), 2).unwrap().len(), 2);
        let m0 = peak_series(&p, Reservoir::new(0.0, 1.0), 4).unwrap();
        assert!(m0.iter().filter(|(_, a)| a.norm() > 0.0).count() == 1);
        assert!(matches!(peak_series(&p, Reservoir::new(1.5, 1.0), 2), Err(ProbeError::NonHyperbolic { .. })));
        assert!(matches!(peak_series(&p, Reservoir::new(1.0, 1.0), 5), Err(ProbeError::UnsupportedOrder(5))));
    }
}
