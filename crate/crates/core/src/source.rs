//! Closed-form dressed-state analytics of the strongly driven source qubit.
//!
//! Frequencies are relative to the source drive frequency. The source
//! Hamiltonian is `H = −(Δσ_z + Ωσ_x)` with dressed states
//! `|1⟩ = c|g⟩ − s|e⟩` (energy `+Ω′`) and `|2⟩ = s|g⟩ + c|e⟩` (energy `−Ω′`).

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SourceError {
    #[error("dressed basis undefined: Δ = Ω = 0")]
    DegenerateDressing,
    #[error("gamma_s must be positive, got {0}")]
    NonPositiveRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DressedSource {
    pub c: f64,
    pub s: f64,
    pub omega_prime: f64,
    pub gamma_s: f64,
    pub gamma_0: f64,
    pub gamma_prime: f64,
    pub rho11_bar: f64,
    pub rho22_bar: f64,
}

/// Dressed amplitudes, linewidths and secular steady populations.
pub fn dressed_coefficients(delta: f64, omega: f64, gamma_s: f64) -> Result<DressedSource, SourceError> {
    if gamma_s.is_nan() || gamma_s <= 0.0 {
        return Err(SourceError::NonPositiveRate(gamma_s));
    }
    let omega_prime = omega.hypot(delta);
    if omega_prime == 0.0 {
        return Err(SourceError::DegenerateDressing);
    }
    // Clamp guards against (Ω′ − Δ) rounding slightly below zero when Ω ≪ Δ.
    let c2 = ((omega_prime + delta) / (2.0 * omega_prime)).clamp(0.0, 1.0);
    let s2 = ((omega_prime - delta) / (2.0 * omega_prime)).clamp(0.0, 1.0);
    let (c4, s4) = (c2 * c2, s2 * s2);
    Ok(DressedSource {
        c: c2.sqrt(),
        s: s2.sqrt(),
        omega_prime,
        gamma_s,
        gamma_0: gamma_s * (c4 + s4),
        gamma_prime: 0.5 * gamma_s * (1.0 + 2.0 * c2 * s2),
        rho11_bar: c4 / (c4 + s4),
        rho22_bar: s4 / (c4 + s4),
    })
}

impl DressedSource {
    pub fn c2(&self) -> f64 {
        self.c * self.c
    }

    pub fn s2(&self) -> f64 {
        self.s * self.s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TripletWeights {
    pub i_rc: f64,
    pub i_ri: f64,
    pub i_f: f64,
    pub i_t: f64,
    pub f_rr_coh: f64,
    pub f_rr_incoh: f64,
    pub f_ft: f64,
}

pub fn triplet_weights(d: &DressedSource) -> TripletWeights {
    let (c2, s2) = (d.c2(), d.s2());
    let (c4, s4) = (c2 * c2, s2 * s2);
    let g = d.gamma_s;
    let norm = c4 + s4;
    let i_rc = g * c2 * s2 * ((c4 - s4) / norm).powi(2);
    let i_ri = g * c2 * s2 * 4.0 * c4 * s4 / (norm * norm);
    let i_sideband = g * c4 * s4 / norm;
    TripletWeights {
        i_rc,
        i_ri,
        i_f: i_sideband,
        i_t: i_sideband,
        f_rr_coh: i_rc,
        f_rr_incoh: i_ri,
        f_ft: g * (-s2 * c2) * s4 / norm,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum TripletComponent {
    R,
    F,
    T,
}

/// Complex Lorentzian line of one triplet component at frequency `omega`.
/// The coherent Rayleigh part is not sampled; it is `TripletWeights::i_rc`.
pub fn triplet_line(d: &DressedSource, w: &TripletWeights, omega: f64, component: TripletComponent) -> Complex64 {
    let (weight, center, width) = match component {
        TripletComponent::R => (w.i_ri, 0.0, d.gamma_0),
        TripletComponent::F => (w.i_f, -d.omega_prime, d.gamma_prime),
        TripletComponent::T => (w.i_t, d.omega_prime, d.gamma_prime),
    };
    weight / Complex64::new(-width, omega - center)
}

pub fn triplet_spectrum(
    d: &DressedSource,
    w: &TripletWeights,
    omega_grid: &[f64],
    component: TripletComponent,
) -> Vec<Complex64> {
    omega_grid.iter().map(|&om| triplet_line(d, w, om, component)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PairKind {
    RR,
    FT,
    RF,
    RT,
    FF,
    TT,
}

impl PairKind {
    pub fn vanishes(self) -> bool {
        !matches!(self, PairKind::RR | PairKind::FT)
    }
}

/// A pair correlator that is identically zero because the emission process
/// violates the pair-energy constraint `ω + ω′ = 2ω_s`.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("anomalous {kind:?} correlator vanishes: pair energy differs from twice the drive frequency")]
pub struct UnsupportedPair {
    pub kind: PairKind,
}

impl UnsupportedPair {
    pub fn value(&self) -> Complex64 {
        Complex64::new(0.0, 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnomalousValue {
    pub value: Complex64,
    /// Weight of the elastic delta term (non-zero only for RR).
    pub coherent_weight: f64,
}

/// Anomalous pair correlator at the free frequency `omega`; the partner
/// frequency is fixed by the pair-energy constraint.
pub fn anomalous_correlator(
    d: &DressedSource,
    w: &TripletWeights,
    omega: f64,
    kind: PairKind,
) -> Result<AnomalousValue, UnsupportedPair> {
    match kind {
        PairKind::RR => {
            Ok(AnomalousValue { value: w.f_rr_incoh / Complex64::new(-d.gamma_0, omega), coherent_weight: w.f_rr_coh })
        }
        PairKind::FT => Ok(AnomalousValue {
            value: w.f_ft / Complex64::new(-d.gamma_prime, omega - d.omega_prime),
            coherent_weight: 0.0,
        }),
        other => Err(UnsupportedPair { kind: other }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub enum SqueezeMode {
    /// Resonant values `M = N = 1` regardless of detuning.
    #[default]
    Text,
    /// `M = 2 I_Ri/γ_s`, `N = 1`.
    EqM,
}

impl std::str::FromStr for SqueezeMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(SqueezeMode::Text),
            "eq_m" | "eqm" => Ok(SqueezeMode::EqM),
            other => Err(format!("expected `text` or `eq_m`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SqueezeParams {
    pub m: f64,
    pub n: f64,
    /// Set when `Text` mode is used away from resonance.
    pub off_resonance: bool,
}

pub fn squeeze_params(d: &DressedSource, w: &TripletWeights, mode: SqueezeMode) -> SqueezeParams {
    match mode {
        SqueezeMode::Text => {
            let off_resonance = (d.c2() - d.s2()).abs() > 1e-3;
            if off_resonance {
                log::warn!(
                    "resonant squeeze parameters M = N = 1 used off resonance (c² − s² = {:.3e})",
                    d.c2() - d.s2()
                );
            }
            SqueezeParams { m: 1.0, n: 1.0, off_resonance }
        }
        SqueezeMode::EqM => SqueezeParams { m: 2.0 * w.i_ri / d.gamma_s, n: 1.0, off_resonance: false },
    }
}

/// Intensity correlation of Lorentzian-filtered fluorescence, filter width `lam`.
pub fn filtered_g2(omega1: f64, omega2: f64, t: f64, lam: f64) -> f64 {
    let l2 = 4.0 * lam * lam;
    let diff = omega1 - omega2;
    let sum = omega1 + omega2;
    1.0 + (l2 / (l2 + diff * diff) + l2 / (l2 + sum * sum)) * (-lam * t).exp()
}
