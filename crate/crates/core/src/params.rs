//! Physical parameters, drive conventions and regime flags.
//!
//! All quantities are dimensionless: rates and frequencies are measured in
//! units of the probe decay rate and time is `τ = γ_pr·t`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Factor convention in which drive amplitudes are quoted.
///
/// `Full` means the drive enters as `dσ₋/dτ ∝ Ω σ_z`, `Half` as
/// `dσ₋/dτ ∝ (Ω/2) σ_z`. The same physical drive therefore has
/// `Ω_half = 2 Ω_full`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RabiConvention {
    Half,
    #[default]
    Full,
}

impl RabiConvention {
    pub fn to_full(self, omega: f64) -> f64 {
        match self {
            RabiConvention::Half => 0.5 * omega,
            RabiConvention::Full => omega,
        }
    }

    pub fn to_half(self, omega: f64) -> f64 {
        match self {
            RabiConvention::Half => omega,
            RabiConvention::Full => 2.0 * omega,
        }
    }
}

impl fmt::Display for RabiConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RabiConvention::Half => "half",
            RabiConvention::Full => "full",
        })
    }
}

impl std::str::FromStr for RabiConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "half" => Ok(RabiConvention::Half),
            "full" => Ok(RabiConvention::Full),
            other => Err(format!("expected `half` or `full`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub gamma_s: f64,
    pub gamma_pr: f64,
    pub omega_rabi_s: f64,
    pub omega_rabi_pr: f64,
    pub delta: f64,
    pub delta_omega: f64,
    pub mu: f64,
    pub rabi_convention: RabiConvention,
}

impl Default for SystemParams {
    /// Strong-drive, narrow-filter working point: `γ_s/γ_pr = 10`,
    /// `Ω_s/γ_s = 500`, `Ω_pr = 0.2`, `δω = 2π/100`, `μ = 1`.
    fn default() -> Self {
        SystemParams {
            gamma_s: 10.0,
            gamma_pr: 1.0,
            omega_rabi_s: 5000.0,
            omega_rabi_pr: 0.2,
            delta: 0.0,
            delta_omega: 2.0 * PI / 100.0,
            mu: 1.0,
            rabi_convention: RabiConvention::Full,
        }
    }
}

impl SystemParams {
    /// Source drive amplitude in the `Full` convention.
    pub fn omega_s_full(&self) -> f64 {
        self.rabi_convention.to_full(self.omega_rabi_s)
    }

    /// Probe drive amplitude in the `Full` convention.
    pub fn omega_pr_full(&self) -> f64 {
        self.rabi_convention.to_full(self.omega_rabi_pr)
    }

    /// Probe drive amplitude in the `Half` convention.
    pub fn omega_pr_half(&self) -> f64 {
        self.rabi_convention.to_half(self.omega_rabi_pr)
    }

    /// Cascade coupling `α·√γ_pr = μ√(γ_s γ_pr)`.
    pub fn cascade_coupling(&self) -> f64 {
        self.mu * (self.gamma_s * self.gamma_pr).sqrt()
    }

    /// Drive period `T = 2π/δω`, `None` when `δω = 0`.
    pub fn period(&self) -> Option<f64> {
        (self.delta_omega != 0.0).then(|| 2.0 * PI / self.delta_omega.abs())
    }

    pub fn validate(self) -> Result<ValidatedParams, InvalidParam> {
        let fields = [
            ("gamma_s", self.gamma_s),
            ("gamma_pr", self.gamma_pr),
            ("omega_rabi_s", self.omega_rabi_s),
            ("omega_rabi_pr", self.omega_rabi_pr),
            ("delta", self.delta),
            ("delta_omega", self.delta_omega),
            ("mu", self.mu),
        ];
        for (field, value) in fields {
            if !value.is_finite() {
                return Err(InvalidParam::new(field, format!("must be finite, got {value}")));
            }
        }
        if self.gamma_s <= 0.0 {
            return Err(InvalidParam::new("gamma_s", format!("must be positive, got {}", self.gamma_s)));
        }
        if self.gamma_pr <= 0.0 {
            return Err(InvalidParam::new("gamma_pr", format!("must be positive, got {}", self.gamma_pr)));
        }
        if !(0.0..=1.0).contains(&self.mu) {
            return Err(InvalidParam::new("mu", format!("must lie in [0, 1], got {}", self.mu)));
        }
        let flags = RegimeFlags::of(&self);
        Ok(ValidatedParams { params: self, flags })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid parameter `{field}`: {reason}")]
pub struct InvalidParam {
    pub field: &'static str,
    pub reason: String,
}

impl InvalidParam {
    pub fn new(field: &'static str, reason: impl Into<String>) -> Self {
        InvalidParam { field, reason: reason.into() }
    }
}

/// Thresholds of the regime flags. They gate warnings only.
pub const STRONG_SOURCE_RATIO: f64 = 10.0;
pub const WEAK_PROBE_RATIO: f64 = 0.2;
pub const FILTER_RATIO: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub strong_source_drive: bool,
    pub weak_probe_drive: bool,
    pub narrow_filter: bool,
    pub wide_filter: bool,
}

impl RegimeFlags {
    fn of(p: &SystemParams) -> Self {
        RegimeFlags {
            strong_source_drive: p.omega_rabi_s.abs() / p.gamma_s >= STRONG_SOURCE_RATIO,
            weak_probe_drive: p.omega_rabi_pr != 0.0 && p.omega_rabi_pr.abs() / p.gamma_pr <= WEAK_PROBE_RATIO,
            narrow_filter: p.gamma_s / p.gamma_pr >= FILTER_RATIO,
            wide_filter: p.gamma_pr / p.gamma_s >= FILTER_RATIO,
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.strong_source_drive {
            out.push("strong_source_drive");
        }
        if self.weak_probe_drive {
            out.push("weak_probe_drive");
        }
        if self.narrow_filter {
            out.push("narrow_filter");
        }
        if self.wide_filter {
            out.push("wide_filter");
        }
        out
    }
}

/// Parameters that passed [`SystemParams::validate`]. Immutable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidatedParams {
    params: SystemParams,
    flags: RegimeFlags,
}

impl ValidatedParams {
    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn flags(&self) -> RegimeFlags {
        self.flags
    }

    pub fn into_inner(self) -> SystemParams {
        self.params
    }

    /// Period of the drive comb; errors when `δω = 0`.
    pub fn require_period(&self) -> Result<f64, InvalidParam> {
        self.params.period().ok_or_else(|| InvalidParam::new("delta_omega", "must be non-zero for spectral extraction"))
    }
}

impl std::ops::Deref for ValidatedParams {
    type Target = SystemParams;

    fn deref(&self) -> &SystemParams {
        &self.params
    }
}

/// Serializable complex number.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ComplexAmplitude {
    pub re: f64,
    pub im: f64,
}

impl ComplexAmplitude {
    pub fn new(re: f64, im: f64) -> Self {
        ComplexAmplitude { re, im }
    }

    pub fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.re * self.re + self.im * self.im
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

impl From<Complex64> for ComplexAmplitude {
    fn from(z: Complex64) -> Self {
        ComplexAmplitude { re: z.re, im: z.im }
    }
}

impl From<ComplexAmplitude> for Complex64 {
    fn from(a: ComplexAmplitude) -> Self {
        Complex64::new(a.re, a.im)
    }
}
