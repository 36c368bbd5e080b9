//! Wave-mixing peak extraction, analytic-vs-numeric comparison, and
//! two-dimensional drive-amplitude sweeps.

mod compare;
mod sweep;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use compare::{compare_spectra, effective_reservoir, CompareOptions, CompareRow, CompareTable};
pub use sweep::{log_grid, sweep2d, PointError, SweepOptions, SweepResult};

use crate::cascade::{CascadeError, PeriodicTrajectory};
use crate::params::ComplexAmplitude;
use crate::probe::ProbeError;
use crate::quad;

/// Largest `|k|` accepted in a harmonic list.
pub const MAX_ABS_HARMONIC: i32 = 15;
/// Fewest uniform sample intervals accepted by the projection.
pub const MIN_SAMPLES: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("trajectory is not a converged periodic steady state")]
    NotPeriodic,
    #[error("harmonic {k} is not an odd integer with |k| ≤ {MAX_ABS_HARMONIC}")]
    BadHarmonic { k: i32 },
    #[error("harmonic list is empty or malformed: {0}")]
    BadHarmonicList(String),
    #[error("need an even number ≥ {MIN_SAMPLES} of sample intervals, got {0}")]
    TooFewSamples(usize),
    #[error("bad sweep grid: {0}")]
    BadGrid(String),
    #[error("{failed} of {total} sweep points failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error(transparent)]
    Cascade(#[from] CascadeError),
    #[error(transparent)]
    Probe(#[from] ProbeError),
}

impl From<crate::params::InvalidParam> for SpectralError {
    fn from(e: crate::params::InvalidParam) -> Self {
        SpectralError::Cascade(e.into())
    }
}

/// Whether harmonic `k` belongs to the comb that survives pair-only source
/// emission (`k ≡ 1 mod 4`: +1, −3, +5, −7, …).
pub fn is_retained(k: i32) -> bool {
    k.rem_euclid(4) == 1
}

/// Whether harmonic `k` is odd and forbidden by pair-only source emission
/// (`k ≡ 3 mod 4`: −1, +3, −5, +7, …).
pub fn is_suppressed(k: i32) -> bool {
    k.rem_euclid(4) == 3
}

/// Ordered set of odd harmonic indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct HarmonicSet(Vec<i32>);

impl HarmonicSet {
    pub fn new(ks: impl IntoIterator<Item = i32>) -> Result<Self, SpectralError> {
        let mut v: Vec<i32> = ks.into_iter().collect();
        if let Some(&k) = v.iter().find(|k| k.rem_euclid(2) != 1 || k.abs() > MAX_ABS_HARMONIC) {
            return Err(SpectralError::BadHarmonic { k });
        }
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(SpectralError::BadHarmonicList("no harmonics".into()));
        }
        Ok(HarmonicSet(v))
    }

    /// Odd harmonics in `[-kmax, kmax]`.
    pub fn symmetric(kmax: i32) -> Result<Self, SpectralError> {
        Self::new((-kmax..=kmax).filter(|k| k.rem_euclid(2) == 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = i32> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for HarmonicSet {
    fn default() -> Self {
        HarmonicSet((-7..=7).filter(|k: &i32| k.rem_euclid(2) == 1).collect())
    }
}

impl fmt::Display for HarmonicSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|k| k.to_string()).collect();
        f.write_str(&parts.join(","))
    }
}

/// Accepts a comma-separated list (`-3,1,5`) or an inclusive range (`-7..7`,
/// odd members only).
impl FromStr for HarmonicSet {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || SpectralError::BadHarmonicList(s.to_string());
        if let Some((lo, hi)) = s.split_once("..") {
            let lo: i32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: i32 = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            return Self::new((lo..=hi).filter(|k| k.rem_euclid(2) == 1));
        }
        let ks: Result<Vec<i32>, _> = s.split(',').map(|p| p.trim().parse::<i32>()).collect();
        Self::new(ks.map_err(|_| bad())?)
    }
}

/// Complex amplitudes `A_k` of `⟨σ₋⟩ = Σ A_k e^{ikδωτ}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakSpectrum {
    peaks: BTreeMap<i32, ComplexAmplitude>,
    pub delta_omega: f64,
    /// Period-averaged `|⟨σ₋⟩|²`; NaN when the spectrum is not a projection.
    pub mean_power: f64,
    /// `mean_power − Σ|A_k|²`; `None` without a mean power.
    pub residual: Option<f64>,
}

impl PeakSpectrum {
    pub fn new(peaks: Vec<(i32, Complex64)>, delta_omega: f64, mean_power: f64) -> Self {
        let peaks: BTreeMap<i32, ComplexAmplitude> = peaks.into_iter().map(|(k, a)| (k, a.into())).collect();
        let total: f64 = peaks.values().map(|a| a.norm_sqr()).sum();
        let residual = mean_power.is_finite().then_some(mean_power - total);
        PeakSpectrum { peaks, delta_omega, mean_power, residual }
    }

    pub fn get(&self, k: i32) -> Option<ComplexAmplitude> {
        self.peaks.get(&k).copied()
    }

    /// `|A_k|²`.
    pub fn intensity(&self, k: i32) -> Option<f64> {
        self.get(k).map(|a| a.norm_sqr())
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, ComplexAmplitude)> + '_ {
        self.peaks.iter().map(|(k, a)| (*k, *a))
    }

    pub fn harmonics(&self) -> Vec<i32> {
        self.peaks.keys().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    /// `Σ|A_k|²` over the retained harmonics.
    pub fn total_power(&self) -> f64 {
        self.peaks.values().map(|a| a.norm_sqr()).sum()
    }

    /// `max |A_k|²` over present suppressed harmonics divided by the `min`
    /// over present retained ones.
    pub fn suppression_ratio(&self, suppressed: &[i32], retained: &[i32]) -> f64 {
        let hi = suppressed.iter().filter_map(|&k| self.intensity(k)).fold(0.0, f64::max);
        let lo = retained.iter().filter_map(|&k| self.intensity(k)).fold(f64::INFINITY, f64::min);
        hi / lo
    }
}

/// Projects one uniformly sampled period starting at `tau0`.
pub fn project_samples(
    samples: &[Complex64],
    tau0: f64,
    delta_omega: f64,
    ks: &HarmonicSet,
) -> Result<PeakSpectrum, SpectralError> {
    let n = samples.len().saturating_sub(1);
    if n < MIN_SAMPLES || n % 2 != 0 {
        return Err(SpectralError::TooFewSamples(n));
    }
    let peaks = ks
        .iter()
        .map(|k| {
            let shift = Complex64::from_polar(1.0, -(k as f64) * delta_omega * tau0);
            (k, shift * quad::fourier_coefficient(samples, k))
        })
        .collect();
    let power: Vec<Complex64> = samples.iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    Ok(PeakSpectrum::new(peaks, delta_omega, quad::simpson_mean(&power).re))
}

/// Peak amplitudes of `⟨σ₋^pr⟩` over one steady period.
pub fn harmonic_project(traj: &PeriodicTrajectory, ks: &HarmonicSet) -> Result<PeakSpectrum, SpectralError> {
    if !traj.steady {
        return Err(SpectralError::NotPeriodic);
    }
    project_samples(&traj.probe_sigma_minus(), traj.tau0, traj.delta_omega, ks)
}

/// Projected power in odd and in even harmonics `|k| ≤ kmax` of `⟨σ₋^pr⟩`.
pub fn parity_power(traj: &PeriodicTrajectory, kmax: i32) -> (f64, f64) {
    let samples = traj.probe_sigma_minus();
    let (mut odd, mut even) = (0.0, 0.0);
    for k in -kmax..=kmax {
        let p = quad::fourier_coefficient(&samples, k).norm_sqr();
        if k.rem_euclid(2) == 1 {
            odd += p;
        } else {
            even += p;
        }
    }
    (odd, even)
}

#[cfg(test)]
mod tests;
