use serde::Serialize;

use super::{harmonic_project, is_retained, is_suppressed, HarmonicSet, PeakSpectrum, SpectralError};
use crate::cascade::{steady_periodic, SteadyOptions};
use crate::params::ValidatedParams;
use crate::probe::{stationary_solve, Reservoir};
use crate::source::{dressed_coefficients, squeeze_params, triplet_weights, SqueezeMode};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareOptions {
    pub harmonics: HarmonicSet,
    pub steady: SteadyOptions,
    pub squeeze: SqueezeMode,
}

impl Default for CompareOptions {
    fn default() -> Self {
        CompareOptions {
            harmonics: HarmonicSet::default(),
            steady: SteadyOptions::default(),
            squeeze: SqueezeMode::Text,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub k: i32,
    pub numeric: f64,
    pub analytic: f64,
    /// `||A|_num − |A|_ana| / |A|_num`.
    pub relative_difference: f64,
    pub retained: bool,
    pub suppressed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareTable {
    pub rows: Vec<CompareRow>,
    /// `‖|A|_num − |A|_ana‖₂ / ‖|A|_num‖₂` over all listed harmonics.
    pub disagreement: f64,
    pub reservoir: Reservoir,
    pub periodicity_residual: f64,
    pub warnings: Vec<String>,
    pub numeric: PeakSpectrum,
    pub analytic: PeakSpectrum,
}

impl CompareTable {
    pub fn row(&self, k: i32) -> Option<&CompareRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// Largest relative difference over the listed retained harmonics.
    pub fn max_retained_difference(&self, ks: &[i32]) -> f64 {
        ks.iter().filter_map(|&k| self.row(k)).map(|r| r.relative_difference).fold(0.0, f64::max)
    }
}

/// Reservoir seen by the probe: the squeeze parameters scaled by the
/// transmitted power `μ²`, and empty when the source is undriven.
pub fn effective_reservoir(params: &ValidatedParams, mode: SqueezeMode) -> Reservoir {
    let om = params.omega_s_full();
    if om == 0.0 || params.mu == 0.0 {
        return Reservoir::new(0.0, 0.0);
    }
    let sq = match dressed_coefficients(params.delta, om, params.gamma_s) {
        Ok(d) => squeeze_params(&d, &triplet_weights(&d), mode),
        Err(_) => return Reservoir::new(0.0, 0.0),
    };
    let t = params.mu * params.mu;
    Reservoir::new(t * sq.m, t * sq.n)
}

/// Cascade spectrum next to the effective-model stationary spectrum.
pub fn compare_spectra(params: &ValidatedParams, opts: &CompareOptions) -> Result<CompareTable, SpectralError> {
    let flags = params.flags();
    let mut warnings = Vec::new();
    if !flags.narrow_filter {
        warnings.push("narrow_filter regime not met: effective model outside its validity domain".to_string());
    }
    if !flags.strong_source_drive {
        warnings.push("strong_source_drive regime not met: effective model outside its validity domain".to_string());
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let traj = steady_periodic(params, &opts.steady)?;
    let numeric = harmonic_project(&traj, &opts.harmonics)?;
    let reservoir = effective_reservoir(params, opts.squeeze);
    let analytic = stationary_solve(params, reservoir, &opts.harmonics)?;
    let mut rows = Vec::new();
    let (mut diff2, mut norm2) = (0.0, 0.0);
    for k in opts.harmonics.iter() {
        let n = numeric.get(k).map_or(0.0, |a| a.norm());
        let a = analytic.get(k).map_or(0.0, |a| a.norm());
        let d = (n - a).abs();
        diff2 += d * d;
        norm2 += n * n;
        let relative_difference = if d == 0.0 { 0.0 } else { d / n };
        rows.push(CompareRow {
            k,
            numeric: n,
            analytic: a,
            relative_difference,
            retained: is_retained(k),
            suppressed: is_suppressed(k),
        });
    }
    let disagreement = if diff2 == 0.0 { 0.0 } else { (diff2 / norm2).sqrt() };
    Ok(CompareTable { rows, disagreement, reservoir, periodicity_residual: traj.residual, warnings, numeric, analytic })
}
