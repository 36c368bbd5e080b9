use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{harmonic_project, HarmonicSet, SpectralError};
use crate::cascade::{steady_periodic, SteadyOptions};
use crate::params::SystemParams;

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => return Vec::new(),
        1 => return vec![lo],
        _ => {}
    }
    let (a, b) = (lo.ln(), hi.ln());
    let mut g: Vec<f64> = (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect();
    g[0] = lo;
    g[n - 1] = hi;
    g
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOptions {
    /// `Ω_s/γ_s` values (rows).
    pub omega_s_ratios: Vec<f64>,
    /// `Ω_pr/γ_pr` values (columns).
    pub omega_pr_ratios: Vec<f64>,
    pub harmonics: HarmonicSet,
    pub steady: SteadyOptions,
    /// Worker threads; `None` uses the global pool.
    pub jobs: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            omega_s_ratios: log_grid(0.1, 1000.0, 25),
            omega_pr_ratios: log_grid(0.01, 10.0, 25),
            harmonics: HarmonicSet::default(),
            steady: SteadyOptions { method: crate::cascade::SteadyMethod::HarmonicBalance, ..SteadyOptions::default() },
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointError {
    pub row: usize,
    pub col: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub omega_s_ratios: Vec<f64>,
    pub omega_pr_ratios: Vec<f64>,
    pub gamma_ratio: f64,
    pub harmonics: HarmonicSet,
    /// `|A_k|²` indexed `[row][col]`; `None` where the point failed.
    pub intensities: BTreeMap<i32, Vec<Vec<Option<f64>>>>,
    pub errors: Vec<PointError>,
    pub params: SystemParams,
    pub steady: SteadyOptions,
}

impl SweepResult {
    pub fn intensity(&self, k: i32, row: usize, col: usize) -> Option<f64> {
        self.intensities.get(&k)?.get(row)?.get(col).copied().flatten()
    }
}

fn check_grid(name: &str, g: &[f64]) -> Result<(), SpectralError> {
    if g.is_empty() {
        return Err(SpectralError::BadGrid(format!("{name} is empty")));
    }
    if let Some(x) = g.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(SpectralError::BadGrid(format!("{name} contains {x}")));
    }
    Ok(())
}

/// Peak intensity maps over a grid of source and probe drive amplitudes.
///
/// Points run concurrently; results are assembled in grid order so the
/// output does not depend on scheduling.
pub fn sweep2d(base: &SystemParams, opts: &SweepOptions) -> Result<SweepResult, SpectralError> {
    check_grid("omega_s grid", &opts.omega_s_ratios)?;
    check_grid("omega_pr grid", &opts.omega_pr_ratios)?;
    base.validate()?.require_period()?;
    let (rows, cols) = (opts.omega_s_ratios.len(), opts.omega_pr_ratios.len());
    let point = |idx: usize| -> Result<Vec<f64>, String> {
        let (i, j) = (idx / cols, idx % cols);
        let mut p = *base;
        p.omega_rabi_s = opts.omega_s_ratios[i] * base.gamma_s;
        p.omega_rabi_pr = opts.omega_pr_ratios[j] * base.gamma_pr;
        let vp = p.validate().map_err(|e| e.to_string())?;
        let traj = steady_periodic(&vp, &opts.steady).map_err(|e| e.to_string())?;
        let peaks = harmonic_project(&traj, &opts.harmonics).map_err(|e| e.to_string())?;
        Ok(opts.harmonics.iter().map(|k| peaks.intensity(k).unwrap_or(0.0)).collect())
    };
    let run = || (0..rows * cols).into_par_iter().map(point).collect::<Vec<_>>();
    let results = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| SpectralError::BadGrid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let mut intensities: BTreeMap<i32, Vec<Vec<Option<f64>>>> =
        opts.harmonics.iter().map(|k| (k, vec![vec![None; cols]; rows])).collect();
    let mut errors = Vec::new();
    for (idx, r) in results.into_iter().enumerate() {
        let (row, col) = (idx / cols, idx % cols);
        match r {
            Ok(vals) => {
                for (k, v) in opts.harmonics.iter().zip(vals) {
                    intensities.get_mut(&k).expect("harmonic present")[row][col] = Some(v);
                }
            }
            Err(message) => {
                log::warn!("sweep point ({row}, {col}) failed: {message}");
                errors.push(PointError { row, col, message });
            }
        }
    }
    let total = rows * cols;
    if 2 * errors.len() > total {
        return Err(SpectralError::TooManyFailures { failed: errors.len(), total });
    }
    Ok(SweepResult {
        omega_s_ratios: opts.omega_s_ratios.clone(),
        omega_pr_ratios: opts.omega_pr_ratios.clone(),
        gamma_ratio: base.gamma_s / base.gamma_pr,
        harmonics: opts.harmonics.clone(),
        intensities,
        errors,
        params: *base,
        steady: opts.steady,
    })
}
