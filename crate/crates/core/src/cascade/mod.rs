//! Exact moment dynamics of the cascaded source→probe pair: right-hand side,
//! adaptive integration, and periodic steady-state extraction.

mod harmonic;
mod moments;

use std::cell::RefCell;
use std::io::{self, Write};

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use harmonic::{solve_harmonic, solve_harmonic_auto, HarmonicSolution};
pub use moments::*;

use crate::numfmt::num;
use crate::ode::{DenseSegment, Dop853, OdeError, OdeSystem, Output, StepStats, StepperOptions, Tolerance, Trajectory};
use crate::params::{InvalidParam, ValidatedParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CascadeError {
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Param(#[from] InvalidParam),
    #[error("periodic steady state not reached: residual {residual:e} exceeds {threshold:e}")]
    NotConverged { residual: f64, threshold: f64 },
}

impl CascadeError {
    /// Whether the failure is numerical rather than a bad input.
    pub fn is_convergence(&self) -> bool {
        match self {
            CascadeError::Ode(OdeError::InvalidTolerance(_)) | CascadeError::Ode(OdeError::InvalidSpan(..)) => false,
            CascadeError::Ode(_) | CascadeError::NotConverged { .. } => true,
            CascadeError::Param(_) => false,
        }
    }
}

/// Closed-form periodic steady state of the driven source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourceSteadyState {
    pub sigma_z: f64,
    /// `⟨σ₋^s⟩(τ) = sigma_minus · e^{−iδωτ}`.
    pub sigma_minus: Complex64,
}

impl SourceSteadyState {
    pub fn sigma_minus_at(&self, tau: f64, delta_omega: f64) -> Complex64 {
        self.sigma_minus * Complex64::from_polar(1.0, -delta_omega * tau)
    }
}

/// `⟨σ_z^s⟩ = −1/(1 + 8Ω²/(γ² + 16Δ²))`; at resonance `−1/(1 + 8Ω²/γ²)`.
pub fn source_steady_state(params: &ValidatedParams) -> SourceSteadyState {
    let (g, om, d) = (params.gamma_s, params.omega_s_full(), params.delta);
    let sigma_z = -1.0 / (1.0 + 8.0 * om * om / (g * g + 16.0 * d * d));
    let sigma_minus = 2.0 * om * sigma_z / Complex64::new(g, -4.0 * d);
    SourceSteadyState { sigma_z, sigma_minus }
}

/// The three source slots as a stand-alone system.
#[derive(Debug, Clone, Copy)]
pub struct SourceBlock {
    rates: Rates,
}

impl SourceBlock {
    pub fn new(params: &ValidatedParams) -> Self {
        SourceBlock { rates: Rates::new(params) }
    }
}

impl OdeSystem for SourceBlock {
    fn dim(&self) -> usize {
        3
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let d = self.rates.source(self.rates.phase(t), y[0], y[1], y[2]);
        dy.copy_from_slice(&d);
    }
}

/// Probe and cross slots driven by a fixed source segment.
struct ProbeBlock {
    rates: Rates,
    source: RefCell<DenseSegment>,
}

impl OdeSystem for ProbeBlock {
    fn dim(&self) -> usize {
        PROBE_SLOTS.len()
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        let mut s = [Complex64::new(0.0, 0.0); 3];
        self.source.borrow().eval(t, &mut s);
        let mut x = [Complex64::new(0.0, 0.0); N_MOMENTS];
        for (slot, v) in SOURCE_SLOTS.iter().zip(s) {
            x[*slot] = v;
        }
        for (slot, v) in PROBE_SLOTS.iter().zip(y) {
            x[*slot] = *v;
        }
        let mut dx = [Complex64::new(0.0, 0.0); N_MOMENTS];
        self.rates.probe(self.rates.phase(t), &x, &mut dx);
        for (slot, d) in PROBE_SLOTS.iter().zip(dy.iter_mut()) {
            *d = dx[*slot];
        }
    }
}

fn assemble(source: &[Complex64], probe: &[Complex64]) -> [Complex64; N_MOMENTS] {
    let mut x = [Complex64::new(0.0, 0.0); N_MOMENTS];
    for (slot, v) in SOURCE_SLOTS.iter().zip(source) {
        x[*slot] = *v;
    }
    for (slot, v) in PROBE_SLOTS.iter().zip(probe) {
        x[*slot] = *v;
    }
    x
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CascadeStats {
    pub source: StepStats,
    pub probe: StepStats,
}

/// Integrates the moment system from `state0` over `span`.
///
/// The source block is stepped on its own; the probe block is advanced
/// inside each source step using the source's continuous extension. The
/// source trajectory is therefore identical to a source-only run with the
/// same tolerances. `Output::Steps` is not supported here.
pub fn integrate(
    params: &ValidatedParams,
    state0: &MomentState,
    span: (f64, f64),
    tol: Tolerance,
    output: &Output,
) -> Result<(Trajectory, CascadeStats), CascadeError> {
    integrate_with(params, state0, span, tol.into(), output)
}

pub fn integrate_with(
    params: &ValidatedParams,
    state0: &MomentState,
    span: (f64, f64),
    opts: StepperOptions,
    output: &Output,
) -> Result<(Trajectory, CascadeStats), CascadeError> {
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(OdeError::InvalidSpan(t0, t1).into());
    }
    let grid: &[f64] = match output {
        Output::Grid(g) => g,
        Output::Final => &[],
        Output::Steps => return Err(OdeError::InvalidSpan(t0, t1).into()),
    };
    if grid.windows(2).any(|w| w[1] <= w[0])
        || grid.first().is_some_and(|&t| t < t0)
        || grid.last().is_some_and(|&t| t > t1)
    {
        return Err(OdeError::InvalidSpan(t0, t1).into());
    }
    let rates = Rates::new(params);
    let x0 = &state0.0;
    let src0: Vec<Complex64> = SOURCE_SLOTS.iter().map(|&s| x0[s]).collect();
    let prb0: Vec<Complex64> = PROBE_SLOTS.iter().map(|&s| x0[s]).collect();

    let mut times = Vec::new();
    let mut data = Vec::new();
    let mut next = 0;
    while next < grid.len() && grid[next] <= t0 {
        times.push(t0);
        data.extend_from_slice(x0);
        next += 1;
    }

    let mut src = Dop853::new(SourceBlock { rates }, t0, &src0, opts)?;
    let mut prb: Option<Dop853<ProbeBlock>> = None;
    let mut sbuf = [Complex64::new(0.0, 0.0); 3];
    let mut pbuf = vec![Complex64::new(0.0, 0.0); PROBE_SLOTS.len()];
    while src.t() < t1 {
        src.step(t1)?;
        let ts = src.t();
        let p = match prb.as_mut() {
            Some(p) => {
                src.copy_dense(&mut p.system().source.borrow_mut());
                p
            }
            None => {
                let mut seg = DenseSegment::default();
                src.copy_dense(&mut seg);
                let block = ProbeBlock { rates, source: RefCell::new(seg) };
                prb.insert(Dop853::new(block, t0, &prb0, opts)?)
            }
        };
        while p.t() < ts {
            p.step(ts)?;
            let tp = p.t();
            while next < grid.len() && grid[next] <= tp {
                let g = grid[next];
                if g == ts {
                    sbuf.copy_from_slice(src.y());
                } else {
                    p.system().source.borrow().eval(g, &mut sbuf);
                }
                if g == tp {
                    pbuf.copy_from_slice(p.y());
                } else {
                    p.dense(g, &mut pbuf);
                }
                times.push(g);
                data.extend_from_slice(&assemble(&sbuf, &pbuf));
                next += 1;
            }
        }
    }
    let stats = CascadeStats { source: src.stats(), probe: prb.as_ref().map(|p| p.stats()).unwrap_or_default() };
    if matches!(output, Output::Final) {
        let probe_y = prb.as_ref().map(|p| p.y().to_vec()).unwrap_or(prb0);
        times.push(src.t());
        data.extend_from_slice(&assemble(src.y(), &probe_y));
    }
    let mut derivs = vec![Complex64::new(0.0, 0.0); data.len()];
    for (i, &t) in times.iter().enumerate() {
        let mut x = [Complex64::new(0.0, 0.0); N_MOMENTS];
        x.copy_from_slice(&data[i * N_MOMENTS..(i + 1) * N_MOMENTS]);
        let mut dx = [Complex64::new(0.0, 0.0); N_MOMENTS];
        rates.full(t, &x, &mut dx);
        derivs[i * N_MOMENTS..(i + 1) * N_MOMENTS].copy_from_slice(&dx);
    }
    Ok((Trajectory::from_samples(N_MOMENTS, times, data, derivs), stats))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyMethod {
    /// Time-domain relaxation from the ground state.
    #[default]
    Integrate,
    /// Direct solve for the Fourier coefficients of the periodic orbit.
    HarmonicBalance,
}

impl std::str::FromStr for SteadyMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "integrate" => Ok(SteadyMethod::Integrate),
            "harmonic_balance" | "harmonic" => Ok(SteadyMethod::HarmonicBalance),
            other => Err(format!("expected `integrate` or `harmonic_balance`, got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyOptions {
    pub tol: Tolerance,
    /// Transient length; `None` selects [`default_transient`].
    pub transient: Option<f64>,
    /// Uniform sample intervals over the returned period (even, ≥ 512).
    pub samples: usize,
    pub threshold: f64,
    pub method: SteadyMethod,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        SteadyOptions {
            tol: Tolerance::default(),
            transient: None,
            samples: 1024,
            threshold: 1e-6,
            method: SteadyMethod::Integrate,
        }
    }
}

/// `max(50/min(γ_s, γ_pr, 1), 10·T)`.
pub fn default_transient(params: &ValidatedParams) -> Result<f64, InvalidParam> {
    let period = params.require_period()?;
    let slow = params.gamma_s.min(params.gamma_pr).min(1.0);
    Ok((50.0 / slow).max(10.0 * period))
}

/// One period of the periodic steady state, uniformly sampled.
#[derive(Debug, Clone)]
pub struct PeriodicTrajectory {
    pub trajectory: Trajectory,
    pub tau0: f64,
    pub period: f64,
    pub delta_omega: f64,
    pub residual: f64,
    pub steady: bool,
    pub method: SteadyMethod,
}

impl PeriodicTrajectory {
    /// `⟨σ₋^pr⟩` at every sample of the period.
    pub fn probe_sigma_minus(&self) -> Vec<Complex64> {
        self.trajectory.component(SM_PR)
    }
}

pub fn steady_periodic(params: &ValidatedParams, opts: &SteadyOptions) -> Result<PeriodicTrajectory, CascadeError> {
    let period = params.require_period()?;
    if opts.samples < 512 || opts.samples % 2 != 0 {
        return Err(InvalidParam::new("samples", format!("need an even count ≥ 512, got {}", opts.samples)).into());
    }
    match opts.method {
        SteadyMethod::Integrate => {
            let tau0 = match opts.transient {
                Some(t) => t,
                None => default_transient(params)?,
            };
            let n = opts.samples;
            let grid: Vec<f64> = (0..=n).map(|j| tau0 + period * j as f64 / n as f64).collect();
            let (traj, stats) =
                integrate(params, &MomentState::ground(), (0.0, *grid.last().unwrap()), opts.tol, &Output::Grid(grid))?;
            log::debug!("steady_periodic: {} source / {} probe steps", stats.source.accepted, stats.probe.accepted);
            let first = MomentState::from_slice(traj.state(0));
            let last = MomentState::from_slice(traj.last());
            let residual = first.max_abs_diff(&last);
            finish(traj, tau0, period, params.delta_omega, residual, opts)
        }
        SteadyMethod::HarmonicBalance => {
            let sol = solve_harmonic_auto(params, 1e-13)?;
            let traj = sol.sample_period(0.0, opts.samples);
            finish(traj, 0.0, period, params.delta_omega, sol.residual, opts)
        }
    }
}

fn finish(
    trajectory: Trajectory,
    tau0: f64,
    period: f64,
    delta_omega: f64,
    residual: f64,
    opts: &SteadyOptions,
) -> Result<PeriodicTrajectory, CascadeError> {
    if residual.is_nan() || residual >= opts.threshold {
        return Err(CascadeError::NotConverged { residual, threshold: opts.threshold });
    }
    Ok(PeriodicTrajectory { trajectory, tau0, period, delta_omega, residual, steady: true, method: opts.method })
}

/// CSV with a `tau` column followed by `<name>_re,<name>_im` for every slot.
pub fn write_trajectory_csv(traj: &Trajectory, w: &mut dyn Write) -> io::Result<()> {
    assert_eq!(traj.dim(), N_MOMENTS);
    write!(w, "tau")?;
    for name in MOMENT_NAMES {
        write!(w, ",{name}_re,{name}_im")?;
    }
    writeln!(w)?;
    for (i, &t) in traj.times().iter().enumerate() {
        write!(w, "{}", num(t))?;
        for z in traj.state(i) {
            write!(w, ",{},{}", num(z.re), num(z.im))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;
