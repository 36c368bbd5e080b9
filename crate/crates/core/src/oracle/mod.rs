//! Exact density-matrix reference for the source (2×2) and the cascaded
//! pair (4×4): Liouvillians, evolution, moment extraction and two-time
//! correlators.
//!
//! Single-qubit basis order is `(|e⟩, |g⟩)`; two-qubit states are
//! `source ⊗ probe`. Density matrices are vectorized row-major, so
//! `vec(AρB) = (A ⊗ Bᵀ) vec(ρ)`.

mod ops;
mod regression;

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use ops::{kron, probe_op, sigma_minus, sigma_plus, sigma_z, source_op};
pub use regression::{
    correlator_spectrum, dressed_operators, fit_decay_rate, regression_correlator, spectrum_half_width, Correlator,
    DressedOperators, Generator, RegressionResult,
};

use crate::cascade::{self, MomentState, N_MOMENTS};
use crate::numfmt::num;
use crate::ode::{self, FnSystem, OdeError, Output, Tolerance};
use crate::params::{SystemParams, ValidatedParams};

/// Hermiticity tolerance of a valid density matrix.
pub const HERMITIAN_TOL: f64 = 1e-10;
/// Trace tolerance of a valid density matrix.
pub const TRACE_TOL: f64 = 1e-9;
/// Most negative eigenvalue tolerated without error during evolution.
pub const POSITIVITY_LIMIT: f64 = -1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("density matrix dimension must be 2 or 4, got {0}")]
    BadDimension(usize),
    #[error("invalid density matrix: {0}")]
    InvalidState(String),
    #[error("positivity violated at τ = {tau}: minimum eigenvalue {min_eigenvalue:e}")]
    PositivityViolation { tau: f64, min_eigenvalue: f64 },
    #[error("stationary state not found: generator has no unique null vector")]
    NoSteadyState,
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error(transparent)]
    Cascade(#[from] cascade::CascadeError),
}

/// Dense density matrix of one (dim 2) or two (dim 4) qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<Complex64>);

impl DensityMatrix {
    /// Checks dimension, trace, Hermiticity and positivity.
    pub fn new(m: DMatrix<Complex64>) -> Result<Self, OracleError> {
        let rho = Self::unchecked(m)?;
        let tr = rho.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > TRACE_TOL {
            return Err(OracleError::InvalidState(format!("trace {tr}")));
        }
        let h = rho.hermiticity_defect();
        if h > HERMITIAN_TOL {
            return Err(OracleError::InvalidState(format!("Hermiticity defect {h:e}")));
        }
        let e = rho.min_eigenvalue();
        if e < -1e-7 {
            return Err(OracleError::InvalidState(format!("minimum eigenvalue {e:e}")));
        }
        Ok(rho)
    }

    fn unchecked(m: DMatrix<Complex64>) -> Result<Self, OracleError> {
        if !m.is_square() || !(m.nrows() == 2 || m.nrows() == 4) {
            return Err(OracleError::BadDimension(m.nrows()));
        }
        Ok(DensityMatrix(m))
    }

    /// `|ψ⟩⟨ψ|` of a normalized single-qubit state given as `(e, g)` amplitudes.
    pub fn pure(psi: &[Complex64]) -> Result<Self, OracleError> {
        let v = DVector::from_column_slice(psi);
        Self::new(&v * v.adjoint())
    }

    pub fn ground(dim: usize) -> Result<Self, OracleError> {
        let mut m = DMatrix::zeros(dim, dim);
        if dim != 2 && dim != 4 {
            return Err(OracleError::BadDimension(dim));
        }
        m[(dim - 1, dim - 1)] = Complex64::new(1.0, 0.0);
        Ok(DensityMatrix(m))
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self, OracleError> {
        Self::new(DMatrix::identity(dim, dim) / Complex64::new(dim as f64, 0.0))
    }

    pub fn product(source: &DensityMatrix, probe: &DensityMatrix) -> Result<Self, OracleError> {
        if source.dim() != 2 || probe.dim() != 2 {
            return Err(OracleError::BadDimension(source.dim().max(probe.dim())));
        }
        Ok(DensityMatrix(source.0.kronecker(&probe.0)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        (&self.0 - self.0.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(h).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `Tr(Aρ)`.
    pub fn expect(&self, a: &DMatrix<Complex64>) -> Complex64 {
        (a * &self.0).trace()
    }

    pub fn to_vec(&self) -> Vec<Complex64> {
        let n = self.dim();
        (0..n * n).map(|i| self.0[(i / n, i % n)]).collect()
    }

    pub fn from_vec(dim: usize, v: &[Complex64]) -> Result<Self, OracleError> {
        if v.len() != dim * dim {
            return Err(OracleError::BadDimension(dim));
        }
        Self::unchecked(DMatrix::from_row_slice(dim, dim, v))
    }

    /// Source marginal of a two-qubit state.
    pub fn source_marginal(&self) -> Result<DensityMatrix, OracleError> {
        if self.dim() != 4 {
            return Err(OracleError::BadDimension(self.dim()));
        }
        let m = DMatrix::from_fn(2, 2, |i, j| self.0[(2 * i, 2 * j)] + self.0[(2 * i + 1, 2 * j + 1)]);
        Ok(DensityMatrix(m))
    }
}

/// Generator acting on a row-major vectorized density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub dim: usize,
    pub matrix: DMatrix<Complex64>,
}

impl Liouvillian {
    pub fn apply(&self, rho: &DensityMatrix) -> DMatrix<Complex64> {
        let v = DVector::from_vec(rho.to_vec());
        let out = &self.matrix * v;
        DMatrix::from_row_slice(self.dim, self.dim, out.as_slice())
    }

    /// Largest entry of the row giving `d(Tr ρ)/dτ`.
    pub fn trace_row_defect(&self) -> f64 {
        let d = self.dim;
        (0..d * d).map(|c| (0..d).map(|i| self.matrix[(i * d + i, c)]).sum::<Complex64>().norm()).fold(0.0, f64::max)
    }
}

fn comm(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = h.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    (h.kronecker(&id) - id.kronecker(&h.transpose())) * Complex64::new(0.0, -1.0)
}

/// `L ρ = LρL† − ½{L†L, ρ}`.
fn dissipator(l: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = l.nrows();
    let id = DMatrix::<Complex64>::identity(n, n);
    let ld = l.adjoint();
    let ldl = &ld * l;
    l.kronecker(&ld.transpose()) - (ldl.kronecker(&id) + id.kronecker(&ldl.transpose())) * Complex64::new(0.5, 0.0)
}

/// `A ρ B` as a superoperator.
fn sandwich(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(&b.transpose())
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `−i[H, ρ] + γ_s D[σ₋]ρ` with `H = −(Δσ_z + Ω_s σ_x)` in the source-drive frame.
pub fn build_source_liouvillian(params: &ValidatedParams) -> Liouvillian {
    let sx = sigma_plus() + sigma_minus();
    let h = -(sigma_z() * c(params.delta) + sx * c(params.omega_s_full()));
    let matrix = comm(&h) + dissipator(&sigma_minus()) * c(params.gamma_s);
    Liouvillian { dim: 2, matrix }
}

/// Time-dependent generator of the cascaded pair in the frame rotating at
/// the mean drive frequency: `L(τ) = L₋ e^{−iδωτ} + L₀ + L₊ e^{iδωτ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeGenerator {
    pub parts: [DMatrix<Complex64>; 3],
    pub delta_omega: f64,
}

impl CascadeGenerator {
    pub fn new(params: &ValidatedParams) -> Self {
        let i = Complex64::i();
        let w = params.delta_omega - 2.0 * params.delta;
        let (os, op) = (params.omega_s_full(), params.omega_pr_full());
        let (sm_s, sp_s, sz_s) = (source_op(&sigma_minus()), source_op(&sigma_plus()), source_op(&sigma_z()));
        let (sm_p, sp_p, sz_p) = (probe_op(&sigma_minus()), probe_op(&sigma_plus()), probe_op(&sigma_z()));
        let h0 = (&sz_s + &sz_p) * c(0.5 * w);
        let h_plus = &sm_s * (i * os) - &sp_p * (i * op);
        let h_minus = &sp_s * (-i * os) + &sm_p * (i * op);
        let kappa = params.cascade_coupling();
        let id = DMatrix::<Complex64>::identity(4, 4);
        // −κ([σ₊^pr, σ₋^s ρ] + [ρσ₊^s, σ₋^pr])
        let coupling = (sandwich(&(&sp_p * &sm_s), &id) - sandwich(&sm_s, &sp_p) + sandwich(&id, &(&sp_s * &sm_p))
            - sandwich(&sm_p, &sp_s))
            * c(-kappa);
        let l0 = comm(&h0) + dissipator(&sm_s) * c(params.gamma_s) + dissipator(&sm_p) * c(params.gamma_pr) + coupling;
        CascadeGenerator { parts: [comm(&h_minus), l0, comm(&h_plus)], delta_omega: params.delta_omega }
    }

    pub fn at(&self, tau: f64) -> Liouvillian {
        let e = Complex64::from_polar(1.0, self.delta_omega * tau);
        let matrix = &self.parts[0] * e.conj() + &self.parts[1] + &self.parts[2] * e;
        Liouvillian { dim: 4, matrix }
    }

    fn apply_into(&self, tau: f64, v: &[Complex64], out: &mut [Complex64]) {
        let e = Complex64::from_polar(1.0, self.delta_omega * tau);
        let weights = [e.conj(), Complex64::new(1.0, 0.0), e];
        let n = v.len();
        out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
        for (part, wgt) in self.parts.iter().zip(weights) {
            for r in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, x) in v.iter().enumerate() {
                    acc += part[(r, k)] * x;
                }
                out[r] += wgt * acc;
            }
        }
    }
}

pub fn build_cascade_liouvillian(params: &ValidatedParams, tau: f64) -> Liouvillian {
    CascadeGenerator::new(params).at(tau)
}

/// Sampled density-matrix evolution.
#[derive(Debug, Clone)]
pub struct DensityTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    /// Smallest eigenvalue seen over all samples.
    pub min_eigenvalue: f64,
}

impl DensityTrajectory {
    pub fn moments(&self) -> Vec<MomentState> {
        self.states.iter().map(moments_from_density).collect()
    }

    /// Rows of `tau` followed by row-major `re,im` entries `r{i}{j}`.
    pub fn write_csv(&self, w: &mut dyn Write) -> io::Result<()> {
        let Some(first) = self.states.first() else {
            return writeln!(w, "tau");
        };
        let d = first.dim();
        write!(w, "tau")?;
        for i in 0..d {
            for j in 0..d {
                write!(w, ",r{i}{j}_re,r{i}{j}_im")?;
            }
        }
        writeln!(w)?;
        for (t, rho) in self.times.iter().zip(&self.states) {
            write!(w, "{}", num(*t))?;
            for z in rho.to_vec() {
                write!(w, ",{},{}", num(z.re), num(z.im))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Evolves `rho0` under the source (dim 2) or cascade (dim 4) generator and
/// samples on `grid`, checking positivity at every sample.
pub fn evolve_density(
    rho0: &DensityMatrix,
    grid: &[f64],
    params: &ValidatedParams,
    tol: Tolerance,
) -> Result<DensityTrajectory, OracleError> {
    let d = rho0.dim();
    let t0 = grid.first().copied().unwrap_or(0.0);
    let t1 = grid.last().copied().unwrap_or(0.0);
    let y0 = rho0.to_vec();
    let traj = if d == 2 {
        let l = build_source_liouvillian(params).matrix;
        let sys = FnSystem::new(4, move |_t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            for (r, o) in dy.iter_mut().enumerate() {
                *o = (0..4).map(|k| l[(r, k)] * y[k]).sum();
            }
        });
        ode::integrate(&sys, &y0, (t0, t1), tol.into(), &Output::Grid(grid.to_vec()))?.0
    } else {
        let gen = CascadeGenerator::new(params);
        let sys = FnSystem::new(16, move |t: f64, y: &[Complex64], dy: &mut [Complex64]| gen.apply_into(t, y, dy));
        ode::integrate(&sys, &y0, (t0, t1), tol.into(), &Output::Grid(grid.to_vec()))?.0
    };
    let mut states = Vec::with_capacity(traj.len());
    let mut min_eigenvalue = f64::INFINITY;
    for (i, &tau) in traj.times().iter().enumerate() {
        let rho = DensityMatrix::from_vec(d, traj.state(i))?;
        let e = rho.min_eigenvalue();
        if e < POSITIVITY_LIMIT {
            return Err(OracleError::PositivityViolation { tau, min_eigenvalue: e });
        }
        min_eigenvalue = min_eigenvalue.min(e);
        states.push(rho);
    }
    Ok(DensityTrajectory { times: traj.times().to_vec(), states, min_eigenvalue })
}

/// All fifteen moments `Tr(Aρ)`. A dim-2 input fills only the source slots.
pub fn moments_from_density(rho: &DensityMatrix) -> MomentState {
    use cascade::*;
    let mut m = MomentState::zeros();
    let (sm, sp, sz) = (sigma_minus(), sigma_plus(), sigma_z());
    if rho.dim() == 2 {
        m[SM_S] = rho.expect(&sm);
        m[SZ_S] = rho.expect(&sz);
        m[SP_S] = rho.expect(&sp);
        return m;
    }
    let pair = |a: &DMatrix<Complex64>, b: &DMatrix<Complex64>| rho.expect(&kron(a, b));
    let id = DMatrix::<Complex64>::identity(2, 2);
    m[SM_S] = pair(&sm, &id);
    m[SZ_S] = pair(&sz, &id);
    m[SM_PR] = pair(&id, &sm);
    m[SZ_PR] = pair(&id, &sz);
    m[SM_S_SP_PR] = pair(&sm, &sp);
    m[SP_S_SP_PR] = pair(&sp, &sp);
    m[SP_S_SZ_PR] = pair(&sp, &sz);
    m[SZ_S_SZ_PR] = pair(&sz, &sz);
    m[SZ_S_SM_PR] = pair(&sz, &sm);
    m[SM_S_SM_PR] = pair(&sm, &sm);
    m[SM_S_SZ_PR] = pair(&sm, &sz);
    m[SP_S_SM_PR] = pair(&sp, &sm);
    m[SZ_S_SP_PR] = pair(&sz, &sp);
    m[SP_S] = pair(&sp, &id);
    m[SP_PR] = pair(&id, &sp);
    m
}

/// Moments of `Lρ`, i.e. the exact time derivative of every moment.
pub fn moment_derivative(gen: &Liouvillian, rho: &DensityMatrix) -> MomentState {
    let d = DensityMatrix(gen.apply(rho));
    moments_from_density(&d)
}

/// Maps a source-frame state onto the cascade frame at time `tau`:
/// the coherence `⟨σ₋⟩` picks up the factor `i·e^{−iδωτ}`.
pub fn source_to_cascade_frame(rho: &DensityMatrix, tau: f64, delta_omega: f64) -> DensityMatrix {
    let mut m = rho.0.clone();
    let phase = Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, -delta_omega * tau);
    m[(0, 1)] *= phase;
    m[(1, 0)] *= phase.conj();
    DensityMatrix(m)
}

/// Result of comparing the moment system against the density-matrix oracle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalencePoint {
    pub gamma_ratio: f64,
    pub omega_s_ratio: f64,
    pub omega_pr: f64,
    /// `max_τ ‖moments(ρ(τ)) − x(τ)‖∞`.
    pub max_deviation: f64,
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub t_end: f64,
    pub samples: usize,
    pub points: Vec<EquivalencePoint>,
    pub max_deviation: f64,
}

/// Grid `γ_s/γ_pr ∈ {0.1, 1, 10} × Ω_s/γ_s ∈ {0.5, 5, 50} × Ω_pr ∈ {0, 0.2}`.
pub fn default_equivalence_grid() -> Vec<(f64, f64, f64)> {
    let mut out = Vec::new();
    for g in [0.1, 1.0, 10.0] {
        for r in [0.5, 5.0, 50.0] {
            for op in [0.0, 0.2] {
                out.push((g, r, op));
            }
        }
    }
    out
}

/// Both models from the joint ground state over `[0, t_end]`.
pub fn equivalence_deviation(
    params: &ValidatedParams,
    t_end: f64,
    samples: usize,
    tol: Tolerance,
) -> Result<(f64, f64), OracleError> {
    let grid: Vec<f64> = (0..=samples).map(|j| t_end * j as f64 / samples as f64).collect();
    let dens = evolve_density(&DensityMatrix::ground(4)?, &grid, params, tol)?;
    let (traj, _) = cascade::integrate(params, &MomentState::ground(), (0.0, t_end), tol, &Output::Grid(grid))?;
    let mut worst: f64 = 0.0;
    for (i, rho) in dens.states.iter().enumerate() {
        let a = moments_from_density(rho);
        let b = MomentState::from_slice(traj.state(i));
        worst = worst.max(a.max_abs_diff(&b));
    }
    debug_assert_eq!(traj.dim(), N_MOMENTS);
    Ok((worst, dens.min_eigenvalue))
}

/// Runs [`equivalence_deviation`] over `grid` entries `(γ_s/γ_pr, Ω_s/γ_s, Ω_pr)`
/// with the remaining parameters taken from `base`.
pub fn equivalence_report(
    base: &SystemParams,
    grid: &[(f64, f64, f64)],
    t_end: f64,
    samples: usize,
    tol: Tolerance,
) -> Result<EquivalenceReport, OracleError> {
    let mut points = Vec::new();
    for &(g, r, op) in grid {
        let mut p = *base;
        p.gamma_s = g * p.gamma_pr;
        p.omega_rabi_s = r * p.gamma_s;
        p.omega_rabi_pr = op;
        let vp = p.validate().map_err(cascade::CascadeError::from)?;
        let (max_deviation, min_eigenvalue) = equivalence_deviation(&vp, t_end, samples, tol)?;
        points.push(EquivalencePoint { gamma_ratio: g, omega_s_ratio: r, omega_pr: op, max_deviation, min_eigenvalue });
    }
    let max_deviation = points.iter().map(|p| p.max_deviation).fold(0.0, f64::max);
    Ok(EquivalenceReport { t_end, samples, points, max_deviation })
}
