//! The closed 15-moment system of the cascaded pair.
//!
//! Frame: both qubits are viewed in the frame of the midpoint frequency
//! `ω_d`. The source drive rotates as `e^{−iδωτ}`, the probe drive as
//! `e^{+iδωτ}`, and both qubits carry the free term `((δω − 2Δ)/2)·σ_z`.
//! Drive amplitudes enter in the `Full` convention.

use std::fmt;
use std::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::params::ValidatedParams;

pub const N_MOMENTS: usize = 15;

pub const SM_S: usize = 0;
pub const SZ_S: usize = 1;
pub const SM_PR: usize = 2;
pub const SZ_PR: usize = 3;
pub const SM_S_SP_PR: usize = 4;
pub const SP_S_SP_PR: usize = 5;
pub const SP_S_SZ_PR: usize = 6;
pub const SZ_S_SZ_PR: usize = 7;
pub const SZ_S_SM_PR: usize = 8;
pub const SM_S_SM_PR: usize = 9;
pub const SM_S_SZ_PR: usize = 10;
pub const SP_S_SM_PR: usize = 11;
pub const SZ_S_SP_PR: usize = 12;
pub const SP_S: usize = 13;
pub const SP_PR: usize = 14;

/// Column names in slot order, used by CSV export.
pub const MOMENT_NAMES: [&str; N_MOMENTS] = [
    "sm_s",
    "sz_s",
    "sm_pr",
    "sz_pr",
    "sm_s_sp_pr",
    "sp_s_sp_pr",
    "sp_s_sz_pr",
    "sz_s_sz_pr",
    "sz_s_sm_pr",
    "sm_s_sm_pr",
    "sm_s_sz_pr",
    "sp_s_sm_pr",
    "sz_s_sp_pr",
    "sp_s",
    "sp_pr",
];

/// Slot pairs `(a, b)` with `x[b] = conj(x[a])`.
pub const CONJUGATE_PAIRS: [(usize, usize); 5] =
    [(SM_S, SP_S), (SM_PR, SP_PR), (SM_S_SP_PR, SP_S_SM_PR), (SP_S_SP_PR, SM_S_SM_PR), (SM_S_SZ_PR, SP_S_SZ_PR)];

/// The remaining pairing, kept separate because both sides are probe-block slots.
pub const CONJUGATE_PAIR_ZM: (usize, usize) = (SZ_S_SM_PR, SZ_S_SP_PR);

/// Slots that are real expectation values.
pub const REAL_SLOTS: [usize; 3] = [SZ_S, SZ_PR, SZ_S_SZ_PR];

/// Source-only slots, in block order.
pub const SOURCE_SLOTS: [usize; 3] = [SM_S, SZ_S, SP_S];

/// Probe and cross slots, in block order.
pub const PROBE_SLOTS: [usize; 12] = [
    SM_PR, SZ_PR, SM_S_SP_PR, SP_S_SP_PR, SP_S_SZ_PR, SZ_S_SZ_PR, SZ_S_SM_PR, SM_S_SM_PR, SM_S_SZ_PR, SP_S_SM_PR,
    SZ_S_SP_PR, SP_PR,
];

#[derive(Clone, Copy, PartialEq)]
pub struct MomentState(pub [Complex64; N_MOMENTS]);

impl MomentState {
    pub fn zeros() -> Self {
        MomentState([Complex64::new(0.0, 0.0); N_MOMENTS])
    }

    /// Both qubits in their ground state.
    pub fn ground() -> Self {
        Self::product(Complex64::new(0.0, 0.0), -1.0, Complex64::new(0.0, 0.0), -1.0)
    }

    /// Uncorrelated product state from single-qubit `⟨σ₋⟩` and `⟨σ_z⟩`.
    pub fn product(sm_s: Complex64, sz_s: f64, sm_pr: Complex64, sz_pr: f64) -> Self {
        let (sp_s, sp_pr) = (sm_s.conj(), sm_pr.conj());
        let (zs, zp) = (Complex64::from(sz_s), Complex64::from(sz_pr));
        let mut x = [Complex64::new(0.0, 0.0); N_MOMENTS];
        x[SM_S] = sm_s;
        x[SZ_S] = zs;
        x[SM_PR] = sm_pr;
        x[SZ_PR] = zp;
        x[SM_S_SP_PR] = sm_s * sp_pr;
        x[SP_S_SP_PR] = sp_s * sp_pr;
        x[SP_S_SZ_PR] = sp_s * zp;
        x[SZ_S_SZ_PR] = zs * zp;
        x[SZ_S_SM_PR] = zs * sm_pr;
        x[SM_S_SM_PR] = sm_s * sm_pr;
        x[SM_S_SZ_PR] = sm_s * zp;
        x[SP_S_SM_PR] = sp_s * sm_pr;
        x[SZ_S_SP_PR] = zs * sp_pr;
        x[SP_S] = sp_s;
        x[SP_PR] = sp_pr;
        MomentState(x)
    }

    pub fn from_slice(s: &[Complex64]) -> Self {
        let mut x = [Complex64::new(0.0, 0.0); N_MOMENTS];
        x.copy_from_slice(s);
        MomentState(x)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    /// Largest violation of the conjugation pairing and realness invariants.
    pub fn pairing_defect(&self) -> f64 {
        let x = &self.0;
        let mut worst: f64 = 0.0;
        for (a, b) in CONJUGATE_PAIRS.iter().chain(std::iter::once(&CONJUGATE_PAIR_ZM)) {
            worst = worst.max((x[*a].conj() - x[*b]).norm());
        }
        for &r in &REAL_SLOTS {
            worst = worst.max(x[r].im.abs());
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &MomentState) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<usize> for MomentState {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for MomentState {
    fn index_mut(&mut self, i: usize) -> &mut Complex64 {
        &mut self.0[i]
    }
}

impl fmt::Debug for MomentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut m = f.debug_map();
        for (name, v) in MOMENT_NAMES.iter().zip(&self.0) {
            m.entry(name, v);
        }
        m.finish()
    }
}

/// Rate constants of the moment equations, precomputed from parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates {
    pub gs: f64,
    pub gp: f64,
    pub alpha: f64,
    pub os: f64,
    pub op: f64,
    /// Free rotation frequency `δω − 2Δ` of `σ₋` in the drive frame.
    pub w: f64,
    pub dw: f64,
}

impl Rates {
    pub fn new(p: &ValidatedParams) -> Self {
        Rates {
            gs: p.gamma_s,
            gp: p.gamma_pr,
            alpha: p.cascade_coupling(),
            os: p.omega_s_full(),
            op: p.omega_pr_full(),
            w: p.delta_omega - 2.0 * p.delta,
            dw: p.delta_omega,
        }
    }

    pub fn phase(&self, tau: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.dw * tau)
    }

    /// Source block: returns `(d⟨σ₋^s⟩, d⟨σ_z^s⟩, d⟨σ₊^s⟩)`.
    #[inline]
    pub fn source(&self, e: Complex64, sm: Complex64, sz: Complex64, sp: Complex64) -> [Complex64; 3] {
        let i = Complex64::i();
        let ec = e.conj();
        let (gs, os, w) = (self.gs, self.os, self.w);
        [
            (-i * w - gs / 2.0) * sm + os * ec * sz,
            -gs - 2.0 * os * e * sm - 2.0 * os * ec * sp - gs * sz,
            (i * w - gs / 2.0) * sp + os * e * sz,
        ]
    }

    /// Probe and cross slots; reads the full state, writes [`PROBE_SLOTS`] of `dx`.
    #[inline]
    pub fn probe(&self, e: Complex64, x: &[Complex64; N_MOMENTS], dx: &mut [Complex64; N_MOMENTS]) {
        let i = Complex64::i();
        let ec = e.conj();
        let Rates { gs, gp, alpha: a, os, op, w, .. } = *self;
        let g2 = 0.5 * (gs + gp);
        dx[SM_PR] = (-i * w - gp / 2.0) * x[SM_PR] + op * e * x[SZ_PR] + a * x[SM_S_SZ_PR];
        dx[SZ_PR] = -gp
            - 2.0 * op * ec * x[SM_PR]
            - 2.0 * op * e * x[SP_PR]
            - gp * x[SZ_PR]
            - 2.0 * a * x[SM_S_SP_PR]
            - 2.0 * a * x[SP_S_SM_PR];
        dx[SM_S_SP_PR] = 0.5 * a * x[SZ_PR] - g2 * x[SM_S_SP_PR]
            + op * ec * x[SM_S_SZ_PR]
            + os * ec * x[SZ_S_SP_PR]
            + 0.5 * a * x[SZ_S_SZ_PR];
        dx[SP_S_SP_PR] = (2.0 * i * w - g2) * x[SP_S_SP_PR] + op * ec * x[SP_S_SZ_PR] + os * e * x[SZ_S_SP_PR];
        dx[SP_S_SZ_PR] = -a * x[SP_PR] - gp * x[SP_S] - 2.0 * op * ec * x[SP_S_SM_PR] - 2.0 * op * e * x[SP_S_SP_PR]
            + (i * w - gs / 2.0 - gp) * x[SP_S_SZ_PR]
            - a * x[SZ_S_SP_PR]
            + os * e * x[SZ_S_SZ_PR];
        dx[SZ_S_SZ_PR] = -gs * x[SZ_PR] + 2.0 * a * x[SM_S_SP_PR] - 2.0 * os * e * x[SM_S_SZ_PR]
            + 2.0 * a * x[SP_S_SM_PR]
            - 2.0 * os * ec * x[SP_S_SZ_PR]
            - gp * x[SZ_S]
            - 2.0 * op * ec * x[SZ_S_SM_PR]
            - 2.0 * op * e * x[SZ_S_SP_PR]
            - (gs + gp) * x[SZ_S_SZ_PR];
        dx[SZ_S_SM_PR] =
            -gs * x[SM_PR] - 2.0 * os * e * x[SM_S_SM_PR] - a * x[SM_S_SZ_PR] - 2.0 * os * ec * x[SP_S_SM_PR]
                + (-i * w - gs - gp / 2.0) * x[SZ_S_SM_PR]
                + op * e * x[SZ_S_SZ_PR];
        dx[SM_S_SM_PR] = (-2.0 * i * w - g2) * x[SM_S_SM_PR] + op * e * x[SM_S_SZ_PR] + os * ec * x[SZ_S_SM_PR];
        dx[SM_S_SZ_PR] = -a * x[SM_PR] - gp * x[SM_S] - 2.0 * op * ec * x[SM_S_SM_PR] - 2.0 * op * e * x[SM_S_SP_PR]
            + (-i * w - gs / 2.0 - gp) * x[SM_S_SZ_PR]
            - a * x[SZ_S_SM_PR]
            + os * ec * x[SZ_S_SZ_PR];
        dx[SP_S_SM_PR] = 0.5 * a * x[SZ_PR] - g2 * x[SP_S_SM_PR]
            + op * e * x[SP_S_SZ_PR]
            + os * e * x[SZ_S_SM_PR]
            + 0.5 * a * x[SZ_S_SZ_PR];
        dx[SZ_S_SP_PR] =
            -gs * x[SP_PR] - 2.0 * os * e * x[SM_S_SP_PR] - 2.0 * os * ec * x[SP_S_SP_PR] - a * x[SP_S_SZ_PR]
                + (i * w - gs - gp / 2.0) * x[SZ_S_SP_PR]
                + op * ec * x[SZ_S_SZ_PR];
        dx[SP_PR] = (i * w - gp / 2.0) * x[SP_PR] + op * ec * x[SZ_PR] + a * x[SP_S_SZ_PR];
    }

    pub fn full(&self, tau: f64, x: &[Complex64; N_MOMENTS], dx: &mut [Complex64; N_MOMENTS]) {
        let e = self.phase(tau);
        let [a, b, c] = self.source(e, x[SM_S], x[SZ_S], x[SP_S]);
        dx[SM_S] = a;
        dx[SZ_S] = b;
        dx[SP_S] = c;
        self.probe(e, x, dx);
    }
}

/// Time derivative of the moment vector.
pub fn moment_rhs(state: &MomentState, tau: f64, params: &ValidatedParams) -> MomentState {
    let mut dx = MomentState::zeros();
    Rates::new(params).full(tau, &state.0, &mut dx.0);
    dx
}
