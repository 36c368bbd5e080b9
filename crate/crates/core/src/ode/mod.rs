//! Adaptive explicit Runge–Kutta integration of complex ODE systems.
//!
//! The stepper is Hairer's DOP853: an 8th-order method with embedded 5th and
//! 3rd order error estimators and a 7th-order continuous extension.

mod tableau;
mod trajectory;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use tableau::*;
pub use trajectory::Trajectory;

/// A first-order system `dy/dt = f(t, y)` over complex state.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]);
}

impl<S: OdeSystem + ?Sized> OdeSystem for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        (**self).rhs(t, y, dy)
    }
}

/// Adapter turning a closure into an [`OdeSystem`].
pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &[Complex64], &mut [Complex64])> FnSystem<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnSystem { dim, f }
    }
}

impl<F: Fn(f64, &[Complex64], &mut [Complex64])> OdeSystem for FnSystem<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, t: f64, y: &[Complex64], dy: &mut [Complex64]) {
        (self.f)(t, y, dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-9, abs: 1e-12 }
    }
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Result<Self, OdeError> {
        let tol = Tolerance { rel, abs };
        tol.check()?;
        Ok(tol)
    }

    pub fn check(&self) -> Result<(), OdeError> {
        if !(1e-12..=1e-3).contains(&self.rel) {
            return Err(OdeError::InvalidTolerance(format!("rel must lie in [1e-12, 1e-3], got {}", self.rel)));
        }
        if !(self.abs > 0.0 && self.abs.is_finite()) {
            return Err(OdeError::InvalidTolerance(format!("abs must be positive, got {}", self.abs)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {max_steps} exhausted at t = {t}")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),
    #[error("invalid span [{0}, {1}]")]
    InvalidSpan(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperOptions {
    pub tol: Tolerance,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for StepperOptions {
    fn default() -> Self {
        StepperOptions { tol: Tolerance::default(), max_steps: 200_000_000, h_max: f64::INFINITY }
    }
}

impl From<Tolerance> for StepperOptions {
    fn from(tol: Tolerance) -> Self {
        StepperOptions { tol, ..StepperOptions::default() }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evals: usize,
}

const SAFE: f64 = 0.9;
const FACC1: f64 = 1.0 / 0.333;
const FACC2: f64 = 1.0 / 6.0;
const EXPO1: f64 = 1.0 / 8.0;

/// Forward-in-time DOP853 stepper. After every accepted step the continuous
/// extension over `[t_prev, t]` is available through [`Dop853::dense`].
pub struct Dop853<S> {
    sys: S,
    opts: StepperOptions,
    n: usize,
    t: f64,
    t_prev: f64,
    h: f64,
    h_prev: f64,
    y: Vec<Complex64>,
    y_prev: Vec<Complex64>,
    // k[0..12]: stages 1..12, k[12]: f(t_new, y_new), k[13..16]: dense stages.
    k: Vec<Vec<Complex64>>,
    tmp: Vec<Complex64>,
    cont: Vec<Vec<Complex64>>,
    dense_ready: bool,
    last_rejected: bool,
    stats: StepStats,
}

impl<S: OdeSystem> Dop853<S> {
    pub fn new(sys: S, t0: f64, y0: &[Complex64], opts: StepperOptions) -> Result<Self, OdeError> {
        opts.tol.check()?;
        let n = sys.dim();
        assert_eq!(y0.len(), n, "initial state has wrong dimension");
        if y0.iter().any(|z| !z.is_finite()) {
            return Err(OdeError::NonFinite { t: t0 });
        }
        let zero = vec![Complex64::new(0.0, 0.0); n];
        let mut k = vec![zero.clone(); 16];
        sys.rhs(t0, y0, &mut k[0]);
        if k[0].iter().any(|z| !z.is_finite()) {
            return Err(OdeError::NonFinite { t: t0 });
        }
        let mut st = Dop853 {
            sys,
            opts,
            n,
            t: t0,
            t_prev: t0,
            h: 0.0,
            h_prev: 0.0,
            y: y0.to_vec(),
            y_prev: y0.to_vec(),
            k,
            tmp: zero.clone(),
            cont: vec![zero; 8],
            dense_ready: false,
            last_rejected: false,
            stats: StepStats { evals: 1, ..StepStats::default() },
        };
        st.h = st.initial_step();
        Ok(st)
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn t_prev(&self) -> f64 {
        self.t_prev
    }

    pub fn y(&self) -> &[Complex64] {
        &self.y
    }

    /// Derivative at the current point.
    pub fn dydt(&self) -> &[Complex64] {
        &self.k[0]
    }

    pub fn stats(&self) -> StepStats {
        self.stats
    }

    pub fn system(&self) -> &S {
        &self.sys
    }

    fn sk(&self, a: Complex64, b: Complex64) -> f64 {
        self.opts.tol.abs + self.opts.tol.rel * a.norm().max(b.norm())
    }

    fn initial_step(&mut self) -> f64 {
        let n = self.n;
        let (mut dnf, mut dny) = (0.0, 0.0);
        for i in 0..n {
            let sk = self.opts.tol.abs + self.opts.tol.rel * self.y[i].norm();
            dnf += (self.k[0][i].norm() / sk).powi(2);
            dny += (self.y[i].norm() / sk).powi(2);
        }
        let mut h = if dnf <= 1e-10 || dny <= 1e-10 { 1e-6 } else { (dny / dnf).sqrt() * 0.01 };
        h = h.min(self.opts.h_max);
        for i in 0..n {
            self.tmp[i] = self.y[i] + self.k[0][i] * h;
        }
        let (head, tail) = self.k.split_at_mut(1);
        self.sys.rhs(self.t + h, &self.tmp, &mut tail[0]);
        self.stats.evals += 1;
        let mut der2 = 0.0;
        for i in 0..n {
            let sk = self.opts.tol.abs + self.opts.tol.rel * self.y[i].norm();
            der2 += ((tail[0][i] - head[0][i]).norm() / sk).powi(2);
        }
        let der2 = der2.sqrt() / h;
        let der12 = der2.abs().max(dnf.sqrt());
        let h1 = if der12 <= 1e-15 { (h * 1e-3).max(1e-6) } else { (0.01 / der12).powf(1.0 / 8.0) };
        let h = (100.0 * h).min(h1).min(self.opts.h_max);
        if h.is_finite() && h > 0.0 {
            h
        } else {
            1e-6
        }
    }

    /// Combination `y + h·Σ a_j k_j` into `tmp`.
    fn stage_input(&mut self, h: f64, coeffs: &[(usize, f64)]) {
        for i in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for &(j, a) in coeffs {
                acc += self.k[j][i] * a;
            }
            self.tmp[i] = self.y[i] + acc * h;
        }
    }

    fn eval_stage(&mut self, c: f64, h: f64, coeffs: &[(usize, f64)], out: usize) {
        self.stage_input(h, coeffs);
        let t = self.t + c * h;
        let (sys, tmp, k) = (&self.sys, &self.tmp, &mut self.k);
        sys.rhs(t, tmp, &mut k[out]);
        self.stats.evals += 1;
    }

    /// Advances by one accepted step, never stepping beyond `t_limit`.
    pub fn step(&mut self, t_limit: f64) -> Result<(), OdeError> {
        if t_limit <= self.t {
            return Err(OdeError::InvalidSpan(self.t, t_limit));
        }
        loop {
            if self.stats.accepted + self.stats.rejected >= self.opts.max_steps {
                return Err(OdeError::TooManySteps { t: self.t, max_steps: self.opts.max_steps });
            }
            let remaining = t_limit - self.t;
            let mut h = self.h.min(self.opts.h_max);
            // Land exactly on the limit instead of leaving a sliver.
            if h >= remaining || remaining - h < 1e-10 * remaining {
                h = remaining;
            }
            if h < 1e-14 * self.t.abs().max(1.0) {
                return Err(OdeError::StepSizeUnderflow { t: self.t, h });
            }
            self.try_step(h);
            let t_new = if h == remaining { t_limit } else { self.t + h };

            let n = self.n;
            let (mut err, mut err2) = (0.0, 0.0);
            // tmp now holds y_new; k[13] holds the 8th-order increment.
            for i in 0..n {
                let sk = self.sk(self.y[i], self.tmp[i]);
                let k = &self.k;
                let e3 = k[13][i] - k[0][i] * BHH1 - k[8][i] * BHH2 - k[11][i] * BHH3;
                err2 += (e3.norm() / sk).powi(2);
                let e8 = k[0][i] * ER1
                    + k[5][i] * ER6
                    + k[6][i] * ER7
                    + k[7][i] * ER8
                    + k[8][i] * ER9
                    + k[9][i] * ER10
                    + k[10][i] * ER11
                    + k[11][i] * ER12;
                err += (e8.norm() / sk).powi(2);
            }
            let mut deno = err + 0.01 * err2;
            if deno <= 0.0 {
                deno = 1.0;
            }
            let err = h * err * (1.0 / (deno * n as f64)).sqrt();

            if !err.is_finite() {
                self.stats.rejected += 1;
                self.last_rejected = true;
                self.h = h * 0.1;
                continue;
            }

            let fac11 = err.powf(EXPO1);
            if err <= 1.0 {
                if self.tmp.iter().any(|z| !z.is_finite()) {
                    return Err(OdeError::NonFinite { t: t_new });
                }
                let fac = FACC2.max(FACC1.min(fac11 / SAFE));
                let mut h_new = h / fac;
                if self.last_rejected {
                    h_new = h_new.min(h);
                }
                self.stats.accepted += 1;
                self.last_rejected = false;
                std::mem::swap(&mut self.y_prev, &mut self.y);
                self.y.copy_from_slice(&self.tmp);
                let (sys, y, k) = (&self.sys, &self.y, &mut self.k);
                sys.rhs(t_new, y, &mut k[12]);
                self.stats.evals += 1;
                if self.k[12].iter().any(|z| !z.is_finite()) {
                    return Err(OdeError::NonFinite { t: t_new });
                }
                self.t_prev = self.t;
                self.t = t_new;
                self.h_prev = t_new - self.t_prev;
                self.h = h_new;
                self.dense_ready = false;
                // Stage 1 of the next step is f(t_new, y_new); the previous
                // stage 1 is kept in k[14] for the continuous extension.
                self.k.swap(0, 12);
                self.k.swap(12, 14);
                return Ok(());
            }
            self.h = h / FACC1.min(fac11 / SAFE);
            self.stats.rejected += 1;
            self.last_rejected = true;
        }
    }

    /// Stages 2..12 of a trial step of size `h`; leaves `y_new` in `tmp`
    /// and the weighted increment in `k[13]`.
    fn try_step(&mut self, h: f64) {
        self.eval_stage(C2, h, &[(0, A21)], 1);
        self.eval_stage(C3, h, &[(0, A31), (1, A32)], 2);
        self.eval_stage(C4, h, &[(0, A41), (2, A43)], 3);
        self.eval_stage(C5, h, &[(0, A51), (2, A53), (3, A54)], 4);
        self.eval_stage(C6, h, &[(0, A61), (3, A64), (4, A65)], 5);
        self.eval_stage(C7, h, &[(0, A71), (3, A74), (4, A75), (5, A76)], 6);
        self.eval_stage(C8, h, &[(0, A81), (3, A84), (4, A85), (5, A86), (6, A87)], 7);
        self.eval_stage(C9, h, &[(0, A91), (3, A94), (4, A95), (5, A96), (6, A97), (7, A98)], 8);
        self.eval_stage(C10, h, &[(0, A101), (3, A104), (4, A105), (5, A106), (6, A107), (7, A108), (8, A109)], 9);
        self.eval_stage(
            C11,
            h,
            &[(0, A111), (3, A114), (4, A115), (5, A116), (6, A117), (7, A118), (8, A119), (9, A1110)],
            10,
        );
        self.eval_stage(
            1.0,
            h,
            &[(0, A121), (3, A124), (4, A125), (5, A126), (6, A127), (7, A128), (8, A129), (9, A1210), (10, A1211)],
            11,
        );
        for i in 0..self.n {
            let k = &self.k;
            let incr = k[0][i] * B1
                + k[5][i] * B6
                + k[6][i] * B7
                + k[7][i] * B8
                + k[8][i] * B9
                + k[9][i] * B10
                + k[10][i] * B11
                + k[11][i] * B12;
            self.k[13][i] = incr;
            self.tmp[i] = self.y[i] + incr * h;
        }
    }

    /// Continuous extension over the last accepted step, `t ∈ [t_prev, t]`.
    pub fn dense(&mut self, t: f64, out: &mut [Complex64]) {
        if !self.dense_ready {
            self.prepare_dense();
        }
        self.dense_at(t, out);
    }

    /// Copies the continuous extension of the last accepted step.
    pub fn copy_dense(&mut self, seg: &mut DenseSegment) {
        if !self.dense_ready {
            self.prepare_dense();
        }
        seg.t0 = self.t_prev;
        seg.h = self.h_prev;
        seg.n = self.n;
        seg.cont.clear();
        for c in &self.cont {
            seg.cont.extend_from_slice(c);
        }
    }

    fn dense_at(&self, t: f64, out: &mut [Complex64]) {
        let h = self.h_prev;
        let s = if h > 0.0 { (t - self.t_prev) / h } else { 0.0 };
        let s1 = 1.0 - s;
        let c = &self.cont;
        for i in 0..self.n {
            let conpar = c[4][i] + (c[5][i] + (c[6][i] + c[7][i] * s) * s1) * s;
            out[i] = c[0][i] + (c[1][i] + (c[2][i] + (c[3][i] + conpar * s1) * s) * s1) * s;
        }
    }

    pub fn prepare_dense(&mut self) {
        if !self.dense_ready {
            self.compute_dense();
        }
    }

    // Stage layout after acceptance: k[14] = stage 1 of the step,
    // k[1..12] = stages 2..12, k[0] = f(t_new, y_new).
    fn compute_dense(&mut self) {
        let n = self.n;
        let h = self.h_prev;
        let (k1, k13) = (14usize, 0usize);
        for i in 0..n {
            let k = &self.k;
            let ydiff = self.y[i] - self.y_prev[i];
            let bspl = k[k1][i] * h - ydiff;
            self.cont[0][i] = self.y_prev[i];
            self.cont[1][i] = ydiff;
            self.cont[2][i] = bspl;
            self.cont[3][i] = ydiff - k[k13][i] * h - bspl;
            let d = |c1: f64, c6: f64, c7: f64, c8: f64, c9: f64, c10: f64, c11: f64, c12: f64| {
                k[k1][i] * c1
                    + k[5][i] * c6
                    + k[6][i] * c7
                    + k[7][i] * c8
                    + k[8][i] * c9
                    + k[9][i] * c10
                    + k[10][i] * c11
                    + k[11][i] * c12
            };
            self.cont[4][i] = d(D41, D46, D47, D48, D49, D410, D411, D412);
            self.cont[5][i] = d(D51, D56, D57, D58, D59, D510, D511, D512);
            self.cont[6][i] = d(D61, D66, D67, D68, D69, D610, D611, D612);
            self.cont[7][i] = d(D71, D76, D77, D78, D79, D710, D711, D712);
        }
        // Three extra stages on the previous step, stored in k[12], k[13], k[15].
        let t0 = self.t_prev;
        let combo = |k: &Vec<Vec<Complex64>>, y: &[Complex64], cs: &[(usize, f64)], tmp: &mut [Complex64]| {
            for i in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(j, a) in cs {
                    acc += k[j][i] * a;
                }
                tmp[i] = y[i] + acc * h;
            }
        };
        combo(
            &self.k,
            &self.y_prev,
            &[(k1, A141), (6, A147), (7, A148), (8, A149), (9, A1410), (10, A1411), (11, A1412), (k13, A1413)],
            &mut self.tmp,
        );
        self.sys.rhs(t0 + C14 * h, &self.tmp, &mut self.k[12]);
        combo(
            &self.k,
            &self.y_prev,
            &[(k1, A151), (5, A156), (6, A157), (7, A158), (10, A1511), (11, A1512), (k13, A1513), (12, A1514)],
            &mut self.tmp,
        );
        self.sys.rhs(t0 + C15 * h, &self.tmp, &mut self.k[13]);
        combo(
            &self.k,
            &self.y_prev,
            &[(k1, A161), (5, A166), (6, A167), (7, A168), (8, A169), (k13, A1613), (12, A1614), (13, A1615)],
            &mut self.tmp,
        );
        self.sys.rhs(t0 + C16 * h, &self.tmp, &mut self.k[15]);
        self.stats.evals += 3;
        for i in 0..n {
            let k = &self.k;
            let tail = |a: f64, b: f64, c: f64, d: f64| k[k13][i] * a + k[12][i] * b + k[13][i] * c + k[15][i] * d;
            self.cont[4][i] = (self.cont[4][i] + tail(D413, D414, D415, D416)) * h;
            self.cont[5][i] = (self.cont[5][i] + tail(D513, D514, D515, D516)) * h;
            self.cont[6][i] = (self.cont[6][i] + tail(D613, D614, D615, D616)) * h;
            self.cont[7][i] = (self.cont[7][i] + tail(D713, D714, D715, D716)) * h;
        }
        self.dense_ready = true;
    }
}

/// Continuous extension of a single step, detached from its stepper.
#[derive(Debug, Clone, Default)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    n: usize,
    cont: Vec<Complex64>,
}

impl DenseSegment {
    pub fn t_end(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64, out: &mut [Complex64]) {
        let n = self.n;
        let s = if self.h > 0.0 { (t - self.t0) / self.h } else { 0.0 };
        let s1 = 1.0 - s;
        let c = |k: usize, i: usize| self.cont[k * n + i];
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let conpar = c(4, i) + (c(5, i) + (c(6, i) + c(7, i) * s) * s1) * s;
            *o = c(0, i) + (c(1, i) + (c(2, i) + (c(3, i) + conpar * s1) * s) * s1) * s;
        }
    }
}

/// What [`integrate`] records.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// Only the final state.
    Final,
    /// States at the given strictly increasing times inside the span.
    Grid(Vec<f64>),
    /// Every accepted step together with its continuous extension.
    Steps,
}

/// Integrates `sys` from `y0` over `span`, recording according to `output`.
pub fn integrate<S: OdeSystem>(
    sys: S,
    y0: &[Complex64],
    span: (f64, f64),
    opts: StepperOptions,
    output: &Output,
) -> Result<(Trajectory, StepStats), OdeError> {
    let (t0, t1) = span;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(OdeError::InvalidSpan(t0, t1));
    }
    if let Output::Grid(g) = output {
        if g.windows(2).any(|w| w[1] <= w[0]) || g.first().is_some_and(|&t| t < t0) || g.last().is_some_and(|&t| t > t1)
        {
            return Err(OdeError::InvalidSpan(t0, t1));
        }
    }
    let n = sys.dim();
    let mut traj = Trajectory::new(n, matches!(output, Output::Steps));
    let mut stepper = Dop853::new(sys, t0, y0, opts)?;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut next = 0usize;
    let grid: &[f64] = match output {
        Output::Grid(g) => g,
        _ => &[],
    };
    // Grid points sitting on t0 are the initial state.
    while next < grid.len() && grid[next] <= t0 {
        traj.push_sample(t0, y0);
        next += 1;
    }
    if matches!(output, Output::Steps) {
        traj.push_sample(t0, y0);
    }
    while stepper.t() < t1 {
        stepper.step(t1)?;
        let t = stepper.t();
        match output {
            Output::Grid(_) => {
                while next < grid.len() && grid[next] <= t {
                    if grid[next] == t {
                        traj.push_sample(t, stepper.y());
                    } else {
                        stepper.dense(grid[next], &mut buf);
                        traj.push_sample(grid[next], &buf);
                    }
                    next += 1;
                }
            }
            Output::Steps => {
                stepper.dense(t, &mut buf);
                traj.push_step(stepper.t_prev(), t, stepper.y(), &stepper.cont);
            }
            Output::Final => {}
        }
    }
    if matches!(output, Output::Final) {
        traj.push_sample(stepper.t(), stepper.y());
    }
    if let Output::Grid(_) = output {
        let mut derivs = vec![Complex64::new(0.0, 0.0); traj.len() * n];
        for i in 0..traj.len() {
            stepper.system().rhs(traj.times()[i], traj.state(i), &mut derivs[i * n..(i + 1) * n]);
        }
        traj.set_derivs(derivs);
    }
    Ok((traj, stepper.stats()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn exponential_decay_is_accurate() {
        let sys = FnSystem::new(1, |_t, y: &[Complex64], dy: &mut [Complex64]| dy[0] = -y[0]);
        let (traj, _) = integrate(
            &sys,
            &[c(1.0)],
            (0.0, 5.0),
            Tolerance::new(1e-10, 1e-13).unwrap().into(),
            &Output::Grid(vec![0.5, 1.0, 5.0]),
        )
        .unwrap();
        for (i, &t) in [0.5f64, 1.0, 5.0].iter().enumerate() {
            assert!((traj.state(i)[0].re - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn rotation_stays_on_circle() {
        let sys = FnSystem::new(1, |_t, y: &[Complex64], dy: &mut [Complex64]| dy[0] = Complex64::i() * 3.0 * y[0]);
        let (traj, _) = integrate(&sys, &[c(1.0)], (0.0, 20.0), StepperOptions::default(), &Output::Final).unwrap();
        let z = traj.state(0)[0];
        assert!((z - Complex64::from_polar(1.0, 60.0)).norm() < 1e-7);
    }

    #[test]
    fn dense_output_matches_solution_between_steps() {
        let sys = FnSystem::new(2, |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = y[1];
            dy[1] = -y[0] + c(0.1 * t.cos());
        });
        let opts = Tolerance::new(1e-11, 1e-14).unwrap().into();
        let (steps, _) = integrate(&sys, &[c(1.0), c(0.0)], (0.0, 10.0), opts, &Output::Steps).unwrap();
        let times: Vec<f64> = (1..200).map(|i| i as f64 * 0.05).collect();
        let (grid, _) = integrate(&sys, &[c(1.0), c(0.0)], (0.0, 10.0), opts, &Output::Grid(times.clone())).unwrap();
        for (i, &t) in times.iter().enumerate() {
            // x'' = −x + 0.1 cos t, x(0)=1, x'(0)=0 → x = cos t + 0.05 t sin t.
            let exact = t.cos() + 0.05 * t * t.sin();
            assert!((grid.state(i)[0].re - exact).abs() < 1e-9, "grid t={t}");
            assert!((steps.at(t)[0].re - exact).abs() < 1e-9, "steps t={t}");
        }
    }

    #[test]
    fn convergence_contract_under_tolerance_halving() {
        let sys = FnSystem::new(2, |t: f64, y: &[Complex64], dy: &mut [Complex64]| {
            dy[0] = Complex64::new(-0.3, 4.0) * y[0] + y[1] * 0.5;
            dy[1] = -y[1] + c((2.0 * t).sin());
        });
        let end = |rel: f64| {
            let (tr, _) = integrate(
                &sys,
                &[c(1.0), c(0.5)],
                (0.0, 8.0),
                Tolerance::new(rel, 1e-14).unwrap().into(),
                &Output::Final,
            )
            .unwrap();
            tr.state(0).to_vec()
        };
        let a = end(1e-8);
        let b = end(5e-9);
        let diff = a.iter().zip(&b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(diff < 10.0 * 1e-8);
    }

    #[test]
    fn blow_up_reports_error() {
        let sys = FnSystem::new(1, |_t, y: &[Complex64], dy: &mut [Complex64]| dy[0] = y[0] * y[0]);
        let r = integrate(&sys, &[c(1.0)], (0.0, 2.0), StepperOptions::default(), &Output::Final);
        assert!(matches!(r, Err(OdeError::StepSizeUnderflow { .. }) | Err(OdeError::NonFinite { .. })));
    }

    #[test]
    fn tolerance_bounds_are_enforced() {
        assert!(Tolerance::new(1e-2, 1e-12).is_err());
        assert!(Tolerance::new(1e-13, 1e-12).is_err());
        assert!(Tolerance::new(1e-9, 0.0).is_err());
    }
}
