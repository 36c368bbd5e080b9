use num_complex::Complex64;

/// One accepted step with its order-7 continuous extension.
#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    cont: Vec<Complex64>,
}

/// Ordered samples `(t_i, y_i)` plus interpolation data.
///
/// Trajectories recorded step by step carry the integrator's continuous
/// extension; sampled ones carry derivatives for cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    data: Vec<Complex64>,
    derivs: Vec<Complex64>,
    segments: Option<Vec<Segment>>,
}

impl Trajectory {
    pub(crate) fn new(dim: usize, with_segments: bool) -> Self {
        Trajectory {
            dim,
            times: Vec::new(),
            data: Vec::new(),
            derivs: Vec::new(),
            segments: with_segments.then(Vec::new),
        }
    }

    /// Builds a sampled trajectory from explicit samples and derivatives.
    pub fn from_samples(dim: usize, times: Vec<f64>, data: Vec<Complex64>, derivs: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), times.len() * dim);
        assert!(derivs.is_empty() || derivs.len() == data.len());
        Trajectory { dim, times, data, derivs, segments: None }
    }

    pub(crate) fn push_sample(&mut self, t: f64, y: &[Complex64]) {
        self.times.push(t);
        self.data.extend_from_slice(y);
    }

    pub(crate) fn push_step(&mut self, t0: f64, t1: f64, y: &[Complex64], cont: &[Vec<Complex64>]) {
        self.push_sample(t1, y);
        let mut flat = Vec::with_capacity(8 * self.dim);
        for c in cont {
            flat.extend_from_slice(c);
        }
        if let Some(segs) = self.segments.as_mut() {
            segs.push(Segment { t0, h: t1 - t0, cont: flat });
        }
    }

    pub(crate) fn set_derivs(&mut self, derivs: Vec<Complex64>) {
        assert_eq!(derivs.len(), self.data.len());
        self.derivs = derivs;
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn last(&self) -> &[Complex64] {
        self.state(self.len() - 1)
    }

    pub fn derivative(&self, i: usize) -> Option<&[Complex64]> {
        (!self.derivs.is_empty()).then(|| &self.derivs[i * self.dim..(i + 1) * self.dim])
    }

    /// Values of component `j` at every sample.
    pub fn component(&self, j: usize) -> Vec<Complex64> {
        (0..self.len()).map(|i| self.state(i)[j]).collect()
    }

    pub fn span(&self) -> Option<(f64, f64)> {
        Some((*self.times.first()?, *self.times.last()?))
    }

    /// Interpolated state at `t` inside the span.
    pub fn at(&self, t: f64) -> Vec<Complex64> {
        let (a, b) = self.span().expect("empty trajectory");
        assert!(t >= a && t <= b, "t = {t} outside [{a}, {b}]");
        let n = self.dim;
        if let Some(segs) = &self.segments {
            if !segs.is_empty() {
                let idx = segs.partition_point(|s| s.t0 + s.h < t).min(segs.len() - 1);
                let seg = &segs[idx];
                let s = (t - seg.t0) / seg.h;
                let s1 = 1.0 - s;
                let c = |k: usize, i: usize| seg.cont[k * n + i];
                return (0..n)
                    .map(|i| {
                        let conpar = c(4, i) + (c(5, i) + (c(6, i) + c(7, i) * s) * s1) * s;
                        c(0, i) + (c(1, i) + (c(2, i) + (c(3, i) + conpar * s1) * s) * s1) * s
                    })
                    .collect();
            }
        }
        let hi = self.times.partition_point(|&x| x < t);
        if hi < self.len() && self.times[hi] == t {
            return self.state(hi).to_vec();
        }
        let (i0, i1) = (hi - 1, hi);
        let (t0, t1) = (self.times[i0], self.times[i1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let (y0, y1) = (self.state(i0), self.state(i1));
        match (self.derivative(i0), self.derivative(i1)) {
            (Some(d0), Some(d1)) => {
                let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
                let h10 = s * (1.0 - s) * (1.0 - s);
                let h01 = s * s * (3.0 - 2.0 * s);
                let h11 = s * s * (s - 1.0);
                (0..n).map(|i| y0[i] * h00 + d0[i] * (h10 * h) + y1[i] * h01 + d1[i] * (h11 * h)).collect()
            }
            _ => (0..n).map(|i| y0[i] * (1.0 - s) + y1[i] * s).collect(),
        }
    }
}
