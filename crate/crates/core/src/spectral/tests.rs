use std::f64::consts::PI;

use super::*;
use crate::cascade::{steady_periodic, SteadyMethod, SteadyOptions};
use crate::params::SystemParams;

const DW: f64 = 2.0 * PI / 100.0;

fn period_samples(n: usize, tau0: f64, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    let t = 2.0 * PI / DW;
    (0..=n).map(|j| f(tau0 + t * j as f64 / n as f64)).collect()
}

fn tone(a: Complex64, k: i32) -> impl Fn(f64) -> Complex64 {
    move |tau| a * Complex64::from_polar(1.0, k as f64 * DW * tau)
}

#[test]
fn single_tone_projects_onto_one_harmonic() {
    let a = Complex64::new(0.3, -0.4);
    let s = project_samples(&period_samples(1024, 0.0, tone(a, 1)), 0.0, DW, &HarmonicSet::default()).unwrap();
    assert!((s.get(1).unwrap().to_complex() - a).norm() < 1e-12);
    for (k, v) in s.iter() {
        if k != 1 {
            assert!(v.norm() < 1e-12);
        }
    }
    assert!(s.residual.unwrap().abs() < 1e-12);
}

#[test]
fn two_tones_separate() {
    let f = |t: f64| tone(Complex64::new(0.3, 0.0), 1)(t) + tone(Complex64::new(0.2, 0.0), -3)(t);
    let s = project_samples(&period_samples(512, 0.0, f), 0.0, DW, &HarmonicSet::default()).unwrap();
    assert!((s.get(1).unwrap().re - 0.3).abs() < 1e-12);
    assert!((s.get(-3).unwrap().re - 0.2).abs() < 1e-12);
}

#[test]
fn window_offset_does_not_change_amplitudes() {
    let a = Complex64::new(0.1, 0.2);
    let s = project_samples(&period_samples(512, 37.5, tone(a, -3)), 37.5, DW, &HarmonicSet::default()).unwrap();
    assert!((s.get(-3).unwrap().to_complex() - a).norm() < 1e-12);
}

#[test]
fn coarse_or_odd_sampling_is_rejected() {
    let z = vec![Complex64::new(0.0, 0.0); 257];
    assert_eq!(project_samples(&z, 0.0, DW, &HarmonicSet::default()), Err(SpectralError::TooFewSamples(256)));
    let z = vec![Complex64::new(0.0, 0.0); 1024];
    assert_eq!(project_samples(&z, 0.0, DW, &HarmonicSet::default()), Err(SpectralError::TooFewSamples(1023)));
}

#[test]
fn harmonic_sets_validate_and_parse() {
    assert_eq!(HarmonicSet::default().as_slice(), &[-7, -5, -3, -1, 1, 3, 5, 7]);
    assert_eq!("-3..3".parse::<HarmonicSet>().unwrap().as_slice(), &[-3, -1, 1, 3]);
    assert_eq!("5, -3,1".parse::<HarmonicSet>().unwrap().as_slice(), &[-3, 1, 5]);
    assert_eq!(HarmonicSet::new([2]), Err(SpectralError::BadHarmonic { k: 2 }));
    assert_eq!(HarmonicSet::new([17]), Err(SpectralError::BadHarmonic { k: 17 }));
    assert!("x".parse::<HarmonicSet>().is_err());
    assert!(HarmonicSet::symmetric(15).is_ok());
    assert_eq!(HarmonicSet::default().to_string(), "-7,-5,-3,-1,1,3,5,7");
}

#[test]
fn comb_classification() {
    let retained: Vec<i32> = (-7..=7).filter(|&k| is_retained(k)).collect();
    let suppressed: Vec<i32> = (-7..=7).filter(|&k| is_suppressed(k)).collect();
    assert_eq!(retained, vec![-7, -3, 1, 5]);
    assert_eq!(suppressed, vec![-5, -1, 3, 7]);
}

fn moderate() -> crate::ValidatedParams {
    let p = SystemParams {
        gamma_s: 2.0,
        omega_rabi_s: 6.0,
        omega_rabi_pr: 0.3,
        delta_omega: 2.0 * PI / 10.0,
        ..Default::default()
    };
    p.validate().unwrap()
}

fn hb(samples: usize) -> SteadyOptions {
    SteadyOptions { method: SteadyMethod::HarmonicBalance, samples, ..Default::default() }
}

#[test]
fn projection_obeys_bessel_bound_and_converges() {
    let p = moderate();
    let a = harmonic_project(&steady_periodic(&p, &hb(512)).unwrap(), &HarmonicSet::symmetric(15).unwrap()).unwrap();
    let b = harmonic_project(&steady_periodic(&p, &hb(1024)).unwrap(), &HarmonicSet::symmetric(15).unwrap()).unwrap();
    assert!(a.residual.unwrap() >= -1e-10);
    for k in a.harmonics() {
        assert!((a.get(k).unwrap().to_complex() - b.get(k).unwrap().to_complex()).norm() < 1e-10);
    }
}

#[test]
fn unsteady_trajectory_is_rejected() {
    let mut t = steady_periodic(&moderate(), &hb(512)).unwrap();
    t.steady = false;
    assert_eq!(harmonic_project(&t, &HarmonicSet::default()), Err(SpectralError::NotPeriodic));
}

#[test]
fn even_power_vanishes_in_cascade_steady_state() {
    let t = steady_periodic(&moderate(), &hb(1024)).unwrap();
    let (odd, even) = parity_power(&t, 15);
    assert!(odd > 0.0);
    assert!(even < 1e-8 * odd);
}

#[test]
fn undriven_uncoupled_source_leaves_a_single_tone() {
    // Slow offset so the frozen-phase model is accurate to O((4δω/γ_pr)²).
    let p =
        SystemParams { omega_rabi_s: 0.0, mu: 0.0, gamma_s: 2.0, delta_omega: 2.0 * PI / 1000.0, ..Default::default() };
    let p = p.validate().unwrap();
    let opts = CompareOptions { steady: hb(1024), ..Default::default() };
    let table = compare_spectra(&p, &opts).unwrap();
    for r in &table.rows {
        if r.k == 1 {
            assert!(r.numeric > 1e-3 && r.analytic > 1e-3);
            assert!(r.relative_difference < 5e-3, "{r:?}");
        } else {
            assert!(r.numeric < 1e-12 && r.analytic < 1e-12, "{r:?}");
        }
    }
    assert!(!table.warnings.is_empty());
}

fn small_sweep(jobs: Option<usize>) -> SweepOptions {
    SweepOptions {
        omega_s_ratios: vec![1.0, 10.0],
        omega_pr_ratios: vec![0.1, 0.5, 1.0],
        jobs,
        ..SweepOptions::default()
    }
}

#[test]
fn sweep_is_deterministic_and_shaped() {
    let base = SystemParams { gamma_s: 2.0, delta_omega: 2.0 * PI / 10.0, ..SystemParams::default() };
    let a = sweep2d(&base, &small_sweep(Some(1))).unwrap();
    let b = sweep2d(&base, &small_sweep(Some(4))).unwrap();
    assert_eq!(a, b);
    assert!(a.errors.is_empty());
    for m in a.intensities.values() {
        assert_eq!(m.len(), 2);
        assert!(m.iter().all(|row| row.len() == 3 && row.iter().all(|v| v.unwrap() >= 0.0)));
    }
    assert!(a.intensity(1, 1, 2).unwrap() > 0.0);
}

#[test]
fn single_point_sweep_runs() {
    let base = SystemParams { gamma_s: 2.0, delta_omega: 2.0 * PI / 10.0, ..SystemParams::default() };
    let opts = SweepOptions { omega_s_ratios: vec![5.0], omega_pr_ratios: vec![0.2], ..SweepOptions::default() };
    let r = sweep2d(&base, &opts).unwrap();
    assert_eq!(r.intensities[&1].len(), 1);
}

#[test]
fn sweep_collects_failures() {
    let base = SystemParams { gamma_s: 2.0, delta_omega: 2.0 * PI / 10.0, ..SystemParams::default() };
    let mut opts = small_sweep(None);
    opts.steady.threshold = 0.0;
    match sweep2d(&base, &opts) {
        Err(SpectralError::TooManyFailures { failed: 6, total: 6 }) => {}
        other => panic!("{other:?}"),
    }
    opts.omega_pr_ratios = vec![f64::NAN];
    assert!(matches!(sweep2d(&base, &opts), Err(SpectralError::BadGrid(_))));
}

#[test]
fn log_grid_endpoints() {
    let g = log_grid(0.1, 1000.0, 25);
    assert_eq!(g.len(), 25);
    assert!((g[0] - 0.1).abs() < 1e-15 && (g[24] - 1000.0).abs() < 1e-9);
    assert!((g[6] - 1.0).abs() < 1e-12);
}

#[test]
fn strong_drive_sweep_point_suppresses_odd_comb() {
    let base = SystemParams { gamma_s: 100.0, delta_omega: DW, ..SystemParams::default() };
    let opts = SweepOptions { omega_s_ratios: vec![500.0], omega_pr_ratios: vec![0.2], ..SweepOptions::default() };
    let r = sweep2d(&base, &opts).unwrap();
    let i = |k: i32| r.intensity(k, 0, 0).unwrap();
    let suppressed = [-5, -1, 3].map(i).into_iter().fold(0.0, f64::max);
    let leading = [1, -3].map(i).into_iter().fold(f64::INFINITY, f64::min);
    assert!(suppressed < 0.1 * leading);
}
