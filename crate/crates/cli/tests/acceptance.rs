//! Acceptance criteria. Each prints one PASS/FAIL line with the measured
//! quantities; the process fails if any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use qwm_core::cascade::{self, steady_periodic, MomentState, SteadyMethod, SteadyOptions, SZ_S};
use qwm_core::ode::{Output, Tolerance};
use qwm_core::oracle::{
    default_equivalence_grid, equivalence_report, fit_decay_rate, regression_correlator, spectrum_half_width,
    Correlator, Generator,
};
use qwm_core::probe::{peak_series, stationary_solve, Reservoir};
use qwm_core::source::{dressed_coefficients, filtered_g2, triplet_weights, TripletComponent as C3};
use qwm_core::spectral::{
    compare_spectra, harmonic_project, parity_power, CompareOptions, HarmonicSet, PeakSpectrum, MAX_ABS_HARMONIC,
};
use qwm_core::{RabiConvention, SystemParams, ValidatedParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn reference_point() -> SystemParams {
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

fn valid(p: SystemParams) -> ValidatedParams {
    p.validate().expect("valid parameters")
}

fn within_budget(elapsed: Duration, budget: Duration) -> (bool, String) {
    (elapsed <= budget, format!("runtime {:.1} s (budget {} s)", elapsed.as_secs_f64(), budget.as_secs()))
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let report =
        match equivalence_report(&reference_point(), &default_equivalence_grid(), 20.0, 200, Tolerance::default()) {
            Ok(r) => r,
            Err(e) => return verdict(false, format!("oracle run failed: {e}")),
        };
    let (in_time, time) = within_budget(start.elapsed(), Duration::from_secs(120));
    let pass = report.points.len() == 18 && report.max_deviation < 1e-6 && in_time;
    verdict(
        pass,
        format!("{} points, max deviation {:.2e} (< 1e-6), {time}", report.points.len(), report.max_deviation),
    )
}

fn source_steady_state() -> Verdict {
    let tol = Tolerance::new(1e-11, 1e-14).expect("tolerance");
    let mut worst: f64 = 0.0;
    for ratio in [0.0, 0.5, 5.0, 500.0] {
        let p = valid(SystemParams { gamma_s: 1.0, omega_rabi_s: ratio, omega_rabi_pr: 0.0, ..reference_point() });
        let (traj, _) = match cascade::integrate(&p, &MomentState::ground(), (0.0, 80.0), tol, &Output::Final) {
            Ok(t) => t,
            Err(e) => return verdict(false, format!("Ω_s/γ_s = {ratio}: {e}")),
        };
        let closed = -1.0 / (1.0 + 8.0 * ratio * ratio);
        worst = worst.max((traj.last()[SZ_S].re - closed).abs());
    }
    verdict(worst < 1e-8, format!("max |σ_z − closed form| = {worst:.2e} (< 1e-8)"))
}

fn analytic_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let delta = rng.gen_range(-50.0..50.0);
        let omega = rng.gen_range(0.01..100.0);
        let gamma = rng.gen_range(0.1..10.0);
        let d = dressed_coefficients(delta, omega, gamma).expect("dressed");
        let w = triplet_weights(&d);
        worst = worst
            .max((d.c * d.c + d.s * d.s - 1.0).abs())
            .max((w.i_f - w.i_t).abs())
            .max((w.i_rc + w.i_ri - gamma * d.c * d.c * d.s * d.s).abs());
        let r = triplet_weights(&dressed_coefficients(0.0, omega, gamma).expect("dressed"));
        worst = worst.max(r.i_rc.abs());
    }
    verdict(worst < 1e-12, format!("max identity defect {worst:.2e} over 100 points (< 1e-12)"))
}

fn regression_validation() -> Verdict {
    let start = Instant::now();
    let p = valid(SystemParams { gamma_s: 1.0, omega_rabi_s: 100.0, delta: 0.0, ..reference_point() });
    let gamma_0 = 0.5;
    let long: Vec<f64> = (0..=6000).map(|i| 0.01 * i as f64).collect();
    let short: Vec<f64> = (0..=400).map(|i| 0.01 * i as f64).collect();
    let run = || -> Result<(f64, f64, f64), String> {
        let r =
            regression_correlator(&p, Correlator::Normal(C3::R), &long, Generator::Exact).map_err(|e| e.to_string())?;
        let hw = spectrum_half_width(&r, 0.0, 5.0);
        let rr = regression_correlator(&p, Correlator::Anomalous(C3::R, C3::R), &short, Generator::Exact)
            .map_err(|e| e.to_string())?;
        let rate = fit_decay_rate(&rr, 4.0);
        let mut cross: f64 = 0.0;
        for (a, b) in [(C3::R, C3::F), (C3::R, C3::T), (C3::F, C3::F)] {
            let c = regression_correlator(&p, Correlator::Anomalous(a, b), &short, Generator::Secular)
                .map_err(|e| e.to_string())?;
            cross = cross.max(c.values.iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        Ok((hw, rate, cross))
    };
    let (hw, rate, cross) = match run() {
        Ok(x) => x,
        Err(e) => return verdict(false, e),
    };
    let (in_time, time) = within_budget(start.elapsed(), Duration::from_secs(30));
    let hw_err = (hw - gamma_0).abs() / gamma_0;
    let rate_err = (rate - gamma_0).abs() / gamma_0;
    let pass = hw_err < 0.05 && rate_err < 0.03 && cross < 1e-8 && in_time;
    verdict(
        pass,
        format!(
            "R half-width {hw:.4} (rel err {hw_err:.2e} < 5e-2), RR decay {rate:.4} (rel err {rate_err:.2e} < 3e-2), \
             max |RF,RT,FF| {cross:.1e} (< 1e-8), {time}"
        ),
    )
}

fn selection_rule() -> Verdict {
    let start = Instant::now();
    let p = valid(reference_point());
    let traj = match steady_periodic(&p, &SteadyOptions::default()) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("steady state: {e}")),
    };
    let peaks = harmonic_project(&traj, &HarmonicSet::default()).expect("projection");
    let i = |k: i32| peaks.intensity(k).unwrap_or(0.0);
    let suppressed = [-1, 3, -5].map(i).into_iter().fold(0.0, f64::max);
    let retained = [1, -3, 5].map(i).into_iter().fold(f64::INFINITY, f64::min);
    let ratio = suppressed / retained;
    let (odd, even) = parity_power(&traj, MAX_ABS_HARMONIC);
    let even_frac = even / (odd + even);
    let (in_time, time) = within_budget(start.elapsed(), Duration::from_secs(60));
    let pass = ratio < 0.1 && even_frac < 1e-8 && in_time;
    verdict(
        pass,
        format!(
            "max suppressed / min retained intensity {ratio:.3} (< 0.1): |A-1|² {:.2e}, |A+3|² {:.2e}, |A-5|² {:.2e} vs \
             |A+1|² {:.2e}, |A-3|² {:.2e}, |A+5|² {:.2e}; even power fraction {even_frac:.1e} (< 1e-8), {time}",
            i(-1),
            i(3),
            i(-5),
            i(1),
            i(-3),
            i(5)
        ),
    )
}

fn analytic_vs_numeric() -> Verdict {
    let mut disagreement = Vec::new();
    let mut retained_diff = f64::NAN;
    let mut fitted_m = f64::NAN;
    for ratio in [50.0, 100.0, 500.0] {
        let p = valid(SystemParams { omega_rabi_s: ratio * 10.0, ..reference_point() });
        let table = match compare_spectra(&p, &CompareOptions::default()) {
            Ok(t) => t,
            Err(e) => return verdict(false, format!("Ω_s/γ_s = {ratio}: {e}")),
        };
        disagreement.push(table.disagreement);
        if ratio == 500.0 {
            retained_diff = table.max_retained_difference(&[1, -3, 5]);
            fitted_m = fit_m(&p, &table.numeric);
        }
    }
    let monotone = disagreement.windows(2).all(|w| w[1] < w[0]);
    let pass = retained_diff < 0.2 && monotone;
    verdict(
        pass,
        format!(
            "max retained relative difference {retained_diff:.3} (< 0.2); disagreement at Ω_s/γ_s = 50, 100, 500: \
             {:.4}, {:.4}, {:.4} (decreasing: {monotone}); fitted M {fitted_m:.2} (candidates 1 and 0.5)",
            disagreement[0], disagreement[1], disagreement[2]
        ),
    )
}

/// Squeeze amplitude M (with N = 1) whose stationary spectrum best matches
/// the numeric peak magnitudes in the L2 sense.
fn fit_m(p: &ValidatedParams, numeric: &PeakSpectrum) -> f64 {
    let harmonics = HarmonicSet::default();
    let misfit = |m: f64| -> f64 {
        let Ok(ana) = stationary_solve(p, Reservoir::new(m, 1.0), &harmonics) else { return f64::INFINITY };
        harmonics
            .iter()
            .map(|k| {
                let n = numeric.get(k).map_or(0.0, |a| a.norm());
                let a = ana.get(k).map_or(0.0, |a| a.norm());
                (n - a).powi(2)
            })
            .sum()
    };
    (1..=200).map(|i| 0.01 * i as f64).min_by(|a, b| misfit(*a).total_cmp(&misfit(*b))).unwrap_or(f64::NAN)
}

fn series_consistency() -> Verdict {
    let p = valid(SystemParams { omega_rabi_pr: 0.2, rabi_convention: RabiConvention::Half, ..reference_point() });
    let res = Reservoir::new(1.0, 1.0);
    let series = peak_series(&p, res, 4).expect("series");
    let stat = stationary_solve(&p, res, &HarmonicSet::default()).expect("stationary");
    let mut worst: f64 = 0.0;
    for k in [1, -3, 5] {
        let (a, b) = (series.get(k).unwrap().norm(), stat.get(k).unwrap().norm());
        worst = worst.max((a - b).abs() / b);
    }
    let ratio = stat.get(-3).unwrap().norm() / stat.get(1).unwrap().norm();
    let ratio_err = (ratio - 2.0 / 3.0).abs() / (2.0 / 3.0);
    verdict(
        worst < 0.05 && ratio_err < 0.02,
        format!("max series/stationary difference {worst:.2e} (< 5e-2); |A-3/A+1| = {ratio:.4} (rel err {ratio_err:.2e} < 2e-2)"),
    )
}

fn wide_filter_limit() -> Verdict {
    let p = valid(SystemParams { gamma_s: 0.01, omega_rabi_s: 5.0, ..reference_point() });
    let opts = SteadyOptions { method: SteadyMethod::HarmonicBalance, ..SteadyOptions::default() };
    let traj = match steady_periodic(&p, &opts) {
        Ok(t) => t,
        Err(e) => return verdict(false, format!("steady state: {e}")),
    };
    let peaks = harmonic_project(&traj, &HarmonicSet::default()).expect("projection");
    let main = peaks.intensity(1).unwrap_or(0.0);
    let (worst_k, worst) = peaks
        .iter()
        .filter(|(k, _)| *k != 1)
        .map(|(k, a)| (k, a.norm_sqr()))
        .fold((0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
    let ratio = worst / main;
    verdict(ratio <= 0.1, format!("strongest side peak k = {worst_k}: |A_k|²/|A+1|² = {ratio:.2e} (≤ 0.1)"))
}

fn g2_formula() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut ok, mut worst_sym, mut worst_lim): (bool, f64, f64) = (true, 0.0, 0.0);
    for _ in 0..50 {
        let w1 = rng.gen_range(-100.0..100.0);
        let w2 = rng.gen_range(-100.0..100.0);
        let t = rng.gen_range(0.0..10.0);
        let lam = rng.gen_range(0.01..10.0);
        let g = filtered_g2(w1, w2, t, lam);
        ok &= g >= 1.0;
        worst_sym =
            worst_sym.max((g - filtered_g2(w2, w1, t, lam)).abs()).max((g - filtered_g2(-w1, -w2, t, lam)).abs());
        worst_lim = worst_lim.max((filtered_g2(w1, w2, 1e4 / lam, lam) - 1.0).abs());
    }
    let far = filtered_g2(100.0, -100.0, 0.0, 1.0);
    let pass = ok && worst_sym < 1e-10 && worst_lim < 1e-10 && (far - 2.0).abs() < 1e-3;
    verdict(
        pass,
        format!(
            "g₂ ≥ 1: {ok}; symmetry defect {worst_sym:.1e}; |g₂(τ→∞) − 1| {worst_lim:.1e}; far symmetric pair {far:.6} (2 ± 1e-3)"
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().expect("temp dir");
    let cfg = dir.path().join("sweep.ini");
    std::fs::write(&cfg, "[sweep]\nomega_s_points = 4\nomega_pr_points = 3\n").expect("write config");
    let run = |name: &str, jobs: &str| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_qwm"))
            .arg("sweep")
            .arg("--config")
            .arg(&cfg)
            .args(["--jobs", jobs, "--out"])
            .arg(&out)
            .status()
            .map_err(|e| e.to_string())?;
        if !status.success() {
            return Err(format!("sweep exited with {status}"));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    match (run("a.csv", "1"), run("b.csv", "1"), run("c.csv", "3")) {
        (Ok(a), Ok(b), Ok(c)) => {
            verdict(a == b && a == c, format!("3 runs ({} bytes each), identical: {}", a.len(), a == b && a == c))
        }
        (a, b, c) => verdict(false, format!("{:?}", [a.err(), b.err(), c.err()])),
    }
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("source steady state", source_steady_state),
        ("analytic identities", analytic_identities),
        ("regression validation", regression_validation),
        ("selection rule", selection_rule),
        ("analytic vs numeric agreement", analytic_vs_numeric),
        ("series consistency", series_consistency),
        ("wide-filter limit", wide_filter_limit),
        ("filtered g2 formula", g2_formula),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        if !v.pass {
            failed += 1;
        }
        println!("{} {:>2} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, i + 1, v.detail);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
