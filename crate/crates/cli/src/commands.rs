//! Execution of each subcommand into an [`Artifact`].

use std::collections::BTreeMap;

use qwm_core::cascade::{self, steady_periodic, write_trajectory_csv, MomentState, MOMENT_NAMES};
use qwm_core::numfmt::num;
use qwm_core::ode::Output;
use qwm_core::oracle::equivalence_report;
use qwm_core::probe::{peak_series, stationary_solve};
use qwm_core::source::{
    anomalous_correlator, dressed_coefficients, squeeze_params, triplet_line, triplet_weights, PairKind, SqueezeMode,
    TripletComponent,
};
use qwm_core::spectral::{
    compare_spectra, effective_reservoir, harmonic_project, is_retained, log_grid, parity_power, sweep2d,
    CompareOptions, PeakSpectrum, SweepOptions, MAX_ABS_HARMONIC,
};
use qwm_core::{Complex64, ValidatedParams};
use serde_json::{json, Value};

use crate::config::{
    method_name, squeeze_name, Block, CompareBlock, Model, OracleBlock, RunConfig, SimulateBlock, SpectrumBlock,
    SweepBlock, TripletBlock,
};
use crate::output::{json_num, Artifact};
use crate::CliError;

/// Artifact of a run plus a failure to report after it has been written.
pub struct Outcome {
    pub artifact: Artifact,
    pub failure: Option<CliError>,
}

impl From<Artifact> for Outcome {
    fn from(artifact: Artifact) -> Self {
        Outcome { artifact, failure: None }
    }
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let vp = cfg.params.validate().map_err(|e| CliError::Validation(e.to_string()))?;
    let mut outcome = match &cfg.block {
        Block::Simulate(b) => simulate(cfg, &vp, b)?.into(),
        Block::Spectrum(b) => spectrum(cfg, &vp, b)?.into(),
        Block::Compare(b) => compare(cfg, &vp, b)?.into(),
        Block::Sweep(b) => sweep(cfg, b)?.into(),
        Block::Triplet(b) => triplet(&vp, b)?.into(),
        Block::OracleCheck(b) => oracle_check(cfg, b)?,
    };
    let flags: Vec<Value> = vp.flags().names().into_iter().map(Value::from).collect();
    outcome.artifact.meta.insert(0, ("regime".to_string(), Value::Array(flags)));
    Ok(outcome)
}

fn class(k: i32) -> &'static str {
    if is_retained(k) {
        "retained"
    } else {
        "suppressed"
    }
}

fn c_json(z: Complex64) -> Value {
    json!([json_num(z.re), json_num(z.im)])
}

fn simulate(cfg: &RunConfig, vp: &ValidatedParams, b: &SimulateBlock) -> Result<Artifact, CliError> {
    let grid: Vec<f64> = (0..=b.samples).map(|j| b.t_end * j as f64 / b.samples as f64).collect();
    let (traj, stats) =
        cascade::integrate(vp, &MomentState::ground(), (0.0, b.t_end), cfg.numerics.tol, &Output::Grid(grid))?;
    let mut csv = Vec::new();
    write_trajectory_csv(&traj, &mut csv).expect("writing to memory");
    let mut moments = serde_json::Map::new();
    for (j, name) in MOMENT_NAMES.iter().enumerate() {
        let col: Vec<Value> = traj.component(j).into_iter().map(c_json).collect();
        moments.insert((*name).to_string(), Value::Array(col));
    }
    let tau: Vec<Value> = traj.times().iter().map(|&t| json_num(t)).collect();
    let mut art = Artifact::new(String::from_utf8(csv).expect("ASCII CSV"), json!({ "tau": tau, "moments": moments }));
    art.meta("source_steps", stats.source.accepted as u64);
    art.meta("probe_steps", stats.probe.accepted as u64);
    Ok(art)
}

fn peaks_table(peaks: &PeakSpectrum, ks: &[i32]) -> (String, Value) {
    let mut csv = String::from("k,re,im,intensity,class\n");
    let mut rows = Vec::new();
    for &k in ks {
        let Some(a) = peaks.get(k) else { continue };
        csv.push_str(&format!("{k},{},{},{},{}\n", num(a.re), num(a.im), num(a.norm_sqr()), class(k)));
        rows.push(json!({ "k": k, "re": json_num(a.re), "im": json_num(a.im), "intensity": json_num(a.norm_sqr()), "class": class(k) }));
    }
    (csv, Value::Array(rows))
}

fn spectrum(cfg: &RunConfig, vp: &ValidatedParams, b: &SpectrumBlock) -> Result<Artifact, CliError> {
    let ks = cfg.numerics.harmonics.as_slice();
    let res = effective_reservoir(vp, b.squeeze);
    let mut meta: Vec<(&str, Value)> = vec![("model", b.model.name().into())];
    let peaks = match b.model {
        Model::Cascade => {
            let traj = steady_periodic(vp, &cfg.numerics.steady(b.method))?;
            let peaks = harmonic_project(&traj, &cfg.numerics.harmonics)?;
            let (odd, even) = parity_power(&traj, MAX_ABS_HARMONIC);
            meta.push(("steady_method", method_name(b.method).into()));
            meta.push(("tau0", json_num(traj.tau0)));
            meta.push(("periodicity_residual", json_num(traj.residual)));
            meta.push(("mean_power", json_num(peaks.mean_power)));
            meta.push(("odd_power", json_num(odd)));
            meta.push(("even_power", json_num(even)));
            peaks
        }
        Model::Stationary | Model::Series => {
            meta.push(("squeeze_mode", squeeze_name(b.squeeze).into()));
            meta.push(("reservoir_m", json_num(res.m)));
            meta.push(("reservoir_n", json_num(res.n)));
            if b.model == Model::Stationary {
                stationary_solve(vp, res, &cfg.numerics.harmonics)?
            } else {
                meta.push(("series_order", b.series_order.into()));
                peak_series(vp, res, b.series_order)?
            }
        }
    };
    let (csv, rows) = peaks_table(&peaks, ks);
    let mut art = Artifact::new(csv, json!({ "delta_omega": json_num(peaks.delta_omega), "peaks": rows }));
    for (k, v) in meta {
        art.meta(k, v);
    }
    Ok(art)
}

/// Retained harmonics whose agreement the comparison reports.
const RETAINED_CHECK: [i32; 3] = [1, -3, 5];

fn compare(cfg: &RunConfig, vp: &ValidatedParams, b: &CompareBlock) -> Result<Artifact, CliError> {
    let opts = CompareOptions {
        harmonics: cfg.numerics.harmonics.clone(),
        steady: cfg.numerics.steady(b.method),
        squeeze: b.squeeze,
    };
    let table = compare_spectra(vp, &opts)?;
    let mut csv = String::from("k,numeric,analytic,relative_difference,class\n");
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k,
            num(r.numeric),
            num(r.analytic),
            num(r.relative_difference),
            class(r.k)
        ));
    }
    let result = serde_json::to_value(&table).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut art = Artifact::new(csv, result);
    art.meta_num("disagreement", table.disagreement);
    art.meta_num("max_retained_difference", table.max_retained_difference(&RETAINED_CHECK));
    art.meta_num("reservoir_m", table.reservoir.m);
    art.meta_num("reservoir_n", table.reservoir.n);
    art.meta_num("periodicity_residual", table.periodicity_residual);
    art.meta("warnings", table.warnings.clone());
    Ok(art)
}

fn sweep(cfg: &RunConfig, b: &SweepBlock) -> Result<Artifact, CliError> {
    let opts = SweepOptions {
        omega_s_ratios: log_grid(b.omega_s.min, b.omega_s.max, b.omega_s.points),
        omega_pr_ratios: log_grid(b.omega_pr.min, b.omega_pr.max, b.omega_pr.points),
        harmonics: cfg.numerics.harmonics.clone(),
        steady: cfg.numerics.steady(b.method),
        jobs: cfg.jobs,
    };
    let res = sweep2d(&cfg.params, &opts)?;
    let ks = res.harmonics.as_slice();
    let mut csv = String::from("omega_s_ratio,omega_pr_ratio");
    for k in ks {
        csv.push_str(&format!(",intensity_{k}"));
    }
    csv.push('\n');
    for (i, &rs) in res.omega_s_ratios.iter().enumerate() {
        for (j, &rp) in res.omega_pr_ratios.iter().enumerate() {
            csv.push_str(&format!("{},{}", num(rs), num(rp)));
            for &k in ks {
                match res.intensity(k, i, j) {
                    Some(x) => csv.push_str(&format!(",{}", num(x))),
                    None => csv.push(','),
                }
            }
            csv.push('\n');
        }
    }
    let maps: BTreeMap<String, Value> = res
        .intensities
        .iter()
        .map(|(k, grid)| {
            let rows: Vec<Value> =
                grid.iter().map(|row| row.iter().map(|x| x.map(json_num).unwrap_or(Value::Null)).collect()).collect();
            (k.to_string(), Value::Array(rows))
        })
        .collect();
    let errors: Vec<Value> =
        res.errors.iter().map(|e| json!({ "row": e.row, "col": e.col, "message": e.message })).collect();
    let axis = |xs: &[f64]| -> Value { xs.iter().map(|&x| json_num(x)).collect() };
    let result = json!({
        "omega_s_ratios": axis(&res.omega_s_ratios),
        "omega_pr_ratios": axis(&res.omega_pr_ratios),
        "gamma_ratio": json_num(res.gamma_ratio),
        "gamma_pr_over_gamma_s": json_num(1.0 / res.gamma_ratio),
        "harmonics": ks,
        "intensities": maps,
        "errors": errors,
    });
    let mut art = Artifact::new(csv, result);
    art.meta_num("gamma_ratio", res.gamma_ratio);
    art.meta_num("gamma_pr_over_gamma_s", 1.0 / res.gamma_ratio);
    art.meta("failed_points", res.errors.len() as u64);
    let messages: Vec<String> = res.errors.iter().map(|e| format!("{},{}: {}", e.row, e.col, e.message)).collect();
    art.meta("point_errors", messages);
    Ok(art)
}

fn triplet(vp: &ValidatedParams, b: &TripletBlock) -> Result<Artifact, CliError> {
    let d = dressed_coefficients(vp.delta, vp.omega_s_full(), vp.gamma_s)
        .map_err(|e| CliError::Validation(e.to_string()))?;
    let w = triplet_weights(&d);
    let text = squeeze_params(&d, &w, SqueezeMode::Text);
    let eqm = squeeze_params(&d, &w, SqueezeMode::EqM);
    let quantities = [
        ("c", d.c),
        ("s", d.s),
        ("omega_prime", d.omega_prime),
        ("gamma_0", d.gamma_0),
        ("gamma_prime", d.gamma_prime),
        ("rho11_bar", d.rho11_bar),
        ("rho22_bar", d.rho22_bar),
        ("i_rc", w.i_rc),
        ("i_ri", w.i_ri),
        ("i_f", w.i_f),
        ("i_t", w.i_t),
        ("f_rr_coh", w.f_rr_coh),
        ("f_rr_incoh", w.f_rr_incoh),
        ("f_ft", w.f_ft),
        ("m_text", text.m),
        ("n_text", text.n),
        ("m_eq_m", eqm.m),
        ("n_eq_m", eqm.n),
    ];
    let half = 2.0 * d.omega_prime.max(d.gamma_s);
    let lo = b.omega_min.unwrap_or(-half);
    let hi = b.omega_max.unwrap_or(half);
    if hi <= lo {
        return Err(CliError::Validation(format!("triplet frequency window [{lo}, {hi}] is empty")));
    }
    let n = b.points;
    let grid: Vec<f64> = (0..n).map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64).collect();

    let mut csv = String::from("quantity,value\n");
    let mut weights = serde_json::Map::new();
    for (name, x) in quantities {
        csv.push_str(&format!("{name},{}\n", num(x)));
        weights.insert(name.to_string(), json_num(x));
    }
    csv.push_str("\nomega,r_re,r_im,f_re,f_im,t_re,t_im,rr_re,rr_im,ft_re,ft_im\n");
    let mut rows = Vec::new();
    for &om in &grid {
        let r = triplet_line(&d, &w, om, TripletComponent::R);
        let f = triplet_line(&d, &w, om, TripletComponent::F);
        let t = triplet_line(&d, &w, om, TripletComponent::T);
        let rr = anomalous_correlator(&d, &w, om, PairKind::RR).map(|a| a.value).unwrap_or_default();
        let ft = anomalous_correlator(&d, &w, om, PairKind::FT).map(|a| a.value).unwrap_or_default();
        csv.push_str(&num(om));
        for z in [r, f, t, rr, ft] {
            csv.push_str(&format!(",{},{}", num(z.re), num(z.im)));
        }
        csv.push('\n');
        rows.push(json!({ "omega": json_num(om), "r": c_json(r), "f": c_json(f), "t": c_json(t), "rr": c_json(rr), "ft": c_json(ft) }));
    }
    let mut art = Artifact::new(csv, json!({ "weights": weights, "spectrum": rows }));
    art.meta("off_resonance", text.off_resonance);
    Ok(art)
}

fn oracle_check(cfg: &RunConfig, b: &OracleBlock) -> Result<Outcome, CliError> {
    let mut grid = Vec::new();
    for &g in &b.gamma_ratios {
        for &r in &b.omega_s_ratios {
            for &op in &b.omega_pr_values {
                grid.push((g, r, op));
            }
        }
    }
    let report = equivalence_report(&cfg.params, &grid, b.t_end, b.samples, cfg.numerics.tol)?;
    let mut csv = String::from("gamma_ratio,omega_s_ratio,omega_pr,max_deviation,min_eigenvalue\n");
    for p in &report.points {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            num(p.gamma_ratio),
            num(p.omega_s_ratio),
            num(p.omega_pr),
            num(p.max_deviation),
            num(p.min_eigenvalue)
        ));
    }
    let pass = report.max_deviation < b.threshold;
    let result = serde_json::to_value(&report).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut art = Artifact::new(csv, result);
    art.meta_num("max_deviation", report.max_deviation);
    art.meta_num("threshold", b.threshold);
    art.meta("pass", pass);
    let failure =
        (!pass).then_some(CliError::CheckFailed { max_deviation: report.max_deviation, threshold: b.threshold });
    Ok(Outcome { artifact: art, failure })
}
