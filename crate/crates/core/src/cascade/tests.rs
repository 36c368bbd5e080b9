use super::*;
use crate::ode;
use crate::params::SystemParams;

fn params(f: impl FnOnce(&mut SystemParams)) -> ValidatedParams {
    let mut p = SystemParams::default();
    f(&mut p);
    p.validate().unwrap()
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[test]
fn source_steady_state_examples() {
    let s = source_steady_state(&params(|p| p.omega_rabi_s = 0.0));
    assert_eq!(s.sigma_z, -1.0);
    assert_eq!(s.sigma_minus, c(0.0));
    let s = source_steady_state(&params(|p| p.omega_rabi_s = 0.5 * p.gamma_s));
    assert!((s.sigma_z + 1.0 / 3.0).abs() < 1e-15);
    let s = source_steady_state(&params(|p| p.omega_rabi_s = 500.0 * p.gamma_s));
    assert!((s.sigma_z + 5.0e-7).abs() < 1e-12);
}

#[test]
fn steady_state_is_a_fixed_point_of_the_source_block() {
    let p = params(|p| {
        p.delta = 0.7;
        p.omega_rabi_s = 3.0;
    });
    let s = source_steady_state(&p);
    let r = Rates::new(&p);
    for tau in [0.0, 1.3, 40.0] {
        let sm = s.sigma_minus_at(tau, p.delta_omega);
        let d = r.source(r.phase(tau), sm, c(s.sigma_z), sm.conj());
        let i = Complex64::i();
        let want = [-i * p.delta_omega * sm, c(0.0), i * p.delta_omega * sm.conj()];
        for (a, b) in d.iter().zip(want) {
            assert!((a - b).norm() < 1e-12, "{d:?}");
        }
    }
}

#[test]
fn dark_decoupled_probe_is_stationary() {
    let p = params(|p| {
        p.mu = 0.0;
        p.omega_rabi_pr = 0.0;
        p.omega_rabi_s = 3.0;
    });
    let s = source_steady_state(&p);
    let x = MomentState::product(s.sigma_minus, s.sigma_z, c(0.0), -1.0);
    let d = moment_rhs(&x, 0.0, &p);
    for slot in [SM_PR, SZ_PR, SP_PR] {
        assert!(d[slot].norm() < 1e-12, "{} = {}", MOMENT_NAMES[slot], d[slot]);
    }
    // Cross moments follow the rotating source factor times the frozen probe.
    let dsm = d[SM_S];
    let want = MomentState::product(dsm, 0.0, c(0.0), -1.0);
    for slot in [SM_S_SZ_PR, SP_S_SZ_PR, SM_S_SP_PR, SM_S_SM_PR] {
        assert!((d[slot] - want[slot]).norm() < 1e-12, "{}", MOMENT_NAMES[slot]);
    }
}

#[test]
fn excited_probe_decays_at_unit_rate() {
    let p = params(|p| {
        p.mu = 0.0;
        p.omega_rabi_s = 0.0;
        p.omega_rabi_pr = 0.0;
    });
    let x0 = MomentState::product(c(0.0), -1.0, c(0.0), 1.0);
    assert!((moment_rhs(&x0, 0.0, &p)[SZ_PR] - c(-2.0)).norm() < 1e-15);
    let grid = vec![0.5, 1.0, 5.0];
    let (traj, _) = integrate(&p, &x0, (0.0, 5.0), Tolerance::default(), &Output::Grid(grid.clone())).unwrap();
    for (i, t) in grid.iter().enumerate() {
        let want = -1.0 + 2.0 * (-t).exp();
        assert!((traj.state(i)[SZ_PR].re - want).abs() < 1e-8);
    }
}

#[test]
fn source_relaxes_to_closed_form() {
    for r in [0.5, 5.0] {
        let p = params(|p| {
            p.gamma_s = 2.0;
            p.omega_rabi_s = r * 2.0;
        });
        let (traj, _) =
            integrate(&p, &MomentState::ground(), (0.0, 40.0), Tolerance::default(), &Output::Final).unwrap();
        let want = source_steady_state(&p).sigma_z;
        assert!((traj.last()[SZ_S].re - want).abs() < 1e-8);
    }
}

#[test]
fn halving_tolerance_converges() {
    let p = params(|p| {
        p.gamma_s = 3.0;
        p.omega_rabi_s = 6.0;
        p.omega_rabi_pr = 0.5;
    });
    let end = |rel: f64| {
        let tol = Tolerance::new(rel, 1e-13).unwrap();
        let (t, _) = integrate(&p, &MomentState::ground(), (0.0, 10.0), tol, &Output::Final).unwrap();
        MomentState::from_slice(t.last())
    };
    let (a, b) = (end(1e-7), end(5e-8));
    assert!(a.max_abs_diff(&b) < 10.0 * 1e-7);
}

#[test]
fn source_marginal_is_bitwise_identical_to_source_only_run() {
    let p = params(|p| {
        p.gamma_s = 2.0;
        p.omega_rabi_s = 7.0;
        p.omega_rabi_pr = 0.8;
        p.delta = 0.3;
    });
    let grid: Vec<f64> = (0..=50).map(|i| 0.2 * i as f64).collect();
    let tol = Tolerance::default();
    let (full, _) = integrate(&p, &MomentState::ground(), (0.0, 10.0), tol, &Output::Grid(grid.clone())).unwrap();
    let src0 = [c(0.0), c(-1.0), c(0.0)];
    let (alone, _) = ode::integrate(SourceBlock::new(&p), &src0, (0.0, 10.0), tol.into(), &Output::Grid(grid)).unwrap();
    for i in 0..full.len() {
        for (j, slot) in SOURCE_SLOTS.iter().enumerate() {
            assert_eq!(full.state(i)[*slot], alone.state(i)[j]);
        }
    }
}

#[test]
fn pairing_and_realness_hold_along_trajectory() {
    let p = params(|p| {
        p.gamma_s = 4.0;
        p.omega_rabi_s = 20.0;
        p.omega_rabi_pr = 0.6;
        p.delta = -0.5;
    });
    let grid: Vec<f64> = (0..=100).map(|i| 0.1 * i as f64).collect();
    let (traj, _) =
        integrate(&p, &MomentState::ground(), (0.0, 10.0), Tolerance::default(), &Output::Grid(grid)).unwrap();
    for i in 0..traj.len() {
        let x = MomentState::from_slice(traj.state(i));
        assert!(x.pairing_defect() < 1e-7);
        for s in REAL_SLOTS {
            assert!(x[s].im.abs() < 1e-7);
        }
        for s in [SZ_S, SZ_PR] {
            assert!(x[s].re.abs() <= 1.0 + 1e-6);
        }
    }
}

#[test]
fn uncoupled_cross_moments_factorize() {
    let p = params(|p| {
        p.mu = 0.0;
        p.gamma_s = 2.0;
        p.omega_rabi_s = 3.0;
        p.omega_rabi_pr = 0.7;
    });
    let grid: Vec<f64> = (0..=40).map(|i| 0.25 * i as f64).collect();
    let (traj, _) =
        integrate(&p, &MomentState::ground(), (0.0, 10.0), Tolerance::default(), &Output::Grid(grid)).unwrap();
    for i in 0..traj.len() {
        let x = MomentState::from_slice(traj.state(i));
        let f = MomentState::product(x[SM_S], x[SZ_S].re, x[SM_PR], x[SZ_PR].re);
        assert!(x.max_abs_diff(&f) < 1e-7);
    }
}

#[test]
fn static_steady_state_has_tiny_residual() {
    let p = params(|p| {
        p.mu = 0.0;
        p.omega_rabi_pr = 0.0;
        p.gamma_s = 1.0;
        p.omega_rabi_s = 0.0;
    });
    let out = steady_periodic(&p, &SteadyOptions { samples: 512, ..Default::default() }).unwrap();
    assert!(out.residual < 1e-12);
    let first = out.trajectory.state(0).to_vec();
    for i in 0..out.trajectory.len() {
        for (a, b) in out.trajectory.state(i).iter().zip(&first) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

fn moderate() -> ValidatedParams {
    params(|p| {
        p.gamma_s = 2.0;
        p.omega_rabi_s = 6.0;
        p.omega_rabi_pr = 0.3;
        p.delta_omega = 2.0 * std::f64::consts::PI / 10.0;
    })
}

#[test]
fn doubling_the_transient_leaves_the_period_unchanged() {
    let p = moderate();
    let base = SteadyOptions { samples: 512, ..Default::default() };
    let t0 = default_transient(&p).unwrap();
    assert_eq!(t0, 100.0);
    let a = steady_periodic(&p, &base).unwrap();
    let b = steady_periodic(&p, &SteadyOptions { transient: Some(2.0 * t0), ..base }).unwrap();
    assert!(a.steady && b.steady);
    for i in 0..a.trajectory.len() {
        let (x, y) = (MomentState::from_slice(a.trajectory.state(i)), MomentState::from_slice(b.trajectory.state(i)));
        assert!(x.max_abs_diff(&y) < 1e-8);
    }
}

#[test]
fn harmonic_balance_matches_time_integration() {
    let p = moderate();
    let a = steady_periodic(&p, &SteadyOptions { samples: 512, ..Default::default() }).unwrap();
    let hb = solve_harmonic_auto(&p, 1e-13).unwrap();
    assert!(hb.residual < 1e-9);
    for (i, &t) in a.trajectory.times().iter().enumerate() {
        let x = MomentState::from_slice(a.trajectory.state(i));
        let y = MomentState(hb.state_at(t));
        assert!(x.max_abs_diff(&y) < 1e-8, "τ = {t}: {}", x.max_abs_diff(&y));
    }
}

#[test]
fn harmonic_balance_reproduces_source_closed_form() {
    let p = params(|p| {
        p.delta = 0.4;
        p.omega_rabi_s = 9.0;
    });
    let hb = solve_harmonic(&p, 8).unwrap();
    let s = source_steady_state(&p);
    assert!((hb.coefficient(-1, SM_S) - s.sigma_minus).norm() < 1e-12);
    assert!((hb.coefficient(0, SZ_S) - c(s.sigma_z)).norm() < 1e-12);
    assert!(hb.coefficient(1, SM_S).norm() < 1e-12);
}

#[test]
fn even_harmonics_vanish_in_harmonic_balance() {
    let hb = solve_harmonic_auto(&moderate(), 1e-13).unwrap();
    for k in [-4, -2, 0, 2, 4] {
        assert!(hb.coefficient(k, SM_PR).norm() < 1e-12);
    }
    assert!(hb.coefficient(1, SM_PR).norm() > 1e-3);
}

#[test]
fn zero_frequency_offset_is_rejected() {
    let p = params(|p| p.delta_omega = 0.0);
    let err = steady_periodic(&p, &SteadyOptions::default()).unwrap_err();
    assert!(matches!(err, CascadeError::Param(_)));
    assert!(!err.is_convergence());
}

#[test]
fn unconverged_period_is_reported() {
    let p = moderate();
    let err =
        steady_periodic(&p, &SteadyOptions { transient: Some(1.0), samples: 512, ..Default::default() }).unwrap_err();
    assert!(matches!(err, CascadeError::NotConverged { .. }));
    assert!(err.is_convergence());
}

#[test]
fn csv_has_header_and_one_row_per_sample() {
    let p = moderate();
    let grid = vec![0.0, 0.5, 1.0];
    let (traj, _) =
        integrate(&p, &MomentState::ground(), (0.0, 1.0), Tolerance::default(), &Output::Grid(grid)).unwrap();
    let mut buf = Vec::new();
    write_trajectory_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[0].starts_with("tau,sm_s_re,sm_s_im,"));
    assert_eq!(lines[0].split(',').count(), 31);
    assert_eq!(lines[1].split(',').count(), 31);
    assert!(lines[1].starts_with("0.0,0.0,0.0,-1.0,0.0,"));
}
