use delaycert::search::{self, StabilityOracle};
use delaycert::sim::{self, HistoryFunction};
use delaycert::spectral::{rightmost_root, SpectralSettings};
use delaycert::stability::{self, upper_bound_constant};
use delaycert::synthesis::{self, SynthesisOutcome, DEFAULT_PROFILE};
use delaycert::{
    CertifyOutcome, ControlledSystem, DelaySystem, EpsilonProfile, Mat, SlackMode, SolverSettings,
    StabilityCertificate, SymMat,
};

fn system1(h: f64) -> DelaySystem {
    DelaySystem::new(
        Mat::from_rows(&[[0.2, 0.0], [0.2, 0.1]]).unwrap(),
        Mat::zeros(2, 2),
        Mat::from_rows(&[[-1.0, 0.0], [-1.0, -1.0]]).unwrap(),
        h,
    )
    .unwrap()
}

fn system2(h: f64) -> DelaySystem {
    DelaySystem::new(
        Mat::from_rows(&[[-3.0, -2.0], [1.0, 0.0]]).unwrap(),
        Mat::from_rows(&[[-0.5, 0.1], [0.3, 0.0]]).unwrap(),
        Mat::zeros(2, 2),
        h,
    )
    .unwrap()
}

fn plant(h: f64) -> ControlledSystem {
    ControlledSystem::new(
        Mat::from_rows(&[[0.2, 0.0], [0.2, 0.1]]).unwrap(),
        Mat::from_rows(&[[-1.0, 0.0], [-1.0, -1.0]]).unwrap(),
        Mat::identity(2),
        h,
    )
    .unwrap()
}

fn certify(sys: &DelaySystem, alpha: f64, mode: SlackMode) -> Option<StabilityCertificate> {
    match stability::certify(sys, alpha, &mode, &SolverSettings::default()).unwrap() {
        CertifyOutcome::Certified(c) => Some(*c),
        CertifyOutcome::Infeasible { .. } => None,
    }
}

fn lambda_max(m: &Mat) -> f64 {
    SymMat::symmetrize(m).max_eigenvalue().unwrap()
}

#[test]
fn certificate_constants_follow_from_matrices() {
    let sys = system1(1.0);
    let cert = certify(&sys, 0.0, SlackMode::Free).expect("h = 1 lies inside the certified interval");
    assert!(cert.verify(&sys, 0.0).unwrap());
    let h = cert.h;
    let beta2 = (1.0 + h * h) * lambda_max(&cert.p) + h * lambda_max(&cert.s) + h.powi(3) / 2.0 * lambda_max(&cert.r);
    assert!((beta2 - cert.beta2).abs() < 1e-10 * beta2);
    assert_eq!(beta2, upper_bound_constant(h, &cert.p, &cert.s, &cert.r).unwrap());
    assert!(cert.gamma >= 1.0);
    assert!((cert.gamma - (cert.beta2 / cert.beta1).sqrt().max(1.0)).abs() < 1e-12);
}

#[test]
fn certificate_survives_json_and_detects_tampering() {
    let sys = system1(1.0);
    let cert = certify(&sys, 0.0, SlackMode::Free).unwrap();
    let json = serde_json::to_string(&cert).unwrap();
    let back: StabilityCertificate = serde_json::from_str(&json).unwrap();
    assert!(back.verify(&sys, 0.0).unwrap());

    let mut bad = back.clone();
    bad.r = bad.r.scale(-1.0);
    assert!(!bad.verify(&sys, 0.0).unwrap());
    let mut inflated = back.clone();
    inflated.gamma *= 0.5;
    assert!(!inflated.verify(&sys, 0.0).unwrap());
    // same matrices, different delay
    assert!(back.verify(&system1(1.5), 0.0).is_err());
}

#[test]
fn outside_the_interval_nothing_certifies() {
    for h in [0.1, 2.0] {
        assert!(certify(&system1(h), 0.0, SlackMode::Free).is_none(), "h = {h}");
    }
    assert!(certify(&system1(1.03), 0.5, SlackMode::Free).is_none());
}

#[test]
fn structured_modes_never_beat_free_slack() {
    let settings = SolverSettings::default();
    let structured = [EpsilonProfile::ONES, EpsilonProfile::SKIP_DELAYED];
    for (sys, hs) in [
        (system1(1.0), [0.25, 0.9, 1.85, 1.93]),
        (system2(1.0), [0.5, 1.5, 3.0, 6.0]),
    ] {
        for &h in &hs {
            for alpha in [0.0, 0.3] {
                let s = sys.with_delay(h).unwrap();
                let free = stability::is_feasible(&s, alpha, &SlackMode::Free, &settings).unwrap();
                let projected = stability::is_feasible(&s, alpha, &SlackMode::Projected, &settings).unwrap();
                assert_eq!(free, projected, "h = {h}, α = {alpha}");
                for profile in structured {
                    let st = stability::is_feasible(&s, alpha, &SlackMode::Structured { profile }, &settings).unwrap();
                    assert!(
                        !st || free,
                        "structured feasible but free infeasible at h = {h}, α = {alpha}"
                    );
                }
            }
        }
    }
}

#[test]
fn certified_rates_stay_below_spectral_rate() {
    let oracle = StabilityOracle {
        system: system2(1.0),
        mode: SlackMode::Free,
        settings: SolverSettings::default(),
    };
    for h in [0.2, 1.0, 2.5] {
        let lmi = search::max_alpha_for_h(&oracle, h, 3.0, 1e-3).unwrap().unwrap();
        let spec = rightmost_root(&system2(h), &SpectralSettings::default())
            .unwrap()
            .decay_rate();
        assert!(lmi <= spec + 1e-3, "h = {h}: certified {lmi} above spectral {spec}");
    }
}

#[test]
fn controller_gain_round_trips_and_stabilizes() {
    let sys = plant(2.0);
    let out = synthesis::synthesize_controller(&sys, 0.0, &DEFAULT_PROFILE, &SolverSettings::default()).unwrap();
    let SynthesisOutcome::Synthesized(res) = out else {
        panic!("h = 2 should admit a controller");
    };
    let kx = &res.gain * &res.congruence;
    assert!((&kx - &res.transformed_gain).max_abs() < 1e-9 * (1.0 + res.transformed_gain.max_abs()));
    assert!(res.certificate.verify(&res.closed_loop, 0.0).unwrap());
    let root = rightmost_root(&res.closed_loop, &SpectralSettings::default()).unwrap();
    assert!(root.root.re < 0.0, "closed loop root {}", root.root);
    // the open loop is unstable
    assert!(sys.a.spectral_abscissa().unwrap() > 0.0);
}

#[test]
fn controller_infeasible_beyond_delay_bound() {
    let out = synthesis::synthesize_controller(&plant(0.6), 1.0, &DEFAULT_PROFILE, &SolverSettings::default()).unwrap();
    assert!(matches!(out, SynthesisOutcome::Infeasible { .. }));
}

#[test]
fn observer_error_converges_inside_its_envelope() {
    let settings = SolverSettings::default();
    let h = 1.0;
    let sys = plant(h);
    let obs = synthesis::synthesize_observer(&sys, 0.2, &DEFAULT_PROFILE, &settings).unwrap();
    let obs = obs.result().expect("observer at h = 1, α = 0.2").clone();
    // Zᵀ L = L̄
    let zl = &obs.congruence.transpose() * &obs.gain;
    assert!((&zl - &obs.transformed_gain).max_abs() < 1e-9 * (1.0 + obs.transformed_gain.max_abs()));

    let ctrl = synthesis::synthesize_controller(&sys, 0.0, &DEFAULT_PROFILE, &settings).unwrap();
    let k = ctrl.result().unwrap().gain.scale(-1.0);
    assert!(synthesis::separation_check(&sys.a, &sys.b, &k, &obs.closed_loop, &obs.certificate, 0.0).unwrap());

    let closed = synthesis::assemble_closed_loop(&sys.a, &sys.b, &sys.c, &k, &obs.gain, h).unwrap();
    let phi = HistoryFunction::polynomial(vec![vec![1.0, -0.5, 0.3, 0.8], vec![0.2, 0.4, -0.6, 0.1]]).unwrap();
    let rec = sim::integrate(&closed, &phi, 30.0, h / 64.0).unwrap();
    assert!(!rec.diverged);

    // the error block alone obeys the observer certificate
    let err_phi = HistoryFunction::polynomial(vec![vec![0.3, 0.8], vec![-0.6, 0.1]]).unwrap();
    let err_norm_w = {
        let (a, b) = sim::history_norms(&err_phi, h);
        a.max(b)
    };
    let cert = &obs.certificate;
    for (t, x) in rec.times.iter().zip(&rec.states) {
        let e = (x[2] * x[2] + x[3] * x[3]).sqrt();
        assert!(
            e <= cert.gamma * (-cert.alpha * t).exp() * err_norm_w * (1.0 + 1e-6),
            "t = {t}"
        );
    }
    let last = rec.final_state();
    assert!(last.iter().all(|v| v.abs() < 1e-3), "state and error settle: {last:?}");
}
