use rabisense::dynamics::{Event, ModelSpec, Parameter, SchemeConfig, TrajectoryConfig, TrajectoryRecord, Unraveling};
use rabisense::inference::{
    estimate_fisher, fisher_from_records, likelihood_curve, replay_log_likelihood, score_mean_diagnostic, FisherConfig,
    ScoreEngine,
};
use rabisense::models::tune_to_cp;
use rabisense::Error;

fn decay_record(kappa: f64, dt: f64, n_steps: u64, jump: Option<u64>) -> TrajectoryRecord {
    TrajectoryRecord {
        spec: ModelSpec::pure_decay(kappa, 3),
        dt,
        n_steps,
        initial_fock: 1,
        master_seed: 0,
        stream: 0,
        events: jump.map(|step| Event { step, channel: 0 }).into_iter().collect(),
    }
}

/// Per-step survival probability of |1> under the discretized decay law.
fn survival(kappa: f64, dt: f64) -> f64 {
    let stay = (-2.0 * kappa * dt).exp();
    let jump = kappa * dt * (1.0 + stay);
    stay / (stay + jump)
}

#[test]
fn single_jump_likelihood_closed_form() {
    let (kappa, dt) = (0.8, 0.05);
    for jump in [None, Some(0), Some(7), Some(19)] {
        let rec = decay_record(kappa, dt, 20, jump);
        let p = survival(kappa, dt);
        let expected = match jump {
            None => 20.0 * p.ln(),
            Some(s) => s as f64 * p.ln() + (1.0 - p).ln(),
        };
        for offset in [0.0, 0.1, -0.3] {
            let got = replay_log_likelihood(&rec, Parameter::Kappa, offset).unwrap();
            let p = survival(kappa + offset, dt);
            let expected = match jump {
                None => 20.0 * p.ln(),
                Some(s) => s as f64 * p.ln() + (1.0 - p).ln(),
            };
            assert!((got - expected).abs() < 1e-12, "{jump:?} {offset}: {got} vs {expected}");
        }
        let curve = likelihood_curve(&rec, Parameter::Kappa, &[-0.2, 0.2]).unwrap();
        assert_eq!(curve.offsets, vec![-0.2, 0.0, 0.2]);
        assert!((curve.log_likelihoods[1] - expected).abs() < 1e-12);
    }
}

#[test]
fn zero_offset_replay_matches_generation() {
    let spec = ModelSpec::rabi(tune_to_cp(1.0, 2.0, 0.5).unwrap(), SchemeConfig::Perfect, 14);
    let cfg = TrajectoryConfig::new(spec, 5.0, 0.01).unwrap();
    let unr = Unraveling::new(&spec, 0.01).unwrap();
    for index in 0..5 {
        let out = unr.run_seeded(&cfg, 21, index).unwrap();
        for parameter in [Parameter::Omega, Parameter::Kappa] {
            let l = replay_log_likelihood(&out.record, parameter, 0.0).unwrap();
            assert_eq!(l.to_bits(), out.log_likelihood.to_bits());
        }
    }
}

#[test]
fn record_outside_the_model_is_rejected() {
    // A second jump from |0> is impossible.
    let mut rec = decay_record(0.5, 0.1, 10, Some(2));
    rec.events.push(Event { step: 5, channel: 0 });
    assert!(matches!(replay_log_likelihood(&rec, Parameter::Kappa, 0.0), Err(Error::RecordMismatch(_))));
}

/// Fisher information of the first-jump time of rate `2 kappa`, observed up
/// to `t`, with respect to `kappa`, by Simpson quadrature.
fn censored_fisher_quadrature(kappa: f64, t: f64) -> f64 {
    let rate = 2.0 * kappa;
    let n = 20_000;
    let h = t / n as f64;
    let f = |s: f64| {
        let score = 1.0 / kappa - 2.0 * s;
        score * score * rate * (-rate * s).exp()
    };
    let mut acc = f(0.0) + f(t);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0 + 4.0 * t * t * (-rate * t).exp()
}

#[test]
fn censored_exponential_fisher_information() {
    let kappa: f64 = 0.5;
    for t in [0.3, 1.0, 5.0] {
        let closed = (1.0 - (-2.0 * kappa * t).exp()) / (kappa * kappa);
        assert!((censored_fisher_quadrature(kappa, t) - closed).abs() < 1e-9);
    }

    let ts = vec![0.5, 1.0, 2.0, 4.0, 8.0];
    let mut cfg = FisherConfig::new(ModelSpec::pure_decay(kappa, 3), Parameter::Kappa, 0.01, ts.clone(), 3000);
    cfg.initial_fock = 1;
    cfg.master_seed = 5;
    let est = estimate_fisher(&cfg).unwrap();
    assert_eq!(est.n_trajectories, 3000);
    assert_eq!(est.n_failed, 0);
    for (k, &t) in ts.iter().enumerate() {
        let oracle = censored_fisher_quadrature(kappa, t);
        let z = (est.fi_values[k] - oracle) / est.std_errors[k];
        assert!(z.abs() < 3.0, "t = {t}: {} vs {oracle} (z = {z})", est.fi_values[k]);
    }
    assert!(!score_mean_diagnostic(&est).checkpoints.iter().any(|c| c.biased));
}

/// Every record on a short grid with its probability and central-difference score.
fn enumerate_records(spec: ModelSpec, dt: f64, n_steps: u64, delta: f64) -> Vec<(f64, f64)> {
    let unr = Unraveling::new(&spec, dt).unwrap();
    let plus = Unraveling::new(&spec.shifted(Parameter::Omega, delta).unwrap(), dt).unwrap();
    let minus = Unraveling::new(&spec.shifted(Parameter::Omega, -delta).unwrap(), dt).unwrap();
    let mut out = Vec::new();
    for mask in 0u64..1 << n_steps {
        let events = (0..n_steps).filter(|s| mask >> s & 1 == 1).map(|step| Event { step, channel: 0 }).collect();
        let rec = TrajectoryRecord { spec, dt, n_steps, initial_fock: 0, master_seed: 0, stream: 0, events };
        let Ok(r) = unr.replay(&rec, &[n_steps]) else { continue };
        let lp = plus.replay(&rec, &[n_steps]).unwrap().log_likelihood;
        let lm = minus.replay(&rec, &[n_steps]).unwrap().log_likelihood;
        out.push((r.log_likelihood.exp(), (lp - lm) / (2.0 * delta)));
    }
    out
}

#[test]
fn monte_carlo_fisher_matches_enumeration() {
    let spec = ModelSpec::rabi(tune_to_cp(1.0, 2.0, 0.5).unwrap(), SchemeConfig::Perfect, 12);
    let (dt, n_steps) = (0.25, 8u64);
    let delta = 1e-3;
    let table = enumerate_records(spec, dt, n_steps, delta);
    let total: f64 = table.iter().map(|(p, _)| p).sum();
    let mean_score: f64 = table.iter().map(|(p, s)| p * s).sum();
    let exact: f64 = table.iter().map(|(p, s)| p * s * s).sum();
    assert!((total - 1.0).abs() < 1e-10);
    assert!(mean_score.abs() < 1e-6 * exact.sqrt().max(1.0));

    let mut cfg = FisherConfig::new(spec, Parameter::Omega, dt, vec![n_steps as f64 * dt], 4000);
    cfg.delta = Some(delta);
    cfg.master_seed = 11;
    let est = estimate_fisher(&cfg).unwrap();
    let z = (est.fi_values[0] - exact) / est.std_errors[0];
    assert!(z.abs() < 3.0, "{} vs {exact} (z = {z})", est.fi_values[0]);
}

#[test]
fn stored_records_reproduce_the_estimate() {
    let spec = ModelSpec::rabi(tune_to_cp(1.0, 2.0, 0.5).unwrap(), SchemeConfig::Perfect, 14);
    let ts = vec![1.0, 2.0, 4.0];
    let mut cfg = FisherConfig::new(spec, Parameter::Omega, 0.01, ts.clone(), 60);
    cfg.master_seed = 3;
    cfg.richardson_trajectories = 30;
    let engine = ScoreEngine::new(&cfg).unwrap();
    let mut records = Vec::new();
    let mut samples = Vec::new();
    for i in 0..60 {
        let (s, r) = engine.score_trajectory(cfg.master_seed, i, i < 30).unwrap();
        samples.push(s);
        records.push(r);
    }
    let direct = estimate_fisher(&cfg).unwrap();
    let replayed = fisher_from_records(&records, Parameter::Omega, engine.delta(), &ts, 2).unwrap();
    assert_eq!(direct.fi_values, replayed.fi_values);
    assert_eq!(direct.std_errors, replayed.std_errors);

    let again = engine.score_record(&records[7], 7, true).unwrap();
    assert_eq!(again, samples[7]);

    let mut two = cfg.clone();
    two.workers = 2;
    assert_eq!(estimate_fisher(&two).unwrap(), direct);
}

#[test]
fn oversized_delta_fails_the_richardson_check() {
    // A step comparable to omega itself changes the score at second order.
    let spec = ModelSpec::rabi(tune_to_cp(1.0, 2.0, 0.5).unwrap(), SchemeConfig::Perfect, 14);
    let mut cfg = FisherConfig::new(spec, Parameter::Omega, 0.01, vec![2.0, 4.0], 40);
    cfg.delta = Some(0.6);
    cfg.richardson_trajectories = 40;
    assert!(matches!(estimate_fisher(&cfg), Err(Error::DeltaTooLarge { .. })));

    cfg.delta = None;
    estimate_fisher(&cfg).unwrap();
}

#[test]
fn params_hash_tracks_the_run() {
    let spec = ModelSpec::pure_decay(0.5, 3);
    let a = FisherConfig::new(spec, Parameter::Kappa, 0.01, vec![1.0], 10);
    let mut b = a.clone();
    assert_eq!(a.params_hash(), b.params_hash());
    b.dt = 0.02;
    assert_ne!(a.params_hash(), b.params_hash());
    assert_eq!(a.params_hash().len(), 16);
}
