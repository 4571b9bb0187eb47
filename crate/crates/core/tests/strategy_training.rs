use cohortfair::strategies::{
    diagnosis_auc, generate_synthetic, predict, probe_sex_auc, sex_head_auc, sex_label_correlation, train, Example,
    Network, StopReason, Strategy, StrategyConfig, SyntheticConfig,
};

fn separable() -> Vec<Example> {
    (0..40)
        .map(|i| {
            let y = (i % 2) as u8;
            let offset = (i / 2) as f64 * 0.05;
            let x0 = if y == 1 { 1.0 + offset } else { -1.0 - offset };
            Example {
                features: vec![x0, 0.3 * (i % 5) as f64 - 0.6],
                diagnosis: y,
                sex: (i % 3 == 0) as u8,
            }
        })
        .collect()
}

#[test]
fn base_fits_separable_data() {
    let data = separable();
    let config = StrategyConfig {
        learning_rate: 0.5,
        batch_size: 40,
        max_epochs: 40,
        patience: 40,
        min_delta: 0.0,
        ..Default::default()
    };
    let (net, log) = train(&Network::init(2, 6, 1), &data, &data, &config).unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_diag_loss).collect();
    assert!(losses[..5].windows(2).all(|w| w[1] < w[0]), "{losses:?}");
    let correct = predict(&net, &data)
        .unwrap()
        .iter()
        .zip(&data)
        .filter(|(p, e)| (**p > 0.5) == (e.diagnosis == 1))
        .count();
    assert_eq!(correct, data.len());
}

#[test]
fn frozen_validation_loss_stops_after_patience() {
    let data = separable();
    let config = StrategyConfig {
        learning_rate: 1e-12,
        max_epochs: 40,
        patience: 10,
        ..Default::default()
    };
    let (net, log) = train(&Network::init(2, 3, 2), &data, &data, &config).unwrap();
    assert_eq!(log.best_epoch, 1);
    assert_eq!(log.stop_reason, StopReason::Patience);
    assert!(log.stopped_epoch <= log.best_epoch + 10);
    assert_eq!(log.stopped_epoch, 11);
    assert_eq!(net.digest(), log.params_digest);
}

#[test]
fn training_is_deterministic() {
    let synth = generate_synthetic(&SyntheticConfig {
        n_samples: 200,
        sex_label_correlation: 0.5,
        ..Default::default()
    })
    .unwrap();
    let (tr, va) = synth.split_at(150);
    for strategy in Strategy::ALL {
        let config = StrategyConfig {
            strategy,
            learning_rate: 0.05,
            seed: 4,
            ..Default::default()
        };
        let net = Network::init(8, 4, 4);
        let a = train(&net, tr, va, &config).unwrap();
        let b = train(&net, tr, va, &config).unwrap();
        assert_eq!(a.1, b.1);
        assert_eq!(a.0, b.0);
        assert_eq!(serde_json::to_string(&a.1).unwrap(), serde_json::to_string(&b.1).unwrap());
    }
}

#[test]
fn zero_lambda_adversarial_training_keeps_base_encoder() {
    let synth = generate_synthetic(&SyntheticConfig {
        n_samples: 300,
        sex_label_correlation: 0.8,
        ..Default::default()
    })
    .unwrap();
    let (tr, va) = synth.split_at(240);
    let net = Network::init(8, 4, 9);
    let run = |strategy| {
        let config = StrategyConfig {
            strategy,
            lambda: 0.0,
            learning_rate: 0.05,
            max_epochs: 15,
            seed: 9,
            ..Default::default()
        };
        train(&net, tr, va, &config).unwrap()
    };
    let (base, base_log) = run(Strategy::Base);
    let (adv, adv_log) = run(Strategy::Adversarial);
    let bits = |n: &Network| n.w1.iter().chain(&n.b1).chain(&n.w_diag).map(|v| v.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&base), bits(&adv));
    assert_eq!(base_log.best_epoch, adv_log.best_epoch);
}

#[test]
fn synthetic_correlation_follows_config() {
    for (rho, tol) in [(0.0, 0.05), (0.8, 0.05), (-0.5, 0.05)] {
        let data = generate_synthetic(&SyntheticConfig {
            n_samples: 10_000,
            sex_label_correlation: rho,
            seed: 3,
            ..Default::default()
        })
        .unwrap();
        let positives = data.iter().filter(|e| e.diagnosis == 1).count();
        assert_eq!(positives, 5000);
        let corr = sex_label_correlation(&data);
        assert!((corr - rho).abs() < tol, "rho {rho}: corr {corr}");
    }
}

#[test]
fn synthetic_is_seeded() {
    let config = SyntheticConfig::default();
    assert_eq!(generate_synthetic(&config).unwrap(), generate_synthetic(&config).unwrap());
    let other = SyntheticConfig { seed: 1, ..config.clone() };
    assert_ne!(generate_synthetic(&config).unwrap(), generate_synthetic(&other).unwrap());
}

#[test]
fn without_sex_signal_the_sex_head_is_at_chance() {
    let config = |seed| SyntheticConfig {
        n_samples: 2000,
        sex_signal: 0.0,
        class_signal: 2.0,
        seed,
        ..Default::default()
    };
    let tr = generate_synthetic(&config(1)).unwrap();
    let va = generate_synthetic(&config(2)).unwrap();
    let te = generate_synthetic(&config(3)).unwrap();
    let (net, _) = train(
        &Network::init(8, 4, 1),
        &tr,
        &va,
        &StrategyConfig {
            strategy: Strategy::Reinforce,
            learning_rate: 0.05,
            ..Default::default()
        },
    )
    .unwrap();
    let auc = sex_head_auc(&net, &te).unwrap().unwrap();
    assert!((auc - 0.5).abs() <= 0.05, "sex head AUC {auc}");
}

#[test]
fn strong_class_signal_is_learned() {
    let config = |seed| SyntheticConfig {
        n_samples: 1000,
        class_signal: 6.0,
        noise_scale: 0.5,
        seed,
        ..Default::default()
    };
    let tr = generate_synthetic(&config(1)).unwrap();
    let va = generate_synthetic(&config(2)).unwrap();
    let te = generate_synthetic(&config(3)).unwrap();
    let (net, _) = train(
        &Network::init(8, 4, 1),
        &tr,
        &va,
        &StrategyConfig {
            learning_rate: 0.05,
            ..Default::default()
        },
    )
    .unwrap();
    let auc = diagnosis_auc(&net, &te).unwrap().unwrap();
    assert!(auc > 0.95, "diagnosis AUC {auc}");
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Median probe and diagnosis AUC over five seeds. Training data has
/// sex-label correlation 0.8; validation, probe and scoring sets are
/// sex-balanced with no correlation.
fn debiasing_medians(strategy: Strategy) -> (f64, f64) {
    let (mut probes, mut diags) = (Vec::new(), Vec::new());
    for seed in 0..5u64 {
        let synth = |n, rho, offset| {
            generate_synthetic(&SyntheticConfig {
                n_samples: n,
                class_signal: 2.0,
                sex_signal: 2.0,
                sex_label_correlation: rho,
                seed: seed * 10 + offset,
                ..Default::default()
            })
            .unwrap()
        };
        let tr = synth(1000, 0.8, 1);
        let va = synth(300, 0.0, 2);
        let fit = synth(1000, 0.0, 3);
        let score = synth(1000, 0.0, 4);
        let config = StrategyConfig {
            strategy,
            lambda: 5.0,
            learning_rate: 0.05,
            seed,
            ..Default::default()
        };
        let (net, _) = train(&Network::init(8, 4, seed), &tr, &va, &config).unwrap();
        probes.push(probe_sex_auc(&net, &fit, &score).unwrap().unwrap());
        diags.push(diagnosis_auc(&net, &score).unwrap().unwrap());
    }
    (median(probes), median(diags))
}

#[test]
fn adversarial_features_carry_less_sex_information() {
    let (base_probe, base_diag) = debiasing_medians(Strategy::Base);
    let (adv_probe, adv_diag) = debiasing_medians(Strategy::Adversarial);
    assert!(adv_probe < base_probe, "probe AUC adversarial {adv_probe} vs base {base_probe}");
    assert!(adv_diag >= 0.6, "adversarial diagnosis AUC {adv_diag}");
    assert!(base_diag >= 0.6, "base diagnosis AUC {base_diag}");
}
