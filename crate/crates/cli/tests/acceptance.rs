//! One PASS/FAIL line per acceptance criterion. Exits non-zero if any fails.

mod common;

use std::time::{Duration, Instant};

use cohortfair::eval::{auc_from_scores, mann_whitney, star_band, Band, TestMode};
use cohortfair::lp::{self, LpProblem};
use cohortfair::scenario::{self, ScenarioSpec, REFERENCE_SEX_COUNTS};
use cohortfair::cohort::CohortTable;
use cohortfair::strategies::{
    self, forward, grad, losses, Example, Network, ParamGroup, Strategy, StrategyConfig, SyntheticConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn table1() -> Outcome {
    let start = Instant::now();
    let table = CohortTable::isic_archive_snapshot()
        .after_reservation(scenario::DEFAULT_TEST_CELL_SIZE)
        .unwrap();
    let mut mismatches = Vec::new();
    for (spec, (name, male, female)) in ScenarioSpec::standard_set().iter().zip(REFERENCE_SEX_COUNTS) {
        let (_, _, t) = scenario::plan_targets(&table, spec).unwrap();
        let got = [t.malignant_male, t.malignant_female, t.benign_male, t.benign_female];
        if got != [male, female, male, female] {
            mismatches.push(format!("{name} {got:?}"));
        }
    }
    let elapsed = start.elapsed();
    let pass = mismatches.is_empty() && elapsed < Duration::from_secs(1);
    outcome(pass, format!("10 sex-level counts, {} mismatches, {elapsed:.2?} (limit 1 s) {mismatches:?}", mismatches.len()))
}

fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(0..=6);
    let bounds: Vec<f64> = (0..n).map(|_| rng.gen_range(0..=10) as f64).collect();
    let x0: Vec<f64> = bounds.iter().map(|&u| rng.gen_range(0..=u as i64) as f64).collect();
    let mut p = LpProblem::new(n).maximize((0..n).map(|_| rng.gen_range(-5..=5) as f64).collect());
    for _ in 0..m {
        let mut row: Vec<f64> = (0..n).map(|_| rng.gen_range(-3..=3) as f64).collect();
        let mut rhs: f64 = row.iter().zip(&x0).map(|(a, x)| a * x).sum();
        if rhs < 0.0 {
            row.iter_mut().for_each(|a| *a = -*a);
            rhs = -rhs;
        }
        p = p.with_equality(row, rhs);
    }
    for (j, &u) in bounds.iter().enumerate() {
        p = p.with_upper_bound(j, u);
    }
    p
}

fn simplex() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cases = 150;
    let mut worst: f64 = 0.0;
    let mut status_mismatch = 0;
    for _ in 0..cases {
        let p = random_lp(&mut rng);
        let a = lp::solve(&p).unwrap();
        let b = lp::enumerate_vertices(&p).unwrap();
        if a.status != b.status {
            status_mismatch += 1;
        } else {
            worst = worst.max((a.objective_value - b.objective_value).abs());
        }
    }
    let elapsed = start.elapsed();
    let pass = status_mismatch == 0 && worst <= 1e-9 && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!("{cases} instances, {status_mismatch} status mismatches, max objective gap {worst:.1e} (limit 1e-9), {elapsed:.2?} (limit 10 s)"),
    )
}

fn pairwise_auc(scores: &[f64], labels: &[bool]) -> Option<f64> {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (s, &l) in scores.iter().zip(labels) {
        if !l {
            continue;
        }
        for (t, &m) in scores.iter().zip(labels) {
            if m {
                continue;
            }
            pairs += 1.0;
            wins += if s > t { 1.0 } else if s == t { 0.5 } else { 0.0 };
        }
    }
    (pairs > 0.0).then(|| wins / pairs)
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut sets = 0;
    while sets < 1000 {
        let n = rng.gen_range(2..=200);
        let levels = rng.gen_range(2..=40);
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(0..levels)) / f64::from(levels)).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        if let (Some(a), Some(b)) = (auc_from_scores(&scores, &labels), pairwise_auc(&scores, &labels)) {
            worst = worst.max((a - b).abs());
            sets += 1;
        }
    }
    let perfect = auc_from_scores(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]);
    let tied = auc_from_scores(&[0.5; 6], &[true, false, true, false, false, true]);
    let pass = worst <= 1e-12 && perfect == Some(1.0) && tied == Some(0.5);
    outcome(
        pass,
        format!("1000 sets, max gap {worst:.1e} (limit 1e-12), perfect ranking {perfect:?}, all tied {tied:?}"),
    )
}

fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let u_of = |mask: u32| {
        let mut u = 0.0;
        for i in (0..n).filter(|i| mask & (1 << i) != 0) {
            for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                u += if pooled[i] > pooled[j] { 1.0 } else if pooled[i] == pooled[j] { 0.5 } else { 0.0 };
            }
        }
        u
    };
    let observed = u_of((1u32 << a.len()) - 1);
    let us: Vec<f64> = (0u32..1 << n).filter(|m| m.count_ones() as usize == a.len()).map(u_of).collect();
    let total = us.len() as f64;
    let lower = us.iter().filter(|&&u| u <= observed + 1e-9).count() as f64 / total;
    let upper = us.iter().filter(|&&u| u >= observed - 1e-9).count() as f64 / total;
    (2.0 * lower.min(upper)).min(1.0)
}

fn mann_whitney_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_exact: f64 = 0.0;
    for n_a in 1..=11 {
        for n_b in 1..=(12 - n_a) {
            for levels in [3, 1000] {
                let a: Vec<f64> = (0..n_a).map(|_| f64::from(rng.gen_range(0..levels))).collect();
                let b: Vec<f64> = (0..n_b).map(|_| f64::from(rng.gen_range(0..levels))).collect();
                let p = mann_whitney(&a, &b, TestMode::Exact).unwrap().p_value;
                worst_exact = worst_exact.max((p - enumerated_p(&a, &b)).abs());
            }
        }
    }
    let textbook = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], TestMode::Exact).unwrap();
    let textbook_ok = (textbook.p_value - 0.1).abs() < 1e-12 && textbook.band == Band::OneStar;
    let mut worst_normal: f64 = 0.0;
    for _ in 0..200 {
        let a: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        let b: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        let exact = mann_whitney(&a, &b, TestMode::Exact).unwrap().p_value;
        let normal = mann_whitney(&a, &b, TestMode::NormalApprox).unwrap().p_value;
        worst_normal = worst_normal.max((exact - normal).abs());
    }
    let pass = worst_exact <= 1e-12 && textbook_ok && worst_normal < 0.01;
    outcome(
        pass,
        format!(
            "exact vs enumeration max gap {worst_exact:.1e} over all n_a+n_b <= 12; [1,2,3] vs [4,5,6] p = {:.4} band {}; \
             max |exact - normal| over 200 random 8 vs 8 samples {worst_normal:.4} (limit 0.01)",
            textbook.p_value, textbook.band
        ),
    )
}

fn random_case(rng: &mut ChaCha8Rng) -> (Network, Vec<Example>) {
    loop {
        let dim = rng.gen_range(1..5);
        let mut net = Network::init(dim, rng.gen_range(1..6), rng.gen());
        net.b1.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
        let n = rng.gen_range(1..12);
        let batch: Vec<Example> = (0..n)
            .map(|_| Example {
                features: (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                diagnosis: rng.gen_range(0..2),
                sex: rng.gen_range(0..2),
            })
            .collect();
        if forward(&net, &batch).unwrap().pre.iter().flatten().all(|p| p.abs() > 1e-3) {
            return (net, batch);
        }
    }
}

fn gradient_checks() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for strategy in Strategy::ALL {
        for _ in 0..20 {
            let (net, batch) = random_case(&mut rng);
            let config = StrategyConfig {
                strategy,
                lambda: 5.0,
                ..Default::default()
            };
            let analytic = grad(&net, &batch, &config).unwrap().params.flatten();
            let params = net.flatten();
            for (i, group) in net.param_groups().into_iter().enumerate() {
                let f = |delta: f64| {
                    let mut p = params.clone();
                    p[i] += delta;
                    let mut shifted = net.clone();
                    shifted.unflatten(&p);
                    let (ld, ls) = losses(&shifted, &batch).unwrap();
                    match (strategy, group) {
                        (Strategy::Base, ParamGroup::SexHead) => 0.0,
                        (Strategy::Base, _) | (Strategy::Adversarial, ParamGroup::DiagnosisHead) => ld,
                        (Strategy::Reinforce, _) => ld + ls,
                        (Strategy::Adversarial, ParamGroup::Encoder) => ld - 5.0 * ls,
                        (Strategy::Adversarial, ParamGroup::SexHead) => ls,
                    }
                };
                let numeric = (f(h) - f(-h)) / (2.0 * h);
                let scale = analytic[i].abs().max(numeric.abs()).max(1e-5);
                worst = worst.max((analytic[i] - numeric).abs() / scale);
            }
        }
    }
    let mut bitwise = true;
    for _ in 0..20 {
        let (net, batch) = random_case(&mut rng);
        let base = grad(&net, &batch, &StrategyConfig::default()).unwrap().params;
        let adv = grad(
            &net,
            &batch,
            &StrategyConfig {
                strategy: Strategy::Adversarial,
                lambda: 0.0,
                ..Default::default()
            },
        )
        .unwrap()
        .params;
        let bits = |n: &Network| n.w1.iter().chain(&n.b1).map(|v| v.to_bits()).collect::<Vec<_>>();
        bitwise &= bits(&base) == bits(&adv);
    }
    outcome(
        worst < 1e-4 && bitwise,
        format!("20 nets per strategy, max relative error {worst:.1e} (limit 1e-4); lambda = 0 encoder gradient bitwise equal to base: {bitwise}"),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn debiasing() -> Outcome {
    let start = Instant::now();
    let run = |strategy| {
        let (mut probe, mut diag) = (Vec::new(), Vec::new());
        for seed in 0..5u64 {
            let synth = |n, rho, k| {
                strategies::generate_synthetic(&SyntheticConfig {
                    n_samples: n,
                    class_signal: 2.0,
                    sex_signal: 2.0,
                    sex_label_correlation: rho,
                    seed: seed * 4 + k,
                    ..Default::default()
                })
                .unwrap()
            };
            let (train, val, test, fit) = (synth(1000, 0.8, 0), synth(300, 0.0, 1), synth(1000, 0.0, 2), synth(1000, 0.0, 3));
            let config = StrategyConfig {
                strategy,
                lambda: 5.0,
                learning_rate: 0.05,
                seed,
                ..Default::default()
            };
            let (net, _) = strategies::train(&Network::init(8, 4, seed), &train, &val, &config).unwrap();
            probe.push(strategies::probe_sex_auc(&net, &fit, &test).unwrap().unwrap());
            diag.push(strategies::diagnosis_auc(&net, &test).unwrap().unwrap());
        }
        (median(probe), median(diag))
    };
    let (base_probe, base_diag) = run(Strategy::Base);
    let (adv_probe, adv_diag) = run(Strategy::Adversarial);
    let elapsed = start.elapsed();
    let pass = adv_probe < base_probe && adv_diag >= 0.6 && elapsed < Duration::from_secs(120);
    outcome(
        pass,
        format!(
            "median sex-probe AUC adversarial {adv_probe:.3} vs base {base_probe:.3}; median diagnosis AUC adversarial {adv_diag:.3}, base {base_diag:.3} (floor 0.6); {elapsed:.2?} (limit 120 s)"
        ),
    )
}

fn star_bands() -> Outcome {
    let cases = [
        (0.00005, Band::FourStars),
        (0.0001, Band::FourStars),
        (0.00011, Band::ThreeStars),
        (0.001, Band::ThreeStars),
        (0.0011, Band::TwoStars),
        (0.01, Band::TwoStars),
        (0.011, Band::OneStar),
        (0.1, Band::OneStar),
        (0.2, Band::NotSignificant),
        (1.0, Band::NotSignificant),
    ];
    let wrong: Vec<_> = cases.iter().filter(|(p, b)| star_band(*p) != *b).map(|(p, _)| *p).collect();
    outcome(wrong.is_empty(), format!("{} boundary and interior p values, wrong at {wrong:?}", cases.len()))
}

fn determinism() -> Outcome {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    for dir in [&first, &second] {
        let out = common::full_pipeline(dir.path());
        if !out.status.success() {
            return outcome(false, format!("pipeline failed: {}", common::stderr(&out)));
        }
    }
    let a = common::snapshot(first.path());
    let b = common::snapshot(second.path());
    let differing: Vec<_> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    let pass = !a.is_empty() && a.len() == b.len() && differing.is_empty();
    outcome(pass, format!("build + train-toy + eval twice: {} files compared, {} differ {differing:?}", a.len(), differing.len()))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 8] = [
        ("Table 1 golden reproduction", table1),
        ("simplex agrees with vertex enumeration", simplex),
        ("AUC equals pairwise oracle", auc_oracle),
        ("Mann-Whitney exactness", mann_whitney_exactness),
        ("gradient checks", gradient_checks),
        ("directional debiasing", debiasing),
        ("star band boundaries", star_bands),
        ("byte-identical reruns", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        if !result.pass {
            failed += 1;
        }
        println!("{} [{}] {name}: {}", if result.pass { "PASS" } else { "FAIL" }, i + 1, result.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
