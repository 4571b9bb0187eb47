//! Toy-scale versions of the three learning strategies on a network with a
//! shared one-hidden-layer encoder and two logistic heads (diagnosis, sex).
//!
//! - `Base` trains encoder and diagnosis head on the diagnosis loss.
//! - `Reinforce` adds the sex loss with equal weight.
//! - `Adversarial` trains the sex head on its loss while the encoder
//!   receives the sex-loss gradient reversed and scaled by lambda.
//!
//! Gradients are derived by hand. Features come from a synthetic generator
//! with a tunable sex-label correlation.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eval::auc_from_scores;
use crate::rng::{self, Stream};

/// Probabilities are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StrategyError {
    #[error("label must be 0 or 1, got {0}")]
    NonBinaryLabel(u8),
    #[error("feature dimension mismatch: network expects {expected}, example has {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    /// 1 malignant, 0 benign.
    pub diagnosis: u8,
    /// 1 female, 0 male.
    pub sex: u8,
}

pub fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

/// Binary cross-entropy of one prediction.
pub fn bce(y: u8, y_hat: f64) -> Result<f64, StrategyError> {
    let p = clamp_prob(y_hat);
    match y {
        1 => Ok(-p.ln()),
        0 => Ok(-(1.0 - p).ln()),
        other => Err(StrategyError::NonBinaryLabel(other)),
    }
}

/// Summed binary cross-entropy over a batch.
pub fn bce_sum(ys: &[u8], y_hats: &[f64]) -> Result<f64, StrategyError> {
    ys.iter().zip(y_hats).map(|(&y, &p)| bce(y, p)).sum()
}

/// Penalty on accurate sex prediction: `lambda * l_c`.
pub fn bias_loss(l_c: f64, lambda: f64) -> f64 {
    lambda * l_c
}

/// Parameters of the shared encoder and both heads. Gradients use the same shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Row-major `hidden_dim x input_dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w_diag: Vec<f64>,
    pub b_diag: f64,
    pub w_sex: Vec<f64>,
    pub b_sex: f64,
}

/// Which part of the network a flattened parameter belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    DiagnosisHead,
    SexHead,
}

impl Network {
    pub fn zeros(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            w1: vec![0.0; input_dim * hidden_dim],
            b1: vec![0.0; hidden_dim],
            w_diag: vec![0.0; hidden_dim],
            b_diag: 0.0,
            w_sex: vec![0.0; hidden_dim],
            b_sex: 0.0,
        }
    }

    /// Uniform Glorot-style initialization from the seed's init stream.
    pub fn init(input_dim: usize, hidden_dim: usize, seed: u64) -> Self {
        let mut rng = rng::rng(seed, Stream::Initialization);
        let mut net = Self::zeros(input_dim, hidden_dim);
        let enc = (6.0 / (input_dim + hidden_dim) as f64).sqrt();
        let head = (6.0 / (hidden_dim + 1) as f64).sqrt();
        net.w1.iter_mut().for_each(|w| *w = rng.gen_range(-enc..enc));
        net.b1.iter_mut().for_each(|b| *b = 0.01);
        net.w_diag.iter_mut().for_each(|w| *w = rng.gen_range(-head..head));
        net.w_sex.iter_mut().for_each(|w| *w = rng.gen_range(-head..head));
        net
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(&self.w1);
        v.extend_from_slice(&self.b1);
        v.extend_from_slice(&self.w_diag);
        v.push(self.b_diag);
        v.extend_from_slice(&self.w_sex);
        v.push(self.b_sex);
        v
    }

    pub fn unflatten(&mut self, flat: &[f64]) {
        let (w1, rest) = flat.split_at(self.w1.len());
        let (b1, rest) = rest.split_at(self.b1.len());
        let (wd, rest) = rest.split_at(self.w_diag.len());
        let (bd, rest) = rest.split_at(1);
        let (ws, rest) = rest.split_at(self.w_sex.len());
        self.w1.copy_from_slice(w1);
        self.b1.copy_from_slice(b1);
        self.w_diag.copy_from_slice(wd);
        self.b_diag = bd[0];
        self.w_sex.copy_from_slice(ws);
        self.b_sex = rest[0];
    }

    /// Group of every entry of [`Network::flatten`], in the same order.
    pub fn param_groups(&self) -> Vec<ParamGroup> {
        let enc = self.w1.len() + self.b1.len();
        let diag = self.w_diag.len() + 1;
        let sex = self.w_sex.len() + 1;
        std::iter::repeat_n(ParamGroup::Encoder, enc)
            .chain(std::iter::repeat_n(ParamGroup::DiagnosisHead, diag))
            .chain(std::iter::repeat_n(ParamGroup::SexHead, sex))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w_diag.len() + self.w_sex.len() + 2
    }

    pub fn is_finite(&self) -> bool {
        self.flatten().iter().all(|v| v.is_finite())
    }

    /// Hex SHA-256 of the parameter bit patterns.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for v in self.flatten() {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn step(&mut self, grad: &Network, lr: f64, groups: &[ParamGroup]) {
        let mut flat = self.flatten();
        for ((p, g), group) in flat.iter_mut().zip(grad.flatten()).zip(self.param_groups()) {
            if groups.contains(&group) {
                *p -= lr * g;
            }
        }
        self.unflatten(&flat);
    }
}

/// Activations for a batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub pre: Vec<Vec<f64>>,
    /// Encoder output (feature code) per example.
    pub z: Vec<Vec<f64>>,
    pub diag_logit: Vec<f64>,
    pub sex_logit: Vec<f64>,
    /// Clamped diagnosis probabilities.
    pub y_hat: Vec<f64>,
    /// Clamped sex probabilities.
    pub a_hat: Vec<f64>,
}

pub fn encode(net: &Network, features: &[f64]) -> Result<(Vec<f64>, Vec<f64>), StrategyError> {
    if features.len() != net.input_dim {
        return Err(StrategyError::Dimension {
            expected: net.input_dim,
            found: features.len(),
        });
    }
    let pre: Vec<f64> = (0..net.hidden_dim)
        .map(|k| {
            let row = &net.w1[k * net.input_dim..(k + 1) * net.input_dim];
            row.iter().zip(features).map(|(w, x)| w * x).sum::<f64>() + net.b1[k]
        })
        .collect();
    let z = pre.iter().map(|&p| p.max(0.0)).collect();
    Ok((pre, z))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn forward(net: &Network, batch: &[Example]) -> Result<Forward, StrategyError> {
    let mut out = Forward {
        pre: Vec::with_capacity(batch.len()),
        z: Vec::with_capacity(batch.len()),
        diag_logit: Vec::with_capacity(batch.len()),
        sex_logit: Vec::with_capacity(batch.len()),
        y_hat: Vec::with_capacity(batch.len()),
        a_hat: Vec::with_capacity(batch.len()),
    };
    for ex in batch {
        let (pre, z) = encode(net, &ex.features)?;
        let d = dot(&net.w_diag, &z) + net.b_diag;
        let s = dot(&net.w_sex, &z) + net.b_sex;
        out.y_hat.push(clamp_prob(logistic(d)));
        out.a_hat.push(clamp_prob(logistic(s)));
        out.diag_logit.push(d);
        out.sex_logit.push(s);
        out.pre.push(pre);
        out.z.push(z);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Base,
    Reinforce,
    Adversarial,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Base, Strategy::Reinforce, Strategy::Adversarial];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Base => "base",
            Strategy::Reinforce => "reinforce",
            Strategy::Adversarial => "adversarial",
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Strategy::Base),
            "reinforce" => Ok(Strategy::Reinforce),
            "adversarial" => Ok(Strategy::Adversarial),
            other => Err(format!("unknown strategy `{other}`")),
        }
    }
}

/// How the adversarial encoder update is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdversarialMode {
    /// One joint step with the reversed sex gradient at the encoder.
    #[default]
    GradientReversal,
    /// Update the sex head first, then encoder and diagnosis head against it.
    Alternating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub strategy: Strategy,
    pub lambda: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub seed: u64,
    pub adversarial_mode: AdversarialMode,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Base,
            lambda: 5.0,
            learning_rate: 2.0e-5,
            batch_size: 20,
            max_epochs: 40,
            patience: 10,
            min_delta: 1e-4,
            seed: 0,
            adversarial_mode: AdversarialMode::GradientReversal,
        }
    }
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::Config(m));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda {} must be >= 0", self.lambda));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad(format!("learning_rate {} must be > 0", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if self.patience > self.max_epochs {
            return bad(format!("patience {} exceeds max_epochs {}", self.patience, self.max_epochs));
        }
        if !(self.min_delta.is_finite() && self.min_delta >= 0.0) {
            return bad(format!("min_delta {} must be >= 0", self.min_delta));
        }
        Ok(())
    }
}

/// Parameter gradients with the batch-mean losses they came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub params: Network,
    pub diag_loss: f64,
    pub sex_loss: f64,
}

/// Batch-mean diagnosis and sex losses.
pub fn losses(net: &Network, batch: &[Example]) -> Result<(f64, f64), StrategyError> {
    let f = forward(net, batch)?;
    let n = batch.len() as f64;
    let ys: Vec<u8> = batch.iter().map(|e| e.diagnosis).collect();
    let as_: Vec<u8> = batch.iter().map(|e| e.sex).collect();
    Ok((bce_sum(&ys, &f.y_hat)? / n, bce_sum(&as_, &f.a_hat)? / n))
}

/// Backpropagates the strategy's objective through the batch.
///
/// Encoder gradient per strategy, with `Ld`, `Ls` the batch-mean losses:
/// Base `dLd`, Reinforce `dLd + dLs`, Adversarial `dLd - lambda dLs`.
/// The sex head always descends `Ls` except under Base, where it is idle.
pub fn grad(net: &Network, batch: &[Example], config: &StrategyConfig) -> Result<Gradients, StrategyError> {
    let f = forward(net, batch)?;
    let n = batch.len() as f64;
    let mut g = Network::zeros(net.input_dim, net.hidden_dim);
    let mut diag_loss = 0.0;
    let mut sex_loss = 0.0;
    let train_sex_head = config.strategy != Strategy::Base;
    for (i, ex) in batch.iter().enumerate() {
        diag_loss += bce(ex.diagnosis, f.y_hat[i])?;
        sex_loss += bce(ex.sex, f.a_hat[i])?;
        let e_d = (logistic(f.diag_logit[i]) - ex.diagnosis as f64) / n;
        let e_s = (logistic(f.sex_logit[i]) - ex.sex as f64) / n;
        let z = &f.z[i];
        for k in 0..net.hidden_dim {
            g.w_diag[k] += e_d * z[k];
        }
        g.b_diag += e_d;
        if train_sex_head {
            for k in 0..net.hidden_dim {
                g.w_sex[k] += e_s * z[k];
            }
            g.b_sex += e_s;
        }
        for k in 0..net.hidden_dim {
            let dz = match config.strategy {
                Strategy::Base => e_d * net.w_diag[k],
                Strategy::Reinforce => e_d * net.w_diag[k] + e_s * net.w_sex[k],
                Strategy::Adversarial => e_d * net.w_diag[k] - config.lambda * (e_s * net.w_sex[k]),
            };
            if f.pre[i][k] <= 0.0 {
                continue;
            }
            let row = &mut g.w1[k * net.input_dim..(k + 1) * net.input_dim];
            for (w, x) in row.iter_mut().zip(&ex.features) {
                *w += dz * x;
            }
            g.b1[k] += dz;
        }
    }
    Ok(Gradients {
        params: g,
        diag_loss: diag_loss / n,
        sex_loss: sex_loss / n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_diag_loss: f64,
    pub train_sex_loss: f64,
    pub val_diag_loss: f64,
    pub val_sex_loss: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    Patience,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub strategy: Strategy,
    pub seed: u64,
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub stop_reason: StopReason,
    /// Digest of the returned (best-epoch) parameters.
    pub params_digest: String,
}

/// Mini-batch gradient descent with seeded shuffling and early stopping on
/// the validation diagnosis loss. Returns the best-epoch parameters.
pub fn train(
    net: &Network,
    train_set: &[Example],
    val_set: &[Example],
    config: &StrategyConfig,
) -> Result<(Network, TrainLog), StrategyError> {
    config.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(StrategyError::Config("train and validation sets must be non-empty".into()));
    }
    let mut rng = rng::rng(config.seed, Stream::BatchOrder);
    let mut current = net.clone();
    let mut best = net.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut waited = 0;
    let mut epochs = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut stop_reason = StopReason::MaxEpochs;
    let all = [ParamGroup::Encoder, ParamGroup::DiagnosisHead, ParamGroup::SexHead];

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let (mut diag_sum, mut sex_sum, mut batches) = (0.0, 0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<Example> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let alternating =
                config.strategy == Strategy::Adversarial && config.adversarial_mode == AdversarialMode::Alternating;
            let g = grad(&current, &batch, config)?;
            diag_sum += g.diag_loss;
            sex_sum += g.sex_loss;
            batches += 1;
            if alternating {
                current.step(&g.params, config.learning_rate, &[ParamGroup::SexHead]);
                let g2 = grad(&current, &batch, config)?;
                current.step(
                    &g2.params,
                    config.learning_rate,
                    &[ParamGroup::Encoder, ParamGroup::DiagnosisHead],
                );
            } else {
                current.step(&g.params, config.learning_rate, &all);
            }
        }
        let (val_diag, val_sex) = losses(&current, val_set)?;
        let record = EpochLog {
            epoch,
            train_diag_loss: diag_sum / batches as f64,
            train_sex_loss: sex_sum / batches as f64,
            val_diag_loss: val_diag,
            val_sex_loss: val_sex,
        };
        let finite = [record.train_diag_loss, record.train_sex_loss, val_diag, val_sex]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !current.is_finite() {
            return Err(StrategyError::Diverged { epoch });
        }
        epochs.push(record);
        if val_diag < best_loss - config.min_delta {
            best_loss = val_diag;
            best_epoch = epoch;
            best = current.clone();
            waited = 0;
        } else {
            waited += 1;
            if waited >= config.patience {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }
    let log = TrainLog {
        strategy: config.strategy,
        seed: config.seed,
        stopped_epoch: epochs.len(),
        epochs,
        best_epoch,
        stop_reason,
        params_digest: best.digest(),
    };
    Ok((best, log))
}

/// Diagnosis probabilities.
pub fn predict(net: &Network, examples: &[Example]) -> Result<Vec<f64>, StrategyError> {
    Ok(forward(net, examples)?.y_hat)
}

pub fn diagnosis_auc(net: &Network, examples: &[Example]) -> Result<Option<f64>, StrategyError> {
    let scores = predict(net, examples)?;
    let labels: Vec<bool> = examples.iter().map(|e| e.diagnosis == 1).collect();
    Ok(auc_from_scores(&scores, &labels))
}

pub fn sex_head_auc(net: &Network, examples: &[Example]) -> Result<Option<f64>, StrategyError> {
    let scores = forward(net, examples)?.a_hat;
    let labels: Vec<bool> = examples.iter().map(|e| e.sex == 1).collect();
    Ok(auc_from_scores(&scores, &labels))
}

/// Fits a fresh logistic regression from frozen encoder features to sex on
/// `fit_set` and returns its AUC on `score_set`.
pub fn probe_sex_auc(net: &Network, fit_set: &[Example], score_set: &[Example]) -> Result<Option<f64>, StrategyError> {
    let codes = |set: &[Example]| -> Result<Vec<Vec<f64>>, StrategyError> {
        set.iter().map(|e| encode(net, &e.features).map(|(_, z)| z)).collect()
    };
    let fit = codes(fit_set)?;
    let score = codes(score_set)?;
    let h = net.hidden_dim;
    let n = fit.len() as f64;
    let mut mean = vec![0.0; h];
    let mut scale = vec![0.0; h];
    for z in &fit {
        for k in 0..h {
            mean[k] += z[k] / n;
        }
    }
    for z in &fit {
        for k in 0..h {
            scale[k] += (z[k] - mean[k]).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 1e-12 { s.sqrt() } else { 1.0 };
    }
    let standardize = |z: &[f64]| -> Vec<f64> { (0..h).map(|k| (z[k] - mean[k]) / scale[k]).collect() };
    let fit: Vec<Vec<f64>> = fit.iter().map(|z| standardize(z)).collect();
    let mut w = vec![0.0; h];
    let mut b = 0.0;
    for _ in 0..500 {
        let mut gw = vec![0.0; h];
        let mut gb = 0.0;
        for (z, ex) in fit.iter().zip(fit_set) {
            let e = (logistic(dot(&w, z) + b) - ex.sex as f64) / n;
            for k in 0..h {
                gw[k] += e * z[k];
            }
            gb += e;
        }
        for k in 0..h {
            w[k] -= 0.5 * gw[k];
        }
        b -= 0.5 * gb;
    }
    let scores: Vec<f64> = score.iter().map(|z| dot(&w, &standardize(z)) + b).collect();
    let labels: Vec<bool> = score_set.iter().map(|e| e.sex == 1).collect();
    Ok(auc_from_scores(&scores, &labels))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub feature_dim: usize,
    pub n_samples: usize,
    pub class_signal: f64,
    pub sex_signal: f64,
    pub sex_label_correlation: f64,
    pub noise_scale: f64,
    /// Share of female examples.
    pub female_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            feature_dim: 8,
            n_samples: 1000,
            class_signal: 1.0,
            sex_signal: 1.0,
            sex_label_correlation: 0.0,
            noise_scale: 1.0,
            female_fraction: 0.5,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), StrategyError> {
        let bad = |m: String| Err(StrategyError::Config(m));
        if self.feature_dim < 2 {
            return bad("feature_dim must be at least 2".into());
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if !(self.sex_label_correlation.abs() <= 1.0) {
            return bad(format!("correlation {} outside [-1, 1]", self.sex_label_correlation));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale > 0.0) {
            return bad(format!("noise_scale {} must be > 0", self.noise_scale));
        }
        if !(0.0..=1.0).contains(&self.female_fraction) {
            return bad(format!("female_fraction {} outside [0, 1]", self.female_fraction));
        }
        if !(self.class_signal.is_finite() && self.sex_signal.is_finite()) {
            return bad("signals must be finite".into());
        }
        Ok(())
    }
}

/// Balanced diagnosis labels; sex drawn so that `corr(sex, diagnosis)` is
/// close to the configured correlation. Diagnosis shifts feature 0, sex
/// shifts feature 1, and every feature gets isotropic Gaussian noise.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Example>, StrategyError> {
    config.validate()?;
    let mut rng = rng::rng(config.seed, Stream::Synthetic);
    let n = config.n_samples;
    let n_pos = n / 2;
    let p = config.female_fraction;
    // With balanced labels, corr = (q1 - q0) / (2 sqrt(p (1 - p))).
    let spread = config.sex_label_correlation * (p * (1.0 - p)).sqrt();
    let q1 = (p + spread).clamp(0.0, 1.0);
    let q0 = (p - spread).clamp(0.0, 1.0);
    let n_neg = n - n_pos;
    let females_pos = (q1 * n_pos as f64).round() as usize;
    let females_neg = (q0 * n_neg as f64).round() as usize;

    let mut pairs: Vec<(u8, u8)> = Vec::with_capacity(n);
    pairs.extend((0..n_pos).map(|i| (1, (i < females_pos) as u8)));
    pairs.extend((0..n_neg).map(|i| (0, (i < females_neg) as u8)));
    pairs.shuffle(&mut rng);

    Ok(pairs
        .into_iter()
        .map(|(y, a)| {
            let mut features: Vec<f64> = (0..config.feature_dim)
                .map(|_| config.noise_scale * rng.sample::<f64, _>(StandardNormal))
                .collect();
            features[0] += config.class_signal * (y as f64 - 0.5);
            features[1] += config.sex_signal * (a as f64 - 0.5);
            Example {
                features,
                diagnosis: y,
                sex: a,
            }
        })
        .collect())
}

/// Pearson correlation of sex and diagnosis.
pub fn sex_label_correlation(examples: &[Example]) -> f64 {
    let n = examples.len() as f64;
    let my = examples.iter().map(|e| e.diagnosis as f64).sum::<f64>() / n;
    let ma = examples.iter().map(|e| e.sex as f64).sum::<f64>() / n;
    let (mut cov, mut vy, mut va) = (0.0, 0.0, 0.0);
    for e in examples {
        let dy = e.diagnosis as f64 - my;
        let da = e.sex as f64 - ma;
        cov += dy * da;
        vy += dy * dy;
        va += da * da;
    }
    cov / (vy * va).sqrt()
}
