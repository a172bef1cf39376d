//! Full-batch gradient descent of the toy policy against a preference-pair
//! dataset, with a seeded holdout split and win-rate reporting.
//!
//! Deterministic by construction: pairs are processed in sorted sample-id
//! order, the holdout split is a seeded shuffle, and there is no momentum or
//! minibatching. For DPO the reference policy is a frozen copy of the input
//! parameters; its log-probabilities are computed once and reused.

use serde::{Deserialize, Serialize};

use crate::losses::{evaluate, LossConfig, LossError, Method};
use crate::policy::{context_class, seq_logprob, tokenize, PolicyError, PolicyParams, TokenSeq, Vocab};
use crate::prefdata::PreferencePair;
use crate::scalar::{from_usize, to_f64, Scalar};
use crate::seeded::{shuffle, SplitMix64};

#[derive(Debug, thiserror::Error)]
pub enum TrainerError {
    #[error("no pairs to train on")]
    NoPairs,
    #[error("training set is empty after the holdout split")]
    EmptyTrainingSet,
    #[error("holdout fraction {0} outside [0, 0.5]")]
    BadHoldoutFraction(f64),
    #[error("learning rate {0} must be finite and nonnegative")]
    BadLearningRate(f64),
    #[error("non-finite loss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("pair {sample_id}: {source}")]
    Tokenize {
        sample_id: String,
        #[source]
        source: PolicyError,
    },
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Training settings. Defaults: learning rate 0.05, 200 epochs, 20% holdout.
#[derive(Debug, Clone)]
pub struct TrainConfig<S> {
    pub loss: LossConfig<S>,
    pub learning_rate: S,
    pub epochs: usize,
    pub seed: u64,
    pub holdout_fraction: f64,
}

impl<S: Scalar> TrainConfig<S> {
    pub fn new(loss: LossConfig<S>) -> Self {
        Self {
            loss,
            learning_rate: crate::scalar::from_f64(0.05),
            epochs: 200,
            seed: 0,
            holdout_fraction: 0.2,
        }
    }
}

/// One bucket of the holdout margin histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Training outcome: the loss curve, holdout win-rates before and after,
/// and the final margin histogram over the holdout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub method: Method,
    pub epoch_mean_loss: Vec<f64>,
    pub train_size: usize,
    pub holdout_size: usize,
    pub baseline_win_rate: Option<f64>,
    pub holdout_win_rate: Option<f64>,
    pub margin_histogram: Vec<MarginBin>,
}

struct PreparedPair {
    sample_id: String,
    ctx: usize,
    chosen: TokenSeq,
    rejected: TokenSeq,
    ref_w: Option<f64>,
    ref_l: Option<f64>,
}

fn prepare(
    pairs: &[PreferencePair],
    vocab: &Vocab,
    context_count: usize,
) -> Result<Vec<PreparedPair>, TrainerError> {
    let mut prepared = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let wrap = |source: PolicyError| TrainerError::Tokenize {
            sample_id: pair.sample_id.clone(),
            source,
        };
        prepared.push(PreparedPair {
            sample_id: pair.sample_id.clone(),
            ctx: context_class(&pair.prompt, context_count),
            chosen: tokenize(vocab, &pair.chosen).map_err(wrap)?,
            rejected: tokenize(vocab, &pair.rejected).map_err(wrap)?,
            ref_w: None,
            ref_l: None,
        });
    }
    prepared.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
    Ok(prepared)
}

/// Train a copy of `params` on the pairs; returns the trained parameters and
/// the report. The input parameters double as the frozen DPO reference.
pub fn train<S: Scalar>(
    params: &PolicyParams<S>,
    pairs: &[PreferencePair],
    vocab: &Vocab,
    cfg: &TrainConfig<S>,
) -> Result<(PolicyParams<S>, TrainReport), TrainerError> {
    cfg.loss.validate()?;
    if pairs.is_empty() {
        return Err(TrainerError::NoPairs);
    }
    if !(0.0..=0.5).contains(&cfg.holdout_fraction) {
        return Err(TrainerError::BadHoldoutFraction(cfg.holdout_fraction));
    }
    let lr_f64 = to_f64(cfg.learning_rate);
    let lr_ok = lr_f64.is_finite() && lr_f64 >= 0.0;
    if !lr_ok {
        return Err(TrainerError::BadLearningRate(lr_f64));
    }

    let mut prepared = prepare(pairs, vocab, params.context_count())?;

    // Seeded holdout split on sample_id order.
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    let mut rng = SplitMix64::new(cfg.seed);
    shuffle(&mut order, &mut rng);
    let holdout_size = (cfg.holdout_fraction * prepared.len() as f64).floor() as usize;
    let holdout_set: std::collections::BTreeSet<usize> =
        order.iter().take(holdout_size).copied().collect();

    let mut train_pairs = Vec::new();
    let mut holdout_pairs = Vec::new();
    for (i, pair) in prepared.drain(..).enumerate() {
        if holdout_set.contains(&i) {
            holdout_pairs.push(pair);
        } else {
            train_pairs.push(pair);
        }
    }
    if train_pairs.is_empty() {
        return Err(TrainerError::EmptyTrainingSet);
    }

    // Frozen reference: the input parameters. Reference log-probs are
    // constant throughout training, so compute them once.
    let reference = params.clone();
    if cfg.loss.method == Method::Dpo {
        for pair in &mut train_pairs {
            let (ref_w, _) = seq_logprob(&reference, pair.ctx, &pair.chosen)?;
            let (ref_l, _) = seq_logprob(&reference, pair.ctx, &pair.rejected)?;
            pair.ref_w = Some(to_f64(ref_w));
            pair.ref_l = Some(to_f64(ref_l));
        }
    }

    let baseline_win_rate = winrate_prepared(params, &holdout_pairs);

    let mut current = params.clone();
    let v = current.vocab_size();
    let c = current.context_count();
    let mut epoch_mean_loss = Vec::with_capacity(cfg.epochs);
    let n = from_usize::<S>(train_pairs.len());

    for epoch in 0..cfg.epochs {
        let mut grad = vec![S::zero(); c * v];
        let mut loss_sum = S::zero();
        for pair in &train_pairs {
            let (theta_w, grad_w) = seq_logprob(&current, pair.ctx, &pair.chosen)?;
            let (theta_l, grad_l) = seq_logprob(&current, pair.ctx, &pair.rejected)?;
            let logps = crate::losses::PairLogps {
                theta_w,
                theta_l,
                ref_w: pair.ref_w.map(crate::scalar::from_f64),
                ref_l: pair.ref_l.map(crate::scalar::from_f64),
                len_w: pair.chosen.len(),
                len_l: pair.rejected.len(),
            };
            let out = evaluate(&cfg.loss, &logps)?;
            loss_sum = loss_sum + out.loss;
            let row = &mut grad[pair.ctx * v..(pair.ctx + 1) * v];
            for (slot, (gw, gl)) in row
                .iter_mut()
                .zip(grad_w.row.iter().zip(grad_l.row.iter()))
            {
                *slot = *slot + out.d_theta_w * *gw + out.d_theta_l * *gl;
            }
        }
        let mean_loss = loss_sum / n;
        if !mean_loss.is_finite() {
            return Err(TrainerError::NonFiniteLoss { epoch });
        }
        epoch_mean_loss.push(to_f64(mean_loss));

        // One full-batch step: logits -= lr * mean gradient.
        for ctx in 0..c {
            let row = current.row_mut(ctx);
            let grow = &grad[ctx * v..(ctx + 1) * v];
            for (logit, g) in row.iter_mut().zip(grow) {
                *logit = *logit - cfg.learning_rate * (*g / n);
            }
        }
    }

    let holdout_win_rate = winrate_prepared(&current, &holdout_pairs);
    let margin_histogram = margin_histogram(&current, &holdout_pairs);

    Ok((
        current,
        TrainReport {
            method: cfg.loss.method,
            epoch_mean_loss,
            train_size: train_pairs.len(),
            holdout_size: holdout_pairs.len(),
            baseline_win_rate,
            holdout_win_rate,
            margin_histogram,
        },
    ))
}

fn pair_margin<S: Scalar>(params: &PolicyParams<S>, pair: &PreparedPair) -> f64 {
    let (lp_w, _) = seq_logprob(params, pair.ctx, &pair.chosen).expect("prepared pair in range");
    let (lp_l, _) = seq_logprob(params, pair.ctx, &pair.rejected).expect("prepared pair in range");
    to_f64(lp_w) - to_f64(lp_l)
}

fn winrate_prepared<S: Scalar>(params: &PolicyParams<S>, pairs: &[PreparedPair]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    let mut score = 0.0;
    for pair in pairs {
        let margin = pair_margin(params, pair);
        if margin > 0.0 {
            score += 1.0;
        } else if margin == 0.0 {
            score += 0.5;
        }
    }
    Some(score / pairs.len() as f64)
}

fn margin_histogram<S: Scalar>(params: &PolicyParams<S>, pairs: &[PreparedPair]) -> Vec<MarginBin> {
    if pairs.is_empty() {
        return Vec::new();
    }
    let margins: Vec<f64> = pairs.iter().map(|p| pair_margin(params, p)).collect();
    let lo = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = margins.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return vec![MarginBin {
            lo,
            hi,
            count: margins.len(),
        }];
    }
    const BINS: usize = 10;
    let width = (hi - lo) / BINS as f64;
    let mut bins: Vec<MarginBin> = (0..BINS)
        .map(|i| MarginBin {
            lo: lo + i as f64 * width,
            hi: lo + (i + 1) as f64 * width,
            count: 0,
        })
        .collect();
    for m in margins {
        let idx = (((m - lo) / width) as usize).min(BINS - 1);
        bins[idx].count += 1;
    }
    bins
}

/// Win-rate of `params` over raw pairs: fraction with a higher chosen than
/// rejected log-probability; ties count one half.
pub fn eval_winrate<S: Scalar>(
    params: &PolicyParams<S>,
    pairs: &[PreferencePair],
    vocab: &Vocab,
) -> Result<f64, TrainerError> {
    if pairs.is_empty() {
        return Err(TrainerError::NoPairs);
    }
    let prepared = prepare(pairs, vocab, params.context_count())?;
    Ok(winrate_prepared(params, &prepared).expect("nonempty"))
}
