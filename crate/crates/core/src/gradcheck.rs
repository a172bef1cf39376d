//! Finite-difference verification of every loss gradient, at the pair level
//! and end to end through the policy chain rule.
//!
//! Central differences with step `h = 1e-5` are compared against the
//! analytic gradients. Relative error uses a floored denominator
//! `max(|analytic|, |fd|, 1e-4)` so saturated near-zero gradients are held
//! to an absolute standard instead of dividing roundoff noise by itself.

use crate::losses::{evaluate, LossConfig, Method, PairLogps};
use crate::policy::{seq_logprob, PolicyParams, TokenSeq};
use crate::seeded::{substream_seed, SplitMix64};

/// Acceptance threshold on the maximum relative error.
pub const GRAD_TOLERANCE: f64 = 1e-5;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

const DENOM_FLOOR: f64 = 1e-4;

#[derive(Debug, thiserror::Error)]
pub enum GradCheckError {
    #[error("non-finite value in {method:?} instance with seed {instance_seed}")]
    NonFinite { method: Method, instance_seed: u64 },
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Pair-level instances per method.
    pub pair_trials: usize,
    /// End-to-end policy-chain instances per method.
    pub chain_trials: usize,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            pair_trials: 200,
            chain_trials: 100,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MethodReport {
    pub method: Method,
    pub pair_max_rel_err: f64,
    pub chain_max_rel_err: f64,
    pub checks: usize,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub methods: Vec<MethodReport>,
    pub max_rel_err: f64,
    pub total_checks: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < GRAD_TOLERANCE
    }
}

fn rel_err(analytic: f64, fd: f64) -> f64 {
    (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(DENOM_FLOOR)
}

fn random_config(method: Method, rng: &mut SplitMix64) -> LossConfig<f64> {
    let mut cfg = LossConfig::<f64>::for_method(method);
    match method {
        Method::Dpo => cfg.beta = 0.05 + 2.95 * rng.next_f64(),
        Method::Simpo => {
            cfg.beta = 0.05 + 2.95 * rng.next_f64();
            cfg.gamma = 2.0 * rng.next_f64();
        }
        Method::Orpo => cfg.lambda = 2.0 * rng.next_f64(),
        Method::Sft => {}
    }
    cfg
}

fn random_pair(method: Method, rng: &mut SplitMix64) -> PairLogps<f64> {
    let len_w = 1 + rng.next_below(8) as usize;
    let len_l = 1 + rng.next_below(8) as usize;
    let draw_theta = |rng: &mut SplitMix64, len: usize| -> f64 {
        if method == Method::Orpo {
            // keep the per-token log-prob strictly negative and away from
            // the odds singularity at P -> 1
            let u = -6.0 * rng.next_f64() - 0.05;
            u * len as f64
        } else {
            -10.0 + 12.0 * rng.next_f64()
        }
    };
    let theta_w = draw_theta(rng, len_w);
    let theta_l = draw_theta(rng, len_l);
    let needs_ref = method == Method::Dpo;
    PairLogps {
        theta_w,
        theta_l,
        ref_w: needs_ref.then(|| -10.0 + 12.0 * rng.next_f64()),
        ref_l: needs_ref.then(|| -10.0 + 12.0 * rng.next_f64()),
        len_w,
        len_l,
    }
}

/// Pair-level check for one method; returns the max relative error and the
/// number of comparisons.
fn check_pairs(
    method: Method,
    trials: usize,
    seed: u64,
) -> Result<(f64, usize), GradCheckError> {
    let mut max_err: f64 = 0.0;
    let mut checks = 0;
    for trial in 0..trials {
        let instance_seed = substream_seed(seed, &format!("pair-{}-{trial}", method.name()));
        let mut rng = SplitMix64::new(instance_seed);
        let cfg = random_config(method, &mut rng);
        let pair = random_pair(method, &mut rng);
        let non_finite = || GradCheckError::NonFinite {
            method,
            instance_seed,
        };

        let out = evaluate(&cfg, &pair).expect("sampled instance in-domain");
        if !(out.loss.is_finite() && out.d_theta_w.is_finite() && out.d_theta_l.is_finite()) {
            return Err(non_finite());
        }

        let loss_at = |theta_w: f64, theta_l: f64| -> Result<f64, GradCheckError> {
            let probe = PairLogps {
                theta_w,
                theta_l,
                ..pair
            };
            let value = evaluate(&cfg, &probe).expect("probe in-domain").loss;
            if !value.is_finite() {
                return Err(non_finite());
            }
            Ok(value)
        };

        let fd_w = (loss_at(pair.theta_w + FD_STEP, pair.theta_l)?
            - loss_at(pair.theta_w - FD_STEP, pair.theta_l)?)
            / (2.0 * FD_STEP);
        max_err = max_err.max(rel_err(out.d_theta_w, fd_w));
        checks += 1;

        if method != Method::Sft {
            let fd_l = (loss_at(pair.theta_w, pair.theta_l + FD_STEP)?
                - loss_at(pair.theta_w, pair.theta_l - FD_STEP)?)
                / (2.0 * FD_STEP);
            max_err = max_err.max(rel_err(out.d_theta_l, fd_l));
            checks += 1;
        }
    }
    Ok((max_err, checks))
}

struct ChainInstance {
    params: PolicyParams<f64>,
    reference: PolicyParams<f64>,
    ctx: usize,
    chosen: TokenSeq,
    rejected: TokenSeq,
}

fn random_chain(rng: &mut SplitMix64) -> ChainInstance {
    let v = 2 + rng.next_below(19) as usize; // V in 2..=20
    let c = 1 + rng.next_below(3) as usize;
    let logits: Vec<f64> = (0..c * v).map(|_| -2.0 + 4.0 * rng.next_f64()).collect();
    let ref_logits: Vec<f64> = (0..c * v).map(|_| -2.0 + 4.0 * rng.next_f64()).collect();
    let seq = |rng: &mut SplitMix64| {
        let len = 1 + rng.next_below(8) as usize;
        TokenSeq((0..len).map(|_| rng.next_below(v as u64) as usize).collect())
    };
    ChainInstance {
        params: PolicyParams::from_logits(c, v, logits).expect("finite logits"),
        reference: PolicyParams::from_logits(c, v, ref_logits).expect("finite logits"),
        ctx: rng.next_below(c as u64) as usize,
        chosen: seq(rng),
        rejected: seq(rng),
    }
}

fn chain_loss(
    cfg: &LossConfig<f64>,
    instance: &ChainInstance,
    params: &PolicyParams<f64>,
) -> f64 {
    let (theta_w, _) = seq_logprob(params, instance.ctx, &instance.chosen).expect("in range");
    let (theta_l, _) = seq_logprob(params, instance.ctx, &instance.rejected).expect("in range");
    let needs_ref = cfg.method == Method::Dpo;
    let (ref_w, ref_l) = if needs_ref {
        let (w, _) =
            seq_logprob(&instance.reference, instance.ctx, &instance.chosen).expect("in range");
        let (l, _) =
            seq_logprob(&instance.reference, instance.ctx, &instance.rejected).expect("in range");
        (Some(w), Some(l))
    } else {
        (None, None)
    };
    evaluate(
        cfg,
        &PairLogps {
            theta_w,
            theta_l,
            ref_w,
            ref_l,
            len_w: instance.chosen.len(),
            len_l: instance.rejected.len(),
        },
    )
    .expect("policy log-probs in-domain")
    .loss
}

/// End-to-end check for one method: analytic d loss / d logits assembled by
/// the chain rule against central differences on every logit entry.
fn check_chain(
    method: Method,
    trials: usize,
    seed: u64,
) -> Result<(f64, usize), GradCheckError> {
    let mut max_err: f64 = 0.0;
    let mut checks = 0;
    for trial in 0..trials {
        let instance_seed = substream_seed(seed, &format!("chain-{}-{trial}", method.name()));
        let mut rng = SplitMix64::new(instance_seed);
        let cfg = random_config(method, &mut rng);
        let instance = random_chain(&mut rng);
        let v = instance.params.vocab_size();
        let c = instance.params.context_count();

        let (theta_w, grad_w) =
            seq_logprob(&instance.params, instance.ctx, &instance.chosen).expect("in range");
        let (theta_l, grad_l) =
            seq_logprob(&instance.params, instance.ctx, &instance.rejected).expect("in range");
        let needs_ref = method == Method::Dpo;
        let (ref_w, ref_l) = if needs_ref {
            let (w, _) = seq_logprob(&instance.reference, instance.ctx, &instance.chosen)
                .expect("in range");
            let (l, _) = seq_logprob(&instance.reference, instance.ctx, &instance.rejected)
                .expect("in range");
            (Some(w), Some(l))
        } else {
            (None, None)
        };
        let out = evaluate(
            &cfg,
            &PairLogps {
                theta_w,
                theta_l,
                ref_w,
                ref_l,
                len_w: instance.chosen.len(),
                len_l: instance.rejected.len(),
            },
        )
        .expect("in-domain");
        if !out.loss.is_finite() {
            return Err(GradCheckError::NonFinite {
                method,
                instance_seed,
            });
        }

        let mut analytic = vec![0.0f64; c * v];
        let row = &mut analytic[instance.ctx * v..(instance.ctx + 1) * v];
        for (slot, (gw, gl)) in row.iter_mut().zip(grad_w.row.iter().zip(grad_l.row.iter())) {
            *slot = out.d_theta_w * gw + out.d_theta_l * gl;
        }

        for entry in 0..c * v {
            let mut up = instance.params.logits().to_vec();
            up[entry] += FD_STEP;
            let mut down = instance.params.logits().to_vec();
            down[entry] -= FD_STEP;
            let loss_up = chain_loss(
                &cfg,
                &instance,
                &PolicyParams::from_logits(c, v, up).expect("finite"),
            );
            let loss_down = chain_loss(
                &cfg,
                &instance,
                &PolicyParams::from_logits(c, v, down).expect("finite"),
            );
            if !(loss_up.is_finite() && loss_down.is_finite()) {
                return Err(GradCheckError::NonFinite {
                    method,
                    instance_seed,
                });
            }
            let fd = (loss_up - loss_down) / (2.0 * FD_STEP);
            max_err = max_err.max(rel_err(analytic[entry], fd));
            checks += 1;
        }
    }
    Ok((max_err, checks))
}

/// Run the full suite over all four methods.
pub fn run(cfg: &GradCheckConfig) -> Result<GradCheckReport, GradCheckError> {
    let mut methods = Vec::with_capacity(4);
    let mut max_rel_err: f64 = 0.0;
    let mut total_checks = 0;
    for method in Method::ALL {
        let (pair_max, pair_checks) = check_pairs(method, cfg.pair_trials, cfg.seed)?;
        let (chain_max, chain_checks) = check_chain(method, cfg.chain_trials, cfg.seed)?;
        max_rel_err = max_rel_err.max(pair_max).max(chain_max);
        total_checks += pair_checks + chain_checks;
        methods.push(MethodReport {
            method,
            pair_max_rel_err: pair_max,
            chain_max_rel_err: chain_max,
            checks: pair_checks + chain_checks,
        });
    }
    Ok(GradCheckReport {
        methods,
        max_rel_err,
        total_checks,
    })
}
