//! Preference-optimization objectives: SFT, DPO, ORPO, SimPO.
//!
//! All four losses are functions of sequence log-probabilities and lengths
//! only, so they are expressed here over a [`PairLogps`] record and return
//! the loss together with its exact partial derivatives with respect to the
//! chosen and rejected log-probabilities. The policy chain rule lives in the
//! trainer.
//!
//! Conventions:
//! - DPO uses raw sequence log-probs and a frozen reference policy; the
//!   reward is `β·(log π_θ − log π_ref)`, whose partition term cancels in
//!   every pairwise difference.
//! - ORPO is reference-free: `L = −θ_w + λ·L_OR` where `L_OR` is the
//!   negative log-sigmoid of the log-odds ratio, with sequence probability
//!   taken length-normalized as `P(y) = exp(θ/|y|)` so odds stay
//!   well-conditioned.
//! - SimPO is reference-free and uses length-averaged log-probs with a
//!   margin: `−log σ(β/|y_w|·θ_w − β/|y_l|·θ_l − γ)`.

use serde::{Deserialize, Serialize};

use crate::scalar::{from_f64, from_usize, Scalar};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LossError {
    #[error("dpo requires reference log-probabilities for both sequences")]
    MissingReference,
    #[error("{0} must be positive, got {1}")]
    NonPositiveParam(&'static str, f64),
    #[error("{0} must be nonnegative, got {1}")]
    NegativeParam(&'static str, f64),
    #[error("sequence length must be >= 1")]
    BadLength,
    #[error("non-finite input log-probability")]
    NonFiniteInput,
    #[error("orpo sequence probability is >= 1 (log-prob {0} not negative)")]
    ProbabilityAtOrAboveOne(f64),
}

/// Objective selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sft,
    Dpo,
    Orpo,
    Simpo,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Sft, Method::Dpo, Method::Orpo, Method::Simpo];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Sft => "sft",
            Method::Dpo => "dpo",
            Method::Orpo => "orpo",
            Method::Simpo => "simpo",
        }
    }
}

/// Loss hyperparameters. `beta` scales the DPO/SimPO reward, `lambda`
/// weights the ORPO odds-ratio penalty, `gamma` is the SimPO margin.
#[derive(Debug, Clone, Copy)]
pub struct LossConfig<S> {
    pub method: Method,
    pub beta: S,
    pub lambda: S,
    pub gamma: S,
}

impl<S: Scalar> LossConfig<S> {
    pub fn sft() -> Self {
        Self {
            method: Method::Sft,
            beta: S::zero(),
            lambda: S::zero(),
            gamma: S::zero(),
        }
    }

    pub fn dpo() -> Self {
        Self {
            method: Method::Dpo,
            beta: from_f64(0.1),
            lambda: S::zero(),
            gamma: S::zero(),
        }
    }

    pub fn orpo() -> Self {
        Self {
            method: Method::Orpo,
            beta: S::zero(),
            lambda: from_f64(0.1),
            gamma: S::zero(),
        }
    }

    pub fn simpo() -> Self {
        Self {
            method: Method::Simpo,
            beta: from_f64(2.0),
            lambda: S::zero(),
            gamma: from_f64(0.5),
        }
    }

    pub fn for_method(method: Method) -> Self {
        match method {
            Method::Sft => Self::sft(),
            Method::Dpo => Self::dpo(),
            Method::Orpo => Self::orpo(),
            Method::Simpo => Self::simpo(),
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        match self.method {
            Method::Dpo | Method::Simpo => {
                let beta_ok = self.beta.is_finite() && self.beta > S::zero();
                if !beta_ok {
                    return Err(LossError::NonPositiveParam(
                        "beta",
                        self.beta.to_f64().unwrap_or(f64::NAN),
                    ));
                }
            }
            Method::Orpo => {
                if self.lambda < S::zero() {
                    return Err(LossError::NegativeParam(
                        "lambda",
                        self.lambda.to_f64().unwrap_or(f64::NAN),
                    ));
                }
            }
            Method::Sft => {}
        }
        if self.gamma < S::zero() {
            return Err(LossError::NegativeParam(
                "gamma",
                self.gamma.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(())
    }
}

/// Log-probabilities of one preference pair. `theta_*` come from the policy
/// being trained, `ref_*` from the frozen reference (DPO only), lengths are
/// token counts of chosen and rejected sequences.
#[derive(Debug, Clone, Copy)]
pub struct PairLogps<S> {
    pub theta_w: S,
    pub theta_l: S,
    pub ref_w: Option<S>,
    pub ref_l: Option<S>,
    pub len_w: usize,
    pub len_l: usize,
}

impl<S: Scalar> PairLogps<S> {
    fn validate(&self) -> Result<(), LossError> {
        if self.len_w == 0 || self.len_l == 0 {
            return Err(LossError::BadLength);
        }
        let mut finite = self.theta_w.is_finite() && self.theta_l.is_finite();
        if let Some(r) = self.ref_w {
            finite &= r.is_finite();
        }
        if let Some(r) = self.ref_l {
            finite &= r.is_finite();
        }
        if !finite {
            return Err(LossError::NonFiniteInput);
        }
        Ok(())
    }
}

/// Loss value with partial derivatives w.r.t. the policy log-probs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossGrad<S> {
    pub loss: S,
    pub d_theta_w: S,
    pub d_theta_l: S,
}

/// Numerically stable sigmoid via `0.5·(1 + tanh(z/2))`, clamped into the
/// open unit interval so saturated arguments never return exactly 0 or 1.
pub fn sigmoid<S: Scalar>(z: S) -> S {
    let half = from_f64::<S>(0.5);
    let v = half * (S::one() + (z * half).tanh());
    let lo = S::min_positive_value();
    let hi = S::one() - S::epsilon() * half;
    v.max(lo).min(hi)
}

/// `−ln σ(z) = softplus(−z)`, stable over the full f64 range.
fn neg_log_sigmoid<S: Scalar>(z: S) -> S {
    // softplus(x) = max(x, 0) + ln(1 + exp(−|x|)) with x = −z
    let x = -z;
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

/// Bradley-Terry preference probability `σ(r_w − r_l)`.
pub fn preference_prob<S: Scalar>(r_w: S, r_l: S) -> S {
    sigmoid(r_w - r_l)
}

/// Implicit reward `β·(log π_θ − log π_ref)`. The `β·log Z(x)` term of the
/// full reparameterization is omitted: it is constant per prompt and cancels
/// in every pairwise reward difference.
pub fn implicit_reward<S: Scalar>(theta_logp: S, ref_logp: S, beta: S) -> S {
    beta * (theta_logp - ref_logp)
}

/// Supervised fine-tuning: negative log-likelihood of the chosen sequence.
/// Returns `(loss, d loss/d theta_w)`.
pub fn sft_loss<S: Scalar>(theta_w: S) -> (S, S) {
    (-theta_w, -S::one())
}

/// DPO: `−ln σ(β·[(θ_w − ref_w) − (θ_l − ref_l)])`.
pub fn dpo_loss<S: Scalar>(p: &PairLogps<S>, cfg: &LossConfig<S>) -> Result<LossGrad<S>, LossError> {
    p.validate()?;
    let beta_ok = cfg.beta.is_finite() && cfg.beta > S::zero();
    if !beta_ok {
        return Err(LossError::NonPositiveParam(
            "beta",
            cfg.beta.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let (ref_w, ref_l) = match (p.ref_w, p.ref_l) {
        (Some(w), Some(l)) => (w, l),
        _ => return Err(LossError::MissingReference),
    };
    let delta = (p.theta_w - ref_w) - (p.theta_l - ref_l);
    let margin = cfg.beta * delta;
    let s = sigmoid(-margin);
    Ok(LossGrad {
        loss: neg_log_sigmoid(margin),
        d_theta_w: -cfg.beta * s,
        d_theta_l: cfg.beta * s,
    })
}

/// ORPO: `L_SFT + λ·L_OR` with `L_OR = −ln σ(ln odds_w − ln odds_l)` and
/// `odds(y) = P/(1−P)`, `P(y) = exp(θ/|y|)`.
pub fn orpo_loss<S: Scalar>(p: &PairLogps<S>, cfg: &LossConfig<S>) -> Result<LossGrad<S>, LossError> {
    p.validate()?;
    if cfg.lambda < S::zero() {
        return Err(LossError::NegativeParam(
            "lambda",
            cfg.lambda.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let u_w = p.theta_w / from_usize(p.len_w);
    let u_l = p.theta_l / from_usize(p.len_l);
    // P = exp(u) must stay below 1, i.e. u strictly negative. Guaranteed for
    // log-probs of a normalized policy; guarded for arbitrary inputs.
    if u_w >= S::zero() {
        return Err(LossError::ProbabilityAtOrAboveOne(
            p.theta_w.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if u_l >= S::zero() {
        return Err(LossError::ProbabilityAtOrAboveOne(
            p.theta_l.to_f64().unwrap_or(f64::NAN),
        ));
    }

    // ln odds = ln(P/(1−P)) = u − ln(1 − e^u), with 1 − e^u = −expm1(u).
    let log_odds = |u: S| u - (-u.exp_m1()).ln();
    let z = log_odds(u_w) - log_odds(u_l);
    let l_or = neg_log_sigmoid(z);
    let s = sigmoid(-z);

    // d(ln odds)/du = 1/(1 − e^u); chain through u = θ/len.
    let d_z_d_theta_w = S::one() / (-u_w.exp_m1() * from_usize(p.len_w));
    let d_z_d_theta_l = -(S::one() / (-u_l.exp_m1() * from_usize(p.len_l)));

    let (sft, d_sft) = sft_loss(p.theta_w);
    Ok(LossGrad {
        loss: sft + cfg.lambda * l_or,
        d_theta_w: d_sft + cfg.lambda * (-s) * d_z_d_theta_w,
        d_theta_l: cfg.lambda * (-s) * d_z_d_theta_l,
    })
}

/// SimPO: `−ln σ(β/|y_w|·θ_w − β/|y_l|·θ_l − γ)`; reference-free, any
/// reference fields are ignored.
pub fn simpo_loss<S: Scalar>(
    p: &PairLogps<S>,
    cfg: &LossConfig<S>,
) -> Result<LossGrad<S>, LossError> {
    p.validate()?;
    let beta_ok = cfg.beta.is_finite() && cfg.beta > S::zero();
    if !beta_ok {
        return Err(LossError::NonPositiveParam(
            "beta",
            cfg.beta.to_f64().unwrap_or(f64::NAN),
        ));
    }
    if cfg.gamma < S::zero() {
        return Err(LossError::NegativeParam(
            "gamma",
            cfg.gamma.to_f64().unwrap_or(f64::NAN),
        ));
    }
    let scale_w = cfg.beta / from_usize(p.len_w);
    let scale_l = cfg.beta / from_usize(p.len_l);
    let margin = scale_w * p.theta_w - scale_l * p.theta_l - cfg.gamma;
    let s = sigmoid(-margin);
    Ok(LossGrad {
        loss: neg_log_sigmoid(margin),
        d_theta_w: -scale_w * s,
        d_theta_l: scale_l * s,
    })
}

/// Dispatch on the configured method. SFT consumes only the chosen side;
/// its rejected-side derivative is zero.
pub fn evaluate<S: Scalar>(cfg: &LossConfig<S>, p: &PairLogps<S>) -> Result<LossGrad<S>, LossError> {
    cfg.validate()?;
    match cfg.method {
        Method::Sft => {
            p.validate()?;
            let (loss, d_w) = sft_loss(p.theta_w);
            Ok(LossGrad {
                loss,
                d_theta_w: d_w,
                d_theta_l: S::zero(),
            })
        }
        Method::Dpo => dpo_loss(p, cfg),
        Method::Orpo => orpo_loss(p, cfg),
        Method::Simpo => simpo_loss(p, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    fn pair(theta_w: f64, theta_l: f64, len_w: usize, len_l: usize) -> PairLogps<f64> {
        PairLogps {
            theta_w,
            theta_l,
            ref_w: None,
            ref_l: None,
            len_w,
            len_l,
        }
    }

    // Independent route for −ln σ(x), used as the oracle against the stable
    // softplus in the implementation.
    fn neg_log_sigmoid_oracle(x: f64) -> f64 {
        -(1.0 / (1.0 + (-x).exp())).ln()
    }

    #[test]
    fn sigmoid_reference_points() {
        assert_eq!(sigmoid(0.0_f64), 0.5);
        assert!((sigmoid(1.0_f64) - 0.7310585786300049).abs() < 1e-15);
        assert!((sigmoid(-2.0_f64) - 0.11920292202211755).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_complement_identity() {
        for z in [-1e3_f64, -37.0, -5.0, -0.3, 0.0, 0.3, 5.0, 37.0, 1e3] {
            let sum = sigmoid(z) + sigmoid(-z);
            assert!((sum - 1.0).abs() < 1e-15, "z={z}, sum={sum}");
        }
    }

    #[test]
    fn sigmoid_stays_in_open_unit_interval() {
        for z in [-700.0_f64, -100.0, 0.0, 100.0, 700.0] {
            let v = sigmoid(z);
            assert!(v > 0.0 && v < 1.0, "sigmoid({z}) = {v}");
            assert!(v.is_finite());
        }
    }

    #[test]
    fn sigmoid_works_at_f32() {
        let v: f32 = sigmoid(1.0_f32);
        assert!((v - 0.731_058_6_f32).abs() < 1e-6);
        assert!(sigmoid(500.0_f32) < 1.0);
        assert!(sigmoid(-500.0_f32) > 0.0);
    }

    #[test]
    fn preference_prob_matches_bradley_terry() {
        assert_eq!(preference_prob(3.0_f64, 3.0), 0.5);
        assert!((preference_prob(2.0_f64, 0.0) - 0.8807970779778823).abs() < 1e-15);
        let p = preference_prob(1.3_f64, -0.4);
        let q = preference_prob(-0.4_f64, 1.3);
        assert!((p + q - 1.0).abs() < 1e-15);
    }

    #[test]
    fn implicit_reward_basics() {
        assert_eq!(implicit_reward(-3.0_f64, -3.0, 0.7), 0.0);
        assert!((implicit_reward(-1.0_f64, -2.0, 0.1) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn reward_difference_ignores_common_reference_shift() {
        let beta = 0.3_f64;
        for c in [-100.0_f64, -1.0, 5.0, 100.0] {
            let base = implicit_reward(-1.0, -4.0, beta) - implicit_reward(-2.5, -3.0, beta);
            let shifted =
                implicit_reward(-1.0, -4.0 + c, beta) - implicit_reward(-2.5, -3.0 + c, beta);
            assert!((base - shifted).abs() < 1e-12, "c={c}");
        }
    }

    #[test]
    fn dpo_at_reference_point_is_ln2() {
        let p = PairLogps {
            theta_w: -2.0,
            theta_l: -3.0,
            ref_w: Some(-2.0),
            ref_l: Some(-3.0),
            len_w: 4,
            len_l: 5,
        };
        for beta in [0.05, 0.1, 1.0, 7.0] {
            let cfg = LossConfig {
                beta,
                ..LossConfig::<f64>::dpo()
            };
            let out = dpo_loss(&p, &cfg).unwrap();
            assert!((out.loss - LN2).abs() < 1e-12, "beta={beta}");
        }
    }

    #[test]
    fn dpo_unit_margin_value() {
        // theta_w − ref_w = 1, theta_l − ref_l = 0, beta = 1.
        let p = PairLogps {
            theta_w: -1.0,
            theta_l: -3.0,
            ref_w: Some(-2.0),
            ref_l: Some(-3.0),
            len_w: 1,
            len_l: 1,
        };
        let cfg = LossConfig {
            beta: 1.0,
            ..LossConfig::<f64>::dpo()
        };
        let out = dpo_loss(&p, &cfg).unwrap();
        assert!((out.loss - neg_log_sigmoid_oracle(1.0)).abs() < 1e-15);
        assert!((out.loss - 0.3132616875182228).abs() < 1e-12);
        // gradients: s = σ(−1)
        let s = 1.0 / (1.0 + 1f64.exp());
        assert!((out.d_theta_w + s).abs() < 1e-15);
        assert!((out.d_theta_l - s).abs() < 1e-15);
    }

    #[test]
    fn dpo_invariant_under_reference_shift() {
        let cfg = LossConfig::<f64>::dpo();
        let base = PairLogps {
            theta_w: -1.2,
            theta_l: -4.7,
            ref_w: Some(-2.0),
            ref_l: Some(-3.1),
            len_w: 3,
            len_l: 6,
        };
        let reference = dpo_loss(&base, &cfg).unwrap();
        for c in [-100.0, -10.0, -1.0, 1.0, 5.0, 10.0, 100.0] {
            let shifted = PairLogps {
                ref_w: Some(-2.0 + c),
                ref_l: Some(-3.1 + c),
                ..base
            };
            let out = dpo_loss(&shifted, &cfg).unwrap();
            assert!((out.loss - reference.loss).abs() < 1e-12, "c={c}");
        }
    }

    #[test]
    fn dpo_requires_reference() {
        let cfg = LossConfig::<f64>::dpo();
        let err = dpo_loss(&pair(-1.0, -2.0, 2, 2), &cfg).unwrap_err();
        assert_eq!(err, LossError::MissingReference);
    }

    #[test]
    fn orpo_equal_odds_penalty_is_ln2() {
        let cfg = LossConfig::<f64>::orpo();
        // Equal normalized log-probs, equal lengths: L_OR = ln 2, so the
        // total minus the SFT part must be λ·ln 2.
        let p = pair(-2.0, -2.0, 2, 2);
        let out = orpo_loss(&p, &cfg).unwrap();
        let l_or = (out.loss - 2.0) / cfg.lambda;
        assert!((l_or - LN2).abs() < 1e-12);
    }

    #[test]
    fn orpo_example_odds_ratio_sixteen() {
        // P_w = 0.8, P_l = 0.2 via lengths of 1: odds 4 and 0.25, ratio 16,
        // L_OR = −ln σ(ln 16) = ln(17/16).
        let cfg = LossConfig {
            lambda: 1.0,
            ..LossConfig::<f64>::orpo()
        };
        let p = pair(0.8_f64.ln(), 0.2_f64.ln(), 1, 1);
        let out = orpo_loss(&p, &cfg).unwrap();
        let l_or = out.loss - (-p.theta_w);
        let oracle = neg_log_sigmoid_oracle(16.0_f64.ln());
        assert!((l_or - oracle).abs() < 1e-12);
        assert!((l_or - (17.0_f64 / 16.0).ln()).abs() < 1e-12);
        assert!((l_or - 0.06062462181643484).abs() < 1e-12);
    }

    #[test]
    fn orpo_with_zero_lambda_is_sft() {
        let cfg = LossConfig {
            lambda: 0.0,
            ..LossConfig::<f64>::orpo()
        };
        let p = pair(-3.3, -1.1, 4, 2);
        let out = orpo_loss(&p, &cfg).unwrap();
        assert_eq!(out.loss, 3.3);
        assert_eq!(out.d_theta_w, -1.0);
        assert_eq!(out.d_theta_l, 0.0);
    }

    #[test]
    fn orpo_guards_probability_at_one() {
        let cfg = LossConfig::<f64>::orpo();
        assert!(matches!(
            orpo_loss(&pair(0.0, -1.0, 2, 2), &cfg),
            Err(LossError::ProbabilityAtOrAboveOne(_))
        ));
        assert!(matches!(
            orpo_loss(&pair(-1.0, 0.5, 2, 2), &cfg),
            Err(LossError::ProbabilityAtOrAboveOne(_))
        ));
    }

    #[test]
    fn simpo_zero_margin_is_ln2() {
        let cfg = LossConfig {
            gamma: 0.0,
            ..LossConfig::<f64>::simpo()
        };
        // Equal average log-probs.
        let p = pair(-4.0, -2.0, 4, 2);
        let out = simpo_loss(&p, &cfg).unwrap();
        assert!((out.loss - LN2).abs() < 1e-12);
    }

    #[test]
    fn simpo_worked_margin_example() {
        // avg −1.0 vs −2.0, beta 2, gamma 0.5 → margin 1.5.
        let cfg = LossConfig {
            beta: 2.0,
            gamma: 0.5,
            ..LossConfig::<f64>::simpo()
        };
        let p = pair(-4.0, -4.0, 4, 2);
        let out = simpo_loss(&p, &cfg).unwrap();
        assert!((out.loss - neg_log_sigmoid_oracle(1.5)).abs() < 1e-15);
        assert!((out.loss - 0.2014132779827524).abs() < 1e-12);
    }

    #[test]
    fn simpo_reward_is_length_normalized() {
        // Repeating a sequence with the same average token log-prob leaves
        // the reward term β/|y|·θ unchanged.
        let cfg = LossConfig::<f64>::simpo();
        let single = simpo_loss(&pair(-3.0, -5.0, 3, 4), &cfg).unwrap();
        let repeated = simpo_loss(&pair(-6.0, -5.0, 6, 4), &cfg).unwrap();
        assert!((single.loss - repeated.loss).abs() < 1e-12);
    }

    #[test]
    fn simpo_ignores_reference_fields() {
        let cfg = LossConfig::<f64>::simpo();
        let mut p = pair(-2.0, -3.0, 2, 3);
        let without = simpo_loss(&p, &cfg).unwrap();
        p.ref_w = Some(-9.0);
        p.ref_l = Some(-1.0);
        let with = simpo_loss(&p, &cfg).unwrap();
        assert_eq!(without, with);
    }

    #[test]
    fn sft_is_linear() {
        assert_eq!(sft_loss(0.0_f64), (0.0, -1.0));
        assert_eq!(sft_loss(-2.3_f64), (2.3, -1.0));
        assert_eq!(sft_loss(5.0_f64), (-5.0, -1.0));
    }

    #[test]
    fn losses_monotone_in_each_argument() {
        // Pairwise losses strictly decrease in theta_w and strictly increase
        // in theta_l, holding the other side fixed.
        let mut rng = crate::seeded::SplitMix64::new(404);
        for _ in 0..200 {
            let tw = -8.0 * rng.next_f64() - 0.2;
            let tl = -8.0 * rng.next_f64() - 0.2;
            let bump = 0.05 + rng.next_f64() * 0.5;
            for method in [Method::Dpo, Method::Orpo, Method::Simpo] {
                let mut cfg = LossConfig::<f64>::for_method(method);
                cfg.lambda = 0.5; // make the ORPO penalty active
                let mk = |w: f64, l: f64| PairLogps {
                    theta_w: w,
                    theta_l: l,
                    ref_w: Some(-1.0),
                    ref_l: Some(-2.0),
                    len_w: 3,
                    len_l: 4,
                };
                let base = evaluate(&cfg, &mk(tw, tl)).unwrap().loss;
                let up_w = evaluate(&cfg, &mk(tw + bump.min(-tw / 2.0), tl)).unwrap().loss;
                let up_l = evaluate(&cfg, &mk(tw, tl + bump.min(-tl / 2.0))).unwrap().loss;
                assert!(up_w < base, "{method:?} not decreasing in theta_w");
                assert!(up_l > base, "{method:?} not increasing in theta_l");
            }
        }
    }

    #[test]
    fn no_overflow_across_wide_margins() {
        let cfg = LossConfig {
            beta: 1.0,
            ..LossConfig::<f64>::dpo()
        };
        for delta in [-700.0, -350.0, 0.0, 350.0, 700.0] {
            let p = PairLogps {
                theta_w: delta,
                theta_l: 0.0,
                ref_w: Some(0.0),
                ref_l: Some(0.0),
                len_w: 1,
                len_l: 1,
            };
            let out = dpo_loss(&p, &cfg).unwrap();
            assert!(out.loss.is_finite(), "delta={delta}");
            assert!(out.d_theta_w.is_finite() && out.d_theta_l.is_finite());
        }
    }

    #[test]
    fn config_validation_rejects_bad_params() {
        let mut cfg = LossConfig::<f64>::dpo();
        cfg.beta = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = LossConfig::<f64>::orpo();
        cfg.lambda = -0.1;
        assert!(cfg.validate().is_err());
        let mut cfg = LossConfig::<f64>::simpo();
        cfg.gamma = -1.0;
        assert!(cfg.validate().is_err());
        assert!(LossConfig::<f64>::sft().validate().is_ok());
    }

    #[test]
    fn evaluate_runs_at_f32() {
        let cfg = LossConfig::<f32>::simpo();
        let p = PairLogps {
            theta_w: -2.0_f32,
            theta_l: -3.0,
            ref_w: None,
            ref_l: None,
            len_w: 2,
            len_l: 3,
        };
        let out = evaluate(&cfg, &p).unwrap();
        assert!(out.loss.is_finite());
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let cfg = LossConfig::<f64>::simpo();
        let p = pair(f64::NAN, -1.0, 1, 1);
        assert_eq!(evaluate(&cfg, &p).unwrap_err(), LossError::NonFiniteInput);
    }
}
