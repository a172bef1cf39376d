//! Toy differentiable sequence policy.
//!
//! A bag-of-tokens model: conditioned on a context class, every token of a
//! sequence is drawn independently from a softmax over one row of a logits
//! table. Sequence log-probabilities and their gradients are exact and
//! cheap, and normalization is enumerable for small vocabularies, which is
//! what the loss and trainer verification needs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::scalar::{from_f64, from_usize, to_f64, Scalar};
use crate::seeded::fnv1a64;

/// Token reserved at index 0 for out-of-vocabulary words.
pub const UNK_TOKEN: &str = "<unk>";

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("vocabulary needs at least 2 tokens, got {0}")]
    VocabTooSmall(usize),
    #[error("duplicate vocabulary token {0:?}")]
    DuplicateToken(String),
    #[error("cannot tokenize empty text")]
    EmptyText,
    #[error("context class {ctx} out of range for {count} contexts")]
    ContextOutOfRange { ctx: usize, count: usize },
    #[error("token index {index} out of range for vocab size {vocab}")]
    TokenOutOfRange { index: usize, vocab: usize },
    #[error("logits contain a non-finite entry at index {0}")]
    NonFiniteLogit(usize),
    #[error("logits length {got} does not match {contexts} contexts x {vocab} vocab")]
    ShapeMismatch {
        got: usize,
        contexts: usize,
        vocab: usize,
    },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse params file {path}: {message}")]
    Parse { path: String, message: String },
}

/// Ordered token list with a reverse index. Index 0 is the UNK slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn new(tokens: Vec<String>) -> Result<Self, PolicyError> {
        if tokens.len() < 2 {
            return Err(PolicyError::VocabTooSmall(tokens.len()));
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(PolicyError::DuplicateToken(t.clone()));
            }
        }
        Ok(Self { tokens, index })
    }

    /// Build a vocabulary from raw texts: UNK first, then the distinct
    /// whitespace tokens in lexicographic order (for platform-stable files).
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>) -> Result<Self, PolicyError> {
        let mut set: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
        for text in texts {
            for tok in text.split_whitespace() {
                if tok != UNK_TOKEN {
                    set.insert(tok.to_string());
                }
            }
        }
        let mut tokens = Vec::with_capacity(set.len() + 1);
        tokens.push(UNK_TOKEN.to_string());
        tokens.extend(set);
        Self::new(tokens)
    }

    pub fn from_lines(text: &str) -> Result<Self, PolicyError> {
        Self::new(text.lines().map(str::to_string).collect())
    }

    pub fn to_lines(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }
}

/// Token index sequence; always nonempty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq(pub Vec<usize>);

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Whitespace tokenizer; unknown words map to the UNK index 0.
pub fn tokenize(vocab: &Vocab, text: &str) -> Result<TokenSeq, PolicyError> {
    let indices: Vec<usize> = text
        .split_whitespace()
        .map(|tok| vocab.index_of(tok).unwrap_or(0))
        .collect();
    if indices.is_empty() {
        return Err(PolicyError::EmptyText);
    }
    Ok(TokenSeq(indices))
}

/// Context class for a prompt: FNV-1a 64-bit over the UTF-8 bytes, modulo
/// the context count.
pub fn context_class(prompt: &str, context_count: usize) -> usize {
    assert!(context_count >= 1, "context_count must be >= 1");
    (fnv1a64(prompt.as_bytes()) % context_count as u64) as usize
}

/// Logits table of shape `context_count x vocab_size`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams<S> {
    context_count: usize,
    vocab_size: usize,
    logits: Vec<S>,
}

impl<S: Scalar> PolicyParams<S> {
    /// All-zero logits: the uniform policy.
    pub fn uniform(context_count: usize, vocab_size: usize) -> Self {
        Self {
            context_count,
            vocab_size,
            logits: vec![S::zero(); context_count * vocab_size],
        }
    }

    pub fn from_logits(
        context_count: usize,
        vocab_size: usize,
        logits: Vec<S>,
    ) -> Result<Self, PolicyError> {
        if logits.len() != context_count * vocab_size {
            return Err(PolicyError::ShapeMismatch {
                got: logits.len(),
                contexts: context_count,
                vocab: vocab_size,
            });
        }
        for (i, v) in logits.iter().enumerate() {
            if !v.is_finite() {
                return Err(PolicyError::NonFiniteLogit(i));
            }
        }
        Ok(Self {
            context_count,
            vocab_size,
            logits,
        })
    }

    pub fn context_count(&self) -> usize {
        self.context_count
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, ctx: usize) -> &[S] {
        &self.logits[ctx * self.vocab_size..(ctx + 1) * self.vocab_size]
    }

    pub fn row_mut(&mut self, ctx: usize) -> &mut [S] {
        &mut self.logits[ctx * self.vocab_size..(ctx + 1) * self.vocab_size]
    }

    pub fn logits(&self) -> &[S] {
        &self.logits
    }

    /// Softmax probabilities of one context row.
    pub fn probs(&self, ctx: usize) -> Result<Vec<S>, PolicyError> {
        self.check_ctx(ctx)?;
        let row = self.row(ctx);
        let max = row.iter().copied().fold(S::neg_infinity(), S::max);
        let exps: Vec<S> = row.iter().map(|&l| (l - max).exp()).collect();
        let sum = exps.iter().copied().fold(S::zero(), |a, b| a + b);
        Ok(exps.into_iter().map(|e| e / sum).collect())
    }

    fn check_ctx(&self, ctx: usize) -> Result<(), PolicyError> {
        if ctx >= self.context_count {
            return Err(PolicyError::ContextOutOfRange {
                ctx,
                count: self.context_count,
            });
        }
        Ok(())
    }
}

/// Gradient of a sequence log-probability: one dense row at `ctx`, zero
/// everywhere else.
#[derive(Debug, Clone, PartialEq)]
pub struct LogprobGrad<S> {
    pub ctx: usize,
    pub row: Vec<S>,
}

/// Log-probability of a token sequence under one context, with its exact
/// gradient: `grad[ctx][t] = count(t in seq) − |seq|·softmax(logits[ctx])[t]`.
pub fn seq_logprob<S: Scalar>(
    params: &PolicyParams<S>,
    ctx: usize,
    seq: &TokenSeq,
) -> Result<(S, LogprobGrad<S>), PolicyError> {
    params.check_ctx(ctx)?;
    let v = params.vocab_size;
    let row = params.row(ctx);

    let max = row.iter().copied().fold(S::neg_infinity(), S::max);
    let mut sum = S::zero();
    for &l in row {
        sum = sum + (l - max).exp();
    }
    let lse = max + sum.ln();

    let mut counts = vec![0usize; v];
    for &t in &seq.0 {
        if t >= v {
            return Err(PolicyError::TokenOutOfRange { index: t, vocab: v });
        }
        counts[t] += 1;
    }
    // Summed from counts in vocab order, so the result is exactly invariant
    // under any permutation of the sequence.
    let mut logprob = S::zero();
    for (t, &c) in counts.iter().enumerate() {
        if c > 0 {
            logprob = logprob + from_usize::<S>(c) * (row[t] - lse);
        }
    }

    let n = from_usize::<S>(seq.len());
    let grad_row: Vec<S> = row
        .iter()
        .zip(&counts)
        .map(|(&l, &c)| from_usize::<S>(c) - n * (l - lse).exp())
        .collect();

    Ok((logprob, LogprobGrad { ctx, row: grad_row }))
}

/// On-disk parameter bundle: vocabulary plus the logits table at f64.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyFile {
    pub vocab: Vec<String>,
    pub context_count: usize,
    pub logits: Vec<f64>,
}

pub fn save_params<S: Scalar>(
    path: &Path,
    params: &PolicyParams<S>,
    vocab: &Vocab,
) -> Result<(), PolicyError> {
    let file = PolicyFile {
        vocab: vocab.tokens().to_vec(),
        context_count: params.context_count,
        logits: params.logits.iter().map(|&l| to_f64(l)).collect(),
    };
    let body = serde_json::to_string_pretty(&file).expect("params serialize");
    fs::write(path, body).map_err(|source| PolicyError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_params<S: Scalar>(path: &Path) -> Result<(PolicyParams<S>, Vocab), PolicyError> {
    let text = fs::read_to_string(path).map_err(|source| PolicyError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: PolicyFile = serde_json::from_str(&text).map_err(|e| PolicyError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let vocab = Vocab::new(file.vocab)?;
    let logits = file.logits.into_iter().map(from_f64).collect();
    let params = PolicyParams::from_logits(file.context_count, vocab.len(), logits)?;
    Ok((params, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded::SplitMix64;

    fn abc_vocab() -> Vocab {
        Vocab::new(vec![UNK_TOKEN.into(), "a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn tokenize_maps_known_and_unknown() {
        let v = abc_vocab();
        assert_eq!(tokenize(&v, "a b a").unwrap().0, vec![1, 2, 1]);
        assert_eq!(tokenize(&v, "a zzz").unwrap().0, vec![1, 0]);
    }

    #[test]
    fn tokenize_rejects_empty() {
        let v = abc_vocab();
        assert!(matches!(tokenize(&v, ""), Err(PolicyError::EmptyText)));
        assert!(matches!(tokenize(&v, "   "), Err(PolicyError::EmptyText)));
    }

    #[test]
    fn vocab_build_sorts_and_reserves_unk() {
        let v = Vocab::build(["beta alpha", "alpha gamma"]).unwrap();
        assert_eq!(
            v.tokens(),
            &["<unk>".to_string(), "alpha".into(), "beta".into(), "gamma".into()]
        );
        assert_eq!(v.index_of("alpha"), Some(1));
    }

    #[test]
    fn vocab_rejects_duplicates_and_tiny() {
        assert!(Vocab::new(vec!["a".into()]).is_err());
        assert!(Vocab::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn vocab_line_round_trip() {
        let v = Vocab::build(["x y z"]).unwrap();
        let lines = v.to_lines();
        assert_eq!(Vocab::from_lines(&lines).unwrap(), v);
    }

    #[test]
    fn context_class_single_context_is_zero() {
        assert_eq!(context_class("anything at all", 1), 0);
        assert_eq!(context_class("", 1), 0);
    }

    #[test]
    fn context_class_is_deterministic_fnv() {
        // Independent recomputation through the documented hash.
        let independent = |p: &str, c: usize| (fnv1a64(p.as_bytes()) % c as u64) as usize;
        for prompt in ["what is gravity", "Explain: 2 + 2", ""] {
            assert_eq!(context_class(prompt, 1 << 16), independent(prompt, 1 << 16));
            assert_eq!(context_class(prompt, 7), context_class(prompt, 7));
        }
        assert_ne!(
            context_class("what is gravity", 1 << 16),
            context_class("why is the sky blue", 1 << 16)
        );
    }

    #[test]
    fn uniform_logprob_matches_closed_form() {
        let params = PolicyParams::<f64>::uniform(1, 4);
        let seq = TokenSeq(vec![0, 1, 2]);
        let (lp, _) = seq_logprob(&params, 0, &seq).unwrap();
        assert!((lp - (-3.0 * 4.0_f64.ln())).abs() < 1e-12);
        assert!((lp - (-4.158883083359672)).abs() < 1e-6);
    }

    #[test]
    fn two_token_softmax_case() {
        let params =
            PolicyParams::from_logits(1, 2, vec![3.0_f64.ln(), 0.0]).unwrap();
        let probs = params.probs(0).unwrap();
        assert!((probs[0] - 0.75).abs() < 1e-15);
        assert!((probs[1] - 0.25).abs() < 1e-15);
        let (lp, _) = seq_logprob(&params, 0, &TokenSeq(vec![0])).unwrap();
        assert!((lp - 0.75_f64.ln()).abs() < 1e-15);
        assert!((lp - (-0.2876820724517809)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = SplitMix64::new(99);
        for trial in 0..50 {
            let v = 2 + (rng.next_below(8) as usize);
            let c = 1 + (rng.next_below(3) as usize);
            let logits: Vec<f64> = (0..c * v).map(|_| 4.0 * rng.next_f64() - 2.0).collect();
            let params = PolicyParams::from_logits(c, v, logits.clone()).unwrap();
            let len = 1 + rng.next_below(8) as usize;
            let seq = TokenSeq((0..len).map(|_| rng.next_below(v as u64) as usize).collect());
            let ctx = rng.next_below(c as u64) as usize;

            let (_, grad) = seq_logprob(&params, ctx, &seq).unwrap();
            let h = 1e-5;
            for t in 0..v {
                let mut up = logits.clone();
                up[ctx * v + t] += h;
                let mut down = logits.clone();
                down[ctx * v + t] -= h;
                let (lp_up, _) = seq_logprob(
                    &PolicyParams::from_logits(c, v, up).unwrap(),
                    ctx,
                    &seq,
                )
                .unwrap();
                let (lp_down, _) = seq_logprob(
                    &PolicyParams::from_logits(c, v, down).unwrap(),
                    ctx,
                    &seq,
                )
                .unwrap();
                let fd = (lp_up - lp_down) / (2.0 * h);
                let a = grad.row[t];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
                assert!(rel < 1e-6, "trial {trial} ctx {ctx} token {t}: {a} vs {fd}");
            }
        }
    }

    #[test]
    fn length_one_probabilities_normalize_per_context() {
        let mut rng = SplitMix64::new(5);
        for v in 2..=10usize {
            let c = 2;
            let logits: Vec<f64> = (0..c * v).map(|_| 6.0 * rng.next_f64() - 3.0).collect();
            let params = PolicyParams::from_logits(c, v, logits).unwrap();
            for ctx in 0..c {
                let total: f64 = (0..v)
                    .map(|t| {
                        let (lp, _) = seq_logprob(&params, ctx, &TokenSeq(vec![t])).unwrap();
                        lp.exp()
                    })
                    .sum();
                assert!((total - 1.0).abs() < 1e-12, "V={v} ctx={ctx}: {total}");
            }
        }
    }

    #[test]
    fn gradient_row_sums_to_zero() {
        let mut rng = SplitMix64::new(17);
        for _ in 0..30 {
            let v = 2 + rng.next_below(10) as usize;
            let logits: Vec<f64> = (0..v).map(|_| 8.0 * rng.next_f64() - 4.0).collect();
            let params = PolicyParams::from_logits(1, v, logits).unwrap();
            let len = 1 + rng.next_below(8) as usize;
            let seq = TokenSeq((0..len).map(|_| rng.next_below(v as u64) as usize).collect());
            let (_, grad) = seq_logprob(&params, 0, &seq).unwrap();
            let sum: f64 = grad.row.iter().sum();
            assert!(sum.abs() < 1e-12, "row sum {sum}");
        }
    }

    #[test]
    fn logprob_is_permutation_invariant() {
        let params =
            PolicyParams::from_logits(1, 3, vec![0.3_f64, -1.2, 0.9]).unwrap();
        let (a, ga) = seq_logprob(&params, 0, &TokenSeq(vec![0, 1, 2, 2, 1])).unwrap();
        let (b, gb) = seq_logprob(&params, 0, &TokenSeq(vec![2, 1, 2, 0, 1])).unwrap();
        assert_eq!(a, b);
        assert_eq!(ga, gb);
    }

    #[test]
    fn out_of_range_inputs_error() {
        let params = PolicyParams::<f64>::uniform(2, 3);
        assert!(matches!(
            seq_logprob(&params, 2, &TokenSeq(vec![0])),
            Err(PolicyError::ContextOutOfRange { .. })
        ));
        assert!(matches!(
            seq_logprob(&params, 0, &TokenSeq(vec![3])),
            Err(PolicyError::TokenOutOfRange { .. })
        ));
    }

    #[test]
    fn params_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("params.json");
        let vocab = Vocab::build(["alpha beta gamma"]).unwrap();
        let params =
            PolicyParams::from_logits(2, vocab.len(), (0..8).map(|i| i as f64 * 0.25).collect())
                .unwrap();
        save_params(&path, &params, &vocab).unwrap();
        let (loaded, loaded_vocab): (PolicyParams<f64>, Vocab) = load_params(&path).unwrap();
        assert_eq!(loaded, params);
        assert_eq!(loaded_vocab, vocab);
    }

    #[test]
    fn works_at_f32() {
        let params = PolicyParams::<f32>::uniform(1, 4);
        let (lp, grad) = seq_logprob(&params, 0, &TokenSeq(vec![1, 2])).unwrap();
        assert!((lp + 2.0 * 4.0_f32.ln()).abs() < 1e-6);
        let sum: f32 = grad.row.iter().sum();
        assert!(sum.abs() < 1e-6);
    }
}
