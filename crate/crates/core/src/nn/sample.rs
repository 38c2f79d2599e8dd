//! Temperature-annealed, optionally top-k, ancestral sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{detokenize, TokenId, BOS, EOS, PAD, UNK};
use crate::scalar::Real;
use crate::voxel::VoxelGrid;

use super::model::{CaptionerModel, DecoderState};
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplerConfig {
    /// τ ≥ 1.
    pub temperature: f64,
    /// Keep only the `k` largest logits; `None` keeps all.
    pub top_k: Option<usize>,
    /// Generated tokens per sequence, EOS excluded.
    pub max_length: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { temperature: 1.0, top_k: None, max_length: 100, seed: 0 }
    }
}

impl SamplerConfig {
    pub fn validate(&self, vocab_size: usize) -> Result<(), NnError> {
        if !(self.temperature >= 1.0) || !self.temperature.is_finite() {
            return Err(NnError::InvalidConfig(format!("temperature {} must be finite and >= 1", self.temperature)));
        }
        if let Some(k) = self.top_k {
            if k == 0 || k > vocab_size {
                return Err(NnError::InvalidConfig(format!("top_k {k} outside 1..={vocab_size}")));
            }
        }
        if self.max_length == 0 {
            return Err(NnError::InvalidConfig("max_length must be positive".into()));
        }
        Ok(())
    }
}

fn masked(index: usize) -> bool {
    let id = index as TokenId + 1;
    id == PAD || id == BOS || id == UNK
}

/// Probabilities over logit indices: PAD/BOS/UNK removed, the `top_k`
/// largest remaining logits kept (ties to the lower id), then
/// `softmax(f / τ)` over the kept set.
pub fn sampling_distribution<T: Real>(logits: &[T], temperature: f64, top_k: Option<usize>) -> Vec<f64> {
    let mut kept: Vec<usize> = (0..logits.len()).filter(|&i| !masked(i)).collect();
    if let Some(k) = top_k {
        kept.sort_by(|&a, &b| logits[b].as_f64().total_cmp(&logits[a].as_f64()).then(a.cmp(&b)));
        kept.truncate(k.max(1));
    }
    let mut p = vec![0.0; logits.len()];
    let m = kept.iter().map(|&i| logits[i].as_f64()).fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for &i in &kept {
        p[i] = ((logits[i].as_f64() - m) / temperature).exp();
        z += p[i];
    }
    p.iter_mut().for_each(|v| *v /= z);
    p
}

/// Inverse-CDF draw of an index from `probs`.
pub fn draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
    }
    last
}

/// Draws `n` token sequences (without BOS/EOS) from one latent, decoding
/// all live sequences as a batch.
pub fn sample_ids<T: Real, R: Rng + ?Sized>(
    model: &CaptionerModel<T>,
    latent: &[T],
    cfg: &SamplerConfig,
    n: usize,
    rng: &mut R,
) -> Result<Vec<Vec<TokenId>>, NnError> {
    cfg.validate(model.vocab_size())?;
    let mut out: Vec<Vec<TokenId>> = vec![Vec::new(); n];
    let mut live: Vec<usize> = (0..n).collect();
    let init = model.initial_state(latent);
    let mut states: Vec<DecoderState<T>> = vec![init; n];
    let mut tokens: Vec<TokenId> = vec![BOS; n];
    for _ in 0..cfg.max_length {
        if live.is_empty() {
            break;
        }
        let (logits, next) = model.decode_steps(&states, &tokens, latent)?;
        let mut keep = Vec::with_capacity(live.len());
        let mut new_states = Vec::with_capacity(live.len());
        let mut new_tokens = Vec::with_capacity(live.len());
        for ((row, l), s) in live.iter().zip(&logits).zip(next) {
            let p = sampling_distribution(l, cfg.temperature, cfg.top_k);
            let id = draw(&p, rng) as TokenId + 1;
            if id == EOS {
                continue;
            }
            out[*row].push(id);
            keep.push(*row);
            new_states.push(s);
            new_tokens.push(id);
        }
        live = keep;
        states = new_states;
        tokens = new_tokens;
    }
    Ok(out)
}

/// One SMILES string from `g`, seeded by `cfg.seed`.
pub fn sample<T: Real>(g: &VoxelGrid<T>, cfg: &SamplerConfig, model: &CaptionerModel<T>) -> Result<String, NnError> {
    let latent = model.encode(g)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ids = sample_ids(model, &latent, cfg, 1, &mut rng)?.pop().expect("one sequence");
    Ok(detokenize(&ids, model.vocabulary()))
}

/// Shannon entropy in nats.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Index 0..3 are PAD, BOS, EOS, UNK.
    fn with_specials(rest: &[f64]) -> Vec<f64> {
        let mut v = vec![9.0, 9.0, 0.5, 9.0];
        v.extend_from_slice(rest);
        v
    }

    #[test]
    fn equal_logits_split_evenly() {
        // Two unmasked tokens: EOS and one corpus token.
        let l = vec![0.0, 0.0, 2.5, 0.0, 2.5];
        for tau in [1.0, 1.3, 7.0] {
            let p = sampling_distribution(&l, tau, None);
            assert!((p[2] - 0.5).abs() < 1e-15 && (p[4] - 0.5).abs() < 1e-15);
            assert_eq!(p[0] + p[1] + p[3], 0.0);
        }
    }

    #[test]
    fn top_one_is_greedy_with_low_id_ties() {
        let l = with_specials(&[1.0, 3.0, 3.0, -2.0]);
        let p = sampling_distribution(&l, 1.0, Some(1));
        assert_eq!(p[5], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..50).all(|_| draw(&p, &mut rng) == 5));
    }

    #[test]
    fn empirical_frequencies_within_three_sigma() {
        let l = with_specials(&[0.3, 1.2, -0.4, 0.9, 0.0]);
        let p = sampling_distribution(&l, 1.0, None);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let mut counts = vec![0usize; l.len()];
        for _ in 0..n {
            counts[draw(&p, &mut rng)] += 1;
        }
        for (c, &pi) in counts.iter().zip(&p) {
            let mean = n as f64 * pi;
            let sd = (n as f64 * pi * (1.0 - pi)).sqrt();
            assert!((*c as f64 - mean).abs() <= 3.0 * sd, "{c} vs {mean} ± {sd}");
        }
    }

    #[test]
    fn config_validation() {
        let mut c = SamplerConfig::default();
        assert!(c.validate(10).is_ok());
        c.temperature = 0.9;
        assert!(c.validate(10).is_err());
        c.temperature = 1.0;
        c.top_k = Some(11);
        assert!(c.validate(10).is_err());
        c.top_k = Some(0);
        assert!(c.validate(10).is_err());
    }

    proptest! {
        #[test]
        fn distributions_normalize_and_anneal(
            rest in proptest::collection::vec(-5.0..5.0f64, 2..12),
            k in 1usize..12,
        ) {
            let l = with_specials(&rest);
            let mut last_entropy = -1.0;
            let argmax = |p: &[f64]| p.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0))).unwrap().0;
            let a1 = argmax(&sampling_distribution(&l, 1.0, None));
            for tau in [1.0, 1.5, 2.0, 4.0] {
                for top in [None, Some(k.min(l.len()))] {
                    let p = sampling_distribution(&l, tau, top);
                    prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                }
                let p = sampling_distribution(&l, tau, None);
                let h = entropy(&p);
                prop_assert!(h >= last_entropy - 1e-12);
                last_entropy = h;
                prop_assert_eq!(argmax(&p), a1);
            }
        }
    }
}
