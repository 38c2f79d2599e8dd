//! Minibatch Adam training with teacher forcing.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{tokenize, write_canonical_smiles, Molecule, TokenId, Vocabulary, PAD};
use crate::pharmacophore::{perceive, PharmacophoreProfile};
use crate::scalar::Real;
use crate::voxel::{augment, voxelize, voxelize_at, GridSpec, VoxelError, VoxelGrid};

use super::model::CaptionerModel;
use super::tape::Tape;
use super::NnError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Random rigid motion of every profile, redrawn each epoch.
    pub augment: bool,
    /// Stop once teacher-forced training accuracy reaches this fraction.
    pub stop_at_accuracy: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 300,
            batch_size: 16,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            augment: true,
            stop_at_accuracy: None,
        }
    }
}

/// One training pair: a conformer's profile and its BOS…EOS token ids.
#[derive(Debug, Clone)]
pub struct TrainExample<T> {
    pub smiles: String,
    pub profile: PharmacophoreProfile<T>,
    pub tokens: Vec<TokenId>,
    /// Grid of the unaugmented profile.
    pub grid: VoxelGrid<T>,
}

/// Builds examples from conformers; molecules that cannot be perceived,
/// tokenize to UNK, or do not fit the grid are returned as `(index, reason)`.
pub fn prepare_examples<T: Real>(
    mols: &[Molecule],
    vocabulary: &Vocabulary,
    spec: &GridSpec,
) -> (Vec<TrainExample<T>>, Vec<(usize, String)>) {
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for (i, m) in mols.iter().enumerate() {
        let smiles = write_canonical_smiles(m);
        let seq = tokenize(&smiles, vocabulary);
        if seq.has_unk() {
            skipped.push((i, format!("{smiles}: tokens outside the vocabulary")));
            continue;
        }
        let profile = match perceive::<T>(m) {
            Ok(p) => p,
            Err(e) => {
                skipped.push((i, format!("{smiles}: {e}")));
                continue;
            }
        };
        match voxelize(&profile, spec) {
            Ok(grid) => out.push(TrainExample { smiles, profile, tokens: seq.ids, grid }),
            Err(e) => skipped.push((i, format!("{smiles}: {e}"))),
        }
    }
    (out, skipped)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-sequence negative log-likelihood over the epoch's batches.
    pub train_loss: f64,
    /// Teacher-forced next-token accuracy over the epoch's batches.
    pub train_accuracy: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainHistory {
    pub initial_loss: f64,
    pub epochs: Vec<EpochStats>,
}

struct Adam<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    t: i32,
}

impl<T: Real> Adam<T> {
    fn new(model: &CaptionerModel<T>) -> Self {
        let zeros = || model.params().iter().map(|p| vec![T::zero(); p.len()]).collect();
        Adam { m: zeros(), v: zeros(), t: 0 }
    }

    fn step(&mut self, model: &mut CaptionerModel<T>, grads: &[Option<Vec<T>>], cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (T::lit(cfg.beta1), T::lit(cfg.beta2));
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let lr = T::lit(cfg.learning_rate);
        let eps = T::lit(cfg.epsilon);
        for (i, p) in model.params_mut().iter_mut().enumerate() {
            let Some(g) = &grads[i] else { continue };
            for (k, w) in p.data.iter_mut().enumerate() {
                let gk = g[k];
                self.m[i][k] = b1 * self.m[i][k] + (T::one() - b1) * gk;
                self.v[i][k] = b2 * self.v[i][k] + (T::one() - b2) * gk * gk;
                let mh = self.m[i][k] / c1;
                let vh = self.v[i][k] / c2;
                *w -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

/// Right-pads with PAD to a common length.
pub(crate) fn pad_batch(seqs: &[&[TokenId]]) -> Vec<Vec<TokenId>> {
    let len = seqs.iter().map(|s| s.len()).max().unwrap_or(0);
    seqs.iter()
        .map(|s| {
            let mut v = s.to_vec();
            v.resize(len, PAD);
            v
        })
        .collect()
}

struct BatchResult<T> {
    loss_sum: f64,
    correct: usize,
    total: usize,
    grads: Option<Vec<Option<Vec<T>>>>,
}

fn run_batch<T: Real>(
    model: &CaptionerModel<T>,
    grids: Vec<T>,
    seqs: &[Vec<TokenId>],
    with_grad: bool,
) -> BatchResult<T> {
    let mut tape = Tape::new(model.params());
    let (loss, steps) = model.loss_on_tape(&mut tape, grids, seqs);
    let loss_sum = tape.value(loss)[0].as_f64();
    let r = model.vocab_size();
    let (mut correct, mut total) = (0, 0);
    for s in &steps {
        let logits = tape.value(s.logits);
        for (row, t) in s.targets.iter().enumerate() {
            if let Some(t) = *t {
                let l = &logits[row * r..(row + 1) * r];
                let arg = (0..r).max_by(|&a, &b| l[a].as_f64().total_cmp(&l[b].as_f64()).then(b.cmp(&a))).unwrap_or(0);
                correct += usize::from(arg == t);
                total += 1;
            }
        }
    }
    let grads = with_grad.then(|| {
        let scaled = tape.scale(loss, T::one() / T::lit(seqs.len() as f64));
        tape.backward(scaled)
    });
    BatchResult { loss_sum, correct, total, grads }
}

/// Mean per-sequence loss and teacher-forced accuracy on unaugmented grids.
pub fn evaluate<T: Real>(model: &CaptionerModel<T>, examples: &[TrainExample<T>], batch_size: usize) -> (f64, f64) {
    let (mut loss, mut correct, mut total) = (0.0, 0, 0);
    for chunk in examples.chunks(batch_size.max(1)) {
        let grids: Vec<T> = chunk.iter().flat_map(|e| e.grid.values().iter().copied()).collect();
        let seqs = pad_batch(&chunk.iter().map(|e| e.tokens.as_slice()).collect::<Vec<_>>());
        let b = run_batch(model, grids, &seqs, false);
        loss += b.loss_sum;
        correct += b.correct;
        total += b.total;
    }
    let n = examples.len().max(1) as f64;
    (loss / n, if total == 0 { 0.0 } else { correct as f64 / total as f64 })
}

/// Trains in place. `on_epoch` sees every epoch's statistics and the model
/// after that epoch's updates; returning an error aborts training.
pub fn train<T: Real, F>(
    model: &mut CaptionerModel<T>,
    examples: &[TrainExample<T>],
    validation: &[TrainExample<T>],
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainHistory, NnError>
where
    F: FnMut(&EpochStats, &CaptionerModel<T>) -> Result<(), NnError>,
{
    if examples.is_empty() || cfg.batch_size == 0 {
        return Err(NnError::InvalidConfig("training needs examples and a positive batch size".into()));
    }
    for e in examples.iter().chain(validation) {
        model.check_grid(&e.grid)?;
    }
    let spec = model.config().grid;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model);
    let (initial_loss, _) = evaluate(model, examples, cfg.batch_size);
    let mut history = TrainHistory { initial_loss, epochs: Vec::new() };
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let (mut loss, mut correct, mut total) = (0.0, 0, 0);
        for (bi, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut grids = Vec::new();
            for &i in chunk {
                let e = &examples[i];
                if cfg.augment {
                    // Voxelize at the pre-augmentation centroid so the
                    // translation survives. A motion that leaves the box
                    // falls back to the unaugmented grid.
                    let moved = augment(&e.profile, &mut rng);
                    match voxelize_at(&moved, &spec, e.grid.center()) {
                        Ok(g) => grids.extend_from_slice(g.values()),
                        Err(VoxelError::Coverage { .. }) => grids.extend_from_slice(e.grid.values()),
                        Err(err) => return Err(err.into()),
                    }
                } else {
                    grids.extend_from_slice(e.grid.values());
                }
            }
            let seqs = pad_batch(&chunk.iter().map(|&i| examples[i].tokens.as_slice()).collect::<Vec<_>>());
            let b = run_batch(model, grids, &seqs, true);
            if !b.loss_sum.is_finite() {
                return Err(NnError::NonFiniteLoss { epoch, batch: bi, value: b.loss_sum });
            }
            loss += b.loss_sum;
            correct += b.correct;
            total += b.total;
            adam.step(model, b.grads.as_deref().expect("gradients requested"), cfg);
        }
        let (val_loss, val_accuracy) = if validation.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(model, validation, cfg.batch_size);
            (Some(l), Some(a))
        };
        let stats = EpochStats {
            epoch,
            train_loss: loss / examples.len() as f64,
            train_accuracy: correct as f64 / total.max(1) as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&stats, model)?;
        let done = cfg.stop_at_accuracy.is_some_and(|target| stats.train_accuracy >= target);
        history.epochs.push(stats);
        if done {
            break;
        }
    }
    Ok(history)
}
