//! Convolutional encoder plus LSTM decoder over SMILES tokens.
//!
//! Parameter order: per conv block `conv{k}.weight [c_out, c_in·27]` and
//! `conv{k}.bias`; `encoder.weight [flat, h]`, `encoder.bias`;
//! `embedding [R, e]`; `lstm.weight [e + 2h, 4h]`, `lstm.bias`;
//! `output.weight [h, R]`, `output.bias`. The decoder input at every step is
//! `[embedding(token) | latent | h_prev]`; the initial state is
//! `h0 = tanh(latent)`, `c0 = 0`.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chem::{TokenId, Vocabulary, PAD};
use crate::pharmacophore::NUM_CHANNELS;
use crate::scalar::Real;
use crate::voxel::{GridSpec, VoxelGrid};

use super::tape::{ConvGeom, Tape, Var};
use super::tensor::Tensor;
use super::NnError;

pub const VCPT_VERSION: u32 = 1;
const VCPT_MAGIC: &[u8; 4] = b"VCPT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaptionerConfig {
    pub grid: GridSpec,
    /// Output channels of each stride-2 convolution block.
    pub widths: Vec<usize>,
    /// Latent width `h`, shared by the encoder output and the LSTM state.
    pub latent: usize,
    /// Token embedding width `e`.
    pub embedding: usize,
}

impl Default for CaptionerConfig {
    fn default() -> Self {
        CaptionerConfig { grid: GridSpec::default(), widths: vec![16, 32, 64, 128], latent: 256, embedding: 64 }
    }
}

impl CaptionerConfig {
    /// Small model for finite-difference checks (under 5,000 parameters at
    /// a 16-token vocabulary).
    pub fn tiny() -> Self {
        CaptionerConfig { grid: GridSpec { d: 8, resolution: 1.0, radius: 1.0 }, widths: vec![2], latent: 8, embedding: 4 }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        self.grid.validate()?;
        if self.widths.is_empty() || self.widths.contains(&0) || self.latent == 0 || self.embedding == 0 {
            return Err(NnError::InvalidConfig("widths, latent and embedding must be non-empty and positive".into()));
        }
        Ok(())
    }

    fn conv_geoms(&self, batch: usize) -> Vec<ConvGeom> {
        let mut d = self.grid.d;
        let mut c_in = NUM_CHANNELS;
        self.widths
            .iter()
            .map(|&c_out| {
                let g = ConvGeom { batch, c_in, c_out, d_in: d, d_out: ConvGeom::out_dim(d) };
                d = g.d_out;
                c_in = c_out;
                g
            })
            .collect()
    }

    fn flat_width(&self) -> usize {
        let g = *self.conv_geoms(1).last().expect("at least one block");
        g.c_out * g.d_out.pow(3)
    }
}

/// Recurrent state carried between decoder steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

/// Index of each parameter group in the flat parameter list.
#[derive(Debug, Clone, Copy)]
struct Layout {
    layers: usize,
}

impl Layout {
    fn conv(&self, k: usize) -> (usize, usize) {
        (2 * k, 2 * k + 1)
    }
    fn encoder(&self) -> (usize, usize) {
        (2 * self.layers, 2 * self.layers + 1)
    }
    fn embedding(&self) -> usize {
        2 * self.layers + 2
    }
    fn lstm(&self) -> (usize, usize) {
        (2 * self.layers + 3, 2 * self.layers + 4)
    }
    fn output(&self) -> (usize, usize) {
        (2 * self.layers + 5, 2 * self.layers + 6)
    }
}

/// Per-position next-token predictions made on a tape.
pub(crate) struct StepOutput {
    pub logits: Var,
    pub targets: Vec<Option<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptionerModel<T> {
    config: CaptionerConfig,
    vocabulary: Vocabulary,
    names: Vec<String>,
    params: Vec<Tensor<T>>,
}

impl<T: Real> CaptionerModel<T> {
    /// Randomly initialized model: He-uniform convolutions, Glorot-uniform
    /// affine maps, `U(±1/√h)` recurrent weights with forget bias 1, and
    /// `U(±0.1)` embeddings.
    pub fn new(config: CaptionerConfig, vocabulary: Vocabulary, seed: u64) -> Result<Self, NnError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = vocabulary.len();
        let (h, e) = (config.latent, config.embedding);
        let mut names = Vec::new();
        let mut params = Vec::new();
        let uniform = |shape: Vec<usize>, bound: f64, rng: &mut ChaCha8Rng| {
            let n = shape.iter().product();
            Tensor::new(shape, (0..n).map(|_| T::lit(rng.gen_range(-bound..bound))).collect())
        };
        for (k, g) in config.conv_geoms(1).iter().enumerate() {
            let fan_in = g.c_in * 27;
            names.push(format!("conv{k}.weight"));
            params.push(uniform(vec![g.c_out, fan_in], (6.0 / fan_in as f64).sqrt(), &mut rng));
            names.push(format!("conv{k}.bias"));
            params.push(Tensor::zeros(vec![g.c_out]));
        }
        let flat = config.flat_width();
        names.push("encoder.weight".into());
        params.push(uniform(vec![flat, h], (6.0 / (flat + h) as f64).sqrt(), &mut rng));
        names.push("encoder.bias".into());
        params.push(Tensor::zeros(vec![h]));
        names.push("embedding".into());
        params.push(uniform(vec![r, e], 0.1, &mut rng));
        let lstm_in = e + 2 * h;
        names.push("lstm.weight".into());
        params.push(uniform(vec![lstm_in, 4 * h], 1.0 / (h as f64).sqrt(), &mut rng));
        names.push("lstm.bias".into());
        let mut bias = Tensor::zeros(vec![4 * h]);
        bias.data[h..2 * h].iter_mut().for_each(|b| *b = T::one());
        params.push(bias);
        names.push("output.weight".into());
        params.push(uniform(vec![h, r], (6.0 / (h + r) as f64).sqrt(), &mut rng));
        names.push("output.bias".into());
        params.push(Tensor::zeros(vec![r]));
        Ok(CaptionerModel { config, vocabulary, names, params })
    }

    pub fn config(&self) -> &CaptionerConfig {
        &self.config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    /// `R`, the logit width.
    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn params(&self) -> &[Tensor<T>] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor<T>] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(Tensor::len).sum()
    }

    pub fn cast<U: Real>(&self) -> CaptionerModel<U> {
        CaptionerModel {
            config: self.config.clone(),
            vocabulary: self.vocabulary.clone(),
            names: self.names.clone(),
            params: self.params.iter().map(Tensor::cast).collect(),
        }
    }

    fn layout(&self) -> Layout {
        Layout { layers: self.config.widths.len() }
    }

    pub fn check_grid(&self, g: &VoxelGrid<T>) -> Result<(), NnError> {
        if *g.spec() != self.config.grid {
            return Err(NnError::SpecMismatch { expected: self.config.grid, found: *g.spec() });
        }
        Ok(())
    }

    /// Encoder on a tape. `grids` holds `batch` concatenated grids.
    pub(crate) fn encode_on_tape(&self, tape: &mut Tape<'_, T>, grids: Vec<T>, batch: usize) -> Var {
        let lay = self.layout();
        let mut x = tape.input(grids);
        for (k, geom) in self.config.conv_geoms(batch).into_iter().enumerate() {
            let (w, b) = lay.conv(k);
            let (w, b) = (tape.param(w), tape.param(b));
            let y = tape.conv3d(x, w, b, geom);
            x = tape.relu(y);
        }
        let (w, b) = lay.encoder();
        let (w, b) = (tape.param(w), tape.param(b));
        tape.affine(x, w, b)
    }

    /// One decoder step on a tape. `tokens` are 1-based ids, one per row.
    /// Returns `(logits, h, c)`.
    pub(crate) fn step_on_tape(
        &self,
        tape: &mut Tape<'_, T>,
        tokens: &[TokenId],
        latent: Var,
        h: Var,
        c: Var,
    ) -> (Var, Var, Var) {
        let lay = self.layout();
        let rows = tokens.len();
        let hw = self.config.latent;
        let table = tape.param(lay.embedding());
        let ids: Vec<usize> = tokens.iter().map(|&t| t as usize - 1).collect();
        let emb = tape.embedding(table, &ids, self.config.embedding);
        let x = tape.concat(emb, latent, rows);
        let x = tape.concat(x, h, rows);
        let (w, b) = lay.lstm();
        let (w, b) = (tape.param(w), tape.param(b));
        let gates = tape.affine(x, w, b);
        let hc = tape.lstm(gates, c, rows);
        let h = tape.slice(hc, rows, 0, hw);
        let c = tape.slice(hc, rows, hw, hw);
        let (w, b) = lay.output();
        let (w, b) = (tape.param(w), tape.param(b));
        (tape.affine(h, w, b), h, c)
    }

    /// Teacher-forced decoding of PAD-padded `seqs` (equal lengths). Returns
    /// the summed loss over non-PAD targets and the per-position outputs.
    pub(crate) fn loss_on_tape(
        &self,
        tape: &mut Tape<'_, T>,
        grids: Vec<T>,
        seqs: &[Vec<TokenId>],
    ) -> (Var, Vec<StepOutput>) {
        let rows = seqs.len();
        let len = seqs[0].len();
        let latent = self.encode_on_tape(tape, grids, rows);
        let mut h = tape.tanh(latent);
        let mut c = tape.input(vec![T::zero(); rows * self.config.latent]);
        let mut total: Option<Var> = None;
        let mut outputs = Vec::with_capacity(len.saturating_sub(1));
        for t in 0..len.saturating_sub(1) {
            let tokens: Vec<TokenId> = seqs.iter().map(|s| s[t]).collect();
            let targets: Vec<Option<usize>> =
                seqs.iter().map(|s| (s[t + 1] != PAD).then(|| s[t + 1] as usize - 1)).collect();
            if targets.iter().all(Option::is_none) {
                break;
            }
            let (logits, nh, nc) = self.step_on_tape(tape, &tokens, latent, h, c);
            h = nh;
            c = nc;
            let l = tape.softmax_xent(logits, &targets);
            total = Some(match total {
                Some(acc) => tape.add(acc, l),
                None => l,
            });
            outputs.push(StepOutput { logits, targets });
        }
        let total = total.unwrap_or_else(|| tape.input(vec![T::zero()]));
        (total, outputs)
    }

    /// Latent vector of width `h`.
    pub fn encode(&self, g: &VoxelGrid<T>) -> Result<Vec<T>, NnError> {
        self.check_grid(g)?;
        let mut tape = Tape::new(&self.params);
        let z = self.encode_on_tape(&mut tape, g.values().to_vec(), 1);
        Ok(tape.value(z).to_vec())
    }

    /// Latents for several grids in one batched pass.
    pub fn encode_batch(&self, grids: &[&VoxelGrid<T>]) -> Result<Vec<Vec<T>>, NnError> {
        let mut data = Vec::new();
        for g in grids {
            self.check_grid(g)?;
            data.extend_from_slice(g.values());
        }
        let mut tape = Tape::new(&self.params);
        let z = self.encode_on_tape(&mut tape, data, grids.len());
        Ok(tape.value(z).chunks(self.config.latent).map(<[T]>::to_vec).collect())
    }

    pub fn initial_state(&self, latent: &[T]) -> DecoderState<T> {
        DecoderState { h: latent.iter().map(|x| x.tanh()).collect(), c: vec![T::zero(); latent.len()] }
    }

    /// One recurrent step for a single sequence.
    pub fn decode_step(
        &self,
        state: &DecoderState<T>,
        token: TokenId,
        latent: &[T],
    ) -> Result<(Vec<T>, DecoderState<T>), NnError> {
        let (mut logits, mut states) = self.decode_steps(std::slice::from_ref(state), &[token], latent)?;
        Ok((logits.pop().expect("one row"), states.pop().expect("one row")))
    }

    /// One recurrent step for several sequences sharing a latent.
    pub fn decode_steps(
        &self,
        states: &[DecoderState<T>],
        tokens: &[TokenId],
        latent: &[T],
    ) -> Result<(Vec<Vec<T>>, Vec<DecoderState<T>>), NnError> {
        let r = self.vocab_size();
        if let Some(&bad) = tokens.iter().find(|&&t| t == 0 || t as usize > r) {
            return Err(NnError::InvalidToken(bad));
        }
        let rows = tokens.len();
        let hw = self.config.latent;
        let mut tape = Tape::new(&self.params);
        let lat = tape.input(latent.iter().copied().cycle().take(rows * hw).collect());
        let h = tape.input(states.iter().flat_map(|s| s.h.iter().copied()).collect());
        let c = tape.input(states.iter().flat_map(|s| s.c.iter().copied()).collect());
        let (logits, h, c) = self.step_on_tape(&mut tape, tokens, lat, h, c);
        let logits = tape.value(logits).chunks(r).map(<[T]>::to_vec).collect();
        let next = tape
            .value(h)
            .chunks(hw)
            .zip(tape.value(c).chunks(hw))
            .map(|(h, c)| DecoderState { h: h.to_vec(), c: c.to_vec() })
            .collect();
        Ok((logits, next))
    }

    /// Negative log-likelihood of `ids` (BOS … EOS) given the grid, summed
    /// over every predicted non-PAD token.
    pub fn sequence_loss(&self, ids: &[TokenId], g: &VoxelGrid<T>) -> Result<T, NnError> {
        self.check_grid(g)?;
        let r = self.vocab_size() as TokenId;
        if let Some(&bad) = ids.iter().find(|&&t| t == 0 || t > r) {
            return Err(NnError::InvalidToken(bad));
        }
        let mut tape = Tape::new(&self.params);
        let (loss, _) = self.loss_on_tape(&mut tape, g.values().to_vec(), &[ids.to_vec()]);
        Ok(tape.value(loss)[0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub config: CaptionerConfig,
    pub layers: usize,
    pub vocab_size: usize,
    pub vocabulary_hash: String,
    pub vocabulary: Vocabulary,
    pub epoch: Option<usize>,
}

impl<T: Real> CaptionerModel<T> {
    /// VCPT: magic, u32 version, u32 header length, JSON header, u32 tensor
    /// count, then per tensor u32 name length, name, u32 rank, u64 dims and
    /// little-endian f32 values.
    pub fn write_checkpoint<W: Write>(&self, epoch: Option<usize>, mut w: W) -> Result<(), NnError> {
        let header = CheckpointHeader {
            config: self.config.clone(),
            layers: self.config.widths.len(),
            vocab_size: self.vocab_size(),
            vocabulary_hash: self.vocabulary.hash(),
            vocabulary: self.vocabulary.clone(),
            epoch,
        };
        let json = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let mut buf = Vec::new();
        buf.extend_from_slice(VCPT_MAGIC);
        buf.extend_from_slice(&VCPT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&json);
        buf.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, t) in self.names.iter().zip(&self.params) {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                buf.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &v in &t.data {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Reads a checkpoint and checks that every tensor matches the layout
    /// implied by its header.
    pub fn read_checkpoint<R: Read>(mut r: R) -> Result<(Self, CheckpointHeader), NnError> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let bad = |m: &str| NnError::Checkpoint(m.to_string());
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8], NnError> {
            let end = pos.checked_add(n).filter(|&e| e <= buf.len()).ok_or_else(|| bad("truncated"))?;
            let s = &buf[pos..end];
            pos = end;
            Ok(s)
        };
        if take(4)? != VCPT_MAGIC {
            return Err(bad("bad magic"));
        }
        let u32_at = |s: &[u8]| u32::from_le_bytes(s.try_into().expect("4 bytes"));
        let version = u32_at(take(4)?);
        if version != VCPT_VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let hlen = u32_at(take(4)?) as usize;
        let header: CheckpointHeader =
            serde_json::from_slice(take(hlen)?).map_err(|e| NnError::Checkpoint(format!("header: {e}")))?;
        if header.vocabulary.hash() != header.vocabulary_hash || header.vocabulary.len() != header.vocab_size {
            return Err(bad("vocabulary does not match its hash or size"));
        }
        let mut model = CaptionerModel::<T>::new(header.config.clone(), header.vocabulary.clone(), 0)?;
        let count = u32_at(take(4)?) as usize;
        if count != model.params.len() {
            return Err(NnError::Checkpoint(format!("expected {} tensors, found {count}", model.params.len())));
        }
        for i in 0..count {
            let nlen = u32_at(take(4)?) as usize;
            let name = String::from_utf8(take(nlen)?.to_vec()).map_err(|_| bad("tensor name is not UTF-8"))?;
            let rank = u32_at(take(4)?) as usize;
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize);
            }
            if name != model.names[i] || shape != model.params[i].shape {
                return Err(NnError::Checkpoint(format!(
                    "tensor {i}: found {name} {shape:?}, expected {} {:?}",
                    model.names[i], model.params[i].shape
                )));
            }
            let n = model.params[i].len();
            let raw = take(n * 4)?;
            for (v, chunk) in model.params[i].data.iter_mut().zip(raw.chunks_exact(4)) {
                *v = T::lit(f64::from(f32::from_le_bytes(chunk.try_into().expect("4 bytes"))));
            }
        }
        if pos != buf.len() {
            return Err(bad("trailing bytes"));
        }
        Ok((model, header))
    }
}
