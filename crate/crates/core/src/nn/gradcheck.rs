//! Central finite differences against the tape gradient.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::chem::TokenId;
use crate::voxel::VoxelGrid;

use super::model::CaptionerModel;
use super::tape::Tape;
use super::train::pad_batch;
use super::NnError;

/// Largest parameter count accepted.
pub const MAX_CHECK_PARAMETERS: usize = 5000;
/// Denominator floor of the relative error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub step: f64,
    /// `(parameter name, flat index)` of the worst coordinate.
    pub worst: (String, usize),
}

/// Flat coordinate `(tensor, offset)` for a global parameter index.
fn locate(model: &CaptionerModel<f64>, mut k: usize) -> (usize, usize) {
    for (i, p) in model.params().iter().enumerate() {
        if k < p.len() {
            return (i, k);
        }
        k -= p.len();
    }
    unreachable!("index within parameter count")
}

/// Summed batch loss and its gradient.
pub fn loss_and_gradient(
    model: &CaptionerModel<f64>,
    grids: &[VoxelGrid<f64>],
    seqs: &[Vec<TokenId>],
) -> Result<(f64, Vec<Option<Vec<f64>>>), NnError> {
    let data = batch_data(model, grids)?;
    let padded = pad_batch(&seqs.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let mut tape = Tape::new(model.params());
    let (loss, _) = model.loss_on_tape(&mut tape, data, &padded);
    let value = tape.value(loss)[0];
    Ok((value, tape.backward(loss)))
}

fn batch_data(model: &CaptionerModel<f64>, grids: &[VoxelGrid<f64>]) -> Result<Vec<f64>, NnError> {
    let mut data = Vec::new();
    for g in grids {
        model.check_grid(g)?;
        data.extend_from_slice(g.values());
    }
    Ok(data)
}

/// Summed batch loss with one coordinate shifted by `delta`.
pub fn perturbed_loss(
    model: &CaptionerModel<f64>,
    grids: &[VoxelGrid<f64>],
    seqs: &[Vec<TokenId>],
    coordinate: usize,
    delta: f64,
) -> Result<f64, NnError> {
    let mut m = model.clone();
    let (t, o) = locate(model, coordinate);
    m.params_mut()[t].data[o] += delta;
    let data = batch_data(&m, grids)?;
    let padded = pad_batch(&seqs.iter().map(Vec::as_slice).collect::<Vec<_>>());
    let mut tape = Tape::new(m.params());
    let (loss, _) = m.loss_on_tape(&mut tape, data, &padded);
    Ok(tape.value(loss)[0])
}

/// Max relative error `|a − n| / max(|a|, |n|, 1e-6)` over `subset`
/// randomly chosen coordinates, with central differences at `step`.
pub fn gradient_check(
    model: &CaptionerModel<f64>,
    grids: &[VoxelGrid<f64>],
    seqs: &[Vec<TokenId>],
    step: f64,
    subset: usize,
    seed: u64,
) -> Result<GradCheckReport, NnError> {
    let n = model.parameter_count();
    if n > MAX_CHECK_PARAMETERS {
        return Err(NnError::InvalidConfig(format!("{n} parameters exceed the {MAX_CHECK_PARAMETERS} limit")));
    }
    if grids.len() != seqs.len() || grids.is_empty() {
        return Err(NnError::InvalidConfig("need one grid per sequence".into()));
    }
    let (_, grads) = loss_and_gradient(model, grids, seqs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picks = sample(&mut rng, n, subset.min(n)).into_vec();
    let mut worst = (0.0f64, 0usize);
    for &k in &picks {
        let (t, o) = locate(model, k);
        let analytic = grads[t].as_ref().map_or(0.0, |g| g[o]);
        let numeric = (perturbed_loss(model, grids, seqs, k, step)? - perturbed_loss(model, grids, seqs, k, -step)?)
            / (2.0 * step);
        let err = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        if err > worst.0 || picks.len() == 1 {
            worst = (err, k);
        }
    }
    let (t, o) = locate(model, worst.1);
    Ok(GradCheckReport {
        max_relative_error: worst.0,
        checked: picks.len(),
        step,
        worst: (model.names()[t].clone(), o),
    })
}
