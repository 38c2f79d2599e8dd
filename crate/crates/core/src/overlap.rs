//! Gaussian shape/colour overlap scoring with rigid-body alignment.
//!
//! Every point carries an isotropic Gaussian `p·exp(−α‖x − c‖²)` with
//! `α = 1/(0.93·r)²` and `p = 2√2`. The overlap of two clouds is the sum of
//! the closed-form pairwise integrals. Shape uses the heavy-atom channel;
//! colour sums same-channel overlaps across the six feature channels.

use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::chem::Molecule;
use crate::geometry::{mat_mul, mat_vec, symmetric_eigen, transpose, Mat3, Quaternion, RigidTransform};
use crate::pharmacophore::{perceive, Channel, PharmacophoreError, PharmacophoreProfile};
use crate::scalar::{add3, dist2, sub3, Real, Vec3};
use crate::voxel::KERNEL_WIDTH;

/// Combo score at or above which a candidate counts as a hit.
pub const HIT_THRESHOLD: f64 = 1.2;

/// Gaussian amplitude.
pub const AMPLITUDE: f64 = 2.0 * std::f64::consts::SQRT_2;

/// Pairs whose exponent exceeds this contribute below `e^-40` and are skipped.
const EXPONENT_CUTOFF: f64 = 40.0;

/// Process-wide count of completed conformer alignments, for auditing
/// comparison counts. Concurrent callers share it.
static ALIGNMENTS: AtomicUsize = AtomicUsize::new(0);

pub fn alignment_count() -> usize {
    ALIGNMENTS.load(Ordering::Relaxed)
}

pub fn is_hit(combo: f64) -> bool {
    combo >= HIT_THRESHOLD
}

#[derive(Debug, Error)]
pub enum OverlapError {
    #[error("{0} profile has no shape points")]
    EmptyShape(&'static str),
    #[error(transparent)]
    Pharmacophore(#[from] PharmacophoreError),
}

/// Pairwise-sum Gaussian overlap of `a` with `t(b)` at unit radius.
pub fn gaussian_overlap<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>], t: &RigidTransform<T>) -> T {
    gaussian_overlap_radius(a, b, t, T::one())
}

pub fn gaussian_overlap_radius<T: Real>(a: &[Vec3<T>], b: &[Vec3<T>], t: &RigidTransform<T>, radius: T) -> T {
    let k = Kernel::new(radius);
    k.prefactor * k.sum(a, &t.apply_all(b))
}

/// Equal-radius kernel: each pair contributes `prefactor · exp(−β d²)`.
#[derive(Debug, Clone, Copy)]
struct Kernel<T> {
    beta: T,
    prefactor: T,
}

impl<T: Real> Kernel<T> {
    fn new(radius: T) -> Self {
        let w = T::lit(KERNEL_WIDTH) * radius;
        let alpha = T::one() / (w * w);
        let p = T::lit(AMPLITUDE);
        let pi = T::lit(std::f64::consts::PI);
        Kernel { beta: alpha * T::lit(0.5), prefactor: p * p * (pi / (alpha + alpha)).powf(T::lit(1.5)) }
    }

    /// `Σ exp(−β‖a_i − b_j‖²)` without the prefactor.
    fn sum(&self, a: &[Vec3<T>], b: &[Vec3<T>]) -> T {
        let cutoff = T::lit(EXPONENT_CUTOFF);
        let mut s = T::zero();
        for &p in a {
            for &q in b {
                let e = self.beta * dist2(p, q);
                if e < cutoff {
                    s = s + (-e).exp();
                }
            }
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapScore<T> {
    pub shape: T,
    pub color: T,
    /// Always `shape + color`.
    pub combo: T,
    /// Maps the candidate onto the query frame.
    pub transform: RigidTransform<T>,
}

impl<T: Real> OverlapScore<T> {
    pub fn is_hit(&self) -> bool {
        is_hit(self.combo.as_f64())
    }
}

fn tanimoto<T: Real>(qq: T, cc: T, qc: T) -> T {
    let denom = qq + cc - qc;
    if denom <= T::zero() {
        return T::zero();
    }
    (qc / denom).max(T::zero()).min(T::one())
}

/// Profile split into shape and feature clouds with cached self-overlaps.
struct Prepared<T> {
    shape: Vec<Vec3<T>>,
    features: Vec<Vec<Vec3<T>>>,
    self_shape: T,
    self_color: T,
}

impl<T: Real> Prepared<T> {
    fn new(p: &PharmacophoreProfile<T>, k: &Kernel<T>) -> Self {
        let shape = p.channel(Channel::Shape).to_vec();
        let features: Vec<Vec<Vec3<T>>> = Channel::FEATURES.iter().map(|&c| p.channel(c).to_vec()).collect();
        let self_shape = k.sum(&shape, &shape);
        let self_color = features.iter().fold(T::zero(), |acc, f| acc + k.sum(f, f));
        Prepared { shape, features, self_shape, self_color }
    }

    fn has_features(&self) -> bool {
        self.features.iter().any(|f| !f.is_empty())
    }
}

struct Scorer<T> {
    kernel: Kernel<T>,
    query: Prepared<T>,
    cand: Prepared<T>,
    color_defined: bool,
}

impl<T: Real> Scorer<T> {
    fn new(q: &PharmacophoreProfile<T>, c: &PharmacophoreProfile<T>) -> Self {
        let kernel = Kernel::new(T::one());
        let query = Prepared::new(q, &kernel);
        let cand = Prepared::new(c, &kernel);
        let color_defined = query.has_features() || cand.has_features();
        Scorer { kernel, query, cand, color_defined }
    }

    /// `(shape, color)` Tanimoto values with the candidate moved by `r·x + t`.
    fn evaluate(&self, r: &Mat3<T>, t: Vec3<T>) -> (T, T) {
        let mv = |pts: &[Vec3<T>]| -> Vec<Vec3<T>> { pts.iter().map(|&p| add3(mat_vec(r, p), t)).collect() };
        let qc = self.kernel.sum(&self.query.shape, &mv(&self.cand.shape));
        let shape = tanimoto(self.query.self_shape, self.cand.self_shape, qc);
        let color = if self.color_defined {
            let mut qc = T::zero();
            for (qf, cf) in self.query.features.iter().zip(&self.cand.features) {
                if !qf.is_empty() && !cf.is_empty() {
                    qc = qc + self.kernel.sum(qf, &mv(cf));
                }
            }
            tanimoto(self.query.self_color, self.cand.self_color, qc)
        } else {
            T::zero()
        };
        (shape, color)
    }

    fn score(&self, t: &RigidTransform<T>) -> OverlapScore<T> {
        let (shape, color) = self.evaluate(&t.matrix(), t.translation);
        OverlapScore { shape, color, combo: shape + color, transform: *t }
    }
}

/// Scores `c` against `q` under a fixed transform, without optimization.
pub fn score_transform<T: Real>(
    q: &PharmacophoreProfile<T>,
    c: &PharmacophoreProfile<T>,
    t: &RigidTransform<T>,
) -> OverlapScore<T> {
    Scorer::new(q, c).score(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignOptions {
    /// Simplex iterations per start.
    pub max_iterations: usize,
    /// A start stops once the simplex spans less than this in combo.
    pub tolerance: f64,
    /// Initial simplex edge along each rotation-vector axis, radians.
    pub rotation_step: f64,
    /// Initial simplex edge along each translation axis, Å.
    pub translation_step: f64,
}

impl Default for AlignOptions {
    fn default() -> Self {
        AlignOptions { max_iterations: 300, tolerance: 1e-4, rotation_step: 0.35, translation_step: 0.5 }
    }
}

/// Principal axes as right-handed columns, largest variance first.
fn principal_axes<T: Real>(centered: &[Vec3<T>]) -> Mat3<T> {
    let mut cov = [[T::zero(); 3]; 3];
    for p in centered {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] = cov[i][j] + p[i] * p[j];
            }
        }
    }
    let (_, mut v) = symmetric_eigen(&cov);
    if crate::geometry::determinant(&v) < T::zero() {
        for row in v.iter_mut() {
            row[2] = -row[2];
        }
    }
    v
}

fn flips<T: Real>() -> [Mat3<T>; 4] {
    let (o, z) = (T::one(), T::zero());
    let d = |a: T, b: T, c: T| [[a, z, z], [z, b, z], [z, z, c]];
    [d(o, o, o), d(o, -o, -o), d(-o, o, -o), d(-o, -o, o)]
}

/// Best-scoring alignment of `c` onto `q` with the default options.
pub fn align<T: Real>(q: &PharmacophoreProfile<T>, c: &PharmacophoreProfile<T>) -> Result<RigidTransform<T>, OverlapError> {
    Ok(score_profiles(q, c)?.transform)
}

pub fn score_profiles<T: Real>(
    q: &PharmacophoreProfile<T>,
    c: &PharmacophoreProfile<T>,
) -> Result<OverlapScore<T>, OverlapError> {
    let s = align_with(q, c, &AlignOptions::default())?;
    ALIGNMENTS.fetch_add(1, Ordering::Relaxed);
    Ok(s)
}

/// Four principal-axes starts, each refined by a Nelder–Mead simplex over
/// rotation vector and translation. Deterministic.
pub fn align_with<T: Real>(
    q: &PharmacophoreProfile<T>,
    c: &PharmacophoreProfile<T>,
    opts: &AlignOptions,
) -> Result<OverlapScore<T>, OverlapError> {
    let cq = q.shape_centroid().ok_or(OverlapError::EmptyShape("query"))?;
    let cc = c.shape_centroid().ok_or(OverlapError::EmptyShape("candidate"))?;
    let centered_q: Vec<Vec3<T>> = q.channel(Channel::Shape).iter().map(|&p| sub3(p, cq)).collect();
    let centered_c = c.transformed(&RigidTransform::new(Quaternion::identity(), [-cc[0], -cc[1], -cc[2]]));
    let eq = principal_axes(&centered_q);
    let ec = principal_axes(centered_c.channel(Channel::Shape));
    let scorer = Scorer::new(q, &centered_c);

    let mut best: Option<(T, Mat3<T>, Vec3<T>)> = None;
    for flip in flips::<T>() {
        let r0 = mat_mul(&eq, &mat_mul(&flip, &transpose(&ec)));
        let objective = |v: &[T; 6]| -> T {
            let r = mat_mul(&crate::geometry::rotation_from_vector([v[0], v[1], v[2]]), &r0);
            let t = [cq[0] + v[3], cq[1] + v[4], cq[2] + v[5]];
            let (s, col) = scorer.evaluate(&r, t);
            -(s + col)
        };
        let rs = T::lit(opts.rotation_step);
        let ts = T::lit(opts.translation_step);
        let (v, f) = nelder_mead(objective, [rs, rs, rs, ts, ts, ts], opts.max_iterations, T::lit(opts.tolerance));
        if best.as_ref().map_or(true, |b| f < b.0) {
            let r = mat_mul(&crate::geometry::rotation_from_vector([v[0], v[1], v[2]]), &r0);
            best = Some((f, r, [v[3], v[4], v[5]]));
        }
    }
    let (_, r, dt) = best.expect("four starts");
    // x ↦ R(x − cc) + cq + dt
    let rc = mat_vec(&r, cc);
    let t = [cq[0] + dt[0] - rc[0], cq[1] + dt[1] - rc[1], cq[2] + dt[2] - rc[2]];
    let transform = RigidTransform::from_matrix(&r, t);
    // Rescore in the original frame so the reported score matches the transform.
    Ok(Scorer::new(q, c).score(&transform))
}

/// Minimizes `f` from the origin. Stops when the spread of simplex values
/// drops below `tol` or after `max_iter` iterations.
fn nelder_mead<T: Real, F: Fn(&[T; 6]) -> T>(f: F, steps: [T; 6], max_iter: usize, tol: T) -> ([T; 6], T) {
    const N: usize = 6;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let mut simplex: Vec<([T; N], T)> = Vec::with_capacity(N + 1);
    let origin = [T::zero(); N];
    simplex.push((origin, f(&origin)));
    for (i, &s) in steps.iter().enumerate() {
        let mut x = origin;
        x[i] = s;
        simplex.push((x, f(&x)));
    }
    let lerp = |a: &[T; N], b: &[T; N], t: T| -> [T; N] { std::array::from_fn(|i| a[i] + t * (b[i] - a[i])) };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[N].1 - simplex[0].1 < tol {
            break;
        }
        let mut centroid = [T::zero(); N];
        for (x, _) in &simplex[..N] {
            for i in 0..N {
                centroid[i] = centroid[i] + x[i];
            }
        }
        let inv = T::one() / T::lit(N as f64);
        centroid.iter_mut().for_each(|c| *c = *c * inv);
        let worst = simplex[N];
        let xr = lerp(&centroid, &worst.0, -T::one());
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = lerp(&centroid, &worst.0, -two);
            let fe = f(&xe);
            simplex[N] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[N - 1].1 {
            simplex[N] = (xr, fr);
            continue;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = lerp(&centroid, &xr, half);
            (x, f(&x))
        } else {
            let x = lerp(&centroid, &worst.0, half);
            (x, f(&x))
        };
        if fc < worst.1.min(fr) {
            simplex[N] = (xc, fc);
            continue;
        }
        let best = simplex[0].0;
        for v in simplex.iter_mut().skip(1) {
            let x = lerp(&best, &v.0, half);
            *v = (x, f(&x));
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    simplex[0]
}

/// Aligned combo score of two conformers.
pub fn tanimoto_combo(q: &Molecule, c: &Molecule) -> Result<OverlapScore<f64>, OverlapError> {
    let qp = perceive::<f64>(q)?;
    let cp = perceive::<f64>(c)?;
    score_profiles(&qp, &cp)
}

/// Best conformer of one candidate, or `None` when it has no conformers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BestScore {
    pub score: OverlapScore<f64>,
    pub conformer: usize,
    /// Number of conformer alignments executed.
    pub comparisons: usize,
}

/// Per candidate, the highest combo over its conformers; candidates with no
/// conformers map to `None`. Output order follows input order.
pub fn best_tc(q: &Molecule, cands: &[Vec<Molecule>]) -> Result<Vec<Option<BestScore>>, OverlapError> {
    let qp = perceive::<f64>(q)?;
    let profiles: Vec<Vec<PharmacophoreProfile<f64>>> = cands
        .iter()
        .map(|confs| confs.iter().map(perceive::<f64>).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;
    best_tc_profiles(&qp, &profiles)
}

pub fn best_tc_profiles(
    q: &PharmacophoreProfile<f64>,
    cands: &[Vec<PharmacophoreProfile<f64>>],
) -> Result<Vec<Option<BestScore>>, OverlapError> {
    cands.par_iter().map(|confs| best_over_conformers(q, confs)).collect()
}

fn best_over_conformers(
    q: &PharmacophoreProfile<f64>,
    confs: &[PharmacophoreProfile<f64>],
) -> Result<Option<BestScore>, OverlapError> {
    let mut best: Option<BestScore> = None;
    for (i, c) in confs.iter().enumerate() {
        let s = score_profiles(q, c)?;
        // Strict comparison keeps the earliest conformer on ties.
        if best.map_or(true, |b| s.combo > b.score.combo) {
            best = Some(BestScore { score: s, conformer: i, comparisons: 0 });
        }
    }
    Ok(best.map(|b| BestScore { comparisons: confs.len(), ..b }))
}
