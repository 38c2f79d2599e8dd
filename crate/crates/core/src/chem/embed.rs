//! Crude deterministic 3D embedder.
//!
//! 1. Distance targets: bond lengths from the data table, 1-3 distances from
//!    hybridization angles (sp3 109.5°, sp2 120°, sp 180°; ring polygon
//!    angles for rings of five or fewer atoms), full regular-polygon distance
//!    sets for planar rings, and lower bounds for pairs three or more bonds
//!    apart.
//! 2. Seeded random start in four dimensions, minimized with L-BFGS, then
//!    minimized again with the fourth coordinate penalized to zero.
//! 3. Torsion grid over {-60°, 60°, 180°} for every rotatable bond (all
//!    assignments if there are at most `torsion_budget`, otherwise that many
//!    seeded draws). Assignments are ranked by a pairwise 1/d² clash score.
//! 4. Validation of bond lengths and heavy-atom contacts; a failed attempt
//!    restarts from new random coordinates.

use std::collections::{HashMap, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::element::Element;
use super::molecule::{BondOrder, Molecule};
use super::tables::tables;
use super::ChemError;

const DIM: usize = 4;
const TORSIONS_DEG: [f64; 3] = [-60.0, 60.0, 180.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedOptions {
    /// Random restarts before giving up.
    pub max_attempts: usize,
    /// Torsion assignments scored per attempt.
    pub torsion_budget: usize,
    pub max_heavy_atoms: usize,
    /// Allowed deviation of bonded distances from the table, Å.
    pub bond_tolerance: f64,
    /// Minimum non-bonded heavy-atom distance, Å.
    pub min_nonbonded: f64,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        EmbedOptions {
            max_attempts: 8,
            torsion_budget: 200,
            max_heavy_atoms: 80,
            bond_tolerance: 0.08,
            min_nonbonded: 1.2,
        }
    }
}

/// Table bond length in Å.
pub fn bond_length(a: Element, b: Element, order: BondOrder) -> f64 {
    tables().bond_length(a, b, order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Hybrid {
    Sp,
    Sp2,
    Sp3,
}

fn hybridization(m: &Molecule, i: usize) -> Hybrid {
    // Four or more substituents (sulfonyl, phosphoryl) are tetrahedral.
    if m.degree(i) + m.atom(i).hydrogens as usize >= 4 {
        return Hybrid::Sp3;
    }
    let mut doubles = 0;
    let mut aromatic = false;
    for &(_, e) in m.neighbors(i) {
        let b = &m.bonds()[e];
        if b.order == BondOrder::Aromatic {
            aromatic = true;
        }
        match b.kekule {
            3 => return Hybrid::Sp,
            2 => doubles += 1,
            _ => {}
        }
    }
    match doubles {
        0 if !aromatic => Hybrid::Sp3,
        0 | 1 => Hybrid::Sp2,
        _ => Hybrid::Sp,
    }
}

fn hybrid_angle(h: Hybrid) -> f64 {
    match h {
        Hybrid::Sp => 180.0,
        Hybrid::Sp2 => 120.0,
        Hybrid::Sp3 => 109.47,
    }
}

#[derive(Debug, Clone, Copy)]
struct Target {
    i: usize,
    j: usize,
    d: f64,
    w: f64,
    lower_only: bool,
}

fn topological_distances(m: &Molecule) -> Vec<Vec<usize>> {
    let n = m.atom_count();
    let mut all = vec![vec![usize::MAX; n]; n];
    for (s, dist) in all.iter_mut().enumerate() {
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &(v, _) in m.neighbors(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    q.push_back(v);
                }
            }
        }
    }
    all
}

fn bond_target(m: &Molecule, e: usize) -> f64 {
    let b = &m.bonds()[e];
    bond_length(m.atom(b.a).element, m.atom(b.b).element, b.order)
}

fn key(i: usize, j: usize) -> (usize, usize) {
    (i.min(j), i.max(j))
}

fn build_targets(m: &Molecule, topo: &[Vec<usize>]) -> Vec<Target> {
    let n = m.atom_count();
    let mut exact: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for (e, b) in m.bonds().iter().enumerate() {
        exact.insert(key(b.a, b.b), (bond_target(m, e), 100.0));
    }

    // Planar rings: every in-ring pair from the regular polygon.
    for ring in m.rings() {
        let planar = ring.iter().all(|&a| hybridization(m, a) != Hybrid::Sp3);
        if !planar {
            continue;
        }
        let r = ring.len();
        let mean_side: f64 = (0..r)
            .map(|k| {
                let e = m.bond_between(ring[k], ring[(k + 1) % r]).expect("ring bond");
                bond_target(m, e)
            })
            .sum::<f64>()
            / r as f64;
        let step = std::f64::consts::PI / r as f64;
        let radius = mean_side / (2.0 * step.sin());
        for a in 0..r {
            for b in a + 2..r {
                let sep = (b - a).min(r - (b - a));
                if sep < 2 {
                    continue;
                }
                let d = 2.0 * radius * (sep as f64 * step).sin();
                exact.entry(key(ring[a], ring[b])).or_insert((d, 10.0));
            }
        }
    }

    // Angles at each center.
    for j in 0..n {
        let nb: Vec<(usize, usize)> = m.neighbors(j).to_vec();
        if nb.len() < 2 {
            continue;
        }
        let hyb = hybridization(m, j);
        let small_ring_angle = |a: usize, c: usize| -> Option<f64> {
            m.rings()
                .iter()
                .filter(|r| r.len() <= 5 && r.contains(&a) && r.contains(&c) && r.contains(&j))
                .map(|r| (r.len() as f64 - 2.0) * 180.0 / r.len() as f64)
                .next()
        };
        // sp2 centers with one small-ring angle split the remainder evenly.
        let mut ring_angle_at_j = None;
        for x in 0..nb.len() {
            for y in x + 1..nb.len() {
                if let Some(a) = small_ring_angle(nb[x].0, nb[y].0) {
                    ring_angle_at_j = Some(a);
                }
            }
        }
        for x in 0..nb.len() {
            for y in x + 1..nb.len() {
                let (a, ea) = nb[x];
                let (c, ec) = nb[y];
                let theta = match small_ring_angle(a, c) {
                    Some(t) => t,
                    None => match (hyb, ring_angle_at_j) {
                        (Hybrid::Sp2, Some(r)) if nb.len() == 3 => (360.0 - r) / 2.0,
                        _ => hybrid_angle(hyb),
                    },
                };
                let (la, lc) = (bond_target(m, ea), bond_target(m, ec));
                let d = (la * la + lc * lc - 2.0 * la * lc * theta.to_radians().cos()).sqrt();
                exact.entry(key(a, c)).or_insert((d, 10.0));
            }
        }
    }

    let mut targets: Vec<Target> = exact
        .into_iter()
        .map(|((i, j), (d, w))| Target { i, j, d, w, lower_only: false })
        .collect();
    targets.sort_by_key(|t| (t.i, t.j));
    let have: HashSet<(usize, usize)> = targets.iter().map(|t| (t.i, t.j)).collect();
    for i in 0..n {
        for j in i + 1..n {
            if have.contains(&(i, j)) {
                continue;
            }
            let sep = topo[i][j];
            let lb = match sep {
                usize::MAX => 4.0,
                0..=2 => continue,
                3 => 2.4,
                _ => 2.9,
            };
            let hydrogen = m.atom(i).element == Element::H || m.atom(j).element == Element::H;
            let lb = if hydrogen { lb - 0.6 } else { lb };
            targets.push(Target { i, j, d: lb, w: 1.0, lower_only: true });
        }
    }
    targets
}

fn energy(targets: &[Target], x: &[f64], w4: f64, grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut e = 0.0;
    for t in targets {
        let (pi, pj) = (t.i * DIM, t.j * DIM);
        let mut diff = [0.0; DIM];
        let mut d2 = 0.0;
        for k in 0..DIM {
            diff[k] = x[pi + k] - x[pj + k];
            d2 += diff[k] * diff[k];
        }
        let d = d2.sqrt().max(1e-9);
        let r = d - t.d;
        if t.lower_only && r >= 0.0 {
            continue;
        }
        e += t.w * r * r;
        let s = 2.0 * t.w * r / d;
        for k in 0..DIM {
            grad[pi + k] += s * diff[k];
            grad[pj + k] -= s * diff[k];
        }
    }
    if w4 > 0.0 {
        for a in 0..x.len() / DIM {
            let v = x[a * DIM + 3];
            e += w4 * v * v;
            grad[a * DIM + 3] += 2.0 * w4 * v;
        }
    }
    e
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking.
fn lbfgs(x: &mut [f64], max_iter: usize, mut f: impl FnMut(&[f64], &mut [f64]) -> f64) -> f64 {
    const MEM: usize = 8;
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut fx = f(x, &mut g);
    let mut s_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut y_hist: VecDeque<Vec<f64>> = VecDeque::new();
    let mut x_new = vec![0.0; n];
    let mut g_new = vec![0.0; n];
    for _ in 0..max_iter {
        if g.iter().all(|v| v.abs() < 1e-7) {
            break;
        }
        // Two-loop recursion.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(s_hist.len());
        for (s, y) in s_hist.iter().zip(&y_hist).rev() {
            let rho = 1.0 / dot(y, s);
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push((a, rho));
        }
        if let (Some(s), Some(y)) = (s_hist.back(), y_hist.back()) {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y), (a, rho)) in s_hist.iter().zip(&y_hist).zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut dir: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
            s_hist.clear();
            y_hist.clear();
        }
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            for k in 0..n {
                x_new[k] = x[k] + step * dir[k];
            }
            let f_new = f(&x_new, &mut g_new);
            if f_new <= fx + 1e-4 * step * slope {
                let s: Vec<f64> = (0..n).map(|k| x_new[k] - x[k]).collect();
                let y: Vec<f64> = (0..n).map(|k| g_new[k] - g[k]).collect();
                if dot(&s, &y) > 1e-12 {
                    s_hist.push_back(s);
                    y_hist.push_back(y);
                    if s_hist.len() > MEM {
                        s_hist.pop_front();
                        y_hist.pop_front();
                    }
                }
                let converged = (fx - f_new).abs() < 1e-14 * (1.0 + fx.abs());
                x.copy_from_slice(&x_new);
                g.copy_from_slice(&g_new);
                fx = f_new;
                accepted = true;
                if converged {
                    return fx;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    fx
}

fn relax(targets: &[Target], n: usize, rng: &mut ChaCha8Rng) -> Vec<[f64; 3]> {
    let side = 1.5 * (n as f64).cbrt().max(1.0);
    let mut x: Vec<f64> = (0..n * DIM).map(|_| rng.gen_range(-side..side)).collect();
    lbfgs(&mut x, 2000, |x, g| energy(targets, x, 0.0, g));
    lbfgs(&mut x, 2000, |x, g| energy(targets, x, 10.0, g));
    (0..n).map(|a| [x[a * DIM], x[a * DIM + 1], x[a * DIM + 2]]).collect()
}

struct Rotor {
    j: usize,
    k: usize,
    i_ref: usize,
    l_ref: usize,
    moving: Vec<usize>,
}

fn rotors(m: &Molecule) -> Vec<Rotor> {
    let heavy = |a: usize| m.atom(a).element != Element::H;
    let mut out = Vec::new();
    for (e, b) in m.bonds().iter().enumerate() {
        if b.kekule != 1 || b.order != BondOrder::Single || m.is_ring_bond(e) {
            continue;
        }
        let (j, k) = (b.a, b.b);
        if !heavy(j) || !heavy(k) || m.heavy_degree(j) < 2 || m.heavy_degree(k) < 2 {
            continue;
        }
        if hybridization(m, j) == Hybrid::Sp || hybridization(m, k) == Hybrid::Sp {
            continue;
        }
        let first_heavy = |c: usize, skip: usize| {
            m.neighbors(c)
                .iter()
                .map(|&(v, _)| v)
                .filter(|&v| v != skip && heavy(v))
                .min()
                .expect("heavy degree >= 2")
        };
        let mut seen = vec![false; m.atom_count()];
        seen[j] = true;
        seen[k] = true;
        let mut moving = vec![k];
        let mut stack = vec![k];
        while let Some(u) = stack.pop() {
            for &(v, _) in m.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    moving.push(v);
                    stack.push(v);
                }
            }
        }
        out.push(Rotor { j, k, i_ref: first_heavy(j, k), l_ref: first_heavy(k, j), moving });
    }
    out
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Dihedral angle p0-p1-p2-p3 in radians, (-π, π].
pub(crate) fn dihedral(p0: [f64; 3], p1: [f64; 3], p2: [f64; 3], p3: [f64; 3]) -> f64 {
    let b1 = sub(p1, p0);
    let b2 = sub(p2, p1);
    let b3 = sub(p3, p2);
    let n1 = cross(b1, b2);
    let n2 = cross(b2, b3);
    let b2n = dot3(b2, b2).sqrt();
    let y = b2n * dot3(b1, n2);
    let x = dot3(n1, n2);
    y.atan2(x)
}

/// Rotates `idx` atoms about the axis through `a` toward `b` by `angle`
/// (right-handed).
fn rotate_about(coords: &mut [[f64; 3]], a: [f64; 3], b: [f64; 3], angle: f64, idx: &[usize]) {
    let axis = sub(b, a);
    let len = dot3(axis, axis).sqrt();
    let u = [axis[0] / len, axis[1] / len, axis[2] / len];
    let (s, c) = angle.sin_cos();
    for &t in idx {
        let v = sub(coords[t], a);
        let uxv = cross(u, v);
        let uv = dot3(u, v);
        for d in 0..3 {
            coords[t][d] = a[d] + v[d] * c + uxv[d] * s + u[d] * uv * (1.0 - c);
        }
    }
}

fn set_dihedral(coords: &mut [[f64; 3]], r: &Rotor, target: f64) {
    let current = dihedral(coords[r.i_ref], coords[r.j], coords[r.k], coords[r.l_ref]);
    let (a, b) = (coords[r.j], coords[r.k]);
    rotate_about(coords, a, b, target - current, &r.moving);
}

fn clash_score(m: &Molecule, coords: &[[f64; 3]], topo: &[Vec<usize>]) -> f64 {
    let n = m.atom_count();
    let mut s = 0.0;
    for i in 0..n {
        if m.atom(i).element == Element::H {
            continue;
        }
        for j in i + 1..n {
            if m.atom(j).element == Element::H || topo[i][j] < 3 {
                continue;
            }
            let d2 = dot3(sub(coords[i], coords[j]), sub(coords[i], coords[j]));
            s += 1.0 / d2.max(1e-6);
        }
    }
    s
}

fn bonds_ok(m: &Molecule, coords: &[[f64; 3]], tol: f64) -> bool {
    m.bonds().iter().enumerate().all(|(e, b)| {
        let d = dot3(sub(coords[b.a], coords[b.b]), sub(coords[b.a], coords[b.b])).sqrt();
        (d - bond_target(m, e)).abs() <= tol
    })
}

fn contacts_ok(m: &Molecule, coords: &[[f64; 3]], min: f64) -> bool {
    let n = m.atom_count();
    for i in 0..n {
        if m.atom(i).element == Element::H {
            continue;
        }
        for j in i + 1..n {
            if m.atom(j).element == Element::H || m.bond_between(i, j).is_some() {
                continue;
            }
            if dot3(sub(coords[i], coords[j]), sub(coords[i], coords[j])) < min * min {
                return false;
            }
        }
    }
    true
}

fn assignments(k: usize, budget: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<u8>> {
    let total = 3usize.checked_pow(k as u32).filter(|&t| t <= budget);
    match total {
        Some(t) => (0..t)
            .map(|mut c| {
                (0..k)
                    .map(|_| {
                        let d = (c % 3) as u8;
                        c /= 3;
                        d
                    })
                    .collect()
            })
            .collect(),
        None => {
            let mut seen = HashSet::new();
            let mut out = Vec::new();
            for _ in 0..budget {
                let a: Vec<u8> = (0..k).map(|_| rng.gen_range(0..3u8)).collect();
                if seen.insert(a.clone()) {
                    out.push(a);
                }
            }
            out
        }
    }
}

/// Up to `count` conformers from distinct torsion assignments, best clash
/// score first. Rigid molecules yield a single conformer.
pub fn embed_conformers(
    m: &Molecule,
    count: usize,
    seed: u64,
    opts: &EmbedOptions,
) -> Result<Vec<Molecule>, ChemError> {
    if m.atom_count() == 0 {
        return Err(ChemError::Embedding("empty molecule".into()));
    }
    if !m.is_connected() {
        return Err(ChemError::Embedding("molecule is not connected".into()));
    }
    if m.heavy_atom_count() > opts.max_heavy_atoms {
        return Err(ChemError::Embedding(format!(
            "{} heavy atoms exceeds the limit of {}",
            m.heavy_atom_count(),
            opts.max_heavy_atoms
        )));
    }
    let topo = topological_distances(m);
    let targets = build_targets(m, &topo);
    let rotors = rotors(m);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..opts.max_attempts {
        let base = relax(&targets, m.atom_count(), &mut rng);
        if !bonds_ok(m, &base, opts.bond_tolerance) {
            continue;
        }
        let mut scored: Vec<(f64, usize, Vec<[f64; 3]>)> = Vec::new();
        for (idx, assignment) in assignments(rotors.len(), opts.torsion_budget, &mut rng)
            .into_iter()
            .enumerate()
        {
            let mut c = base.clone();
            for (r, &t) in rotors.iter().zip(&assignment) {
                set_dihedral(&mut c, r, TORSIONS_DEG[t as usize].to_radians());
            }
            if !contacts_ok(m, &c, opts.min_nonbonded) || !bonds_ok(m, &c, opts.bond_tolerance) {
                continue;
            }
            scored.push((clash_score(m, &c, &topo), idx, c));
        }
        if scored.is_empty() {
            continue;
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        return scored
            .into_iter()
            .take(count.max(1))
            .map(|(_, _, c)| m.clone().with_coords(c))
            .collect();
    }
    Err(ChemError::Embedding(format!(
        "no valid geometry after {} attempts",
        opts.max_attempts
    )))
}

/// Lowest-clash conformer with default options.
pub fn embed_3d(m: &Molecule, seed: u64) -> Result<Molecule, ChemError> {
    let mut v = embed_conformers(m, 1, seed, &EmbedOptions::default())?;
    Ok(v.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
        dot3(sub(a, b), sub(a, b)).sqrt()
    }

    #[test]
    fn ethane_bond_length() {
        let m = embed_3d(&parse_smiles("CC").unwrap(), 1).unwrap();
        let c = m.coords().unwrap();
        assert!((dist(c[0], c[1]) - 1.54).abs() <= 0.08);
    }

    #[test]
    fn deterministic_given_seed() {
        let m = parse_smiles("CCOc1ccccc1CN").unwrap();
        let a = embed_3d(&m, 7).unwrap();
        let b = embed_3d(&m, 7).unwrap();
        let bits = |m: &Molecule| -> Vec<u64> {
            m.coords().unwrap().iter().flatten().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    /// Smallest singular direction of the centered coordinates gives the
    /// least-squares plane normal; residuals are projections onto it.
    fn max_plane_deviation(p: &[[f64; 3]]) -> f64 {
        let n = p.len() as f64;
        let c = [0, 1, 2].map(|d| p.iter().map(|q| q[d]).sum::<f64>() / n);
        let mut cov = [[0.0; 3]; 3];
        for q in p {
            for r in 0..3 {
                for s in 0..3 {
                    cov[r][s] += (q[r] - c[r]) * (q[s] - c[s]);
                }
            }
        }
        // Inverse power iteration on cov + eps I.
        let mut v = [0.3, 0.5, 0.8];
        for _ in 0..200 {
            let a = [
                [cov[0][0] + 1e-9, cov[0][1], cov[0][2]],
                [cov[1][0], cov[1][1] + 1e-9, cov[1][2]],
                [cov[2][0], cov[2][1], cov[2][2] + 1e-9],
            ];
            let det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
            let solve = |col: usize| {
                let mut m = a;
                for r in 0..3 {
                    m[r][col] = v[r];
                }
                (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
                    - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                    + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]))
                    / det
            };
            let w = [solve(0), solve(1), solve(2)];
            let norm = dot3(w, w).sqrt();
            v = [w[0] / norm, w[1] / norm, w[2] / norm];
        }
        p.iter().map(|q| dot3(sub(*q, c), v).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn benzene_is_planar() {
        let m = embed_3d(&parse_smiles("c1ccccc1").unwrap(), 3).unwrap();
        assert!(max_plane_deviation(m.coords().unwrap()) < 0.1);
    }

    #[test]
    fn dihedral_setting_round_trips() {
        let mut c = vec![[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 1.5, 0.0], [0.3, 2.0, 1.0]];
        let r = Rotor { j: 1, k: 2, i_ref: 0, l_ref: 3, moving: vec![3] };
        for deg in TORSIONS_DEG {
            set_dihedral(&mut c, &r, deg.to_radians());
            let got = dihedral(c[0], c[1], c[2], c[3]).to_degrees();
            let diff = (got - deg + 540.0).rem_euclid(360.0) - 180.0;
            assert!(diff.abs() < 1e-9, "{deg} vs {got}");
        }
    }

    #[test]
    fn drug_like_molecules_validate() {
        let opts = EmbedOptions::default();
        for smi in [
            "CC(=O)Oc1ccccc1C(=O)O",
            "CN1CCC[C@H]1c1cccnc1",
            "c1ccc2ccccc2c1",
            "C1CC1CN",
            "CCCCCCCCCC",
            "O=C(N)c1ccc[nH]1",
            "C#CCO",
        ] {
            let m = parse_smiles(smi).unwrap();
            let confs = embed_conformers(&m, 5, 11, &opts).unwrap();
            assert!(!confs.is_empty());
            for c in &confs {
                let xyz = c.coords().unwrap();
                assert!(bonds_ok(&m, xyz, 0.08), "{smi}");
                assert!(contacts_ok(&m, xyz, 1.2), "{smi}");
            }
        }
    }

    #[test]
    fn flexible_chain_gives_several_conformers() {
        let m = parse_smiles("CCCCCC").unwrap();
        let confs = embed_conformers(&m, 5, 1, &EmbedOptions::default()).unwrap();
        assert_eq!(confs.len(), 5);
    }

    #[test]
    fn rejects_disconnected_and_oversized() {
        assert!(embed_3d(&parse_smiles("C.C").unwrap(), 0).is_err());
        let big = "C".repeat(81);
        assert!(embed_3d(&parse_smiles(&big).unwrap(), 0).is_err());
    }
}
