//! Independent oracles shared by integration and acceptance tests.
#![allow(dead_code)]

use phvox::geometry::{mat_vec, rotation_zyz, RigidTransform};
use phvox::pharmacophore::{Channel, PharmacophoreProfile};
use rand::Rng;

pub type P = PharmacophoreProfile<f64>;

/// Three shape points at least 1 Å apart in a 3 Å box; each point also
/// carries a random feature with probability 1/2.
pub fn random_three_point<R: Rng>(rng: &mut R) -> P {
    loop {
        let pts: Vec<[f64; 3]> = (0..3).map(|_| std::array::from_fn(|_| rng.gen_range(-1.5..1.5))).collect();
        let ok = (0..3).all(|i| (i + 1..3).all(|j| d2(pts[i], pts[j]) >= 1.0));
        if !ok {
            continue;
        }
        let mut p = P::empty();
        for &x in &pts {
            p.push(Channel::Shape, x).unwrap();
            if rng.gen_bool(0.5) {
                let c = Channel::FEATURES[rng.gen_range(0..6)];
                p.push(c, x).unwrap();
            }
        }
        return p;
    }
}

/// Copy of `p` with each point jittered by up to `jitter` Å per axis
/// (feature points follow their shape point), then moved by a random
/// rigid transform.
pub fn jittered_copy<R: Rng>(p: &P, jitter: f64, rng: &mut R) -> P {
    let shape = p.channel(Channel::Shape).to_vec();
    let moved: Vec<[f64; 3]> =
        shape.iter().map(|x| std::array::from_fn(|k| x[k] + rng.gen_range(-jitter..jitter))).collect();
    let mut out = P::empty();
    for (x, y) in shape.iter().zip(&moved) {
        out.push(Channel::Shape, *y).unwrap();
        for &c in &Channel::FEATURES {
            if p.channel(c).iter().any(|f| f == x) {
                out.push(c, *y).unwrap();
            }
        }
    }
    let g = RigidTransform::from_matrix(
        &rotation_zyz(rng.gen_range(0.0..6.28), rng.gen_range(0.0..3.14), rng.gen_range(0.0..6.28)),
        std::array::from_fn(|_| rng.gen_range(-3.0..3.0)),
    );
    out.transformed(&g)
}

pub fn d2(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn centroid(pts: &[[f64; 3]]) -> [f64; 3] {
    let n = pts.len() as f64;
    std::array::from_fn(|k| pts.iter().map(|p| p[k]).sum::<f64>() / n)
}

/// Maximum combo over a ZYZ Euler grid at `step_deg` crossed with
/// translations of ±`half_width` Å at `t_step` around centroid
/// superposition. Exponentials are separable per axis, so each rotation
/// costs one small table per point pair.
pub fn grid_search_combo(q: &P, c: &P, step_deg: f64, half_width: f64, t_step: f64) -> f64 {
    let beta = 0.5 / (0.93f64 * 0.93);
    let cq = centroid(q.channel(Channel::Shape));
    let cc = centroid(c.channel(Channel::Shape));
    let center = |pts: &[[f64; 3]], o: [f64; 3]| -> Vec<[f64; 3]> {
        pts.iter().map(|p| [p[0] - o[0], p[1] - o[1], p[2] - o[2]]).collect()
    };
    let self_sum = |a: &[[f64; 3]]| -> f64 {
        a.iter().flat_map(|x| a.iter().map(move |y| (-beta * d2(*x, *y)).exp())).sum()
    };
    // Pair list: (query point, candidate point, is_shape).
    let qs = center(q.channel(Channel::Shape), cq);
    let cs = center(c.channel(Channel::Shape), cc);
    let mut qpts: Vec<([f64; 3], usize, bool)> = Vec::new();
    let mut cpts: Vec<([f64; 3], usize, bool)> = Vec::new();
    for p in &qs {
        qpts.push((*p, 6, true));
    }
    for p in &cs {
        cpts.push((*p, 6, true));
    }
    let (mut qq_col, mut cc_col) = (0.0, 0.0);
    let mut any_color = false;
    for (k, &ch) in Channel::FEATURES.iter().enumerate() {
        let a = center(q.channel(ch), cq);
        let b = center(c.channel(ch), cc);
        any_color |= !a.is_empty() || !b.is_empty();
        qq_col += self_sum(&a);
        cc_col += self_sum(&b);
        qpts.extend(a.into_iter().map(|p| (p, k, false)));
        cpts.extend(b.into_iter().map(|p| (p, k, false)));
    }
    let qq_shape = self_sum(&qs);
    let cc_shape = self_sum(&cs);
    let nt = (2.0 * half_width / t_step).round() as usize + 1;
    let offsets: Vec<f64> = (0..nt).map(|i| -half_width + i as f64 * t_step).collect();
    let steps_a = (360.0 / step_deg).round() as usize;
    let steps_b = (180.0 / step_deg).round() as usize + 1;
    let mut best = 0.0f64;
    let mut shape_acc = vec![0.0; nt * nt * nt];
    let mut color_acc = vec![0.0; nt * nt * nt];
    for ia in 0..steps_a {
        for ib in 0..steps_b {
            for ig in 0..steps_a {
                let r = rotation_zyz(
                    (ia as f64 * step_deg).to_radians(),
                    (ib as f64 * step_deg).to_radians(),
                    (ig as f64 * step_deg).to_radians(),
                );
                shape_acc.iter_mut().for_each(|v| *v = 0.0);
                color_acc.iter_mut().for_each(|v| *v = 0.0);
                for &(cp, ck, cshape) in &cpts {
                    let x = mat_vec(&r, cp);
                    for &(qp, qk, qshape) in &qpts {
                        if qshape != cshape || qk != ck {
                            continue;
                        }
                        // exp(−β‖q − (x + t)‖²) = Π_axis exp(−β (q_k − x_k − t_k)²)
                        let tables: [Vec<f64>; 3] = std::array::from_fn(|k| {
                            offsets.iter().map(|t| (-beta * (qp[k] - x[k] - t).powi(2)).exp()).collect()
                        });
                        let acc = if cshape { &mut shape_acc } else { &mut color_acc };
                        for (i, ex) in tables[0].iter().enumerate() {
                            for (j, ey) in tables[1].iter().enumerate() {
                                let exy = ex * ey;
                                let row = &mut acc[(i * nt + j) * nt..(i * nt + j + 1) * nt];
                                for (v, ez) in row.iter_mut().zip(&tables[2]) {
                                    *v += exy * ez;
                                }
                            }
                        }
                    }
                }
                for (s, c) in shape_acc.iter().zip(&color_acc) {
                    let shape = s / (qq_shape + cc_shape - s);
                    let color = if any_color { c / (qq_col + cc_col - c) } else { 0.0 };
                    best = best.max(shape + color);
                }
            }
        }
    }
    best
}
