//! Rigid-body geometry: 3×3 rotations, rigid transforms and a symmetric
//! eigen-solver for principal axes.

use serde::{Deserialize, Serialize};

use crate::scalar::{add3, cross3, dot3, norm3, scale3, Real, Vec3};

pub type Mat3<T> = [[T; 3]; 3];

pub fn identity<T: Real>() -> Mat3<T> {
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, o, z], [z, z, o]]
}

pub fn mat_vec<T: Real>(m: &Mat3<T>, v: Vec3<T>) -> Vec3<T> {
    [dot3(m[0], v), dot3(m[1], v), dot3(m[2], v)]
}

pub fn mat_mul<T: Real>(a: &Mat3<T>, b: &Mat3<T>) -> Mat3<T> {
    let mut c = [[T::zero(); 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    c
}

pub fn transpose<T: Real>(a: &Mat3<T>) -> Mat3<T> {
    let mut t = *a;
    for i in 0..3 {
        for j in 0..3 {
            t[i][j] = a[j][i];
        }
    }
    t
}

pub fn determinant<T: Real>(a: &Mat3<T>) -> T {
    dot3(a[0], cross3(a[1], a[2]))
}

fn rot_x<T: Real>(t: T) -> Mat3<T> {
    let (s, c) = t.sin_cos();
    let (o, z) = (T::one(), T::zero());
    [[o, z, z], [z, c, -s], [z, s, c]]
}

fn rot_y<T: Real>(t: T) -> Mat3<T> {
    let (s, c) = t.sin_cos();
    let (o, z) = (T::one(), T::zero());
    [[c, z, s], [z, o, z], [-s, z, c]]
}

fn rot_z<T: Real>(t: T) -> Mat3<T> {
    let (s, c) = t.sin_cos();
    let (o, z) = (T::one(), T::zero());
    [[c, -s, z], [s, c, z], [z, z, o]]
}

/// `Rz(a) · Ry(b) · Rx(c)`.
pub fn rotation_zyx<T: Real>(a: T, b: T, c: T) -> Mat3<T> {
    mat_mul(&rot_z(a), &mat_mul(&rot_y(b), &rot_x(c)))
}

/// `Rz(a) · Ry(b) · Rz(c)`; covers SO(3) with `b ∈ [0, π]`.
pub fn rotation_zyz<T: Real>(a: T, b: T, c: T) -> Mat3<T> {
    mat_mul(&rot_z(a), &mat_mul(&rot_y(b), &rot_z(c)))
}

/// Exponential map: rotation by `|w|` radians about `w`.
pub fn rotation_from_vector<T: Real>(w: Vec3<T>) -> Mat3<T> {
    let theta = norm3(w);
    if theta < T::lit(1e-12) {
        // First-order term keeps the map smooth at zero.
        let o = T::one();
        return [[o, -w[2], w[1]], [w[2], o, -w[0]], [-w[1], w[0], o]];
    }
    let k = scale3(w, T::one() / theta);
    let (s, c) = theta.sin_cos();
    let v = T::one() - c;
    [
        [c + k[0] * k[0] * v, k[0] * k[1] * v - k[2] * s, k[0] * k[2] * v + k[1] * s],
        [k[1] * k[0] * v + k[2] * s, c + k[1] * k[1] * v, k[1] * k[2] * v - k[0] * s],
        [k[2] * k[0] * v - k[1] * s, k[2] * k[1] * v + k[0] * s, c + k[2] * k[2] * v],
    ]
}

/// Unit quaternion `w + xi + yj + zk`; constructors renormalize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quaternion<T> {
    pub w: T,
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Quaternion<T> {
    pub fn identity() -> Self {
        Quaternion { w: T::one(), x: T::zero(), y: T::zero(), z: T::zero() }
    }

    pub fn norm(&self) -> T {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Rescales to unit norm; sign is chosen so that `w >= 0`.
    pub fn normalized(self) -> Self {
        let n = self.norm();
        let s = if self.w < T::zero() { -T::one() / n } else { T::one() / n };
        Quaternion { w: self.w * s, x: self.x * s, y: self.y * s, z: self.z * s }
    }

    /// Rotation by `|v|` radians about `v`.
    pub fn from_rotation_vector(v: Vec3<T>) -> Self {
        let theta = norm3(v);
        let half = theta * T::lit(0.5);
        // sin(θ/2)/θ → 1/2 as θ → 0.
        let k = if theta < T::lit(1e-12) { T::lit(0.5) } else { half.sin() / theta };
        Quaternion { w: half.cos(), x: v[0] * k, y: v[1] * k, z: v[2] * k }.normalized()
    }

    /// Shepperd's method; input must be a proper rotation.
    pub fn from_matrix(m: &Mat3<T>) -> Self {
        let one = T::one();
        let quarter = T::lit(0.25);
        let tr = m[0][0] + m[1][1] + m[2][2];
        let q = if tr > m[0][0].max(m[1][1]).max(m[2][2]) {
            let s = (one + tr).sqrt() * T::lit(2.0);
            Quaternion { w: quarter * s, x: (m[2][1] - m[1][2]) / s, y: (m[0][2] - m[2][0]) / s, z: (m[1][0] - m[0][1]) / s }
        } else if m[0][0] >= m[1][1] && m[0][0] >= m[2][2] {
            let s = (one + m[0][0] - m[1][1] - m[2][2]).sqrt() * T::lit(2.0);
            Quaternion { w: (m[2][1] - m[1][2]) / s, x: quarter * s, y: (m[0][1] + m[1][0]) / s, z: (m[0][2] + m[2][0]) / s }
        } else if m[1][1] >= m[2][2] {
            let s = (one + m[1][1] - m[0][0] - m[2][2]).sqrt() * T::lit(2.0);
            Quaternion { w: (m[0][2] - m[2][0]) / s, x: (m[0][1] + m[1][0]) / s, y: quarter * s, z: (m[1][2] + m[2][1]) / s }
        } else {
            let s = (one + m[2][2] - m[0][0] - m[1][1]).sqrt() * T::lit(2.0);
            Quaternion { w: (m[1][0] - m[0][1]) / s, x: (m[0][2] + m[2][0]) / s, y: (m[1][2] + m[2][1]) / s, z: quarter * s }
        };
        q.normalized()
    }

    pub fn to_matrix(&self) -> Mat3<T> {
        let Quaternion { w, x, y, z } = *self;
        let two = T::lit(2.0);
        let one = T::one();
        [
            [one - two * (y * y + z * z), two * (x * y - w * z), two * (x * z + w * y)],
            [two * (x * y + w * z), one - two * (x * x + z * z), two * (y * z - w * x)],
            [two * (x * z - w * y), two * (y * z + w * x), one - two * (x * x + y * y)],
        ]
    }

    /// Hamilton product `self · other` (applies `other` first).
    pub fn mul(&self, o: &Self) -> Self {
        Quaternion {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
        .normalized()
    }

    pub fn conjugate(&self) -> Self {
        Quaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }
}

/// `p ↦ q·p·q* + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform<T> {
    pub rotation: Quaternion<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> RigidTransform<T> {
    pub fn identity() -> Self {
        RigidTransform { rotation: Quaternion::identity(), translation: [T::zero(); 3] }
    }

    pub fn new(rotation: Quaternion<T>, translation: Vec3<T>) -> Self {
        RigidTransform { rotation: rotation.normalized(), translation }
    }

    pub fn from_matrix(rotation: &Mat3<T>, translation: Vec3<T>) -> Self {
        RigidTransform { rotation: Quaternion::from_matrix(rotation), translation }
    }

    /// Rotation about `center` followed by a translation.
    pub fn about(rotation: &Mat3<T>, center: Vec3<T>, translation: Vec3<T>) -> Self {
        let rc = mat_vec(rotation, center);
        let t = [
            center[0] - rc[0] + translation[0],
            center[1] - rc[1] + translation[1],
            center[2] - rc[2] + translation[2],
        ];
        RigidTransform::from_matrix(rotation, t)
    }

    pub fn matrix(&self) -> Mat3<T> {
        self.rotation.to_matrix()
    }

    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        add3(mat_vec(&self.matrix(), p), self.translation)
    }

    /// Applies the transform to every point, building the matrix once.
    pub fn apply_all(&self, points: &[Vec3<T>]) -> Vec<Vec3<T>> {
        let r = self.matrix();
        points.iter().map(|&p| add3(mat_vec(&r, p), self.translation)).collect()
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        RigidTransform { rotation: self.rotation.mul(&other.rotation), translation: self.apply(other.translation) }
    }

    pub fn inverse(&self) -> Self {
        let q = self.rotation.conjugate();
        let t = mat_vec(&q.to_matrix(), self.translation);
        RigidTransform { rotation: q, translation: [-t[0], -t[1], -t[2]] }
    }
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues in descending order and the matching unit
/// eigenvectors as the columns of the second matrix.
pub fn symmetric_eigen<T: Real>(a: &Mat3<T>) -> ([T; 3], Mat3<T>) {
    let mut m = *a;
    let mut v = identity::<T>();
    for _ in 0..64 {
        let off = m[0][1].abs() + m[0][2].abs() + m[1][2].abs();
        let scale = m[0][0].abs() + m[1][1].abs() + m[2][2].abs();
        if off <= T::epsilon() * scale || off == T::zero() {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if m[p][q] == T::zero() {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (T::lit(2.0) * m[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (mkp, mkq) = (m[k][p], m[k][q]);
                m[k][p] = c * mkp - s * mkq;
                m[k][q] = s * mkp + c * mkq;
            }
            for k in 0..3 {
                let (mpk, mqk) = (m[p][k], m[q][k]);
                m[p][k] = c * mpk - s * mqk;
                m[q][k] = s * mpk + c * mqk;
            }
            for k in 0..3 {
                let (vkp, vkq) = (v[k][p], v[k][q]);
                v[k][p] = c * vkp - s * vkq;
                v[k][q] = s * vkp + c * vkq;
            }
        }
    }
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| m[j][j].partial_cmp(&m[i][i]).unwrap_or(std::cmp::Ordering::Equal));
    let vals = [m[order[0]][order[0]], m[order[1]][order[1]], m[order[2]][order[2]]];
    let mut vecs = [[T::zero(); 3]; 3];
    for (col, &src) in order.iter().enumerate() {
        for row in 0..3 {
            vecs[row][col] = v[row][src];
        }
    }
    (vals, vecs)
}
