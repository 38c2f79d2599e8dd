//! Occupancy voxelization of pharmacophore profiles and training-time
//! augmentation.
//!
//! For a point at distance `d` from a voxel center, `V(d, r) = exp(-d² /
//! (0.93 r)²)`, and a channel's occupancy is `1 - Π (1 - V)` over its points.
//! Points farther than `4 · 0.93 r` from a voxel are skipped; their
//! contribution is below `e^-16`.
//!
//! Values are stored channel-major with x fastest:
//! `index = ((c · d + z) · d + y) · d + x`.

use std::io::{Read, Write};

use rand::Rng;
use thiserror::Error;

use crate::geometry::{rotation_zyx, RigidTransform};
use crate::pharmacophore::{Channel, PharmacophoreProfile, NUM_CHANNELS};
use crate::scalar::{Real, Vec3};

/// Width factor of the occupancy kernel.
pub const KERNEL_WIDTH: f64 = 0.93;
/// Cutoff in units of the kernel width.
pub const CUTOFF_WIDTHS: f64 = 4.0;
pub const VOXG_VERSION: u16 = 1;
const VOXG_MAGIC: &[u8; 4] = b"VOXG";

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("invalid grid spec: {0}")]
    InvalidSpec(String),
    #[error("{channel} point at ({:.3}, {:.3}, {:.3}) lies outside the grid extent", point[0], point[1], point[2])]
    Coverage { channel: &'static str, point: [f64; 3] },
    #[error("malformed .voxg data: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Grid geometry: `d` voxels per side, `resolution` Å per voxel, point
/// radius `radius` Å.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub d: usize,
    pub resolution: f64,
    pub radius: f64,
}

impl Default for GridSpec {
    /// Desk-scale grid: 32³ at 0.5 Å.
    fn default() -> Self {
        GridSpec { d: 32, resolution: 0.5, radius: 1.0 }
    }
}

impl GridSpec {
    pub fn new(d: usize, resolution: f64, radius: f64) -> Result<Self, VoxelError> {
        let s = GridSpec { d, resolution, radius };
        s.validate()?;
        Ok(s)
    }

    /// 48³ at 0.35 Å.
    pub fn full_48() -> Self {
        GridSpec { d: 48, resolution: 0.35, radius: 1.0 }
    }

    /// 64³ at 0.35 Å.
    pub fn full_64() -> Self {
        GridSpec { d: 64, resolution: 0.35, radius: 1.0 }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "desk" => Some(GridSpec::default()),
            "full48" => Some(GridSpec::full_48()),
            "full64" => Some(GridSpec::full_64()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), VoxelError> {
        if self.d < 8 {
            return Err(VoxelError::InvalidSpec(format!("d = {} is below 8", self.d)));
        }
        if self.d > u16::MAX as usize {
            return Err(VoxelError::InvalidSpec(format!("d = {} does not fit the file format", self.d)));
        }
        if !(self.resolution.is_finite() && self.resolution > 0.0) {
            return Err(VoxelError::InvalidSpec(format!("resolution {} must be positive", self.resolution)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(VoxelError::InvalidSpec(format!("radius {} must be positive", self.radius)));
        }
        Ok(())
    }

    /// Edge length of the grid in Å.
    pub fn extent(&self) -> f64 {
        self.d as f64 * self.resolution
    }

    pub fn voxels_per_channel(&self) -> usize {
        self.d * self.d * self.d
    }

    /// Coordinate of voxel index `i` along one axis, relative to the center.
    pub fn offset(&self, i: usize) -> f64 {
        (i as f64 - (self.d as f64 - 1.0) / 2.0) * self.resolution
    }
}

/// Dense `C × d × d × d` occupancy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid<T> {
    spec: GridSpec,
    /// Å coordinates of the grid center; not stored in `.voxg` files.
    center: Vec3<T>,
    values: Vec<T>,
}

impl<T: Real> VoxelGrid<T> {
    /// Wraps raw channel-major values.
    pub fn from_values(spec: GridSpec, center: Vec3<T>, values: Vec<T>) -> Result<Self, VoxelError> {
        spec.validate()?;
        if values.len() != NUM_CHANNELS * spec.voxels_per_channel() {
            return Err(VoxelError::Format(format!(
                "expected {} values, got {}",
                NUM_CHANNELS * spec.voxels_per_channel(),
                values.len()
            )));
        }
        Ok(VoxelGrid { spec, center, values })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn center(&self) -> Vec3<T> {
        self.center
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn channel(&self, c: Channel) -> &[T] {
        let n = self.spec.voxels_per_channel();
        &self.values[c.index() * n..(c.index() + 1) * n]
    }

    pub fn get(&self, c: Channel, x: usize, y: usize, z: usize) -> T {
        let d = self.spec.d;
        self.values[((c.index() * d + z) * d + y) * d + x]
    }

    /// Å coordinates of voxel `(x, y, z)`.
    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Vec3<T> {
        let s = &self.spec;
        [
            self.center[0] + T::lit(s.offset(x)),
            self.center[1] + T::lit(s.offset(y)),
            self.center[2] + T::lit(s.offset(z)),
        ]
    }
}

/// Grid centered on the profile's shape centroid (the origin if the shape
/// channel is empty).
pub fn voxelize<T: Real>(p: &PharmacophoreProfile<T>, spec: &GridSpec) -> Result<VoxelGrid<T>, VoxelError> {
    let center = p.shape_centroid().unwrap_or([T::zero(); 3]);
    voxelize_at(p, spec, center)
}

/// Checks that every point lies inside the grid box around `center`.
pub fn check_coverage<T: Real>(
    p: &PharmacophoreProfile<T>,
    spec: &GridSpec,
    center: Vec3<T>,
) -> Result<(), VoxelError> {
    let half = spec.extent() / 2.0;
    for c in Channel::ALL {
        for q in p.channel(c) {
            if (0..3).any(|k| (q[k] - center[k]).as_f64().abs() > half) {
                return Err(VoxelError::Coverage {
                    channel: c.name(),
                    point: [q[0].as_f64(), q[1].as_f64(), q[2].as_f64()],
                });
            }
        }
    }
    Ok(())
}

/// Grid centered at an explicit point.
pub fn voxelize_at<T: Real>(
    p: &PharmacophoreProfile<T>,
    spec: &GridSpec,
    center: Vec3<T>,
) -> Result<VoxelGrid<T>, VoxelError> {
    spec.validate()?;
    check_coverage(p, spec, center)?;
    let d = spec.d;
    let n = spec.voxels_per_channel();
    let width = KERNEL_WIDTH * spec.radius;
    let inv_w2 = T::lit(1.0 / (width * width));
    let cutoff = CUTOFF_WIDTHS * width;
    let cutoff2 = T::lit(cutoff * cutoff);
    let res = T::lit(spec.resolution);
    let half = T::lit((d as f64 - 1.0) / 2.0);

    let mut values = vec![T::zero(); NUM_CHANNELS * n];
    let mut ex = vec![T::zero(); d];
    let mut ey = vec![T::zero(); d];
    let mut ez = vec![T::zero(); d];
    let mut dx2 = vec![T::zero(); d];
    let mut dy2 = vec![T::zero(); d];
    let mut dz2 = vec![T::zero(); d];
    for c in Channel::ALL {
        let pts = p.channel(c);
        if pts.is_empty() {
            continue;
        }
        // Complement product Π (1 - V), then occupancy 1 - Π.
        let q = &mut values[c.index() * n..(c.index() + 1) * n];
        q.iter_mut().for_each(|v| *v = T::one());
        for pt in pts {
            let mut ranges = [(0usize, 0usize); 3];
            for (axis, (e, dd)) in [(&mut ex, &mut dx2), (&mut ey, &mut dy2), (&mut ez, &mut dz2)]
                .into_iter()
                .enumerate()
            {
                // Voxel index of the point along this axis (fractional).
                let u = ((pt[axis] - center[axis]) / res + half).as_f64();
                let reach = cutoff / spec.resolution;
                let lo = (u - reach).ceil().max(0.0) as usize;
                let hi = ((u + reach).floor() as i64).min(d as i64 - 1);
                if hi < lo as i64 {
                    ranges[axis] = (1, 0);
                    continue;
                }
                let hi = hi as usize;
                ranges[axis] = (lo, hi);
                for i in lo..=hi {
                    let delta = (T::lit(i as f64) - half) * res + center[axis] - pt[axis];
                    dd[i] = delta * delta;
                    e[i] = (-(dd[i]) * inv_w2).exp();
                }
            }
            let [(x0, x1), (y0, y1), (z0, z1)] = ranges;
            if x0 > x1 || y0 > y1 || z0 > z1 {
                continue;
            }
            for z in z0..=z1 {
                for y in y0..=y1 {
                    let ryz = dy2[y] + dz2[z];
                    if ryz > cutoff2 {
                        continue;
                    }
                    let eyz = ey[y] * ez[z];
                    let row = (z * d + y) * d;
                    for x in x0..=x1 {
                        if dx2[x] + ryz > cutoff2 {
                            continue;
                        }
                        q[row + x] *= T::one() - ex[x] * eyz;
                    }
                }
            }
        }
        q.iter_mut().for_each(|v| *v = T::one() - *v);
    }
    Ok(VoxelGrid { spec: *spec, center, values })
}

/// Rotation by ZYX Euler `angles` about the shape centroid, then
/// `translation`.
pub fn augmentation_transform<T: Real>(
    p: &PharmacophoreProfile<T>,
    angles: [T; 3],
    translation: Vec3<T>,
) -> RigidTransform<T> {
    let center = p.shape_centroid().unwrap_or([T::zero(); 3]);
    RigidTransform::about(&rotation_zyx(angles[0], angles[1], angles[2]), center, translation)
}

/// One random rigid motion: Euler angles ~ U[0, 2π), translation ~ U[-1, 1]
/// Å per axis, applied to all channels jointly.
pub fn augment<T: Real, R: Rng + ?Sized>(p: &PharmacophoreProfile<T>, rng: &mut R) -> PharmacophoreProfile<T> {
    let tau = std::f64::consts::TAU;
    let angles = [0; 3].map(|_| T::lit(rng.gen_range(0.0..tau)));
    let translation = [0; 3].map(|_| T::lit(rng.gen_range(-1.0..=1.0)));
    p.transformed(&augmentation_transform(p, angles, translation))
}

/// Writes the `.voxg` binary form (values as little-endian f32).
pub fn write_voxg<T: Real, W: Write>(grid: &VoxelGrid<T>, mut w: W) -> Result<(), VoxelError> {
    let s = grid.spec();
    w.write_all(VOXG_MAGIC)?;
    w.write_all(&VOXG_VERSION.to_le_bytes())?;
    w.write_all(&(NUM_CHANNELS as u16).to_le_bytes())?;
    w.write_all(&(s.d as u16).to_le_bytes())?;
    w.write_all(&(s.resolution as f32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(grid.values.len() * 4);
    for v in &grid.values {
        buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads a `.voxg` stream. The radius is not stored and defaults to 1 Å;
/// the center is reported as the origin.
pub fn read_voxg<R: Read>(mut r: R) -> Result<VoxelGrid<f32>, VoxelError> {
    let mut header = [0u8; 14];
    r.read_exact(&mut header)
        .map_err(|_| VoxelError::Format("truncated header".into()))?;
    if &header[0..4] != VOXG_MAGIC {
        return Err(VoxelError::Format("bad magic".into()));
    }
    let version = u16::from_le_bytes([header[4], header[5]]);
    if version != VOXG_VERSION {
        return Err(VoxelError::Format(format!("unsupported version {version}")));
    }
    let c = u16::from_le_bytes([header[6], header[7]]) as usize;
    if c != NUM_CHANNELS {
        return Err(VoxelError::Format(format!("expected {NUM_CHANNELS} channels, found {c}")));
    }
    let d = u16::from_le_bytes([header[8], header[9]]) as usize;
    let resolution = f32::from_le_bytes([header[10], header[11], header[12], header[13]]) as f64;
    let spec = GridSpec::new(d, resolution, 1.0).map_err(|e| VoxelError::Format(e.to_string()))?;
    let count = c * spec.voxels_per_channel();
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    if bytes.len() != count * 4 {
        return Err(VoxelError::Format(format!(
            "expected {} value bytes, found {}",
            count * 4,
            bytes.len()
        )));
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(VoxelError::Format("occupancy outside [0, 1]".into()));
    }
    Ok(VoxelGrid { spec, center: [0.0; 3], values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn spec16() -> GridSpec {
        GridSpec::new(16, 0.5, 1.0).unwrap()
    }

    fn single(c: Channel, pts: &[[f64; 3]]) -> PharmacophoreProfile<f64> {
        let mut p = PharmacophoreProfile::empty();
        for q in pts {
            p.push(c, *q).unwrap();
        }
        p
    }

    /// Untruncated per-voxel evaluation straight from the occupancy formula.
    fn brute_force(p: &PharmacophoreProfile<f64>, spec: &GridSpec, center: [f64; 3]) -> Vec<f64> {
        let d = spec.d;
        let w = 0.93 * spec.radius;
        let mut out = Vec::new();
        for c in Channel::ALL {
            for z in 0..d {
                for y in 0..d {
                    for x in 0..d {
                        let v = [
                            center[0] + spec.offset(x),
                            center[1] + spec.offset(y),
                            center[2] + spec.offset(z),
                        ];
                        let mut prod = 1.0;
                        for q in p.channel(c) {
                            let d2 = (v[0] - q[0]).powi(2) + (v[1] - q[1]).powi(2) + (v[2] - q[2]).powi(2);
                            prod *= 1.0 - (-d2 / (w * w)).exp();
                        }
                        out.push(1.0 - prod);
                    }
                }
            }
        }
        out
    }

    #[test]
    fn point_on_voxel_center_is_one() {
        // With an even d the grid center sits between voxels; place the point
        // on voxel (8, 8, 8).
        let spec = spec16();
        let at = [spec.offset(8), spec.offset(8), spec.offset(8)];
        let p = single(Channel::Donor, &[at]);
        let g = voxelize_at(&p, &spec, [0.0; 3]).unwrap();
        assert_eq!(g.get(Channel::Donor, 8, 8, 8), 1.0);
        assert!(g.channel(Channel::Acceptor).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn kernel_width_distance() {
        let spec = GridSpec::new(16, 0.93, 1.0).unwrap();
        let at = [spec.offset(8), spec.offset(8), spec.offset(8)];
        let g = voxelize_at(&single(Channel::Donor, &[at]), &spec, [0.0; 3]).unwrap();
        assert!((g.get(Channel::Donor, 9, 8, 8) - (-1.0f64).exp()).abs() < 1e-12);
        let g2 = voxelize_at(&single(Channel::Donor, &[at, at]), &spec, [0.0; 3]).unwrap();
        assert_eq!(g2.get(Channel::Donor, 8, 8, 8), 1.0);
        let expected = 1.0 - (1.0 - (-1.0f64).exp()).powi(2);
        assert!((g2.get(Channel::Donor, 9, 8, 8) - expected).abs() < 1e-12);
        assert!((expected - 0.600423).abs() < 1e-6);
    }

    #[test]
    fn random_profiles_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let spec = spec16();
        for _ in 0..20 {
            let mut p = PharmacophoreProfile::empty();
            for _ in 0..10 {
                let c = Channel::ALL[rng.gen_range(0..7)];
                let q = [0; 3].map(|_| rng.gen_range(-3.5..3.5));
                p.push(c, q).unwrap();
            }
            let center = [0.1, -0.2, 0.05];
            let fast = voxelize_at(&p, &spec, center).unwrap();
            let slow = brute_force(&p, &spec, center);
            let err = fast.values().iter().zip(&slow).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-6, "max error {err}");
        }
    }

    #[test]
    fn coverage_violation_names_channel() {
        let p = single(Channel::Anion, &[[10.0, 0.0, 0.0]]);
        match voxelize_at(&p, &spec16(), [0.0; 3]) {
            Err(VoxelError::Coverage { channel, .. }) => assert_eq!(channel, "anion"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn spec_validation() {
        assert!(GridSpec::new(7, 0.5, 1.0).is_err());
        assert!(GridSpec::new(16, 0.0, 1.0).is_err());
        assert!(GridSpec::new(16, 0.5, -1.0).is_err());
        assert_eq!(GridSpec::preset("full64"), Some(GridSpec::full_64()));
    }

    #[test]
    fn voxg_round_trip() {
        let p = single(Channel::Aromatic, &[[0.3, -0.2, 1.0], [1.0, 1.0, 1.0]]);
        let g = voxelize::<f32>(&p.cast(), &spec16()).unwrap();
        let mut buf = Vec::new();
        write_voxg(&g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"VOXG");
        assert_eq!(buf.len(), 14 + 7 * 16 * 16 * 16 * 4);
        let back = read_voxg(&buf[..]).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(back.spec().d, 16);
        assert!(read_voxg(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_voxg(&bad[..]).is_err());
    }

    #[test]
    fn augmentation_determinism_and_identity() {
        let p = single(Channel::Shape, &[[0.0, 0.0, 0.0], [1.5, 0.0, 0.0], [0.0, 2.0, 1.0]]);
        let a = augment(&p, &mut ChaCha8Rng::seed_from_u64(3));
        let b = augment(&p, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let id = p.transformed(&augmentation_transform(&p, [0.0; 3], [0.0; 3]));
        for (x, y) in id.channel(Channel::Shape).iter().zip(p.channel(Channel::Shape)) {
            assert!((0..3).all(|k| (x[k] - y[k]).abs() < 1e-12));
        }
    }

    fn arb_profile() -> impl Strategy<Value = PharmacophoreProfile<f64>> {
        prop::collection::vec((0usize..7, [-3.5..3.5f64, -3.5..3.5f64, -3.5..3.5f64]), 0..12).prop_map(|pts| {
            let mut p = PharmacophoreProfile::empty();
            for (c, q) in pts {
                p.push(Channel::ALL[c], q).unwrap();
            }
            p
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn occupancy_bounded(p in arb_profile()) {
            let g = voxelize_at(&p, &spec16(), [0.0; 3]).unwrap();
            prop_assert!(g.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn adding_a_point_is_monotone(p in arb_profile(), q in [-3.5..3.5f64, -3.5..3.5f64, -3.5..3.5f64], c in 0usize..7) {
            let before = voxelize_at(&p, &spec16(), [0.0; 3]).unwrap();
            let mut p2 = p.clone();
            p2.push(Channel::ALL[c], q).unwrap();
            let after = voxelize_at(&p2, &spec16(), [0.0; 3]).unwrap();
            let ch = Channel::ALL[c];
            prop_assert!(after.channel(ch).iter().zip(before.channel(ch)).all(|(a, b)| a >= b));
            for other in Channel::ALL.into_iter().filter(|&o| o != ch) {
                prop_assert!(after.channel(other).iter().zip(before.channel(other)).all(|(a, b)| a.to_bits() == b.to_bits()));
            }
        }

        #[test]
        fn augmentation_is_isometric(p in arb_profile(), seed in any::<u64>()) {
            let a = augment(&p, &mut ChaCha8Rng::seed_from_u64(seed));
            let all = |q: &PharmacophoreProfile<f64>| -> Vec<[f64; 3]> {
                Channel::ALL.iter().flat_map(|&c| q.channel(c).to_vec()).collect()
            };
            let (x, y) = (all(&p), all(&a));
            for i in 0..x.len() {
                for j in i + 1..x.len() {
                    let dx = crate::scalar::dist2(x[i], x[j]).sqrt();
                    let dy = crate::scalar::dist2(y[i], y[j]).sqrt();
                    prop_assert!((dx - dy).abs() < 1e-9);
                }
            }
        }
    }
}
