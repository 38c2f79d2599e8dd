//! Pharmacophore-shape voxelization, Gaussian overlap scoring, 2D similarity
//! search and a voxel-to-SMILES captioning network, with the screening
//! workflows built on them.
//!
//! Numeric code is generic over [`scalar::Real`] (`f32` or `f64`); the
//! aliases below fix the precision used by the command-line tool.

pub mod chem;
pub mod geometry;
pub mod nn;
pub mod overlap;
pub mod pharmacophore;
pub mod scalar;
pub mod similarity;
pub mod toy;
pub mod voxel;
pub mod workflows;

/// Profiles used for overlap scoring.
pub type Profile = pharmacophore::PharmacophoreProfile<f64>;
/// Grids fed to the network.
pub type Grid = voxel::VoxelGrid<f32>;
/// Network weights are trained and stored in single precision.
pub type Model = nn::CaptionerModel<f32>;
/// Double-precision model for gradient checks.
pub type Model64 = nn::CaptionerModel<f64>;
pub type Transform = geometry::RigidTransform<f64>;
pub type Score = overlap::OverlapScore<f64>;
