//! Compact class models built from free-form deformation and dense
//! correspondences, and single-image mesh reconstruction on top of them.
//!
//! The crate is organised bottom-up:
//!
//! - [`mesh`]: triangle meshes, anchor sets, silhouettes, file formats and
//!   synthetic shape families.
//! - [`ffd`]: Bernstein lattices, deformation matrices and the x-mirror
//!   symmetry operator.
//! - [`correspond`]: anchor-driven lattice fitting and locally affine
//!   nonrigid ICP.
//! - [`metrics`]: surface distance, voxel IoU, distance maps and evaluation
//!   errors.
//! - [`graph`]: the directed model graph and linear-combination deformation.
//! - [`pose`]: orthographic camera fitting with ADMM and model selection.
//! - [`refine`]: silhouette-driven refinement of combination weights and pose.

pub mod correspond;
pub mod error;
pub mod ffd;
pub mod geom;
pub mod graph;
pub mod mesh;
pub mod metrics;
pub mod optim;
pub mod pose;
pub mod refine;

pub use error::{Error, Result};
pub use ffd::{DeformationMatrix, FfdLattice, SymmetryMode, SymmetryOperator};

pub use graph::{ModelEdge, ModelGraph, ModelNode};
pub use mesh::{AnchorSet2D, AnchorSet3D, Silhouette, TriMesh};
pub use metrics::{ChamferMap, VoxelGrid};
pub use pose::{CameraPose, SelectionResult};

/// 3D vector in model units.
pub type Vec3 = nalgebra::Vector3<f64>;
/// 2D vector in pixels.
pub type Vec2 = nalgebra::Vector2<f64>;
