//! Cross-source point cloud registration.
//!
//! Two clouds captured by different sensors (different density, scale,
//! noise, coverage) are aligned by segmenting each into supervoxels, turning
//! the supervoxel adjacency into an attributed directed graph, matching the
//! graphs with a convex–concave path-following Frank–Wolfe optimizer, and
//! refining the node correspondences with RANSAC and ICP.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! wall-clock timing live in the `xsreg` companion crate.

#![no_std]

// Float math comes from `num_traits::Float` (libm). Those imports are marked
// `allow(unused_imports)` because std's inherent float methods shadow them
// whenever std is linked into the build, as in tests.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod affinity;
pub mod assignment;
pub mod bench;
mod error;
pub mod estimation;
pub mod geometry;
pub mod matching;
pub mod meshgen;
pub mod metrics;
pub mod pipeline;
pub mod preprocess;
pub mod spatial;
pub mod structure;
pub mod synth;

pub use error::{Error, Result};
pub use geometry::{apply_transform, centroid, cloud_radius, Point3, PointCloud, SimilarityTransform};
pub use pipeline::{register, RegistrationConfig, RegistrationOutput};
pub use spatial::SpatialIndex;
