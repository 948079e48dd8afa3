//! Rigid registration of RGB-D frame pairs from fused visual and geometric
//! correspondences.
//!
//! The crate combines externally matched 2D image features (lifted to 3D via
//! depth) with FPFH shape-descriptor matches, filters the geometric matches
//! by their consistency with a visual prior transform under an adaptive
//! chi-square threshold, and estimates the final SE(3) transform with a
//! randomized weighted Procrustes solver.
//!
//! Core math is generic over the scalar type ([`scalar::Real`], `f32` or
//! `f64`); the pipeline and file formats use `f64`.

pub mod cloud;
pub mod correspondence;
pub mod error;
pub mod features;
pub mod filter;
pub mod fitting;
pub mod io;
pub mod kdtree;
pub mod metrics;
pub mod pipeline;
pub mod procrustes;
pub mod ransac;
pub mod rgbd;
pub mod rng;
pub mod scalar;
pub mod stats;
pub mod synth;
pub mod transform;
pub mod voxel;

#[cfg(test)]
pub(crate) mod test_util;

pub use cloud::{DescriptorSet, PointCloud};
pub use correspondence::{Correspondence, CorrespondenceSet, Provenance};
pub use error::{Error, Result};
pub use scalar::Real;
pub use transform::RigidTransform;

/// 3D point in the working scalar type.
pub type Point3<S> = nalgebra::Point3<S>;
/// 3D vector in the working scalar type.
pub type Vector3<S> = nalgebra::Vector3<S>;

// Concrete aliases for the two supported scalar types. The pipeline, file
// formats and CLI all use the `f64` variants.
pub type Point3f = Point3<f32>;
pub type Point3d = Point3<f64>;
pub type Vector3f = Vector3<f32>;
pub type Vector3d = Vector3<f64>;
pub type PointCloudF = PointCloud<f32>;
pub type PointCloudD = PointCloud<f64>;
pub type RigidTransformF = RigidTransform<f32>;
pub type RigidTransformD = RigidTransform<f64>;
pub type CorrespondenceSetD = CorrespondenceSet<f64>;

/// Runs `f` inside a rayon pool with `threads` workers (0 = one per core).
///
/// All parallel stages derive per-item RNG streams and reduce in index
/// order, so results do not depend on the worker count.
pub fn with_thread_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("failed to build thread pool");
    pool.install(f)
}
