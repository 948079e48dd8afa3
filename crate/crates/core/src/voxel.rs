//! Voxel-grid downsampling.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::Point3;

/// Integer voxel coordinates of a point on a grid anchored at the world
/// origin. Points exactly on a boundary belong to the lower voxel.
#[inline]
pub fn voxel_key<S: Real>(p: &Point3<S>, voxel_size: S) -> (i64, i64, i64) {
    let k = |v: S| -> i64 {
        (v / voxel_size)
            .floor()
            .to_i64()
            .expect("voxel index out of i64 range")
    };
    (k(p.x), k(p.y), k(p.z))
}

/// Replaces all points inside each occupied voxel with their centroid.
///
/// Output order follows the first occurrence of each voxel in the input, so
/// the result is deterministic.
pub fn voxel_downsample<S: Real>(cloud: &PointCloud<S>, voxel_size: S) -> Result<PointCloud<S>> {
    if !(voxel_size > S::zero()) || !voxel_size.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "voxel size must be positive and finite, got {:?}",
            voxel_size.to_f64()
        )));
    }

    let mut slots: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut sums: Vec<Vector3<S>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for p in &cloud.points {
        let key = voxel_key(p, voxel_size);
        match slots.get(&key) {
            Some(&slot) => {
                sums[slot] += p.coords;
                counts[slot] += 1;
            }
            None => {
                slots.insert(key, sums.len());
                sums.push(p.coords);
                counts.push(1);
            }
        }
    }

    let points = sums
        .into_iter()
        .zip(counts)
        .map(|(sum, n)| Point3::from(sum / crate::scalar::real::<S>(n as f64)))
        .collect();
    Ok(PointCloud::from_points(points))
}
