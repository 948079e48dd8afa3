//! Geometric descriptor pipeline: normal estimation, FPFH descriptors,
//! feature-space nearest-neighbor matching and Lowe's ratio test.

use rayon::prelude::*;

use crate::cloud::{DescriptorSet, PointCloud};
use crate::correspondence::{Correspondence, CorrespondenceSet, Provenance};
use crate::error::{Error, Result};
use crate::kdtree::KdTree3;
use crate::scalar::{real, Real};
use crate::{Point3, Vector3};

/// Bins per angular feature; the full descriptor concatenates three blocks.
pub const FPFH_BINS: usize = 11;
/// Total FPFH descriptor length.
pub const FPFH_LENGTH: usize = 3 * FPFH_BINS;

/// Pairs with closer endpoints than this contribute no angular feature;
/// their Darboux frame is undefined.
const MIN_PAIR_DISTANCE: f64 = 1e-12;

/// Estimates a unit normal per point from the covariance of its `k` nearest
/// neighbors (the point itself included), oriented to face the sensor
/// origin: `n·(origin − p) ≥ 0`.
pub fn estimate_normals<S: Real>(cloud: &PointCloud<S>, k: usize) -> Result<PointCloud<S>> {
    if k < 3 {
        return Err(Error::InvalidArgument(format!(
            "normal estimation needs k >= 3, got {k}"
        )));
    }
    if cloud.len() < k {
        return Err(Error::InvalidArgument(format!(
            "cloud has {} points, fewer than k = {k}",
            cloud.len()
        )));
    }

    let tree = KdTree3::build(&cloud.points);
    let results: Vec<Result<Vector3<S>>> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| normal_at(&tree, cloud, i, p, k))
        .collect();

    let mut normals = Vec::with_capacity(cloud.len());
    for r in results {
        normals.push(r?);
    }
    let mut out = cloud.clone();
    out.normals = Some(normals);
    Ok(out)
}

fn normal_at<S: Real>(
    tree: &KdTree3<S>,
    cloud: &PointCloud<S>,
    index: usize,
    p: &Point3<S>,
    k: usize,
) -> Result<Vector3<S>> {
    let neighbors = tree.knn(p, k);
    let inv_k = S::one() / real::<S>(k as f64);
    let mut mean = Vector3::zeros();
    for n in &neighbors {
        mean += cloud.points[n.index].coords;
    }
    mean *= inv_k;
    let mut covariance = nalgebra::Matrix3::<S>::zeros();
    for n in &neighbors {
        let d = cloud.points[n.index].coords - mean;
        covariance += d * d.transpose();
    }
    covariance *= inv_k;

    let eigen = nalgebra::SymmetricEigen::new(covariance);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eigen.eigenvalues[a]
            .partial_cmp(&eigen.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    let (lambda_mid, lambda_max) = (eigen.eigenvalues[order[1]], eigen.eigenvalues[order[2]]);
    if lambda_max <= S::zero() || lambda_mid <= lambda_max * real(1e-9) {
        return Err(Error::DegenerateInput(format!(
            "neighborhood of point {index} is collinear or coincident"
        )));
    }

    let mut normal: Vector3<S> = eigen.eigenvectors.column(order[0]).into_owned();
    normal /= normal.norm();
    let dot = normal.dot(&-p.coords);
    if dot < S::zero() {
        normal = -normal;
    } else if dot == S::zero() {
        // Viewing ray tangent to the surface; pick a deterministic sign.
        let flip = normal.z < S::zero()
            || (normal.z == S::zero()
                && (normal.y < S::zero() || (normal.y == S::zero() && normal.x < S::zero())));
        if flip {
            normal = -normal;
        }
    }
    Ok(normal)
}

/// FPFH descriptors plus a flag per point marking empty neighborhoods.
#[derive(Debug, Clone)]
pub struct FpfhOutput<S: Real> {
    pub descriptors: DescriptorSet<S>,
    /// `true` where no neighbor fell inside the radius; the corresponding
    /// descriptor is all-zero.
    pub empty: Vec<bool>,
}

/// Computes the 33-bin FPFH descriptor of every point.
///
/// Per-point SPFH histograms are built from the (α, φ, θ) angular features
/// of each neighbor pair within `radius`, then combined as
/// `FPFH(p) = SPFH(p) + (1/k)·Σ SPFH(pₖ)/ωₖ` with `ωₖ` the neighbor
/// distance, and each 11-bin block normalized to sum 100.
pub fn compute_fpfh<S: Real>(cloud: &PointCloud<S>, radius: S) -> Result<FpfhOutput<S>> {
    if !(radius > S::zero()) {
        return Err(Error::InvalidArgument("FPFH radius must be positive".into()));
    }
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("FPFH requires normals".into()))?;
    if normals.len() != cloud.len() {
        return Err(Error::InvalidArgument(
            "normal count does not match point count".into(),
        ));
    }

    let tree = KdTree3::build(&cloud.points);
    let neighborhoods: Vec<Vec<(usize, S)>> = cloud
        .points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            tree.within_radius(p, radius)
                .into_iter()
                .filter(|n| n.index != i && n.distance > real(MIN_PAIR_DISTANCE))
                .map(|n| (n.index, n.distance))
                .collect()
        })
        .collect();

    let spfh: Vec<[S; FPFH_LENGTH]> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let mut hist = [S::zero(); FPFH_LENGTH];
            for &(j, _) in &neighborhoods[i] {
                if let Some((alpha, phi, theta)) =
                    pair_features(&cloud.points[i], &normals[i], &cloud.points[j], &normals[j])
                {
                    hist[alpha_bin(alpha)] += S::one();
                    hist[FPFH_BINS + alpha_bin(phi)] += S::one();
                    hist[2 * FPFH_BINS + theta_bin(theta)] += S::one();
                }
            }
            hist
        })
        .collect();

    let rows: Vec<[S; FPFH_LENGTH]> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let neighbors = &neighborhoods[i];
            let mut fpfh = spfh[i];
            if !neighbors.is_empty() {
                let inv_k = S::one() / real::<S>(neighbors.len() as f64);
                for &(j, dist) in neighbors {
                    let w = inv_k / dist;
                    for (acc, v) in fpfh.iter_mut().zip(spfh[j].iter()) {
                        *acc += *v * w;
                    }
                }
            }
            // Normalize each feature block to sum 100.
            for block in 0..3 {
                let slice = &mut fpfh[block * FPFH_BINS..(block + 1) * FPFH_BINS];
                let sum = slice.iter().fold(S::zero(), |a, b| a + *b);
                if sum > S::zero() {
                    let scale = real::<S>(100.0) / sum;
                    for v in slice {
                        *v *= scale;
                    }
                }
            }
            fpfh
        })
        .collect();

    let empty: Vec<bool> = neighborhoods.iter().map(Vec::is_empty).collect();
    let mut data = Vec::with_capacity(cloud.len() * FPFH_LENGTH);
    for row in &rows {
        data.extend_from_slice(row);
    }
    Ok(FpfhOutput {
        descriptors: DescriptorSet::new(FPFH_LENGTH, data)?,
        empty,
    })
}

/// Darboux-frame angular features of an oriented point pair, `None` when
/// the frame is undefined (coincident points or normal parallel to the
/// connecting line).
fn pair_features<S: Real>(
    p1: &Point3<S>,
    n1: &Vector3<S>,
    p2: &Point3<S>,
    n2: &Vector3<S>,
) -> Option<(S, S, S)> {
    let mut d = p2.coords - p1.coords;
    let dist = d.norm();
    if dist <= real(MIN_PAIR_DISTANCE) {
        return None;
    }
    d /= dist;

    let mut source_normal = *n1;
    let mut target_normal = *n2;
    // The frame's source is the endpoint whose normal is better aligned
    // with the connecting line.
    if source_normal.dot(&d).abs() < target_normal.dot(&d).abs() {
        std::mem::swap(&mut source_normal, &mut target_normal);
        d = -d;
    }

    let u = source_normal;
    let v = d.cross(&u);
    let v_norm = v.norm();
    if v_norm <= real(MIN_PAIR_DISTANCE) {
        return None;
    }
    let v = v / v_norm;
    let w = u.cross(&v);

    let alpha = v.dot(&target_normal);
    let phi = u.dot(&d);
    let theta = w.dot(&target_normal).atan2(u.dot(&target_normal));
    Some((alpha, phi, theta))
}

/// Bin index for a feature in [-1, 1].
fn alpha_bin<S: Real>(value: S) -> usize {
    let bins = real::<S>(FPFH_BINS as f64);
    let idx = ((value + S::one()) / real(2.0) * bins).floor();
    (idx.to_usize().unwrap_or(0)).min(FPFH_BINS - 1)
}

/// Bin index for an angle in [-π, π].
fn theta_bin<S: Real>(value: S) -> usize {
    let bins = real::<S>(FPFH_BINS as f64);
    let idx = ((value + S::pi()) / S::two_pi() * bins).floor();
    (idx.to_usize().unwrap_or(0)).min(FPFH_BINS - 1)
}

/// Matches every source point to its feature-space nearest neighbor in the
/// target. Ties go to the smaller target index; the match weight is
/// `1 / (1 + distance)`.
pub fn match_features<S: Real>(
    source: &PointCloud<S>,
    target: &PointCloud<S>,
) -> Result<CorrespondenceSet<S>> {
    let source_desc = source
        .descriptors
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("source cloud has no descriptors".into()))?;
    let target_desc = target
        .descriptors
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("target cloud has no descriptors".into()))?;
    if target.is_empty() {
        return Err(Error::InvalidArgument("target cloud is empty".into()));
    }
    if source_desc.dim() != target_desc.dim() {
        return Err(Error::InvalidArgument(format!(
            "descriptor dimensions differ: {} vs {}",
            source_desc.dim(),
            target_desc.dim()
        )));
    }

    let items: Vec<Correspondence<S>> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let mut best_j = 0usize;
            let mut best_d = source_desc.distance(i, target_desc, 0);
            for j in 1..target_desc.len() {
                let d = source_desc.distance(i, target_desc, j);
                if d < best_d {
                    best_d = d;
                    best_j = j;
                }
            }
            Correspondence::new(
                source.points[i],
                target.points[best_j],
                S::one() / (S::one() + best_d),
                Provenance::Geometric,
            )
            .with_indices(i, best_j)
        })
        .collect();
    Ok(CorrespondenceSet::new(items))
}

/// Lowe's ratio test: keeps a match when its feature distance is at most
/// `ratio_threshold` times the distance to the second-nearest target.
pub fn lowe_ratio_filter<S: Real>(
    matches: &CorrespondenceSet<S>,
    source_desc: &DescriptorSet<S>,
    target_desc: &DescriptorSet<S>,
    ratio_threshold: S,
) -> Result<CorrespondenceSet<S>> {
    if !(ratio_threshold > S::zero() && ratio_threshold <= S::one()) {
        return Err(Error::InvalidArgument(format!(
            "ratio threshold must lie in (0, 1], got {:?}",
            ratio_threshold.to_f64()
        )));
    }
    if target_desc.len() < 2 {
        return Err(Error::InvalidArgument(
            "ratio test needs at least 2 target descriptors".into(),
        ));
    }

    let keep: Vec<bool> = matches
        .items
        .par_iter()
        .map(|m| {
            let (Some(si), Some(ti)) = (m.source_index, m.target_index) else {
                return false;
            };
            let matched = source_desc.distance(si, target_desc, ti);
            let second = second_nearest_distance(source_desc, si, target_desc);
            if second > S::zero() {
                matched / second <= ratio_threshold
            } else {
                // Both nearest targets coincide with the query: treat as a
                // tie, ratio 1.
                matched == S::zero() && S::one() <= ratio_threshold
            }
        })
        .collect();
    Ok(matches.select(&keep))
}

fn second_nearest_distance<S: Real>(
    source_desc: &DescriptorSet<S>,
    i: usize,
    target_desc: &DescriptorSet<S>,
) -> S {
    let mut first = source_desc.distance(i, target_desc, 0);
    let mut second = source_desc.distance(i, target_desc, 1);
    if second < first {
        std::mem::swap(&mut first, &mut second);
    }
    for j in 2..target_desc.len() {
        let d = source_desc.distance(i, target_desc, j);
        if d < first {
            second = first;
            first = d;
        } else if d < second {
            second = d;
        }
    }
    second
}
