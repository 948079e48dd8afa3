//! Synthetic registration instances with planted ground truth.
//!
//! Scenes are sampled from structured primitives (plane patches, boxes,
//! spheres) so shape descriptors have geometry to describe. Inlier
//! correspondences follow the per-axis i.i.d. Gaussian error model the
//! filter assumes; outliers are uniform in a box around the target cloud.

use nalgebra::Unit;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::correspondence::{Correspondence, CorrespondenceSet, Provenance};
use crate::error::{Error, Result};
use crate::rng::{stream_rng, streams};
use crate::scalar::{real, Real};
use crate::transform::RigidTransform;
use crate::{Point3, Vector3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub num_points: usize,
    /// Scene bounding size in meters; primitives fit inside a cube with
    /// this side length centered at the origin.
    pub scene_extent: f64,
    /// Maximum ground-truth rotation magnitude, degrees.
    pub gt_rotation_range_deg: f64,
    /// Maximum ground-truth translation per axis, meters.
    pub gt_translation_range: f64,
    /// Per-axis Gaussian noise on inlier targets, meters.
    pub noise_sigma: f64,
    pub visual_count: usize,
    pub visual_inlier_ratio: f64,
    pub geo_count: usize,
    pub geo_inlier_ratio: f64,
    /// Side length of the uniform box outlier targets are drawn from,
    /// centered on the target cloud.
    pub outlier_extent: f64,
    pub rng_seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_points: 2000,
            scene_extent: 3.0,
            gt_rotation_range_deg: 180.0,
            gt_translation_range: 1.0,
            noise_sigma: 0.01,
            visual_count: 30,
            visual_inlier_ratio: 0.9,
            geo_count: 1000,
            geo_inlier_ratio: 0.15,
            outlier_extent: 3.0,
            rng_seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_points == 0 {
            return Err(Error::InvalidArgument("num_points must be >= 1".into()));
        }
        if !(self.scene_extent > 0.0) || !(self.outlier_extent > 0.0) {
            return Err(Error::InvalidArgument("extents must be positive".into()));
        }
        if self.gt_rotation_range_deg < 0.0
            || self.gt_translation_range < 0.0
            || self.noise_sigma < 0.0
        {
            return Err(Error::InvalidArgument(
                "ranges and noise must be non-negative".into(),
            ));
        }
        for ratio in [self.visual_inlier_ratio, self.geo_inlier_ratio] {
            if !(0.0..=1.0).contains(&ratio) {
                return Err(Error::InvalidArgument(format!(
                    "inlier ratios must lie in [0, 1], got {ratio}"
                )));
            }
        }
        Ok(())
    }
}

/// A generated instance: two clouds, the transform relating them, planted
/// correspondence sets and their ground-truth labels.
#[derive(Debug, Clone)]
pub struct PlantedInstance<S: Real> {
    pub cloud0: PointCloud<S>,
    pub cloud1: PointCloud<S>,
    pub gt: RigidTransform<S>,
    pub c_vis: CorrespondenceSet<S>,
    pub c_geo: CorrespondenceSet<S>,
    pub vis_labels: Vec<bool>,
    pub geo_labels: Vec<bool>,
}

enum Primitive {
    Plane {
        center: Vector3<f64>,
        u: Vector3<f64>,
        v: Vector3<f64>,
        half_u: f64,
        half_v: f64,
    },
    Box {
        center: Vector3<f64>,
        axes: [Vector3<f64>; 3],
        half: [f64; 3],
    },
    Sphere {
        center: Vector3<f64>,
        radius: f64,
    },
}

fn random_direction(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_frame(rng: &mut ChaCha8Rng) -> [Vector3<f64>; 3] {
    let a = random_direction(rng);
    let helper = if a.x.abs() < 0.9 {
        Vector3::x()
    } else {
        Vector3::y()
    };
    let b = a.cross(&helper).normalize();
    let c = a.cross(&b);
    [a, b, c]
}

impl Primitive {
    fn sample(&self, rng: &mut ChaCha8Rng) -> Vector3<f64> {
        match self {
            Primitive::Plane {
                center,
                u,
                v,
                half_u,
                half_v,
            } => {
                center
                    + u * rng.random_range(-half_u..*half_u)
                    + v * rng.random_range(-half_v..*half_v)
            }
            Primitive::Box { center, axes, half } => {
                // Pick a face, then a point on it.
                let face_axis = rng.random_range(0..3usize);
                let side = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
                let mut p = *center + axes[face_axis] * (half[face_axis] * side);
                for a in 0..3 {
                    if a != face_axis {
                        p += axes[a] * rng.random_range(-half[a]..half[a]);
                    }
                }
                p
            }
            Primitive::Sphere { center, radius } => center + random_direction(rng) * *radius,
        }
    }
}

fn build_primitives(rng: &mut ChaCha8Rng, extent: f64) -> Vec<Primitive> {
    let half_scene = extent / 2.0;
    let mut primitives = Vec::new();
    for _ in 0..2 {
        let frame = random_frame(rng);
        primitives.push(Primitive::Plane {
            center: random_direction(rng) * rng.random_range(0.0..half_scene * 0.5),
            u: frame[1],
            v: frame[2],
            half_u: rng.random_range(0.2..0.5) * half_scene,
            half_v: rng.random_range(0.2..0.5) * half_scene,
        });
    }
    for _ in 0..2 {
        let frame = random_frame(rng);
        primitives.push(Primitive::Box {
            center: random_direction(rng) * rng.random_range(0.0..half_scene * 0.6),
            axes: frame,
            half: [
                rng.random_range(0.08..0.25) * half_scene,
                rng.random_range(0.08..0.25) * half_scene,
                rng.random_range(0.08..0.25) * half_scene,
            ],
        });
    }
    for _ in 0..3 {
        primitives.push(Primitive::Sphere {
            center: random_direction(rng) * rng.random_range(0.0..half_scene * 0.6),
            radius: rng.random_range(0.06..0.2) * half_scene,
        });
    }
    primitives
}

/// Per-axis Gaussian truncated at `6σ`, so labeled inliers always satisfy
/// the documented error bound.
fn truncated_noise(rng: &mut ChaCha8Rng, normal: Option<&Normal<f64>>, sigma: f64) -> f64 {
    let Some(normal) = normal else {
        return 0.0;
    };
    loop {
        let x = normal.sample(rng);
        if x.abs() <= 6.0 * sigma {
            return x;
        }
    }
}

/// Generates a planted instance; deterministic per `rng_seed`.
pub fn generate_instance<S: Real>(cfg: &SynthConfig) -> Result<PlantedInstance<S>> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.rng_seed, streams::SYNTH, 0);

    let primitives = build_primitives(&mut rng, cfg.scene_extent);
    let points0: Vec<Point3<S>> = (0..cfg.num_points)
        .map(|_| {
            let which = rng.random_range(0..primitives.len());
            let p = primitives[which].sample(&mut rng);
            Point3::new(real(p.x), real(p.y), real(p.z))
        })
        .collect();
    let cloud0 = PointCloud::from_points(points0);

    let axis = random_direction(&mut rng);
    let angle = rng.random_range(-1.0..1.0) * cfg.gt_rotation_range_deg.to_radians();
    let translation = Vector3::new(
        rng.random_range(-1.0..=1.0) * cfg.gt_translation_range,
        rng.random_range(-1.0..=1.0) * cfg.gt_translation_range,
        rng.random_range(-1.0..=1.0) * cfg.gt_translation_range,
    );
    let gt = RigidTransform::from_axis_angle(
        Unit::new_normalize(Vector3::new(real(axis.x), real(axis.y), real(axis.z))),
        real(angle),
        Vector3::new(real(translation.x), real(translation.y), real(translation.z)),
    );
    let cloud1 = cloud0.transformed(&gt);

    let centroid1 = cloud1
        .points
        .iter()
        .fold(Vector3::<f64>::zeros(), |acc, p| {
            acc + Vector3::new(
                p.x.to_f64().unwrap(),
                p.y.to_f64().unwrap(),
                p.z.to_f64().unwrap(),
            )
        })
        / cloud1.len() as f64;

    let normal = if cfg.noise_sigma > 0.0 {
        Some(Normal::new(0.0, cfg.noise_sigma).expect("valid sigma"))
    } else {
        None
    };

    let mut plant_set = |rng: &mut ChaCha8Rng,
                         count: usize,
                         inlier_ratio: f64,
                         provenance: Provenance|
     -> (CorrespondenceSet<S>, Vec<bool>) {
        let num_inliers = (inlier_ratio * count as f64).round() as usize;
        let mut entries: Vec<(Correspondence<S>, bool)> = Vec::with_capacity(count);
        for _ in 0..num_inliers {
            let idx = rng.random_range(0..cloud0.len());
            let eta = Vector3::new(
                real::<S>(truncated_noise(rng, normal.as_ref(), cfg.noise_sigma)),
                real::<S>(truncated_noise(rng, normal.as_ref(), cfg.noise_sigma)),
                real::<S>(truncated_noise(rng, normal.as_ref(), cfg.noise_sigma)),
            );
            let c = Correspondence::new(
                cloud0.points[idx],
                cloud1.points[idx] + eta,
                S::one(),
                provenance,
            )
            .with_indices(idx, idx);
            entries.push((c, true));
        }
        for _ in num_inliers..count {
            let idx = rng.random_range(0..cloud0.len());
            let target = Point3::new(
                real::<S>(centroid1.x + rng.random_range(-0.5..0.5) * cfg.outlier_extent),
                real::<S>(centroid1.y + rng.random_range(-0.5..0.5) * cfg.outlier_extent),
                real::<S>(centroid1.z + rng.random_range(-0.5..0.5) * cfg.outlier_extent),
            );
            let mut c = Correspondence::new(cloud0.points[idx], target, S::one(), provenance);
            c.source_index = Some(idx);
            entries.push((c, false));
        }
        // Deterministic shuffle so labels are not positional.
        for i in (1..entries.len()).rev() {
            let j = rng.random_range(0..=i);
            entries.swap(i, j);
        }
        let labels = entries.iter().map(|(_, l)| *l).collect();
        let set = entries.into_iter().map(|(c, _)| c).collect();
        (set, labels)
    };

    let (c_vis, vis_labels) = plant_set(
        &mut rng,
        cfg.visual_count,
        cfg.visual_inlier_ratio,
        Provenance::Visual,
    );
    let (c_geo, geo_labels) = plant_set(
        &mut rng,
        cfg.geo_count,
        cfg.geo_inlier_ratio,
        Provenance::Geometric,
    );

    Ok(PlantedInstance {
        cloud0,
        cloud1,
        gt,
        c_vis,
        c_geo,
        vis_labels,
        geo_labels,
    })
}
