//! RGB-D camera geometry: pinhole intrinsics, depth images, backprojection
//! and lifting of 2D pixel matches into 3D correspondences.

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::correspondence::{Correspondence, CorrespondenceSet, Provenance};
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::Point3;

/// Pinhole camera intrinsics. `depth_scale` is the number of raw depth
/// units per meter (1000 for millimeter depth).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub depth_scale: f64,
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.depth_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "intrinsics need fx > 0, fy > 0, depth_scale > 0".into(),
            ));
        }
        Ok(())
    }
}

/// Single-channel raw depth image; zero marks invalid/missing depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    width: usize,
    height: usize,
    values: Vec<u16>,
}

impl DepthImage {
    pub fn new(width: usize, height: usize, values: Vec<u16>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "depth buffer has {} samples, expected {}x{} = {}",
                values.len(),
                width,
                height,
                width * height
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[u16] {
        &self.values
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> u16 {
        self.values[v * self.width + u]
    }

    /// Depth at a sub-pixel position, rounded to the nearest pixel.
    /// Returns `None` outside the image or where depth is missing.
    pub fn sample_rounded(&self, u: f64, v: f64) -> Option<(usize, usize, u16)> {
        let ui = u.round();
        let vi = v.round();
        if ui < 0.0 || vi < 0.0 || ui >= self.width as f64 || vi >= self.height as f64 {
            return None;
        }
        let (ui, vi) = (ui as usize, vi as usize);
        match self.at(ui, vi) {
            0 => None,
            d => Some((ui, vi, d)),
        }
    }
}

/// A 2D feature match between two images, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelMatch {
    pub u0: f64,
    pub v0: f64,
    pub u1: f64,
    pub v1: f64,
    pub score: f64,
}

/// Backprojects one pixel with known raw depth through the pinhole model.
#[inline]
pub fn backproject_pixel<S: Real>(
    u: f64,
    v: f64,
    raw_depth: u16,
    k: &CameraIntrinsics,
) -> Point3<S> {
    let z = raw_depth as f64 / k.depth_scale;
    Point3::new(
        real((u - k.cx) * z / k.fx),
        real((v - k.cy) * z / k.fy),
        real(z),
    )
}

/// Projects a camera-frame point to pixel coordinates and metric depth.
/// Returns `None` for points at or behind the camera plane.
pub fn project_point<S: Real>(p: &Point3<S>, k: &CameraIntrinsics) -> Option<(f64, f64, f64)> {
    let (x, y, z) = (
        p.x.to_f64().unwrap(),
        p.y.to_f64().unwrap(),
        p.z.to_f64().unwrap(),
    );
    if z <= 0.0 {
        return None;
    }
    Some((x * k.fx / z + k.cx, y * k.fy / z + k.cy, z))
}

/// Backprojects every valid-depth pixel into a camera-frame point cloud,
/// scanning the image row-major. Zero-depth pixels are skipped.
pub fn backproject<S: Real>(depth: &DepthImage, k: &CameraIntrinsics) -> Result<PointCloud<S>> {
    k.validate()?;
    let mut points = Vec::new();
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let d = depth.at(u, v);
            if d > 0 {
                points.push(backproject_pixel(u as f64, v as f64, d, k));
            }
        }
    }
    Ok(PointCloud::from_points(points))
}

/// Result of lifting pixel matches to 3D.
#[derive(Debug, Clone)]
pub struct LiftedMatches<S: Real> {
    pub correspondences: CorrespondenceSet<S>,
    /// Matches discarded because depth was missing (or out of bounds) at
    /// either rounded endpoint.
    pub dropped: usize,
}

/// Turns 2D pixel matches into 3D visual correspondences by looking up
/// depth at the nearest pixel of each endpoint and backprojecting. All
/// lifted correspondences carry weight 1 and visual provenance.
pub fn lift_pixel_matches<S: Real>(
    matches: &[PixelMatch],
    depth0: &DepthImage,
    depth1: &DepthImage,
    k0: &CameraIntrinsics,
    k1: &CameraIntrinsics,
) -> Result<LiftedMatches<S>> {
    k0.validate()?;
    k1.validate()?;
    let mut correspondences = CorrespondenceSet::default();
    let mut dropped = 0usize;
    for m in matches {
        let (Some((u0, v0, d0)), Some((u1, v1, d1))) = (
            depth0.sample_rounded(m.u0, m.v0),
            depth1.sample_rounded(m.u1, m.v1),
        ) else {
            dropped += 1;
            continue;
        };
        let source = backproject_pixel(u0 as f64, v0 as f64, d0, k0);
        let target = backproject_pixel(u1 as f64, v1 as f64, d1, k1);
        correspondences.push(Correspondence::new(
            source,
            target,
            S::one(),
            Provenance::Visual,
        ));
    }
    Ok(LiftedMatches {
        correspondences,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test_intrinsics() -> CameraIntrinsics {
        CameraIntrinsics {
            fx: 500.0,
            fy: 480.0,
            cx: 320.0,
            cy: 240.0,
            depth_scale: 1000.0,
        }
    }

    #[test]
    fn principal_point_backprojects_to_optical_axis() {
        let k = test_intrinsics();
        let p: Point3<f64> = backproject_pixel(k.cx, k.cy, 1000, &k);
        assert_eq!(p, Point3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn unit_focal_offset_backprojects_to_unit_lateral() {
        let k = test_intrinsics();
        let p: Point3<f64> = backproject_pixel(k.cx + k.fx, k.cy, 1000, &k);
        assert_eq!(p, Point3::new(1.0, 0.0, 1.0));
    }

    #[test]
    fn backproject_then_project_recovers_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(89);
        let k = test_intrinsics();
        let (w, h) = (64, 48);
        let values: Vec<u16> = (0..w * h)
            .map(|_| {
                if rng.random_bool(0.2) {
                    0
                } else {
                    rng.random_range(200..5000)
                }
            })
            .collect();
        let depth = DepthImage::new(w, h, values).unwrap();
        let cloud: PointCloud<f64> = backproject(&depth, &k).unwrap();

        let expected = depth.values().iter().filter(|d| **d > 0).count();
        assert_eq!(cloud.len(), expected);

        let mut iter = cloud.points.iter();
        for v in 0..h {
            for u in 0..w {
                if depth.at(u, v) > 0 {
                    let p = iter.next().unwrap();
                    let (pu, pv, _z) = project_point(p, &k).unwrap();
                    assert!((pu - u as f64).abs() < 1e-6);
                    assert!((pv - v as f64).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn all_invalid_depth_gives_empty_cloud() {
        let depth = DepthImage::new(4, 4, vec![0; 16]).unwrap();
        let cloud: PointCloud<f64> = backproject(&depth, &test_intrinsics()).unwrap();
        assert!(cloud.is_empty());
    }

    #[test]
    fn lift_composes_the_backproject_trivial_case() {
        let k = test_intrinsics();
        let mut values = vec![0u16; 640 * 480];
        values[240 * 640 + 320] = 1000;
        let depth = DepthImage::new(640, 480, values).unwrap();
        let matches = [PixelMatch {
            u0: k.cx,
            v0: k.cy,
            u1: k.cx,
            v1: k.cy,
            score: 1.0,
        }];
        let lifted: LiftedMatches<f64> =
            lift_pixel_matches(&matches, &depth, &depth, &k, &k).unwrap();
        assert_eq!(lifted.dropped, 0);
        assert_eq!(lifted.correspondences.len(), 1);
        let c = &lifted.correspondences[0];
        assert_eq!(c.source, Point3::new(0.0, 0.0, 1.0));
        assert_eq!(c.target, Point3::new(0.0, 0.0, 1.0));
        assert_eq!(c.weight, 1.0);
        assert_eq!(c.provenance, Provenance::Visual);
    }

    #[test]
    fn missing_depth_drops_the_match() {
        let k = test_intrinsics();
        let valid = DepthImage::new(8, 8, vec![1000; 64]).unwrap();
        let invalid = DepthImage::new(8, 8, vec![0; 64]).unwrap();
        let matches = [PixelMatch {
            u0: 3.0,
            v0: 3.0,
            u1: 4.0,
            v1: 4.0,
            score: 1.0,
        }];
        let lifted: LiftedMatches<f64> =
            lift_pixel_matches(&matches, &valid, &invalid, &k, &k).unwrap();
        assert_eq!(lifted.dropped, 1);
        assert!(lifted.correspondences.is_empty());
    }

    #[test]
    fn lift_matches_per_pixel_backprojection() {
        let mut rng = ChaCha8Rng::seed_from_u64(97);
        let k0 = test_intrinsics();
        let k1 = CameraIntrinsics {
            fx: 450.0,
            fy: 455.0,
            cx: 160.0,
            cy: 120.0,
            depth_scale: 5000.0,
        };
        let (w, h) = (320, 240);
        let mk_depth = |rng: &mut ChaCha8Rng| {
            let values: Vec<u16> = (0..w * h)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        0
                    } else {
                        rng.random_range(500..30000)
                    }
                })
                .collect();
            DepthImage::new(w, h, values).unwrap()
        };
        let depth0 = mk_depth(&mut rng);
        let depth1 = mk_depth(&mut rng);
        let matches: Vec<PixelMatch> = (0..100)
            .map(|_| PixelMatch {
                u0: rng.random_range(0.0..w as f64 - 1.0),
                v0: rng.random_range(0.0..h as f64 - 1.0),
                u1: rng.random_range(0.0..w as f64 - 1.0),
                v1: rng.random_range(0.0..h as f64 - 1.0),
                score: rng.random_range(0.0..1.0),
            })
            .collect();

        let lifted: LiftedMatches<f64> =
            lift_pixel_matches(&matches, &depth0, &depth1, &k0, &k1).unwrap();
        assert_eq!(lifted.correspondences.len() + lifted.dropped, matches.len());

        let mut out = lifted.correspondences.iter();
        for m in &matches {
            let (Some((u0, v0, d0)), Some((u1, v1, d1))) = (
                depth0.sample_rounded(m.u0, m.v0),
                depth1.sample_rounded(m.u1, m.v1),
            ) else {
                continue;
            };
            let c = out.next().unwrap();
            assert_eq!(c.source, backproject_pixel(u0 as f64, v0 as f64, d0, &k0));
            assert_eq!(c.target, backproject_pixel(u1 as f64, v1 as f64, d1, &k1));
            assert_eq!(c.weight, 1.0);
            assert_eq!(c.provenance, Provenance::Visual);
        }
        assert!(out.next().is_none());
    }

    #[test]
    fn out_of_bounds_match_counts_as_dropped() {
        let k = test_intrinsics();
        let depth = DepthImage::new(8, 8, vec![1000; 64]).unwrap();
        let matches = [PixelMatch {
            u0: -1.0,
            v0: 2.0,
            u1: 3.0,
            v1: 3.0,
            score: 1.0,
        }];
        let lifted: LiftedMatches<f64> =
            lift_pixel_matches(&matches, &depth, &depth, &k, &k).unwrap();
        assert_eq!(lifted.dropped, 1);
    }

    #[test]
    fn depth_image_shape_check() {
        assert!(DepthImage::new(4, 4, vec![0; 15]).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        let mut k = test_intrinsics();
        k.fx = 0.0;
        assert!(k.validate().is_err());
    }
}
