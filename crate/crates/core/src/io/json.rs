//! JSON wire formats: transforms, intrinsics, benchmark manifests, plus
//! generic typed read/write helpers.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::RigidTransform;
use crate::RigidTransformD;

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Human-checkable rotation summary carried next to the matrix form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAngle {
    pub axis: [f64; 3],
    pub angle_deg: f64,
}

impl AxisAngle {
    pub fn from_transform(t: &RigidTransformD) -> Self {
        let rotation = Rotation3::from_matrix_unchecked(*t.rotation());
        match rotation.axis_angle() {
            Some((axis, angle)) => Self {
                axis: [axis.x, axis.y, axis.z],
                angle_deg: angle.to_degrees(),
            },
            None => Self {
                axis: [0.0, 0.0, 1.0],
                angle_deg: 0.0,
            },
        }
    }
}

/// On-disk transform: 4×4 row-major homogeneous matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformFile {
    pub transform: [[f64; 4]; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rotation_deg_axis_angle: Option<AxisAngle>,
}

impl TransformFile {
    pub fn from_transform(t: &RigidTransformD) -> Self {
        Self {
            transform: transform_to_rows(t),
            rotation_deg_axis_angle: Some(AxisAngle::from_transform(t)),
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransformD> {
        transform_from_rows(&self.transform)
    }
}

pub fn transform_to_rows(t: &RigidTransformD) -> [[f64; 4]; 4] {
    let h = t.to_homogeneous();
    let mut rows = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            rows[r][c] = h[(r, c)];
        }
    }
    rows
}

pub fn transform_from_rows(rows: &[[f64; 4]; 4]) -> Result<RigidTransformD> {
    if rows[3] != [0.0, 0.0, 0.0, 1.0] {
        return Err(Error::InvalidArgument(
            "last homogeneous row must be [0, 0, 0, 1]".into(),
        ));
    }
    let rotation = Matrix3::new(
        rows[0][0], rows[0][1], rows[0][2], rows[1][0], rows[1][1], rows[1][2], rows[2][0],
        rows[2][1], rows[2][2],
    );
    let translation = Vector3::new(rows[0][3], rows[1][3], rows[2][3]);
    RigidTransform::new(rotation, translation)
}

pub fn read_transform(path: &Path) -> Result<RigidTransformD> {
    read_json::<TransformFile>(path)?.to_transform()
}

pub fn write_transform(t: &RigidTransformD, path: &Path) -> Result<()> {
    write_json(&TransformFile::from_transform(t), path)
}

/// One frame pair of a benchmark manifest. Paths are relative to the
/// manifest file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestPair {
    pub name: String,
    pub depth0: PathBuf,
    pub depth1: PathBuf,
    pub intrinsics0: PathBuf,
    pub intrinsics1: PathBuf,
    pub matches: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud0: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cloud1: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt: Option<PathBuf>,
}

impl ManifestPair {
    /// Rebases all paths onto the manifest's directory.
    pub fn resolved(&self, base: &Path) -> Self {
        let rebase = |p: &PathBuf| base.join(p);
        Self {
            name: self.name.clone(),
            depth0: rebase(&self.depth0),
            depth1: rebase(&self.depth1),
            intrinsics0: rebase(&self.intrinsics0),
            intrinsics1: rebase(&self.intrinsics1),
            matches: rebase(&self.matches),
            cloud0: self.cloud0.as_ref().map(|p| base.join(p)),
            cloud1: self.cloud1.as_ref().map(|p| base.join(p)),
            gt: self.gt.as_ref().map(|p| base.join(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub pairs: Vec<ManifestPair>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_util::random_transform;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    #[test]
    fn transform_file_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(283);
        let t = random_transform(&mut rng);
        let path = tmp("t.json");
        write_transform(&t, &path).unwrap();
        let back = read_transform(&path).unwrap();
        assert_eq!(back.to_homogeneous(), t.to_homogeneous());
    }

    #[test]
    fn axis_angle_matches_the_rotation() {
        let t = RigidTransformD::from_axis_angle(
            Vector3::z_axis(),
            0.5f64,
            Vector3::new(0.0, 0.0, 0.0),
        );
        let aa = AxisAngle::from_transform(&t);
        assert!((aa.angle_deg - 0.5f64.to_degrees()).abs() < 1e-12);
        assert!((aa.axis[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_rigid_matrices() {
        let rows = [
            [2.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ];
        assert!(transform_from_rows(&rows).is_err());
        let bad_last_row = [
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0, 1.0],
        ];
        assert!(transform_from_rows(&bad_last_row).is_err());
    }

    #[test]
    fn manifest_paths_resolve_against_base() {
        let pair = ManifestPair {
            name: "p".into(),
            depth0: "p/depth0.pgm".into(),
            depth1: "p/depth1.pgm".into(),
            intrinsics0: "p/k0.json".into(),
            intrinsics1: "p/k1.json".into(),
            matches: "p/matches.csv".into(),
            cloud0: None,
            cloud1: None,
            gt: Some("p/gt.json".into()),
        };
        let resolved = pair.resolved(Path::new("/data"));
        assert_eq!(resolved.depth0, Path::new("/data/p/depth0.pgm"));
        assert_eq!(resolved.gt.unwrap(), Path::new("/data/p/gt.json"));
    }

    #[test]
    fn missing_json_file_error_names_the_path() {
        let err = read_json::<Manifest>(Path::new("/nonexistent/manifest.json")).unwrap_err();
        assert!(err.to_string().contains("manifest.json"));
    }
}
