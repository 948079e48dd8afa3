//! Point clouds and per-point attribute storage.

use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::transform::RigidTransform;
use crate::{Point3, Vector3};

/// Fixed-dimension descriptors for every point of a cloud, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSet<S: Real> {
    dim: usize,
    data: Vec<S>,
}

impl<S: Real> DescriptorSet<S> {
    pub fn new(dim: usize, data: Vec<S>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("descriptor dimension is zero".into()));
        }
        if data.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "descriptor data length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let dim = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(
                "descriptors do not share one dimension".into(),
            ));
        }
        Self::new(dim.max(1), rows.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[S]> {
        self.data.chunks_exact(self.dim)
    }

    /// Euclidean distance between descriptor `i` of `self` and `j` of `other`.
    #[inline]
    pub fn distance(&self, i: usize, other: &Self, j: usize) -> S {
        let a = self.row(i);
        let b = other.row(j);
        let mut acc = S::zero();
        for (x, y) in a.iter().zip(b.iter()) {
            let d = *x - *y;
            acc += d * d;
        }
        acc.sqrt()
    }
}

/// An ordered set of 3D points in meters with optional unit normals and
/// optional per-point descriptors.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<S: Real> {
    pub points: Vec<Point3<S>>,
    pub normals: Option<Vec<Vector3<S>>>,
    pub descriptors: Option<DescriptorSet<S>>,
}

impl<S: Real> Default for PointCloud<S> {
    fn default() -> Self {
        Self {
            points: Vec::new(),
            normals: None,
            descriptors: None,
        }
    }
}

impl<S: Real> PointCloud<S> {
    pub fn from_points(points: Vec<Point3<S>>) -> Self {
        Self {
            points,
            normals: None,
            descriptors: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Checks the structural invariants: finite coordinates, matching
    /// attribute lengths, unit normals within `1e-6`.
    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has non-finite coordinates"
                )));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != self.points.len() {
                return Err(Error::InvalidArgument(format!(
                    "normal count {} does not match point count {}",
                    normals.len(),
                    self.points.len()
                )));
            }
            let tol = real::<S>(1e-6);
            for (i, n) in normals.iter().enumerate() {
                if (n.norm() - S::one()).abs() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "normal {i} is not unit length"
                    )));
                }
            }
        }
        if let Some(desc) = &self.descriptors {
            if desc.len() != self.points.len() {
                return Err(Error::InvalidArgument(format!(
                    "descriptor count {} does not match point count {}",
                    desc.len(),
                    self.points.len()
                )));
            }
        }
        Ok(())
    }

    /// Returns a copy with points (and normals, if present) mapped through `t`.
    /// Descriptors are dropped; they are only meaningful for the geometry they
    /// were computed on.
    pub fn transformed(&self, t: &RigidTransform<S>) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| t.rotate(n)).collect()),
            descriptors: None,
        }
    }
}
