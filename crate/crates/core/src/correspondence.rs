//! Point-to-point correspondences between a source and a target cloud.

use crate::scalar::Real;
use crate::transform::RigidTransform;
use crate::Point3;

/// Where a correspondence came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Lifted from 2D image feature matches via depth.
    Visual,
    /// Matched in 3D shape-descriptor space.
    Geometric,
}

/// A putative pairing of a source point with a target point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence<S: Real> {
    pub source: Point3<S>,
    pub target: Point3<S>,
    pub source_index: Option<usize>,
    pub target_index: Option<usize>,
    pub weight: S,
    pub provenance: Provenance,
}

impl<S: Real> Correspondence<S> {
    pub fn new(source: Point3<S>, target: Point3<S>, weight: S, provenance: Provenance) -> Self {
        Self {
            source,
            target,
            source_index: None,
            target_index: None,
            weight,
            provenance,
        }
    }

    pub fn with_indices(mut self, source: usize, target: usize) -> Self {
        self.source_index = Some(source);
        self.target_index = Some(target);
        self
    }

    /// Residual `‖T(p) − q‖` of this pair under a candidate transform.
    #[inline]
    pub fn residual(&self, t: &RigidTransform<S>) -> S {
        (t.apply(&self.source) - self.target).norm()
    }
}

/// An ordered list of correspondences; may be empty.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrespondenceSet<S: Real> {
    pub items: Vec<Correspondence<S>>,
}

impl<S: Real> Default for CorrespondenceSet<S> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<S: Real> CorrespondenceSet<S> {
    pub fn new(items: Vec<Correspondence<S>>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Correspondence<S>> {
        self.items.iter()
    }

    pub fn push(&mut self, c: Correspondence<S>) {
        self.items.push(c);
    }

    pub fn total_weight(&self) -> S {
        self.items
            .iter()
            .fold(S::zero(), |acc, c| acc + c.weight)
    }

    /// Multiset union preserving order: all of `self`, then all of `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut items = Vec::with_capacity(self.len() + other.len());
        items.extend_from_slice(&self.items);
        items.extend_from_slice(&other.items);
        Self { items }
    }

    /// Keeps the items at the flagged positions.
    pub fn select(&self, mask: &[bool]) -> Self {
        debug_assert_eq!(mask.len(), self.len());
        Self {
            items: self
                .items
                .iter()
                .zip(mask)
                .filter(|(_, keep)| **keep)
                .map(|(c, _)| *c)
                .collect(),
        }
    }
}

impl<S: Real> FromIterator<Correspondence<S>> for CorrespondenceSet<S> {
    fn from_iter<I: IntoIterator<Item = Correspondence<S>>>(iter: I) -> Self {
        Self {
            items: iter.into_iter().collect(),
        }
    }
}

impl<'a, S: Real> IntoIterator for &'a CorrespondenceSet<S> {
    type Item = &'a Correspondence<S>;
    type IntoIter = std::slice::Iter<'a, Correspondence<S>>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

impl<S: Real> std::ops::Index<usize> for CorrespondenceSet<S> {
    type Output = Correspondence<S>;

    fn index(&self, i: usize) -> &Self::Output {
        &self.items[i]
    }
}
