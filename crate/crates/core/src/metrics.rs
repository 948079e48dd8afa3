//! Registration evaluation: rotation/translation errors, chamfer distance,
//! benchmark summaries and correspondence inlier statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::kdtree::KdTree3;
use crate::scalar::{real, Real};
use crate::transform::RigidTransform;

/// Accuracy thresholds reported by default: degrees, centimeters,
/// millimeters, and the inlier-ratio residual thresholds in meters.
pub const DEFAULT_ROTATION_THRESHOLDS_DEG: [f64; 3] = [5.0, 10.0, 45.0];
pub const DEFAULT_TRANSLATION_THRESHOLDS_CM: [f64; 3] = [5.0, 10.0, 25.0];
pub const DEFAULT_CHAMFER_THRESHOLDS_MM: [f64; 3] = [1.0, 5.0, 10.0];
pub const DEFAULT_INLIER_THRESHOLDS_M: [f64; 3] = [0.10, 0.05, 0.025];

/// Geodesic rotation gap in degrees:
/// `arccos(clamp((trace(R_gtᵀ·R_est) − 1)/2, −1, 1))`.
pub fn rotation_error<S: Real>(est: &RigidTransform<S>, gt: &RigidTransform<S>) -> S {
    let relative = gt.rotation().transpose() * est.rotation();
    let cos = ((relative.trace() - S::one()) / real(2.0)).clamp(-S::one(), S::one());
    cos.acos() * real(180.0) / S::pi()
}

/// Translation gap in centimeters.
pub fn translation_error<S: Real>(est: &RigidTransform<S>, gt: &RigidTransform<S>) -> S {
    (est.translation() - gt.translation()).norm() * real(100.0)
}

/// Symmetric mean chamfer distance between `t_est(a)` and `b`, millimeters:
/// the two directed mean nearest-neighbor distances, averaged.
pub fn chamfer_distance<S: Real>(
    a: &PointCloud<S>,
    b: &PointCloud<S>,
    t_est: &RigidTransform<S>,
) -> Result<S> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(
            "chamfer distance needs two non-empty clouds".into(),
        ));
    }
    let moved: Vec<crate::Point3<S>> = a.points.iter().map(|p| t_est.apply(p)).collect();
    let forward = directed_mean_nn(&moved, &b.points);
    let backward = directed_mean_nn(&b.points, &moved);
    Ok((forward + backward) / real(2.0) * real(1000.0))
}

fn directed_mean_nn<S: Real>(from: &[crate::Point3<S>], to: &[crate::Point3<S>]) -> S {
    let tree = KdTree3::build(to);
    let distances: Vec<S> = from
        .par_iter()
        .map(|p| tree.nearest(p).expect("non-empty cloud").distance)
        .collect();
    let sum = distances.iter().fold(S::zero(), |acc, d| acc + *d);
    sum / real(from.len() as f64)
}

/// Per-pair evaluation against ground truth. Inlier statistics are stored
/// as parallel arrays over `inlier_thresholds_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub re_deg: f64,
    pub te_cm: f64,
    pub chamfer_mm: f64,
    pub inlier_thresholds_m: Vec<f64>,
    pub inlier_ratios: Vec<f64>,
    pub inlier_amounts: Vec<usize>,
    pub filter_applied: bool,
}

/// Counts of correspondences within each residual threshold of the ground
/// truth, with ratios (0 for an empty set).
#[derive(Debug, Clone, PartialEq)]
pub struct InlierStats {
    pub thresholds_m: Vec<f64>,
    pub amounts: Vec<usize>,
    pub ratios: Vec<f64>,
}

pub fn correspondence_inlier_stats<S: Real>(
    c: &CorrespondenceSet<S>,
    gt: &RigidTransform<S>,
    thresholds_m: &[f64],
) -> InlierStats {
    let residuals: Vec<f64> = c
        .iter()
        .map(|item| item.residual(gt).to_f64().unwrap())
        .collect();
    let amounts: Vec<usize> = thresholds_m
        .iter()
        .map(|tau| residuals.iter().filter(|r| **r <= *tau).count())
        .collect();
    let ratios: Vec<f64> = amounts
        .iter()
        .map(|amount| {
            if c.is_empty() {
                0.0
            } else {
                *amount as f64 / c.len() as f64
            }
        })
        .collect();
    InlierStats {
        thresholds_m: thresholds_m.to_vec(),
        amounts,
        ratios,
    }
}

/// Mean, median and accuracy-at-threshold for one error metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub median: f64,
    pub thresholds: Vec<f64>,
    /// Fraction of pairs with error ≤ the matching threshold.
    pub accuracy: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSummary {
    pub pairs: usize,
    pub rotation_deg: MetricSummary,
    pub translation_cm: MetricSummary,
    pub chamfer_mm: MetricSummary,
    /// Fraction of pairs on which the consistency filter actually ran.
    pub filter_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryThresholds {
    pub rotation_deg: Vec<f64>,
    pub translation_cm: Vec<f64>,
    pub chamfer_mm: Vec<f64>,
}

impl Default for SummaryThresholds {
    fn default() -> Self {
        Self {
            rotation_deg: DEFAULT_ROTATION_THRESHOLDS_DEG.to_vec(),
            translation_cm: DEFAULT_TRANSLATION_THRESHOLDS_CM.to_vec(),
            chamfer_mm: DEFAULT_CHAMFER_THRESHOLDS_MM.to_vec(),
        }
    }
}

/// Aggregates per-pair evaluations. The median of an even-length list is
/// its lower-middle element.
pub fn summarize(evals: &[PairEvaluation], thresholds: &SummaryThresholds) -> Result<BenchmarkSummary> {
    if evals.is_empty() {
        return Err(Error::EmptyInput);
    }
    let metric = |values: Vec<f64>, taus: &[f64]| -> MetricSummary {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
        let median = sorted[(sorted.len() - 1) / 2];
        let accuracy = taus
            .iter()
            .map(|tau| values.iter().filter(|v| **v <= *tau).count() as f64 / values.len() as f64)
            .collect();
        MetricSummary {
            mean,
            median,
            thresholds: taus.to_vec(),
            accuracy,
        }
    };
    let filter_recall =
        evals.iter().filter(|e| e.filter_applied).count() as f64 / evals.len() as f64;
    Ok(BenchmarkSummary {
        pairs: evals.len(),
        rotation_deg: metric(
            evals.iter().map(|e| e.re_deg).collect(),
            &thresholds.rotation_deg,
        ),
        translation_cm: metric(
            evals.iter().map(|e| e.te_cm).collect(),
            &thresholds.translation_cm,
        ),
        chamfer_mm: metric(
            evals.iter().map(|e| e.chamfer_mm).collect(),
            &thresholds.chamfer_mm,
        ),
        filter_recall,
    })
}
