//! Adaptive transformation-consistency filtering.
//!
//! A prior transform estimated from the visual correspondences defines a
//! residual for every match. Assumed visual inliers give a moment estimate
//! of the inlier error variance; the 95% chi-square quantile (3 dof) turns
//! that variance into an adaptive residual threshold for the geometric
//! matches. Survivors of both sets are merged for the final fitting stage.

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::ransac::{ransac_transform, RansacConfig, RansacEstimate};
use crate::scalar::{real, Real};
use crate::stats::chi2_quantile;
use crate::transform::RigidTransform;
use crate::Point3;

/// Euclidean residual `‖T(p) − q‖` of a pair under a candidate transform.
#[inline]
pub fn distance_error<S: Real>(t: &RigidTransform<S>, p: &Point3<S>, q: &Point3<S>) -> S {
    (t.apply(p) - q).norm()
}

/// Visual correspondences within `K·t_in` of the prior transform, used as
/// the variance-estimation sample. The multiplier tolerates a rough prior.
pub fn assumed_inliers<S: Real>(
    c_vis: &CorrespondenceSet<S>,
    t: &RigidTransform<S>,
    t_in: S,
    k: S,
) -> CorrespondenceSet<S> {
    let bound = k * t_in;
    c_vis
        .iter()
        .filter(|item| item.residual(t) <= bound)
        .copied()
        .collect()
}

/// Moment estimate of the per-axis inlier variance:
/// `σ̂² = Σ‖T(pᵢ) − qᵢ‖² / (3·n)`.
pub fn estimate_variance<S: Real>(
    c_in: &CorrespondenceSet<S>,
    t: &RigidTransform<S>,
) -> Result<S> {
    if c_in.is_empty() {
        return Err(Error::EmptyInlierSet);
    }
    let sum = c_in.iter().fold(S::zero(), |acc, item| {
        let r = item.residual(t);
        acc + r * r
    });
    Ok(sum / (real::<S>(3.0) * real::<S>(c_in.len() as f64)))
}

/// Residual cutoff `ε = sqrt(σ²·χ²_confidence(3))`.
pub fn adaptive_threshold<S: Real>(sigma_sq: S, confidence: S) -> Result<S> {
    if sigma_sq < S::zero() {
        return Err(Error::InvalidArgument("variance must be non-negative".into()));
    }
    let quantile = chi2_quantile(confidence, 3)?;
    Ok((sigma_sq * quantile).sqrt())
}

/// Geometric correspondences consistent with the prior within `ε`.
/// Weights and provenance are preserved.
pub fn filter_geometric<S: Real>(
    c_geo: &CorrespondenceSet<S>,
    t: &RigidTransform<S>,
    epsilon: S,
) -> CorrespondenceSet<S> {
    c_geo
        .iter()
        .filter(|item| item.residual(t) <= epsilon)
        .copied()
        .collect()
}

/// The estimated inlier error distribution and derived threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorModel {
    /// Estimated per-axis variance, m².
    pub sigma_sq: f64,
    /// RANSAC inlier threshold the model was built with, m.
    pub t_in: f64,
    /// Multiplier applied to `t_in` when collecting assumed inliers.
    pub k: f64,
    /// Effective residual cutoff (after the numeric floor), m.
    pub epsilon: f64,
    /// Size of the assumed-inlier sample behind `sigma_sq`.
    pub assumed_inlier_count: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FilterConfig<S: Real> {
    /// Multiplier on the RANSAC threshold for assumed inliers; 3 suits
    /// learned visual features, 5 hand-crafted ones.
    pub k: S,
    /// Chi-square confidence for the adaptive threshold.
    pub confidence: S,
    /// Below this many visual matches the filter is skipped outright.
    pub min_visual_matches: usize,
    /// Minimum surviving geometric matches, absolute and as a fraction of
    /// the input; falling short skips the filter.
    pub min_survivor_count: usize,
    pub min_survivor_fraction: f64,
    /// Numeric floor on ε so noise-free data does not filter everything.
    pub epsilon_floor: S,
}

impl<S: Real> Default for FilterConfig<S> {
    fn default() -> Self {
        Self {
            k: real(3.0),
            confidence: real(0.95),
            min_visual_matches: 10,
            min_survivor_count: 10,
            min_survivor_fraction: 0.02,
            epsilon_floor: real(1e-4),
        }
    }
}

impl<S: Real> FilterConfig<S> {
    fn validate(&self) -> Result<()> {
        if self.k < S::one() {
            return Err(Error::InvalidArgument("K must be at least 1".into()));
        }
        if !(self.confidence > S::zero() && self.confidence < S::one()) {
            return Err(Error::InvalidArgument("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn min_survivors(&self, geo_total: usize) -> usize {
        let fractional = (self.min_survivor_fraction * geo_total as f64).ceil() as usize;
        self.min_survivor_count.max(fractional)
    }
}

/// Why the filter did not run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    None,
    TooFewVisual,
    TooFewSurvivors,
    RansacFailed,
}

#[derive(Debug, Clone)]
pub struct FilterOutcome<S: Real> {
    /// The correspondence set handed to the fitting stage: the merged
    /// survivor sets when the filter ran, the plain union otherwise.
    pub merged: CorrespondenceSet<S>,
    pub error_model: Option<ErrorModel>,
    pub filter_applied: bool,
    pub skip_reason: SkipReason,
    /// Prior transform from the visual RANSAC stage, when it succeeded.
    pub prior: Option<RansacEstimate<S>>,
    /// Surviving visual correspondences (assumed inliers) when applied.
    pub visual_inliers: usize,
    /// Surviving geometric correspondences when applied.
    pub geometric_inliers: usize,
}

/// Runs the full filter: visual RANSAC prior, error-distribution estimate,
/// adaptive threshold, geometric consistency test and merge. Every failure
/// path degrades to an unfiltered union rather than an error.
pub fn run_filter<S: Real>(
    c_vis: &CorrespondenceSet<S>,
    c_geo: &CorrespondenceSet<S>,
    ransac_cfg: &RansacConfig<S>,
    filter_cfg: &FilterConfig<S>,
) -> Result<FilterOutcome<S>> {
    filter_cfg.validate()?;

    let skip = |reason: SkipReason, prior: Option<RansacEstimate<S>>| FilterOutcome {
        merged: c_vis.concat(c_geo),
        error_model: None,
        filter_applied: false,
        skip_reason: reason,
        prior,
        visual_inliers: 0,
        geometric_inliers: 0,
    };

    if c_vis.len() < filter_cfg.min_visual_matches {
        return Ok(skip(SkipReason::TooFewVisual, None));
    }

    let prior = match ransac_transform(c_vis, ransac_cfg) {
        Ok(estimate) => estimate,
        Err(
            Error::NoConsensus { .. }
            | Error::InsufficientCorrespondences { .. }
            | Error::DegenerateInput(_),
        ) => return Ok(skip(SkipReason::RansacFailed, None)),
        Err(e) => return Err(e),
    };

    let visual_inliers = assumed_inliers(
        c_vis,
        &prior.transform,
        ransac_cfg.inlier_threshold,
        filter_cfg.k,
    );
    if visual_inliers.is_empty() {
        return Ok(skip(SkipReason::RansacFailed, Some(prior)));
    }

    let sigma_sq = estimate_variance(&visual_inliers, &prior.transform)?;
    let epsilon = adaptive_threshold(sigma_sq, filter_cfg.confidence)?.max(filter_cfg.epsilon_floor);
    let geometric_inliers = filter_geometric(c_geo, &prior.transform, epsilon);

    if !c_geo.is_empty() && geometric_inliers.len() < filter_cfg.min_survivors(c_geo.len()) {
        return Ok(skip(SkipReason::TooFewSurvivors, Some(prior)));
    }

    let error_model = ErrorModel {
        sigma_sq: sigma_sq.to_f64().unwrap(),
        t_in: ransac_cfg.inlier_threshold.to_f64().unwrap(),
        k: filter_cfg.k.to_f64().unwrap(),
        epsilon: epsilon.to_f64().unwrap(),
        assumed_inlier_count: visual_inliers.len(),
    };
    Ok(FilterOutcome {
        merged: visual_inliers.concat(&geometric_inliers),
        error_model: Some(error_model),
        filter_applied: true,
        skip_reason: SkipReason::None,
        prior: Some(prior),
        visual_inliers: visual_inliers.len(),
        geometric_inliers: geometric_inliers.len(),
    })
}
