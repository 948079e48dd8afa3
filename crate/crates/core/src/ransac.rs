//! Robust prior-transform estimation by random sample consensus.

use rayon::prelude::*;

use crate::correspondence::{Correspondence, CorrespondenceSet};
use crate::error::{Error, Result};
use crate::procrustes::weighted_procrustes;
use crate::rng::{stream_rng, streams};
use crate::scalar::{real, Real};
use crate::transform::RigidTransform;
use crate::Point3;

/// Iterations evaluated per parallel batch. Batch boundaries are fixed so
/// the adaptive early exit is independent of the worker count.
const BATCH: usize = 256;

/// Minimal-sample degeneracy bound: the smallest triangle height of the
/// three sampled source points, in meters.
const MIN_TRIANGLE_HEIGHT: f64 = 1e-6;

#[derive(Debug, Clone, Copy)]
pub struct RansacConfig<S: Real> {
    /// Residual bound for counting a correspondence as an inlier, meters.
    pub inlier_threshold: S,
    pub max_iterations: usize,
    pub sample_size: usize,
    /// Target probability of having sampled at least one all-inlier
    /// minimal set; drives the adaptive early exit.
    pub confidence: f64,
    pub seed: u64,
}

impl<S: Real> Default for RansacConfig<S> {
    fn default() -> Self {
        Self {
            inlier_threshold: real(0.05),
            max_iterations: 10_000,
            sample_size: 3,
            confidence: 0.999,
            seed: 0,
        }
    }
}

impl<S: Real> RansacConfig<S> {
    fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > S::zero()) {
            return Err(Error::InvalidArgument("inlier threshold must be > 0".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be >= 1".into()));
        }
        if self.sample_size < 3 {
            return Err(Error::InvalidArgument("sample_size must be >= 3".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidArgument("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RansacEstimate<S: Real> {
    pub transform: RigidTransform<S>,
    /// Marks the correspondences within the inlier threshold of the final
    /// (refit) transform.
    pub inlier_mask: Vec<bool>,
    pub inlier_count: usize,
    /// Hypotheses actually evaluated before the adaptive exit.
    pub iterations: usize,
}

/// Classic hypothesize-and-verify estimation: repeatedly fit a minimal
/// sample, count inliers under the threshold, keep the best hypothesis and
/// refit it on its inlier set. Deterministic given the seed, independent of
/// thread count.
pub fn ransac_transform<S: Real>(
    c: &CorrespondenceSet<S>,
    cfg: &RansacConfig<S>,
) -> Result<RansacEstimate<S>> {
    cfg.validate()?;
    let n = c.len();
    if n < cfg.sample_size {
        return Err(Error::InsufficientCorrespondences {
            have: n,
            need: cfg.sample_size,
        });
    }

    let mut best: Option<(usize, usize, RigidTransform<S>)> = None; // (count, iteration, transform)
    let mut iterations_done = 0usize;
    let mut needed = cfg.max_iterations;

    'outer: for batch_start in (0..cfg.max_iterations).step_by(BATCH) {
        let batch_end = (batch_start + BATCH).min(cfg.max_iterations);
        let hypotheses: Vec<Option<(usize, RigidTransform<S>)>> = (batch_start..batch_end)
            .into_par_iter()
            .map(|iteration| evaluate_hypothesis(c, cfg, iteration as u64))
            .collect();

        for (offset, hypothesis) in hypotheses.into_iter().enumerate() {
            let iteration = batch_start + offset;
            iterations_done = iteration + 1;
            if let Some((count, transform)) = hypothesis {
                let improved = match &best {
                    Some((best_count, _, _)) => count > *best_count,
                    None => true,
                };
                if improved {
                    best = Some((count, iteration, transform));
                    needed = iterations_needed(count, n, cfg.sample_size, cfg.confidence)
                        .min(cfg.max_iterations);
                }
            }
            if iterations_done >= needed {
                break 'outer;
            }
        }
    }

    let Some((best_count, _, best_transform)) = best else {
        return Err(Error::NoConsensus {
            best: 0,
            sample_size: cfg.sample_size,
        });
    };
    if best_count < cfg.sample_size {
        return Err(Error::NoConsensus {
            best: best_count,
            sample_size: cfg.sample_size,
        });
    }

    // Refit on the winning hypothesis' inliers, then recompute the mask
    // against the refit transform.
    let mask = residual_mask(c, &best_transform, cfg.inlier_threshold);
    let transform = match weighted_procrustes(&c.select(&mask)) {
        Ok(t) => t,
        Err(_) => best_transform,
    };
    let inlier_mask = residual_mask(c, &transform, cfg.inlier_threshold);
    let inlier_count = inlier_mask.iter().filter(|m| **m).count();
    Ok(RansacEstimate {
        transform,
        inlier_mask,
        inlier_count,
        iterations: iterations_done,
    })
}

fn evaluate_hypothesis<S: Real>(
    c: &CorrespondenceSet<S>,
    cfg: &RansacConfig<S>,
    iteration: u64,
) -> Option<(usize, RigidTransform<S>)> {
    let mut rng = stream_rng(cfg.seed, streams::RANSAC, iteration);
    let sample = rand::seq::index::sample(&mut rng, c.len(), cfg.sample_size);

    let items: Vec<Correspondence<S>> = sample
        .iter()
        .map(|i| {
            let mut item = c[i];
            item.weight = S::one();
            item
        })
        .collect();
    if cfg.sample_size == 3
        && triangle_min_height(&items[0].source, &items[1].source, &items[2].source)
            < real(MIN_TRIANGLE_HEIGHT)
    {
        return None;
    }

    let transform = weighted_procrustes(&CorrespondenceSet::new(items)).ok()?;
    let count = c
        .iter()
        .filter(|item| item.residual(&transform) <= cfg.inlier_threshold)
        .count();
    Some((count, transform))
}

fn residual_mask<S: Real>(
    c: &CorrespondenceSet<S>,
    t: &RigidTransform<S>,
    threshold: S,
) -> Vec<bool> {
    c.iter().map(|item| item.residual(t) <= threshold).collect()
}

/// Smallest altitude of the triangle spanned by three points.
fn triangle_min_height<S: Real>(a: &Point3<S>, b: &Point3<S>, c: &Point3<S>) -> S {
    let ab = b - a;
    let ac = c - a;
    let bc = c - b;
    let double_area = ab.cross(&ac).norm();
    let longest = ab.norm().max(ac.norm()).max(bc.norm());
    if longest == S::zero() {
        S::zero()
    } else {
        double_area / longest
    }
}

/// RANSAC iteration count for the running inlier ratio.
fn iterations_needed(inliers: usize, total: usize, sample_size: usize, confidence: f64) -> usize {
    if inliers == 0 {
        return usize::MAX;
    }
    let w = inliers as f64 / total as f64;
    let w_s = w.powi(sample_size as i32);
    if w_s >= 1.0 {
        return 1;
    }
    let denominator = (1.0 - w_s).ln();
    if denominator == 0.0 {
        return 1;
    }
    ((1.0 - confidence).ln() / denominator).ceil().max(1.0) as usize
}
