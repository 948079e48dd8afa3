//! The end-to-end registration pipeline for one RGB-D frame pair, and the
//! JSON report it produces.
//!
//! Stages: voxel downsampling, normal estimation, FPFH extraction,
//! descriptor matching, visual-prior consistency filtering, randomized
//! weighted-Procrustes fitting.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cloud::PointCloud;
use crate::correspondence::{Correspondence, CorrespondenceSet, Provenance};
use crate::error::{Error, Result};
use crate::features::{compute_fpfh, estimate_normals, lowe_ratio_filter, match_features};
use crate::filter::{run_filter, ErrorModel, FilterConfig, SkipReason};
use crate::fitting::{fit_transform, FitStats, FittingConfig};
use crate::io::json::{transform_from_rows, transform_to_rows, AxisAngle};
use crate::metrics::{
    chamfer_distance, correspondence_inlier_stats, rotation_error, translation_error,
    PairEvaluation, DEFAULT_INLIER_THRESHOLDS_M,
};
use crate::ransac::RansacConfig;
use crate::rgbd::LiftedMatches;
use crate::scalar::real;
use crate::voxel::voxel_downsample;
use crate::{Point3, PointCloudD, RigidTransformD};

/// Origin of the ingested visual matches; selects the default multiplier
/// `K` (3 for learned matchers, 5 for hand-crafted descriptors).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VisualKind {
    Learned,
    Handcrafted,
}

impl std::str::FromStr for VisualKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "learned" => Ok(VisualKind::Learned),
            "handcrafted" => Ok(VisualKind::Handcrafted),
            other => Err(Error::InvalidArgument(format!(
                "visual kind must be 'learned' or 'handcrafted', got '{other}'"
            ))),
        }
    }
}

/// All pipeline tunables, with the defaults used throughout. Deserializes
/// from a JSON config file; unspecified fields keep their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Voxel edge for downsampling, meters.
    pub voxel_size_m: f64,
    /// Neighborhood size for normal estimation.
    pub normal_k: usize,
    /// FPFH support radius, meters; `None` means 5 × voxel size.
    pub fpfh_radius_m: Option<f64>,
    /// Optional Lowe ratio test on the FPFH matches (the ingested visual
    /// matches carry no descriptors to test). Disabled by default.
    pub geo_ratio_threshold: Option<f64>,
    pub visual_kind: VisualKind,
    /// Overrides the kind-derived multiplier `K` when set.
    pub k_multiplier: Option<f64>,
    /// Chi-square confidence for the adaptive threshold.
    pub confidence: f64,
    pub min_visual_matches: usize,
    pub min_survivor_count: usize,
    pub min_survivor_fraction: f64,
    pub epsilon_floor_m: f64,
    /// RANSAC inlier threshold, meters.
    pub t_in_m: f64,
    pub ransac_max_iterations: usize,
    pub ransac_confidence: f64,
    pub fit_num_subsets: usize,
    pub fit_subset_fraction: f64,
    pub fit_min_subset_size: usize,
    /// Candidate scoring threshold for fitting, meters; `None` means t_in.
    pub fit_score_threshold_m: Option<f64>,
    /// Bypass the consistency filter and fit on the raw union.
    pub skip_filter: bool,
    /// Treat depth beyond this as invalid, meters.
    pub max_depth_m: Option<f64>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            voxel_size_m: 0.025,
            normal_k: 30,
            fpfh_radius_m: None,
            geo_ratio_threshold: None,
            visual_kind: VisualKind::Learned,
            k_multiplier: None,
            confidence: 0.95,
            min_visual_matches: 10,
            min_survivor_count: 10,
            min_survivor_fraction: 0.02,
            epsilon_floor_m: 1e-4,
            t_in_m: 0.05,
            ransac_max_iterations: 10_000,
            ransac_confidence: 0.999,
            fit_num_subsets: 100,
            fit_subset_fraction: 0.1,
            fit_min_subset_size: 5,
            fit_score_threshold_m: None,
            skip_filter: false,
            max_depth_m: None,
        }
    }
}

impl PipelineConfig {
    pub fn k_multiplier(&self) -> f64 {
        self.k_multiplier.unwrap_or(match self.visual_kind {
            VisualKind::Learned => 3.0,
            VisualKind::Handcrafted => 5.0,
        })
    }

    pub fn fpfh_radius(&self) -> f64 {
        self.fpfh_radius_m.unwrap_or(5.0 * self.voxel_size_m)
    }

    pub fn ransac_config(&self) -> RansacConfig<f64> {
        RansacConfig {
            inlier_threshold: self.t_in_m,
            max_iterations: self.ransac_max_iterations,
            sample_size: 3,
            confidence: self.ransac_confidence,
            seed: self.seed,
        }
    }

    pub fn filter_config(&self) -> FilterConfig<f64> {
        FilterConfig {
            k: self.k_multiplier(),
            confidence: self.confidence,
            min_visual_matches: self.min_visual_matches,
            min_survivor_count: self.min_survivor_count,
            min_survivor_fraction: self.min_survivor_fraction,
            epsilon_floor: self.epsilon_floor_m,
        }
    }

    pub fn fitting_config(&self) -> FittingConfig<f64> {
        FittingConfig {
            num_subsets: self.fit_num_subsets,
            subset_fraction: self.fit_subset_fraction,
            min_subset_size: self.fit_min_subset_size,
            score_threshold: self.fit_score_threshold_m.unwrap_or(self.t_in_m),
            seed: self.seed,
        }
    }
}

/// Why the filter stage did not run, as reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportSkipReason {
    None,
    TooFewVisual,
    TooFewSurvivors,
    RansacFailed,
    /// Disabled via configuration (`skip_filter`).
    ForcedOff,
}

impl From<SkipReason> for ReportSkipReason {
    fn from(reason: SkipReason) -> Self {
        match reason {
            SkipReason::None => ReportSkipReason::None,
            SkipReason::TooFewVisual => ReportSkipReason::TooFewVisual,
            SkipReason::TooFewSurvivors => ReportSkipReason::TooFewSurvivors,
            SkipReason::RansacFailed => ReportSkipReason::RansacFailed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCounts {
    pub cloud0_points: usize,
    pub cloud1_points: usize,
    pub cloud0_downsampled: usize,
    pub cloud1_downsampled: usize,
    pub visual_read: usize,
    pub visual_lifted: usize,
    pub visual_dropped: usize,
    pub geo_matches: usize,
    /// Visual / geometric correspondences handed to the fitting stage.
    pub merged_visual: usize,
    pub merged_geometric: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub preprocess_ms: f64,
    pub features_ms: f64,
    pub matching_ms: f64,
    pub filter_ms: f64,
    pub fitting_ms: f64,
    pub total_ms: f64,
}

/// Correspondences handed to the fitting stage, serialized as flat rows
/// `[sx, sy, sz, tx, ty, tz, weight]` so evaluations can recompute inlier
/// statistics without rerunning the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ReportCorrespondences {
    pub visual: Vec<[f64; 7]>,
    pub geometric: Vec<[f64; 7]>,
}

impl ReportCorrespondences {
    fn from_set(set: &CorrespondenceSet<f64>) -> Self {
        let mut out = Self::default();
        for c in set {
            let row = [
                c.source.x, c.source.y, c.source.z, c.target.x, c.target.y, c.target.z, c.weight,
            ];
            match c.provenance {
                Provenance::Visual => out.visual.push(row),
                Provenance::Geometric => out.geometric.push(row),
            }
        }
        out
    }

    pub fn geometric_set(&self) -> CorrespondenceSet<f64> {
        rows_to_set(&self.geometric, Provenance::Geometric)
    }

    pub fn visual_set(&self) -> CorrespondenceSet<f64> {
        rows_to_set(&self.visual, Provenance::Visual)
    }
}

fn rows_to_set(rows: &[[f64; 7]], provenance: Provenance) -> CorrespondenceSet<f64> {
    rows.iter()
        .map(|r| {
            Correspondence::new(
                Point3::new(r[0], r[1], r[2]),
                Point3::new(r[3], r[4], r[5]),
                r[6],
                provenance,
            )
        })
        .collect()
}

/// The JSON report emitted by a registration run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    /// Estimated source-to-target transform, 4×4 row-major.
    pub transform: [[f64; 4]; 4],
    pub rotation_deg_axis_angle: AxisAngle,
    pub seed: u64,
    pub filter_applied: bool,
    pub skip_reason: ReportSkipReason,
    pub error_model: Option<ErrorModel>,
    pub stages: StageCounts,
    pub fit: FitStats,
    pub correspondences: ReportCorrespondences,
    pub timings_ms: Timings,
}

impl RegistrationReport {
    pub fn transform(&self) -> Result<RigidTransformD> {
        transform_from_rows(&self.transform)
    }

    /// Copy with zeroed timings; every other field is deterministic for a
    /// fixed seed, so this is the comparable form.
    pub fn without_timings(&self) -> Self {
        Self {
            timings_ms: Timings::default(),
            ..self.clone()
        }
    }
}

/// In-memory inputs to the pipeline: two camera-frame clouds and the
/// lifted visual correspondences.
#[derive(Debug, Clone)]
pub struct FramePairInputs {
    pub cloud0: PointCloudD,
    pub cloud1: PointCloudD,
    pub visual_read: usize,
    pub lifted: LiftedMatches<f64>,
}

/// Pipeline result: the report plus in-memory artifacts that evaluations
/// reuse (downsampled clouds, typed transform).
#[derive(Debug, Clone)]
pub struct RegisterOutput {
    pub report: RegistrationReport,
    pub transform: RigidTransformD,
    pub downsampled0: PointCloudD,
    pub downsampled1: PointCloudD,
}

/// Runs the full registration pipeline on loaded inputs.
pub fn register_pair(inputs: &FramePairInputs, cfg: &PipelineConfig) -> Result<RegisterOutput> {
    let total_start = Instant::now();
    let ms = |start: Instant| start.elapsed().as_secs_f64() * 1e3;

    let stage_start = Instant::now();
    let down0 = voxel_downsample(&inputs.cloud0, cfg.voxel_size_m)
        .map_err(|e| e.in_stage("preprocess"))?;
    let down1 = voxel_downsample(&inputs.cloud1, cfg.voxel_size_m)
        .map_err(|e| e.in_stage("preprocess"))?;
    let preprocess_ms = ms(stage_start);

    let stage_start = Instant::now();
    let with_normals0 = estimate_normals(&down0, cfg.normal_k).map_err(|e| e.in_stage("normals"))?;
    let with_normals1 = estimate_normals(&down1, cfg.normal_k).map_err(|e| e.in_stage("normals"))?;
    let radius = cfg.fpfh_radius();
    let fpfh0 = compute_fpfh(&with_normals0, radius).map_err(|e| e.in_stage("fpfh"))?;
    let fpfh1 = compute_fpfh(&with_normals1, radius).map_err(|e| e.in_stage("fpfh"))?;
    let mut featured0 = with_normals0;
    featured0.descriptors = Some(fpfh0.descriptors);
    let mut featured1 = with_normals1;
    featured1.descriptors = Some(fpfh1.descriptors);
    let features_ms = ms(stage_start);

    let stage_start = Instant::now();
    let mut c_geo = match_features(&featured0, &featured1).map_err(|e| e.in_stage("matching"))?;
    if let Some(ratio) = cfg.geo_ratio_threshold {
        c_geo = lowe_ratio_filter(
            &c_geo,
            featured0.descriptors.as_ref().expect("descriptors set"),
            featured1.descriptors.as_ref().expect("descriptors set"),
            ratio,
        )
        .map_err(|e| e.in_stage("matching"))?;
    }
    let matching_ms = ms(stage_start);

    let c_vis = &inputs.lifted.correspondences;
    let stage_start = Instant::now();
    let (merged, filter_applied, skip_reason, error_model) = if cfg.skip_filter {
        (c_vis.concat(&c_geo), false, ReportSkipReason::ForcedOff, None)
    } else {
        let outcome = run_filter(c_vis, &c_geo, &cfg.ransac_config(), &cfg.filter_config())
            .map_err(|e| e.in_stage("filter"))?;
        (
            outcome.merged,
            outcome.filter_applied,
            outcome.skip_reason.into(),
            outcome.error_model,
        )
    };
    let filter_ms = ms(stage_start);

    let stage_start = Instant::now();
    let (transform, fit) =
        fit_transform(&merged, &cfg.fitting_config()).map_err(|e| e.in_stage("fitting"))?;
    let fitting_ms = ms(stage_start);

    let correspondences = ReportCorrespondences::from_set(&merged);
    let stages = StageCounts {
        cloud0_points: inputs.cloud0.len(),
        cloud1_points: inputs.cloud1.len(),
        cloud0_downsampled: down0.len(),
        cloud1_downsampled: down1.len(),
        visual_read: inputs.visual_read,
        visual_lifted: inputs.lifted.correspondences.len(),
        visual_dropped: inputs.lifted.dropped,
        geo_matches: c_geo.len(),
        merged_visual: correspondences.visual.len(),
        merged_geometric: correspondences.geometric.len(),
    };

    let report = RegistrationReport {
        transform: transform_to_rows(&transform),
        rotation_deg_axis_angle: AxisAngle::from_transform(&transform),
        seed: cfg.seed,
        filter_applied,
        skip_reason,
        error_model,
        stages,
        fit,
        correspondences,
        timings_ms: Timings {
            preprocess_ms,
            features_ms,
            matching_ms,
            filter_ms,
            fitting_ms,
            total_ms: ms(total_start),
        },
    };
    Ok(RegisterOutput {
        report,
        transform,
        downsampled0: down0,
        downsampled1: down1,
    })
}

/// Evaluates an estimated transform against ground truth: rotation and
/// translation errors, chamfer distance over the downsampled clouds, and
/// inlier statistics of the geometric correspondences that reached the
/// fitting stage.
pub fn evaluate_pair(
    est: &RigidTransformD,
    gt: &RigidTransformD,
    down0: &PointCloudD,
    down1: &PointCloudD,
    geo_correspondences: &CorrespondenceSet<f64>,
    filter_applied: bool,
) -> Result<PairEvaluation> {
    let chamfer_mm = chamfer_distance(down0, down1, est)?;
    let stats = correspondence_inlier_stats(geo_correspondences, gt, &DEFAULT_INLIER_THRESHOLDS_M);
    Ok(PairEvaluation {
        re_deg: rotation_error(est, gt),
        te_cm: translation_error(est, gt),
        chamfer_mm,
        inlier_thresholds_m: stats.thresholds_m,
        inlier_ratios: stats.ratios,
        inlier_amounts: stats.amounts,
        filter_applied,
    })
}

/// Convenience for correspondence-level experiments (no clouds involved):
/// filter + fit, returning the transform and the filter outcome pieces.
pub fn register_correspondences(
    c_vis: &CorrespondenceSet<f64>,
    c_geo: &CorrespondenceSet<f64>,
    cfg: &PipelineConfig,
) -> Result<(RigidTransformD, bool, ReportSkipReason, Option<ErrorModel>)> {
    let (merged, applied, reason, model) = if cfg.skip_filter {
        (c_vis.concat(c_geo), false, ReportSkipReason::ForcedOff, None)
    } else {
        let outcome = run_filter(c_vis, c_geo, &cfg.ransac_config(), &cfg.filter_config())?;
        (
            outcome.merged,
            outcome.filter_applied,
            outcome.skip_reason.into(),
            outcome.error_model,
        )
    };
    let (transform, _) = fit_transform(&merged, &cfg.fitting_config())?;
    Ok((transform, applied, reason, model))
}

/// Applies the configured max-depth cutoff by zeroing samples beyond it.
pub fn apply_depth_cutoff(
    image: &crate::rgbd::DepthImage,
    depth_scale: f64,
    max_depth_m: f64,
) -> Result<crate::rgbd::DepthImage> {
    let cutoff_units = max_depth_m * depth_scale;
    let values = image
        .values()
        .iter()
        .map(|&v| {
            if (v as f64) > cutoff_units {
                0
            } else {
                v
            }
        })
        .collect();
    crate::rgbd::DepthImage::new(image.width(), image.height(), values)
}
