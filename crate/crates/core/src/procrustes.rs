//! Closed-form weighted rigid alignment of point correspondences.

use nalgebra::{Matrix3, Vector3};

use crate::correspondence::CorrespondenceSet;
use crate::error::{Error, Result};
use crate::scalar::{real, Real};
use crate::transform::RigidTransform;

/// Relative singular-value cutoff below which the weighted cross-covariance
/// is treated as rank-deficient.
const RANK_TOL: f64 = 1e-9;

/// Solves for the rigid transform minimizing `Σ wᵢ‖T(pᵢ) − qᵢ‖²`.
///
/// The rotation comes from the SVD of the weighted cross-covariance of the
/// centered points, with the determinant-sign correction applied on the
/// smallest singular-value axis so the result is always a proper rotation.
pub fn weighted_procrustes<S: Real>(c: &CorrespondenceSet<S>) -> Result<RigidTransform<S>> {
    if c.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "need at least 3 correspondences, have {}",
            c.len()
        )));
    }
    let total_weight = c.total_weight();
    if total_weight <= S::zero() {
        return Err(Error::DegenerateInput("total weight is zero".into()));
    }

    let mut source_centroid = Vector3::zeros();
    let mut target_centroid = Vector3::zeros();
    for item in c {
        source_centroid += item.source.coords * item.weight;
        target_centroid += item.target.coords * item.weight;
    }
    source_centroid /= total_weight;
    target_centroid /= total_weight;

    let mut covariance = Matrix3::<S>::zeros();
    for item in c {
        let p = item.source.coords - source_centroid;
        let q = item.target.coords - target_centroid;
        covariance += (p * q.transpose()) * item.weight;
    }

    let svd = covariance.svd(true, true);
    let sigma = svd.singular_values;
    // Singular values are sorted descending; rank < 2 leaves the rotation
    // about the dominant axis unconstrained.
    if sigma[0] <= S::zero() || sigma[1] <= sigma[0] * real(RANK_TOL) {
        return Err(Error::DegenerateInput(
            "rank-deficient weighted covariance (points collinear or coincident)".into(),
        ));
    }
    let u = svd.u.expect("svd with u requested");
    let v_t = svd.v_t.expect("svd with v_t requested");
    let v = v_t.transpose();

    let d = (v * u.transpose()).determinant();
    let mut correction = Matrix3::identity();
    if d < S::zero() {
        correction[(2, 2)] = -S::one();
    }
    let rotation = v * correction * u.transpose();
    let translation = target_centroid - rotation * source_centroid;
    Ok(RigidTransform::from_parts_unchecked(rotation, translation))
}

/// Weighted sum of squared residuals `Σ wᵢ‖T(pᵢ) − qᵢ‖²`.
pub fn alignment_cost<S: Real>(c: &CorrespondenceSet<S>, t: &RigidTransform<S>) -> S {
    c.iter().fold(S::zero(), |acc, item| {
        let r = item.residual(t);
        acc + item.weight * r * r
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correspondence::{Correspondence, Provenance};
    use crate::test_util::{
        perturbed_transform, random_point, random_transform, rotation_gap, translation_gap,
    };
    use crate::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn exact_set(
        rng: &mut ChaCha8Rng,
        t: &RigidTransform<f64>,
        n: usize,
        weight: f64,
    ) -> CorrespondenceSet<f64> {
        (0..n)
            .map(|_| {
                let p = random_point(rng, 2.0);
                Correspondence::new(p, t.apply(&p), weight, Provenance::Geometric)
            })
            .collect()
    }

    fn transform_gap(a: &RigidTransform<f64>, b: &RigidTransform<f64>) -> (f64, f64) {
        (rotation_gap(a, b), translation_gap(a, b))
    }

    #[test]
    fn recovers_known_transform_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let t = random_transform(&mut rng);
            let set = exact_set(&mut rng, &t, 10, 1.0);
            let est = weighted_procrustes(&set).unwrap();
            let (rot_err, trans_err) = transform_gap(&est, &t);
            assert!(rot_err < 1e-9, "rotation error {rot_err}");
            assert!(trans_err < 1e-9, "translation error {trans_err}");
        }
    }

    #[test]
    fn identity_when_sources_equal_targets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let set: CorrespondenceSet<f64> = (0..10)
            .map(|_| {
                let p = random_point(&mut rng, 2.0);
                Correspondence::new(p, p, 1.0, Provenance::Geometric)
            })
            .collect();
        let est = weighted_procrustes(&set).unwrap();
        let (rot_err, trans_err) = transform_gap(&est, &RigidTransform::identity());
        assert!(rot_err < 1e-12);
        assert!(trans_err < 1e-12);
    }

    #[test]
    fn zero_weight_outliers_cannot_move_the_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_transform(&mut rng);
        let mut set = exact_set(&mut rng, &t, 8, 1.0);
        for _ in 0..4 {
            set.push(Correspondence::new(
                random_point(&mut rng, 2.0),
                random_point(&mut rng, 5.0),
                0.0,
                Provenance::Geometric,
            ));
        }
        let est = weighted_procrustes(&set).unwrap();
        let (rot_err, trans_err) = transform_gap(&est, &t);
        assert!(rot_err < 1e-9);
        assert!(trans_err < 1e-9);
    }

    #[test]
    fn rejects_too_few_correspondences() {
        let set: CorrespondenceSet<f64> = (0..2)
            .map(|i| {
                let p = Point3::new(i as f64, 0.0, 0.0);
                Correspondence::new(p, p, 1.0, Provenance::Visual)
            })
            .collect();
        assert!(matches!(
            weighted_procrustes(&set),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn rejects_zero_total_weight() {
        let set: CorrespondenceSet<f64> = (0..5)
            .map(|i| {
                let p = Point3::new(i as f64, (i * i) as f64, 0.0);
                Correspondence::new(p, p, 0.0, Provenance::Visual)
            })
            .collect();
        assert!(weighted_procrustes(&set).is_err());
    }

    #[test]
    fn rejects_collinear_sources() {
        let t = RigidTransform::from_axis_angle(
            nalgebra::Vector3::y_axis(),
            0.4,
            nalgebra::Vector3::new(0.1, 0.2, 0.3),
        );
        let set: CorrespondenceSet<f64> = (0..6)
            .map(|i| {
                let p = Point3::new(i as f64 * 0.3, 0.0, 0.0);
                Correspondence::new(p, t.apply(&p), 1.0, Provenance::Geometric)
            })
            .collect();
        assert!(matches!(
            weighted_procrustes(&set),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn output_is_a_proper_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            // Noisy, weighted, non-degenerate instances.
            let t = random_transform(&mut rng);
            let set: CorrespondenceSet<f64> = (0..12)
                .map(|_| {
                    let p = random_point(&mut rng, 2.0);
                    let noise = random_point(&mut rng, 0.02).coords;
                    Correspondence::new(
                        p,
                        t.apply(&p) + noise,
                        rng.random_range(0.1..2.0),
                        Provenance::Geometric,
                    )
                })
                .collect();
            let est = weighted_procrustes(&set).unwrap();
            est.validate().unwrap();
        }
    }

    #[test]
    fn planar_points_still_recover_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let t = random_transform(&mut rng);
        let set: CorrespondenceSet<f64> = (0..10)
            .map(|_| {
                let mut p = random_point(&mut rng, 2.0);
                p.z = 0.0;
                Correspondence::new(p, t.apply(&p), 1.0, Provenance::Geometric)
            })
            .collect();
        let est = weighted_procrustes(&set).unwrap();
        est.validate().unwrap();
        let (rot_err, trans_err) = transform_gap(&est, &t);
        assert!(rot_err < 1e-9);
        assert!(trans_err < 1e-9);
    }

    #[test]
    fn scaling_all_weights_leaves_output_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let t = random_transform(&mut rng);
        let base: CorrespondenceSet<f64> = (0..15)
            .map(|_| {
                let p = random_point(&mut rng, 2.0);
                let noise = random_point(&mut rng, 0.01).coords;
                Correspondence::new(
                    p,
                    t.apply(&p) + noise,
                    rng.random_range(0.1..1.0),
                    Provenance::Geometric,
                )
            })
            .collect();
        let scaled: CorrespondenceSet<f64> = base
            .iter()
            .map(|c| {
                let mut c = *c;
                c.weight *= 37.5;
                c
            })
            .collect();
        let a = weighted_procrustes(&base).unwrap();
        let b = weighted_procrustes(&scaled).unwrap();
        for (x, y) in a
            .to_homogeneous()
            .iter()
            .zip(b.to_homogeneous().iter())
        {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn solution_is_locally_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let t = random_transform(&mut rng);
        let set: CorrespondenceSet<f64> = (0..20)
            .map(|_| {
                let p = random_point(&mut rng, 2.0);
                let noise = random_point(&mut rng, 0.02).coords;
                Correspondence::new(
                    p,
                    t.apply(&p) + noise,
                    rng.random_range(0.5..1.5),
                    Provenance::Geometric,
                )
            })
            .collect();
        let est = weighted_procrustes(&set).unwrap();
        let best = alignment_cost(&set, &est);
        for _ in 0..1000 {
            let perturbed = perturbed_transform(&mut rng, &est, 1e-3, 1e-3);
            assert!(alignment_cost(&set, &perturbed) >= best - 1e-12);
        }
    }
}
