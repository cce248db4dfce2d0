//! Perspective-n-point: camera pose from 2D-3D correspondences.
//!
//! A DLT over the full 3x4 projection seeds the pose; Levenberg-Marquardt
//! on the pixel reprojection error polishes it. The world points are
//! centered on their centroid (ECEF magnitudes would otherwise swamp the
//! DLT conditioning) and the shift is folded back into the translation at
//! the end.

use nalgebra::{DMatrix, DVector, Matrix2x3, Matrix3x4, SVD};

use crate::{Mat3, Vec3};

use super::{CameraError, CameraModel, Correspondence, Intrinsics};

const LM_MAX_ITERS: usize = 100;
const LM_GRAD_TOL: f64 = 1e-10;
const LM_LAMBDA_INIT: f64 = 1e-3;
const LM_LAMBDA_MAX: f64 = 1e12;

/// Estimates the camera pose from at least 6 correspondences.
///
/// Fails with [`CameraError::DegenerateGeometry`] when the points cannot
/// pin down a pose (too few, coplanar, or collinear) and with
/// [`CameraError::BehindCamera`] when the best pose still leaves points
/// at non-positive depth.
pub fn solve_pnp(
    corrs: &[Correspondence],
    intrinsics: &Intrinsics,
) -> Result<CameraModel, CameraError> {
    intrinsics.validate()?;
    if corrs.len() < 6 {
        return Err(CameraError::DegenerateGeometry(format!(
            "{} correspondences, need at least 6",
            corrs.len()
        )));
    }

    // Center and scale the world points.
    let n = corrs.len();
    let centroid = corrs
        .iter()
        .fold(Vec3::zeros(), |acc, c| acc + c.world.as_vector())
        / n as f64;
    let centered: Vec<Vec3> = corrs
        .iter()
        .map(|c| c.world.as_vector() - centroid)
        .collect();
    let scale = centered.iter().map(Vec3::norm).sum::<f64>() / n as f64;
    if scale < 1e-9 {
        return Err(CameraError::DegenerateGeometry(
            "all world points coincide".into(),
        ));
    }

    // DLT on K-normalized pixels and unit-scaled world points.
    let mut a = DMatrix::zeros(2 * n, 12);
    for (i, c) in corrs.iter().enumerate() {
        let x = centered[i] / scale;
        let p = intrinsics.normalize(c.pixel);
        a.row_mut(2 * i).copy_from_slice(&[
            x.x,
            x.y,
            x.z,
            1.0,
            0.0,
            0.0,
            0.0,
            0.0,
            -p.x * x.x,
            -p.x * x.y,
            -p.x * x.z,
            -p.x,
        ]);
        a.row_mut(2 * i + 1).copy_from_slice(&[
            0.0,
            0.0,
            0.0,
            0.0,
            x.x,
            x.y,
            x.z,
            1.0,
            -p.y * x.x,
            -p.y * x.y,
            -p.y * x.z,
            -p.y,
        ]);
    }
    let svd = SVD::new(a, false, true);
    let vt = svd.v_t.as_ref().expect("svd requested v_t");
    let sv = &svd.singular_values;
    // Coplanar or otherwise deficient geometry leaves a second null
    // direction; the pose would then be arbitrary.
    if sv[10] < 1e-7 * sv[0] {
        return Err(CameraError::DegenerateGeometry(
            "correspondences are coplanar or ill-conditioned".into(),
        ));
    }
    let h = vt.row(11);
    let mut p_mat = Matrix3x4::from_row_slice(h.transpose().as_slice());

    // Fix the projective sign so det(M) > 0; the true M is a positive
    // multiple of a rotation, whose determinant is positive.
    if p_mat.fixed_view::<3, 3>(0, 0).determinant() < 0.0 {
        p_mat = -p_mat;
    }
    let m = p_mat.fixed_view::<3, 3>(0, 0).into_owned();
    let msvd = SVD::new(m, true, true);
    let u = msvd.u.as_ref().unwrap();
    let vt_m = msvd.v_t.as_ref().unwrap();
    let rotation0: Mat3 = u * vt_m;
    let sigma = msvd.singular_values.mean();
    if sigma < 1e-12 {
        return Err(CameraError::DegenerateGeometry(
            "vanishing projection".into(),
        ));
    }
    // Undo the world scaling; the pose is now relative to centered ECEF.
    let t0 = p_mat.column(3) / sigma * scale;

    let (rotation, translation) = refine(rotation0, t0.into_owned(), &centered, corrs, intrinsics)?;

    // Depths must be positive for every correspondence.
    if centered
        .iter()
        .any(|x| (rotation * x + translation).z <= 0.0)
    {
        return Err(CameraError::BehindCamera);
    }

    // Undo the centroid shift.
    let t_world = translation - rotation * centroid;
    CameraModel::new(*intrinsics, rotation, t_world)
}

/// Sum of squared pixel residuals, or None if any depth is non-positive.
fn residuals(
    rotation: &Mat3,
    translation: &Vec3,
    centered: &[Vec3],
    corrs: &[Correspondence],
    intr: &Intrinsics,
) -> Option<(DVector<f64>, f64)> {
    let mut r = DVector::zeros(2 * centered.len());
    for (i, x) in centered.iter().enumerate() {
        let pc = rotation * x + translation;
        if pc.z <= 1e-12 {
            return None;
        }
        let u = intr.fx * pc.x / pc.z + intr.cx;
        let v = intr.fy * pc.y / pc.z + intr.cy;
        r[2 * i] = u - corrs[i].pixel.x;
        r[2 * i + 1] = v - corrs[i].pixel.y;
    }
    let cost = r.norm_squared();
    Some((r, cost))
}

/// LM with a left multiplicative so(3) update: R <- exp([dw]x) R.
fn refine(
    mut rotation: Mat3,
    mut translation: Vec3,
    centered: &[Vec3],
    corrs: &[Correspondence],
    intr: &Intrinsics,
) -> Result<(Mat3, Vec3), CameraError> {
    let n = centered.len();
    let (mut r, mut cost) = residuals(&rotation, &translation, centered, corrs, intr)
        .ok_or(CameraError::BehindCamera)?;
    let mut lambda = LM_LAMBDA_INIT;

    for _ in 0..LM_MAX_ITERS {
        // Jacobian of pixel residuals wrt (dw, dt).
        let mut j = DMatrix::zeros(2 * n, 6);
        for (i, x) in centered.iter().enumerate() {
            let pc = rotation * x + translation;
            let z2 = pc.z * pc.z;
            let proj = Matrix2x3::new(
                intr.fx / pc.z,
                0.0,
                -intr.fx * pc.x / z2,
                0.0,
                intr.fy / pc.z,
                -intr.fy * pc.y / z2,
            );
            let rx = pc - translation;
            let d_rot = proj * (-skew(rx));
            let d_t = proj;
            for k in 0..3 {
                j[(2 * i, k)] = d_rot[(0, k)];
                j[(2 * i + 1, k)] = d_rot[(1, k)];
                j[(2 * i, 3 + k)] = d_t[(0, k)];
                j[(2 * i + 1, 3 + k)] = d_t[(1, k)];
            }
        }
        let g = j.transpose() * &r;
        if g.norm() < LM_GRAD_TOL {
            break;
        }
        let h = j.transpose() * &j;

        // Damped step; grow lambda until the cost drops.
        let mut stepped = false;
        while lambda <= LM_LAMBDA_MAX {
            let mut damped = h.clone();
            for k in 0..6 {
                damped[(k, k)] += lambda * h[(k, k)].max(1e-12);
            }
            let delta = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let dw = Vec3::new(delta[0], delta[1], delta[2]);
            let dt = Vec3::new(delta[3], delta[4], delta[5]);
            let rot_new = so3_exp(dw) * rotation;
            let t_new = translation + dt;
            if let Some((r_new, cost_new)) = residuals(&rot_new, &t_new, centered, corrs, intr) {
                if cost_new < cost {
                    rotation = rot_new;
                    translation = t_new;
                    r = r_new;
                    cost = cost_new;
                    lambda = (lambda * 0.1).max(1e-15);
                    stepped = true;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !stepped {
            break;
        }
    }
    Ok((rotation, translation))
}

fn skew(v: Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues exponential map so(3) -> SO(3).
fn so3_exp(w: Vec3) -> Mat3 {
    let theta = w.norm();
    let k = skew(w);
    if theta < 1e-12 {
        return Mat3::identity() + k;
    }
    let (s, c) = theta.sin_cos();
    Mat3::identity() + k * (s / theta) + k * k * ((1.0 - c) / (theta * theta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::reprojection_report;
    use crate::camera::testutil::rig;
    use crate::Vec2;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    /// Keypoints spread in depth, bearing and height in front of the rig.
    fn keypoints(rig: &crate::camera::testutil::Rig) -> Vec<Correspondence> {
        let spots = [
            (-60.0, 120.0, -18.0),
            (10.0, 140.0, -5.0),
            (75.0, 160.0, -21.0),
            (-30.0, 220.0, 3.0),
            (40.0, 260.0, -12.0),
            (120.0, 300.0, -8.0),
            (-90.0, 340.0, -2.0),
            (0.0, 420.0, -16.0),
            (90.0, 460.0, 6.0),
            (-50.0, 520.0, -10.0),
            (160.0, 560.0, -20.0),
            (60.0, 640.0, -1.0),
        ];
        spots
            .iter()
            .map(|&(e, n, u)| {
                let world = rig.world(e, n, u);
                Correspondence {
                    world,
                    pixel: rig.model.project(&world).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn recovers_exact_pose_from_noiseless_points() {
        let rig = rig();
        let corrs = keypoints(&rig);
        let est = solve_pnp(&corrs, &rig.model.intrinsics).unwrap();

        let dr = est.rotation * rig.model.rotation.transpose();
        let angle = ((dr.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
        assert!(angle < 1e-8, "rotation error {angle} rad");
        let dc = (est.center() - rig.model.center()).norm();
        assert!(dc < 1e-4, "center error {dc} m");
        let rep = reprojection_report(&est, &corrs, 1920, 1080);
        assert!(rep.mae_px < 1e-7, "reprojection {} px", rep.mae_px);
    }

    #[test]
    fn too_few_points_is_degenerate() {
        let rig = rig();
        let corrs = keypoints(&rig);
        assert!(matches!(
            solve_pnp(&corrs[..5], &rig.model.intrinsics),
            Err(CameraError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn coplanar_points_are_degenerate() {
        let rig = rig();
        // All keypoints on the water plane (u = -22 relative to the rig).
        let corrs: Vec<Correspondence> = [
            (-60.0, 120.0),
            (10.0, 140.0),
            (75.0, 160.0),
            (-30.0, 220.0),
            (40.0, 260.0),
            (120.0, 300.0),
            (-90.0, 340.0),
            (0.0, 420.0),
        ]
        .iter()
        .map(|&(e, n)| {
            let world = rig.world(e, n, -22.0);
            Correspondence {
                world,
                pixel: rig.model.project(&world).unwrap(),
            }
        })
        .collect();
        assert!(matches!(
            solve_pnp(&corrs, &rig.model.intrinsics),
            Err(CameraError::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn tolerates_pixel_noise() {
        let rig = rig();
        let mut rng = StdRng::seed_from_u64(42);
        let noise = Normal::new(0.0, 0.5).unwrap();
        let noisy: Vec<Correspondence> = keypoints(&rig)
            .into_iter()
            .map(|c| Correspondence {
                world: c.world,
                pixel: c.pixel + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng)),
            })
            .collect();
        let est = solve_pnp(&noisy, &rig.model.intrinsics).unwrap();
        let rep = reprojection_report(&est, &noisy, 1920, 1080);
        assert!(rep.mae_px < 2.0, "reprojection {} px", rep.mae_px);
        let dc = (est.center() - rig.model.center()).norm();
        assert!(dc < 10.0, "center error {dc} m");
    }
}
