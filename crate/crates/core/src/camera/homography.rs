//! Plane-to-image homography estimation.
//!
//! The normalized DLT gives the algebraic estimate; by default it is then
//! polished by LM on the symmetric transfer error, which is the cost that
//! actually matters (the DLT minimizes an algebraic residual). Keypoints
//! off the plane are flattened onto it first, which is the whole point of
//! the homography baseline: that flattening is where it loses to PnP.

use nalgebra::{DMatrix, DVector, Vector3, SVD};

use crate::geodesy::EcefCoord;
use crate::{Mat3, Vec2};

use super::plane::InterimPlane;
use super::{CameraError, Correspondence, PixelProjector};

const LM_MAX_ITERS: usize = 100;
const LM_GRAD_TOL: f64 = 1e-12;
const LM_LAMBDA_INIT: f64 = 1e-3;
const LM_LAMBDA_MAX: f64 = 1e12;

/// Whether to stop at the DLT estimate or polish it geometrically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Refinement {
    /// Normalized DLT only.
    Algebraic,
    /// DLT then LM on the symmetric transfer error.
    #[default]
    Geometric,
}

/// Homography from in-plane 2D coordinates to pixels, with the plane it
/// is anchored to. The matrix is scaled so its (2,2) entry is 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Homography {
    pub matrix: Mat3,
    pub plane: InterimPlane,
}

impl Homography {
    /// Maps in-plane coordinates to pixels.
    pub fn map_plane(&self, k: Vec2) -> Option<Vec2> {
        apply(&self.matrix, k)
    }
}

impl PixelProjector for Homography {
    /// Projects a world point by flattening it onto the plane first.
    fn pixel_of(&self, world: &EcefCoord) -> Option<Vec2> {
        self.map_plane(self.plane.to_plane(world))
    }
}

fn apply(h: &Mat3, p: Vec2) -> Option<Vec2> {
    let q = h * Vector3::new(p.x, p.y, 1.0);
    (q.z.abs() > 1e-12).then(|| Vec2::new(q.x / q.z, q.y / q.z))
}

/// Estimates the plane-to-image homography from correspondences.
///
/// Needs at least 4; fails when the flattened points (or the pixels) are
/// degenerate (coincident or mostly collinear).
pub fn estimate_homography(
    plane: &InterimPlane,
    corrs: &[Correspondence],
    refinement: Refinement,
) -> Result<Homography, CameraError> {
    if corrs.len() < 4 {
        return Err(CameraError::DegenerateGeometry(format!(
            "{} correspondences, need at least 4",
            corrs.len()
        )));
    }
    let src: Vec<Vec2> = corrs.iter().map(|c| plane.to_plane(&c.world)).collect();
    let dst: Vec<Vec2> = corrs.iter().map(|c| c.pixel).collect();

    let mut h = dlt(&src, &dst)?;
    if refinement == Refinement::Geometric {
        h = refine(h, &src, &dst);
    }
    Ok(Homography {
        matrix: h,
        plane: plane.clone(),
    })
}

/// Similarity that moves the centroid to the origin and the mean distance
/// to sqrt(2).
fn normalizer(pts: &[Vec2]) -> Result<Mat3, CameraError> {
    let n = pts.len() as f64;
    let c = pts.iter().fold(Vec2::zeros(), |a, p| a + p) / n;
    let mean_dist = pts.iter().map(|p| (p - c).norm()).sum::<f64>() / n;
    if mean_dist < 1e-12 {
        return Err(CameraError::DegenerateGeometry(
            "all points coincide".into(),
        ));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Mat3::new(s, 0.0, -s * c.x, 0.0, s, -s * c.y, 0.0, 0.0, 1.0))
}

fn dlt(src: &[Vec2], dst: &[Vec2]) -> Result<Mat3, CameraError> {
    let t_src = normalizer(src)?;
    let t_dst = normalizer(dst)?;
    let norm =
        |t: &Mat3, p: &Vec2| Vec2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)]);

    let n = src.len();
    let mut a = DMatrix::zeros(2 * n, 9);
    for i in 0..n {
        let s = norm(&t_src, &src[i]);
        let d = norm(&t_dst, &dst[i]);
        a.row_mut(2 * i).copy_from_slice(&[
            0.0,
            0.0,
            0.0,
            -s.x,
            -s.y,
            -1.0,
            d.y * s.x,
            d.y * s.y,
            d.y,
        ]);
        a.row_mut(2 * i + 1).copy_from_slice(&[
            s.x,
            s.y,
            1.0,
            0.0,
            0.0,
            0.0,
            -d.x * s.x,
            -d.x * s.y,
            -d.x,
        ]);
    }
    let svd = SVD::new(a, false, true);
    let sv = &svd.singular_values;
    if sv[7] < 1e-10 * sv[0] {
        return Err(CameraError::DegenerateGeometry(
            "points are collinear; homography underdetermined".into(),
        ));
    }
    let h_vec = svd.v_t.as_ref().unwrap().row(8);
    let h_norm = Mat3::from_row_slice(h_vec.transpose().as_slice());

    let t_dst_inv = t_dst.try_inverse().expect("similarity is invertible");
    let h = t_dst_inv * h_norm * t_src;
    scale_h(h)
}

fn scale_h(h: Mat3) -> Result<Mat3, CameraError> {
    if h[(2, 2)].abs() < 1e-12 {
        return Err(CameraError::DegenerateGeometry(
            "homography has h33 = 0".into(),
        ));
    }
    Ok(h / h[(2, 2)])
}

/// Symmetric transfer residuals for the 8-parameter form (h33 = 1):
/// forward error on every pair, then backward error on every pair.
fn transfer_residuals(h: &Mat3, src: &[Vec2], dst: &[Vec2]) -> Option<(DVector<f64>, f64)> {
    let inv = h.try_inverse()?;
    let mut r = DVector::zeros(4 * src.len());
    for i in 0..src.len() {
        let f = apply(h, src[i])?;
        let b = apply(&inv, dst[i])?;
        r[4 * i] = f.x - dst[i].x;
        r[4 * i + 1] = f.y - dst[i].y;
        r[4 * i + 2] = b.x - src[i].x;
        r[4 * i + 3] = b.y - src[i].y;
    }
    let cost = r.norm_squared();
    Some((r, cost))
}

fn params_of(h: &Mat3) -> [f64; 8] {
    [
        h[(0, 0)],
        h[(0, 1)],
        h[(0, 2)],
        h[(1, 0)],
        h[(1, 1)],
        h[(1, 2)],
        h[(2, 0)],
        h[(2, 1)],
    ]
}

fn h_of(p: &[f64; 8]) -> Mat3 {
    Mat3::new(p[0], p[1], p[2], p[3], p[4], p[5], p[6], p[7], 1.0)
}

/// LM over the 8 free entries with a numeric central-difference Jacobian.
fn refine(h0: Mat3, src: &[Vec2], dst: &[Vec2]) -> Mat3 {
    let mut p = params_of(&h0);
    let Some((mut r, mut cost)) = transfer_residuals(&h_of(&p), src, dst) else {
        return h0;
    };
    let mut lambda = LM_LAMBDA_INIT;

    for _ in 0..LM_MAX_ITERS {
        let m = r.len();
        let mut j = DMatrix::zeros(m, 8);
        let mut ok = true;
        for k in 0..8 {
            let step = 1e-7 * p[k].abs().max(1.0);
            let mut hi = p;
            let mut lo = p;
            hi[k] += step;
            lo[k] -= step;
            let (Some((rh, _)), Some((rl, _))) = (
                transfer_residuals(&h_of(&hi), src, dst),
                transfer_residuals(&h_of(&lo), src, dst),
            ) else {
                ok = false;
                break;
            };
            for row in 0..m {
                j[(row, k)] = (rh[row] - rl[row]) / (2.0 * step);
            }
        }
        if !ok {
            break;
        }
        let g = j.transpose() * &r;
        if g.norm() < LM_GRAD_TOL {
            break;
        }
        let ham = j.transpose() * &j;

        let mut stepped = false;
        while lambda <= LM_LAMBDA_MAX {
            let mut damped = ham.clone();
            for k in 0..8 {
                damped[(k, k)] += lambda * ham[(k, k)].max(1e-12);
            }
            let delta = match damped.clone().cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let mut cand = p;
            for k in 0..8 {
                cand[k] += delta[k];
            }
            if let Some((r_new, cost_new)) = transfer_residuals(&h_of(&cand), src, dst) {
                if cost_new < cost {
                    p = cand;
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
    h_of(&p)
}
