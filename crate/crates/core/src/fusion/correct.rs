//! Pose correction against the detection rectangle, height inference,
//! and 3D box assembly.
//!
//! Four constraint planes pass through the camera center: alpha contains
//! the detection's left edge and the vessel up axis, beta its right edge,
//! gamma the bottom edge's back-projection, delta the top edge's. Gamma
//! is an equality anchor: the segment's lowest-projecting corner must
//! land on it. Alpha and beta are one-sided: they act only on corners
//! protruding past them, so a segment already inside the wedge receives
//! no side push. Delta then gives the height.
//!
//! The closed-form step (bottom term plus half of each violated side
//! term) is a contraction, not a projection: the planes are oblique, so
//! one application leaves coupling residuals. It is iterated to a fixed
//! point, which is what makes a second correction a no-op.

use crate::camera::CameraModel;
use crate::geodesy::EcefCoord;
use crate::{Vec2, Vec3};

use super::{Box3D, Detection2D, FusionError, PlaneSegment3};

const STEP_TOL_M: f64 = 1e-9;
const MAX_STEPS: usize = 100;

/// Correction result: the total translation and which side constraints
/// participated.
#[derive(Debug, Clone, PartialEq)]
pub struct Correction {
    pub delta: Vec3,
    pub alpha_used: bool,
    pub beta_used: bool,
    pub steps: usize,
}

/// Unit normal of a constraint plane through the camera center, oriented
/// so the detection-interior reference ray has positive dot product.
fn oriented_normal(raw: Vec3, interior_ref: Vec3, label: &str) -> Result<Vec3, FusionError> {
    let norm = raw.norm();
    if norm < 1e-12 {
        return Err(FusionError::DegeneratePlanes(format!(
            "{label} plane normal vanishes"
        )));
    }
    let n = raw / norm;
    let side = n.dot(&interior_ref);
    if side.abs() < 1e-12 {
        return Err(FusionError::DegeneratePlanes(format!(
            "{label} plane contains the detection center ray"
        )));
    }
    Ok(if side < 0.0 { -n } else { n })
}

/// Computes the translation that reconciles the segment with the
/// detection rectangle.
///
/// The returned delta is the converged total; applying the correction to
/// the already-corrected segment yields a delta of norm < 1e-6 m.
pub fn correction_vector(
    model: &CameraModel,
    det: &Detection2D,
    seg: &PlaneSegment3,
    image_w: f64,
    image_h: f64,
    border_margin_px: f64,
) -> Result<Correction, FusionError> {
    let c = model.center().as_vector();
    let zv = seg.frame.z;
    let r = det.rect;
    let p2 = Vec2::new(r.min_x, r.max_y); // bottom-left
    let p4 = Vec2::new(r.max_x, r.max_y); // bottom-right
    let ray_p2 = model.unproject(p2);
    let ray_p4 = model.unproject(p4);
    let interior = model.unproject(Vec2::new(r.center_x(), (r.min_y + r.max_y) / 2.0));

    let n_alpha = oriented_normal(zv.cross(&ray_p2), interior, "alpha")?;
    let n_beta = oriented_normal(zv.cross(&ray_p4), interior, "beta")?;
    let n_gamma = oriented_normal(ray_p2.cross(&ray_p4), interior, "gamma")?;

    // A side constraint is only usable when its detection edge is real,
    // i.e. not clamped to the image border.
    let alpha_used = !r.on_left_border(border_margin_px);
    let beta_used = !r.on_right_border(image_w, border_margin_px);
    let _ = image_h;
    let side_weight = if alpha_used && beta_used { 0.5 } else { 1.0 };

    let mut corners: [Vec3; 4] = seg.corners.map(|p| p.as_vector());
    let mut total = Vec3::zeros();
    let mut steps = 0;
    for _ in 0..MAX_STEPS {
        steps += 1;
        // Gamma: the corner that projects lowest in the image must land
        // exactly on the bottom-edge plane.
        let mut low_v = f64::NEG_INFINITY;
        let mut low_d = 0.0;
        for p in &corners {
            let px = model
                .project(&EcefCoord::from_vector(*p))
                .map_err(|_| FusionError::BehindCamera)?;
            if px.y > low_v {
                low_v = px.y;
                low_d = -(p - c).dot(&n_gamma);
            }
        }
        let mut step = n_gamma * low_d;

        // Sides: push back only when the most-protruding corner has
        // crossed its edge plane; compliant sides contribute nothing.
        if alpha_used {
            let worst = corners
                .iter()
                .map(|p| (p - c).dot(&n_alpha))
                .fold(f64::INFINITY, f64::min);
            if worst < 0.0 {
                step += n_alpha * (-worst * side_weight);
            }
        }
        if beta_used {
            let worst = corners
                .iter()
                .map(|p| (p - c).dot(&n_beta))
                .fold(f64::INFINITY, f64::min);
            if worst < 0.0 {
                step += n_beta * (-worst * side_weight);
            }
        }

        for p in &mut corners {
            *p += step;
        }
        total += step;
        if step.norm() < STEP_TOL_M {
            break;
        }
    }
    Ok(Correction {
        delta: total,
        alpha_used,
        beta_used,
        steps,
    })
}

/// Vessel height from the detection's top edge: the delta plane through
/// the camera center and the top edge's back-projected rays, measured
/// along z_v from each corrected corner; the largest lift wins so the
/// box top touches the 2D top edge.
#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN heights must fail too
pub fn infer_height(
    model: &CameraModel,
    det: &Detection2D,
    seg: &PlaneSegment3,
) -> Result<f64, FusionError> {
    let r = det.rect;
    let p1 = Vec2::new(r.min_x, r.min_y);
    let p3 = Vec2::new(r.max_x, r.min_y);
    let raw = model.unproject(p1).cross(&model.unproject(p3));
    let norm = raw.norm();
    if norm < 1e-12 {
        return Err(FusionError::DegeneratePlanes(
            "delta plane normal vanishes".into(),
        ));
    }
    let n_delta = raw / norm;
    let zv = seg.frame.z;
    let denom = zv.dot(&n_delta);
    if denom.abs() < 1e-12 {
        return Err(FusionError::DegeneratePlanes(
            "vessel up axis parallel to delta plane".into(),
        ));
    }
    let c = model.center().as_vector();
    let h = seg
        .corners
        .iter()
        .map(|p| -(p.as_vector() - c).dot(&n_delta) / denom)
        .fold(f64::NEG_INFINITY, f64::max);
    // Sub-nanometer heights are float residue of a top edge through the
    // corrected corners (y1 = y2), not a real box.
    if !(h > 1e-9) {
        return Err(FusionError::NonPositiveHeight(h));
    }
    Ok(h)
}

/// Lifts the corrected segment by the vessel height into a full box.
pub fn build_box3d(seg: &PlaneSegment3, height_m: f64) -> Box3D {
    let lift = seg.frame.z * height_m;
    let corners = [
        seg.corners[0],
        seg.corners[1],
        seg.corners[2],
        seg.corners[3],
        seg.corners[0] + lift,
        seg.corners[1] + lift,
        seg.corners[2] + lift,
        seg.corners[3] + lift,
    ];
    let centroid = EcefCoord::from_vector(
        corners
            .iter()
            .fold(Vec3::zeros(), |acc, p| acc + p.as_vector())
            / 8.0,
    );
    Box3D {
        corners,
        centroid,
        frame: seg.frame,
        height_m,
    }
}
