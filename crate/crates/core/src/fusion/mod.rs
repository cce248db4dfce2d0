//! Fusing AIS vessel state with 2D detections: footprint projection,
//! detection association, pose correction, and 3D box construction.
//!
//! The AIS side of an image is a set of water-level plane segments (hull
//! footprints placed by dead-reckoned AIS positions); the vision side is
//! a set of detection rectangles. Association is a minimum-cost bipartite
//! matching on a rectangle-discrepancy cost, and each accepted pair is
//! then corrected in 3D so the footprint agrees with the detection.

pub mod assign;
pub mod correct;

pub use assign::{associate, solve_assignment, Association, AssociationOutcome, Unmatched};
pub use correct::{build_box3d, correction_vector, infer_height, Correction};

use thiserror::Error;

use crate::ais::{dead_reckon, NotPoseReady, PoseInputs};
use crate::camera::{CameraError, CameraModel};
use crate::geodesy::{vessel_frame, EcefCoord, GeodeticCoord, VesselFrame};
use crate::{Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum FusionError {
    #[error("vessel not pose-ready: {0}")]
    NotPoseReady(NotPoseReady),
    #[error("segment corner behind camera")]
    BehindCamera,
    #[error("degenerate constraint planes: {0}")]
    DegeneratePlanes(String),
    #[error("inferred height {0} is not positive")]
    NonPositiveHeight(f64),
}

/// Axis-aligned pixel rectangle, min corner inclusive of the top-left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Rect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        Self {
            min_x,
            min_y,
            max_x,
            max_y,
        }
    }

    /// Tight bound of a point set. Panics on an empty slice.
    pub fn enclosing(points: &[Vec2]) -> Self {
        let mut r = Rect::new(
            f64::INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::NEG_INFINITY,
        );
        for p in points {
            r.min_x = r.min_x.min(p.x);
            r.min_y = r.min_y.min(p.y);
            r.max_x = r.max_x.max(p.x);
            r.max_y = r.max_y.max(p.y);
        }
        assert!(r.min_x.is_finite(), "enclosing rect of no points");
        r
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center_x(&self) -> f64 {
        (self.min_x + self.max_x) / 2.0
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    /// Intersection-over-union of two rectangles; 0 when disjoint or both
    /// empty.
    pub fn iou(&self, other: &Rect) -> f64 {
        let ix = (self.max_x.min(other.max_x) - self.min_x.max(other.min_x)).max(0.0);
        let iy = (self.max_y.min(other.max_y) - self.min_y.max(other.min_y)).max(0.0);
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    pub fn on_left_border(&self, margin_px: f64) -> bool {
        self.min_x <= margin_px
    }

    pub fn on_right_border(&self, image_w: f64, margin_px: f64) -> bool {
        self.max_x >= image_w - margin_px
    }

    /// Any edge within `margin_px` of the image border.
    pub fn on_border(&self, image_w: f64, image_h: f64, margin_px: f64) -> bool {
        self.on_left_border(margin_px)
            || self.on_right_border(image_w, margin_px)
            || self.min_y <= margin_px
            || self.max_y >= image_h - margin_px
    }
}

/// One 2D vessel detection on an image.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection2D {
    pub image_id: String,
    pub rect: Rect,
    pub score: f64,
}

/// Water-level hull footprint in ECEF: corner 1 bow-port, 2 bow-starboard,
/// 3 stern-starboard, 4 stern-port. The frame origin is the dead-reckoned
/// antenna position at water height.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneSegment3 {
    pub corners: [EcefCoord; 4],
    pub frame: VesselFrame,
}

impl PlaneSegment3 {
    /// Rigidly translates the segment (corners and frame origin).
    pub fn translated(&self, delta: Vec3) -> Self {
        Self {
            corners: self.corners.map(|c| c + delta),
            frame: self.frame.translated(delta),
        }
    }
}

/// A segment's four corner pixels and their enclosing rectangle. The
/// rectangle is not clipped to the image.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSegment {
    pub pixels: [Vec2; 4],
    pub rect: Rect,
}

/// Full 6D-pose box: corners 1-4 are the corrected water-level segment,
/// 5-8 the same corners lifted by the vessel height along z_v.
#[derive(Debug, Clone, PartialEq)]
pub struct Box3D {
    pub corners: [EcefCoord; 8],
    pub centroid: EcefCoord,
    pub frame: VesselFrame,
    pub height_m: f64,
}

/// Builds the dead-reckoned water-level footprint for a pose-ready vessel.
///
/// The antenna is placed at the configured water height; corners follow
/// the A/B/C/D offsets of the static record; everything is then shifted
/// by heading * speed * age (dead reckoning).
pub fn water_plane_segment(
    inputs: &PoseInputs,
    water_height_m: f64,
) -> Result<PlaneSegment3, FusionError> {
    let anchor = GeodeticCoord {
        lat_deg: inputs.lat_deg,
        lon_deg: inputs.lon_deg,
        height_m: water_height_m,
    };
    // The pose gate guarantees an available heading, so this only fails
    // on genuinely corrupt state.
    let frame = vessel_frame(&anchor, f64::from(inputs.heading_deg))
        .map_err(|_| FusionError::NotPoseReady(NotPoseReady::MissingHeading))?;

    let a = inputs.dim_bow_m;
    let b = inputs.dim_stern_m;
    let c = inputs.dim_port_m;
    let d = inputs.dim_starboard_m;
    let o = frame.origin;
    let corners = [
        o + (frame.x * a + frame.y * c),
        o + (frame.x * a - frame.y * d),
        o + (-frame.x * b - frame.y * d),
        o + (-frame.x * b + frame.y * c),
    ];
    let dr = dead_reckon(&frame, inputs.sog_mps, inputs.age_s);
    Ok(PlaneSegment3 {
        corners: corners.map(|p| p + dr),
        frame: frame.translated(dr),
    })
}

/// Projects all four segment corners; fails if any is behind the camera.
pub fn project_segment(
    model: &CameraModel,
    seg: &PlaneSegment3,
) -> Result<ProjectedSegment, FusionError> {
    let mut pixels = [Vec2::zeros(); 4];
    for (px, corner) in pixels.iter_mut().zip(&seg.corners) {
        *px = model.project(corner).map_err(|e| match e {
            CameraError::BehindCamera => FusionError::BehindCamera,
            other => FusionError::DegeneratePlanes(other.to_string()),
        })?;
    }
    Ok(ProjectedSegment {
        rect: Rect::enclosing(&pixels),
        pixels,
    })
}

/// Matching cost between a detection and a projected segment rectangle.
///
/// Normalized center-x, bottom-edge and width discrepancies, the width
/// term dropped when the detection touches the image border, all divided
/// by the detection score (callers guarantee score > 0).
pub fn match_cost(
    det: &Detection2D,
    ws: &ProjectedSegment,
    image_w: f64,
    image_h: f64,
    border_margin_px: f64,
) -> f64 {
    let d_cx = (det.rect.center_x() - ws.rect.center_x()).abs() / image_w;
    let d_bottom = (det.rect.max_y - ws.rect.max_y).abs() / image_h;
    let on_border = det.rect.on_border(image_w, image_h, border_margin_px);
    let d_width = if on_border {
        0.0
    } else {
        (det.rect.width() - ws.rect.width()).abs() / image_w
    };
    (2.0 * d_cx + d_bottom + d_width) / det.score
}
