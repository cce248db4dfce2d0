//! Camera registration: pinhole model, PnP pose estimation from
//! georeferenced keypoints, and plane homographies as a baseline.
//!
//! Pixel coordinates are (u, v) with u rightward and v downward; the
//! camera frame is x right, y down, z forward (optical axis). World
//! coordinates are ECEF throughout, so the estimated extrinsics map
//! ECEF directly into the camera frame.

pub mod homography;
pub mod plane;
pub mod pnp;

pub use homography::{estimate_homography, Homography, Refinement};
pub use plane::{pca_interim_plane, water_tangent_plane, InterimPlane};
pub use pnp::solve_pnp;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::EcefCoord;
use crate::{Mat3, Vec2, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("geometry too degenerate to solve: {0}")]
    DegenerateGeometry(String),
    #[error("point projects from behind the camera")]
    BehindCamera,
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("rotation is not orthonormal")]
    InvalidRotation,
}

/// Pinhole intrinsics with zero skew and no lens distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), CameraError> {
        if self.fx <= 0.0 || self.fy <= 0.0 || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(CameraError::InvalidIntrinsics(format!(
                "focal lengths must be positive, got {} x {}",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(CameraError::InvalidIntrinsics("zero image size".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel to normalized image coordinates (z = 1 plane).
    pub fn normalize(&self, px: Vec2) -> Vec2 {
        Vector2::new((px.x - self.cx) / self.fx, (px.y - self.cy) / self.fy)
    }

    /// Camera-frame point to pixel. Caller guarantees z > 0.
    fn project_camera_point(&self, pc: Vec3) -> Vec2 {
        Vector2::new(
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        )
    }
}

/// A 2D-3D correspondence: a world point and where it appears in the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub world: EcefCoord,
    pub pixel: Vec2,
}

/// Registered pinhole camera: `x_cam = R * x_world + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl CameraModel {
    /// Checks orthonormality (R^T R = I, det = +1) to 1e-9.
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Mat3,
        translation: Vec3,
    ) -> Result<Self, CameraError> {
        intrinsics.validate()?;
        let gram = rotation.transpose() * rotation;
        if (gram - Mat3::identity()).norm() > 1e-9 || (rotation.determinant() - 1.0).abs() > 1e-9 {
            return Err(CameraError::InvalidRotation);
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
        })
    }

    /// Projects a world point to pixels; fails if it lies on or behind
    /// the image plane through the camera center.
    pub fn project(&self, p: &EcefCoord) -> Result<Vec2, CameraError> {
        let pc = self.rotation * p.as_vector() + self.translation;
        if pc.z <= 0.0 {
            return Err(CameraError::BehindCamera);
        }
        Ok(self.intrinsics.project_camera_point(pc))
    }

    /// Camera center in world coordinates: C = -R^T t.
    pub fn center(&self) -> EcefCoord {
        EcefCoord::from_vector(-(self.rotation.transpose() * self.translation))
    }

    /// Unit world-frame direction of the viewing ray through a pixel.
    pub fn unproject(&self, px: Vec2) -> Vec3 {
        let n = self.intrinsics.normalize(px);
        (self.rotation.transpose() * Vec3::new(n.x, n.y, 1.0)).normalize()
    }
}

/// Anything that can claim a pixel for a world point; lets PnP cameras
/// and plane homographies share the reprojection report.
pub trait PixelProjector {
    fn pixel_of(&self, world: &EcefCoord) -> Option<Vec2>;
}

impl PixelProjector for CameraModel {
    fn pixel_of(&self, world: &EcefCoord) -> Option<Vec2> {
        self.project(world).ok()
    }
}

/// Reprojection error summary over a set of correspondences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprojectionReport {
    /// Mean absolute (euclidean) pixel error.
    pub mae_px: f64,
    /// MAE as a percentage of image width / height.
    pub pct_width: f64,
    pub pct_height: f64,
    pub points: usize,
    /// Correspondences the projector could not map (behind camera).
    pub unprojectable: usize,
}

pub fn reprojection_report(
    projector: &dyn PixelProjector,
    corrs: &[Correspondence],
    width: u32,
    height: u32,
) -> ReprojectionReport {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut missed = 0usize;
    for c in corrs {
        match projector.pixel_of(&c.world) {
            Some(p) => {
                sum += (p - c.pixel).norm();
                n += 1;
            }
            None => missed += 1,
        }
    }
    let mae = if n > 0 { sum / n as f64 } else { f64::NAN };
    ReprojectionReport {
        mae_px: mae,
        pct_width: 100.0 * mae / f64::from(width),
        pct_height: 100.0 * mae / f64::from(height),
        points: n,
        unprojectable: missed,
    }
}


#[cfg(test)]
mod tests {
    use super::testutil::rig;
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn validates_intrinsics_and_rotation() {
        let intr = Intrinsics {
            fx: 0.0,
            fy: 1.0,
            cx: 0.0,
            cy: 0.0,
            width: 10,
            height: 10,
        };
        assert!(matches!(
            intr.validate(),
            Err(CameraError::InvalidIntrinsics(_))
        ));
        let good = Intrinsics {
            fx: 100.0,
            fy: 100.0,
            cx: 5.0,
            cy: 5.0,
            width: 10,
            height: 10,
        };
        assert!(CameraModel::new(good, Mat3::identity(), Vec3::zeros()).is_ok());
        assert_eq!(
            CameraModel::new(good, Mat3::identity() * 2.0, Vec3::zeros()),
            Err(CameraError::InvalidRotation)
        );
    }

    #[test]
    fn center_and_projection_are_consistent() {
        let rig = rig();
        let c = rig.model.center();
        // The rig puts the camera at the ENU origin.
        assert_abs_diff_eq!((c - rig.enu.origin).norm(), 0.0, epsilon = 1e-6);

        // A point straight ahead lands on the principal point.
        let ahead = rig.model.rotation.transpose() * Vec3::new(0.0, 0.0, 100.0);
        let px = rig.model.project(&(c + ahead)).unwrap();
        assert_abs_diff_eq!(px.x, 960.0, epsilon = 1e-6);
        assert_abs_diff_eq!(px.y, 540.0, epsilon = 1e-6);

        // Behind the camera fails.
        assert_eq!(
            rig.model.project(&(c + -ahead)),
            Err(CameraError::BehindCamera)
        );
    }

    #[test]
    fn unproject_inverts_project() {
        let rig = rig();
        let p = rig.world(40.0, 180.0, -20.0);
        let px = rig.model.project(&p).unwrap();
        let dir = rig.model.unproject(px);
        let c = rig.model.center();
        let to_p = (p - c).normalize();
        assert_abs_diff_eq!((dir - to_p).norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn report_averages_pixel_errors() {
        let rig = rig();
        let p1 = rig.world(0.0, 120.0, -10.0);
        let p2 = rig.world(30.0, 200.0, -15.0);
        let px1 = rig.model.project(&p1).unwrap();
        let px2 = rig.model.project(&p2).unwrap();
        let corrs = [
            Correspondence {
                world: p1,
                pixel: px1 + Vec2::new(3.0, 4.0),
            },
            Correspondence {
                world: p2,
                pixel: px2,
            },
        ];
        let rep = reprojection_report(&rig.model, &corrs, 1920, 1080);
        assert_abs_diff_eq!(rep.mae_px, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rep.pct_width, 100.0 * 2.5 / 1920.0, epsilon = 1e-12);
        assert_eq!(rep.points, 2);
        assert_eq!(rep.unprojectable, 0);
    }
}
