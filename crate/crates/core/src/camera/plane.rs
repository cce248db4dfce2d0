//! Interim planes: 2D parameterizations of near-planar world geometry,
//! used to set up plane-to-image homographies.

use nalgebra::SymmetricEigen;

use crate::geodesy::{enu_frame_at, EcefCoord, GeodeticCoord};
use crate::{Mat3, Vec2, Vec3};

use super::CameraError;

/// A plane through `anchor` spanned by the orthonormal pair (v1, v2).
/// In-plane coordinates of a world point are its offsets along the two
/// axes; off-plane components are discarded by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InterimPlane {
    pub anchor: EcefCoord,
    pub v1: Vec3,
    pub v2: Vec3,
}

impl InterimPlane {
    pub fn normal(&self) -> Vec3 {
        self.v1.cross(&self.v2)
    }

    /// In-plane 2D coordinates of a world point (its projection).
    pub fn to_plane(&self, p: &EcefCoord) -> Vec2 {
        let d = *p - self.anchor;
        Vec2::new(self.v1.dot(&d), self.v2.dot(&d))
    }

    /// World point for in-plane 2D coordinates.
    pub fn to_world(&self, k: Vec2) -> EcefCoord {
        self.anchor + (self.v1 * k.x + self.v2 * k.y)
    }
}

/// Tangent plane touching the water surface: anchored at the given
/// horizontal position lifted to `water_height_m`, spanned by local
/// east and north.
pub fn water_tangent_plane(lat_deg: f64, lon_deg: f64, water_height_m: f64) -> InterimPlane {
    let enu = enu_frame_at(&GeodeticCoord {
        lat_deg,
        lon_deg,
        height_m: water_height_m,
    });
    InterimPlane {
        anchor: enu.origin,
        v1: enu.east,
        v2: enu.north,
    }
}

/// Best-fit plane through a point cloud: anchored at the centroid and
/// spanned by the top two principal axes of the (1/n) covariance.
///
/// Fails when fewer than 3 points are given or the points are collinear
/// (second eigenvalue numerically zero), since no plane is then defined.
pub fn pca_interim_plane(points: &[EcefCoord]) -> Result<InterimPlane, CameraError> {
    if points.len() < 3 {
        return Err(CameraError::DegenerateGeometry(format!(
            "{} points cannot define a plane",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vec3::zeros(), |acc, p| acc + p.as_vector())
        / n;
    let mut cov = Mat3::zeros();
    for p in points {
        let d = p.as_vector() - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    let eig = SymmetricEigen::new(cov);
    // Sort eigenpairs by descending eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let l0 = eig.eigenvalues[order[0]];
    let l1 = eig.eigenvalues[order[1]];
    if l0 <= 0.0 || l1 <= l0 * 1e-12 {
        return Err(CameraError::DegenerateGeometry(
            "points are collinear or coincident".into(),
        ));
    }
    Ok(InterimPlane {
        anchor: EcefCoord::from_vector(centroid),
        v1: eig.eigenvectors.column(order[0]).into_owned(),
        v2: eig.eigenvectors.column(order[1]).into_owned(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn water_plane_axes_are_horizontal() {
        let pl = water_tangent_plane(53.54, 9.99, 0.4);
        let enu = enu_frame_at(&GeodeticCoord {
            lat_deg: 53.54,
            lon_deg: 9.99,
            height_m: 0.4,
        });
        assert_abs_diff_eq!((pl.normal() - enu.up).norm(), 0.0, epsilon = 1e-12);
        let k = pl.to_plane(&pl.to_world(Vec2::new(12.0, -7.0)));
        assert_abs_diff_eq!(k.x, 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(k.y, -7.0, epsilon = 1e-9);
    }

    #[test]
    fn pca_recovers_a_synthetic_plane() {
        let anchor = EcefCoord::new(4e6, 1e6, 4.8e6);
        let a = Vec3::new(1.0, 2.0, -0.5).normalize();
        let b0 = Vec3::new(0.3, -0.2, 1.0);
        let b = (b0 - a * a.dot(&b0)).normalize();
        let pts: Vec<EcefCoord> = (0..40)
            .map(|i| {
                let s = (i % 8) as f64 * 3.0 - 10.0;
                let t = (i / 8) as f64 * 5.0 - 10.0;
                anchor + (a * s + b * t)
            })
            .collect();
        let pl = pca_interim_plane(&pts).unwrap();
        // Recovered normal matches the construction normal up to sign.
        let n = pl.normal();
        assert_abs_diff_eq!(n.dot(&a.cross(&b)).abs(), 1.0, epsilon = 1e-9);
        // Every input point is on the plane: round trip through 2D is exact.
        for p in &pts {
            let back = pl.to_world(pl.to_plane(p));
            assert_abs_diff_eq!((back - *p).norm(), 0.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn pca_rejects_degenerate_clouds() {
        assert!(pca_interim_plane(&[]).is_err());
        let p = EcefCoord::new(1.0, 2.0, 3.0);
        assert!(pca_interim_plane(&[p, p]).is_err());
        // Collinear points.
        let line: Vec<EcefCoord> = (0..10)
            .map(|i| EcefCoord::new(f64::from(i), 0.0, 0.0))
            .collect();
        assert!(matches!(
            pca_interim_plane(&line),
            Err(CameraError::DegenerateGeometry(_))
        ));
        // Coincident cloud.
        let same = vec![p; 5];
        assert!(pca_interim_plane(&same).is_err());
    }
}
