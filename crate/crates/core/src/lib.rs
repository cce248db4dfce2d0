//! Fusing AIS navigation data with 2D vessel detections on monocular RGB
//! images to produce 6D vessel pose annotations.
//!
//! The pipeline runs in four stages, each usable on its own:
//!
//! 1. [`camera`]: register a pinhole camera against the world from
//!    georeferenced keypoints (PnP), with plane homographies as a baseline.
//! 2. [`ais`]: decode raw AIVDM logs into per-vessel navigation state.
//! 3. [`fusion`]: project AIS-derived vessel footprints into the image,
//!    associate them with 2D detections, and correct the AIS pose against
//!    the detection rectangle to obtain a full 3D box.
//! 4. [`evalkit`]: score the result against ground truth.
//!
//! [`synth`] generates closed-loop synthetic scenes (camera, keypoints, AIS
//! log, detections, ground truth) for testing all of the above, and [`io`]
//! defines the line-delimited JSON interchange formats.
//!
//! All world-frame math is f64 in ECEF coordinates (EPSG:4978); see
//! [`geodesy`] for conversions and local frames.

pub mod ais;
pub mod camera;
pub mod evalkit;
pub mod fusion;
pub mod geodesy;
pub mod io;
pub mod pipeline;
pub mod synth;

/// 3-vector in meters (ECEF or local frame, context-dependent).
pub type Vec3 = nalgebra::Vector3<f64>;
/// 2-vector, pixels or in-plane coordinates.
pub type Vec2 = nalgebra::Vector2<f64>;
/// 3x3 matrix (rotations, intrinsics, homographies).
pub type Mat3 = nalgebra::Matrix3<f64>;
