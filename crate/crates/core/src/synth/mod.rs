//! Synthetic harbor scenes with exact ground truth.
//!
//! A scene is a pure function of its spec: one camera, a set of
//! georeferenced keypoints, and vessels with known 6D poses. Vessels are
//! cuboids, so the exact 2D detection of a vessel is the enclosing
//! rectangle of its projected 3D box. The AIS log encodes the true state
//! (aged and optionally perturbed), which closes the loop: running the
//! pipeline over the generated files must recover the generated truth.
//!
//! Truth poses are snapped to the AIS wire grid (1/600000 degree
//! positions, 0.1 kn speeds, whole-degree headings, whole-meter
//! dimensions) before anything is rendered, so codec quantization can
//! never separate the log from the truth records.

pub mod encode;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ais::{PositionReport, StaticVoyage};
use crate::camera::{CameraError, CameraModel, Intrinsics};
use crate::fusion::{build_box3d, water_plane_segment, Rect};
use crate::geodesy::{ecef_to_geodetic, enu_frame_at, geodetic_to_ecef, GeodeticCoord};
use crate::io::{
    CameraModelRecord, DetectionRecord, ImageRecord, IntrinsicsRecord, KeypointRecord, TruthRecord,
    FORMAT_VERSION,
};
use crate::{Mat3, Vec2, Vec3};

pub const KEYPOINTS_FILE: &str = "keypoints.jsonl";
pub const INTRINSICS_FILE: &str = "intrinsics.jsonl";
pub const IMAGES_FILE: &str = "images.jsonl";
pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const CAMERA_TRUTH_FILE: &str = "camera_truth.jsonl";
pub const AIS_LOG_FILE: &str = "ais.log";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("vessel {mmsi} unrenderable: {reason}")]
    Unrenderable { mmsi: u32, reason: String },
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Camera truth: where it stands and where it looks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraSpec {
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub height_m: f64,
    /// Optical axis azimuth, degrees clockwise from north.
    pub yaw_deg: f64,
    /// Degrees below the horizon.
    pub pitch_deg: f64,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

/// One vessel's true state at image time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VesselSpec {
    pub mmsi: u32,
    pub name: String,
    pub ship_type: u8,
    /// Antenna position at image time (snapped to the wire grid).
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// True heading, degrees clockwise from north (snapped to whole degrees).
    pub heading_deg: f64,
    pub speed_mps: f64,
    /// Cuboid height above the waterline.
    pub height_m: f64,
    /// Antenna offsets: to bow, stern, port, starboard, meters.
    pub dim_bow_m: f64,
    pub dim_stern_m: f64,
    pub dim_port_m: f64,
    pub dim_starboard_m: f64,
    /// Seconds between the position broadcast and the image.
    pub message_age_s: f64,
}

/// Error injection knobs; all default to zero (exact scene).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    /// AIS position offset magnitude, meters, applied perpendicular to
    /// the camera line of sight with a random sign (GPS drift stand-in).
    pub ais_position_offset_m: f64,
    /// Gaussian sigma added to each detection rectangle edge, pixels.
    pub pixel_noise_px: f64,
    /// Probability that a vessel's detection is withheld.
    pub detection_dropout_p: f64,
    /// Probability that a vessel's AIS messages are withheld.
    pub ais_dropout_p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub seed: u64,
    pub image_id: String,
    pub image_time_s: f64,
    pub camera: CameraSpec,
    /// Ellipsoidal height of the water surface.
    pub water_height_m: f64,
    pub n_keypoints: usize,
    /// Keypoint heights are drawn from water level up to this spread.
    pub keypoint_height_spread_m: f64,
    pub vessels: Vec<VesselSpec>,
    #[serde(default)]
    pub noise: NoiseSpec,
}

/// Everything a scene produces, ready to serialize.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub keypoints: Vec<KeypointRecord>,
    pub intrinsics: IntrinsicsRecord,
    pub camera_truth: CameraModelRecord,
    pub images: Vec<ImageRecord>,
    pub detections: Vec<DetectionRecord>,
    /// Timestamped AIVDM log lines, ascending in time.
    pub ais_log: Vec<String>,
    pub truths: Vec<TruthRecord>,
}

/// Builds the true camera model from a spec.
pub fn camera_from_spec(spec: &CameraSpec) -> Result<CameraModel, SynthError> {
    let anchor = GeodeticCoord {
        lat_deg: spec.lat_deg,
        lon_deg: spec.lon_deg,
        height_m: spec.height_m,
    };
    let enu = enu_frame_at(&anchor);
    let yaw = spec.yaw_deg.to_radians();
    let pitch = spec.pitch_deg.to_radians();
    let fwd_enu = Vec3::new(
        yaw.sin() * pitch.cos(),
        yaw.cos() * pitch.cos(),
        -pitch.sin(),
    );
    let fwd = enu.east * fwd_enu.x + enu.north * fwd_enu.y + enu.up * fwd_enu.z;
    let right = fwd.cross(&enu.up).normalize();
    let down = fwd.cross(&right).normalize();
    let rotation = Mat3::from_rows(&[right.transpose(), down.transpose(), fwd.transpose()]);
    let translation = -(rotation * enu.origin.as_vector());
    let intrinsics = Intrinsics {
        fx: spec.fx,
        fy: spec.fy,
        cx: spec.cx,
        cy: spec.cy,
        width: spec.width,
        height: spec.height,
    };
    Ok(CameraModel::new(intrinsics, rotation, translation)?)
}

/// Snaps a vessel spec onto the AIS wire grid. The returned spec is the
/// truth everything else is rendered from.
fn quantized(v: &VesselSpec) -> VesselSpec {
    VesselSpec {
        lat_deg: encode::quantize_pos_deg(v.lat_deg),
        lon_deg: encode::quantize_pos_deg(v.lon_deg),
        heading_deg: v.heading_deg.round().rem_euclid(360.0),
        speed_mps: encode::quantize_sog_mps(v.speed_mps),
        dim_bow_m: v.dim_bow_m.round(),
        dim_stern_m: v.dim_stern_m.round(),
        dim_port_m: v.dim_port_m.round(),
        dim_starboard_m: v.dim_starboard_m.round(),
        ..v.clone()
    }
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN heights must fail too
fn validate(spec: &SceneSpec) -> Result<(), SynthError> {
    if !(0.0..=1.0).contains(&spec.noise.detection_dropout_p)
        || !(0.0..=1.0).contains(&spec.noise.ais_dropout_p)
    {
        return Err(SynthError::InvalidSpec(
            "dropout probabilities must be in [0, 1]".into(),
        ));
    }
    for v in &spec.vessels {
        let dims = [v.dim_bow_m, v.dim_stern_m, v.dim_port_m, v.dim_starboard_m];
        if dims.iter().any(|d| *d < 0.0) || v.dim_bow_m + v.dim_stern_m < 1.0 {
            return Err(SynthError::InvalidSpec(format!(
                "vessel {} has degenerate dims",
                v.mmsi
            )));
        }
        if v.dim_bow_m.round() > 511.0 || v.dim_stern_m.round() > 511.0 {
            return Err(SynthError::InvalidSpec(format!(
                "vessel {} exceeds the 511 m bow/stern field range",
                v.mmsi
            )));
        }
        if v.dim_port_m.round() > 63.0 || v.dim_starboard_m.round() > 63.0 {
            return Err(SynthError::InvalidSpec(format!(
                "vessel {} exceeds the 63 m port/starboard field range",
                v.mmsi
            )));
        }
        if !(v.height_m > 0.0) {
            return Err(SynthError::InvalidSpec(format!(
                "vessel {} needs height > 0",
                v.mmsi
            )));
        }
        if v.message_age_s < 0.0 {
            return Err(SynthError::InvalidSpec(format!(
                "vessel {} has negative age",
                v.mmsi
            )));
        }
    }
    Ok(())
}

/// Generates a complete scene. Deterministic: the RNG is seeded from the
/// spec and consumed in a fixed order (keypoints first, then per vessel:
/// offset sign, AIS dropout, detection dropout, detection score, then
/// pixel noise when enabled).
pub fn generate_scene(spec: &SceneSpec) -> Result<GeneratedScene, SynthError> {
    validate(spec)?;
    let model = camera_from_spec(&spec.camera)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = f64::from(spec.camera.width);
    let h = f64::from(spec.camera.height);

    let keypoints = sample_keypoints(spec, &model, &mut rng)?;

    let mut detections = Vec::new();
    let mut truths = Vec::new();
    let mut log_entries: Vec<(f64, usize, String)> = Vec::new();
    let image_rect = Rect::new(0.0, 0.0, w, h);

    for (vessel_idx, raw) in spec.vessels.iter().enumerate() {
        let v = quantized(raw);
        let inputs = crate::ais::PoseInputs {
            mmsi: v.mmsi,
            lat_deg: v.lat_deg,
            lon_deg: v.lon_deg,
            heading_deg: v.heading_deg as u16,
            sog_mps: v.speed_mps,
            age_s: 0.0,
            dim_bow_m: v.dim_bow_m,
            dim_stern_m: v.dim_stern_m,
            dim_port_m: v.dim_port_m,
            dim_starboard_m: v.dim_starboard_m,
        };
        let seg = water_plane_segment(&inputs, spec.water_height_m).map_err(|e| {
            SynthError::Unrenderable {
                mmsi: v.mmsi,
                reason: e.to_string(),
            }
        })?;
        let truth_box = build_box3d(&seg, v.height_m);

        let mut px = [[0.0f64; 2]; 8];
        let mut pixels = Vec::with_capacity(8);
        for (k, corner) in truth_box.corners.iter().enumerate() {
            let p = model
                .project(corner)
                .map_err(|_| SynthError::Unrenderable {
                    mmsi: v.mmsi,
                    reason: "box corner behind the camera".into(),
                })?;
            px[k] = [p.x, p.y];
            pixels.push(p);
        }
        let silhouette = Rect::enclosing(&pixels);
        if silhouette.iou(&image_rect) == 0.0 {
            return Err(SynthError::Unrenderable {
                mmsi: v.mmsi,
                reason: "silhouette outside the image".into(),
            });
        }

        // Fixed per-vessel draw order; see the function doc.
        let offset_sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let ais_dropped = rng.random_bool(spec.noise.ais_dropout_p);
        let det_dropped = rng.random_bool(spec.noise.detection_dropout_p);
        let score = rng.random_range(0.85..0.99);

        if !ais_dropped {
            let (pos, stat) = broadcast_state(spec, &model, &v, offset_sign);
            let t_pos = spec.image_time_s - v.message_age_s;
            log_entries.push((t_pos, log_entries.len(), encode::encode_position(&pos)));
            let [s1, s2] = encode::encode_static(&stat, (vessel_idx % 10) as u8);
            let t_stat = t_pos - 0.5;
            log_entries.push((t_stat, log_entries.len(), s1));
            log_entries.push((t_stat, log_entries.len(), s2));
        }

        let detection_index = if det_dropped {
            None
        } else {
            let mut r = silhouette;
            if spec.noise.pixel_noise_px > 0.0 {
                let noise = Normal::new(0.0, spec.noise.pixel_noise_px)
                    .expect("sigma is positive and finite");
                r.min_x += noise.sample(&mut rng);
                r.min_y += noise.sample(&mut rng);
                r.max_x += noise.sample(&mut rng);
                r.max_y += noise.sample(&mut rng);
            }
            r.min_x = r.min_x.clamp(0.0, w);
            r.max_x = r.max_x.clamp(0.0, w);
            r.min_y = r.min_y.clamp(0.0, h);
            r.max_y = r.max_y.clamp(0.0, h);
            if r.width() < 2.0 || r.height() < 2.0 {
                None // noise or clamping collapsed the box
            } else {
                detections.push(DetectionRecord {
                    format_version: FORMAT_VERSION,
                    image_id: spec.image_id.clone(),
                    x1: r.min_x,
                    y1: r.min_y,
                    x2: r.max_x,
                    y2: r.max_y,
                    score,
                    class: "vessel".into(),
                });
                Some(detections.len() - 1)
            }
        };

        let c = |p: &crate::geodesy::EcefCoord| [p.x, p.y, p.z];
        truths.push(TruthRecord {
            format_version: FORMAT_VERSION,
            image_id: spec.image_id.clone(),
            mmsi: v.mmsi,
            detection_index,
            ais_dropped,
            lat_deg: v.lat_deg,
            lon_deg: v.lon_deg,
            heading_deg: v.heading_deg,
            h_v_m: v.height_m,
            corners_ecef: [
                c(&truth_box.corners[0]),
                c(&truth_box.corners[1]),
                c(&truth_box.corners[2]),
                c(&truth_box.corners[3]),
                c(&truth_box.corners[4]),
                c(&truth_box.corners[5]),
                c(&truth_box.corners[6]),
                c(&truth_box.corners[7]),
            ],
            centroid_ecef: c(&truth_box.centroid),
            silhouette_px: [
                silhouette.min_x,
                silhouette.min_y,
                silhouette.max_x,
                silhouette.max_y,
            ],
        });
    }

    log_entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let ais_log = log_entries
        .into_iter()
        .map(|(t, _, line)| format!("{t:.3} {line}"))
        .collect();

    Ok(GeneratedScene {
        keypoints,
        intrinsics: IntrinsicsRecord {
            format_version: FORMAT_VERSION,
            fx: spec.camera.fx,
            fy: spec.camera.fy,
            cx: spec.camera.cx,
            cy: spec.camera.cy,
            width: spec.camera.width,
            height: spec.camera.height,
        },
        camera_truth: CameraModelRecord::from_model(0, &model),
        images: vec![ImageRecord {
            format_version: FORMAT_VERSION,
            image_id: spec.image_id.clone(),
            time_s: spec.image_time_s,
            viewport_id: 0,
        }],
        detections,
        ais_log,
        truths,
    })
}

/// The AIS state a vessel broadcast `message_age_s` before the image:
/// the truth position walked back along the heading by speed x age, plus
/// the configured lateral offset, re-snapped to the wire grid.
fn broadcast_state(
    spec: &SceneSpec,
    model: &CameraModel,
    v: &VesselSpec,
    offset_sign: f64,
) -> (PositionReport, StaticVoyage) {
    let antenna = GeodeticCoord {
        lat_deg: v.lat_deg,
        lon_deg: v.lon_deg,
        height_m: 0.0,
    };
    let enu = enu_frame_at(&antenna);
    let heading = v.heading_deg.to_radians();
    let forward = enu.east * heading.sin() + enu.north * heading.cos();

    let mut shifted = antenna_ecef(&antenna) - forward * (v.speed_mps * v.message_age_s);
    if spec.noise.ais_position_offset_m > 0.0 {
        let to_vessel = antenna_ecef(&antenna) - model.center().as_vector();
        let lateral = to_vessel.cross(&enu.up).normalize();
        shifted += lateral * (spec.noise.ais_position_offset_m * offset_sign);
    }
    let geo = ecef_to_geodetic(&crate::geodesy::EcefCoord::from_vector(shifted));

    let pos = PositionReport {
        mmsi: v.mmsi,
        receiver_time_s: 0.0,
        lat_deg: Some(encode::quantize_pos_deg(geo.lat_deg)),
        lon_deg: Some(encode::quantize_pos_deg(geo.lon_deg)),
        sog_mps: Some(v.speed_mps),
        cog_deg: Some(v.heading_deg),
        heading_deg: Some(v.heading_deg as u16),
    };
    let stat = StaticVoyage {
        mmsi: v.mmsi,
        receiver_time_s: 0.0,
        name: v.name.clone(),
        ship_type: v.ship_type,
        dim_to_bow_m: v.dim_bow_m as u16,
        dim_to_stern_m: v.dim_stern_m as u16,
        dim_to_port_m: v.dim_port_m as u16,
        dim_to_starboard_m: v.dim_starboard_m as u16,
    };
    (pos, stat)
}

fn antenna_ecef(g: &GeodeticCoord) -> Vec3 {
    geodetic_to_ecef(g).as_vector()
}

/// Keypoints are sampled in image space (lower two thirds, away from the
/// borders) at heights drawn over the configured spread, then placed in
/// the world by intersecting the pixel ray with the horizontal plane at
/// that height. Projection is exact by construction.
fn sample_keypoints(
    spec: &SceneSpec,
    model: &CameraModel,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<KeypointRecord>, SynthError> {
    let w = f64::from(spec.camera.width);
    let h = f64::from(spec.camera.height);
    let cam_anchor = GeodeticCoord {
        lat_deg: spec.camera.lat_deg,
        lon_deg: spec.camera.lon_deg,
        height_m: spec.camera.height_m,
    };
    let enu = enu_frame_at(&cam_anchor);
    let c = model.center().as_vector();

    let mut out = Vec::with_capacity(spec.n_keypoints);
    for k in 0..spec.n_keypoints {
        let mut placed = false;
        for _ in 0..100 {
            let u = rng.random_range(0.05 * w..0.95 * w);
            let v = rng.random_range(0.5 * h..0.95 * h);
            let height =
                spec.water_height_m + rng.random_range(0.0..=spec.keypoint_height_spread_m);
            let ray = model.unproject(Vec2::new(u, v));
            // Intersect with the plane of that height through the camera
            // anchor's vertical.
            let drop = height - spec.camera.height_m;
            let denom = ray.dot(&enu.up);
            if denom >= -1e-9 {
                continue; // ray does not descend
            }
            let t = drop / denom;
            if !(5.0..=20_000.0).contains(&t) {
                continue;
            }
            let world = crate::geodesy::EcefCoord::from_vector(c + ray * t);
            let geo = ecef_to_geodetic(&world);
            out.push(KeypointRecord {
                format_version: FORMAT_VERSION,
                id: format!("kp_{k:03}"),
                lat_deg: geo.lat_deg,
                lon_deg: geo.lon_deg,
                height_m: geo.height_m,
                u_px: u,
                v_px: v,
                viewport_id: 0,
            });
            placed = true;
            break;
        }
        if !placed {
            return Err(SynthError::InvalidSpec(
                "camera geometry leaves no room for keypoints".into(),
            ));
        }
    }
    Ok(out)
}

/// Merges scenes that share a camera and keypoint set into one multi-image
/// dataset: detections, images, and truths concatenate; AIS logs interleave
/// by timestamp. The first scene contributes the calibration data.
pub fn merge_scenes(scenes: Vec<GeneratedScene>) -> GeneratedScene {
    let mut it = scenes.into_iter();
    let mut merged = it.next().expect("at least one scene");
    for s in it {
        assert_eq!(
            s.intrinsics, merged.intrinsics,
            "scenes must share a camera"
        );
        merged.images.extend(s.images);
        merged.detections.extend(s.detections);
        merged.truths.extend(s.truths);
        merged.ais_log.extend(s.ais_log);
    }
    merged.ais_log.sort_by(|a, b| {
        let ta: f64 = a.split(' ').next().unwrap_or("0").parse().unwrap_or(0.0);
        let tb: f64 = b.split(' ').next().unwrap_or("0").parse().unwrap_or(0.0);
        ta.total_cmp(&tb)
    });
    merged.images.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    merged
}

/// Writes every scene file into `dir` under the standard names.
pub fn write_scene(
    scene: &GeneratedScene,
    dir: &std::path::Path,
) -> Result<(), crate::io::IoError> {
    use crate::io::write_jsonl;
    std::fs::create_dir_all(dir).map_err(|source| crate::io::IoError::File {
        path: dir.display().to_string(),
        source,
    })?;
    write_jsonl(&dir.join(KEYPOINTS_FILE), &scene.keypoints)?;
    write_jsonl(
        &dir.join(INTRINSICS_FILE),
        std::slice::from_ref(&scene.intrinsics),
    )?;
    write_jsonl(
        &dir.join(CAMERA_TRUTH_FILE),
        std::slice::from_ref(&scene.camera_truth),
    )?;
    write_jsonl(&dir.join(IMAGES_FILE), &scene.images)?;
    write_jsonl(&dir.join(DETECTIONS_FILE), &scene.detections)?;
    write_jsonl(&dir.join(TRUTH_FILE), &scene.truths)?;
    let log = scene.ais_log.join("\n") + "\n";
    std::fs::write(dir.join(AIS_LOG_FILE), log).map_err(|source| crate::io::IoError::File {
        path: dir.join(AIS_LOG_FILE).display().to_string(),
        source,
    })
}
