//! Line-delimited JSON interchange formats.
//!
//! Every record carries a `format_version` field so files remain
//! self-describing when the schemas evolve; readers reject versions they
//! do not know. One record per line, UTF-8, no enclosing array.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, CameraModel, Intrinsics};
use crate::fusion::{Box3D, Detection2D, Rect};
use crate::geodesy::EcefCoord;
use crate::{Mat3, Vec3};

/// Version stamped on every record this build writes.
pub const FORMAT_VERSION: u32 = 1;

fn default_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}:{line}: format_version {found} not supported (expected {FORMAT_VERSION})")]
    Version {
        path: String,
        line: usize,
        found: u32,
    },
    #[error("camera record invalid: {0}")]
    BadCamera(#[from] CameraError),
}

/// A georeferenced 2D-3D correspondence used for camera registration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeypointRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub id: String,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub height_m: f64,
    pub u_px: f64,
    pub v_px: f64,
    pub viewport_id: u32,
}

/// Pinhole intrinsics, shared by every viewport of a deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicsRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl IntrinsicsRecord {
    pub fn to_intrinsics(&self) -> Intrinsics {
        Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        }
    }

    pub fn from_intrinsics(k: &Intrinsics) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            width: k.width,
            height: k.height,
        }
    }
}

/// One 2D detector output box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub image_id: String,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
    pub class: String,
}

impl DetectionRecord {
    pub fn to_detection(&self) -> Detection2D {
        Detection2D {
            image_id: self.image_id.clone(),
            rect: Rect::new(self.x1, self.y1, self.x2, self.y2),
            score: self.score,
        }
    }
}

/// One captured frame: when it was taken and through which viewport.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub image_id: String,
    pub time_s: f64,
    pub viewport_id: u32,
}

/// A registered camera: intrinsics plus world-from-camera extrinsics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModelRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub viewport_id: u32,
    pub intrinsics: IntrinsicsRecord,
    /// Row-major world-to-camera rotation.
    pub rotation: [[f64; 3]; 3],
    /// Camera-frame translation (meters).
    pub translation: [f64; 3],
}

impl CameraModelRecord {
    pub fn to_model(&self) -> Result<CameraModel, IoError> {
        let r = Mat3::from_fn(|i, j| self.rotation[i][j]);
        let t = Vec3::new(
            self.translation[0],
            self.translation[1],
            self.translation[2],
        );
        Ok(CameraModel::new(self.intrinsics.to_intrinsics(), r, t)?)
    }

    pub fn from_model(viewport_id: u32, model: &CameraModel) -> Self {
        let r = &model.rotation;
        Self {
            format_version: FORMAT_VERSION,
            viewport_id,
            intrinsics: IntrinsicsRecord::from_intrinsics(&model.intrinsics),
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [
                model.translation.x,
                model.translation.y,
                model.translation.z,
            ],
        }
    }
}

/// One emitted 6D pose annotation.
///
/// Corners 1-4 are the corrected water-level footprint (bow-port,
/// bow-starboard, stern-starboard, stern-port), 5-8 the same corners
/// lifted by `h_v_m` along the vessel up axis. `detection_index` is the
/// 0-based index of the matched detection within its image, counted over
/// the detections that survived class and score filtering in file order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub image_id: String,
    pub mmsi: u32,
    pub detection_index: usize,
    pub theta: f64,
    pub h_v_m: f64,
    pub corners_ecef: [[f64; 3]; 8],
    /// Image-space projections of the eight corners.
    pub corners_px: [[f64; 2]; 8],
    pub centroid_ecef: [f64; 3],
    /// Vessel frame axes as rows: forward, port, up.
    pub rotation_axes: [[f64; 3]; 3],
    pub match_quality_flags: Vec<String>,
}

impl AnnotationRecord {
    /// Enclosing rectangle of the projected corners (the annotation's
    /// image-space silhouette).
    pub fn silhouette(&self) -> Rect {
        let pts: Vec<crate::Vec2> = self
            .corners_px
            .iter()
            .map(|p| crate::Vec2::new(p[0], p[1]))
            .collect();
        Rect::enclosing(&pts)
    }

    pub fn from_box(
        image_id: &str,
        mmsi: u32,
        detection_index: usize,
        theta: f64,
        b: &Box3D,
        corners_px: [[f64; 2]; 8],
        flags: Vec<String>,
    ) -> Self {
        let c = |p: &EcefCoord| [p.x, p.y, p.z];
        Self {
            format_version: FORMAT_VERSION,
            image_id: image_id.to_owned(),
            mmsi,
            detection_index,
            theta,
            h_v_m: b.height_m,
            corners_ecef: [
                c(&b.corners[0]),
                c(&b.corners[1]),
                c(&b.corners[2]),
                c(&b.corners[3]),
                c(&b.corners[4]),
                c(&b.corners[5]),
                c(&b.corners[6]),
                c(&b.corners[7]),
            ],
            corners_px,
            centroid_ecef: c(&b.centroid),
            rotation_axes: [
                [b.frame.x.x, b.frame.x.y, b.frame.x.z],
                [b.frame.y.x, b.frame.y.y, b.frame.y.z],
                [b.frame.z.x, b.frame.z.y, b.frame.z.z],
            ],
            match_quality_flags: flags,
        }
    }
}

/// Why an image/vessel or image/detection pair produced no annotation,
/// or that it produced one. One record per considered party.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub image_id: String,
    /// "match", "unmatched_detection", or "unmatched_vessel".
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mmsi: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detection_index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Synthetic ground truth for one vessel in one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    #[serde(default = "default_version")]
    pub format_version: u32,
    pub image_id: String,
    pub mmsi: u32,
    /// Index of this vessel's detection after dropout, None if dropped.
    pub detection_index: Option<usize>,
    /// True when the vessel's AIS messages were withheld from the log.
    pub ais_dropped: bool,
    pub lat_deg: f64,
    pub lon_deg: f64,
    pub heading_deg: f64,
    pub h_v_m: f64,
    pub corners_ecef: [[f64; 3]; 8],
    pub centroid_ecef: [f64; 3],
    /// Exact (pre-noise) enclosing rectangle of the projected truth box,
    /// as [x1, y1, x2, y2].
    pub silhouette_px: [f64; 4],
}

impl TruthRecord {
    pub fn silhouette(&self) -> Rect {
        Rect::new(
            self.silhouette_px[0],
            self.silhouette_px[1],
            self.silhouette_px[2],
            self.silhouette_px[3],
        )
    }
}

/// Anything carrying a `format_version` field; lets [`read_jsonl`]
/// reject files written by a schema this build does not know.
pub trait Versioned {
    fn version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {$(
        impl Versioned for $t {
            fn version(&self) -> u32 { self.format_version }
        }
    )*};
}

versioned!(
    KeypointRecord,
    IntrinsicsRecord,
    DetectionRecord,
    ImageRecord,
    CameraModelRecord,
    AnnotationRecord,
    OutcomeRecord,
    TruthRecord
);

/// Reads a whole JSONL file, failing with the offending line number on
/// parse errors or unknown format versions. Blank lines are skipped.
pub fn read_jsonl<T>(path: &Path) -> Result<Vec<T>, IoError>
where
    T: DeserializeOwned + Versioned + 'static,
{
    let display = path.display().to_string();
    let file = File::open(path).map_err(|source| IoError::File {
        path: display.clone(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| IoError::File {
            path: display.clone(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|source| IoError::Parse {
            path: display.clone(),
            line: idx + 1,
            source,
        })?;
        if record.version() != FORMAT_VERSION {
            return Err(IoError::Version {
                path: display,
                line: idx + 1,
                found: record.version(),
            });
        }
        out.push(record);
    }
    Ok(out)
}

/// Writes records as one JSON object per line.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), IoError> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|source| IoError::File {
        path: display.clone(),
        source,
    })?;
    let mut w = BufWriter::new(file);
    for r in records {
        let line = serde_json::to_string(r).expect("record serialization is infallible");
        writeln!(w, "{line}").map_err(|source| IoError::File {
            path: display.clone(),
            source,
        })?;
    }
    w.flush().map_err(|source| IoError::File {
        path: display,
        source,
    })
}
