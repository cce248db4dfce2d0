//! Whole-dataset fusion: decode once, then per image snapshot the AIS
//! state, gate and project vessels, associate with detections, correct
//! against the matched rectangle, and lift to a full box.
//!
//! Per-image work is pure, so images fan out over a worker pool; results
//! are collected in image order, which keeps the output byte-identical
//! for any worker count.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::ais::{DecodedMessage, VesselIndex};
use crate::camera::CameraModel;
use crate::fusion::{
    associate, build_box3d, correction_vector, infer_height, project_segment, water_plane_segment,
    Detection2D, PlaneSegment3, ProjectedSegment,
};
use crate::io::{AnnotationRecord, DetectionRecord, ImageRecord, OutcomeRecord, FORMAT_VERSION};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("image {image_id} references unknown viewport {viewport_id}")]
    UnknownViewport { image_id: String, viewport_id: u32 },
    #[error("duplicate image id {0}")]
    DuplicateImage(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// Fusion knobs. Every threshold mirrors a command-line flag.
#[derive(Debug, Clone)]
pub struct FusionConfig {
    /// Ellipsoidal height of the water surface, meters.
    pub water_height_m: f64,
    /// Exclusive theta cutoff; pairs at or above it stay unmatched.
    pub match_threshold: f64,
    /// Positions older than this at image time fail the pose gate.
    pub ais_max_age_s: f64,
    /// Distance from an image edge within which a detection counts as
    /// border-touching (drops the width cost term).
    pub border_margin_px: f64,
    /// Detections scoring below this never enter matching (theta divides
    /// by the score).
    pub score_floor: f64,
    /// Keep only these detection classes; `None` keeps all.
    pub class_filter: Option<BTreeSet<String>>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            water_height_m: 0.0,
            match_threshold: 0.35,
            ais_max_age_s: 10.0,
            border_margin_px: 2.0,
            score_floor: 0.05,
            class_filter: None,
        }
    }
}

/// Everything one fusion run produces. Annotations and outcomes are
/// ordered by image, then by detection index within the image.
#[derive(Debug, Clone, Default)]
pub struct FusionOutput {
    pub annotations: Vec<AnnotationRecord>,
    pub outcomes: Vec<OutcomeRecord>,
    /// Detections whose image_id matched no image record.
    pub orphan_detections: usize,
}

fn outcome_vessel(image_id: &str, mmsi: u32, reason: String) -> OutcomeRecord {
    OutcomeRecord {
        format_version: FORMAT_VERSION,
        image_id: image_id.to_owned(),
        kind: "unmatched_vessel".into(),
        mmsi: Some(mmsi),
        detection_index: None,
        theta: None,
        reason: Some(reason),
    }
}

fn outcome_detection(image_id: &str, index: usize, reason: String) -> OutcomeRecord {
    OutcomeRecord {
        format_version: FORMAT_VERSION,
        image_id: image_id.to_owned(),
        kind: "unmatched_detection".into(),
        mmsi: None,
        detection_index: Some(index),
        theta: None,
        reason: Some(reason),
    }
}

/// Fuses one image against an AIS snapshot taken at its capture time.
///
/// `detections` must be every record for this image in file order; the
/// position in that slice is the detection index annotations refer to,
/// whether or not the record survives the class and score filters.
pub fn fuse_image(
    model: &CameraModel,
    image: &ImageRecord,
    detections: &[DetectionRecord],
    snapshot: &VesselIndex,
    cfg: &FusionConfig,
) -> (Vec<AnnotationRecord>, Vec<OutcomeRecord>) {
    let image_id = image.image_id.as_str();
    let w = f64::from(model.intrinsics.width);
    let h = f64::from(model.intrinsics.height);
    let mut annotations = Vec::new();
    let mut outcomes = Vec::new();

    // Candidate detections, keeping the file-order index.
    let mut cand_idx: Vec<usize> = Vec::new();
    let mut cands: Vec<Detection2D> = Vec::new();
    for (i, rec) in detections.iter().enumerate() {
        if let Some(filter) = &cfg.class_filter {
            if !filter.contains(&rec.class) {
                outcomes.push(outcome_detection(
                    image_id,
                    i,
                    format!("class {:?} excluded", rec.class),
                ));
                continue;
            }
        }
        if rec.score < cfg.score_floor {
            outcomes.push(outcome_detection(
                image_id,
                i,
                format!("score {} below floor {}", rec.score, cfg.score_floor),
            ));
            continue;
        }
        cand_idx.push(i);
        cands.push(rec.to_detection());
    }

    // Pose-ready vessels, projected. Snapshot iteration is MMSI-ordered.
    let mut segs: Vec<(u32, PlaneSegment3, ProjectedSegment, bool)> = Vec::new();
    for state in snapshot.iter() {
        let inputs = match state.pose_inputs(image.time_s, cfg.ais_max_age_s) {
            Ok(inputs) => inputs,
            Err(reason) => {
                outcomes.push(outcome_vessel(image_id, state.mmsi, reason.to_string()));
                continue;
            }
        };
        let seg = match water_plane_segment(&inputs, cfg.water_height_m) {
            Ok(seg) => seg,
            Err(e) => {
                outcomes.push(outcome_vessel(image_id, state.mmsi, e.to_string()));
                continue;
            }
        };
        let projected = match project_segment(model, &seg) {
            Ok(p) => p,
            Err(e) => {
                outcomes.push(outcome_vessel(image_id, state.mmsi, e.to_string()));
                continue;
            }
        };
        let dead_reckoned = inputs.sog_mps * inputs.age_s > 0.0;
        segs.push((inputs.mmsi, seg, projected, dead_reckoned));
    }

    let for_assoc: Vec<(u32, ProjectedSegment)> =
        segs.iter().map(|(m, _, p, _)| (*m, p.clone())).collect();
    let outcome = associate(
        &cands,
        &for_assoc,
        w,
        h,
        cfg.match_threshold,
        cfg.border_margin_px,
    );

    for a in &outcome.matched {
        let det = &cands[a.detection_index];
        let file_index = cand_idx[a.detection_index];
        let (_, seg, _, dead_reckoned) = segs
            .iter()
            .find(|(m, ..)| *m == a.mmsi)
            .expect("matched mmsi came from this list");

        let corrected = match correction_vector(model, det, seg, w, h, cfg.border_margin_px) {
            Ok(c) => (seg.translated(c.delta), c),
            Err(e) => {
                let mut o = outcome_vessel(image_id, a.mmsi, format!("correction failed: {e}"));
                o.detection_index = Some(file_index);
                o.theta = Some(a.theta);
                outcomes.push(o);
                continue;
            }
        };
        let (seg_c, corr) = corrected;
        let h_v = match infer_height(model, det, &seg_c) {
            Ok(h_v) => h_v,
            Err(e) => {
                let mut o = outcome_vessel(image_id, a.mmsi, format!("height failed: {e}"));
                o.detection_index = Some(file_index);
                o.theta = Some(a.theta);
                outcomes.push(o);
                continue;
            }
        };
        let box3d = build_box3d(&seg_c, h_v);
        let mut corners_px = [[0.0f64; 2]; 8];
        let mut projectable = true;
        for (k, corner) in box3d.corners.iter().enumerate() {
            match model.project(corner) {
                Ok(p) => corners_px[k] = [p.x, p.y],
                Err(_) => {
                    projectable = false;
                    break;
                }
            }
        }
        if !projectable {
            let mut o = outcome_vessel(
                image_id,
                a.mmsi,
                "corrected box leaves the view frustum".into(),
            );
            o.detection_index = Some(file_index);
            o.theta = Some(a.theta);
            outcomes.push(o);
            continue;
        }

        let mut flags = Vec::new();
        if det.rect.on_border(w, h, cfg.border_margin_px) {
            flags.push("border".to_owned());
        }
        if *dead_reckoned {
            flags.push("dead_reckoned".to_owned());
        }
        match (corr.alpha_used, corr.beta_used) {
            (false, false) => flags.push("gamma_only".to_owned()),
            (true, false) | (false, true) => flags.push("single_side".to_owned()),
            (true, true) => {}
        }

        outcomes.push(OutcomeRecord {
            format_version: FORMAT_VERSION,
            image_id: image_id.to_owned(),
            kind: "match".into(),
            mmsi: Some(a.mmsi),
            detection_index: Some(file_index),
            theta: Some(a.theta),
            reason: None,
        });
        annotations.push(AnnotationRecord::from_box(
            image_id, a.mmsi, file_index, a.theta, &box3d, corners_px, flags,
        ));
    }

    let det_reason = if segs.is_empty() {
        "no pose-ready vessels".to_owned()
    } else {
        "no assignment under threshold".to_owned()
    };
    for &i in &outcome.no_match.detections {
        outcomes.push(outcome_detection(image_id, cand_idx[i], det_reason.clone()));
    }
    let vessel_reason = if cands.is_empty() {
        "no detections".to_owned()
    } else {
        "no assignment under threshold".to_owned()
    };
    for &mmsi in &outcome.no_match.vessels {
        outcomes.push(outcome_vessel(image_id, mmsi, vessel_reason.clone()));
    }

    (annotations, outcomes)
}

/// Runs fusion over a whole dataset.
///
/// Images are processed in `image_id` order by `workers` threads
/// (0 = one per core); output order is independent of the worker count.
pub fn run_fusion(
    models: &BTreeMap<u32, CameraModel>,
    images: &[ImageRecord],
    detections: &[DetectionRecord],
    messages: &[DecodedMessage],
    cfg: &FusionConfig,
    workers: usize,
) -> Result<FusionOutput, PipelineError> {
    let mut order: Vec<&ImageRecord> = images.iter().collect();
    order.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    for pair in order.windows(2) {
        if pair[0].image_id == pair[1].image_id {
            return Err(PipelineError::DuplicateImage(pair[0].image_id.clone()));
        }
    }
    for img in &order {
        if !models.contains_key(&img.viewport_id) {
            return Err(PipelineError::UnknownViewport {
                image_id: img.image_id.clone(),
                viewport_id: img.viewport_id,
            });
        }
    }

    let mut per_image: HashMap<&str, Vec<DetectionRecord>> = HashMap::new();
    let known: BTreeSet<&str> = order.iter().map(|i| i.image_id.as_str()).collect();
    let mut orphans = 0usize;
    for det in detections {
        if known.contains(det.image_id.as_str()) {
            per_image
                .entry(det.image_id.as_str())
                .or_default()
                .push(det.clone());
        } else {
            orphans += 1;
        }
    }
    let empty: Vec<DetectionRecord> = Vec::new();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| PipelineError::Pool(e.to_string()))?;
    let results: Vec<(Vec<AnnotationRecord>, Vec<OutcomeRecord>)> = pool.install(|| {
        order
            .par_iter()
            .map(|img| {
                let model = &models[&img.viewport_id];
                let dets = per_image.get(img.image_id.as_str()).unwrap_or(&empty);
                let snapshot = VesselIndex::snapshot(messages, img.time_s);
                fuse_image(model, img, dets, &snapshot, cfg)
            })
            .collect()
    });

    let mut out = FusionOutput {
        orphan_detections: orphans,
        ..Default::default()
    };
    for (annotations, outcomes) in results {
        out.annotations.extend(annotations);
        out.outcomes.extend(outcomes);
    }
    Ok(out)
}
