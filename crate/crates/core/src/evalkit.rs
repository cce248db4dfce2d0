//! Scoring against ground truth: silhouette IoU, matching-outcome
//! accounting, and reprojection-error tables.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::camera::{reprojection_report, Correspondence, PixelProjector};
use crate::fusion::Rect;
use crate::io::{AnnotationRecord, TruthRecord};
use crate::Vec2;

/// IoU at or above this is a "good" annotation proxy.
pub const GOOD_IOU: f64 = 0.7;
/// IoU at or above this (but below good) is an "ok" annotation proxy.
pub const OK_IOU: f64 = 0.5;

/// IoU between a ground-truth rectangle and the enclosing rectangle of
/// the eight projected box corners.
pub fn silhouette_iou(gt: &Rect, corners_px: &[Vec2]) -> f64 {
    gt.iou(&Rect::enclosing(corners_px))
}

/// Per-vessel matching outcomes over a ground-truth set.
///
/// Every truth vessel lands in exactly one bucket. Correct matches are
/// sub-divided by silhouette IoU proxy, wrong matches by whether the
/// right AIS was even available, and misses by what was missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MatchingReport {
    pub correct_good: usize,
    pub correct_ok: usize,
    pub correct_bad: usize,
    /// Detection matched to another vessel because its own AIS was absent.
    pub wrong_missing_ais: usize,
    /// Detection matched to another vessel despite its AIS being present.
    pub wrong_cost: usize,
    /// AIS present, detector missed the vessel.
    pub no_match_not_predicted: usize,
    /// Detection present, AIS absent.
    pub no_match_no_ais: usize,
    /// Neither detection nor AIS.
    pub no_match_neither: usize,
    /// Both present but the association cost stayed above threshold.
    pub no_match_cost_too_high: usize,
    /// Silhouette IoU of every correct match, in truth-file order.
    pub correct_ious: Vec<f64>,
}

impl MatchingReport {
    pub fn correct(&self) -> usize {
        self.correct_good + self.correct_ok + self.correct_bad
    }

    pub fn wrong(&self) -> usize {
        self.wrong_missing_ais + self.wrong_cost
    }

    pub fn no_match(&self) -> usize {
        self.no_match_not_predicted
            + self.no_match_no_ais
            + self.no_match_neither
            + self.no_match_cost_too_high
    }

    /// All truth vessels considered.
    pub fn total(&self) -> usize {
        self.correct() + self.wrong() + self.no_match()
    }

    /// Vessels that produced an annotation (rightly or wrongly).
    pub fn annotated(&self) -> usize {
        self.correct() + self.wrong()
    }

    fn pct(part: usize, whole: usize) -> f64 {
        if whole == 0 {
            0.0
        } else {
            100.0 * part as f64 / whole as f64
        }
    }

    pub fn pct_of_total(&self, count: usize) -> f64 {
        Self::pct(count, self.total())
    }

    pub fn pct_of_annotated(&self, count: usize) -> f64 {
        Self::pct(count, self.annotated())
    }

    /// Fixed-width table with one row per bucket and the two percentage
    /// views (over all vessels, over emitted annotations).
    pub fn text_table(&self) -> String {
        let mut out = String::new();
        let row =
            |out: &mut String, group: &str, label: &str, n: usize, total: f64, ann: Option<f64>| {
                let ann = ann.map_or_else(String::new, |p| format!("{p:10.2}"));
                out.push_str(&format!(
                    "{group:<14} {label:<28} {n:>6} {total:10.2} {ann:>10}\n"
                ));
            };
        out.push_str(&format!(
            "{:<14} {:<28} {:>6} {:>10} {:>10}\n",
            "result", "quality / reason", "count", "% total", "% annot"
        ));
        row(
            &mut out,
            "correct",
            "good box (IoU >= 0.7)",
            self.correct_good,
            self.pct_of_total(self.correct_good),
            Some(self.pct_of_annotated(self.correct_good)),
        );
        row(
            &mut out,
            "correct",
            "ok box (IoU >= 0.5)",
            self.correct_ok,
            self.pct_of_total(self.correct_ok),
            Some(self.pct_of_annotated(self.correct_ok)),
        );
        row(
            &mut out,
            "correct",
            "bad box",
            self.correct_bad,
            self.pct_of_total(self.correct_bad),
            Some(self.pct_of_annotated(self.correct_bad)),
        );
        row(
            &mut out,
            "correct",
            "total",
            self.correct(),
            self.pct_of_total(self.correct()),
            Some(self.pct_of_annotated(self.correct())),
        );
        row(
            &mut out,
            "wrong",
            "own AIS missing",
            self.wrong_missing_ais,
            self.pct_of_total(self.wrong_missing_ais),
            Some(self.pct_of_annotated(self.wrong_missing_ais)),
        );
        row(
            &mut out,
            "wrong",
            "cost function",
            self.wrong_cost,
            self.pct_of_total(self.wrong_cost),
            Some(self.pct_of_annotated(self.wrong_cost)),
        );
        row(
            &mut out,
            "wrong",
            "total",
            self.wrong(),
            self.pct_of_total(self.wrong()),
            Some(self.pct_of_annotated(self.wrong())),
        );
        row(
            &mut out,
            "no match",
            "not predicted",
            self.no_match_not_predicted,
            self.pct_of_total(self.no_match_not_predicted),
            None,
        );
        row(
            &mut out,
            "no match",
            "no AIS",
            self.no_match_no_ais,
            self.pct_of_total(self.no_match_no_ais),
            None,
        );
        row(
            &mut out,
            "no match",
            "neither",
            self.no_match_neither,
            self.pct_of_total(self.no_match_neither),
            None,
        );
        row(
            &mut out,
            "no match",
            "cost too high",
            self.no_match_cost_too_high,
            self.pct_of_total(self.no_match_cost_too_high),
            None,
        );
        row(
            &mut out,
            "no match",
            "total",
            self.no_match(),
            self.pct_of_total(self.no_match()),
            None,
        );
        row(&mut out, "all", "total", self.total(), 100.0, None);
        out
    }
}

/// Classifies every truth vessel against the emitted annotations.
///
/// An annotation is attributed to a truth vessel through the detection
/// index: the detection is the vessel's appearance in the image, so
/// whichever annotation claimed that detection decides the outcome.
pub fn matching_report(truths: &[TruthRecord], annotations: &[AnnotationRecord]) -> MatchingReport {
    let mut by_detection: HashMap<(&str, usize), &AnnotationRecord> = HashMap::new();
    for a in annotations {
        by_detection.insert((a.image_id.as_str(), a.detection_index), a);
    }

    let mut report = MatchingReport::default();
    for t in truths {
        let Some(di) = t.detection_index else {
            if t.ais_dropped {
                report.no_match_neither += 1;
            } else {
                report.no_match_not_predicted += 1;
            }
            continue;
        };
        match by_detection.get(&(t.image_id.as_str(), di)) {
            Some(a) if a.mmsi == t.mmsi => {
                let px: Vec<Vec2> = a.corners_px.iter().map(|p| Vec2::new(p[0], p[1])).collect();
                let iou = silhouette_iou(&t.silhouette(), &px);
                if iou >= GOOD_IOU {
                    report.correct_good += 1;
                } else if iou >= OK_IOU {
                    report.correct_ok += 1;
                } else {
                    report.correct_bad += 1;
                }
                report.correct_ious.push(iou);
            }
            Some(_) => {
                if t.ais_dropped {
                    report.wrong_missing_ais += 1;
                } else {
                    report.wrong_cost += 1;
                }
            }
            None => {
                if t.ais_dropped {
                    report.no_match_no_ais += 1;
                } else {
                    report.no_match_cost_too_high += 1;
                }
            }
        }
    }
    report
}

/// Distribution summary of a set of IoU values.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IouSummary {
    pub count: usize,
    pub mean: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub good: usize,
    pub ok: usize,
    pub bad: usize,
}

/// Count, mean, and linearly interpolated quartiles; buckets by the
/// good/ok proxies. Empty input yields the all-zero summary.
pub fn iou_summary(values: &[f64]) -> IouSummary {
    if values.is_empty() {
        return IouSummary::default();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let quantile = |p: f64| {
        let pos = p * (sorted.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let hi = pos.ceil() as usize;
        sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
    };
    IouSummary {
        count: values.len(),
        mean: values.iter().sum::<f64>() / values.len() as f64,
        q1: quantile(0.25),
        median: quantile(0.5),
        q3: quantile(0.75),
        good: values.iter().filter(|v| **v >= GOOD_IOU).count(),
        ok: values
            .iter()
            .filter(|v| **v >= OK_IOU && **v < GOOD_IOU)
            .count(),
        bad: values.iter().filter(|v| **v < OK_IOU).count(),
    }
}

/// One row of the projection-method comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReprojectionRow {
    pub method: String,
    pub mae_px: f64,
    pub pct_width: f64,
    pub pct_height: f64,
    pub points: usize,
    pub unprojectable: usize,
}

/// Evaluates each named projector over the same correspondences.
pub fn reprojection_table(
    entries: &[(&str, &dyn PixelProjector)],
    corrs: &[Correspondence],
    width: u32,
    height: u32,
) -> Vec<ReprojectionRow> {
    entries
        .iter()
        .map(|(name, projector)| {
            let r = reprojection_report(*projector, corrs, width, height);
            ReprojectionRow {
                method: (*name).to_owned(),
                mae_px: r.mae_px,
                pct_width: r.pct_width,
                pct_height: r.pct_height,
                points: r.points,
                unprojectable: r.unprojectable,
            }
        })
        .collect()
}

pub fn reprojection_text_table(rows: &[ReprojectionRow]) -> String {
    let mut out = format!(
        "{:<24} {:>12} {:>10} {:>10} {:>8}\n",
        "method", "MAE (px)", "% width", "% height", "points"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<24} {:>12.4} {:>10.4} {:>10.4} {:>8}\n",
            r.method, r.mae_px, r.pct_width, r.pct_height, r.points
        ));
    }
    out
}
