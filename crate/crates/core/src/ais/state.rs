//! Per-vessel state aggregation and the pose-ready gate.

use std::collections::BTreeMap;

use crate::geodesy::VesselFrame;
use crate::Vec3;

use super::decode::{DecodedMessage, PositionReport, StaticVoyage};

/// Latest known navigation and static data for one MMSI.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct VesselState {
    pub mmsi: u32,
    pub position: Option<PositionReport>,
    pub statics: Option<StaticVoyage>,
}

/// Everything fusion needs from a pose-ready vessel, in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseInputs {
    pub mmsi: u32,
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// True heading, degrees.
    pub heading_deg: u16,
    /// Speed over ground, m/s; an unavailable SOG dead-reckons as 0.
    pub sog_mps: f64,
    /// Seconds between the position report and the image.
    pub age_s: f64,
    /// Antenna offsets: to bow, to stern, to port, to starboard, meters.
    pub dim_bow_m: f64,
    pub dim_stern_m: f64,
    pub dim_port_m: f64,
    pub dim_starboard_m: f64,
}

/// Why a vessel cannot produce a pose at a given image time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NotPoseReady {
    /// No position report received at all.
    NoPosition,
    /// Position report present but lat/lon at the unavailable sentinel.
    PositionUnavailable,
    /// True heading at the unavailable sentinel.
    MissingHeading,
    /// Newest position is older than the staleness cap.
    StalePosition { age_s: f64 },
    /// No static/voyage record, so no hull dimensions.
    NoStatics,
    /// Static record present but bow+stern extent is zero.
    ZeroLength,
}

impl std::fmt::Display for NotPoseReady {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            NotPoseReady::NoPosition => write!(f, "no position report"),
            NotPoseReady::PositionUnavailable => write!(f, "position unavailable"),
            NotPoseReady::MissingHeading => write!(f, "heading unavailable"),
            NotPoseReady::StalePosition { age_s } => {
                write!(f, "position stale ({age_s:.1} s old)")
            }
            NotPoseReady::NoStatics => write!(f, "no static data"),
            NotPoseReady::ZeroLength => write!(f, "zero hull length"),
        }
    }
}

impl VesselState {
    /// Checks the pose gate at `image_time_s`: available position and
    /// heading, hull dimensions with bow+stern > 0, and a position no
    /// older than `max_age_s`. The staleness cap applies to the position
    /// only; static data does not decay.
    pub fn pose_inputs(
        &self,
        image_time_s: f64,
        max_age_s: f64,
    ) -> Result<PoseInputs, NotPoseReady> {
        let pos = self.position.as_ref().ok_or(NotPoseReady::NoPosition)?;
        let (lat_deg, lon_deg) = pos
            .lat_deg
            .zip(pos.lon_deg)
            .ok_or(NotPoseReady::PositionUnavailable)?;
        let heading_deg = pos.heading_deg.ok_or(NotPoseReady::MissingHeading)?;
        let age_s = image_time_s - pos.receiver_time_s;
        if age_s > max_age_s {
            return Err(NotPoseReady::StalePosition { age_s });
        }
        let st = self.statics.as_ref().ok_or(NotPoseReady::NoStatics)?;
        if st.dim_to_bow_m + st.dim_to_stern_m == 0 {
            return Err(NotPoseReady::ZeroLength);
        }
        Ok(PoseInputs {
            mmsi: self.mmsi,
            lat_deg,
            lon_deg,
            heading_deg,
            sog_mps: pos.sog_mps.unwrap_or(0.0),
            age_s,
            dim_bow_m: f64::from(st.dim_to_bow_m),
            dim_stern_m: f64::from(st.dim_to_stern_m),
            dim_port_m: f64::from(st.dim_to_port_m),
            dim_starboard_m: f64::from(st.dim_to_starboard_m),
        })
    }
}

/// All vessels seen in a log, keyed by MMSI. Iteration order is the MMSI
/// order, which keeps downstream output deterministic.
#[derive(Debug, Clone, Default)]
pub struct VesselIndex {
    vessels: BTreeMap<u32, VesselState>,
}

impl VesselIndex {
    pub fn new() -> Self {
        Self::default()
    }

    /// Latest-wins per message kind: a report replaces the stored one iff
    /// its receiver time is not older. Ties go to the later log line.
    pub fn ingest(&mut self, msg: DecodedMessage) {
        let state = self
            .vessels
            .entry(msg.mmsi())
            .or_insert_with(|| VesselState {
                mmsi: msg.mmsi(),
                ..VesselState::default()
            });
        match msg {
            DecodedMessage::Position(p) => {
                if state
                    .position
                    .as_ref()
                    .is_none_or(|old| p.receiver_time_s >= old.receiver_time_s)
                {
                    state.position = Some(p);
                }
            }
            DecodedMessage::Static(s) => {
                if state
                    .statics
                    .as_ref()
                    .is_none_or(|old| s.receiver_time_s >= old.receiver_time_s)
                {
                    state.statics = Some(s);
                }
            }
        }
    }

    /// State as of `up_to_time_s`: messages after that instant are not
    /// ingested. This is how per-image snapshots are built.
    pub fn snapshot(messages: &[DecodedMessage], up_to_time_s: f64) -> Self {
        let mut index = Self::new();
        for m in messages {
            if m.receiver_time_s() <= up_to_time_s {
                index.ingest(m.clone());
            }
        }
        index
    }

    pub fn get(&self, mmsi: u32) -> Option<&VesselState> {
        self.vessels.get(&mmsi)
    }

    pub fn iter(&self) -> impl Iterator<Item = &VesselState> {
        self.vessels.values()
    }

    pub fn len(&self) -> usize {
        self.vessels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vessels.is_empty()
    }
}

/// Dead-reckoning displacement: the vessel moved `sog_mps * age_s` meters
/// along its heading since the position report.
pub fn dead_reckon(frame: &VesselFrame, sog_mps: f64, age_s: f64) -> Vec3 {
    frame.x * (sog_mps * age_s)
}
