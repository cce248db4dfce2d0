//! AIS ingestion: raw AIVDM log lines to per-vessel navigation state.
//!
//! The chain is [`nmea`] (sentence framing, 6-bit payload armor, multipart
//! reassembly) -> [`decode`] (ITU-R M.1371 bit layouts for message types
//! 1/2/3 and 5) -> [`state`] (latest-wins aggregation per MMSI and the
//! pose-ready gate used by fusion).
//!
//! Only position reports (types 1, 2, 3) and static/voyage data (type 5)
//! are decoded; every other type is skipped and counted, not an error.

pub mod bits;
pub mod decode;
pub mod nmea;
pub mod state;

pub use bits::BitBuf;
pub use decode::{DecodedMessage, PositionReport, StaticVoyage, KNOT_MPS};
pub use nmea::{AssembledMessage, MultipartAssembler, RawFragment};
pub use state::{dead_reckon, NotPoseReady, PoseInputs, VesselIndex, VesselState};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AisError {
    #[error("malformed sentence: {0}")]
    Malformed(String),
    #[error("checksum mismatch: computed {computed:02X}, stated {stated:02X}")]
    ChecksumMismatch { computed: u8, stated: u8 },
    #[error("multipart fragment outside its group (index {index} of {count})")]
    BadFragmentIndex { index: u8, count: u8 },
    #[error("type {msg_type} payload truncated: need {need} bits, got {got}")]
    Truncated {
        msg_type: u8,
        need: usize,
        got: usize,
    },
    #[error("field {field} out of range: {value}")]
    FieldRange { field: &'static str, value: i64 },
}

/// Per-log decode statistics. `errors` keeps the 1-based line number.
#[derive(Debug, Default, PartialEq)]
pub struct LogStats {
    pub lines: usize,
    pub sentences: usize,
    pub positions: usize,
    pub statics: usize,
    pub skipped_types: usize,
    pub expired_multipart: usize,
    pub errors: Vec<(usize, String)>,
}

/// Decodes a whole log. Blank lines and `#` comments are skipped; bad
/// lines are recorded in the stats and do not abort the run.
///
/// Multipart groups that do not complete within the assembler timeout
/// (or by end of log) count as `expired_multipart`.
pub fn decode_log_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
) -> (Vec<DecodedMessage>, LogStats) {
    let mut assembler = MultipartAssembler::default();
    let mut out = Vec::new();
    let mut stats = LogStats::default();
    for (idx, line) in lines.into_iter().enumerate() {
        stats.lines += 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let frag = match nmea::parse_log_line(line) {
            Ok(f) => f,
            Err(e) => {
                stats.errors.push((idx + 1, e.to_string()));
                continue;
            }
        };
        stats.sentences += 1;
        stats.expired_multipart += assembler.expire(frag.receiver_time_s);
        match assembler.push(frag) {
            Ok(Some(msg)) => match decode::decode(&msg) {
                Ok(Some(DecodedMessage::Position(p))) => {
                    stats.positions += 1;
                    out.push(DecodedMessage::Position(p));
                }
                Ok(Some(DecodedMessage::Static(s))) => {
                    stats.statics += 1;
                    out.push(DecodedMessage::Static(s));
                }
                Ok(None) => stats.skipped_types += 1,
                Err(e) => stats.errors.push((idx + 1, e.to_string())),
            },
            Ok(None) => {}
            Err(e) => stats.errors.push((idx + 1, e.to_string())),
        }
    }
    stats.expired_multipart += assembler.expire(f64::INFINITY);
    (out, stats)
}
