//! ITU-R M.1371 payload decoding for message types 1/2/3 and 5.
//!
//! Every unavailable-sentinel becomes `None`; units are converted at the
//! boundary (speed to m/s, position to degrees) so nothing downstream
//! sees raw AIS encodings.

use super::bits::BitBuf;
use super::nmea::AssembledMessage;
use super::AisError;

/// One knot in meters per second.
pub const KNOT_MPS: f64 = 1852.0 / 3600.0;

/// Raw sentinel for "longitude unavailable" (181 degrees in 1/600000 min).
pub const LON_UNAVAILABLE_RAW: i64 = 0x6791AC0;
/// Raw sentinel for "latitude unavailable" (91 degrees).
pub const LAT_UNAVAILABLE_RAW: i64 = 0x3412140;
/// Raw sentinel for "speed over ground unavailable".
pub const SOG_UNAVAILABLE_RAW: u64 = 1023;
/// Raw sentinel for "course over ground unavailable".
pub const COG_UNAVAILABLE_RAW: u64 = 3600;
/// Positions are encoded in 1/600000 of a degree.
pub const POS_SCALE: f64 = 600_000.0;

/// Class A position report (types 1, 2, 3), already in SI units.
///
/// `receiver_time_s` is the log timestamp of the (single) sentence; AIS
/// position payloads carry only a UTC second, not an absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionReport {
    pub mmsi: u32,
    pub receiver_time_s: f64,
    pub lat_deg: Option<f64>,
    pub lon_deg: Option<f64>,
    /// Speed over ground, m/s.
    pub sog_mps: Option<f64>,
    /// Course over ground, degrees clockwise from north. Decoded and kept
    /// although dead reckoning uses the true heading.
    pub cog_deg: Option<f64>,
    /// True heading, whole degrees 0..=359.
    pub heading_deg: Option<u16>,
}

/// Static and voyage data (type 5). Dimensions are the A/B/C/D antenna
/// offsets in whole meters: to bow, stern, port, starboard.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticVoyage {
    pub mmsi: u32,
    pub receiver_time_s: f64,
    pub name: String,
    pub ship_type: u8,
    pub dim_to_bow_m: u16,
    pub dim_to_stern_m: u16,
    pub dim_to_port_m: u16,
    pub dim_to_starboard_m: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DecodedMessage {
    Position(PositionReport),
    Static(StaticVoyage),
}

impl DecodedMessage {
    pub fn mmsi(&self) -> u32 {
        match self {
            DecodedMessage::Position(p) => p.mmsi,
            DecodedMessage::Static(s) => s.mmsi,
        }
    }

    pub fn receiver_time_s(&self) -> f64 {
        match self {
            DecodedMessage::Position(p) => p.receiver_time_s,
            DecodedMessage::Static(s) => s.receiver_time_s,
        }
    }
}

/// Decodes an assembled payload. `Ok(None)` means a valid message of a
/// type this pipeline does not use.
pub fn decode(msg: &AssembledMessage) -> Result<Option<DecodedMessage>, AisError> {
    let bits = &msg.bits;
    let msg_type = bits.uint(0, 6).ok_or(AisError::Truncated {
        msg_type: 0,
        need: 6,
        got: bits.len(),
    })? as u8;
    match msg_type {
        1..=3 => {
            decode_position(bits, msg.receiver_time_s).map(|p| Some(DecodedMessage::Position(p)))
        }
        5 => decode_static(bits, msg.receiver_time_s).map(|s| Some(DecodedMessage::Static(s))),
        _ => Ok(None),
    }
}

fn decode_position(bits: &BitBuf, receiver_time_s: f64) -> Result<PositionReport, AisError> {
    if bits.len() < 168 {
        return Err(AisError::Truncated {
            msg_type: bits.uint(0, 6).unwrap_or(0) as u8,
            need: 168,
            got: bits.len(),
        });
    }
    let mmsi = bits.uint(8, 30).unwrap() as u32;

    let sog_raw = bits.uint(50, 10).unwrap();
    let sog_mps = (sog_raw != SOG_UNAVAILABLE_RAW).then_some(sog_raw as f64 * 0.1 * KNOT_MPS);

    let lon_raw = bits.int(61, 28).unwrap();
    let lon_deg = if lon_raw == LON_UNAVAILABLE_RAW {
        None
    } else if lon_raw.abs() > 108_000_000 {
        return Err(AisError::FieldRange {
            field: "longitude",
            value: lon_raw,
        });
    } else {
        Some(lon_raw as f64 / POS_SCALE)
    };

    let lat_raw = bits.int(89, 27).unwrap();
    let lat_deg = if lat_raw == LAT_UNAVAILABLE_RAW {
        None
    } else if lat_raw.abs() > 54_000_000 {
        return Err(AisError::FieldRange {
            field: "latitude",
            value: lat_raw,
        });
    } else {
        Some(lat_raw as f64 / POS_SCALE)
    };

    let cog_raw = bits.uint(116, 12).unwrap();
    let cog_deg = (cog_raw < COG_UNAVAILABLE_RAW).then_some(cog_raw as f64 * 0.1);

    let hdg_raw = bits.uint(128, 9).unwrap() as u16;
    let heading_deg = (hdg_raw <= 359).then_some(hdg_raw);

    Ok(PositionReport {
        mmsi,
        receiver_time_s,
        lat_deg,
        lon_deg,
        sog_mps,
        cog_deg,
        heading_deg,
    })
}

fn decode_static(bits: &BitBuf, receiver_time_s: f64) -> Result<StaticVoyage, AisError> {
    // Full type 5 is 424 bits; everything this pipeline needs ends at the
    // dimension block, bit 270.
    if bits.len() < 270 {
        return Err(AisError::Truncated {
            msg_type: 5,
            need: 270,
            got: bits.len(),
        });
    }
    Ok(StaticVoyage {
        mmsi: bits.uint(8, 30).unwrap() as u32,
        receiver_time_s,
        name: bits.sixbit_text(112, 120).unwrap(),
        ship_type: bits.uint(232, 8).unwrap() as u8,
        dim_to_bow_m: bits.uint(240, 9).unwrap() as u16,
        dim_to_stern_m: bits.uint(249, 9).unwrap() as u16,
        dim_to_port_m: bits.uint(258, 6).unwrap() as u16,
        dim_to_starboard_m: bits.uint(264, 6).unwrap() as u16,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::nmea::{assemble, parse_sentence};
    use approx::assert_abs_diff_eq;

    fn decode_lines(lines: &[&str]) -> DecodedMessage {
        let frags: Vec<_> = lines
            .iter()
            .enumerate()
            .map(|(k, l)| parse_sentence(l, k as f64).unwrap())
            .collect();
        decode(&assemble(&frags).unwrap()).unwrap().unwrap()
    }

    #[test]
    fn decodes_known_position_report() {
        let m = decode_lines(&["!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C"]);
        let DecodedMessage::Position(p) = m else {
            panic!("expected position")
        };
        assert_eq!(p.mmsi, 477_553_000);
        assert_abs_diff_eq!(p.lat_deg.unwrap(), 47.582_833_333, epsilon = 1e-9);
        assert_abs_diff_eq!(p.lon_deg.unwrap(), -122.345_833_333, epsilon = 1e-9);
        assert_eq!(p.sog_mps, Some(0.0));
        assert_abs_diff_eq!(p.cog_deg.unwrap(), 51.0, epsilon = 1e-12);
        assert_eq!(p.heading_deg, Some(181));
    }

    #[test]
    fn decodes_known_static_voyage() {
        let m = decode_lines(&[
            "!AIVDM,2,1,3,B,55P5TL01VIaAL@7WKO@mBplU@<PDhh000000001S;AJ::4A80?4i@E53,0*3E",
            "!AIVDM,2,2,3,B,1@0000000000000,2*55",
        ]);
        let DecodedMessage::Static(s) = m else {
            panic!("expected static")
        };
        assert_eq!(s.mmsi, 369_190_000);
        assert_eq!(s.name, "MT.MITCHELL");
        assert_eq!(s.ship_type, 99);
        assert_eq!(s.dim_to_bow_m, 90);
        assert_eq!(s.dim_to_stern_m, 90);
        assert_eq!(s.dim_to_port_m, 10);
        assert_eq!(s.dim_to_starboard_m, 10);
    }

    #[test]
    fn sentinels_become_none() {
        // Hand-built type 1 payload with every field at its sentinel.
        let mut b = BitBuf::new();
        b.push_bits(1, 6); // type
        b.push_bits(0, 2); // repeat
        b.push_bits(235_009_802, 30); // mmsi
        b.push_bits(15, 4); // nav status: undefined
        b.push_bits(0x80, 8); // rot: sentinel -128
        b.push_bits(SOG_UNAVAILABLE_RAW, 10);
        b.push_bits(0, 1); // accuracy
        b.push_bits(LON_UNAVAILABLE_RAW as u64, 28);
        b.push_bits(LAT_UNAVAILABLE_RAW as u64, 27);
        b.push_bits(COG_UNAVAILABLE_RAW, 12);
        b.push_bits(511, 9); // heading sentinel
        b.push_bits(60, 6); // utc second: unavailable
        b.push_bits(0, 2 + 3 + 1 + 19);
        assert_eq!(b.len(), 168);
        let msg = AssembledMessage {
            bits: b,
            receiver_time_s: 7.0,
        };
        let Some(DecodedMessage::Position(p)) = decode(&msg).unwrap() else {
            panic!("expected position");
        };
        assert_eq!(p.mmsi, 235_009_802);
        assert_eq!(p.lat_deg, None);
        assert_eq!(p.lon_deg, None);
        assert_eq!(p.sog_mps, None);
        assert_eq!(p.cog_deg, None);
        assert_eq!(p.heading_deg, None);
        assert_eq!(p.receiver_time_s, 7.0);
    }

    #[test]
    fn out_of_range_position_is_an_error() {
        let mut b = BitBuf::new();
        b.push_bits(1, 6);
        b.push_bits(0, 2);
        b.push_bits(1, 30);
        b.push_bits(0, 4);
        b.push_bits(0, 8);
        b.push_bits(0, 10);
        b.push_bits(0, 1);
        b.push_bits(110_000_000, 28); // 183.3 degrees east: invalid, not sentinel
        b.push_bits(0, 27);
        b.push_bits(0, 12);
        b.push_bits(0, 9);
        b.push_bits(0, 6 + 2 + 3 + 1 + 19);
        let msg = AssembledMessage {
            bits: b,
            receiver_time_s: 0.0,
        };
        assert_eq!(
            decode(&msg),
            Err(AisError::FieldRange {
                field: "longitude",
                value: 110_000_000
            })
        );
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut b = BitBuf::new();
        b.push_bits(1, 6);
        b.push_bits(0, 50);
        b.push_bits(0, 50);
        let msg = AssembledMessage {
            bits: b,
            receiver_time_s: 0.0,
        };
        assert!(matches!(
            decode(&msg),
            Err(AisError::Truncated {
                msg_type: 1,
                need: 168,
                got: 106
            })
        ));
    }

    #[test]
    fn unsupported_types_are_skipped() {
        // Type 4 base station report, full 168 bits of zeros after the type.
        let mut b = BitBuf::new();
        b.push_bits(4, 6);
        for _ in 0..162 {
            b.push_bits(0, 1);
        }
        let msg = AssembledMessage {
            bits: b,
            receiver_time_s: 0.0,
        };
        assert_eq!(decode(&msg).unwrap(), None);
    }

    #[test]
    fn speed_unit_conversion() {
        assert_abs_diff_eq!(KNOT_MPS, 0.514_444_444, epsilon = 1e-9);
        // 10.2 knots raw = 102.
        let mut b = BitBuf::new();
        b.push_bits(1, 6);
        b.push_bits(0, 2);
        b.push_bits(1, 30);
        b.push_bits(0, 4);
        b.push_bits(0, 8);
        b.push_bits(102, 10);
        b.push_bits(0, 1);
        b.push_bits(0, 28);
        b.push_bits(0, 27);
        b.push_bits(0, 12);
        b.push_bits(90, 9);
        b.push_bits(0, 6 + 2 + 3 + 1 + 19);
        let msg = AssembledMessage {
            bits: b,
            receiver_time_s: 0.0,
        };
        let Some(DecodedMessage::Position(p)) = decode(&msg).unwrap() else {
            panic!()
        };
        assert_abs_diff_eq!(p.sog_mps.unwrap(), 10.2 * KNOT_MPS, epsilon = 1e-12);
        assert_eq!(p.heading_deg, Some(90));
    }
}
