//! AIVDM encoder, the inverse of the decoder in [`crate::ais`].
//!
//! Field values are quantized to the wire resolution (positions in
//! 1/600000 degree, speed in tenths of a knot, course in tenths of a
//! degree) so that decode(encode(x)) = x holds exactly for states whose
//! values sit on those grids. The quantizers are public so scene
//! generation can snap its ground truth onto the same grid first.

use crate::ais::bits::BitBuf;
use crate::ais::decode::{
    COG_UNAVAILABLE_RAW, LAT_UNAVAILABLE_RAW, LON_UNAVAILABLE_RAW, POS_SCALE, SOG_UNAVAILABLE_RAW,
};
use crate::ais::nmea::{bits_to_payload, checksum};
use crate::ais::{PositionReport, StaticVoyage, KNOT_MPS};

/// Snaps a latitude or longitude to the 1/600000 degree wire grid.
pub fn quantize_pos_deg(deg: f64) -> f64 {
    (deg * POS_SCALE).round() / POS_SCALE
}

fn sog_raw(mps: f64) -> u64 {
    (mps / KNOT_MPS * 10.0).round().clamp(0.0, 1022.0) as u64
}

/// Snaps a speed to the 0.1-knot wire grid (capped at the 102.2 kn the
/// field can carry).
pub fn quantize_sog_mps(mps: f64) -> f64 {
    sog_raw(mps) as f64 * 0.1 * KNOT_MPS
}

fn cog_raw(deg: f64) -> u64 {
    ((deg.rem_euclid(360.0)) * 10.0).round().min(3599.0) as u64
}

/// Snaps a course to the 0.1-degree wire grid.
pub fn quantize_cog_deg(deg: f64) -> f64 {
    cog_raw(deg) as f64 * 0.1
}

fn sixbit_value(c: char) -> u64 {
    match c {
        '@'..='_' => c as u64 - 64,
        ' '..='?' => c as u64,
        _ => 0, // outside the 6-bit charset: encode as '@' (end of text)
    }
}

fn push_text(b: &mut BitBuf, text: &str, chars: usize) {
    let upper = text.to_ascii_uppercase();
    let mut it = upper.chars();
    for _ in 0..chars {
        b.push_bits(sixbit_value(it.next().unwrap_or('@')), 6);
    }
}

fn slice_bits(b: &BitBuf, start: usize, len: usize) -> BitBuf {
    let mut out = BitBuf::new();
    let mut pos = start;
    while pos < start + len {
        let w = (start + len - pos).min(32);
        out.push_bits(b.uint(pos, w).expect("slice within payload"), w);
        pos += w;
    }
    out
}

fn frame(count: u8, index: u8, message_id: Option<u8>, payload: &str, fill: u8) -> String {
    let id = message_id.map(|m| m.to_string()).unwrap_or_default();
    let body = format!("AIVDM,{count},{index},{id},A,{payload},{fill}");
    format!("!{body}*{:02X}", checksum(&body))
}

/// Encodes a type 1 position report as a single AIVDM sentence.
///
/// `receiver_time_s` is not representable on the wire (the payload only
/// carries a UTC second); log timestamps are the caller's concern.
pub fn encode_position(p: &PositionReport) -> String {
    let mut b = BitBuf::new();
    b.push_bits(1, 6); // message type
    b.push_bits(0, 2); // repeat indicator
    b.push_bits(u64::from(p.mmsi), 30);
    b.push_bits(0, 4); // nav status: under way using engine
    b.push_bits(128, 8); // rate of turn: not available
    b.push_bits(p.sog_mps.map_or(SOG_UNAVAILABLE_RAW, sog_raw), 10);
    b.push_bits(0, 1); // position accuracy
    let lon = p
        .lon_deg
        .map_or(LON_UNAVAILABLE_RAW, |d| (d * POS_SCALE).round() as i64);
    b.push_bits(lon as u64, 28);
    let lat = p
        .lat_deg
        .map_or(LAT_UNAVAILABLE_RAW, |d| (d * POS_SCALE).round() as i64);
    b.push_bits(lat as u64, 27);
    b.push_bits(p.cog_deg.map_or(COG_UNAVAILABLE_RAW, cog_raw), 12);
    b.push_bits(p.heading_deg.map_or(511, u64::from), 9);
    b.push_bits(60, 6); // UTC second: not available
    b.push_bits(0, 2); // maneuver indicator
    b.push_bits(0, 3); // spare
    b.push_bits(0, 1); // raim
    b.push_bits(0, 19); // radio status
    debug_assert_eq!(b.len(), 168);
    let (payload, fill) = bits_to_payload(&b);
    frame(1, 1, None, &payload, fill)
}

/// Encodes a type 5 static/voyage message as its standard two-sentence
/// group. `message_id` (0..=9) links the fragments.
pub fn encode_static(s: &StaticVoyage, message_id: u8) -> [String; 2] {
    let mut b = BitBuf::new();
    b.push_bits(5, 6); // message type
    b.push_bits(0, 2); // repeat indicator
    b.push_bits(u64::from(s.mmsi), 30);
    b.push_bits(0, 2); // AIS version
    b.push_bits(0, 30); // IMO number
    push_text(&mut b, "", 7); // call sign
    push_text(&mut b, &s.name, 20);
    b.push_bits(u64::from(s.ship_type), 8);
    b.push_bits(u64::from(s.dim_to_bow_m), 9);
    b.push_bits(u64::from(s.dim_to_stern_m), 9);
    b.push_bits(u64::from(s.dim_to_port_m), 6);
    b.push_bits(u64::from(s.dim_to_starboard_m), 6);
    b.push_bits(0, 4); // EPFD type
    b.push_bits(0, 4); // ETA month
    b.push_bits(0, 5); // ETA day
    b.push_bits(0, 5); // ETA hour
    b.push_bits(0, 6); // ETA minute
    b.push_bits(0, 8); // draught
    push_text(&mut b, "", 20); // destination
    b.push_bits(0, 1); // DTE
    b.push_bits(0, 1); // spare
    debug_assert_eq!(b.len(), 424);

    let (head, fill0) = bits_to_payload(&slice_bits(&b, 0, 336));
    debug_assert_eq!(fill0, 0);
    let (tail, fill1) = bits_to_payload(&slice_bits(&b, 336, 88));
    [
        frame(2, 1, Some(message_id), &head, 0),
        frame(2, 2, Some(message_id), &tail, fill1),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ais::decode_log_lines;
    use crate::ais::nmea::{assemble, parse_sentence};
    use crate::ais::DecodedMessage;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn decode_position_line(line: &str) -> PositionReport {
        let frag = parse_sentence(line, 0.0).unwrap();
        let msg = assemble(&[frag]).unwrap();
        match crate::ais::decode::decode(&msg).unwrap().unwrap() {
            DecodedMessage::Position(p) => p,
            other => panic!("expected position, got {other:?}"),
        }
    }

    #[test]
    fn position_round_trip_is_exact_on_the_wire_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let truth = PositionReport {
                mmsi: rng.random_range(200_000_000..800_000_000),
                receiver_time_s: 0.0,
                lat_deg: if rng.random_bool(0.9) {
                    Some(rng.random_range(-54_000_000..=54_000_000) as f64 / POS_SCALE)
                } else {
                    None
                },
                lon_deg: if rng.random_bool(0.9) {
                    Some(rng.random_range(-108_000_000..=108_000_000) as f64 / POS_SCALE)
                } else {
                    None
                },
                sog_mps: if rng.random_bool(0.9) {
                    Some(rng.random_range(0..=1022) as f64 * 0.1 * KNOT_MPS)
                } else {
                    None
                },
                cog_deg: if rng.random_bool(0.9) {
                    Some(rng.random_range(0..3600) as f64 * 0.1)
                } else {
                    None
                },
                heading_deg: if rng.random_bool(0.9) {
                    Some(rng.random_range(0..360))
                } else {
                    None
                },
            };
            let decoded = decode_position_line(&encode_position(&truth));
            assert_eq!(decoded, truth, "round trip mismatch");
        }
    }

    #[test]
    fn static_round_trip_preserves_identity_and_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let charset: Vec<char> = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789. ".chars().collect();
        for _ in 0..200 {
            let len = rng.random_range(1..=20);
            let mut name: String = (0..len)
                .map(|_| charset[rng.random_range(0..charset.len())])
                .collect();
            // Trailing spaces and anything after '@' are not representable.
            while name.ends_with(' ') {
                name.pop();
            }
            let truth = StaticVoyage {
                mmsi: rng.random_range(200_000_000..800_000_000),
                receiver_time_s: 0.0,
                name,
                ship_type: rng.random_range(0..=255),
                dim_to_bow_m: rng.random_range(0..512),
                dim_to_stern_m: rng.random_range(0..512),
                dim_to_port_m: rng.random_range(0..64),
                dim_to_starboard_m: rng.random_range(0..64),
            };
            let [a, b] = encode_static(&truth, 3);
            let frags = vec![
                parse_sentence(&a, 0.0).unwrap(),
                parse_sentence(&b, 0.0).unwrap(),
            ];
            let msg = assemble(&frags).unwrap();
            match crate::ais::decode::decode(&msg).unwrap().unwrap() {
                DecodedMessage::Static(s) => assert_eq!(s, truth),
                other => panic!("expected static, got {other:?}"),
            }
        }
    }

    #[test]
    fn unavailable_heading_is_the_511_sentinel() {
        let truth = PositionReport {
            mmsi: 211_000_001,
            receiver_time_s: 0.0,
            lat_deg: Some(quantize_pos_deg(53.5)),
            lon_deg: Some(quantize_pos_deg(9.9)),
            sog_mps: Some(0.0),
            cog_deg: Some(0.0),
            heading_deg: None,
        };
        let line = encode_position(&truth);
        let frag = parse_sentence(&line, 0.0).unwrap();
        let bits = assemble(&[frag]).unwrap().bits;
        assert_eq!(bits.uint(128, 9), Some(511));
        assert_eq!(decode_position_line(&line).heading_deg, None);
    }

    #[test]
    fn zero_speed_is_a_zero_field() {
        let truth = PositionReport {
            mmsi: 211_000_001,
            receiver_time_s: 0.0,
            lat_deg: Some(0.0),
            lon_deg: Some(0.0),
            sog_mps: Some(0.0),
            cog_deg: None,
            heading_deg: Some(0),
        };
        let line = encode_position(&truth);
        let frag = parse_sentence(&line, 0.0).unwrap();
        let bits = assemble(&[frag]).unwrap().bits;
        assert_eq!(bits.uint(50, 10), Some(0));
    }

    #[test]
    fn encoded_lines_pass_the_log_driver() {
        let pos = PositionReport {
            mmsi: 255_806_000,
            receiver_time_s: 0.0,
            lat_deg: Some(quantize_pos_deg(53.541)),
            lon_deg: Some(quantize_pos_deg(9.936)),
            sog_mps: Some(quantize_sog_mps(3.2)),
            cog_deg: Some(quantize_cog_deg(71.3)),
            heading_deg: Some(70),
        };
        let stat = StaticVoyage {
            mmsi: 255_806_000,
            receiver_time_s: 0.0,
            name: "ELBE FERRY".into(),
            ship_type: 60,
            dim_to_bow_m: 20,
            dim_to_stern_m: 5,
            dim_to_port_m: 4,
            dim_to_starboard_m: 4,
        };
        let [s1, s2] = encode_static(&stat, 0);
        let log = format!(
            "100.000 {}\n100.500 {s1}\n100.500 {s2}\n",
            encode_position(&pos)
        );
        let (messages, stats) = decode_log_lines(log.lines());
        assert_eq!(stats.errors.len(), 0, "errors: {:?}", stats.errors);
        assert_eq!(stats.positions, 1);
        assert_eq!(stats.statics, 1);
        assert_eq!(messages.len(), 2);
    }

    #[test]
    fn quantizers_are_idempotent() {
        for v in [-53.123456789, 0.0, 89.999, 12.3456] {
            let q = quantize_pos_deg(v);
            assert_eq!(quantize_pos_deg(q), q);
            assert!((q - v).abs() <= 0.5 / POS_SCALE + 1e-12);
        }
        for v in [0.0, 0.3, 7.77, 51.4] {
            let q = quantize_sog_mps(v);
            assert_eq!(quantize_sog_mps(q), q);
        }
        for v in [0.0, 359.96, 123.45] {
            let q = quantize_cog_deg(v);
            assert_eq!(quantize_cog_deg(q), q);
        }
    }
}
