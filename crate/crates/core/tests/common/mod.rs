//! Shared AIVDM corpus and reference-decoder comparison, used by both the
//! standalone cross-validation test and the acceptance suite.
//!
//! Numeric comparisons allow for the reference's f32 arithmetic (it
//! rounds the raw 28-bit integer through f32 before dividing), which can
//! move a position by a few raw units near the magnitude limits.

use ais::messages::AisMessage;
use ais::{AisFragments, AisParser};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use vesselpose::ais::{decode_log_lines, DecodedMessage, PositionReport, StaticVoyage, KNOT_MPS};
use vesselpose::synth::encode;

const NAME_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789. ";

pub fn random_position(rng: &mut ChaCha8Rng) -> PositionReport {
    let lat = encode::quantize_pos_deg(rng.random_range(-85.0..85.0));
    let lon = encode::quantize_pos_deg(rng.random_range(-179.9..179.9));
    let sog = encode::quantize_sog_mps(rng.random_range(0.0..45.0) * KNOT_MPS);
    let cog = encode::quantize_cog_deg(rng.random_range(0.0..359.9));
    PositionReport {
        mmsi: rng.random_range(200_000_000..800_000_000),
        receiver_time_s: 0.0,
        lat_deg: rng.random_bool(0.9).then_some(lat),
        lon_deg: rng.random_bool(0.9).then_some(lon),
        sog_mps: rng.random_bool(0.9).then_some(sog),
        cog_deg: rng.random_bool(0.9).then_some(cog),
        heading_deg: rng.random_bool(0.9).then_some(rng.random_range(0..=359)),
    }
}

pub fn random_static(rng: &mut ChaCha8Rng) -> StaticVoyage {
    let len = rng.random_range(3..=15);
    let mut name = String::new();
    for i in 0..len {
        // The reference trims leading whitespace; never start with one.
        let pool = if i == 0 {
            &NAME_CHARS[..36]
        } else {
            NAME_CHARS
        };
        name.push(pool[rng.random_range(0..pool.len())] as char);
    }
    while name.ends_with(' ') {
        name.pop();
    }
    StaticVoyage {
        mmsi: rng.random_range(200_000_000..800_000_000),
        receiver_time_s: 0.0,
        name,
        ship_type: rng.random_range(0..=99),
        dim_to_bow_m: rng.random_range(0..=511),
        dim_to_stern_m: rng.random_range(0..=511),
        dim_to_port_m: rng.random_range(0..=63),
        dim_to_starboard_m: rng.random_range(0..=63),
    }
}

/// 40 synthesized positions, 8 synthesized statics (16 sentences), and
/// documented reference sentences: 59 sentences in all.
pub fn corpus() -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_816);
    let mut lines = Vec::new();
    for _ in 0..40 {
        lines.push(encode::encode_position(&random_position(&mut rng)));
    }
    for i in 0..8u8 {
        let [a, b] = encode::encode_static(&random_static(&mut rng), i % 10);
        lines.push(a);
        lines.push(b);
    }
    // Widely reproduced examples from AIVDM documentation.
    lines.push("!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C".into());
    lines.push(
        "!AIVDM,2,1,3,B,55P5TL01VIaAL@7WKO@mBplU@<PDhh000000001S;AJ::4A80?4i@E53,0*3E".into(),
    );
    lines.push("!AIVDM,2,2,3,B,1@0000000000000,2*55".into());
    lines
}

enum RefMsg {
    Pos(ais::messages::position_report::PositionReport),
    Stat(ais::messages::static_and_voyage_related_data::StaticAndVoyageRelatedData),
}

fn reference_decode(lines: &[String]) -> Vec<RefMsg> {
    let mut parser = AisParser::new();
    let mut out = Vec::new();
    for line in lines {
        match parser
            .parse(line.as_bytes(), true)
            .expect("reference accepts the corpus")
        {
            AisFragments::Complete(sentence) => match sentence.message {
                Some(AisMessage::PositionReport(p)) => out.push(RefMsg::Pos(p)),
                Some(AisMessage::StaticAndVoyageRelatedData(s)) => out.push(RefMsg::Stat(s)),
                other => panic!("unexpected corpus message: {other:?}"),
            },
            AisFragments::Incomplete(_) => {}
        }
    }
    out
}

fn close(a: Option<f64>, b: Option<f32>, tol: f64, what: &str, line: usize) {
    match (a, b) {
        (None, None) => {}
        (Some(a), Some(b)) => {
            assert!(
                (a - f64::from(b)).abs() < tol,
                "{what} {a} vs {b} at message {line}"
            )
        }
        (a, b) => panic!("{what} availability differs at message {line}: {a:?} vs {b:?}"),
    }
}

/// Decodes `lines` with both decoders and asserts field-for-field
/// agreement; returns the number of messages compared.
pub fn compare_with_reference(lines: &[String]) -> usize {
    let timestamped: Vec<String> = lines.iter().map(|l| format!("0.000 {l}")).collect();
    let (mine, stats) = decode_log_lines(timestamped.iter().map(String::as_str));
    assert!(stats.errors.is_empty(), "{:?}", stats.errors);

    let theirs = reference_decode(lines);
    assert_eq!(mine.len(), theirs.len(), "message counts differ");

    for (i, (m, t)) in mine.iter().zip(&theirs).enumerate() {
        match (m, t) {
            (DecodedMessage::Position(p), RefMsg::Pos(r)) => {
                assert_eq!(p.mmsi, r.mmsi, "mmsi at message {i}");
                close(p.lat_deg, r.latitude, 5e-5, "latitude", i);
                close(p.lon_deg, r.longitude, 5e-5, "longitude", i);
                close(
                    p.sog_mps.map(|v| v / KNOT_MPS),
                    r.speed_over_ground,
                    1e-4,
                    "speed over ground",
                    i,
                );
                close(
                    p.cog_deg,
                    r.course_over_ground,
                    1e-4,
                    "course over ground",
                    i,
                );
                assert_eq!(p.heading_deg, r.true_heading, "heading at message {i}");
            }
            (DecodedMessage::Static(s), RefMsg::Stat(r)) => {
                assert_eq!(s.mmsi, r.mmsi, "mmsi at message {i}");
                assert_eq!(s.name, r.vessel_name, "name at message {i}");
                let ref_type = r.ship_type.map_or(0, u8::from);
                assert_eq!(s.ship_type, ref_type, "ship type at message {i}");
                assert_eq!(s.dim_to_bow_m, r.dimension_to_bow, "bow at message {i}");
                assert_eq!(
                    s.dim_to_stern_m, r.dimension_to_stern,
                    "stern at message {i}"
                );
                assert_eq!(s.dim_to_port_m, r.dimension_to_port, "port at message {i}");
                assert_eq!(
                    s.dim_to_starboard_m, r.dimension_to_starboard,
                    "starboard at message {i}"
                );
            }
            _ => panic!("message kind differs at {i}"),
        }
    }
    mine.len()
}
