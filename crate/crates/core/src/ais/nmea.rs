//! AIVDM sentence framing, payload armor, and multipart reassembly.
//!
//! Log lines carry an optional leading receiver timestamp (seconds, unix
//! epoch) separated by whitespace from the `!AIVDM` sentence. The receiver
//! timestamp is the message time used everywhere downstream; AIS payloads
//! carry no usable absolute time of their own.

use std::collections::HashMap;

use super::bits::BitBuf;
use super::AisError;

/// One parsed AIVDM sentence, before multipart reassembly.
#[derive(Debug, Clone, PartialEq)]
pub struct RawFragment {
    pub receiver_time_s: f64,
    pub fragment_count: u8,
    /// 1-based index within the group.
    pub fragment_index: u8,
    /// Sequential message id; required for multipart groups.
    pub message_id: Option<u8>,
    /// Radio channel (usually 'A' or 'B').
    pub channel: Option<char>,
    /// Armored payload characters, still encoded.
    pub payload: String,
    /// Pad bits to drop from this sentence's tail.
    pub fill_bits: u8,
}

/// Fully reassembled payload with the receiver time of its last fragment.
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledMessage {
    pub bits: BitBuf,
    pub receiver_time_s: f64,
}

/// NMEA checksum: XOR of all bytes between `!` and `*`, exclusive.
pub fn checksum(body: &str) -> u8 {
    body.bytes().fold(0, |acc, b| acc ^ b)
}

/// Six-bit armor: ASCII 48..=87 maps to 0..=39, 96..=119 to 40..=63.
fn armor_value(c: u8) -> Option<u8> {
    let v = c.wrapping_sub(48);
    let v = if v > 40 { v - 8 } else { v };
    (matches!(c, 48..=87 | 96..=119)).then_some(v)
}

/// Armored payload characters to bits, dropping `fill_bits` from the end.
pub fn payload_to_bits(payload: &str, fill_bits: u8) -> Result<BitBuf, AisError> {
    if fill_bits > 5 {
        return Err(AisError::Malformed(format!("fill bits {fill_bits} > 5")));
    }
    let mut bits = BitBuf::new();
    for c in payload.bytes() {
        let v = armor_value(c)
            .ok_or_else(|| AisError::Malformed(format!("bad payload char {:?}", char::from(c))))?;
        bits.push_bits(u64::from(v), 6);
    }
    let keep = bits
        .len()
        .checked_sub(usize::from(fill_bits))
        .ok_or_else(|| AisError::Malformed("fill bits exceed payload".into()))?;
    let mut trimmed = BitBuf::new();
    for k in 0..keep {
        trimmed.push_bits(bits.uint(k, 1).unwrap(), 1);
    }
    Ok(trimmed)
}

/// Bits to armored payload characters, zero-padding to a 6-bit boundary.
/// Returns the characters and the pad (fill) bit count.
pub fn bits_to_payload(bits: &BitBuf) -> (String, u8) {
    let fill = (6 - bits.len() % 6) % 6;
    let mut s = String::with_capacity(bits.len() / 6 + 1);
    let mut at = 0;
    while at < bits.len() {
        let w = (bits.len() - at).min(6);
        let mut v = bits.uint(at, w).unwrap() as u8;
        v <<= 6 - w;
        s.push(char::from(if v < 40 { v + 48 } else { v + 56 }));
        at += w;
    }
    (s, fill as u8)
}

/// Parses one AIVDM/AIVDO sentence (no timestamp prefix).
pub fn parse_sentence(line: &str, receiver_time_s: f64) -> Result<RawFragment, AisError> {
    let line = line.trim();
    let rest = line
        .strip_prefix('!')
        .ok_or_else(|| AisError::Malformed("missing '!' start".into()))?;
    let (body, cs_text) = rest
        .rsplit_once('*')
        .ok_or_else(|| AisError::Malformed("missing checksum".into()))?;
    let stated = u8::from_str_radix(cs_text.trim(), 16)
        .map_err(|_| AisError::Malformed(format!("bad checksum text {cs_text:?}")))?;
    let computed = checksum(body);
    if computed != stated {
        return Err(AisError::ChecksumMismatch { computed, stated });
    }

    let fields: Vec<&str> = body.split(',').collect();
    if fields.len() != 7 {
        return Err(AisError::Malformed(format!(
            "{} fields, expected 7",
            fields.len()
        )));
    }
    if !(fields[0].ends_with("VDM") || fields[0].ends_with("VDO")) {
        return Err(AisError::Malformed(format!(
            "not a VDM/VDO sentence: {}",
            fields[0]
        )));
    }
    let fragment_count: u8 = fields[1]
        .parse()
        .map_err(|_| AisError::Malformed(format!("bad fragment count {:?}", fields[1])))?;
    let fragment_index: u8 = fields[2]
        .parse()
        .map_err(|_| AisError::Malformed(format!("bad fragment index {:?}", fields[2])))?;
    if fragment_count == 0 || fragment_index == 0 || fragment_index > fragment_count {
        return Err(AisError::BadFragmentIndex {
            index: fragment_index,
            count: fragment_count,
        });
    }
    let message_id = if fields[3].is_empty() {
        None
    } else {
        Some(
            fields[3]
                .parse()
                .map_err(|_| AisError::Malformed(format!("bad message id {:?}", fields[3])))?,
        )
    };
    let channel = fields[4].chars().next();
    if fields[5].is_empty() {
        return Err(AisError::Malformed("empty payload".into()));
    }
    let fill_bits: u8 = fields[6]
        .parse()
        .map_err(|_| AisError::Malformed(format!("bad fill bits {:?}", fields[6])))?;

    Ok(RawFragment {
        receiver_time_s,
        fragment_count,
        fragment_index,
        message_id,
        channel,
        payload: fields[5].to_string(),
        fill_bits,
    })
}

/// Parses one log line: optional leading receiver timestamp, then the
/// sentence. Lines without a timestamp get time 0.
pub fn parse_log_line(line: &str) -> Result<RawFragment, AisError> {
    let line = line.trim();
    match line.split_once(char::is_whitespace) {
        Some((head, rest)) if !line.starts_with('!') => {
            let t: f64 = head
                .parse()
                .map_err(|_| AisError::Malformed(format!("bad timestamp {head:?}")))?;
            parse_sentence(rest, t)
        }
        _ => parse_sentence(line, 0.0),
    }
}

/// Concatenates a complete fragment group into one payload.
///
/// Fragments must be the whole group in index order; each fragment's own
/// fill bits are stripped before concatenation.
pub fn assemble(frags: &[RawFragment]) -> Result<AssembledMessage, AisError> {
    let count = frags
        .first()
        .map(|f| f.fragment_count)
        .ok_or_else(|| AisError::Malformed("empty fragment group".into()))?;
    if frags.len() != usize::from(count) {
        return Err(AisError::Malformed(format!(
            "group has {} of {count} fragments",
            frags.len()
        )));
    }
    let mut bits = BitBuf::new();
    let mut time = f64::NEG_INFINITY;
    for (k, f) in frags.iter().enumerate() {
        if usize::from(f.fragment_index) != k + 1 || f.fragment_count != count {
            return Err(AisError::BadFragmentIndex {
                index: f.fragment_index,
                count: f.fragment_count,
            });
        }
        let part = payload_to_bits(&f.payload, f.fill_bits)?;
        for i in 0..part.len() {
            bits.push_bits(part.uint(i, 1).unwrap(), 1);
        }
        time = time.max(f.receiver_time_s);
    }
    Ok(AssembledMessage {
        bits,
        receiver_time_s: time,
    })
}

/// Reassembles multipart groups keyed by (message id, channel).
///
/// Groups older than the timeout are dropped by [`expire`], counted as
/// incomplete; a fresh fragment for a slot already filled restarts the
/// group (radio retransmission).
///
/// [`expire`]: MultipartAssembler::expire
#[derive(Debug)]
pub struct MultipartAssembler {
    pending: HashMap<(u8, Option<char>), Pending>,
    timeout_s: f64,
}

#[derive(Debug)]
struct Pending {
    slots: Vec<Option<RawFragment>>,
    started_s: f64,
}

impl Default for MultipartAssembler {
    fn default() -> Self {
        Self::new(30.0)
    }
}

impl MultipartAssembler {
    pub fn new(timeout_s: f64) -> Self {
        Self {
            pending: HashMap::new(),
            timeout_s,
        }
    }

    /// Feeds one fragment; returns the assembled message when its group
    /// completes. Single-fragment messages complete immediately.
    pub fn push(&mut self, frag: RawFragment) -> Result<Option<AssembledMessage>, AisError> {
        if frag.fragment_count == 1 {
            return assemble(std::slice::from_ref(&frag)).map(Some);
        }
        let id = frag
            .message_id
            .ok_or_else(|| AisError::Malformed("multipart sentence without a message id".into()))?;
        let key = (id, frag.channel);
        let entry = self.pending.entry(key).or_insert_with(|| Pending {
            slots: vec![None; usize::from(frag.fragment_count)],
            started_s: frag.receiver_time_s,
        });
        if entry.slots.len() != usize::from(frag.fragment_count) {
            // Conflicting group shape: restart with the new fragment.
            *entry = Pending {
                slots: vec![None; usize::from(frag.fragment_count)],
                started_s: frag.receiver_time_s,
            };
        }
        let slot = usize::from(frag.fragment_index) - 1;
        entry.slots[slot] = Some(frag);
        if entry.slots.iter().all(Option::is_some) {
            let group = self.pending.remove(&key).unwrap();
            let frags: Vec<RawFragment> = group.slots.into_iter().map(Option::unwrap).collect();
            return assemble(&frags).map(Some);
        }
        Ok(None)
    }

    /// Drops groups started more than the timeout before `now_s`; returns
    /// how many were dropped.
    pub fn expire(&mut self, now_s: f64) -> usize {
        let before = self.pending.len();
        let timeout = self.timeout_s;
        self.pending.retain(|_, p| now_s - p.started_s <= timeout);
        before - self.pending.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const T1: &str = "!AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0*5C";

    #[test]
    fn checksum_matches_known_sentence() {
        assert_eq!(
            checksum("AIVDM,1,1,,B,177KQJ5000G?tO`K>RA1wUbN0TKH,0"),
            0x5C
        );
    }

    #[test]
    fn parses_single_sentence() {
        let f = parse_sentence(T1, 12.5).unwrap();
        assert_eq!(f.fragment_count, 1);
        assert_eq!(f.fragment_index, 1);
        assert_eq!(f.message_id, None);
        assert_eq!(f.channel, Some('B'));
        assert_eq!(f.fill_bits, 0);
        assert_eq!(f.receiver_time_s, 12.5);
        assert_eq!(payload_to_bits(&f.payload, f.fill_bits).unwrap().len(), 168);
    }

    #[test]
    fn rejects_corrupt_checksum() {
        let bad = T1.replace("*5C", "*5D");
        assert!(matches!(
            parse_sentence(&bad, 0.0),
            Err(AisError::ChecksumMismatch {
                computed: 0x5C,
                stated: 0x5D
            })
        ));
        let flipped = T1.replace("177KQJ", "177KQK");
        assert!(matches!(
            parse_sentence(&flipped, 0.0),
            Err(AisError::ChecksumMismatch { .. })
        ));
    }

    fn framed(body: &str) -> String {
        format!("!{body}*{:02X}", checksum(body))
    }

    #[test]
    fn rejects_bad_framing() {
        assert!(parse_sentence("AIVDM,1,1,,B,x,0*00", 0.0).is_err());
        assert!(parse_sentence("!AIVDM,1,1,,B,x", 0.0).is_err());
        assert!(matches!(
            parse_sentence(&framed("GPGGA,1,1,,B,x,0"), 0.0),
            Err(AisError::Malformed(_))
        ));
        assert!(matches!(
            parse_sentence(&framed("AIVDM,2,3,5,B,0,0"), 0.0),
            Err(AisError::BadFragmentIndex { index: 3, count: 2 })
        ));
        assert!(matches!(
            parse_sentence(&framed("AIVDM,1,1,,B,,0"), 0.0),
            Err(AisError::Malformed(_))
        ));
    }

    #[test]
    fn log_line_timestamp_prefix_is_optional() {
        let with = parse_log_line(&format!("1700000000.25 {T1}")).unwrap();
        assert_eq!(with.receiver_time_s, 1_700_000_000.25);
        let without = parse_log_line(T1).unwrap();
        assert_eq!(without.receiver_time_s, 0.0);
        assert!(parse_log_line(&format!("yesterday {T1}")).is_err());
    }

    #[test]
    fn multipart_completes_on_last_fragment() {
        let p1 = "!AIVDM,2,1,3,B,55P5TL01VIaAL@7WKO@mBplU@<PDhh000000001S;AJ::4A80?4i@E53,0*3E";
        let p2 = "!AIVDM,2,2,3,B,1@0000000000000,2*55";
        let mut a = MultipartAssembler::default();
        assert_eq!(a.push(parse_sentence(p1, 10.0).unwrap()).unwrap(), None);
        let msg = a.push(parse_sentence(p2, 11.0).unwrap()).unwrap().unwrap();
        assert_eq!(msg.receiver_time_s, 11.0);
        assert_eq!(msg.bits.len(), 424);
        assert_eq!(msg.bits.uint(0, 6), Some(5));
    }

    #[test]
    fn multipart_timeout_drops_group() {
        let p1 = "!AIVDM,2,1,3,B,55P5TL01VIaAL@7WKO@mBplU@<PDhh000000001S;AJ::4A80?4i@E53,0*3E";
        let mut a = MultipartAssembler::default();
        a.push(parse_sentence(p1, 0.0).unwrap()).unwrap();
        assert_eq!(a.expire(30.0), 0);
        assert_eq!(a.expire(30.1), 1);
        assert_eq!(a.expire(1e9), 0);
    }

    #[test]
    fn payload_armor_known_values() {
        // '0' -> 0, 'W' -> 39, '`' -> 40, 'w' -> 63.
        let b = payload_to_bits("0W`w", 0).unwrap();
        assert_eq!(b.uint(0, 6), Some(0));
        assert_eq!(b.uint(6, 6), Some(39));
        assert_eq!(b.uint(12, 6), Some(40));
        assert_eq!(b.uint(18, 6), Some(63));
        // 'X'..'_' (88..95) are not valid armor characters.
        assert!(payload_to_bits("X", 0).is_err());
        assert!(payload_to_bits("0", 7).is_err());
    }

    proptest! {
        #[test]
        fn armor_round_trips(len in 1usize..600) {
            let mut bits = BitBuf::new();
            let mut x = 0x9E3779B97F4A7C15u64;
            for _ in 0..len {
                x ^= x << 13; x ^= x >> 7; x ^= x << 17;
                bits.push_bits(x & 1, 1);
            }
            let (payload, fill) = bits_to_payload(&bits);
            let back = payload_to_bits(&payload, fill).unwrap();
            prop_assert_eq!(back, bits);
        }
    }
}
