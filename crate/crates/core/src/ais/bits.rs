//! Big-endian packed bit buffer for AIS payloads.
//!
//! AIS fields are addressed by (start bit, width) with bit 0 the first
//! bit of the de-armored payload; multi-bit values are big-endian.

/// Append-only bit buffer with random-access field reads.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BitBuf {
    bytes: Vec<u8>,
    len: usize,
}

impl BitBuf {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn bit(&self, i: usize) -> bool {
        (self.bytes[i / 8] >> (7 - i % 8)) & 1 == 1
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: usize) {
        assert!(width <= 64);
        for k in (0..width).rev() {
            let bit = (value >> k) & 1 == 1;
            if self.len % 8 == 0 {
                self.bytes.push(0);
            }
            if bit {
                self.bytes[self.len / 8] |= 1 << (7 - self.len % 8);
            }
            self.len += 1;
        }
    }

    /// Unsigned big-endian field; `None` if it runs past the end.
    pub fn uint(&self, start: usize, width: usize) -> Option<u64> {
        assert!(width <= 64);
        if start + width > self.len {
            return None;
        }
        let mut v = 0u64;
        for i in start..start + width {
            v = (v << 1) | u64::from(self.bit(i));
        }
        Some(v)
    }

    /// Two's-complement signed field.
    pub fn int(&self, start: usize, width: usize) -> Option<i64> {
        assert!(width >= 1);
        let raw = self.uint(start, width)?;
        let sign = 1u64 << (width - 1);
        Some(if raw & sign != 0 {
            (raw as i64) - ((sign as i64) << 1)
        } else {
            raw as i64
        })
    }

    /// Six-bit ASCII text field. `width` must be a multiple of 6. The
    /// result is cut at the first `@` and stripped of trailing spaces.
    pub fn sixbit_text(&self, start: usize, width: usize) -> Option<String> {
        assert_eq!(width % 6, 0);
        let mut s = String::with_capacity(width / 6);
        for k in 0..width / 6 {
            let v = self.uint(start + 6 * k, 6)? as u8;
            let c = if v < 32 { v + 64 } else { v };
            s.push(char::from(c));
        }
        let s = match s.find('@') {
            Some(i) => &s[..i],
            None => &s[..],
        };
        Some(s.trim_end_matches(' ').to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn push_and_read_fields() {
        let mut b = BitBuf::new();
        b.push_bits(0b101, 3);
        b.push_bits(0xABCD, 16);
        b.push_bits(1, 1);
        assert_eq!(b.len(), 20);
        assert_eq!(b.uint(0, 3), Some(0b101));
        assert_eq!(b.uint(3, 16), Some(0xABCD));
        assert_eq!(b.uint(19, 1), Some(1));
        assert_eq!(b.uint(19, 2), None);
    }

    #[test]
    fn signed_fields_sign_extend() {
        let mut b = BitBuf::new();
        b.push_bits((-5_i64 as u64) & 0xFF, 8);
        b.push_bits(5, 8);
        assert_eq!(b.int(0, 8), Some(-5));
        assert_eq!(b.int(8, 8), Some(5));
        // 28-bit longitude raw value as used by position reports.
        let mut lon = BitBuf::new();
        lon.push_bits((-73_407_500_i64 as u64) & ((1 << 28) - 1), 28);
        assert_eq!(lon.int(0, 28), Some(-73_407_500));
    }

    #[test]
    fn text_depads_at_and_spaces() {
        let mut b = BitBuf::new();
        // "HI " then '@' padding: H=8, I=9, space=32, @=0.
        for v in [8u64, 9, 32, 0, 0] {
            b.push_bits(v, 6);
        }
        assert_eq!(b.sixbit_text(0, 30), Some("HI".to_string()));
    }

    proptest! {
        #[test]
        fn uint_round_trips(values in proptest::collection::vec((0u64..1<<20, 1usize..=20), 1..20)) {
            let mut b = BitBuf::new();
            for &(v, w) in &values {
                b.push_bits(v & ((1 << w) - 1), w);
            }
            let mut at = 0;
            for &(v, w) in &values {
                prop_assert_eq!(b.uint(at, w), Some(v & ((1 << w) - 1)));
                at += w;
            }
        }
    }
}
