/// UBX sync characters.
pub const SYNC: [u8; 2] = [0xB5, 0x62];

const HEADER_LEN: usize = 6;
const CHECKSUM_LEN: usize = 2;

/// One UBX frame as found in a byte stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UbxFrame {
    /// Byte offset of the first sync character in the source stream.
    pub offset: usize,
    pub message_class: u8,
    pub message_id: u8,
    pub payload: Vec<u8>,
    pub checksum_valid: bool,
}

impl UbxFrame {
    pub fn is(&self, class_id: (u8, u8)) -> bool {
        (self.message_class, self.message_id) == class_id
    }

    /// Total encoded length including sync, header and checksum.
    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.payload.len() + CHECKSUM_LEN
    }
}

/// Frames recovered from a stream plus diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedStream {
    pub frames: Vec<UbxFrame>,
    /// Sync patterns whose declared length ran past the end of input.
    pub truncated: usize,
    /// Bytes not covered by any checksum-valid frame.
    pub skipped_bytes: usize,
}

impl ParsedStream {
    pub fn valid_frames(&self) -> impl Iterator<Item = &UbxFrame> {
        self.frames.iter().filter(|f| f.checksum_valid)
    }

    pub fn invalid_count(&self) -> usize {
        self.frames.iter().filter(|f| !f.checksum_valid).count()
    }
}

/// 8-bit Fletcher checksum over class, id, length and payload.
pub fn fletcher_checksum(bytes: &[u8]) -> (u8, u8) {
    let mut ck_a = 0u8;
    let mut ck_b = 0u8;
    for &b in bytes {
        ck_a = ck_a.wrapping_add(b);
        ck_b = ck_b.wrapping_add(ck_a);
    }
    (ck_a, ck_b)
}

/// Scans `bytes` for UBX frames.
///
/// A frame with a good checksum consumes its bytes. A frame with a bad
/// checksum is reported with `checksum_valid = false` and scanning resumes
/// one byte after its sync, so a corrupted length field cannot swallow the
/// frames that follow it.
pub fn parse_ubx_stream(bytes: &[u8]) -> ParsedStream {
    let mut out = ParsedStream::default();
    let mut pos = 0usize;
    let mut covered = 0usize;

    while pos + 1 < bytes.len() {
        if bytes[pos] != SYNC[0] || bytes[pos + 1] != SYNC[1] {
            pos += 1;
            continue;
        }
        if pos + HEADER_LEN > bytes.len() {
            out.truncated += 1;
            break;
        }
        let len = u16::from_le_bytes([bytes[pos + 4], bytes[pos + 5]]) as usize;
        let end = pos + HEADER_LEN + len + CHECKSUM_LEN;
        if end > bytes.len() {
            out.truncated += 1;
            pos += 1;
            continue;
        }
        let body = &bytes[pos + 2..pos + HEADER_LEN + len];
        let (ck_a, ck_b) = fletcher_checksum(body);
        let valid = ck_a == bytes[end - 2] && ck_b == bytes[end - 1];
        out.frames.push(UbxFrame {
            offset: pos,
            message_class: bytes[pos + 2],
            message_id: bytes[pos + 3],
            payload: bytes[pos + HEADER_LEN..pos + HEADER_LEN + len].to_vec(),
            checksum_valid: valid,
        });
        if valid {
            covered += end - pos;
            pos = end;
        } else {
            pos += 1;
        }
    }
    out.skipped_bytes = bytes.len() - covered;
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference Fletcher-16 (RFC 1146 8-bit variant) written with explicit
    // modular arithmetic instead of wrapping ops.
    fn reference_checksum(bytes: &[u8]) -> (u8, u8) {
        let (mut a, mut b) = (0u32, 0u32);
        for &x in bytes {
            a = (a + x as u32) % 256;
            b = (b + a) % 256;
        }
        (a as u8, b as u8)
    }

    fn rawx_empty_frame() -> Vec<u8> {
        let body = [0x02u8, 0x15, 0x00, 0x00];
        let (a, b) = reference_checksum(&body);
        let mut f = vec![0xB5, 0x62];
        f.extend_from_slice(&body);
        f.push(a);
        f.push(b);
        f
    }

    #[test]
    fn empty_input() {
        let p = parse_ubx_stream(&[]);
        assert!(p.frames.is_empty());
        assert_eq!(p.truncated, 0);
    }

    #[test]
    fn hand_assembled_zero_length_frame() {
        let f = rawx_empty_frame();
        let p = parse_ubx_stream(&f);
        assert_eq!(p.frames.len(), 1);
        assert!(p.frames[0].checksum_valid);
        assert!(p.frames[0].is((0x02, 0x15)));
        assert!(p.frames[0].payload.is_empty());
        assert_eq!(p.skipped_bytes, 0);
    }

    #[test]
    fn corrupted_checksum_byte() {
        let mut f = rawx_empty_frame();
        let last = f.len() - 1;
        f[last] ^= 0xFF;
        let p = parse_ubx_stream(&f);
        assert_eq!(p.frames.len(), 1);
        assert!(!p.frames[0].checksum_valid);
    }

    #[test]
    fn checksum_matches_reference() {
        let data: Vec<u8> = (0..=255u8).chain(0..=255u8).collect();
        assert_eq!(fletcher_checksum(&data), reference_checksum(&data));
    }

    #[test]
    fn trailing_partial_frame_counted() {
        let mut f = rawx_empty_frame();
        f.extend_from_slice(&[0xB5, 0x62, 0x02, 0x15, 0x10]);
        let p = parse_ubx_stream(&f);
        assert_eq!(p.frames.len(), 1);
        assert_eq!(p.truncated, 1);
    }

    #[test]
    fn bogus_length_does_not_hide_following_frame() {
        // sync + header claiming 0x40 bytes, then a real frame inside that span
        let mut s = vec![0xB5, 0x62, 0x01, 0x02, 0x40, 0x00, 0x11];
        s.extend(rawx_empty_frame());
        s.extend(vec![0u8; 0x40]);
        let p = parse_ubx_stream(&s);
        assert_eq!(p.valid_frames().count(), 1);
    }
}
