use std::path::Path;

use super::bytes::{put_f64s, put_string, to_u32, Reader};
use crate::diff::Tensor;
use crate::error::{Error, Result};
use crate::skeleton::{SkeletonSequence, EXPRESSIVE_COUNT, WHOLEBODY_COUNT};

pub const SEQUENCE_MAGIC: &[u8; 8] = b"SKLTSEQ\0";
pub const SEQUENCE_VERSION: u32 = 1;

/// Joint counts reserved for the bundled layouts.
fn check_layout_id(joints: usize, id: &str) -> std::result::Result<(), String> {
    let reserved = [(WHOLEBODY_COUNT, "wholebody"), (EXPRESSIVE_COUNT, "expressive")];
    for (count, name) in reserved {
        if joints == count && id != name {
            return Err(format!("{count} joints require layout id '{name}', found '{id}'"));
        }
        if id == name && joints != count {
            return Err(format!("layout id '{name}' requires {count} joints, found {joints}"));
        }
    }
    Ok(())
}

/// Serialises a sequence to bytes.
pub fn encode_sequence(seq: &SkeletonSequence) -> Result<Vec<u8>> {
    check_layout_id(seq.joints(), seq.layout_id()).map_err(Error::Layout)?;
    let mut out = Vec::with_capacity(64 + seq.data().len() * 8);
    out.extend_from_slice(SEQUENCE_MAGIC);
    out.extend_from_slice(&SEQUENCE_VERSION.to_le_bytes());
    for (v, what) in [
        (seq.persons(), "persons"),
        (seq.joints(), "joints"),
        (seq.frames(), "frames"),
        (seq.channels(), "channels"),
    ] {
        out.extend_from_slice(&to_u32(v, what)?.to_le_bytes());
    }
    put_string(&mut out, seq.layout_id())?;
    match seq.label() {
        Some(l) => {
            out.push(1);
            out.extend_from_slice(&(l as u64).to_le_bytes());
        }
        None => out.push(0),
    }
    put_f64s(&mut out, seq.data().data());
    Ok(out)
}

/// Parses a sequence from bytes.
pub fn decode_sequence(bytes: &[u8]) -> Result<SkeletonSequence> {
    let mut r = Reader::new(bytes);
    r.magic(SEQUENCE_MAGIC, "skeleton sequence")?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != SEQUENCE_VERSION {
        return Err(Error::Format {
            offset: at,
            message: format!("unsupported version {version}, expected {SEQUENCE_VERSION}"),
        });
    }
    let at = r.offset();
    let mut dims = [0usize; 4];
    for (d, what) in dims.iter_mut().zip(["persons", "joints", "frames", "channels"]) {
        *d = r.u32(what)? as usize;
    }
    if dims.contains(&0) {
        return Err(Error::Format {
            offset: at,
            message: format!("zero extent in header dimensions {dims:?}"),
        });
    }
    let at = r.offset();
    let layout_id = r.string("layout id")?;
    check_layout_id(dims[1], &layout_id).map_err(|message| Error::Format { offset: at, message })?;
    let at = r.offset();
    let label = match r.u8("label flag")? {
        0 => None,
        1 => Some(r.u64("label")? as usize),
        f => {
            return Err(Error::Format {
                offset: at,
                message: format!("label flag must be 0 or 1, found {f}"),
            })
        }
    };
    let n: usize = dims.iter().product();
    let data = r.f64s(n, "payload")?;
    if r.remaining() != 0 {
        return r.fail(format!("{} trailing bytes after payload", r.remaining()));
    }
    SkeletonSequence::new(layout_id, Tensor::new(&dims, data)?, label)
}

pub fn write_sequence(seq: &SkeletonSequence, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_sequence(seq)?)?;
    Ok(())
}

pub fn read_sequence(path: impl AsRef<Path>) -> Result<SkeletonSequence> {
    decode_sequence(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(joints: usize, id: &str) -> SkeletonSequence {
        let n = 2 * joints * 3 * 3;
        let data = (0..n)
            .map(|i| if i % 3 == 2 { 0.5 } else { i as f64 * 0.1 - 3.0 })
            .collect();
        SkeletonSequence::new(id, Tensor::new(&[2, joints, 3, 3], data).unwrap(), Some(7)).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample(133, "wholebody");
        assert_eq!(decode_sequence(&encode_sequence(&s).unwrap()).unwrap(), s);
        let s = sample(4, "toy").with_label(None);
        assert_eq!(decode_sequence(&encode_sequence(&s).unwrap()).unwrap(), s);
    }

    #[test]
    fn truncation_reports_byte_counts() {
        let bytes = encode_sequence(&sample(4, "toy")).unwrap();
        let err = decode_sequence(&bytes[..bytes.len() - 5]).unwrap_err();
        match err {
            Error::Format { message, .. } => {
                assert!(message.contains("expected 576 bytes, found 571"), "{message}")
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode_sequence(&sample(4, "toy")).unwrap();
        bytes[8] = 9;
        assert!(matches!(decode_sequence(&bytes), Err(Error::Format { offset: 8, .. })));
        bytes[0] = b'X';
        assert!(matches!(decode_sequence(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn reserved_layout_ids() {
        assert!(encode_sequence(&sample(65, "expressive")).is_ok());
        assert!(matches!(encode_sequence(&sample(65, "toy")), Err(Error::Layout(_))));
        assert!(matches!(encode_sequence(&sample(4, "wholebody")), Err(Error::Layout(_))));
    }
}
