//! LTSPVOL1: a short text header followed by the raw little-endian payload.
//!
//! ```text
//! LTSPVOL1
//! extents 96 96 96
//! spacing 0.7 0.7 0.7
//! kind scalar-f32
//! byte_order little-endian
//! normalized 0
//! end_header
//! <payload>
//! ```

use std::fs;
use std::path::Path;

use crate::error::{CoreError, FormatError, Result};
use crate::volio::volume::{ElementKind, Volume, VoxelData};

pub const VOLUME_MAGIC: &str = "LTSPVOL1";
const END_HEADER: &[u8] = b"end_header\n";

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(v)).map_err(|e| CoreError::io(path, e))
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| CoreError::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Decode::Format(f) => CoreError::format(path, f),
        Decode::Core(c) => c,
    })
}

pub(crate) fn encode(v: &Volume) -> Vec<u8> {
    let [s, h, w] = v.extents();
    let [a, b, c] = v.spacing();
    let header = format!(
        "{VOLUME_MAGIC}\nextents {s} {h} {w}\nspacing {a} {b} {c}\nkind {}\nbyte_order little-endian\nnormalized {}\n",
        v.kind().name(),
        u8::from(v.is_normalized())
    );
    let mut out = header.into_bytes();
    out.extend_from_slice(END_HEADER);
    match v.data() {
        VoxelData::Scalar(d) => d.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        VoxelData::Label(d) => out.extend_from_slice(d),
    }
    out
}

enum Decode {
    Format(FormatError),
    Core(CoreError),
}

impl From<FormatError> for Decode {
    fn from(e: FormatError) -> Self {
        Decode::Format(e)
    }
}

fn decode(bytes: &[u8]) -> std::result::Result<Volume, Decode> {
    let magic = format!("{VOLUME_MAGIC}\n");
    if !bytes.starts_with(magic.as_bytes()) {
        return Err(FormatError::BadMagic { expected: VOLUME_MAGIC }.into());
    }
    let end = bytes
        .windows(END_HEADER.len())
        .position(|w| w == END_HEADER)
        .ok_or_else(|| FormatError::Header("missing end_header".into()))?;
    let header = std::str::from_utf8(&bytes[magic.len()..end])
        .map_err(|_| FormatError::Header("header is not UTF-8".into()))?;
    let payload = &bytes[end + END_HEADER.len()..];

    let mut extents = None;
    let mut spacing = None;
    let mut kind = None;
    let mut normalized = false;
    for line in header.lines() {
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        match key {
            "extents" => extents = Some(triple::<usize>(&rest, "extents")?),
            "spacing" => spacing = Some(triple::<f64>(&rest, "spacing")?),
            "kind" => {
                let name = rest.first().copied().unwrap_or_default();
                kind = Some(
                    ElementKind::from_name(name).ok_or_else(|| FormatError::UnknownKind(name.to_string()))?,
                );
            }
            "byte_order" => {
                if rest != ["little-endian"] {
                    return Err(FormatError::Header(format!("unsupported byte order {rest:?}")).into());
                }
            }
            "normalized" => normalized = rest == ["1"],
            other => return Err(FormatError::Header(format!("unknown field {other:?}")).into()),
        }
    }
    let extents = extents.ok_or_else(|| FormatError::Header("missing extents".into()))?;
    let spacing = spacing.ok_or_else(|| FormatError::Header("missing spacing".into()))?;
    let kind = kind.ok_or_else(|| FormatError::Header("missing kind".into()))?;
    let n: usize = extents.iter().product();
    let expected = n * kind.byte_width();
    if payload.len() != expected {
        return Err(FormatError::PayloadMismatch {
            expected,
            found: payload.len(),
        }
        .into());
    }
    let data = match kind {
        ElementKind::ScalarF32 => VoxelData::Scalar(
            payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect(),
        ),
        ElementKind::LabelU8 => VoxelData::Label(payload.to_vec()),
    };
    let mut v = Volume::new(extents, spacing, data).map_err(Decode::Core)?;
    v.set_normalized(normalized);
    Ok(v)
}

fn triple<T: std::str::FromStr>(parts: &[&str], field: &str) -> std::result::Result<[T; 3], FormatError> {
    let parsed: Vec<T> = parts.iter().filter_map(|p| p.parse().ok()).collect();
    match <[T; 3]>::try_from(parsed) {
        Ok(t) if parts.len() == 3 => Ok(t),
        _ => Err(FormatError::Header(format!("{field} needs three numbers"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_scalar_volume_round_trips_bit_exactly() {
        let values = vec![0.1f32, -0.0, f32::MIN_POSITIVE, 1e30, -7.25, 3.0, 0.5, -1000.0];
        let v = Volume::scalar([2, 2, 2], [0.5, 0.781, 1.0 / 3.0], values).unwrap();
        let bytes = encode(&v);
        let back = match decode(&bytes) {
            Ok(b) => b,
            Err(_) => panic!("decode failed"),
        };
        assert_eq!(encode(&back), bytes);
        let (a, b) = (v.as_scalar().unwrap(), back.as_scalar().unwrap());
        assert!(a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()));
        assert_eq!(back.spacing(), v.spacing());
    }

    #[test]
    fn corruptions_map_to_distinct_errors() {
        let v = Volume::labels([2, 2, 2], [1.0; 3], vec![1; 8]).unwrap();
        let bytes = encode(&v);
        let err = |b: &[u8]| match decode(b) {
            Err(Decode::Format(f)) => f,
            _ => panic!("expected a format error"),
        };
        assert!(matches!(err(&bytes[..bytes.len() - 1]), FormatError::PayloadMismatch { expected: 8, found: 7 }));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(err(&bad), FormatError::BadMagic { .. }));
        let text = String::from_utf8_lossy(&bytes).replace("label-u8", "label-u9");
        assert!(matches!(err(text.as_bytes()), FormatError::UnknownKind(k) if k == "label-u9"));
    }
}
