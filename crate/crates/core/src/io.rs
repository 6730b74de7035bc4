//! `VOL1` volume files and ASCII OFF mesh export.
//!
//! `VOL1` layout (little-endian):
//!
//! | bytes  | content                                   |
//! |--------|-------------------------------------------|
//! | 0..4   | magic `VOL1`                              |
//! | 4      | dtype code, `0x01` = float32              |
//! | 5..8   | reserved, zero                            |
//! | 8..20  | dims `S0, S1, S2` as `u32`                |
//! | 20..   | `S0*S1*S2` values, `k2` fastest           |

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hull::TriMesh;
use crate::volume::Volume;

pub const MAGIC: &[u8; 4] = b"VOL1";
pub const DTYPE_F32: u8 = 0x01;
pub const HEADER_LEN: usize = 20;

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format { offset: offset as u64, reason: reason.into() }
}

pub fn encode_volume(v: &Volume) -> Result<Vec<u8>> {
    if !v.is_finite() {
        return Err(Error::NonFiniteData);
    }
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * v.len());
    out.extend_from_slice(MAGIC);
    out.push(DTYPE_F32);
    out.extend_from_slice(&[0, 0, 0]);
    for d in v.dims() {
        let d = u32::try_from(d).map_err(|_| Error::InvalidParams(format!("dim {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for x in v.data() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_volume(bytes: &[u8]) -> Result<Volume> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(format_err(0, "bad magic, expected VOL1"));
    }
    if bytes.len() < HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    if bytes[4] != DTYPE_F32 {
        return Err(format_err(4, format!("unsupported dtype code {:#04x}", bytes[4])));
    }
    if let Some(i) = bytes[5..8].iter().position(|&b| b != 0) {
        return Err(format_err(5 + i, "reserved byte is not zero"));
    }
    let mut dims = [0usize; 3];
    for (a, d) in dims.iter_mut().enumerate() {
        let o = 8 + 4 * a;
        *d = u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    }
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4).map(|b| (n, b)));
    let Some((count, payload)) = count else {
        return Err(format_err(8, format!("dims {dims:?} overflow")));
    };
    let available = bytes.len() - HEADER_LEN;
    if available < payload {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {payload} bytes, found {available}"),
        ));
    }
    if available > payload {
        return Err(format_err(HEADER_LEN + payload, "trailing bytes after payload"));
    }
    let data: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    debug_assert_eq!(data.len(), count);
    Volume::new(dims, data)
}

pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode_volume(v)?;
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&bytes)?;
    f.flush()?;
    Ok(())
}

pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_volume(&bytes)
}

/// ASCII OFF: `OFF`, counts line, one vertex per line, faces as `3 i j k`.
pub fn write_off<W: Write>(mesh: &TriMesh, mut w: W) -> Result<()> {
    writeln!(w, "OFF")?;
    writeln!(w, "{} {} 0", mesh.vertices().len(), mesh.triangles().len())?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} {}", p.0[0], p.0[1], p.0[2])?;
    }
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let v = Volume::from_fn([3, 4, 5], |k| (k[0] as f32 * 0.1 - k[1] as f32) * 1e-3 + k[2] as f32);
        let bytes = encode_volume(&v).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 60 * 4);
        let back = decode_volume(&bytes).unwrap();
        assert_eq!(back.dims(), v.dims());
        assert!(back.data().iter().zip(v.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn header_bytes_are_fixed() {
        let bytes = encode_volume(&Volume::zeros([1, 2, 3])).unwrap();
        assert_eq!(&bytes[..8], b"VOL1\x01\0\0\0");
        assert_eq!(&bytes[8..20], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0]);
    }

    #[test]
    fn bad_magic_at_offset_zero() {
        let mut bytes = encode_volume(&Volume::cube(2, 1.0)).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_volume(&bytes), Err(Error::Format { offset: 0, .. })));
        assert!(matches!(decode_volume(b"VO"), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let bytes = encode_volume(&Volume::cube(4, 1.0)).unwrap();
        let cut = &bytes[..HEADER_LEN + 63 * 4];
        match decode_volume(cut) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, cut.len()),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn other_header_faults() {
        let mut bytes = encode_volume(&Volume::cube(2, 1.0)).unwrap();
        bytes[4] = 0x02;
        assert!(matches!(decode_volume(&bytes), Err(Error::Format { offset: 4, .. })));

        let mut bytes = encode_volume(&Volume::cube(2, 1.0)).unwrap();
        bytes[6] = 1;
        assert!(matches!(decode_volume(&bytes), Err(Error::Format { offset: 6, .. })));

        let mut bytes = encode_volume(&Volume::cube(2, 1.0)).unwrap();
        bytes.push(0);
        assert!(matches!(decode_volume(&bytes), Err(Error::Format { .. })));

        let mut huge = b"VOL1\x01\0\0\0".to_vec();
        for _ in 0..3 {
            huge.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        assert!(decode_volume(&huge).is_err());
    }

    #[test]
    fn refuses_non_finite() {
        let v = Volume::new([1, 1, 2], vec![0.0, f32::NAN]).unwrap();
        assert!(matches!(encode_volume(&v), Err(Error::NonFiniteData)));
    }
}
