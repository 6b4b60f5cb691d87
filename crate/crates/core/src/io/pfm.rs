//! Single-channel PFM depth maps: little-endian `f32`, rows stored bottom
//! to top, `NaN` for invalid pixels.

use std::path::Path;

use crate::error::{MvsError, Result};
use crate::grid::DepthMap;

use super::atomic_write;

pub fn encode_pfm(map: &DepthMap) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", map.width, map.height).into_bytes();
    out.reserve(map.data.len() * 4);
    for y in (0..map.height).rev() {
        for x in 0..map.width {
            out.extend_from_slice(&(map.get(x, y) as f32).to_le_bytes());
        }
    }
    out
}

fn binary_err(path: &Path, offset: usize, message: impl Into<String>) -> MvsError {
    MvsError::Binary {
        path: path.to_path_buf(),
        offset,
        message: message.into(),
    }
}

/// Reads one whitespace-delimited header token at or after `pos`, returning
/// its starting offset.
fn token<'a>(bytes: &'a [u8], pos: &mut usize, path: &Path) -> Result<(usize, &'a str)> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(binary_err(path, start, "truncated header"));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map(|t| (start, t))
        .map_err(|_| binary_err(path, start, "header is not ASCII"))
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<DepthMap> {
    let mut pos = 0;
    match token(bytes, &mut pos, path)?.1 {
        "Pf" => {}
        "PF" => return Err(binary_err(path, 0, "color PFM is not a depth map")),
        other => return Err(binary_err(path, 0, format!("bad magic `{other}`"))),
    }
    let dim = |pos: &mut usize| -> Result<usize> {
        let (at, t) = token(bytes, pos, path)?;
        t.parse::<usize>()
            .ok()
            .filter(|&v| v > 0)
            .ok_or_else(|| binary_err(path, at, format!("bad dimension `{t}`")))
    };
    let width = dim(&mut pos)?;
    let height = dim(&mut pos)?;
    let (at, scale_tok) = token(bytes, &mut pos, path)?;
    let scale: f32 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f32| *s != 0.0 && s.is_finite())
        .ok_or_else(|| binary_err(path, at, format!("bad scale `{scale_tok}`")))?;
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let need = width * height * 4;
    if bytes.len() < pos + need {
        return Err(binary_err(
            path,
            bytes.len(),
            format!("raster truncated: expected {need} bytes after offset {pos}"),
        ));
    }
    if bytes.len() > pos + need {
        return Err(binary_err(path, pos + need, "trailing bytes after raster"));
    }
    let mut map = DepthMap::filled(width, height, f64::NAN);
    for (i, chunk) in bytes[pos..].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if scale < 0.0 {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (x, row) = (i % width, i / width);
        map.set(x, height - 1 - row, v as f64);
    }
    Ok(map)
}

pub fn read_pfm(path: &Path) -> Result<DepthMap> {
    decode_pfm(&std::fs::read(path)?, path)
}

pub fn write_pfm(path: &Path, map: &DepthMap) -> Result<()> {
    atomic_write(path, &encode_pfm(map))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_nan() {
        let map = DepthMap::new(3, 2, vec![1.0, 2.5, f64::NAN, 4.0, 5.0, 6.25]).unwrap();
        let back = decode_pfm(&encode_pfm(&map), Path::new("m.pfm")).unwrap();
        assert_eq!((back.width, back.height), (3, 2));
        assert!(back.get(2, 0).is_nan());
        assert_eq!(back.get(0, 0), 1.0);
        assert_eq!(back.get(2, 1), 6.25);
    }

    #[test]
    fn rows_are_bottom_to_top() {
        let map = DepthMap::new(1, 2, vec![1.0, 2.0]).unwrap();
        let bytes = encode_pfm(&map);
        let header = b"Pf\n1 2\n-1.0\n".len();
        assert_eq!(&bytes[header..header + 4], &2.0f32.to_le_bytes());
    }

    #[test]
    fn big_endian_positive_scale() {
        let mut bytes = b"Pf\n2 1\n1.0\n".to_vec();
        bytes.extend_from_slice(&3.0f32.to_be_bytes());
        bytes.extend_from_slice(&7.0f32.to_be_bytes());
        let m = decode_pfm(&bytes, Path::new("b")).unwrap();
        assert_eq!(m.data, vec![3.0, 7.0]);
    }

    #[test]
    fn errors_carry_offsets() {
        let mut bytes = encode_pfm(&DepthMap::filled(2, 2, 1.0));
        bytes.truncate(bytes.len() - 3);
        assert!(matches!(decode_pfm(&bytes, Path::new("t")), Err(MvsError::Binary { .. })));
        match decode_pfm(b"P6\n1 1\n-1\n0000", Path::new("x")) {
            Err(MvsError::Binary { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
        match decode_pfm(b"Pf\n1 0\n-1\n", Path::new("x")) {
            Err(MvsError::Binary { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
    }
}
