//! Minimal binary PGM (P5) reader and writer.
//!
//! Only 8-bit binary grayscale is supported: magic `P5`, maxval at most 255.
//! Pixels are exposed as f64 in [0, 1] (raw value / maxval). ASCII `P2`
//! files and 16-bit rasters are rejected with explicit errors rather than
//! misread.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::ImageFormat {
        path: path.display().to_string(),
        reason: reason.into(),
    }
}

/// Reads one whitespace-delimited header token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<Vec<u8>> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    if *pos >= bytes.len() {
        return None;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(bytes[start..*pos].to_vec())
}

fn parse_dim(token: &[u8], what: &str, path: &Path) -> Result<usize> {
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .ok_or_else(|| bad(path, format!("invalid {what} field")))
}

pub fn read_pgm(path: &Path) -> Result<Array2<f64>> {
    let file = File::open(path).map_err(|e| bad(path, e.to_string()))?;
    let mut bytes = Vec::new();
    BufReader::new(file).read_to_end(&mut bytes)?;
    let mut pos = 0;
    let magic = next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "empty file"))?;
    match magic.as_slice() {
        b"P5" => {}
        b"P2" => return Err(bad(path, "ASCII PGM (P2) is not supported, only binary P5")),
        other => {
            return Err(bad(
                path,
                format!("not a PGM file (magic {:?})", String::from_utf8_lossy(other)),
            ))
        }
    }
    let width = parse_dim(
        &next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "missing width"))?,
        "width",
        path,
    )?;
    let height = parse_dim(
        &next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "missing height"))?,
        "height",
        path,
    )?;
    let maxval = parse_dim(
        &next_token(&bytes, &mut pos).ok_or_else(|| bad(path, "missing maxval"))?,
        "maxval",
        path,
    )?;
    if width == 0 || height == 0 {
        return Err(bad(path, "zero image dimension"));
    }
    if maxval == 0 {
        return Err(bad(path, "maxval must be positive"));
    }
    if maxval > 255 {
        return Err(bad(path, format!("16-bit PGM (maxval {maxval}) is not supported")));
    }
    // Exactly one whitespace byte separates the maxval from the raster.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(bad(path, "missing raster separator"));
    }
    pos += 1;
    let need = width * height;
    let raster = &bytes[pos..];
    if raster.len() < need {
        return Err(bad(
            path,
            format!("raster truncated: need {need} bytes, have {}", raster.len()),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let mut out = Array2::zeros((height, width));
    for r in 0..height {
        for c in 0..width {
            let v = raster[r * width + c];
            if v as usize > maxval {
                return Err(bad(path, format!("pixel value {v} exceeds maxval {maxval}")));
            }
            out[[r, c]] = v as f64 * scale;
        }
    }
    Ok(out)
}

/// Writes an image as 8-bit binary PGM. Values are scaled by 255, rounded,
/// and clamped to [0, 255].
pub fn write_pgm(path: &Path, image: &Array2<f64>) -> Result<()> {
    let (height, width) = image.dim();
    if height == 0 || width == 0 {
        return Err(Error::input("cannot write an empty image"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write!(w, "P5\n{width} {height}\n255\n")?;
    let mut raster = Vec::with_capacity(width * height);
    for r in 0..height {
        for c in 0..width {
            let v = (image[[r, c]] * 255.0).round().clamp(0.0, 255.0);
            raster.push(v as u8);
        }
    }
    w.write_all(&raster)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use tempfile::tempdir;

    #[test]
    fn round_trip_preserves_quantized_pixels() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("img.pgm");
        let image = array![[0.0, 0.5, 1.0], [0.25, 0.75, 0.1]];
        write_pgm(&path, &image).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back.dim(), (2, 3));
        for (a, b) in image.iter().zip(back.iter()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn writer_clamps_out_of_range_values() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("clamp.pgm");
        let image = array![[-0.5, 2.0]];
        write_pgm(&path, &image).unwrap();
        let back = read_pgm(&path).unwrap();
        assert_eq!(back[[0, 0]], 0.0);
        assert_eq!(back[[0, 1]], 1.0);
    }

    #[test]
    fn header_comments_and_odd_whitespace_are_accepted() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("comment.pgm");
        let mut bytes = b"P5 # magic\n# a comment line\n 2\t1 # dims\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 255]);
        std::fs::write(&path, bytes).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.dim(), (1, 2));
        assert_eq!(img[[0, 0]], 0.0);
        assert_eq!(img[[0, 1]], 1.0);
    }

    #[test]
    fn non_255_maxval_rescales() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("max100.pgm");
        let mut bytes = b"P5\n2 1\n100\n".to_vec();
        bytes.extend_from_slice(&[50, 100]);
        std::fs::write(&path, bytes).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img[[0, 0]], 0.5);
        assert_eq!(img[[0, 1]], 1.0);
    }

    #[test]
    fn rejects_ascii_and_16_bit_variants() {
        let dir = tempdir().unwrap();
        let ascii = dir.path().join("ascii.pgm");
        std::fs::write(&ascii, b"P2\n1 1\n255\n0\n").unwrap();
        let err = read_pgm(&ascii).unwrap_err().to_string();
        assert!(err.contains("P2"), "{err}");

        let deep = dir.path().join("deep.pgm");
        let mut bytes = b"P5\n1 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0, 0]);
        std::fs::write(&deep, bytes).unwrap();
        let err = read_pgm(&deep).unwrap_err().to_string();
        assert!(err.contains("16-bit"), "{err}");
    }

    #[test]
    fn rejects_truncated_raster() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.pgm");
        let mut bytes = b"P5\n4 4\n255\n".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        std::fs::write(&path, bytes).unwrap();
        let err = read_pgm(&path).unwrap_err().to_string();
        assert!(err.contains("truncated"), "{err}");
    }

    #[test]
    fn rejects_garbage() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nope.png");
        std::fs::write(&path, b"\x89PNG\r\n").unwrap();
        assert!(read_pgm(&path).is_err());
    }
}
