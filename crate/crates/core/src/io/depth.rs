//! Depth image formats: 16-bit binary PGM (P5) and a raw `.bin` layout
//! with a 12-byte header (width u32 LE, height u32 LE, depth_scale f32 LE)
//! followed by u16 LE samples.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rgbd::DepthImage;

/// A loaded depth image; `depth_scale` is present only for formats that
/// embed it (`.bin`).
#[derive(Debug, Clone, PartialEq)]
pub struct DepthFile {
    pub image: DepthImage,
    pub depth_scale: Option<f64>,
}

/// Reads a depth image, dispatching on the file extension (`.pgm` or
/// `.bin`).
pub fn read_depth(path: &Path) -> Result<DepthFile> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => read_pgm(path).map(|image| DepthFile {
            image,
            depth_scale: None,
        }),
        Some("bin") => read_depth_bin(path),
        other => Err(Error::UnsupportedFormat(format!(
            "depth extension {:?} for {} (expected .pgm or .bin)",
            other.unwrap_or(""),
            path.display()
        ))),
    }
}

fn read_pgm(path: &Path) -> Result<DepthImage> {
    let bytes = fs::read(path)?;
    let loc = || path.display().to_string();

    let mut cursor = 0usize;
    let mut token = |cursor: &mut usize| -> Result<String> {
        // Skip whitespace and '#' comments.
        loop {
            while *cursor < bytes.len() && bytes[*cursor].is_ascii_whitespace() {
                *cursor += 1;
            }
            if *cursor < bytes.len() && bytes[*cursor] == b'#' {
                while *cursor < bytes.len() && bytes[*cursor] != b'\n' {
                    *cursor += 1;
                }
                continue;
            }
            break;
        }
        let start = *cursor;
        while *cursor < bytes.len() && !bytes[*cursor].is_ascii_whitespace() {
            *cursor += 1;
        }
        if start == *cursor {
            return Err(Error::parse(loc(), "truncated PGM header"));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*cursor]).into_owned())
    };

    if token(&mut cursor)? != "P5" {
        return Err(Error::parse(loc(), "not a P5 PGM file"));
    }
    let width: usize = token(&mut cursor)?
        .parse()
        .map_err(|_| Error::parse(loc(), "invalid width"))?;
    let height: usize = token(&mut cursor)?
        .parse()
        .map_err(|_| Error::parse(loc(), "invalid height"))?;
    let maxval: u32 = token(&mut cursor)?
        .parse()
        .map_err(|_| Error::parse(loc(), "invalid maxval"))?;
    if !(256..=65_535).contains(&maxval) {
        return Err(Error::UnsupportedFormat(format!(
            "PGM maxval {maxval}; only 16-bit depth (256..=65535) is supported"
        )));
    }
    // Exactly one whitespace byte separates maxval from the raster.
    if cursor >= bytes.len() || !bytes[cursor].is_ascii_whitespace() {
        return Err(Error::parse(loc(), "missing raster separator"));
    }
    cursor += 1;

    let needed = width * height * 2;
    let raster = &bytes[cursor..];
    if raster.len() < needed {
        return Err(Error::parse(
            loc(),
            format!("raster has {} bytes, expected {needed}", raster.len()),
        ));
    }
    let values: Vec<u16> = raster[..needed]
        .chunks_exact(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    DepthImage::new(width, height, values)
}

/// Writes a 16-bit binary PGM (maxval 65535, big-endian samples).
pub fn write_pgm(image: &DepthImage, path: &Path) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", image.width(), image.height()).into_bytes();
    out.reserve(image.values().len() * 2);
    for v in image.values() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

fn read_depth_bin(path: &Path) -> Result<DepthFile> {
    let bytes = fs::read(path)?;
    let loc = || path.display().to_string();
    if bytes.len() < 12 {
        return Err(Error::parse(loc(), "file shorter than the 12-byte header"));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let depth_scale = f32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if !(depth_scale > 0.0) || !depth_scale.is_finite() {
        return Err(Error::parse(loc(), "depth_scale must be positive"));
    }
    let needed = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(2))
        .ok_or_else(|| Error::parse(loc(), "width × height overflows"))?;
    let body = &bytes[12..];
    if body.len() < needed {
        return Err(Error::parse(
            loc(),
            format!("body has {} bytes, expected {needed}", body.len()),
        ));
    }
    let values: Vec<u16> = body[..needed]
        .chunks_exact(2)
        .map(|b| u16::from_le_bytes([b[0], b[1]]))
        .collect();
    Ok(DepthFile {
        image: DepthImage::new(width, height, values)?,
        depth_scale: Some(depth_scale as f64),
    })
}

/// Writes the raw `.bin` depth layout.
pub fn write_depth_bin(image: &DepthImage, depth_scale: f64, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(12 + image.values().len() * 2);
    out.extend_from_slice(&(image.width() as u32).to_le_bytes());
    out.extend_from_slice(&(image.height() as u32).to_le_bytes());
    out.extend_from_slice(&(depth_scale as f32).to_le_bytes());
    for v in image.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    #[test]
    fn pgm_decodes_row_major_values() {
        let path = tmp("d.pgm");
        let image = DepthImage::new(2, 2, vec![0, 1000, 2000, 3000]).unwrap();
        write_pgm(&image, &path).unwrap();
        let back = read_depth(&path).unwrap();
        assert_eq!(back.image.values(), &[0, 1000, 2000, 3000]);
        assert_eq!(back.image.width(), 2);
        assert_eq!(back.depth_scale, None);
    }

    #[test]
    fn pgm_samples_are_big_endian() {
        let path = tmp("d.pgm");
        let image = DepthImage::new(1, 1, vec![0x0102]).unwrap();
        write_pgm(&image, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[bytes.len() - 2..], &[0x01, 0x02]);
    }

    #[test]
    fn truncated_pgm_is_a_parse_error() {
        let path = tmp("t.pgm");
        std::fs::write(&path, b"P5\n4 4\n65535\n\x00\x01").unwrap();
        assert!(matches!(read_depth(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn eight_bit_pgm_is_unsupported() {
        let path = tmp("8bit.pgm");
        std::fs::write(&path, b"P5\n1 1\n255\n\x7f").unwrap();
        assert!(matches!(read_depth(&path), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn pgm_header_comments_are_skipped() {
        let path = tmp("c.pgm");
        std::fs::write(&path, b"P5\n# a comment\n1 1\n# another\n65535\n\x01\x02").unwrap();
        let back = read_depth(&path).unwrap();
        assert_eq!(back.image.values(), &[0x0102]);
    }

    #[test]
    fn raw_bin_round_trips_bytes() {
        let path = tmp("d.bin");
        let image = DepthImage::new(3, 2, vec![5, 0, 65535, 1, 2, 3]).unwrap();
        write_depth_bin(&image, 1000.0, &path).unwrap();
        let back = read_depth(&path).unwrap();
        assert_eq!(back.image, image);
        assert_eq!(back.depth_scale, Some(1000.0));

        // Byte-level round trip.
        let bytes = std::fs::read(&path).unwrap();
        write_depth_bin(&back.image, back.depth_scale.unwrap(), &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn truncated_bin_is_a_parse_error() {
        let path = tmp("t.bin");
        std::fs::write(&path, [1, 0, 0, 0, 1, 0, 0, 0]).unwrap();
        assert!(matches!(read_depth(&path), Err(Error::Parse { .. })));
    }

    #[test]
    fn unknown_extension_is_unsupported() {
        let path = tmp("d.exr");
        std::fs::write(&path, b"junk").unwrap();
        assert!(matches!(read_depth(&path), Err(Error::UnsupportedFormat(_))));
    }
}
