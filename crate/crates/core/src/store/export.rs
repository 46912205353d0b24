//! 8-bit grayscale PNG export.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::metrics::{to_pixels, value_range};

/// PNG bytes for `pixels`, row 0 at the top.
pub fn encode_png(pixels: &Array2<u8>) -> Result<Vec<u8>> {
    let (h, w) = pixels.dim();
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        let data: Vec<u8> = pixels.iter().copied().collect();
        writer.write_image_data(&data)?;
        writer.finish()?;
    }
    Ok(out)
}

/// Pixel range used when none is given: the image's own min/max, or a unit
/// interval above a constant value.
pub fn default_range(image: &Array2<f64>) -> (f64, f64) {
    let (lo, hi) = value_range(image);
    if hi > lo {
        (lo, hi)
    } else {
        (lo, lo + 1.0)
    }
}

/// Writes `image` mapped through [`to_pixels`] over `range` (default
/// [`default_range`]).
pub fn export_png(image: &Array2<f64>, path: impl AsRef<Path>, range: Option<(f64, f64)>) -> Result<()> {
    if image.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("image contains non-finite values"));
    }
    let (lo, hi) = range.unwrap_or_else(|| default_range(image));
    let bytes = encode_png(&to_pixels(image, lo, hi)?)?;
    let path = path.as_ref();
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decode(bytes: &[u8]) -> (png::OutputInfo, Vec<u8>) {
        let mut reader = png::Decoder::new(std::io::Cursor::new(bytes)).read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        buf.truncate(info.buffer_size());
        (info, buf)
    }

    #[test]
    fn roundtrip_matches_pixel_mapping() {
        let img = Array2::from_shape_fn((5, 7), |(r, c)| (r * 7 + c) as f64 * 0.3 - 2.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        export_png(&img, &path, Some((-1.0, 5.0))).unwrap();
        let (info, data) = decode(&std::fs::read(&path).unwrap());
        assert_eq!((info.width, info.height), (7, 5));
        assert_eq!(info.color_type, png::ColorType::Grayscale);
        let expected = to_pixels(&img, -1.0, 5.0).unwrap();
        assert_eq!(data, expected.iter().copied().collect::<Vec<_>>());
        assert_eq!(data[0], 0, "values below the range clamp to 0");
        assert_eq!(*data.last().unwrap(), 255, "values above the range clamp to 255");
    }

    #[test]
    fn constant_image_gives_constant_png() {
        let img = Array2::from_elem((4, 4), 3.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.png");
        export_png(&img, &path, None).unwrap();
        let (_, data) = decode(&std::fs::read(&path).unwrap());
        assert!(data.iter().all(|&v| v == data[0]));
    }

    #[test]
    fn bytes_are_deterministic() {
        let img = Array2::from_shape_fn((16, 16), |(r, c)| ((r * c) % 13) as f64);
        let a = encode_png(&to_pixels(&img, 0.0, 12.0).unwrap()).unwrap();
        let b = encode_png(&to_pixels(&img, 0.0, 12.0).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_range() {
        let img = Array2::zeros((2, 2));
        assert!(export_png(&img, "/nonexistent/x.png", Some((1.0, 1.0))).is_err());
    }
}
