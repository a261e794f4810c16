//! Grayscale PNG heat maps of log power.

use std::io::Cursor;
use std::path::Path;

use rme_core::denoise::RELATIVE_FLOOR;
use rme_core::Field;

use crate::error::{format_err, RmeError, Result};
use crate::io::write_atomic;

/// 8-bit pixels, row `m` top-down: `10 log10(x + floor)` mapped affinely onto `[0, 255]`.
///
/// A field whose dB range is degenerate renders as uniform mid-gray.
pub fn heatmap_pixels(field: &Field) -> Result<Vec<u8>> {
    if field.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(format_err("cannot render a field with non-finite values"));
    }
    let peak = field.max().max(0.0);
    let floor = if peak > 0.0 { RELATIVE_FLOOR * peak } else { RELATIVE_FLOOR };
    let db = field.map(|v| 10.0 * (v.max(0.0) + floor).log10());
    let (lo, hi) = (db.min(), db.max());
    let (m, n) = field.dims();
    let mut px = Vec::with_capacity(m * n);
    for i in 0..m {
        for j in 0..n {
            let v = if hi > lo { ((db.get(i, j) - lo) / (hi - lo) * 255.0).round() } else { 128.0 };
            px.push(v as u8);
        }
    }
    Ok(px)
}

pub fn encode_png(width: usize, height: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| RmeError::Png(e.to_string()))?;
        w.write_image_data(pixels).map_err(|e| RmeError::Png(e.to_string()))?;
    }
    Ok(out)
}

/// Decodes an 8-bit grayscale PNG into `(width, height, pixels)`.
pub fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>)> {
    let dec = png::Decoder::new(Cursor::new(bytes));
    let mut reader = dec.read_info().map_err(|e| RmeError::Png(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| RmeError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| RmeError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(RmeError::Png("expected 8-bit grayscale".into()));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width as usize, info.height as usize, buf))
}

pub fn render_heatmap(field: &Field, path: &Path) -> Result<()> {
    let (m, n) = field.dims();
    let bytes = encode_png(n, m, &heatmap_pixels(field)?)?;
    write_atomic(path, &bytes)
}
