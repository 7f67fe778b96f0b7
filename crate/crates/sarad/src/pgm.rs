//! 8-bit binary portable graymap rendering. Values are optionally
//! clipped at the top percentile first, then min-max scaled onto
//! 0..=255; a constant grid renders black.

use std::path::Path;

use sarad_core::image::clip_top_percent;
use sarad_core::SarImage;

use crate::error::{format_err, io_err, Result};

pub fn write_pgm(
    path: &Path,
    height: usize,
    width: usize,
    values: &[f64],
    clip_percent: Option<f64>,
) -> Result<()> {
    if values.len() != height * width {
        return Err(format_err(
            path,
            format!("{}x{} needs {} values, got {}", height, width, height * width, values.len()),
        ));
    }
    let clipped = match clip_percent {
        Some(p) => clip_top_percent(values, p)?,
        None => values.to_vec(),
    };
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &clipped {
        min = min.min(v);
        max = max.max(v);
    }
    let span = max - min;
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.reserve(clipped.len());
    for &v in &clipped {
        let byte = if span > 0.0 {
            (255.0 * (v - min) / span).round() as u8
        } else {
            0
        };
        out.push(byte);
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Per-pixel mean over channels, the single-band view used for renders.
pub fn channel_mean(img: &SarImage) -> Vec<f64> {
    let c = img.channels();
    let inv = 1.0 / c as f64;
    img.data()
        .chunks_exact(c)
        .map(|px| px.iter().sum::<f64>() * inv)
        .collect()
}

pub fn render_image(path: &Path, img: &SarImage, clip_percent: Option<f64>) -> Result<()> {
    write_pgm(path, img.height(), img.width(), &channel_mean(img), clip_percent)
}
