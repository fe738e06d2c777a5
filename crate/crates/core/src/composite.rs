//! Three-band false/true-colour composites written as binary PPM.

use crate::error::{Error, Result};
use crate::raster_io::RasterSeries;

pub const STRETCH_LOW: f64 = 0.02;
pub const STRETCH_HIGH: f64 = 0.98;

/// Linear-interpolated percentile of an ascending slice, `p` in `[0, 1]`.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Maps one band to bytes by a 2nd–98th percentile stretch. A band whose
/// stretch range collapses maps every valid pixel to 128; nodata maps to 0.
pub fn stretch_band(values: &[f32], is_nodata: impl Fn(f32) -> bool) -> Vec<u8> {
    let mut valid: Vec<f64> = values.iter().filter(|v| !is_nodata(**v)).map(|&v| v as f64).collect();
    if valid.is_empty() {
        return vec![0; values.len()];
    }
    valid.sort_by(f64::total_cmp);
    let lo = percentile(&valid, STRETCH_LOW);
    let hi = percentile(&valid, STRETCH_HIGH);
    values
        .iter()
        .map(|&v| {
            if is_nodata(v) {
                0
            } else if hi <= lo {
                128
            } else {
                ((v as f64 - lo) / (hi - lo) * 255.0).round().clamp(0.0, 255.0) as u8
            }
        })
        .collect()
}

/// Builds a P6 image from three 0-indexed bands mapped to red, green, blue.
pub fn composite_ppm(series: &RasterSeries, t: usize, bands: [usize; 3]) -> Result<Vec<u8>> {
    if t >= series.t_len() {
        return Err(Error::IndexOutOfRange(format!("time step {t} of {}", series.t_len())));
    }
    if let Some(&b) = bands.iter().find(|&&b| b >= series.bands()) {
        return Err(Error::UnknownBand(b));
    }
    let channels: Vec<Vec<u8>> = bands
        .iter()
        .map(|&b| stretch_band(series.frame(t, b), |v| series.is_nodata(v)))
        .collect();
    let mut out = format!("P6\n{} {}\n255\n", series.width(), series.height()).into_bytes();
    for i in 0..series.height() * series.width() {
        out.extend(channels.iter().map(|c| c[i]));
    }
    Ok(out)
}

/// Converts 1-indexed Landsat band numbers (B4 → 3) to 0-indexed bands.
pub fn landsat_to_index(band_numbers: [usize; 3]) -> Result<[usize; 3]> {
    let mut out = [0; 3];
    for (slot, &b) in out.iter_mut().zip(&band_numbers) {
        if b == 0 {
            return Err(Error::UnknownBand(0));
        }
        *slot = b - 1;
    }
    Ok(out)
}
