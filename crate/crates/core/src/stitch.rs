//! Reassembly of per-tile frames into a full raster.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tiling::TilePlan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Weighting {
    /// Plain mean of every covering tile.
    #[default]
    Uniform,
    /// Each tile pixel weighted by its Chebyshev distance to the window edge
    /// plus one, so tile centres dominate seams.
    Feathered,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stitched {
    pub height: usize,
    pub width: usize,
    /// Row-major pixels; uncovered pixels hold the nodata value.
    pub values: Vec<f64>,
    /// Number of tiles covering each pixel.
    pub counts: Vec<u32>,
}

fn feather(window: usize, r: usize, c: usize) -> f64 {
    (r + 1).min(window - r).min(c + 1).min(window - c) as f64
}

/// Averages tile frames into a `height × width` raster. Tiles are
/// accumulated in plan order.
pub fn stitch(
    plan: &TilePlan,
    tiles: &BTreeMap<usize, Vec<f64>>,
    height: usize,
    width: usize,
    nodata: f64,
    weighting: Weighting,
) -> Result<Stitched> {
    if plan.height != height || plan.width != width {
        return Err(Error::DimensionMismatch(format!(
            "plan is {}x{}, output requested {height}x{width}",
            plan.height, plan.width
        )));
    }
    let window = plan.window;
    let mut sum = vec![0.0; height * width];
    let mut weight = vec![0.0; height * width];
    let mut counts = vec![0u32; height * width];
    for rect in &plan.tiles {
        let frame = tiles.get(&rect.id).ok_or(Error::MissingTile(rect.id))?;
        if frame.len() != window * window {
            return Err(Error::DimensionMismatch(format!(
                "tile {} has {} values, expected {}",
                rect.id,
                frame.len(),
                window * window
            )));
        }
        for r in 0..window {
            for c in 0..window {
                let w = match weighting {
                    Weighting::Uniform => 1.0,
                    Weighting::Feathered => feather(window, r, c),
                };
                let idx = (rect.row + r) * width + rect.col + c;
                sum[idx] += w * frame[r * window + c];
                weight[idx] += w;
                counts[idx] += 1;
            }
        }
    }
    let values = sum
        .iter()
        .zip(&weight)
        .map(|(&s, &w)| if w > 0.0 { s / w } else { nodata })
        .collect();
    Ok(Stitched { height, width, values, counts })
}

/// Crops every plan tile out of a row-major `height × width` frame.
pub fn cut_tiles(plan: &TilePlan, frame: &[f64]) -> Result<BTreeMap<usize, Vec<f64>>> {
    if frame.len() != plan.height * plan.width {
        return Err(Error::DimensionMismatch(format!(
            "frame has {} values, plan needs {}x{}",
            frame.len(),
            plan.height,
            plan.width
        )));
    }
    let w = plan.window;
    Ok(plan
        .tiles
        .iter()
        .map(|t| {
            let mut out = Vec::with_capacity(w * w);
            for r in t.row..t.row + w {
                out.extend_from_slice(&frame[r * plan.width + t.col..][..w]);
            }
            (t.id, out)
        })
        .collect())
}
