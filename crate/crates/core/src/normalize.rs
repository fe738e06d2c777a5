//! Per-tile, per-band max-min scaling.
//!
//! Statistics are population statistics over every valid sample of a tile
//! window across the fitted time range.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster_io::RasterSeries;
use crate::tiling::{parse_num, TilePlan};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub variance: f64,
}

impl BandStats {
    pub fn is_degenerate(&self) -> bool {
        self.max == self.min
    }
}

/// Statistics for every `(tile, band)` pair, stored tile-major.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    tiles: usize,
    bands: usize,
    entries: Vec<BandStats>,
}

impl NormStats {
    pub fn new(tiles: usize, bands: usize, entries: Vec<BandStats>) -> Result<Self> {
        if entries.len() != tiles * bands {
            return Err(Error::DimensionMismatch(format!(
                "{tiles} tiles x {bands} bands needs {} entries, got {}",
                tiles * bands,
                entries.len()
            )));
        }
        Ok(Self { tiles, bands, entries })
    }

    pub fn tiles(&self) -> usize {
        self.tiles
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn get(&self, tile: usize, band: usize) -> Result<&BandStats> {
        if tile >= self.tiles {
            return Err(Error::UnknownTile(tile));
        }
        if band >= self.bands {
            return Err(Error::UnknownBand(band));
        }
        Ok(&self.entries[tile * self.bands + band])
    }

    pub fn get_mut(&mut self, tile: usize, band: usize) -> Result<&mut BandStats> {
        self.get(tile, band)?;
        Ok(&mut self.entries[tile * self.bands + band])
    }

    pub fn entries(&self) -> &[BandStats] {
        &self.entries
    }
}

/// A normalized window plus whether its tile had a constant range.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWindow {
    pub values: Vec<f64>,
    pub degenerate: bool,
}

fn check_dims(series: &RasterSeries, plan: &TilePlan) -> Result<()> {
    if series.height() != plan.height || series.width() != plan.width {
        return Err(Error::DimensionMismatch(format!(
            "series is {}x{}, plan is {}x{}",
            series.height(),
            series.width(),
            plan.height,
            plan.width
        )));
    }
    Ok(())
}

/// Fits statistics over the time steps in `t_range` (all steps when `None`).
pub fn fit_stats(series: &RasterSeries, plan: &TilePlan, t_range: Option<Range<usize>>) -> Result<NormStats> {
    check_dims(series, plan)?;
    let t_range = t_range.unwrap_or(0..series.t_len());
    if t_range.is_empty() || t_range.end > series.t_len() {
        return Err(Error::RangeTooShort(format!(
            "time range {t_range:?} is empty or exceeds {} steps",
            series.t_len()
        )));
    }
    let bands = series.bands();
    let window = plan.window;
    let entries = (0..plan.len() * bands)
        .into_par_iter()
        .map(|k| {
            let (tile, band) = (k / bands, k % bands);
            let rect = plan.tiles[tile];
            // Two passes: min/max/mean first, then centred sum of squares.
            let mut n = 0usize;
            let mut sum = 0.0;
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for t in t_range.clone() {
                let frame = series.frame(t, band);
                for r in rect.row..rect.row + window {
                    for &v in &frame[r * series.width() + rect.col..][..window] {
                        if series.is_nodata(v) {
                            continue;
                        }
                        let v = v as f64;
                        n += 1;
                        sum += v;
                        min = min.min(v);
                        max = max.max(v);
                    }
                }
            }
            if n == 0 {
                return Err(Error::AllNodataTile { tile, band });
            }
            let mean = sum / n as f64;
            let mut ss = 0.0;
            for t in t_range.clone() {
                let frame = series.frame(t, band);
                for r in rect.row..rect.row + window {
                    for &v in &frame[r * series.width() + rect.col..][..window] {
                        if !series.is_nodata(v) {
                            ss += (v as f64 - mean).powi(2);
                        }
                    }
                }
            }
            Ok(BandStats { min, max, mean: mean.clamp(min, max), variance: ss / n as f64 })
        })
        .collect::<Result<Vec<_>>>()?;
    NormStats::new(plan.len(), bands, entries)
}

/// Copies one tile window of one frame out of the series as f64.
/// Nodata pixels come back as `None`.
pub fn cut_window(series: &RasterSeries, plan: &TilePlan, tile: usize, band: usize, t: usize) -> Result<Vec<Option<f64>>> {
    check_dims(series, plan)?;
    let rect = plan.tile(tile)?;
    if band >= series.bands() {
        return Err(Error::UnknownBand(band));
    }
    if t >= series.t_len() {
        return Err(Error::IndexOutOfRange(format!("time step {t} of {}", series.t_len())));
    }
    let frame = series.frame(t, band);
    let mut out = Vec::with_capacity(plan.window * plan.window);
    for r in rect.row..rect.row + plan.window {
        for &v in &frame[r * series.width() + rect.col..][..plan.window] {
            out.push(if series.is_nodata(v) { None } else { Some(v as f64) });
        }
    }
    Ok(out)
}

/// Scales one raw window into `[0, 1]`.
pub fn scale(raw: &[Option<f64>], stats: &BandStats) -> NormalizedWindow {
    let degenerate = stats.is_degenerate();
    let range = stats.max - stats.min;
    let values = raw
        .iter()
        .map(|v| match v {
            Some(x) if !degenerate => ((x - stats.min) / range).clamp(0.0, 1.0),
            _ => 0.0,
        })
        .collect();
    NormalizedWindow { values, degenerate }
}

pub fn apply(
    series: &RasterSeries,
    plan: &TilePlan,
    stats: &NormStats,
    tile: usize,
    band: usize,
    t: usize,
) -> Result<NormalizedWindow> {
    let s = stats.get(tile, band)?;
    let raw = cut_window(series, plan, tile, band, t)?;
    Ok(scale(&raw, s))
}

pub fn invert(window: &[f64], stats: &NormStats, tile: usize, band: usize) -> Result<Vec<f64>> {
    let s = stats.get(tile, band)?;
    if s.is_degenerate() {
        return Ok(vec![s.min; window.len()]);
    }
    let range = s.max - s.min;
    Ok(window.iter().map(|x| x * range + s.min).collect())
}

pub fn format_stats(stats: &NormStats) -> String {
    let mut out = String::new();
    for tile in 0..stats.tiles {
        for band in 0..stats.bands {
            let s = &stats.entries[tile * stats.bands + band];
            writeln!(out, "{tile},{band},{:?},{:?},{:?},{:?}", s.min, s.max, s.mean, s.variance).unwrap();
        }
    }
    out
}

pub fn parse_stats(text: &str) -> Result<NormStats> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 6 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 6 fields, got {}", parts.len()) });
        }
        let tile: usize = parse_num(parts[0], line_no)?;
        let band: usize = parse_num(parts[1], line_no)?;
        let s = BandStats {
            min: parse_num(parts[2], line_no)?,
            max: parse_num(parts[3], line_no)?,
            mean: parse_num(parts[4], line_no)?,
            variance: parse_num(parts[5], line_no)?,
        };
        rows.push((tile, band, s, line_no));
    }
    let tiles = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
    let bands = rows.iter().map(|r| r.1 + 1).max().unwrap_or(0);
    let mut slots: Vec<Option<BandStats>> = vec![None; tiles * bands];
    for (tile, band, s, line) in rows {
        let slot = &mut slots[tile * bands + band];
        if slot.is_some() {
            return Err(Error::Parse { line, msg: format!("duplicate entry for tile {tile} band {band}") });
        }
        *slot = Some(s);
    }
    let entries = slots
        .into_iter()
        .enumerate()
        .map(|(k, s)| {
            s.ok_or_else(|| Error::Parse {
                line: 0,
                msg: format!("missing entry for tile {} band {}", k / bands, k % bands),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    NormStats::new(tiles, bands, entries)
}

pub fn read_stats(path: impl AsRef<Path>) -> Result<NormStats> {
    parse_stats(&fs::read_to_string(path)?)
}

pub fn write_stats(stats: &NormStats, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_stats(stats))?;
    Ok(())
}
