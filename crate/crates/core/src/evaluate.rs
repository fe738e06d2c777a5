//! NRMSE scoring of one forecast year, per tile and band, with rank quartiles.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{condition_code, Model};
use crate::normalize::{apply, cut_window, invert, NormStats};
use crate::raster_io::RasterSeries;
use crate::tiling::TilePlan;

/// `sqrt(Σ(yᵢ − ŷᵢ)² / (n·σ²))` with σ² the population variance of `truth`.
pub fn nrmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!("truth has {} values, prediction {}", truth.len(), pred.len())));
    }
    let pairs: Vec<(f64, f64)> = truth.iter().copied().zip(pred.iter().copied()).collect();
    nrmse_pairs(&pairs)
}

/// As [`nrmse`], skipping pixels whose truth is `None`.
pub fn nrmse_masked(truth: &[Option<f64>], pred: &[f64]) -> Result<f64> {
    if truth.len() != pred.len() {
        return Err(Error::ShapeMismatch(format!("truth has {} values, prediction {}", truth.len(), pred.len())));
    }
    let pairs: Vec<(f64, f64)> = truth.iter().zip(pred).filter_map(|(t, &p)| t.map(|t| (t, p))).collect();
    nrmse_pairs(&pairs)
}

fn nrmse_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    let Some(&(first, _)) = pairs.first() else {
        return Err(Error::ZeroVariance);
    };
    if pairs.iter().all(|&(t, _)| t == first) {
        return Err(Error::ZeroVariance);
    }
    let n = pairs.len() as f64;
    let mean = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let var = pairs.iter().map(|p| (p.0 - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let sse: f64 = pairs.iter().map(|(t, p)| (t - p).powi(2)).sum();
    Ok((sse / (n * var)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Quartile {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl fmt::Display for Quartile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Q{}", *self as u8 + 1)
    }
}

/// Rank quartiles of `(tile_id, score)` pairs, returned in input order.
///
/// Scores are sorted ascending with ties broken by tile id, then cut into four
/// contiguous groups; with `n = 4q + r` the first `r` groups hold `q + 1`.
pub fn quartile_bins(scores: &[(usize, f64)]) -> Result<Vec<Quartile>> {
    let n = scores.len();
    if n < 4 {
        return Err(Error::TooFewScores(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1).then(scores[a].0.cmp(&scores[b].0)));
    let (q, r) = (n / 4, n % 4);
    let mut labels = vec![Quartile::Q1; n];
    let mut rank = 0;
    for (g, label) in [Quartile::Q1, Quartile::Q2, Quartile::Q3, Quartile::Q4].into_iter().enumerate() {
        let size = q + usize::from(g < r);
        for &i in &order[rank..rank + size] {
            labels[i] = label;
        }
        rank += size;
    }
    Ok(labels)
}

/// Which frames a forecast is being asked for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForecastContext {
    pub tile_id: usize,
    pub band: usize,
    pub target_t: usize,
}

/// Anything that maps `j` normalized frames to the next normalized frame.
pub trait Forecaster: Sync {
    fn history_len(&self) -> usize;

    fn forecast(&self, inputs: &[&[f64]], cond: &[f64], ctx: ForecastContext) -> Result<Vec<f64>>;
}

impl Forecaster for Model {
    fn history_len(&self) -> usize {
        self.config.j
    }

    fn forecast(&self, inputs: &[&[f64]], cond: &[f64], _ctx: ForecastContext) -> Result<Vec<f64>> {
        self.predict(inputs, cond)
    }
}

/// Forecast := the last observed frame.
#[derive(Debug, Clone, Copy)]
pub struct Persistence {
    pub j: usize,
}

impl Forecaster for Persistence {
    fn history_len(&self) -> usize {
        self.j
    }

    fn forecast(&self, inputs: &[&[f64]], _cond: &[f64], _ctx: ForecastContext) -> Result<Vec<f64>> {
        inputs.last().map(|f| f.to_vec()).ok_or(Error::BadSequenceLength { expected: self.j, got: 0 })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TileScore {
    pub tile_id: usize,
    pub band: usize,
    pub nrmse: Option<f64>,
    pub quartile: Option<Quartile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub target_t: usize,
    pub tiles: usize,
    pub bands: usize,
    /// Tile-major, one entry per `(tile, band)`.
    pub scores: Vec<TileScore>,
    /// Mean non-null score per band; `None` when a band has no scores.
    pub band_means: Vec<Option<f64>>,
}

impl EvalReport {
    /// Mean over every non-null score.
    pub fn overall_mean(&self) -> Option<f64> {
        let vals: Vec<f64> = self.scores.iter().filter_map(|s| s.nrmse).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    pub fn null_count(&self) -> usize {
        self.scores.iter().filter(|s| s.nrmse.is_none()).count()
    }
}

/// Forecast of one tile window at `target_t` in original units, from the
/// `history_len()` frames before it.
pub fn forecast_tile(
    forecaster: &dyn Forecaster,
    series: &RasterSeries,
    plan: &TilePlan,
    stats: &NormStats,
    tile_id: usize,
    band: usize,
    target_t: usize,
) -> Result<Vec<f64>> {
    let j = forecaster.history_len();
    if target_t < j {
        return Err(Error::RangeTooShort(format!("target step {target_t} needs {j} prior steps")));
    }
    let inputs = (target_t - j..target_t)
        .map(|t| apply(series, plan, stats, tile_id, band, t).map(|w| w.values))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let cond = condition_code(tile_id, band, plan.len())?;
    let ctx = ForecastContext { tile_id, band, target_t };
    invert(&forecaster.forecast(&refs, &cond, ctx)?, stats, tile_id, band)
}

/// Forecasts `target_t` for every tile and band from the `j` preceding
/// frames and scores the de-normalized forecast against the raw series.
pub fn evaluate_year(
    forecaster: &dyn Forecaster,
    series: &RasterSeries,
    plan: &TilePlan,
    stats: &NormStats,
    target_t: usize,
) -> Result<EvalReport> {
    let j = forecaster.history_len();
    if target_t < j || target_t >= series.t_len() {
        return Err(Error::RangeTooShort(format!(
            "target step {target_t} needs {j} prior steps inside a {}-step series",
            series.t_len()
        )));
    }
    if stats.tiles() != plan.len() || stats.bands() != series.bands() {
        return Err(Error::DimensionMismatch(format!(
            "stats cover {} tiles x {} bands, plan/series have {} x {}",
            stats.tiles(),
            stats.bands(),
            plan.len(),
            series.bands()
        )));
    }
    let bands = series.bands();
    let raw_scores = (0..plan.len() * bands)
        .into_par_iter()
        .map(|k| {
            let (tile_id, band) = (k / bands, k % bands);
            let pred = forecast_tile(forecaster, series, plan, stats, tile_id, band, target_t)?;
            let truth = cut_window(series, plan, tile_id, band, target_t)?;
            match nrmse_masked(&truth, &pred) {
                Ok(v) => Ok(Some(v)),
                Err(Error::ZeroVariance) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut scores: Vec<TileScore> = raw_scores
        .iter()
        .enumerate()
        .map(|(k, &nrmse)| TileScore { tile_id: k / bands, band: k % bands, nrmse, quartile: None })
        .collect();
    let mut band_means = Vec::with_capacity(bands);
    for band in 0..bands {
        let present: Vec<(usize, (usize, f64))> = scores
            .iter()
            .enumerate()
            .filter(|(_, s)| s.band == band)
            .filter_map(|(k, s)| s.nrmse.map(|v| (k, (s.tile_id, v))))
            .collect();
        if present.is_empty() {
            band_means.push(None);
            continue;
        }
        band_means.push(Some(present.iter().map(|p| p.1 .1).sum::<f64>() / present.len() as f64));
        let pairs: Vec<(usize, f64)> = present.iter().map(|p| p.1).collect();
        let labels = quartile_bins(&pairs)?;
        for ((k, _), label) in present.iter().zip(labels) {
            scores[*k].quartile = Some(label);
        }
    }
    Ok(EvalReport { target_t, tiles: plan.len(), bands, scores, band_means })
}

pub fn format_report(report: &EvalReport) -> String {
    let mut out = format!("target_t={} tiles={} bands={}\n", report.target_t, report.tiles, report.bands);
    for s in &report.scores {
        let score = s.nrmse.map_or("null".to_string(), |v| format!("{v:?}"));
        let q = s.quartile.map_or("null".to_string(), |q| q.to_string());
        writeln!(out, "{},{},{score},{q}", s.tile_id, s.band).unwrap();
    }
    for (b, m) in report.band_means.iter().enumerate() {
        let m = m.map_or("null".to_string(), |v| format!("{v:?}"));
        writeln!(out, "band,{b},mean,{m}").unwrap();
    }
    out
}

pub fn write_report(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_report(report))?;
    Ok(())
}
