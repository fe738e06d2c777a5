//! Raster series and study-mask containers, their binary file formats, and a
//! deterministic synthetic-series generator.
//!
//! RTS v1 layout (little-endian):
//!
//! | offset | type | field  |
//! |-------:|------|--------|
//! | 0      | [u8; 4] | magic `RTS1` |
//! | 4      | u32  | t_len  |
//! | 8      | u32  | bands  |
//! | 12     | u32  | height |
//! | 16     | u32  | width  |
//! | 20     | f32  | nodata |
//! | 24     | f32 × t·b·h·w | samples, t-major then band, row, column |
//!
//! MSK v1: magic `MSK1`, u32 height, u32 width, then `height·width` bytes
//! each 0 or 1, row-major.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::SplitMix64;

pub const RTS_MAGIC: &[u8; 4] = b"RTS1";
pub const MSK_MAGIC: &[u8; 4] = b"MSK1";
pub const RTS_HEADER_LEN: usize = 24;
pub const MSK_HEADER_LEN: usize = 12;

/// A `t_len × bands × height × width` stack of f32 samples.
#[derive(Debug, Clone)]
pub struct RasterSeries {
    t_len: usize,
    bands: usize,
    height: usize,
    width: usize,
    nodata: f32,
    samples: Vec<f32>,
}

impl RasterSeries {
    pub fn new(
        t_len: usize,
        bands: usize,
        height: usize,
        width: usize,
        nodata: f32,
        samples: Vec<f32>,
    ) -> Result<Self> {
        if t_len == 0 || bands == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidDimensions(format!(
                "series dims must be positive, got {t_len}x{bands}x{height}x{width}"
            )));
        }
        if nodata.is_infinite() {
            return Err(Error::NonFiniteHeader(format!("nodata = {nodata}")));
        }
        let expected = t_len * bands * height * width;
        if samples.len() != expected {
            return Err(Error::DimensionMismatch(format!(
                "expected {expected} samples, got {}",
                samples.len()
            )));
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() && !is_sentinel(**v, nodata))
        {
            return Err(Error::InvalidSample { index, value });
        }
        Ok(Self { t_len, bands, height, width, nodata, samples })
    }

    /// A series filled with one value.
    pub fn filled(t_len: usize, bands: usize, height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(t_len, bands, height, width, f32::NAN, vec![value; t_len * bands * height * width])
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn nodata(&self) -> f32 {
        self.nodata
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn index(&self, t: usize, band: usize, row: usize, col: usize) -> usize {
        ((t * self.bands + band) * self.height + row) * self.width + col
    }

    pub fn get(&self, t: usize, band: usize, row: usize, col: usize) -> f32 {
        self.samples[self.index(t, band, row, col)]
    }

    /// The `height × width` plane for one time step and band.
    pub fn frame(&self, t: usize, band: usize) -> &[f32] {
        let start = self.index(t, band, 0, 0);
        &self.samples[start..start + self.height * self.width]
    }

    pub fn is_nodata(&self, value: f32) -> bool {
        is_sentinel(value, self.nodata)
    }
}

impl PartialEq for RasterSeries {
    /// Bitwise sample equality, so NaN sentinels compare equal to themselves.
    fn eq(&self, other: &Self) -> bool {
        self.t_len == other.t_len
            && self.bands == other.bands
            && self.height == other.height
            && self.width == other.width
            && self.nodata.to_bits() == other.nodata.to_bits()
            && self.samples.len() == other.samples.len()
            && self.samples.iter().zip(&other.samples).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn is_sentinel(value: f32, nodata: f32) -> bool {
    if nodata.is_nan() {
        value.is_nan()
    } else {
        value == nodata
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudyMask {
    height: usize,
    width: usize,
    inside: Vec<bool>,
}

impl StudyMask {
    pub fn new(height: usize, width: usize, inside: Vec<bool>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidDimensions(format!("mask dims {height}x{width}")));
        }
        if inside.len() != height * width {
            return Err(Error::DimensionMismatch(format!(
                "mask {height}x{width} needs {} cells, got {}",
                height * width,
                inside.len()
            )));
        }
        Ok(Self { height, width, inside })
    }

    pub fn filled(height: usize, width: usize, value: bool) -> Result<Self> {
        Self::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn cells(&self) -> &[bool] {
        &self.inside
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.inside[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.inside[row * self.width + col] = value;
    }

    pub fn count_inside(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
}

pub fn encode_rts(series: &RasterSeries) -> Vec<u8> {
    let mut out = Vec::with_capacity(RTS_HEADER_LEN + 4 * series.samples.len());
    out.extend_from_slice(RTS_MAGIC);
    for dim in [series.t_len, series.bands, series.height, series.width] {
        out.extend_from_slice(&(dim as u32).to_le_bytes());
    }
    out.extend_from_slice(&series.nodata.to_le_bytes());
    for s in &series.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn decode_rts(bytes: &[u8]) -> Result<RasterSeries> {
    check_magic(bytes, RTS_MAGIC, "RTS1")?;
    if bytes.len() < RTS_HEADER_LEN {
        return Err(Error::TruncatedPayload {
            needed: RTS_HEADER_LEN as u64,
            available: bytes.len() as u64,
        });
    }
    let t_len = read_u32(bytes, 4) as usize;
    let bands = read_u32(bytes, 8) as usize;
    let height = read_u32(bytes, 12) as usize;
    let width = read_u32(bytes, 16) as usize;
    let nodata = f32::from_le_bytes(bytes[20..24].try_into().unwrap());
    if nodata.is_infinite() {
        return Err(Error::NonFiniteHeader(format!("nodata = {nodata}")));
    }
    let count = (t_len as u64) * (bands as u64) * (height as u64) * (width as u64);
    let needed = RTS_HEADER_LEN as u64 + 4 * count;
    let available = bytes.len() as u64;
    if available < needed {
        return Err(Error::TruncatedPayload { needed, available });
    }
    if available > needed {
        return Err(Error::TrailingBytes(available - needed));
    }
    let samples = bytes[RTS_HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RasterSeries::new(t_len, bands, height, width, nodata, samples)
}

pub fn read_rts(path: impl AsRef<Path>) -> Result<RasterSeries> {
    decode_rts(&fs::read(path)?)
}

pub fn write_rts(series: &RasterSeries, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_rts(series))?;
    Ok(())
}

pub fn encode_mask(mask: &StudyMask) -> Vec<u8> {
    let mut out = Vec::with_capacity(MSK_HEADER_LEN + mask.inside.len());
    out.extend_from_slice(MSK_MAGIC);
    out.extend_from_slice(&(mask.height as u32).to_le_bytes());
    out.extend_from_slice(&(mask.width as u32).to_le_bytes());
    out.extend(mask.inside.iter().map(|&b| b as u8));
    out
}

pub fn decode_mask(bytes: &[u8]) -> Result<StudyMask> {
    check_magic(bytes, MSK_MAGIC, "MSK1")?;
    if bytes.len() < MSK_HEADER_LEN {
        return Err(Error::TruncatedPayload {
            needed: MSK_HEADER_LEN as u64,
            available: bytes.len() as u64,
        });
    }
    let height = read_u32(bytes, 4) as usize;
    let width = read_u32(bytes, 8) as usize;
    let needed = MSK_HEADER_LEN as u64 + height as u64 * width as u64;
    let available = bytes.len() as u64;
    if available < needed {
        return Err(Error::TruncatedPayload { needed, available });
    }
    if available > needed {
        return Err(Error::TrailingBytes(available - needed));
    }
    let inside = bytes[MSK_HEADER_LEN..]
        .iter()
        .enumerate()
        .map(|(offset, &value)| match value {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(Error::BadByte { offset: MSK_HEADER_LEN + offset, value }),
        })
        .collect::<Result<Vec<_>>>()?;
    StudyMask::new(height, width, inside)
}

pub fn read_mask(path: impl AsRef<Path>) -> Result<StudyMask> {
    decode_mask(&fs::read(path)?)
}

pub fn write_mask(mask: &StudyMask, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_mask(mask))?;
    Ok(())
}

fn check_magic(bytes: &[u8], magic: &[u8; 4], name: &'static str) -> Result<()> {
    if bytes.len() < 4 || &bytes[..4] != magic {
        return Err(Error::BadMagic {
            expected: name,
            found: bytes[..bytes.len().min(4)].to_vec(),
        });
    }
    Ok(())
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

/// Parameters of a synthetic series.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub t_len: usize,
    pub bands: usize,
    pub height: usize,
    pub width: usize,
    pub trend: f64,
    pub season_amp: f64,
    pub season_period: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.t_len < 2 {
            return Err(Error::InvalidParameter(format!("t_len must be >= 2, got {}", self.t_len)));
        }
        if self.bands == 0 || self.height == 0 || self.width == 0 {
            return Err(Error::InvalidDimensions(format!(
                "bands/height/width must be positive, got {}/{}/{}",
                self.bands, self.height, self.width
            )));
        }
        if self.noise_sd.is_nan() || self.noise_sd < 0.0 {
            return Err(Error::InvalidParameter(format!("noise_sd must be >= 0, got {}", self.noise_sd)));
        }
        if self.season_period.is_nan() || self.season_period <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "season_period must be > 0, got {}",
                self.season_period
            )));
        }
        if !self.trend.is_finite() || !self.season_amp.is_finite() || !self.season_period.is_finite() {
            return Err(Error::InvalidParameter("synth parameters must be finite".into()));
        }
        Ok(())
    }
}

/// Number of sinusoidal components summed into each band's base field.
const BASE_COMPONENTS: usize = 3;

/// Generates `base(b,r,c) + trend·t + season_amp·sin(2πt/period + phase(r,c)) + noise`.
///
/// Draw order from `SplitMix64::new(seed)`:
/// 1. per band: offset `U[0,10)`, then per component amplitude `U[0.5,1.5)`,
///    row and column frequency `U[0.5,3)` cycles per raster side, phase
///    `U[0,2π)`;
/// 2. phase ramp: row and column slopes `U[0,1)` cycles per side, offset
///    `U[0,2π)`;
/// 3. one Gaussian per sample in storage order, only when `noise_sd > 0`.
///
/// The mask is the ellipse with semi-axes `height/2`, `width/2` centred on
/// the pixel grid.
pub fn synth_series(spec: &SynthSpec) -> Result<(RasterSeries, StudyMask)> {
    spec.validate()?;
    let SynthSpec { t_len, bands, height, width, .. } = *spec;
    let mut rng = SplitMix64::new(spec.seed);

    struct Component {
        amp: f64,
        fr: f64,
        fc: f64,
        phase: f64,
    }
    let mut offsets = Vec::with_capacity(bands);
    let mut components = Vec::with_capacity(bands);
    for _ in 0..bands {
        offsets.push(rng.uniform_range(0.0, 10.0));
        let comps: Vec<Component> = (0..BASE_COMPONENTS)
            .map(|_| Component {
                amp: rng.uniform_range(0.5, 1.5),
                fr: rng.uniform_range(0.5, 3.0),
                fc: rng.uniform_range(0.5, 3.0),
                phase: rng.uniform_range(0.0, TAU),
            })
            .collect();
        components.push(comps);
    }
    let ramp_r = rng.uniform();
    let ramp_c = rng.uniform();
    let ramp_offset = rng.uniform_range(0.0, TAU);

    let plane = height * width;
    let mut base = vec![0.0f64; bands * plane];
    for b in 0..bands {
        for r in 0..height {
            for c in 0..width {
                let (y, x) = (r as f64 / height as f64, c as f64 / width as f64);
                let wave: f64 = components[b]
                    .iter()
                    .map(|k| k.amp * (TAU * (k.fr * y + k.fc * x) + k.phase).sin())
                    .sum();
                base[b * plane + r * width + c] = offsets[b] + wave;
            }
        }
    }
    let phase: Vec<f64> = (0..plane)
        .map(|i| {
            let (r, c) = (i / width, i % width);
            TAU * (ramp_r * r as f64 / height as f64 + ramp_c * c as f64 / width as f64) + ramp_offset
        })
        .collect();

    let mut samples = Vec::with_capacity(t_len * bands * plane);
    for t in 0..t_len {
        let tf = t as f64;
        for b in 0..bands {
            for i in 0..plane {
                let mut v = base[b * plane + i]
                    + spec.trend * tf
                    + spec.season_amp * (TAU * tf / spec.season_period + phase[i]).sin();
                if spec.noise_sd > 0.0 {
                    v += spec.noise_sd * rng.gaussian();
                }
                samples.push(v as f32);
            }
        }
    }
    let series = RasterSeries::new(t_len, bands, height, width, f32::NAN, samples)?;
    Ok((series, ellipse_mask(height, width)))
}

/// Axis-aligned ellipse inscribed in a `height × width` grid.
pub fn ellipse_mask(height: usize, width: usize) -> StudyMask {
    let (cr, cc) = ((height as f64 - 1.0) / 2.0, (width as f64 - 1.0) / 2.0);
    let (ar, ac) = (height as f64 / 2.0, width as f64 / 2.0);
    let inside = (0..height * width)
        .map(|i| {
            let dr = (i / width) as f64 - cr;
            let dc = (i % width) as f64 - cc;
            (dr / ar).powi(2) + (dc / ac).powi(2) <= 1.0
        })
        .collect();
    StudyMask { height, width, inside }
}
