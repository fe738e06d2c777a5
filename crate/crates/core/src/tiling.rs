//! Sliding-window tile planning over a study mask.
//!
//! A plan is built in two passes. The scan pass walks a regular grid of
//! window placements (the last row and column clamped to the raster edge)
//! and keeps every placement that touches the mask. The completion pass
//! then adds windows greedily until every mask pixel is covered: it seeds a
//! window on the first uncovered pixel in row-major order and hill-climbs it
//! one pixel at a time towards more newly covered pixels.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::raster_io::StudyMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TileOrigin {
    Scan,
    Completion,
}

impl fmt::Display for TileOrigin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TileOrigin::Scan => "Scan",
            TileOrigin::Completion => "Completion",
        })
    }
}

impl FromStr for TileOrigin {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "Scan" => Ok(TileOrigin::Scan),
            "Completion" => Ok(TileOrigin::Completion),
            other => Err(format!("unknown tile origin {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TileRect {
    pub id: usize,
    pub row: usize,
    pub col: usize,
    pub origin: TileOrigin,
}

impl TileRect {
    pub fn contains(&self, row: usize, col: usize, window: usize) -> bool {
        row >= self.row && row < self.row + window && col >= self.col && col < self.col + window
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilePlan {
    pub window: usize,
    pub stride: usize,
    pub height: usize,
    pub width: usize,
    pub tiles: Vec<TileRect>,
}

impl TilePlan {
    pub fn len(&self) -> usize {
        self.tiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tiles.is_empty()
    }

    pub fn tile(&self, id: usize) -> Result<&TileRect> {
        self.tiles.get(id).ok_or(Error::UnknownTile(id))
    }

    /// Checks the structural invariants that do not depend on a mask.
    pub fn validate(&self) -> Result<()> {
        check_window(self.window, self.height, self.width)?;
        check_stride(self.window, self.stride)?;
        for (i, t) in self.tiles.iter().enumerate() {
            if t.id != i {
                return Err(Error::InvalidParameter(format!("tile ids must be consecutive: position {i} has id {}", t.id)));
            }
            if t.row + self.window > self.height || t.col + self.window > self.width {
                return Err(Error::InvalidParameter(format!(
                    "tile {} at ({}, {}) exceeds {}x{} raster",
                    t.id, t.row, t.col, self.height, self.width
                )));
            }
        }
        Ok(())
    }
}

fn check_window(window: usize, height: usize, width: usize) -> Result<()> {
    if window == 0 || window > height.min(width) {
        return Err(Error::WindowTooLarge { window, height, width });
    }
    Ok(())
}

fn check_stride(window: usize, stride: usize) -> Result<()> {
    if stride == 0 || stride > window {
        return Err(Error::InvalidParameter(format!("stride {stride} must lie in 1..={window}")));
    }
    Ok(())
}

/// Summed-area table with a zero border: `at(r, c)` counts cells in `[0,r) × [0,c)`.
struct Integral {
    width: usize,
    sums: Vec<u32>,
}

impl Integral {
    fn new(height: usize, width: usize, cell: impl Fn(usize, usize) -> bool) -> Self {
        let w1 = width + 1;
        let mut sums = vec![0u32; (height + 1) * w1];
        for r in 0..height {
            let mut row_sum = 0;
            for c in 0..width {
                row_sum += cell(r, c) as u32;
                sums[(r + 1) * w1 + c + 1] = sums[r * w1 + c + 1] + row_sum;
            }
        }
        Self { width, sums }
    }

    fn window_count(&self, row: usize, col: usize, window: usize) -> u32 {
        let w1 = self.width + 1;
        let (r1, c1) = (row + window, col + window);
        self.sums[r1 * w1 + c1] + self.sums[row * w1 + col] - self.sums[row * w1 + c1] - self.sums[r1 * w1 + col]
    }
}

/// `{0, stride, 2·stride, …}` up to `len − window`, plus `len − window` itself.
fn candidate_offsets(len: usize, window: usize, stride: usize) -> Vec<usize> {
    let last = len - window;
    let mut offsets: Vec<usize> = (0..=last).step_by(stride).collect();
    if offsets.last() != Some(&last) {
        offsets.push(last);
    }
    offsets
}

/// Regular-grid pass. Returned tiles carry ids in row-major candidate order.
pub fn scan_tiles(mask: &StudyMask, window: usize, stride: usize) -> Result<Vec<TileRect>> {
    let (height, width) = (mask.height(), mask.width());
    check_window(window, height, width)?;
    check_stride(window, stride)?;
    let integral = Integral::new(height, width, |r, c| mask.get(r, c));
    let cols = candidate_offsets(width, window, stride);
    let mut tiles = Vec::new();
    for row in candidate_offsets(height, window, stride) {
        for &col in &cols {
            if integral.window_count(row, col, window) > 0 {
                tiles.push(TileRect { id: tiles.len(), row, col, origin: TileOrigin::Scan });
            }
        }
    }
    Ok(tiles)
}

/// Greedy completion pass. Returned ids continue after `existing`.
pub fn complete_coverage(mask: &StudyMask, window: usize, existing: &[TileRect]) -> Result<Vec<TileRect>> {
    let (height, width) = (mask.height(), mask.width());
    check_window(window, height, width)?;
    for t in existing {
        if t.row + window > height || t.col + window > width {
            return Err(Error::InvalidParameter(format!("existing tile {} out of bounds", t.id)));
        }
    }

    let mut covered = vec![false; height * width];
    for t in existing {
        mark(&mut covered, width, t.row, t.col, window);
    }
    let pending = |covered: &[bool], i: usize| mask.cells()[i] && !covered[i];

    let mut added = Vec::new();
    let mut cursor = 0;
    let max_row = (height - window) as isize;
    let max_col = (width - window) as isize;
    let half = (window / 2) as isize;
    loop {
        while cursor < covered.len() && !pending(&covered, cursor) {
            cursor += 1;
        }
        if cursor == covered.len() {
            break;
        }
        let (seed_r, seed_c) = ((cursor / width) as isize, (cursor % width) as isize);
        let gain = Integral::new(height, width, |r, c| pending(&covered, r * width + c));
        let score = |r: isize, c: isize| gain.window_count(r as usize, c as usize, window);

        let mut r = (seed_r - half).clamp(0, max_row);
        let mut c = (seed_c - half).clamp(0, max_col);
        let mut best = score(r, c);
        loop {
            let mut step = None;
            for (dr, dc) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                let (nr, nc) = (r + dr, c + dc);
                if nr < 0 || nc < 0 || nr > max_row || nc > max_col {
                    continue;
                }
                let s = score(nr, nc);
                if s > best && step.is_none_or(|(_, _, sb)| s > sb) {
                    step = Some((nr, nc, s));
                }
            }
            match step {
                Some((nr, nc, s)) => {
                    r = nr;
                    c = nc;
                    best = s;
                }
                None => break,
            }
        }
        debug_assert!(best > 0);
        let (row, col) = (r as usize, c as usize);
        mark(&mut covered, width, row, col, window);
        added.push(TileRect { id: existing.len() + added.len(), row, col, origin: TileOrigin::Completion });
    }
    Ok(added)
}

fn mark(covered: &mut [bool], width: usize, row: usize, col: usize, window: usize) {
    for r in row..row + window {
        covered[r * width + col..r * width + col + window].fill(true);
    }
}

pub fn plan_tiles(mask: &StudyMask, window: usize, stride: usize) -> Result<TilePlan> {
    let mut tiles = scan_tiles(mask, window, stride)?;
    let extra = complete_coverage(mask, window, &tiles)?;
    tiles.extend(extra);
    Ok(TilePlan { window, stride, height: mask.height(), width: mask.width(), tiles })
}

/// Fraction of mask pixels inside at least one tile; 1.0 for an empty mask.
pub fn coverage_fraction(plan: &TilePlan, mask: &StudyMask) -> Result<f64> {
    if plan.height != mask.height() || plan.width != mask.width() {
        return Err(Error::DimensionMismatch(format!(
            "plan is {}x{}, mask is {}x{}",
            plan.height,
            plan.width,
            mask.height(),
            mask.width()
        )));
    }
    let total = mask.count_inside();
    if total == 0 {
        return Ok(1.0);
    }
    let mut covered = vec![false; plan.height * plan.width];
    for t in &plan.tiles {
        mark(&mut covered, plan.width, t.row, t.col, plan.window);
    }
    let hit = mask.cells().iter().zip(&covered).filter(|(&m, &c)| m && c).count();
    Ok(hit as f64 / total as f64)
}

pub fn format_plan(plan: &TilePlan) -> String {
    let mut out = format!(
        "window={} stride={} height={} width={}\n",
        plan.window, plan.stride, plan.height, plan.width
    );
    for t in &plan.tiles {
        out.push_str(&format!("{},{},{},{}\n", t.id, t.row, t.col, t.origin));
    }
    out
}

pub fn parse_plan(text: &str) -> Result<TilePlan> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "empty plan file".into() })?;
    let mut fields = [None; 4];
    for part in header.split_whitespace() {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("bad header field {part:?}") })?;
        let slot = match key {
            "window" => 0,
            "stride" => 1,
            "height" => 2,
            "width" => 3,
            _ => return Err(Error::Parse { line: 1, msg: format!("unknown header key {key:?}") }),
        };
        fields[slot] = Some(parse_num::<usize>(value, 1)?);
    }
    let [Some(window), Some(stride), Some(height), Some(width)] = fields else {
        return Err(Error::Parse { line: 1, msg: "header needs window, stride, height, width".into() });
    };

    let mut tiles = Vec::new();
    for (i, line) in lines {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            return Err(Error::Parse { line: line_no, msg: format!("expected 4 fields, got {}", parts.len()) });
        }
        let origin = parts[3].parse().map_err(|msg| Error::Parse { line: line_no, msg })?;
        tiles.push(TileRect {
            id: parse_num(parts[0], line_no)?,
            row: parse_num(parts[1], line_no)?,
            col: parse_num(parts[2], line_no)?,
            origin,
        });
    }
    let plan = TilePlan { window, stride, height, width, tiles };
    plan.validate()?;
    Ok(plan)
}

pub(crate) fn parse_num<T: FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse { line, msg: format!("cannot parse {s:?}") })
}

pub fn read_plan(path: impl AsRef<Path>) -> Result<TilePlan> {
    parse_plan(&fs::read_to_string(path)?)
}

pub fn write_plan(plan: &TilePlan, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_plan(plan))?;
    Ok(())
}
