//! `canopy`: command-line front end for the raster forecasting pipeline.
//!
//! Every command validates its inputs and exits 0 on success. On failure it
//! prints one line `error: <Code>: <message>` to stderr and exits 1.

use std::collections::BTreeMap;
use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use canopy_core::composite::{composite_ppm, landsat_to_index};
use canopy_core::evaluate::{evaluate_year, forecast_tile, write_report};
use canopy_core::model::{cond_bits_for, Model, ModelConfig, ModelParams, MAX_BANDS};
use canopy_core::normalize::{fit_stats, read_stats, write_stats};
use canopy_core::raster_io::{read_mask, read_rts, synth_series, write_mask, write_rts, RasterSeries, SynthSpec};
use canopy_core::stitch::{stitch, Weighting};
use canopy_core::tiling::{plan_tiles, read_plan, write_plan};
use canopy_core::training::{load_checkpoint, make_dataset, save_checkpoint, train_with, OptimizerKind, TrainConfig};
use canopy_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "canopy", version, about = "Tile, train, forecast and score multi-band raster time series")]
struct Cli {
    /// Maximum worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic series and its elliptical study mask.
    Synth(SynthArgs),
    /// Plan covering tiles over a study mask.
    Plan(PlanArgs),
    /// Fit per-tile, per-band normalization statistics.
    Stats(StatsArgs),
    /// Train a forecaster; prints one "epoch <i> loss <mean>" line per epoch.
    Train(TrainArgs),
    /// Write per-tile forecasts for one time step as tile_<id>.rts files.
    Predict(PredictArgs),
    /// Score forecasts for one time step with NRMSE.
    Evaluate(EvaluateArgs),
    /// Reassemble tile_<id>.rts files into one raster.
    Stitch(StitchArgs),
    /// Export a percentile-stretched three-band composite as binary PPM.
    Composite(CompositeArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// key=value file with t_len, bands, height, width, trend, season_amp,
    /// season_period, noise_sd, seed ('#' starts a comment).
    #[arg(long)]
    spec: PathBuf,
    /// Output series (RTS).
    #[arg(long)]
    out: PathBuf,
    /// Output mask (MSK).
    #[arg(long)]
    mask: PathBuf,
}

#[derive(Debug, Args)]
struct PlanArgs {
    /// Study mask (MSK).
    #[arg(long)]
    mask: PathBuf,
    /// Square window side in pixels.
    #[arg(long, default_value_t = 128)]
    window: usize,
    /// Scan step in pixels, 1..=window.
    #[arg(long, default_value_t = 64)]
    stride: usize,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StatsArgs {
    /// Input series (RTS).
    #[arg(long)]
    rts: PathBuf,
    /// Tile plan file.
    #[arg(long)]
    plan: PathBuf,
    /// Half-open time range `start:end` used for fitting (default: all steps).
    #[arg(long, value_parser = parse_range)]
    train_range: Option<Range<usize>>,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct Inputs {
    /// Input series (RTS).
    #[arg(long)]
    rts: PathBuf,
    /// Tile plan file.
    #[arg(long)]
    plan: PathBuf,
    /// Normalization statistics file.
    #[arg(long)]
    stats: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Input sequence length.
    #[arg(long, default_value_t = 5)]
    j: usize,
    /// Passes over the dataset.
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// Seed for weight initialization and shuffling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Half-open time range `start:end` of training frames (default: all but the last step).
    #[arg(long, value_parser = parse_range)]
    train_range: Option<Range<usize>>,
    /// Samples per optimizer step.
    #[arg(long, default_value_t = 16)]
    batch: usize,
    /// Learning rate.
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    /// adam or sgd.
    #[arg(long, default_value = "adam")]
    optimizer: String,
    /// Visit samples in dataset order instead of a seeded shuffle.
    #[arg(long)]
    no_shuffle: bool,
    /// Encoder feature width.
    #[arg(long, default_value_t = 128)]
    d_feat: usize,
    /// LSTM hidden width.
    #[arg(long, default_value_t = 128)]
    d_hidden: usize,
    /// Output checkpoint.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Trained checkpoint.
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    inputs: Inputs,
    /// Time step to forecast; the preceding j steps are the inputs.
    #[arg(long)]
    target_t: usize,
    /// Directory for tile_<id>.rts forecasts (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Trained checkpoint.
    #[arg(long)]
    ckpt: PathBuf,
    #[command(flatten)]
    inputs: Inputs,
    /// Time step to score; the preceding j steps are the inputs.
    #[arg(long)]
    target_t: usize,
    /// Output report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct StitchArgs {
    /// Tile plan file.
    #[arg(long)]
    plan: PathBuf,
    /// Directory holding tile_<id>.rts files.
    #[arg(long)]
    tiles: PathBuf,
    /// Only stitch this 0-indexed band (default: all bands).
    #[arg(long)]
    band: Option<usize>,
    /// Weight overlaps by distance to the tile edge instead of a plain mean.
    #[arg(long)]
    feather: bool,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CompositeArgs {
    /// Input series (RTS).
    #[arg(long)]
    rts: PathBuf,
    /// Time step to render.
    #[arg(long)]
    t: usize,
    /// Red,green,blue as 1-indexed Landsat band numbers (4,3,2 is the B432 composite).
    #[arg(long, default_value = "4,3,2")]
    bands: String,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected start:end, got {s:?}"))?;
    let start = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let end = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    if end <= start {
        return Err(format!("empty range {s:?}"));
    }
    Ok(start..end)
}

fn parse_synth_spec(text: &str) -> Result<SynthSpec> {
    let mut kv = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: i + 1, msg: format!("expected key=value, got {raw:?}") })?;
        kv.insert(k.trim().to_string(), (v.trim().to_string(), i + 1));
    }
    fn take<T: std::str::FromStr>(kv: &mut BTreeMap<String, (String, usize)>, key: &str) -> Result<T> {
        let (v, line) = kv.remove(key).ok_or(Error::Parse { line: 0, msg: format!("missing key {key}") })?;
        v.parse().map_err(|_| Error::Parse { line, msg: format!("bad value {v:?} for {key}") })
    }
    let spec = SynthSpec {
        t_len: take(&mut kv, "t_len")?,
        bands: take(&mut kv, "bands")?,
        height: take(&mut kv, "height")?,
        width: take(&mut kv, "width")?,
        trend: take(&mut kv, "trend")?,
        season_amp: take(&mut kv, "season_amp")?,
        season_period: take(&mut kv, "season_period")?,
        noise_sd: take(&mut kv, "noise_sd")?,
        seed: take(&mut kv, "seed")?,
    };
    if let Some((k, (_, line))) = kv.into_iter().next() {
        return Err(Error::Parse { line, msg: format!("unknown key {k}") });
    }
    Ok(spec)
}

fn tile_path(dir: &Path, id: usize) -> PathBuf {
    dir.join(format!("tile_{id}.rts"))
}

fn load_inputs(inputs: &Inputs) -> Result<(RasterSeries, canopy_core::tiling::TilePlan, canopy_core::normalize::NormStats)> {
    let series = read_rts(&inputs.rts)?;
    let plan = read_plan(&inputs.plan)?;
    let stats = read_stats(&inputs.stats)?;
    if stats.tiles() != plan.len() || stats.bands() != series.bands() {
        return Err(Error::DimensionMismatch(format!(
            "stats cover {} tiles x {} bands, plan/series have {} x {}",
            stats.tiles(),
            stats.bands(),
            plan.len(),
            series.bands()
        )));
    }
    Ok((series, plan, stats))
}

fn check_checkpoint_fits(model: &Model, plan: &canopy_core::tiling::TilePlan) -> Result<()> {
    if model.config.window != plan.window {
        return Err(Error::DimensionMismatch(format!(
            "checkpoint window {} differs from plan window {}",
            model.config.window, plan.window
        )));
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => {
            let spec = parse_synth_spec(&fs::read_to_string(&a.spec)?)?;
            let (series, mask) = synth_series(&spec)?;
            write_rts(&series, &a.out)?;
            write_mask(&mask, &a.mask)?;
        }
        Command::Plan(a) => {
            let mask = read_mask(&a.mask)?;
            let plan = plan_tiles(&mask, a.window, a.stride)?;
            write_plan(&plan, &a.out)?;
            println!("{} tiles", plan.len());
        }
        Command::Stats(a) => {
            let series = read_rts(&a.rts)?;
            let plan = read_plan(&a.plan)?;
            let stats = fit_stats(&series, &plan, a.train_range)?;
            write_stats(&stats, &a.out)?;
        }
        Command::Train(a) => {
            let (series, plan, stats) = load_inputs(&a.inputs)?;
            if series.bands() > MAX_BANDS {
                return Err(Error::InvalidParameter(format!("at most {MAX_BANDS} bands are supported")));
            }
            let range = a.train_range.unwrap_or(0..series.t_len().saturating_sub(1));
            let config = ModelConfig {
                window: plan.window,
                j: a.j,
                d_feat: a.d_feat,
                d_hidden: a.d_hidden,
                cond_bits: cond_bits_for(plan.len()),
            };
            let model = Model::new(config, ModelParams::init(&config, a.seed)?)?;
            let dataset = make_dataset(&series, &plan, &stats, a.j, range)?;
            let tc = TrainConfig {
                epochs: a.epochs,
                batch: a.batch,
                lr: a.lr,
                seed: a.seed,
                optimizer: a.optimizer.parse::<OptimizerKind>()?,
                shuffle: !a.no_shuffle,
            };
            let outcome = train_with(model, &dataset, &tc, |epoch, loss| println!("epoch {epoch} loss {loss:?}"))?;
            save_checkpoint(&outcome.model, &tc, &a.out)?;
        }
        Command::Predict(a) => {
            let ckpt = load_checkpoint(&a.ckpt)?;
            let (series, plan, stats) = load_inputs(&a.inputs)?;
            check_checkpoint_fits(&ckpt.model, &plan)?;
            if a.target_t > series.t_len() {
                return Err(Error::IndexOutOfRange(format!("target step {} beyond series end", a.target_t)));
            }
            fs::create_dir_all(&a.out_dir)?;
            for tile in &plan.tiles {
                let mut samples = Vec::with_capacity(series.bands() * plan.window * plan.window);
                for band in 0..series.bands() {
                    let frame = forecast_tile(&ckpt.model, &series, &plan, &stats, tile.id, band, a.target_t)?;
                    samples.extend(frame.iter().map(|&v| v as f32));
                }
                let out = RasterSeries::new(1, series.bands(), plan.window, plan.window, f32::NAN, samples)?;
                write_rts(&out, tile_path(&a.out_dir, tile.id))?;
            }
            println!("{} tiles written", plan.len());
        }
        Command::Evaluate(a) => {
            let ckpt = load_checkpoint(&a.ckpt)?;
            let (series, plan, stats) = load_inputs(&a.inputs)?;
            check_checkpoint_fits(&ckpt.model, &plan)?;
            let report = evaluate_year(&ckpt.model, &series, &plan, &stats, a.target_t)?;
            write_report(&report, &a.out)?;
            for (b, m) in report.band_means.iter().enumerate() {
                match m {
                    Some(v) => println!("band {b} mean nrmse {v:.6}"),
                    None => println!("band {b} mean nrmse null"),
                }
            }
        }
        Command::Stitch(a) => {
            let plan = read_plan(&a.plan)?;
            let mut frames = Vec::with_capacity(plan.len());
            for tile in &plan.tiles {
                let path = tile_path(&a.tiles, tile.id);
                if !path.exists() {
                    return Err(Error::MissingTile(tile.id));
                }
                let t = read_rts(&path)?;
                if t.height() != plan.window || t.width() != plan.window || t.t_len() != 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "{} is {}x{}x{}, expected 1x{w}x{w}",
                        path.display(),
                        t.t_len(),
                        t.height(),
                        t.width(),
                        w = plan.window
                    )));
                }
                frames.push(t);
            }
            let bands = frames.first().map_or(1, RasterSeries::bands);
            if frames.iter().any(|f| f.bands() != bands) {
                return Err(Error::DimensionMismatch("tiles disagree on band count".into()));
            }
            let selected: Vec<usize> = match a.band {
                Some(b) if b >= bands => return Err(Error::UnknownBand(b)),
                Some(b) => vec![b],
                None => (0..bands).collect(),
            };
            let weighting = if a.feather { Weighting::Feathered } else { Weighting::Uniform };
            let mut samples = Vec::with_capacity(selected.len() * plan.height * plan.width);
            for &band in &selected {
                let tiles: BTreeMap<usize, Vec<f64>> = frames
                    .iter()
                    .enumerate()
                    .map(|(id, f)| {
                        let vals = f.frame(0, band).iter().map(|&v| if f.is_nodata(v) { f64::NAN } else { v as f64 }).collect();
                        (id, vals)
                    })
                    .collect();
                let out = stitch(&plan, &tiles, plan.height, plan.width, f64::NAN, weighting)?;
                samples.extend(out.values.iter().map(|&v| v as f32));
            }
            let out = RasterSeries::new(1, selected.len(), plan.height, plan.width, f32::NAN, samples)?;
            write_rts(&out, &a.out)?;
        }
        Command::Composite(a) => {
            let series = read_rts(&a.rts)?;
            let numbers: Vec<usize> = a
                .bands
                .split(',')
                .map(|s| s.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad band number {s:?}"))))
                .collect::<Result<_>>()?;
            let numbers: [usize; 3] = numbers
                .try_into()
                .map_err(|_| Error::InvalidParameter("--bands needs exactly three band numbers".into()))?;
            let ppm = composite_ppm(&series, a.t, landsat_to_index(numbers)?)?;
            fs::write(&a.out, ppm)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: InvalidParameter: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e.to_string().replace('\n', " "));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_spec_parsing() {
        let text = "# demo\nt_len=4\nbands=2\nheight=8\nwidth=8 # square\ntrend=0.5\nseason_amp=1\nseason_period=4\nnoise_sd=0\nseed=3\n";
        let spec = parse_synth_spec(text).unwrap();
        assert_eq!(spec.t_len, 4);
        assert_eq!(spec.width, 8);
        assert_eq!(spec.seed, 3);
        assert!(parse_synth_spec("t_len=4\n").is_err());
        assert!(parse_synth_spec(&format!("{text}colour=red\n")).is_err());
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_range("0:20").unwrap(), 0..20);
        assert!(parse_range("5:5").is_err());
        assert!(parse_range("5").is_err());
    }
}
