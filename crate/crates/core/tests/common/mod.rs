//! Oracles and harnesses shared by the integration and acceptance tests.
#![allow(dead_code)]

use canopy_core::autograd::{Graph, Tensor, Var};
use canopy_core::raster_io::StudyMask;
use canopy_core::rng::SplitMix64;
use canopy_core::tiling::TilePlan;
use canopy_core::Result;

pub const FD_EPS: f64 = 1e-5;

pub fn random_tensor(rng: &mut SplitMix64, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.uniform_range(-scale, scale)).collect()).unwrap()
}

/// Mask of independent pixels, with at least one inside.
pub fn random_mask(height: usize, width: usize, density: f64, rng: &mut SplitMix64) -> StudyMask {
    let mut cells: Vec<bool> = (0..height * width).map(|_| rng.uniform() < density).collect();
    if !cells.iter().any(|&c| c) {
        let i = rng.below(cells.len());
        cells[i] = true;
    }
    StudyMask::new(height, width, cells).unwrap()
}

/// Fraction of mask pixels inside at least one tile, by direct lookup.
pub fn brute_coverage(plan: &TilePlan, mask: &StudyMask) -> f64 {
    let w = plan.window;
    let (mut inside, mut hit) = (0usize, 0usize);
    for r in 0..mask.height() {
        for c in 0..mask.width() {
            if mask.get(r, c) {
                inside += 1;
                if plan.tiles.iter().any(|t| r >= t.row && r < t.row + w && c >= t.col && c < t.col + w) {
                    hit += 1;
                }
            }
        }
    }
    hit as f64 / inside as f64
}

/// Single-pass NRMSE: Welford mean/variance plus a running squared error.
pub fn nrmse_oracle(truth: &[f64], pred: &[f64]) -> Option<f64> {
    let (mut n, mut mean, mut m2, mut sse) = (0.0, 0.0, 0.0, 0.0);
    for (&t, &p) in truth.iter().zip(pred) {
        n += 1.0;
        let d = t - mean;
        mean += d / n;
        m2 += d * (t - mean);
        sse += (t - p) * (t - p);
    }
    let var = m2 / n;
    (var > 0.0).then(|| (sse / (n * var)).sqrt())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let scale = norm(a).max(norm(b));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

pub type Builder<'a> = dyn Fn(&mut Graph, &[Var]) -> Result<Var> + 'a;

/// Builds `Σ rᵢ·outᵢ` for a fixed random `r`, so every output entry matters.
fn projected(g: &mut Graph, build: &Builder, inputs: &[Tensor], probe: &[f64], requires_grad: bool) -> (Var, Vec<Var>) {
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), requires_grad)).collect();
    let out = build(g, &vars).unwrap();
    let n = g.value(out).len();
    assert_eq!(n, probe.len(), "probe length");
    let flat = g.reshape(out, &[n]).unwrap();
    let r = g.leaf(Tensor::new(vec![1, n], probe.to_vec()).unwrap(), false);
    let zero = g.leaf(Tensor::zeros(&[1]), false);
    (g.dense(flat, r, zero).unwrap(), vars)
}

fn output_len(build: &Builder, inputs: &[Tensor]) -> usize {
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.clone(), false)).collect();
    let out = build(&mut g, &vars).unwrap();
    g.value(out).len()
}

/// Per-input relative errors plus how many probes were set aside.
#[derive(Debug, Clone)]
pub struct GradReport {
    pub errors: Vec<f64>,
    pub probes: usize,
    pub kinks: usize,
}

/// Whether one-sided differences disagree, i.e. the probe straddles a kink
/// of a piecewise-linear op. `scale` is the typical gradient magnitude.
pub fn straddles_kink(down: f64, base: f64, up: f64, scale: f64) -> bool {
    let (fwd, bwd) = ((up - base) / FD_EPS, (base - down) / FD_EPS);
    (fwd - bwd).abs() > 1e-3 * (fwd.abs().max(bwd.abs()) + scale)
}

/// Compares reverse-mode gradients of every input against central
/// differences. At most `max_entries` entries per input are probed, chosen
/// at random; probes that straddle a kink are skipped and counted.
pub fn grad_check(build: &Builder, inputs: &[Tensor], seed: u64, max_entries: usize) -> GradReport {
    let mut rng = SplitMix64::new(seed ^ 0xA5A5_5A5A);
    let n_out = output_len(build, inputs);
    let probe: Vec<f64> = (0..n_out).map(|_| rng.uniform_range(-1.0, 1.0)).collect();

    let mut g = Graph::new();
    let (loss, vars) = projected(&mut g, build, inputs, &probe, true);
    let base = g.value(loss).data()[0];
    g.backward(loss).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();
    let count: usize = analytic.iter().map(Vec::len).sum();
    let scale = (analytic.iter().flatten().map(|x| x * x).sum::<f64>() / count as f64).sqrt();

    let eval = |perturbed: &[Tensor]| {
        let mut g = Graph::new();
        let (loss, _) = projected(&mut g, build, perturbed, &probe, false);
        g.value(loss).data()[0]
    };
    let mut report = GradReport { errors: Vec::with_capacity(inputs.len()), probes: 0, kinks: 0 };
    for (i, t) in inputs.iter().enumerate() {
        let mut idx: Vec<usize> = (0..t.len()).collect();
        if idx.len() > max_entries {
            rng.shuffle(&mut idx);
            idx.truncate(max_entries);
        }
        let mut numeric = Vec::with_capacity(idx.len());
        let mut picked = Vec::with_capacity(idx.len());
        for &k in &idx {
            let mut plus = inputs.to_vec();
            plus[i].data_mut()[k] += FD_EPS;
            let mut minus = inputs.to_vec();
            minus[i].data_mut()[k] -= FD_EPS;
            let (up, down) = (eval(&plus), eval(&minus));
            report.probes += 1;
            if straddles_kink(down, base, up, scale) {
                report.kinks += 1;
                continue;
            }
            numeric.push((up - down) / (2.0 * FD_EPS));
            picked.push(analytic[i][k]);
        }
        report.errors.push(relative_error(&picked, &numeric));
    }
    report
}
