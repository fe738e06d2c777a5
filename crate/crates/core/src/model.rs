//! Frame forecaster: a two-stage convolutional encoder applied to each input
//! frame, an LSTM over the encoded sequence, and a conditional generator that
//! decodes the final hidden state plus a tile/band code into the next frame.
//!
//! Shapes for a `w × w` window (`w` divisible by 16):
//!
//! ```text
//! encoder   [1,w,w] -conv k4 s4-> [8,w/4,w/4] -relu-> -conv k4 s4-> [16,w/16,w/16] -relu-> flatten -> dense -> d_feat
//! temporal  j × d_feat -> LSTM from zero state -> h_j (d_hidden)
//! generator [h_j; cond] -> dense -> [16,w/16,w/16] -deconv k4 s4-> [8,w/4,w/4] -relu-> -deconv k4 s4-> [1,w,w] -> sigmoid
//! ```

use crate::autograd::{Graph, LstmWeights, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Bits reserved for the band index in a condition code.
pub const BAND_BITS: usize = 3;
pub const MAX_BANDS: usize = 1 << BAND_BITS;

const KERNEL: usize = 4;
const STRIDE: usize = 4;
const ENC_C1: usize = 8;
const ENC_C2: usize = 16;

/// `ceil(log2(plan_size))`, zero for a single tile.
pub fn tile_bits(plan_size: usize) -> usize {
    if plan_size <= 1 {
        0
    } else {
        (usize::BITS - (plan_size - 1).leading_zeros()) as usize
    }
}

pub fn cond_bits_for(plan_size: usize) -> usize {
    tile_bits(plan_size) + BAND_BITS
}

/// Tile id bits (most significant first) followed by three band bits.
pub fn condition_code(tile_id: usize, band: usize, plan_size: usize) -> Result<Vec<f64>> {
    if tile_id >= plan_size {
        return Err(Error::IndexOutOfRange(format!("tile {tile_id} of {plan_size}")));
    }
    if band >= MAX_BANDS {
        return Err(Error::IndexOutOfRange(format!("band {band} needs more than {BAND_BITS} bits")));
    }
    let bits = tile_bits(plan_size);
    let tile_part = (0..bits).rev().map(|k| ((tile_id >> k) & 1) as f64);
    let band_part = (0..BAND_BITS).rev().map(|k| ((band >> k) & 1) as f64);
    Ok(tile_part.chain(band_part).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub window: usize,
    pub j: usize,
    pub d_feat: usize,
    pub d_hidden: usize,
    pub cond_bits: usize,
}

impl ModelConfig {
    /// Default layer sizes for a plan of `plan_size` tiles.
    pub fn for_plan(plan_size: usize) -> Self {
        Self { window: 128, j: 5, d_feat: 128, d_hidden: 128, cond_bits: cond_bits_for(plan_size) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || !self.window.is_multiple_of(16) {
            return Err(Error::InvalidParameter(format!("window {} must be a positive multiple of 16", self.window)));
        }
        if self.j == 0 {
            return Err(Error::InvalidParameter("j must be at least 1".into()));
        }
        if self.d_feat == 0 || self.d_hidden == 0 || self.cond_bits == 0 {
            return Err(Error::InvalidParameter("d_feat, d_hidden and cond_bits must be positive".into()));
        }
        Ok(())
    }

    fn bottleneck_side(&self) -> usize {
        self.window / 16
    }

    fn bottleneck_len(&self) -> usize {
        ENC_C2 * self.bottleneck_side().pow(2)
    }

    /// Names and shapes of every parameter array, in storage order.
    pub fn param_layout(&self) -> Vec<(&'static str, ParamGroup, Vec<usize>)> {
        use ParamGroup::*;
        let (k, flat, dh) = (KERNEL, self.bottleneck_len(), self.d_hidden);
        vec![
            ("encoder.conv1.weight", Encoder, vec![ENC_C1, 1, k, k]),
            ("encoder.conv1.bias", Encoder, vec![ENC_C1]),
            ("encoder.conv2.weight", Encoder, vec![ENC_C2, ENC_C1, k, k]),
            ("encoder.conv2.bias", Encoder, vec![ENC_C2]),
            ("encoder.proj.weight", Encoder, vec![self.d_feat, flat]),
            ("encoder.proj.bias", Encoder, vec![self.d_feat]),
            ("lstm.weight", Temporal, vec![4 * dh, self.d_feat + dh]),
            ("lstm.bias", Temporal, vec![4 * dh]),
            ("generator.proj.weight", Generator, vec![flat, dh + self.cond_bits]),
            ("generator.proj.bias", Generator, vec![flat]),
            ("generator.deconv1.weight", Generator, vec![ENC_C2, ENC_C1, k, k]),
            ("generator.deconv1.bias", Generator, vec![ENC_C1]),
            ("generator.deconv2.weight", Generator, vec![ENC_C1, 1, k, k]),
            ("generator.deconv2.bias", Generator, vec![1]),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.param_layout().iter().map(|(_, _, s)| s.iter().product::<usize>()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamGroup {
    Encoder,
    Temporal,
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub tensor: Tensor,
}

/// Every learnable array of the model, in [`ModelConfig::param_layout`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arrays: Vec<NamedTensor>,
}

impl ModelParams {
    /// Uniform `±sqrt(6 / (fan_in + fan_out))` weights and zero biases.
    /// Arrays draw from one stream in storage order.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = SplitMix64::new(seed);
        let arrays = config
            .param_layout()
            .into_iter()
            .map(|(name, _, shape)| {
                let tensor = if shape.len() == 1 {
                    Tensor::zeros(&shape)
                } else {
                    let receptive: usize = shape[2..].iter().product();
                    let (fan_out, fan_in) = (shape[0] * receptive, shape[1] * receptive);
                    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                    let n = shape.iter().product();
                    let data = (0..n).map(|_| rng.uniform_range(-limit, limit)).collect();
                    Tensor::new(shape, data).expect("layout shape")
                };
                NamedTensor { name: name.to_string(), tensor }
            })
            .collect();
        Ok(Self { arrays })
    }

    pub fn zeros(config: &ModelConfig) -> Self {
        let arrays = config
            .param_layout()
            .into_iter()
            .map(|(name, _, shape)| NamedTensor { name: name.to_string(), tensor: Tensor::zeros(&shape) })
            .collect();
        Self { arrays }
    }

    /// Checks names and shapes against `config`.
    pub fn check(&self, config: &ModelConfig) -> Result<()> {
        let layout = config.param_layout();
        if layout.len() != self.arrays.len() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} parameter arrays, got {}",
                layout.len(),
                self.arrays.len()
            )));
        }
        for ((name, _, shape), a) in layout.iter().zip(&self.arrays) {
            if *name != a.name || shape.as_slice() != a.tensor.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter {} {:?} does not match expected {name} {shape:?}",
                    a.name,
                    a.tensor.shape()
                )));
            }
            if a.tensor.data().iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter(format!("parameter {name} holds non-finite values")));
            }
        }
        Ok(())
    }

    pub fn tensors(&self) -> Vec<Tensor> {
        self.arrays.iter().map(|a| a.tensor.clone()).collect()
    }

    pub fn scalar_count(&self) -> usize {
        self.arrays.iter().map(|a| a.tensor.len()).sum()
    }
}

/// Parameters placed on a graph as leaves.
#[derive(Debug, Clone)]
pub struct BoundParams {
    pub vars: Vec<Var>,
}

impl BoundParams {
    fn v(&self, i: usize) -> Var {
        self.vars[i]
    }
}

/// A configured model with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Model {
    pub fn new(config: ModelConfig, params: ModelParams) -> Result<Self> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn bind(&self, g: &mut Graph, requires_grad: bool) -> BoundParams {
        BoundParams { vars: self.params.arrays.iter().map(|a| g.leaf(a.tensor.clone(), requires_grad)).collect() }
    }

    pub fn encode_on(&self, g: &mut Graph, p: &BoundParams, frame: Var) -> Result<Var> {
        let w = self.config.window;
        if g.value(frame).len() != w * w {
            return Err(Error::ShapeMismatch(format!(
                "encoder expects {w}x{w} frame, got {} values",
                g.value(frame).len()
            )));
        }
        let x = g.reshape(frame, &[1, w, w])?;
        let x = g.conv2d(x, p.v(0), STRIDE)?;
        let x = g.channel_bias(x, p.v(1))?;
        let x = g.relu(x);
        let x = g.conv2d(x, p.v(2), STRIDE)?;
        let x = g.channel_bias(x, p.v(3))?;
        let x = g.relu(x);
        let flat = g.reshape(x, &[self.config.bottleneck_len()])?;
        g.dense(flat, p.v(4), p.v(5))
    }

    pub fn temporal_on(&self, g: &mut Graph, p: &BoundParams, features: &[Var]) -> Result<Var> {
        if features.len() != self.config.j {
            return Err(Error::BadSequenceLength { expected: self.config.j, got: features.len() });
        }
        let weights = LstmWeights { w: p.v(6), b: p.v(7) };
        let mut h = g.leaf(Tensor::zeros(&[self.config.d_hidden]), false);
        let mut c = g.leaf(Tensor::zeros(&[self.config.d_hidden]), false);
        for &x in features {
            (h, c) = g.lstm_cell(x, h, c, weights)?;
        }
        Ok(h)
    }

    pub fn generate_on(&self, g: &mut Graph, p: &BoundParams, z: Var, cond: Var) -> Result<Var> {
        if g.shape(cond) != [self.config.cond_bits] {
            return Err(Error::ShapeMismatch(format!(
                "condition has shape {:?}, model expects [{}]",
                g.shape(cond),
                self.config.cond_bits
            )));
        }
        let side = self.config.bottleneck_side();
        let zc = g.concat(&[z, cond])?;
        let x = g.dense(zc, p.v(8), p.v(9))?;
        let x = g.reshape(x, &[ENC_C2, side, side])?;
        let x = g.deconv2d(x, p.v(10), STRIDE)?;
        let x = g.channel_bias(x, p.v(11))?;
        let x = g.relu(x);
        let x = g.deconv2d(x, p.v(12), STRIDE)?;
        let x = g.channel_bias(x, p.v(13))?;
        let x = g.sigmoid(x);
        g.reshape(x, &[self.config.window * self.config.window])
    }

    /// Builds `generate(temporal(encode(frames)), cond)` on `g`.
    pub fn predict_on(&self, g: &mut Graph, p: &BoundParams, frames: &[Var], cond: Var) -> Result<Var> {
        if frames.len() != self.config.j {
            return Err(Error::BadSequenceLength { expected: self.config.j, got: frames.len() });
        }
        let feats = frames.iter().map(|&f| self.encode_on(g, p, f)).collect::<Result<Vec<_>>>()?;
        let z = self.temporal_on(g, p, &feats)?;
        self.generate_on(g, p, z, cond)
    }

    pub fn encode(&self, frame: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let f = g.leaf(Tensor::vector(frame.to_vec()), false);
        let out = self.encode_on(&mut g, &p, f)?;
        Ok(g.value(out).data().to_vec())
    }

    pub fn temporal(&self, features: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let vars: Vec<Var> = features.iter().map(|f| g.leaf(Tensor::vector(f.clone()), false)).collect();
        for &v in &vars {
            if g.shape(v) != [self.config.d_feat] {
                return Err(Error::ShapeMismatch(format!("feature has shape {:?}", g.shape(v))));
            }
        }
        let z = self.temporal_on(&mut g, &p, &vars)?;
        Ok(g.value(z).data().to_vec())
    }

    pub fn generate(&self, z: &[f64], cond: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.config.d_hidden {
            return Err(Error::ShapeMismatch(format!("z has {} values, expected {}", z.len(), self.config.d_hidden)));
        }
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let zv = g.leaf(Tensor::vector(z.to_vec()), false);
        let cv = g.leaf(Tensor::vector(cond.to_vec()), false);
        let out = self.generate_on(&mut g, &p, zv, cv)?;
        Ok(g.value(out).data().to_vec())
    }

    /// Predicts the next normalized frame from `j` normalized frames.
    pub fn predict(&self, frames: &[&[f64]], cond: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let p = self.bind(&mut g, false);
        let vars: Vec<Var> = frames.iter().map(|f| g.leaf(Tensor::vector(f.to_vec()), false)).collect();
        let cv = g.leaf(Tensor::vector(cond.to_vec()), false);
        let out = self.predict_on(&mut g, &p, &vars, cv)?;
        Ok(g.value(out).data().to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ModelConfig {
        ModelConfig { window: 32, j: 3, d_feat: 12, d_hidden: 10, cond_bits: cond_bits_for(20) }
    }

    fn frame(seed: u64, w: usize) -> Vec<f64> {
        let mut rng = SplitMix64::new(seed);
        (0..w * w).map(|_| rng.uniform()).collect()
    }

    #[test]
    fn seventh_block_code() {
        assert_eq!(condition_code(7, 0, 16).unwrap(), vec![0., 1., 1., 1., 0., 0., 0.]);
        assert_eq!(condition_code(0, 0, 255).unwrap(), vec![0.0; 11]);
        assert_eq!(condition_code(1, 5, 2).unwrap(), vec![1., 1., 0., 1.]);
    }

    #[test]
    fn code_out_of_range() {
        assert!(matches!(condition_code(16, 0, 16).unwrap_err(), Error::IndexOutOfRange(_)));
        assert!(matches!(condition_code(0, 8, 16).unwrap_err(), Error::IndexOutOfRange(_)));
    }

    #[test]
    fn code_is_injective() {
        let mut seen = std::collections::HashSet::new();
        for tile in 0..37 {
            for band in 0..8 {
                let code: Vec<u8> = condition_code(tile, band, 37).unwrap().iter().map(|&b| b as u8).collect();
                assert!(seen.insert(code));
            }
        }
    }

    #[test]
    fn tile_bit_counts() {
        assert_eq!(tile_bits(1), 0);
        assert_eq!(tile_bits(2), 1);
        assert_eq!(tile_bits(16), 4);
        assert_eq!(tile_bits(17), 5);
        assert_eq!(tile_bits(255), 8);
        assert_eq!(cond_bits_for(255), 11);
    }

    #[test]
    fn default_shape_chain() {
        let config = ModelConfig::for_plan(255);
        let model = Model::new(config, ModelParams::init(&config, 1).unwrap()).unwrap();
        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let f = g.leaf(Tensor::zeros(&[128 * 128]), false);
        let x = g.reshape(f, &[1, 128, 128]).unwrap();
        let c1 = g.conv2d(x, p.v(0), 4).unwrap();
        assert_eq!(g.shape(c1), &[8, 32, 32]);
        let c2 = g.conv2d(c1, p.v(2), 4).unwrap();
        assert_eq!(g.shape(c2), &[16, 8, 8]);
        assert_eq!(config.bottleneck_len(), 1024);
        let feats = model.encode(&vec![0.5; 128 * 128]).unwrap();
        assert_eq!(feats.len(), 128);
        assert!(feats.len() < 128 * 128);
    }

    #[test]
    fn zero_frame_zero_bias_gives_zero_features() {
        let config = small();
        let model = Model::new(config, ModelParams::init(&config, 3).unwrap()).unwrap();
        assert!(model.encode(&vec![0.0; 32 * 32]).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn generator_output_shapes() {
        for window in [32, 64, 128] {
            let config = ModelConfig { window, j: 1, d_feat: 8, d_hidden: 8, cond_bits: 4 };
            let model = Model::new(config, ModelParams::init(&config, 5).unwrap()).unwrap();
            let out = model.generate(&[0.1; 8], &[1.0, 0.0, 1.0, 0.0]).unwrap();
            assert_eq!(out.len(), window * window);
            assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn zero_weights_generate_half() {
        let config = small();
        let model = Model::new(config, ModelParams::zeros(&config)).unwrap();
        let out = model.generate(&[0.3; 10], &vec![1.0; config.cond_bits]).unwrap();
        assert!(out.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn zero_temporal() {
        let config = small();
        let model = Model::new(config, ModelParams::zeros(&config)).unwrap();
        let z = model.temporal(&vec![vec![0.0; 12]; 3]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn temporal_is_order_sensitive() {
        let config = small();
        let model = Model::new(config, ModelParams::init(&config, 9).unwrap()).unwrap();
        let mut rng = SplitMix64::new(4);
        let feats: Vec<Vec<f64>> = (0..3).map(|_| (0..12).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).collect();
        let z = model.temporal(&feats).unwrap();
        let reversed: Vec<Vec<f64>> = feats.iter().rev().cloned().collect();
        assert_ne!(z, model.temporal(&reversed).unwrap());
    }

    #[test]
    fn temporal_single_step_is_one_cell() {
        let config = ModelConfig { j: 1, ..small() };
        let model = Model::new(config, ModelParams::init(&config, 2).unwrap()).unwrap();
        let x: Vec<f64> = (0..12).map(|i| i as f64 / 12.0).collect();
        let z = model.temporal(std::slice::from_ref(&x)).unwrap();

        let mut g = Graph::new();
        let p = model.bind(&mut g, false);
        let xv = g.leaf(Tensor::vector(x), false);
        let h = g.leaf(Tensor::zeros(&[10]), false);
        let c = g.leaf(Tensor::zeros(&[10]), false);
        let (h2, _) = g.lstm_cell(xv, h, c, LstmWeights { w: p.v(6), b: p.v(7) }).unwrap();
        assert_eq!(g.value(h2).data(), &z[..]);
    }

    #[test]
    fn bad_sequence_length() {
        let config = small();
        let model = Model::new(config, ModelParams::init(&config, 2).unwrap()).unwrap();
        let err = model.temporal(&vec![vec![0.0; 12]; 2]).unwrap_err();
        assert!(matches!(err, Error::BadSequenceLength { expected: 3, got: 2 }));
    }

    #[test]
    fn condition_changes_output() {
        let config = small();
        let model = Model::new(config, ModelParams::init(&config, 6).unwrap()).unwrap();
        let z = vec![0.2; 10];
        let a = model.generate(&z, &condition_code(3, 1, 20).unwrap()).unwrap();
        let b = model.generate(&z, &condition_code(4, 1, 20).unwrap()).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn wrong_condition_length() {
        let config = small();
        let model = Model::new(config, ModelParams::init(&config, 6).unwrap()).unwrap();
        assert!(matches!(model.generate(&[0.0; 10], &[0.0; 3]).unwrap_err(), Error::ShapeMismatch(_)));
    }

    #[test]
    fn predict_is_composition() {
        let config = small();
        let model = Model::new(config, ModelParams::init(&config, 8).unwrap()).unwrap();
        let frames: Vec<Vec<f64>> = (0..3).map(|s| frame(s, 32)).collect();
        let cond = condition_code(5, 2, 20).unwrap();
        let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
        let direct = model.predict(&refs, &cond).unwrap();
        let feats: Vec<Vec<f64>> = frames.iter().map(|f| model.encode(f).unwrap()).collect();
        let z = model.temporal(&feats).unwrap();
        let stepwise = model.generate(&z, &cond).unwrap();
        assert_eq!(direct, stepwise);
        assert!(direct.iter().all(|&v| v > 0.0 && v < 1.0));
        assert_eq!(direct, model.predict(&refs, &cond).unwrap());
    }

    #[test]
    fn param_count_is_pure() {
        let config = small();
        let flat = 16 * 2 * 2;
        let expected = 8 * 16 + 8 + 16 * 8 * 16 + 16 + 12 * flat + 12 + 40 * 22 + 40 + flat * (10 + 8) + flat + 16 * 8 * 16 + 8 + 8 * 16 + 1;
        assert_eq!(config.param_count(), expected);
        assert_eq!(ModelParams::init(&config, 1).unwrap().scalar_count(), expected);
        assert_eq!(ModelParams::init(&config, 2).unwrap().scalar_count(), expected);
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let config = small();
        let a = ModelParams::init(&config, 10).unwrap();
        assert_eq!(a, ModelParams::init(&config, 10).unwrap());
        assert_ne!(a, ModelParams::init(&config, 11).unwrap());
        let proj = &a.arrays[4].tensor;
        let limit = (6.0f64 / (64 + 12) as f64).sqrt();
        assert!(proj.data().iter().all(|v| v.abs() <= limit));
        assert!(a.arrays[5].tensor.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn invalid_window() {
        let config = ModelConfig { window: 24, ..small() };
        assert!(config.validate().is_err());
    }
}
