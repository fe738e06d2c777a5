//! Tape-based reverse-mode differentiation over f64 tensors.
//!
//! A [`Graph`] records every operation applied to its variables in order.
//! [`Graph::backward`] seeds the gradient of a scalar output with 1 and walks
//! the tape in exact reverse order, accumulating gradients into every node
//! that depends on a leaf created with `requires_grad`.
//!
//! ```
//! use canopy_core::autograd::{Graph, Tensor};
//!
//! let mut g = Graph::new();
//! let x = g.leaf(Tensor::vector(vec![1.0, 2.0]), true);
//! let w = g.leaf(Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap(), true);
//! let b = g.leaf(Tensor::vector(vec![0.0]), false);
//! let y = g.dense(x, w, b).unwrap();
//! assert_eq!(g.value(y).data(), &[3.0]);
//! g.backward(y).unwrap();
//! assert_eq!(g.grad(w).unwrap(), &[1.0, 2.0]);
//! ```

mod kernels;
pub mod optim;
mod tensor;

pub use optim::{Adam, Optimizer, Sgd};
pub use tensor::Tensor;

use kernels::{conv_forward, conv_input_grad, conv_kernel_grad, ConvGeom};

use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Dense { x: Var, w: Var, b: Var },
    Conv2d { x: Var, k: Var, geom: ConvGeom },
    Deconv2d { x: Var, k: Var, geom: ConvGeom },
    ChannelBias { x: Var, b: Var },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    Add(Var, Var),
    Mul(Var, Var),
    Concat(Vec<Var>),
    Reshape(Var),
    Slice { x: Var, start: usize },
    Mse { pred: Var, target: Var },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// The computation record: nodes in forward application order.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Weights of one LSTM cell. Gate rows are stacked `[input, forget, cell, output]`.
#[derive(Debug, Clone, Copy)]
pub struct LstmWeights {
    /// `[4·hidden, input + hidden]`
    pub w: Var,
    /// `[4·hidden]`
    pub b: Var,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node { value, grad: None, requires_grad, op });
        Var(self.nodes.len() - 1)
    }

    fn derived(&mut self, value: Tensor, inputs: &[Var], op: Op) -> Var {
        let rg = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.push(value, rg, op)
    }

    fn data(&self, v: Var) -> &[f64] {
        self.nodes[v.0].value.data()
    }

    /// `y = W·x + b`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (xs, ws, bs) = (self.shape(x), self.shape(w), self.shape(b));
        if xs.len() != 1 || ws.len() != 2 || bs.len() != 1 || ws[1] != xs[0] || ws[0] != bs[0] {
            return Err(Error::ShapeMismatch(format!("dense: x {xs:?}, W {ws:?}, b {bs:?}")));
        }
        let (n_out, n_in) = (ws[0], ws[1]);
        let (xd, wd, bd) = (self.data(x), self.data(w), self.data(b));
        let out: Vec<f64> = (0..n_out)
            .map(|o| bd[o] + wd[o * n_in..(o + 1) * n_in].iter().zip(xd).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        Ok(self.derived(Tensor::vector(out), &[x, w, b], Op::Dense { x, w, b }))
    }

    /// Valid-mode cross-correlation. `x: [C_in, H, W]`, `k: [C_out, C_in, k, k]`.
    pub fn conv2d(&mut self, x: Var, k: Var, stride: usize) -> Result<Var> {
        let (xs, ks) = (self.shape(x), self.shape(k));
        if xs.len() != 3 || ks.len() != 4 || ks[1] != xs[0] || ks[2] != ks[3] {
            return Err(Error::ShapeMismatch(format!("conv2d: x {xs:?}, K {ks:?}")));
        }
        if stride == 0 {
            return Err(Error::ShapeMismatch("conv2d: stride must be positive".into()));
        }
        let (h, w, kk) = (xs[1], xs[2], ks[2]);
        if kk > h || kk > w {
            return Err(Error::KernelTooLarge { kernel: kk, input: h.min(w) });
        }
        let geom = ConvGeom {
            c_out: ks[0],
            c_in: ks[1],
            k: kk,
            stride,
            h,
            w,
            oh: (h - kk) / stride + 1,
            ow: (w - kk) / stride + 1,
        };
        let out = conv_forward(&geom, self.data(x), self.data(k));
        let value = Tensor::new(vec![geom.c_out, geom.oh, geom.ow], out)?;
        Ok(self.derived(value, &[x, k], Op::Conv2d { x, k, geom }))
    }

    /// Transposed convolution, the adjoint of [`Graph::conv2d`] for the same
    /// kernel array. `x: [C_in, H, W]`, `k: [C_in, C_out, k, k]`, output
    /// `[C_out, (H-1)·s + k, (W-1)·s + k]`.
    pub fn deconv2d(&mut self, x: Var, k: Var, stride: usize) -> Result<Var> {
        let (xs, ks) = (self.shape(x), self.shape(k));
        if xs.len() != 3 || ks.len() != 4 || ks[0] != xs[0] || ks[2] != ks[3] {
            return Err(Error::ShapeMismatch(format!("deconv2d: x {xs:?}, K {ks:?}")));
        }
        if stride == 0 {
            return Err(Error::ShapeMismatch("deconv2d: stride must be positive".into()));
        }
        let (oh, ow, kk) = (xs[1], xs[2], ks[2]);
        // Geometry of the conv whose adjoint this is: conv maps C_out -> C_in.
        let geom = ConvGeom {
            c_out: ks[0],
            c_in: ks[1],
            k: kk,
            stride,
            h: (oh - 1) * stride + kk,
            w: (ow - 1) * stride + kk,
            oh,
            ow,
        };
        let out = conv_input_grad(&geom, self.data(x), self.data(k));
        let value = Tensor::new(vec![geom.c_in, geom.h, geom.w], out)?;
        Ok(self.derived(value, &[x, k], Op::Deconv2d { x, k, geom }))
    }

    /// Adds `b[c]` to every pixel of channel `c` of a `[C, H, W]` tensor.
    pub fn channel_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (xs, bs) = (self.shape(x), self.shape(b));
        if xs.len() != 3 || bs.len() != 1 || bs[0] != xs[0] {
            return Err(Error::ShapeMismatch(format!("channel_bias: x {xs:?}, b {bs:?}")));
        }
        let plane = xs[1] * xs[2];
        let shape = xs.to_vec();
        let bd = self.data(b);
        let out = self.data(x).iter().enumerate().map(|(i, v)| v + bd[i / plane]).collect();
        Ok(self.derived(Tensor::new(shape, out)?, &[x, b], Op::ChannelBias { x, b }))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(x);
        let value = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&v| f(v)).collect()).unwrap();
        self.derived(value, &[x], op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.unary(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.unary(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x))
    }

    fn binary(&mut self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64, op: Op, name: &str) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::ShapeMismatch(format!("{name}: {:?} vs {:?}", self.shape(a), self.shape(b))));
        }
        let out = self.data(a).iter().zip(self.data(b)).map(|(&x, &y)| f(x, y)).collect();
        let value = Tensor::new(self.shape(a).to_vec(), out)?;
        Ok(self.derived(value, &[a, b], op))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x + y, Op::Add(a, b), "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, |x, y| x * y, Op::Mul(a, b), "mul")
    }

    /// Concatenates flat vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let mut out = Vec::new();
        for &p in parts {
            if self.shape(p).len() != 1 {
                return Err(Error::ShapeMismatch(format!("concat: part has shape {:?}", self.shape(p))));
            }
            out.extend_from_slice(self.data(p));
        }
        Ok(self.derived(Tensor::vector(out), parts, Op::Concat(parts.to_vec())))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.value(x).clone().reshaped(shape)?;
        Ok(self.derived(value, &[x], Op::Reshape(x)))
    }

    /// Elements `start..start + len` of a flat vector.
    pub fn slice(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let xs = self.shape(x);
        if xs.len() != 1 || start + len > xs[0] {
            return Err(Error::ShapeMismatch(format!("slice {start}..{} of {xs:?}", start + len)));
        }
        let value = Tensor::vector(self.data(x)[start..start + len].to_vec());
        Ok(self.derived(value, &[x], Op::Slice { x, start }))
    }

    /// Mean squared error, a `[1]` tensor.
    pub fn mse(&mut self, pred: Var, target: Var) -> Result<Var> {
        if self.shape(pred) != self.shape(target) {
            return Err(Error::ShapeMismatch(format!(
                "mse: {:?} vs {:?}",
                self.shape(pred),
                self.shape(target)
            )));
        }
        let n = self.value(pred).len().max(1) as f64;
        let sum: f64 = self.data(pred).iter().zip(self.data(target)).map(|(p, t)| (p - t) * (p - t)).sum();
        Ok(self.derived(Tensor::scalar(sum / n), &[pred, target], Op::Mse { pred, target }))
    }

    /// One LSTM step: `i, f, o = σ(·)`, `g = tanh(·)`, `c' = f⊙c + i⊙g`,
    /// `h' = o⊙tanh(c')`, with all gate pre-activations from `W·[x; h] + b`.
    pub fn lstm_cell(&mut self, x: Var, h: Var, c: Var, p: LstmWeights) -> Result<(Var, Var)> {
        let d_h = self.shape(h).first().copied().unwrap_or(0);
        let ws = self.shape(p.w);
        let d_in = self.shape(x).first().copied().unwrap_or(0);
        if self.shape(h).len() != 1
            || self.shape(c) != self.shape(h)
            || ws.len() != 2
            || ws[0] != 4 * d_h
            || ws[1] != d_in + d_h
        {
            return Err(Error::ShapeMismatch(format!(
                "lstm_cell: x {:?}, h {:?}, c {:?}, W {ws:?}",
                self.shape(x),
                self.shape(h),
                self.shape(c)
            )));
        }
        let xh = self.concat(&[x, h])?;
        let gates = self.dense(xh, p.w, p.b)?;
        let i = self.slice(gates, 0, d_h)?;
        let f = self.slice(gates, d_h, d_h)?;
        let g = self.slice(gates, 2 * d_h, d_h)?;
        let o = self.slice(gates, 3 * d_h, d_h)?;
        let (i, f, g, o) = (self.sigmoid(i), self.sigmoid(f), self.tanh(g), self.sigmoid(o));
        let fc = self.mul(f, c)?;
        let ig = self.mul(i, g)?;
        let c_next = self.add(fc, ig)?;
        let tc = self.tanh(c_next);
        let h_next = self.mul(o, tc)?;
        Ok((h_next, c_next))
    }

    /// Back-propagates from a single-element output.
    pub fn backward(&mut self, output: Var) -> Result<()> {
        if self.value(output).len() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "backward needs a scalar output, got shape {:?}",
                self.shape(output)
            )));
        }
        self.nodes[output.0].grad = Some(vec![1.0]);
        for idx in (0..=output.0).rev() {
            let Some(grad) = self.nodes[idx].grad.take() else {
                continue;
            };
            if self.nodes[idx].requires_grad {
                let op = self.nodes[idx].op.clone();
                self.propagate(idx, &op, &grad);
            }
            self.nodes[idx].grad = Some(grad);
        }
        Ok(())
    }

    fn accumulate(&mut self, v: Var, delta: impl IntoIterator<Item = f64>) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        let len = node.value.len();
        let g = node.grad.get_or_insert_with(|| vec![0.0; len]);
        for (slot, d) in g.iter_mut().zip(delta) {
            *slot += d;
        }
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn propagate(&mut self, idx: usize, op: &Op, grad: &[f64]) {
        match *op {
            Op::Leaf => {}
            Op::Dense { x, w, b } => {
                let n_in = self.shape(x)[0];
                if self.needs(x) {
                    let wd = self.data(w);
                    let mut dx = vec![0.0; n_in];
                    for (o, g) in grad.iter().enumerate() {
                        for (d, wv) in dx.iter_mut().zip(&wd[o * n_in..(o + 1) * n_in]) {
                            *d += wv * g;
                        }
                    }
                    self.accumulate(x, dx);
                }
                if self.needs(w) {
                    let xd = self.data(x);
                    let dw: Vec<f64> = grad.iter().flat_map(|g| xd.iter().map(move |xv| xv * g)).collect();
                    self.accumulate(w, dw);
                }
                self.accumulate(b, grad.iter().copied());
            }
            Op::Conv2d { x, k, geom } => {
                if self.needs(x) {
                    let dx = conv_input_grad(&geom, grad, self.data(k));
                    self.accumulate(x, dx);
                }
                if self.needs(k) {
                    let dk = conv_kernel_grad(&geom, self.data(x), grad);
                    self.accumulate(k, dk);
                }
            }
            Op::Deconv2d { x, k, geom } => {
                if self.needs(x) {
                    let dx = conv_forward(&geom, grad, self.data(k));
                    self.accumulate(x, dx);
                }
                if self.needs(k) {
                    let dk = conv_kernel_grad(&geom, grad, self.data(x));
                    self.accumulate(k, dk);
                }
            }
            Op::ChannelBias { x, b } => {
                self.accumulate(x, grad.iter().copied());
                if self.needs(b) {
                    let s = self.shape(x);
                    let plane = s[1] * s[2];
                    let db: Vec<f64> = grad.chunks(plane).map(|c| c.iter().sum()).collect();
                    self.accumulate(b, db);
                }
            }
            Op::Relu(x) => {
                let d: Vec<f64> = self.data(x).iter().zip(grad).map(|(&v, g)| if v > 0.0 { *g } else { 0.0 }).collect();
                self.accumulate(x, d);
            }
            Op::Sigmoid(x) => {
                let d: Vec<f64> = self.nodes[idx].value.data().iter().zip(grad).map(|(s, g)| g * s * (1.0 - s)).collect();
                self.accumulate(x, d);
            }
            Op::Tanh(x) => {
                let d: Vec<f64> = self.nodes[idx].value.data().iter().zip(grad).map(|(t, g)| g * (1.0 - t * t)).collect();
                self.accumulate(x, d);
            }
            Op::Add(a, b) => {
                self.accumulate(a, grad.iter().copied());
                self.accumulate(b, grad.iter().copied());
            }
            Op::Mul(a, b) => {
                let da: Vec<f64> = self.data(b).iter().zip(grad).map(|(v, g)| v * g).collect();
                let db: Vec<f64> = self.data(a).iter().zip(grad).map(|(v, g)| v * g).collect();
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Concat(ref parts) => {
                let mut offset = 0;
                for &p in parts {
                    let n = self.value(p).len();
                    self.accumulate(p, grad[offset..offset + n].iter().copied());
                    offset += n;
                }
            }
            Op::Reshape(x) => self.accumulate(x, grad.iter().copied()),
            Op::Slice { x, start } => {
                let mut d = vec![0.0; self.value(x).len()];
                d[start..start + grad.len()].copy_from_slice(grad);
                self.accumulate(x, d);
            }
            Op::Mse { pred, target } => {
                let n = self.value(pred).len().max(1) as f64;
                let scale = 2.0 * grad[0] / n;
                let d: Vec<f64> = self.data(pred).iter().zip(self.data(target)).map(|(p, t)| scale * (p - t)).collect();
                let neg: Vec<f64> = d.iter().map(|v| -v).collect();
                self.accumulate(pred, d);
                self.accumulate(target, neg);
            }
        }
    }
}

pub fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_identity() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.5, -2.0, 3.0]), false);
        let mut eye = Tensor::zeros(&[3, 3]);
        for i in 0..3 {
            eye.data_mut()[i * 4] = 1.0;
        }
        let w = g.leaf(eye, false);
        let b = g.leaf(Tensor::zeros(&[3]), false);
        let y = g.dense(x, w, b).unwrap();
        assert_eq!(g.value(y).data(), &[1.5, -2.0, 3.0]);
    }

    #[test]
    fn dense_shape_mismatch() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[3]), false);
        let w = g.leaf(Tensor::zeros(&[2, 2]), false);
        let b = g.leaf(Tensor::zeros(&[2]), false);
        assert!(matches!(g.dense(x, w, b).unwrap_err(), Error::ShapeMismatch(_)));
    }

    #[test]
    fn conv_identity_kernel() {
        let mut g = Graph::new();
        let data: Vec<f64> = (0..12).map(|v| v as f64).collect();
        let x = g.leaf(Tensor::new(vec![1, 3, 4], data.clone()).unwrap(), false);
        let k = g.leaf(Tensor::filled(&[1, 1, 1, 1], 1.0), false);
        let y = g.conv2d(x, k, 1).unwrap();
        assert_eq!(g.shape(y), &[1, 3, 4]);
        assert_eq!(g.value(y).data(), &data[..]);
    }

    #[test]
    fn conv_window_sum() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::filled(&[1, 2, 2], 1.0), false);
        let k = g.leaf(Tensor::filled(&[1, 1, 2, 2], 1.0), false);
        let y = g.conv2d(x, k, 1).unwrap();
        assert_eq!(g.value(y).data(), &[4.0]);
    }

    #[test]
    fn conv_kernel_too_large() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[1, 2, 5]), false);
        let k = g.leaf(Tensor::zeros(&[1, 1, 3, 3]), false);
        assert!(matches!(g.conv2d(x, k, 1).unwrap_err(), Error::KernelTooLarge { .. }));
    }

    #[test]
    fn conv_output_size_floor() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2, 9, 7]), false);
        let k = g.leaf(Tensor::zeros(&[3, 2, 3, 3]), false);
        let y = g.conv2d(x, k, 2).unwrap();
        assert_eq!(g.shape(y), &[3, 4, 3]);
    }

    #[test]
    fn deconv_broadcasts_single_pixel() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::filled(&[1, 1, 1], 2.5), false);
        let k = g.leaf(Tensor::filled(&[1, 1, 2, 2], 1.0), false);
        let y = g.deconv2d(x, k, 2).unwrap();
        assert_eq!(g.shape(y), &[1, 2, 2]);
        assert_eq!(g.value(y).data(), &[2.5; 4]);
    }

    #[test]
    fn mse_values() {
        let mut g = Graph::new();
        let p = g.leaf(Tensor::vector(vec![0.0, 0.0]), true);
        let t = g.leaf(Tensor::vector(vec![1.0, 1.0]), false);
        let l = g.mse(p, t).unwrap();
        assert_eq!(g.value(l).data(), &[1.0]);
        g.backward(l).unwrap();
        assert_eq!(g.grad(p).unwrap(), &[-1.0, -1.0]);
        let same = g.mse(t, t).unwrap();
        assert_eq!(g.value(same).data(), &[0.0]);
    }

    #[test]
    fn lstm_zero_fixed_point() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.3, -0.7]), false);
        let h = g.leaf(Tensor::zeros(&[3]), false);
        let c = g.leaf(Tensor::zeros(&[3]), false);
        let w = g.leaf(Tensor::zeros(&[12, 5]), false);
        let b = g.leaf(Tensor::zeros(&[12]), false);
        let (h2, c2) = g.lstm_cell(x, h, c, LstmWeights { w, b }).unwrap();
        assert_eq!(g.value(h2).data(), &[0.0; 3]);
        assert_eq!(g.value(c2).data(), &[0.0; 3]);
    }

    #[test]
    fn lstm_saturated_forget_gate_keeps_cell() {
        let d_h = 2;
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.4, -1.2, 0.9]), false);
        let h = g.leaf(Tensor::vector(vec![0.1, -0.3]), false);
        let cell = vec![0.75, -1.5];
        let c = g.leaf(Tensor::vector(cell.clone()), false);
        let w = g.leaf(Tensor::filled(&[4 * d_h, 3 + d_h], 0.05), false);
        let mut bias = vec![0.0; 4 * d_h];
        bias[..d_h].fill(-100.0);
        bias[d_h..2 * d_h].fill(100.0);
        bias[3 * d_h..].fill(-100.0);
        let b = g.leaf(Tensor::vector(bias), false);
        let (h2, c2) = g.lstm_cell(x, h, c, LstmWeights { w, b }).unwrap();
        for (a, e) in g.value(c2).data().iter().zip(&cell) {
            assert!((a - e).abs() < 1e-8);
        }
        assert!(g.value(h2).data().iter().all(|v| v.abs() < 1e-8));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::zeros(&[2]), true);
        assert!(g.backward(x).is_err());
    }

    #[test]
    fn zero_grad_then_repeat_is_identical() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![0.2, -0.4, 0.9]), true);
        let w = g.leaf(Tensor::new(vec![2, 3], vec![0.1, -0.2, 0.3, 0.5, 0.7, -0.1]).unwrap(), true);
        let b = g.leaf(Tensor::vector(vec![0.05, -0.05]), true);
        let t = g.leaf(Tensor::vector(vec![1.0, 0.0]), false);
        let y = g.dense(x, w, b).unwrap();
        let y = g.tanh(y);
        let l = g.mse(y, t).unwrap();
        g.backward(l).unwrap();
        let first: Vec<Vec<f64>> = [x, w, b].iter().map(|&v| g.grad(v).unwrap().to_vec()).collect();
        g.zero_grad();
        g.backward(l).unwrap();
        let second: Vec<Vec<f64>> = [x, w, b].iter().map(|&v| g.grad(v).unwrap().to_vec()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn no_grad_for_constants() {
        let mut g = Graph::new();
        let x = g.leaf(Tensor::vector(vec![1.0]), false);
        let w = g.leaf(Tensor::new(vec![1, 1], vec![2.0]).unwrap(), true);
        let b = g.leaf(Tensor::vector(vec![0.0]), false);
        let y = g.dense(x, w, b).unwrap();
        g.backward(y).unwrap();
        assert!(g.grad(x).is_none());
        assert_eq!(g.grad(w).unwrap(), &[1.0]);
    }
}
