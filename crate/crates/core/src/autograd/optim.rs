//! First-order optimizers over a flat list of parameter tensors.

use super::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Sgd {
    pub lr: f64,
}

impl Sgd {
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) {
        for (p, g) in params.iter_mut().zip(grads) {
            for (w, d) in p.data_mut().iter_mut().zip(g) {
                *w -= self.lr * d;
            }
        }
    }
}

/// Adam with bias-corrected first and second moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self::with_betas(lr, 0.9, 0.999, 1e-8)
    }

    pub fn with_betas(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self { lr, beta1, beta2, eps, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) {
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in p.data_mut().iter_mut().enumerate() {
                let gi = g[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(Adam),
    Sgd(Sgd),
}

impl Optimizer {
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) {
        match self {
            Optimizer::Adam(a) => a.step(params, grads),
            Optimizer::Sgd(s) => s.step(params, grads),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut params = vec![Tensor::vector(vec![1.0, -2.0])];
        let before = params.clone();
        let mut adam = Adam::new(1e-3);
        for _ in 0..5 {
            adam.step(&mut params, &[vec![0.0, 0.0]]);
        }
        assert_eq!(params, before);
    }

    #[test]
    fn first_step_closed_form() {
        let g = [0.5, -3.0, 1e-4];
        let mut params = vec![Tensor::vector(vec![0.0; 3])];
        let mut adam = Adam::new(0.01);
        adam.step(&mut params, &[g.to_vec()]);
        for (w, gi) in params[0].data().iter().zip(g) {
            let expected = -0.01 * gi / (gi.abs() + 1e-8);
            assert!((w - expected).abs() < 1e-12, "{w} vs {expected}");
        }
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // f(w) = (w - 3)^2, gradient 2(w - 3).
        let mut params = vec![Tensor::vector(vec![0.0])];
        let mut adam = Adam::new(0.1);
        for _ in 0..200 {
            let w = params[0].data()[0];
            adam.step(&mut params, &[vec![2.0 * (w - 3.0)]]);
        }
        assert!((params[0].data()[0] - 3.0).abs() < 0.1, "w = {}", params[0].data()[0]);
    }

    #[test]
    fn sgd_step() {
        let mut params = vec![Tensor::vector(vec![1.0])];
        Sgd { lr: 0.5 }.step(&mut params, &[vec![2.0]]);
        assert_eq!(params[0].data(), &[0.0]);
    }
}
