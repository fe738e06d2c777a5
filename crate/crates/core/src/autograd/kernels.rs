//! Raw valid-mode convolution kernels shared by forward and backward passes.
//!
//! Layouts: images are `[channels, height, width]`, kernels are
//! `[out, in, k, k]` for `conv`. The transposed convolution reuses the same
//! kernel array read as `[in, out, k, k]`, which makes it the adjoint.

#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub c_out: usize,
    pub c_in: usize,
    pub k: usize,
    pub stride: usize,
    /// Spatial size of the larger (conv input) side.
    pub h: usize,
    pub w: usize,
    /// Spatial size of the smaller (conv output) side.
    pub oh: usize,
    pub ow: usize,
}

/// `out[o,i,j] = Σ_c,p,q K[o,c,p,q] · x[c, i·s+p, j·s+q]`.
pub(crate) fn conv_forward(g: &ConvGeom, x: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; g.c_out * g.oh * g.ow];
    for o in 0..g.c_out {
        let plane = &mut out[o * g.oh * g.ow..(o + 1) * g.oh * g.ow];
        for c in 0..g.c_in {
            let xc = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
            let kc = &kernel[(o * g.c_in + c) * g.k * g.k..][..g.k * g.k];
            for i in 0..g.oh {
                for j in 0..g.ow {
                    let mut acc = 0.0;
                    for p in 0..g.k {
                        let row = &xc[(i * g.stride + p) * g.w + j * g.stride..][..g.k];
                        let krow = &kc[p * g.k..][..g.k];
                        for q in 0..g.k {
                            acc += krow[q] * row[q];
                        }
                    }
                    plane[i * g.ow + j] += acc;
                }
            }
        }
    }
    out
}

/// Adjoint of [`conv_forward`] in `x`: scatters `grad_out` back to input size.
pub(crate) fn conv_input_grad(g: &ConvGeom, grad_out: &[f64], kernel: &[f64]) -> Vec<f64> {
    let mut dx = vec![0.0; g.c_in * g.h * g.w];
    for o in 0..g.c_out {
        for c in 0..g.c_in {
            let kc = &kernel[(o * g.c_in + c) * g.k * g.k..][..g.k * g.k];
            let dxc = &mut dx[c * g.h * g.w..(c + 1) * g.h * g.w];
            for i in 0..g.oh {
                for j in 0..g.ow {
                    let go = grad_out[(o * g.oh + i) * g.ow + j];
                    if go == 0.0 {
                        continue;
                    }
                    for p in 0..g.k {
                        let row = &mut dxc[(i * g.stride + p) * g.w + j * g.stride..][..g.k];
                        let krow = &kc[p * g.k..][..g.k];
                        for q in 0..g.k {
                            row[q] += krow[q] * go;
                        }
                    }
                }
            }
        }
    }
    dx
}

/// `dK[o,c,p,q] = Σ_i,j x[c, i·s+p, j·s+q] · grad_out[o,i,j]`.
pub(crate) fn conv_kernel_grad(g: &ConvGeom, x: &[f64], grad_out: &[f64]) -> Vec<f64> {
    let mut dk = vec![0.0; g.c_out * g.c_in * g.k * g.k];
    for o in 0..g.c_out {
        for c in 0..g.c_in {
            let xc = &x[c * g.h * g.w..(c + 1) * g.h * g.w];
            let dkc = &mut dk[(o * g.c_in + c) * g.k * g.k..][..g.k * g.k];
            for i in 0..g.oh {
                for j in 0..g.ow {
                    let go = grad_out[(o * g.oh + i) * g.ow + j];
                    if go == 0.0 {
                        continue;
                    }
                    for p in 0..g.k {
                        let row = &xc[(i * g.stride + p) * g.w + j * g.stride..][..g.k];
                        for q in 0..g.k {
                            dkc[p * g.k + q] += row[q] * go;
                        }
                    }
                }
            }
        }
    }
    dk
}
