//! A single LSTM direction with exact backpropagation through time.
//!
//! Gate pre-activations are stacked in the order input, forget, candidate,
//! output:
//!
//! ```text
//! z_t = Wx x_t + Wh h_{t-1} + b
//! i = s(z_i)  f = s(z_f)  g = tanh(z_g)  o = s(z_o)
//! c_t = f * c_{t-1} + i * g
//! h_t = o * tanh(c_t)
//! ```
//!
//! The input projections for all steps are one matrix product; only the
//! recurrent term is evaluated step by step.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::RnnError;

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Dot product with eight independent accumulators so the loop vectorizes.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Parameters of one LSTM direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `4H x I`
    pub wx: Array2<f64>,
    /// `4H x H`
    pub wh: Array2<f64>,
    /// `4H`
    pub b: Array1<f64>,
}

impl LstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            wx: Array2::zeros((4 * hidden, input)),
            wh: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Gaussian weights and biases; the forget-gate bias block is set to
    /// `forget_bias`.
    pub fn random<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        std: f64,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let normal = Normal::new(0.0, std).expect("positive std");
        let mut p = LstmParams::zeros(input, hidden);
        p.wx.iter_mut().for_each(|v| *v = normal.sample(rng));
        p.wh.iter_mut().for_each(|v| *v = normal.sample(rng));
        p.b.iter_mut().for_each(|v| *v = normal.sample(rng));
        p.b.slice_mut(s![hidden..2 * hidden]).fill(forget_bias);
        p
    }

    pub fn input_size(&self) -> usize {
        self.wx.ncols()
    }

    pub fn hidden_size(&self) -> usize {
        self.wh.ncols()
    }

    /// One step for a single input vector.
    pub fn step(&self, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>), RnnError> {
        let hs = self.hidden_size();
        if x.len() != self.input_size() || h.len() != hs || c.len() != hs {
            return Err(RnnError::Dimension(format!(
                "lstm step expects input {} and state {hs}, got {}, {}, {}",
                self.input_size(),
                x.len(),
                h.len(),
                c.len()
            )));
        }
        let wx = self.wx.as_slice().expect("standard layout");
        let wh = self.wh.as_slice().expect("standard layout");
        let ni = self.input_size();
        let z: Vec<f64> = (0..4 * hs)
            .map(|r| {
                self.b[r] + dot(&wx[r * ni..(r + 1) * ni], x) + dot(&wh[r * hs..(r + 1) * hs], h)
            })
            .collect();
        let mut h_new = vec![0.0; hs];
        let mut c_new = vec![0.0; hs];
        for u in 0..hs {
            let i = sigmoid(z[u]);
            let f = sigmoid(z[hs + u]);
            let g = z[2 * hs + u].tanh();
            let o = sigmoid(z[3 * hs + u]);
            c_new[u] = f * c[u] + i * g;
            h_new[u] = o * c_new[u].tanh();
        }
        Ok((h_new, c_new))
    }

    /// Runs the direction over `xs` (`T x I`) from zero state.
    pub(crate) fn forward(&self, xs: ArrayView2<'_, f64>) -> LstmTrace {
        let t_len = xs.nrows();
        let hs = self.hidden_size();
        let mut z = Array2::<f64>::zeros((t_len, 4 * hs));
        general_mat_mul(1.0, &xs, &self.wx.t(), 0.0, &mut z);
        z += &self.b;
        let wh = self.wh.as_slice().expect("standard layout");
        let mut acts = Array2::<f64>::zeros((t_len, 4 * hs));
        let mut cells = Array2::<f64>::zeros((t_len, hs));
        let mut tanh_c = Array2::<f64>::zeros((t_len, hs));
        let mut hidden = Array2::<f64>::zeros((t_len, hs));
        let mut h_prev = vec![0.0; hs];
        let mut c_prev = vec![0.0; hs];
        for t in 0..t_len {
            let zr = z.row(t);
            let zt = zr.as_slice().expect("contiguous row");
            let mut ar = acts.row_mut(t);
            let a = ar.as_slice_mut().expect("contiguous row");
            for r in 0..4 * hs {
                a[r] = zt[r] + dot(&wh[r * hs..(r + 1) * hs], &h_prev);
            }
            for u in 0..hs {
                a[u] = sigmoid(a[u]);
                a[hs + u] = sigmoid(a[hs + u]);
                a[2 * hs + u] = a[2 * hs + u].tanh();
                a[3 * hs + u] = sigmoid(a[3 * hs + u]);
                let c = a[hs + u] * c_prev[u] + a[u] * a[2 * hs + u];
                let tc = c.tanh();
                c_prev[u] = c;
                h_prev[u] = a[3 * hs + u] * tc;
                cells[[t, u]] = c;
                tanh_c[[t, u]] = tc;
                hidden[[t, u]] = h_prev[u];
            }
        }
        LstmTrace {
            acts,
            cells,
            tanh_c,
            hidden,
        }
    }

    /// Backpropagates `d_hidden` (`T x H`, gradient of the loss w.r.t. each
    /// emitted hidden state) through the trace. Parameter gradients are
    /// added onto `grad`; the input gradient (`T x I`) is returned.
    pub(crate) fn backward(
        &self,
        xs: ArrayView2<'_, f64>,
        trace: &LstmTrace,
        d_hidden: ArrayView2<'_, f64>,
        grad: &mut LstmParams,
    ) -> Array2<f64> {
        let t_len = xs.nrows();
        let hs = self.hidden_size();
        let wh = self.wh.as_slice().expect("standard layout");
        let mut dz = Array2::<f64>::zeros((t_len, 4 * hs));
        let mut dh_next = vec![0.0; hs];
        let mut dc_next = vec![0.0; hs];
        let mut dh = vec![0.0; hs];
        for t in (0..t_len).rev() {
            let a = trace.acts.row(t);
            let a = a.as_slice().expect("contiguous row");
            let mut dzr = dz.row_mut(t);
            let d = dzr.as_slice_mut().expect("contiguous row");
            for u in 0..hs {
                dh[u] = d_hidden[[t, u]] + dh_next[u];
                let (i, f, g, o) = (a[u], a[hs + u], a[2 * hs + u], a[3 * hs + u]);
                let tc = trace.tanh_c[[t, u]];
                let c_prev = if t > 0 { trace.cells[[t - 1, u]] } else { 0.0 };
                let d_o = dh[u] * tc;
                let dc = dh[u] * o * (1.0 - tc * tc) + dc_next[u];
                d[u] = dc * g * i * (1.0 - i);
                d[hs + u] = dc * c_prev * f * (1.0 - f);
                d[2 * hs + u] = dc * i * (1.0 - g * g);
                d[3 * hs + u] = d_o * o * (1.0 - o);
                dc_next[u] = dc * f;
            }
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            if t > 0 {
                for r in 0..4 * hs {
                    if d[r] != 0.0 {
                        axpy(d[r], &wh[r * hs..(r + 1) * hs], &mut dh_next);
                    }
                }
            }
        }
        general_mat_mul(1.0, &dz.t(), &xs, 1.0, &mut grad.wx);
        if t_len > 1 {
            let dz_tail = dz.slice(s![1.., ..]);
            let h_head = trace.hidden.slice(s![..t_len - 1, ..]);
            general_mat_mul(1.0, &dz_tail.t(), &h_head, 1.0, &mut grad.wh);
        }
        grad.b += &dz.sum_axis(Axis(0));
        dz.dot(&self.wx)
    }
}

/// Per-step activations kept from the forward pass.
#[derive(Debug, Clone)]
pub(crate) struct LstmTrace {
    /// Gate activations `[i, f, g, o]`, `T x 4H`.
    pub acts: Array2<f64>,
    pub cells: Array2<f64>,
    pub tanh_c: Array2<f64>,
    /// Emitted hidden states, `T x H`.
    pub hidden: Array2<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_network_emits_zero() {
        let p = LstmParams::zeros(3, 4);
        let (h, c) = p.step(&[1.0, -2.0, 5.0], &[0.0; 4], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn saturated_forget_gate_preserves_cell() {
        let hs = 3;
        let mut p = LstmParams::zeros(2, hs);
        // forget gate -> 1, input gate -> 0
        p.b.slice_mut(s![hs..2 * hs]).fill(50.0);
        p.b.slice_mut(s![0..hs]).fill(-50.0);
        let mut h = vec![0.0; hs];
        let mut c = vec![0.7, -0.2, 0.4];
        for _ in 0..5 {
            let (hn, cn) = p.step(&[3.0, -1.0], &h, &c).unwrap();
            h = hn;
            c = cn;
        }
        for (a, b) in c.iter().zip([0.7, -0.2, 0.4]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let p = LstmParams::zeros(2, 3);
        assert!(matches!(
            p.step(&[1.0], &[0.0; 3], &[0.0; 3]),
            Err(RnnError::Dimension(_))
        ));
    }

    #[test]
    fn batched_forward_matches_stepwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = LstmParams::random(5, 6, 0.3, 1.0, &mut rng);
        let xs = Array2::from_shape_fn((7, 5), |(t, k)| ((t * 5 + k) as f64 * 0.37).sin());
        let trace = p.forward(xs.view());
        let mut h = vec![0.0; 6];
        let mut c = vec![0.0; 6];
        for t in 0..7 {
            let (hn, cn) = p.step(xs.row(t).as_slice().unwrap(), &h, &c).unwrap();
            h = hn;
            c = cn;
            for u in 0..6 {
                assert!((trace.hidden[[t, u]] - h[u]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn dot_handles_remainders() {
        let a: Vec<f64> = (0..19).map(f64::from).collect();
        let b: Vec<f64> = (0..19).map(|i| (i as f64) * 0.5).collect();
        let expect: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - expect).abs() < 1e-9);
    }
}
