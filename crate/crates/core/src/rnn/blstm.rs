use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{LstmParams, LstmTrace};
use super::RnnError;

/// Bidirectional layer. Output row `t` is `[forward h_t, backward h_t]`,
/// where the backward direction reads the sequence from the end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlstmParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
}

pub(crate) struct BlstmTrace {
    input: Array2<f64>,
    reversed: Array2<f64>,
    fwd: LstmTrace,
    bwd: LstmTrace,
}

fn reversed_rows(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.slice(s![..;-1, ..]).to_owned()
}

impl BlstmParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        BlstmParams {
            fwd: LstmParams::zeros(input, hidden),
            bwd: LstmParams::zeros(input, hidden),
        }
    }

    pub fn random<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        std: f64,
        forget_bias: f64,
        rng: &mut R,
    ) -> Self {
        let fwd = LstmParams::random(input, hidden, std, forget_bias, rng);
        let bwd = LstmParams::random(input, hidden, std, forget_bias, rng);
        BlstmParams { fwd, bwd }
    }

    pub fn input_size(&self) -> usize {
        self.fwd.input_size()
    }

    /// Memory blocks per direction.
    pub fn blocks(&self) -> usize {
        self.fwd.hidden_size()
    }

    pub fn output_size(&self) -> usize {
        2 * self.blocks()
    }

    /// Forward pass over `xs` (`T x I`), returning `T x 2H`.
    pub fn forward(&self, xs: ArrayView2<'_, f64>) -> Result<Array2<f64>, RnnError> {
        Ok(self.forward_traced(xs)?.0)
    }

    pub(crate) fn forward_traced(
        &self,
        xs: ArrayView2<'_, f64>,
    ) -> Result<(Array2<f64>, BlstmTrace), RnnError> {
        if xs.nrows() == 0 {
            return Err(RnnError::EmptySequence);
        }
        if xs.ncols() != self.input_size() {
            return Err(RnnError::Dimension(format!(
                "layer expects width {}, got {}",
                self.input_size(),
                xs.ncols()
            )));
        }
        let input = xs.to_owned();
        let reversed = reversed_rows(xs);
        let fwd = self.fwd.forward(input.view());
        let bwd = self.bwd.forward(reversed.view());
        let out = concatenate(
            Axis(1),
            &[fwd.hidden.view(), bwd.hidden.slice(s![..;-1, ..])],
        )
        .expect("matching row counts");
        Ok((
            out,
            BlstmTrace {
                input,
                reversed,
                fwd,
                bwd,
            },
        ))
    }

    /// Returns the gradient w.r.t. the layer input, accumulating parameter
    /// gradients into `grad`.
    pub(crate) fn backward(
        &self,
        trace: &BlstmTrace,
        d_out: ArrayView2<'_, f64>,
        grad: &mut BlstmParams,
    ) -> Array2<f64> {
        let h = self.blocks();
        let d_fwd = d_out.slice(s![.., ..h]);
        let d_bwd_rev = d_out.slice(s![..;-1, h..]).to_owned();
        let mut dx = self
            .fwd
            .backward(trace.input.view(), &trace.fwd, d_fwd, &mut grad.fwd);
        let dx_rev = self.bwd.backward(
            trace.reversed.view(),
            &trace.bwd,
            d_bwd_rev.view(),
            &mut grad.bwd,
        );
        dx += &dx_rev.slice(s![..;-1, ..]);
        dx
    }
}
