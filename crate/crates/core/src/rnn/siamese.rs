use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::blstm::BlstmParams;
use super::lstm::sigmoid;
use super::RnnError;
use crate::signal::{TimeFunctionSet, NUM_CHANNELS};

/// Logit magnitude beyond which the reported score is held, keeping it
/// strictly inside (0, 1) in double precision.
const SCORE_LOGIT_LIMIT: f64 = 30.0;

/// Examples folded together before the ordered reduction. Fixed so the
/// summation order does not depend on the thread count.
const REDUCE_CHUNK: usize = 4;

/// Layer sizes. Block counts are per direction, so the branch emits
/// `2*branch` values per step, the merge layer reads `4*branch` (both
/// branches) and the head reads `2*top`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiameseArch {
    pub input: usize,
    pub branch: usize,
    pub merge: usize,
    pub top: usize,
}

impl SiameseArch {
    /// 42 / 84 / 168 memory blocks over the 21 time functions.
    pub fn standard() -> Self {
        SiameseArch {
            input: NUM_CHANNELS,
            branch: 42,
            merge: 84,
            top: 168,
        }
    }

    pub fn reduced(input: usize, branch: usize, merge: usize, top: usize) -> Self {
        SiameseArch {
            input,
            branch,
            merge,
            top,
        }
    }

    pub fn parameter_count(&self) -> usize {
        let layer = |i: usize, h: usize| 2 * 4 * h * (i + h + 1);
        layer(self.input, self.branch)
            + layer(4 * self.branch, self.merge)
            + layer(2 * self.merge, self.top)
            + 2 * self.top
            + 1
    }
}

/// Every trainable tensor of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiameseParams {
    /// Applied to both inputs.
    pub branch: BlstmParams,
    pub merge: BlstmParams,
    pub top: BlstmParams,
    pub head_w: Array1<f64>,
    /// Single-element bias.
    pub head_b: Array1<f64>,
}

impl SiameseParams {
    pub fn zeros(arch: &SiameseArch) -> Self {
        SiameseParams {
            branch: BlstmParams::zeros(arch.input, arch.branch),
            merge: BlstmParams::zeros(4 * arch.branch, arch.merge),
            top: BlstmParams::zeros(2 * arch.merge, arch.top),
            head_w: Array1::zeros(2 * arch.top),
            head_b: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        SiameseParams::zeros(&self.arch())
    }

    pub fn arch(&self) -> SiameseArch {
        SiameseArch {
            input: self.branch.input_size(),
            branch: self.branch.blocks(),
            merge: self.merge.blocks(),
            top: self.top.blocks(),
        }
    }

    /// Tensor names in storage order.
    pub fn tensor_names() -> Vec<String> {
        let mut names = Vec::new();
        for layer in ["branch", "merge", "top"] {
            for dir in ["fwd", "bwd"] {
                for t in ["wx", "wh", "b"] {
                    names.push(format!("{layer}.{dir}.{t}"));
                }
            }
        }
        names.push("head.w".into());
        names.push("head.b".into());
        names
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(20);
        for layer in [&self.branch, &self.merge, &self.top] {
            for dir in [&layer.fwd, &layer.bwd] {
                out.push(dir.wx.as_slice().expect("standard layout"));
                out.push(dir.wh.as_slice().expect("standard layout"));
                out.push(dir.b.as_slice().expect("standard layout"));
            }
        }
        out.push(self.head_w.as_slice().expect("standard layout"));
        out.push(self.head_b.as_slice().expect("standard layout"));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(20);
        for layer in [&mut self.branch, &mut self.merge, &mut self.top] {
            let BlstmParams { fwd, bwd } = layer;
            for dir in [fwd, bwd] {
                out.push(dir.wx.as_slice_mut().expect("standard layout"));
                out.push(dir.wh.as_slice_mut().expect("standard layout"));
                out.push(dir.b.as_slice_mut().expect("standard layout"));
            }
        }
        out.push(self.head_w.as_slice_mut().expect("standard layout"));
        out.push(self.head_b.as_slice_mut().expect("standard layout"));
        out
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &SiameseParams, scale: f64) {
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn l2_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .map(|t| t.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }
}

/// Which of the two inputs a branch application reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Enrolled,
    Test,
}

/// The Siamese scorer: shared bidirectional branch, merge and top layers,
/// and a sigmoid head on the top layer's final representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiameseModel {
    pub arch: SiameseArch,
    pub seed: u64,
    pub params: SiameseParams,
    pub epochs_trained: usize,
}

/// Two pre-paired sequences of equal length with a genuine (1) or impostor
/// (0) label. The enrolled sample goes in `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairExample {
    pub a: TimeFunctionSet,
    pub b: TimeFunctionSet,
    pub label: f64,
}

impl PairExample {
    pub fn new(a: TimeFunctionSet, b: TimeFunctionSet, genuine: bool) -> Result<Self, RnnError> {
        if a.len() != b.len() {
            return Err(RnnError::LengthMismatch {
                a: a.len(),
                b: b.len(),
            });
        }
        Ok(PairExample {
            a,
            b,
            label: if genuine { 1.0 } else { 0.0 },
        })
    }
}

/// A pair converted to row-major `K x C` matrices.
#[derive(Debug, Clone)]
pub(crate) struct MatrixPair {
    pub a: Array2<f64>,
    pub b: Array2<f64>,
    pub label: f64,
}

impl MatrixPair {
    pub fn from_example(p: &PairExample) -> Result<Self, RnnError> {
        if p.a.len() != p.b.len() {
            return Err(RnnError::LengthMismatch {
                a: p.a.len(),
                b: p.b.len(),
            });
        }
        if !(p.label == 0.0 || p.label == 1.0) {
            return Err(RnnError::Dimension(format!(
                "label {} not in {{0,1}}",
                p.label
            )));
        }
        Ok(MatrixPair {
            a: to_matrix(&p.a),
            b: to_matrix(&p.b),
            label: p.label,
        })
    }
}

/// Channel-major set to a `K x C` matrix.
pub fn to_matrix(tf: &TimeFunctionSet) -> Array2<f64> {
    Array2::from_shape_fn((tf.len(), tf.num_channels()), |(t, c)| tf.value(c, t))
}

/// Numerically stable binary cross-entropy on a logit.
pub fn bce_with_logit(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

impl SiameseModel {
    /// Gaussian initialization (`init_std`) with forget-gate biases at 1.
    pub fn new(arch: SiameseArch, seed: u64, init_std: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let branch = BlstmParams::random(arch.input, arch.branch, init_std, 1.0, &mut rng);
        let merge = BlstmParams::random(4 * arch.branch, arch.merge, init_std, 1.0, &mut rng);
        let top = BlstmParams::random(2 * arch.merge, arch.top, init_std, 1.0, &mut rng);
        let normal = Normal::new(0.0, init_std).expect("positive std");
        let head_w = Array1::from_shape_fn(2 * arch.top, |_| normal.sample(&mut rng));
        let head_b = Array1::from_elem(1, normal.sample(&mut rng));
        SiameseModel {
            arch,
            seed,
            params: SiameseParams {
                branch,
                merge,
                top,
                head_w,
                head_b,
            },
            epochs_trained: 0,
        }
    }

    /// The parameters a branch reads. Both sides resolve to the same tensor.
    pub fn branch_for(&self, _side: Side) -> &BlstmParams {
        &self.params.branch
    }

    /// Score in (0, 1) for an enrolled/test pair of equal length.
    pub fn score(
        &self,
        enrolled: &TimeFunctionSet,
        test: &TimeFunctionSet,
    ) -> Result<f64, RnnError> {
        if enrolled.len() != test.len() {
            return Err(RnnError::LengthMismatch {
                a: enrolled.len(),
                b: test.len(),
            });
        }
        let z = self.logit(to_matrix(enrolled).view(), to_matrix(test).view())?;
        Ok(sigmoid(z.clamp(-SCORE_LOGIT_LIMIT, SCORE_LOGIT_LIMIT)))
    }

    pub(crate) fn logit(
        &self,
        a: ArrayView2<'_, f64>,
        b: ArrayView2<'_, f64>,
    ) -> Result<f64, RnnError> {
        Ok(forward_pass(&self.params, a, b)?.logit)
    }

    pub(crate) fn score_matrices(&self, pair: &MatrixPair) -> Result<f64, RnnError> {
        let z = self.logit(pair.a.view(), pair.b.view())?;
        Ok(sigmoid(z.clamp(-SCORE_LOGIT_LIMIT, SCORE_LOGIT_LIMIT)))
    }
}

struct ForwardPass {
    logit: f64,
    readout: Array1<f64>,
    br_a: super::blstm::BlstmTrace,
    br_b: super::blstm::BlstmTrace,
    merge: super::blstm::BlstmTrace,
    top: super::blstm::BlstmTrace,
    steps: usize,
}

fn forward_pass(
    params: &SiameseParams,
    a: ArrayView2<'_, f64>,
    b: ArrayView2<'_, f64>,
) -> Result<ForwardPass, RnnError> {
    if a.nrows() != b.nrows() {
        return Err(RnnError::LengthMismatch {
            a: a.nrows(),
            b: b.nrows(),
        });
    }
    let (out_a, br_a) = params.branch.forward_traced(a)?;
    let (out_b, br_b) = params.branch.forward_traced(b)?;
    let joined = concatenate(Axis(1), &[out_a.view(), out_b.view()]).expect("equal lengths");
    let (out_m, merge) = params.merge.forward_traced(joined.view())?;
    let (out_t, top) = params.top.forward_traced(out_m.view())?;
    let k = out_t.nrows();
    let h = params.top.blocks();
    // last forward state, first backward state
    let readout = concatenate(
        Axis(0),
        &[out_t.slice(s![k - 1, ..h]), out_t.slice(s![0, h..])],
    )
    .expect("head width");
    let logit = readout.dot(&params.head_w) + params.head_b[0];
    Ok(ForwardPass {
        logit,
        readout,
        br_a,
        br_b,
        merge,
        top,
        steps: k,
    })
}

/// Loss of one example; gradients scaled by `weight` are added to `grad`.
fn backprop(
    params: &SiameseParams,
    pair: &MatrixPair,
    weight: f64,
    grad: &mut SiameseParams,
) -> Result<f64, RnnError> {
    let fp = forward_pass(params, pair.a.view(), pair.b.view())?;
    let loss = bce_with_logit(fp.logit, pair.label);
    let d_logit = weight * (sigmoid(fp.logit) - pair.label);

    grad.head_b[0] += d_logit;
    grad.head_w.scaled_add(d_logit, &fp.readout);
    let h3 = params.top.blocks();
    let k = fp.steps;
    let mut d_top = Array2::<f64>::zeros((k, 2 * h3));
    d_top
        .slice_mut(s![k - 1, ..h3])
        .scaled_add(d_logit, &params.head_w.slice(s![..h3]));
    d_top
        .slice_mut(s![0, h3..])
        .scaled_add(d_logit, &params.head_w.slice(s![h3..]));

    let d_merge_out = params.top.backward(&fp.top, d_top.view(), &mut grad.top);
    let d_joined = params
        .merge
        .backward(&fp.merge, d_merge_out.view(), &mut grad.merge);
    let w1 = params.branch.output_size();
    params
        .branch
        .backward(&fp.br_a, d_joined.slice(s![.., ..w1]), &mut grad.branch);
    params
        .branch
        .backward(&fp.br_b, d_joined.slice(s![.., w1..]), &mut grad.branch);
    Ok(loss)
}

/// Mean binary cross-entropy over the batch and its exact gradient.
pub(crate) fn batch_loss_and_gradients(
    params: &SiameseParams,
    batch: &[&MatrixPair],
) -> Result<(f64, SiameseParams), RnnError> {
    if batch.is_empty() {
        return Err(RnnError::EmptyBatch);
    }
    let weight = 1.0 / batch.len() as f64;
    let partials: Vec<Result<(f64, SiameseParams), RnnError>> = batch
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut g = params.zeros_like();
            let mut loss = 0.0;
            for pair in chunk {
                loss += backprop(params, pair, weight, &mut g)?;
            }
            Ok((loss, g))
        })
        .collect();
    let mut total = 0.0;
    let mut grad: Option<SiameseParams> = None;
    for part in partials {
        let (l, g) = part?;
        total += l;
        match grad.as_mut() {
            None => grad = Some(g),
            Some(acc) => acc.add_scaled(&g, 1.0),
        }
    }
    Ok((total * weight, grad.expect("nonempty batch")))
}

/// Mean loss without gradients.
pub(crate) fn batch_loss(params: &SiameseParams, batch: &[MatrixPair]) -> Result<f64, RnnError> {
    if batch.is_empty() {
        return Err(RnnError::EmptyBatch);
    }
    let losses: Vec<Result<f64, RnnError>> = batch
        .par_iter()
        .map(|p| {
            Ok(bce_with_logit(
                forward_pass(params, p.a.view(), p.b.view())?.logit,
                p.label,
            ))
        })
        .collect();
    let mut total = 0.0;
    for l in losses {
        total += l?;
    }
    Ok(total / batch.len() as f64)
}

/// Score of a pair under `model`.
pub fn siamese_forward(model: &SiameseModel, pair: &PairExample) -> Result<f64, RnnError> {
    model.score(&pair.a, &pair.b)
}

/// Mean BCE loss of the batch and its gradient for every parameter.
pub fn loss_and_gradients(
    model: &SiameseModel,
    batch: &[PairExample],
) -> Result<(f64, SiameseParams), RnnError> {
    let mats = batch
        .iter()
        .map(MatrixPair::from_example)
        .collect::<Result<Vec<_>, _>>()?;
    let refs: Vec<&MatrixPair> = mats.iter().collect();
    batch_loss_and_gradients(&model.params, &refs)
}

/// Mean BCE loss with arbitrary parameters; used for finite differences.
pub fn loss_with_params(params: &SiameseParams, batch: &[PairExample]) -> Result<f64, RnnError> {
    let mats = batch
        .iter()
        .map(MatrixPair::from_example)
        .collect::<Result<Vec<_>, _>>()?;
    batch_loss(params, &mats)
}
