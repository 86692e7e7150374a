//! Dynamic time warping with warping-path recovery.
//!
//! The accumulated cost follows
//!
//! ```text
//! g(0,0) = d(0,0) * w_diag
//! g(n,m) = min( g(n-1,m-1) + d(n,m) * w_diag,
//!               g(n-1,m)   + d(n,m) * w_vert,
//!               g(n,m-1)   + d(n,m) * w_horiz )
//! ```
//!
//! and the normalized distance divides `g(N-1,M-1)` by the sum of the step
//! weights along the recovered path. Ties in the minimum prefer the diagonal,
//! then `(n-1,m)`, then `(n,m-1)`. Indices are zero-based throughout.
//!
//! SW-DTW replaces the cell cost by a weighted average of the costs along
//! the diagonal neighbourhood `d(n+j, m+j)`, `j in [-L, L]`, with indices
//! clamped to the sequence ends.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::TimeFunctionSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error("invalid input: empty sequence")]
    EmptySequence,
    #[error("channel-count mismatch: {a} vs {b}")]
    ChannelMismatch { a: usize, b: usize },
    #[error("invalid DTW configuration: {0}")]
    InvalidConfig(String),
    #[error("Sakoe-Chiba band of half-width {band} does not connect (0,0) to ({n},{m})")]
    BandTooNarrow { band: usize, n: usize, m: usize },
    #[error("path index ({n},{m}) out of range for lengths {len_a} and {len_b}")]
    PathOutOfRange {
        n: usize,
        m: usize,
        len_a: usize,
        len_b: usize,
    },
    #[error("path is not a legal warping path for lengths {len_a} and {len_b}")]
    IllegalPath { len_a: usize, len_b: usize },
}

/// Per-step weights `w(k)` for the three allowed transitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepWeights {
    /// (0, +1)
    pub horizontal: f64,
    /// (+1, +1), also used for the first cell
    pub diagonal: f64,
    /// (+1, 0)
    pub vertical: f64,
}

impl Default for StepWeights {
    fn default() -> Self {
        StepWeights {
            horizontal: 1.0,
            diagonal: 1.0,
            vertical: 1.0,
        }
    }
}

impl StepWeights {
    pub fn is_symmetric(&self) -> bool {
        self.horizontal == self.vertical
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwConfig {
    pub step_weights: StepWeights,
    /// SW-DTW half-width L.
    pub window_halfwidth: usize,
    /// `2L+1` nonnegative weights for offsets `-L..=L`, summing to one.
    pub neighbor_weights: Vec<f64>,
    /// Optional Sakoe-Chiba band half-width, measured along the longer axis.
    pub band: Option<usize>,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig::with_window(2)
    }
}

impl DtwConfig {
    /// Unit step weights, no window, no band.
    pub fn plain() -> Self {
        DtwConfig::with_window(0)
    }

    /// Triangular neighbour weights `(L+1-|j|)`, normalized.
    pub fn with_window(halfwidth: usize) -> Self {
        DtwConfig {
            step_weights: StepWeights::default(),
            window_halfwidth: halfwidth,
            neighbor_weights: triangular_weights(halfwidth),
            band: None,
        }
    }

    pub fn validate(&self) -> Result<(), AlignError> {
        let w = &self.step_weights;
        if !(w.horizontal > 0.0 && w.diagonal > 0.0 && w.vertical > 0.0)
            || !(w.horizontal.is_finite() && w.diagonal.is_finite() && w.vertical.is_finite())
        {
            return Err(AlignError::InvalidConfig(
                "step weights must be positive and finite".into(),
            ));
        }
        if self.neighbor_weights.len() != 2 * self.window_halfwidth + 1 {
            return Err(AlignError::InvalidConfig(format!(
                "expected {} neighbour weights, got {}",
                2 * self.window_halfwidth + 1,
                self.neighbor_weights.len()
            )));
        }
        if self
            .neighbor_weights
            .iter()
            .any(|w| !(*w >= 0.0) || !w.is_finite())
        {
            return Err(AlignError::InvalidConfig(
                "neighbour weights must be nonnegative".into(),
            ));
        }
        let sum: f64 = self.neighbor_weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(AlignError::InvalidConfig(format!(
                "neighbour weights sum to {sum}, expected 1"
            )));
        }
        Ok(())
    }
}

pub fn triangular_weights(halfwidth: usize) -> Vec<f64> {
    let l = halfwidth as f64;
    let raw: Vec<f64> = (0..=2 * halfwidth)
        .map(|k| l + 1.0 - (k as f64 - l).abs())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Warping path `c_1..c_K` with its cost bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentPath {
    /// Zero-based `(n, m)` correspondences, from `(0,0)` to `(N-1,M-1)`.
    pub pairs: Vec<(usize, usize)>,
    /// `g_K`.
    pub accumulated: f64,
    /// `sum_k w(k)`.
    pub weight_sum: f64,
    /// `g_K / sum_k w(k)`.
    pub normalized_distance: f64,
}

impl AlignmentPath {
    /// Path length K.
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Boundary conditions plus the three-transition step pattern.
    pub fn is_legal(&self, len_a: usize, len_b: usize) -> bool {
        let (Some(&first), Some(&last)) = (self.pairs.first(), self.pairs.last()) else {
            return false;
        };
        if first != (0, 0) || last != (len_a.wrapping_sub(1), len_b.wrapping_sub(1)) {
            return false;
        }
        self.pairs.windows(2).all(|w| {
            let di = w[1].0 as isize - w[0].0 as isize;
            let dj = w[1].1 as isize - w[0].1 as isize;
            matches!((di, dj), (0, 1) | (1, 1) | (1, 0))
        })
    }
}

/// Dense row-major cost matrix, `rows x cols`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        CostMatrix { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        CostMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Squared-difference cost between two scalar sequences.
    pub fn squared(a: &[f64], b: &[f64]) -> Self {
        CostMatrix::from_fn(a.len(), b.len(), |i, j| (a[i] - b[j]).powi(2))
    }

    /// Squared Euclidean cost summed over channels.
    pub fn squared_multichannel(a: &TimeFunctionSet, b: &TimeFunctionSet) -> Self {
        let c = a.num_channels();
        let (n, m) = (a.len(), b.len());
        // Sample-major copies keep the inner loop contiguous.
        let mut am = vec![0.0; n * c];
        let mut bm = vec![0.0; m * c];
        for ch in 0..c {
            for (i, v) in a.channel(ch).iter().enumerate() {
                am[i * c + ch] = *v;
            }
            for (j, v) in b.channel(ch).iter().enumerate() {
                bm[j * c + ch] = *v;
            }
        }
        CostMatrix::from_fn(n, m, |i, j| {
            let ra = &am[i * c..(i + 1) * c];
            let rb = &bm[j * c..(j + 1) * c];
            ra.iter().zip(rb).map(|(x, y)| (x - y) * (x - y)).sum()
        })
    }

    /// Windowed cost `sum_j w_j * cost(n+j, m+j)` with clamped indices.
    pub fn windowed(&self, weights: &[f64]) -> Self {
        let half = (weights.len() as isize - 1) / 2;
        let (rows, cols) = (self.rows as isize, self.cols as isize);
        CostMatrix::from_fn(self.rows, self.cols, |i, j| {
            weights
                .iter()
                .enumerate()
                .map(|(k, w)| {
                    let off = k as isize - half;
                    let ii = (i as isize + off).clamp(0, rows - 1) as usize;
                    let jj = (j as isize + off).clamp(0, cols - 1) as usize;
                    w * self.get(ii, jj)
                })
                .sum()
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Step {
    Start,
    Diagonal,
    Vertical,
    Horizontal,
}

fn in_band(i: usize, j: usize, n: usize, m: usize, band: Option<usize>) -> bool {
    let Some(b) = band else { return true };
    if n == 1 || m == 1 {
        return true;
    }
    let lhs = (i * (m - 1)) as i128 - (j * (n - 1)) as i128;
    lhs.unsigned_abs() <= (b * (n - 1).max(m - 1)) as u128
}

/// Relative margin below which two accumulated costs count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// DTW over a precomputed cost matrix; the shared core of every variant.
pub fn dtw_from_cost(cost: &CostMatrix, cfg: &DtwConfig) -> Result<AlignmentPath, AlignError> {
    cfg.validate()?;
    let (n, m) = (cost.rows(), cost.cols());
    if n == 0 || m == 0 {
        return Err(AlignError::EmptySequence);
    }
    let w = cfg.step_weights;
    let mut g = vec![f64::INFINITY; n * m];
    let mut from = vec![Step::Start; n * m];
    g[0] = cost.get(0, 0) * w.diagonal;
    for i in 0..n {
        for j in 0..m {
            if (i == 0 && j == 0) || !in_band(i, j, n, m, cfg.band) {
                continue;
            }
            let c = cost.get(i, j);
            let mut best = f64::INFINITY;
            let mut step = Step::Start;
            // Candidates in preference order; a later one must win by more
            // than rounding noise, so exact ties that accumulated in a
            // different order still resolve by preference.
            let mut offer = |v: f64, s: Step| {
                // out-of-band predecessors leave `best` infinite
                let margin = if best.is_finite() {
                    TIE_TOLERANCE * best
                } else {
                    0.0
                };
                if step == Step::Start || v < best - margin {
                    best = v;
                    step = s;
                }
            };
            if i > 0 && j > 0 {
                offer(g[(i - 1) * m + j - 1] + c * w.diagonal, Step::Diagonal);
            }
            if i > 0 {
                offer(g[(i - 1) * m + j] + c * w.vertical, Step::Vertical);
            }
            if j > 0 {
                offer(g[i * m + j - 1] + c * w.horizontal, Step::Horizontal);
            }
            g[i * m + j] = best;
            from[i * m + j] = step;
        }
    }
    let accumulated = g[n * m - 1];
    if !accumulated.is_finite() {
        return Err(AlignError::BandTooNarrow {
            band: cfg.band.unwrap_or(0),
            n,
            m,
        });
    }

    let mut pairs = Vec::with_capacity(n + m);
    let mut weight_sum = 0.0;
    let (mut i, mut j) = (n - 1, m - 1);
    loop {
        pairs.push((i, j));
        match from[i * m + j] {
            Step::Start => {
                weight_sum += w.diagonal;
                break;
            }
            Step::Diagonal => {
                weight_sum += w.diagonal;
                i -= 1;
                j -= 1;
            }
            Step::Vertical => {
                weight_sum += w.vertical;
                i -= 1;
            }
            Step::Horizontal => {
                weight_sum += w.horizontal;
                j -= 1;
            }
        }
    }
    pairs.reverse();
    let path = AlignmentPath {
        pairs,
        accumulated,
        weight_sum,
        normalized_distance: accumulated / weight_sum,
    };
    debug_assert!(path.is_legal(n, m), "illegal warping path");
    Ok(path)
}

/// Plain DTW between scalar sequences with `d(a,b) = (a-b)^2`. The SW-DTW
/// window in `cfg` is ignored.
pub fn dtw(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<AlignmentPath, AlignError> {
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::EmptySequence);
    }
    dtw_from_cost(&CostMatrix::squared(a, b), cfg)
}

/// SW-DTW between scalar sequences using the window in `cfg`.
pub fn sw_dtw(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<AlignmentPath, AlignError> {
    if a.is_empty() || b.is_empty() {
        return Err(AlignError::EmptySequence);
    }
    cfg.validate()?;
    let base = CostMatrix::squared(a, b);
    if cfg.window_halfwidth == 0 {
        return dtw_from_cost(&base, cfg);
    }
    dtw_from_cost(&base.windowed(&cfg.neighbor_weights), cfg)
}

fn check_channels(a: &TimeFunctionSet, b: &TimeFunctionSet) -> Result<(), AlignError> {
    if a.num_channels() != b.num_channels() {
        return Err(AlignError::ChannelMismatch {
            a: a.num_channels(),
            b: b.num_channels(),
        });
    }
    Ok(())
}

/// One shared path for all channels, cell cost summed over channels.
pub fn dtw_multichannel(
    a: &TimeFunctionSet,
    b: &TimeFunctionSet,
    cfg: &DtwConfig,
) -> Result<AlignmentPath, AlignError> {
    check_channels(a, b)?;
    dtw_from_cost(&CostMatrix::squared_multichannel(a, b), cfg)
}

pub fn sw_dtw_multichannel(
    a: &TimeFunctionSet,
    b: &TimeFunctionSet,
    cfg: &DtwConfig,
) -> Result<AlignmentPath, AlignError> {
    check_channels(a, b)?;
    cfg.validate()?;
    let base = CostMatrix::squared_multichannel(a, b);
    if cfg.window_halfwidth == 0 {
        return dtw_from_cost(&base, cfg);
    }
    dtw_from_cost(&base.windowed(&cfg.neighbor_weights), cfg)
}

/// Which DTW flavour a batch helper runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DtwKind {
    Plain,
    SlidingWindow,
}

/// Aligns many pairs in parallel; output order matches input order.
pub fn align_batch(
    pairs: &[(&TimeFunctionSet, &TimeFunctionSet)],
    cfg: &DtwConfig,
    kind: DtwKind,
) -> Vec<Result<AlignmentPath, AlignError>> {
    pairs
        .par_iter()
        .map(|(a, b)| match kind {
            DtwKind::Plain => dtw_multichannel(a, b, cfg),
            DtwKind::SlidingWindow => sw_dtw_multichannel(a, b, cfg),
        })
        .collect()
}

/// Gathers both sets along the path so that output sample `k` of A is
/// `A[n_k]` and of B is `B[m_k]`. Both outputs have length K.
pub fn apply_path(
    a: &TimeFunctionSet,
    b: &TimeFunctionSet,
    path: &AlignmentPath,
) -> Result<(TimeFunctionSet, TimeFunctionSet), AlignError> {
    let (len_a, len_b) = (a.len(), b.len());
    if let Some(&(n, m)) = path.pairs.iter().find(|(n, m)| *n >= len_a || *m >= len_b) {
        return Err(AlignError::PathOutOfRange { n, m, len_a, len_b });
    }
    if !path.is_legal(len_a, len_b) {
        return Err(AlignError::IllegalPath { len_a, len_b });
    }
    Ok((
        a.gather(path.pairs.iter().map(|p| p.0)),
        b.gather(path.pairs.iter().map(|p| p.1)),
    ))
}
