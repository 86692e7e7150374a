//! Touch strokes and the 21 time functions derived from them.
//!
//! Channel order (1-based, as exposed by [`CHANNEL_NAMES`]):
//!
//! | # | function |
//! |---|----------|
//! | 1-2 | x, y positions, mean-centered and scaled by their joint std |
//! | 3 | path-tangent angle `theta = atan2(dy, dx)` (unwrapped) |
//! | 4 | velocity magnitude `v = |(dx, dy)|` |
//! | 5 | log curvature radius `rho = ln(v / |dtheta|)` |
//! | 6 | total acceleration `a = sqrt(dv^2 + (v * dtheta)^2)` |
//! | 7-12 | first differences of 1-6 |
//! | 13-14 | second differences of 1-2 |
//! | 15 | min/max velocity ratio over a centered 5-sample window |
//! | 16-17 | angle of consecutive samples `alpha` (unwrapped) and its difference |
//! | 18-19 | `sin(alpha)`, `cos(alpha)` |
//! | 20-21 | path length over bounding-box width, 5- and 7-sample windows |
//!
//! Differences are taken in sample units on the resampled grid: central in
//! the interior, one-sided at the ends. Any denominator whose magnitude drops
//! below [`ExtractConfig::eps`] is clamped to it, and so is the velocity
//! inside the logarithm of channel 5, so every channel stays finite.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of time functions produced by [`extract_time_functions`].
pub const NUM_CHANNELS: usize = 21;

/// Shortest concatenated sequence accepted by the extractor (channel 21
/// looks three samples to either side).
pub const MIN_EXTRACT_LEN: usize = 7;

/// Minimum total number of points a valid sample carries.
pub const MIN_SAMPLE_POINTS: usize = 5;

pub const DEFAULT_RATE_HZ: f64 = 100.0;

pub const CHANNEL_NAMES: [&str; NUM_CHANNELS] = [
    "x",
    "y",
    "theta",
    "v",
    "rho",
    "a",
    "dx",
    "dy",
    "dtheta",
    "dv",
    "drho",
    "da",
    "ddx",
    "ddy",
    "v_ratio",
    "alpha",
    "dalpha",
    "sin_alpha",
    "cos_alpha",
    "r5",
    "r7",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SignalError {
    #[error("malformed sample: {0}")]
    Malformed(String),
    #[error("malformed sample: stroke {index} has zero time span")]
    DegenerateStroke { index: usize },
    #[error("sequence too short for time-function extraction: {got} samples, need {needed}")]
    InsufficientLength { needed: usize, got: usize },
    #[error("invalid time-function set: {0}")]
    InvalidSet(String),
}

/// One touch event: device pixels and milliseconds since capture start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Point { x, y, t }
    }
}

impl From<[f64; 3]> for Point {
    fn from(v: [f64; 3]) -> Self {
        Point::new(v[0], v[1], v[2])
    }
}

impl From<Point> for [f64; 3] {
    fn from(p: Point) -> Self {
        [p.x, p.y, p.t]
    }
}

pub type Stroke = Vec<Point>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleSource {
    Imported,
    Synthetic,
    Live,
}

/// A single drawn character with its identity metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrokeSample {
    pub user_id: String,
    pub session: u32,
    pub label: String,
    /// 1-based index among the (user, label, session) repetitions.
    #[serde(default = "one")]
    pub repetition: u32,
    pub source: SampleSource,
    pub strokes: Vec<Stroke>,
}

fn one() -> u32 {
    1
}

impl StrokeSample {
    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Vec::len).sum()
    }

    /// Checks the structural invariants: at least two points per stroke,
    /// strictly increasing timestamps inside a stroke, no stroke starting
    /// before the previous one ended, enough points overall and finite
    /// values.
    pub fn validate(&self) -> Result<(), SignalError> {
        if self.session == 0 {
            return Err(SignalError::Malformed("session index must be >= 1".into()));
        }
        if self.strokes.is_empty() {
            return Err(SignalError::Malformed("no strokes".into()));
        }
        for (i, stroke) in self.strokes.iter().enumerate() {
            if stroke.len() < 2 {
                return Err(SignalError::Malformed(format!(
                    "stroke {i} has {} point(s), need at least 2",
                    stroke.len()
                )));
            }
            if stroke
                .iter()
                .any(|p| !(p.x.is_finite() && p.y.is_finite() && p.t.is_finite()))
            {
                return Err(SignalError::Malformed(format!(
                    "stroke {i} has a non-finite value"
                )));
            }
            if stroke.windows(2).any(|w| w[1].t <= w[0].t) {
                return Err(SignalError::Malformed(format!(
                    "timestamp disorder in stroke {i}"
                )));
            }
        }
        if let Some(k) = (1..self.strokes.len())
            .find(|&k| self.strokes[k][0].t < self.strokes[k - 1].last().expect("nonempty").t)
        {
            return Err(SignalError::Malformed(format!(
                "timestamp disorder: stroke {k} starts before stroke {} ends",
                k - 1
            )));
        }
        let total = self.point_count();
        if total < MIN_SAMPLE_POINTS {
            return Err(SignalError::Malformed(format!(
                "{total} point(s) in total, need at least {MIN_SAMPLE_POINTS}"
            )));
        }
        Ok(())
    }
}

/// Resamples every stroke onto a uniform time grid of `rate` samples per
/// second by linear interpolation of x and y. Pen-ups are kept: each stroke
/// is resampled independently starting at its own first timestamp. A stroke
/// shorter than one grid step keeps just its two endpoints.
pub fn resample_uniform(sample: &StrokeSample, rate: f64) -> Result<StrokeSample, SignalError> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(SignalError::Malformed(format!(
            "invalid resample rate {rate}"
        )));
    }
    for (index, stroke) in sample.strokes.iter().enumerate() {
        if let (Some(first), Some(last)) = (stroke.first(), stroke.last()) {
            if last.t - first.t <= 0.0 && stroke.len() >= 2 {
                return Err(SignalError::DegenerateStroke { index });
            }
        }
    }
    sample.validate()?;

    let step = 1000.0 / rate;
    let strokes = sample
        .strokes
        .iter()
        .map(|stroke| resample_stroke(stroke, step))
        .collect();
    Ok(StrokeSample {
        strokes,
        ..sample.clone()
    })
}

fn resample_stroke(stroke: &[Point], step: f64) -> Stroke {
    let t0 = stroke[0].t;
    let t_end = stroke[stroke.len() - 1].t;
    let count = ((t_end - t0) / step + 1e-9).floor() as usize + 1;
    if count < 2 {
        return vec![stroke[0], stroke[stroke.len() - 1]];
    }
    let mut out = Vec::with_capacity(count);
    let mut seg = 0;
    for k in 0..count {
        let t = t0 + k as f64 * step;
        while seg + 2 < stroke.len() && stroke[seg + 1].t < t {
            seg += 1;
        }
        let (p0, p1) = (stroke[seg], stroke[seg + 1]);
        let (x, y) = if t == p0.t {
            (p0.x, p0.y)
        } else if t >= p1.t {
            (p1.x, p1.y)
        } else {
            let f = (t - p0.t) / (p1.t - p0.t);
            (p0.x + (p1.x - p0.x) * f, p0.y + (p1.y - p0.y) * f)
        };
        out.push(Point::new(x, y, t));
    }
    out
}

/// Equal-length real-valued channels describing one sample. Rows are
/// channels, columns are samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeFunctionSet {
    channels: Vec<Vec<f64>>,
}

impl TimeFunctionSet {
    /// Builds a set from raw channels, checking that all channels have the
    /// same nonzero length and only finite values.
    pub fn from_channels(channels: Vec<Vec<f64>>) -> Result<Self, SignalError> {
        let Some(first) = channels.first() else {
            return Err(SignalError::InvalidSet("no channels".into()));
        };
        let len = first.len();
        if len == 0 {
            return Err(SignalError::InvalidSet("empty channels".into()));
        }
        if let Some(c) = channels.iter().position(|c| c.len() != len) {
            return Err(SignalError::InvalidSet(format!(
                "channel {c} has length {}, expected {len}",
                channels[c].len()
            )));
        }
        if channels.iter().flatten().any(|v| !v.is_finite()) {
            return Err(SignalError::InvalidSet("non-finite value".into()));
        }
        Ok(TimeFunctionSet { channels })
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    /// Number of samples N.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Zero-based channel access.
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.channels[c]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn value(&self, c: usize, n: usize) -> f64 {
        self.channels[c][n]
    }

    /// Channel names when this is a full 21-channel set.
    pub fn channel_names(&self) -> Option<&'static [&'static str; NUM_CHANNELS]> {
        (self.num_channels() == NUM_CHANNELS).then_some(&CHANNEL_NAMES)
    }

    /// Samples gathered by index: output sample `k` is input sample `idx[k]`.
    pub(crate) fn gather(&self, idx: impl Iterator<Item = usize> + Clone) -> Self {
        let channels = self
            .channels
            .iter()
            .map(|ch| idx.clone().map(|n| ch[n]).collect())
            .collect();
        TimeFunctionSet { channels }
    }

    /// Z-normalizes every channel from index `skip` on (mean 0, population
    /// std 1). Constant channels become all zeros.
    pub fn z_normalized(&self, skip: usize) -> Self {
        let channels = self
            .channels
            .iter()
            .enumerate()
            .map(|(c, ch)| {
                if c < skip {
                    return ch.clone();
                }
                let n = ch.len() as f64;
                let mean = ch.iter().sum::<f64>() / n;
                let var = ch.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                let std = var.sqrt();
                if std < 1e-12 {
                    vec![0.0; ch.len()]
                } else {
                    ch.iter().map(|v| (v - mean) / std).collect()
                }
            })
            .collect();
        TimeFunctionSet { channels }
    }

    /// Linear time resampling of every channel to `len` samples, keeping the
    /// first and last samples. Used to pair unaligned sequences.
    pub fn resampled_to(&self, len: usize) -> Self {
        let src = self.len();
        let channels = self
            .channels
            .iter()
            .map(|ch| {
                (0..len)
                    .map(|k| {
                        if src == 1 || len == 1 {
                            return ch[0];
                        }
                        let pos = k as f64 * (src - 1) as f64 / (len - 1) as f64;
                        let i = (pos.floor() as usize).min(src - 2);
                        let f = pos - i as f64;
                        ch[i] + (ch[i + 1] - ch[i]) * f
                    })
                    .collect()
            })
            .collect();
        TimeFunctionSet { channels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractConfig {
    /// Denominator clamp for ratios and the logarithm of channel 5.
    pub eps: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { eps: 1e-6 }
    }
}

/// First difference in sample units: central in the interior, forward at
/// the start, backward at the end. Length-1 input yields `[0]`.
pub fn difference(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut out = Vec::with_capacity(n);
    out.push(xs[1] - xs[0]);
    for i in 1..n - 1 {
        out.push((xs[i + 1] - xs[i - 1]) / 2.0);
    }
    out.push(xs[n - 1] - xs[n - 2]);
    out
}

/// Removes 2*pi jumps between consecutive angles.
pub fn unwrap_angles(angles: &mut [f64]) {
    use std::f64::consts::{PI, TAU};
    let mut offset = 0.0;
    let mut prev = match angles.first() {
        Some(&a) => a,
        None => return,
    };
    for a in angles.iter_mut().skip(1) {
        let raw = *a;
        let mut delta = raw - prev;
        while delta > PI {
            offset -= TAU;
            delta -= TAU;
        }
        while delta < -PI {
            offset += TAU;
            delta += TAU;
        }
        prev = raw;
        *a = raw + offset;
    }
}

pub fn extract_time_functions(sample: &StrokeSample) -> Result<TimeFunctionSet, SignalError> {
    extract_with(sample, &ExtractConfig::default())
}

/// Concatenates the strokes (pen-up seams are differenced across, no points
/// are inserted) and computes the 21 channels.
pub fn extract_with(
    sample: &StrokeSample,
    cfg: &ExtractConfig,
) -> Result<TimeFunctionSet, SignalError> {
    let eps = cfg.eps;
    let pts: Vec<Point> = sample.strokes.iter().flatten().copied().collect();
    let n = pts.len();
    if n < MIN_EXTRACT_LEN {
        return Err(SignalError::InsufficientLength {
            needed: MIN_EXTRACT_LEN,
            got: n,
        });
    }
    if pts.iter().any(|p| !(p.x.is_finite() && p.y.is_finite())) {
        return Err(SignalError::Malformed("non-finite coordinate".into()));
    }

    let mx = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / n as f64;
    let spread = (pts
        .iter()
        .map(|p| (p.x - mx).powi(2) + (p.y - my).powi(2))
        .sum::<f64>()
        / (2 * n) as f64)
        .sqrt()
        .max(eps);
    let x: Vec<f64> = pts.iter().map(|p| (p.x - mx) / spread).collect();
    let y: Vec<f64> = pts.iter().map(|p| (p.y - my) / spread).collect();

    let dx = difference(&x);
    let dy = difference(&y);
    let mut theta: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| b.atan2(*a)).collect();
    unwrap_angles(&mut theta);
    let v: Vec<f64> = dx.iter().zip(&dy).map(|(a, b)| a.hypot(*b)).collect();
    let dtheta = difference(&theta);
    let rho: Vec<f64> = v
        .iter()
        .zip(&dtheta)
        .map(|(v, dt)| (v.max(eps) / dt.abs().max(eps)).ln())
        .collect();
    let dv = difference(&v);
    let acc: Vec<f64> = dv
        .iter()
        .zip(v.iter().zip(&dtheta))
        .map(|(dv, (v, dt))| (dv * dv + (v * dt).powi(2)).sqrt())
        .collect();

    let drho = difference(&rho);
    let dacc = difference(&acc);
    let ddx = difference(&dx);
    let ddy = difference(&dy);

    let v_ratio: Vec<f64> = (0..n)
        .map(|i| {
            let (lo, hi) = window(i, 2, n);
            let w = &v[lo..=hi];
            let min = w.iter().copied().fold(f64::INFINITY, f64::min);
            let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            min / max.max(eps)
        })
        .collect();

    let mut alpha: Vec<f64> = (0..n)
        .map(|i| {
            let j = if i + 1 < n { i } else { n - 2 };
            (y[j + 1] - y[j]).atan2(x[j + 1] - x[j])
        })
        .collect();
    unwrap_angles(&mut alpha);
    let dalpha = difference(&alpha);
    let sin_a: Vec<f64> = alpha.iter().map(|a| a.sin()).collect();
    let cos_a: Vec<f64> = alpha.iter().map(|a| a.cos()).collect();

    let r5 = length_width_ratio(&x, &y, 2, eps);
    let r7 = length_width_ratio(&x, &y, 3, eps);

    TimeFunctionSet::from_channels(vec![
        x, y, theta, v, rho, acc, dx, dy, dtheta, dv, drho, dacc, ddx, ddy, v_ratio, alpha, dalpha,
        sin_a, cos_a, r5, r7,
    ])
}

fn window(i: usize, half: usize, n: usize) -> (usize, usize) {
    (i.saturating_sub(half), (i + half).min(n - 1))
}

fn length_width_ratio(x: &[f64], y: &[f64], half: usize, eps: f64) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let (lo, hi) = window(i, half, n);
            let length: f64 = (lo..hi)
                .map(|k| (x[k + 1] - x[k]).hypot(y[k + 1] - y[k]))
                .sum();
            let xs = &x[lo..=hi];
            let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            length / (max - min).max(eps)
        })
        .collect()
}

/// Resample, extract and standardize: positions keep their joint
/// normalization, channels 3-21 are z-normalized per sample. This is the
/// representation every scorer consumes.
pub fn prepare(sample: &StrokeSample, rate: f64) -> Result<TimeFunctionSet, SignalError> {
    let resampled = resample_uniform(sample, rate)?;
    Ok(extract_time_functions(&resampled)?.z_normalized(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use drawpass_oracles::interpolate;
    use std::f64::consts::PI;

    fn sample(strokes: Vec<Stroke>) -> StrokeSample {
        StrokeSample {
            user_id: "u1".into(),
            session: 1,
            label: "B".into(),
            repetition: 1,
            source: SampleSource::Synthetic,
            strokes,
        }
    }

    fn line(n: usize, f: impl Fn(usize) -> (f64, f64)) -> Stroke {
        (0..n)
            .map(|i| {
                let (x, y) = f(i);
                Point::new(x, y, i as f64 * 10.0)
            })
            .collect()
    }

    #[test]
    fn resample_two_point_stroke() {
        let s = sample(vec![
            vec![Point::new(0.0, 0.0, 0.0), Point::new(10.0, 0.0, 100.0)],
            line(4, |i| (i as f64, 1.0))
                .into_iter()
                .map(|p| Point::new(p.x, p.y, p.t + 200.0))
                .collect(),
        ]);
        let r = resample_uniform(&s, 100.0).unwrap();
        let xs: Vec<f64> = r.strokes[0].iter().map(|p| p.x).collect();
        assert_eq!(xs, (0..=10).map(f64::from).collect::<Vec<_>>());
        assert_eq!(r.strokes.len(), 2);
    }

    #[test]
    fn resample_is_idempotent_on_grid() {
        let s = sample(vec![line(8, |i| (i as f64 * 1.5, (i * i) as f64))]);
        let once = resample_uniform(&s, 100.0).unwrap();
        assert_eq!(once, s);
        assert_eq!(resample_uniform(&once, 100.0).unwrap(), once);
    }

    #[test]
    fn resample_matches_interpolation_oracle() {
        let stroke = vec![
            Point::new(0.0, 5.0, 3.0),
            Point::new(4.0, -2.0, 17.5),
            Point::new(9.5, 1.0, 41.0),
        ];
        let s = sample(vec![
            stroke.clone(),
            line(3, |i| (i as f64, 0.0))
                .into_iter()
                .map(|p| Point::new(p.x, p.y, p.t + 50.0))
                .collect(),
        ]);
        let r = resample_uniform(&s, 100.0).unwrap();
        let kx: Vec<(f64, f64)> = stroke.iter().map(|p| (p.t, p.x)).collect();
        let ky: Vec<(f64, f64)> = stroke.iter().map(|p| (p.t, p.y)).collect();
        let out = &r.strokes[0];
        assert_eq!(out.len(), 4);
        for (k, p) in out.iter().enumerate() {
            let t = 3.0 + 10.0 * k as f64;
            assert_eq!(p.t, t);
            assert!((p.x - interpolate(&kx, t)).abs() < 1e-12);
            assert!((p.y - interpolate(&ky, t)).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_rejects_zero_span_stroke() {
        let s = sample(vec![
            line(5, |i| (i as f64, 0.0)),
            vec![Point::new(0.0, 0.0, 60.0), Point::new(1.0, 0.0, 60.0)],
        ]);
        assert_eq!(
            resample_uniform(&s, 100.0),
            Err(SignalError::DegenerateStroke { index: 1 })
        );
    }

    #[test]
    fn validation_errors() {
        let mut s = sample(vec![line(5, |i| (i as f64, 0.0))]);
        assert!(s.validate().is_ok());
        s.strokes.push(vec![Point::new(0.0, 0.0, 100.0)]);
        assert!(matches!(s.validate(), Err(SignalError::Malformed(_))));
        let s = sample(vec![line(4, |i| (i as f64, 0.0))]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn straight_line_has_constant_angle_and_speed() {
        let s = sample(vec![line(20, |i| (i as f64 * 3.0, i as f64 * 3.0))]);
        let tf = extract_time_functions(&s).unwrap();
        assert_eq!(tf.num_channels(), NUM_CHANNELS);
        for n in 1..tf.len() - 1 {
            assert!((tf.value(2, n) - PI / 4.0).abs() < 1e-12);
            assert!((tf.value(3, n) - tf.value(3, 1)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_point() {
        let s = sample(vec![line(10, |_| (5.0, 5.0))]);
        let tf = extract_time_functions(&s).unwrap();
        let eps = ExtractConfig::default().eps;
        for n in 0..tf.len() {
            assert_eq!(tf.value(3, n), 0.0);
            for c in 6..14 {
                assert_eq!(tf.value(c, n), 0.0, "channel {}", c + 1);
            }
            assert_eq!(tf.value(4, n), (eps / eps).ln());
        }
    }

    #[test]
    fn circle_log_curvature_radius() {
        let radius_px = 80.0;
        let n = 200;
        let pts: Stroke = (0..n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                Point::new(
                    300.0 + radius_px * phi.cos(),
                    200.0 + radius_px * phi.sin(),
                    i as f64 * 10.0,
                )
            })
            .collect();
        // Radius in normalized units: the joint std of centered x and y.
        let cx = pts.iter().map(|p| p.x).sum::<f64>() / n as f64;
        let cy = pts.iter().map(|p| p.y).sum::<f64>() / n as f64;
        let std = (pts
            .iter()
            .map(|p| (p.x - cx).powi(2) + (p.y - cy).powi(2))
            .sum::<f64>()
            / (2 * n) as f64)
            .sqrt();
        let r = radius_px / std;
        let tf = extract_time_functions(&sample(vec![pts])).unwrap();
        for k in 2..n - 2 {
            assert!(
                (tf.value(4, k) - r.ln()).abs() < 1e-3,
                "k={k} rho={}",
                tf.value(4, k)
            );
        }
    }

    #[test]
    fn too_short_for_extraction() {
        let s = sample(vec![line(6, |i| (i as f64, 0.0))]);
        assert_eq!(
            extract_time_functions(&s),
            Err(SignalError::InsufficientLength { needed: 7, got: 6 })
        );
    }

    #[test]
    fn z_normalization_skips_positions() {
        let tf = TimeFunctionSet::from_channels(vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 4.0, 4.0],
            vec![0.0, 1.0, 2.0],
        ])
        .unwrap();
        let z = tf.z_normalized(1);
        assert_eq!(z.channel(0), tf.channel(0));
        assert_eq!(z.channel(1), &[0.0, 0.0, 0.0]);
        let c = z.channel(2);
        assert!((c.iter().sum::<f64>()).abs() < 1e-12);
        assert!(((c.iter().map(|v| v * v).sum::<f64>() / 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_time_resampling_keeps_endpoints() {
        let tf = TimeFunctionSet::from_channels(vec![vec![0.0, 1.0, 4.0]]).unwrap();
        let r = tf.resampled_to(5);
        assert_eq!(r.channel(0), &[0.0, 0.5, 1.0, 2.5, 4.0]);
    }
}
