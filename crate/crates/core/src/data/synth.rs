//! Synthetic handwriting generator with recorded ground truth.
//!
//! Every character has a base shape (hand-placed control points for the
//! digits, a seeded random walk for any other label). A user's prototype
//! perturbs those control points by `inter_user_spread`; each (user,
//! session) pair adds `session_drift`; each sample adds `intra_user_noise`.
//! Strokes are Catmull-Rom splines through the perturbed control points,
//! traversed with a smooth monotone time warp and sampled at a fixed event
//! rate. All variability of a single sample (shape, warp, duration, sensor
//! jitter, placement) scales with `intra_user_noise`, so a zero noise and
//! zero drift configuration yields exact copies.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use super::{DataError, Dataset, Provenance};
use crate::signal::{Point, SampleSource, StrokeSample};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_users: usize,
    pub characters: Vec<String>,
    pub sessions: u32,
    pub samples_per_cell: u32,
    /// Perturbation of the base character shapes, shared by all users.
    pub prototype_jitter: f64,
    /// Per-user perturbation of control points and timing.
    pub inter_user_spread: f64,
    /// Per-sample perturbation of control points, timing and placement.
    pub intra_user_noise: f64,
    /// Per-(user, session) perturbation.
    pub session_drift: f64,
    pub seed: u64,
    /// Nominal writing time of one character.
    #[serde(default = "d_duration")]
    pub duration_ms: f64,
    #[serde(default = "d_rate")]
    pub event_rate_hz: f64,
    #[serde(default = "d_canvas")]
    pub canvas_px: f64,
    /// Gain of the nonlinear time warp relative to the shape spreads.
    #[serde(default = "d_warp")]
    pub time_warp: f64,
    /// Per-point sensor noise, as a multiple of `intra_user_noise` times
    /// the canvas size.
    #[serde(default)]
    pub sensor_jitter: f64,
}

fn d_duration() -> f64 {
    400.0
}
fn d_rate() -> f64 {
    100.0
}
fn d_canvas() -> f64 {
    400.0
}
fn d_warp() -> f64 {
    1.0
}

fn digits() -> Vec<String> {
    (0..10).map(|d| d.to_string()).collect()
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig::easy(0)
    }
}

impl SynthConfig {
    /// Well separated users, short samples: the training smoke benchmark.
    pub fn easy(seed: u64) -> Self {
        SynthConfig {
            n_users: 40,
            characters: digits(),
            sessions: 2,
            samples_per_cell: 2,
            prototype_jitter: 0.05,
            inter_user_spread: 0.15,
            intra_user_noise: 0.03,
            session_drift: 0.02,
            seed,
            duration_ms: 300.0,
            event_rate_hz: 100.0,
            canvas_px: 400.0,
            time_warp: 1.0,
            sensor_jitter: 0.0,
        }
    }

    /// Smaller user spread, strong nonlinear timing and sensor jitter, and
    /// enough users for a 48/12/40 train/validation/evaluation split.
    pub fn moderate(seed: u64) -> Self {
        SynthConfig {
            n_users: 100,
            inter_user_spread: 0.08,
            intra_user_noise: 0.04,
            session_drift: 0.02,
            time_warp: 6.0,
            sensor_jitter: 0.5,
            ..SynthConfig::easy(seed)
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let reals = [
            ("prototype_jitter", self.prototype_jitter),
            ("inter_user_spread", self.inter_user_spread),
            ("intra_user_noise", self.intra_user_noise),
            ("session_drift", self.session_drift),
            ("time_warp", self.time_warp),
            ("sensor_jitter", self.sensor_jitter),
        ];
        for (name, v) in reals {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(DataError::Synth(format!(
                    "{name} must be a nonnegative number"
                )));
            }
        }
        if !(self.duration_ms > 0.0 && self.event_rate_hz > 0.0 && self.canvas_px > 0.0) {
            return Err(DataError::Synth(
                "duration, event rate and canvas size must be positive".into(),
            ));
        }
        if self.duration_ms * self.event_rate_hz / 1000.0 < 8.0 {
            return Err(DataError::Synth(
                "duration too short for the event rate: fewer than 8 events per character".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(c) = self.characters.iter().find(|c| !seen.insert(*c)) {
            return Err(DataError::Synth(format!("duplicate character {c:?}")));
        }
        Ok(())
    }

    /// Expected number of samples.
    pub fn sample_count(&self) -> usize {
        self.n_users
            * self.characters.len()
            * self.sessions as usize
            * self.samples_per_cell as usize
    }
}

type Shape = Vec<Vec<[f64; 2]>>;

/// Generator ground truth: the per-user control points of every character.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// user id -> label -> strokes of control points (unit square).
    pub prototypes: BTreeMap<String, BTreeMap<String, Shape>>,
}

impl SynthTruth {
    /// Mean Euclidean distance between corresponding control points of two
    /// users' prototypes of `label`.
    pub fn prototype_distance(&self, a: &str, b: &str, label: &str) -> Option<f64> {
        let pa = self.prototypes.get(a)?.get(label)?;
        let pb = self.prototypes.get(b)?.get(label)?;
        let mut sum = 0.0;
        let mut n = 0usize;
        for (sa, sb) in pa.iter().zip(pb) {
            for (p, q) in sa.iter().zip(sb) {
                sum += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Dataset, DataError> {
    generate_synthetic_with_truth(cfg).map(|(d, _)| d)
}

pub fn generate_synthetic_with_truth(
    cfg: &SynthConfig,
) -> Result<(Dataset, SynthTruth), DataError> {
    cfg.validate()?;
    if cfg.n_users == 0 {
        log::warn!("synthetic configuration has zero users: dataset is empty");
    }
    if cfg.n_users > 0 && cfg.inter_user_spread <= cfg.intra_user_noise {
        log::warn!("inter_user_spread <= intra_user_noise: users are not separable");
    }
    let width = cfg.n_users.to_string().len().max(3);
    let mut samples = Vec::with_capacity(cfg.sample_count());
    let mut truth = SynthTruth {
        prototypes: BTreeMap::new(),
    };
    for label in &cfg.characters {
        let lh = label_hash(label);
        let mut base = base_shape(label);
        let mut r = rng(&[cfg.seed, 1, lh]);
        perturb(&mut base, cfg.prototype_jitter, &mut r);

        for ui in 0..cfg.n_users {
            let user = format!("u{:0width$}", ui + 1);
            let mut ru = rng(&[cfg.seed, 2, lh, ui as u64]);
            let mut proto = base.clone();
            perturb(&mut proto, cfg.inter_user_spread, &mut ru);
            let user_timing = Timing::draw(cfg.inter_user_spread, cfg.time_warp, &mut ru);
            truth
                .prototypes
                .entry(user.clone())
                .or_default()
                .insert(label.clone(), proto.clone());

            for session in 1..=cfg.sessions {
                let mut rs = rng(&[cfg.seed, 3, lh, ui as u64, session as u64]);
                let mut drifted = proto.clone();
                perturb(&mut drifted, cfg.session_drift, &mut rs);
                let session_timing =
                    user_timing.add(&Timing::draw(cfg.session_drift, cfg.time_warp, &mut rs));

                for rep in 1..=cfg.samples_per_cell {
                    let mut rr = rng(&[cfg.seed, 4, lh, ui as u64, session as u64, rep as u64]);
                    let mut shape = drifted.clone();
                    perturb(&mut shape, cfg.intra_user_noise, &mut rr);
                    let timing = session_timing.add(&Timing::draw(
                        cfg.intra_user_noise,
                        cfg.time_warp,
                        &mut rr,
                    ));
                    let strokes = render(&shape, &timing, cfg, &mut rr);
                    samples.push(StrokeSample {
                        user_id: user.clone(),
                        session,
                        label: label.clone(),
                        repetition: rep,
                        source: SampleSource::Synthetic,
                        strokes,
                    });
                }
            }
        }
    }
    let provenance = Provenance {
        source_paths: vec![],
        format: "synthetic".into(),
        format_version: super::format::DATASET_VERSION,
        options: serde_json::to_value(cfg).expect("config serializes"),
        content_digest: String::new(),
    };
    Ok((Dataset::new(samples, provenance)?, truth))
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng(parts: &[u64]) -> ChaCha8Rng {
    let mut h = 0x243F_6A88_85A3_08D3u64;
    for &p in parts {
        h = splitmix(h ^ p);
    }
    ChaCha8Rng::seed_from_u64(h)
}

fn label_hash(label: &str) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

fn normal(r: &mut ChaCha8Rng) -> f64 {
    r.sample(StandardNormal)
}

fn perturb(shape: &mut Shape, scale: f64, r: &mut ChaCha8Rng) {
    for stroke in shape.iter_mut() {
        for p in stroke.iter_mut() {
            let dx = normal(r);
            let dy = normal(r);
            p[0] += scale * dx;
            p[1] += scale * dy;
        }
    }
}

const CONTROL_POINTS: usize = 7;

fn digit_shape(d: char) -> Option<Shape> {
    let s: &[&[[f64; 2]]] = match d {
        '0' => &[&[
            [0.5, 0.0],
            [0.15, 0.25],
            [0.15, 0.75],
            [0.5, 1.0],
            [0.85, 0.75],
            [0.85, 0.25],
            [0.52, 0.03],
        ]],
        '1' => &[&[[0.3, 0.25], [0.55, 0.0], [0.55, 0.5], [0.55, 1.0]]],
        '2' => &[&[
            [0.15, 0.25],
            [0.5, 0.0],
            [0.85, 0.25],
            [0.5, 0.6],
            [0.15, 1.0],
            [0.85, 1.0],
        ]],
        '3' => &[&[
            [0.2, 0.1],
            [0.7, 0.05],
            [0.5, 0.45],
            [0.8, 0.7],
            [0.5, 1.0],
            [0.15, 0.9],
        ]],
        '4' => &[
            &[[0.6, 0.0], [0.15, 0.65], [0.85, 0.65]],
            &[[0.65, 0.35], [0.65, 1.0]],
        ],
        '5' => &[&[
            [0.8, 0.0],
            [0.25, 0.0],
            [0.2, 0.45],
            [0.7, 0.45],
            [0.8, 0.8],
            [0.2, 1.0],
        ]],
        '6' => &[&[
            [0.7, 0.0],
            [0.3, 0.4],
            [0.2, 0.8],
            [0.5, 1.0],
            [0.8, 0.75],
            [0.5, 0.55],
            [0.22, 0.7],
        ]],
        '7' => &[&[[0.15, 0.0], [0.85, 0.0], [0.45, 1.0]]],
        '8' => &[&[
            [0.5, 0.5],
            [0.2, 0.25],
            [0.5, 0.0],
            [0.8, 0.25],
            [0.5, 0.5],
            [0.2, 0.75],
            [0.5, 1.0],
            [0.8, 0.75],
            [0.52, 0.52],
        ]],
        '9' => &[&[
            [0.8, 0.3],
            [0.5, 0.0],
            [0.2, 0.25],
            [0.5, 0.5],
            [0.8, 0.3],
            [0.75, 1.0],
        ]],
        _ => return None,
    };
    Some(s.iter().map(|st| st.to_vec()).collect())
}

fn base_shape(label: &str) -> Shape {
    let mut chars = label.chars();
    let shape = match (chars.next(), chars.next()) {
        (Some(c), None) => digit_shape(c),
        _ => None,
    };
    let shape = shape.unwrap_or_else(|| {
        let mut r = rng(&[label_hash(label)]);
        let mut p = [0.2 + 0.6 * r.random::<f64>(), 0.2 + 0.6 * r.random::<f64>()];
        let mut heading = std::f64::consts::TAU * r.random::<f64>();
        let mut stroke = vec![p];
        for _ in 1..CONTROL_POINTS {
            heading += 1.5 * (r.random::<f64>() - 0.5);
            p = [
                (p[0] + 0.3 * heading.cos()).clamp(0.0, 1.0),
                (p[1] + 0.3 * heading.sin()).clamp(0.0, 1.0),
            ];
            stroke.push(p);
        }
        vec![stroke]
    });
    shape
        .into_iter()
        .map(|s| refine(&s, CONTROL_POINTS))
        .collect()
}

/// Inserts points along the polyline (by arc length) until it has at least
/// `min` points, so perturbations can bend every segment.
fn refine(stroke: &[[f64; 2]], min: usize) -> Vec<[f64; 2]> {
    if stroke.len() >= min {
        return stroke.to_vec();
    }
    let mut cum = vec![0.0];
    for w in stroke.windows(2) {
        let d = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        cum.push(cum.last().unwrap() + d);
    }
    let total = *cum.last().unwrap();
    (0..min)
        .map(|k| {
            let s = total * k as f64 / (min - 1) as f64;
            let i = cum
                .windows(2)
                .position(|w| s <= w[1])
                .unwrap_or(stroke.len() - 2);
            let span = cum[i + 1] - cum[i];
            let a = if span > 0.0 { (s - cum[i]) / span } else { 0.0 };
            [
                stroke[i][0] + a * (stroke[i + 1][0] - stroke[i][0]),
                stroke[i][1] + a * (stroke[i + 1][1] - stroke[i][1]),
            ]
        })
        .collect()
}

/// Timing of one rendition: warp coefficients, log duration factor and
/// log pen-up gap factor.
#[derive(Debug, Clone)]
struct Timing {
    warp: [f64; 3],
    log_duration: f64,
    log_gap: f64,
}

impl Timing {
    fn draw(scale: f64, warp_gain: f64, r: &mut ChaCha8Rng) -> Self {
        let s = scale * warp_gain;
        let warp = [s * normal(r), s * normal(r), s * normal(r)];
        let log_duration = scale * normal(r);
        let log_gap = scale * normal(r);
        Timing {
            warp,
            log_duration,
            log_gap,
        }
    }

    fn add(&self, o: &Timing) -> Timing {
        Timing {
            warp: [
                self.warp[0] + o.warp[0],
                self.warp[1] + o.warp[1],
                self.warp[2] + o.warp[2],
            ],
            log_duration: self.log_duration + o.log_duration,
            log_gap: self.log_gap + o.log_gap,
        }
    }

    /// Monotone map of [0, 1] onto itself; the coefficients are shrunk when
    /// they could make the derivative nonpositive.
    fn warp_fn(&self) -> impl Fn(f64) -> f64 {
        let total: f64 = self.warp.iter().map(|a| a.abs()).sum();
        let shrink = if total > 0.9 { 0.9 / total } else { 1.0 };
        let a = self.warp.map(|w| w * shrink);
        move |s: f64| {
            let mut v = s;
            for (k, ak) in a.iter().enumerate() {
                let kp = (k + 1) as f64 * std::f64::consts::PI;
                v += ak * (kp * s).sin() / kp;
            }
            v.clamp(0.0, 1.0)
        }
    }
}

fn catmull_rom(pts: &[[f64; 2]], u: f64) -> [f64; 2] {
    let n = pts.len();
    if n == 1 {
        return pts[0];
    }
    let get = |i: isize| -> [f64; 2] {
        if i < 0 {
            [2.0 * pts[0][0] - pts[1][0], 2.0 * pts[0][1] - pts[1][1]]
        } else if i as usize >= n {
            [
                2.0 * pts[n - 1][0] - pts[n - 2][0],
                2.0 * pts[n - 1][1] - pts[n - 2][1],
            ]
        } else {
            pts[i as usize]
        }
    };
    let x = u.clamp(0.0, 1.0) * (n - 1) as f64;
    let seg = (x.floor() as usize).min(n - 2);
    let s = x - seg as f64;
    let (p0, p1, p2, p3) = (
        get(seg as isize - 1),
        get(seg as isize),
        get(seg as isize + 1),
        get(seg as isize + 2),
    );
    let s2 = s * s;
    let s3 = s2 * s;
    let f = |a: f64, b: f64, c: f64, d: f64| {
        0.5 * (2.0 * b
            + (-a + c) * s
            + (2.0 * a - 5.0 * b + 4.0 * c - d) * s2
            + (-a + 3.0 * b - 3.0 * c + d) * s3)
    };
    [f(p0[0], p1[0], p2[0], p3[0]), f(p0[1], p1[1], p2[1], p3[1])]
}

fn render(
    shape: &Shape,
    timing: &Timing,
    cfg: &SynthConfig,
    r: &mut ChaCha8Rng,
) -> Vec<Vec<Point>> {
    let warp = timing.warp_fn();
    let segments: usize = shape.iter().map(|s| s.len().saturating_sub(1).max(1)).sum();
    let duration = cfg.duration_ms * timing.log_duration.exp();
    let gap = 120.0 * timing.log_gap.exp();
    let dt = 1000.0 / cfg.event_rate_hz;
    let offset = [
        cfg.intra_user_noise * cfg.canvas_px * normal(r),
        cfg.intra_user_noise * cfg.canvas_px * normal(r),
    ];
    let jitter = cfg.intra_user_noise * cfg.sensor_jitter * cfg.canvas_px;

    let mut t0 = 0.0;
    let mut strokes = Vec::with_capacity(shape.len());
    for stroke in shape {
        let share = stroke.len().saturating_sub(1).max(1) as f64 / segments as f64;
        let d = (duration * share).max(2.0 * dt);
        let mut times: Vec<f64> = Vec::new();
        let mut k = 0usize;
        while (k as f64) * dt < d - 1e-9 {
            times.push(k as f64 * dt);
            k += 1;
        }
        times.push(d);
        let pts = times
            .iter()
            .map(|&t| {
                let p = catmull_rom(stroke, warp(t / d));
                let (jx, jy) = if jitter > 0.0 {
                    (jitter * normal(r), jitter * normal(r))
                } else {
                    (0.0, 0.0)
                };
                Point::new(
                    offset[0] + cfg.canvas_px * p[0] + jx,
                    offset[1] + cfg.canvas_px * p[1] + jy,
                    t0 + t,
                )
            })
            .collect();
        strokes.push(pts);
        t0 += d + gap;
    }
    strokes
}
