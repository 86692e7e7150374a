use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::util::natural_cmp;

/// Operating point at the equal-error threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EerPoint {
    pub eer: f64,
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

/// One threshold of the sweep. FAR is the share of impostor scores `>= t`,
/// FRR the share of genuine scores `< t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

fn check(genuine: &[f64], impostor: &[f64]) -> Result<(), EvalError> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    if genuine.iter().chain(impostor).any(|s| !s.is_finite()) {
        return Err(EvalError::NonFiniteScore);
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// FAR/FRR at every distinct score, thresholds ascending.
fn sweep(genuine: &[f64], impostor: &[f64]) -> Vec<DetPoint> {
    let g = sorted(genuine);
    let i = sorted(impostor);
    let mut thresholds: Vec<f64> = g.iter().chain(&i).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let (ng, ni) = (g.len() as f64, i.len() as f64);
    thresholds
        .into_iter()
        .map(|t| {
            let g_below = g.partition_point(|&s| s < t);
            let i_below = i.partition_point(|&s| s < t);
            DetPoint {
                threshold: t,
                far: (i.len() - i_below) as f64 / ni,
                frr: g_below as f64 / ng,
            }
        })
        .collect()
}

fn eer_index(points: &[DetPoint]) -> usize {
    let mut best = 0;
    for (k, p) in points.iter().enumerate() {
        if (p.far - p.frr).abs() < (points[best].far - points[best].frr).abs() {
            best = k;
        }
    }
    best
}

/// Sweeps every distinct score as threshold and reports the midpoint of FAR
/// and FRR where they are closest; ties go to the lower threshold. Higher
/// scores mean "more genuine".
pub fn compute_eer(genuine: &[f64], impostor: &[f64]) -> Result<EerPoint, EvalError> {
    check(genuine, impostor)?;
    let points = sweep(genuine, impostor);
    let p = points[eer_index(&points)];
    Ok(EerPoint {
        eer: (p.far + p.frr) / 2.0,
        threshold: p.threshold,
        far: p.far,
        frr: p.frr,
    })
}

/// DET curve ordered by increasing FAR (decreasing threshold), so FRR is
/// nonincreasing along it. With `points == 0` or more points than distinct
/// scores the full sweep is returned; otherwise an evenly spaced subset that
/// always keeps both ends and the EER point.
pub fn det_curve(
    genuine: &[f64],
    impostor: &[f64],
    points: usize,
) -> Result<Vec<DetPoint>, EvalError> {
    check(genuine, impostor)?;
    let full = sweep(genuine, impostor);
    let e = eer_index(&full);
    let n = full.len();
    let mut keep: Vec<usize> = if points == 0 || points >= n {
        (0..n).collect()
    } else {
        let mut k: Vec<usize> = (0..points.max(2))
            .map(|j| (j * (n - 1) + (points.max(2) - 1) / 2) / (points.max(2) - 1))
            .collect();
        k.push(e);
        k
    };
    keep.sort_unstable();
    keep.dedup();
    Ok(keep.into_iter().rev().map(|k| full[k]).collect())
}

/// Mean of the Z one-to-one scores.
pub fn score_zvs1(scores: &[f64]) -> Result<f64, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyEnrollment);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Sum rule over the characters of a password.
pub fn fuse_password(per_character: &[f64]) -> Result<f64, EvalError> {
    if per_character.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    Ok(per_character.iter().sum())
}

/// Labels ordered by ascending EER, ties by label.
pub fn rank_by_eer(eers: &[(String, f64)]) -> Vec<String> {
    let mut v = eers.to_vec();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| natural_cmp(&a.0, &b.0)));
    v.into_iter().map(|(l, _)| l).collect()
}
