//! Preprocessed samples and the pairing step that turns two variable-length
//! time-function sets into equal-length network inputs.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::align::{apply_path, sw_dtw_multichannel, AlignError, DtwConfig};
use crate::data::{Dataset, SampleKey};
use crate::rnn::{PairExample, RnnError};
use crate::signal::{prepare, SignalError, TimeFunctionSet};

#[derive(Debug, Error)]
pub enum PairError {
    #[error("cannot preprocess {key}: {source}")]
    Prepare {
        key: SampleKey,
        #[source]
        source: SignalError,
    },
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Rnn(#[from] RnnError),
    #[error("no training pairs could be formed: {0}")]
    NoPairs(String),
}

/// A sample after resampling, extraction and channel standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSample {
    pub key: SampleKey,
    pub tf: TimeFunctionSet,
}

/// Prepares every sample of `ds` (or only those of `users`) in parallel;
/// output keeps dataset order.
pub fn prepare_dataset(
    ds: &Dataset,
    users: Option<&[String]>,
    rate_hz: f64,
) -> Result<Vec<PreparedSample>, PairError> {
    let keep: Option<std::collections::HashSet<&str>> =
        users.map(|u| u.iter().map(String::as_str).collect());
    ds.samples()
        .par_iter()
        .filter(|s| keep.as_ref().is_none_or(|k| k.contains(s.user_id.as_str())))
        .map(|s| {
            let key = SampleKey::of(s);
            prepare(s, rate_hz)
                .map(|tf| PreparedSample {
                    key: key.clone(),
                    tf,
                })
                .map_err(|source| PairError::Prepare { key, source })
        })
        .collect()
}

/// How a pair of sequences is brought to a common length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pairing {
    /// Warp both along their SW-DTW path.
    Aligned { dtw: DtwConfig },
    /// Linearly resample both to the longer length.
    Linear,
}

impl Pairing {
    pub fn aligned() -> Self {
        Pairing::Aligned {
            dtw: DtwConfig::default(),
        }
    }
}

/// Equal-length inputs for the network, enrolled sample first.
pub fn pair_inputs(
    enrolled: &TimeFunctionSet,
    test: &TimeFunctionSet,
    pairing: &Pairing,
) -> Result<(TimeFunctionSet, TimeFunctionSet), PairError> {
    match pairing {
        Pairing::Aligned { dtw } => {
            let path = sw_dtw_multichannel(enrolled, test, dtw)?;
            Ok(apply_path(enrolled, test, &path)?)
        }
        Pairing::Linear => {
            let k = enrolled.len().max(test.len());
            Ok((enrolled.resampled_to(k), test.resampled_to(k)))
        }
    }
}

/// Which labeled pairs are drawn from a set of development users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPlan {
    /// Cap on genuine pairs per (user, label); `None` keeps all ordered
    /// pairs of distinct samples (earlier sample as enrolled).
    pub max_genuine_per_cell: Option<usize>,
    /// Impostor pairs drawn per genuine pair.
    pub impostors_per_genuine: usize,
    pub seed: u64,
}

impl Default for PairPlan {
    fn default() -> Self {
        PairPlan {
            max_genuine_per_cell: None,
            impostors_per_genuine: 1,
            seed: 0,
        }
    }
}

/// Genuine pairs join two samples of one user and label, the one from the
/// earlier (session, repetition) first. Each impostor pair takes the
/// genuine pair's enrolled sample and a random sample of the same label
/// from another user. Output order is deterministic.
pub fn build_training_pairs(
    samples: &[PreparedSample],
    pairing: &Pairing,
    plan: &PairPlan,
) -> Result<Vec<PairExample>, PairError> {
    let mut cells: BTreeMap<(&str, &str), Vec<&PreparedSample>> = BTreeMap::new();
    for s in samples {
        cells
            .entry((s.key.label.as_str(), s.key.user_id.as_str()))
            .or_default()
            .push(s);
    }
    for v in cells.values_mut() {
        v.sort_by(|a, b| a.key.cmp(&b.key));
    }
    let mut by_label: BTreeMap<&str, Vec<&PreparedSample>> = BTreeMap::new();
    for ((label, _), v) in &cells {
        by_label.entry(label).or_default().extend(v.iter().copied());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    let mut planned: Vec<(&PreparedSample, &PreparedSample, bool)> = Vec::new();
    for ((label, user), v) in &cells {
        let mut genuine: Vec<(usize, usize)> = Vec::new();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                genuine.push((i, j));
            }
        }
        if let Some(cap) = plan.max_genuine_per_cell {
            if genuine.len() > cap {
                genuine = genuine.choose_multiple(&mut rng, cap).copied().collect();
                genuine.sort_unstable();
            }
        }
        let others: Vec<&PreparedSample> = by_label[label]
            .iter()
            .copied()
            .filter(|s| s.key.user_id != *user)
            .collect();
        for (i, j) in genuine {
            planned.push((v[i], v[j], true));
            if others.is_empty() {
                continue;
            }
            for _ in 0..plan.impostors_per_genuine {
                let o = *others.choose(&mut rng).expect("nonempty");
                planned.push((v[i], o, false));
            }
        }
    }
    if planned.is_empty() {
        return Err(PairError::NoPairs(
            "need at least two samples of some (user, label) cell".into(),
        ));
    }
    planned
        .par_iter()
        .map(|(a, b, genuine)| {
            let (x, y) = pair_inputs(&a.tf, &b.tf, pairing)?;
            Ok(PairExample::new(x, y, *genuine)?)
        })
        .collect()
}
