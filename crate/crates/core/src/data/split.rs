use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};
use crate::util::natural_cmp;

/// How users are partitioned into development and evaluation sets.
/// Development users are further split into train/validation by a seeded
/// shuffle with `train_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitSpec {
    /// The first `dev` users in natural id order are development users.
    /// Evaluation users are the following users that have every session in
    /// `required_sessions`, truncated to `eval` when given.
    ById {
        dev: usize,
        eval: Option<usize>,
        #[serde(default)]
        required_sessions: Vec<u32>,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
    /// A seeded shuffle assigns `dev_fraction` of the users to development;
    /// the rest are evaluation users if they have the required sessions.
    Fraction {
        dev_fraction: f64,
        #[serde(default)]
        required_sessions: Vec<u32>,
        #[serde(default = "default_train_fraction")]
        train_fraction: f64,
    },
}

fn default_train_fraction() -> f64 {
    0.8
}

impl SplitSpec {
    /// 50 development users, the remaining 43 for evaluation.
    pub fn ebiodigit() -> Self {
        SplitSpec::ById {
            dev: 50,
            eval: Some(43),
            required_sessions: vec![],
            train_fraction: 0.8,
        }
    }

    /// 175 development users, 42 evaluation users with all six sessions.
    pub fn mobiletouch() -> Self {
        SplitSpec::ById {
            dev: 175,
            eval: Some(42),
            required_sessions: (1..=6).collect(),
            train_fraction: 0.8,
        }
    }

    fn train_fraction(&self) -> f64 {
        match self {
            SplitSpec::ById { train_fraction, .. } | SplitSpec::Fraction { train_fraction, .. } => {
                *train_fraction
            }
        }
    }

    fn required_sessions(&self) -> &[u32] {
        match self {
            SplitSpec::ById {
                required_sessions, ..
            }
            | SplitSpec::Fraction {
                required_sessions, ..
            } => required_sessions,
        }
    }
}

/// User-disjoint partition; every list is in natural id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub eval: Vec<String>,
    /// Non-development users left out of evaluation (missing sessions or
    /// beyond the requested count).
    pub excluded: Vec<String>,
}

impl Split {
    pub fn dev(&self) -> Vec<String> {
        let mut v: Vec<String> = self.train.iter().chain(&self.val).cloned().collect();
        sort_natural(&mut v);
        v
    }
}

fn sort_natural(v: &mut [String]) {
    v.sort_by(|a, b| natural_cmp(a, b));
}

pub fn make_split(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<Split, DataError> {
    let tf = spec.train_fraction();
    if !(0.0..=1.0).contains(&tf) {
        return Err(DataError::Split(format!(
            "train fraction {tf} outside [0, 1]"
        )));
    }
    let users = ds.users();
    let required = spec.required_sessions();
    let eligible = |u: &String| {
        let have = ds.sessions_of(u);
        required.iter().all(|s| have.contains(s))
    };

    let (dev, rest, eval_cap): (Vec<String>, Vec<String>, Option<usize>) = match spec {
        SplitSpec::ById { dev, eval, .. } => {
            if *dev > users.len() {
                return Err(DataError::Split(format!(
                    "{dev} development users requested, dataset has {}",
                    users.len()
                )));
            }
            (users[..*dev].to_vec(), users[*dev..].to_vec(), *eval)
        }
        SplitSpec::Fraction { dev_fraction, .. } => {
            if !(0.0..=1.0).contains(dev_fraction) {
                return Err(DataError::Split(format!(
                    "dev fraction {dev_fraction} outside [0, 1]"
                )));
            }
            let mut shuffled = users.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let n_dev = (dev_fraction * users.len() as f64).round() as usize;
            let (d, r) = shuffled.split_at(n_dev);
            (d.to_vec(), r.to_vec(), None)
        }
    };

    let mut eval = Vec::new();
    let mut excluded = Vec::new();
    let mut rest = rest;
    sort_natural(&mut rest);
    for u in rest {
        if eligible(&u) && eval_cap.is_none_or(|c| eval.len() < c) {
            eval.push(u);
        } else {
            excluded.push(u);
        }
    }
    if let Some(c) = eval_cap {
        if eval.len() < c {
            return Err(DataError::Split(format!(
                "{c} evaluation users requested, only {} eligible",
                eval.len()
            )));
        }
    }

    let mut dev = dev;
    sort_natural(&mut dev);
    dev.shuffle(&mut ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0000_0000_0001));
    let n_train = (tf * dev.len() as f64).round() as usize;
    let mut train = dev[..n_train].to_vec();
    let mut val = dev[n_train..].to_vec();
    sort_natural(&mut train);
    sort_natural(&mut val);
    Ok(Split {
        train,
        val,
        eval,
        excluded,
    })
}
