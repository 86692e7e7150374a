use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::DataError;
use crate::signal::StrokeSample;
use crate::util::natural_cmp;

/// Unique identity of a sample within a dataset.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SampleKey {
    pub user_id: String,
    pub label: String,
    pub session: u32,
    pub repetition: u32,
}

impl SampleKey {
    pub fn of(s: &StrokeSample) -> Self {
        SampleKey {
            user_id: s.user_id.clone(),
            label: s.label.clone(),
            session: s.session,
            repetition: s.repetition,
        }
    }
}

impl fmt::Display for SampleKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}/{}/s{}/r{}",
            self.user_id, self.label, self.session, self.repetition
        )
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Provenance {
    pub source_paths: Vec<String>,
    pub format: String,
    pub format_version: u32,
    pub options: serde_json::Value,
    /// SHA-256 over the canonical encoding of the samples.
    pub content_digest: String,
}

/// Immutable collection of samples with a (user, label, session, repetition)
/// index.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<StrokeSample>,
    index: BTreeMap<SampleKey, usize>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Builds the index, rejecting duplicate keys. The content digest in
    /// `provenance` is recomputed.
    pub fn new(samples: Vec<StrokeSample>, mut provenance: Provenance) -> Result<Self, DataError> {
        let mut index = BTreeMap::new();
        for (i, s) in samples.iter().enumerate() {
            let key = SampleKey::of(s);
            if index.insert(key.clone(), i).is_some() {
                return Err(DataError::Duplicate(key.to_string()));
            }
        }
        provenance.content_digest = super::format::samples_digest(&samples);
        Ok(Dataset {
            samples,
            index,
            provenance,
        })
    }

    pub fn empty() -> Self {
        Dataset::new(Vec::new(), Provenance::default()).expect("no duplicates")
    }

    pub fn samples(&self) -> &[StrokeSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, key: &SampleKey) -> Option<&StrokeSample> {
        self.index.get(key).map(|&i| &self.samples[i])
    }

    /// User ids in natural order.
    pub fn users(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.samples.iter().map(|s| s.user_id.as_str()).collect();
        let mut v: Vec<String> = set.into_iter().map(String::from).collect();
        v.sort_by(|a, b| natural_cmp(a, b));
        v
    }

    /// Character labels in natural order.
    pub fn labels(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.samples.iter().map(|s| s.label.as_str()).collect();
        let mut v: Vec<String> = set.into_iter().map(String::from).collect();
        v.sort_by(|a, b| natural_cmp(a, b));
        v
    }

    pub fn sessions_of(&self, user: &str) -> BTreeSet<u32> {
        self.samples
            .iter()
            .filter(|s| s.user_id == user)
            .map(|s| s.session)
            .collect()
    }

    /// Samples of one cell ordered by repetition.
    pub fn cell(&self, user: &str, label: &str, session: u32) -> Vec<&StrokeSample> {
        let lo = SampleKey {
            user_id: user.to_string(),
            label: label.to_string(),
            session,
            repetition: 0,
        };
        let hi = SampleKey {
            repetition: u32::MAX,
            ..lo.clone()
        };
        self.index
            .range(lo..=hi)
            .map(|(_, &i)| &self.samples[i])
            .collect()
    }

    /// Samples of one user and label across sessions, in (session,
    /// repetition) order.
    pub fn user_label(&self, user: &str, label: &str) -> Vec<&StrokeSample> {
        let lo = SampleKey {
            user_id: user.to_string(),
            label: label.to_string(),
            session: 0,
            repetition: 0,
        };
        let hi = SampleKey {
            session: u32::MAX,
            repetition: u32::MAX,
            ..lo.clone()
        };
        self.index
            .range(lo..=hi)
            .map(|(_, &i)| &self.samples[i])
            .collect()
    }

    /// Keeps only samples of the given users.
    pub fn restricted_to(&self, users: &[String]) -> Dataset {
        let keep: BTreeSet<&str> = users.iter().map(String::as_str).collect();
        let samples = self
            .samples
            .iter()
            .filter(|s| keep.contains(s.user_id.as_str()))
            .cloned()
            .collect();
        Dataset::new(samples, self.provenance.clone()).expect("subset of a valid dataset")
    }
}
