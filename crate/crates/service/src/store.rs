use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use thiserror::Error;

use drawpass_core::TimeFunctionSet;

/// Enrollment state of one user. Only extracted time functions are kept,
/// never the raw strokes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentRecord {
    pub user_id: String,
    pub password: Vec<String>,
    /// Templates needed per distinct label (Z).
    pub required_per_label: usize,
    pub templates: BTreeMap<String, Vec<TimeFunctionSet>>,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub model_id: String,
    /// Raw attempts, only recorded when the service runs with the debug
    /// flag.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub debug_attempts: Vec<serde_json::Value>,
}

impl EnrollmentRecord {
    pub fn remaining(&self, label: &str) -> usize {
        let have = self.templates.get(label).map_or(0, Vec::len);
        self.required_per_label.saturating_sub(have)
    }

    /// Remaining templates over the distinct labels of the password.
    pub fn remaining_total(&self) -> usize {
        let mut labels: Vec<&String> = self.password.iter().collect();
        labels.sort();
        labels.dedup();
        labels.into_iter().map(|l| self.remaining(l)).sum()
    }

    pub fn is_complete(&self) -> bool {
        self.remaining_total() == 0
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt store {path}: {message}")]
    Corrupt { path: String, message: String },
}

/// Persistence of enrollment records.
pub trait EnrollmentStore: Send + Sync {
    fn get(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, StoreError>;
    /// Inserts a new record; returns `false` when the user already exists.
    fn create(&self, record: EnrollmentRecord) -> Result<bool, StoreError>;
    /// Replaces an existing record.
    fn put(&self, record: EnrollmentRecord) -> Result<(), StoreError>;
}

#[derive(Debug, Default)]
pub struct MemoryStore {
    records: Mutex<BTreeMap<String, EnrollmentRecord>>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl EnrollmentStore for MemoryStore {
    fn get(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, StoreError> {
        Ok(self
            .records
            .lock()
            .expect("store lock")
            .get(user_id)
            .cloned())
    }

    fn create(&self, record: EnrollmentRecord) -> Result<bool, StoreError> {
        let mut m = self.records.lock().expect("store lock");
        if m.contains_key(&record.user_id) {
            return Ok(false);
        }
        m.insert(record.user_id.clone(), record);
        Ok(true)
    }

    fn put(&self, record: EnrollmentRecord) -> Result<(), StoreError> {
        self.records
            .lock()
            .expect("store lock")
            .insert(record.user_id.clone(), record);
        Ok(())
    }
}

/// All records in one JSON file, rewritten atomically on every change.
#[derive(Debug)]
pub struct JsonFileStore {
    path: PathBuf,
    records: Mutex<BTreeMap<String, EnrollmentRecord>>,
}

impl JsonFileStore {
    /// Opens `path`, creating an empty store if the file does not exist.
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let records = match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: path.display().to_string(),
                message: e.to_string(),
            })?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => {
                return Err(StoreError::Io {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })
            }
        };
        Ok(JsonFileStore {
            path: path.to_path_buf(),
            records: Mutex::new(records),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn flush(&self, records: &BTreeMap<String, EnrollmentRecord>) -> Result<(), StoreError> {
        let io = |e: std::io::Error| StoreError::Io {
            path: self.path.display().to_string(),
            message: e.to_string(),
        };
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let tmp = self.path.with_extension("tmp");
        let bytes = serde_json::to_vec(records).expect("records serialize");
        std::fs::write(&tmp, bytes).map_err(io)?;
        std::fs::rename(&tmp, &self.path).map_err(io)
    }
}

impl EnrollmentStore for JsonFileStore {
    fn get(&self, user_id: &str) -> Result<Option<EnrollmentRecord>, StoreError> {
        Ok(self
            .records
            .lock()
            .expect("store lock")
            .get(user_id)
            .cloned())
    }

    fn create(&self, record: EnrollmentRecord) -> Result<bool, StoreError> {
        let mut m = self.records.lock().expect("store lock");
        if m.contains_key(&record.user_id) {
            return Ok(false);
        }
        m.insert(record.user_id.clone(), record);
        self.flush(&m)?;
        Ok(true)
    }

    fn put(&self, record: EnrollmentRecord) -> Result<(), StoreError> {
        let mut m = self.records.lock().expect("store lock");
        m.insert(record.user_id.clone(), record);
        self.flush(&m)
    }
}
