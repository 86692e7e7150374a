//! Canonical dataset file: UTF-8 JSON lines.
//!
//! Line 1 is a header object:
//!
//! ```text
//! {"format":"drawpass-dataset","version":1,"provenance":{...}}
//! ```
//!
//! Every following line is one sample:
//!
//! ```text
//! {"user_id":"u001","session":1,"label":"7","repetition":2,"source":"synthetic",
//!  "strokes":[[[x,y,t],[x,y,t],...],[...]]}
//! ```
//!
//! Coordinates are pixels, timestamps milliseconds. Samples are written in
//! dataset order and floats in shortest round-trip form, so export followed
//! by import reproduces every field bit-exactly.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{DataError, Dataset, Provenance};
use crate::signal::StrokeSample;

pub const DATASET_FORMAT: &str = "drawpass-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    #[serde(default)]
    provenance: Provenance,
}

fn sample_line(s: &StrokeSample) -> String {
    serde_json::to_string(s).expect("sample serializes")
}

/// SHA-256 over the canonical sample lines.
pub(crate) fn samples_digest(samples: &[StrokeSample]) -> String {
    let mut h = Sha256::new();
    for s in samples {
        h.update(sample_line(s).as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn write_canonical<W: Write>(w: W, ds: &Dataset) -> std::io::Result<()> {
    let mut w = BufWriter::new(w);
    let header = Header {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        provenance: ds.provenance.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for s in ds.samples() {
        w.write_all(sample_line(s).as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn export_dataset(ds: &Dataset, path: &Path) -> Result<(), DataError> {
    let io = |source| DataError::Io {
        path: path.display().to_string(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let f = std::fs::File::create(path).map_err(io)?;
    write_canonical(f, ds).map_err(io)
}

/// One parsed line: 1-based line number plus the sample or a reason.
pub(crate) type ParsedLine = (usize, Result<StrokeSample, String>);

/// Lenient reader used by the importer: the header must be valid, sample
/// lines are returned individually so bad ones can be quarantined.
pub(crate) fn parse_lines<R: Read>(
    r: R,
    name: &str,
) -> Result<(Provenance, Vec<ParsedLine>), DataError> {
    let mut lines = BufReader::new(r).lines();
    let header_line = match lines.next() {
        None => {
            return Err(DataError::Schema(format!(
                "{name}: empty file, no header line"
            )));
        }
        Some(l) => l.map_err(|source| DataError::Io {
            path: name.into(),
            source,
        })?,
    };
    let header: Header = serde_json::from_str(&header_line).map_err(|e| DataError::Parse {
        location: format!("{name}:1"),
        message: format!("bad header: {e}"),
    })?;
    if header.format != DATASET_FORMAT {
        return Err(DataError::Schema(format!(
            "{name}: format {:?} is not {DATASET_FORMAT:?}",
            header.format
        )));
    }
    if header.version != DATASET_VERSION {
        return Err(DataError::Schema(format!(
            "{name}: unsupported format version {}",
            header.version
        )));
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|source| DataError::Io {
            path: name.into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<StrokeSample>(&line)
            .map_err(|e| format!("unparseable sample: {e}"))
            .and_then(|s| s.validate().map(|_| s).map_err(|e| e.to_string()));
        out.push((i + 2, parsed));
    }
    Ok((header.provenance, out))
}

/// Strict reader: any invalid line is an error. The header provenance is
/// kept, so `read_canonical(write_canonical(d)) == d`.
pub fn read_canonical<R: Read>(r: R, name: &str) -> Result<Dataset, DataError> {
    let (provenance, lines) = parse_lines(r, name)?;
    let samples = lines
        .into_iter()
        .map(|(n, s)| {
            s.map_err(|message| DataError::Parse {
                location: format!("{name}:{n}"),
                message,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Dataset::new(samples, provenance)
}

pub fn load_dataset(path: &Path) -> Result<Dataset, DataError> {
    let f = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_canonical(f, &path.display().to_string())
}
