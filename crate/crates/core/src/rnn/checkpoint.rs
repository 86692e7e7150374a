//! Binary model checkpoints.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    b"DPSM"
//! version  u32                     (currently 1)
//! hlen     u32                     length of the JSON header
//! header   hlen bytes of UTF-8 JSON: arch, seed, epochs_trained,
//!          tensor names and lengths, optional optimizer step
//! params   f64 values of every tensor, in header order
//! [adam]   if the header carries adam_step: first moments, then second
//!          moments, same order
//! digest   32-byte SHA-256 of everything above
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

use super::adam::AdamState;
use super::siamese::{SiameseArch, SiameseModel, SiameseParams};
use super::train::TrainState;
use super::RnnError;

const MAGIC: &[u8; 4] = b"DPSM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    arch: SiameseArch,
    seed: u64,
    epochs_trained: usize,
    tensors: Vec<TensorEntry>,
    adam_step: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    len: usize,
}

fn push_tensors(out: &mut Vec<u8>, p: &SiameseParams) {
    for t in p.tensors() {
        for v in t {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

/// Serializes the model and, if given, the optimizer state.
pub fn encode(model: &SiameseModel, adam: Option<&AdamState>) -> Vec<u8> {
    let header = Header {
        arch: model.arch,
        seed: model.seed,
        epochs_trained: model.epochs_trained,
        tensors: SiameseParams::tensor_names()
            .into_iter()
            .zip(model.params.tensors())
            .map(|(name, t)| TensorEntry { name, len: t.len() })
            .collect(),
        adam_step: adam.map(|a| a.step),
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    push_tensors(&mut out, &model.params);
    if let Some(a) = adam {
        push_tensors(&mut out, &a.m);
        push_tensors(&mut out, &a.v);
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], RnnError> {
        if self.pos + n > self.bytes.len() {
            return Err(RnnError::Checkpoint("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, RnnError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn fill(&mut self, p: &mut SiameseParams) -> Result<(), RnnError> {
        for t in p.tensors_mut() {
            for v in t.iter_mut() {
                *v = f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
            }
        }
        Ok(())
    }
}

/// Parses a checkpoint; the optimizer state is returned when present.
pub fn decode(bytes: &[u8]) -> Result<(SiameseModel, Option<AdamState>), RnnError> {
    if bytes.len() < 32 + 12 {
        return Err(RnnError::Checkpoint("file too short".into()));
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(RnnError::Checkpoint("digest mismatch".into()));
    }
    let mut r = Reader {
        bytes: body,
        pos: 0,
    };
    if r.take(4)? != MAGIC {
        return Err(RnnError::Checkpoint("not a model checkpoint".into()));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(RnnError::Checkpoint(format!(
            "unsupported version {version}"
        )));
    }
    let hlen = r.u32()? as usize;
    let header: Header = serde_json::from_slice(r.take(hlen)?)
        .map_err(|e| RnnError::Checkpoint(format!("bad header: {e}")))?;
    let mut params = SiameseParams::zeros(&header.arch);
    let names = SiameseParams::tensor_names();
    let layout_ok = header.tensors.len() == names.len()
        && header
            .tensors
            .iter()
            .zip(names.iter().zip(params.tensors()))
            .all(|(e, (n, t))| &e.name == n && e.len == t.len());
    if !layout_ok {
        return Err(RnnError::Checkpoint(
            "tensor layout does not match architecture".into(),
        ));
    }
    r.fill(&mut params)?;
    let adam = match header.adam_step {
        None => None,
        Some(step) => {
            let mut m = params.zeros_like();
            let mut v = params.zeros_like();
            r.fill(&mut m)?;
            r.fill(&mut v)?;
            Some(AdamState { step, m, v })
        }
    };
    if r.pos != body.len() {
        return Err(RnnError::Checkpoint("trailing bytes".into()));
    }
    Ok((
        SiameseModel {
            arch: header.arch,
            seed: header.seed,
            params,
            epochs_trained: header.epochs_trained,
        },
        adam,
    ))
}

pub fn save(path: &Path, model: &SiameseModel, adam: Option<&AdamState>) -> Result<(), RnnError> {
    std::fs::write(path, encode(model, adam))
        .map_err(|e| RnnError::Io(format!("{}: {e}", path.display())))
}

pub fn load(path: &Path) -> Result<(SiameseModel, Option<AdamState>), RnnError> {
    let bytes =
        std::fs::read(path).map_err(|e| RnnError::Io(format!("{}: {e}", path.display())))?;
    decode(&bytes)
}

/// Loads a checkpoint as a resumable training state (fresh moments when the
/// file has none).
pub fn load_state(path: &Path) -> Result<TrainState, RnnError> {
    let (model, adam) = load(path)?;
    let adam = adam.unwrap_or_else(|| AdamState::new(&model.params));
    Ok(TrainState { model, adam })
}
