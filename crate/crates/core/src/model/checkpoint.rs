//! Checkpoint container: `FGVLCKPT`, `u32` format version, `u64` header
//! length, JSON header, raw little-endian `f64` tensors in header order, and
//! a trailing SHA-256 of everything before it.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ModelConfig, TrainConfig};
use super::dual::DualEncoder;
use super::layers::Tensors;
use super::text::Vocab;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"FGVLCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const CHECKSUM_LEN: usize = 32;

/// Position of the batch generator, enough to resume it exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub stream: u64,
    pub word_pos: u128,
}

impl RngState {
    pub fn capture(seed: u64, rng: &ChaCha8Rng) -> Self {
        Self {
            seed,
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos(),
        }
    }

    pub fn restore(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: DualEncoder,
    pub train: TrainConfig,
    pub epoch: usize,
    pub rng: RngState,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    model: ModelConfig,
    train: TrainConfig,
    vocab: Vec<String>,
    /// Bit patterns, so standardization reloads exactly.
    pixel_mean_bits: u64,
    pixel_std_bits: u64,
    epoch: usize,
    rng: RngState,
    tensors: Vec<TensorEntry>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let params = &self.model.params;
        let header = Header {
            model: self.model.config.clone(),
            train: self.train.clone(),
            vocab: self.model.vocab.words().to_vec(),
            pixel_mean_bits: self.model.pixel_mean.to_bits(),
            pixel_std_bits: self.model.pixel_std.to_bits(),
            epoch: self.epoch,
            rng: self.rng,
            tensors: params
                .tensors()
                .iter()
                .map(|(name, t)| TensorEntry {
                    name: name.clone(),
                    shape: t.shape().to_vec(),
                })
                .collect(),
        };
        let header = serde_json::to_vec_pretty(&header).expect("header serializes");
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for (_, t) in params.tensors() {
            for v in t.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
            return Err(Error::Checkpoint(format!("{origin}: not a checkpoint file")));
        }
        if bytes.len() < 20 + CHECKSUM_LEN {
            return Err(Error::Checksum(origin.to_string()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "{origin}: format version {version}, this build reads version {CHECKPOINT_VERSION}"
            )));
        }
        let (body, digest) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != digest {
            return Err(Error::Checksum(origin.to_string()));
        }
        let header_len = u64::from_le_bytes(body[12..20].try_into().unwrap()) as usize;
        let header_bytes = body
            .get(20..20 + header_len)
            .ok_or_else(|| Error::Checkpoint(format!("{origin}: header overruns file")))?;
        let header: Header =
            serde_json::from_slice(header_bytes).map_err(|e| Error::Checkpoint(format!("{origin}: header: {e}")))?;

        let vocab = Vocab::from_words(header.vocab);
        let pixel_mean = f64::from_bits(header.pixel_mean_bits);
        let pixel_std = f64::from_bits(header.pixel_std_bits);
        let mut model = DualEncoder::init(&header.model, vocab, pixel_mean, pixel_std, &mut ChaCha8Rng::seed_from_u64(0))?;

        let mut payload = &body[20 + header_len..];
        let mut slots = model.params.tensors_mut();
        if slots.len() != header.tensors.len() {
            return Err(Error::Shape(format!(
                "{origin}: {} tensors stored, model config implies {}",
                header.tensors.len(),
                slots.len()
            )));
        }
        for ((name, slot), entry) in slots.iter_mut().zip(&header.tensors) {
            if *name != entry.name || slot.shape() != entry.shape.as_slice() {
                return Err(Error::Shape(format!(
                    "{origin}: stored tensor {} {:?} does not fit {} {:?}",
                    entry.name,
                    entry.shape,
                    name,
                    slot.shape()
                )));
            }
            let need = 8 * slot.len();
            if payload.len() < need {
                return Err(Error::Checkpoint(format!("{origin}: payload ends inside {name}")));
            }
            for (v, chunk) in slot.iter_mut().zip(payload[..need].chunks_exact(8)) {
                *v = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            payload = &payload[need..];
        }
        if !payload.is_empty() {
            return Err(Error::Checkpoint(format!("{origin}: {} trailing payload bytes", payload.len())));
        }
        drop(slots);
        Ok(Self {
            model,
            train: header.train,
            epoch: header.epoch,
            rng: header.rng,
        })
    }

    /// Fails unless the stored architecture equals `expected`.
    pub fn ensure_compatible(&self, expected: &ModelConfig) -> Result<()> {
        if &self.model.config != expected {
            return Err(Error::Shape(format!(
                "checkpoint architecture {:?} differs from expected {:?}",
                self.model.config, expected
            )));
        }
        Ok(())
    }
}

/// Atomic write: temp file in the same directory, then rename.
pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<()> {
    write_atomic(path, &ckpt.to_bytes())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes, &path.display().to_string())
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp_name = path.file_name().unwrap_or_default().to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
