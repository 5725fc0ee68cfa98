//! Versioned binary checkpoint files.
//!
//! Layout (little-endian): magic `MNPC`, version u32, descriptor length u64,
//! descriptor (UTF-8 JSON: named network architectures plus caller metadata),
//! CRC32 over descriptor and payload, then the flat f64 parameter arrays in
//! layer order (weights row-major, then bias, per layer, per network).

use super::{Activation, DenseLayer, NetworkParams};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

pub const MAGIC: &[u8; 4] = b"MNPC";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("checksum mismatch: file is corrupted")]
    Checksum,
    #[error("truncated checkpoint file")]
    Truncated,
    #[error("descriptor: {0}")]
    Descriptor(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerDesc {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    dropout: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NetworkDesc {
    name: String,
    layers: Vec<LayerDesc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Descriptor {
    networks: Vec<NetworkDesc>,
    metadata: serde_json::Value,
}

/// A named bundle of networks plus caller metadata. Names fix the on-disk
/// payload order.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub networks: Vec<(String, NetworkParams)>,
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    pub fn network(&self, name: &str) -> Option<&NetworkParams> {
        self.networks.iter().find(|(n, _)| n == name).map(|(_, p)| p)
    }
}

fn descriptor_of(ckpt: &Checkpoint) -> Descriptor {
    Descriptor {
        networks: ckpt
            .networks
            .iter()
            .map(|(name, params)| NetworkDesc {
                name: name.clone(),
                layers: params
                    .layers
                    .iter()
                    .zip(&params.dropout)
                    .map(|(l, d)| LayerDesc {
                        in_dim: l.in_dim,
                        out_dim: l.out_dim,
                        activation: l.activation,
                        dropout: *d,
                    })
                    .collect(),
            })
            .collect(),
        metadata: ckpt.metadata.clone(),
    }
}

pub fn save_checkpoint(ckpt: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let descriptor = serde_json::to_vec(&descriptor_of(ckpt))
        .map_err(|e| CheckpointError::Descriptor(e.to_string()))?;

    let mut payload = Vec::new();
    for (_, params) in &ckpt.networks {
        for layer in &params.layers {
            for v in layer.weights.iter().chain(&layer.bias) {
                payload.extend_from_slice(&v.to_le_bytes());
            }
        }
    }

    let mut hasher = crc32fast::Hasher::new();
    hasher.update(&descriptor);
    hasher.update(&payload);
    let crc = hasher.finalize();

    let mut file = fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&VERSION.to_le_bytes())?;
    file.write_all(&(descriptor.len() as u64).to_le_bytes())?;
    file.write_all(&descriptor)?;
    file.write_all(&crc.to_le_bytes())?;
    file.write_all(&payload)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let mut file = fs::File::open(path)?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)?;
    load_checkpoint_bytes(&bytes)
}

fn take<'a>(bytes: &mut &'a [u8], n: usize) -> Result<&'a [u8], CheckpointError> {
    if bytes.len() < n {
        return Err(CheckpointError::Truncated);
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

pub fn load_checkpoint_bytes(mut bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if take(&mut bytes, 4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let desc_len = u64::from_le_bytes(take(&mut bytes, 8)?.try_into().expect("8 bytes")) as usize;
    let descriptor_bytes = take(&mut bytes, desc_len)?;
    let crc_stored = u32::from_le_bytes(take(&mut bytes, 4)?.try_into().expect("4 bytes"));
    let payload = bytes;

    let mut hasher = crc32fast::Hasher::new();
    hasher.update(descriptor_bytes);
    hasher.update(payload);
    if hasher.finalize() != crc_stored {
        return Err(CheckpointError::Checksum);
    }

    let descriptor: Descriptor = serde_json::from_slice(descriptor_bytes)
        .map_err(|e| CheckpointError::Descriptor(e.to_string()))?;

    let mut cursor = payload;
    let mut networks = Vec::with_capacity(descriptor.networks.len());
    for net in &descriptor.networks {
        let mut layers = Vec::with_capacity(net.layers.len());
        let mut dropout = Vec::with_capacity(net.layers.len());
        for ld in &net.layers {
            let n_w = ld.in_dim * ld.out_dim;
            let mut layer = DenseLayer::zeros(ld.in_dim, ld.out_dim, ld.activation);
            for w in layer.weights.iter_mut() {
                *w = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().expect("8 bytes"));
            }
            for b in layer.bias.iter_mut() {
                *b = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().expect("8 bytes"));
            }
            debug_assert_eq!(layer.weights.len(), n_w);
            layers.push(layer);
            dropout.push(ld.dropout);
        }
        networks.push((net.name.clone(), NetworkParams::with_dropout(layers, dropout)));
    }
    if !cursor.is_empty() {
        return Err(CheckpointError::Descriptor("trailing bytes after payload".into()));
    }
    Ok(Checkpoint { networks, metadata: descriptor.metadata })
}
