//! On-disk checkpoints: `manifest.json` plus one little-endian f64 blob per
//! layer (weights row-major, then bias).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Network, Tensor2};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const FORMAT_TAG: &str = "evoprune-checkpoint";
const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerEntry {
    name: String,
    inputs: usize,
    outputs: usize,
    prunable: bool,
    file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    format: String,
    version: u32,
    seed: u64,
    activation: Activation,
    layers: Vec<LayerEntry>,
}

/// Metadata stored next to the weights.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointMeta {
    pub seed: u64,
    pub version: u32,
}

pub fn save_checkpoint(net: &Network, dir: &Path, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let file = format!("{}.bin", layer.name);
        let mut bytes = Vec::with_capacity(8 * (layer.weights.values().len() + layer.bias.len()));
        for v in layer.weights.values().iter().chain(&layer.bias) {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let path = dir.join(&file);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        entries.push(LayerEntry {
            name: layer.name.clone(),
            inputs: layer.inputs(),
            outputs: layer.outputs(),
            prunable: layer.prunable,
            file,
        });
    }
    let manifest = Manifest {
        format: FORMAT_TAG.into(),
        version: CHECKPOINT_VERSION,
        seed,
        activation: net.activation(),
        layers: entries,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_checkpoint(dir: &Path) -> Result<(Network, CheckpointMeta)> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.format != FORMAT_TAG {
        return Err(Error::format(&path, format!("unexpected format tag `{}`", manifest.format)));
    }
    if manifest.version != CHECKPOINT_VERSION {
        return Err(Error::format(
            &path,
            format!("checkpoint version {} (expected {CHECKPOINT_VERSION})", manifest.version),
        ));
    }
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let blob_path = dir.join(&entry.file);
        let bytes = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
        let n_w = entry.inputs * entry.outputs;
        let expected = 8 * (n_w + entry.outputs);
        if bytes.len() != expected {
            return Err(Error::format(
                &blob_path,
                format!("expected {expected} bytes, found {}", bytes.len()),
            ));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        let weights = Tensor2::new(entry.inputs, entry.outputs, values[..n_w].to_vec())
            .map_err(|e| Error::format(&blob_path, e.to_string()))?;
        layers.push(Layer {
            name: entry.name.clone(),
            weights,
            bias: values[n_w..].to_vec(),
            prunable: entry.prunable,
        });
    }
    let net = Network::new(layers, manifest.activation).map_err(|e| Error::format(&path, e.to_string()))?;
    Ok((
        net,
        CheckpointMeta {
            seed: manifest.seed,
            version: manifest.version,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_network;

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut net = init_network(&[3, 5, 4, 2], 11).unwrap();
        net.layers_mut()[2].bias = vec![0.1 + 0.2, -1e-300];
        save_checkpoint(&net, dir.path(), 11).unwrap();
        let (back, meta) = load_checkpoint(dir.path()).unwrap();
        assert_eq!(meta.seed, 11);
        for (a, b) in net.layers().iter().zip(back.layers()) {
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(a.weights.values()), bits(b.weights.values()));
            assert_eq!(bits(&a.bias), bits(&b.bias));
            assert_eq!(a.prunable, b.prunable);
        }
    }

    #[test]
    fn truncated_blob_and_bad_version_are_format_errors() {
        let dir = tempfile::tempdir().unwrap();
        let net = init_network(&[2, 3, 2], 1).unwrap();
        save_checkpoint(&net, dir.path(), 1).unwrap();
        let blob = dir.path().join("fc1.bin");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 3]).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format { .. })));

        save_checkpoint(&net, dir.path(), 1).unwrap();
        let m = dir.path().join(MANIFEST);
        let text = fs::read_to_string(&m).unwrap().replace("\"version\": 1", "\"version\": 9");
        fs::write(&m, text).unwrap();
        assert!(matches!(load_checkpoint(dir.path()), Err(Error::Format { .. })));
    }
}
