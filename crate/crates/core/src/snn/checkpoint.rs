//! Model checkpoints and training-history CSV.
//!
//! A checkpoint is a TOML header naming a little-endian `f64` blob that holds
//! the parameter tensors in [`Network::parameters`] order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnNetwork, DenseLayer, EpochRecord, Network, NetworkConfig};
use crate::encoding::EncodingConfig;
use crate::error::{Error, Result};
use crate::pipeline::Model;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model,
    pub patch_size: usize,
    pub seed: u64,
    /// Epoch whose parameters were kept.
    pub epoch: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Snn,
    Ann,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnShape {
    channels: usize,
    hidden: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    kind: Kind,
    patch_size: usize,
    seed: u64,
    epoch: usize,
    data: String,
    endianness: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    network: Option<NetworkConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ann: Option<AnnShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    encoding: Option<EncodingConfig>,
}

fn layers(model: &Model) -> [&DenseLayer; 2] {
    match model {
        Model::Snn { network, .. } => [&network.hidden, &network.output],
        Model::Ann(a) => [&a.hidden, &a.output],
    }
}

fn layers_mut(model: &mut Model) -> [&mut DenseLayer; 2] {
    match model {
        Model::Snn { network, .. } => [&mut network.hidden, &mut network.output],
        Model::Ann(a) => [&mut a.hidden, &mut a.output],
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let data = path
        .with_extension("bin")
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model.bin".into());
    let mut header = Header {
        kind: Kind::Snn,
        patch_size: ckpt.patch_size,
        seed: ckpt.seed,
        epoch: ckpt.epoch,
        data: data.clone(),
        endianness: "little".into(),
        network: None,
        ann: None,
        encoding: None,
    };
    match &ckpt.model {
        Model::Snn { network, encoding } => {
            header.network = Some(network.config.clone());
            header.encoding = Some(encoding.clone());
        }
        Model::Ann(a) => {
            header.kind = Kind::Ann;
            header.ann = Some(AnnShape {
                channels: a.hidden.inputs,
                hidden: a.hidden.outputs,
            });
        }
    }
    let mut blob = Vec::new();
    for layer in layers(&ckpt.model) {
        for v in layer.weights.iter().chain(&layer.bias) {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let text = toml::to_string(&header).map_err(|e| Error::format(path, e.to_string()))?;
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    let blob_path = path.with_file_name(data);
    fs::write(&blob_path, blob).map_err(|e| Error::io(&blob_path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = toml::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if header.endianness != "little" {
        return Err(Error::format(
            path,
            format!("unsupported endianness {:?}", header.endianness),
        ));
    }
    let mut model = match (header.kind, header.network, header.ann, header.encoding) {
        (Kind::Snn, Some(cfg), _, Some(encoding)) => Model::Snn {
            network: Network::zeros(cfg)?,
            encoding,
        },
        (Kind::Ann, _, Some(s), _) => Model::Ann(AnnNetwork::zeros(s.channels, s.hidden)),
        _ => return Err(Error::format(path, "header lacks the model shape or encoder")),
    };
    let blob_path = path.with_file_name(&header.data);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let expected: usize = layers(&model).iter().map(|l| l.weights.len() + l.bias.len()).sum();
    if blob.len() != expected * 8 {
        return Err(Error::format(
            &blob_path,
            format!("{} bytes, expected {}", blob.len(), expected * 8),
        ));
    }
    let mut values = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    for layer in layers_mut(&mut model) {
        for v in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
            *v = values.next().expect("length checked");
        }
    }
    Ok(Checkpoint {
        model,
        patch_size: header.patch_size,
        seed: header.seed,
        epoch: header.epoch,
    })
}

pub fn write_history_csv(path: &Path, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    for rec in history {
        w.serialize(rec).map_err(|e| Error::format(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_history_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    r.deserialize()
        .map(|rec| rec.map_err(|e| Error::format(path, e.to_string())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::EncodingMethod;

    #[test]
    fn snn_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = NetworkConfig::for_method(EncodingMethod::Delta, 8, 0.6);
        let ckpt = Checkpoint {
            model: Model::Snn {
                network: Network::new(cfg, 7).unwrap(),
                encoding: EncodingConfig::new(EncodingMethod::Delta, 1),
            },
            patch_size: 8,
            seed: 7,
            epoch: 3,
        };
        let path = dir.path().join("model.toml");
        write_checkpoint(&path, &ckpt).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), ckpt);
    }

    #[test]
    fn ann_round_trip_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let ckpt = Checkpoint {
            model: Model::Ann(AnnNetwork::new(4, 6, 1).unwrap()),
            patch_size: 4,
            seed: 1,
            epoch: 0,
        };
        let path = dir.path().join("ann.toml");
        write_checkpoint(&path, &ckpt).unwrap();
        assert_eq!(read_checkpoint(&path).unwrap(), ckpt);
        let blob = dir.path().join("ann.bin");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 8]).unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Format { .. })));
    }

    #[test]
    fn history_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let hist = vec![
            EpochRecord {
                epoch: 0,
                train_loss: 1.5,
                val_loss: 1.25,
                lr: 1e-3,
            },
            EpochRecord {
                epoch: 1,
                train_loss: 0.75,
                val_loss: 0.5,
                lr: 5e-4,
            },
        ];
        let path = dir.path().join("history.csv");
        write_history_csv(&path, &hist).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("epoch,train_loss,val_loss,lr"));
        assert_eq!(read_history_csv(&path).unwrap(), hist);
    }
}
