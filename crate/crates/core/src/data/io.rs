//! On-disk dataset format.
//!
//! Every tensor is a pair of files: a TOML header (`*.hdr`) describing shape,
//! dtype, endianness and metadata, and a raw little-endian blob (`*.bin`)
//! named by the header's `data` key. Spectrograms are `f32`, masks `u8` (0/1).
//! A dataset directory holds `manifest.toml`, which lists header paths
//! relative to the manifest and, for generated sets, the generator config.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::generator::GeneratorConfig;
use super::{contamination_stats, RfiMask, Spectrogram, SpectrogramMeta};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
struct TensorHeader {
    shape: [usize; 2],
    dtype: String,
    endianness: String,
    data: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<SpectrogramMeta>,
}

/// Paths of one spectrogram/mask pair, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub spectrogram: PathBuf,
    pub mask: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub contamination_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorConfig>,
    #[serde(default)]
    pub train: Vec<ManifestItem>,
    #[serde(default)]
    pub test: Vec<ManifestItem>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetItem {
    pub spectrogram: Spectrogram,
    pub mask: RfiMask,
}

impl DatasetItem {
    pub fn new(spectrogram: Spectrogram, mask: RfiMask) -> Result<Self> {
        if spectrogram.shape() != mask.shape() {
            return Err(Error::Validation(format!(
                "spectrogram shape {:?} differs from mask shape {:?}",
                spectrogram.shape(),
                mask.shape()
            )));
        }
        Ok(Self { spectrogram, mask })
    }
}

/// An in-memory train/test dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<DatasetItem>,
    pub test: Vec<DatasetItem>,
    pub generator: Option<GeneratorConfig>,
}

impl Dataset {
    pub fn all_items(&self) -> impl Iterator<Item = &DatasetItem> {
        self.train.iter().chain(self.test.iter())
    }

    pub fn contamination(&self) -> Result<f64> {
        contamination_stats(self.all_items().map(|i| &i.mask))
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn blob_name(header: &Path) -> String {
    header
        .with_extension("bin")
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data.bin".into())
}

fn write_tensor(
    header_path: &Path,
    shape: (usize, usize),
    dtype: &str,
    meta: Option<SpectrogramMeta>,
    blob: &[u8],
) -> Result<()> {
    let data = blob_name(header_path);
    let header = TensorHeader {
        shape: [shape.0, shape.1],
        dtype: dtype.into(),
        endianness: "little".into(),
        data: data.clone(),
        meta,
    };
    let text = toml::to_string(&header).map_err(|e| Error::format(header_path, e.to_string()))?;
    write_file(header_path, text.as_bytes())?;
    write_file(&header_path.with_file_name(data), blob)
}

fn read_tensor(header_path: &Path, dtype: &str) -> Result<(TensorHeader, Vec<u8>)> {
    let text = fs::read_to_string(header_path).map_err(|e| Error::io(header_path, e))?;
    let header: TensorHeader = toml::from_str(&text).map_err(|e| Error::format(header_path, e.to_string()))?;
    if header.dtype != dtype {
        return Err(Error::format(
            header_path,
            format!("dtype {:?}, expected {dtype:?}", header.dtype),
        ));
    }
    if header.endianness != "little" {
        return Err(Error::format(
            header_path,
            format!("unsupported endianness {:?}", header.endianness),
        ));
    }
    let blob_path = header_path.with_file_name(&header.data);
    let blob = fs::read(&blob_path).map_err(|e| Error::io(&blob_path, e))?;
    let width = if dtype == "f32" { 4 } else { 1 };
    let expected = header.shape[0] * header.shape[1] * width;
    if blob.len() != expected {
        return Err(Error::format(
            &blob_path,
            format!("{} bytes, expected {expected}", blob.len()),
        ));
    }
    Ok((header, blob))
}

pub fn write_spectrogram(header_path: &Path, spec: &Spectrogram) -> Result<()> {
    let blob: Vec<u8> = spec.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_tensor(header_path, spec.shape(), "f32", Some(spec.meta.clone()), &blob)
}

pub fn read_spectrogram(header_path: &Path) -> Result<Spectrogram> {
    let (header, blob) = read_tensor(header_path, "f32")?;
    let values = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Spectrogram::new(
        header.shape[0],
        header.shape[1],
        values,
        header.meta.unwrap_or_default(),
    )
    .map_err(|e| Error::format(header_path, e.to_string()))
}

pub fn write_mask(header_path: &Path, mask: &RfiMask) -> Result<()> {
    let blob: Vec<u8> = mask.flags().iter().map(|f| *f as u8).collect();
    write_tensor(header_path, mask.shape(), "u8", None, &blob)
}

pub fn read_mask(header_path: &Path) -> Result<RfiMask> {
    let (header, blob) = read_tensor(header_path, "u8")?;
    if let Some(bad) = blob.iter().find(|b| **b > 1) {
        return Err(Error::format(header_path, format!("mask byte {bad} is not 0/1")));
    }
    RfiMask::new(
        header.shape[0],
        header.shape[1],
        blob.into_iter().map(|b| b == 1).collect(),
    )
}

/// Writes every tensor plus `manifest.toml` under `dir` and returns the manifest.
pub fn save_dataset(dir: &Path, dataset: &Dataset) -> Result<DatasetManifest> {
    let write_split = |split: &str, items: &[DatasetItem]| -> Result<Vec<ManifestItem>> {
        items
            .iter()
            .enumerate()
            .map(|(i, item)| {
                let spectrogram = PathBuf::from(split).join(format!("{i:04}.spec.hdr"));
                let mask = PathBuf::from(split).join(format!("{i:04}.mask.hdr"));
                write_spectrogram(&dir.join(&spectrogram), &item.spectrogram)?;
                write_mask(&dir.join(&mask), &item.mask)?;
                Ok(ManifestItem { spectrogram, mask })
            })
            .collect()
    };
    let train = write_split("train", &dataset.train)?;
    let test = write_split("test", &dataset.test)?;
    let manifest = DatasetManifest {
        contamination_fraction: if dataset.train.is_empty() && dataset.test.is_empty() {
            0.0
        } else {
            dataset.contamination()?
        },
        generator_seed: dataset.generator.as_ref().map(|g| g.seed),
        generator: dataset.generator.clone(),
        train,
        test,
    };
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
    write_file(&path, text.as_bytes())?;
    Ok(manifest)
}

/// Loads a dataset from a manifest file, or from a directory containing one.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: DatasetManifest = toml::from_str(&text).map_err(|e| Error::format(&manifest_path, e.to_string()))?;
    let load_split = |items: &[ManifestItem]| -> Result<Vec<DatasetItem>> {
        items
            .iter()
            .map(|item| {
                let spec_path = root.join(&item.spectrogram);
                let mask_path = root.join(&item.mask);
                for p in [&spec_path, &mask_path] {
                    if !p.is_file() {
                        return Err(Error::Validation(format!(
                            "manifest references missing file {}",
                            p.display()
                        )));
                    }
                }
                DatasetItem::new(read_spectrogram(&spec_path)?, read_mask(&mask_path)?)
            })
            .collect()
    };
    Ok(Dataset {
        train: load_split(&manifest.train)?,
        test: load_split(&manifest.test)?,
        generator: manifest.generator,
    })
}
