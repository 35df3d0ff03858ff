//! Dataset directory format: `manifest.json` plus three little-endian `f32`
//! blobs (`features.f32`, `phase_labels.f32`, `mag_labels_db.f32`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, SamplingBounds};
use crate::array_model::ArrayConfig;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const FEATURES: &str = "features.f32";
const PHASES: &str = "phase_labels.f32";
const MAGNITUDES: &str = "mag_labels_db.f32";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub count: usize,
    pub seed: u64,
    pub bounds: SamplingBounds,
    pub array_config: ArrayConfig<f64>,
    pub split_fraction: f64,
    #[serde(default)]
    pub canonical_order: bool,
    #[serde(default)]
    pub clamped_label_entries: usize,
}

impl DatasetManifest {
    fn of(d: &Dataset) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            n: d.num_elements(),
            k: d.num_users,
            count: d.len(),
            seed: d.seed,
            bounds: d.bounds,
            array_config: d.array_config,
            split_fraction: d.split_fraction,
            canonical_order: d.canonical_order,
            clamped_label_entries: d.clamped_label_entries,
        }
    }

    fn validate(&self) -> Result<()> {
        let c = &self.array_config;
        ArrayConfig::new(c.num_elements(), c.element_spacing(), c.carrier_frequency())
            .map_err(|e| Error::Manifest(e.to_string()))?;
        if c.num_elements() != self.n {
            return Err(Error::Manifest(format!(
                "N = {} disagrees with array_config.num_elements = {}",
                self.n,
                c.num_elements()
            )));
        }
        if self.k == 0 {
            return Err(Error::Manifest("K must be >= 1".into()));
        }
        if !(self.split_fraction > 0.0 && self.split_fraction <= 1.0) {
            return Err(Error::Manifest(format!(
                "split_fraction {} outside (0, 1]",
                self.split_fraction
            )));
        }
        self.bounds
            .validate()
            .map_err(|e| Error::Manifest(e.to_string()))
    }
}

pub(crate) fn write_blob(path: &Path, values: &[f32]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes)?;
    Ok(())
}

pub(crate) fn read_blob(dir: &Path, name: &str, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(dir.join(name))?;
    let expected = (expected_len * 4) as u64;
    if bytes.len() as u64 != expected {
        return Err(Error::SizeMismatch {
            file: name.to_string(),
            expected,
            found: bytes.len() as u64,
        });
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Parses a JSON manifest, checking `format_version` before the schema.
pub(crate) fn parse_versioned<M: serde::de::DeserializeOwned>(text: &str, expected: u32) -> Result<M> {
    let raw: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Manifest(e.to_string()))?;
    let version = raw
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Manifest("missing format_version".into()))?;
    if version != u64::from(expected) {
        return Err(Error::VersionMismatch {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected,
        });
    }
    serde_json::from_value(raw).map_err(|e| Error::Manifest(e.to_string()))
}

pub fn save_dataset(d: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    write_blob(&dir.join(FEATURES), d.features())?;
    write_blob(&dir.join(PHASES), d.phase_labels())?;
    write_blob(&dir.join(MAGNITUDES), d.magnitude_labels_db())?;
    let manifest = serde_json::to_string_pretty(&DatasetManifest::of(d))?;
    fs::write(dir.join(MANIFEST), manifest)?;
    Ok(())
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join(MANIFEST))?;
    let manifest: DatasetManifest = parse_versioned(&text, FORMAT_VERSION)?;
    manifest.validate()?;

    let features = read_blob(dir, FEATURES, manifest.count * 2 * manifest.k)?;
    let phases = read_blob(dir, PHASES, manifest.count * manifest.n)?;
    let magnitudes = read_blob(dir, MAGNITUDES, manifest.count * manifest.n)?;
    Ok(Dataset::from_parts(&manifest, features, phases, magnitudes))
}
