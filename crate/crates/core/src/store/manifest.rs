//! JSON manifest describing a dataset directory.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor::{read_tensor, DType};
use crate::error::{Error, Result};
use crate::noise::NoiseMeta;
use crate::phantom::Family;
use crate::rng::{ALGORITHM, NOISE_STREAM, PHANTOM_STREAM};
use crate::scenario::Scenario;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = concat!("tdinv ", env!("CARGO_PKG_VERSION"));
/// Value of [`Manifest::measurement`]: receiver `E_z` minus the empty-domain run.
pub const SCATTERED_EZ: &str = "scattered_ez";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngInfo {
    pub algorithm: String,
    pub phantom_stream: u64,
    pub noise_stream: u64,
}

impl Default for RngInfo {
    fn default() -> Self {
        RngInfo { algorithm: ALGORITHM.to_string(), phantom_stream: PHANTOM_STREAM, noise_stream: NOISE_STREAM }
    }
}

/// One sample. Paths are relative to the dataset directory, `/`-separated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    pub family: Family,
    pub seed: u64,
    pub truth_eps: String,
    pub truth_sigma: String,
    #[serde(default)]
    pub clean: Option<String>,
    #[serde(default)]
    pub noisy: Option<String>,
    #[serde(default)]
    pub noise: Option<NoiseMeta>,
    /// Generator parameters (shapes, glyph labels, ...).
    #[serde(default)]
    pub phantom: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub tool_version: String,
    pub rng: RngInfo,
    pub scenario: Scenario,
    pub measurement: String,
    pub families: Vec<Family>,
    /// Largest truth permittivity in the dataset, the PMSE normalizer `A`.
    pub eps_max: f64,
    pub samples: Vec<SampleEntry>,
}

impl Manifest {
    pub fn new(scenario: Scenario) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            rng: RngInfo::default(),
            scenario,
            measurement: SCATTERED_EZ.to_string(),
            families: Vec::new(),
            eps_max: 1.0,
            samples: Vec::new(),
        }
    }

    pub fn sample(&self, id: &str) -> Result<&SampleEntry> {
        self.samples.iter().find(|s| s.id == id).ok_or_else(|| Error::Manifest(format!("no sample with id {id:?}")))
    }

    /// Parses `dir/manifest.json` and checks its structure. Referenced files
    /// are not opened; see [`Manifest::validate_files`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let m: Manifest =
            serde_json::from_str(&text).map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    /// Writes `dir/manifest.json` through a temporary file and a rename.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        self.validate()?;
        let dir = dir.as_ref();
        let tmp = dir.join(format!("{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        let path = dir.join(MANIFEST_FILE);
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Structural checks: version, scenario, unique ids, relative paths.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Manifest(format!("unsupported format version {}", self.format_version)));
        }
        self.scenario.validate()?;
        let mut seen = HashSet::new();
        for s in &self.samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::Manifest(format!("duplicate sample id {:?}", s.id)));
            }
            for p in s.paths() {
                if p.is_empty() || p.starts_with('/') || p.split('/').any(|c| c == "..") {
                    return Err(Error::Manifest(format!("sample {}: path {p:?} must be relative", s.id)));
                }
            }
            if s.noisy.is_some() != s.noise.is_some() {
                return Err(Error::Manifest(format!(
                    "sample {}: noisy file and noise metadata must come together",
                    s.id
                )));
            }
        }
        Ok(())
    }

    /// Opens every referenced tensor and checks dtype and shape.
    pub fn validate_files(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let n = self.scenario.imaging_cells;
        let meas = [self.scenario.n_receivers, self.scenario.n_samples];
        for s in &self.samples {
            let check = |rel: &str, dims: [usize; 2]| -> Result<()> {
                let t = read_tensor(dir.join(rel)).map_err(|e| Error::Manifest(format!("sample {}: {e}", s.id)))?;
                if t.dtype() != DType::F32 || t.dims() != dims {
                    return Err(Error::Manifest(format!(
                        "sample {}: {rel} holds {:?} {:?}, expected F32 {dims:?}",
                        s.id,
                        t.dtype(),
                        t.dims()
                    )));
                }
                Ok(())
            };
            check(&s.truth_eps, [n, n])?;
            check(&s.truth_sigma, [n, n])?;
            for p in s.clean.iter().chain(&s.noisy) {
                check(p, meas)?;
            }
        }
        Ok(())
    }
}

impl SampleEntry {
    pub fn paths(&self) -> impl Iterator<Item = &str> {
        [Some(&self.truth_eps), Some(&self.truth_sigma), self.clean.as_ref(), self.noisy.as_ref()]
            .into_iter()
            .flatten()
            .map(String::as_str)
    }
}
