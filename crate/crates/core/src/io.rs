//! On-disk formats.
//!
//! A field is a directory holding `manifest.json` and one blob per component,
//! `comp_XXX.bin`, each a row-major array over `(x₁, …, x_{2n})` (last axis
//! fastest) of little-endian `f64` pairs `(re, im)`. The manifest records a
//! CRC-32 per blob.
//!
//! A trajectory is a directory with `manifest.json`, the snapshot fields
//! `u_%06d/` and `p_%06d/`, and `diagnostics.csv` with columns
//! `t, energy, dbar_norm_sq, dbar_star_residual, max_abs_u, lps_accum`.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::{SimConfig, StepDiagnostics, Trajectory};
use crate::error::{Error, Result};
use crate::forms::{binomial, FormField, MultiIndex};
use crate::spectral::{Representation, SpectralGrid, C64};

pub const SCHEMA_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const DIAGNOSTICS: &str = "diagnostics.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ByteLayout {
    pub scalar: String,
    pub order: String,
    pub bytes_per_component: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub file: String,
    pub crc32: u32,
}

/// Provenance recorded alongside a field.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    /// Simulation time of the snapshot.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldManifest {
    pub schema_version: u32,
    pub n: usize,
    pub q: usize,
    #[serde(rename = "N")]
    pub size: usize,
    pub representation: Representation,
    pub components: Vec<MultiIndex>,
    pub layout: ByteLayout,
    pub blobs: Vec<Blob>,
    #[serde(default)]
    pub metadata: FieldMetadata,
}

impl FieldManifest {
    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Version {
                found: self.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        let count = binomial(self.n, self.q);
        if self.q > self.n || self.components.len() != count || self.blobs.len() != count {
            return Err(Error::Format(format!(
                "(0,{}) field in dimension {} needs {count} components",
                self.q, self.n
            )));
        }
        if self.components != MultiIndex::enumerate(self.n, self.q) {
            return Err(Error::Format("component list is not in lexicographic order".into()));
        }
        let expect = self.size.pow(2 * self.n as u32) * 16;
        if self.layout.bytes_per_component != expect {
            return Err(Error::Format(format!(
                "layout declares {} bytes per component, grid needs {expect}",
                self.layout.bytes_per_component
            )));
        }
        Ok(())
    }
}

fn encode(data: &[C64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 16);
    for v in data {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}

fn decode(bytes: &[u8]) -> Vec<C64> {
    bytes
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `u` as a field directory at `dir`, creating it if needed.
pub fn save_field(dir: &Path, u: &FormField, metadata: &FieldMetadata) -> Result<()> {
    fs::create_dir_all(dir)?;
    let grid = u.grid();
    let mut blobs = Vec::with_capacity(u.num_components());
    for (c, data) in u.components().iter().enumerate() {
        let file = format!("comp_{c:03}.bin");
        let bytes = encode(data);
        blobs.push(Blob {
            file: file.clone(),
            crc32: crc32fast::hash(&bytes),
        });
        fs::write(dir.join(&file), bytes)?;
    }
    let manifest = FieldManifest {
        schema_version: SCHEMA_VERSION,
        n: grid.n(),
        q: u.degree(),
        size: grid.size(),
        representation: u.repr(),
        components: u.indices(),
        layout: ByteLayout {
            scalar: "f64le (re, im)".into(),
            order: "row-major x1..x2n, last axis fastest".into(),
            bytes_per_component: grid.len() * 16,
        },
        blobs,
        metadata: metadata.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn load_manifest(dir: &Path) -> Result<FieldManifest> {
    let manifest: FieldManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    manifest.validate()?;
    Ok(manifest)
}

/// Reads a field directory, reusing `grid` when it matches the manifest.
pub fn load_field_on(dir: &Path, grid: Option<&Arc<SpectralGrid>>) -> Result<(FormField, FieldManifest)> {
    let manifest = load_manifest(dir)?;
    let grid = match grid {
        Some(g) if g.n() == manifest.n && g.size() == manifest.size => Arc::clone(g),
        Some(_) => return Err(Error::GridMismatch),
        None => SpectralGrid::new(manifest.n, manifest.size)?,
    };
    let mut components = Vec::with_capacity(manifest.blobs.len());
    for blob in &manifest.blobs {
        let bytes = fs::read(dir.join(&blob.file))?;
        if crc32fast::hash(&bytes) != blob.crc32 {
            return Err(Error::Checksum {
                file: blob.file.clone(),
            });
        }
        if bytes.len() != manifest.layout.bytes_per_component {
            return Err(Error::Truncated {
                file: blob.file.clone(),
                expected: manifest.layout.bytes_per_component,
                found: bytes.len(),
            });
        }
        components.push(decode(&bytes));
    }
    let u = FormField::from_components(&grid, manifest.q, manifest.representation, components)?;
    Ok((u, manifest))
}

pub fn load_field(dir: &Path) -> Result<FormField> {
    Ok(load_field_on(dir, None)?.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct TrajectoryManifest {
    schema_version: u32,
    config_hash: String,
    config: SimConfig,
    dt: f64,
    times: Vec<f64>,
}

fn snapshot_dirs(m: usize) -> (String, String) {
    (format!("u_{m:06}"), format!("p_{m:06}"))
}

/// Writes a trajectory directory. The output depends only on the trajectory,
/// so identical runs produce identical bytes.
pub fn save_trajectory(dir: &Path, traj: &Trajectory) -> Result<()> {
    traj.check()?;
    fs::create_dir_all(dir)?;
    let hash = traj.config.hash();
    for (m, ((u, p), &t)) in traj.velocity.iter().zip(&traj.pressure).zip(&traj.times).enumerate() {
        let meta = FieldMetadata {
            config_hash: Some(hash.clone()),
            time: Some(t),
            seed: Some(traj.config.seed),
        };
        let (ud, pd) = snapshot_dirs(m);
        save_field(&dir.join(ud), u, &meta)?;
        save_field(&dir.join(pd), p, &meta)?;
    }
    let mut writer = csv::Writer::from_path(dir.join(DIAGNOSTICS))?;
    for row in &traj.diagnostics {
        writer.serialize(row)?;
    }
    writer.flush()?;
    let manifest = TrajectoryManifest {
        schema_version: SCHEMA_VERSION,
        config_hash: hash,
        config: traj.config.clone(),
        dt: traj.dt,
        times: traj.times.clone(),
    };
    write_json(&dir.join(MANIFEST), &manifest)
}

pub fn load_trajectory(dir: &Path) -> Result<Trajectory> {
    let manifest: TrajectoryManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Version {
            found: manifest.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    if manifest.times.is_empty() {
        return Err(Error::Format("trajectory has no snapshots".into()));
    }
    let grid = SpectralGrid::new(manifest.config.n, manifest.config.size)?;
    let mut velocity = Vec::with_capacity(manifest.times.len());
    let mut pressure = Vec::with_capacity(manifest.times.len());
    for m in 0..manifest.times.len() {
        let (ud, pd) = snapshot_dirs(m);
        velocity.push(load_field_on(&dir.join(ud), Some(&grid))?.0);
        pressure.push(load_field_on(&dir.join(pd), Some(&grid))?.0);
    }
    let mut reader = csv::Reader::from_path(dir.join(DIAGNOSTICS))?;
    let diagnostics = reader.deserialize().collect::<std::result::Result<Vec<StepDiagnostics>, _>>()?;
    let traj = Trajectory {
        config: manifest.config,
        dt: manifest.dt,
        times: manifest.times,
        velocity,
        pressure,
        diagnostics,
    };
    traj.check()?;
    Ok(traj)
}
