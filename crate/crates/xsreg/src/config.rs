//! TOML configuration files.
//!
//! Every key is optional. Values are applied on top of the built-in defaults,
//! and command-line flags are applied on top of the file:
//!
//! ```toml
//! [registration]
//! seed = 7
//! voxel_frac = 0.2
//! affinity = "similarity"     # or "paper-literal"
//! smooth_weight = 1.0
//! alpha_steps = 100
//! max_inner = 100
//! radius_mode = "max"         # or "percentile95"
//! structure_points = 2000
//! esf_samples = 3000
//! ransac_threshold_factor = 0.5
//! ransac_max_iters = 2000
//! icp_points = 20000
//! icp_max_iters = 50
//! icp_tol = 1e-6
//! icp_gate = 3.0
//! icp_with_scale = false      # also refine scale during ICP
//!
//! [synthesis]
//! preset = "database-c"       # "clean", "identity" or "same-source"
//! scale_range = [3.0, 5.0]
//! rotation_range_deg = [30.0, 60.0]
//! translation_z_fraction_range = [0.0, 0.5]
//! snr_db = 40.0               # a negative value disables noise
//! outlier_fraction = 0.3
//! outlier_offset_fraction = 0.01
//! missing_parts = 10
//! missing_radius_fraction = 0.05
//! view_rotation_deg = 60.0
//! density_stride = 3
//! ```

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;
use xsreg_core::affinity::AffinityMode;
use xsreg_core::preprocess::RadiusMode;
use xsreg_core::synth::SynthesisConfig;
use xsreg_core::RegistrationConfig;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub registration: RegistrationSection,
    #[serde(default)]
    pub synthesis: SynthesisSection,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegistrationSection {
    pub seed: Option<u64>,
    pub voxel_frac: Option<f64>,
    pub affinity: Option<String>,
    pub smooth_weight: Option<f64>,
    pub alpha_steps: Option<usize>,
    pub max_inner: Option<usize>,
    pub radius_mode: Option<String>,
    pub structure_points: Option<usize>,
    pub esf_samples: Option<usize>,
    pub ransac_threshold_factor: Option<f64>,
    pub ransac_max_iters: Option<usize>,
    pub icp_points: Option<usize>,
    pub icp_max_iters: Option<usize>,
    pub icp_tol: Option<f64>,
    pub icp_gate: Option<f64>,
    pub icp_with_scale: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisSection {
    pub preset: Option<String>,
    pub scale_range: Option<(f64, f64)>,
    pub rotation_range_deg: Option<(f64, f64)>,
    pub translation_z_fraction_range: Option<(f64, f64)>,
    pub snr_db: Option<f64>,
    pub outlier_fraction: Option<f64>,
    pub outlier_offset_fraction: Option<f64>,
    pub missing_parts: Option<usize>,
    pub missing_radius_fraction: Option<f64>,
    pub view_rotation_deg: Option<f64>,
    pub density_stride: Option<usize>,
}

pub fn parse_affinity(name: &str) -> Result<AffinityMode> {
    match name {
        "similarity" => Ok(AffinityMode::Similarity),
        "paper-literal" => Ok(AffinityMode::PaperLiteral),
        other => bail!("unknown affinity `{other}` (expected similarity or paper-literal)"),
    }
}

pub fn parse_radius_mode(name: &str) -> Result<RadiusMode> {
    match name {
        "max" => Ok(RadiusMode::Max),
        "percentile95" => Ok(RadiusMode::Percentile95),
        other => bail!("unknown radius mode `{other}` (expected max or percentile95)"),
    }
}

pub fn parse_preset(name: &str, seed: u64) -> Result<SynthesisConfig> {
    SynthesisConfig::preset(name, seed).with_context(|| format!("unknown preset `{name}` (expected database-c, clean, identity or same-source)"))
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply_registration(&self, c: &mut RegistrationConfig) -> Result<()> {
        let r = &self.registration;
        if let Some(v) = r.seed {
            c.seed = v;
        }
        if let Some(v) = r.voxel_frac {
            c.extraction.voxel_radius_fraction = v;
        }
        if let Some(v) = &r.affinity {
            c.affinity = parse_affinity(v)?;
        }
        if let Some(v) = r.smooth_weight {
            c.matching.smooth_weight = v;
        }
        if let Some(v) = r.alpha_steps {
            c.matching.alpha_steps = v;
        }
        if let Some(v) = r.max_inner {
            c.matching.max_inner = v;
        }
        if let Some(v) = &r.radius_mode {
            c.radius_mode = parse_radius_mode(v)?;
        }
        if let Some(v) = r.structure_points {
            c.structure_points = v;
        }
        if let Some(v) = r.esf_samples {
            c.extraction.esf_samples = v;
        }
        if let Some(v) = r.ransac_threshold_factor {
            c.ransac_threshold_factor = v;
        }
        if let Some(v) = r.ransac_max_iters {
            c.ransac_max_iters = v;
        }
        if let Some(v) = r.icp_points {
            c.icp_points = v;
        }
        if let Some(v) = r.icp_max_iters {
            c.icp.max_iters = v;
        }
        if let Some(v) = r.icp_tol {
            c.icp.tol = v;
        }
        if let Some(v) = r.icp_gate {
            c.icp.gate = v;
        }
        if let Some(v) = r.icp_with_scale {
            c.icp.with_scale = v;
        }
        Ok(())
    }

    /// The preset named in the file (or `fallback`) with the file's
    /// overrides applied.
    pub fn synthesis(&self, fallback: &str, seed: u64) -> Result<SynthesisConfig> {
        let s = &self.synthesis;
        let mut c = parse_preset(s.preset.as_deref().unwrap_or(fallback), seed)?;
        if let Some(v) = s.scale_range {
            c.scale_range = v;
        }
        if let Some(v) = s.rotation_range_deg {
            c.rotation_range_deg = v;
        }
        if let Some(v) = s.translation_z_fraction_range {
            c.translation_z_fraction_range = v;
        }
        if let Some(v) = s.snr_db {
            c.snr_db = (v >= 0.0).then_some(v);
        }
        if let Some(v) = s.outlier_fraction {
            c.outlier_fraction = v;
        }
        if let Some(v) = s.outlier_offset_fraction {
            c.outlier_offset_fraction = v;
        }
        if let Some(v) = s.missing_parts {
            c.missing_parts = v;
        }
        if let Some(v) = s.missing_radius_fraction {
            c.missing_radius_fraction = v;
        }
        if let Some(v) = s.view_rotation_deg {
            c.view_rotation_deg = v;
        }
        if let Some(v) = s.density_stride {
            c.density_stride = v;
        }
        c.validate()?;
        Ok(c)
    }
}
