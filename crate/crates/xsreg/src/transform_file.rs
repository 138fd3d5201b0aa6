//! Transform interchange: JSON `{scale, rotation, translation}` with a
//! row-major rotation, and a whitespace-separated row-major 4×4 matrix.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use xsreg_core::SimilarityTransform;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformJson {
    pub scale: f64,
    pub rotation: [f64; 9],
    pub translation: [f64; 3],
}

impl From<&SimilarityTransform> for TransformJson {
    fn from(t: &SimilarityTransform) -> Self {
        let r = &t.rotation;
        Self {
            scale: t.scale,
            rotation: [r[(0, 0)], r[(0, 1)], r[(0, 2)], r[(1, 0)], r[(1, 1)], r[(1, 2)], r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            translation: [t.translation.x, t.translation.y, t.translation.z],
        }
    }
}

impl TransformJson {
    /// Checks that the rotation is orthonormal with determinant +1 and the
    /// scale positive.
    pub fn to_transform(&self) -> Result<SimilarityTransform> {
        let t = SimilarityTransform::new(self.scale, Matrix3::from_row_slice(&self.rotation), Vector3::from(self.translation));
        t.validate(1e-6)?;
        Ok(t)
    }
}

pub fn transform_to_json(t: &SimilarityTransform) -> String {
    let mut s = serde_json::to_string_pretty(&TransformJson::from(t)).expect("plain numbers serialize");
    s.push('\n');
    s
}

pub fn write_transform_json(path: &Path, t: &SimilarityTransform) -> Result<()> {
    fs::write(path, transform_to_json(t)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_transform_json(path: &Path) -> Result<SimilarityTransform> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let json: TransformJson = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    json.to_transform().with_context(|| format!("invalid transform in {}", path.display()))
}

pub fn transform_to_matrix_text(t: &SimilarityTransform) -> String {
    let m = t.to_homogeneous();
    let mut s = String::new();
    for r in 0..4 {
        let row: Vec<String> = (0..4).map(|c| m[(r, c)].to_string()).collect();
        s += &row.join(" ");
        s.push('\n');
    }
    s
}

/// Parses 16 row-major numbers. The bottom row must be `0 0 0 1` and the
/// upper block a positive multiple of a rotation.
pub fn parse_matrix_text(text: &str) -> Result<SimilarityTransform> {
    let values: Vec<f64> = text.split_whitespace().map(|s| s.parse::<f64>().with_context(|| format!("bad number `{s}`"))).collect::<Result<_>>()?;
    if values.len() != 16 {
        bail!("expected 16 numbers, found {}", values.len());
    }
    let bottom = &values[12..];
    if bottom[..3].iter().any(|v| v.abs() > 1e-9) || (bottom[3] - 1.0).abs() > 1e-9 {
        bail!("bottom row must be 0 0 0 1");
    }
    let block = Matrix3::from_fn(|r, c| values[4 * r + c]);
    let scale = block.determinant().cbrt();
    if !(scale > 0.0) {
        bail!("upper 3×3 block must have positive determinant");
    }
    let t = SimilarityTransform::new(scale, block / scale, Vector3::new(values[3], values[7], values[11]));
    t.validate(1e-6)?;
    Ok(t)
}

pub fn write_matrix_text(path: &Path, t: &SimilarityTransform) -> Result<()> {
    fs::write(path, transform_to_matrix_text(t)).with_context(|| format!("writing {}", path.display()))
}

pub fn read_matrix_text(path: &Path) -> Result<SimilarityTransform> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_matrix_text(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Reads a transform stored as JSON (`.json`) or as a 4×4 matrix (anything
/// else).
pub fn read_transform(path: &Path) -> Result<SimilarityTransform> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        read_transform_json(path)
    } else {
        read_matrix_text(path)
    }
}
