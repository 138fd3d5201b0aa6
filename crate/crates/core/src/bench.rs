//! Synthetic benchmark comparing the full pipeline with identity-initialized
//! ICP.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{PointCloud, SimilarityTransform};
use crate::metrics::{fnorm_error, rotation_rmse};
use crate::pipeline::{register_icp_only, register_with_clock, Clock, RegistrationConfig};
use crate::synth::{synthesize_pair, SynthesisConfig};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Pipeline,
    IcpBaseline,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Pipeline, Method::IcpBaseline];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pipeline => "pipeline",
            Method::IcpBaseline => "icp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    /// `rng_seed` is the base seed; every trial derives its own.
    pub synthesis: SynthesisConfig,
    pub registration: RegistrationConfig,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub mesh: String,
    pub trial: usize,
    pub seed: u64,
    pub method: Method,
    pub rotation_rmse: Option<f64>,
    pub fnorm: Option<f64>,
    pub seconds: f64,
    pub error: Option<String>,
}

impl TrialRow {
    pub fn log10_fnorm(&self) -> Option<f64> {
        self.fnorm.map(f64::log10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: Method,
    /// `None` covers every mesh.
    pub mesh: Option<String>,
    pub succeeded: usize,
    pub failed: usize,
    pub mean_rotation_rmse: f64,
    pub median_rotation_rmse: f64,
    pub mean_fnorm: f64,
    pub median_fnorm: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BenchReport {
    pub rows: Vec<TrialRow>,
}

/// Seed of one trial, mixed from the base seed, the mesh position and the
/// trial number.
pub fn trial_seed(base: u64, mesh_index: usize, trial: usize) -> u64 {
    let mut z = base ^ ((mesh_index as u64) << 32 | trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn evaluate(mesh: &str, trial: usize, seed: u64, method: Method, seconds: f64, result: Result<SimilarityTransform>, truth: &SimilarityTransform) -> TrialRow {
    let (rotation_rmse, fnorm, error) = match result {
        Ok(t) => (Some(rotation_rmse(&t, truth)), Some(fnorm_error(&t, truth)), None),
        Err(e) => (None, None, Some(e.to_string())),
    };
    TrialRow { mesh: mesh.into(), trial, seed, method, rotation_rmse, fnorm, seconds, error }
}

/// One synthetic pair, registered by every [`Method`]. Failures become rows
/// with an error message.
pub fn run_trial<C: Clock + ?Sized>(mesh: &PointCloud, mesh_index: usize, trial: usize, config: &BenchConfig, clock: &C) -> Vec<TrialRow> {
    let seed = trial_seed(config.synthesis.rng_seed, mesh_index, trial);
    let synthesis = SynthesisConfig { rng_seed: seed, ..config.synthesis };
    let pair = match synthesize_pair(mesh, &synthesis) {
        Ok(pair) => pair,
        Err(e) => {
            let msg = alloc::format!("synthesis: {e}");
            return Method::ALL
                .iter()
                .map(|&method| TrialRow {
                    mesh: mesh.id.clone(),
                    trial,
                    seed,
                    method,
                    rotation_rmse: None,
                    fnorm: None,
                    seconds: 0.0,
                    error: Some(msg.clone()),
                })
                .collect();
        }
    };
    let registration = RegistrationConfig { seed, ..config.registration };
    Method::ALL
        .iter()
        .map(|&method| {
            let start = clock.now();
            let result = match method {
                Method::Pipeline => register_with_clock(&pair.s1, &pair.s2, &registration, clock).map(|o| o.transform),
                Method::IcpBaseline => register_icp_only(&pair.s1, &pair.s2, &registration),
            };
            evaluate(&mesh.id, trial, seed, method, clock.now() - start, result, &pair.ground_truth)
        })
        .collect()
}

/// Every mesh × trial × method, in that nesting order.
pub fn run_benchmark<C: Clock + ?Sized>(meshes: &[PointCloud], config: &BenchConfig, clock: &C) -> BenchReport {
    let mut rows = Vec::with_capacity(meshes.len() * config.trials * Method::ALL.len());
    for (m, mesh) in meshes.iter().enumerate() {
        for t in 0..config.trials {
            rows.extend(run_trial(mesh, m, t, config, clock));
        }
    }
    BenchReport { rows }
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_unstable_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

impl BenchReport {
    fn summarize<'a>(method: Method, mesh: Option<String>, rows: impl Iterator<Item = &'a TrialRow>) -> MethodSummary {
        let mut rot = Vec::new();
        let mut fro = Vec::new();
        let mut failed = 0;
        for r in rows {
            match (r.rotation_rmse, r.fnorm) {
                (Some(a), Some(b)) => {
                    rot.push(a);
                    fro.push(b);
                }
                _ => failed += 1,
            }
        }
        MethodSummary {
            method,
            mesh,
            succeeded: rot.len(),
            failed,
            mean_rotation_rmse: mean(&rot),
            median_rotation_rmse: median(rot),
            mean_fnorm: mean(&fro),
            median_fnorm: median(fro),
        }
    }

    /// One summary per method over all meshes; failed trials are counted,
    /// not averaged.
    pub fn summary(&self) -> Vec<MethodSummary> {
        Method::ALL.iter().map(|&m| Self::summarize(m, None, self.rows.iter().filter(|r| r.method == m))).collect()
    }

    /// One summary per mesh and method, meshes in first-seen order.
    pub fn per_mesh(&self) -> Vec<MethodSummary> {
        let mut meshes: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !meshes.contains(&r.mesh.as_str()) {
                meshes.push(&r.mesh);
            }
        }
        let mut out = Vec::new();
        for mesh in meshes {
            for &m in &Method::ALL {
                out.push(Self::summarize(m, Some(mesh.into()), self.rows.iter().filter(|r| r.method == m && r.mesh == mesh)));
            }
        }
        out
    }
}
