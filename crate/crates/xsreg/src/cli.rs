//! Command-line interface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use xsreg_core::bench::{run_benchmark, BenchConfig, BenchReport, MethodSummary};
use xsreg_core::meshgen::{procedural, PROCEDURAL_MESHES};
use xsreg_core::metrics::{fnorm_error, rotation_rmse};
use xsreg_core::pipeline::{register_with_clock, RegistrationOutput};
use xsreg_core::synth::{synthesize_pair, SynthesisConfig};
use xsreg_core::{apply_transform, PointCloud, RegistrationConfig, SimilarityTransform};

use crate::config::{parse_affinity, FileConfig};
use crate::export::export_debug;
use crate::formats::{read_cloud, write_cloud};
use crate::transform_file::{read_transform, write_matrix_text, write_transform_json};
use crate::WallClock;

#[derive(Debug, Parser)]
#[command(name = "xsreg", version, about = "Cross-source point cloud registration by supervoxel graph matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Register a source cloud onto a target cloud.
    Register(RegisterArgs),
    /// Generate a synthetic cross-source pair from a mesh.
    Synth(SynthArgs),
    /// Compare an estimated transform with a reference.
    Eval(EvalArgs),
    /// Synthesize, register and evaluate in one run.
    Pipeline(PipelineArgs),
    /// Run the pipeline and the ICP baseline over meshes and seeds.
    Bench(BenchArgs),
    /// Write a built-in procedural mesh.
    Mesh(MeshArgs),
}

#[derive(Debug, Args)]
pub struct TuningArgs {
    /// TOML configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Supervoxel radius as a fraction of the cloud radius.
    #[arg(long)]
    pub voxel_frac: Option<f64>,
    /// `similarity` or `paper-literal`.
    #[arg(long)]
    pub affinity: Option<String>,
    #[arg(long)]
    pub smooth_weight: Option<f64>,
    #[arg(long)]
    pub alpha_steps: Option<usize>,
}

impl TuningArgs {
    pub fn file(&self) -> Result<FileConfig> {
        self.config.as_deref().map(FileConfig::load).transpose().map(Option::unwrap_or_default)
    }

    /// Defaults, then the config file, then flags.
    pub fn registration(&self, file: &FileConfig) -> Result<RegistrationConfig> {
        let mut c = RegistrationConfig::default();
        file.apply_registration(&mut c)?;
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.voxel_frac {
            c.extraction.voxel_radius_fraction = v;
        }
        if let Some(v) = &self.affinity {
            c.affinity = parse_affinity(v)?;
        }
        if let Some(v) = self.smooth_weight {
            c.matching.smooth_weight = v;
        }
        if let Some(v) = self.alpha_steps {
            c.matching.alpha_steps = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// Transform JSON mapping the source onto the target.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the transform as a 4×4 matrix.
    #[arg(long)]
    pub matrix_out: Option<PathBuf>,
    /// Write the transformed source cloud.
    #[arg(long)]
    pub export_registered: Option<PathBuf>,
    /// Write colored supervoxels, an overlay and the matches here.
    #[arg(long)]
    pub debug_dir: Option<PathBuf>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct MeshSource {
    /// Mesh file (.off or .ply with faces).
    #[arg(long, conflicts_with = "procedural")]
    pub mesh: Option<PathBuf>,
    /// Built-in mesh name; see `xsreg mesh --list`.
    #[arg(long)]
    pub procedural: Option<String>,
}

impl MeshSource {
    fn load(&self, fallback: &str) -> Result<PointCloud> {
        match (&self.mesh, &self.procedural) {
            (Some(path), _) => read_cloud(path).with_context(|| format!("reading mesh {}", path.display())),
            (None, name) => load_procedural(name.as_deref().unwrap_or(fallback)),
        }
    }
}

fn load_procedural(name: &str) -> Result<PointCloud> {
    procedural(name).with_context(|| format!("unknown procedural mesh `{name}` (expected one of {})", PROCEDURAL_MESHES.join(", ")))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub mesh: MeshSource,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// `database-c`, `clean`, `identity` or `same-source`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Transform as JSON (.json) or 4×4 matrix text.
    #[arg(long)]
    pub estimated: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Defaults to the `bumpy-sphere` procedural mesh.
    #[command(flatten)]
    pub mesh: MeshSource,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Directory of .off/.ply meshes; the built-in meshes are used when absent.
    #[arg(long)]
    pub meshes: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// Per-trial CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary CSV (overall and per mesh).
    #[arg(long)]
    pub summary_out: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[command(flatten)]
    pub tuning: TuningArgs,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[arg(long, required_unless_present = "list")]
    pub name: Option<String>,
    /// Output .off or .ply.
    #[arg(long, required_unless_present = "list")]
    pub out: Option<PathBuf>,
    /// Print the built-in mesh names.
    #[arg(long)]
    pub list: bool,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Register(a) => register_cmd(&a).context("register"),
        Command::Synth(a) => synth_cmd(&a).context("synth"),
        Command::Eval(a) => eval_cmd(&a).context("eval"),
        Command::Pipeline(a) => pipeline_cmd(&a).context("pipeline"),
        Command::Bench(a) => bench_cmd(&a).context("bench"),
        Command::Mesh(a) => mesh_cmd(&a).context("mesh"),
    }
}

fn print_diagnostics(out: &RegistrationOutput) {
    let d = &out.diagnostics;
    eprintln!(
        "scale {:.6}  nodes {}/{}  edges {}/{}  match score {:.4}  smooth {:.6}",
        d.scale.scale, d.nodes.0, d.nodes.1, d.edges.0, d.edges.1, d.match_score, d.match_smooth
    );
    eprintln!(
        "correspondences {}  RANSAC inliers {} ({} iterations)  ICP {} iterations, rmse {:.6}, converged {}",
        d.correspondences, d.ransac_inliers, d.ransac_iterations, d.icp_iterations, d.icp_rmse, d.icp_converged
    );
    for t in &d.timings {
        eprintln!("  {:<22}{:>9.3} s", t.stage, t.seconds);
    }
}

fn register_cmd(a: &RegisterArgs) -> Result<()> {
    let file = a.tuning.file()?;
    let config = a.tuning.registration(&file)?;
    let source = read_cloud(&a.source).with_context(|| format!("reading source {}", a.source.display()))?;
    let target = read_cloud(&a.target).with_context(|| format!("reading target {}", a.target.display()))?;
    let out = register_with_clock(&target, &source, &config, &WallClock::start())?;
    print_diagnostics(&out);
    write_transform_json(&a.out, &out.transform)?;
    if let Some(p) = &a.matrix_out {
        write_matrix_text(p, &out.transform)?;
    }
    if let Some(p) = &a.export_registered {
        write_cloud(p, &apply_transform(&source, &out.transform)).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(dir) = &a.debug_dir {
        export_debug(dir, &target, &source, &config, &out)?;
    }
    Ok(())
}

fn synthesis_config(file: &FileConfig, preset: Option<&str>, seed: u64) -> Result<SynthesisConfig> {
    let mut file = file.clone();
    if let Some(p) = preset {
        file.synthesis.preset = Some(p.to_string());
    }
    file.synthesis("database-c", seed)
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let file = a.config.as_deref().map(FileConfig::load).transpose()?.unwrap_or_default();
    let config = synthesis_config(&file, a.preset.as_deref(), a.seed)?;
    let mesh = a.mesh.load("bumpy-sphere")?;
    let pair = synthesize_pair(&mesh, &config)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_cloud(&a.out_dir.join("S1.ply"), &pair.s1)?;
    write_cloud(&a.out_dir.join("S2.ply"), &pair.s2)?;
    write_transform_json(&a.out_dir.join("gt.json"), &pair.ground_truth)?;
    eprintln!("S1 {} points, S2 {} points ({} outliers)", pair.s1.len(), pair.s2.len(), pair.outlier_count);
    Ok(())
}

/// Rotation RMSE in degrees, F-norm and log10 F-norm.
pub fn evaluate(estimated: &SimilarityTransform, truth: &SimilarityTransform) -> (f64, f64, f64) {
    let f = fnorm_error(estimated, truth);
    (rotation_rmse(estimated, truth), f, f.log10())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let estimated = read_transform(&a.estimated)?;
    let truth = read_transform(&a.truth)?;
    let (rot, f, logf) = evaluate(&estimated, &truth);
    println!("rotation_rmse_deg {rot}");
    println!("fnorm {f}");
    println!("log10_fnorm {logf}");
    Ok(())
}

fn pipeline_cmd(a: &PipelineArgs) -> Result<()> {
    let file = a.tuning.file()?;
    let config = a.tuning.registration(&file)?;
    let synthesis = synthesis_config(&file, a.preset.as_deref(), config.seed)?;
    let mesh = a.mesh.load("bumpy-sphere")?;
    let pair = synthesize_pair(&mesh, &synthesis).context("synthesis")?;
    let out = register_with_clock(&pair.s1, &pair.s2, &config, &WallClock::start())?;
    print_diagnostics(&out);
    let (rot, f, logf) = evaluate(&out.transform, &pair.ground_truth);
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    write_transform_json(&a.out_dir.join("transform.json"), &out.transform)?;
    write_transform_json(&a.out_dir.join("gt.json"), &pair.ground_truth)?;

    let path = a.out_dir.join("report.csv");
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let d = &out.diagnostics;
    w.write_record([
        "mesh",
        "seed",
        "rotation_rmse_deg",
        "fnorm",
        "log10_fnorm",
        "scale_estimate",
        "target_nodes",
        "source_nodes",
        "match_score",
        "correspondences",
        "ransac_inliers",
        "icp_iterations",
        "icp_rmse",
    ])?;
    w.write_record([
        mesh.id.clone(),
        config.seed.to_string(),
        rot.to_string(),
        f.to_string(),
        logf.to_string(),
        d.scale.scale.to_string(),
        d.nodes.0.to_string(),
        d.nodes.1.to_string(),
        d.match_score.to_string(),
        d.correspondences.to_string(),
        d.ransac_inliers.to_string(),
        d.icp_iterations.to_string(),
        d.icp_rmse.to_string(),
    ])?;
    w.flush()?;
    println!("rotation_rmse_deg {rot}");
    println!("fnorm {f}");
    println!("log10_fnorm {logf}");
    Ok(())
}

fn load_mesh_dir(dir: &Path) -> Result<Vec<PointCloud>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()).is_some_and(|e| e.eq_ignore_ascii_case("off") || e.eq_ignore_ascii_case("ply")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .off or .ply meshes in {}", dir.display());
    }
    paths.iter().map(|p| read_cloud(p).with_context(|| format!("reading mesh {}", p.display()))).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_bench_csv(path: &Path, report: &BenchReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["mesh", "trial", "seed", "method", "rotation_rmse_deg", "fnorm", "log10_fnorm", "seconds", "error"])?;
    for r in &report.rows {
        w.write_record([
            r.mesh.clone(),
            r.trial.to_string(),
            r.seed.to_string(),
            r.method.name().to_string(),
            opt(r.rotation_rmse),
            opt(r.fnorm),
            opt(r.log10_fnorm()),
            format!("{:.3}", r.seconds),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn summary_line(s: &MethodSummary) -> String {
    format!(
        "{:<16}{:<10}{:>4}{:>4}{:>12.3}{:>12.3}{:>12.4}{:>12.4}",
        s.mesh.as_deref().unwrap_or("all"),
        s.method.name(),
        s.succeeded,
        s.failed,
        s.mean_rotation_rmse,
        s.median_rotation_rmse,
        s.mean_fnorm,
        s.median_fnorm
    )
}

fn bench_cmd(a: &BenchArgs) -> Result<()> {
    let file = a.tuning.file()?;
    let registration = a.tuning.registration(&file)?;
    let synthesis = synthesis_config(&file, a.preset.as_deref(), registration.seed)?;
    let meshes = match &a.meshes {
        Some(dir) => load_mesh_dir(dir)?,
        None => PROCEDURAL_MESHES.iter().map(|n| load_procedural(n)).collect::<Result<_>>()?,
    };
    if a.trials == 0 {
        bail!("--trials must be at least 1");
    }
    let config = BenchConfig { synthesis, registration, trials: a.trials };
    let report = run_benchmark(&meshes, &config, &WallClock::start());
    write_bench_csv(&a.out, &report)?;

    let mut summaries = report.summary();
    summaries.extend(report.per_mesh());
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<16}{:<10}{:>4}{:>4}{:>12}{:>12}{:>12}{:>12}", "mesh", "method", "ok", "err", "mean_rot", "median_rot", "mean_fnorm", "median_fn")?;
    for s in &summaries {
        writeln!(stdout, "{}", summary_line(s))?;
    }
    if let Some(path) = &a.summary_out {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(["mesh", "method", "succeeded", "failed", "mean_rotation_rmse_deg", "median_rotation_rmse_deg", "mean_fnorm", "median_fnorm"])?;
        for s in &summaries {
            w.write_record([
                s.mesh.clone().unwrap_or_else(|| "all".into()),
                s.method.name().into(),
                s.succeeded.to_string(),
                s.failed.to_string(),
                s.mean_rotation_rmse.to_string(),
                s.median_rotation_rmse.to_string(),
                s.mean_fnorm.to_string(),
                s.median_fnorm.to_string(),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}

fn mesh_cmd(a: &MeshArgs) -> Result<()> {
    if a.list {
        for name in PROCEDURAL_MESHES {
            println!("{name}");
        }
        return Ok(());
    }
    let (Some(name), Some(out)) = (&a.name, &a.out) else {
        bail!("--name and --out are required");
    };
    let mesh = load_procedural(name)?;
    write_cloud(out, &mesh).with_context(|| format!("writing {}", out.display()))?;
    Ok(())
}
