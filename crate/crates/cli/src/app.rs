//! Command-line surface.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use ftb_core::bvh::PrimOrder;
use ftb_core::kernels::{FtbKernel, KernelId};
use ftb_core::scene::{Scene, SceneDesc};
use serde::Serialize;

use crate::camera::Camera;
use crate::compare::compare;
use crate::render::{render, Shading};
use crate::source::{GeneratorSpec, SceneSource};
use crate::user_code::UserCodeSpec;
use crate::validate::{as_dyn, validate};

#[derive(Debug, Parser)]
#[command(
    name = "ftb",
    version,
    about = "Front-to-back any-hit traversal test rig"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render a pseudo-coloured hit-count image with one kernel.
    Render(RenderArgs),
    /// Render several kernels over the same rays and diff the images.
    Compare(CompareArgs),
    /// Check kernels against the brute-force oracle; exit 1 on any violation.
    Validate(ValidateArgs),
    /// Time each kernel (informational only).
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SceneArgs {
    /// OBJ file or JSON scene manifest.
    #[arg(long, conflicts_with = "gen", required_unless_present = "gen")]
    pub scene: Option<PathBuf>,
    /// Procedural scene, e.g. coplanar-stack:n=8,same-t=true, abutting-boxes:k=5,
    /// instanced-grid:m=3, order-hazard, late-flip.
    #[arg(long = "gen", value_name = "NAME[:K=V,...]")]
    pub gen: Option<GeneratorSpec>,
    /// Image size; one primary ray per pixel.
    #[arg(long, default_value = "64x64", value_parser = parse_size)]
    pub size: (u32, u32),
    /// Primitive order fed to the BVH builder: asgiven or permuted:SEED.
    #[arg(long, default_value = "asgiven", value_parser = parse_prim_order)]
    pub prim_order: PrimOrder,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RenderArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(long, default_value = "while-while")]
    pub kernel: KernelId,
    /// maxdepth:N, probdepth:N:SEED or countall.
    #[arg(long, default_value = "countall")]
    pub user_code: UserCodeSpec,
    /// count, last-t or last-hit.
    #[arg(long, default_value = "count")]
    pub shading: Shading,
    /// Output PPM (P6) image.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional JSON file for the aggregated counters.
    #[arg(long)]
    pub stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Comma-separated kernels; the first is the reference image.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "while-while,stable-next,reject-repeats,while-merged"
    )]
    pub kernels: Vec<KernelId>,
    #[arg(long, default_value = "countall")]
    pub user_code: UserCodeSpec,
    #[arg(long, default_value = "count")]
    pub shading: Shading,
    /// Per-kernel counters as CSV (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write each kernel's image into this directory.
    #[arg(long)]
    pub images: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Comma-separated kernels (default: every correct kernel).
    #[arg(long, value_delimiter = ',')]
    pub kernel: Vec<KernelId>,
    /// Seeds for permuted rebuilds in the stability check.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    /// JSON report (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub scene: SceneArgs,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "stable-next,reject-repeats,while-while,while-merged,multi-hit:4"
    )]
    pub kernels: Vec<KernelId>,
    #[arg(long, default_value = "countall")]
    pub user_code: UserCodeSpec,
    #[arg(long, default_value_t = 3)]
    pub repeat: u32,
}

fn parse_size(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let dim = |v: &str| {
        v.parse::<u32>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| format!("bad image size {s:?}"))
    };
    Ok((dim(w)?, dim(h)?))
}

fn parse_prim_order(s: &str) -> Result<PrimOrder, String> {
    match s.split_once(':') {
        None if s == "asgiven" => Ok(PrimOrder::AsGiven),
        Some(("permuted", seed)) => seed
            .parse()
            .map(PrimOrder::Permuted)
            .map_err(|_| format!("bad seed {seed:?}")),
        _ => Err(format!("expected asgiven or permuted:SEED, got {s:?}")),
    }
}

/// What a successful command concluded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Violation,
}

struct Prepared {
    name: String,
    desc: SceneDesc,
    scene: Scene,
    camera: Camera,
}

impl SceneArgs {
    fn source(&self) -> Result<SceneSource> {
        match (&self.scene, &self.gen) {
            (Some(path), None) => Ok(SceneSource::from_path(path)?),
            (None, Some(g)) => Ok(SceneSource::Generator(*g)),
            _ => bail!("give exactly one of --scene or --gen"),
        }
    }

    fn prepare(&self) -> Result<Prepared> {
        let source = self.source()?;
        let loaded = source.load()?;
        let mut desc = loaded.desc;
        desc.build.prim_order = self.prim_order;
        let scene = desc.build().with_context(|| format!("building {source}"))?;
        let camera = Camera::new(loaded.view, self.size.0, self.size.1)?;
        Ok(Prepared {
            name: source.to_string(),
            desc,
            scene,
            camera,
        })
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.threads {
            if n == 0 {
                bail!("--threads must be at least 1");
            }
            builder = builder.num_threads(n);
        }
        Ok(builder.build()?)
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => Ok(std::io::stdout().write_all(text.as_bytes())?),
    }
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct RenderStats<'a> {
    scene: &'a str,
    kernel: String,
    user_code: String,
    width: u32,
    height: u32,
    stats: ftb_core::pipeline::TraceStats,
}

pub fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Render(a) => {
            let p = a.scene.prepare()?;
            let frame = a
                .scene
                .pool()?
                .install(|| render(&p.scene, &p.camera, &a.kernel, a.user_code))?;
            write_file(&a.out, &frame.to_ppm(a.shading))?;
            if let Some(path) = &a.stats {
                let stats = RenderStats {
                    scene: &p.name,
                    kernel: a.kernel.name(),
                    user_code: a.user_code.to_string(),
                    width: frame.width,
                    height: frame.height,
                    stats: frame.stats(),
                };
                write_json(Some(path), &stats)?;
            }
            Ok(Outcome::Pass)
        }
        Command::Compare(a) => {
            if a.kernels.is_empty() {
                bail!("--kernels needs at least one kernel");
            }
            let p = a.scene.prepare()?;
            let cmp = a
                .scene
                .pool()?
                .install(|| compare(&p.scene, &p.camera, &a.kernels, a.user_code, a.shading))?;
            for d in &cmp.diffs {
                eprintln!(
                    "{} vs {}: {} differing pixels",
                    d.kernel, d.reference, d.differing_pixels
                );
            }
            if let Some(dir) = &a.images {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                for (k, frame) in cmp.kernels.iter().zip(&cmp.frames) {
                    let file = format!("{}.ppm", k.name().replace(':', "-"));
                    write_file(&dir.join(file), &frame.to_ppm(a.shading))?;
                }
            }
            match &a.out {
                Some(path) => {
                    let file = fs::File::create(path)
                        .with_context(|| format!("writing {}", path.display()))?;
                    cmp.write_csv(file)?;
                }
                None => cmp.write_csv(std::io::stdout())?,
            }
            Ok(Outcome::Pass)
        }
        Command::Validate(a) => {
            let kernels = if a.kernel.is_empty() {
                KernelId::CORRECT.to_vec()
            } else {
                a.kernel.clone()
            };
            let p = a.scene.prepare()?;
            let kernels = as_dyn(&kernels);
            let report = a
                .scene
                .pool()?
                .install(|| validate(&p.name, &p.desc, &p.camera, &kernels, &a.seeds))?;
            for k in &report.kernels {
                let kinds: Vec<String> = k
                    .validation
                    .violation_counts
                    .iter()
                    .map(|(kind, n)| format!("{kind:?}={n}"))
                    .collect();
                eprintln!(
                    "{}: {} ({} rays{}{})",
                    k.kernel,
                    if k.passed { "pass" } else { "FAIL" },
                    k.validation.rays,
                    if kinds.is_empty() {
                        String::new()
                    } else {
                        format!("; {}", kinds.join(", "))
                    },
                    if k.stability_passed {
                        ""
                    } else {
                        "; unstable under rebuild"
                    },
                );
            }
            write_json(a.out.as_deref(), &report)?;
            Ok(if report.passed {
                Outcome::Pass
            } else {
                Outcome::Violation
            })
        }
        Command::Bench(a) => {
            let p = a.scene.prepare()?;
            let pool = a.scene.pool()?;
            println!("kernel,repeat,best_ms,mean_ms");
            for kernel in &a.kernels {
                let mut times = Vec::new();
                for _ in 0..a.repeat.max(1) {
                    let start = Instant::now();
                    pool.install(|| render(&p.scene, &p.camera, kernel, a.user_code))?;
                    times.push(start.elapsed().as_secs_f64() * 1e3);
                }
                let best = times.iter().copied().fold(f64::INFINITY, f64::min);
                let mean = times.iter().sum::<f64>() / times.len() as f64;
                println!("{kernel},{},{best:.3},{mean:.3}", times.len());
            }
            Ok(Outcome::Pass)
        }
    }
}
