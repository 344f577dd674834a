//! Pipeline stages. Each stage reads a manifest, writes its grids or images
//! into the output directory and, where later stages need them, a new
//! manifest naming everything produced so far.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use fld_core::lightbake::{bake_dsm, bake_qri, DirectionalLight};
use fld_core::pathtracer::{trace_with, ShadowMode, TraceConfig};
use fld_core::raymarch::{compare as compare_images, render as render_scene, tonemap, ChannelSources, ImageDiff, RenderConfig};
use fld_core::scenes::{self, NoiseParams, Scene};
use fld_core::solver::{solve, SolveResult};
use fld_core::{Rgb, ScalarField};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};
use crate::image_io;
use crate::manifest::{Manifest, CHANNELS};

pub const SCENE_MANIFEST: &str = "scene.txt";
pub const BAKED_MANIFEST: &str = "baked.txt";
pub const SOLVED_MANIFEST: &str = "solved.txt";

/// Settings shared by every command.
#[derive(Debug, Clone)]
pub struct Context {
    pub config: PipelineConfig,
    pub out_dir: PathBuf,
}

impl Context {
    pub fn new(config: PipelineConfig, out_dir: impl Into<PathBuf>) -> CliResult<Self> {
        let out_dir = out_dir.into();
        fs::create_dir_all(&out_dir)
            .map_err(|e| CliError::usage(format!("cannot create {}: {e}", out_dir.display())))?;
        Ok(Self { config, out_dir })
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    PointSource,
    Nebulae,
    NoiseSphere,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerateArgs {
    pub kind: SceneKind,
    pub res: Option<usize>,
    pub albedo: Option<f64>,
    pub tau_across: f64,
    pub seed: Option<u64>,
    pub noise: NoiseParams,
    pub density: f64,
    pub scales: Rgb,
}

impl GenerateArgs {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            res: None,
            albedo: None,
            tau_across: 4.0,
            seed: None,
            noise: NoiseParams::default(),
            density: scenes::NEBULA_DENSITY,
            scales: scenes::NEBULA_CHANNEL_SCALES,
        }
    }
}

pub fn build_scene(args: &GenerateArgs) -> CliResult<Scene> {
    Ok(match args.kind {
        SceneKind::PointSource => {
            scenes::make_point_source(args.res.unwrap_or(127), args.tau_across, args.albedo.unwrap_or(0.4))?
        }
        SceneKind::Nebulae => {
            let mut noise = args.noise;
            if let Some(s) = args.seed {
                noise.seed = s;
            }
            scenes::make_nebulae_with_density(
                args.res.unwrap_or(200),
                noise,
                args.albedo.unwrap_or(0.9),
                args.scales,
                args.density,
            )?
        }
        SceneKind::NoiseSphere => scenes::make_noise_sphere(args.res.unwrap_or(51), args.seed.unwrap_or(1))?,
    })
}

/// Writes the scene grids and `scene.txt`.
pub fn generate(ctx: &Context, args: &GenerateArgs) -> CliResult<PathBuf> {
    let scene = build_scene(args)?;
    let mut m = Manifest::new(&ctx.out_dir);
    m.write_scene(&scene)?;
    let path = ctx.out(SCENE_MANIFEST);
    m.save(&path)?;
    println!("wrote {} ({}^3 voxels)", path.display(), scene.dims().nx);
    Ok(path)
}

/// Bakes transmittance and `q_ri` per channel; writes `baked.txt`.
pub fn bake(ctx: &Context, manifest: &Path, light: Option<DirectionalLight>) -> CliResult<PathBuf> {
    let src = Manifest::load(manifest)?;
    let scene = src.scene()?;
    let light = light
        .or(scene.light)
        .ok_or_else(|| CliError::usage("no light in manifest; pass --light-dir"))?;
    let mut t: Vec<ScalarField> = Vec::with_capacity(3);
    let mut q = Vec::with_capacity(3);
    for (c, ch) in scene.channels.iter().enumerate() {
        let prev = (0..c).find(|&p| scene.channels[p].sigma_t == ch.sigma_t);
        let tc = match prev {
            Some(p) => t[p].clone(),
            None => bake_dsm(&ch.sigma_t, &light)?,
        };
        q.push(bake_qri(&ch.scattering(), &tc, light.radiance[c])?);
        t.push(tc);
    }
    let mut m = src.relocate(&ctx.out_dir);
    m.set_light(&light);
    m.write_field("transmittance", &t.try_into().unwrap())?;
    m.write_field("qri", &q.try_into().unwrap())?;
    let path = ctx.out(BAKED_MANIFEST);
    m.save(&path)?;
    println!("wrote {}", path.display());
    Ok(path)
}

/// Source `q_ri + j` of every channel.
fn sources(m: &Manifest, scene: &Scene) -> CliResult<[ScalarField; 3]> {
    let qri = m.load_field("qri")?;
    let mut out = Vec::with_capacity(3);
    for (c, ch) in scene.channels.iter().enumerate() {
        out.push(match &qri {
            Some(q) => q[c].zip_map(&ch.emission, |a, b| a + b)?,
            None => ch.emission.clone(),
        });
    }
    Ok(out.try_into().unwrap())
}

fn coarsen(f: &ScalarField, factor: usize) -> CliResult<ScalarField> {
    Ok(if factor == 1 { f.clone() } else { f.downsample(factor)? })
}

/// Downsamples, solves every channel and writes `phi`, residual CSVs and
/// `solved.txt`. Fails (after writing) when a channel does not converge.
pub fn solve_manifest(ctx: &Context, manifest: &Path) -> CliResult<PathBuf> {
    let src = Manifest::load(manifest)?;
    let scene = src.scene()?;
    let source = sources(&src, &scene)?;
    let f = ctx.config.downsample;
    let cfg = &ctx.config.solver;
    let mut inputs = Vec::with_capacity(3);
    for (c, ch) in scene.channels.iter().enumerate() {
        inputs.push((coarsen(&ch.sigma_t, f)?, coarsen(&ch.albedo, f)?, coarsen(&source[c], f)?));
    }
    let coarse = inputs[0].0.dims();
    println!(
        "solving on {}x{}x{} (downsample {f}), limiter {}",
        coarse.nx, coarse.ny, coarse.nz, cfg.limiter
    );
    let mut results: Vec<Option<SolveResult>> = Vec::with_capacity(3);
    let mut phi: Vec<ScalarField> = Vec::with_capacity(3);
    let mut failures = Vec::new();
    for c in 0..3 {
        let (s, a, q) = &inputs[c];
        if let Some(p) = (0..c).find(|&p| inputs[p] == inputs[c]) {
            phi.push(phi[p].clone());
            results.push(results[p].clone());
            continue;
        }
        if q.max() <= 0.0 {
            println!("channel {}: no source, phi = 0", CHANNELS[c]);
            phi.push(ScalarField::zeros(coarse));
            results.push(None);
            continue;
        }
        let r = solve(s, a, q, cfg)?;
        println!(
            "channel {}: {} after {} iterations, R/j = {:.3e}",
            CHANNELS[c],
            if r.converged { "converged" } else { "NOT converged" },
            r.iterations,
            r.final_residual()
        );
        if !r.converged {
            failures.push(format!(
                "channel {} did not converge: R/j = {:.3e} after {} iterations",
                CHANNELS[c],
                r.final_residual(),
                r.iterations
            ));
        }
        phi.push(r.phi.clone());
        results.push(Some(r));
    }
    let mut m = src.relocate(&ctx.out_dir);
    m.write_field("phi", &phi.try_into().unwrap())?;
    m.set("solve.downsample", f.to_string());
    m.set("solve.limiter", cfg.limiter.to_string());
    for (c, r) in results.iter().enumerate() {
        if let Some(r) = r {
            write_residual_csv(&ctx.out(&format!("residual.{}.csv", CHANNELS[c])), &r.residual_history)?;
        }
    }
    let path = ctx.out(SOLVED_MANIFEST);
    m.save(&path)?;
    println!("wrote {}", path.display());
    if failures.is_empty() {
        Ok(path)
    } else {
        Err(CliError::Failed(failures.join("; ")))
    }
}

pub fn write_residual_csv(path: &Path, history: &[f64]) -> CliResult<()> {
    let mut out = String::from("iteration,rbar_over_jbar\n");
    for (i, r) in history.iter().enumerate() {
        out.push_str(&format!("{},{:e}\n", i + 1, r));
    }
    fs::write(path, out)?;
    Ok(())
}

fn camera_for(ctx: &Context, scene: &Scene) -> fld_core::raymarch::Camera {
    let r = &ctx.config.render;
    let cam = scene.camera;
    cam.with_resolution(r.width.unwrap_or(cam.width), r.height.unwrap_or(cam.height))
}

fn write_images(ctx: &Context, stem: &str, img: &fld_core::raymarch::HdrImage) -> CliResult<(PathBuf, PathBuf)> {
    let pfm = ctx.out(&format!("{stem}.pfm"));
    let ppm = ctx.out(&format!("{stem}.ppm"));
    image_io::save_pfm(&pfm, img)?;
    let ldr = tonemap(img, ctx.config.render.exposure, ctx.config.render.gamma)?;
    image_io::save_ppm(&ppm, &ldr)?;
    println!("wrote {} and {}", pfm.display(), ppm.display());
    Ok((pfm, ppm))
}

/// Raymarched image using the manifest's `qri` and `phi` fields.
pub fn render_manifest(ctx: &Context, manifest: &Path, stem: &str) -> CliResult<(PathBuf, PathBuf)> {
    let m = Manifest::load(manifest)?;
    let mut scene = m.scene()?;
    scene.camera = camera_for(ctx, &scene);
    let scattering = scene
        .channels
        .iter()
        .any(|ch| ch.sigma_t.data().iter().zip(ch.albedo.data()).any(|(s, a)| s * a > 0.0));
    let qri = m.load_field("qri")?;
    let phi = m.load_field("phi")?;
    if scattering && phi.is_none() {
        return Err(CliError::usage("scene scatters but the manifest has no phi field; run solve first"));
    }
    if scattering && scene.light.is_some() && qri.is_none() {
        return Err(CliError::usage("scene is lit but the manifest has no qri field; run bake first"));
    }
    let src: [ChannelSources<'_>; 3] = core::array::from_fn(|c| ChannelSources {
        qri: qri.as_ref().map(|q| &q[c]),
        phi: phi.as_ref().map(|p| &p[c]),
    });
    let r = &ctx.config.render;
    let cfg = RenderConfig {
        step: r.step,
        jitter: r.jitter,
        seed: ctx.config.pathtrace.seed,
    };
    let img = render_scene(&scene, &src, &cfg)?;
    write_images(ctx, stem, &img)
}

/// Path-traced reference image.
pub fn pathtrace_manifest(ctx: &Context, manifest: &Path, stem: &str) -> CliResult<(PathBuf, PathBuf)> {
    let m = Manifest::load(manifest)?;
    let scene = m.scene()?;
    let cam = camera_for(ctx, &scene);
    let p = &ctx.config.pathtrace;
    let cfg = TraceConfig {
        spp: p.spp,
        max_bounces: p.max_bounces,
        seed: p.seed,
        shadow: ShadowMode::RatioTracking,
    };
    let img = trace_with(&scene, &cam, &cfg)?;
    write_images(ctx, stem, &img)
}

pub fn compare_files(a: &Path, b: &Path) -> CliResult<ImageDiff> {
    let load = |p: &Path| image_io::load_pfm(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())));
    let (ia, ib) = (load(a)?, load(b)?);
    let diff = compare_images(&ia, &ib)
        .map_err(|_| CliError::usage(format!("image sizes differ: {}x{} vs {}x{}", ia.width, ia.height, ib.width, ib.height)))?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "rmse {:e}", diff.rmse)?;
    writeln!(
        out,
        "rmse_rgb {:e} {:e} {:e}",
        diff.channel_rmse[0], diff.channel_rmse[1], diff.channel_rmse[2]
    )?;
    writeln!(out, "max_abs {:e}", diff.max_abs)?;
    let rms = ia.rms();
    if rms > 0.0 {
        writeln!(out, "relative_rmse {:e}", diff.rmse / rms)?;
    }
    Ok(diff)
}
