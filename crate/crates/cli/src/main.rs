use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fld::commands::{self, Context, GenerateArgs, SceneKind};
use fld::config::{parse_triple, PipelineConfig};
use fld::validation::{validate_point_source, PointSourceArgs};
use fld::{CliError, CliResult};
use fld_core::lightbake::DirectionalLight;
use fld_core::scenes::NoiseParams;
use fld_core::{FluxLimiter, Precision, Vec3};

#[derive(Parser, Debug)]
#[command(name = "fld", version, about = "Flux-limited diffusion rendering pipeline")]
struct Cli {
    /// key = value config file (solver, render and path-trace settings).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Solver precision; overrides the config file.
    #[arg(long, global = true)]
    precision: Option<PrecisionArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PrecisionArg {
    Single,
    Double,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    PointSource,
    Nebulae,
    NoiseSphere,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a procedural scene (grids + scene.txt).
    Generate {
        kind: KindArg,
        #[arg(long)]
        res: Option<usize>,
        #[arg(long)]
        albedo: Option<f64>,
        /// Optical depth across the point-source grid.
        #[arg(long, default_value_t = 4.0)]
        tau_across: f64,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        octaves: Option<u32>,
        #[arg(long)]
        frequency: Option<f64>,
        #[arg(long)]
        amplitude: Option<f64>,
        /// Peak nebula extinction [1/m].
        #[arg(long)]
        density: Option<f64>,
        /// Per-channel extinction scales, "r g b".
        #[arg(long)]
        scales: Option<String>,
    },
    /// Bake transmittance and reduced-incident sources (writes baked.txt).
    Bake {
        #[arg(long)]
        manifest: PathBuf,
        /// Light travel direction "dx dy dz"; overrides the manifest.
        #[arg(long)]
        light_dir: Option<String>,
        /// Light radiance "r g b".
        #[arg(long)]
        light_radiance: Option<String>,
    },
    /// Solve for the fluence per channel (writes phi grids, residual CSVs, solved.txt).
    Solve {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        downsample: Option<usize>,
        #[arg(long)]
        limiter: Option<FluxLimiter>,
    },
    /// Raymarch the scene using baked and solved sources.
    Render {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long, default_value = "render")]
        name: String,
    },
    /// Path-trace a reference image.
    Pathtrace {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        spp: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_bounces: Option<usize>,
        #[arg(long, default_value = "pathtrace")]
        name: String,
    },
    /// Compare grid solutions of the point-source problem with closed forms.
    ValidatePointSource {
        #[arg(long, default_value_t = 127)]
        res: usize,
        #[arg(long, default_value_t = 4.0)]
        tau_across: f64,
        /// Comma-separated albedos.
        #[arg(long, default_value = "0.4,0.8", value_delimiter = ',')]
        albedo: Vec<f64>,
        /// Limiter of the flux-limited run.
        #[arg(long, default_value = "lp")]
        limiter: FluxLimiter,
    },
    /// RMSE between two PFM images.
    Compare { a: PathBuf, b: PathBuf },
}

fn triple_arg(name: &str, s: &str) -> CliResult<[f64; 3]> {
    parse_triple(s).map_err(|e| CliError::usage(format!("--{name}: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::usage(format!("--threads: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(p) = cli.precision {
        let p = match p {
            PrecisionArg::Single => Precision::Single,
            PrecisionArg::Double => Precision::Double,
        };
        config.solver = config.solver.clone().with_precision(p);
    }
    let out_dir = cli.out_dir.clone();
    match cli.command {
        Command::Generate {
            kind,
            res,
            albedo,
            tau_across,
            seed,
            octaves,
            frequency,
            amplitude,
            density,
            scales,
        } => {
            let kind = match kind {
                KindArg::PointSource => SceneKind::PointSource,
                KindArg::Nebulae => SceneKind::Nebulae,
                KindArg::NoiseSphere => SceneKind::NoiseSphere,
            };
            let mut args = GenerateArgs::new(kind);
            args.res = res;
            args.albedo = albedo;
            args.tau_across = tau_across;
            args.seed = seed;
            let d = NoiseParams::default();
            args.noise = NoiseParams {
                octaves: octaves.unwrap_or(d.octaves),
                frequency: frequency.unwrap_or(d.frequency),
                amplitude: amplitude.unwrap_or(d.amplitude),
                seed: d.seed,
            };
            if let Some(v) = density {
                args.density = v;
            }
            if let Some(s) = scales {
                args.scales = triple_arg("scales", &s)?;
            }
            commands::generate(&Context::new(config, out_dir)?, &args)?;
        }
        Command::Bake {
            manifest,
            light_dir,
            light_radiance,
        } => {
            let light = match (light_dir, light_radiance) {
                (None, None) => None,
                (Some(d), r) => {
                    let radiance = match r {
                        Some(r) => triple_arg("light-radiance", &r)?,
                        None => [1.0; 3],
                    };
                    Some(DirectionalLight::new(radiance, Vec3::from_array(triple_arg("light-dir", &d)?))?)
                }
                (None, Some(_)) => return Err(CliError::usage("--light-radiance needs --light-dir")),
            };
            commands::bake(&Context::new(config, out_dir)?, &manifest, light)?;
        }
        Command::Solve {
            manifest,
            downsample,
            limiter,
        } => {
            if let Some(f) = downsample {
                config.downsample = f;
            }
            if let Some(l) = limiter {
                config.solver.limiter = l;
            }
            config.validate()?;
            commands::solve_manifest(&Context::new(config, out_dir)?, &manifest)?;
        }
        Command::Render { manifest, name } => {
            commands::render_manifest(&Context::new(config, out_dir)?, &manifest, &name)?;
        }
        Command::Pathtrace {
            manifest,
            spp,
            seed,
            max_bounces,
            name,
        } => {
            let p = &mut config.pathtrace;
            p.spp = spp.unwrap_or(p.spp);
            p.seed = seed.unwrap_or(p.seed);
            p.max_bounces = max_bounces.unwrap_or(p.max_bounces);
            config.validate()?;
            commands::pathtrace_manifest(&Context::new(config, out_dir)?, &manifest, &name)?;
        }
        Command::ValidatePointSource {
            res,
            tau_across,
            albedo,
            limiter,
        } => {
            let ctx = Context::new(config, out_dir)?;
            let args = PointSourceArgs {
                res,
                tau_across,
                albedos: albedo,
                limiter,
                solver: ctx.config.solver.clone(),
                cda_omega: None,
            };
            validate_point_source(&ctx.out_dir, &args)?;
        }
        Command::Compare { a, b } => {
            commands::compare_files(&a, &b)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
