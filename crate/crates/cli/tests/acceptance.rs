//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits with
//! a non-zero status if any criterion fails. `FLD_ACCEPTANCE=2,3` limits the
//! run to the listed criteria.

use std::path::PathBuf;
use std::time::Instant;

use fld::image_io::save_pfm;
use fld::validation::{run_albedo, PointSourceArgs, CDA_REL_TOL, FLUX_RATIO_TOL, SLOPE_BOUNDS};
use fld_core::classical::{solve_classical, Stop};
use fld_core::lightbake::{bake_dsm, bake_qri, combine_sources};
use fld_core::pathtracer::{estimate_fluence, trace};
use fld_core::raymarch::{compare, render, Camera, ChannelSources, HdrImage, RenderConfig};
use fld_core::scenes::{make_nebulae, make_noise_sphere, make_point_source, Medium, NoiseParams, Scene, NEBULA_CHANNEL_SCALES};
use fld_core::solver::{max_flux_ratio, solve, SolveResult};
use fld_core::{FluxLimiter, GridDims, Precision, ScalarField, SolverConfig, Vec3, Voxel};

/// SOR factors: the classical solve tolerates stronger over-relaxation than
/// the nonlinear flux-limited one, which oscillates at 1.9.
const CDA_OMEGA: f64 = 1.9;
const FLD_OMEGA: f64 = 1.8;

const NEBULA_RES: usize = 200;
const NEBULA_ALBEDO: f64 = 0.9;
const NEBULA_DOWNSAMPLE: usize = 4;
const REFERENCE_SPP: usize = 256;
const IMAGE_SIZE: usize = 64;
/// Scene resolution of the factor 1 vs 4 comparison; a factor 1 solve at
/// the full nebula resolution does not fit the time budget.
const STABILITY_RES: usize = 64;
const STABILITY_TOL: f64 = 0.10;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Converged flux-limited solutions collected for the flux-limit check.
#[derive(Default)]
struct FluxLedger {
    entries: Vec<(String, f64)>,
}

impl FluxLedger {
    fn record(&mut self, label: impl Into<String>, r: &SolveResult) {
        if r.converged {
            let ratio = max_flux_ratio(&r.phi, &r.diffusion).expect("matching fields");
            self.entries.push((label.into(), ratio));
        }
    }
}

fn fld_config(omega: f64, tol: f64) -> SolverConfig {
    let mut c = SolverConfig::default().with_omega(omega);
    c.conv_tol = tol;
    c
}

fn criterion_1() -> Outcome {
    let grid: Vec<f64> = (0..=1600).map(|i| 10f64.powf(-8.0 + 16.0 * i as f64 / 1600.0)).collect();
    let mut failures = Vec::new();
    let mut worst_limit: f64 = 0.0;
    for l in FluxLimiter::FLUX_LIMITING {
        let mut prev = f64::INFINITY;
        for &r in &grid {
            let f = l.eval(r);
            if !(f > 0.0 && f <= 1.0 / 3.0) {
                failures.push(format!("{} F({r:e}) = {f} outside (0, 1/3]", l.name()));
            }
            if f > 1.0 / r + 1e-12 {
                failures.push(format!("{} F({r:e}) = {f} > 1/R", l.name()));
            }
            if f > prev {
                failures.push(format!("{} increases at R = {r:e}", l.name()));
            }
            prev = f;
        }
        let r = 1e6;
        let dev = (r * l.eval(r) - 1.0).abs();
        worst_limit = worst_limit.max(dev);
        if dev >= 1e-3 {
            failures.push(format!("{} |R F(R) - 1| = {dev:e} at R = 1e6", l.name()));
        }
    }
    let detail = if failures.is_empty() {
        format!(
            "{} limiters x {} points, max |R F(R) - 1| at 1e6 = {worst_limit:.2e}",
            FluxLimiter::FLUX_LIMITING.len(),
            grid.len()
        )
    } else {
        failures.truncate(5);
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

/// Point-source runs shared by the classical and flux-limited checks.
fn point_source_runs(ledger: &mut FluxLedger) -> (Outcome, Outcome) {
    let args = PointSourceArgs {
        solver: fld_config(FLD_OMEGA, 1e-6),
        cda_omega: Some(CDA_OMEGA),
        ..PointSourceArgs::default()
    };
    let (mut cda_ok, mut fld_ok) = (true, true);
    let (mut cda_detail, mut fld_detail) = (Vec::new(), Vec::new());
    for &a in &args.albedos {
        let t = Instant::now();
        let run = run_albedo(&args, a).expect("point-source run");
        eprintln!("  point source alpha={a}: {:.0}s", t.elapsed().as_secs_f64());
        cda_ok &= run.cda.converged && run.cda_max_rel_err <= CDA_REL_TOL;
        cda_detail.push(format!(
            "alpha={a} max rel err {:.4} ({} it{})",
            run.cda_max_rel_err,
            run.cda.iterations,
            if run.cda.converged { "" } else { ", not converged" }
        ));
        let slope = run.fld_slope.unwrap_or(f64::NAN);
        fld_ok &= run.fld.converged && slope >= SLOPE_BOUNDS.0 && slope <= SLOPE_BOUNDS.1;
        fld_detail.push(format!(
            "alpha={a} slope {slope:.3} ({} it{})",
            run.fld.iterations,
            if run.fld.converged { "" } else { ", not converged" }
        ));
        ledger.record(format!("point source alpha={a}"), &run.fld);
    }
    (
        outcome(cda_ok, format!("{} (tol {CDA_REL_TOL})", cda_detail.join(", "))),
        outcome(fld_ok, format!("{} (allowed [{}, {}])", fld_detail.join(", "), SLOPE_BOUNDS.0, SLOPE_BOUNDS.1)),
    )
}

fn criterion_4(ledger: &FluxLedger) -> Outcome {
    if ledger.entries.is_empty() {
        return outcome(false, "no converged flux-limited solutions were produced".into());
    }
    let (label, worst) = ledger
        .entries
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap();
    outcome(
        worst <= 1.0 + FLUX_RATIO_TOL,
        format!("{} solutions, max |E|/phi = {worst:.6} ({label})", ledger.entries.len()),
    )
}

fn criterion_5(ledger: &mut FluxLedger) -> Outcome {
    let scene = make_noise_sphere(51, 7).expect("noise sphere");
    let m = &scene.channels[0];
    let mut ok = true;
    let mut parts = Vec::new();
    for omega in [1.0, 1.2, 1.5, 1.8] {
        let mut cfg = fld_config(omega, 1e-6);
        cfg.max_iters = 20_000;
        let r = solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).expect("solve");
        ok &= r.converged;
        parts.push(format!("omega {omega}: {} it", r.iterations));
        ledger.record(format!("noise sphere omega={omega}"), &r);
    }
    let mut cfg = fld_config(1.5, 1e-4).with_precision(Precision::Single);
    cfg.sigma_eps = 1e-3 / m.dims().max_extent();
    cfg.max_iters = 20_000;
    let r = solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).expect("solve");
    ok &= r.converged && m.sigma_t.min() == 0.0;
    parts.push(format!("single precision to 1e-4: {} it", r.iterations));
    ledger.record("noise sphere single precision", &r);
    outcome(ok, parts.join(", "))
}

fn criterion_6() -> Outcome {
    let scene = make_noise_sphere(51, 3).expect("noise sphere");
    let m = &scene.channels[0];
    let cfg = fld_config(CDA_OMEGA, 1e-9).with_limiter(FluxLimiter::Cda);
    let fld = solve(&m.sigma_t, &m.albedo, &m.emission, &cfg).expect("solve");
    let cda = solve_classical(&m.sigma_t, &m.albedo, &m.emission, &cfg, Stop::Converged).expect("solve");
    let scale = cda.phi.max();
    let worst = fld
        .phi
        .data()
        .iter()
        .zip(cda.phi.data())
        .map(|(a, b)| (a - b).abs() / scale)
        .fold(0.0, f64::max);
    outcome(
        fld.converged && cda.converged && worst <= 1e-12,
        format!(
            "max |diff| / max phi = {worst:.2e} ({} vs {} iterations)",
            fld.iterations, cda.iterations
        ),
    )
}

/// Absorbing two-slab medium seen along +x by a one-pixel camera.
fn criterion_7a() -> (bool, String) {
    let nx = 16;
    let d = GridDims::new(nx, 4, 4, 1.0 / nx as f64).unwrap();
    let sigma = ScalarField::from_fn(d, |v| if v.i < nx / 2 { 0.8 } else { 2.2 });
    let tau: f64 = (0..nx).map(|i| sigma.get(Voxel::new(i, 1, 1))).sum::<f64>() * d.dl;
    let expected = (-tau).exp();
    let m = Medium {
        sigma_t: sigma,
        albedo: ScalarField::zeros(d),
        emission: ScalarField::zeros(d),
    };
    let camera = Camera::look_at(
        Vec3::new(-0.5, 0.125, 0.125),
        Vec3::new(1.0, 0.125, 0.125),
        Vec3::new(0.0, 0.0, 1.0),
        0.1,
        1,
        1,
    )
    .unwrap();
    let scene = Scene {
        channels: [m.clone(), m.clone(), m],
        light: None,
        background: [1.0; 3],
        camera,
    };
    let n = 100_000;
    let got = trace(&scene, &camera, n, 1, 21).unwrap().get(0, 0)[0];
    let se = (expected * (1.0 - expected) / n as f64).sqrt();
    let z = (got - expected) / se;
    (z.abs() <= 3.0, format!("(a) T {got:.5} vs {expected:.5}, z = {z:.2}"))
}

fn criterion_7() -> Outcome {
    let (a_ok, a) = criterion_7a();
    // Wide homogeneous block so the medium edge sits ten optical depths out.
    let albedo = 0.5;
    let scene = make_point_source(3, 20.0, albedo).expect("scene");
    let sigma = scene.channels[0].sigma_t.max();
    let radii = [0.95 / sigma, 1.05 / sigma];
    let est = estimate_fluence(&scene, 2_000_000, &radii, 4).expect("fluence");
    let shell = &est.shells[0];
    let target = 2.0 * (-1.0f64).exp();
    let rel = shell.phi_tilde / target - 1.0;
    let b_ok = rel.abs() <= 0.05;
    let energy = est.absorbed + est.escaped;
    let c_ok = (energy - 1.0).abs() <= 0.01;
    outcome(
        a_ok && b_ok && c_ok,
        format!(
            "{a}; (b) phi~ at tau {:.3} = {:.4} ± {:.4} vs {target:.4} ({:+.2}%); (c) absorbed {:.4} + escaped {:.4} = {energy:.4}",
            shell.tau,
            shell.phi_tilde,
            shell.std_error,
            100.0 * rel,
            est.absorbed,
            est.escaped
        ),
    )
}

struct Baked {
    scene: Scene,
    qri: Vec<ScalarField>,
}

fn bake_nebula(res: usize) -> Baked {
    let mut scene = make_nebulae(res, NoiseParams::default(), NEBULA_ALBEDO, NEBULA_CHANNEL_SCALES).expect("nebula");
    scene.camera = scene.camera.with_resolution(IMAGE_SIZE, IMAGE_SIZE);
    let light = scene.light.expect("nebula is lit");
    let qri = (0..3)
        .map(|c| {
            let ch = &scene.channels[c];
            let t = bake_dsm(&ch.sigma_t, &light).expect("bake");
            bake_qri(&ch.scattering(), &t, light.radiance[c]).expect("qri")
        })
        .collect();
    Baked { scene, qri }
}

fn solve_channels(b: &Baked, limiter: FluxLimiter, factor: usize, ledger: &mut FluxLedger, label: &str) -> (Vec<ScalarField>, bool) {
    let mut all_converged = true;
    let phis = (0..3)
        .map(|c| {
            let ch = &b.scene.channels[c];
            let src = combine_sources(&b.qri[c], &ch.emission).expect("source");
            let down = |f: &ScalarField| if factor == 1 { f.clone() } else { f.downsample(factor).expect("downsample") };
            let cfg = fld_config(if limiter.is_constant() { CDA_OMEGA } else { FLD_OMEGA }, 1e-6).with_limiter(limiter);
            let t = Instant::now();
            let r = solve(&down(&ch.sigma_t), &down(&ch.albedo), &down(&src), &cfg).expect("solve");
            eprintln!(
                "  {label} {} channel {c}: {} it, {:.0}s",
                limiter.name(),
                r.iterations,
                t.elapsed().as_secs_f64()
            );
            all_converged &= r.converged;
            if !limiter.is_constant() {
                ledger.record(format!("{label} channel {c}"), &r);
            }
            r.phi
        })
        .collect();
    (phis, all_converged)
}

fn render_with(b: &Baked, phis: &[ScalarField]) -> HdrImage {
    let src: [ChannelSources; 3] = std::array::from_fn(|c| ChannelSources {
        qri: Some(&b.qri[c]),
        phi: Some(&phis[c]),
    });
    render(&b.scene, &src, &RenderConfig::default()).expect("render")
}

fn artifact_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    std::fs::create_dir_all(&dir).expect("artifact dir");
    dir
}

fn criterion_8(ledger: &mut FluxLedger) -> Outcome {
    let t = Instant::now();
    let b = bake_nebula(NEBULA_RES);
    eprintln!("  bake {NEBULA_RES}^3: {:.0}s", t.elapsed().as_secs_f64());
    let (fld_phi, fld_conv) = solve_channels(&b, FluxLimiter::LevermorePomraning, NEBULA_DOWNSAMPLE, ledger, "nebula");
    let (cda_phi, cda_conv) = solve_channels(&b, FluxLimiter::Cda, NEBULA_DOWNSAMPLE, ledger, "nebula");
    let fld_img = render_with(&b, &fld_phi);
    let cda_img = render_with(&b, &cda_phi);
    let t = Instant::now();
    let reference = trace(&b.scene, &b.scene.camera, REFERENCE_SPP, 1000, 1).expect("trace");
    eprintln!("  path trace {REFERENCE_SPP} spp: {:.0}s", t.elapsed().as_secs_f64());
    let dir = artifact_dir();
    for (name, img) in [("fld", &fld_img), ("cda", &cda_img), ("reference", &reference)] {
        save_pfm(&dir.join(format!("nebula_{name}.pfm")), img).expect("write image");
    }
    let e_fld = compare(&fld_img, &reference).unwrap().rmse;
    let e_cda = compare(&cda_img, &reference).unwrap().rmse;
    outcome(
        fld_conv && cda_conv && e_fld < e_cda,
        format!(
            "RMSE FLD {e_fld:.4e} vs CDA {e_cda:.4e} (reference RMS {:.4e}, {NEBULA_RES}^3, factor {NEBULA_DOWNSAMPLE}, {REFERENCE_SPP} spp, {IMAGE_SIZE}x{IMAGE_SIZE})",
            reference.rms()
        ),
    )
}

fn criterion_9(ledger: &mut FluxLedger) -> Outcome {
    let b = bake_nebula(STABILITY_RES);
    let (full, full_conv) = solve_channels(&b, FluxLimiter::LevermorePomraning, 1, ledger, "stability factor 1");
    let (quarter, quarter_conv) = solve_channels(&b, FluxLimiter::LevermorePomraning, 4, ledger, "stability factor 4");
    let full_img = render_with(&b, &full);
    let quarter_img = render_with(&b, &quarter);
    let rel = compare(&full_img, &quarter_img).unwrap().rmse / full_img.rms();
    outcome(
        full_conv && quarter_conv && rel < STABILITY_TOL,
        format!("relative RMSE {rel:.4} (tol {STABILITY_TOL}, {STABILITY_RES}^3 nebula)"),
    )
}

fn main() {
    // `cargo test -- --list` style probes pass flags; only run for real invocations.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let selected: Option<Vec<usize>> = std::env::var("FLD_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wants = |n: usize| selected.as_ref().map_or(true, |s| s.contains(&n));

    let mut ledger = FluxLedger::default();
    let mut results: Vec<(usize, Outcome, f64)> = Vec::new();
    let run = |n: usize, results: &mut Vec<(usize, Outcome, f64)>, f: &mut dyn FnMut() -> Outcome| {
        if wants(n) {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            eprintln!("criterion {n} finished in {secs:.0}s");
            results.push((n, o, secs));
        }
    };

    run(1, &mut results, &mut criterion_1);
    if wants(2) || wants(3) || wants(4) {
        let t = Instant::now();
        let (c2, c3) = point_source_runs(&mut ledger);
        let secs = t.elapsed().as_secs_f64();
        results.push((2, c2, secs));
        results.push((3, c3, secs));
    }
    run(5, &mut results, &mut || criterion_5(&mut ledger));
    run(6, &mut results, &mut criterion_6);
    run(7, &mut results, &mut criterion_7);
    run(8, &mut results, &mut || criterion_8(&mut ledger));
    run(9, &mut results, &mut || criterion_9(&mut ledger));
    if wants(4) {
        results.push((4, criterion_4(&ledger), 0.0));
    }

    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (n, o, secs) in &results {
        if !o.passed {
            failed += 1;
        }
        println!("criterion {n}: {} ({secs:.0}s) {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
