//! Point-source comparison of grid solutions against closed-form fluences.

use std::fs;
use std::path::Path;

use fld_core::analytic::{
    cda_greens, fld_transport_point, grosjean_fluence, log_log_slope, normalized_fluence, radial_profile,
    PointSourceParams, ProfileBin, ProfileOptions,
};
use fld_core::scenes::make_point_source;
use fld_core::solver::{max_flux_ratio, solve_with_boundary, Boundary, SolveResult};
use fld_core::{FluxLimiter, SolverConfig, Voxel};

use crate::error::{CliError, CliResult};

/// Classical solution must match the CDA Green's function this closely.
pub const CDA_REL_TOL: f64 = 0.10;
pub const CDA_TAU_RANGE: (f64, f64) = (0.5, 3.0);
/// Near-field log-log slope window of the flux-limited solution.
pub const SLOPE_TAU_RANGE: (f64, f64) = (0.1, 0.4);
pub const SLOPE_BOUNDS: (f64, f64) = (-2.3, -1.7);
/// Flux may exceed the fluence by at most this relative margin.
pub const FLUX_RATIO_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct PointSourceArgs {
    pub res: usize,
    pub tau_across: f64,
    pub albedos: Vec<f64>,
    /// Limiter of the flux-limited run.
    pub limiter: FluxLimiter,
    /// Base solver settings; the limiter is overridden per run.
    pub solver: SolverConfig,
    /// SOR factor of the classical run when it should differ from `solver`.
    pub cda_omega: Option<f64>,
}

impl Default for PointSourceArgs {
    fn default() -> Self {
        Self {
            res: 127,
            tau_across: 4.0,
            albedos: vec![0.4, 0.8],
            limiter: FluxLimiter::LevermorePomraning,
            solver: SolverConfig::default(),
            cda_omega: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct AlbedoRun {
    pub albedo: f64,
    pub sigma_t: f64,
    pub cda: SolveResult,
    pub fld: SolveResult,
    pub cda_profile: Vec<ProfileBin>,
    pub fld_profile: Vec<ProfileBin>,
    pub near_profile: Vec<ProfileBin>,
    /// Largest `|φ̃_grid/φ̃_cda − 1|` over the comparison range.
    pub cda_max_rel_err: f64,
    pub fld_slope: Option<f64>,
    pub fld_flux_ratio: f64,
}

impl AlbedoRun {
    pub fn checks(&self) -> Vec<Check> {
        let a = self.albedo;
        let mut out = vec![Check {
            name: format!("cda_vs_greens alpha={a}"),
            value: self.cda_max_rel_err,
            passed: self.cda.converged && self.cda_max_rel_err <= CDA_REL_TOL,
            detail: format!(
                "max rel err {:.4} over tau in [{}, {}] (tol {CDA_REL_TOL}), {} iterations",
                self.cda_max_rel_err, CDA_TAU_RANGE.0, CDA_TAU_RANGE.1, self.cda.iterations
            ),
        }];
        let slope = self.fld_slope.unwrap_or(f64::NAN);
        out.push(Check {
            name: format!("fld_near_field_slope alpha={a}"),
            value: slope,
            passed: self.fld.converged && slope >= SLOPE_BOUNDS.0 && slope <= SLOPE_BOUNDS.1,
            detail: format!(
                "log-log slope {slope:.3} over tau in [{}, {}] (allowed [{}, {}]), {} iterations",
                SLOPE_TAU_RANGE.0, SLOPE_TAU_RANGE.1, SLOPE_BOUNDS.0, SLOPE_BOUNDS.1, self.fld.iterations
            ),
        });
        out.push(Check {
            name: format!("fld_flux_limit alpha={a}"),
            value: self.fld_flux_ratio,
            passed: self.fld_flux_ratio <= 1.0 + FLUX_RATIO_TOL,
            detail: format!("max |E|/phi = {:.6}", self.fld_flux_ratio),
        });
        out
    }
}

fn max_rel_err(bins: &[ProfileBin], params: &PointSourceParams, lo: f64, hi: f64) -> CliResult<f64> {
    let mut worst = 0.0_f64;
    for b in bins.iter().filter(|b| b.tau >= lo && b.tau <= hi) {
        let exact = normalized_fluence(cda_greens(b.tau, params)?, params.sigma_t);
        worst = worst.max((b.phi_tilde / exact - 1.0).abs());
    }
    Ok(worst)
}

/// Classical run with Green's-function boundary values and a flux-limited
/// run with Grosjean boundary values, both on the point-source scene.
pub fn run_albedo(args: &PointSourceArgs, albedo: f64) -> CliResult<AlbedoRun> {
    let scene = make_point_source(args.res, args.tau_across, albedo)?;
    let m = &scene.channels[0];
    let d = m.dims();
    let sigma = m.sigma_t.max();
    let params = PointSourceParams::new(sigma, albedo)?;
    let c = args.res / 2;
    let center = Voxel::new(c, c, c);
    let origin = d.center(center);
    let tau_of = |v: Voxel| sigma * (d.center(v) - origin).norm();

    let cda_bc = |v: Voxel| cda_greens(tau_of(v), &params).unwrap_or(0.0);
    let mut cda_cfg = args.solver.clone().with_limiter(FluxLimiter::Cda);
    if let Some(omega) = args.cda_omega {
        cda_cfg = cda_cfg.with_omega(omega);
    }
    let cda = solve_with_boundary(&m.sigma_t, &m.albedo, &m.emission, &cda_cfg, Boundary::Values(&cda_bc))?;

    let fld_bc = |v: Voxel| grosjean_fluence(tau_of(v), &params).unwrap_or(0.0);
    let fld_cfg = args.solver.clone().with_limiter(args.limiter);
    let fld = solve_with_boundary(&m.sigma_t, &m.albedo, &m.emission, &fld_cfg, Boundary::Values(&fld_bc))?;

    let tau_max = 0.5 * args.tau_across * 3f64.sqrt();
    let wide = ProfileOptions::new(60, 0.0, tau_max);
    let cda_profile = radial_profile(&cda.phi, center, sigma, &wide)?;
    let fld_profile = radial_profile(&fld.phi, center, sigma, &wide)?;
    let near = ProfileOptions::new(30, SLOPE_TAU_RANGE.0, SLOPE_TAU_RANGE.1);
    let near_profile = radial_profile(&fld.phi, center, sigma, &near)?;
    let cda_max_rel_err = max_rel_err(&cda_profile, &params, CDA_TAU_RANGE.0, CDA_TAU_RANGE.1)?;
    let fld_slope = log_log_slope(&near_profile, SLOPE_TAU_RANGE.0, SLOPE_TAU_RANGE.1);
    let fld_flux_ratio = max_flux_ratio(&fld.phi, &fld.diffusion)?;
    Ok(AlbedoRun {
        albedo,
        sigma_t: sigma,
        cda,
        fld,
        cda_profile,
        fld_profile,
        near_profile,
        cda_max_rel_err,
        fld_slope,
        fld_flux_ratio,
    })
}

pub fn write_profile_csv(path: &Path, bins: &[ProfileBin]) -> CliResult<()> {
    let mut out = String::from("tau,phi_tilde\n");
    for b in bins {
        out.push_str(&format!("{},{}\n", b.tau, b.phi_tilde));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Closed-form curves sampled at the profile bin centers.
pub fn write_analytic_csv(path: &Path, bins: &[ProfileBin], params: &PointSourceParams) -> CliResult<()> {
    let mut out = String::from("tau,grosjean,cda,fld_transport\n");
    let s = params.sigma_t;
    for b in bins {
        out.push_str(&format!(
            "{},{},{},{}\n",
            b.tau,
            normalized_fluence(grosjean_fluence(b.tau, params)?, s),
            normalized_fluence(cda_greens(b.tau, params)?, s),
            normalized_fluence(fld_transport_point(b.tau, params)?, s),
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Runs every albedo, writes CSV profiles into `out_dir`, prints one line
/// per check and fails if any check fails.
pub fn validate_point_source(out_dir: &Path, args: &PointSourceArgs) -> CliResult<Vec<Check>> {
    for &a in &args.albedos {
        if !(0.0..=1.0).contains(&a) {
            return Err(CliError::usage(format!("albedo {a} outside [0, 1]")));
        }
    }
    let mut checks = Vec::new();
    for &a in &args.albedos {
        let run = run_albedo(args, a)?;
        let params = PointSourceParams::new(run.sigma_t, a)?;
        write_profile_csv(&out_dir.join(format!("profile_cda_alpha{a}.csv")), &run.cda_profile)?;
        write_profile_csv(&out_dir.join(format!("profile_fld_alpha{a}.csv")), &run.fld_profile)?;
        write_analytic_csv(&out_dir.join(format!("analytic_alpha{a}.csv")), &run.fld_profile, &params)?;
        for c in run.checks() {
            println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            checks.push(c);
        }
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(checks)
    } else {
        Err(CliError::Failed(format!("failed checks: {}", failed.join(", "))))
    }
}
