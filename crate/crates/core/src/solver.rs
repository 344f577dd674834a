//! Red-black SOR Gauss-Seidel relaxation of the flux-limited diffusion equation
//!
//! ```text
//! ∇·(D_F ∇φ) = (1 − α) σ_t φ − j,      D_F = F(R) / max(σ_t, σ_ε)
//! ```
//!
//! discretized on the 6-point face stencil with `D` interpolated
//! arithmetically to half points. Each iteration is a red pass followed by
//! a black pass; within a pass a voxel reads only its own state and the
//! state of opposite-colored neighbors, so the pass is order independent
//! and runs data parallel when the `parallel` feature is enabled.
//!
//! Boundary voxels are Dirichlet: they keep their initial values for the
//! whole solve.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{GridDims, ScalarField, Voxel};
use crate::limiters::FluxLimiter;
use crate::math::Vec3;
use crate::real::Real;

/// Arithmetic precision of the relaxation kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    /// Practical normalized-residual floor for the precision.
    pub fn default_tolerance(self) -> f64 {
        match self {
            Precision::Single => 1e-4,
            Precision::Double => 1e-6,
        }
    }
}

impl FromStr for Precision {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            other => Err(Error::InvalidConfig(format!("unknown precision {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub limiter: FluxLimiter,
    /// SOR factor, `0 < ω < 2`.
    pub omega: f64,
    /// Extinction floor `σ_ε` [1/m].
    pub sigma_eps: f64,
    /// Tiny relative tolerance `ε` used for initial values and floors.
    pub eps: f64,
    /// Target for the normalized residual `R̄ / j̄`.
    pub conv_tol: f64,
    pub max_iters: usize,
    /// Voxel layers next to the faces excluded from the residual RMS.
    pub boundary_margin: usize,
    pub precision: Precision,
}

impl SolverConfig {
    /// Defaults for a grid whose largest side is `extent` meters.
    pub fn for_extent(extent: f64) -> Self {
        Self {
            limiter: FluxLimiter::LevermorePomraning,
            omega: 1.5,
            sigma_eps: 1e-3 / extent,
            eps: 1e-20,
            conv_tol: 1e-6,
            max_iters: 20_000,
            boundary_margin: 2,
            precision: Precision::Double,
        }
    }

    pub fn with_limiter(mut self, limiter: FluxLimiter) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Switches precision and resets the tolerance to that precision's default.
    pub fn with_precision(mut self, precision: Precision) -> Self {
        self.precision = precision;
        self.conv_tol = precision.default_tolerance();
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.limiter.validate()?;
        let bad = |msg: alloc::string::String| Err(Error::InvalidConfig(msg));
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return bad(format!("SOR factor omega = {} must lie in (0, 2)", self.omega));
        }
        if !(self.sigma_eps > 0.0 && self.sigma_eps.is_finite()) {
            return bad(format!("sigma_eps = {} must be positive", self.sigma_eps));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad(format!("eps = {} must be positive", self.eps));
        }
        if !(self.conv_tol > 0.0 && self.conv_tol.is_finite()) {
            return bad(format!("conv_tol = {} must be positive", self.conv_tol));
        }
        if self.max_iters < 1 {
            return bad("max_iters must be at least 1".into());
        }
        Ok(())
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::for_extent(1.0)
    }
}

/// Dirichlet data on the six faces.
#[derive(Clone, Copy, Default)]
pub enum Boundary<'a> {
    /// `φ = ε j̄ Δl`, `D = ε Δl` on every boundary voxel.
    #[default]
    Floor,
    /// `φ` supplied per boundary voxel; boundary `D` takes the diffusive
    /// value `F(0) / max(σ, σ_ε)`.
    Values(&'a dyn Fn(Voxel) -> f64),
}

impl core::fmt::Debug for Boundary<'_> {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Boundary::Floor => f.write_str("Floor"),
            Boundary::Values(_) => f.write_str("Values(..)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Fluence `φ` [W/m²].
    pub phi: ScalarField,
    /// Diffusion coefficient `D` [m].
    pub diffusion: ScalarField,
    /// `R̄ / j̄` after every iteration.
    pub residual_history: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl SolveResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Solves with the default floor boundary.
pub fn solve(
    sigma_t: &ScalarField,
    albedo: &ScalarField,
    emission: &ScalarField,
    config: &SolverConfig,
) -> Result<SolveResult> {
    solve_with_boundary(sigma_t, albedo, emission, config, Boundary::Floor)
}

pub fn solve_with_boundary(
    sigma_t: &ScalarField,
    albedo: &ScalarField,
    emission: &ScalarField,
    config: &SolverConfig,
    boundary: Boundary<'_>,
) -> Result<SolveResult> {
    match config.precision {
        Precision::Double => run::<f64>(sigma_t, albedo, emission, config, boundary),
        Precision::Single => run::<f32>(sigma_t, albedo, emission, config, boundary),
    }
}

fn run<T: Real>(
    sigma_t: &ScalarField,
    albedo: &ScalarField,
    emission: &ScalarField,
    config: &SolverConfig,
    boundary: Boundary<'_>,
) -> Result<SolveResult> {
    let mut state = FldState::<T>::new(sigma_t, albedo, emission, config, boundary)?;
    let mut history = Vec::new();
    let mut converged = false;
    for it in 0..config.max_iters {
        let ratio = state.iterate();
        history.push(ratio);
        if !ratio.is_finite() {
            return Err(Error::Diverged { iteration: it + 1 });
        }
        if ratio <= config.conv_tol {
            converged = true;
            break;
        }
    }
    Ok(SolveResult {
        phi: state.phi_field(),
        diffusion: state.diffusion_field(),
        iterations: history.len(),
        residual_history: history,
        converged,
    })
}

/// Checks the solver preconditions shared by every solve path and returns
/// the RMS emission `j̄`.
pub(crate) fn check_inputs(
    sigma_t: &ScalarField,
    albedo: &ScalarField,
    emission: &ScalarField,
) -> Result<f64> {
    if !sigma_t.same_dims(albedo) || !sigma_t.same_dims(emission) {
        return Err(Error::DimensionMismatch);
    }
    for (index, &value) in albedo.data().iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::AlbedoOutOfRange { index, value });
        }
    }
    if let Some(idx) = sigma_t.data().iter().position(|&s| s < 0.0) {
        return Err(crate::error::invalid(format!("negative extinction at flat index {idx}")));
    }
    if let Some(idx) = emission.data().iter().position(|&s| s < 0.0) {
        return Err(crate::error::invalid(format!("negative emission at flat index {idx}")));
    }
    let jbar = emission.rms();
    if jbar == 0.0 {
        return Err(Error::ZeroEmission);
    }
    Ok(jbar)
}

/// Unrelaxed local update `(j Δl² + Σ D_ps φ_s) / ((1 − α) σ Δl² + Σ D_ps)`.
pub fn update_phi(
    emission: f64,
    albedo: f64,
    sigma: f64,
    dl: f64,
    d_half: &[f64; 6],
    phi_neighbors: &[f64; 6],
) -> f64 {
    let dl2 = dl * dl;
    let (num, den) = balance(emission * dl2, (1.0 - albedo) * sigma * dl2, d_half, phi_neighbors);
    num / den
}

/// `F(R) / max(σ, σ_ε)`.
pub fn update_d(limiter: FluxLimiter, knudsen: f64, sigma: f64, sigma_eps: f64) -> f64 {
    limiter.eval(knudsen) / sigma.max(sigma_eps)
}

/// Floored Knudsen number `max(|∇φ|, ε j̄) / max(σ φ, ε j̄)`.
pub fn knudsen(grad_norm: f64, sigma: f64, phi: f64, floor: f64) -> f64 {
    knudsen_t(grad_norm, sigma, phi, floor)
}

/// Residual `(numerator − φ · denominator) / Δl²` of the local balance.
pub fn residual(numerator: f64, denominator: f64, phi: f64, dl: f64) -> f64 {
    (numerator - phi * denominator) / (dl * dl)
}

#[inline(always)]
fn knudsen_t<T: Real>(grad_norm: T, sigma: T, phi: T, floor: T) -> T {
    grad_norm.max(floor) / (sigma * phi).max(floor)
}

#[inline(always)]
fn balance<T: Real>(source: T, sink: T, d_half: &[T; 6], phi_nb: &[T; 6]) -> (T, T) {
    let mut num = source;
    let mut den = sink;
    for s in 0..6 {
        num = num + d_half[s] * phi_nb[s];
        den = den + d_half[s];
    }
    (num, den)
}

/// Outcome of relaxing one voxel.
#[derive(Debug, Clone, Copy)]
struct Relaxed<T> {
    phi: T,
    diffusion: T,
    residual: T,
}

/// Read-only per-solve data.
struct Kernel<T> {
    sigma: Vec<T>,
    /// `(1 − α) σ Δl²`
    sink: Vec<T>,
    /// `j Δl²`
    source: Vec<T>,
    limiter: FluxLimiter,
    constant_f: Option<T>,
    sigma_eps: T,
    floor: T,
    omega: T,
    half: T,
    inv_2dl: T,
    inv_dl2: T,
    sy: usize,
    sz: usize,
}

impl<T: Real> Kernel<T> {
    #[inline(always)]
    fn neighbors(&self, field: &[T], idx: usize) -> [T; 6] {
        [
            field[idx - 1],
            field[idx + 1],
            field[idx - self.sy],
            field[idx + self.sy],
            field[idx - self.sz],
            field[idx + self.sz],
        ]
    }

    #[inline(always)]
    fn gradient(&self, nb: &[T; 6]) -> [T; 3] {
        [
            (nb[1] - nb[0]) * self.inv_2dl,
            (nb[3] - nb[2]) * self.inv_2dl,
            (nb[5] - nb[4]) * self.inv_2dl,
        ]
    }

    #[inline(always)]
    fn knudsen(&self, phi: &[T], idx: usize) -> T {
        let nb = self.neighbors(phi, idx);
        let g = self.gradient(&nb);
        let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        knudsen_t(norm, self.sigma[idx], phi[idx], self.floor)
    }

    #[inline(always)]
    fn diffusion(&self, phi: &[T], idx: usize) -> T {
        let f = match self.constant_f {
            Some(f) => f,
            None => T::of(self.limiter.eval(self.knudsen(phi, idx).to_f64())),
        };
        f / self.sigma[idx].max(self.sigma_eps)
    }

    #[inline(always)]
    fn balance(&self, phi: &[T], diff: &[T], d_p: T, idx: usize) -> (T, T) {
        let nb = self.neighbors(phi, idx);
        let dn = self.neighbors(diff, idx);
        let mut d_half = [T::zero(); 6];
        for s in 0..6 {
            d_half[s] = self.half * (d_p + dn[s]);
        }
        balance(self.source[idx], self.sink[idx], &d_half, &nb)
    }

    /// D update, φ update with over-relaxation, and the residual of the
    /// state the voxel had on entry.
    #[inline(always)]
    fn relax(&self, phi: &[T], diff: &[T], idx: usize) -> Relaxed<T> {
        let d_p = self.diffusion(phi, idx);
        let (num, den) = self.balance(phi, diff, d_p, idx);
        let old = phi[idx];
        let target = num / den;
        let residual = (num - old * den) * self.inv_dl2;
        let relaxed = self.omega * target + (T::one() - self.omega) * old;
        Relaxed {
            phi: relaxed.max(T::zero()),
            diffusion: d_p,
            residual,
        }
    }
}

/// Mutable solver state: fluence and diffusion grids plus the read-only
/// medium data. Exposes the local operators for inspection.
pub struct FldState<T: Real = f64> {
    dims: GridDims,
    kernel: Kernel<T>,
    phi: Vec<T>,
    diff: Vec<T>,
    jbar: f64,
    margin: usize,
    residual_count: usize,
    #[cfg(feature = "parallel")]
    scratch: Option<(Vec<T>, Vec<T>)>,
}

impl<T: Real> FldState<T> {
    pub fn new(
        sigma_t: &ScalarField,
        albedo: &ScalarField,
        emission: &ScalarField,
        config: &SolverConfig,
        boundary: Boundary<'_>,
    ) -> Result<Self> {
        config.validate()?;
        let jbar = check_inputs(sigma_t, albedo, emission)?;
        let dims = sigma_t.dims();
        let dl = dims.dl;
        let dl2 = dl * dl;
        let margin = config.boundary_margin.max(1);
        let span = |n: usize| n.saturating_sub(2 * margin);
        let residual_count = span(dims.nx) * span(dims.ny) * span(dims.nz);
        if residual_count == 0 {
            return Err(Error::InvalidConfig(format!(
                "boundary_margin {} leaves no voxels for the residual on a {}x{}x{} grid",
                config.boundary_margin, dims.nx, dims.ny, dims.nz
            )));
        }

        let sigma_eps = config.sigma_eps;
        let sigma: Vec<f64> = sigma_t.data().iter().map(|&s| s.max(sigma_eps)).collect();
        let sink = sigma
            .iter()
            .zip(albedo.data())
            .map(|(&s, &a)| T::of((1.0 - a) * s * dl2))
            .collect();
        let source = emission.data().iter().map(|&j| T::of(j * dl2)).collect();

        let mut phi = vec![T::of(config.eps * jbar * dl); dims.len()];
        let mut diff = vec![T::of(config.eps * dl); dims.len()];
        if let Boundary::Values(f) = boundary {
            let f0 = config.limiter.eval(0.0);
            for idx in 0..dims.len() {
                let v = dims.voxel(idx);
                if dims.is_boundary(v) {
                    phi[idx] = T::of(f(v).max(0.0));
                    diff[idx] = T::of(f0 / sigma[idx].max(sigma_eps));
                }
            }
        }

        let kernel = Kernel {
            sigma: sigma.iter().map(|&s| T::of(s)).collect(),
            sink,
            source,
            limiter: config.limiter,
            constant_f: config.limiter.is_constant().then(|| T::of(config.limiter.eval(0.0))),
            sigma_eps: T::of(sigma_eps),
            floor: T::of(config.eps * jbar),
            omega: T::of(config.omega),
            half: T::of(0.5),
            inv_2dl: T::of(1.0 / (2.0 * dl)),
            inv_dl2: T::of(1.0 / dl2),
            sy: dims.nx,
            sz: dims.nx * dims.ny,
        };
        Ok(Self {
            dims,
            kernel,
            phi,
            diff,
            jbar,
            margin,
            residual_count,
            #[cfg(feature = "parallel")]
            scratch: None,
        })
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// RMS emission `j̄`.
    pub fn jbar(&self) -> f64 {
        self.jbar
    }

    pub fn phi_field(&self) -> ScalarField {
        to_field(self.dims, &self.phi)
    }

    pub fn diffusion_field(&self) -> ScalarField {
        to_field(self.dims, &self.diff)
    }

    /// Overwrites `φ` (boundary voxels included).
    pub fn set_phi(&mut self, phi: &ScalarField) -> Result<()> {
        if phi.dims() != self.dims {
            return Err(Error::DimensionMismatch);
        }
        self.phi = phi.data().iter().map(|&v| T::of(v)).collect();
        Ok(())
    }

    /// Overwrites `D` (boundary voxels included).
    pub fn set_diffusion(&mut self, d: &ScalarField) -> Result<()> {
        if d.dims() != self.dims {
            return Err(Error::DimensionMismatch);
        }
        self.diff = d.data().iter().map(|&v| T::of(v)).collect();
        Ok(())
    }

    fn interior(&self, v: Voxel) -> Result<usize> {
        if !self.dims.is_interior(v) {
            return Err(Error::BoundaryVoxel(v));
        }
        Ok(self.dims.index(v.i, v.j, v.k))
    }

    /// Floored Knudsen number at `v` from the stored `φ`.
    pub fn knudsen(&self, v: Voxel) -> Result<f64> {
        let idx = self.interior(v)?;
        Ok(self.kernel.knudsen(&self.phi, idx).to_f64())
    }

    /// `F(R_p) / max(σ_p, σ_ε)` from the stored `φ` (not written back).
    pub fn update_d(&self, v: Voxel) -> Result<f64> {
        let idx = self.interior(v)?;
        Ok(self.kernel.diffusion(&self.phi, idx).to_f64())
    }

    /// Unrelaxed local update `numerator / denominator` using the stored `D`.
    pub fn update_phi(&self, v: Voxel) -> Result<f64> {
        let idx = self.interior(v)?;
        let (num, den) = self.kernel.balance(&self.phi, &self.diff, self.diff[idx], idx);
        Ok((num / den).to_f64())
    }

    /// Local residual `(numerator − φ_p · denominator) / Δl²` of the stored fields.
    pub fn residual(&self, v: Voxel) -> Result<f64> {
        let idx = self.interior(v)?;
        let (num, den) = self.kernel.balance(&self.phi, &self.diff, self.diff[idx], idx);
        Ok(((num - self.phi[idx] * den) * self.kernel.inv_dl2).to_f64())
    }

    /// RMS of [`residual`](Self::residual) over the voxels at least
    /// `boundary_margin` layers from the faces, divided by `j̄`.
    pub fn residual_ratio(&self) -> f64 {
        let mut ss = 0.0;
        for idx in 0..self.dims.len() {
            let v = self.dims.voxel(idx);
            if self.dims.layer(v) >= self.margin {
                let r = self.residual(v).unwrap_or(0.0);
                ss += r * r;
            }
        }
        Float::sqrt(ss / self.residual_count as f64) / self.jbar
    }

    /// One red pass and one black pass. Returns `R̄ / j̄` where each voxel's
    /// residual is that of the state it entered its update with.
    pub fn iterate(&mut self) -> f64 {
        let mut ss = 0.0;
        for color in 0..2 {
            ss += self
                .pass(color)
                .into_iter()
                .fold(0.0, |acc, plane| acc + plane);
        }
        Float::sqrt(ss / self.residual_count as f64) / self.jbar
    }

    /// Per-plane residual sums of squares for one color pass.
    fn pass(&mut self, color: usize) -> Vec<f64> {
        #[cfg(feature = "parallel")]
        if rayon::current_num_threads() > 1 {
            return self.pass_parallel(color);
        }
        self.pass_serial(color)
    }

    fn pass_serial(&mut self, color: usize) -> Vec<f64> {
        let d = self.dims;
        let mut sums = vec![0.0; d.nz];
        for k in 1..d.nz - 1 {
            let mut acc = 0.0;
            for j in 1..d.ny - 1 {
                let (lo, hi, counted) = self.row_window(j, k);
                let start = 1 + ((1 + j + k + color) & 1);
                let base = d.index(0, j, k);
                let mut i = start;
                while i < d.nx - 1 {
                    let idx = base + i;
                    let out = self.kernel.relax(&self.phi, &self.diff, idx);
                    self.phi[idx] = out.phi;
                    self.diff[idx] = out.diffusion;
                    if counted && i >= lo && i <= hi {
                        let r = out.residual.to_f64();
                        acc += r * r;
                    }
                    i += 2;
                }
            }
            sums[k] = acc;
        }
        sums
    }

    #[cfg(feature = "parallel")]
    fn pass_parallel(&mut self, color: usize) -> Vec<f64> {
        use rayon::prelude::*;

        let d = self.dims;
        let plane = d.nx * d.ny;
        let (mut new_phi, mut new_diff) = self
            .scratch
            .take()
            .unwrap_or_else(|| (vec![T::zero(); d.len()], vec![T::zero(); d.len()]));
        let sums: Vec<f64> = {
            let (phi, diff, kernel) = (&self.phi, &self.diff, &self.kernel);
            let this = &*self;
            new_phi
                .par_chunks_mut(plane)
                .zip(new_diff.par_chunks_mut(plane))
                .enumerate()
                .map(|(k, (pp, dd))| {
                    if k == 0 || k == d.nz - 1 {
                        return 0.0;
                    }
                    let mut acc = 0.0;
                    for j in 1..d.ny - 1 {
                        let (lo, hi, counted) = this.row_window(j, k);
                        let mut i = 1 + ((1 + j + k + color) & 1);
                        while i < d.nx - 1 {
                            let local = j * d.nx + i;
                            let out = kernel.relax(phi, diff, k * plane + local);
                            pp[local] = out.phi;
                            dd[local] = out.diffusion;
                            if counted && i >= lo && i <= hi {
                                let r = out.residual.to_f64();
                                acc += r * r;
                            }
                            i += 2;
                        }
                    }
                    acc
                })
                .collect()
        };
        self.phi
            .par_chunks_mut(plane)
            .zip(self.diff.par_chunks_mut(plane))
            .zip(new_phi.par_chunks(plane).zip(new_diff.par_chunks(plane)))
            .enumerate()
            .for_each(|(k, ((pp, dd), (np, nd)))| {
                if k == 0 || k == d.nz - 1 {
                    return;
                }
                for j in 1..d.ny - 1 {
                    let mut i = 1 + ((1 + j + k + color) & 1);
                    while i < d.nx - 1 {
                        let local = j * d.nx + i;
                        pp[local] = np[local];
                        dd[local] = nd[local];
                        i += 2;
                    }
                }
            });
        self.scratch = Some((new_phi, new_diff));
        sums
    }

    /// Residual window `[lo, hi]` along x for row `(j, k)`, and whether the
    /// row lies inside the counted region at all.
    #[inline]
    fn row_window(&self, j: usize, k: usize) -> (usize, usize, bool) {
        let m = self.margin;
        let d = self.dims;
        let counted = j >= m && j + m < d.ny && k >= m && k + m < d.nz;
        (m, d.nx - 1 - m, counted)
    }
}

fn to_field<T: Real>(dims: GridDims, data: &[T]) -> ScalarField {
    ScalarField::from_fn(dims, |v| data[dims.index(v.i, v.j, v.k)].to_f64())
}

/// Net flux `E = −D ∇φ` at every voxel; boundary entries are zero.
pub fn flux(phi: &ScalarField, diffusion: &ScalarField) -> Result<Vec<Vec3>> {
    if !phi.same_dims(diffusion) {
        return Err(Error::DimensionMismatch);
    }
    let d = phi.dims();
    let mut out = vec![Vec3::ZERO; d.len()];
    for (idx, e) in out.iter_mut().enumerate() {
        let v = d.voxel(idx);
        if d.is_interior(v) {
            *e = -(phi.central_gradient(v)? * diffusion.data()[idx]);
        }
    }
    Ok(out)
}

/// Largest `|E_p| / φ_p` over interior voxels with `φ_p > 0`.
pub fn max_flux_ratio(phi: &ScalarField, diffusion: &ScalarField) -> Result<f64> {
    let e = flux(phi, diffusion)?;
    let d = phi.dims();
    let mut worst = 0.0_f64;
    for (idx, ev) in e.iter().enumerate() {
        let p = phi.data()[idx];
        if d.is_interior(d.voxel(idx)) && p > 0.0 {
            worst = worst.max(ev.norm() / p);
        }
    }
    Ok(worst)
}
