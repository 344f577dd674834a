//! Classical diffusion (`D = 1 / (3 max(σ, σ_ε))`) relaxed on the same
//! red-black schedule as [`crate::solver`], written as a separate serial
//! double-precision code path. It never touches the limiter machinery and
//! serves as the independent reference for the CDA configuration of the
//! flux-limited solver.

use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::grid::{ScalarField, Voxel};
use crate::solver::{check_inputs, SolveResult, SolverConfig};

/// When the reference relaxation stops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stop {
    /// Stop once `R̄ / j̄ ≤ conv_tol` or at `max_iters`.
    Converged,
    /// Run exactly this many iterations.
    Iterations(usize),
}

/// Relaxes the classical diffusion equation with floor Dirichlet boundaries.
/// Only `omega`, `sigma_eps`, `eps`, `conv_tol`, `max_iters` and
/// `boundary_margin` of `config` are used.
pub fn solve_classical(
    sigma_t: &ScalarField,
    albedo: &ScalarField,
    emission: &ScalarField,
    config: &SolverConfig,
    stop: Stop,
) -> Result<SolveResult> {
    config.validate()?;
    let jbar = check_inputs(sigma_t, albedo, emission)?;
    let dims = sigma_t.dims();
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let dl = dims.dl;
    let h2 = dl * dl;
    let margin = config.boundary_margin.max(1);
    let omega = config.omega;

    let sigma: Vec<f64> = sigma_t.data().iter().map(|&s| s.max(config.sigma_eps)).collect();
    let alpha = albedo.data();
    let j = emission.data();
    let mut phi = ScalarField::constant(dims, config.eps * jbar * dl).into_data();
    let mut d = ScalarField::constant(dims, config.eps * dl).into_data();

    let at = |i: usize, jj: usize, k: usize| i + nx * (jj + ny * k);
    let counted = |i: usize, jj: usize, k: usize| {
        dims.layer(Voxel::new(i, jj, k)) >= margin
    };
    let n_counted = (nx - 2 * margin) * (ny - 2 * margin) * (nz - 2 * margin);

    let iterations = match stop {
        Stop::Converged => config.max_iters,
        Stop::Iterations(n) => n,
    };
    let mut history = Vec::new();
    let mut converged = false;
    for it in 0..iterations {
        let mut total = 0.0;
        for color in 0..2 {
            let mut planes = 0.0;
            for k in 1..nz - 1 {
                let mut plane = 0.0;
                for jj in 1..ny - 1 {
                    for i in 1..nx - 1 {
                        if (i + jj + k) % 2 != color {
                            continue;
                        }
                        let p = at(i, jj, k);
                        let dp = (1.0 / 3.0) / sigma[p].max(config.sigma_eps);
                        let stencil = [
                            at(i - 1, jj, k),
                            at(i + 1, jj, k),
                            at(i, jj - 1, k),
                            at(i, jj + 1, k),
                            at(i, jj, k - 1),
                            at(i, jj, k + 1),
                        ];
                        let mut num = j[p] * h2;
                        let mut den = (1.0 - alpha[p]) * sigma[p] * h2;
                        for &s in &stencil {
                            let dps = 0.5 * (dp + d[s]);
                            num += dps * phi[s];
                            den += dps;
                        }
                        let r = (num - phi[p] * den) / h2;
                        let next = omega * (num / den) + (1.0 - omega) * phi[p];
                        phi[p] = next.max(0.0);
                        d[p] = dp;
                        if counted(i, jj, k) {
                            plane += r * r;
                        }
                    }
                }
                planes += plane;
            }
            total += planes;
        }
        let ratio = Float::sqrt(total / n_counted as f64) / jbar;
        history.push(ratio);
        if !ratio.is_finite() {
            return Err(Error::Diverged { iteration: it + 1 });
        }
        if stop == Stop::Converged && ratio <= config.conv_tol {
            converged = true;
            break;
        }
    }
    if let Stop::Iterations(_) = stop {
        converged = history.last().is_some_and(|&r| r <= config.conv_tol);
    }
    Ok(SolveResult {
        phi: ScalarField::from_vec(dims, phi)?,
        diffusion: ScalarField::from_vec(dims, d)?,
        iterations: history.len(),
        residual_history: history,
        converged,
    })
}
