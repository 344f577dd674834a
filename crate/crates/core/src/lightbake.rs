//! Deep shadow map (transmittance toward a directional light) and the
//! reduced-incident source `q_ri = L_l σ_s T` that seeds the diffusion solve.

use alloc::format;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::grid::{GridDims, ScalarField};
use crate::math::{ray_box, Vec3};
use crate::Rgb;

/// Optical depth beyond which a shadow ray stops accumulating.
const TAU_CUTOFF: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalLight {
    /// Per-channel intensity `L_l`.
    pub radiance: Rgb,
    /// Unit direction of photon travel `ω_l`.
    pub direction: Vec3,
}

impl DirectionalLight {
    /// Normalizes `direction`.
    pub fn new(radiance: Rgb, direction: Vec3) -> Result<Self> {
        let light = Self {
            radiance,
            direction: direction.normalized(),
        };
        light.validate()?;
        Ok(light)
    }

    pub fn validate(&self) -> Result<()> {
        if ((self.direction.norm() - 1.0).abs()) > 1e-6 {
            return Err(invalid(format!(
                "light direction must be a unit vector, |d| = {}",
                self.direction.norm()
            )));
        }
        if self.radiance.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(invalid("light radiance must be finite and non-negative"));
        }
        Ok(())
    }

    /// Unit vector pointing from the medium toward the light.
    pub fn to_light(&self) -> Vec3 {
        -self.direction
    }
}

/// Optical depth from `origin` along `dir` to the grid boundary by midpoint
/// quadrature with at most `step`-long segments. Only the part of the ray
/// inside `support` (where `σ_t` may be non-zero) is integrated.
pub(crate) fn optical_depth_to_exit(
    sigma_t: &ScalarField,
    support: Option<(Vec3, Vec3)>,
    origin: Vec3,
    dir: Vec3,
    step: f64,
) -> f64 {
    let Some((lo, hi)) = support else {
        return 0.0;
    };
    let Some((t0, t1)) = ray_box(origin, dir, lo, hi) else {
        return 0.0;
    };
    optical_depth_segment(sigma_t, origin + dir * t0, dir, t1 - t0, step, TAU_CUTOFF)
}

pub(crate) fn optical_depth_segment(
    sigma_t: &ScalarField,
    start: Vec3,
    dir: Vec3,
    length: f64,
    step: f64,
    cutoff: f64,
) -> f64 {
    if length <= 0.0 {
        return 0.0;
    }
    let n = Float::ceil(length / step).max(1.0) as usize;
    let h = length / n as f64;
    let mut tau = 0.0;
    for m in 0..n {
        tau += sigma_t.sample(start + dir * ((m as f64 + 0.5) * h)) * h;
        if tau > cutoff {
            break;
        }
    }
    tau
}

/// Transmittance toward the light for every voxel, `Δx = Δl / 2`.
pub fn bake_dsm(sigma_t: &ScalarField, light: &DirectionalLight) -> Result<ScalarField> {
    bake_dsm_with_step(sigma_t, light, 0.5 * sigma_t.dims().dl)
}

pub fn bake_dsm_with_step(
    sigma_t: &ScalarField,
    light: &DirectionalLight,
    step: f64,
) -> Result<ScalarField> {
    light.validate()?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("raymarch step {step} must be positive")));
    }
    let d = sigma_t.dims();
    let dir = light.to_light();
    let support = sigma_t.support_box();
    let data = per_plane(d, |v| {
        let tau = optical_depth_to_exit(sigma_t, support, d.center(v), dir, step);
        Float::exp(-tau)
    });
    ScalarField::from_vec(d, data)
}

/// `q_ri = L_l σ_s T` for one color channel.
pub fn bake_qri(sigma_s: &ScalarField, transmittance: &ScalarField, radiance: f64) -> Result<ScalarField> {
    if !sigma_s.same_dims(transmittance) {
        return Err(Error::DimensionMismatch);
    }
    sigma_s.zip_map(transmittance, |s, t| radiance * s * t)
}

/// Voxelwise `q_ri + j`.
pub fn combine_sources(qri: &ScalarField, emission: &ScalarField) -> Result<ScalarField> {
    qri.zip_map(emission, |a, b| a + b)
}

/// Scattering coefficient `σ_s = α σ_t`.
pub fn scattering(sigma_t: &ScalarField, albedo: &ScalarField) -> Result<ScalarField> {
    sigma_t.zip_map(albedo, |s, a| s * a)
}

/// Evaluates `f` at every voxel, one z-plane per task when parallel.
pub(crate) fn per_plane(d: GridDims, f: impl Fn(crate::grid::Voxel) -> f64 + Sync) -> Vec<f64> {
    let plane = d.nx * d.ny;
    let eval_plane = |k: usize, out: &mut [f64]| {
        for j in 0..d.ny {
            for i in 0..d.nx {
                out[i + d.nx * j] = f(crate::grid::Voxel::new(i, j, k));
            }
        }
    };
    let mut data = alloc::vec![0.0; d.len()];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        data.par_chunks_mut(plane)
            .enumerate()
            .for_each(|(k, out)| eval_plane(k, out));
    }
    #[cfg(not(feature = "parallel"))]
    for (k, out) in data.chunks_mut(plane).enumerate() {
        eval_plane(k, out);
    }
    data
}
