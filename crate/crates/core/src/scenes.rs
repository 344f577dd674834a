//! Procedural test scenes on a unit-extent grid.

use alloc::format;

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::grid::{GridDims, ScalarField};
use crate::lightbake::DirectionalLight;
use crate::math::Vec3;
use crate::noise::{fbm, PerlinNoise, ValueNoise};
use crate::raymarch::Camera;
use crate::Rgb;

/// Medium properties of one color channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Medium {
    pub sigma_t: ScalarField,
    pub albedo: ScalarField,
    pub emission: ScalarField,
}

impl Medium {
    pub fn homogeneous(dims: GridDims, sigma_t: f64, albedo: f64) -> Self {
        Self {
            sigma_t: ScalarField::constant(dims, sigma_t),
            albedo: ScalarField::constant(dims, albedo),
            emission: ScalarField::zeros(dims),
        }
    }

    pub fn dims(&self) -> GridDims {
        self.sigma_t.dims()
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_t.same_dims(&self.albedo) || !self.sigma_t.same_dims(&self.emission) {
            return Err(Error::DimensionMismatch);
        }
        if let Some((index, &value)) = self
            .albedo
            .data()
            .iter()
            .enumerate()
            .find(|(_, a)| !(0.0..=1.0).contains(*a))
        {
            return Err(Error::AlbedoOutOfRange { index, value });
        }
        if self.sigma_t.min() < 0.0 || self.emission.min() < 0.0 {
            return Err(invalid("extinction and emission must be non-negative"));
        }
        Ok(())
    }

    /// `σ_s = α σ_t`.
    pub fn scattering(&self) -> ScalarField {
        self.sigma_t
            .zip_map(&self.albedo, |s, a| s * a)
            .expect("validated medium")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    /// Red, green and blue media.
    pub channels: [Medium; 3],
    pub light: Option<DirectionalLight>,
    pub background: Rgb,
    pub camera: Camera,
}

impl Scene {
    pub fn dims(&self) -> GridDims {
        self.channels[0].dims()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        for ch in &self.channels {
            ch.validate()?;
            if ch.dims() != d {
                return Err(Error::DimensionMismatch);
            }
        }
        if let Some(light) = &self.light {
            light.validate()?;
        }
        if self.background.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("background radiance must be finite and non-negative"));
        }
        self.camera.validate()
    }
}

/// Camera on the −y side of the unit cube looking at its center.
pub fn default_camera(width: usize, height: usize) -> Camera {
    Camera::look_at(
        Vec3::new(0.5, -1.3, 0.5),
        Vec3::splat(0.5),
        Vec3::new(0.0, 0.0, 1.0),
        0.6,
        width,
        height,
    )
    .expect("constant camera is valid")
}

fn unit_grid(res: usize) -> Result<GridDims> {
    GridDims::cube(res, 1.0)
}

/// Homogeneous medium with a unit-power emitting center voxel and no light.
pub fn make_point_source(res: usize, tau_across: f64, albedo: f64) -> Result<Scene> {
    if res % 2 == 0 {
        return Err(invalid(format!("point-source grid needs odd resolution, got {res}")));
    }
    if !(tau_across > 0.0 && tau_across.is_finite()) {
        return Err(invalid(format!("tau_across {tau_across} must be positive")));
    }
    if !(0.0..=1.0).contains(&albedo) {
        return Err(Error::AlbedoOutOfRange { index: 0, value: albedo });
    }
    let d = unit_grid(res)?;
    let sigma = tau_across / (res as f64 * d.dl);
    let c = res / 2;
    let mut m = Medium::homogeneous(d, sigma, albedo);
    m.emission.set(crate::Voxel::new(c, c, c), 1.0 / d.voxel_volume());
    Ok(Scene {
        channels: [m.clone(), m.clone(), m],
        light: None,
        background: [0.0; 3],
        camera: default_camera(64, 64),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub octaves: u32,
    /// Base lattice frequency in cycles per unit length.
    pub frequency: f64,
    /// Peak radial displacement of the surface [m].
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        Self {
            octaves: 5,
            frequency: 3.0,
            amplitude: 0.12,
            seed: 7,
        }
    }
}

/// Peak extinction of the nebula before channel scaling [1/m].
pub const NEBULA_DENSITY: f64 = 100.0;
/// Default per-channel extinction scales of the nebula.
pub const NEBULA_CHANNEL_SCALES: Rgb = [1.0, 0.6, 0.35];
const NEBULA_RADIUS: f64 = 0.35;

pub fn nebula_light() -> DirectionalLight {
    DirectionalLight::new([4.0; 3], Vec3::new(-0.6, 0.35, -0.7)).expect("constant light is valid")
}

/// Noise-displaced sphere of radius `0.35 L` lit by [`nebula_light`].
pub fn make_nebulae(res: usize, noise: NoiseParams, albedo: f64, channel_scales: Rgb) -> Result<Scene> {
    make_nebulae_with_density(res, noise, albedo, channel_scales, NEBULA_DENSITY)
}

pub fn make_nebulae_with_density(
    res: usize,
    noise: NoiseParams,
    albedo: f64,
    channel_scales: Rgb,
    density: f64,
) -> Result<Scene> {
    if res < 16 {
        return Err(invalid(format!("nebula needs res >= 16, got {res}")));
    }
    if !(0.0..=1.0).contains(&albedo) {
        return Err(Error::AlbedoOutOfRange { index: 0, value: albedo });
    }
    if channel_scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) || !(density >= 0.0) {
        return Err(invalid("density and channel scales must be non-negative"));
    }
    if !(noise.amplitude >= 0.0 && noise.frequency > 0.0) {
        return Err(invalid("noise amplitude must be >= 0 and frequency > 0"));
    }
    let d = unit_grid(res)?;
    let value = ValueNoise::new(noise.seed);
    let center = Vec3::splat(0.5);
    let shape = crate::lightbake::per_plane(d, |v| {
        let p = d.center(v);
        let r = if noise.amplitude > 0.0 {
            NEBULA_RADIUS + noise.amplitude * fbm(&value, p * noise.frequency, noise.octaves)
        } else {
            NEBULA_RADIUS
        };
        // Signed distance to the displaced surface in voxels, antialiased over one voxel.
        let s = ((p - center).norm() - r) / d.dl;
        (0.5 - s).clamp(0.0, 1.0)
    });
    let shape = ScalarField::from_vec(d, shape)?;
    let channel = |scale: f64| Medium {
        sigma_t: shape.map(|v| v * density * scale),
        albedo: ScalarField::constant(d, albedo),
        emission: ScalarField::zeros(d),
    };
    Ok(Scene {
        channels: channel_scales.map(channel),
        light: Some(nebula_light()),
        background: [0.0; 3],
        camera: default_camera(64, 64),
    })
}

/// Extinction inside the noise sphere [1/m].
pub const NOISE_SPHERE_SIGMA: f64 = 10.0;
/// Albedo inside the noise sphere.
pub const NOISE_SPHERE_ALBEDO: f64 = 0.8;
const NOISE_SPHERE_FREQUENCY: f64 = 6.0;

/// Homogeneous sphere of radius `0.35 L` in vacuum with Perlin-noise
/// emission inside it.
pub fn make_noise_sphere(res: usize, seed: u64) -> Result<Scene> {
    if res < 16 {
        return Err(invalid(format!("noise sphere needs res >= 16, got {res}")));
    }
    let d = unit_grid(res)?;
    let perlin = PerlinNoise::new(seed);
    let center = Vec3::splat(0.5);
    let inside = |v| (d.center(v) - center).norm() <= NEBULA_RADIUS;
    let sigma_t = ScalarField::from_fn(d, |v| if inside(v) { NOISE_SPHERE_SIGMA } else { 0.0 });
    let albedo = ScalarField::from_fn(d, |v| if inside(v) { NOISE_SPHERE_ALBEDO } else { 0.0 });
    let emission = ScalarField::from_fn(d, |v| {
        if inside(v) {
            let n = fbm(&perlin, d.center(v) * NOISE_SPHERE_FREQUENCY, 3);
            Float::max(n, 0.0) * 2.0
        } else {
            0.0
        }
    });
    let m = Medium {
        sigma_t,
        albedo,
        emission,
    };
    Ok(Scene {
        channels: [m.clone(), m.clone(), m],
        light: None,
        background: [0.0; 3],
        camera: default_camera(64, 64),
    })
}
