//! Primary-ray volume rendering: march each camera ray through the medium
//! accumulating `T(x_n → eye) Q(x_n) Δx` with
//! `4π Q = q_ri + σ_s φ + j`, then add the attenuated background.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;
use crate::lightbake::optical_depth_segment;
use crate::math::{ray_box, Vec3};
use crate::scenes::Scene;
use crate::Rgb;

/// Pinhole camera with an orthonormal `(right, up, forward)` basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub forward: Vec3,
    /// Vertical field of view [rad].
    pub vfov: f64,
    pub width: usize,
    pub height: usize,
}

impl Camera {
    pub fn look_at(
        position: Vec3,
        target: Vec3,
        up_hint: Vec3,
        vfov: f64,
        width: usize,
        height: usize,
    ) -> Result<Self> {
        let forward = (target - position).normalized();
        let right = forward.cross(up_hint).normalized();
        let up = right.cross(forward);
        let cam = Self {
            position,
            right,
            up,
            forward,
            vfov,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        let (r, u, f) = (self.right, self.up, self.forward);
        let unit = |v: Vec3| (v.norm() - 1.0).abs() <= 1e-6;
        if !(unit(r) && unit(u) && unit(f))
            || r.dot(u).abs() > 1e-6
            || r.dot(f).abs() > 1e-6
            || u.dot(f).abs() > 1e-6
        {
            return Err(invalid("camera basis must be orthonormal"));
        }
        if !(self.vfov > 0.0 && self.vfov < PI) {
            return Err(invalid(format!("vertical fov {} must lie in (0, pi)", self.vfov)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(invalid("camera resolution must be non-zero"));
        }
        Ok(())
    }

    /// Same camera at a different resolution.
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    /// Unit direction through image position `(px + du, py + dv)`, with
    /// row 0 at the top of the image.
    pub fn direction(&self, px: usize, py: usize, du: f64, dv: f64) -> Vec3 {
        let half_h = Float::tan(0.5 * self.vfov);
        let half_w = half_h * self.width as f64 / self.height as f64;
        let sx = (2.0 * (px as f64 + du) / self.width as f64 - 1.0) * half_w;
        let sy = (1.0 - 2.0 * (py as f64 + dv) / self.height as f64) * half_h;
        (self.forward + self.right * sx + self.up * sy).normalized()
    }
}

/// Linear RGB framebuffer, row-major with row 0 at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct HdrImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<Rgb>,
}

impl HdrImage {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            pixels: vec![[0.0; 3]; width * height],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                got: pixels.len(),
            });
        }
        if pixels.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(invalid("HDR pixels must be finite and non-negative"));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn scaled(&self, s: f64) -> HdrImage {
        HdrImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p.map(|v| v * s)).collect(),
        }
    }

    /// RMS over all channel values.
    pub fn rms(&self) -> f64 {
        let n = (self.pixels.len() * 3) as f64;
        Float::sqrt(self.pixels.iter().flatten().map(|v| v * v).sum::<f64>() / n)
    }
}

/// Per-channel RMS and overall RMS of `a − b` in linear HDR.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageDiff {
    pub rmse: f64,
    pub channel_rmse: Rgb,
    pub max_abs: f64,
}

pub fn compare(a: &HdrImage, b: &HdrImage) -> Result<ImageDiff> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::DimensionMismatch);
    }
    let mut ch = [0.0; 3];
    let mut max_abs = 0.0_f64;
    for (p, q) in a.pixels.iter().zip(&b.pixels) {
        for c in 0..3 {
            let d = p[c] - q[c];
            ch[c] += d * d;
            max_abs = max_abs.max(d.abs());
        }
    }
    let n = a.pixels.len() as f64;
    let total = (ch[0] + ch[1] + ch[2]) / (3.0 * n);
    Ok(ImageDiff {
        rmse: Float::sqrt(total),
        channel_rmse: ch.map(|s| Float::sqrt(s / n)),
        max_abs,
    })
}

/// 8-bit RGB image, row 0 at the top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LdrImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

/// `clamp((exposure · v)^(1/γ), 0, 1)` quantized with round-half-up.
pub fn tonemap(img: &HdrImage, exposure: f64, gamma: f64) -> Result<LdrImage> {
    if !(exposure > 0.0 && gamma > 0.0) {
        return Err(invalid("exposure and gamma must be positive"));
    }
    let data = img
        .pixels
        .iter()
        .flatten()
        .map(|&v| {
            let x = Float::powf((exposure * v).max(0.0), 1.0 / gamma).clamp(0.0, 1.0);
            Float::floor(x * 255.0 + 0.5) as u8
        })
        .collect();
    Ok(LdrImage {
        width: img.width,
        height: img.height,
        data,
    })
}

/// `exp(−Σ σ_t Δx)` along the segment `a → b` (clipped to the grid) with
/// midpoint samples no more than `step` apart.
pub fn transmittance(sigma_t: &ScalarField, a: Vec3, b: Vec3, step: f64) -> Result<f64> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid(format!("step {step} must be positive")));
    }
    let len = (b - a).norm();
    if len == 0.0 {
        return Ok(1.0);
    }
    let dir = (b - a) / len;
    let Some((t0, t1)) = ray_box(a, dir, Vec3::ZERO, sigma_t.dims().extent()) else {
        return Ok(1.0);
    };
    let t1 = t1.min(len);
    if t1 <= t0 {
        return Ok(1.0);
    }
    let tau = optical_depth_segment(sigma_t, a + dir * t0, dir, t1 - t0, step, f64::INFINITY);
    Ok(Float::exp(-tau))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderConfig {
    /// Raymarch step; `None` uses half the medium voxel size.
    pub step: Option<f64>,
    /// Random per-ray offset of the sample positions.
    pub jitter: bool,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            step: None,
            jitter: false,
            seed: 0,
        }
    }
}

/// Precomputed scattering sources of one color channel. Missing fields
/// are treated as zero. `phi` may live on a coarser grid of the same extent.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChannelSources<'a> {
    pub qri: Option<&'a ScalarField>,
    pub phi: Option<&'a ScalarField>,
}

/// Renders `scene` with its own camera.
pub fn render(scene: &Scene, sources: &[ChannelSources<'_>; 3], config: &RenderConfig) -> Result<HdrImage> {
    scene.validate()?;
    let dims = scene.dims();
    for s in sources {
        if let Some(q) = s.qri {
            if q.dims() != dims {
                return Err(Error::DimensionMismatch);
            }
        }
    }
    let step = config.step.unwrap_or(0.5 * dims.dl);
    if !(step > 0.0) {
        return Err(invalid("render step must be positive"));
    }
    let cam = scene.camera;
    let row = |y: usize, out: &mut [Rgb]| {
        for (x, px) in out.iter_mut().enumerate() {
            let offset = if config.jitter {
                let stream = (y * cam.width + x) as u64;
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(stream);
                rng.gen::<f64>()
            } else {
                0.5
            };
            *px = march(scene, sources, cam.position, cam.direction(x, y, 0.5, 0.5), step, offset);
        }
    };
    let mut pixels = vec![[0.0; 3]; cam.width * cam.height];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pixels
            .par_chunks_mut(cam.width)
            .enumerate()
            .for_each(|(y, out)| row(y, out));
    }
    #[cfg(not(feature = "parallel"))]
    for (y, out) in pixels.chunks_mut(cam.width).enumerate() {
        row(y, out);
    }
    HdrImage::from_pixels(cam.width, cam.height, pixels)
}

/// Radiance arriving at `origin` from direction `-dir`.
fn march(
    scene: &Scene,
    sources: &[ChannelSources<'_>; 3],
    origin: Vec3,
    dir: Vec3,
    step: f64,
    offset: f64,
) -> Rgb {
    let mut radiance = [0.0; 3];
    let mut trans = [1.0; 3];
    if let Some((t0, t1)) = ray_box(origin, dir, Vec3::ZERO, scene.dims().extent()) {
        let len = t1 - t0;
        if len > 0.0 {
            let n = Float::ceil(len / step).max(1.0) as usize;
            let h = len / n as f64;
            let start = origin + dir * t0;
            for m in 0..n {
                let x = start + dir * ((m as f64 + offset) * h);
                for c in 0..3 {
                    if trans[c] < 1e-30 {
                        continue;
                    }
                    let ch = &scene.channels[c];
                    let sigma = ch.sigma_t.sample(x);
                    let alpha = ch.albedo.sample(x);
                    let mut q4pi = ch.emission.sample(x);
                    if let Some(q) = sources[c].qri {
                        q4pi += q.sample(x);
                    }
                    if let Some(phi) = sources[c].phi {
                        q4pi += alpha * sigma * phi.sample(x);
                    }
                    let half = Float::exp(-0.5 * sigma * h);
                    radiance[c] += trans[c] * half * q4pi / (4.0 * PI) * h;
                    trans[c] *= half * half;
                }
            }
        }
    }
    for c in 0..3 {
        radiance[c] += scene.background[c] * trans[c];
    }
    radiance
}
