//! Reference volumetric path tracer: delta tracking through the trilinear
//! extinction field, isotropic scattering, next-event estimation toward the
//! directional light.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::normalized_fluence;
use crate::error::{invalid, Error, Result};
use crate::grid::ScalarField;
use crate::lightbake::optical_depth_segment;
use crate::math::{ray_box, Vec3};
use crate::raymarch::{Camera, HdrImage};
use crate::scenes::{Medium, Scene};

/// Bounce count after which Russian roulette starts.
pub const ROULETTE_DEPTH: usize = 20;
const SAMPLE_BITS: u32 = 24;

/// Deterministic random stream keyed by `(seed, stream)`.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// Stream of sample `sample` of pixel `pixel`. Supports up to 2²⁴
    /// samples per pixel.
    pub fn for_sample(seed: u64, pixel: u64, sample: u64) -> Self {
        debug_assert!(sample < 1 << SAMPLE_BITS);
        Self::new(seed, (pixel << SAMPLE_BITS) | sample)
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    /// Exponential free flight with rate `sigma`.
    fn flight(&mut self, sigma: f64) -> f64 {
        -Float::ln(1.0 - self.uniform()) / sigma
    }

    fn sphere(&mut self) -> Vec3 {
        let z = 1.0 - 2.0 * self.uniform();
        let phi = 2.0 * PI * self.uniform();
        let s = Float::sqrt((1.0 - z * z).max(0.0));
        Vec3::new(s * Float::cos(phi), s * Float::sin(phi), z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Event {
    Collision { point: Vec3, distance: f64 },
    Escaped,
}

fn check_majorant(sigma_max: f64) -> Result<()> {
    if sigma_max > 0.0 && sigma_max.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("majorant {sigma_max} must be positive")))
    }
}

/// Extinction field with a majorant and the box outside of which it vanishes.
struct Tracker<'a> {
    sigma_t: &'a ScalarField,
    sigma_max: f64,
    bounds: Option<(Vec3, Vec3)>,
}

impl<'a> Tracker<'a> {
    fn full(sigma_t: &'a ScalarField, sigma_max: f64) -> Self {
        Self {
            sigma_t,
            sigma_max,
            bounds: Some((Vec3::ZERO, sigma_t.dims().extent())),
        }
    }

    /// Restricts tracking to the support of `σ_t`.
    fn tight(sigma_t: &'a ScalarField) -> Self {
        Self {
            sigma_t,
            sigma_max: sigma_t.max(),
            bounds: sigma_t.support_box(),
        }
    }

    fn interval(&self, ray: &Ray) -> Option<(f64, f64)> {
        let (lo, hi) = self.bounds?;
        ray_box(ray.origin, ray.dir, lo, hi)
    }

    fn sample(&self, ray: &Ray, rng: &mut RngStream) -> Event {
        let Some((t0, t1)) = self.interval(ray) else {
            return Event::Escaped;
        };
        let mut t = t0;
        loop {
            t += rng.flight(self.sigma_max);
            if t >= t1 {
                return Event::Escaped;
            }
            let x = ray.origin + ray.dir * t;
            if rng.uniform() * self.sigma_max < self.sigma_t.sample(x) {
                return Event::Collision { point: x, distance: t };
            }
        }
    }

    fn ratio_tracking(&self, ray: &Ray, rng: &mut RngStream) -> f64 {
        let Some((t0, t1)) = self.interval(ray) else {
            return 1.0;
        };
        let mut t = t0;
        let mut tr = 1.0;
        loop {
            t += rng.flight(self.sigma_max);
            if t >= t1 {
                return tr;
            }
            tr *= 1.0 - self.sigma_t.sample(ray.origin + ray.dir * t) / self.sigma_max;
            if tr < 1e-3 {
                // Unbiased roulette on negligible transmittance.
                if rng.uniform() < 0.5 {
                    return 0.0;
                }
                tr *= 2.0;
            }
        }
    }

    fn raymarch(&self, ray: &Ray) -> f64 {
        let Some((t0, t1)) = self.interval(ray) else {
            return 1.0;
        };
        let step = 0.5 * self.sigma_t.dims().dl;
        let tau = optical_depth_segment(self.sigma_t, ray.origin + ray.dir * t0, ray.dir, t1 - t0, step, 80.0);
        Float::exp(-tau)
    }
}

/// First real collision along `ray` inside the grid, by Woodcock tracking
/// against the majorant `sigma_max`.
pub fn woodcock_sample(sigma_t: &ScalarField, sigma_max: f64, ray: &Ray, rng: &mut RngStream) -> Result<Event> {
    check_majorant(sigma_max)?;
    Ok(Tracker::full(sigma_t, sigma_max).sample(ray, rng))
}

/// Unbiased single-sample transmittance from `ray.origin` to the grid exit.
pub fn ratio_tracking(sigma_t: &ScalarField, sigma_max: f64, ray: &Ray, rng: &mut RngStream) -> Result<f64> {
    check_majorant(sigma_max)?;
    Ok(Tracker::full(sigma_t, sigma_max).ratio_tracking(ray, rng))
}

/// Shadow-ray transmittance estimator used at next-event vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ShadowMode {
    #[default]
    RatioTracking,
    /// Deterministic midpoint raymarch with step `Δl/2`.
    Raymarch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceConfig {
    pub spp: usize,
    /// Maximum number of scattering events per path.
    pub max_bounces: usize,
    pub seed: u64,
    pub shadow: ShadowMode,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            spp: 16,
            max_bounces: 256,
            seed: 0,
            shadow: ShadowMode::RatioTracking,
        }
    }
}

/// Path-traced image of `scene` through `camera`.
pub fn trace(scene: &Scene, camera: &Camera, spp: usize, max_bounces: usize, seed: u64) -> Result<HdrImage> {
    trace_with(
        scene,
        camera,
        &TraceConfig {
            spp,
            max_bounces,
            seed,
            shadow: ShadowMode::RatioTracking,
        },
    )
}

pub fn trace_with(scene: &Scene, camera: &Camera, config: &TraceConfig) -> Result<HdrImage> {
    scene.validate()?;
    camera.validate()?;
    if config.spp == 0 || config.spp >= 1 << SAMPLE_BITS {
        return Err(invalid(format!("spp = {} must lie in [1, 2^24)", config.spp)));
    }
    let trackers: Vec<Tracker<'_>> = scene.channels.iter().map(|m| Tracker::tight(&m.sigma_t)).collect();
    let width = camera.width;
    let row = |y: usize, out: &mut [crate::Rgb]| {
        for (x, px) in out.iter_mut().enumerate() {
            let pixel = (y * width + x) as u64;
            let ray = Ray {
                origin: camera.position,
                dir: camera.direction(x, y, 0.5, 0.5),
            };
            // Running mean keeps constant estimates exact.
            let mut mean = [0.0; 3];
            for s in 0..config.spp {
                let mut rng = RngStream::for_sample(config.seed, pixel, s as u64);
                for c in 0..3 {
                    let l = path(scene, c, &trackers[c], ray, &mut rng, config);
                    mean[c] += (l - mean[c]) / (s + 1) as f64;
                }
            }
            *px = mean;
        }
    };
    let mut pixels = vec![[0.0; 3]; width * camera.height];
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        pixels
            .par_chunks_mut(width)
            .enumerate()
            .for_each(|(y, out)| row(y, out));
    }
    #[cfg(not(feature = "parallel"))]
    for (y, out) in pixels.chunks_mut(width).enumerate() {
        row(y, out);
    }
    HdrImage::from_pixels(width, camera.height, pixels)
}

/// Radiance estimate for channel `c` arriving along `-ray.dir`.
fn path(scene: &Scene, c: usize, tracker: &Tracker<'_>, mut ray: Ray, rng: &mut RngStream, cfg: &TraceConfig) -> f64 {
    let medium: &Medium = &scene.channels[c];
    let mut radiance = 0.0;
    let mut weight = 1.0;
    let mut bounce = 0;
    loop {
        let point = match tracker.sample(&ray, rng) {
            Event::Escaped => {
                // Background is a backdrop seen by camera rays only.
                if bounce == 0 {
                    radiance += weight * scene.background[c];
                }
                return radiance;
            }
            Event::Collision { point, .. } => point,
        };
        let sigma = medium.sigma_t.sample(point);
        let albedo = medium.albedo.sample(point);
        let j = medium.emission.sample(point);
        if j > 0.0 {
            radiance += weight * j / (4.0 * PI * sigma);
        }
        if let Some(light) = &scene.light {
            let l = light.radiance[c];
            if l > 0.0 && albedo > 0.0 {
                let shadow = Ray {
                    origin: point,
                    dir: light.to_light(),
                };
                let tr = match cfg.shadow {
                    ShadowMode::RatioTracking => tracker.ratio_tracking(&shadow, rng),
                    ShadowMode::Raymarch => tracker.raymarch(&shadow),
                };
                radiance += weight * albedo * l * tr / (4.0 * PI);
            }
        }
        if bounce >= cfg.max_bounces || rng.uniform() >= albedo {
            return radiance;
        }
        bounce += 1;
        if bounce > ROULETTE_DEPTH {
            let survive = weight.clamp(0.05, 1.0);
            if rng.uniform() >= survive {
                return radiance;
            }
            weight /= survive;
        }
        ray = Ray {
            origin: point,
            dir: rng.sphere(),
        };
    }
}

/// Track-length tally over one spherical shell around the source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluenceShell {
    pub r_inner: f64,
    pub r_outer: f64,
    /// Optical radius of the shell midpoint.
    pub tau: f64,
    pub phi_tilde: f64,
    /// Monte Carlo standard error of `phi_tilde`.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluenceEstimate {
    pub shells: Vec<FluenceShell>,
    /// Fraction of emitted power absorbed, estimated as `σ_a` times the
    /// mean track length per photon.
    pub absorbed: f64,
    /// Fraction of photons leaving the grid.
    pub escaped: f64,
}

const PHOTON_BATCH: usize = 4096;

/// Length of the segment `a + t d`, `t ∈ [0, len]`, inside the ball of radius `r` about `c`.
fn chord_in_ball(a: Vec3, d: Vec3, len: f64, c: Vec3, r: f64) -> f64 {
    let o = a - c;
    let b = d.dot(o);
    let disc = b * b - (o.dot(o) - r * r);
    if disc <= 0.0 {
        return 0.0;
    }
    let s = Float::sqrt(disc);
    let lo = (-b - s).max(0.0);
    let hi = (-b + s).min(len);
    (hi - lo).max(0.0)
}

/// Forward random walks from the emitting voxel center of a homogeneous
/// scene (channel 0). `radii` are increasing shell boundaries.
pub fn estimate_fluence(scene: &Scene, samples: usize, radii: &[f64], seed: u64) -> Result<FluenceEstimate> {
    scene.validate()?;
    if radii.len() < 2 {
        return Err(invalid("at least one shell (two radii) is required"));
    }
    if radii[0] < 0.0 || radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("shell radii must be non-negative and increasing"));
    }
    if samples == 0 {
        return Err(invalid("sample count must be positive"));
    }
    let m = &scene.channels[0];
    let sigma = m.sigma_t.max();
    let albedo = m.albedo.max();
    if m.sigma_t.min() != sigma || m.albedo.min() != albedo || !(sigma > 0.0) {
        return Err(invalid("fluence estimation needs a homogeneous medium with sigma_t > 0"));
    }
    let d = m.dims();
    let (src_idx, &j) = m
        .emission
        .data()
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::ZeroEmission)?;
    if j <= 0.0 {
        return Err(Error::ZeroEmission);
    }
    let source = d.center(d.voxel(src_idx));
    let extent = d.extent();
    let nshell = radii.len() - 1;

    struct Tally {
        sum: Vec<f64>,
        sum_sq: Vec<f64>,
        track: f64,
        escaped: usize,
    }
    let batch = |b: usize| {
        let mut rng = RngStream::new(seed, b as u64);
        let n = PHOTON_BATCH.min(samples - b * PHOTON_BATCH);
        let mut t = Tally {
            sum: vec![0.0; nshell],
            sum_sq: vec![0.0; nshell],
            track: 0.0,
            escaped: 0,
        };
        let mut photon = vec![0.0; nshell];
        let mut inside = vec![0.0; radii.len()];
        for _ in 0..n {
            photon.iter_mut().for_each(|v| *v = 0.0);
            let mut x = source;
            loop {
                let dir = rng.sphere();
                let (_, exit) = ray_box(x, dir, Vec3::ZERO, extent).unwrap_or((0.0, 0.0));
                let flight = rng.flight(sigma);
                let len = flight.min(exit);
                for (slot, &r) in inside.iter_mut().zip(radii) {
                    *slot = chord_in_ball(x, dir, len, source, r);
                }
                for s in 0..nshell {
                    photon[s] += inside[s + 1] - inside[s];
                }
                t.track += len;
                if flight >= exit {
                    t.escaped += 1;
                    break;
                }
                x = x + dir * flight;
                if rng.uniform() >= albedo {
                    break;
                }
            }
            for s in 0..nshell {
                t.sum[s] += photon[s];
                t.sum_sq[s] += photon[s] * photon[s];
            }
        }
        t
    };
    let nbatch = samples.div_ceil(PHOTON_BATCH);
    #[cfg(feature = "parallel")]
    let tallies: Vec<Tally> = {
        use rayon::prelude::*;
        (0..nbatch).into_par_iter().map(batch).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let tallies: Vec<Tally> = (0..nbatch).map(batch).collect();

    let nf = samples as f64;
    let mut sum = vec![0.0; nshell];
    let mut sum_sq = vec![0.0; nshell];
    let mut track = 0.0;
    let mut escaped = 0;
    for t in &tallies {
        for s in 0..nshell {
            sum[s] += t.sum[s];
            sum_sq[s] += t.sum_sq[s];
        }
        track += t.track;
        escaped += t.escaped;
    }
    let shells = (0..nshell)
        .map(|s| {
            let (r0, r1) = (radii[s], radii[s + 1]);
            let volume = 4.0 / 3.0 * PI * (r1 * r1 * r1 - r0 * r0 * r0);
            let mean = sum[s] / nf;
            let var = (sum_sq[s] / nf - mean * mean).max(0.0);
            let to_tilde = |phi: f64| normalized_fluence(phi / volume, sigma);
            FluenceShell {
                r_inner: r0,
                r_outer: r1,
                tau: sigma * 0.5 * (r0 + r1),
                phi_tilde: to_tilde(mean),
                std_error: to_tilde(Float::sqrt(var / nf)),
            }
        })
        .collect();
    Ok(FluenceEstimate {
        shells,
        absorbed: (1.0 - albedo) * sigma * track / nf,
        escaped: escaped as f64 / nf,
    })
}
