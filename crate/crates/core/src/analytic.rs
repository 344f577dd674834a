//! Closed-form fluence of a point source in an infinite homogeneous medium
//! with isotropic scattering, as functions of optical depth `τ = σ_t r`.
//!
//! All fluences are for the configured source power (unit by default) and
//! carry the `σ_t²` factor; [`normalized_fluence`] removes it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::grid::{ScalarField, Voxel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSourceParams {
    /// Extinction `σ_t` [1/m].
    pub sigma_t: f64,
    /// Single-scattering albedo in `[0, 1]`.
    pub albedo: f64,
    /// Emitted power [W].
    pub power: f64,
}

impl PointSourceParams {
    pub fn new(sigma_t: f64, albedo: f64) -> Result<Self> {
        let p = Self {
            sigma_t,
            albedo,
            power: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_t > 0.0 && self.sigma_t.is_finite()) {
            return Err(invalid(format!("sigma_t = {} must be positive", self.sigma_t)));
        }
        if !(0.0..=1.0).contains(&self.albedo) {
            return Err(Error::AlbedoOutOfRange {
                index: 0,
                value: self.albedo,
            });
        }
        Ok(())
    }

    /// Diffusive decay rate `λ = √(3(1 − α)/(2 − α))`.
    pub fn lambda(&self) -> f64 {
        Float::sqrt(3.0 * (1.0 - self.albedo) / (2.0 - self.albedo))
    }

    /// `P σ_t² / 4π`, the factor shared by every fluence here.
    fn scale(&self) -> f64 {
        self.power * self.sigma_t * self.sigma_t / (4.0 * PI)
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!("optical depth {tau} must be positive")))
    }
}

/// Grosjean approximation to the transport fluence:
/// `(σ_t²/4π) (e^{−τ}/τ² + (3α/(2−α)) e^{−λτ}/τ)`.
pub fn grosjean_fluence(tau: f64, params: &PointSourceParams) -> Result<f64> {
    check_tau(tau)?;
    params.validate()?;
    Ok(params.scale() * grosjean_shape(tau, params))
}

fn grosjean_shape(tau: f64, p: &PointSourceParams) -> f64 {
    let c = 3.0 * p.albedo / (2.0 - p.albedo);
    Float::exp(-tau) / (tau * tau) + c * Float::exp(-p.lambda() * tau) / tau
}

/// Classical diffusion Green's function `(3σ_t²/4π) e^{−√(3(1−α)) τ} / τ`.
pub fn cda_greens(tau: f64, params: &PointSourceParams) -> Result<f64> {
    check_tau(tau)?;
    params.validate()?;
    let kappa = Float::sqrt(3.0 * (1.0 - params.albedo));
    Ok(3.0 * params.scale() * Float::exp(-kappa * tau) / tau)
}

/// Transport-limit solution of flux-limited diffusion,
/// `(σ_t²/4π) e^{−(1−α)τ} / τ²`.
pub fn fld_transport_point(tau: f64, params: &PointSourceParams) -> Result<f64> {
    check_tau(tau)?;
    params.validate()?;
    Ok(params.scale() * Float::exp(-(1.0 - params.albedo) * tau) / (tau * tau))
}

/// `φ̃ = 4π φ / σ_t²`.
pub fn normalized_fluence(phi: f64, sigma_t: f64) -> f64 {
    4.0 * PI * phi / (sigma_t * sigma_t)
}

/// Knudsen number `|dφ/dτ| / φ` of the Grosjean fluence, differentiated in
/// closed form.
pub fn grosjean_knudsen(tau: f64, params: &PointSourceParams) -> Result<f64> {
    check_tau(tau)?;
    params.validate()?;
    let c = 3.0 * params.albedo / (2.0 - params.albedo);
    let lambda = params.lambda();
    let ballistic = Float::exp(-tau);
    let diffuse = c * Float::exp(-lambda * tau);
    let value = ballistic / (tau * tau) + diffuse / tau;
    let slope = ballistic * (1.0 / (tau * tau) + 2.0 / (tau * tau * tau))
        + diffuse * (lambda / tau + 1.0 / (tau * tau));
    Ok(slope / value)
}

/// One radial bin of a grid fluence profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileBin {
    /// Bin-center optical depth.
    pub tau: f64,
    /// Mean normalized fluence of the member voxels.
    pub phi_tilde: f64,
    pub count: usize,
}

/// Binning controls for [`radial_profile`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub nbins: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    /// Voxel layers next to the faces left out of every bin.
    pub boundary_margin: usize,
}

impl ProfileOptions {
    pub fn new(nbins: usize, tau_min: f64, tau_max: f64) -> Self {
        Self {
            nbins,
            tau_min,
            tau_max,
            boundary_margin: 2,
        }
    }
}

/// Bins voxels by optical depth `σ_t |x − x_center|` into uniform bins over
/// `[tau_min, tau_max)` and averages `φ̃` per bin. The source voxel and the
/// boundary margin are excluded; empty bins are dropped.
pub fn radial_profile(
    phi: &ScalarField,
    center: Voxel,
    sigma_t: f64,
    opts: &ProfileOptions,
) -> Result<Vec<ProfileBin>> {
    if opts.nbins < 2 {
        return Err(invalid(format!("need at least 2 bins, got {}", opts.nbins)));
    }
    if !(opts.tau_max > opts.tau_min && opts.tau_min >= 0.0) {
        return Err(invalid("profile range must satisfy 0 <= tau_min < tau_max"));
    }
    if !(sigma_t > 0.0) {
        return Err(invalid("sigma_t must be positive"));
    }
    let d = phi.dims();
    if !d.is_interior(center) {
        return Err(Error::BoundaryVoxel(center));
    }
    let c = d.center(center);
    let width = (opts.tau_max - opts.tau_min) / opts.nbins as f64;
    let mut sums = vec![0.0; opts.nbins];
    let mut counts = vec![0usize; opts.nbins];
    let margin = opts.boundary_margin.max(1);
    for (idx, &value) in phi.data().iter().enumerate() {
        let v = d.voxel(idx);
        if v == center || d.layer(v) < margin {
            continue;
        }
        let tau = sigma_t * (d.center(v) - c).norm();
        if tau < opts.tau_min || tau >= opts.tau_max {
            continue;
        }
        let b = (((tau - opts.tau_min) / width) as usize).min(opts.nbins - 1);
        sums[b] += normalized_fluence(value, sigma_t);
        counts[b] += 1;
    }
    Ok(sums
        .into_iter()
        .zip(counts)
        .enumerate()
        .filter(|(_, (_, n))| *n > 0)
        .map(|(b, (s, n))| ProfileBin {
            tau: opts.tau_min + (b as f64 + 0.5) * width,
            phi_tilde: s / n as f64,
            count: n,
        })
        .collect())
}

/// Least-squares slope of `ln φ̃` against `ln τ` over bins inside `[lo, hi]`.
pub fn log_log_slope(bins: &[ProfileBin], lo: f64, hi: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = bins
        .iter()
        .filter(|b| b.tau >= lo && b.tau <= hi && b.phi_tilde > 0.0)
        .map(|b| (Float::ln(b.tau), Float::ln(b.phi_tilde)))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridDims;

    /// `σ_t = √(4π)` makes the `σ_t²/4π` prefactor unity.
    fn unit(albedo: f64) -> PointSourceParams {
        PointSourceParams::new(Float::sqrt(4.0 * PI), albedo).unwrap()
    }

    #[test]
    fn grosjean_examples() {
        let e = core::f64::consts::E;
        assert!((grosjean_fluence(1.0, &unit(0.0)).unwrap() - 1.0 / e).abs() < 1e-14);
        let p = unit(0.5);
        assert!((p.lambda() - 1.0).abs() < 1e-15);
        assert!((grosjean_fluence(1.0, &p).unwrap() - 2.0 / e).abs() < 1e-14);
        assert!((grosjean_fluence(1.0, &p).unwrap() - 0.735759).abs() < 1e-6);
        let g = grosjean_fluence(2.0, &unit(1.0)).unwrap();
        assert!((g - ((-2.0f64).exp() / 4.0 + 1.5)).abs() < 1e-14);
        assert!((g - 1.533834).abs() < 1e-6);
    }

    #[test]
    fn cda_examples() {
        assert!((cda_greens(2.0, &unit(1.0)).unwrap() - 1.5).abs() < 1e-14);
        let v = cda_greens(1.0, &unit(0.0)).unwrap();
        assert!((v - 3.0 * (-(3.0f64).sqrt()).exp()).abs() < 1e-14);
        assert!((v - 0.530764).abs() < 1e-6);
        let p = unit(1.0);
        let r = cda_greens(0.7, &p).unwrap() / cda_greens(1.4, &p).unwrap();
        assert!((r - 2.0).abs() < 1e-14);
    }

    #[test]
    fn normalized_fluence_examples() {
        let s = 3.0;
        assert!((normalized_fluence(s * s / (4.0 * PI), s) - 1.0).abs() < 1e-15);
        assert_eq!(normalized_fluence(0.0, s), 0.0);
        let p = PointSourceParams::new(2.5, 0.5).unwrap();
        let phi = grosjean_fluence(1.0, &p).unwrap();
        assert!((normalized_fluence(phi, 2.5) - 0.735759).abs() < 1e-6);
    }

    #[test]
    fn transport_limit_examples() {
        let p = unit(1.0);
        for tau in [0.1, 1.0, 7.0] {
            assert!((fld_transport_point(tau, &p).unwrap() - 1.0 / (tau * tau)).abs() < 1e-12);
        }
        let p0 = unit(0.0);
        let t = 1.3;
        assert!((fld_transport_point(t, &p0).unwrap() - (-t).exp() / (t * t)).abs() < 1e-14);
        for a in [0.3, 0.8] {
            let p = unit(a);
            let ratio = fld_transport_point(1e-6, &p).unwrap() / grosjean_fluence(1e-6, &p).unwrap();
            assert!((ratio - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn knudsen_examples() {
        let r = grosjean_knudsen(1e-3, &unit(0.5)).unwrap();
        assert!((r * 1e-3 / 2.0 - 1.0).abs() < 0.01);
        assert!((grosjean_knudsen(2.0, &unit(0.0)).unwrap() - 2.0).abs() < 1e-14);
        // α = 1: φ̃ → 3/(2τ) at large τ, so R → 1/τ
        let tau = 200.0;
        let r = grosjean_knudsen(tau, &unit(1.0)).unwrap();
        assert!((r * tau - 1.0).abs() < 1e-3);
    }

    #[test]
    fn knudsen_matches_finite_difference() {
        for a in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let p = unit(a);
            for tau in [0.05, 0.3, 1.0, 2.5, 6.0] {
                let h = tau * 1e-5;
                let f = |t: f64| grosjean_fluence(t, &p).unwrap();
                let fd = -(f(tau + h) - f(tau - h)) / (2.0 * h) / f(tau);
                let exact = grosjean_knudsen(tau, &p).unwrap();
                assert!(((fd - exact) / exact).abs() < 1e-6, "a={a} tau={tau}");
            }
        }
    }

    #[test]
    fn grosjean_dominates_cda_near_source() {
        for a in [0.0, 0.5, 0.9] {
            let p = unit(a);
            assert!(grosjean_fluence(0.25, &p).unwrap() >= cda_greens(0.25, &p).unwrap());
        }
    }

    #[test]
    fn analytic_fluences_positive_and_decreasing() {
        for a in [0.0, 0.2, 0.5, 0.8, 1.0] {
            let p = unit(a);
            let fns: [fn(f64, &PointSourceParams) -> Result<f64>; 3] =
                [grosjean_fluence, cda_greens, fld_transport_point];
            for f in fns {
                let mut prev = f64::INFINITY;
                for i in 1..200 {
                    let v = f(i as f64 * 0.05, &p).unwrap();
                    assert!(v > 0.0 && v < prev);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn rejects_bad_tau_and_params() {
        let p = unit(0.5);
        assert!(grosjean_fluence(0.0, &p).is_err());
        assert!(cda_greens(-1.0, &p).is_err());
        assert!(fld_transport_point(0.0, &p).is_err());
        assert!(grosjean_knudsen(0.0, &p).is_err());
        assert!(PointSourceParams::new(1.0, 1.2).is_err());
        assert!(PointSourceParams::new(0.0, 0.5).is_err());
    }

    #[test]
    fn profile_of_inverse_square_field() {
        let d = GridDims::cube(41, 1.0).unwrap();
        let c = Voxel::new(20, 20, 20);
        let cc = d.center(c);
        let sigma = 2.0;
        let phi = ScalarField::from_fn(d, |v| {
            let r = (d.center(v) - cc).norm();
            if r == 0.0 {
                0.0
            } else {
                1.0 / (r * r)
            }
        });
        let bins = radial_profile(&phi, c, sigma, &ProfileOptions::new(20, 0.1, 0.9)).unwrap();
        assert!(bins.len() >= 18);
        for b in &bins {
            let r = b.tau / sigma;
            let expected = normalized_fluence(1.0 / (r * r), sigma);
            assert!(((b.phi_tilde - expected) / expected).abs() < 0.05, "tau={}", b.tau);
        }
        let slope = log_log_slope(&bins, 0.1, 0.9).unwrap();
        assert!((slope + 2.0).abs() < 0.05);
    }

    #[test]
    fn profile_of_constant_is_flat() {
        let d = GridDims::cube(11, 1.0).unwrap();
        let phi = ScalarField::constant(d, 2.0);
        let bins = radial_profile(&phi, Voxel::new(5, 5, 5), 1.0, &ProfileOptions::new(5, 0.0, 0.4)).unwrap();
        let v = normalized_fluence(2.0, 1.0);
        assert!(bins.iter().all(|b| (b.phi_tilde - v).abs() < 1e-12));
    }

    #[test]
    fn profile_preconditions() {
        let d = GridDims::cube(11, 1.0).unwrap();
        let phi = ScalarField::constant(d, 2.0);
        assert!(radial_profile(&phi, Voxel::new(0, 5, 5), 1.0, &ProfileOptions::new(5, 0.0, 1.0)).is_err());
        assert!(radial_profile(&phi, Voxel::new(5, 5, 5), 1.0, &ProfileOptions::new(1, 0.0, 1.0)).is_err());
    }
}
