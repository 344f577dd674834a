//! Seeded lattice noise for procedural scenes.

use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::math::Vec3;

/// Scalar 3-D noise with values in `[-1, 1]`.
pub trait Noise3 {
    fn eval(&self, p: Vec3) -> f64;
}

fn permutation(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut p: Vec<u8> = (0..=255u8).collect();
    p.shuffle(rng);
    let mut table = p.clone();
    table.extend_from_slice(&p);
    table
}

fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

struct Lattice {
    cell: [usize; 3],
    frac: [f64; 3],
}

fn lattice(p: Vec3) -> Lattice {
    let mut cell = [0; 3];
    let mut frac = [0.0; 3];
    for a in 0..3 {
        let f = Float::floor(p[a]);
        cell[a] = (f as i64).rem_euclid(256) as usize;
        frac[a] = p[a] - f;
    }
    Lattice { cell, frac }
}

/// Trilinear interpolation of hashed corner values `corner(dx, dy, dz)`.
fn blend(l: &Lattice, corner: impl Fn(usize, usize, usize) -> f64) -> f64 {
    let [u, v, w] = l.frac.map(fade);
    let x0 = lerp(corner(0, 0, 0), corner(1, 0, 0), u);
    let x1 = lerp(corner(0, 1, 0), corner(1, 1, 0), u);
    let x2 = lerp(corner(0, 0, 1), corner(1, 0, 1), u);
    let x3 = lerp(corner(0, 1, 1), corner(1, 1, 1), u);
    lerp(lerp(x0, x1, v), lerp(x2, x3, v), w)
}

/// Random values at integer lattice points, smoothly interpolated.
#[derive(Debug, Clone)]
pub struct ValueNoise {
    perm: Vec<u8>,
    values: Vec<f64>,
}

impl ValueNoise {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let perm = permutation(&mut rng);
        let values = (0..256).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { perm, values }
    }

    fn hash(&self, c: [usize; 3]) -> usize {
        let p = &self.perm;
        p[p[p[c[0] & 255] as usize + (c[1] & 255)] as usize + (c[2] & 255)] as usize
    }
}

impl Noise3 for ValueNoise {
    fn eval(&self, p: Vec3) -> f64 {
        let l = lattice(p);
        let c = l.cell;
        blend(&l, |dx, dy, dz| self.values[self.hash([c[0] + dx, c[1] + dy, c[2] + dz])])
    }
}

/// Improved Perlin gradient noise with a seeded permutation table.
#[derive(Debug, Clone)]
pub struct PerlinNoise {
    perm: Vec<u8>,
}

const GRADIENTS: [[f64; 3]; 12] = [
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
    [1.0, -1.0, 0.0],
    [-1.0, -1.0, 0.0],
    [1.0, 0.0, 1.0],
    [-1.0, 0.0, 1.0],
    [1.0, 0.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, 1.0, 1.0],
    [0.0, -1.0, 1.0],
    [0.0, 1.0, -1.0],
    [0.0, -1.0, -1.0],
];

impl PerlinNoise {
    pub fn new(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            perm: permutation(&mut rng),
        }
    }
}

impl Noise3 for PerlinNoise {
    fn eval(&self, p: Vec3) -> f64 {
        let l = lattice(p);
        let c = l.cell;
        let f = l.frac;
        let perm = &self.perm;
        let v = blend(&l, |dx, dy, dz| {
            let h = perm[perm[perm[c[0] + dx] as usize + c[1] + dy] as usize + c[2] + dz] as usize;
            let g = GRADIENTS[h % 12];
            g[0] * (f[0] - dx as f64) + g[1] * (f[1] - dy as f64) + g[2] * (f[2] - dz as f64)
        });
        v.clamp(-1.0, 1.0)
    }
}

/// Fractal sum of `octaves` noise layers with lacunarity 2 and gain 1/2,
/// normalized back to `[-1, 1]`.
pub fn fbm(noise: &impl Noise3, p: Vec3, octaves: u32) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut freq = 1.0;
    for _ in 0..octaves.max(1) {
        sum += amp * noise.eval(p * freq);
        norm += amp;
        amp *= 0.5;
        freq *= 2.0;
    }
    sum / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn deterministic_under_seed() {
        let p = Vec3::new(1.3, -2.7, 0.4);
        assert_eq!(ValueNoise::new(3).eval(p), ValueNoise::new(3).eval(p));
        assert_eq!(PerlinNoise::new(3).eval(p), PerlinNoise::new(3).eval(p));
        assert_ne!(ValueNoise::new(3).eval(p), ValueNoise::new(4).eval(p));
    }

    #[test]
    fn perlin_vanishes_on_lattice() {
        let n = PerlinNoise::new(11);
        for p in [Vec3::ZERO, Vec3::new(3.0, -1.0, 7.0)] {
            assert_eq!(n.eval(p), 0.0);
        }
    }

    #[test]
    fn value_noise_hits_lattice_values() {
        let n = ValueNoise::new(5);
        let p = Vec3::new(2.0, 5.0, -3.0);
        let l = lattice(p);
        assert_eq!(n.eval(p), n.values[n.hash(l.cell)]);
    }

    #[test]
    fn noise_is_continuous() {
        let n = PerlinNoise::new(1);
        let v = ValueNoise::new(1);
        let p = Vec3::new(0.999_999_9, 0.3, 0.6);
        let q = Vec3::new(1.000_000_1, 0.3, 0.6);
        assert!((n.eval(p) - n.eval(q)).abs() < 1e-5);
        assert!((v.eval(p) - v.eval(q)).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn bounded(x in -50.0..50.0f64, y in -50.0..50.0f64, z in -50.0..50.0f64, seed in 0u64..100) {
            let p = Vec3::new(x, y, z);
            let v = ValueNoise::new(seed);
            let g = PerlinNoise::new(seed);
            prop_assert!(v.eval(p).abs() <= 1.0);
            prop_assert!(g.eval(p).abs() <= 1.0);
            prop_assert!(fbm(&v, p, 5).abs() <= 1.0);
        }
    }
}
