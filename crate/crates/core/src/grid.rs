//! Uniform 3D scalar voxel fields.
//!
//! Voxel `(i, j, k)` has its center at `((i + ½)Δl, (j + ½)Δl, (k + ½)Δl)`;
//! the grid occupies `[0, nx·Δl] × [0, ny·Δl] × [0, nz·Δl]` in world space.
//! Data is stored flat with x varying fastest.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::Vec3;

/// Integer voxel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Voxel {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Voxel {
    pub const fn new(i: usize, j: usize, k: usize) -> Self {
        Self { i, j, k }
    }
}

/// Grid resolution and voxel edge length `Δl` in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dl: f64,
}

impl GridDims {
    /// Every axis needs at least three voxels so the 6-point stencil has an interior.
    pub fn new(nx: usize, ny: usize, nz: usize, dl: f64) -> Result<Self> {
        if nx < 3 || ny < 3 || nz < 3 {
            return Err(Error::InvalidDims(format!(
                "{nx}x{ny}x{nz}: every axis needs at least 3 voxels"
            )));
        }
        if !(dl > 0.0 && dl.is_finite()) {
            return Err(Error::InvalidDims(format!("voxel size {dl} must be positive")));
        }
        Ok(Self { nx, ny, nz, dl })
    }

    /// Cubic grid of `n³` voxels spanning `extent` meters per side.
    pub fn cube(n: usize, extent: f64) -> Result<Self> {
        Self::new(n, n, n, extent / n as f64)
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline(always)]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn voxel(&self, idx: usize) -> Voxel {
        let i = idx % self.nx;
        let j = (idx / self.nx) % self.ny;
        let k = idx / (self.nx * self.ny);
        Voxel::new(i, j, k)
    }

    pub fn contains(&self, v: Voxel) -> bool {
        v.i < self.nx && v.j < self.ny && v.k < self.nz
    }

    /// True for voxels on one of the six grid faces.
    pub fn is_boundary(&self, v: Voxel) -> bool {
        v.i == 0
            || v.j == 0
            || v.k == 0
            || v.i + 1 == self.nx
            || v.j + 1 == self.ny
            || v.k + 1 == self.nz
    }

    pub fn is_interior(&self, v: Voxel) -> bool {
        self.contains(v) && !self.is_boundary(v)
    }

    /// Distance in voxel layers to the nearest face (0 on the boundary).
    pub fn layer(&self, v: Voxel) -> usize {
        let di = v.i.min(self.nx - 1 - v.i);
        let dj = v.j.min(self.ny - 1 - v.j);
        let dk = v.k.min(self.nz - 1 - v.k);
        di.min(dj).min(dk)
    }

    /// World-space center of a voxel.
    pub fn center(&self, v: Voxel) -> Vec3 {
        Vec3::new(
            (v.i as f64 + 0.5) * self.dl,
            (v.j as f64 + 0.5) * self.dl,
            (v.k as f64 + 0.5) * self.dl,
        )
    }

    /// World-space size of the grid.
    pub fn extent(&self) -> Vec3 {
        Vec3::new(
            self.nx as f64 * self.dl,
            self.ny as f64 * self.dl,
            self.nz as f64 * self.dl,
        )
    }

    /// Largest side length `L`.
    pub fn max_extent(&self) -> f64 {
        let e = self.extent();
        e.x.max(e.y).max(e.z)
    }

    pub fn voxel_volume(&self) -> f64 {
        self.dl * self.dl * self.dl
    }
}

/// Root mean square of a slice; zero for an empty slice.
pub fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| v * v).sum();
    Float::sqrt(ss / values.len() as f64)
}

/// Scalar field on a uniform voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dims: GridDims,
    data: Vec<f64>,
}

impl ScalarField {
    pub fn constant(dims: GridDims, value: f64) -> Self {
        Self {
            dims,
            data: vec![value; dims.len()],
        }
    }

    pub fn zeros(dims: GridDims) -> Self {
        Self::constant(dims, 0.0)
    }

    /// Wraps flat x-fastest data, checking length and finiteness.
    pub fn from_vec(dims: GridDims, data: Vec<f64>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::LengthMismatch {
                expected: dims.len(),
                got: data.len(),
            });
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(idx));
        }
        Ok(Self { dims, data })
    }

    /// Evaluates `f` at every voxel.
    pub fn from_fn(dims: GridDims, mut f: impl FnMut(Voxel) -> f64) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for k in 0..dims.nz {
            for j in 0..dims.ny {
                for i in 0..dims.nx {
                    data.push(f(Voxel::new(i, j, k)));
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, v: Voxel) -> f64 {
        self.data[self.dims.index(v.i, v.j, v.k)]
    }

    #[inline]
    pub fn set(&mut self, v: Voxel, value: f64) {
        debug_assert!(value.is_finite());
        let idx = self.dims.index(v.i, v.j, v.k);
        self.data[idx] = value;
    }

    pub fn same_dims(&self, other: &ScalarField) -> bool {
        self.dims == other.dims
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Voxelwise combination of two fields with identical dimensions.
    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<ScalarField> {
        if !self.same_dims(other) {
            return Err(Error::DimensionMismatch);
        }
        Ok(ScalarField {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn rms(&self) -> f64 {
        rms(&self.data)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Centered-difference gradient at an interior voxel, in field units per meter.
    pub fn central_gradient(&self, v: Voxel) -> Result<Vec3> {
        if !self.dims.is_interior(v) {
            return Err(Error::BoundaryVoxel(v));
        }
        let d = &self.dims;
        let idx = d.index(v.i, v.j, v.k);
        let sx = 1;
        let sy = d.nx;
        let sz = d.nx * d.ny;
        let inv = 1.0 / (2.0 * d.dl);
        Ok(Vec3::new(
            (self.data[idx + sx] - self.data[idx - sx]) * inv,
            (self.data[idx + sy] - self.data[idx - sy]) * inv,
            (self.data[idx + sz] - self.data[idx - sz]) * inv,
        ))
    }

    /// Block-mean coarsening by an integer factor. Partial blocks at the
    /// high end of an axis are averaged over their actual member count.
    pub fn downsample(&self, factor: usize) -> Result<ScalarField> {
        if factor < 1 {
            return Err(Error::InvalidArgument(format!("downsample factor {factor} < 1")));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let d = self.dims;
        let cx = d.nx.div_ceil(factor);
        let cy = d.ny.div_ceil(factor);
        let cz = d.nz.div_ceil(factor);
        let coarse = GridDims::new(cx, cy, cz, d.dl * factor as f64)?;
        let mut sums = vec![0.0; coarse.len()];
        let mut counts = vec![0u32; coarse.len()];
        for k in 0..d.nz {
            for j in 0..d.ny {
                let row = coarse.index(0, j / factor, k / factor);
                let base = d.index(0, j, k);
                for i in 0..d.nx {
                    let c = row + i / factor;
                    sums[c] += self.data[base + i];
                    counts[c] += 1;
                }
            }
        }
        let data = sums
            .into_iter()
            .zip(counts)
            .map(|(s, n)| s / n as f64)
            .collect();
        Ok(ScalarField { dims: coarse, data })
    }

    /// Inverse of [`downsample`](Self::downsample) by replication onto `fine` dims.
    pub fn upsample_replicate(&self, factor: usize, fine: GridDims) -> Result<ScalarField> {
        if factor < 1 {
            return Err(Error::InvalidArgument(format!("upsample factor {factor} < 1")));
        }
        let c = self.dims;
        if fine.nx.div_ceil(factor) != c.nx
            || fine.ny.div_ceil(factor) != c.ny
            || fine.nz.div_ceil(factor) != c.nz
        {
            return Err(Error::DimensionMismatch);
        }
        Ok(ScalarField::from_fn(fine, |v| {
            self.data[c.index(v.i / factor, v.j / factor, v.k / factor)]
        }))
    }

    /// Trilinear interpolation between voxel centers at a world position,
    /// clamped to the outermost voxel centers.
    #[inline]
    pub fn sample(&self, x: Vec3) -> f64 {
        let d = &self.dims;
        let inv = 1.0 / d.dl;
        let (i0, fx) = axis_coord(x.x * inv - 0.5, d.nx);
        let (j0, fy) = axis_coord(x.y * inv - 0.5, d.ny);
        let (k0, fz) = axis_coord(x.z * inv - 0.5, d.nz);
        let sy = d.nx;
        let sz = d.nx * d.ny;
        let b = d.index(i0, j0, k0);
        let v = &self.data;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(v[b], v[b + 1], fx);
        let c10 = lerp(v[b + sy], v[b + sy + 1], fx);
        let c01 = lerp(v[b + sz], v[b + sz + 1], fx);
        let c11 = lerp(v[b + sy + sz], v[b + sy + sz + 1], fx);
        lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz)
    }
}

impl ScalarField {
    /// Box outside of which [`ScalarField::sample`] returns exactly zero:
    /// the hull of all non-zero voxel centers widened by one voxel and
    /// clipped to the grid. `None` for an all-zero field.
    pub fn support_box(&self) -> Option<(Vec3, Vec3)> {
        let d = self.dims;
        let mut lo = [usize::MAX; 3];
        let mut hi = [0usize; 3];
        let mut any = false;
        for (idx, &v) in self.data.iter().enumerate() {
            if v != 0.0 {
                let c = d.voxel(idx);
                for (a, x) in [c.i, c.j, c.k].into_iter().enumerate() {
                    lo[a] = lo[a].min(x);
                    hi[a] = hi[a].max(x);
                }
                any = true;
            }
        }
        if !any {
            return None;
        }
        let e = d.extent();
        let lo = Vec3::new(lo[0] as f64 - 0.5, lo[1] as f64 - 0.5, lo[2] as f64 - 0.5) * d.dl;
        let hi = Vec3::new(hi[0] as f64 + 1.5, hi[1] as f64 + 1.5, hi[2] as f64 + 1.5) * d.dl;
        Some((
            Vec3::new(lo.x.max(0.0), lo.y.max(0.0), lo.z.max(0.0)),
            Vec3::new(hi.x.min(e.x), hi.y.min(e.y), hi.z.min(e.z)),
        ))
    }
}

#[inline(always)]
fn axis_coord(u: f64, n: usize) -> (usize, f64) {
    let max = (n - 1) as f64;
    let u = if u.is_nan() { 0.0 } else { u.clamp(0.0, max) };
    let i0 = (Float::floor(u) as usize).min(n - 2);
    (i0, u - i0 as f64)
}
