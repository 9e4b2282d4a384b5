//! Spherical harmonics in R^d: dimensions, zonal kernels, expansions and transforms.

mod basis;
mod expansion;
pub mod transform;

pub use basis::{basis_index, basis_label, BasisLabel};
pub use expansion::{HarmonicExpansion, Jet, Term};

use crate::error::{invalid, Result};
use crate::quadrature::SphereGrid;
use crate::scalar::{lit, Real};
use crate::special::{chebyshev_t, gegenbauer};

/// dim H_k, the space of degree-k spherical harmonics on S^{d−1}.
pub fn dim_harmonics(d: usize, k: usize) -> Result<usize> {
    if d < 2 {
        return invalid(format!("dimension must be at least 2, got {d}"));
    }
    Ok(basis::dim_raw(d, k))
}

/// Signed-degree entry point used by front ends that parse user integers.
pub fn dim_harmonics_i64(d: i64, k: i64) -> Result<usize> {
    if d < 2 || k < 0 {
        return invalid(format!("need d ≥ 2 and k ≥ 0, got d={d}, k={k}"));
    }
    dim_harmonics(d as usize, k as usize)
}

/// Zonal kernel Z_k(ξ·η) for the averaged pairing, so Z_k(1) = dim H_k.
pub fn zonal_kernel<T: Real>(d: usize, k: usize, cosine: T) -> Result<T> {
    let dim = dim_harmonics(d, k)?;
    let t = cosine.to_f64().unwrap_or(f64::NAN);
    if !(t.abs() <= 1.0 + 1e-12) {
        return invalid(format!("cosine {t} outside [-1, 1]"));
    }
    let t = t.clamp(-1.0, 1.0);
    if k == 0 {
        return Ok(T::one());
    }
    let v = if d == 2 {
        2.0 * chebyshev_t(k, t).0
    } else {
        let alpha = (d as f64 - 2.0) / 2.0;
        // C_k^α(1) = (2α)_k / k!
        let c1: f64 = (0..k).map(|j| (j as f64 + 2.0 * alpha) / (j as f64 + 1.0)).product();
        dim as f64 * gegenbauer(k, alpha, t) / c1
    };
    Ok(lit(v))
}

/// The basis convention: real, orthonormal for the average over the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SphericalBasisConvention {
    pub d: usize,
}

impl SphericalBasisConvention {
    pub fn new(d: usize) -> Result<Self> {
        dim_harmonics(d, 0)?;
        Ok(Self { d })
    }

    /// Y_{k,m} as a unit-coefficient expansion.
    pub fn basis_function<T: Real>(&self, k: usize, m: usize) -> Result<HarmonicExpansion<T>> {
        HarmonicExpansion::single(self.d, k, m, T::one())
    }

    /// Max deviation of the Gram matrix from the identity for all degrees ≤ `k_max`,
    /// computed with a product rule of the given order.
    pub fn gram_deviation(&self, k_max: usize, order: usize) -> Result<f64> {
        let grid = SphereGrid::<f64>::gauss(self.d, order)?;
        let q = grid.to_quadrature();
        let mut funcs = Vec::new();
        for k in 0..=k_max {
            for m in 0..dim_harmonics(self.d, k)? {
                let e = HarmonicExpansion::<f64>::single(self.d, k, m, 1.0)?;
                funcs.push((0..q.len()).map(|i| e.value(q.node(i))).collect::<Vec<_>>());
            }
        }
        let mut worst: f64 = 0.0;
        for i in 0..funcs.len() {
            for j in i..funcs.len() {
                let g: f64 = (0..q.len()).map(|p| q.weights[p] * funcs[i][p] * funcs[j][p]).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        Ok(worst)
    }
}

/// Projects f, sampled on ∂B(center, radius), onto harmonics of degree ≤ `k_max`.
/// The result has reference radius `radius` and is centred at the origin, so it
/// represents y ↦ f(center + y).
pub fn project_on_sphere<T: Real, F>(d: usize, center: &[T], radius: T, k_max: usize, order: usize, f: F) -> Result<HarmonicExpansion<T>>
where
    F: Fn(&[T]) -> T + Sync,
{
    use rayon::prelude::*;
    if center.len() != d {
        return invalid("center dimension mismatch");
    }
    let grid = SphereGrid::<T>::gauss(d, order.max(1))?;
    let vals: Vec<T> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut p = vec![T::zero(); d];
            grid.point(i, &mut p);
            for (pj, cj) in p.iter_mut().zip(center) {
                *pj = *cj + *pj * radius;
            }
            f(&p)
        })
        .collect();
    let blocks = transform::analyze(&grid, &vals, k_max)?;
    HarmonicExpansion::from_blocks(d, radius, &blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims() {
        assert_eq!(dim_harmonics(3, 2).unwrap(), 5);
        assert_eq!(dim_harmonics(2, 4).unwrap(), 2);
        assert_eq!(dim_harmonics(4, 3).unwrap(), 16);
        assert_eq!(dim_harmonics(5, 0).unwrap(), 1);
        assert_eq!(dim_harmonics(5, 1).unwrap(), 5);
        assert!(dim_harmonics(1, 3).is_err());
        assert!(dim_harmonics_i64(3, -1).is_err());
    }

    #[test]
    fn zonal_values() {
        assert!((zonal_kernel(3, 1, 1.0f64).unwrap() - 3.0).abs() < 1e-14);
        assert!((zonal_kernel(3, 0, 0.3f64).unwrap() - 1.0).abs() < 1e-14);
        assert!((zonal_kernel(3, 2, 0.0f64).unwrap() + 2.5).abs() < 1e-14);
        assert!(zonal_kernel(3, 2, 1.1f64).is_err());
        assert!(zonal_kernel(3, 2, 1.0 + 1e-13f64).is_ok());
    }

    #[test]
    fn gram_is_identity() {
        for d in 2..=5 {
            let dev = SphericalBasisConvention::new(d).unwrap().gram_deviation(5, 11).unwrap();
            assert!(dev < 1e-12, "d={d}: {dev}");
        }
    }
}
