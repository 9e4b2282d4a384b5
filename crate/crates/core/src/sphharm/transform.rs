//! Separable analysis and synthesis of spherical-harmonic coefficients on product grids.
//!
//! Coefficients are stored as dense per-degree blocks: `blocks[k][m]` for 0 ≤ m < dim H_k,
//! in the same index order as [`super::basis_label`].

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use super::basis::{block_offset, dim_raw, geg_table, polar_factors, GegTable};
use crate::error::{invalid, Result};
use crate::quadrature::SphereGrid;
use crate::scalar::{from_usize, lit, Real};

/// Dense coefficient blocks, one per degree.
pub type Blocks<T> = Vec<Vec<T>>;

pub fn zero_blocks<T: Real>(d: usize, k_max: usize) -> Blocks<T> {
    (0..=k_max).map(|k| vec![T::zero(); dim_raw(d, k)]).collect()
}

struct Ctx<'a, T: Real> {
    grid: &'a SphereGrid<T>,
    k_max: usize,
    /// tables[l][m1] for polar level l.
    tables: Vec<Vec<GegTable>>,
    fft: Arc<dyn Fft<T>>,
}

impl<'a, T: Real> Ctx<'a, T> {
    fn new(grid: &'a SphereGrid<T>, k_max: usize, inverse: bool) -> Self {
        let d = grid.d;
        let tables = (0..grid.polar.len())
            .map(|l| (0..=k_max).map(|m1| geg_table(d - l, m1, k_max - m1)).collect())
            .collect();
        let mut planner = FftPlanner::<T>::new();
        let fft = if inverse { planner.plan_fft_inverse(grid.n_phi) } else { planner.plan_fft_forward(grid.n_phi) };
        Ctx { grid, k_max, tables, fft }
    }

    fn analyze(&self, l: usize, vals: &[T]) -> Blocks<T> {
        let d = self.grid.d - l;
        let kk = self.k_max;
        if d == 2 {
            let n = self.grid.n_phi;
            let mut buf: Vec<Complex<T>> = vals.iter().map(|&v| Complex::new(v, T::zero())).collect();
            self.fft.process(&mut buf);
            let nf = from_usize::<T>(n);
            let s2 = lit::<T>(std::f64::consts::SQRT_2);
            return (0..=kk)
                .map(|k| {
                    let phase = Complex::from_polar(T::one(), -from_usize::<T>(k) * self.grid.phi0);
                    let f = buf[k % n] * phase;
                    if k == 0 {
                        vec![f.re / nf]
                    } else {
                        vec![s2 * f.re / nf, -s2 * f.im / nf]
                    }
                })
                .collect();
        }
        let n_sub = self.grid.points_from(l + 1);
        let mut out = zero_blocks::<T>(d, kk);
        let mut lbuf = Vec::with_capacity(kk + 1);
        for (i, (&t, &w)) in self.grid.polar[l].iter().zip(&self.grid.polar_w[l]).enumerate() {
            let sub = self.analyze(l + 1, &vals[i * n_sub..(i + 1) * n_sub]);
            let sn = (T::one() - t * t).max(T::zero()).sqrt();
            let mut sp = T::one();
            for m1 in 0..=kk {
                polar_factors(&self.tables[l][m1], t, sp, &mut lbuf);
                let off = block_offset(d, m1);
                for (j, &b) in sub[m1].iter().enumerate() {
                    let b = b * w;
                    for (n, &lv) in lbuf.iter().enumerate() {
                        out[m1 + n][off + j] = out[m1 + n][off + j] + lv * b;
                    }
                }
                sp = sp * sn;
            }
        }
        out
    }

    fn synthesize(&self, l: usize, blocks: &[Vec<T>], out: &mut [T]) {
        let d = self.grid.d - l;
        let kk = self.k_max;
        if d == 2 {
            let n = self.grid.n_phi;
            let s2 = lit::<T>(std::f64::consts::SQRT_2);
            let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
            for (k, b) in blocks.iter().enumerate().take(kk + 1) {
                let z = if k == 0 { Complex::new(b[0], T::zero()) } else { Complex::new(s2 * b[0], -s2 * b[1]) };
                let phase = Complex::from_polar(T::one(), from_usize::<T>(k) * self.grid.phi0);
                buf[k % n] = buf[k % n] + z * phase;
            }
            self.fft.process(&mut buf);
            for (o, v) in out.iter_mut().zip(&buf) {
                *o = v.re;
            }
            return;
        }
        let n_sub = self.grid.points_from(l + 1);
        for i in 0..self.grid.polar[l].len() {
            self.synthesize_ring(l, i, blocks, &mut out[i * n_sub..(i + 1) * n_sub]);
        }
    }

    fn synthesize_ring(&self, l: usize, i: usize, blocks: &[Vec<T>], out: &mut [T]) {
        let d = self.grid.d - l;
        let kk = self.k_max;
        let t = self.grid.polar[l][i];
        let sn = (T::one() - t * t).max(T::zero()).sqrt();
        let mut sub = zero_blocks::<T>(d - 1, kk);
        let mut lbuf = Vec::with_capacity(kk + 1);
        let mut sp = T::one();
        for m1 in 0..=kk {
            polar_factors(&self.tables[l][m1], t, sp, &mut lbuf);
            let off = block_offset(d, m1);
            for (j, s) in sub[m1].iter_mut().enumerate() {
                let mut acc = T::zero();
                for (n, &lv) in lbuf.iter().enumerate() {
                    acc = acc + lv * blocks[m1 + n][off + j];
                }
                *s = acc;
            }
            sp = sp * sn;
        }
        self.synthesize(l + 1, &sub, out);
    }
}

/// Quadrature projection of sampled values onto harmonics of degree ≤ `k_max`.
/// Exact when the grid's exactness is at least `k_max` plus the degree of the data.
pub fn analyze<T: Real>(grid: &SphereGrid<T>, values: &[T], k_max: usize) -> Result<Blocks<T>> {
    if values.len() != grid.len() {
        return invalid(format!("expected {} samples, got {}", grid.len(), values.len()));
    }
    Ok(Ctx::new(grid, k_max, false).analyze(0, values))
}

/// Evaluates coefficient blocks at every grid point.
pub fn synthesize<T: Real>(grid: &SphereGrid<T>, blocks: &[Vec<T>]) -> Vec<T> {
    let k_max = blocks.len().saturating_sub(1);
    let mut out = vec![T::zero(); grid.len()];
    Ctx::new(grid, k_max, true).synthesize(0, blocks, &mut out);
    out
}

/// Streams synthesized values ring by ring (outermost polar index), several coefficient
/// sets at once. `f(ring, values)` receives one slice per coefficient set. Rings are
/// computed in parallel batches and delivered in order.
pub fn synthesize_rings<T: Real, F: FnMut(usize, &[Vec<T>])>(grid: &SphereGrid<T>, sets: &[Blocks<T>], mut f: F) {
    let k_max = sets.iter().map(|b| b.len()).max().unwrap_or(1).saturating_sub(1);
    let ctx = Ctx::new(grid, k_max, true);
    let padded: Vec<Blocks<T>> = sets
        .iter()
        .map(|b| {
            let mut p = zero_blocks::<T>(grid.d, k_max);
            for (k, blk) in b.iter().enumerate() {
                p[k].copy_from_slice(blk);
            }
            p
        })
        .collect();
    if grid.d == 2 {
        let vals: Vec<Vec<T>> = padded
            .iter()
            .map(|b| {
                let mut out = vec![T::zero(); grid.n_phi];
                ctx.synthesize(0, b, &mut out);
                out
            })
            .collect();
        f(0, &vals);
        return;
    }
    let n_rings = grid.polar[0].len();
    let n_sub = grid.points_from(1);
    let batch = 32;
    for start in (0..n_rings).step_by(batch) {
        let end = (start + batch).min(n_rings);
        let rings: Vec<Vec<Vec<T>>> = (start..end)
            .into_par_iter()
            .map(|i| {
                padded
                    .iter()
                    .map(|b| {
                        let mut out = vec![T::zero(); n_sub];
                        ctx.synthesize_ring(0, i, b, &mut out);
                        out
                    })
                    .collect()
            })
            .collect();
        for (off, r) in rings.iter().enumerate() {
            f(start + off, r);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analysis_inverts_synthesis() {
        for d in 2..=4 {
            let k = 7;
            let grid = SphereGrid::<f64>::gauss(d, 2 * k).unwrap();
            let mut blocks = zero_blocks::<f64>(d, k);
            let mut s = 0.37;
            for b in blocks.iter_mut() {
                for v in b.iter_mut() {
                    s = (s * 7.31 + 0.113) % 1.0;
                    *v = s - 0.5;
                }
            }
            let vals = synthesize(&grid, &blocks);
            let back = analyze(&grid, &vals, k).unwrap();
            for (a, b) in blocks.iter().flatten().zip(back.iter().flatten()) {
                assert!((a - b).abs() < 1e-13, "d={d}: {a} vs {b}");
            }
        }
    }
}
