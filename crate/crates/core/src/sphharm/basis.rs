//! Real orthonormal spherical harmonics in R^d, built from nested Gegenbauer factors.
//!
//! A basis function of degree k is labelled by a chain k = m_0 ≥ m_1 ≥ … ≥ m_{d-2} ≥ 0
//! and a cosine/sine flag for the last planar factor. The solid harmonic is
//!
//!   S(y) = Π_ℓ N_ℓ · G^{α_ℓ}_{m_ℓ - m_{ℓ+1}}(y_ℓ, |y_{ℓ..}|²) · √2 Re/Im (y_{d-2} + i y_{d-1})^{m_{d-2}}
//!
//! where G^α_n(s, q) = |z|^n C^α_n(s/|z|) is the homogeneous Gegenbauer polynomial and
//! α_ℓ = m_{ℓ+1} + (d - ℓ - 2)/2. Normalization is mean-square one on the unit sphere.

use num_complex::Complex;
use std::collections::HashMap;

use crate::error::{invalid, Result};
use crate::scalar::{lit, Real};

/// dim H_k on R^d without argument checks.
pub(crate) fn dim_raw(d: usize, k: usize) -> usize {
    if d == 2 {
        return if k == 0 { 1 } else { 2 };
    }
    if d == 1 {
        return if k <= 1 { 1 } else { 0 };
    }
    let c = |n: i64, r: i64| -> u128 {
        if n < r || n < 0 {
            0
        } else {
            crate::special::binomial(n as u64, r as u64).expect("dimension overflow")
        }
    };
    let (k, d) = (k as i64, d as i64);
    (c(k + d - 1, d - 1) - c(k + d - 3, d - 1)) as usize
}

/// Offset of the m_1 = `m1` sub-block inside the degree-k block (d ≥ 3).
pub(crate) fn block_offset(d: usize, m1: usize) -> usize {
    (0..m1).map(|j| dim_raw(d - 1, j)).sum()
}

/// Label of a real spherical harmonic in the nested construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisLabel {
    /// `orders[0]` is the degree; the chain is non-increasing.
    pub orders: Vec<usize>,
    pub sine: bool,
}

/// Decodes the basis index `m` of degree `k` in dimension `d`.
pub fn basis_label(d: usize, k: usize, m: usize) -> Result<BasisLabel> {
    if d < 2 {
        return invalid("ambient dimension must be at least 2");
    }
    if m >= dim_raw(d, k) {
        return invalid(format!("basis index {m} out of range for degree {k} in d={d}"));
    }
    let mut orders = vec![k];
    let (mut dd, mut kk, mut mm) = (d, k, m);
    while dd > 2 {
        let mut m1 = 0;
        loop {
            let n = dim_raw(dd - 1, m1);
            if mm < n {
                break;
            }
            mm -= n;
            m1 += 1;
        }
        debug_assert!(m1 <= kk);
        orders.push(m1);
        dd -= 1;
        kk = m1;
    }
    Ok(BasisLabel { orders, sine: mm == 1 })
}

/// Inverse of [`basis_label`].
pub fn basis_index(d: usize, label: &BasisLabel) -> Result<usize> {
    if label.orders.len() != d - 1 || label.orders.windows(2).any(|w| w[1] > w[0]) {
        return invalid("malformed basis label");
    }
    let last = *label.orders.last().unwrap();
    if label.sine && last == 0 {
        return invalid("sine factor needs a positive planar order");
    }
    let mut idx = usize::from(label.sine);
    for (l, w) in label.orders.windows(2).enumerate().rev() {
        idx += block_offset(d - l, w[1]);
    }
    Ok(idx)
}

/// Coefficients of the normalized homogeneous Gegenbauer recurrence
/// Ĝ_{n+1} = a_n s Ĝ_n − b_n q Ĝ_{n−1}, Ĝ_0 = g0, for the level of dimension `dim`
/// whose child carries planar order `m1`.
#[derive(Debug, Clone)]
pub(crate) struct GegTable {
    pub g0: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

pub(crate) fn geg_table(dim: usize, m1: usize, nmax: usize) -> GegTable {
    debug_assert!(dim >= 3);
    let half = (dim as f64 - 2.0) / 2.0;
    let alpha = m1 as f64 + half;
    let mut g0sq = 1.0;
    for j in 0..m1 {
        let j = j as f64;
        g0sq *= (j + dim as f64 / 2.0) / (j + (dim as f64 - 1.0) / 2.0);
    }
    let ratio = |n: f64| ((n + 1.0) * (n + 1.0 + alpha) / ((n + alpha) * (n + 2.0 * alpha))).sqrt();
    let mut a = Vec::with_capacity(nmax);
    let mut b = Vec::with_capacity(nmax);
    for n in 0..nmax {
        let nf = n as f64;
        let rn = ratio(nf);
        a.push(rn * 2.0 * (nf + alpha) / (nf + 1.0));
        b.push(if n == 0 { 0.0 } else { rn * ratio(nf - 1.0) * (nf + 2.0 * alpha - 1.0) / (nf + 1.0) });
    }
    GegTable { g0: g0sq.sqrt(), a, b }
}

#[derive(Debug, Clone)]
struct Group<T> {
    child: usize,
    child_order: usize,
    g0: T,
    a: Vec<T>,
    b: Vec<T>,
    /// (n, node id) pairs, n = m_ℓ − m_{ℓ+1}.
    entries: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct Level<T> {
    dim: usize,
    n_nodes: usize,
    groups: Vec<Group<T>>,
}

/// Precompiled evaluation schedule for a fixed set of basis functions.
#[derive(Debug, Clone)]
pub(crate) struct EvalPlan<T> {
    d: usize,
    /// Levels ℓ = 0..d-2 (dimension d-ℓ ≥ 3); empty for d = 2.
    levels: Vec<Level<T>>,
    /// Planar nodes (m, sine).
    base: Vec<(usize, bool)>,
    base_mmax: usize,
    /// Top-level node of each requested function.
    pub(crate) roots: Vec<usize>,
    max_n: usize,
}

impl<T: Real> EvalPlan<T> {
    pub(crate) fn new(d: usize, labels: &[BasisLabel]) -> Self {
        let mut base_ids: HashMap<(usize, bool), usize> = HashMap::new();
        let mut base = Vec::new();
        // ids of the current level for every label
        let mut cur: Vec<usize> = labels
            .iter()
            .map(|l| {
                let key = (*l.orders.last().unwrap(), l.sine);
                *base_ids.entry(key).or_insert_with(|| {
                    base.push(key);
                    base.len() - 1
                })
            })
            .collect();
        let base_mmax = base.iter().map(|b| b.0).max().unwrap_or(0);
        let mut levels_rev: Vec<Level<T>> = Vec::new();
        let mut max_n = 0;
        for l in (0..d.saturating_sub(2)).rev() {
            let dim = d - l;
            let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
            let mut groups: Vec<Group<T>> = Vec::new();
            let mut group_of: HashMap<usize, usize> = HashMap::new();
            let mut n_nodes = 0;
            let mut next = Vec::with_capacity(labels.len());
            for (lab, &child) in labels.iter().zip(&cur) {
                let (ml, mc) = (lab.orders[l], lab.orders[l + 1]);
                let id = *ids.entry((ml, child)).or_insert_with(|| {
                    let gi = *group_of.entry(child).or_insert_with(|| {
                        groups.push(Group { child, child_order: mc, g0: T::zero(), a: vec![], b: vec![], entries: vec![] });
                        groups.len() - 1
                    });
                    groups[gi].entries.push((ml - mc, n_nodes));
                    n_nodes += 1;
                    n_nodes - 1
                });
                next.push(id);
            }
            for g in groups.iter_mut() {
                let mc = g.child_order;
                let nmax = g.entries.iter().map(|e| e.0).max().unwrap();
                max_n = max_n.max(nmax);
                let t = geg_table(dim, mc, nmax);
                g.g0 = lit(t.g0);
                g.a = t.a.iter().map(|&v| lit(v)).collect();
                g.b = t.b.iter().map(|&v| lit(v)).collect();
            }
            levels_rev.push(Level { dim, n_nodes, groups });
            cur = next;
        }
        levels_rev.reverse();
        EvalPlan { d, levels: levels_rev, base, base_mmax, roots: cur, max_n }
    }

    fn level_sizes(&self, order: usize) -> Vec<usize> {
        let per = |n: usize, dim: usize| match order {
            0 => n,
            1 => n * (1 + dim),
            _ => n * (1 + dim + dim * dim),
        };
        let mut v: Vec<usize> = self.levels.iter().map(|l| per(l.n_nodes, l.dim)).collect();
        v.push(per(self.base.len(), 2));
        v
    }

    /// Evaluates every node at `y`; returns per-level buffers. Layout of a level buffer:
    /// values[n], then gradients[n·dim], then Hessians[n·dim·dim].
    pub(crate) fn eval_nodes(&self, y: &[T], order: usize) -> Vec<Vec<T>> {
        let d = self.d;
        let sizes = self.level_sizes(order);
        let mut bufs: Vec<Vec<T>> = sizes.iter().map(|&s| vec![T::zero(); s]).collect();
        let sqrt2 = lit::<T>(std::f64::consts::SQRT_2);

        // planar level
        {
            let buf = bufs.last_mut().unwrap();
            let nb = self.base.len();
            let z = Complex::new(y[d - 2], y[d - 1]);
            let mm = self.base_mmax;
            let mut pw = Vec::with_capacity(mm + 1);
            let mut acc = Complex::new(T::one(), T::zero());
            for _ in 0..=mm {
                pw.push(acc);
                acc = acc * z;
            }
            for (i, &(m, sine)) in self.base.iter().enumerate() {
                if m == 0 {
                    buf[i] = T::one();
                    continue;
                }
                let p = pw[m];
                buf[i] = sqrt2 * if sine { p.im } else { p.re };
                if order >= 1 {
                    let dp = pw[m - 1] * lit::<T>(m as f64);
                    let g = &mut buf[nb + 2 * i..nb + 2 * i + 2];
                    if sine {
                        g[0] = sqrt2 * dp.im;
                        g[1] = sqrt2 * dp.re;
                    } else {
                        g[0] = sqrt2 * dp.re;
                        g[1] = -sqrt2 * dp.im;
                    }
                }
                if order >= 2 && m >= 2 {
                    let ddp = pw[m - 2] * lit::<T>((m * (m - 1)) as f64);
                    let h = &mut buf[3 * nb + 4 * i..3 * nb + 4 * i + 4];
                    if sine {
                        h[0] = sqrt2 * ddp.im;
                        h[1] = sqrt2 * ddp.re;
                        h[2] = h[1];
                        h[3] = -h[0];
                    } else {
                        h[0] = sqrt2 * ddp.re;
                        h[1] = -sqrt2 * ddp.im;
                        h[2] = h[1];
                        h[3] = -h[0];
                    }
                }
            }
        }

        if self.levels.is_empty() {
            return bufs;
        }
        // suffix squared norms
        let mut qsuf = vec![T::zero(); d + 1];
        for i in (0..d).rev() {
            qsuf[i] = qsuf[i + 1] + y[i] * y[i];
        }
        let nrec = self.max_n + 1;
        let mut rec = vec![T::zero(); nrec * if order == 0 { 1 } else if order == 1 { 3 } else { 6 }];
        let two = lit::<T>(2.0);
        let four = lit::<T>(4.0);

        for l in (0..self.levels.len()).rev() {
            let level = &self.levels[l];
            let dim = level.dim;
            let cd = dim - 1;
            let (head, tail) = bufs.split_at_mut(l + 1);
            let out = &mut head[l];
            let child = &tail[0];
            let cn = child_count(&self.levels, &self.base, l);
            let s = y[l];
            let q = qsuf[l];
            let z = &y[l..];
            let nn = level.n_nodes;
            for g in &level.groups {
                let nmax = g.entries.iter().map(|e| e.0).max().unwrap();
                gegenbauer_homog(g, s, q, nmax, order, &mut rec, nrec);
                let cv = child[g.child];
                for &(n, id) in &g.entries {
                    let gv = rec[n];
                    out[id] = gv * cv;
                    if order == 0 {
                        continue;
                    }
                    let (gs, gq) = (rec[nrec + n], rec[2 * nrec + n]);
                    let cg = &child[cn + g.child * cd..cn + (g.child + 1) * cd];
                    let og = nn + id * dim;
                    let radial0 = gs + two * s * gq;
                    out[og] = radial0 * cv;
                    for i in 1..dim {
                        out[og + i] = two * z[i] * gq * cv + gv * cg[i - 1];
                    }
                    if order < 2 {
                        continue;
                    }
                    let (gss, gsq, gqq) = (rec[3 * nrec + n], rec[4 * nrec + n], rec[5 * nrec + n]);
                    let ch0 = cn + cn * cd;
                    let ch = &child[ch0 + g.child * cd * cd..ch0 + (g.child + 1) * cd * cd];
                    let oh = nn + nn * dim + id * dim * dim;
                    out[oh] = (gss + four * s * gsq + four * s * s * gqq + two * gq) * cv;
                    for i in 1..dim {
                        let v = (two * z[i] * gsq + four * s * z[i] * gqq) * cv + radial0 * cg[i - 1];
                        out[oh + i] = v;
                        out[oh + i * dim] = v;
                    }
                    for i in 1..dim {
                        for j in i..dim {
                            let mut v = four * z[i] * z[j] * gqq * cv
                                + two * z[i] * gq * cg[j - 1]
                                + two * z[j] * gq * cg[i - 1]
                                + gv * ch[(i - 1) * cd + (j - 1)];
                            if i == j {
                                v = v + two * gq * cv;
                            }
                            out[oh + i * dim + j] = v;
                            out[oh + j * dim + i] = v;
                        }
                    }
                }
            }
        }
        bufs
    }

    /// Number of top-level nodes.
    pub(crate) fn top_count(&self) -> usize {
        self.levels.first().map(|l| l.n_nodes).unwrap_or(self.base.len())
    }
}

fn child_count<T>(levels: &[Level<T>], base: &[(usize, bool)], l: usize) -> usize {
    if l + 1 < levels.len() {
        levels[l + 1].n_nodes
    } else {
        base.len()
    }
}

/// Runs the normalized homogeneous recurrence and its partial derivatives.
/// Output layout: [G, G_s, G_q, G_ss, G_sq, G_qq] each of stride `nrec`.
fn gegenbauer_homog<T: Real>(g: &Group<T>, s: T, q: T, nmax: usize, order: usize, rec: &mut [T], nrec: usize) {
    let z = T::zero();
    rec[0] = g.g0;
    if order >= 1 {
        rec[nrec] = z;
        rec[2 * nrec] = z;
    }
    if order >= 2 {
        rec[3 * nrec] = z;
        rec[4 * nrec] = z;
        rec[5 * nrec] = z;
    }
    if nmax == 0 {
        return;
    }
    let two = lit::<T>(2.0);
    let width = [1, 3, 6][order.min(2)];
    for n in 0..nmax {
        let (a, b) = (g.a[n], g.b[n]);
        let at = |k: usize, i: Option<usize>| i.map_or(z, |i| rec[k * nrec + i]);
        let im = n.checked_sub(1);
        let cur: [T; 6] = std::array::from_fn(|k| if k < width { at(k, Some(n)) } else { z });
        let prv: [T; 6] = std::array::from_fn(|k| if k < width { at(k, im) } else { z });
        rec[n + 1] = a * s * cur[0] - b * q * prv[0];
        if order == 0 {
            continue;
        }
        rec[nrec + n + 1] = a * (cur[0] + s * cur[1]) - b * q * prv[1];
        rec[2 * nrec + n + 1] = a * s * cur[2] - b * (prv[0] + q * prv[2]);
        if order < 2 {
            continue;
        }
        rec[3 * nrec + n + 1] = a * (two * cur[1] + s * cur[3]) - b * q * prv[3];
        rec[4 * nrec + n + 1] = a * (cur[2] + s * cur[4]) - b * (prv[1] + q * prv[4]);
        rec[5 * nrec + n + 1] = a * s * cur[5] - b * (two * prv[2] + q * prv[5]);
    }
}

/// Values L_n = Ĝ_n(t, 1)·(1−t²)^{m1/2} for n ≤ nmax at a polar node; these are the
/// polar factors used by the separable transforms.
pub(crate) fn polar_factors<T: Real>(table: &GegTable, t: T, sin_pow: T, out: &mut Vec<T>) {
    out.clear();
    let nmax = table.a.len();
    let mut g0 = lit::<T>(table.g0) * sin_pow;
    out.push(g0);
    if nmax == 0 {
        return;
    }
    let mut g1 = lit::<T>(table.a[0]) * t * g0;
    out.push(g1);
    for n in 1..nmax {
        let g2 = lit::<T>(table.a[n]) * t * g1 - lit::<T>(table.b[n]) * g0;
        out.push(g2);
        g0 = g1;
        g1 = g2;
    }
}
