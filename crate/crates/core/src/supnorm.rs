//! Grid-plus-refinement estimation of sup |f| over geodesic balls.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{Chart, Field, GeodesicBall, Manifold, Structure};
use crate::quadrature::SphereGrid;
use crate::scalar::{lit, norm, to_f64, Real};
use crate::sphharm::transform::{analyze, synthesize_rings, zero_blocks, Blocks};
use crate::sphharm::HarmonicExpansion;

/// Sampling policy for [`sup_norm`].
#[derive(Debug, Clone, Serialize)]
pub struct ResolutionPolicy {
    /// Grid spacing is `grid_factor · min(r, 1/B)`.
    pub grid_factor: f64,
    /// Refinement stops once the step is below `refine_tol · r` ...
    pub refine_tol: f64,
    /// ... and the last relative improvement is below this.
    pub rel_tol: f64,
    /// Allow fields without a declared band limit.
    pub force: bool,
    /// Number of grid maxima that are refined.
    pub candidates: usize,
}

impl Default for ResolutionPolicy {
    fn default() -> Self {
        ResolutionPolicy { grid_factor: 0.125, refine_tol: 1e-4, rel_tol: 1e-9, force: false, candidates: 4 }
    }
}

/// Resolution metadata of a sup estimate.
#[derive(Debug, Clone, Serialize)]
pub struct SupCertificate {
    pub grid_spacing: f64,
    pub refine_depth: usize,
    pub evaluations: usize,
    pub band_limit: Option<f64>,
    /// 1 + (B h)²/8: a sampled maximum of a band-B field on a grid of spacing h is within
    /// this factor of the true maximum, to second order.
    pub error_factor: f64,
    pub boundary_only: bool,
    pub structured: bool,
}

#[derive(Debug, Clone)]
pub struct SupResult<T> {
    pub sup: T,
    pub argmax: Vec<T>,
    pub certificate: SupCertificate,
}

fn compatible<T: Real>(field: &Manifold<T>, region: &Manifold<T>) -> bool {
    match (field, region) {
        (Manifold::Euclidean { dim: a }, Manifold::Euclidean { dim: b }) => a == b,
        // periodic fields are fine on Euclidean regions and vice versa
        (Manifold::Torus { dim: a, .. }, Manifold::Euclidean { dim: b }) => a == b,
        (Manifold::Torus { dim: a, period: p }, Manifold::Torus { dim: b, period: q }) => a == b && p == q,
        (Manifold::Sphere { n: a }, Manifold::Sphere { n: b }) => a == b,
        (Manifold::Lift(a), Manifold::Lift(b)) => compatible(a, b),
        (Manifold::Lift(a), Manifold::Euclidean { dim }) => a.is_flat() && a.ambient_dim() + 1 == *dim,
        _ => false,
    }
}

/// Chart-coordinate sample set for a region.
struct Samples<T> {
    /// Row-major chart coordinates.
    coords: Vec<T>,
    dim: usize,
}

fn lattice<T: Real>(dim: usize, h: T, r: T, out: &mut Vec<T>) {
    let m = (r / h).floor().to_i64().unwrap_or(0);
    let side = (2 * m + 1) as usize;
    let total = side.pow(dim as u32);
    let mut idx = vec![-m; dim];
    for _ in 0..total {
        let v: Vec<T> = idx.iter().map(|&i| h * lit::<T>(i as f64)).collect();
        if norm(&v) <= r {
            out.extend_from_slice(&v);
        }
        for i in idx.iter_mut() {
            *i += 1;
            if *i <= m {
                break;
            }
            *i = -m;
        }
    }
}

/// Points on the sphere of radius r with angular spacing ≤ h/r; nested under halving of h.
fn boundary_points<T: Real>(dim: usize, h: T, r: T, out: &mut Vec<T>) -> Result<()> {
    if dim == 1 {
        out.push(-r);
        out.push(r);
        return Ok(());
    }
    let grid = nested_scan_grid::<T>(dim, to_f64(h / r), 0)?;
    let mut p = vec![T::zero(); dim];
    for i in 0..grid.len() {
        grid.point(i, &mut p);
        out.extend(p.iter().map(|&v| v * r));
    }
    Ok(())
}

/// Scan grid whose ring and azimuth counts are powers of two, polar angles iπ/n including
/// the poles, so halving the spacing refines the previous grid.
pub(crate) fn nested_scan_grid<T: Real>(d: usize, spacing: f64, min_phi: usize) -> Result<SphereGrid<T>> {
    let mut nt: usize = 2;
    while (std::f64::consts::PI / nt as f64) > spacing {
        nt *= 2;
    }
    let mut np = 2 * nt;
    while np < min_phi {
        np *= 2;
    }
    let mut g = SphereGrid::<T>::uniform(d, spacing, 3)?;
    for (lvl, w) in g.polar.iter_mut().zip(g.polar_w.iter_mut()) {
        *lvl = (0..=nt).map(|i| lit((std::f64::consts::PI * i as f64 / nt as f64).cos())).collect();
        *w = vec![lit(1.0 / (nt + 1) as f64); nt + 1];
    }
    g.n_phi = np;
    Ok(g)
}

fn whole_torus_samples<T: Real>(dim: usize, period: T, h: T) -> Vec<T> {
    let n = (period / h).ceil().to_usize().unwrap_or(1).max(2);
    let step = period / lit(n as f64);
    let half = period / lit(2.0);
    let mut out = Vec::with_capacity(n.pow(dim as u32) * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..n.pow(dim as u32) {
        out.extend(idx.iter().map(|&i| step * lit::<T>(i as f64) - half));
        for i in idx.iter_mut() {
            *i += 1;
            if *i < n {
                break;
            }
            *i = 0;
        }
    }
    out
}

struct Refiner<'a, T: Real> {
    field: &'a dyn Field<T>,
    chart: Chart<T>,
    radius: T,
    boundary: bool,
    whole_torus: bool,
}

impl<'a, T: Real> Refiner<'a, T> {
    fn project(&self, v: &mut [T]) {
        if self.whole_torus {
            return;
        }
        let n = norm(v);
        if self.boundary && n > T::zero() {
            v.iter_mut().for_each(|x| *x = *x * self.radius / n);
        } else if n > self.radius {
            v.iter_mut().for_each(|x| *x = *x * self.radius / n);
        }
    }

    fn eval(&self, v: &[T]) -> T {
        self.field.value(&self.chart.map(v)).abs()
    }

    /// Compass search from `v0`; returns (value, point, halvings, evaluations).
    fn refine(&self, v0: &[T], f0: T, step0: T, policy: &ResolutionPolicy) -> (T, Vec<T>, usize, usize) {
        let dim = v0.len();
        let mut v = v0.to_vec();
        let mut f = f0;
        let mut step = step0;
        let mut depth = 0;
        let mut evals = 0;
        let stop = lit::<T>(policy.refine_tol) * self.radius;
        let rel = lit::<T>(policy.rel_tol);
        let mut last_gain = T::infinity();
        let mut guard = 0;
        loop {
            guard += 1;
            if guard > 10_000 {
                break;
            }
            let mut best: Option<(T, Vec<T>)> = None;
            for j in 0..dim {
                for s in [step, -step] {
                    let mut w = v.clone();
                    w[j] = w[j] + s;
                    self.project(&mut w);
                    let fw = self.eval(&w);
                    evals += 1;
                    if fw > f && best.as_ref().is_none_or(|b| fw > b.0) {
                        best = Some((fw, w));
                    }
                }
            }
            match best {
                Some((fb, w)) => {
                    last_gain = (fb - f) / f.max(T::min_positive_value());
                    f = fb;
                    v = w;
                }
                None => {
                    if step < stop && last_gain < rel {
                        break;
                    }
                    step = step / lit(2.0);
                    depth += 1;
                    last_gain = T::zero();
                    if step < stop * lit(1e-6) {
                        break;
                    }
                }
            }
        }
        (f, v, depth, evals)
    }
}

fn top_k<T: Real>(vals: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| vals[b].partial_cmp(&vals[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Estimates sup |field| over `region`.
pub fn sup_norm<T: Real>(field: &dyn Field<T>, region: &GeodesicBall<T>, policy: &ResolutionPolicy) -> Result<SupResult<T>> {
    region.validate_or_whole()?;
    let fm = field.manifold();
    if !compatible(&fm, &region.manifold) {
        return Err(Error::Domain(format!("field lives on {}, region on {}", fm.label(), region.manifold.label())));
    }
    let r = region.radius;
    let band = field.band_limit();
    let b_eff = match band {
        Some(b) => b.wavenumber(r),
        None if policy.force => T::one() / r,
        None => {
            return Err(Error::UnresolvedSupremum(
                "field has no band limit; pass force to sample at the region scale".into(),
            ))
        }
    };
    if !(policy.grid_factor > 0.0) || !(policy.refine_tol > 0.0) {
        return Err(Error::InvalidArgument("grid factor and refine tolerance must be positive".into()));
    }
    let h = lit::<T>(policy.grid_factor) * r.min(T::one() / b_eff);
    let dim = region.chart_dim();
    let whole_torus = region.whole && matches!(region.manifold, Manifold::Torus { .. });
    let flat_chart = region.manifold.is_flat();
    let boundary = !region.whole && flat_chart && field.max_principle();

    let chart = region.chart();
    let refiner = Refiner { field, chart, radius: r, boundary, whole_torus };

    // coarse scan
    let mut structured = false;
    let (cand_coords, cand_vals, mut evals): (Vec<Vec<T>>, Vec<T>, usize) =
        match (boundary, structured_scan(field, region, h, policy.candidates.max(1))?) {
            (true, Some((c, v, n))) => {
                structured = true;
                (c, v, n)
            }
            _ => {
                let mut coords = Vec::new();
                if whole_torus {
                    let period = match region.manifold {
                        Manifold::Torus { period, .. } => period,
                        _ => unreachable!(),
                    };
                    coords = whole_torus_samples(dim, period, h);
                } else if region.whole {
                    // whole sphere: boundary of the cap of radius π is a point; use a ball of radius π
                    lattice(dim, h, r, &mut coords);
                } else {
                    if !boundary {
                        lattice(dim, h, r, &mut coords);
                    }
                    boundary_points(dim, h, r, &mut coords)?;
                }
                let samples = Samples { coords, dim };
                let n = samples.coords.len() / samples.dim;
                let vals: Vec<T> = (0..n)
                    .into_par_iter()
                    .with_min_len(256)
                    .map(|i| refiner.eval(&samples.coords[i * dim..(i + 1) * dim]))
                    .collect();
                let top = top_k(&vals, policy.candidates.max(1));
                let c = top.iter().map(|&i| samples.coords[i * dim..(i + 1) * dim].to_vec()).collect();
                let v = top.iter().map(|&i| vals[i]).collect();
                (c, v, n)
            }
        };

    let grid_best = cand_vals.iter().copied().fold(T::zero(), T::max);
    let mut best = (grid_best, cand_coords.first().cloned().unwrap_or_else(|| vec![T::zero(); dim]));
    let mut depth = 0;
    for (v0, f0) in cand_coords.iter().zip(&cand_vals) {
        let (f, v, dp, ne) = refiner.refine(v0, *f0, h / lit(2.0), policy);
        evals += ne;
        depth = depth.max(dp);
        if f > best.0 {
            best = (f, v);
        }
    }
    let argmax = refiner.chart.map(&best.1);
    let bh = to_f64(b_eff * h);
    Ok(SupResult {
        sup: best.0,
        argmax,
        certificate: SupCertificate {
            grid_spacing: to_f64(h),
            refine_depth: depth,
            evaluations: evals,
            band_limit: band.map(|b| to_f64(b.wavenumber(r))),
            error_factor: 1.0 + bh * bh / 8.0,
            boundary_only: boundary,
            structured,
        },
    })
}

impl<T: Real> GeodesicBall<T> {
    fn validate_or_whole(&self) -> Result<()> {
        if self.whole {
            Ok(())
        } else {
            self.validate()
        }
    }
}

type Scan<T> = (Vec<Vec<T>>, Vec<T>, usize);

/// Exact-synthesis boundary scan for expansion-backed fields on balls centred at the
/// expansion origin. Returns chart coordinates of the best grid points.
fn structured_scan<T: Real>(field: &dyn Field<T>, region: &GeodesicBall<T>, h: T, k: usize) -> Result<Option<Scan<T>>> {
    if region.whole || !matches!(region.manifold, Manifold::Euclidean { .. }) {
        return Ok(None);
    }
    let (exp, origin, grad) = match field.structure() {
        Some(Structure::Expansion { expansion, origin }) => (expansion, origin, false),
        Some(Structure::ExpansionGradientNorm { expansion, origin }) => (expansion, origin, true),
        None => return Ok(None),
    };
    let d = exp.d();
    if d < 2 {
        return Ok(None);
    }
    let off = origin.map_or(T::zero(), |o| o.iter().zip(&region.center).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max));
    let cnorm = if origin.is_none() { norm(&region.center) } else { off };
    if cnorm > lit::<T>(1e-12) * region.radius.max(T::one()) {
        return Ok(None);
    }
    let r = region.radius;
    let kmax = exp.max_degree().unwrap_or(0);
    let sets = boundary_blocks(exp, r, grad)?;
    let grid = nested_scan_grid::<T>(d, to_f64(h / r), 2 * kmax + 2)?;
    let n_sub = if d == 2 { grid.n_phi } else { grid.points_from(1) };
    let mut best: Vec<(T, usize)> = Vec::new();
    synthesize_rings(&grid, &sets, |ring, vals| {
        for j in 0..n_sub {
            let v = if grad {
                vals.iter().map(|c| c[j] * c[j]).sum::<T>().sqrt() / r
            } else {
                vals[0][j].abs()
            };
            if best.len() < k || v > best[best.len() - 1].0 {
                let idx = ring * n_sub + j;
                let pos = best.iter().position(|b| v > b.0).unwrap_or(best.len());
                best.insert(pos, (v, idx));
                best.truncate(k);
            }
        }
    });
    let mut p = vec![T::zero(); d];
    let coords = best
        .iter()
        .map(|&(_, idx)| {
            grid.point(idx, &mut p);
            p.iter().map(|&x| x * r).collect()
        })
        .collect();
    Ok(Some((coords, best.iter().map(|b| b.0).collect(), grid.len())))
}

/// Coefficients of g(ξ) = h(rξ) on the unit sphere, or of the d components of ∇g.
fn boundary_blocks<T: Real>(exp: &HarmonicExpansion<T>, r: T, grad: bool) -> Result<Vec<Blocks<T>>> {
    let d = exp.d();
    let kmax = exp.max_degree().unwrap_or(0);
    let s = r / exp.r_ref();
    let mut b = zero_blocks::<T>(d, kmax);
    for t in exp.terms() {
        b[t.k][t.m] = t.a * s.powi(t.k as i32);
    }
    if !grad {
        return Ok(vec![b]);
    }
    if kmax == 0 {
        return Ok(vec![zero_blocks(d, 0); d]);
    }
    let scaled = HarmonicExpansion::from_blocks(d, T::one(), &b)?;
    let order = 2 * kmax;
    let grid = SphereGrid::<T>::gauss(d, order)?;
    let grads: Vec<Vec<T>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let mut p = vec![T::zero(); d];
            grid.point(i, &mut p);
            scaled.eval(&p).1
        })
        .collect();
    (0..d)
        .map(|c| {
            let vals: Vec<T> = grads.iter().map(|g| g[c]).collect();
            analyze(&grid, &vals, kmax - 1)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{BandLimit, FnField, GradientNorm};
    use crate::sphharm::HarmonicExpansion;

    #[test]
    fn linear_maximizer_on_boundary() {
        let e = HarmonicExpansion::<f64>::single(3, 1, 0, 1.0 / 3f64.sqrt()).unwrap();
        // Y_{1,0} = √3 x_1, so e = x_1
        let ball = GeodesicBall::new(Manifold::Euclidean { dim: 3 }, vec![0.0; 3], 1.0).unwrap();
        let res = sup_norm(&e, &ball, &ResolutionPolicy::default()).unwrap();
        assert!((res.sup - 1.0).abs() < 1e-9, "{}", res.sup);
        assert!(res.argmax[0].abs() > 0.999);
        assert!(res.certificate.structured);
        let g = sup_norm(&GradientNorm(&e), &ball, &ResolutionPolicy::default()).unwrap();
        assert!((g.sup - 1.0).abs() < 1e-9);
    }

    #[test]
    fn torus_sine() {
        let f = FnField {
            manifold: Manifold::torus(2),
            value: |x: &[f64]| (3.0 * x[0]).sin(),
            gradient: |x: &[f64]| vec![3.0 * (3.0 * x[0]).cos(), 0.0],
            band: Some(BandLimit::Wavenumber(3.0)),
        };
        let region = GeodesicBall::whole(Manifold::torus(2)).unwrap();
        let res = sup_norm(&f, &region, &ResolutionPolicy::default()).unwrap();
        assert!((res.sup - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unresolved_without_band() {
        let f = FnField {
            manifold: Manifold::Euclidean { dim: 2 },
            value: |x: &[f64]| x[0],
            gradient: |_: &[f64]| vec![1.0, 0.0],
            band: None,
        };
        let ball = GeodesicBall::new(Manifold::Euclidean { dim: 2 }, vec![0.0; 2], 1.0).unwrap();
        assert!(matches!(sup_norm(&f, &ball, &ResolutionPolicy::default()), Err(Error::UnresolvedSupremum(_))));
        let forced = ResolutionPolicy { force: true, ..Default::default() };
        assert!((sup_norm(&f, &ball, &forced).unwrap().sup - 1.0).abs() < 1e-8);
    }
}
