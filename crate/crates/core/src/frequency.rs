//! Frequency function, doubling index and sup/L² comparisons by quadrature.
//!
//! The frequency of u on B(x, r) is N = r ∫_B A∇u·∇u / ∫_{∂B} μ u², normalized so that a
//! homogeneous harmonic polynomial of degree k has frequency exactly k.

use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::field::{BandLimit, GeodesicBall, Manifold, ScalarField, Structure};
use crate::quadrature::BallGrid;
use crate::scalar::{dot, from_usize, lit, to_f64, Real};
use crate::sphharm::HarmonicExpansion;
use crate::supnorm::{sup_norm, ResolutionPolicy};

type MatrixFn<T> = dyn Fn(&[T]) -> Vec<T> + Send + Sync;

/// Symmetric, uniformly elliptic matrix field A(x).
#[derive(Clone)]
pub struct CoefficientField<T: Real> {
    dim: usize,
    matrix: Option<Arc<MatrixFn<T>>>,
    /// Ellipticity constant Λ ≥ 1.
    pub lambda: T,
    pub identity_at_origin: bool,
}

impl<T: Real> std::fmt::Debug for CoefficientField<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dim", &self.dim)
            .field("identity", &self.matrix.is_none())
            .field("lambda", &self.lambda)
            .finish()
    }
}

impl<T: Real> CoefficientField<T> {
    pub fn identity(dim: usize) -> Self {
        CoefficientField { dim, matrix: None, lambda: T::one(), identity_at_origin: true }
    }

    pub fn constant_diagonal(diag: &[T]) -> Result<Self> {
        if diag.iter().any(|&v| !(v > T::zero())) {
            return invalid("diagonal entries must be positive");
        }
        let lam = diag.iter().fold(T::one(), |m, &v| m.max(v).max(T::one() / v));
        let dd = diag.to_vec();
        let n = diag.len();
        let ident = diag.iter().all(|&v| v == T::one());
        Ok(CoefficientField {
            dim: n,
            matrix: Some(Arc::new(move |_x: &[T]| {
                let mut m = vec![T::zero(); n * n];
                for i in 0..n {
                    m[i * n + i] = dd[i];
                }
                m
            })),
            lambda: lam,
            identity_at_origin: ident,
        })
    }

    /// General field; `f(x)` returns the row-major matrix.
    pub fn from_fn<F: Fn(&[T]) -> Vec<T> + Send + Sync + 'static>(dim: usize, lambda: T, identity_at_origin: bool, f: F) -> Result<Self> {
        if !(lambda >= T::one()) {
            return invalid("ellipticity constant must be at least 1");
        }
        Ok(CoefficientField { dim, matrix: Some(Arc::new(f)), lambda, identity_at_origin })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_identity(&self) -> bool {
        self.matrix.is_none()
    }

    pub fn matrix(&self, x: &[T]) -> Vec<T> {
        match &self.matrix {
            None => {
                let mut m = vec![T::zero(); self.dim * self.dim];
                (0..self.dim).for_each(|i| m[i * self.dim + i] = T::one());
                m
            }
            Some(f) => f(x),
        }
    }

    /// A(x)ξ·ξ.
    pub fn quadratic(&self, x: &[T], xi: &[T]) -> T {
        if self.matrix.is_none() {
            return dot(xi, xi);
        }
        let m = self.matrix(x);
        let n = self.dim;
        let mut acc = T::zero();
        for i in 0..n {
            for j in 0..n {
                acc = acc + m[i * n + j] * xi[i] * xi[j];
            }
        }
        acc
    }

    /// Checks symmetry and Λ^{-1}|ξ|² ≤ Aξ·ξ ≤ Λ|ξ|² at the given points and directions.
    pub fn check_ellipticity(&self, points: &[Vec<T>], dirs: &[Vec<T>]) -> Result<()> {
        let tol = lit::<T>(1e-12);
        for x in points {
            let m = self.matrix(x);
            let n = self.dim;
            for i in 0..n {
                for j in 0..i {
                    if (m[i * n + j] - m[j * n + i]).abs() > tol * (T::one() + m[i * n + j].abs()) {
                        return invalid(format!("A is not symmetric at {x:?}"));
                    }
                }
            }
            for xi in dirs {
                let q = self.quadratic(x, xi);
                let s = dot(xi, xi);
                if q < s / self.lambda - tol || q > s * self.lambda + tol {
                    return invalid(format!("ellipticity fails at {x:?} in direction {xi:?}"));
                }
            }
        }
        if self.identity_at_origin {
            let m = self.matrix(&vec![T::zero(); self.dim]);
            let n = self.dim;
            for i in 0..n {
                for j in 0..n {
                    let want = if i == j { T::one() } else { T::zero() };
                    if (m[i * n + j] - want).abs() > tol {
                        return invalid("A(0) differs from the identity");
                    }
                }
            }
        }
        Ok(())
    }
}

/// μ(x) = A(x)x·x / |x|².
pub fn mu_weight<T: Real>(a: &CoefficientField<T>, x: &[T]) -> Result<T> {
    let n2 = dot(x, x);
    if n2 == T::zero() {
        return if a.identity_at_origin { Ok(T::one()) } else { invalid("μ is undefined at the origin") };
    }
    Ok(a.quadratic(x, x) / n2)
}

/// Radial and spherical quadrature orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct QuadOrders {
    pub radial: usize,
    pub sphere: usize,
}

impl QuadOrders {
    pub fn uniform(order: usize) -> Self {
        QuadOrders { radial: order, sphere: order }
    }
}

/// 2K + 4 where K is the effective degree of the field on a ball of radius r.
pub fn default_orders<T: Real>(band: Option<BandLimit<T>>, r: T) -> Result<QuadOrders> {
    match band {
        Some(b) => Ok(QuadOrders::uniform(2 * b.effective_degree(r) + 4)),
        None => invalid("field has no band limit; quadrature orders must be given"),
    }
}

fn check_flat<T: Real>(m: &Manifold<T>) -> Result<()> {
    if m.is_flat() {
        Ok(())
    } else {
        Err(Error::Domain(format!("frequency integrals need Euclidean coordinates; {} is curved", m.label())))
    }
}

/// Integrals over one ball: (⨍_B A∇u·∇u, ⨍_B u², ⨍_∂B μu²).
#[derive(Debug, Clone, Copy)]
struct BallMoments<T> {
    energy: T,
    mass: T,
    boundary: T,
}

fn expansion_origin<'a, T: Real>(field: &'a dyn ScalarField<T>, center: &[T]) -> Option<&'a HarmonicExpansion<T>> {
    match field.structure()? {
        Structure::Expansion { expansion, origin } => {
            let off: T = match origin {
                None => center.iter().map(|v| v.abs()).fold(T::zero(), T::max),
                Some(o) => o.iter().zip(center).map(|(&a, &b)| (a - b).abs()).fold(T::zero(), T::max),
            };
            (off == T::zero()).then_some(expansion)
        }
        _ => None,
    }
}

fn ball_moments<T: Real>(
    field: &dyn ScalarField<T>,
    a: &CoefficientField<T>,
    center: &[T],
    r: T,
    orders: QuadOrders,
) -> Result<BallMoments<T>> {
    let d = center.len();
    let grid = BallGrid::new(d, orders.radial, orders.sphere, r)?;
    let sg = &grid.sphere;
    let fast = if a.is_identity() { expansion_origin(field, center) } else { None };
    let per_node: Vec<(T, T, T)> = (0..sg.len())
        .into_par_iter()
        .map(|i| {
            let mut xi = vec![T::zero(); d];
            let w = sg.point(i, &mut xi);
            let mut e = T::zero();
            let mut m = T::zero();
            if let Some(exp) = fast {
                let (pv, pg) = exp.eval_by_degree(&xi);
                let kk = pv.len();
                let radial = grid.radial.iter().chain(std::iter::once(&r));
                for (j, &rho) in radial.enumerate() {
                    let s = rho / exp.r_ref();
                    let mut v = T::zero();
                    let mut g = vec![T::zero(); d];
                    let mut sk = T::one();
                    for k in 0..kk {
                        if k >= 1 {
                            for c in 0..d {
                                g[c] = g[c] + sk * pg[k * d + c];
                            }
                            sk = sk * s;
                        }
                        v = v + sk * pv[k];
                    }
                    if j < grid.radial.len() {
                        let gw = grid.radial_w[j];
                        e = e + gw * dot(&g, &g) / (exp.r_ref() * exp.r_ref());
                        m = m + gw * v * v;
                    } else {
                        return (w * e, w * m, w * v * v);
                    }
                }
                unreachable!()
            }
            let mut x = vec![T::zero(); d];
            for (j, &rho) in grid.radial.iter().enumerate() {
                for c in 0..d {
                    x[c] = center[c] + rho * xi[c];
                }
                let (v, g) = field.eval(&x);
                let y: Vec<T> = x.iter().zip(center).map(|(&p, &q)| p - q).collect();
                e = e + grid.radial_w[j] * a.quadratic(&y, &g);
                m = m + grid.radial_w[j] * v * v;
            }
            for c in 0..d {
                x[c] = center[c] + r * xi[c];
            }
            let v = field.value(&x);
            let y: Vec<T> = x.iter().zip(center).map(|(&p, &q)| p - q).collect();
            let mu = mu_weight(a, &y).unwrap_or(T::one());
            (w * e, w * m, w * mu * v * v)
        })
        .collect();
    let mut out = BallMoments { energy: T::zero(), mass: T::zero(), boundary: T::zero() };
    for (e, m, b) in per_node {
        out.energy = out.energy + e;
        out.mass = out.mass + m;
        out.boundary = out.boundary + b;
    }
    Ok(out)
}

fn check_args<T: Real>(field: &dyn ScalarField<T>, center: &[T], r: T) -> Result<()> {
    let m = field.manifold();
    check_flat(&m)?;
    if center.len() != m.ambient_dim() {
        return invalid(format!("center has {} coordinates, field needs {}", center.len(), m.ambient_dim()));
    }
    if !(r > T::zero()) || !r.is_finite() {
        return invalid("radius must be positive");
    }
    Ok(())
}

/// N_u(center, r) by ball and sphere quadrature.
pub fn frequency_numeric<T: Real>(
    field: &dyn ScalarField<T>,
    a: &CoefficientField<T>,
    center: &[T],
    r: T,
    orders: Option<QuadOrders>,
) -> Result<T> {
    check_args(field, center, r)?;
    if a.dim() != center.len() {
        return invalid("coefficient field dimension mismatch");
    }
    let orders = match orders {
        Some(o) => o,
        None => default_orders(field.band_limit(), r)?,
    };
    let mo = ball_moments(field, a, center, r, orders)?;
    let scale = T::epsilon() * T::epsilon() * (mo.mass.abs() + mo.energy.abs() * r * r);
    if !(mo.boundary > scale) || !mo.boundary.is_finite() {
        return Err(Error::UndefinedFrequency(format!("boundary L² mass {} vanishes at r={}", mo.boundary, r)));
    }
    // r ∫_B / ∫_∂B = r · (r/d) · ⨍_B / ⨍_∂B
    Ok(r * r / from_usize::<T>(center.len()) * mo.energy / mo.boundary)
}

/// Sampled frequency r ↦ N(center, r).
#[derive(Debug, Clone, Serialize)]
pub struct FrequencyProfile {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub weight: String,
    pub quad_orders: Vec<usize>,
    /// Largest downward step between consecutive radii (0 when nondecreasing).
    pub max_downward_violation: f64,
}

impl FrequencyProfile {
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.max_downward_violation <= tol
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("center_coords,r,N,weight,quad_order\n");
        let c: Vec<String> = self.center.iter().map(|v| format!("{v}")).collect();
        for ((r, n), q) in self.radii.iter().zip(&self.values).zip(&self.quad_orders) {
            s.push_str(&format!("{},{:.17e},{:.17e},{},{}\n", c.join(";"), r, n, self.weight, q));
        }
        s
    }
}

pub fn frequency_profile<T: Real>(
    field: &dyn ScalarField<T>,
    a: &CoefficientField<T>,
    center: &[T],
    r_grid: &[T],
) -> Result<FrequencyProfile> {
    if r_grid.is_empty() {
        return invalid("radius grid is empty");
    }
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("radius grid must be strictly increasing");
    }
    let results: Vec<Result<(T, usize)>> = r_grid
        .par_iter()
        .map(|&r| {
            let o = default_orders(field.band_limit(), r)?;
            Ok((frequency_numeric(field, a, center, r, Some(o))?, o.sphere))
        })
        .collect();
    let mut values = Vec::with_capacity(r_grid.len());
    let mut orders = Vec::with_capacity(r_grid.len());
    for res in results {
        let (v, o) = res?;
        if !(v >= T::zero()) || !v.is_finite() {
            return Err(Error::UndefinedFrequency(format!("non-finite or negative frequency {v}")));
        }
        values.push(to_f64(v));
        orders.push(o);
    }
    let viol = values.windows(2).map(|w| (w[0] - w[1]).max(0.0)).fold(0.0, f64::max);
    Ok(FrequencyProfile {
        center: center.iter().map(|&c| to_f64(c)).collect(),
        radii: r_grid.iter().map(|&r| to_f64(r)).collect(),
        values,
        weight: if a.is_identity() { "identity".into() } else { "coefficient".into() },
        quad_orders: orders,
        max_downward_violation: viol,
    })
}

/// ⨍_{B(center, r)} u² by quadrature.
pub fn ball_mean_square_numeric<T: Real>(field: &dyn ScalarField<T>, center: &[T], r: T, orders: QuadOrders) -> Result<T> {
    let a = CoefficientField::identity(center.len());
    Ok(ball_moments(field, &a, center, r, orders)?.mass)
}

/// log₂(⨍_{B(2r)} u² / ⨍_{B(r)} u²) / 2.
pub fn doubling_index<T: Real>(field: &dyn ScalarField<T>, center: &[T], r: T) -> Result<T> {
    check_args(field, center, r)?;
    let two_r = r + r;
    let o = default_orders(field.band_limit(), two_r)?;
    let outer = ball_mean_square_numeric(field, center, two_r, o)?;
    let inner = ball_mean_square_numeric(field, center, r, o)?;
    if !(inner > T::zero()) {
        return Err(Error::UndefinedFrequency("zero mass on the inner ball".into()));
    }
    Ok((outer / inner).log2() / lit(2.0))
}

/// sup_B |u| / (N^{d/2} (⨍_{∂B} u²)^{1/2}).
#[derive(Debug, Clone, Serialize)]
pub struct SupL2Report {
    pub sup: f64,
    pub boundary_rms: f64,
    pub n_declared: f64,
    pub ratio: f64,
}

pub fn sup_vs_boundary_l2<T: Real>(
    field: &dyn ScalarField<T>,
    center: &[T],
    r: T,
    n_declared: T,
    policy: &ResolutionPolicy,
) -> Result<SupL2Report> {
    check_args(field, center, r)?;
    if !(n_declared > T::zero()) {
        return invalid("declared frequency must be positive");
    }
    let d = center.len();
    let o = default_orders(field.band_limit(), r)?;
    let a = CoefficientField::identity(d);
    let mo = ball_moments(field, &a, center, r, QuadOrders { radial: 1, sphere: o.sphere })?;
    let ball = GeodesicBall::new(Manifold::Euclidean { dim: d }, center.to_vec(), r)?;
    let sup = sup_norm(field as &dyn crate::field::Field<T>, &ball, policy)?.sup;
    let rms = mo.boundary.sqrt();
    let denom = n_declared.powf(lit::<T>(d as f64 / 2.0)) * rms;
    if !(denom > T::zero()) {
        return Err(Error::UndefinedFrequency("boundary L² mass vanishes".into()));
    }
    Ok(SupL2Report { sup: to_f64(sup), boundary_rms: to_f64(rms), n_declared: to_f64(n_declared), ratio: to_f64(sup / denom) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mu_examples() {
        let id = CoefficientField::<f64>::identity(2);
        assert_eq!(mu_weight(&id, &[0.3, 0.1]).unwrap(), 1.0);
        let a = CoefficientField::constant_diagonal(&[2.0f64, 1.0]).unwrap();
        assert!((mu_weight(&a, &[1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        let s = 0.5f64.sqrt();
        assert!((mu_weight(&a, &[s, s]).unwrap() - 1.5).abs() < 1e-15);
        assert!(mu_weight(&a, &[0.0, 0.0]).is_err());
        assert_eq!(mu_weight(&id, &[0.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn degree_k_frequency() {
        for d in 2..=4 {
            for k in [0usize, 1, 3, 7] {
                let e = HarmonicExpansion::<f64>::single(d, k, 0, 1.7).unwrap();
                let a = CoefficientField::identity(d);
                let n = frequency_numeric(&e, &a, &vec![0.0; d], 0.8, None).unwrap();
                assert!((n - k as f64).abs() < 1e-10, "d={d} k={k}: {n}");
            }
        }
    }
}
