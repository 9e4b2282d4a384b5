//! Laplace eigenfunctions on flat tori and round spheres, the harmonic lift
//! u(x, t) = φ(x) e^{√λ t}, and the quantities q, M, F, ρ₀, t used in Dong's
//! two-dimensional argument.

use num_complex::Complex;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{BandLimit, Chart, Field, GeodesicBall, Manifold, ScalarField};
use crate::scalar::{dot, lit, norm, to_f64, Real};
use crate::special::{gauss_legendre, ln_factorial};
use crate::sphharm::{dim_harmonics, HarmonicExpansion, Term};
use crate::supnorm::{sup_norm, ResolutionPolicy};

/// One plane-wave pair a cos(m·x) + b sin(m·x).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TorusMode<T> {
    pub m: Vec<i64>,
    pub cos: T,
    pub sin: T,
}

/// Eigenfunction of the flat torus (R/2πZ)^d with eigenvalue |m|².
#[derive(Debug, Clone)]
pub struct TorusEigenfunction<T> {
    d: usize,
    modes: Vec<TorusMode<T>>,
    norm2: i64,
}

fn norm2(m: &[i64]) -> i64 {
    m.iter().map(|v| v * v).sum()
}

impl<T: Real> TorusEigenfunction<T> {
    pub fn new(d: usize, modes: Vec<TorusMode<T>>) -> Result<Self> {
        if d == 0 {
            return invalid("torus dimension must be positive");
        }
        let Some(first) = modes.first() else {
            return invalid("an eigenfunction needs at least one mode");
        };
        if let Some(bad) = modes.iter().find(|md| md.m.len() != d) {
            return invalid(format!("mode {:?} does not have {d} components", bad.m));
        }
        if modes.iter().any(|md| !md.cos.is_finite() || !md.sin.is_finite()) {
            return invalid("mode coefficients must be finite");
        }
        let n2 = norm2(&first.m);
        if let Some(bad) = modes.iter().find(|md| norm2(&md.m) != n2) {
            return Err(Error::MixedEigenvalues(format!(
                "|{:?}|² = {} but |{:?}|² = {}",
                first.m,
                n2,
                bad.m,
                norm2(&bad.m)
            )));
        }
        Ok(TorusEigenfunction { d, modes, norm2: n2 })
    }

    /// Integer vectors with |m|² = `n2`, one from each ± pair.
    pub fn lattice_vectors(d: usize, n2: i64) -> Vec<Vec<i64>> {
        fn rec(d: usize, left: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
            if cur.len() == d {
                if left == 0 {
                    out.push(cur.clone());
                }
                return;
            }
            let bound = (left as f64).sqrt().floor() as i64;
            let leading = cur.iter().all(|&v| v == 0);
            let lo = if leading { 0 } else { -bound };
            for v in lo..=bound {
                if v * v <= left {
                    cur.push(v);
                    rec(d, left - v * v, cur, out);
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        if n2 >= 0 && d > 0 {
            rec(d, n2, &mut Vec::with_capacity(d), &mut out);
        }
        if n2 > 0 {
            out.retain(|v| v.iter().any(|&x| x != 0));
        }
        out
    }

    /// Random combination of up to `n_modes` distinct lattice modes with |m|² = `n2` and
    /// standard normal coefficients.
    pub fn random<R: Rng + ?Sized>(d: usize, n2: i64, n_modes: usize, rng: &mut R) -> Result<Self> {
        let mut vecs = Self::lattice_vectors(d, n2);
        if vecs.is_empty() {
            return invalid(format!("no integer vector in Z^{d} has squared length {n2}"));
        }
        if n_modes == 0 {
            return invalid("need at least one mode");
        }
        vecs.shuffle(rng);
        vecs.truncate(n_modes);
        vecs.sort();
        let modes = vecs
            .into_iter()
            .map(|m| {
                let a: f64 = StandardNormal.sample(rng);
                let b: f64 = StandardNormal.sample(rng);
                TorusMode { m, cos: lit(a), sin: lit(b) }
            })
            .collect();
        Self::new(d, modes)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn modes(&self) -> &[TorusMode<T>] {
        &self.modes
    }

    pub fn norm2(&self) -> i64 {
        self.norm2
    }

    fn phase(&self, md: &TorusMode<T>, x: &[T]) -> (T, T) {
        md.m.iter().zip(x).map(|(&mi, &xi)| lit::<T>(mi as f64) * xi).sum::<T>().sin_cos()
    }

    pub fn value(&self, x: &[T]) -> T {
        self.modes
            .iter()
            .map(|md| {
                let (s, c) = self.phase(md, x);
                md.cos * c + md.sin * s
            })
            .sum()
    }

    pub fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        let mut v = T::zero();
        let mut g = vec![T::zero(); self.d];
        for md in &self.modes {
            let (s, c) = self.phase(md, x);
            v = v + md.cos * c + md.sin * s;
            let dv = md.sin * c - md.cos * s;
            for (gi, &mi) in g.iter_mut().zip(&md.m) {
                *gi = *gi + dv * lit::<T>(mi as f64);
            }
        }
        (v, g)
    }

    /// Row-major Hessian.
    pub fn hessian(&self, x: &[T]) -> Vec<T> {
        let d = self.d;
        let mut h = vec![T::zero(); d * d];
        for md in &self.modes {
            let (s, c) = self.phase(md, x);
            let v = md.cos * c + md.sin * s;
            for i in 0..d {
                for j in 0..d {
                    h[i * d + j] = h[i * d + j] - v * lit::<T>((md.m[i] * md.m[j]) as f64);
                }
            }
        }
        h
    }

    /// Σ √(a² + b²), an upper bound for sup |φ|.
    pub fn amplitude_bound(&self) -> T {
        self.modes.iter().map(|md| md.cos.hypot(md.sin)).sum()
    }
}

/// Restriction of a degree-k harmonic polynomial on R^{n+1} to S^n.
#[derive(Debug, Clone)]
pub struct SphereEigenfunction<T: Real> {
    n: usize,
    k: usize,
    coefficients: Vec<T>,
    poly: HarmonicExpansion<T>,
}

impl<T: Real> SphereEigenfunction<T> {
    pub fn new(n: usize, k: usize, coefficients: Vec<T>) -> Result<Self> {
        if n == 0 {
            return invalid("sphere dimension must be positive");
        }
        let dim = dim_harmonics(n + 1, k)?;
        if coefficients.len() != dim {
            return invalid(format!("degree {k} on S^{n} needs {dim} coefficients, got {}", coefficients.len()));
        }
        let terms = coefficients.iter().enumerate().map(|(m, &a)| Term { k, m, a }).collect();
        let poly = HarmonicExpansion::new(n + 1, T::one(), terms)?;
        Ok(SphereEigenfunction { n, k, coefficients, poly })
    }

    /// Zonal harmonic about the pole e₀, normalized to 1 at the pole.
    pub fn zonal(n: usize, k: usize) -> Result<Self> {
        let dim = dim_harmonics(n + 1, k)?;
        let y = HarmonicExpansion::<T>::single(n + 1, k, 0, T::one())?;
        let mut pole = vec![T::zero(); n + 1];
        pole[0] = T::one();
        let mut c = vec![T::zero(); dim];
        c[0] = T::one() / y.value(&pole);
        Self::new(n, k, c)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<Self> {
        let dim = dim_harmonics(n + 1, k)?;
        let c = (0..dim)
            .map(|_| {
                let a: f64 = StandardNormal.sample(rng);
                lit(a)
            })
            .collect();
        Self::new(n, k, c)
    }

    pub fn sphere_dim(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn polynomial(&self) -> &HarmonicExpansion<T> {
        &self.poly
    }

    /// Value and tangential gradient ∇P − (∇P·x)x.
    pub fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        let (v, g) = self.poly.eval(x);
        let nx = norm(x);
        let p = dot(&g, x) / (nx * nx);
        (v, g.iter().zip(x).map(|(&gi, &xi)| gi - p * xi).collect())
    }
}

/// A Laplace eigenfunction on one of the model manifolds.
#[derive(Debug, Clone)]
pub enum Eigenfunction<T: Real> {
    Torus(TorusEigenfunction<T>),
    Sphere(SphereEigenfunction<T>),
}

/// Builds a torus eigenfunction; `seed` is recorded by callers that draw coefficients.
pub fn make_torus_eigenfunction<T: Real>(d: usize, modes: Vec<TorusMode<T>>) -> Result<Eigenfunction<T>> {
    Ok(Eigenfunction::Torus(TorusEigenfunction::new(d, modes)?))
}

pub fn make_sphere_eigenfunction<T: Real>(n: usize, k: usize, coefficients: Vec<T>) -> Result<Eigenfunction<T>> {
    Ok(Eigenfunction::Sphere(SphereEigenfunction::new(n, k, coefficients)?))
}

impl<T: Real> Eigenfunction<T> {
    pub fn eigenvalue(&self) -> T {
        match self {
            Eigenfunction::Torus(t) => lit(t.norm2 as f64),
            Eigenfunction::Sphere(s) => lit((s.k * (s.k + s.n - 1)) as f64),
        }
    }

    pub fn base_manifold(&self) -> Manifold<T> {
        match self {
            Eigenfunction::Torus(t) => Manifold::torus(t.d),
            Eigenfunction::Sphere(s) => Manifold::Sphere { n: s.n },
        }
    }

    /// Sectional curvature of the model (0 on tori, 1 on unit spheres of dimension ≥ 2).
    pub fn sectional_curvature(&self) -> T {
        self.base_manifold().curvature_bound()
    }
}

impl<T: Real> Field<T> for Eigenfunction<T> {
    fn manifold(&self) -> Manifold<T> {
        self.base_manifold()
    }
    fn value(&self, x: &[T]) -> T {
        match self {
            Eigenfunction::Torus(t) => t.value(x),
            Eigenfunction::Sphere(s) => s.poly.value(x),
        }
    }
    fn band_limit(&self) -> Option<BandLimit<T>> {
        Some(BandLimit::Wavenumber(self.eigenvalue().sqrt().max(T::one())))
    }
}

impl<T: Real> ScalarField<T> for Eigenfunction<T> {
    fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        match self {
            Eigenfunction::Torus(t) => t.eval(x),
            Eigenfunction::Sphere(s) => s.eval(x),
        }
    }
}

/// |∇_g φ|(x).
pub fn riemannian_gradient_norm<T: Real>(ef: &Eigenfunction<T>, x: &[T]) -> T {
    norm(&ef.eval(x).1)
}

/// Uniform random points: the fundamental domain on tori, the normalized Gaussian on
/// spheres, t ∈ [−1, 1] for lifts.
pub fn random_points<R: Rng + ?Sized>(m: &Manifold<f64>, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
    fn one<R: Rng + ?Sized>(m: &Manifold<f64>, rng: &mut R) -> Vec<f64> {
        match m {
            Manifold::Euclidean { dim } => (0..*dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
            Manifold::Torus { dim, period } => (0..*dim).map(|_| rng.random_range(0.0..*period)).collect(),
            Manifold::Sphere { n } => loop {
                let v: Vec<f64> = (0..=*n).map(|_| StandardNormal.sample(rng)).collect();
                let nv = norm(&v);
                if nv > 1e-6 {
                    break v.iter().map(|x| x / nv).collect();
                }
            },
            Manifold::Lift(b) => {
                let mut p = one(b, rng);
                p.push(rng.random_range(-1.0..1.0));
                p
            }
        }
    }
    (0..count).map(|_| one(m, rng)).collect()
}

/// Central-difference Laplace–Beltrami operator: the sum of second derivatives along
/// geodesics in orthonormal directions, which is exact in normal coordinates.
pub fn fd_laplacian<T: Real, F: Fn(&[T]) -> T + ?Sized>(f: &F, m: &Manifold<T>, x: &[T], h: T) -> T {
    let chart = Chart::new(m, x);
    let dim = m.intrinsic_dim();
    let f0 = f(x);
    let mut acc = T::zero();
    let mut v = vec![T::zero(); dim];
    for i in 0..dim {
        v[i] = h;
        let fp = f(&chart.map(&v));
        v[i] = -h;
        let fm = f(&chart.map(&v));
        v[i] = T::zero();
        acc = acc + (fp + fm - f0 - f0) / (h * h);
    }
    acc
}

/// Central-difference gradient, in ambient coordinates.
pub fn fd_gradient<T: Real, F: Fn(&[T]) -> T + ?Sized>(f: &F, m: &Manifold<T>, x: &[T], h: T) -> Vec<T> {
    let chart = Chart::new(m, x);
    let dim = m.intrinsic_dim();
    let mut g = vec![T::zero(); x.len()];
    let mut v = vec![T::zero(); dim];
    for i in 0..dim {
        v[i] = h;
        let fp = f(&chart.map(&v));
        v[i] = -h;
        let fm = f(&chart.map(&v));
        v[i] = T::zero();
        let di = (fp - fm) / (h + h);
        for (gj, ej) in g.iter_mut().zip(chart.direction(i)) {
            *gj = *gj + di * ej;
        }
    }
    g
}

/// Finite-difference verification of an eigenfunction at sample points.
#[derive(Debug, Clone, Serialize)]
pub struct EigenCheck {
    pub lambda: f64,
    pub sup: f64,
    /// max |Δφ + λφ| / (λ sup|φ|)
    pub max_residual: f64,
    /// max |∇φ − ∇_h φ| / (√λ sup|φ|)
    pub max_gradient_error: f64,
    pub points: usize,
}

pub fn check_eigenfunction(ef: &Eigenfunction<f64>, points: &[Vec<f64>], h: f64) -> Result<EigenCheck> {
    let lambda = ef.eigenvalue();
    let m = ef.base_manifold();
    let sup = sup_norm(ef, &GeodesicBall::whole(m.clone())?, &ResolutionPolicy::default())?.sup;
    if !(sup > 0.0) {
        return invalid("eigenfunction vanishes identically");
    }
    let f = |x: &[f64]| ef.value(x);
    let per_point: Vec<(f64, f64)> = points
        .par_iter()
        .map(|x| {
            let res = (fd_laplacian(&f, &m, x, h) + lambda * ef.value(x)).abs();
            let g = ef.eval(x).1;
            let gh = fd_gradient(&f, &m, x, h);
            let ge = g.iter().zip(&gh).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            (res, ge)
        })
        .collect();
    let scale = lambda.max(1.0) * sup;
    let gscale = lambda.sqrt().max(1.0) * sup;
    Ok(EigenCheck {
        lambda,
        sup,
        max_residual: per_point.iter().map(|p| p.0).fold(0.0, f64::max) / scale,
        max_gradient_error: per_point.iter().map(|p| p.1).fold(0.0, f64::max) / gscale,
        points: points.len(),
    })
}

/// u(x, t) = φ(x) e^{√λ t} on M × R.
#[derive(Debug, Clone)]
pub struct LiftedField<T: Real> {
    base: Eigenfunction<T>,
    sqrt_lambda: T,
}

pub fn lift<T: Real>(ef: &Eigenfunction<T>) -> Result<LiftedField<T>> {
    let lambda = ef.eigenvalue();
    if !(lambda > T::zero()) {
        return invalid("the lift needs a positive eigenvalue");
    }
    Ok(LiftedField { base: ef.clone(), sqrt_lambda: lambda.sqrt() })
}

impl<T: Real> LiftedField<T> {
    pub fn base(&self) -> &Eigenfunction<T> {
        &self.base
    }

    pub fn eigenvalue(&self) -> T {
        self.sqrt_lambda * self.sqrt_lambda
    }
}

impl<T: Real> Field<T> for LiftedField<T> {
    fn manifold(&self) -> Manifold<T> {
        Manifold::Lift(Box::new(self.base.base_manifold()))
    }
    fn value(&self, x: &[T]) -> T {
        let n = x.len() - 1;
        self.base.value(&x[..n]) * (self.sqrt_lambda * x[n]).exp()
    }
    fn band_limit(&self) -> Option<BandLimit<T>> {
        // e^{i m·x + |m| t} has complex wavevector of length √(2λ)
        Some(BandLimit::Wavenumber(self.sqrt_lambda * lit::<T>(2.0f64.sqrt())))
    }
    fn max_principle(&self) -> bool {
        self.base.base_manifold().is_flat()
    }
    fn taylor_components(&self, center: &[T], lo: usize, hi: usize, y: &[T]) -> Option<T> {
        let Eigenfunction::Torus(tf) = &self.base else {
            return None;
        };
        let n = tf.d;
        if center.len() != n + 1 || y.len() != n + 1 || lo > hi {
            return None;
        }
        let mut total = 0.0f64;
        for md in &tf.modes {
            let mn = (tf.norm2 as f64).sqrt();
            // mode = Re(C e^{w}) with w = i m·x + |m| t
            let mut ph = 0.0;
            let mut wy = 0.0;
            for j in 0..n {
                ph += md.m[j] as f64 * to_f64(center[j]);
                wy += md.m[j] as f64 * to_f64(y[j]);
            }
            let c = Complex::new(to_f64(md.cos), -to_f64(md.sin)) * Complex::from_polar((mn * to_f64(center[n])).exp(), ph);
            let w = Complex::new(mn * to_f64(y[n]), wy);
            total += (c * exp_series_band(w, lo, hi)).re;
        }
        Some(lit(total))
    }
}

/// Σ_{k=lo}^{hi} w^k / k!, summed without cancellation.
fn exp_series_band(w: Complex<f64>, lo: usize, hi: usize) -> Complex<f64> {
    if w.norm() == 0.0 {
        return if lo == 0 { Complex::new(1.0, 0.0) } else { Complex::new(0.0, 0.0) };
    }
    let mut term = if lo == 0 { Complex::new(1.0, 0.0) } else { (w.ln() * lo as f64 - ln_factorial(lo)).exp() };
    let mut sum = term;
    for k in lo + 1..=hi {
        term = term * w / k as f64;
        sum += term;
        if k as f64 > 2.0 * w.norm() && term.norm() < 1e-18 * sum.norm() {
            break;
        }
    }
    sum
}

impl<T: Real> ScalarField<T> for LiftedField<T> {
    fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        let n = x.len() - 1;
        let e = (self.sqrt_lambda * x[n]).exp();
        let (v, g) = self.base.eval(&x[..n]);
        let mut grad: Vec<T> = g.iter().map(|&gi| gi * e).collect();
        grad.push(self.sqrt_lambda * v * e);
        (v * e, grad)
    }
    fn is_harmonic(&self) -> bool {
        true
    }
}

/// max |Δu| / (λ sup|φ| e^{√λ t}) at the given points of M × R.
pub fn lift_harmonicity_residual(lf: &LiftedField<f64>, points: &[Vec<f64>], h: f64) -> Result<f64> {
    let m = lf.manifold();
    let base = lf.base.base_manifold();
    let sup = sup_norm(&lf.base, &GeodesicBall::whole(base)?, &ResolutionPolicy::default())?.sup;
    let lambda = lf.eigenvalue();
    let f = |x: &[f64]| lf.value(x);
    Ok(points
        .par_iter()
        .map(|x| {
            let t = x[x.len() - 1];
            fd_laplacian(&f, &m, x, h).abs() / (lambda * sup * (lf.sqrt_lambda * t).exp())
        })
        .reduce(|| 0.0, f64::max))
}

/// q = |∇φ|² + (λ/2) φ² as a field.
pub struct DongQ<'a, T: Real>(pub &'a Eigenfunction<T>);

impl<T: Real> Field<T> for DongQ<'_, T> {
    fn manifold(&self) -> Manifold<T> {
        self.0.base_manifold()
    }
    fn value(&self, x: &[T]) -> T {
        let (v, g) = self.0.eval(x);
        dot(&g, &g) + self.0.eigenvalue() / lit(2.0) * v * v
    }
    fn band_limit(&self) -> Option<BandLimit<T>> {
        Some(BandLimit::Wavenumber(lit::<T>(2.0) * self.0.eigenvalue().sqrt().max(T::one())))
    }
}

fn require_surface<T: Real>(ef: &Eigenfunction<T>) -> Result<()> {
    let m = ef.base_manifold();
    if m.intrinsic_dim() != 2 {
        return Err(Error::Domain(format!("Dong's quantities are two-dimensional; got {}", m.label())));
    }
    Ok(())
}

/// q(x) = |∇φ(x)|² + (λ/2) φ(x)².
pub fn dong_q<T: Real>(ef: &Eigenfunction<T>, x: &[T]) -> Result<T> {
    require_surface(ef)?;
    Ok(DongQ(ef).value(x))
}

/// Outcome of the Δ log q ≥ −λ + 2 min{K, 0} check.
#[derive(Debug, Clone, Serialize)]
pub struct LogQReport {
    pub lambda: f64,
    pub curvature: f64,
    /// −λ + 2 min{K, 0}
    pub bound: f64,
    /// min over retained points of Δ log q − bound
    pub min_margin: f64,
    pub retained: usize,
    /// Indices of points skipped because q < 1e−8 sup q.
    pub skipped: Vec<usize>,
    pub laplacians: Vec<f64>,
}

pub fn dong_log_q_laplacian_check(ef: &Eigenfunction<f64>, points: &[Vec<f64>], h_fd: f64) -> Result<LogQReport> {
    require_surface(ef)?;
    let m = ef.base_manifold();
    let q = DongQ(ef);
    let sup_q = sup_norm(&q, &GeodesicBall::whole(m.clone())?, &ResolutionPolicy::default())?.sup;
    let thresh = 1e-8 * sup_q;
    let lambda = ef.eigenvalue();
    let k = ef.sectional_curvature();
    let bound = -lambda + 2.0 * k.min(0.0);
    let logq = |x: &[f64]| q.value(x).ln();
    let lap: Vec<Option<f64>> = points
        .par_iter()
        .map(|x| {
            // the stencil must stay clear of zeros of q as well
            let chart = Chart::new(&m, x);
            let mut v = vec![0.0; 2];
            let mut ok = q.value(x) >= thresh;
            for i in 0..2 {
                for s in [h_fd, -h_fd] {
                    v[i] = s;
                    ok &= q.value(&chart.map(&v)) >= thresh;
                    v[i] = 0.0;
                }
            }
            ok.then(|| fd_laplacian(&logq, &m, x, h_fd))
        })
        .collect();
    let skipped: Vec<usize> = lap.iter().enumerate().filter(|(_, l)| l.is_none()).map(|(i, _)| i).collect();
    let laplacians: Vec<f64> = lap.into_iter().flatten().collect();
    Ok(LogQReport {
        lambda,
        curvature: k,
        bound,
        min_margin: laplacians.iter().map(|l| l - bound).fold(f64::INFINITY, f64::min),
        retained: laplacians.len(),
        skipped,
        laplacians,
    })
}

/// The data of Dong's argument around one eigenfunction.
#[derive(Debug, Clone)]
pub struct DongState<'a> {
    pub eigenfunction: &'a Eigenfunction<f64>,
    /// Bound H on |sectional curvature|.
    pub curvature_bound: f64,
}

impl<'a> DongState<'a> {
    pub fn new(ef: &'a Eigenfunction<f64>) -> Result<Self> {
        require_surface(ef)?;
        Ok(DongState { eigenfunction: ef, curvature_bound: ef.base_manifold().curvature_bound() })
    }

    pub fn with_curvature_bound(mut self, h: f64) -> Result<Self> {
        if !(h >= 0.0) {
            return invalid("curvature bound must be nonnegative");
        }
        self.curvature_bound = h;
        Ok(self)
    }

    /// ρ₀(r) = sinh(√H r)/√H, or r when H = 0.
    pub fn rho0(&self, r: f64) -> f64 {
        let h = self.curvature_bound;
        if h == 0.0 {
            r
        } else {
            let s = h.sqrt();
            (s * r).sinh() / s
        }
    }

    /// ∫_a^b dτ/ρ₀(τ) by 16-point Gauss–Legendre (weights sum to one).
    pub fn t_between(&self, a: f64, b: f64) -> Result<f64> {
        if !(a > 0.0 && b > 0.0) {
            return invalid("t(r) needs positive radii");
        }
        let rule = gauss_legendre(16)?;
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        Ok(rule.nodes.iter().zip(&rule.weights).map(|(&x, &w)| w * (b - a) / self.rho0(mid + half * x)).sum())
    }

    /// M(r) = max of q over B(x₀, r).
    pub fn m_of_r(&self, x0: &[f64], r: f64, policy: &ResolutionPolicy) -> Result<f64> {
        let ball = GeodesicBall::new(self.eigenfunction.base_manifold(), x0.to_vec(), r)?;
        Ok(sup_norm(&DongQ(self.eigenfunction), &ball, policy)?.sup)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DongRow {
    pub r: f64,
    pub t: f64,
    pub m: f64,
    pub f: f64,
    /// d²F/dt² by nonuniform central differences (interior rows only).
    pub second_diff: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DongProfile {
    pub lambda: f64,
    pub center: Vec<f64>,
    pub rows: Vec<DongRow>,
}

impl DongProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,t,M,F,second_diff\n");
        for row in &self.rows {
            let sd = row.second_diff.map(|v| format!("{v:.12e}")).unwrap_or_default();
            s.push_str(&format!("{:.12e},{:.12e},{:.12e},{:.12e},{sd}\n", row.r, row.t, row.m, row.f));
        }
        s
    }

    /// min second difference divided by λ ρ₀(r_max)².
    pub fn convexity_constant(&self, state: &DongState) -> Option<f64> {
        let rmax = self.rows.last()?.r;
        let scale = self.lambda * state.rho0(rmax).powi(2);
        self.rows.iter().filter_map(|r| r.second_diff).map(|v| v / scale).reduce(f64::min)
    }
}

pub fn dong_f_profile(state: &DongState, x0: &[f64], r_grid: &[f64], policy: &ResolutionPolicy) -> Result<DongProfile> {
    if r_grid.is_empty() {
        return invalid("radius grid is empty");
    }
    if r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return invalid("radius grid must be positive and strictly increasing");
    }
    let raw: Vec<f64> = r_grid.par_iter().map(|&r| state.m_of_r(x0, r, policy)).collect::<Result<_>>()?;
    let mut rows = Vec::with_capacity(r_grid.len());
    let (mut t, mut m) = (0.0, 0.0f64);
    for (i, (&r, &mr)) in r_grid.iter().zip(&raw).enumerate() {
        if i > 0 {
            t += state.t_between(r_grid[i - 1], r)?;
        }
        // balls are nested, so M is a running maximum
        m = m.max(mr);
        rows.push(DongRow { r, t, m, f: m.ln(), second_diff: None });
    }
    for i in 1..rows.len().saturating_sub(1) {
        let (a, b, c) = (&rows[i - 1], &rows[i], &rows[i + 1]);
        let sd = 2.0 * ((c.f - b.f) / (c.t - b.t) - (b.f - a.f) / (b.t - a.t)) / (c.t - a.t);
        rows[i].second_diff = Some(sd);
    }
    Ok(DongProfile { lambda: state.eigenfunction.eigenvalue(), center: x0.to_vec(), rows })
}

/// F(2r) − F(r) for each r.
pub fn dong_doubling(state: &DongState, x0: &[f64], radii: &[f64], policy: &ResolutionPolicy) -> Result<Vec<f64>> {
    radii
        .par_iter()
        .map(|&r| Ok(state.m_of_r(x0, 2.0 * r, policy)?.ln() - state.m_of_r(x0, r, policy)?.ln()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sin_mode(m: Vec<i64>) -> TorusMode<f64> {
        TorusMode { m, cos: 0.0, sin: 1.0 }
    }

    #[test]
    fn torus_basics() {
        let ef = make_torus_eigenfunction(2, vec![sin_mode(vec![3, 0])]).unwrap();
        assert_eq!(ef.eigenvalue(), 9.0);
        assert!((riemannian_gradient_norm(&ef, &[0.0, 0.0]) - 3.0).abs() < 1e-15);
        let two = make_torus_eigenfunction(2, vec![sin_mode(vec![3, 4]), sin_mode(vec![5, 0])]).unwrap();
        assert_eq!(two.eigenvalue(), 25.0);
        let mixed = make_torus_eigenfunction(2, vec![sin_mode(vec![3, 0]), sin_mode(vec![1, 0])]);
        assert!(matches!(mixed, Err(Error::MixedEigenvalues(_))));
    }

    #[test]
    fn lattice_vectors_of_fifty() {
        let v = TorusEigenfunction::<f64>::lattice_vectors(2, 50);
        assert_eq!(v.len(), 6);
        assert!(v.iter().all(|m| norm2(m) == 50));
    }

    #[test]
    fn sphere_eigenvalues() {
        let z = SphereEigenfunction::<f64>::zonal(2, 1).unwrap();
        let ef = Eigenfunction::Sphere(z);
        assert_eq!(ef.eigenvalue(), 2.0);
        let th = 0.7f64;
        assert!((ef.value(&[th.cos(), th.sin(), 0.0]) - th.cos()).abs() < 1e-14);
        assert!((riemannian_gradient_norm(&ef, &[0.0, 1.0, 0.0]) - 1.0).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(Eigenfunction::Sphere(SphereEigenfunction::<f64>::random(2, 4, &mut rng).unwrap()).eigenvalue(), 20.0);
        assert_eq!(Eigenfunction::Sphere(SphereEigenfunction::<f64>::random(3, 2, &mut rng).unwrap()).eigenvalue(), 8.0);
        assert!(SphereEigenfunction::<f64>::new(2, 2, vec![1.0; 4]).is_err());
    }

    #[test]
    fn q_values() {
        let ef = make_torus_eigenfunction(2, vec![sin_mode(vec![2, 0])]).unwrap();
        assert!((dong_q(&ef, &[0.0, 0.0]).unwrap() - 4.0).abs() < 1e-14);
        assert!((dong_q(&ef, &[std::f64::consts::FRAC_PI_4, 1.3]).unwrap() - 2.0).abs() < 1e-14);
        let z = Eigenfunction::Sphere(SphereEigenfunction::<f64>::zonal(2, 1).unwrap());
        assert!((dong_q(&z, &[1.0, 0.0, 0.0]).unwrap() - 1.0).abs() < 1e-14);
        let t3 = make_torus_eigenfunction(3, vec![sin_mode(vec![1, 0, 0])]).unwrap();
        assert!(dong_q(&t3, &[0.0; 3]).is_err());
    }

    #[test]
    fn rho0_series() {
        let ef = Eigenfunction::Sphere(SphereEigenfunction::<f64>::zonal(2, 3).unwrap());
        let st = DongState::new(&ef).unwrap();
        for r in [0.01, 0.1, 0.3] {
            assert!((st.rho0(r) - r).abs() <= r * r * r);
        }
        // ∫ dτ/τ = log ratio in the flat case
        let st0 = st.with_curvature_bound(0.0).unwrap();
        assert!((st0.t_between(0.1, 0.2).unwrap() - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn exp_band_matches_direct_sum() {
        let w = Complex::new(1.3, -0.4);
        let direct: Complex<f64> = (3..=9).map(|k| w.powu(k as u32) / (2..=k).map(|j| j as f64).product::<f64>()).sum();
        assert!((exp_series_band(w, 3, 9) - direct).norm() < 1e-14);
        let all = exp_series_band(w, 0, 60);
        assert!((all - w.exp()).norm() < 1e-14);
    }
}
