//! Manifolds, geodesic balls and the field traits shared by every module.

use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, lit, norm, Real};
use crate::sphharm::{HarmonicExpansion, Jet};

/// Model manifolds. Points are given in ambient coordinates: R^dim for Euclidean space
/// and tori, the unit sphere in R^{n+1}, and (base point, t) for lifts.
#[derive(Debug, Clone, PartialEq)]
pub enum Manifold<T> {
    Euclidean { dim: usize },
    Torus { dim: usize, period: T },
    Sphere { n: usize },
    Lift(Box<Manifold<T>>),
}

impl<T: Real> Manifold<T> {
    pub fn torus(dim: usize) -> Self {
        Manifold::Torus { dim, period: T::PI() + T::PI() }
    }

    /// Number of ambient coordinates of a point.
    pub fn ambient_dim(&self) -> usize {
        match self {
            Manifold::Euclidean { dim } | Manifold::Torus { dim, .. } => *dim,
            Manifold::Sphere { n } => n + 1,
            Manifold::Lift(b) => b.ambient_dim() + 1,
        }
    }

    pub fn intrinsic_dim(&self) -> usize {
        match self {
            Manifold::Euclidean { dim } | Manifold::Torus { dim, .. } => *dim,
            Manifold::Sphere { n } => *n,
            Manifold::Lift(b) => b.intrinsic_dim() + 1,
        }
    }

    /// True when charts are plain translations, so Euclidean calculus applies.
    pub fn is_flat(&self) -> bool {
        match self {
            Manifold::Euclidean { .. } | Manifold::Torus { .. } => true,
            Manifold::Sphere { .. } => false,
            Manifold::Lift(b) => b.is_flat(),
        }
    }

    /// Sectional-curvature bound H (0 for flat models, 1 for unit spheres).
    pub fn curvature_bound(&self) -> T {
        match self {
            Manifold::Sphere { n } if *n >= 2 => T::one(),
            Manifold::Lift(b) => b.curvature_bound(),
            _ => T::zero(),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Manifold::Euclidean { dim } => format!("euclidean:{dim}"),
            Manifold::Torus { dim, .. } => format!("torus:{dim}"),
            Manifold::Sphere { n } => format!("sphere:{n}"),
            Manifold::Lift(b) => format!("lift({})", b.label()),
        }
    }

    /// Parses `torus:2`, `sphere:2`, `euclidean:3`, optionally wrapped in `lift(...)`.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(inner) = s.strip_prefix("lift(").and_then(|r| r.strip_suffix(')')) {
            return Ok(Manifold::Lift(Box::new(Self::parse(inner)?)));
        }
        let (kind, dim) = s.split_once(':').ok_or_else(|| Error::Config(format!("manifold `{s}` needs the form kind:dim")))?;
        let dim: usize = dim.parse().map_err(|_| Error::Config(format!("bad manifold dimension in `{s}`")))?;
        if dim == 0 {
            return Err(Error::Config("manifold dimension must be positive".into()));
        }
        match kind {
            "torus" => Ok(Self::torus(dim)),
            "sphere" => Ok(Manifold::Sphere { n: dim }),
            "euclidean" => Ok(Manifold::Euclidean { dim }),
            _ => Err(Error::Config(format!("unknown manifold kind `{kind}`"))),
        }
    }

    pub fn contains(&self, x: &[T], tol: T) -> bool {
        if x.len() != self.ambient_dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            Manifold::Sphere { .. } => (norm(x) - T::one()).abs() <= tol,
            Manifold::Lift(b) => b.contains(&x[..x.len() - 1], tol),
            _ => true,
        }
    }

    /// Geodesic distance.
    pub fn distance(&self, a: &[T], b: &[T]) -> T {
        match self {
            Manifold::Euclidean { .. } => a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum::<T>().sqrt(),
            Manifold::Torus { period, .. } => a
                .iter()
                .zip(b)
                .map(|(&x, &y)| {
                    let mut d = (x - y) % *period;
                    if d < T::zero() {
                        d = d + *period;
                    }
                    let d = d.min(*period - d);
                    d * d
                })
                .sum::<T>()
                .sqrt(),
            Manifold::Sphere { .. } => dot(a, b).max(-T::one()).min(T::one()).acos(),
            Manifold::Lift(base) => {
                let n = a.len() - 1;
                let db = base.distance(&a[..n], &b[..n]);
                let dt = a[n] - b[n];
                (db * db + dt * dt).sqrt()
            }
        }
    }
}

/// Band-limit declaration used to size sampling grids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandLimit<T> {
    /// Polynomial-like of the given degree.
    Degree(usize),
    /// Oscillatory with wavenumber at most B (wavelength ≥ 1/B).
    Wavenumber(T),
}

impl<T: Real> BandLimit<T> {
    /// Oscillation wavenumber on a region of radius r.
    pub fn wavenumber(&self, r: T) -> T {
        match *self {
            BandLimit::Degree(k) => lit::<T>(k.max(1) as f64) / r,
            BandLimit::Wavenumber(b) => b,
        }
    }

    /// Polynomial degree that captures the field on a ball of radius r to double precision.
    pub fn effective_degree(&self, r: T) -> usize {
        match *self {
            BandLimit::Degree(k) => k,
            BandLimit::Wavenumber(b) => {
                let br = (b * r).to_f64().unwrap_or(0.0).max(0.0);
                (br + 8.0 * br.sqrt() + 16.0).ceil() as usize
            }
        }
    }
}

/// Structural views that let heavy operations take exact shortcuts.
pub enum Structure<'a, T: Real> {
    /// y ↦ expansion(y − origin).
    Expansion { expansion: &'a HarmonicExpansion<T>, origin: Option<&'a [T]> },
    /// y ↦ |∇ expansion|(y − origin).
    ExpansionGradientNorm { expansion: &'a HarmonicExpansion<T>, origin: Option<&'a [T]> },
}

/// A real function on a manifold.
pub trait Field<T: Real>: Sync {
    fn manifold(&self) -> Manifold<T>;
    fn value(&self, x: &[T]) -> T;
    fn band_limit(&self) -> Option<BandLimit<T>> {
        None
    }
    /// True when |value| obeys the maximum principle on Euclidean-chart balls
    /// (harmonic functions and their gradient norms).
    fn max_principle(&self) -> bool {
        false
    }
    fn structure(&self) -> Option<Structure<'_, T>> {
        None
    }
    /// Sum of the homogeneous Taylor components of degrees `lo..=hi` about `center`,
    /// evaluated at `center + y`, for fields that know them in closed form. Used where the
    /// difference between a field and its truncation is far below rounding of the field.
    fn taylor_components(&self, _center: &[T], _lo: usize, _hi: usize, _y: &[T]) -> Option<T> {
        None
    }
}

/// A field with an analytic gradient. On spheres the gradient is tangential, in ambient
/// coordinates.
pub trait ScalarField<T: Real>: Field<T> {
    fn eval(&self, x: &[T]) -> (T, Vec<T>);
    fn jet(&self, _x: &[T]) -> Option<Jet<T>> {
        None
    }
    /// True when the field is harmonic for the manifold metric.
    fn is_harmonic(&self) -> bool {
        false
    }
}

impl<T: Real> Field<T> for HarmonicExpansion<T> {
    fn manifold(&self) -> Manifold<T> {
        Manifold::Euclidean { dim: self.d() }
    }
    fn value(&self, x: &[T]) -> T {
        HarmonicExpansion::value(self, x)
    }
    fn band_limit(&self) -> Option<BandLimit<T>> {
        Some(BandLimit::Degree(self.max_degree().unwrap_or(0)))
    }
    fn max_principle(&self) -> bool {
        true
    }
    fn structure(&self) -> Option<Structure<'_, T>> {
        Some(Structure::Expansion { expansion: self, origin: None })
    }
}

impl<T: Real> ScalarField<T> for HarmonicExpansion<T> {
    fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        HarmonicExpansion::eval(self, x)
    }
    fn jet(&self, x: &[T]) -> Option<Jet<T>> {
        Some(HarmonicExpansion::jet(self, x))
    }
    fn is_harmonic(&self) -> bool {
        true
    }
}

/// |∇f| as a field.
pub struct GradientNorm<'a, F: ?Sized>(pub &'a F);

impl<'a, T: Real, F: ScalarField<T> + ?Sized> Field<T> for GradientNorm<'a, F> {
    fn manifold(&self) -> Manifold<T> {
        self.0.manifold()
    }
    fn value(&self, x: &[T]) -> T {
        norm(&self.0.eval(x).1)
    }
    fn band_limit(&self) -> Option<BandLimit<T>> {
        self.0.band_limit()
    }
    fn max_principle(&self) -> bool {
        // |∇h| is subharmonic when h is harmonic in Euclidean coordinates
        self.0.max_principle() && self.0.is_harmonic() && self.0.manifold().is_flat()
    }
    fn structure(&self) -> Option<Structure<'_, T>> {
        match self.0.structure()? {
            Structure::Expansion { expansion, origin } => Some(Structure::ExpansionGradientNorm { expansion, origin }),
            Structure::ExpansionGradientNorm { .. } => None,
        }
    }
}

/// y ↦ f(shift + y) on Euclidean space.
pub struct Translated<'a, F: ?Sized> {
    pub inner: &'a F,
    pub shift: Vec<f64>,
}

impl<'a, F: ScalarField<f64> + ?Sized> Translated<'a, F> {
    fn shifted(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.shift).map(|(a, b)| a + b).collect()
    }
}

impl<'a, F: ScalarField<f64> + ?Sized> Field<f64> for Translated<'a, F> {
    fn manifold(&self) -> Manifold<f64> {
        Manifold::Euclidean { dim: self.shift.len() }
    }
    fn value(&self, y: &[f64]) -> f64 {
        self.inner.value(&self.shifted(y))
    }
    fn band_limit(&self) -> Option<BandLimit<f64>> {
        self.inner.band_limit()
    }
    fn max_principle(&self) -> bool {
        self.inner.max_principle() && self.inner.manifold().is_flat()
    }
}

impl<'a, F: ScalarField<f64> + ?Sized> ScalarField<f64> for Translated<'a, F> {
    fn eval(&self, y: &[f64]) -> (f64, Vec<f64>) {
        self.inner.eval(&self.shifted(y))
    }
    fn is_harmonic(&self) -> bool {
        self.inner.is_harmonic()
    }
}

/// Closure-backed field, handy for one-off experiments and tests.
pub struct FnField<T, V, G> {
    pub manifold: Manifold<T>,
    pub value: V,
    pub gradient: G,
    pub band: Option<BandLimit<T>>,
}

impl<T, V, G> Field<T> for FnField<T, V, G>
where
    T: Real,
    V: Fn(&[T]) -> T + Sync,
    G: Fn(&[T]) -> Vec<T> + Sync,
{
    fn manifold(&self) -> Manifold<T> {
        self.manifold.clone()
    }
    fn value(&self, x: &[T]) -> T {
        (self.value)(x)
    }
    fn band_limit(&self) -> Option<BandLimit<T>> {
        self.band
    }
}

impl<T, V, G> ScalarField<T> for FnField<T, V, G>
where
    T: Real,
    V: Fn(&[T]) -> T + Sync,
    G: Fn(&[T]) -> Vec<T> + Sync,
{
    fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        ((self.value)(x), (self.gradient)(x))
    }
}

/// Metric ball B_g(center, radius), or the whole manifold.
#[derive(Debug, Clone)]
pub struct GeodesicBall<T> {
    pub manifold: Manifold<T>,
    pub center: Vec<T>,
    pub radius: T,
    pub whole: bool,
}

/// Orthonormal basis of the tangent space of S^n at `c`.
pub fn sphere_tangent_basis<T: Real>(c: &[T]) -> Vec<Vec<T>> {
    let m = c.len();
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(m - 1);
    // start from coordinate axes ordered by how orthogonal they are to c
    let mut axes: Vec<usize> = (0..m).collect();
    axes.sort_by(|&i, &j| c[i].abs().partial_cmp(&c[j].abs()).unwrap());
    for &i in &axes {
        if basis.len() == m - 1 {
            break;
        }
        let mut v = vec![T::zero(); m];
        v[i] = T::one();
        for b in std::iter::once(c).chain(basis.iter().map(|b| b.as_slice())) {
            let p = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vi, &bi)| *vi = *vi - p * bi);
        }
        let n = norm(&v);
        if n > lit(1e-8) {
            v.iter_mut().for_each(|vi| *vi = *vi / n);
            basis.push(v);
        }
    }
    basis
}

/// exp_c(v) on the unit sphere, v tangent in ambient coordinates.
pub fn sphere_exp<T: Real>(c: &[T], v: &[T]) -> Vec<T> {
    let th = norm(v);
    if th == T::zero() {
        return c.to_vec();
    }
    let (s, co) = th.sin_cos();
    c.iter().zip(v).map(|(&ci, &vi)| co * ci + s * vi / th).collect()
}

impl<T: Real> GeodesicBall<T> {
    pub fn new(manifold: Manifold<T>, center: Vec<T>, radius: T) -> Result<Self> {
        let ball = GeodesicBall { manifold, center, radius, whole: false };
        ball.validate()?;
        Ok(ball)
    }

    /// The whole manifold (tori and spheres only).
    pub fn whole(manifold: Manifold<T>) -> Result<Self> {
        let (center, radius) = match &manifold {
            Manifold::Torus { dim, period } => (vec![T::zero(); *dim], *period * lit::<T>((*dim as f64).sqrt() / 2.0)),
            Manifold::Sphere { n } => {
                let mut c = vec![T::zero(); n + 1];
                c[0] = T::one();
                (c, T::PI())
            }
            _ => return invalid("only compact model manifolds have a whole-manifold region"),
        };
        Ok(GeodesicBall { manifold, center, radius, whole: true })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > T::zero()) || !self.radius.is_finite() {
            return invalid("ball radius must be positive");
        }
        if !self.manifold.contains(&self.center, lit(1e-9)) {
            return Err(Error::Domain(format!("center {:?} is not on {}", self.center, self.manifold.label())));
        }
        let limit = injectivity_limit(&self.manifold);
        if let Some(l) = limit {
            if !(self.radius < l) {
                return Err(Error::Domain(format!(
                    "radius {} exceeds the injectivity limit {} on {}",
                    self.radius,
                    l,
                    self.manifold.label()
                )));
            }
        }
        Ok(())
    }

    pub fn chart_dim(&self) -> usize {
        self.manifold.intrinsic_dim()
    }

    pub fn distance_to_center(&self, x: &[T]) -> T {
        self.manifold.distance(&self.center, x)
    }

    /// Maps chart coordinates v (|v| ≤ radius) to a manifold point.
    pub fn chart(&self) -> Chart<T> {
        Chart::new(&self.manifold, &self.center)
    }
}

fn injectivity_limit<T: Real>(m: &Manifold<T>) -> Option<T> {
    match m {
        Manifold::Euclidean { .. } => None,
        Manifold::Torus { period, .. } => Some(*period / lit(2.0)),
        Manifold::Sphere { .. } => Some(T::PI() * lit(0.99)),
        Manifold::Lift(b) => injectivity_limit(b),
    }
}

/// Normal-coordinate chart around a center point.
#[derive(Debug, Clone)]
pub struct Chart<T> {
    center: Vec<T>,
    /// Tangent basis for a spherical factor (empty for flat charts).
    tangent: Vec<Vec<T>>,
    /// Number of leading ambient coordinates on the sphere factor.
    sphere_len: usize,
}

impl<T: Real> Chart<T> {
    pub fn new(m: &Manifold<T>, center: &[T]) -> Self {
        let sphere_len = match m {
            Manifold::Sphere { n } => n + 1,
            Manifold::Lift(b) => match b.as_ref() {
                Manifold::Sphere { n } => n + 1,
                _ => 0,
            },
            _ => 0,
        };
        let tangent = if sphere_len > 0 { sphere_tangent_basis(&center[..sphere_len]) } else { vec![] };
        Chart { center: center.to_vec(), tangent, sphere_len }
    }

    /// Ambient unit vector of chart axis `i` at the center.
    pub fn direction(&self, i: usize) -> Vec<T> {
        let n = self.tangent.len();
        let mut e = vec![T::zero(); self.center.len()];
        if i < n {
            e[..self.sphere_len].copy_from_slice(&self.tangent[i]);
        } else {
            e[self.sphere_len + i - n] = T::one();
        }
        e
    }

    pub fn map(&self, v: &[T]) -> Vec<T> {
        if self.sphere_len == 0 {
            return self.center.iter().zip(v).map(|(&c, &vi)| c + vi).collect();
        }
        let n = self.tangent.len();
        let mut w = vec![T::zero(); self.sphere_len];
        for (b, &vi) in self.tangent.iter().zip(v) {
            w.iter_mut().zip(b).for_each(|(wi, &bi)| *wi = *wi + vi * bi);
        }
        let mut p = sphere_exp(&self.center[..self.sphere_len], &w);
        for (j, &vj) in v.iter().enumerate().skip(n) {
            p.push(self.center[self.sphere_len + j - n] + vj);
        }
        p
    }
}
