//! Product quadrature on spheres and balls.
//!
//! Sphere rules are nested: each polar level of S^{D-1} uses a Gauss–Jacobi rule in
//! t = cos θ for the weight (1 − t²)^{(D−3)/2}, and the innermost circle uses equally
//! spaced azimuths. For S² the polar rule is plain Gauss–Legendre.

use crate::error::{invalid, Result};
use crate::scalar::{from_usize, lit, Real};
use crate::special::{ball_volume, gauss_jacobi, sphere_area};

/// Flattened quadrature rule. Weights are averaged (they sum to one); `measure` turns
/// averages into integrals.
#[derive(Debug, Clone)]
pub struct Quadrature<T> {
    pub dim: usize,
    /// Row-major nodes, `dim` coordinates each.
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
    pub measure: T,
    pub exactness: usize,
}

impl<T: Real> Quadrature<T> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[T] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn average<F: Fn(&[T]) -> T>(&self, f: F) -> T {
        (0..self.len()).map(|i| self.weights[i] * f(self.node(i))).sum()
    }

    pub fn integrate<F: Fn(&[T]) -> T>(&self, f: F) -> T {
        self.measure * self.average(f)
    }
}

/// Product grid on the unit sphere S^{d−1} ⊂ R^d.
#[derive(Debug, Clone)]
pub struct SphereGrid<T> {
    pub d: usize,
    /// Polar cosines for levels of dimension d, d−1, …, 3.
    pub polar: Vec<Vec<T>>,
    pub polar_w: Vec<Vec<T>>,
    pub n_phi: usize,
    pub phi0: T,
    /// Polynomial exactness when built as a Gauss rule.
    pub exactness: Option<usize>,
}

impl<T: Real> SphereGrid<T> {
    /// Gauss product rule exact for spherical polynomials of degree ≤ `order`.
    pub fn gauss(d: usize, order: usize) -> Result<Self> {
        if d < 2 {
            return invalid("sphere rules need d ≥ 2");
        }
        if order < 1 {
            return invalid("quadrature order must be at least 1");
        }
        let n = order / 2 + 1;
        let mut polar = Vec::new();
        let mut polar_w = Vec::new();
        for dim in (3..=d).rev() {
            let a = (dim as f64 - 3.0) / 2.0;
            let rule = gauss_jacobi(n, a, a)?;
            polar.push(rule.nodes.iter().map(|&x| lit(x)).collect());
            polar_w.push(rule.weights.iter().map(|&x| lit(x)).collect());
        }
        Ok(SphereGrid { d, polar, polar_w, n_phi: order + 1, phi0: T::zero(), exactness: Some(order) })
    }

    /// Scan grid with angular spacing at most `spacing` (radians), polar angles at cell
    /// midpoints. Weights are uniform and carry no exactness.
    pub fn uniform(d: usize, spacing: f64, min_phi: usize) -> Result<Self> {
        if d < 2 || !(spacing > 0.0) {
            return invalid("scan grid needs d ≥ 2 and positive spacing");
        }
        let nt = (std::f64::consts::PI / spacing).ceil().max(2.0) as usize;
        let np = ((2.0 * std::f64::consts::PI / spacing).ceil() as usize).max(min_phi).max(3);
        let mut polar = Vec::new();
        let mut polar_w = Vec::new();
        for _ in 3..=d {
            let t: Vec<T> = (0..nt)
                .map(|i| lit((std::f64::consts::PI * (i as f64 + 0.5) / nt as f64).cos()))
                .collect();
            polar.push(t);
            polar_w.push(vec![lit(1.0 / nt as f64); nt]);
        }
        Ok(SphereGrid { d, polar, polar_w, n_phi: np, phi0: T::zero(), exactness: None })
    }

    /// Number of points in the sub-grid that starts at level `l`.
    pub fn points_from(&self, l: usize) -> usize {
        self.polar[l..].iter().map(|p| p.len()).product::<usize>() * self.n_phi
    }

    pub fn len(&self) -> usize {
        self.points_from(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn phi(&self, j: usize) -> T {
        self.phi0 + lit::<T>(2.0 * std::f64::consts::PI) * from_usize::<T>(j) / from_usize::<T>(self.n_phi)
    }

    /// Unit vector and averaged weight of point `idx`.
    pub fn point(&self, mut idx: usize, out: &mut [T]) -> T {
        let levels = self.polar.len();
        let mut ids = vec![0usize; levels];
        let j = idx % self.n_phi;
        idx /= self.n_phi;
        for l in (0..levels).rev() {
            let n = self.polar[l].len();
            ids[l] = idx % n;
            idx /= n;
        }
        let mut scale = T::one();
        let mut w = T::one() / from_usize::<T>(self.n_phi);
        for l in 0..levels {
            let t = self.polar[l][ids[l]];
            out[l] = scale * t;
            scale = scale * (T::one() - t * t).max(T::zero()).sqrt();
            w = w * self.polar_w[l][ids[l]];
        }
        let phi = self.phi(j);
        out[self.d - 2] = scale * phi.cos();
        out[self.d - 1] = scale * phi.sin();
        w
    }

    pub fn to_quadrature(&self) -> Quadrature<T> {
        let n = self.len();
        let mut nodes = vec![T::zero(); n * self.d];
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            weights.push(self.point(i, &mut nodes[i * self.d..(i + 1) * self.d]));
        }
        Quadrature { dim: self.d, nodes, weights, measure: lit(sphere_area(self.d)), exactness: self.exactness.unwrap_or(0) }
    }
}

/// Averaged Gauss product rule on the unit sphere S^{d−1}.
pub fn sphere_rule<T: Real>(d: usize, order: usize) -> Result<Quadrature<T>> {
    Ok(SphereGrid::gauss(d, order)?.to_quadrature())
}

/// Radial Gauss rule on [0, r] for the weight ρ^{d−1}, normalized to sum one.
pub fn radial_rule<T: Real>(d: usize, radial_order: usize, r: T) -> Result<(Vec<T>, Vec<T>)> {
    if radial_order < 1 {
        return invalid("radial order must be at least 1");
    }
    let rule = gauss_jacobi(radial_order / 2 + 1, 0.0, d as f64 - 1.0)?;
    let half = r / lit(2.0);
    let nodes = rule.nodes.iter().map(|&x| half * (T::one() + lit::<T>(x))).collect();
    let weights = rule.weights.iter().map(|&w| lit(w)).collect();
    Ok((nodes, weights))
}

/// Structured ball rule: radial Gauss × sphere Gauss.
#[derive(Debug, Clone)]
pub struct BallGrid<T> {
    pub radial: Vec<T>,
    pub radial_w: Vec<T>,
    pub sphere: SphereGrid<T>,
    pub r: T,
}

impl<T: Real> BallGrid<T> {
    pub fn new(d: usize, radial_order: usize, sphere_order: usize, r: T) -> Result<Self> {
        if !(r > T::zero()) {
            return invalid("ball radius must be positive");
        }
        let (radial, radial_w) = radial_rule(d, radial_order, r)?;
        Ok(BallGrid { radial, radial_w, sphere: SphereGrid::gauss(d, sphere_order)?, r })
    }

    pub fn measure(&self) -> T {
        lit::<T>(ball_volume(self.sphere.d)) * self.r.powi(self.sphere.d as i32)
    }
}

/// Averaged ball rule on B(0, r) ⊂ R^d.
pub fn ball_rule<T: Real>(d: usize, radial_order: usize, sphere_order: usize, r: T) -> Result<Quadrature<T>> {
    let grid = BallGrid::new(d, radial_order, sphere_order, r)?;
    let sq = grid.sphere.to_quadrature();
    let mut nodes = Vec::with_capacity(sq.len() * grid.radial.len() * d);
    let mut weights = Vec::with_capacity(sq.len() * grid.radial.len());
    for (rho, rw) in grid.radial.iter().zip(&grid.radial_w) {
        for i in 0..sq.len() {
            nodes.extend(sq.node(i).iter().map(|&x| x * *rho));
            weights.push(*rw * sq.weights[i]);
        }
    }
    Ok(Quadrature { dim: d, nodes, weights, measure: grid.measure(), exactness: sphere_order.min(radial_order) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_average_of_cos_squared() {
        let q = sphere_rule::<f64>(2, 8).unwrap();
        let v = q.average(|x| {
            let th = x[1].atan2(x[0]);
            (4.0 * th).cos().powi(2)
        });
        assert!((v - 0.5).abs() < 1e-14);
    }

    #[test]
    fn s3_second_moment() {
        let q = sphere_rule::<f64>(4, 10).unwrap();
        assert!((q.average(|x| x[0] * x[0]) - 0.25).abs() < 1e-14);
        assert!((q.average(|x| x[3] * x[3]) - 0.25).abs() < 1e-14);
        assert!((q.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ball_moments() {
        let r = 0.7;
        let q = ball_rule::<f64>(3, 4, 4, r).unwrap();
        assert!((q.average(|_| 1.0) - 1.0).abs() < 1e-14);
        let m = q.average(|x| x.iter().map(|v| v * v).sum());
        assert!((m - 3.0 * r * r / 5.0).abs() < 1e-14);
        assert!((q.measure - 4.0 / 3.0 * std::f64::consts::PI * r.powi(3)).abs() < 1e-13);
    }

    #[test]
    fn f32_rules_work() {
        let q = sphere_rule::<f32>(3, 6).unwrap();
        assert!((q.average(|x| x[2] * x[2]) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(sphere_rule::<f64>(1, 4).is_err());
        assert!(sphere_rule::<f64>(3, 0).is_err());
        assert!(ball_rule::<f64>(3, 2, 2, -1.0).is_err());
    }
}
