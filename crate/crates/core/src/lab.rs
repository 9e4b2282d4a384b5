//! Bernstein ratios over geodesic balls, the bound comparators, the polynomial L^p
//! Bernstein and truncation pipelines, and the sweep/regression harness.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{random_points, Eigenfunction, SphereEigenfunction, TorusEigenfunction};
use crate::error::{invalid, Error, Result};
use crate::field::{BandLimit, Field, FnField, GeodesicBall, GradientNorm, Manifold, ScalarField};
use crate::frequency::default_orders;
use crate::quadrature::{ball_rule, BallGrid, SphereGrid};
use crate::scalar::dot;
use crate::special::ball_volume;
use crate::sphharm::transform::synthesize;
use crate::sphharm::{project_on_sphere, HarmonicExpansion};
use crate::supnorm::{sup_norm, ResolutionPolicy};

/// log λ, floored at 1 so that the log factors of the bounds never drop below one.
pub fn log_floor(lambda: f64) -> f64 {
    lambda.max(std::f64::consts::E).ln()
}

/// Right-hand sides of the Bernstein-type bounds, without their constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bounds {
    pub b_global: f64,
    pub b_df: f64,
    pub b_dong: f64,
    pub b_main: f64,
    pub b_2d: f64,
    pub b_conj: f64,
}

impl Bounds {
    pub fn new(lambda: f64, r: f64, dim: usize, delta: f64) -> Result<Self> {
        if !(lambda > 0.0) || !(r > 0.0) || !(delta > 0.0) || dim == 0 {
            return invalid("bounds need λ > 0, r > 0, δ > 0 and a positive dimension");
        }
        let s = lambda.sqrt();
        let l = log_floor(lambda);
        let lm = l.powf(2.0 + delta);
        Ok(Bounds {
            b_global: s,
            b_df: lambda.powf((dim as f64 + 2.0) / 2.0) / r,
            b_dong: (s / r).max(lambda.powf(0.75)),
            b_main: (s * lm / r).max(lambda * lm),
            b_2d: (s / r).max(s * l),
            b_conj: s / r,
        })
    }

    fn as_array(&self) -> [f64; 6] {
        [self.b_global, self.b_df, self.b_dong, self.b_main, self.b_2d, self.b_conj]
    }
}

/// Implied constants ratio / b_*.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ImpliedConstants {
    pub c_global: f64,
    pub c_df: f64,
    pub c_dong: f64,
    pub c_main: f64,
    pub c_2d: f64,
    pub c_conj: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BernsteinReport {
    pub manifold: String,
    pub center: Vec<f64>,
    pub r: f64,
    pub lambda: f64,
    pub delta: f64,
    pub grad_sup: f64,
    pub val_sup: f64,
    pub ratio: f64,
    pub bounds: Bounds,
    pub constants: ImpliedConstants,
    pub resolution_h: f64,
    pub refine_depth: usize,
}

/// sup |∇φ| / sup |φ| over a ball, with every bound evaluated.
pub fn bernstein_ratio(
    field: &dyn ScalarField<f64>,
    lambda: f64,
    ball: &GeodesicBall<f64>,
    policy: &ResolutionPolicy,
    delta: f64,
) -> Result<BernsteinReport> {
    let grad = sup_norm(&GradientNorm(field), ball, policy)?;
    let val = sup_norm(field as &dyn Field<f64>, ball, policy)?;
    if !(val.sup > 0.0) {
        return Err(Error::Domain("the field vanishes on the ball".into()));
    }
    let ratio = grad.sup / val.sup;
    let bounds = Bounds::new(lambda, ball.radius, ball.manifold.intrinsic_dim(), delta)?;
    let c = bounds.as_array().map(|b| ratio / b);
    Ok(BernsteinReport {
        manifold: ball.manifold.label(),
        center: ball.center.clone(),
        r: ball.radius,
        lambda,
        delta,
        grad_sup: grad.sup,
        val_sup: val.sup,
        ratio,
        bounds,
        constants: ImpliedConstants { c_global: c[0], c_df: c[1], c_dong: c[2], c_main: c[3], c_2d: c[4], c_conj: c[5] },
        resolution_h: grad.certificate.grid_spacing.min(val.certificate.grid_spacing),
        refine_depth: grad.certificate.refine_depth.max(val.certificate.refine_depth),
    })
}

pub fn eigen_bernstein(ef: &Eigenfunction<f64>, ball: &GeodesicBall<f64>, policy: &ResolutionPolicy, delta: f64) -> Result<BernsteinReport> {
    bernstein_ratio(ef, ef.eigenvalue(), ball, policy, delta)
}

/// sup over B(center, (1+1/L)r) divided by sup over B(center, r).
pub fn growth_check(field: &dyn Field<f64>, center: &[f64], r: f64, l: f64, policy: &ResolutionPolicy) -> Result<f64> {
    if !(l > 0.0) {
        return invalid("L must be positive");
    }
    let m = field.manifold();
    let inner = sup_norm(field, &GeodesicBall::new(m.clone(), center.to_vec(), r)?, policy)?.sup;
    let outer = sup_norm(field, &GeodesicBall::new(m, center.to_vec(), (1.0 + 1.0 / l) * r)?, policy)?.sup;
    if !(inner > 0.0) {
        return Err(Error::Domain("the field vanishes on the inner ball".into()));
    }
    Ok(outer / inner)
}

/// Exponent of an L^p norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Lp {
    L1,
    L2,
    Inf,
}

impl std::str::FromStr for Lp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "1" => Ok(Lp::L1),
            "2" => Ok(Lp::L2),
            "inf" | "Inf" | "infinity" | "∞" => Ok(Lp::Inf),
            other => Err(Error::InvalidArgument(format!("p must be 1, 2 or inf, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for Lp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Lp::L1 => "1",
            Lp::L2 => "2",
            Lp::Inf => "inf",
        })
    }
}

/// Ball means (⨍|P|^p, ⨍|∇P|^p) for p ∈ {1, 2}, using per-degree evaluation on one sphere
/// and homogeneity in the radius.
fn ball_lp_means(exp: &HarmonicExpansion<f64>, r: f64, p: Lp) -> Result<(f64, f64)> {
    let d = exp.d();
    let n = exp.max_degree().unwrap_or(0);
    let order = 2 * n + 4 + if p == Lp::L1 { 8 } else { 0 };
    let grid = BallGrid::<f64>::new(d, order / 2 + 1, order, r)?;
    let sg = &grid.sphere;
    let rr = exp.r_ref();
    let per_node: Vec<(f64, f64)> = (0..sg.len())
        .into_par_iter()
        .map(|i| {
            let mut xi = vec![0.0; d];
            let w = sg.point(i, &mut xi);
            let (pv, pg) = exp.eval_by_degree(&xi);
            let (mut a, mut b) = (0.0, 0.0);
            for (j, &rho) in grid.radial.iter().enumerate() {
                let s = rho / rr;
                let mut v = 0.0;
                let mut g = vec![0.0; d];
                let mut sk = 1.0;
                for k in 0..pv.len() {
                    if k >= 1 {
                        for c in 0..d {
                            g[c] += sk * pg[k * d + c];
                        }
                        sk *= s;
                    }
                    v += sk * pv[k];
                }
                let gn2 = dot(&g, &g) / (rr * rr);
                let (fv, fg) = match p {
                    Lp::L1 => (v.abs(), gn2.sqrt()),
                    _ => (v * v, gn2),
                };
                a += grid.radial_w[j] * fv;
                b += grid.radial_w[j] * fg;
            }
            (w * a, w * b)
        })
        .collect();
    let (mut a, mut b) = (0.0, 0.0);
    for (x, y) in per_node {
        a += x;
        b += y;
    }
    Ok((a, b))
}

fn origin_ball(d: usize, r: f64) -> Result<GeodesicBall<f64>> {
    GeodesicBall::new(Manifold::Euclidean { dim: d }, vec![0.0; d], r)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct LpBernstein {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
}

/// ‖∇P‖_{L^p(B(0,r))} against (N/r)‖P‖_{L^p(B(0,r))}.
pub fn polynomial_bernstein_lp(exp: &HarmonicExpansion<f64>, r: f64, p: Lp, policy: &ResolutionPolicy) -> Result<LpBernstein> {
    let n = match exp.max_degree() {
        Some(n) if n >= 1 => n as f64,
        _ => return invalid("the Bernstein ratio needs a polynomial of degree at least 1"),
    };
    if !(r > 0.0) {
        return invalid("radius must be positive");
    }
    let (norm_p, norm_g) = match p {
        Lp::Inf => {
            let ball = origin_ball(exp.d(), r)?;
            (sup_norm(exp, &ball, policy)?.sup, sup_norm(&GradientNorm(exp), &ball, policy)?.sup)
        }
        Lp::L1 => ball_lp_means(exp, r, p)?,
        Lp::L2 => {
            let (a, b) = ball_lp_means(exp, r, p)?;
            (a.sqrt(), b.sqrt())
        }
    };
    let rhs = n / r * norm_p;
    Ok(LpBernstein { lhs: norm_g, rhs, constant: norm_g / rhs })
}

/// ‖P‖_{L^p(B(0,(1+1/N)r))} / ‖P‖_{L^p(B(0,r))} with integral (not averaged) norms.
pub fn lp_growth_check(exp: &HarmonicExpansion<f64>, r: f64, n: usize, p: Lp, policy: &ResolutionPolicy) -> Result<f64> {
    if n == 0 || !(r > 0.0) {
        return invalid("need N ≥ 1 and r > 0");
    }
    let big = (1.0 + 1.0 / n as f64) * r;
    let d = exp.d() as f64;
    let norm_at = |rho: f64| -> Result<f64> {
        Ok(match p {
            Lp::Inf => sup_norm(exp, &origin_ball(exp.d(), rho)?, policy)?.sup,
            Lp::L2 => (exp.ball_mean_square(rho) * ball_volume(exp.d()) * rho.powf(d)).sqrt(),
            Lp::L1 => ball_lp_means(exp, rho, p)?.0 * ball_volume(exp.d()) * rho.powf(d),
        })
    };
    let inner = norm_at(r)?;
    if !(inner > 0.0) {
        return Err(Error::Domain("polynomial vanishes on the inner ball".into()));
    }
    Ok(norm_at(big)? / inner)
}

/// Outcome of [`approximate_by_truncation`].
#[derive(Debug, Clone)]
pub struct TruncationReport {
    /// Degrees ≤ 5N of the fitted expansion, centred at the origin of the ball.
    pub head: HarmonicExpansion<f64>,
    pub tail_sup: f64,
    pub relative_tail: f64,
    /// ⨍_{B(center, r)} |field|
    pub ball_mean_abs: f64,
    /// Max fit error on a check sphere, relative to the field's max there.
    pub fit_residual: f64,
    pub fit_order: usize,
    /// True when the tail was built from the field's closed-form Taylor components.
    pub closed_form_tail: bool,
}

/// Fit residual above which a projection is rejected.
pub const FIT_RESIDUAL_LIMIT: f64 = 1e-8;

/// y ↦ field(center + y) − head(y), for the sampled tail path.
struct Residual<'a> {
    field: &'a dyn ScalarField<f64>,
    head: &'a HarmonicExpansion<f64>,
    center: &'a [f64],
}

impl Field<f64> for Residual<'_> {
    fn manifold(&self) -> Manifold<f64> {
        Manifold::Euclidean { dim: self.center.len() }
    }
    fn value(&self, y: &[f64]) -> f64 {
        let x: Vec<f64> = y.iter().zip(self.center).map(|(a, b)| a + b).collect();
        self.field.value(&x) - self.head.value(y)
    }
    fn band_limit(&self) -> Option<BandLimit<f64>> {
        self.field.band_limit()
    }
    fn max_principle(&self) -> bool {
        true
    }
}

/// Fits a harmonic expansion on ∂B(center, 1.5r), keeps degrees ≤ 5N, and measures the
/// remainder on B(center, (1+1/N)r) relative to ⨍_{B(center,r)} |field|.
pub fn approximate_by_truncation(
    field: &dyn ScalarField<f64>,
    center: &[f64],
    r: f64,
    n_declared: usize,
    fit_order: Option<usize>,
    policy: &ResolutionPolicy,
) -> Result<TruncationReport> {
    if n_declared < 10 {
        return invalid("the truncation lemma is stated for N ≥ 10");
    }
    if !field.is_harmonic() || !field.manifold().is_flat() {
        return invalid("approximate_by_truncation needs a field harmonic in Euclidean coordinates");
    }
    if !(r > 0.0) {
        return invalid("radius must be positive");
    }
    let d = center.len();
    let k_head = 5 * n_declared;
    let k_fit = fit_order.unwrap_or(k_head + 20);
    if k_fit < k_head {
        return invalid(format!("fit order {k_fit} is below the truncation degree {k_head}"));
    }
    let rho_fit = 1.5 * r;
    let fitted = project_on_sphere(d, center, rho_fit, k_fit, 2 * k_fit + 2, |x| field.value(x))?;

    // check the fit on a different sphere grid, slightly inside the fit sphere
    let check = SphereGrid::<f64>::gauss(d, 2 * k_fit + 5)?;
    let rho_chk = 1.25 * r;
    let mut blocks = fitted.to_blocks();
    for (k, b) in blocks.iter_mut().enumerate() {
        let s = (rho_chk / rho_fit).powi(k as i32);
        b.iter_mut().for_each(|a| *a *= s);
    }
    let synth = synthesize(&check, &blocks);
    let (err, scale) = (0..check.len())
        .into_par_iter()
        .map(|i| {
            let mut xi = vec![0.0; d];
            check.point(i, &mut xi);
            let x: Vec<f64> = xi.iter().zip(center).map(|(a, b)| a * rho_chk + b).collect();
            let f = field.value(&x);
            ((f - synth[i]).abs(), f.abs())
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let fit_residual = if scale > 0.0 { err / scale } else { err };
    if !(fit_residual <= FIT_RESIDUAL_LIMIT) {
        return Err(Error::NotResolved(format!(
            "fit order {k_fit} leaves a relative residual of {fit_residual:.3e} on the check sphere"
        )));
    }
    let (head, _) = fitted.truncate(k_head);

    let rho = (1.0 + 1.0 / n_declared as f64) * r;
    let outer = GeodesicBall::new(Manifold::Euclidean { dim: d }, vec![0.0; d], rho)?;
    let zero = vec![0.0; d];
    let closed = field.taylor_components(center, k_head + 1, k_head + 1, &zero).is_some();
    let tail_sup = if closed {
        let band = field.band_limit().map_or(1.0, |b| b.wavenumber(r)) * rho;
        // the k-th component scales like (Bρ)^k/k!, so stop once the product is negligible
        let mut hi = k_head + 1;
        let mut mag = 1.0;
        while hi < k_head + 400 && (hi < k_head + 9 || mag > 1e-18) {
            hi += 1;
            mag *= band / hi as f64;
            mag = mag.min(1.0);
        }
        let tail = project_on_sphere(d, &zero, rho, hi, 2 * hi + 2, |y| {
            field.taylor_components(center, k_head + 1, hi, y).unwrap_or(f64::NAN)
        })?;
        let (_, tail) = tail.truncate(k_head);
        sup_norm(&tail, &outer, policy)?.sup
    } else {
        let res = Residual { field, head: &head, center };
        sup_norm(&res, &outer, policy)?.sup
    };

    let ball_mean_abs = ball_mean_abs(field, center, r)?;
    if !(ball_mean_abs > 0.0) {
        return Err(Error::Domain("field vanishes on the ball".into()));
    }
    Ok(TruncationReport {
        head,
        tail_sup,
        relative_tail: tail_sup / ball_mean_abs,
        ball_mean_abs,
        fit_residual,
        fit_order: k_fit,
        closed_form_tail: closed,
    })
}

/// ⨍_{B(center, r)} |field| by ball quadrature at the field's default orders.
pub fn ball_mean_abs(field: &dyn ScalarField<f64>, center: &[f64], r: f64) -> Result<f64> {
    let orders = default_orders(field.band_limit(), r)?;
    let q = ball_rule::<f64>(center.len(), orders.radial, orders.sphere, r)?;
    let vals: Vec<f64> = (0..q.len())
        .into_par_iter()
        .map(|i| {
            let x: Vec<f64> = q.node(i).iter().zip(center).map(|(a, b)| a + b).collect();
            q.weights[i] * field.value(&x).abs()
        })
        .collect();
    Ok(vals.iter().sum())
}

/// Extremal ratios sup|T′|/sup|T| for sin(Nθ) on the circle and the Chebyshev polynomial
/// T_N on [−1, 1], measured with the sup machinery.
pub fn classical_baselines(n: usize) -> Result<(f64, f64)> {
    if n == 0 {
        return invalid("N must be at least 1");
    }
    let nf = n as f64;
    let policy = ResolutionPolicy { refine_tol: 1e-10, rel_tol: 1e-15, ..ResolutionPolicy::default() };
    let circle = Manifold::torus(1);
    let trig = FnField {
        manifold: circle.clone(),
        value: move |x: &[f64]| (nf * x[0]).sin(),
        gradient: move |x: &[f64]| vec![nf * (nf * x[0]).cos()],
        band: Some(BandLimit::Wavenumber(nf)),
    };
    let whole = GeodesicBall::whole(circle)?;
    let t_ratio = sup_norm(&GradientNorm(&trig), &whole, &policy)?.sup / sup_norm(&trig, &whole, &policy)?.sup;

    let cheb = FnField {
        manifold: Manifold::Euclidean { dim: 1 },
        value: move |x: &[f64]| crate::special::chebyshev_t(n, x[0].clamp(-1.0, 1.0)).0,
        gradient: move |x: &[f64]| vec![crate::special::chebyshev_t(n, x[0].clamp(-1.0, 1.0)).1],
        // the Chebyshev extrema crowd at spacing ~ 1/N² near the endpoints
        band: Some(BandLimit::Wavenumber(nf * nf)),
    };
    let seg = origin_ball(1, 1.0)?;
    let m_ratio = sup_norm(&GradientNorm(&cheb), &seg, &policy)?.sup / sup_norm(&cheb, &seg, &policy)?.sup;
    Ok((t_ratio, m_ratio))
}

/// Ordinary least squares y ≈ slope·x + intercept.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Regression {
    pub regime: String,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n_points: usize,
}

pub fn ols(regime: &str, x: &[f64], y: &[f64]) -> Result<Regression> {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| a.is_finite() && b.is_finite()).map(|(&a, &b)| (a, b)).collect();
    let n = pts.len();
    if n < 2 {
        return invalid(format!("regression `{regime}` needs at least two finite points, got {n}"));
    }
    let nf = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return invalid(format!("regression `{regime}` has no spread in x"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Regression { regime: regime.to_string(), slope, intercept: my - slope * mx, r2, n_points: n })
}

/// Which eigenfunctions a sweep draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Family {
    /// Random combinations of up to `modes` lattice modes; levels are |m|².
    TorusRandom { modes: usize },
    /// Zonal harmonics about e₀; levels are degrees.
    SphereZonal,
    /// Random harmonics; levels are degrees.
    SphereRandom,
}

/// How ball centers are drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Centers {
    Fixed { points: Vec<Vec<f64>> },
    Random { count: usize },
    /// Random points moved onto the nodal set by Newton steps.
    Nodal { count: usize },
}

/// Radii as given, or in wavelength units c/√λ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusScale {
    Absolute,
    Wavelength,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub manifold: String,
    pub family: Family,
    /// |m|² on tori, degrees on spheres.
    pub levels: Vec<u64>,
    pub radii: Vec<f64>,
    pub radius_scale: RadiusScale,
    pub centers: Centers,
    pub delta: f64,
    pub seed: u64,
    pub grid_factor: f64,
    pub refine_tol: f64,
    pub force: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            manifold: "torus:2".into(),
            family: Family::TorusRandom { modes: 1 },
            levels: vec![25],
            radii: log_grid(0.01, 0.2, 6),
            radius_scale: RadiusScale::Absolute,
            centers: Centers::Nodal { count: 2 },
            delta: 1.0,
            seed: 0,
            grid_factor: 0.125,
            refine_tol: 1e-4,
            force: false,
        }
    }
}

/// `n` log-spaced points from `a` to `b`.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n).map(|i| (a.ln() + (b.ln() - a.ln()) * i as f64 / (n - 1) as f64).exp()).collect()
}

impl SweepConfig {
    pub fn policy(&self) -> ResolutionPolicy {
        ResolutionPolicy { grid_factor: self.grid_factor, refine_tol: self.refine_tol, force: self.force, ..ResolutionPolicy::default() }
    }

    pub fn validate(&self) -> Result<Manifold<f64>> {
        let m = Manifold::parse(&self.manifold)?;
        if self.levels.is_empty() {
            return Err(Error::Config("the level (λ or degree) list is empty".into()));
        }
        if self.radii.is_empty() {
            return Err(Error::Config("the radius grid is empty".into()));
        }
        if self.radii.iter().any(|&r| !(r > 0.0) || !r.is_finite()) {
            return Err(Error::Config("radii must be positive and finite".into()));
        }
        if !(self.delta > 0.0) || !(self.grid_factor > 0.0) || !(self.refine_tol > 0.0) {
            return Err(Error::Config("delta, grid factor and refine tolerance must be positive".into()));
        }
        match (&m, &self.family) {
            (Manifold::Torus { .. }, Family::TorusRandom { modes }) if *modes > 0 => {}
            (Manifold::Sphere { .. }, Family::SphereZonal | Family::SphereRandom) => {}
            _ => return Err(Error::Config(format!("family {:?} does not fit manifold {}", self.family, m.label()))),
        }
        match &self.centers {
            Centers::Fixed { points } if points.is_empty() => return Err(Error::Config("no fixed centers given".into())),
            Centers::Fixed { points } => {
                if let Some(p) = points.iter().find(|p| !m.contains(p, 1e-9)) {
                    return Err(Error::Config(format!("center {p:?} is not on {}", m.label())));
                }
            }
            Centers::Random { count } | Centers::Nodal { count } if *count == 0 => {
                return Err(Error::Config("center count must be positive".into()))
            }
            _ => {}
        }
        Ok(m)
    }
}

/// One CSV row of a sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub manifold: String,
    pub lambda: f64,
    pub r: f64,
    pub center_id: usize,
    pub report: std::result::Result<BernsteinReport, String>,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub regressions: Vec<Regression>,
}

pub const SWEEP_COLUMNS: [&str; 21] = [
    "manifold",
    "lambda",
    "r",
    "center_id",
    "grad_sup",
    "val_sup",
    "ratio",
    "b_global",
    "b_df",
    "b_dong",
    "b_main",
    "b_2d",
    "b_conj",
    "c_global",
    "c_df",
    "c_dong",
    "c_main",
    "c_2d",
    "c_conj",
    "resolution_h",
    "refine_depth",
];

fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12e}")
    } else {
        "NaN".into()
    }
}

impl SweepOutput {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(SWEEP_COLUMNS)?;
        for row in &self.rows {
            let mut rec = vec![row.manifold.clone(), fmt_num(row.lambda), fmt_num(row.r), row.center_id.to_string()];
            match &row.report {
                Ok(rep) => {
                    let b = rep.bounds;
                    let c = rep.constants;
                    for v in [
                        rep.grad_sup,
                        rep.val_sup,
                        rep.ratio,
                        b.b_global,
                        b.b_df,
                        b.b_dong,
                        b.b_main,
                        b.b_2d,
                        b.b_conj,
                        c.c_global,
                        c.c_df,
                        c.c_dong,
                        c.c_main,
                        c.c_2d,
                        c.c_conj,
                        rep.resolution_h,
                    ] {
                        rec.push(fmt_num(v));
                    }
                    rec.push(rep.refine_depth.to_string());
                }
                Err(_) => rec.extend(std::iter::repeat_n("NaN".to_string(), SWEEP_COLUMNS.len() - 4)),
            }
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn failures(&self) -> Vec<(usize, String)> {
        self.rows.iter().enumerate().filter_map(|(i, r)| r.report.as_ref().err().map(|e| (i, e.clone()))).collect()
    }

    /// Max implied constant per bound over successful rows.
    pub fn max_constants(&self) -> Option<ImpliedConstants> {
        self.rows.iter().filter_map(|r| r.report.as_ref().ok()).map(|r| r.constants).reduce(|a, b| ImpliedConstants {
            c_global: a.c_global.max(b.c_global),
            c_df: a.c_df.max(b.c_df),
            c_dong: a.c_dong.max(b.c_dong),
            c_main: a.c_main.max(b.c_main),
            c_2d: a.c_2d.max(b.c_2d),
            c_conj: a.c_conj.max(b.c_conj),
        })
    }
}

/// Moves `x` onto {φ = 0} by Newton steps along ∇φ; `None` if it does not converge.
pub fn project_to_nodal_set(ef: &Eigenfunction<f64>, x: &[f64]) -> Option<Vec<f64>> {
    let sphere = matches!(ef, Eigenfunction::Sphere(_));
    let mut p = x.to_vec();
    for _ in 0..60 {
        let (v, g) = ef.eval(&p);
        let g2 = dot(&g, &g);
        if g2 == 0.0 {
            return None;
        }
        if v.abs() <= 1e-14 * g2.sqrt() {
            return Some(p);
        }
        // cap the step at a quarter wavelength
        let step = (v / g2).clamp(-0.25 / g2.sqrt().max(1.0), 0.25 / g2.sqrt().max(1.0));
        p.iter_mut().zip(&g).for_each(|(pi, gi)| *pi -= step * gi);
        if sphere {
            let n = dot(&p, &p).sqrt();
            p.iter_mut().for_each(|pi| *pi /= n);
        }
    }
    let (v, g) = ef.eval(&p);
    (v.abs() <= 1e-10 * dot(&g, &g).sqrt()).then_some(p)
}

fn draw_eigenfunction(m: &Manifold<f64>, family: &Family, level: u64, rng: &mut ChaCha8Rng) -> Result<Eigenfunction<f64>> {
    Ok(match (m, family) {
        (Manifold::Torus { dim, .. }, Family::TorusRandom { modes }) => {
            Eigenfunction::Torus(TorusEigenfunction::random(*dim, level as i64, *modes, rng)?)
        }
        (Manifold::Sphere { n }, Family::SphereZonal) => Eigenfunction::Sphere(SphereEigenfunction::zonal(*n, level as usize)?),
        (Manifold::Sphere { n }, Family::SphereRandom) => Eigenfunction::Sphere(SphereEigenfunction::random(*n, level as usize, rng)?),
        _ => return Err(Error::Config("family does not fit manifold".into())),
    })
}

fn draw_centers(m: &Manifold<f64>, centers: &Centers, ef: &Eigenfunction<f64>, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match centers {
        Centers::Fixed { points } => points.clone(),
        Centers::Random { count } => random_points(m, *count, rng),
        Centers::Nodal { count } => {
            let mut out = Vec::with_capacity(*count);
            let mut tries = 0;
            while out.len() < *count && tries < 100 * count {
                tries += 1;
                let x = random_points(m, 1, rng).pop().expect("one point");
                if let Some(p) = project_to_nodal_set(ef, &x) {
                    out.push(p);
                }
            }
            out
        }
    }
}

/// Runs every (level, radius, center) cell. Randomness is drawn up front from the seed,
/// and rows are collected in key order, so the output does not depend on thread count.
pub fn sweep(config: &SweepConfig) -> Result<SweepOutput> {
    let m = config.validate()?;
    let policy = config.policy();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cells = Vec::new();
    let mut efs = Vec::new();
    for (li, &level) in config.levels.iter().enumerate() {
        let ef = draw_eigenfunction(&m, &config.family, level, &mut rng)?;
        let centers = draw_centers(&m, &config.centers, &ef, &mut rng);
        let lambda = ef.eigenvalue();
        for &c in &config.radii {
            let r = match config.radius_scale {
                RadiusScale::Absolute => c,
                RadiusScale::Wavelength => c / lambda.sqrt(),
            };
            for (ci, x) in centers.iter().enumerate() {
                cells.push((li, lambda, r, ci, x.clone()));
            }
        }
        efs.push(ef);
    }
    let label = m.label();
    let rows: Vec<SweepRow> = cells
        .into_par_iter()
        .map(|(li, lambda, r, ci, x)| {
            let report = GeodesicBall::new(m.clone(), x, r)
                .and_then(|ball| eigen_bernstein(&efs[li], &ball, &policy, config.delta))
                .map_err(|e| e.to_string());
            SweepRow { manifold: label.clone(), lambda, r, center_id: ci, report }
        })
        .collect();
    let regressions = sweep_regressions(&rows, config);
    Ok(SweepOutput { rows, regressions })
}

/// log(ratio) against log(1/r) for r√λ ≤ 1, and against log λ at each fixed r√λ.
pub fn sweep_regressions(rows: &[SweepRow], config: &SweepConfig) -> Vec<Regression> {
    let ok: Vec<&BernsteinReport> = rows.iter().filter_map(|r| r.report.as_ref().ok()).collect();
    let mut out = Vec::new();
    let sub: Vec<&&BernsteinReport> = ok.iter().filter(|r| r.r * r.lambda.sqrt() <= 1.0 + 1e-12).collect();
    let x: Vec<f64> = sub.iter().map(|r| -r.r.ln()).collect();
    let y: Vec<f64> = sub.iter().map(|r| r.ratio.ln()).collect();
    if let Ok(reg) = ols("sub_wavelength", &x, &y) {
        out.push(reg);
    }
    if config.radius_scale == RadiusScale::Wavelength {
        for &c in &config.radii {
            let sel: Vec<&&BernsteinReport> = ok.iter().filter(|r| ((r.r * r.lambda.sqrt()) / c - 1.0).abs() < 1e-9).collect();
            let x: Vec<f64> = sel.iter().map(|r| r.lambda.ln()).collect();
            let y: Vec<f64> = sel.iter().map(|r| r.ratio.ln()).collect();
            if let Ok(reg) = ols(&format!("fixed_scale_{c}"), &x, &y) {
                out.push(reg);
            }
        }
    }
    out
}

/// Random harmonic expansion of exact degree N with all basis functions present.
pub fn random_polynomial(d: usize, n: usize, seed: u64) -> Result<HarmonicExpansion<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    HarmonicExpansion::random(d, n, None, &mut rng)
}

/// Random homogeneous harmonic polynomial of degree N (every degree-N basis function, no
/// lower degrees).
pub fn random_homogeneous(d: usize, n: usize, seed: u64) -> Result<HarmonicExpansion<f64>> {
    let p = random_polynomial(d, n, seed)?;
    Ok(if n == 0 { p } else { p.truncate(n - 1).1 })
}
