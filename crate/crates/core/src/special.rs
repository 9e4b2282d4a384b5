//! Orthogonal polynomials, Gauss rules and a few gamma-function helpers.

use nalgebra::{DMatrix, SymmetricEigen};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{invalid, Result};

/// Binomial coefficient as `u128`; `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Γ(x) for positive half-integers and integers, exact up to rounding.
pub fn gamma_half(x: f64) -> f64 {
    let twice = (2.0 * x).round();
    assert!(twice >= 1.0 && (2.0 * x - twice).abs() < 1e-12, "gamma_half needs x in N/2");
    let (mut g, mut y) = if (twice as u64).is_multiple_of(2) { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while y < x - 0.25 {
        g *= y;
        y += 1.0;
    }
    g
}

/// Surface measure of the unit sphere S^{d-1} ⊂ R^d.
pub fn sphere_area(d: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf(d as f64 / 2.0) / gamma_half(d as f64 / 2.0)
}

/// Volume of the unit ball in R^d.
pub fn ball_volume(d: usize) -> f64 {
    sphere_area(d) / d as f64
}

/// Chebyshev T_n(x) and its derivative.
/// ln n!.
pub fn ln_factorial(n: usize) -> f64 {
    if n < 16 {
        return (2..=n).map(|k| (k as f64).ln()).sum();
    }
    // Stirling series for ln Γ(n + 1)
    let x = n as f64 + 1.0;
    let x2 = x * x;
    (x - 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln() + 1.0 / (12.0 * x) - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
}

pub fn chebyshev_t(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    // T via three-term recurrence, T' = n U_{n-1}
    let (mut t0, mut t1) = (1.0, x);
    let (mut u0, mut u1) = (1.0, 2.0 * x);
    for _ in 1..n {
        let t2 = 2.0 * x * t1 - t0;
        t0 = t1;
        t1 = t2;
        let u2 = 2.0 * x * u1 - u0;
        u0 = u1;
        u1 = u2;
    }
    (t1, n as f64 * u0)
}

/// Gegenbauer C_n^α(t) by the three-term recurrence (α > 0).
pub fn gegenbauer(n: usize, alpha: f64, t: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let (mut c0, mut c1) = (1.0, 2.0 * alpha * t);
    for j in 1..n {
        let jf = j as f64;
        let c2 = (2.0 * (jf + alpha) * t * c1 - (jf + 2.0 * alpha - 1.0) * c0) / (jf + 1.0);
        c0 = c1;
        c1 = c2;
    }
    c1
}

/// Nodes and weights of an n-point Gauss rule. Weights sum to one.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

type RuleKey = (usize, u64, u64);

fn rule_cache() -> &'static Mutex<HashMap<RuleKey, Arc<GaussRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<GaussRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn jacobi_recurrence(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    // monic recurrence: alpha_j, beta_j (beta_0 unused)
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n];
    let ab = a + b;
    for j in 0..n {
        let jf = j as f64;
        alpha[j] = if j == 0 {
            (b - a) / (ab + 2.0)
        } else {
            (b * b - a * a) / ((2.0 * jf + ab) * (2.0 * jf + ab + 2.0))
        };
        if j >= 1 {
            let s = 2.0 * jf + ab;
            beta[j] = if j == 1 {
                4.0 * (1.0 + a) * (1.0 + b) / ((ab + 2.0).powi(2) * (ab + 3.0))
            } else {
                4.0 * jf * (jf + a) * (jf + b) * (jf + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
        }
    }
    (alpha, beta)
}

/// Orthonormal polynomials p̂_0..p̂_{n} at x; returns (values[0..n], p̂_n'(x)).
fn orthonormal_values(x: f64, alpha: &[f64], sb: &[f64], n: usize, out: &mut Vec<f64>) -> (f64, f64) {
    out.clear();
    let (mut p0, mut p1) = (0.0, 1.0);
    let (mut d0, mut d1) = (0.0, 0.0);
    for j in 0..n {
        out.push(p1);
        let prev = if j == 0 { 0.0 } else { sb[j] };
        let p2 = ((x - alpha[j]) * p1 - prev * p0) / sb[j + 1];
        let d2 = (p1 + (x - alpha[j]) * d1 - prev * d0) / sb[j + 1];
        p0 = p1;
        p1 = p2;
        d0 = d1;
        d1 = d2;
    }
    (p1, d1)
}

/// Gauss–Jacobi rule for the weight (1-x)^a (1+x)^b on [-1, 1], normalized to a
/// probability measure. Golub–Welsch followed by Newton polishing; results are cached.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<Arc<GaussRule>> {
    if n == 0 {
        return invalid("Gauss rule needs at least one node");
    }
    if !(a >= 0.0 && b >= 0.0) {
        return invalid(format!("Jacobi exponents must be nonnegative, got ({a}, {b})"));
    }
    let key = (n, a.to_bits(), b.to_bits());
    if let Some(r) = rule_cache().lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let (alpha, beta) = jacobi_recurrence(n + 1, a, b);
    let sb: Vec<f64> = beta.iter().map(|v| v.sqrt()).collect();
    let mut jm = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jm[(i, i)] = alpha[i];
        if i + 1 < n {
            jm[(i, i + 1)] = sb[i + 1];
            jm[(i + 1, i)] = sb[i + 1];
        }
    }
    let eig = SymmetricEigen::new(jm);
    let mut nodes: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    nodes.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut buf = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for x in nodes.iter_mut() {
        for _ in 0..3 {
            let (p, dp) = orthonormal_values(*x, &alpha, &sb, n, &mut buf);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            *x = (*x - step).clamp(-1.0, 1.0);
            if step.abs() < 1e-16 {
                break;
            }
        }
        orthonormal_values(*x, &alpha, &sb, n, &mut buf);
        weights.push(1.0 / buf.iter().map(|v| v * v).sum::<f64>());
    }
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let rule = Arc::new(GaussRule { nodes, weights });
    rule_cache().lock().unwrap().insert(key, rule.clone());
    Ok(rule)
}

/// Gauss–Legendre on [-1, 1], weights summing to one.
pub fn gauss_legendre(n: usize) -> Result<Arc<GaussRule>> {
    gauss_jacobi(n, 0.0, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomials() {
        assert_eq!(binomial(4, 2), Some(6));
        assert_eq!(binomial(2, 3), Some(0));
        assert_eq!(binomial(60, 30), Some(118264581564861424));
    }

    #[test]
    fn gamma_and_areas() {
        assert!((gamma_half(0.5) - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((gamma_half(5.0) - 24.0).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((sphere_area(2) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn legendre_moments() {
        let r = gauss_legendre(5).unwrap();
        // exact to degree 9: mean of x^8 over [-1,1] is 1/9
        let m: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(8)).sum();
        assert!((m - 1.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn jacobi_moments_match_beta_integrals() {
        // weight (1+x)^2 on [-1,1]: E[x] = (∫x(1+x)^2)/(∫(1+x)^2) = (4/3)/(8/3)=1/2
        let r = gauss_jacobi(4, 0.0, 2.0).unwrap();
        let m1: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x).sum();
        assert!((m1 - 0.5).abs() < 1e-14);
        // large rule stays accurate
        let r = gauss_jacobi(120, 0.5, 0.5).unwrap();
        let m2: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x * x).sum();
        assert!((m2 - 0.25).abs() < 1e-13, "{m2}");
    }

    #[test]
    fn ln_factorial_matches_sum() {
        for n in [0usize, 1, 5, 15, 16, 17, 40, 250] {
            let direct: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
            assert!((ln_factorial(n) - direct).abs() < 1e-12 * direct.max(1.0), "n={n}");
        }
    }

    #[test]
    fn chebyshev_endpoint_slope() {
        let (t, dt) = chebyshev_t(12, 1.0);
        assert!((t - 1.0).abs() < 1e-14);
        assert!((dt - 144.0).abs() < 1e-10);
    }

    #[test]
    fn gegenbauer_half_is_legendre() {
        let t: f64 = 0.3;
        assert!((gegenbauer(2, 0.5, t) - (3.0 * t * t - 1.0) / 2.0).abs() < 1e-15);
    }
}
