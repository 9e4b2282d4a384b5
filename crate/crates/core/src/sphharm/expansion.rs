use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::Value;
use std::collections::BTreeMap;
use std::sync::Arc;

use super::basis::{basis_label, dim_raw, EvalPlan};
use super::transform::{zero_blocks, Blocks};
use crate::error::{invalid, Error, Result};
use crate::scalar::{from_usize, lit, to_f64, Real};

/// One coefficient a_{k,m}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term<T> {
    pub k: usize,
    pub m: usize,
    pub a: T,
}

/// Harmonic function h(x) = Σ a_{k,m} Y_{k,m}(x/|x|) (|x|/r_ref)^k on R^d.
#[derive(Debug, Clone)]
pub struct HarmonicExpansion<T: Real> {
    d: usize,
    r_ref: T,
    terms: Vec<Term<T>>,
    plan: Arc<EvalPlan<T>>,
}

/// Pointwise evaluation with second derivatives.
#[derive(Debug, Clone)]
pub struct Jet<T> {
    pub value: T,
    pub gradient: Vec<T>,
    /// Row-major d×d Hessian.
    pub hessian: Vec<T>,
}

impl<T: Real> HarmonicExpansion<T> {
    pub fn new(d: usize, r_ref: T, terms: Vec<Term<T>>) -> Result<Self> {
        if d < 2 {
            return invalid("ambient dimension must be at least 2");
        }
        if !(r_ref > T::zero()) || !r_ref.is_finite() {
            return invalid("reference radius must be positive and finite");
        }
        let mut seen = BTreeMap::new();
        for t in &terms {
            if t.m >= dim_raw(d, t.k) {
                return invalid(format!("basis index {} out of range for degree {} (dim {})", t.m, t.k, dim_raw(d, t.k)));
            }
            if !t.a.is_finite() {
                return invalid(format!("non-finite coefficient at ({}, {})", t.k, t.m));
            }
            if seen.insert((t.k, t.m), ()).is_some() {
                return invalid(format!("duplicate term ({}, {})", t.k, t.m));
            }
        }
        let mut terms = terms;
        terms.sort_by_key(|t| (t.k, t.m));
        let labels: Vec<_> = terms.iter().map(|t| basis_label(d, t.k, t.m)).collect::<Result<_>>()?;
        let plan = Arc::new(EvalPlan::new(d, &labels));
        Ok(HarmonicExpansion { d, r_ref, terms, plan })
    }

    pub fn zero(d: usize) -> Result<Self> {
        Self::new(d, T::one(), vec![])
    }

    pub fn constant(d: usize, c: T) -> Result<Self> {
        Self::new(d, T::one(), vec![Term { k: 0, m: 0, a: c }])
    }

    /// Single basis function a·Y_{k,m}.
    pub fn single(d: usize, k: usize, m: usize, a: T) -> Result<Self> {
        Self::new(d, T::one(), vec![Term { k, m, a }])
    }

    /// Builds from dense blocks, dropping exact zeros.
    pub fn from_blocks(d: usize, r_ref: T, blocks: &[Vec<T>]) -> Result<Self> {
        let mut terms = Vec::new();
        for (k, b) in blocks.iter().enumerate() {
            if b.len() != dim_raw(d, k) {
                return invalid(format!("block {k} has length {} instead of {}", b.len(), dim_raw(d, k)));
            }
            for (m, &a) in b.iter().enumerate() {
                if a != T::zero() {
                    terms.push(Term { k, m, a });
                }
            }
        }
        Self::new(d, r_ref, terms)
    }

    pub fn to_blocks(&self) -> Blocks<T> {
        let mut b = zero_blocks(self.d, self.max_degree().unwrap_or(0));
        for t in &self.terms {
            b[t.k][t.m] = t.a;
        }
        b
    }

    /// Random expansion with standard normal coefficients. With `per_degree = None`
    /// every basis function up to `k_max` is used; otherwise at most that many per degree.
    /// Degree `k_max` is always present.
    pub fn random<R: Rng + ?Sized>(d: usize, k_max: usize, per_degree: Option<usize>, rng: &mut R) -> Result<Self> {
        let mut terms = Vec::new();
        for k in 0..=k_max {
            let dim = dim_raw(d, k);
            let mut ms: Vec<usize> = match per_degree {
                None => (0..dim).collect(),
                Some(p) => (0..p.min(dim)).map(|_| rng.random_range(0..dim)).collect(),
            };
            ms.sort_unstable();
            ms.dedup();
            for m in ms {
                let a: f64 = StandardNormal.sample(rng);
                terms.push(Term { k, m, a: lit(a) });
            }
        }
        Self::new(d, T::one(), terms)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r_ref(&self) -> T {
        self.r_ref
    }

    pub fn terms(&self) -> &[Term<T>] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.a == T::zero())
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.terms.iter().filter(|t| t.a != T::zero()).map(|t| t.k).max()
    }

    pub fn min_degree(&self) -> Option<usize> {
        self.terms.iter().filter(|t| t.a != T::zero()).map(|t| t.k).min()
    }

    /// A_k = Σ_m a_{k,m}² for k = 0..=max degree.
    pub fn degree_energies(&self) -> Vec<T> {
        let mut e = vec![T::zero(); self.max_degree().map_or(0, |k| k + 1)];
        for t in self.terms.iter().filter(|t| t.a != T::zero()) {
            e[t.k] = e[t.k] + t.a * t.a;
        }
        e
    }

    fn scaled_point(&self, x: &[T]) -> Vec<T> {
        x.iter().map(|&v| v / self.r_ref).collect()
    }

    pub fn value(&self, x: &[T]) -> T {
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        if self.terms.is_empty() {
            return T::zero();
        }
        let bufs = self.plan.eval_nodes(&self.scaled_point(x), 0);
        self.terms.iter().zip(&self.plan.roots).map(|(t, &r)| t.a * bufs[0][r]).sum()
    }

    /// Value and analytic gradient.
    pub fn eval(&self, x: &[T]) -> (T, Vec<T>) {
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        let d = self.d;
        let mut g = vec![T::zero(); d];
        if self.terms.is_empty() {
            return (T::zero(), g);
        }
        let bufs = self.plan.eval_nodes(&self.scaled_point(x), 1);
        let top = &bufs[0];
        let nn = self.plan.top_count();
        let mut v = T::zero();
        for (t, &r) in self.terms.iter().zip(&self.plan.roots) {
            v = v + t.a * top[r];
            for (j, gj) in g.iter_mut().enumerate() {
                *gj = *gj + t.a * top[nn + r * d + j];
            }
        }
        g.iter_mut().for_each(|gj| *gj = *gj / self.r_ref);
        (v, g)
    }

    /// Value, gradient and Hessian.
    pub fn jet(&self, x: &[T]) -> Jet<T> {
        assert_eq!(x.len(), self.d, "point dimension mismatch");
        let d = self.d;
        let mut jet = Jet { value: T::zero(), gradient: vec![T::zero(); d], hessian: vec![T::zero(); d * d] };
        if self.terms.is_empty() {
            return jet;
        }
        let bufs = self.plan.eval_nodes(&self.scaled_point(x), 2);
        let top = &bufs[0];
        let nn = self.plan.top_count();
        for (t, &r) in self.terms.iter().zip(&self.plan.roots) {
            jet.value = jet.value + t.a * top[r];
            for j in 0..d {
                jet.gradient[j] = jet.gradient[j] + t.a * top[nn + r * d + j];
            }
            for j in 0..d * d {
                jet.hessian[j] = jet.hessian[j] + t.a * top[nn + nn * d + r * d * d + j];
            }
        }
        let r2 = self.r_ref * self.r_ref;
        jet.gradient.iter_mut().for_each(|v| *v = *v / self.r_ref);
        jet.hessian.iter_mut().for_each(|v| *v = *v / r2);
        jet
    }

    /// |Δh| / ‖D²h‖_F at x (zero when the Hessian vanishes).
    pub fn laplacian_ratio(&self, x: &[T]) -> T {
        let jet = self.jet(x);
        let d = self.d;
        let tr: T = (0..d).map(|i| jet.hessian[i * d + i]).sum();
        let nrm = jet.hessian.iter().map(|&v| v * v).sum::<T>().sqrt();
        if nrm == T::zero() {
            T::zero()
        } else {
            tr.abs() / nrm
        }
    }

    /// Per-degree solid-harmonic values and gradients at the scaled point y = x/r_ref:
    /// returns (P_k(y), ∇_y P_k(y)) for k = 0..=max degree, gradients row-major.
    pub fn eval_by_degree(&self, y: &[T]) -> (Vec<T>, Vec<T>) {
        let d = self.d;
        let kk = self.max_degree().unwrap_or(0);
        let mut vals = vec![T::zero(); kk + 1];
        let mut grads = vec![T::zero(); (kk + 1) * d];
        if self.terms.is_empty() {
            return (vals, grads);
        }
        let bufs = self.plan.eval_nodes(y, 1);
        let top = &bufs[0];
        let nn = self.plan.top_count();
        for (t, &r) in self.terms.iter().zip(&self.plan.roots) {
            if t.k > kk {
                continue;
            }
            vals[t.k] = vals[t.k] + t.a * top[r];
            for j in 0..d {
                grads[t.k * d + j] = grads[t.k * d + j] + t.a * top[nn + r * d + j];
            }
        }
        (vals, grads)
    }

    /// ln Σ_k w_k A_k s^k with s = (ρ/r_ref)², or `None` for an empty sum.
    fn log_weighted_sum(&self, rho: T, weight: impl Fn(usize) -> T) -> Option<T> {
        let e = self.degree_energies();
        let ls = (rho / self.r_ref).ln() * lit(2.0);
        let logs: Vec<T> = e
            .iter()
            .enumerate()
            .filter(|(k, a)| **a > T::zero() && weight(*k) > T::zero())
            .map(|(k, &a)| a.ln() + weight(k).ln() + ls * from_usize(k))
            .collect();
        let mx = logs.iter().copied().fold(None, |m: Option<T>, v| Some(m.map_or(v, |m| m.max(v))))?;
        Some(mx + logs.iter().map(|&l| (l - mx).exp()).sum::<T>().ln())
    }

    fn weighted_sum(&self, rho: T, weight: impl Fn(usize) -> T) -> T {
        self.log_weighted_sum(rho, weight).map_or(T::zero(), |l| l.exp())
    }

    /// ⨍_{∂B(0,ρ)} h² in closed form.
    pub fn sphere_mean_square(&self, rho: T) -> T {
        self.weighted_sum(rho, |_| T::one())
    }

    /// ⨍_{B(0,r)} h² in closed form: Σ d/(2k+d) A_k (r/r_ref)^{2k}.
    pub fn ball_mean_square(&self, r: T) -> T {
        let d = self.d;
        self.weighted_sum(r, |k| from_usize::<T>(d) / from_usize::<T>(2 * k + d))
    }

    /// log of [`Self::ball_mean_square`], safe against overflow.
    pub fn log_ball_mean_square(&self, r: T) -> Option<T> {
        let d = self.d;
        self.log_weighted_sum(r, |k| from_usize::<T>(d) / from_usize::<T>(2 * k + d))
    }

    /// Coefficient-side frequency Σ k A_k s^k / Σ A_k s^k, s = (r/r_ref)².
    pub fn exact_frequency(&self, r: T) -> Result<T> {
        if !(r > T::zero()) {
            return invalid("radius must be positive");
        }
        let den = self
            .log_weighted_sum(r, |_| T::one())
            .ok_or_else(|| Error::UndefinedFrequency("zero expansion".into()))?;
        match self.log_weighted_sum(r, |k| from_usize(k)) {
            None => Ok(T::zero()),
            Some(num) if num.is_finite() && den.is_finite() => Ok((num - den).exp()),
            _ => Err(Error::UndefinedFrequency(format!("boundary mass underflow at r={r}"))),
        }
    }

    /// Splits into degrees ≤ K and > K.
    pub fn truncate(&self, k: usize) -> (Self, Self) {
        let (h, t): (Vec<_>, Vec<_>) = self.terms.iter().partition(|t| t.k <= k);
        (
            Self::new(self.d, self.r_ref, h).expect("subset of valid terms"),
            Self::new(self.d, self.r_ref, t).expect("subset of valid terms"),
        )
    }

    /// Same function with coefficients referred to a new reference radius.
    pub fn with_r_ref(&self, r_new: T) -> Result<Self> {
        let s = r_new / self.r_ref;
        let terms = self.terms.iter().map(|t| Term { a: t.a * s.powi(t.k as i32), ..*t }).collect();
        Self::new(self.d, r_new, terms)
    }

    /// Same coefficients, new reference radius: the function x ↦ h(x·r_old/r_new).
    pub fn rescaled(&self, r_new: T) -> Result<Self> {
        Self::new(self.d, r_new, self.terms.clone())
    }

    pub fn scaled(&self, c: T) -> Self {
        let terms = self.terms.iter().map(|t| Term { a: t.a * c, ..*t }).collect();
        Self::new(self.d, self.r_ref, terms).expect("scaling keeps terms valid")
    }

    /// JSON `{d, r_ref, terms: [[k, m, a]]}` with 17 significant digits.
    pub fn to_json(&self) -> String {
        let terms: Vec<String> =
            self.terms.iter().map(|t| format!("[{}, {}, {:.16e}]", t.k, t.m, to_f64(t.a))).collect();
        format!("{{\"d\": {}, \"r_ref\": {:.16e}, \"terms\": [{}]}}", self.d, to_f64(self.r_ref), terms.join(", "))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(s)?;
        let bad = |m: &str| Error::InvalidArgument(format!("expansion JSON: {m}"));
        let d = v.get("d").and_then(Value::as_u64).ok_or_else(|| bad("missing integer d"))? as usize;
        let r_ref = v.get("r_ref").map_or(Some(1.0), Value::as_f64).ok_or_else(|| bad("r_ref must be a number"))?;
        let arr = v.get("terms").and_then(Value::as_array).ok_or_else(|| bad("missing terms array"))?;
        let mut terms = Vec::with_capacity(arr.len());
        for (i, t) in arr.iter().enumerate() {
            let row = t.as_array().filter(|r| r.len() == 3).ok_or_else(|| bad(&format!("term {i} is not [k, m, a]")))?;
            let k = row[0].as_u64().ok_or_else(|| bad(&format!("term {i}: k must be a nonnegative integer")))?;
            let m = row[1].as_u64().ok_or_else(|| bad(&format!("term {i}: m must be a nonnegative integer")))?;
            let a = row[2].as_f64().ok_or_else(|| bad(&format!("term {i}: a must be a number")))?;
            terms.push(Term { k: k as usize, m: m as usize, a: lit(a) });
        }
        Self::new(d, lit(r_ref), terms)
    }
}
