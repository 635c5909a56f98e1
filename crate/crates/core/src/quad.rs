//! Gauss-Jacobi rules and geometrically graded composite rules for
//! integrands with algebraic endpoint singularities.

use std::collections::HashMap;
use std::ops::{Add, Mul};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::special::{gamma, ln_gamma};

/// Values a quadrature rule can accumulate.
pub trait Accumulate: Copy + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl<T> Accumulate for T where T: Copy + Default + Add<Output = T> + Mul<f64, Output = T> {}

/// Gauss-Jacobi rule on [-1, 1] for the weight (1-x)^a (1+x)^b.
#[derive(Debug, Clone)]
pub struct GaussJacobi {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussJacobi {
    /// Golub-Welsch construction from the monic Jacobi recurrence.
    pub fn new(n: usize, a: f64, b: f64) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        assert!(a > -1.0 && b > -1.0, "Jacobi exponents must exceed -1");
        let ab = a + b;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        diag[0] = (b - a) / (ab + 2.0);
        for (i, d) in diag.iter_mut().enumerate().skip(1) {
            let k = i as f64;
            *d = (b * b - a * a) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0));
        }
        for (i, o) in off.iter_mut().enumerate() {
            let k = (i + 1) as f64;
            let beta = if i == 0 {
                4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
            } else {
                let s = 2.0 * k + ab;
                4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
            };
            *o = beta.sqrt();
        }
        let mut jac = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            jac[(i, i)] = diag[i];
            if i + 1 < n {
                jac[(i, i + 1)] = off[i];
                jac[(i + 1, i)] = off[i];
            }
        }
        let eig = SymmetricEigen::new(jac);
        let mu0 = ((ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
            - ln_gamma(ab + 2.0))
        .exp();
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let v0 = eig.eigenvectors[(0, i)];
                (eig.eigenvalues[i], mu0 * v0 * v0)
            })
            .collect();
        pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
        let mut rule = GaussJacobi {
            a,
            b,
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1).collect(),
        };
        rule.polish();
        rule
    }

    /// Newton refinement of the nodes against the Jacobi polynomial.
    fn polish(&mut self) {
        let n = self.nodes.len();
        for x in self.nodes.iter_mut() {
            for _ in 0..3 {
                let (p, dp) = jacobi_p(n, self.a, self.b, *x);
                if dp == 0.0 || !dp.is_finite() {
                    break;
                }
                let step = p / dp;
                if !step.is_finite() || step.abs() > 1e-6 {
                    break;
                }
                *x -= step;
            }
        }
    }

    /// Shared rule from a process-wide cache.
    pub fn cached(n: usize, a: f64, b: f64) -> Arc<GaussJacobi> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, u64, u64), Arc<GaussJacobi>>>> =
            OnceLock::new();
        let key = (n, a.to_bits(), b.to_bits());
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(rule) = cache.lock().unwrap().get(&key) {
            return Arc::clone(rule);
        }
        let rule = Arc::new(GaussJacobi::new(n, a, b));
        cache
            .lock()
            .unwrap()
            .entry(key)
            .or_insert_with(|| Arc::clone(&rule));
        rule
    }

    /// ∫_lo^hi (hi-x)^a (x-lo)^b f(x) dx.
    pub fn integrate<T: Accumulate>(&self, lo: f64, hi: f64, f: impl Fn(f64) -> T) -> T {
        let half = 0.5 * (hi - lo);
        let scale = half.powf(self.a + self.b + 1.0);
        let mut acc = T::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(lo + half * (1.0 + x)) * *w;
        }
        acc * scale
    }
}

/// Jacobi polynomial P_n^{(a,b)} and its derivative.
fn jacobi_p(n: usize, a: f64, b: f64, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = 0.5 * (a - b + (a + b + 2.0) * x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let s = 2.0 * k + a + b;
        let c1 = 2.0 * k * (k + a + b) * (s - 2.0);
        let c2 = (s - 1.0) * (a * a - b * b);
        let c3 = (s - 2.0) * (s - 1.0) * s;
        let c4 = 2.0 * (k + a - 1.0) * (k + b - 1.0) * s;
        let p2 = ((c2 + c3 * x) * p1 - c4 * p0) / c1;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let s = 2.0 * nf + a + b;
    let dp = (nf * (a - b - s * x) * p1 + 2.0 * (nf + a) * (nf + b) * p0) / (s * (1.0 - x * x));
    (p1, dp)
}

/// Composite rule on [0, len] with panels shrinking geometrically toward
/// the singular end(s). End panels carry the algebraic weight exactly.
#[derive(Debug, Clone, Copy)]
pub struct GradedRule {
    pub panels: usize,
    pub nodes: usize,
    pub ratio: f64,
}

impl Default for GradedRule {
    fn default() -> Self {
        GradedRule {
            panels: 8,
            nodes: 16,
            ratio: 0.25,
        }
    }
}

impl GradedRule {
    /// ∫_0^len ξ^left (len-ξ)^right f(ξ) dξ, panels graded toward ξ = 0.
    pub fn integrate_left<T: Accumulate>(
        &self,
        len: f64,
        left: f64,
        right: f64,
        f: impl Fn(f64) -> T,
    ) -> T {
        let p = self.panels.max(1);
        if p == 1 {
            return GaussJacobi::cached(self.nodes, right, left).integrate(0.0, len, f);
        }
        let mut acc = T::default();
        let mut lo = 0.0;
        for i in 1..=p {
            let hi = if i == p {
                len
            } else {
                len * self.ratio.powi((p - i) as i32)
            };
            let part = if i == 1 {
                GaussJacobi::cached(self.nodes, 0.0, left)
                    .integrate(lo, hi, |x| f(x) * (len - x).powf(right))
            } else if i == p {
                GaussJacobi::cached(self.nodes, right, 0.0)
                    .integrate(lo, hi, |x| f(x) * x.powf(left))
            } else {
                GaussJacobi::cached(self.nodes, 0.0, 0.0)
                    .integrate(lo, hi, |x| f(x) * (x.powf(left) * (len - x).powf(right)))
            };
            acc = acc + part;
            lo = hi;
        }
        acc
    }

    /// ∫_0^len ξ^left (len-ξ)^right f(ξ) dξ, graded toward both ends.
    pub fn integrate_two_sided<T: Accumulate>(
        &self,
        len: f64,
        left: f64,
        right: f64,
        f: impl Fn(f64) -> T,
    ) -> T {
        let half = 0.5 * len;
        let p = self.panels.max(1);
        let legendre = GaussJacobi::cached(self.nodes, 0.0, 0.0);
        let mut acc = T::default();
        for i in 0..p {
            // panel i counted from the singular end
            let near = if i == 0 { 0.0 } else { half * self.ratio.powi((p - i) as i32) };
            let far = if i + 1 == p {
                half
            } else {
                half * self.ratio.powi((p - i - 1) as i32)
            };
            let (lo_l, hi_l) = (near, far);
            let (lo_r, hi_r) = (len - far, len - near);
            let left_part = if i == 0 {
                GaussJacobi::cached(self.nodes, 0.0, left)
                    .integrate(lo_l, hi_l, |x| f(x) * (len - x).powf(right))
            } else {
                legendre.integrate(lo_l, hi_l, |x| f(x) * (x.powf(left) * (len - x).powf(right)))
            };
            let right_part = if i == 0 {
                GaussJacobi::cached(self.nodes, right, 0.0)
                    .integrate(lo_r, hi_r, |x| f(x) * x.powf(left))
            } else {
                legendre.integrate(lo_r, hi_r, |x| f(x) * (x.powf(left) * (len - x).powf(right)))
            };
            acc = acc + left_part + right_part;
        }
        acc
    }
}

/// Beta function B(p, q) for positive arguments.
pub fn beta(p: f64, q: f64) -> f64 {
    if p + q < 150.0 {
        gamma(p) * gamma(q) / gamma(p + q)
    } else {
        (ln_gamma(p) + ln_gamma(q) - ln_gamma(p + q)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = GaussJacobi::new(8, 0.0, 0.0);
        let v = r.integrate(0.0, 2.0, |x: f64| x.powi(15));
        assert_relative_eq!(v, 2f64.powi(16) / 16.0, max_relative = 1e-13);
    }

    #[test]
    fn jacobi_weight_moments() {
        // ∫_0^1 (1-x)^a x^b dx = B(a+1, b+1)
        for &(a, b) in &[(-0.5, -0.5), (-0.4, 0.3), (0.2, -0.7), (-0.9, -0.9)] {
            let r = GaussJacobi::new(16, a, b);
            let v = r.integrate(0.0, 1.0, |_| 1.0);
            assert_relative_eq!(v, beta(a + 1.0, b + 1.0), max_relative = 1e-13);
            let v2 = r.integrate(0.0, 1.0, |x: f64| x * x);
            assert_relative_eq!(v2, beta(a + 1.0, b + 3.0), max_relative = 1e-13);
        }
    }

    #[test]
    fn graded_rules_resolve_fractional_powers() {
        // ∫_0^1 x^{-0.4} (1-x)^{-0.3} (1 + x + x^2) dx
        let rule = GradedRule::default();
        let exact = beta(0.6, 0.7) + beta(1.6, 0.7) + beta(2.6, 0.7);
        let v = rule.integrate_left(1.0, -0.4, -0.3, |x: f64| 1.0 + x + x * x);
        assert_relative_eq!(v, exact, max_relative = 1e-12);
        let w = rule.integrate_two_sided(1.0, -0.4, -0.3, |x: f64| 1.0 + x + x * x);
        assert_relative_eq!(w, exact, max_relative = 1e-12);
    }

    #[test]
    fn cached_rule_is_shared() {
        let a = GaussJacobi::cached(12, -0.25, 0.5);
        let b = GaussJacobi::cached(12, -0.25, 0.5);
        assert!(Arc::ptr_eq(&a, &b));
    }
}
