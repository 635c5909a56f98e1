//! Riemann-Liouville fractional integrals and derivatives.
//!
//! Functions are passed in split form `g(t) = t^ν h(t)` with `h` bounded
//! near the origin, so that the algebraic factor can be carried by the
//! quadrature weight. The fractional integral of order `σ < 0` is
//!
//! ```text
//! J^σ g(t) = 1/Γ(-σ) ∫_0^t g(ξ) (t-ξ)^{-σ-1} dξ
//! ```
//!
//! and `∂^ρ g = d/dt J^{ρ-1} g`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::quad::{Accumulate, GaussJacobi, GradedRule};
use crate::special::{gamma, rgamma};

/// Nodes per panel for the product-integration oracle.
const PANEL_NODES: usize = 16;

/// Default starting time for [`rl_limit`].
pub const LIMIT_T0: f64 = 1e-2;

/// Samples of a function that may be singular like `t^ν` at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularFunctionSamples {
    pub grid: Vec<f64>,
    pub values: Vec<Complex64>,
    pub singular_exponent: f64,
}

impl SingularFunctionSamples {
    pub fn new(grid: Vec<f64>, values: Vec<Complex64>, singular_exponent: f64) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(invalid("grid and values differ in length"));
        }
        if grid.len() < 3 {
            return Err(invalid("at least three samples are required"));
        }
        if !(grid[0] > 0.0) {
            return Err(invalid("grid must start strictly after t = 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("grid must be strictly increasing"));
        }
        if !(singular_exponent.is_finite() && singular_exponent > -1.0) {
            return Err(invalid("singular exponent must exceed -1"));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("non-finite sample".into()));
        }
        let s = SingularFunctionSamples {
            grid,
            values,
            singular_exponent,
        };
        // t^{-ν} g must not blow up toward the first node
        let h: Vec<f64> = (0..3).map(|i| s.regular(i).norm()).collect();
        let scale = h[1].max(h[2]).max(f64::MIN_POSITIVE);
        if h[0] > 1e3 * scale && h[0] > 1e-200 {
            return Err(Error::InvalidInput(format!(
                "t^(-{}) g is not bounded near 0",
                singular_exponent
            )));
        }
        Ok(s)
    }

    /// Samples `g = t^ν h` on `grid`.
    pub fn from_fn(
        grid: Vec<f64>,
        singular_exponent: f64,
        h: impl Fn(f64) -> Complex64 + Sync,
    ) -> Result<Self> {
        let values = grid
            .par_iter()
            .map(|&t| h(t) * t.powf(singular_exponent))
            .collect();
        Self::new(grid, values, singular_exponent)
    }

    /// `t^{-ν} g(t)` at sample `i`.
    pub fn regular(&self, i: usize) -> Complex64 {
        self.values[i] * self.grid[i].powf(-self.singular_exponent)
    }

    /// Piecewise-linear interpolant of `t^{-ν} g`, extended linearly to the
    /// left of the first node.
    pub fn regular_at(&self, t: f64) -> Complex64 {
        let n = self.grid.len();
        let i = match self.grid.partition_point(|&x| x < t) {
            0 => 1,
            i if i >= n => n - 1,
            i => i,
        };
        let (a, b) = (self.grid[i - 1], self.grid[i]);
        let (ha, hb) = (self.regular(i - 1), self.regular(i));
        ha + (hb - ha) * ((t - a) / (b - a))
    }
}

/// Graded grid `t_j = T (j/N)^{2/ρ}`, `j = 1..=N`.
pub fn graded_grid(horizon: f64, n: usize, rho: f64) -> Vec<f64> {
    let p = 2.0 / rho;
    (1..=n)
        .map(|j| horizon * (j as f64 / n as f64).powf(p))
        .collect()
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    Ok(())
}

fn check_exponent(nu: f64) -> Result<()> {
    if !(nu.is_finite() && nu > -1.0) {
        return Err(invalid(format!(
            "singular exponent must exceed -1 for integrability, got {nu}"
        )));
    }
    Ok(())
}

/// `J^σ g(t)` for `g(ξ) = ξ^ν h(ξ)`, `σ < 0`.
pub fn rl_integral<T: Accumulate>(
    sigma: f64,
    t: f64,
    nu: f64,
    h: impl Fn(f64) -> T,
) -> Result<T> {
    if !(sigma.is_finite() && sigma < 0.0) {
        return Err(invalid(format!("integration order must be negative, got {sigma}")));
    }
    check_time(t)?;
    check_exponent(nu)?;
    let v = GradedRule::default().integrate_two_sided(t, nu, -sigma - 1.0, h);
    Ok(v * rgamma(-sigma))
}

/// `∂^ρ g(t)` for `g(ξ) = ξ^ν h(ξ)`, with `h'` taken by finite differences.
pub fn rl_derivative<T: Accumulate>(
    rho: f64,
    t: f64,
    nu: f64,
    h: impl Fn(f64) -> T,
) -> Result<T> {
    let dh = |x: f64| fd_derivative(&h, x);
    rl_derivative_with(rho, t, nu, &h, dh)
}

/// `∂^ρ g(t)` for `g(ξ) = ξ^ν h(ξ)` with an explicit derivative `dh`.
///
/// After the substitution `ξ = t s`,
/// `J^{ρ-1} g(t) = t^{1-ρ+ν}/Γ(1-ρ) ∫_0^1 s^ν (1-s)^{-ρ} h(ts) ds`,
/// which is differentiated in `t` under the integral sign.
pub fn rl_derivative_with<T: Accumulate>(
    rho: f64,
    t: f64,
    nu: f64,
    h: impl Fn(f64) -> T,
    dh: impl Fn(f64) -> T,
) -> Result<T> {
    if !(rho.is_finite() && rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("rho must lie in (0,1], got {rho}")));
    }
    check_time(t)?;
    check_exponent(nu)?;
    if rho == 1.0 {
        return Ok(h(t) * (nu * t.powf(nu - 1.0)) + dh(t) * t.powf(nu));
    }
    let rule = GradedRule::default();
    let c = rgamma(1.0 - rho);
    let base = rule.integrate_two_sided(1.0, nu, -rho, |s| h(t * s)) * c;
    let slope = rule.integrate_two_sided(1.0, nu + 1.0, -rho, |s| dh(t * s)) * c;
    let e = 1.0 - rho + nu;
    Ok(base * (e * t.powf(e - 1.0)) + slope * t.powf(e))
}

/// Five-point central difference with a step relative to `x`.
fn fd_derivative<T: Accumulate>(h: &impl Fn(f64) -> T, x: f64) -> T {
    let d = 1e-3 * x;
    let f1 = h(x + d) + h(x - d) * -1.0;
    let f2 = h(x + 2.0 * d) + h(x - 2.0 * d) * -1.0;
    (f1 * 8.0 + f2 * -1.0) * (1.0 / (12.0 * d))
}

/// `lim_{t→0+} J^{α-1} g = Γ(α) lim t^{1-α} g(t)`, with the limit of the
/// continuous function `t^{1-α} g` extrapolated from `t = t0 2^{-k}`.
pub fn rl_limit(g: impl Fn(f64) -> f64, order_alpha: f64) -> Result<f64> {
    rl_limit_from(g, order_alpha, LIMIT_T0)
}

/// [`rl_limit`] with an explicit starting time.
pub fn rl_limit_from(g: impl Fn(f64) -> f64, order_alpha: f64, t0: f64) -> Result<f64> {
    let a = order_alpha;
    if !(a > 0.0 && a < 1.0) {
        return Err(invalid(format!("order must lie in (0,1), got {a}")));
    }
    check_time(t0)?;
    let ts: Vec<f64> = (0..6).map(|k| t0 * 0.5f64.powi(k)).collect();
    let vs: Vec<f64> = ts.iter().map(|&t| t.powf(1.0 - a) * g(t)).collect();
    if vs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoLimit("non-finite sample near t = 0".into()));
    }
    let exps = limit_exponents(a);
    let coarse = fit_constant(&ts[..5], &vs[..5], &exps)?;
    let fine = fit_constant(&ts[1..], &vs[1..], &exps)?;
    let scale = vs.iter().fold(fine.abs(), |m, v| m.max(v.abs()));
    if (coarse - fine).abs() > 1e-3 * scale.max(1e-300) {
        return Err(Error::NoLimit(format!(
            "extrapolated values {coarse:.6e} and {fine:.6e} disagree"
        )));
    }
    Ok(gamma(a) * fine)
}

/// Correction exponents used by the limit fit: the smallest four of
/// `{α, 1-α, 2α, 1, 3α, 1+α}`.
fn limit_exponents(a: f64) -> Vec<f64> {
    let mut e = vec![a, 1.0 - a, 2.0 * a, 1.0, 3.0 * a, 1.0 + a];
    e.sort_by(|x, y| x.total_cmp(y));
    e.dedup_by(|x, y| (*x - *y).abs() < 1e-9);
    e.truncate(4);
    e
}

fn fit_constant(ts: &[f64], vs: &[f64], exps: &[f64]) -> Result<f64> {
    let n = ts.len();
    let m = (exps.len() + 1).min(n);
    let a = DMatrix::from_fn(n, m, |i, j| {
        if j == 0 {
            1.0
        } else {
            (ts[i] / ts[0]).powf(exps[j - 1])
        }
    });
    let b = DVector::from_column_slice(vs);
    let x = if m == n {
        a.lu().solve(&b)
    } else {
        (a.transpose() * &a).lu().solve(&(a.transpose() * b))
    };
    match x {
        Some(x) if x[0].is_finite() => Ok(x[0]),
        _ => Err(Error::NoLimit("singular extrapolation system".into())),
    }
}

/// Discrete RL derivative of sampled data, used as an independent oracle.
///
/// `J^{ρ-1} g` is computed at every node by exact product integration of a
/// piecewise-linear interpolant of `t^{-ν} g` against `ξ^ν (t-ξ)^{-ρ}`, then
/// differentiated with nonuniform three-point differences.
pub fn gl_derivative_grid(
    samples: &SingularFunctionSamples,
    rho: f64,
) -> Result<SingularFunctionSamples> {
    let n = samples.grid.len();
    if n < 8 {
        return Err(invalid(format!("need at least 8 grid points, got {n}")));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("rho must lie in (0,1], got {rho}")));
    }
    let t = &samples.grid;
    let nu = samples.singular_exponent;
    let h: Vec<Complex64> = (0..n).map(|i| samples.regular(i)).collect();
    let f: Vec<Complex64> = if rho == 1.0 {
        samples.values.clone()
    } else {
        let c = rgamma(1.0 - rho);
        (0..n)
            .into_par_iter()
            .map(|j| {
                let tj = t[j];
                let mut acc = Complex64::default();
                for i in 0..=j {
                    // panel [t_{i-1}, t_i] with t_{-1} = 0; the first panel
                    // reuses the line through the first two samples
                    let (lo, hi) = if i == 0 { (0.0, t[0]) } else { (t[i - 1], t[i]) };
                    let (xa, xb, ha, hb) = if i == 0 {
                        (t[0], t[1], h[0], h[1])
                    } else {
                        (t[i - 1], t[i], h[i - 1], h[i])
                    };
                    let (m0, m1) = power_moments(lo, hi, tj, nu, rho);
                    let slope = (hb - ha) / (xb - xa);
                    acc += ha * m0 + slope * (m1 - xa * m0);
                }
                acc * c
            })
            .collect()
    };
    let mut d = vec![Complex64::default(); n];
    for j in 0..n {
        let (k, at) = match j {
            0 => (0, 0),
            j if j == n - 1 => (n - 3, 2),
            j => (j - 1, 1),
        };
        let (x0, x1, x2) = (t[k], t[k + 1], t[k + 2]);
        let (h1, h2) = (x1 - x0, x2 - x1);
        let w = match at {
            0 => [
                -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
                (h1 + h2) / (h1 * h2),
                -h1 / (h2 * (h1 + h2)),
            ],
            1 => [
                -h2 / (h1 * (h1 + h2)),
                (h2 - h1) / (h1 * h2),
                h1 / (h2 * (h1 + h2)),
            ],
            _ => [
                h2 / (h1 * (h1 + h2)),
                -(h1 + h2) / (h1 * h2),
                (h1 + 2.0 * h2) / (h2 * (h1 + h2)),
            ],
        };
        d[j] = f[k] * w[0] + f[k + 1] * w[1] + f[k + 2] * w[2];
    }
    let out_exp = if (nu - (rho - 1.0)).abs() < 1e-12 {
        nu
    } else {
        (nu - rho).max(-1.0 + 1e-12)
    };
    Ok(SingularFunctionSamples {
        grid: t.clone(),
        values: d,
        singular_exponent: out_exp,
    })
}

/// `(∫ w, ∫ w ξ)` over `[lo, hi]` for `w(ξ) = ξ^ν (t-ξ)^{-ρ}`, `hi ≤ t`.
fn power_moments(lo: f64, hi: f64, t: f64, nu: f64, rho: f64) -> (f64, f64) {
    let mut m = (0.0, 0.0);
    power_moments_into(lo, hi, t, nu, rho, &mut m);
    m
}

fn power_moments_into(lo: f64, hi: f64, t: f64, nu: f64, rho: f64, m: &mut (f64, f64)) {
    let singular_right = hi >= t;
    if lo == 0.0 {
        let r = if singular_right {
            GaussJacobi::cached(PANEL_NODES, -rho, nu)
        } else {
            GaussJacobi::cached(PANEL_NODES, 0.0, nu)
        };
        let k = |x: f64| if singular_right { 1.0 } else { (t - x).powf(-rho) };
        let v: Complex64 = r.integrate(lo, hi, |x| Complex64::new(k(x), k(x) * x));
        m.0 += v.re;
        m.1 += v.im;
        return;
    }
    if singular_right {
        let mid = 0.5 * (lo + hi);
        let r = GaussJacobi::cached(PANEL_NODES, -rho, 0.0);
        let v: Complex64 = r.integrate(mid, hi, |x| {
            let p = x.powf(nu);
            Complex64::new(p, p * x)
        });
        m.0 += v.re;
        m.1 += v.im;
        return power_moments_into(lo, mid, t, nu, rho, m);
    }
    if hi > 2.0 * lo {
        power_moments_into(lo, 2.0 * lo, t, nu, rho, m);
        return power_moments_into(2.0 * lo, hi, t, nu, rho, m);
    }
    let r = GaussJacobi::cached(PANEL_NODES, 0.0, 0.0);
    let v: Complex64 = r.integrate(lo, hi, |x| {
        let w = x.powf(nu) * (t - x).powf(-rho);
        Complex64::new(w, w * x)
    });
    m.0 += v.re;
    m.1 += v.im;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn integral_of_constant() {
        let v = rl_integral(-1.0, 2.0, 0.0, |_| 1.0).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn integral_power_rule_constant_case() {
        let rho = 0.6;
        for &t in &[0.01, 0.3, 1.7] {
            let v = rl_integral(rho - 1.0, t, rho - 1.0, |_| 1.0).unwrap();
            assert_relative_eq!(v, 1.489192248812817, max_relative = 1e-12);
        }
    }

    #[test]
    fn integral_of_identity() {
        let v = rl_integral(-0.5, 1.0, 1.0, |_| 1.0).unwrap();
        assert_relative_eq!(v, 0.7522527780636751, max_relative = 1e-12);
    }

    #[test]
    fn integral_rejects_bad_arguments() {
        assert!(rl_integral(0.0, 1.0, 0.0, |_| 1.0).is_err());
        assert!(rl_integral(-0.5, 0.0, 0.0, |_| 1.0).is_err());
        assert!(rl_integral(-0.5, 1.0, -1.5, |_| 1.0).is_err());
    }

    #[test]
    fn derivative_of_order_one_is_classical() {
        let v = rl_derivative(1.0, 1.0, 2.0, |_| 1.0).unwrap();
        assert_relative_eq!(v, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn derivative_annihilates_t_to_rho_minus_one() {
        for &rho in &[0.2, 0.5, 0.9] {
            let v: f64 = rl_derivative(rho, 0.7, rho - 1.0, |_| 1.0).unwrap();
            assert!(v.abs() < 1e-13, "{rho}: {v}");
        }
    }

    #[test]
    fn derivative_power_rule() {
        // ∂^ρ t^{μ-1} = Γ(μ)/Γ(μ-ρ) t^{μ-ρ-1}
        let (rho, mu, t) = (0.4_f64, 2.3_f64, 0.9_f64);
        let v = rl_derivative(rho, t, mu - 1.0, |_| 1.0).unwrap();
        let exact = gamma(mu) * rgamma(mu - rho) * t.powf(mu - rho - 1.0);
        assert_relative_eq!(v, exact, max_relative = 1e-12);
    }

    #[test]
    fn limit_of_power() {
        let rho = 0.35;
        let v = rl_limit(|t: f64| t.powf(rho - 1.0), rho).unwrap();
        assert_relative_eq!(v, gamma(rho), max_relative = 1e-12);
        let w = rl_limit(|t: f64| 3.0 + t.cos(), 0.5).unwrap();
        assert!(w.abs() < 1e-6, "{w}");
    }

    #[test]
    fn limit_detects_divergence() {
        let r = rl_limit(|t: f64| t.powf(-0.9), 0.5);
        assert!(matches!(r, Err(Error::NoLimit(_))), "{r:?}");
    }

    #[test]
    fn oracle_is_classical_for_order_one() {
        let grid = graded_grid(1.0, 64, 1.0);
        let s = SingularFunctionSamples::from_fn(grid, 1.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let d = gl_derivative_grid(&s, 1.0).unwrap();
        for v in &d.values[1..63] {
            assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn oracle_power_moments_are_exact() {
        let (nu, rho, t) = (-0.3, 0.6, 0.8);
        let (m0, m1) = power_moments(0.0, t, t, nu, rho);
        let (a0, a1) = power_moments(0.0, 0.001, t, nu, rho);
        let (b0, b1) = power_moments(0.001, 0.5, t, nu, rho);
        let (c0, c1) = power_moments(0.5, t, t, nu, rho);
        assert_relative_eq!(a0 + b0 + c0, m0, max_relative = 1e-13);
        assert_relative_eq!(a1 + b1 + c1, m1, max_relative = 1e-13);
        let exact = t.powf(nu + 1.0 - rho) * crate::quad::beta(nu + 1.0, 1.0 - rho);
        assert_relative_eq!(m0, exact, max_relative = 1e-13);
    }

    #[test]
    fn samples_validation() {
        assert!(SingularFunctionSamples::new(vec![0.0, 1.0, 2.0], vec![Complex64::default(); 3], 0.0).is_err());
        assert!(SingularFunctionSamples::new(vec![1.0, 0.5, 2.0], vec![Complex64::default(); 3], 0.0).is_err());
        let blow = SingularFunctionSamples::from_fn(vec![1e-8, 0.5, 1.0], 0.0, |t| Complex64::new(1.0 / t, 0.0));
        assert!(blow.is_err());
    }
}
