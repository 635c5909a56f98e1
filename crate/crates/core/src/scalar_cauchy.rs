//! Closed-form solution of the scalar fractional Cauchy problem
//!
//! ```text
//! (∂^ρ)² y + 2α ∂^ρ y + λ y = g,   lim J^{ρ-1} ∂^ρ y = φ₀,   lim J^{ρ-1} y = φ₁
//! ```
//!
//! With `r = √(α²-λ)` and `s∓ = α ∓ r` the Laplace symbol factors as
//! `1/((p^ρ+s⁻)(p^ρ+s⁺))`, so the solution is a combination of
//! `t^{ρ-1} E_{ρ,ρ}(-s∓ t^ρ)` and their convolutions with `g`. When
//! `α² = λ` the double root gives Prabhakar terms with γ = 2.
//!
//! Every value produced here is regularized: multiplied by `t^{1-ρ}`.

use std::cell::Cell;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mlf::MlQuery;
use crate::quad::GradedRule;
use crate::special::gamma;

/// Relative width of the band `|α²-λ| ≤ η α²` treated as degenerate.
pub const DEGENERACY_RTOL: f64 = 1e-6;

/// Time profile `g(t) = t^{ρ-1} Σ_j c_j t^j`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub coeffs: Vec<f64>,
}

impl SourceProfile {
    pub fn zero() -> Self {
        SourceProfile::default()
    }

    pub fn new(coeffs: Vec<f64>) -> Self {
        SourceProfile { coeffs }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    /// `t^{1-ρ} g(t)`.
    pub fn regular(&self, t: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    /// `g(t)`.
    pub fn value(&self, rho: f64, t: f64) -> f64 {
        t.powf(rho - 1.0) * self.regular(t)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        SourceProfile {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }
}

/// Data of one scalar problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub rho: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub phi0: f64,
    pub phi1: f64,
    #[serde(default)]
    pub source: SourceProfile,
}

impl ModeParams {
    pub fn homogeneous(rho: f64, alpha: f64, lambda: f64, phi0: f64, phi1: f64) -> Self {
        ModeParams {
            rho,
            alpha,
            lambda,
            phi0,
            phi1,
            source: SourceProfile::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid(format!("rho must lie in (0,1), got {}", self.rho)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(invalid(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.phi0.is_finite() && self.phi1.is_finite())
            || self.source.coeffs.iter().any(|c| !c.is_finite())
        {
            return Err(Error::InvalidInput("non-finite mode data".into()));
        }
        Ok(())
    }
}

/// Roots `s∓ = α ∓ √(α²-λ)` of `s² - 2αs + λ` and `1/√(α²-λ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchPair {
    pub s_minus: Complex64,
    pub s_plus: Complex64,
    /// `None` on the degenerate branch.
    pub r_inv: Option<Complex64>,
    pub degenerate: bool,
}

pub fn branch_pair(alpha: f64, lambda: f64) -> BranchPair {
    let disc = alpha * alpha - lambda;
    let degenerate = disc.abs() <= DEGENERACY_RTOL * alpha * alpha;
    if degenerate {
        let a = Complex64::new(alpha, 0.0);
        return BranchPair {
            s_minus: a,
            s_plus: a,
            r_inv: None,
            degenerate,
        };
    }
    let r = if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    };
    let a = Complex64::new(alpha, 0.0);
    // s⁻ by the product formula avoids cancellation when λ ≪ α²
    let s_plus = a + r;
    let s_minus = if disc > 0.0 {
        Complex64::new(lambda, 0.0) / s_plus
    } else {
        a - r
    };
    BranchPair {
        s_minus,
        s_plus,
        r_inv: Some(r.inv()),
        degenerate,
    }
}

/// Kernel `t^{μ-1} E^γ_{ρ,μ}(rate · t^ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlKernel {
    pub rho: f64,
    pub mu: f64,
    pub gamma: u8,
    pub rate: Complex64,
}

impl MlKernel {
    pub fn new(rho: f64, mu: f64, gamma: u8, rate: Complex64) -> Self {
        MlKernel {
            rho,
            mu,
            gamma,
            rate,
        }
    }

    /// `E^γ_{ρ,μ}(rate · t^ρ)`, the kernel without its power factor.
    pub fn ml_part(&self, t: f64) -> Result<Complex64> {
        self.ml_at(self.rate * t.powf(self.rho))
    }

    fn ml_at(&self, z: Complex64) -> Result<Complex64> {
        MlQuery::new(self.rho, self.mu, self.gamma, z)
            .evaluate()
            .map(|v| v.value)
    }

    pub fn value(&self, t: f64) -> Result<Complex64> {
        Ok(self.ml_part(t)? * t.powf(self.mu - 1.0))
    }
}

/// `∫_0^t k(t-τ) g(τ) dτ` for `g(τ) = τ^ν h(τ)`.
///
/// The interval is split at `t/2`. On the half next to `τ = t` the
/// substitution `t-τ = (t/2) w^{1/ρ}` turns the kernel into an entire
/// function of `w` times the weight `w^{μ/ρ-1}`; the other half carries the
/// weight `τ^ν`. Both halves use rules graded toward their singular end.
pub fn ml_convolve(
    kernel: &MlKernel,
    nu: f64,
    h: impl Fn(f64) -> Complex64,
    t: f64,
) -> Result<Complex64> {
    if !(nu.is_finite() && nu > -1.0) {
        return Err(invalid(format!("source is not integrable: exponent {nu}")));
    }
    if !(kernel.mu > 0.0) {
        return Err(invalid(format!("kernel is not integrable: mu = {}", kernel.mu)));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    let rho = kernel.rho;
    let half = 0.5 * t;
    let rule = GradedRule::default();
    let failure = Cell::new(None);
    let ml = |z: Complex64| {
        kernel.ml_at(z).unwrap_or_else(|e| {
            failure.set(Some(e));
            Complex64::default()
        })
    };
    let scaled_rate = kernel.rate * half.powf(rho);
    let left = rule.integrate_left(half, nu, 0.0, |tau| {
        let u = t - tau;
        ml(kernel.rate * u.powf(rho)) * u.powf(kernel.mu - 1.0) * h(tau)
    });
    let right = rule.integrate_left(1.0, kernel.mu / rho - 1.0, 0.0, |w| {
        let tau = t - half * w.powf(1.0 / rho);
        ml(scaled_rate * w) * h(tau) * tau.powf(nu)
    });
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let jac = half.powf(kernel.mu) / rho;
    Ok(left + right * jac)
}

/// Closed form `∫_0^t k(t-τ) τ^{β-1} dτ = Γ(β) t^{μ+β-1} E^γ_{ρ,μ+β}(rate t^ρ)`.
pub fn ml_convolve_power(kernel: &MlKernel, beta: f64, t: f64) -> Result<Complex64> {
    let shifted = MlKernel {
        mu: kernel.mu + beta,
        ..*kernel
    };
    Ok(shifted.value(t)? * gamma(beta))
}

/// Regularized values `t^{1-ρ}y`, `t^{1-ρ}∂^ρ y`, `t^{1-ρ}(∂^ρ)² y` at one time.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModeState {
    pub y: Complex64,
    pub drho: Complex64,
    pub drho2: Complex64,
}

/// Solution of one scalar problem, evaluable at any `t > 0`.
#[derive(Debug, Clone)]
pub struct ModeSolution {
    pub params: ModeParams,
    pub branch: BranchPair,
    a_minus: Complex64,
    a_plus: Complex64,
}

impl ModeSolution {
    pub fn new(params: ModeParams) -> Result<Self> {
        params.validate()?;
        let branch = branch_pair(params.alpha, params.lambda);
        let (a_minus, a_plus) = match branch.r_inv {
            Some(ri) => {
                let r = ri.inv();
                let a = Complex64::new(params.alpha, 0.0);
                (
                    ((r + a) * params.phi1 + params.phi0) * ri * 0.5,
                    ((r - a) * params.phi1 - params.phi0) * ri * 0.5,
                )
            }
            None => (Complex64::default(), Complex64::default()),
        };
        Ok(ModeSolution {
            params,
            branch,
            a_minus,
            a_plus,
        })
    }

    /// `t^{1-ρ} (k * g)(t)`, term by term over the source polynomial.
    fn forced(&self, kernel: &MlKernel, t: f64) -> Result<Complex64> {
        let p = &self.params;
        let mut acc = Complex64::default();
        for (j, &c) in p.source.coeffs.iter().enumerate() {
            if c != 0.0 {
                acc += ml_convolve_power(kernel, p.rho + j as f64, t)? * c;
            }
        }
        Ok(acc * t.powf(1.0 - p.rho))
    }

    pub fn state(&self, t: f64) -> Result<ModeState> {
        if !(t.is_finite() && t > 0.0) {
            return Err(invalid(format!("t must be positive, got {t}")));
        }
        let p = &self.params;
        let rho = p.rho;
        let tr = t.powf(rho);
        let g = Complex64::new(p.source.regular(t), 0.0);
        let e_kernel = |s: Complex64| MlKernel::new(rho, rho, 1, -s);
        match self.branch.r_inv {
            Some(ri) => {
                let (sm, sp) = (self.branch.s_minus, self.branch.s_plus);
                let em = e_kernel(sm).ml_part(t)?;
                let ep = e_kernel(sp).ml_part(t)?;
                let cm = self.forced(&e_kernel(sm), t)?;
                let cp = self.forced(&e_kernel(sp), t)?;
                let (am, ap) = (self.a_minus * em, self.a_plus * ep);
                let h = ri * 0.5;
                Ok(ModeState {
                    y: am + ap + (cm - cp) * h,
                    drho: -(sm * am) - sp * ap + (sp * cp - sm * cm) * h,
                    drho2: sm * sm * am + sp * sp * ap + (sm * sm * cm - sp * sp * cp) * h + g,
                })
            }
            None => {
                let a = p.alpha;
                let rate = Complex64::new(-a, 0.0);
                let e0 = MlKernel::new(rho, rho, 1, rate).ml_part(t)?;
                let pp = MlKernel::new(rho, 2.0 * rho, 2, rate).ml_part(t)? * tr;
                let q = self.forced(&MlKernel::new(rho, 2.0 * rho, 2, rate), t)?;
                let k0 = self.forced(&MlKernel::new(rho, rho, 1, rate), t)?;
                let b = a * p.phi1 + p.phi0;
                Ok(ModeState {
                    y: e0 * p.phi1 + pp * b + q,
                    drho: e0 * (-a * p.phi1) + (e0 - pp * a) * b + (k0 - q * a),
                    drho2: e0 * (a * a * p.phi1)
                        + (pp * (a * a) - e0 * (2.0 * a)) * b
                        + (q * (a * a) - k0 * (2.0 * a) + g),
                })
            }
        }
    }

    /// `y(t)` without regularization.
    pub fn y(&self, t: f64) -> Result<Complex64> {
        Ok(self.state(t)?.y * t.powf(self.params.rho - 1.0))
    }
}

/// Regularized samples of one scalar solution on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeTrajectory {
    pub grid: Vec<f64>,
    pub states: Vec<ModeState>,
    pub degenerate: bool,
}

impl ModeTrajectory {
    /// Largest imaginary part over all stored values.
    pub fn max_imag(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| [s.y.im, s.drho.im, s.drho2.im])
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest modulus of the regularized solution.
    pub fn max_abs(&self) -> f64 {
        self.states.iter().fold(0.0, |m, s| m.max(s.y.norm()))
    }
}

/// Solves the scalar problem on `grid` (all points in `(0, T]`).
pub fn solve_scalar(p: &ModeParams, grid: &[f64]) -> Result<ModeTrajectory> {
    if grid.iter().any(|&t| !(t.is_finite() && t > 0.0)) {
        return Err(invalid("time grid must lie in (0, T]"));
    }
    let sol = ModeSolution::new(p.clone())?;
    let states = grid
        .par_iter()
        .map(|&t| sol.state(t))
        .collect::<Result<Vec<_>>>()?;
    Ok(ModeTrajectory {
        grid: grid.to_vec(),
        states,
        degenerate: sol.branch.degenerate,
    })
}
