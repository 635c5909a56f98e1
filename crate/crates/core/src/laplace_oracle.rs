//! Numerical inversion of the Laplace transform of scalar solutions.
//!
//! Transforming the scalar problem with the weighted initial data gives
//!
//! ```text
//! ŷ(p) = (ĝ(p) + p^ρ φ₁ + φ₀ + 2α φ₁) / (p^{2ρ} + 2α p^ρ + λ)
//! ```
//!
//! which is inverted on a cotangent (Talbot-type) contour. Poles on the
//! principal sheet are subtracted first and inverted exactly, so only the
//! branch cut along the negative axis is left to the contour. The symbol is
//! built without reference to the time-domain formulas, so agreement with
//! `scalar_cauchy` is an independent check.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::scalar_cauchy::ModeParams;
use crate::special::gamma;

/// Contour nodes used by [`talbot_invert`].
pub const TALBOT_NODES: usize = 64;

/// Contour scale: the contour is `z(θ) = (SCALE/t) (...)` for every node count.
const SCALE: f64 = 32.0;

// Weideman-Trefethen cotangent contour parameters
const C0: f64 = -0.6122;
const C1: f64 = 0.5017;
const C2: f64 = 0.6407;
const C3: f64 = 0.2645;

/// A simple pole `p` of the symbol with residue `c`, contributing `c e^{pt}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pole {
    pub location: Complex64,
    pub residue: Complex64,
}

/// A Laplace-domain function together with its poles on the principal sheet.
#[derive(Clone)]
pub struct LaplaceSymbol {
    eval: Arc<dyn Fn(Complex64) -> Complex64 + Send + Sync>,
    pub poles: Vec<Pole>,
    /// Real part beyond which the symbol is analytic.
    pub abscissa: f64,
}

impl std::fmt::Debug for LaplaceSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LaplaceSymbol")
            .field("poles", &self.poles)
            .field("abscissa", &self.abscissa)
            .finish()
    }
}

impl LaplaceSymbol {
    /// Symbol analytic off the closed negative real axis apart from `poles`.
    pub fn new(
        eval: impl Fn(Complex64) -> Complex64 + Send + Sync + 'static,
        poles: Vec<Pole>,
    ) -> Self {
        let abscissa = poles.iter().fold(0.0, |m: f64, p| m.max(p.location.re));
        LaplaceSymbol {
            eval: Arc::new(eval),
            poles,
            abscissa,
        }
    }

    pub fn eval(&self, p: Complex64) -> Complex64 {
        (self.eval)(p)
    }

    /// The symbol with its pole parts `c/(p - p*)` removed.
    fn regular_part(&self, p: Complex64) -> Complex64 {
        self.poles
            .iter()
            .fold(self.eval(p), |v, q| v - q.residue / (p - q.location))
    }
}

/// Poles of `N(p)/(p^{2ρ}+2αp^ρ+λ)` on the principal sheet.
///
/// A root `w` of `w²+2αw+λ` yields a pole `p = w^{1/ρ}` only when
/// `|arg w| < ρπ`.
fn quadratic_poles(
    rho: f64,
    alpha: f64,
    lambda: f64,
    numerator: &dyn Fn(Complex64) -> Complex64,
) -> Vec<Pole> {
    let disc = Complex64::new(alpha * alpha - lambda, 0.0).sqrt();
    let mut out = Vec::new();
    for w in [-alpha + disc, -alpha - disc] {
        if w.norm() == 0.0 || w.arg().abs() >= rho * PI {
            continue;
        }
        let p = w.powf(1.0 / rho);
        let dd = p.powf(rho - 1.0) * rho * (w * 2.0 + 2.0 * alpha);
        out.push(Pole {
            location: p,
            residue: numerator(p) / dd,
        });
    }
    out
}

/// `ŷ(p)` for one scalar problem.
pub fn laplace_symbol(params: &ModeParams) -> Result<LaplaceSymbol> {
    params.validate()?;
    let ModeParams {
        rho,
        alpha,
        lambda,
        phi0,
        phi1,
        ..
    } = *params;
    let weights: Vec<(f64, f64)> = params
        .source
        .coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, &c)| (c * gamma(rho + j as f64), -(rho + j as f64)))
        .collect();
    if weights.iter().any(|(w, _)| !w.is_finite()) {
        return Err(Error::Unsupported("source transform overflows".into()));
    }
    let numerator = move |p: Complex64| {
        let g: Complex64 = weights.iter().map(|&(w, e)| p.powf(e) * w).sum();
        g + p.powf(rho) * phi1 + phi0 + 2.0 * alpha * phi1
    };
    let degenerate = (alpha * alpha - lambda).abs() <= 1e-6 * alpha * alpha;
    let poles = if degenerate {
        // the double root -α never lies on the principal sheet
        Vec::new()
    } else {
        quadratic_poles(rho, alpha, lambda, &numerator)
    };
    let eval = move |p: Complex64| {
        let q = p.powf(rho);
        let den = if degenerate {
            (q + alpha) * (q + alpha)
        } else {
            q * q + q * (2.0 * alpha) + lambda
        };
        numerator(p) / den
    };
    Ok(LaplaceSymbol::new(eval, poles))
}

/// `1/(p^ρ + a)^m` for `m ∈ {1, 2}`, `a > 0`.
pub fn power_resolvent(rho: f64, a: f64, m: u32) -> Result<LaplaceSymbol> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid(format!("rho must lie in (0,1], got {rho}")));
    }
    if !(a > 0.0) || !(m == 1 || m == 2) {
        return Err(invalid("resolvent needs a > 0 and power 1 or 2"));
    }
    let poles = if rho == 1.0 && m == 1 {
        vec![Pole {
            location: Complex64::new(-a, 0.0),
            residue: Complex64::new(1.0, 0.0),
        }]
    } else if rho == 1.0 {
        return Err(Error::Unsupported("double pole on the principal sheet".into()));
    } else {
        Vec::new()
    };
    Ok(LaplaceSymbol::new(
        move |p: Complex64| (p.powf(rho) + a).powi(-(m as i32)),
        poles,
    ))
}

/// `1/p`.
pub fn unit_step() -> LaplaceSymbol {
    LaplaceSymbol::new(|p: Complex64| p.inv(), Vec::new())
}

/// Inverse transform at `t > 0` with [`TALBOT_NODES`] nodes.
pub fn talbot_invert(f: &LaplaceSymbol, t: f64) -> Result<Complex64> {
    talbot_invert_n(f, t, TALBOT_NODES)
}

fn contour(sigma: f64, t: f64, theta: f64) -> (Complex64, Complex64) {
    let s = sigma / t;
    if theta == 0.0 {
        return (
            Complex64::new(s * (C0 + C1 / C2), 0.0),
            Complex64::new(0.0, s * C3),
        );
    }
    let a = C2 * theta;
    let cot = a.cos() / a.sin();
    let z = Complex64::new(s * (C0 + C1 * theta * cot), s * C3 * theta);
    let dz = Complex64::new(s * (C1 * cot - C1 * a / (a.sin() * a.sin())), s * C3);
    (z, dz)
}

/// Inverse transform at `t > 0` with `n` contour nodes.
pub fn talbot_invert_n(f: &LaplaceSymbol, t: f64, n: usize) -> Result<Complex64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid(format!("t must be positive, got {t}")));
    }
    if n < 8 {
        return Err(invalid("at least 8 contour nodes are required"));
    }
    let sigma = SCALE;
    let h = 2.0 * PI / n as f64;
    let mut acc = Complex64::default();
    // pair θ and -θ so that real-symmetric symbols give exactly real results
    for k in 0..n / 2 {
        let theta = (k as f64 + 0.5) * h;
        let mut pair = Complex64::default();
        for th in [theta, -theta] {
            let (z, dz) = contour(sigma, t, th);
            pair += (z * t).exp() * f.regular_part(z) * dz;
        }
        acc += pair;
    }
    let mut value = acc * h / Complex64::new(0.0, 2.0 * PI);
    for p in &f.poles {
        value += p.residue * (p.location * t).exp();
    }
    if !(value.re.is_finite() && value.im.is_finite()) {
        return Err(Error::AccuracyFailure {
            what: "contour sum overflowed".into(),
            achieved: f64::INFINITY,
        });
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlf::{ml_real, prabhakar_eval};
    use approx::assert_relative_eq;

    #[test]
    fn unit_step_inverts_to_one() {
        for &t in &[0.05, 0.3, 1.0, 7.0] {
            let v = talbot_invert(&unit_step(), t).unwrap();
            assert_relative_eq!(v.re, 1.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn resolvent_gives_mittag_leffler() {
        for &(rho, a) in &[(0.3, 1.0), (0.6, 2.5), (0.95, 0.4)] {
            let f = power_resolvent(rho, a, 1).unwrap();
            for &t in &[0.1_f64, 0.5, 1.0] {
                let v = talbot_invert(&f, t).unwrap().re;
                let e = t.powf(rho - 1.0) * ml_real(rho, rho, -a * t.powf(rho)).unwrap();
                assert_relative_eq!(v, e, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn squared_resolvent_gives_prabhakar() {
        let (rho, a) = (0.6, 2.0);
        let f = power_resolvent(rho, a, 2).unwrap();
        for &t in &[0.1_f64, 0.5, 1.0] {
            let v = talbot_invert(&f, t).unwrap().re;
            let z = Complex64::new(-a * t.powf(rho), 0.0);
            let e = t.powf(2.0 * rho - 1.0) * prabhakar_eval(rho, 2.0 * rho, z).unwrap().re;
            assert_relative_eq!(v, e, max_relative = 1e-10);
        }
    }

    #[test]
    fn symbol_examples() {
        let p = Complex64::new(0.7, 1.3);
        let (rho, alpha, lambda) = (0.4, 1.5, 7.0);
        let q = p.powf(rho);
        let den = q * q + q * (2.0 * alpha) + lambda;
        let mut m = ModeParams::homogeneous(rho, alpha, lambda, 0.0, 1.0);
        let s = laplace_symbol(&m).unwrap();
        assert!((s.eval(p) - (q + 2.0 * alpha) / den).norm() < 1e-15);
        m.phi1 = 0.0;
        m.source.coeffs = vec![1.0];
        let s = laplace_symbol(&m).unwrap();
        let expect = gamma(rho) * p.powf(-rho) / den;
        assert!((s.eval(p) - expect).norm() < 1e-15);
        let d = laplace_symbol(&ModeParams::homogeneous(rho, 2.0, 4.0, 1.0, 0.0)).unwrap();
        assert!((d.eval(p) - (q + 2.0).powi(-2)).norm() < 1e-15);
    }

    #[test]
    fn poles_are_inverted_exactly() {
        // ρ close to 1 with λ ≫ α² puts poles on the principal sheet
        let m = ModeParams::homogeneous(0.95, 0.2, 400.0, 0.0, 1.0);
        let s = laplace_symbol(&m).unwrap();
        assert_eq!(s.poles.len(), 2);
        let a = talbot_invert_n(&s, 1.0, 64).unwrap();
        let b = talbot_invert_n(&s, 1.0, 128).unwrap();
        assert!((a - b).norm() < 1e-10 * a.norm().max(1.0), "{a} {b}");
        assert!(a.im.abs() < 1e-14 * a.norm().max(1.0));
    }

    #[test]
    fn rejects_bad_time() {
        assert!(talbot_invert(&unit_step(), 0.0).is_err());
        assert!(talbot_invert_n(&unit_step(), 1.0, 4).is_err());
    }
}
