//! Two-parameter Mittag-Leffler function E_{ρ,μ}(z) and the three-parameter
//! Prabhakar function E^γ_{ρ,μ}(z) for γ ∈ {1, 2}.
//!
//! Evaluation strategy:
//!
//! * `z = 0`: the leading Taylor coefficient `1/Γ(μ)` (zero at the poles of Γ).
//! * small `|z|`: the Taylor series, accepted only when the sum of term
//!   magnitudes stays within a small factor of the result.
//! * otherwise: inversion of the Laplace transform `s^{ρ-μ}/(s^ρ - z)` on an
//!   optimally placed parabolic contour, plus the residues of the poles left
//!   outside the contour (Garrappa, SIAM J. Numer. Anal. 53 (2015)).
//!
//! The Prabhakar function with γ = 2 is reduced to two two-parameter values
//! through `E²_{ρ,μ} = (E_{ρ,μ-1} + (1+ρ-μ) E_{ρ,μ}) / ρ`, which follows from
//! matching the two series term by term.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::special::rgamma;

/// Radius inside which the Taylor series is attempted.
pub const SERIES_RADIUS: f64 = 5.0;

/// Accepted cancellation factor `Σ|term| / |sum|` for the Taylor path.
const SERIES_CANCELLATION: f64 = 20.0;

const LOG_EPS_MACHINE: f64 = -36.043653389117154; // ln(2^-52)

/// Parameter bundle for one evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlQuery {
    pub rho: f64,
    pub mu: f64,
    pub gamma: u8,
    pub z: Complex64,
}

/// A value together with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: Complex64,
    pub err_estimate: f64,
}

impl MlQuery {
    pub fn new(rho: f64, mu: f64, gamma: u8, z: Complex64) -> Self {
        MlQuery { rho, mu, gamma, z }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(invalid(format!("rho must be positive, got {}", self.rho)));
        }
        if self.rho > 1.0 {
            return Err(invalid(format!("rho must lie in (0,1], got {}", self.rho)));
        }
        if !self.mu.is_finite() {
            return Err(invalid("mu must be finite"));
        }
        if !(self.z.re.is_finite() && self.z.im.is_finite()) {
            return Err(invalid("z must be finite"));
        }
        if !matches!(self.gamma, 1 | 2) {
            return Err(invalid(format!("gamma must be 1 or 2, got {}", self.gamma)));
        }
        Ok(())
    }

    /// Evaluates `E^γ_{ρ,μ}(z)` with an absolute error estimate.
    pub fn evaluate(&self) -> Result<MlValue> {
        self.validate()?;
        match self.gamma {
            1 => eval_two_param(self.rho, self.mu, self.z),
            _ => {
                let lower = eval_two_param(self.rho, self.mu - 1.0, self.z)?;
                let upper = eval_two_param(self.rho, self.mu, self.z)?;
                let c = 1.0 + self.rho - self.mu;
                Ok(MlValue {
                    value: (lower.value + upper.value * c) / self.rho,
                    err_estimate: (lower.err_estimate + c.abs() * upper.err_estimate) / self.rho,
                })
            }
        }
    }
}

/// `E_{ρ,μ}(z)`.
pub fn ml_eval(rho: f64, mu: f64, z: Complex64) -> Result<Complex64> {
    MlQuery::new(rho, mu, 1, z).evaluate().map(|v| v.value)
}

/// `E²_{ρ,μ}(z)`.
pub fn prabhakar_eval(rho: f64, mu: f64, z: Complex64) -> Result<Complex64> {
    MlQuery::new(rho, mu, 2, z).evaluate().map(|v| v.value)
}

/// Real-argument convenience wrapper around [`ml_eval`].
pub fn ml_real(rho: f64, mu: f64, x: f64) -> Result<f64> {
    ml_eval(rho, mu, Complex64::new(x, 0.0)).map(|v| v.re)
}

/// Leading term `-z^{-1}/Γ(μ-ρ)` of the large-|z| expansion in the
/// algebraic-decay sector. Used only for cross-checks.
pub fn asymptotic_leading(rho: f64, mu: f64, z: Complex64) -> Complex64 {
    -z.inv() * rgamma(mu - rho)
}

fn eval_two_param(rho: f64, mu: f64, z: Complex64) -> Result<MlValue> {
    if z.norm() == 0.0 {
        return Ok(MlValue {
            value: Complex64::new(rgamma(mu), 0.0),
            err_estimate: f64::EPSILON * rgamma(mu).abs(),
        });
    }
    if rho == 1.0 && z.re < 0.0 && z.norm() <= 40.0 {
        if let Some(v) = kummer_left(mu, z) {
            return Ok(v);
        }
    }
    if z.norm() <= SERIES_RADIUS {
        if let Some(v) = taylor(rho, mu, z) {
            return Ok(v);
        }
    }
    let v = contour(rho, mu, z)?;
    if !(v.value.re.is_finite() && v.value.im.is_finite()) {
        return Err(Error::AccuracyFailure {
            what: format!("E_{{{rho},{mu}}}({z}) overflows"),
            achieved: f64::INFINITY,
        });
    }
    Ok(v)
}

/// Taylor series with Neumaier-compensated summation. Returns `None` when
/// the series does not converge quickly or cancels too strongly.
fn taylor(rho: f64, mu: f64, z: Complex64) -> Option<MlValue> {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut comp = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut zk = Complex64::new(1.0, 0.0);
    let mut small = 0;
    for k in 0..2000 {
        let term = zk * rgamma(rho * k as f64 + mu);
        let t = sum + term;
        comp.re += neumaier(sum.re, term.re, t.re);
        comp.im += neumaier(sum.im, term.im, t.im);
        sum = t;
        abs_sum += term.norm();
        let total = (sum + comp).norm();
        // past the peak of |term| and below round-off three times in a row
        if rho * k as f64 + mu > 1.0 && term.norm() <= f64::EPSILON * 0.1 * total.max(1e-300) {
            small += 1;
            if small >= 3 {
                let value = sum + comp;
                if abs_sum > SERIES_CANCELLATION * value.norm() {
                    return None;
                }
                return Some(MlValue {
                    value,
                    err_estimate: 4.0 * f64::EPSILON * abs_sum,
                });
            }
        } else {
            small = 0;
        }
        zk *= z;
    }
    None
}

#[inline]
fn neumaier(sum: f64, term: f64, t: f64) -> f64 {
    if sum.abs() >= term.abs() {
        (sum - t) + term
    } else {
        (term - t) + sum
    }
}

/// ρ = 1 in the left half-plane: Kummer's transformation
/// `E_{1,μ}(z) = e^z/Γ(μ) · Σ_k (μ-1)/(μ-1+k) (-z)^k/k!` keeps the
/// exponentially small factor explicit.
fn kummer_left(mu: f64, z: Complex64) -> Option<MlValue> {
    if mu <= 0.0 {
        // E_{1,μ}(z) = 1/Γ(μ) + z E_{1,μ+1}(z)
        let up = kummer_left(mu + 1.0, z)?;
        return Some(MlValue {
            value: Complex64::new(rgamma(mu), 0.0) + z * up.value,
            err_estimate: z.norm() * up.err_estimate + f64::EPSILON,
        });
    }
    let a = mu - 1.0;
    let w = -z;
    let mut sum = Complex64::new(1.0, 0.0);
    let mut abs_sum = 1.0;
    if a != 0.0 {
        let mut pw = Complex64::new(1.0, 0.0); // w^k / k!
        let mut small = 0;
        for k in 1..500 {
            pw = pw * w / k as f64;
            let term = pw * (a / (a + k as f64));
            sum += term;
            abs_sum += term.norm();
            if term.norm() <= 0.1 * f64::EPSILON * sum.norm() && k as f64 > w.norm() {
                small += 1;
                if small >= 2 {
                    break;
                }
            } else {
                small = 0;
            }
            if k == 499 {
                return None;
            }
        }
    }
    let scale = z.exp() * rgamma(mu);
    let value = scale * sum;
    Some(MlValue {
        value,
        err_estimate: 8.0 * f64::EPSILON * (scale.norm() * abs_sum + value.norm()),
    })
}

/// Parabolic-contour inversion of `s^{ρ-μ}/(s^ρ - λ)` at t = 1.
fn contour(rho: f64, mu: f64, lambda: Complex64) -> Result<MlValue> {
    let mut log_eps = (1e-15f64).ln();
    let theta = lambda.arg();
    let kmin = (-rho / 2.0 - theta / (2.0 * PI)).ceil() as i64;
    let kmax = (rho / 2.0 - theta / (2.0 * PI)).floor() as i64;
    let modulus = lambda.norm().powf(1.0 / rho);
    let mut poles: Vec<(f64, Complex64)> = (kmin..=kmax)
        .map(|k| {
            let s = Complex64::from_polar(modulus, (theta + 2.0 * PI * k as f64) / rho);
            ((s.re + s.norm()) / 2.0, s)
        })
        .filter(|(phi, _)| *phi > 1e-15)
        .collect();
    poles.sort_by(|a, b| a.0.total_cmp(&b.0));

    // singular points: the branch point at the origin, then the poles
    let mut s_star = vec![Complex64::new(0.0, 0.0)];
    let mut phi = vec![0.0];
    for (ph, s) in &poles {
        phi.push(*ph);
        s_star.push(*s);
    }
    let j1 = s_star.len();
    let mut p = vec![(-2.0 * (rho - mu + 1.0)).max(0.0)];
    p.extend(std::iter::repeat(1.0).take(j1 - 1));
    let mut q = vec![1.0; j1 - 1];
    q.push(f64::INFINITY);
    phi.push(f64::INFINITY);

    let threshold = log_eps - LOG_EPS_MACHINE;
    let admissible: Vec<usize> = (0..j1)
        .filter(|&j| phi[j] < threshold && phi[j] < phi[j + 1])
        .collect();

    let mut best: Option<(usize, f64, f64, usize)> = None;
    for _ in 0..6 {
        best = None;
        for &j in &admissible {
            let (m, h, n) = if j + 1 < j1 {
                optimal_bounded(phi[j], phi[j + 1], p[j], q[j], log_eps)
            } else {
                optimal_unbounded(phi[j], p[j], log_eps)
            };
            if let Some(n) = n {
                if best.map_or(true, |b| n < b.3) {
                    best = Some((j, m, h, n));
                }
            }
        }
        match best {
            Some(b) if b.3 <= 200 => break,
            _ => log_eps += 10f64.ln(),
        }
    }
    let (region, mu_c, h, n) = best.ok_or_else(|| Error::AccuracyFailure {
        what: format!("no admissible contour for E_{{{rho},{mu}}}({lambda})"),
        achieved: f64::INFINITY,
    })?;

    let integrand = |u: f64| -> Complex64 {
        let zc = Complex64::new(1.0, u);
        let zz = zc * zc * mu_c;
        let dz = Complex64::new(-2.0 * mu_c * u, 2.0 * mu_c);
        let f = zz.powf(rho - mu) / (zz.powf(rho) - lambda) * dz;
        zz.exp() * f
    };
    // symmetric pairing keeps E(conj z) = conj E(z) bit-exact
    let mut sum = integrand(0.0);
    let mut abs_sum = sum.norm();
    for k in 1..=n {
        let u = h * k as f64;
        let a = integrand(u);
        let b = integrand(-u);
        abs_sum += a.norm() + b.norm();
        sum += a + b;
    }
    let integral = sum * h / Complex64::new(0.0, 2.0 * PI);

    let mut residues = Complex64::new(0.0, 0.0);
    for s in &s_star[region + 1..] {
        residues += s.powf(1.0 - mu) * s.exp() / rho;
    }
    let mut value = integral + residues;
    if lambda.im == 0.0 {
        value.im = 0.0;
    }
    let err_estimate = log_eps.exp() * value.norm().max(f64::MIN_POSITIVE)
        + 4.0 * f64::EPSILON * (abs_sum * h / (2.0 * PI) + residues.norm());
    Ok(MlValue {
        value,
        err_estimate,
    })
}

/// Contour parameters for a region bounded by two singularities.
fn optimal_bounded(
    phi_j: f64,
    phi_j1: f64,
    pj: f64,
    qj: f64,
    log_eps: f64,
) -> (f64, f64, Option<usize>) {
    let fac = 1.01;
    let f_max = (log_eps - LOG_EPS_MACHINE).exp();
    let sq_j = phi_j.sqrt();
    let threshold = 2.0 * (log_eps - LOG_EPS_MACHINE).sqrt();
    let sq_j1 = phi_j1.sqrt().min(threshold - sq_j);

    let (bar_j, bar_j1, f_bar) = if pj < 1e-14 && qj < 1e-14 {
        (sq_j, sq_j1, 1.0)
    } else if pj < 1e-14 {
        let f_min = if sq_j > 0.0 {
            fac * (sq_j / (sq_j1 - sq_j)).powf(qj)
        } else {
            fac
        };
        if f_min >= f_max {
            return (0.0, 0.0, None);
        }
        let f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fq = f_bar.powf(-1.0 / qj);
        (sq_j, (2.0 * sq_j1 - fq * sq_j) / (2.0 + fq), f_bar)
    } else if qj < 1e-14 {
        let f_min = fac * (sq_j1 / (sq_j1 - sq_j)).powf(pj);
        if f_min >= f_max {
            return (0.0, 0.0, None);
        }
        let f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        ((2.0 * sq_j + fp * sq_j1) / (2.0 - fp), sq_j1, f_bar)
    } else {
        let mut f_min = fac * (sq_j + sq_j1) / (sq_j1 - sq_j).powf(pj.max(qj));
        if f_min >= f_max {
            return (0.0, 0.0, None);
        }
        f_min = f_min.max(1.5);
        let f_bar = f_min + f_min / f_max * (f_max - f_min);
        let fp = f_bar.powf(-1.0 / pj);
        let fq = f_bar.powf(-1.0 / qj);
        let w = -phi_j1 / log_eps;
        let den = 2.0 + w - (1.0 + w) * fp + fq;
        let bj = ((2.0 + w + fq) * sq_j + fp * sq_j1) / den;
        let bj1 = (-(1.0 + w) * fq * sq_j + (2.0 + w - (1.0 + w) * fp) * sq_j1) / den;
        (bj, bj1, f_bar)
    };
    let log_eps = log_eps - f_bar.ln();
    let w = -bar_j1 * bar_j1 / log_eps;
    let mu = (((1.0 + w) * bar_j + bar_j1) / (2.0 + w)).powi(2);
    let h = -2.0 * PI / log_eps * (bar_j1 - bar_j) / ((1.0 + w) * bar_j + bar_j1);
    let n = ((1.0 - log_eps / mu).sqrt() / h).ceil();
    if !(n.is_finite() && n > 0.0 && h > 0.0) {
        return (0.0, 0.0, None);
    }
    (mu, h, Some(n as usize))
}

/// Contour parameters for the unbounded region right of the last singularity.
fn optimal_unbounded(phi_j: f64, pj: f64, log_eps: f64) -> (f64, f64, Option<usize>) {
    let sq_phi = phi_j.sqrt();
    let mut phibar = if phi_j > 0.0 { phi_j * 1.01 } else { 0.01 };
    let mut sq_phibar = phibar.sqrt();
    let (f_min, f_max, f_tar) = (1.0f64, 10.0f64, 5.0f64);
    let mut n;
    let mut a;
    let mut sq_mu;
    let mut iterations = 0;
    loop {
        let phi_t = phibar;
        let log_eps_phi_t = log_eps / phi_t;
        n = (phi_t / PI * (1.0 - 3.0 * log_eps_phi_t / 2.0 + (1.0 - 2.0 * log_eps_phi_t).sqrt()))
            .ceil();
        a = PI * n / phi_t;
        sq_mu = sq_phibar * (4.0 - a).abs() / (7.0 - (1.0 + 12.0 * a).sqrt()).abs();
        let fbar = ((sq_phibar - sq_phi) / sq_mu).powf(-pj);
        let stop = pj < 1e-14 || (f_min < fbar && fbar < f_max);
        iterations += 1;
        if stop || iterations > 100 {
            break;
        }
        sq_phibar = f_tar.powf(-1.0 / pj) * sq_mu + sq_phi;
        phibar = sq_phibar * sq_phibar;
    }
    let mut mu = sq_mu * sq_mu;
    let mut h = (-3.0 * a - 2.0 + 2.0 * (1.0 + 12.0 * a).sqrt()) / (4.0 - a) / n;
    let threshold = log_eps - LOG_EPS_MACHINE;
    if mu > threshold {
        let qv = if pj.abs() < 1e-14 {
            0.0
        } else {
            f_tar.powf(-1.0 / pj) * mu.sqrt()
        };
        let phibar = (qv + phi_j.sqrt()).powi(2);
        if phibar < threshold {
            let w = (LOG_EPS_MACHINE / (LOG_EPS_MACHINE - log_eps)).sqrt();
            let u = (-phibar / LOG_EPS_MACHINE).sqrt();
            mu = threshold;
            n = (w * log_eps / 2.0 / PI / (u * w - 1.0)).ceil();
            h = w / n;
        } else {
            return (0.0, 0.0, None);
        }
    }
    if !(n.is_finite() && n > 0.0 && h > 0.0) {
        return (0.0, 0.0, None);
    }
    (mu, h, Some(n as usize))
}

/// Summary of a sector-constant fit `|E_{ρ,μ}(z)| (1+|z|) ≤ M`.
#[derive(Debug, Clone, Serialize)]
pub struct SectorFit {
    pub rho: f64,
    pub mu: f64,
    pub fitted_m: f64,
    pub samples: usize,
}

/// Fits the smallest `M` with `|E_{ρ,μ}(z)| ≤ M/(1+|z|)` over the points
/// `z = -(α ∓ √(α²-λ)) t^ρ` of a parameter sweep.
pub fn fit_sector_constant(
    rho: f64,
    mu: f64,
    alphas: &[f64],
    lambdas: &[f64],
    times: &[f64],
) -> Result<SectorFit> {
    let mut m: f64 = 0.0;
    let mut samples = 0;
    for &alpha in alphas {
        for &lambda in lambdas {
            let root = Complex64::new(alpha * alpha - lambda, 0.0).sqrt();
            for s in [alpha - root, alpha + root] {
                for &t in times {
                    let z = -s * t.powf(rho);
                    let e = ml_eval(rho, mu, z)?;
                    m = m.max(e.norm() * (1.0 + z.norm()));
                    samples += 1;
                }
            }
        }
    }
    Ok(SectorFit {
        rho,
        mu,
        fitted_m: m,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm().max(1e-300)
    }

    #[test]
    fn exponential_special_case() {
        let v = ml_eval(1.0, 1.0, c(1.0, 0.0)).unwrap();
        assert!((v.re - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn value_at_origin() {
        let v = ml_eval(0.5, 0.5, c(0.0, 0.0)).unwrap();
        assert!((v.re - 0.5641895835477563).abs() < 1e-16);
        // 1/Γ(0) = 0
        assert_eq!(ml_eval(0.5, 0.0, c(0.0, 0.0)).unwrap().re, 0.0);
        assert_eq!(prabhakar_eval(0.5, 1.0, c(0.0, 0.0)).unwrap().re, 1.0);
    }

    #[test]
    fn argument_validation() {
        assert!(ml_eval(0.0, 1.0, c(1.0, 0.0)).is_err());
        assert!(ml_eval(-0.5, 1.0, c(1.0, 0.0)).is_err());
        assert!(ml_eval(0.5, 1.0, c(f64::NAN, 0.0)).is_err());
        assert!(ml_eval(0.5, 1.0, c(f64::INFINITY, 0.0)).is_err());
        assert!(MlQuery::new(0.5, 1.0, 3, c(1.0, 0.0)).evaluate().is_err());
    }

    #[test]
    fn series_and_contour_agree_near_switch() {
        let mut accepted = 0;
        for &(rho, mu) in &[(0.5, 1.0), (0.7, 0.7), (0.9, 1.4), (0.35, -0.65)] {
            for &z in &[c(-0.9, 0.3), c(0.4, -0.8), c(-0.2, 0.0)] {
                let k = contour(rho, mu, z).unwrap();
                if let Some(s) = taylor(rho, mu, z) {
                    assert!(rel(k.value, s.value) < 1e-12, "{rho} {mu} {z}");
                    accepted += 1;
                }
            }
        }
        assert!(accepted >= 9);
    }

    #[test]
    fn conjugate_symmetry_is_exact() {
        for &z in &[c(-3.0, 7.0), c(12.0, -40.0), c(-0.3, 0.2), c(-60.0, 1.0)] {
            let a = ml_eval(0.6, 0.6, z).unwrap();
            let b = ml_eval(0.6, 0.6, z.conj()).unwrap();
            assert_eq!(a, b.conj());
        }
    }

    #[test]
    fn asymptotic_cross_check() {
        let rho = 0.6;
        let mu = 1.0;
        for &r in &[200.0, 1000.0] {
            let z = Complex64::from_polar(r, 0.9 * PI);
            let e = ml_eval(rho, mu, z).unwrap();
            let lead = asymptotic_leading(rho, mu, z);
            assert!((e - lead).norm() < 5.0 / (r * r), "{r}");
        }
        // μ - ρ = 0: leading term vanishes, E = O(|z|^{-2})
        let z = c(-500.0, 0.0);
        assert!(ml_eval(0.6, 0.6, z).unwrap().norm() < 10.0 / 500f64.powi(2));
    }
}
