//! Numerical checks of the qualitative estimates: coefficient decay,
//! the stability inequality, initial conditions, and convergence in the
//! truncation and grid parameters.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::fracops::{gl_derivative_grid, graded_grid, rl_limit_from, SingularFunctionSamples};
use crate::scalar_cauchy::ModeSolution;
use crate::spectral::{
    assemble_solution, mode_bound, residual, DataSpec, ProblemSpec, SolutionField, SourceSpec,
};

/// Default Hölder exponent for data norms.
pub const HOLDER_EXPONENT: f64 = 0.75;

/// Hölder exponent, decay exponent and a measured seminorm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegularitySpec {
    pub holder_exponent: f64,
    pub decay_exponent: f64,
    pub seminorm: f64,
}

impl RegularitySpec {
    pub fn new(holder_exponent: f64, decay_exponent: f64, seminorm: f64) -> Result<Self> {
        if !(holder_exponent > 0.5) {
            return Err(invalid("Hölder exponent must exceed 1/2"));
        }
        if !(decay_exponent >= 0.0 && decay_exponent < holder_exponent - 0.5) {
            return Err(invalid("decay exponent must lie in [0, a - 1/2)"));
        }
        Ok(RegularitySpec {
            holder_exponent,
            decay_exponent,
            seminorm,
        })
    }
}

/// `max_δ ω(δ)/δ^a` over dyadic multiples `δ` of the spacing of a uniform grid.
pub fn holder_seminorm(values: &[f64], spacing: f64, a: f64) -> f64 {
    let n = values.len();
    let mut best: f64 = 0.0;
    let mut step = 1;
    while step < n {
        let omega = (0..n - step).fold(0.0f64, |m, i| m.max((values[i + step] - values[i]).abs()));
        best = best.max(omega / (step as f64 * spacing).powf(a));
        step *= 2;
    }
    best
}

/// Partial sums of `Σ k^σ |g_k|` with a dyadic-block verdict.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderDecay {
    pub partial_sums: Vec<f64>,
    /// Sums over the blocks `2^m ≤ k < 2^{m+1}`.
    pub block_sums: Vec<f64>,
    /// Geometric mean of the last block-to-block ratios.
    pub block_ratio: f64,
    pub bounded: bool,
}

pub fn holder_decay(coefficients: &[f64], sigma: f64) -> Result<HolderDecay> {
    if !(sigma >= 0.0) {
        return Err(invalid("decay exponent must be non-negative"));
    }
    let mut partial_sums = Vec::with_capacity(coefficients.len());
    let mut acc = 0.0;
    let mut block_sums = Vec::new();
    for (i, c) in coefficients.iter().enumerate() {
        let k = i + 1;
        let term = (k as f64).powf(sigma) * c.abs();
        acc += term;
        partial_sums.push(acc);
        let block = (usize::BITS - 1 - k.leading_zeros()) as usize;
        if block_sums.len() <= block {
            block_sums.resize(block + 1, 0.0);
        }
        block_sums[block] += term;
    }
    // only complete blocks take part in the verdict
    let complete = coefficients.len().saturating_add(1).ilog2() as usize;
    let blocks = &block_sums[..complete.min(block_sums.len())];
    let ratios: Vec<f64> = blocks
        .windows(2)
        .rev()
        .take(3)
        .map(|w| if w[0] == 0.0 { if w[1] == 0.0 { 0.0 } else { f64::INFINITY } } else { w[1] / w[0] })
        .collect();
    let block_ratio = if ratios.is_empty() || ratios.iter().any(|&r| r == 0.0) {
        0.0
    } else {
        (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
    };
    Ok(HolderDecay {
        partial_sums,
        block_sums,
        block_ratio,
        bounded: block_ratio < 0.9,
    })
}

/// Both sides of the stability inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub violation: bool,
}

/// Hölder seminorms of `φ₀''`, `φ₁''` and `sup_t [t^{1-ρ} f(·,t)]`.
pub fn data_norm(spec: &ProblemSpec, field: &SolutionField, a: f64) -> f64 {
    let x = &field.x;
    let h = x[1] - x[0];
    let d0: Vec<f64> = x.iter().map(|&v| spec.phi0.second_derivative(v)).collect();
    let d1: Vec<f64> = x.iter().map(|&v| spec.phi1.second_derivative(v)).collect();
    let f = field
        .t
        .par_iter()
        .map(|&t| {
            let col: Vec<f64> = x.iter().map(|&v| spec.source_regular(v, t)).collect();
            holder_seminorm(&col, h, a)
        })
        .reduce(|| 0.0, f64::max);
    holder_seminorm(&d0, h, a) + holder_seminorm(&d1, h, a) + f
}

pub fn stability_ratio(spec: &ProblemSpec, field: &SolutionField, a: f64) -> Result<StabilityReport> {
    let d = field
        .derived
        .as_ref()
        .ok_or_else(|| crate::Error::State("derived fields have not been evaluated".into()))?;
    let sup = |m: &nalgebra::DMatrix<f64>| m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let lhs = sup(&d.drho2) + sup(&d.drho) + sup(&d.dxx);
    let rhs = data_norm(spec, field, a);
    let (ratio, violation) = if rhs == 0.0 {
        (0.0, lhs > 1e-10)
    } else {
        (lhs / rhs, false)
    };
    Ok(StabilityReport {
        lhs,
        rhs,
        ratio,
        violation,
    })
}

/// Dimensions shared by every problem of a sweep. The equation (`ρ`, `α`,
/// `T`) is fixed; only the data vary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSetup {
    pub rho: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub modes: usize,
    pub n_t: usize,
    pub m_x: usize,
    pub holder_exponent: f64,
}

impl SweepSetup {
    pub fn of(spec: &ProblemSpec) -> Self {
        SweepSetup {
            rho: spec.rho,
            alpha: spec.alpha,
            horizon: spec.horizon,
            modes: spec.modes,
            n_t: spec.n_t,
            m_x: spec.m_x,
            holder_exponent: HOLDER_EXPONENT,
        }
    }

    /// Same equation with `K` and `N_t` doubled.
    pub fn refined(&self) -> Self {
        SweepSetup {
            modes: 2 * self.modes,
            n_t: 2 * self.n_t,
            ..*self
        }
    }
}

/// Random data with finitely many sine modes, so that the second
/// derivatives vanish at both ends.
pub fn admissible_problem(rng: &mut ChaCha8Rng, setup: &SweepSetup) -> ProblemSpec {
    let data = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(1..=6);
        DataSpec::Coefficients {
            values: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    };
    let phi0 = data(rng);
    let phi1 = data(rng);
    let source = if rng.gen_bool(0.5) {
        vec![SourceSpec {
            mode: rng.gen_range(1..=6),
            coeffs: vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)],
        }]
    } else {
        Vec::new()
    };
    ProblemSpec {
        source,
        horizon: setup.horizon,
        modes: setup.modes,
        n_t: setup.n_t,
        m_x: setup.m_x,
        ..ProblemSpec::new(setup.rho, setup.alpha, phi0, phi1)
    }
}

/// Ratios over a seeded sweep of admissible problems.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySweep {
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub violations: usize,
}

pub fn stability_sweep(setup: &SweepSetup, seed: u64, count: usize) -> Result<StabilitySweep> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let specs: Vec<ProblemSpec> = (0..count)
        .map(|_| admissible_problem(&mut rng, setup))
        .collect();
    let reports = specs
        .par_iter()
        .map(|s| {
            let f = assemble_solution(s)?.with_derivatives(s)?;
            stability_ratio(s, &f, setup.holder_exponent)
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let median_ratio = if sorted.is_empty() {
        0.0
    } else {
        sorted[sorted.len() / 2]
    };
    Ok(StabilitySweep {
        max_ratio: sorted.last().copied().unwrap_or(0.0),
        median_ratio,
        violations: reports.iter().filter(|r| r.violation).count(),
        ratios,
    })
}

/// Sup errors of the initial conditions recovered through the limit functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialConditionReport {
    pub phi1_error: f64,
    pub phi0_error: f64,
    pub points: usize,
}

/// Starting time for the limit fits: small enough that `|s∓| t^ρ ≤ 0.05`
/// for every retained mode.
pub fn limit_start_time(spec: &ProblemSpec) -> f64 {
    let smax = spec.alpha + spec.modes as f64;
    (0.05 / smax).powf(1.0 / spec.rho).min(1e-2)
}

pub fn initial_conditions(
    spec: &ProblemSpec,
    field: &SolutionField,
    stride: usize,
) -> Result<InitialConditionReport> {
    let t0 = limit_start_time(spec);
    let rho = spec.rho;
    let xs: Vec<f64> = field.x.iter().copied().step_by(stride.max(1)).collect();
    let errs = xs
        .par_iter()
        .map(|&x| {
            let y = rl_limit_from(
                |t| t.powf(rho - 1.0) * field.state_at(x, t).map_or(f64::NAN, |s| s.y.re),
                rho,
                t0,
            )?;
            let d = rl_limit_from(
                |t| t.powf(rho - 1.0) * field.state_at(x, t).map_or(f64::NAN, |s| s.drho.re),
                rho,
                t0,
            )?;
            Ok(((y - spec.phi1.value(x)).abs(), (d - spec.phi0.value(x)).abs()))
        })
        .collect::<Result<Vec<(f64, f64)>>>()?;
    Ok(InitialConditionReport {
        phi1_error: errs.iter().fold(0.0, |m, e| m.max(e.0)),
        phi0_error: errs.iter().fold(0.0, |m, e| m.max(e.1)),
        points: xs.len(),
    })
}

/// Largest per-mode excess over the tail-bound estimate on the grid:
/// `max_k sup_t |t^{1-ρ} T_k| / bound_k`; values `≤ 1` confirm the bound.
pub fn mode_bound_excess(spec: &ProblemSpec, field: &SolutionField) -> f64 {
    let m = field.tail.fitted_m;
    field
        .solutions
        .iter()
        .zip(&field.modes)
        .map(|(sol, tr)| {
            let b = mode_bound(&sol.params, m, spec.horizon);
            let s = tr.max_abs();
            if s == 0.0 {
                0.0
            } else {
                s / b
            }
        })
        .fold(0.0, f64::max)
}

/// Regularized residual of the field at `x` with both time derivatives
/// taken by the discrete oracle, sup over `t ∈ [0.1 T, T]`.
pub fn gl_cross_residual(spec: &ProblemSpec, x: f64, n_t: usize) -> Result<f64> {
    let sols = spec
        .mode_params(spec.modes)?
        .into_iter()
        .map(ModeSolution::new)
        .collect::<Result<Vec<_>>>()?;
    let grid = graded_grid(spec.horizon, n_t, spec.rho);
    let rho = spec.rho;
    let states: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&t| {
            let mut y = 0.0;
            let mut yxx = 0.0;
            for (k, s) in sols.iter().enumerate() {
                let p = &s.params;
                if p.phi0 == 0.0 && p.phi1 == 0.0 && p.source.is_zero() {
                    continue;
                }
                let v = s.state(t)?.y.re * ((k + 1) as f64 * x).sin();
                y += v;
                yxx -= p.lambda * v;
            }
            Ok((y, yxx))
        })
        .collect::<Result<Vec<_>>>()?;
    let u = SingularFunctionSamples::new(
        grid.clone(),
        states
            .iter()
            .zip(&grid)
            .map(|((y, _), t)| Complex64::new(y * t.powf(rho - 1.0), 0.0))
            .collect(),
        rho - 1.0,
    )?;
    let d1 = gl_derivative_grid(&u, rho)?;
    let d2 = gl_derivative_grid(&d1, rho)?;
    let mut worst: f64 = 0.0;
    for (j, &t) in grid.iter().enumerate() {
        if t < 0.1 * spec.horizon {
            continue;
        }
        let reg = t.powf(1.0 - rho);
        let r = (d2.values[j].re + 2.0 * spec.alpha * d1.values[j].re) * reg
            - states[j].1
            - spec.source_regular(x, t);
        worst = worst.max(r.abs());
    }
    Ok(worst)
}

/// One row of a convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub modes: usize,
    pub n_t: usize,
    pub w_sup: f64,
    pub residual_sup: f64,
    pub residual_l2: f64,
    pub tail_bound: f64,
    /// `sup_x |Σ_{k≤K} c_k sin kx - φ(x)|` summed over both data functions.
    pub data_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `log data_residual` against `log K`.
    pub observed_decay: Option<f64>,
}

fn truncation_error(d: &DataSpec, k: usize, x: &[f64]) -> Result<f64> {
    let c = d.coefficients(k)?;
    Ok(x.iter().fold(0.0f64, |m, &v| {
        let s: f64 = c
            .iter()
            .enumerate()
            .map(|(i, ci)| ci * ((i + 1) as f64 * v).sin())
            .sum();
        m.max((s - d.value(v)).abs())
    }))
}

pub fn convergence_study(
    spec: &ProblemSpec,
    modes: &[usize],
    grids: &[usize],
) -> Result<ConvergenceTable> {
    if modes.windows(2).any(|w| w[1] < w[0]) || grids.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("mode and grid lists must be non-decreasing"));
    }
    let mut rows = Vec::new();
    for &k in modes {
        for &n in grids {
            let s = ProblemSpec {
                modes: k,
                n_t: n,
                ..spec.clone()
            };
            let f = assemble_solution(&s)?.with_derivatives(&s)?;
            let r = residual(&s, &f)?;
            let fine: Vec<f64> = (0..=1000).map(|i| PI * i as f64 / 1000.0).collect();
            let data_residual =
                truncation_error(&s.phi0, k, &fine)? + truncation_error(&s.phi1, k, &fine)?;
            rows.push(ConvergenceRow {
                modes: k,
                n_t: n,
                w_sup: f.sup_w(),
                residual_sup: r.sup,
                residual_l2: r.l2,
                tail_bound: f.tail.bound,
                data_residual,
            });
        }
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.data_residual > 1e-14)
        .map(|r| ((r.modes as f64).ln(), r.data_residual.ln()))
        .collect();
    let observed_decay = slope(&pts);
    Ok(ConvergenceTable {
        rows,
        observed_decay,
    })
}

fn slope(pts: &[(f64, f64)]) -> Option<f64> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / sxx)
}

/// Sup norms of partial sums at `K` and `2K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumGrowth {
    pub name: String,
    pub at_k: f64,
    pub at_2k: f64,
    pub relative_increase: f64,
}

/// Growth of the homogeneous (`φ`-driven) and forced (`f`-driven) partial
/// sums of the field and its derived quantities when `K` doubles.
pub fn partial_sum_growth(spec: &ProblemSpec) -> Result<Vec<PartialSumGrowth>> {
    let homogeneous = ProblemSpec {
        source: Vec::new(),
        ..spec.clone()
    };
    let forced = ProblemSpec {
        phi0: DataSpec::Zero,
        phi1: DataSpec::Zero,
        ..spec.clone()
    };
    let mut out = Vec::new();
    for (label, base) in [("homogeneous", homogeneous), ("forced", forced)] {
        let mut norms = Vec::new();
        for k in [base.modes, 2 * base.modes] {
            let s = ProblemSpec {
                modes: k,
                ..base.clone()
            };
            let f = assemble_solution(&s)?.with_derivatives(&s)?;
            let d = f.derived.as_ref().expect("derived fields were just evaluated");
            let sup = |m: &nalgebra::DMatrix<f64>| m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            norms.push([f.sup_w(), sup(&d.drho), sup(&d.drho2), sup(&d.dxx)]);
        }
        for (i, q) in ["w", "drho", "drho2", "dxx"].iter().enumerate() {
            let (a, b) = (norms[0][i], norms[1][i]);
            out.push(PartialSumGrowth {
                name: format!("{label}:{q}"),
                at_k: a,
                at_2k: b,
                relative_increase: if a > 0.0 { (b - a) / a } else if b > 0.0 { f64::INFINITY } else { 0.0 },
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seminorm_of_linear_function() {
        let h = 0.01;
        let v: Vec<f64> = (0..=100).map(|i| 2.0 * i as f64 * h).collect();
        // ω(δ) = 2δ, so ω/δ^a is largest at the widest spacing
        let s = holder_seminorm(&v, h, 0.75);
        assert!((s - 2.0 * 0.64f64.powf(0.25)).abs() < 1e-12, "{s}");
    }

    #[test]
    fn decay_of_single_mode() {
        let mut c = vec![0.0; 64];
        c[0] = 1.0;
        let d = holder_decay(&c, 0.0).unwrap();
        assert!(d.partial_sums.iter().all(|&s| s == 1.0));
        assert!(d.bounded);
    }

    #[test]
    fn decay_of_parabola_coefficients() {
        let c: Vec<f64> = (1..=256)
            .map(|k| if k % 2 == 1 { 8.0 / (PI * (k as f64).powi(3)) } else { 0.0 })
            .collect();
        let d = holder_decay(&c, 0.4).unwrap();
        assert!(d.bounded);
        assert!(d.block_ratio < 0.5, "{}", d.block_ratio);
    }

    #[test]
    fn decay_detects_divergence() {
        let c: Vec<f64> = (1..=1024).map(|k| 1.0 / (k as f64).sqrt()).collect();
        let d = holder_decay(&c, 0.0).unwrap();
        assert!(!d.bounded, "{}", d.block_ratio);
    }

    #[test]
    fn regularity_spec_bounds() {
        assert!(RegularitySpec::new(0.75, 0.2, 1.0).is_ok());
        assert!(RegularitySpec::new(0.5, 0.0, 1.0).is_err());
        assert!(RegularitySpec::new(0.75, 0.3, 1.0).is_err());
    }
}
