//! Fourier sine assembly of the telegraph problem on `(0, π)` with
//! homogeneous Dirichlet conditions.
//!
//! Each mode `T_k(t) sin kx` solves a scalar problem with `λ_k = k²`; the
//! field and all derived quantities are stored regularized, as `t^{1-ρ}(·)`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fracops::graded_grid;
use crate::mlf::fit_sector_constant;
use crate::quad::GaussJacobi;
use crate::scalar_cauchy::{ModeParams, ModeSolution, ModeState, ModeTrajectory, SourceProfile};
use crate::special::{gamma, rgamma};

/// Tolerance on `g(0)`, `g(π)` accepted by [`sine_coefficients`].
pub const BOUNDARY_TOL: f64 = 1e-8;

const COEFF_PANELS: usize = 64;
const COEFF_NODES: usize = 16;

/// Initial data on `[0, π]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Zero,
    /// `scale · x(π-x)`.
    Parabola {
        #[serde(default = "one")]
        scale: f64,
    },
    /// `amplitude · sin(mode · x)`.
    Sine { mode: usize, amplitude: f64 },
    /// `Σ values[k-1] sin kx`.
    Coefficients { values: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Default for DataSpec {
    fn default() -> Self {
        DataSpec::Zero
    }
}

impl DataSpec {
    pub fn value(&self, x: f64) -> f64 {
        match self {
            DataSpec::Zero => 0.0,
            DataSpec::Parabola { scale } => scale * x * (PI - x),
            DataSpec::Sine { mode, amplitude } => amplitude * (*mode as f64 * x).sin(),
            DataSpec::Coefficients { values } => values
                .iter()
                .enumerate()
                .map(|(k, c)| c * ((k + 1) as f64 * x).sin())
                .sum(),
        }
    }

    /// Second derivative in `x`.
    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            DataSpec::Zero => 0.0,
            DataSpec::Parabola { scale } => -2.0 * scale,
            DataSpec::Sine { mode, amplitude } => {
                let m = *mode as f64;
                -amplitude * m * m * (m * x).sin()
            }
            DataSpec::Coefficients { values } => values
                .iter()
                .enumerate()
                .map(|(k, c)| {
                    let m = (k + 1) as f64;
                    -c * m * m * (m * x).sin()
                })
                .sum(),
        }
    }

    /// First `k` sine coefficients.
    pub fn coefficients(&self, k: usize) -> Result<Vec<f64>> {
        let mut c = vec![0.0; k];
        match self {
            DataSpec::Zero => {}
            DataSpec::Sine { mode, amplitude } => {
                if *mode == 0 {
                    return Err(invalid("sine mode must be at least 1"));
                }
                if *mode <= k {
                    c[mode - 1] = *amplitude;
                }
            }
            DataSpec::Coefficients { values } => {
                for (dst, src) in c.iter_mut().zip(values) {
                    *dst = *src;
                }
            }
            DataSpec::Parabola { .. } => c = sine_coefficients(|x| self.value(x), k)?,
        }
        Ok(c)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            DataSpec::Zero => true,
            DataSpec::Parabola { scale } => *scale == 0.0,
            DataSpec::Sine { amplitude, .. } => *amplitude == 0.0,
            DataSpec::Coefficients { values } => values.iter().all(|&v| v == 0.0),
        }
    }

    pub fn scaled(&self, f: f64) -> DataSpec {
        match self {
            DataSpec::Zero => DataSpec::Zero,
            DataSpec::Parabola { scale } => DataSpec::Parabola { scale: scale * f },
            DataSpec::Sine { mode, amplitude } => DataSpec::Sine {
                mode: *mode,
                amplitude: amplitude * f,
            },
            DataSpec::Coefficients { values } => DataSpec::Coefficients {
                values: values.iter().map(|v| v * f).collect(),
            },
        }
    }
}

/// Source term `sin(mode · x) · t^{ρ-1} Σ_j coeffs[j] t^j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub mode: usize,
    pub coeffs: Vec<f64>,
}

/// Full problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub rho: f64,
    pub alpha: f64,
    pub horizon: f64,
    pub phi0: DataSpec,
    pub phi1: DataSpec,
    pub source: Vec<SourceSpec>,
    pub modes: usize,
    pub n_t: usize,
    pub m_x: usize,
    /// Largest acceptable tail bound; exceeding it produces a warning.
    pub tail_tolerance: Option<f64>,
}

impl ProblemSpec {
    pub fn new(rho: f64, alpha: f64, phi0: DataSpec, phi1: DataSpec) -> Self {
        ProblemSpec {
            rho,
            alpha,
            horizon: 1.0,
            phi0,
            phi1,
            source: Vec::new(),
            modes: 64,
            n_t: 128,
            m_x: 200,
            tail_tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return Err(invalid(format!("rho must lie in (0,1), got {}", self.rho)));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(invalid(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(invalid(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.modes < 1 {
            return Err(invalid("at least one mode is required"));
        }
        if self.n_t < 8 {
            return Err(invalid("n_t must be at least 8"));
        }
        if self.m_x < 2 {
            return Err(invalid("m_x must be at least 2"));
        }
        for d in [&self.phi0, &self.phi1] {
            if let DataSpec::Sine { mode: 0, .. } = d {
                return Err(invalid("sine mode must be at least 1"));
            }
        }
        if self.source.iter().any(|s| s.mode == 0) {
            return Err(invalid("source mode must be at least 1"));
        }
        Ok(())
    }

    pub fn x_grid(&self) -> Vec<f64> {
        (0..=self.m_x)
            .map(|i| PI * i as f64 / self.m_x as f64)
            .collect()
    }

    pub fn t_grid(&self) -> Vec<f64> {
        graded_grid(self.horizon, self.n_t, self.rho)
    }

    /// Source time profile of mode `k`, summed over all entries naming it.
    pub fn source_profile(&self, k: usize) -> SourceProfile {
        let mut c: Vec<f64> = Vec::new();
        for s in self.source.iter().filter(|s| s.mode == k) {
            if s.coeffs.len() > c.len() {
                c.resize(s.coeffs.len(), 0.0);
            }
            for (dst, v) in c.iter_mut().zip(&s.coeffs) {
                *dst += v;
            }
        }
        SourceProfile::new(c)
    }

    /// `t^{1-ρ} f(x, t)`.
    pub fn source_regular(&self, x: f64, t: f64) -> f64 {
        self.source
            .iter()
            .map(|s| (s.mode as f64 * x).sin() * SourceProfile::new(s.coeffs.clone()).regular(t))
            .sum()
    }

    /// Scalar problems for modes `1..=count`.
    pub fn mode_params(&self, count: usize) -> Result<Vec<ModeParams>> {
        let c0 = self.phi0.coefficients(count)?;
        let c1 = self.phi1.coefficients(count)?;
        Ok((1..=count)
            .map(|k| ModeParams {
                rho: self.rho,
                alpha: self.alpha,
                lambda: (k * k) as f64,
                phi0: c0[k - 1],
                phi1: c1[k - 1],
                source: self.source_profile(k),
            })
            .collect())
    }

    /// Modes `k` with `|α - k| ≤ 10⁻⁶`, routed to the double-root formula.
    pub fn degenerate_modes(&self) -> Vec<usize> {
        (1..=self.modes)
            .filter(|&k| crate::scalar_cauchy::branch_pair(self.alpha, (k * k) as f64).degenerate)
            .collect()
    }
}

/// `c_k = (2/π) ∫_0^π g(x) sin kx dx`, `k = 1..=count`, by composite
/// Gauss-Legendre quadrature.
pub fn sine_coefficients(g: impl Fn(f64) -> f64, count: usize) -> Result<Vec<f64>> {
    let (g0, gpi) = (g(0.0), g(PI));
    if !(g0.abs() <= BOUNDARY_TOL && gpi.abs() <= BOUNDARY_TOL) {
        return Err(Error::InvalidInput(format!(
            "data must vanish at 0 and π, got {g0:.3e} and {gpi:.3e}"
        )));
    }
    let rule = GaussJacobi::cached(COEFF_NODES, 0.0, 0.0);
    let hp = PI / COEFF_PANELS as f64;
    let mut nodes = Vec::with_capacity(COEFF_PANELS * COEFF_NODES);
    for p in 0..COEFF_PANELS {
        let (lo, hi) = (p as f64 * hp, (p + 1) as f64 * hp);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            let xx = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
            nodes.push((xx, 0.5 * (hi - lo) * w * g(xx)));
        }
    }
    Ok((1..=count)
        .map(|k| {
            let kf = k as f64;
            2.0 / PI * nodes.iter().map(|(x, wg)| wg * (kf * x).sin()).sum::<f64>()
        })
        .collect())
}

/// Sine coefficients of samples on the uniform grid `x_i = π i / (n-1)`
/// (trapezoid rule).
pub fn sine_coefficients_sampled(values: &[f64], count: usize) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 3 {
        return Err(invalid("need at least three samples"));
    }
    if values[0].abs() > BOUNDARY_TOL || values[n - 1].abs() > BOUNDARY_TOL {
        return Err(Error::InvalidInput("samples must vanish at 0 and π".into()));
    }
    let h = PI / (n - 1) as f64;
    Ok((1..=count)
        .map(|k| {
            let kf = k as f64;
            2.0 / PI
                * h
                * values[1..n - 1]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| v * (kf * (i + 1) as f64 * h).sin())
                    .sum::<f64>()
        })
        .collect())
}

/// Bound on the part of the regularized field carried by modes above `K`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TailBound {
    /// Fitted constant of `|E_{ρ,ρ}(z)| ≤ M/(1+|z|)` over the retained modes.
    pub fitted_m: f64,
    /// Bound on `sup |t^{1-ρ} Σ_{k>K} T_k sin kx|` from modes `K+1..=4K`.
    pub bound: f64,
    pub modes_examined: usize,
}

/// Per-mode bound `M (|φ₁_k| + |φ₀_k|/|r_k| + |r_k|^{-1} Γ(ρ)²/Γ(2ρ) T^ρ ‖h_k‖)`.
pub fn mode_bound(p: &ModeParams, fitted_m: f64, horizon: f64) -> f64 {
    let branch = crate::scalar_cauchy::branch_pair(p.alpha, p.lambda);
    let r = match branch.r_inv {
        Some(ri) => ri.inv().norm(),
        None => p.alpha,
    };
    let a = p.alpha;
    // |A∓| ≤ (|φ₁|(|r|+α) + |φ₀|)/(2|r|)
    let homog = (p.phi1.abs() * (r + a) + p.phi0.abs()) / r.max(1e-300);
    let hmax = p
        .source
        .coeffs
        .iter()
        .enumerate()
        .map(|(j, c)| c.abs() * horizon.powi(j as i32))
        .sum::<f64>();
    let forced = gamma(p.rho).powi(2) * rgamma(2.0 * p.rho) * horizon.powf(p.rho) * hmax
        / r.max(1e-300);
    fitted_m * (homog + forced)
}

/// Regularized derived fields.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedFields {
    pub drho: DMatrix<f64>,
    pub drho2: DMatrix<f64>,
    pub dxx: DMatrix<f64>,
}

/// Residual `(∂^ρ)²u + 2α∂^ρu - u_xx - f`, regularized.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub field: DMatrix<f64>,
    pub sup: f64,
    /// Root mean square over the grid.
    pub l2: f64,
}

/// Assembled solution on the space-time grid.
#[derive(Debug, Clone)]
pub struct SolutionField {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    pub rho: f64,
    /// `t^{1-ρ} u(x_i, t_j)`.
    pub w: DMatrix<f64>,
    pub derived: Option<DerivedFields>,
    /// Mode `k` is stored at index `k-1`.
    pub modes: Vec<ModeTrajectory>,
    pub solutions: Vec<ModeSolution>,
    pub degenerate_modes: Vec<usize>,
    pub tail: TailBound,
    /// Largest imaginary part met during assembly relative to `‖w‖_sup`.
    pub imag_residue: f64,
    pub warnings: Vec<String>,
}

fn sin_table(x: &[f64], modes: usize) -> DMatrix<f64> {
    let last = x.len() - 1;
    DMatrix::from_fn(x.len(), modes, |i, k| {
        if i == 0 || i == last {
            0.0
        } else {
            ((k + 1) as f64 * x[i]).sin()
        }
    })
}

fn synthesize(
    sines: &DMatrix<f64>,
    modes: &[ModeTrajectory],
    weight: impl Fn(usize) -> f64,
    pick: impl Fn(&ModeState) -> f64,
) -> DMatrix<f64> {
    let nx = sines.nrows();
    let nt = modes.first().map_or(0, |m| m.grid.len());
    let mut out = DMatrix::zeros(nx, nt);
    for (k, m) in modes.iter().enumerate() {
        let wk = weight(k + 1);
        if wk == 0.0 || m.states.iter().all(|s| pick(s) == 0.0) {
            continue;
        }
        for j in 0..nt {
            let v = wk * pick(&m.states[j]);
            for i in 0..nx {
                out[(i, j)] += v * sines[(i, k)];
            }
        }
    }
    out
}

fn sup(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// Solves every mode problem and sums the regularized field.
pub fn assemble_solution(spec: &ProblemSpec) -> Result<SolutionField> {
    spec.validate()?;
    let x = spec.x_grid();
    let t = spec.t_grid();
    let params = spec.mode_params(spec.modes)?;
    let solved: Vec<(ModeSolution, ModeTrajectory)> = params
        .into_par_iter()
        .map(|p| {
            let zero = p.phi0 == 0.0 && p.phi1 == 0.0 && p.source.is_zero();
            let sol = ModeSolution::new(p)?;
            let states = if zero {
                vec![ModeState::default(); t.len()]
            } else {
                t.iter().map(|&tj| sol.state(tj)).collect::<Result<Vec<_>>>()?
            };
            let traj = ModeTrajectory {
                grid: t.clone(),
                states,
                degenerate: sol.branch.degenerate,
            };
            Ok((sol, traj))
        })
        .collect::<Result<Vec<_>>>()?;
    let (solutions, modes): (Vec<_>, Vec<_>) = solved.into_iter().unzip();
    let sines = sin_table(&x, spec.modes);
    let w = synthesize(&sines, &modes, |_| 1.0, |s| s.y.re);
    let imag = synthesize(&sines, &modes, |_| 1.0, |s| s.y.im);
    let scale = sup(&w);
    let imag_residue = if scale > 0.0 { sup(&imag) / scale } else { sup(&imag) };
    let tail = tail_bound(spec)?;
    let mut warnings = Vec::new();
    if let Some(tol) = spec.tail_tolerance {
        if tail.bound > tol {
            let msg = format!(
                "truncation at K = {} leaves a tail bound {:.3e} above {:.3e}",
                spec.modes, tail.bound, tol
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }
    Ok(SolutionField {
        x,
        t,
        rho: spec.rho,
        w,
        derived: None,
        modes,
        solutions,
        degenerate_modes: spec.degenerate_modes(),
        tail,
        imag_residue,
        warnings,
    })
}

type SectorKey = (u64, u64, u64, usize, usize);

/// Fitted sector constants keyed by `(ρ, α, T, K, N_t)`; sweeps reuse them.
fn sector_cache() -> &'static Mutex<HashMap<SectorKey, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<SectorKey, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Tail bound from modes `K+1..=4K`, with `M` fitted over modes `1..=K`.
pub fn tail_bound(spec: &ProblemSpec) -> Result<TailBound> {
    let k = spec.modes;
    let lambdas: Vec<f64> = (1..=k).map(|j| (j * j) as f64).collect();
    let key = (spec.rho.to_bits(), spec.alpha.to_bits(), spec.horizon.to_bits(), k, spec.n_t);
    let cached = sector_cache().lock().ok().and_then(|c| c.get(&key).copied());
    let fitted_m = match cached {
        Some(m) => m,
        None => {
            let times: Vec<f64> = spec.t_grid().into_iter().step_by(4).collect();
            let fit = fit_sector_constant(spec.rho, spec.rho, &[spec.alpha], &lambdas, &times)?;
            if let Ok(mut c) = sector_cache().lock() {
                c.insert(key, fit.fitted_m);
            }
            fit.fitted_m
        }
    };
    let params = spec.mode_params(4 * k)?;
    let bound = params[k..]
        .iter()
        .map(|p| mode_bound(p, fitted_m, spec.horizon))
        .sum();
    Ok(TailBound {
        fitted_m,
        bound,
        modes_examined: 3 * k,
    })
}

/// Derived fields from the analytic per-mode derivatives.
pub fn evaluate_derivatives(spec: &ProblemSpec, field: &SolutionField) -> Result<DerivedFields> {
    if field.modes.len() != spec.modes || field.modes.iter().any(|m| m.grid.len() != field.t.len())
    {
        return Err(Error::State("mode trajectories are missing or incomplete".into()));
    }
    let sines = sin_table(&field.x, spec.modes);
    Ok(DerivedFields {
        drho: synthesize(&sines, &field.modes, |_| 1.0, |s| s.drho.re),
        drho2: synthesize(&sines, &field.modes, |_| 1.0, |s| s.drho2.re),
        dxx: synthesize(&sines, &field.modes, |k| -((k * k) as f64), |s| s.y.re),
    })
}

/// Regularized source field `t^{1-ρ} f` on the grid.
pub fn source_field(spec: &ProblemSpec, field: &SolutionField) -> DMatrix<f64> {
    let last = field.x.len() - 1;
    DMatrix::from_fn(field.x.len(), field.t.len(), |i, j| {
        if i == 0 || i == last {
            0.0
        } else {
            spec.source_regular(field.x[i], field.t[j])
        }
    })
}

pub fn residual(spec: &ProblemSpec, field: &SolutionField) -> Result<ResidualReport> {
    let d = field
        .derived
        .as_ref()
        .ok_or_else(|| Error::State("derived fields have not been evaluated".into()))?;
    let f = source_field(spec, field);
    let r = &d.drho2 + &d.drho * (2.0 * spec.alpha) - &d.dxx - f;
    let n = r.len().max(1) as f64;
    let l2 = (r.iter().map(|v| v * v).sum::<f64>() / n).sqrt();
    Ok(ResidualReport {
        sup: sup(&r),
        l2,
        field: r,
    })
}

impl SolutionField {
    /// `t^{1-ρ} u` with the derived fields attached.
    pub fn with_derivatives(mut self, spec: &ProblemSpec) -> Result<Self> {
        self.derived = Some(evaluate_derivatives(spec, &self)?);
        Ok(self)
    }

    /// Unregularized `u(x_i, t_j)`.
    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.w[(i, j)] * self.t[j].powf(self.rho - 1.0)
    }

    pub fn sup_w(&self) -> f64 {
        sup(&self.w)
    }

    /// Regularized values summed over modes at an arbitrary point.
    pub fn state_at(&self, x: f64, t: f64) -> Result<ModeState> {
        let mut acc = ModeState::default();
        for (k, sol) in self.solutions.iter().enumerate() {
            let p = &sol.params;
            if p.phi0 == 0.0 && p.phi1 == 0.0 && p.source.is_zero() {
                continue;
            }
            let s = sol.state(t)?;
            let v = ((k + 1) as f64 * x).sin();
            acc.y += s.y * v;
            acc.drho += s.drho * v;
            acc.drho2 += s.drho2 * v;
        }
        Ok(acc)
    }

    /// Scales the contribution of mode `k` to `w` and `u_xx` by `factor`,
    /// leaving the time derivatives untouched.
    pub fn corrupt_mode(&mut self, k: usize, factor: f64) -> Result<()> {
        if k == 0 || k > self.modes.len() {
            return Err(invalid(format!("mode {k} is not part of the field")));
        }
        let last = self.x.len() - 1;
        let kf = k as f64;
        for j in 0..self.t.len() {
            let y = self.modes[k - 1].states[j].y.re;
            for i in 1..last {
                let v = (kf * self.x[i]).sin() * y * (factor - 1.0);
                self.w[(i, j)] += v;
                if let Some(d) = self.derived.as_mut() {
                    d.dxx[(i, j)] -= kf * kf * v;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn coefficients_of_pure_modes() {
        let c = sine_coefficients(|x| (3.0 * x).sin(), 6).unwrap();
        for (k, v) in c.iter().enumerate() {
            let e = if k == 2 { 1.0 } else { 0.0 };
            assert!((v - e).abs() < 1e-14, "{k} {v}");
        }
        let c = sine_coefficients(|x| x.sin() + 0.5 * (2.0 * x).sin(), 4).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        assert!(c[2].abs() < 1e-14 && c[3].abs() < 1e-14);
    }

    #[test]
    fn parabola_coefficients() {
        let c = sine_coefficients(|x| x * (PI - x), 64).unwrap();
        for (i, v) in c.iter().enumerate() {
            let k = (i + 1) as f64;
            let e = if (i + 1) % 2 == 1 { 8.0 / (PI * k.powi(3)) } else { 0.0 };
            assert!((v - e).abs() < 1e-12, "{k}: {v} vs {e}");
        }
    }

    #[test]
    fn coefficients_reject_boundary_violation() {
        assert!(matches!(
            sine_coefficients(|x| x, 4),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn sampled_coefficients() {
        let xs: Vec<f64> = (0..=400).map(|i| PI * i as f64 / 400.0).collect();
        let v: Vec<f64> = xs.iter().map(|x| (2.0 * x).sin() * 0.25).collect();
        let c = sine_coefficients_sampled(&v, 3).unwrap();
        assert_relative_eq!(c[1], 0.25, max_relative = 1e-12);
    }

    #[test]
    fn zero_data_field_is_zero() {
        let spec = ProblemSpec {
            modes: 8,
            n_t: 16,
            m_x: 10,
            ..ProblemSpec::new(0.5, 1.0, DataSpec::Zero, DataSpec::Zero)
        };
        let f = assemble_solution(&spec).unwrap().with_derivatives(&spec).unwrap();
        assert_eq!(f.sup_w(), 0.0);
        assert_eq!(residual(&spec, &f).unwrap().sup, 0.0);
    }

    #[test]
    fn single_mode_eigenrelation() {
        let spec = ProblemSpec {
            modes: 4,
            n_t: 16,
            m_x: 20,
            ..ProblemSpec::new(0.6, 2.0, DataSpec::Zero, DataSpec::Sine { mode: 3, amplitude: 1.0 })
        };
        let f = assemble_solution(&spec).unwrap().with_derivatives(&spec).unwrap();
        let d = f.derived.as_ref().unwrap();
        for i in 0..=20 {
            for j in 0..16 {
                let e = -9.0 * f.w[(i, j)];
                assert!((d.dxx[(i, j)] - e).abs() <= 1e-13 * e.abs().max(1.0));
            }
        }
        assert_eq!(f.w.row(0).iter().chain(f.w.row(20).iter()).fold(0.0f64, |a, v| a.max(v.abs())), 0.0);
    }

    #[test]
    fn missing_modes_are_a_state_error() {
        let spec = ProblemSpec {
            modes: 4,
            n_t: 16,
            m_x: 10,
            ..ProblemSpec::new(0.6, 2.0, DataSpec::Zero, DataSpec::Sine { mode: 1, amplitude: 1.0 })
        };
        let mut f = assemble_solution(&spec).unwrap();
        f.modes.clear();
        assert!(matches!(evaluate_derivatives(&spec, &f), Err(Error::State(_))));
        assert!(matches!(residual(&spec, &f), Err(Error::State(_))));
    }

    #[test]
    fn tail_tolerance_warns() {
        let spec = ProblemSpec {
            modes: 4,
            n_t: 8,
            m_x: 8,
            tail_tolerance: Some(1e-12),
            ..ProblemSpec::new(0.5, 1.0, DataSpec::Zero, DataSpec::Parabola { scale: 1.0 })
        };
        let f = assemble_solution(&spec).unwrap();
        assert!(f.tail.bound > 1e-12);
        assert_eq!(f.warnings.len(), 1);
    }
}
