//! Run configuration in TOML.
//!
//! ```toml
//! rho = 0.6
//! alpha = 2.0
//! K = 64          # optional, also T, N_t, M_x, seed, tail_tolerance
//!
//! [phi1]
//! kind = "parabola"
//!
//! [[source]]
//! mode = 1
//! coeffs = [1.0, 0.0]
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{DataSpec, ProblemSpec, SourceSpec};

pub const DEFAULT_MODES: usize = 64;
pub const DEFAULT_NT: usize = 128;
pub const DEFAULT_MX: usize = 200;

fn d_horizon() -> f64 {
    1.0
}
fn d_modes() -> usize {
    DEFAULT_MODES
}
fn d_nt() -> usize {
    DEFAULT_NT
}
fn d_mx() -> usize {
    DEFAULT_MX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub residual: f64,
    pub oracle: f64,
    pub initial_condition: f64,
    pub realness: f64,
    pub uniqueness: f64,
    /// Allowed relative change of the largest stability ratio under refinement.
    pub stability_spread: f64,
    /// Allowed multiple of the median stability ratio.
    pub stability_median_factor: f64,
    /// Allowed relative growth of partial sums when `K` doubles.
    pub partial_sum_growth: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-6,
            oracle: 1e-6,
            initial_condition: 1e-3,
            realness: 1e-12,
            uniqueness: 1e-12,
            stability_spread: 0.2,
            stability_median_factor: 10.0,
            partial_sum_growth: 0.01,
        }
    }
}

impl Tolerances {
    pub fn scaled(&self, s: f64) -> Self {
        Tolerances {
            residual: self.residual * s,
            oracle: self.oracle * s,
            initial_condition: self.initial_condition * s,
            realness: self.realness * s,
            uniqueness: self.uniqueness * s,
            stability_spread: self.stability_spread * s,
            stability_median_factor: self.stability_median_factor * s,
            partial_sum_growth: self.partial_sum_growth * s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub count: usize,
    pub holder_exponent: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            count: 30,
            holder_exponent: crate::verify::HOLDER_EXPONENT,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConvergeConfig {
    /// Truncations to compare; empty means `K/4, K/2, K`.
    pub modes: Vec<usize>,
    /// Time-grid sizes; empty means `N_t/2, N_t`.
    pub grids: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub rho: f64,
    pub alpha: f64,
    #[serde(rename = "T", default = "d_horizon")]
    pub horizon: f64,
    #[serde(rename = "K", default = "d_modes")]
    pub modes: usize,
    #[serde(rename = "N_t", default = "d_nt")]
    pub n_t: usize,
    #[serde(rename = "M_x", default = "d_mx")]
    pub m_x: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_tolerance: Option<f64>,
    #[serde(default)]
    pub phi0: DataSpec,
    #[serde(default)]
    pub phi1: DataSpec,
    #[serde(default)]
    pub source: Vec<SourceSpec>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub converge: ConvergeConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn problem(&self) -> ProblemSpec {
        ProblemSpec {
            rho: self.rho,
            alpha: self.alpha,
            horizon: self.horizon,
            phi0: self.phi0.clone(),
            phi1: self.phi1.clone(),
            source: self.source.clone(),
            modes: self.modes,
            n_t: self.n_t,
            m_x: self.m_x,
            tail_tolerance: self.tail_tolerance,
        }
    }

    /// Effective configuration as TOML.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(format!("cannot serialize config: {e}")))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Position of the first `key = ...` assignment, or of the text start.
fn key_position(text: &str, key: &str) -> (usize, usize) {
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if let Some(rest) = trimmed.strip_prefix(key) {
            if rest.trim_start().starts_with('=') {
                let indent = line.len() - trimmed.len();
                return line_col(text, offset + indent);
            }
        }
        offset += line.len();
    }
    (1, 1)
}

fn range_error(text: &str, key: &str, message: String) -> Error {
    let (line, column) = key_position(text, key);
    Error::Config {
        line,
        column,
        message,
    }
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        Error::Config {
            line,
            column,
            message: e.message().trim().to_string(),
        }
    })?;
    validate(&cfg, text)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig, text: &str) -> Result<()> {
    let err = |key: &str, msg: String| Err(range_error(text, key, msg));
    if !(cfg.rho > 0.0 && cfg.rho < 1.0) {
        return err("rho", format!("rho must lie in (0,1), got {}", cfg.rho));
    }
    if !(cfg.alpha.is_finite() && cfg.alpha > 0.0) {
        return err("alpha", format!("alpha must be positive, got {}", cfg.alpha));
    }
    if !(cfg.horizon.is_finite() && cfg.horizon > 0.0) {
        return err("T", format!("T must be positive, got {}", cfg.horizon));
    }
    if !(1..=4096).contains(&cfg.modes) {
        return err("K", format!("K must lie in [1, 4096], got {}", cfg.modes));
    }
    if !(8..=1 << 16).contains(&cfg.n_t) {
        return err("N_t", format!("N_t must lie in [8, 65536], got {}", cfg.n_t));
    }
    if !(2..=1 << 16).contains(&cfg.m_x) {
        return err("M_x", format!("M_x must lie in [2, 65536], got {}", cfg.m_x));
    }
    if cfg.seed > i64::MAX as u64 {
        return err("seed", format!("seed must not exceed {}", i64::MAX));
    }
    if let Some(t) = cfg.tail_tolerance {
        if !(t > 0.0) {
            return err("tail_tolerance", "tail_tolerance must be positive".into());
        }
    }
    for (key, d) in [("phi0", &cfg.phi0), ("phi1", &cfg.phi1)] {
        match d {
            DataSpec::Sine { mode: 0, .. } => {
                return err("mode", format!("{key}: sine mode must be at least 1"))
            }
            DataSpec::Sine { amplitude: v, .. } | DataSpec::Parabola { scale: v }
                if !v.is_finite() =>
            {
                return err(key, format!("{key}: non-finite value"))
            }
            DataSpec::Coefficients { values } if values.iter().any(|v| !v.is_finite()) => {
                return err("values", format!("{key}: non-finite coefficient"))
            }
            _ => {}
        }
    }
    for s in &cfg.source {
        if s.mode == 0 {
            return err("mode", "source mode must be at least 1".into());
        }
        if s.coeffs.iter().any(|c| !c.is_finite()) {
            return err("coeffs", "non-finite source coefficient".into());
        }
    }
    if cfg.sweep.holder_exponent <= 0.5 {
        return err("holder_exponent", "holder_exponent must exceed 1/2".into());
    }
    let t = &cfg.tolerances;
    let all = [
        t.residual,
        t.oracle,
        t.initial_condition,
        t.realness,
        t.uniqueness,
        t.stability_spread,
        t.stability_median_factor,
        t.partial_sum_growth,
    ];
    if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return err("tolerances", "tolerances must be positive".into());
    }
    if cfg.converge.modes.iter().any(|&k| k == 0) || cfg.converge.grids.iter().any(|&n| n < 8) {
        return err("converge", "converge lists need K ≥ 1 and N_t ≥ 8".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "rho = 0.6\nalpha = 2.0\n\n[phi1]\nkind = \"parabola\"\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!((c.modes, c.n_t, c.m_x), (64, 128, 200));
        assert_eq!(c.phi1, DataSpec::Parabola { scale: 1.0 });
        assert_eq!(c.phi0, DataSpec::Zero);
    }

    #[test]
    fn out_of_range_rho_is_rejected_with_position() {
        let e = parse_config("alpha = 1.0\nrho = 1.5\n").unwrap_err();
        match e {
            Error::Config { line, column, message } => {
                assert_eq!((line, column), (2, 1));
                assert!(message.contains("rho must lie in (0,1)"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = parse_config("rho = 0.5\nalpha = 1.0\nbeta = 3\n").unwrap_err();
        match e {
            Error::Config { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("beta"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(parse_config("rho = 0.5\nalpha = 1.0\n[phi1]\nkind = \"sine\"\nmode = 1\namplitude = 1.0\nphase = 2\n").is_err());
    }

    #[test]
    fn malformed_text_reports_line() {
        match parse_config("rho = 0.5\nalpha = = 1\n").unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn round_trip() {
        let text = "rho = 0.35\nalpha = 1.25\nK = 12\nseed = 9\ntail_tolerance = 1e-3\n\n\
                    [phi0]\nkind = \"coefficients\"\nvalues = [0.1, -0.2, 0.30000000000000004]\n\n\
                    [phi1]\nkind = \"sine\"\nmode = 2\namplitude = 0.5\n\n\
                    [[source]]\nmode = 3\ncoeffs = [1.0, 2.5]\n\n\
                    [tolerances]\nresidual = 2e-6\n";
        let a = parse_config(text).unwrap();
        let emitted = a.to_toml().unwrap();
        let b = parse_config(&emitted).unwrap();
        assert_eq!(a, b);
        assert_eq!(emitted, b.to_toml().unwrap());
    }
}
