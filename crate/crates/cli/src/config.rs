use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use lsi_core::uncertainty::{default_norm_config, GridSpec, WeightSpec};
use lsi_core::QuadratureConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Flags shared by every subcommand. Anything left unset falls back to `--config`.
#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Bump amplitude.
    #[arg(long, global = true)]
    pub s: Option<f64>,
    /// Bump decay exponent, r_k = s k^-t / 4.
    #[arg(long, global = true)]
    pub t: Option<f64>,
    /// Second-moment budget for the W2 instability runs.
    #[arg(long = "M", global = true)]
    #[serde(rename = "M")]
    pub m: Option<f64>,
    /// Comma separated, e.g. "5,7,10".
    #[arg(long, global = true, value_delimiter = ',')]
    pub k: Option<Vec<f64>>,
    /// Exponents for moments, W_p or weighted L^p norms.
    #[arg(long, global = true, value_delimiter = ',')]
    pub p: Option<Vec<f64>>,
    /// Tilt parameters for `example-gb`.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub b: Option<Vec<f64>>,
    /// lebesgue | power:LAMBDA | invgauss:THETA
    #[arg(long, global = true)]
    pub weight: Option<String>,
    /// FFT size, a power of two; fixes N instead of refining.
    #[arg(long = "grid-n", global = true)]
    pub grid_n: Option<usize>,
    /// Absolute tolerance for weighted-norm quadrature.
    #[arg(long = "tol-abs", global = true)]
    pub tol_abs: Option<f64>,
    /// Relative tolerance for weighted-norm quadrature.
    #[arg(long = "tol-rel", global = true)]
    pub tol_rel: Option<f64>,
    /// Output file (a directory for fixtures-regen); stdout otherwise.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug)]
pub struct ConfigError {
    pub field: &'static str,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid config field `{}`: {}", self.field, self.reason)
    }
}

fn bad(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError { field, reason: reason.into() }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| bad("config", e.to_string()))
    }

    /// Flags in `self` win over `file`.
    pub fn over(self, file: ExperimentConfig) -> Self {
        ExperimentConfig {
            s: self.s.or(file.s),
            t: self.t.or(file.t),
            m: self.m.or(file.m),
            k: self.k.or(file.k),
            p: self.p.or(file.p),
            b: self.b.or(file.b),
            weight: self.weight.or(file.weight),
            grid_n: self.grid_n.or(file.grid_n),
            tol_abs: self.tol_abs.or(file.tol_abs),
            tol_rel: self.tol_rel.or(file.tol_rel),
            out: self.out.or(file.out),
            format: self.format.or(file.format),
        }
    }

    /// Checks everything that was set; run before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = |field, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(bad(field, format!("must be finite and > 0, got {x}"))),
            _ => Ok(()),
        };
        positive("s", self.s)?;
        positive("t", self.t)?;
        positive("tol-abs", self.tol_abs)?;
        positive("tol-rel", self.tol_rel)?;
        if let Some(m) = self.m {
            if !(m > 1.0 && m.is_finite()) {
                return Err(bad("M", format!("must exceed 1, got {m}")));
            }
        }
        if let Some(ks) = &self.k {
            if ks.is_empty() || ks.iter().any(|k| !(k.is_finite() && *k >= 2.0)) {
                return Err(bad("k", "every k must be finite and >= 2"));
            }
            if ks.windows(2).any(|w| w[1] <= w[0]) {
                return Err(bad("k", "grid must be strictly increasing"));
            }
        }
        if let Some(ps) = &self.p {
            if ps.is_empty() || ps.iter().any(|p| !(p.is_finite() && *p >= 1.0)) {
                return Err(bad("p", "every p must be finite and >= 1"));
            }
        }
        if let Some(bs) = &self.b {
            if bs.is_empty() || bs.iter().any(|b| !b.is_finite()) {
                return Err(bad("b", "every b must be finite"));
            }
        }
        self.weight_spec()?;
        self.grid()?;
        Ok(())
    }

    pub fn s_or(&self, d: f64) -> f64 {
        self.s.unwrap_or(d)
    }

    pub fn t_or(&self, d: f64) -> f64 {
        self.t.unwrap_or(d)
    }

    pub fn k_or(&self, d: &[f64]) -> Vec<f64> {
        self.k.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn p_or(&self, d: &[f64]) -> Vec<f64> {
        self.p.clone().unwrap_or_else(|| d.to_vec())
    }

    pub fn weight_spec(&self) -> Result<Option<WeightSpec>, ConfigError> {
        self.weight.as_deref().map(|w| w.parse::<WeightSpec>().map_err(|e| bad("weight", e.to_string()))).transpose()
    }

    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        let g = match self.grid_n {
            Some(n) => GridSpec::with_n(n),
            None => GridSpec::default(),
        };
        g.validate().map_err(|e| bad("grid-n", e.to_string()))?;
        Ok(g)
    }

    pub fn quadrature(&self) -> QuadratureConfig {
        let mut q = default_norm_config();
        if let Some(a) = self.tol_abs {
            q.abs_tol = a;
        }
        if let Some(r) = self.tol_rel {
            q.rel_tol = r;
        }
        q
    }

    pub fn format(&self) -> Format {
        self.format.unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let file: ExperimentConfig = serde_json::from_str(r#"{"s": 2.0, "t": 0.5, "M": 7.0}"#).unwrap();
        let flags = ExperimentConfig { s: Some(1.0), ..Default::default() };
        let c = flags.over(file);
        assert_eq!((c.s, c.t, c.m), (Some(1.0), Some(0.5), Some(7.0)));
    }

    #[test]
    fn validation_names_fields() {
        let cases = [
            (ExperimentConfig { k: Some(vec![10.0, 5.0]), ..Default::default() }, "k"),
            (ExperimentConfig { m: Some(1.0), ..Default::default() }, "M"),
            (ExperimentConfig { weight: Some("cauchy".into()), ..Default::default() }, "weight"),
            (ExperimentConfig { grid_n: Some(1000), ..Default::default() }, "grid-n"),
            (ExperimentConfig { t: Some(-1.0), ..Default::default() }, "t"),
        ];
        for (c, field) in cases {
            assert_eq!(c.validate().unwrap_err().field, field);
        }
        assert!(ExperimentConfig::default().validate().is_ok());
    }

    #[test]
    fn tolerances_reach_quadrature() {
        let c = ExperimentConfig { tol_rel: Some(1e-6), ..Default::default() };
        assert_eq!(c.quadrature().rel_tol, 1e-6);
        assert_eq!(c.quadrature().abs_tol, default_norm_config().abs_tol);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"kk": [1]}"#).is_err());
    }
}
