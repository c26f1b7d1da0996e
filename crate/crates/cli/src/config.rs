use std::path::{Path, PathBuf};

use serde::Deserialize;
use tqc_core::model::{build_sector_state, BlochVector, MeanFieldState, ModelParams, SectorFamilySpec};

use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum EtaSpec {
    Number(f64),
    Named(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSector {
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    m1: Option<[f64; 3]>,
    m2: Option<[f64; 3]>,
    sector: Option<RawSector>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    omega: Option<f64>,
    kappa: Option<f64>,
    eta: Option<EtaSpec>,
    n_atoms: Option<usize>,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    numerics: Numerics,
    #[serde(default)]
    output: RawOutput,
}

/// Numerical settings; every field has a default.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Numerics {
    pub tol: f64,
    pub t_end: f64,
    pub dt_out: f64,
    pub grid: usize,
    pub birkhoff_t_end: f64,
    pub reconstruct_t_end: f64,
    pub spectrum_t_end: f64,
    pub spectrum_dt: f64,
    pub line_threshold: f64,
    pub lattice_k: i64,
    pub peaks: usize,
    pub observable_branch: usize,
    pub lyapunov_t_end: f64,
    pub renorm_interval: f64,
    pub seed: u64,
    pub quantum_t_end: f64,
    pub quantum_dt_out: f64,
    pub n_values: Vec<usize>,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tol: 1e-10,
            t_end: 100.0,
            dt_out: 0.05,
            grid: 256,
            birkhoff_t_end: 1e4,
            reconstruct_t_end: 60.0,
            spectrum_t_end: 4096.0,
            spectrum_dt: 0.0625,
            line_threshold: 0.005,
            lattice_k: 6,
            peaks: 20,
            observable_branch: 1,
            lyapunov_t_end: 1000.0,
            renorm_interval: 1.0,
            seed: 1,
            quantum_t_end: 10.0,
            quantum_dt_out: 0.05,
            n_values: vec![2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialSpec {
    Explicit { m1: [f64; 3], m2: [f64; 3] },
    Sector { epsilon: f64 },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: ModelParams<f64>,
    pub initial: InitialSpec,
    pub numerics: Numerics,
    pub out_dir: PathBuf,
}

pub const DEFAULT_OMEGA_OVER_KAPPA: f64 = 1.2;

fn parse_eta(spec: &EtaSpec) -> CliResult<f64> {
    match spec {
        EtaSpec::Number(x) => Ok(*x),
        EtaSpec::Named(name) => match name.as_str() {
            "1/sqrt2" => Ok(std::f64::consts::FRAC_1_SQRT_2),
            "golden" => Ok((5f64.sqrt() - 1.0) / 2.0),
            "sqrt2-1" => Ok(2f64.sqrt() - 1.0),
            other => Err(CliError::invalid("eta", format!("unknown constant `{other}` (expected a number, \"1/sqrt2\", \"golden\" or \"sqrt2-1\")"))),
        },
    }
}

fn positive(key: &str, v: f64) -> CliResult<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(CliError::invalid(format!("numerics.{key}"), format!("must be positive and finite (got {v})")))
    }
}

impl Numerics {
    fn validate(&self) -> CliResult<()> {
        for (k, v) in [
            ("tol", self.tol),
            ("t_end", self.t_end),
            ("dt_out", self.dt_out),
            ("birkhoff_t_end", self.birkhoff_t_end),
            ("reconstruct_t_end", self.reconstruct_t_end),
            ("spectrum_t_end", self.spectrum_t_end),
            ("spectrum_dt", self.spectrum_dt),
            ("line_threshold", self.line_threshold),
            ("lyapunov_t_end", self.lyapunov_t_end),
            ("renorm_interval", self.renorm_interval),
            ("quantum_t_end", self.quantum_t_end),
            ("quantum_dt_out", self.quantum_dt_out),
        ] {
            positive(k, v)?;
        }
        if !self.grid.is_power_of_two() || self.grid < 64 {
            return Err(CliError::invalid("numerics.grid", format!("must be a power of two >= 64 (got {})", self.grid)));
        }
        if self.lattice_k < 1 {
            return Err(CliError::invalid("numerics.lattice_k", "must be at least 1"));
        }
        if !(1..=2).contains(&self.observable_branch) {
            return Err(CliError::invalid("numerics.observable_branch", "must be 1 or 2"));
        }
        if self.n_values.is_empty() || self.n_values.iter().any(|n| !(1..=6).contains(n)) {
            return Err(CliError::invalid("numerics.n_values", "must list atom counts in 1..=6"));
        }
        Ok(())
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::ReadConfig { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> CliResult<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse(e.message().to_string()))?;
        let kappa = raw.kappa.ok_or(CliError::MissingKey("kappa"))?;
        let omega = raw.omega.unwrap_or(DEFAULT_OMEGA_OVER_KAPPA * kappa);
        let eta = match &raw.eta {
            Some(e) => parse_eta(e)?,
            None => std::f64::consts::FRAC_1_SQRT_2,
        };
        let mut params = ModelParams::new(omega, kappa, eta);
        if let Some(n) = raw.n_atoms {
            if !(1..=6).contains(&n) {
                return Err(CliError::invalid("n_atoms", format!("must lie in 1..=6 (got {n})")));
            }
            params = params.with_atoms(n);
        }
        let params = params.validate()?;

        let initial = match (raw.initial.m1, raw.initial.m2, raw.initial.sector) {
            (None, None, None) => InitialSpec::Explicit { m1: [0.0, 0.0, -0.5], m2: [0.0, 0.0, -0.5] },
            (Some(m1), Some(m2), None) => InitialSpec::Explicit { m1, m2 },
            (None, None, Some(s)) => {
                InitialSpec::Sector { epsilon: s.epsilon.ok_or(CliError::MissingKey("initial.sector.epsilon"))? }
            }
            (_, _, Some(_)) => {
                return Err(CliError::invalid("initial", "give either m1/m2 or a sector, not both"));
            }
            (Some(_), None, None) => return Err(CliError::MissingKey("initial.m2")),
            (None, Some(_), None) => return Err(CliError::MissingKey("initial.m1")),
        };
        raw.numerics.validate()?;
        let cfg = RunConfig {
            params,
            initial,
            numerics: raw.numerics,
            out_dir: raw.output.dir.unwrap_or_else(|| PathBuf::from("out")),
        };
        cfg.initial_state()?;
        Ok(cfg)
    }

    pub fn initial_state(&self) -> CliResult<MeanFieldState<f64>> {
        Ok(match self.initial {
            InitialSpec::Explicit { m1, m2 } => {
                MeanFieldState::new(BlochVector::from_array(m1), BlochVector::from_array(m2))?
            }
            InitialSpec::Sector { epsilon } => {
                build_sector_state(&SectorFamilySpec { epsilon, eta: self.params.eta })?
            }
        })
    }

    /// Atom counts for the finite-N runs; `n_atoms` takes precedence.
    pub fn atom_counts(&self) -> Vec<usize> {
        match self.params.n_atoms {
            Some(n) => vec![n],
            None => self.numerics.n_values.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = RunConfig::parse("kappa = 2.0\n").unwrap();
        assert_eq!(c.params.omega, 2.4);
        assert_eq!(c.params.eta, std::f64::consts::FRAC_1_SQRT_2);
        assert_eq!(c.initial, InitialSpec::Explicit { m1: [0.0, 0.0, -0.5], m2: [0.0, 0.0, -0.5] });
        assert_eq!(c.numerics.grid, 256);
        assert_eq!(c.out_dir, PathBuf::from("out"));
    }

    #[test]
    fn named_eta_and_sector() {
        let c = RunConfig::parse(
            "omega = 0.9\nkappa = 1.0\neta = \"golden\"\n[initial.sector]\nepsilon = 0.5\n[numerics]\ngrid = 128\n",
        )
        .unwrap();
        assert!((c.params.eta - 0.6180339887498949).abs() < 1e-15);
        assert_eq!(c.initial, InitialSpec::Sector { epsilon: 0.5 });
        let s = c.initial_state().unwrap();
        assert!((s.m1.norm() + s.m2.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejections() {
        let missing = RunConfig::parse("omega = 1.0\n").unwrap_err();
        assert_eq!(missing.code(), "missing_key");
        assert!(missing.to_string().contains("kappa"));
        assert_eq!(RunConfig::parse("kappa = 1.0\neta = \"pi\"\n").unwrap_err().code(), "invalid_value");
        assert_eq!(RunConfig::parse("kappa = -1.0\n").unwrap_err().code(), "non_positive_kappa");
        assert_eq!(RunConfig::parse("kappa = 1.0\n[numerics]\ngrid = 100\n").unwrap_err().code(), "invalid_value");
        assert_eq!(RunConfig::parse("kappa = 1.0\nbogus = 3\n").unwrap_err().code(), "config_parse");
        assert_eq!(RunConfig::parse("kappa = 1.0\n[initial]\nm1 = [0.0, 0.0, 1.0]\n").unwrap_err().code(), "missing_key");
        assert_eq!(RunConfig::parse("kappa = 1.0\n[initial.sector]\nepsilon = 2.0\n").unwrap_err().code(), "epsilon_out_of_range");
    }
}
