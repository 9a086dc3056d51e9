//! JSON run configuration; command-line flags override file values.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::systems::quasineutral::QuasineutralParams;

/// Background magnetic field of the Vlasov-Poisson reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum B0Spec {
    /// `(sin z, sin x, 1 + sin y)`
    #[default]
    Sinusoidal,
    Uniform([f64; 3]),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    pub rho0: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub c_v: f64,
    pub b0: B0Spec,
    /// Ion and electron Maxwellians; defaults to the standard pair.
    pub maxwellian: Option<QuasineutralParams>,
    /// Velocity half-width for the quasineutral grid.
    pub v_max: Option<f64>,
}

impl Default for SystemParams {
    fn default() -> Self {
        let e = crate::systems::mhd::EnergyParams::default();
        Self {
            rho0: 1.0,
            gamma: e.gamma,
            kappa: e.kappa,
            c_v: e.c_v,
            b0: B0Spec::default(),
            maxwellian: None,
            v_max: None,
        }
    }
}

impl SystemParams {
    pub fn energy(&self) -> crate::systems::mhd::EnergyParams {
        crate::systems::mhd::EnergyParams {
            kappa: self.kappa,
            gamma: self.gamma,
            c_v: self.c_v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct OutputPaths {
    pub report: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub system: Option<String>,
    /// `[NX]`, `[NX, NY, NZ]` or `[NX, NY, NZ, NVX, NVY, NVZ]` (quasineutral:
    /// `[NX, NV]` or `[NX, NY, NVX, NVY]`).
    pub grid: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    /// Per-check tolerance overrides; the key `"default"` applies to every
    /// check that is not a negative control.
    pub tolerances: BTreeMap<String, f64>,
    pub system_params: SystemParams,
    pub output: OutputPaths,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            system: None,
            grid: None,
            seeds: vec![42],
            tolerances: BTreeMap::new(),
            system_params: SystemParams::default(),
            output: OutputPaths::default(),
        }
    }
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Config = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Usage("at least one seed is required".into()));
        }
        if let Some((k, v)) = self.tolerances.iter().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::Usage(format!("tolerance {k} must be positive, got {v}")));
        }
        if !(self.system_params.rho0 > 0.0) {
            return Err(Error::InvalidParameter("rho0 must be positive".into()));
        }
        self.system_params.energy().validate()
    }

    /// Tolerance for check `name`, falling back to `"default"` and then to
    /// `fallback`.
    pub fn tolerance(&self, name: &str, fallback: f64) -> f64 {
        self.tolerances
            .get(name)
            .or_else(|| self.tolerances.get("default"))
            .copied()
            .unwrap_or(fallback)
    }
}

/// Parses `"16"` or `"8,8,8,4,4,4"`.
pub fn parse_grid(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad grid size {s:?} in {text:?}")))
        })
        .collect()
}

/// Parses a wavevector such as `"1,0,0"`.
pub fn parse_wavevector(text: &str) -> Result<Vec<i64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<i64>()
                .map_err(|_| Error::Usage(format!("bad wavevector component {s:?} in {text:?}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.tolerance("anything", 1e-9), 1e-9);
    }

    #[test]
    fn tolerance_lookup_order() {
        let c = Config::from_json(r#"{"tolerances": {"default": 1e-6, "jacobi": 1e-3}}"#).unwrap();
        assert_eq!(c.tolerance("jacobi", 1e-9), 1e-3);
        assert_eq!(c.tolerance("other", 1e-9), 1e-6);
    }

    #[test]
    fn full_config_parses() {
        let text = r#"{
            "system": "vlasov_poisson",
            "grid": [8, 8, 8, 4, 4, 4],
            "seeds": [1, 2],
            "system_params": {"rho0": 2.0, "gamma": 1.4, "b0": {"uniform": [0.0, 0.0, 1.0]}},
            "output": {"report": "r.json", "csv": "m.csv"}
        }"#;
        let c = Config::from_json(text).unwrap();
        assert_eq!(c.system_params.b0, B0Spec::Uniform([0.0, 0.0, 1.0]));
        assert_eq!(c.output.csv, Some(PathBuf::from("m.csv")));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(Config::from_json(r#"{"seeds": []}"#).is_err());
        assert!(Config::from_json(r#"{"system_params": {"gamma": 0.9}}"#).is_err());
        assert!(Config::from_json(r#"{"unknown": 1}"#).is_err());
        assert!(Config::from_json(r#"{"tolerances": {"x": -1}}"#).is_err());
    }

    #[test]
    fn grid_and_wavevector_parsing() {
        assert_eq!(parse_grid("8, 8,8").unwrap(), vec![8, 8, 8]);
        assert!(parse_grid("8,x").is_err());
        assert_eq!(parse_wavevector("1,-1,0").unwrap(), vec![1, -1, 0]);
    }
}
