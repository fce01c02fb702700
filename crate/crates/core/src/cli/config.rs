//! JSON configuration files for single runs and sweeps.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::bounds::{Constants, GSpec, Instance, Theorem};
use crate::dist::DistMatrix;
use crate::error::{Error, Result};
use crate::matrix::{rows_from_csv, CoefficientMatrix};

/// Coefficients (inline or from a CSV file) plus the cell laws.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// CSV path, relative to the file that names it.
    #[serde(default)]
    pub matrix_csv: Option<PathBuf>,
    /// Double-center the matrix instead of requiring centered input.
    #[serde(default)]
    pub center: bool,
    pub y: DistMatrix,
}

impl InstanceConfig {
    pub fn build(&self, base: &Path) -> Result<Instance> {
        let rows = match (&self.matrix, &self.matrix_csv) {
            (Some(rows), None) => rows.clone(),
            (None, Some(path)) => {
                let path = base.join(path);
                let text = std::fs::read_to_string(&path).map_err(|e| Error::Config {
                    source_name: path.display().to_string(),
                    message: e.to_string(),
                })?;
                rows_from_csv(&text)?
            }
            _ => {
                return Err(Error::Config {
                    source_name: "matrix".into(),
                    message: "give exactly one of `matrix` and `matrix_csv`".into(),
                })
            }
        };
        let c = if self.center {
            CoefficientMatrix::double_center(&rows)?
        } else {
            CoefficientMatrix::new(&rows)?
        };
        Instance::new(c, self.y.clone())
    }
}

/// A single-run configuration: one instance plus optional task parameters.
/// Command-line flags take precedence over these.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub matrix_csv: Option<PathBuf>,
    #[serde(default)]
    pub center: bool,
    pub y: DistMatrix,
    #[serde(default)]
    pub theorems: Option<Vec<Theorem>>,
    #[serde(default)]
    pub g: Option<GSpec>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub confidence: Option<f64>,
    #[serde(default)]
    pub rho_sqrt: Option<f64>,
    #[serde(default)]
    pub constants: Option<Constants>,
}

impl RunConfig {
    pub fn instance_config(&self) -> InstanceConfig {
        InstanceConfig {
            matrix: self.matrix.clone(),
            matrix_csv: self.matrix_csv.clone(),
            center: self.center,
            y: self.y.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepRow {
    pub label: String,
    pub instance: InstanceConfig,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_theorems() -> Vec<Theorem> {
    vec![Theorem::A, Theorem::One, Theorem::Two, Theorem::Three]
}

fn default_g() -> GSpec {
    GSpec::MinAbsCap(crate::bounds::Cap::SqrtBn)
}

fn default_delta() -> f64 {
    1.0
}

fn default_m() -> usize {
    100_000
}

fn default_confidence() -> f64 {
    0.99
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    #[serde(default)]
    pub rows: Vec<SweepRow>,
    #[serde(default = "default_theorems")]
    pub theorems: Vec<Theorem>,
    #[serde(default = "default_g")]
    pub g: GSpec,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default)]
    pub constants: Option<Constants>,
}

/// Parse JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str, source_name: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let message = if path == "." || path.is_empty() {
            inner.to_string()
        } else {
            format!("field `{path}`: {inner}")
        };
        Error::Config {
            source_name: source_name.into(),
            message,
        }
    })
}

pub fn load<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        source_name: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_json(&text, &path.display().to_string())
}
