//! CSV ingestion and versioned JSON run configurations.
//!
//! CSV files hold plain decimal numbers separated by commas, one observation
//! per line, with an optional single header line. Row numbers in errors are
//! 1-based line numbers of the input.

use std::io::Read;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cavi::FitConfig;
use crate::diagnostics::DiagnoseOptions;
use crate::error::{Error, Result};
use crate::model::Dataset;
use crate::sim::{SimDesign, Variant};

/// Version written into every persisted config and result.
pub const SCHEMA_VERSION: u32 = 1;

fn reader<R: Read>(input: R, header: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn parse_number(field: &str, row: usize, col: usize) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Parse {
        row,
        message: format!("column {}: cannot parse {field:?} as a number", col + 1),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            row,
            message: format!("column {}: non-finite value {field:?}", col + 1),
        });
    }
    Ok(v)
}

fn records<R: Read>(input: R, header: bool) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut rdr = reader(input, header);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = rec.position().map_or(out.len() + 1, |p| p.line() as usize);
        let values = rec
            .iter()
            .enumerate()
            .map(|(c, f)| parse_number(f, row, c))
            .collect::<Result<Vec<_>>>()?;
        out.push((row, values));
    }
    if out.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }
    Ok(out)
}

/// Reads a rectangular numeric matrix (rows are observations).
pub fn read_matrix<R: Read>(input: R, header: bool) -> Result<DMatrix<f64>> {
    let rows = records(input, header)?;
    let p = rows[0].1.len();
    for (row, values) in &rows {
        if values.len() != p {
            return Err(Error::Parse {
                row: *row,
                message: format!("expected {p} fields, found {}", values.len()),
            });
        }
    }
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        p,
        rows.into_iter().flat_map(|(_, v)| v),
    ))
}

/// Reads one binary label per line.
pub fn read_labels<R: Read>(input: R, header: bool) -> Result<Vec<u8>> {
    records(input, header)?
        .into_iter()
        .map(|(row, values)| match values.as_slice() {
            [v] if *v == 0.0 => Ok(0),
            [v] if *v == 1.0 => Ok(1),
            [v] => Err(Error::Parse {
                row,
                message: format!("label {v} is not 0 or 1"),
            }),
            _ => Err(Error::Parse {
                row,
                message: format!("expected 1 field, found {}", values.len()),
            }),
        })
        .collect()
}

/// Reads a vector written either as one column or as one row.
pub fn read_vector<R: Read>(input: R, header: bool) -> Result<Vec<f64>> {
    let rows = records(input, header)?;
    if rows.len() == 1 {
        return Ok(rows.into_iter().next().map(|(_, v)| v).unwrap_or_default());
    }
    rows.into_iter()
        .map(|(row, values)| match values.as_slice() {
            [v] => Ok(*v),
            _ => Err(Error::Parse {
                row,
                message: format!("expected 1 field, found {}", values.len()),
            }),
        })
        .collect()
}

/// Pairs a design matrix with labels.
pub fn dataset(x: &DMatrix<f64>, labels: Vec<u8>) -> Result<Dataset> {
    Dataset::from_column_major(x.nrows(), x.ncols(), x.as_slice().to_vec(), labels)
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn default_threshold() -> f64 {
    0.5
}

fn default_level() -> f64 {
    0.95
}

fn check_version(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
        )))
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Configuration of the `fit` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_level")]
    pub ci_level: f64,
}

impl Default for FitRunConfig {
    fn default() -> Self {
        FitRunConfig {
            schema_version: SCHEMA_VERSION,
            fit: FitConfig::default(),
            threshold: default_threshold(),
            ci_level: default_level(),
        }
    }
}

impl FitRunConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        check_unit("threshold", self.threshold)?;
        check_unit("ci_level", self.ci_level)?;
        self.fit.validate()
    }
}

fn default_variants() -> Vec<Variant> {
    vec![Variant {
        label: "laplace".into(),
        fit: FitConfig::default(),
    }]
}

/// Configuration of the `simulate` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateRunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub design: SimDesign,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    /// Adds the interval coverage table when set.
    #[serde(default)]
    pub ci_level: Option<f64>,
}

impl SimulateRunConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        self.design.validate()?;
        check_unit("threshold", self.threshold)?;
        if let Some(l) = self.ci_level {
            check_unit("ci_level", l)?;
        }
        if self.variants.is_empty() {
            return Err(Error::InvalidParameter("at least one variant is required".into()));
        }
        for (i, v) in self.variants.iter().enumerate() {
            if self.variants[..i].iter().any(|u| u.label == v.label) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate variant label {:?}",
                    v.label
                )));
            }
            v.fit.validate()?;
        }
        Ok(())
    }
}

/// Configuration of the `diagnose` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseRunConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub options: DiagnoseOptions,
}

impl Default for DiagnoseRunConfig {
    fn default() -> Self {
        DiagnoseRunConfig {
            schema_version: SCHEMA_VERSION,
            options: DiagnoseOptions::default(),
        }
    }
}

impl DiagnoseRunConfig {
    pub fn validate(&self) -> Result<()> {
        check_version(self.schema_version)?;
        let o = &self.options;
        if o.s_max == 0 || o.s0 == 0 || o.cone_samples == 0 {
            return Err(Error::InvalidParameter(
                "s_max, s0 and cone_samples must be positive".into(),
            ));
        }
        if !(o.alpha > 0.0) || !(o.l >= 0.0) {
            return Err(Error::InvalidParameter(
                "alpha must be positive and l nonnegative".into(),
            ));
        }
        Ok(())
    }
}

pub fn parse_fit_config(text: &str) -> Result<FitRunConfig> {
    let c: FitRunConfig = serde_json::from_str(text)?;
    c.validate()?;
    Ok(c)
}

pub fn parse_simulate_config(text: &str) -> Result<SimulateRunConfig> {
    let c: SimulateRunConfig = serde_json::from_str(text)?;
    c.validate()?;
    Ok(c)
}

pub fn parse_diagnose_config(text: &str) -> Result<DiagnoseRunConfig> {
    let c: DiagnoseRunConfig = serde_json::from_str(text)?;
    c.validate()?;
    Ok(c)
}
