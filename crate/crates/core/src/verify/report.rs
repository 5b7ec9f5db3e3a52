//! Versioned, deterministic JSON report envelope.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::dsl::{MetricSpec, VectorFieldSpec};
use crate::sampling::GENERATOR;
use crate::tolerance::Tolerances;

pub const SCHEMA: &str = "finsler-report/1";

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write report to {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot serialize report: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub struct ReportInputs<'a> {
    pub command: &'a str,
    pub spec: &'a MetricSpec,
    pub field: Option<&'a VectorFieldSpec>,
    pub seed: u64,
    pub samples: usize,
    /// Overrides given for this run, on top of the spec file's own.
    pub run_tolerances: &'a Tolerances,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricInfo {
    pub name: String,
    pub dim: usize,
    pub expression: String,
    pub params: BTreeMap<String, f64>,
    pub source_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldInfo {
    pub name: String,
    pub components: Vec<String>,
    pub source_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToleranceInfo {
    pub effective: BTreeMap<&'static str, f64>,
    pub spec_overrides: BTreeMap<String, f64>,
    pub run_overrides: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: String,
    pub metric: MetricInfo,
    pub field: Option<FieldInfo>,
    pub generator: &'static str,
    pub seed: u64,
    pub samples: usize,
    pub tolerances: ToleranceInfo,
    pub results: serde_json::Value,
}

impl Report {
    /// Pretty JSON with a trailing newline. Struct fields serialize in
    /// declaration order and maps are ordered, so equal inputs give equal bytes.
    pub fn to_json_string(&self) -> Result<String, ReportError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        let s = self.to_json_string()?;
        std::fs::write(path, s).map_err(|source| ReportError::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn build_report(
    inputs: &ReportInputs<'_>,
    results: &impl Serialize,
) -> Result<Report, ReportError> {
    let spec = inputs.spec;
    let effective = spec.tolerances.merged(inputs.run_tolerances);
    Ok(Report {
        schema: SCHEMA,
        command: inputs.command.to_string(),
        metric: MetricInfo {
            name: spec.name.clone(),
            dim: spec.dim,
            expression: spec.expr.to_string(),
            params: spec.params.clone(),
            source_hash: spec.source_hash.clone(),
        },
        field: inputs.field.map(|f| FieldInfo {
            name: f.name.clone(),
            components: f.components.iter().map(|c| c.to_string()).collect(),
            source_hash: f.source_hash.clone(),
        }),
        generator: GENERATOR,
        seed: inputs.seed,
        samples: inputs.samples,
        tolerances: ToleranceInfo {
            effective: effective.effective(),
            spec_overrides: spec.tolerances.overrides().clone(),
            run_overrides: inputs.run_tolerances.overrides().clone(),
        },
        results: serde_json::to_value(results)?,
    })
}
