//! Metric and vector-field specification files.
//!
//! Both are TOML documents. A metric file:
//!
//! ```toml
//! name = "randers"
//! dim = 3
//! F = "sqrt(y1^2 + y2^2 + y3^2) + b*y1"
//!
//! [params]
//! b = 0.1
//!
//! [sample_region]
//! x_min = [-1.0, -1.0, -1.0]
//! x_max = [1.0, 1.0, 1.0]
//! y_sign = [0, 0, 0]      # optional: +1 / -1 force a component's sign, 0 leaves it free
//! y_radius = 1.0          # optional: radius of the Euclidean sphere y is drawn from
//!
//! [tolerances]            # optional overrides, see `TolKey`
//! c_reducible = 1e-6
//! ```
//!
//! A vector-field file has `name`, `dim`, `components = ["-x1", ...]` and an
//! optional `[params]` table; components may only use `x` variables.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::ast::Expr;
use super::eval::{eval_jet, eval_scalar, EvalError};
use super::parser::{parse_with_scope, ParseError, Scope};
use crate::scalar::Scalar;
use crate::tolerance::{ToleranceError, Tolerances};

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid spec document: {0}")]
    Document(String),
    #[error("{field}: {error}")]
    Expression { field: String, error: ParseError },
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tolerance(#[from] ToleranceError),
}

impl SpecError {
    /// Positioned expression diagnostic, when this is one.
    pub fn parse_error(&self) -> Option<&ParseError> {
        match self {
            SpecError::Expression { error, .. } => Some(error),
            _ => None,
        }
    }
}

/// Where support elements are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRegion {
    pub x_min: Vec<f64>,
    pub x_max: Vec<f64>,
    /// Per-component sign constraint on `y`: `1`, `-1`, or `0` (free).
    pub y_sign: Vec<i8>,
    pub y_radius: f64,
}

impl SampleRegion {
    pub fn centered_box(dim: usize, half_width: f64) -> Self {
        Self {
            x_min: vec![-half_width; dim],
            x_max: vec![half_width; dim],
            y_sign: vec![0; dim],
            y_radius: 1.0,
        }
    }

    fn validate(&self, dim: usize) -> Result<(), SpecError> {
        if self.x_min.len() != dim || self.x_max.len() != dim || self.y_sign.len() != dim {
            return Err(SpecError::Invalid(format!(
                "sample_region vectors must have length dim = {dim}"
            )));
        }
        for (i, (lo, hi)) in self.x_min.iter().zip(&self.x_max).enumerate() {
            if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(SpecError::Invalid(format!(
                    "sample_region is empty in x{}: [{lo}, {hi}]",
                    i + 1
                )));
            }
        }
        if self.y_sign.iter().any(|s| !matches!(s, -1..=1)) {
            return Err(SpecError::Invalid(
                "sample_region.y_sign entries must be -1, 0 or 1".into(),
            ));
        }
        if !(self.y_radius > 0.0) || !self.y_radius.is_finite() {
            return Err(SpecError::Invalid(
                "sample_region.y_radius must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricFile {
    name: String,
    dim: usize,
    #[serde(rename = "F", alias = "L")]
    f: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    sample_region: RegionFile,
    #[serde(default)]
    tolerances: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionFile {
    x_min: Vec<f64>,
    x_max: Vec<f64>,
    #[serde(default)]
    y_sign: Option<Vec<i8>>,
    #[serde(default)]
    y_radius: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FieldFile {
    name: String,
    dim: usize,
    components: Vec<String>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn read(path: &Path) -> Result<String, SpecError> {
    std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn check_params(params: &BTreeMap<String, f64>) -> Result<(), SpecError> {
    for (k, v) in params {
        if !v.is_finite() {
            return Err(SpecError::Invalid(format!("parameter '{k}' is not finite")));
        }
    }
    Ok(())
}

/// A parsed, validated Finsler function definition. Immutable after load.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpec {
    pub name: String,
    pub dim: usize,
    pub expr: Expr,
    pub params: BTreeMap<String, f64>,
    pub region: SampleRegion,
    pub tolerances: Tolerances,
    /// SHA-256 of the source document (or of the canonical expression for
    /// programmatic specs).
    pub source_hash: String,
}

impl MetricSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SpecError> {
        let file: MetricFile =
            toml::from_str(text).map_err(|e| SpecError::Document(e.to_string()))?;
        let region = SampleRegion {
            y_sign: file.sample_region.y_sign.unwrap_or(vec![0; file.dim]),
            y_radius: file.sample_region.y_radius.unwrap_or(1.0),
            x_min: file.sample_region.x_min,
            x_max: file.sample_region.x_max,
        };
        let tolerances =
            Tolerances::with_overrides(file.tolerances.iter().map(|(k, v)| (k.as_str(), *v)))?;
        let mut spec = Self::build(file.name, file.dim, &file.f, file.params, region)?;
        spec.tolerances = tolerances;
        spec.source_hash = sha256_hex(text.as_bytes());
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        Self::from_toml_str(&read(path.as_ref())?)
    }

    /// Programmatic construction with default tolerances.
    pub fn build(
        name: impl Into<String>,
        dim: usize,
        source: &str,
        params: BTreeMap<String, f64>,
        region: SampleRegion,
    ) -> Result<Self, SpecError> {
        if dim < 2 {
            return Err(SpecError::Invalid(format!(
                "dim must be at least 2, got {dim}"
            )));
        }
        check_params(&params)?;
        region.validate(dim)?;
        let scope = Scope::metric(dim, params.keys().cloned());
        let expr = parse_with_scope(source, &scope).map_err(|error| SpecError::Expression {
            field: "F".into(),
            error,
        })?;
        if !expr.uses_kind(super::ast::VarKind::Y) {
            return Err(SpecError::Invalid(
                "F does not depend on any y variable".into(),
            ));
        }
        let source_hash = sha256_hex(expr.to_string().as_bytes());
        Ok(Self {
            name: name.into(),
            dim,
            expr,
            params,
            region,
            tolerances: Tolerances::default(),
            source_hash,
        })
    }

    /// `F(x, y)`.
    pub fn eval<T: Scalar>(&self, x: &[T], y: &[T]) -> Result<T, EvalError> {
        eval_scalar(&self.expr, x, y, &self.params)
    }

    /// Same metric with `F` multiplied by a positive constant.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.expr = Expr::binary(super::ast::BinOp::Mul, Expr::Num(factor), self.expr.clone());
        out.source_hash = sha256_hex(out.expr.to_string().as_bytes());
        out
    }
}

/// Vector field `B^i(x)` (or covector components such as `σ_h(x)`).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorFieldSpec {
    pub name: String,
    pub components: Vec<Expr>,
    pub params: BTreeMap<String, f64>,
    pub source_hash: String,
}

impl VectorFieldSpec {
    pub fn from_toml_str(text: &str) -> Result<Self, SpecError> {
        let file: FieldFile =
            toml::from_str(text).map_err(|e| SpecError::Document(e.to_string()))?;
        let mut field = Self::build(file.name, file.dim, &file.components, file.params)?;
        field.source_hash = sha256_hex(text.as_bytes());
        Ok(field)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SpecError> {
        Self::from_toml_str(&read(path.as_ref())?)
    }

    pub fn build<S: AsRef<str>>(
        name: impl Into<String>,
        dim: usize,
        sources: &[S],
        params: BTreeMap<String, f64>,
    ) -> Result<Self, SpecError> {
        if sources.len() != dim {
            return Err(SpecError::Invalid(format!(
                "vector field has {} components, expected dim = {dim}",
                sources.len()
            )));
        }
        check_params(&params)?;
        let scope = Scope::field(dim, params.keys().cloned());
        let components = sources
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse_with_scope(s.as_ref(), &scope).map_err(|error| SpecError::Expression {
                    field: format!("components[{i}]"),
                    error,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let canonical: Vec<String> = components.iter().map(|c| c.to_string()).collect();
        Ok(Self {
            name: name.into(),
            source_hash: sha256_hex(canonical.join(";").as_bytes()),
            components,
            params,
        })
    }

    /// Constant field with the given components.
    pub fn constant(name: impl Into<String>, values: &[f64]) -> Self {
        let components: Vec<Expr> = values
            .iter()
            .map(|&v| {
                if v < 0.0 || (v == 0.0 && v.is_sign_negative()) {
                    Expr::Neg(Box::new(Expr::Num(-v)))
                } else {
                    Expr::Num(v)
                }
            })
            .collect();
        let canonical: Vec<String> = components.iter().map(|c| c.to_string()).collect();
        Self {
            name: name.into(),
            source_hash: sha256_hex(canonical.join(";").as_bytes()),
            components,
            params: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> Result<DVector<T>, EvalError> {
        let y = vec![T::zero(); x.len()];
        let vals = self
            .components
            .iter()
            .map(|c| eval_scalar(c, x, &y, &self.params))
            .collect::<Result<Vec<T>, _>>()?;
        Ok(DVector::from_vec(vals))
    }

    /// Values and Jacobian `J[(i, j)] = ∂_j X^i`.
    pub fn eval_with_jacobian<T: Scalar>(
        &self,
        x: &[T],
    ) -> Result<(DVector<T>, DMatrix<T>), EvalError> {
        let n = x.len();
        let y = vec![T::zero(); n];
        let mut vals = DVector::zeros(n);
        let mut jac = DMatrix::zeros(n, n);
        for (i, c) in self.components.iter().enumerate() {
            let j = eval_jet(c, x, &y, &self.params)?;
            vals[i] = j.value();
            for k in 0..n {
                jac[(i, k)] = j.partial(&[k], &[]);
            }
        }
        Ok((vals, jac))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const RANDERS: &str = r#"
name = "randers"
dim = 3
F = "sqrt(y1^2 + y2^2 + y3^2) + b*y1"

[params]
b = 0.1

[sample_region]
x_min = [-1.0, -1.0, -1.0]
x_max = [1.0, 1.0, 1.0]

[tolerances]
c_reducible = 1e-5
"#;

    #[test]
    fn loads_metric_document() {
        let spec = MetricSpec::from_toml_str(RANDERS).unwrap();
        assert_eq!(spec.dim, 3);
        assert_eq!(spec.region.y_sign, vec![0, 0, 0]);
        assert_eq!(spec.region.y_radius, 1.0);
        assert_eq!(spec.expr.parameter_leaves(), 1);
        assert_eq!(spec.tolerances.overrides()["c_reducible"], 1e-5);
        assert_eq!(spec.source_hash.len(), 64);
        let f: f64 = spec.eval(&[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert!((f - 1.1).abs() < 1e-15);
    }

    #[test]
    fn fundamental_function_alias() {
        let text = RANDERS.replace("F = ", "L = ");
        assert!(MetricSpec::from_toml_str(&text).is_ok());
    }

    #[test]
    fn rejects_unbound_parameter_with_position() {
        let text = RANDERS.replace("b = 0.1", "c = 0.1");
        let err = MetricSpec::from_toml_str(&text).unwrap_err();
        let pe = err.parse_error().expect("positioned");
        assert_eq!(pe.column, 28);
    }

    #[test]
    fn rejects_bad_regions_and_dims() {
        let text = RANDERS.replace("x_max = [1.0, 1.0, 1.0]", "x_max = [1.0, -2.0, 1.0]");
        assert!(matches!(
            MetricSpec::from_toml_str(&text),
            Err(SpecError::Invalid(_))
        ));
        let text = RANDERS.replace("dim = 3", "dim = 1");
        assert!(MetricSpec::from_toml_str(&text).is_err());
        let text = RANDERS.replace("[tolerances]", "[tolerances]\nbogus = 1.0");
        assert!(matches!(
            MetricSpec::from_toml_str(&text),
            Err(SpecError::Tolerance(_))
        ));
        let text = RANDERS.replace("name = ", "nom = ");
        assert!(matches!(
            MetricSpec::from_toml_str(&text),
            Err(SpecError::Document(_))
        ));
    }

    #[test]
    fn field_documents() {
        let f = VectorFieldSpec::from_toml_str(
            "name = \"position\"\ndim = 2\ncomponents = [\"-x1\", \"-x2 + k\"]\n[params]\nk = 0.0\n",
        )
        .unwrap();
        let (v, j) = f.eval_with_jacobian(&[0.5f64, 2.0]).unwrap();
        assert_eq!(v.as_slice(), &[-0.5, -2.0]);
        assert_eq!(j, DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]));
        let err = VectorFieldSpec::from_toml_str(
            "name = \"bad\"\ndim = 2\ncomponents = [\"y1\", \"x2\"]\n",
        )
        .unwrap_err();
        assert!(err.parse_error().is_some());
        let err =
            VectorFieldSpec::from_toml_str("name = \"bad\"\ndim = 2\ncomponents = [\"x1\"]\n")
                .unwrap_err();
        assert!(matches!(err, SpecError::Invalid(_)));
    }

    #[test]
    fn constant_fields() {
        let f = VectorFieldSpec::constant("c", &[1.0, -2.5, 0.0]);
        let v = f.eval(&[0.3f64, 0.1, 0.2]).unwrap();
        assert_eq!(v.as_slice(), &[1.0, -2.5, 0.0]);
    }
}
