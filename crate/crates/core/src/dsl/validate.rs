//! Statistical check of the structural requirements on `F`: positivity,
//! positive 1-homogeneity in `y`, and strong convexity.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use super::eval::{eval_jet, eval_scalar};
use super::spec::MetricSpec;
use crate::sampling::RegionSampler;
use crate::tolerance::TolKey;

pub const HOMOGENEITY_FACTORS: [f64; 3] = [0.5, 2.0, 3.7];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("empty admissible region: F could not be evaluated at any of {samples} samples (first error: {first})")]
    EmptyRegion { samples: usize, first: String },
    #[error("sample count must be at least 1")]
    ZeroSamples,
}

/// Pass/fail tally for one check plus its worst observed value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckSummary {
    pub passed: usize,
    pub failed: usize,
    /// Worst value of the checked quantity (largest residual, or smallest
    /// value for lower-bounded quantities).
    pub worst: f64,
    pub worst_sample: Option<usize>,
}

impl CheckSummary {
    fn new(worst: f64) -> Self {
        Self {
            passed: 0,
            failed: 0,
            worst,
            worst_sample: None,
        }
    }

    fn record(&mut self, ok: bool, value: f64, index: usize, worse: fn(f64, f64) -> bool) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        if self.worst_sample.is_none() || worse(value, self.worst) || value.is_nan() {
            self.worst = value;
            self.worst_sample = Some(index);
        }
    }

    pub fn all_passed(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub metric: String,
    pub samples: usize,
    pub seed: u64,
    /// Samples where `F` itself could not be evaluated.
    pub rejected: usize,
    pub positivity: CheckSummary,
    pub homogeneity: CheckSummary,
    pub positive_definite: CheckSummary,
    /// Smallest eigenvalue of `g` seen at any evaluated sample.
    pub min_eigenvalue: f64,
    pub homogeneity_tolerance: f64,
    pub positive_definite_tolerance: f64,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.positivity.all_passed()
            && self.homogeneity.all_passed()
            && self.positive_definite.all_passed()
    }
}

/// Checks `F > 0`, `F(x, λy) = λF(x, y)` for the three factors in
/// [`HOMOGENEITY_FACTORS`] and `min eig g > tol · mean eig g` at `samples`
/// draws from the spec's region.
pub fn validate_spec(
    spec: &MetricSpec,
    samples: usize,
    seed: u64,
) -> Result<ValidationReport, ValidationError> {
    if samples == 0 {
        return Err(ValidationError::ZeroSamples);
    }
    let hom_tol = spec.tolerances.get(TolKey::Homogeneity);
    let pd_tol = spec.tolerances.get(TolKey::PositiveDefinite);
    let mut sampler = RegionSampler::new(&spec.region, seed);
    let larger = |a: f64, b: f64| a > b;
    let smaller = |a: f64, b: f64| a < b;
    let mut positivity = CheckSummary::new(f64::INFINITY);
    let mut homogeneity = CheckSummary::new(0.0);
    let mut positive_definite = CheckSummary::new(f64::INFINITY);
    let mut min_eigenvalue = f64::INFINITY;
    let mut rejected = 0;
    let mut first_error = None;

    for index in 0..samples {
        let (x, y) = sampler.draw();
        let f = match eval_scalar::<f64>(&spec.expr, &x, &y, &spec.params) {
            Ok(f) => f,
            Err(e) => {
                rejected += 1;
                first_error.get_or_insert_with(|| e.to_string());
                continue;
            }
        };
        positivity.record(f > 0.0, f, index, smaller);

        let mut worst_h: f64 = 0.0;
        for lambda in HOMOGENEITY_FACTORS {
            let ys: Vec<f64> = y.iter().map(|v| v * lambda).collect();
            let r = match eval_scalar::<f64>(&spec.expr, &x, &ys, &spec.params) {
                Ok(fl) => (fl - lambda * f).abs() / (lambda * f.abs()).max(f64::MIN_POSITIVE),
                Err(_) => f64::INFINITY,
            };
            worst_h = worst_h.max(r);
        }
        homogeneity.record(worst_h <= hom_tol, worst_h, index, larger);

        let ratio = match eval_jet::<f64>(&spec.expr, &x, &y, &spec.params) {
            Ok(j) => {
                let q = j.square();
                let n = y.len();
                let g = DMatrix::from_fn(n, n, |a, b| 0.5 * q.partial(&[], &[a, b]));
                let eig = SymmetricEigen::new(g).eigenvalues;
                let min = eig.min();
                let mean = eig.mean();
                min_eigenvalue = min_eigenvalue.min(min);
                if mean > 0.0 {
                    min / mean
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        };
        positive_definite.record(ratio > pd_tol, ratio, index, smaller);
    }
    if rejected == samples {
        return Err(ValidationError::EmptyRegion {
            samples,
            first: first_error.unwrap_or_default(),
        });
    }
    Ok(ValidationReport {
        metric: spec.name.clone(),
        samples,
        seed,
        rejected,
        positivity,
        homogeneity,
        positive_definite,
        min_eigenvalue,
        homogeneity_tolerance: hom_tol,
        positive_definite_tolerance: pd_tol,
    })
}
