//! Vector-field conditions: semi-concurrent (`B^h C_hij = 0`), C-conformal
//! (`σ_h C^h_ij = 0`) and concurrent (`X^h C_hij = 0`, `X^i_|j = −δ^i_j`).

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;
use thiserror::Error;

use crate::dsl::{EvalError, MetricSpec, VectorFieldSpec};
use crate::sampling::RegionSampler;
use crate::scalar::{self, Scalar};
use crate::spaces::is_degenerate;
use crate::tensors::{mat_norm, vec_norm, TensorBundle};
use crate::tolerance::{TolKey, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FieldCondition {
    Sc,
    Cc,
    /// The C-condition: concurrent under the Cartan connection.
    Concurrent,
}

impl FieldCondition {
    pub fn name(self) -> &'static str {
        match self {
            FieldCondition::Sc => "SC",
            FieldCondition::Cc => "CC",
            FieldCondition::Concurrent => "C (concurrent)",
        }
    }
}

impl fmt::Display for FieldCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for FieldCondition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FieldError {
    #[error("field '{name}' has {field} components but the metric has dimension {metric}")]
    Dimension {
        name: String,
        field: usize,
        metric: usize,
    },
    #[error("field evaluation failed at sample {index}: {source}")]
    Evaluation { index: usize, source: EvalError },
    #[error("no sampled support elements")]
    Empty,
    #[error("need at least 2 y samples, got {0}")]
    TooFewSamples(usize),
    #[error("no admissible y at the given x after {attempts} attempts")]
    NoAdmissibleY { attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSample {
    pub index: usize,
    pub residual: f64,
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldCheckResult {
    pub condition: FieldCondition,
    pub field: String,
    /// Maximum of the per-sample residuals.
    pub residual_rel: f64,
    pub holds: bool,
    pub tolerance: f64,
    /// The field vanished at every sample, so the condition holds trivially.
    pub zero_field: bool,
    pub per_sample: Vec<FieldSample>,
}

fn check_dim<T: Scalar>(
    field: &VectorFieldSpec,
    bundles: &[TensorBundle<T>],
) -> Result<(), FieldError> {
    let Some(b) = bundles.first() else {
        return Err(FieldError::Empty);
    };
    if field.dim() != b.dim() {
        return Err(FieldError::Dimension {
            name: field.name.clone(),
            field: field.dim(),
            metric: b.dim(),
        });
    }
    Ok(())
}

fn eval_at<T: Scalar>(
    field: &VectorFieldSpec,
    b: &TensorBundle<T>,
    index: usize,
) -> Result<DVector<T>, FieldError> {
    field
        .eval(b.x())
        .map_err(|source| FieldError::Evaluation { index, source })
}

/// `max_ij |v^h A_hij|` for a rank-3 array with the contracted slot first.
fn contract_max<T: Scalar>(a: &crate::tensors::Tensor3<T>, v: &DVector<T>) -> T {
    let m = a.contract_first(v.as_slice());
    m.iter()
        .fold(T::zero(), |acc, &x| scalar::fmax(acc, scalar::abs(x)))
}

fn finish(
    condition: FieldCondition,
    field: &VectorFieldSpec,
    tolerance: f64,
    per_sample: Vec<FieldSample>,
    zero_field: bool,
) -> FieldCheckResult {
    let residual_rel = per_sample.iter().map(|s| s.residual).fold(0.0, f64::max);
    let nan = per_sample.iter().any(|s| s.residual.is_nan());
    FieldCheckResult {
        condition,
        field: field.name.clone(),
        residual_rel,
        holds: !nan && residual_rel <= tolerance,
        tolerance,
        zero_field,
        per_sample,
    }
}

fn sc_residual<T: Scalar>(b: &TensorBundle<T>, v: &DVector<T>) -> f64 {
    let bn = v.norm();
    if bn == T::zero() {
        return 0.0;
    }
    (contract_max(&b.c, v) / (bn * (T::one() + b.c_norm()))).to_f64_lossy()
}

/// `B^h C_hij = 0`; residual `max_ij |B^h C_hij| / (‖B‖ (1 + ‖C‖))`.
///
/// Each sample also records `B² = g_ij B^i B^j`, `B_0 = g_ij B^i y^j`,
/// `B²F² − B_0²` and the unnormalized `max_ij |B^h C_hij|` as `raw`.
pub fn check_sc<T: Scalar>(
    field: &VectorFieldSpec,
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<FieldCheckResult, FieldError> {
    check_dim(field, bundles)?;
    let mut all_zero = true;
    let mut per = Vec::with_capacity(bundles.len());
    for (index, b) in bundles.iter().enumerate() {
        let v = eval_at(field, b, index)?;
        all_zero &= v.norm() == T::zero();
        let y = DVector::from_column_slice(b.y());
        let gb = &b.g * &v;
        let b_sq = gb.dot(&v);
        let b_0 = gb.dot(&y);
        let f = b.f();
        let mut extra = BTreeMap::new();
        extra.insert("B_sq".into(), b_sq.to_f64_lossy());
        extra.insert("B_0".into(), b_0.to_f64_lossy());
        extra.insert(
            "B_sq_F_sq_minus_B_0_sq".into(),
            (b_sq * f * f - b_0 * b_0).to_f64_lossy(),
        );
        extra.insert("raw".into(), contract_max(&b.c, &v).to_f64_lossy());
        per.push(FieldSample {
            index,
            residual: sc_residual(b, &v),
            extra,
        });
    }
    Ok(finish(
        FieldCondition::Sc,
        field,
        tols.get(TolKey::Sc),
        per,
        all_zero,
    ))
}

/// `σ_h C^h_ij = 0` for the covector `σ_h` given component-wise. Whether
/// `σ_h` is really a gradient is the caller's responsibility.
pub fn check_cc<T: Scalar>(
    sigma_grad: &VectorFieldSpec,
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<FieldCheckResult, FieldError> {
    check_dim(sigma_grad, bundles)?;
    let mut all_zero = true;
    let mut per = Vec::with_capacity(bundles.len());
    for (index, b) in bundles.iter().enumerate() {
        let s = eval_at(sigma_grad, b, index)?;
        let sn = s.norm();
        all_zero &= sn == T::zero();
        let residual = if sn == T::zero() {
            0.0
        } else {
            (contract_max(&b.c_mixed, &s) / (sn * (T::one() + b.c_norm()))).to_f64_lossy()
        };
        let sigma_0 = s.dot(&DVector::from_column_slice(b.y()));
        let mut extra = BTreeMap::new();
        extra.insert("sigma_0".into(), sigma_0.to_f64_lossy());
        per.push(FieldSample {
            index,
            residual,
            extra,
        });
    }
    Ok(finish(
        FieldCondition::Cc,
        sigma_grad,
        tols.get(TolKey::Cc),
        per,
        all_zero,
    ))
}

/// Concurrency: horizontal part `‖∂_j X^i + X^h Γ^i_hj + δ^i_j‖ / (1 + ‖X^i_|j‖)`
/// and vertical part the SC residual. The sample residual is the larger.
pub fn check_concurrent<T: Scalar>(
    field: &VectorFieldSpec,
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<FieldCheckResult, FieldError> {
    check_dim(field, bundles)?;
    let mut all_zero = true;
    let mut per = Vec::with_capacity(bundles.len());
    for (index, b) in bundles.iter().enumerate() {
        let n = b.dim();
        let (v, jac) = field
            .eval_with_jacobian(b.x())
            .map_err(|source| FieldError::Evaluation { index, source })?;
        all_zero &= v.norm() == T::zero();
        let cov = DMatrix::from_fn(n, n, |i, j| {
            jac[(i, j)] + (0..n).fold(T::zero(), |a, h| a + v[h] * b.gamma[[i, h, j]])
        });
        let defect = &cov + DMatrix::<T>::identity(n, n);
        let horizontal = (mat_norm(&defect) / (T::one() + mat_norm(&cov))).to_f64_lossy();
        let vertical = sc_residual(b, &v);
        let mut extra = BTreeMap::new();
        extra.insert("horizontal".into(), horizontal);
        extra.insert("vertical".into(), vertical);
        per.push(FieldSample {
            index,
            residual: horizontal.max(vertical),
            extra,
        });
    }
    Ok(finish(
        FieldCondition::Concurrent,
        field,
        tols.get(TolKey::Concurrent),
        per,
        all_zero,
    ))
}

/// Semi-concurrent directions at one chart point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NullspaceResult {
    pub x: Vec<f64>,
    /// Euclidean-orthonormal basis of `{B : B^h C_hij(x, y_s) ≈ 0 ∀ s, i, j}`.
    pub basis: Vec<Vec<f64>>,
    /// Descending; always `n` values.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
    /// `1 + σ_max`.
    pub scale: f64,
    pub y_samples: usize,
    pub y_rejected: usize,
}

/// Stacks `C_hij(x, y_s) B^h = 0` over sampled `y_s` and slots `i ≤ j` and
/// takes the SVD nullspace. A singular value counts as zero when it is at
/// most `max(nullspace_rel · σ_max, nullspace_abs · (1 + σ_max))`.
pub fn find_sc_field<T: Scalar>(
    spec: &MetricSpec,
    x: &[T],
    y_samples: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<NullspaceResult, FieldError> {
    find_sc_field_with_bundles(spec, x, y_samples, seed, tols).map(|(r, _)| r)
}

/// As [`find_sc_field`], also returning the bundles the system was built from.
pub fn find_sc_field_with_bundles<T: Scalar>(
    spec: &MetricSpec,
    x: &[T],
    y_samples: usize,
    seed: u64,
    tols: &Tolerances,
) -> Result<(NullspaceResult, Vec<TensorBundle<T>>), FieldError> {
    if y_samples < 2 {
        return Err(FieldError::TooFewSamples(y_samples));
    }
    let n = spec.dim;
    if x.len() != n {
        return Err(FieldError::Dimension {
            name: "x".into(),
            field: x.len(),
            metric: n,
        });
    }
    let pd_tol = T::lit(tols.get(TolKey::PositiveDefinite));
    let mut sampler = RegionSampler::new(&spec.region, seed);
    let budget = 20 * y_samples + 100;
    let mut attempts = 0;
    let mut bundles = Vec::with_capacity(y_samples);
    while bundles.len() < y_samples && attempts < budget {
        attempts += 1;
        let y: Vec<T> = sampler.draw_y().into_iter().map(T::lit).collect();
        if let Ok(b) = TensorBundle::at(spec, x, &y, pd_tol) {
            bundles.push(b);
        }
    }
    if bundles.is_empty() {
        return Err(FieldError::NoAdmissibleY { attempts });
    }
    let slots = n * (n + 1) / 2;
    let rows = (bundles.len() * slots).max(n);
    let mut system = DMatrix::<T>::zeros(rows, n);
    let mut r = 0;
    for b in &bundles {
        for i in 0..n {
            for j in i..n {
                for h in 0..n {
                    system[(r, h)] = b.c[[h, i, j]];
                }
                r += 1;
            }
        }
    }
    let svd = SVD::new(system, false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sv: Vec<f64> = order
        .iter()
        .map(|&k| svd.singular_values[k].to_f64_lossy())
        .collect();
    let smax = sv.first().copied().unwrap_or(0.0);
    let scale = 1.0 + smax;
    let threshold = (tols.get(TolKey::NullspaceRelative) * smax)
        .max(tols.get(TolKey::NullspaceAbsolute) * scale);
    let basis = order
        .iter()
        .zip(&sv)
        .filter(|(_, &s)| s <= threshold)
        .map(|(&k, _)| canonical_sign(v_t.row(k).iter().map(|v| v.to_f64_lossy()).collect()))
        .collect();
    Ok((
        NullspaceResult {
            x: x.iter().map(|v| v.to_f64_lossy()).collect(),
            basis,
            singular_values: sv,
            threshold,
            scale,
            y_samples: bundles.len(),
            y_rejected: attempts - bundles.len(),
        },
        bundles,
    ))
}

/// Flips a basis vector so its largest-magnitude entry is positive, making
/// reports independent of the SVD's sign choices.
fn canonical_sign(mut v: Vec<f64>) -> Vec<f64> {
    let lead = v
        .iter()
        .copied()
        .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LemmaStatus {
    /// `B` and `y` independent at every sample.
    Holds,
    /// Some sample has `B ∥ y` although `B` is a non-trivial SC field on a
    /// non-Riemannian sample set.
    Violated,
    /// SC fails or `B` vanishes somewhere; the lemma says nothing.
    PreconditionFailed,
    /// `C = 0` everywhere: every `B` is SC, so independence is not implied
    /// and only the margins are reported.
    NotAsserted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaSample {
    pub index: usize,
    /// Smallest singular value of the row-normalized `2×n` matrix `[B; y]`.
    pub margin: f64,
    pub independent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lemma1Report {
    pub status: LemmaStatus,
    pub sc: FieldCheckResult,
    pub zero_field_samples: usize,
    pub threshold: f64,
    pub min_margin: f64,
    pub per_sample: Vec<LemmaSample>,
    pub notes: Vec<String>,
}

/// Independence of a semi-concurrent `B` from `y` at every sample.
pub fn lemma1_independence<T: Scalar>(
    field: &VectorFieldSpec,
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<Lemma1Report, FieldError> {
    let sc = check_sc(field, bundles, tols)?;
    let threshold = tols.get(TolKey::Independence);
    let deg = tols.get(TolKey::Degenerate);
    let mut zero = 0;
    let mut per = Vec::with_capacity(bundles.len());
    for (index, b) in bundles.iter().enumerate() {
        let v = eval_at(field, b, index)?;
        let bn = v.norm();
        if bn == T::zero() {
            zero += 1;
            per.push(LemmaSample {
                index,
                margin: 0.0,
                independent: false,
            });
            continue;
        }
        let n = b.dim();
        let yn = vec_norm(b.y());
        let m = DMatrix::from_fn(2, n, |r, c| if r == 0 { v[c] / bn } else { b.y()[c] / yn });
        let s = SVD::new(m, false, false).singular_values;
        let margin = s
            .iter()
            .copied()
            .fold(T::infinity(), num_traits::Float::min)
            .to_f64_lossy();
        per.push(LemmaSample {
            index,
            margin,
            independent: margin > threshold,
        });
    }
    let min_margin = per.iter().map(|s| s.margin).fold(f64::INFINITY, f64::min);
    let mut notes = Vec::new();
    let status = if !sc.holds {
        notes.push("precondition failed: the field does not satisfy the SC-condition".into());
        LemmaStatus::PreconditionFailed
    } else if zero > 0 {
        notes.push(format!("precondition failed: B = 0 at {zero} sample(s)"));
        LemmaStatus::PreconditionFailed
    } else if bundles.iter().all(|b| is_degenerate(b, deg)) {
        notes.push(
            "C vanishes at every sample, so every B is semi-concurrent and may be parallel to y; \
             independence is reported but not asserted"
                .into(),
        );
        LemmaStatus::NotAsserted
    } else if per.iter().all(|s| s.independent) {
        LemmaStatus::Holds
    } else {
        LemmaStatus::Violated
    };
    Ok(Lemma1Report {
        status,
        sc,
        zero_field_samples: zero,
        threshold,
        min_margin,
        per_sample: per,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::sample_bundles;
    use crate::zoo::{self, ZooMetric};

    fn bundles(m: ZooMetric, n: usize) -> Vec<TensorBundle<f64>> {
        sample_bundles(&m.spec(), &Tolerances::default(), n, 3)
            .unwrap()
            .bundles
    }

    #[test]
    fn any_field_is_sc_on_riemannian() {
        let tols = Tolerances::default();
        let b = bundles(ZooMetric::ExpRiemannian, 10);
        for f in zoo::standard_fields(2) {
            let r = check_sc(&f, &b, &tols).unwrap();
            assert!(r.holds && r.residual_rel < 1e-12, "{}", r.residual_rel);
        }
        let z = check_sc(&zoo::zero_field(2), &b, &tols).unwrap();
        assert!(z.zero_field);
    }

    #[test]
    fn constant_field_fails_sc_on_randers_and_scales_linearly() {
        let tols = Tolerances::default();
        let b = bundles(ZooMetric::Randers, 10);
        let f1 = VectorFieldSpec::constant("c", &[0.3, -0.2, 0.5]);
        let f2 = VectorFieldSpec::constant("c3", &[0.9, -0.6, 1.5]);
        let r1 = check_sc(&f1, &b, &tols).unwrap();
        let r2 = check_sc(&f2, &b, &tols).unwrap();
        assert!(!r1.holds && r1.residual_rel > 1e-3);
        assert!((r1.residual_rel - r2.residual_rel).abs() < 1e-14);
        let s = &r1.per_sample[0].extra;
        assert!(s["B_sq_F_sq_minus_B_0_sq"] >= -1e-12);
        assert!(!check_cc(&f1, &b, &tols).unwrap().holds);
    }

    #[test]
    fn position_field_is_concurrent_only_on_flat_metric() {
        let tols = Tolerances::default();
        let e = bundles(ZooMetric::Euclidean, 10);
        let r = check_concurrent(&zoo::position_field(3), &e, &tols).unwrap();
        assert!(r.holds && r.residual_rel < 1e-14);
        let h = bundles(ZooMetric::ExpRiemannian, 10);
        let r = check_concurrent(&zoo::position_field(2), &h, &tols).unwrap();
        assert!(!r.holds);
        assert!(r.per_sample.iter().all(|s| s.extra["vertical"] < 1e-12));
    }

    #[test]
    fn nullspace_full_on_riemannian_empty_on_randers() {
        let tols = Tolerances::default();
        let s = ZooMetric::Euclidean.spec();
        let r = find_sc_field(&s, &[0.1, 0.2, 0.3], 8, 1, &tols).unwrap();
        assert_eq!(r.basis.len(), 3);
        let s = ZooMetric::Randers.spec();
        let r = find_sc_field(&s, &[0.1, 0.2, 0.3], 8, 1, &tols).unwrap();
        assert!(r.basis.is_empty());
        assert!(*r.singular_values.last().unwrap() > 1e-3 * r.scale);
        assert!(matches!(
            find_sc_field(&s, &[0.0; 3], 1, 1, &tols),
            Err(FieldError::TooFewSamples(1))
        ));
    }

    #[test]
    fn lemma_on_riemannian_is_not_asserted_and_flags_collinear_samples() {
        let tols = Tolerances::default();
        let s = ZooMetric::Euclidean.spec();
        let pd = 1e-8;
        let b: Vec<_> = [[0.0, 1.0, 0.0], [2.0, 0.0, 0.0]]
            .iter()
            .map(|y| TensorBundle::at(&s, &[0.0; 3], y, pd).unwrap())
            .collect();
        let r = lemma1_independence(&zoo::axis_field(3, 0), &b, &tols).unwrap();
        assert_eq!(r.status, LemmaStatus::NotAsserted);
        assert!(r.per_sample[0].independent);
        assert!(!r.per_sample[1].independent);
        let z = lemma1_independence(&zoo::zero_field(3), &b, &tols).unwrap();
        assert_eq!(z.status, LemmaStatus::PreconditionFailed);
        let rb = bundles(ZooMetric::Randers, 4);
        let r = lemma1_independence(&zoo::axis_field(3, 0), &rb, &tols).unwrap();
        assert_eq!(r.status, LemmaStatus::PreconditionFailed);
    }
}
