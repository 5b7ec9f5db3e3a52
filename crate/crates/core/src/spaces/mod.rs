//! Special-space conditions decided or fitted over a set of sampled bundles.
//!
//! Every residual is `‖LHS − RHS‖ / (1 + ‖LHS‖)` (Frobenius norms). A sample
//! is degenerate when `F·‖C‖` is below the `degenerate` tolerance: the space
//! is Riemannian there and every condition holds with both sides zero.

mod moor;

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SVD};
use serde::Serialize;
use thiserror::Error;

pub use moor::{moor_frame_3d, MoorError, MoorFrame};

use crate::scalar::{self, Scalar};
use crate::tensors::{Tensor3, Tensor4, TensorBundle};
use crate::tolerance::{TolKey, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Condition {
    Riemannian,
    CReducible,
    SemiCReducible,
    QuasiCReducible,
    C3Like,
    ChRecurrent,
    P2Like,
    PReducible,
    Landsberg,
    TCondition,
}

impl Condition {
    pub const ALL: [Condition; 10] = [
        Condition::Riemannian,
        Condition::CReducible,
        Condition::SemiCReducible,
        Condition::QuasiCReducible,
        Condition::C3Like,
        Condition::ChRecurrent,
        Condition::P2Like,
        Condition::PReducible,
        Condition::Landsberg,
        Condition::TCondition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Riemannian => "Riemannian",
            Condition::CReducible => "C-reducible",
            Condition::SemiCReducible => "semi-C-reducible",
            Condition::QuasiCReducible => "quasi-C-reducible",
            Condition::C3Like => "C3-like",
            Condition::ChRecurrent => "Ch-recurrent",
            Condition::P2Like => "P2-like",
            Condition::PReducible => "P-reducible",
            Condition::Landsberg => "Landsberg",
            Condition::TCondition => "T-condition",
        }
    }

    pub fn tol_key(self) -> TolKey {
        match self {
            Condition::Riemannian => TolKey::Riemannian,
            Condition::CReducible => TolKey::CReducible,
            Condition::SemiCReducible => TolKey::SemiCReducible,
            Condition::QuasiCReducible => TolKey::QuasiCReducible,
            Condition::C3Like => TolKey::C3Like,
            Condition::ChRecurrent => TolKey::ChRecurrent,
            Condition::P2Like => TolKey::P2Like,
            Condition::PReducible => TolKey::PReducible,
            Condition::Landsberg => TolKey::Landsberg,
            Condition::TCondition => TolKey::TCondition,
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for Condition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpaceError {
    #[error("no sampled support elements")]
    Empty,
    #[error("{condition} is defined for n >= {required}, metric has n = {n}")]
    Dimension {
        condition: Condition,
        n: usize,
        required: usize,
    },
}

/// Result of one condition at one sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleFit {
    pub index: usize,
    pub residual_rel: f64,
    pub residual_raw: f64,
    pub degenerate: bool,
    pub fitted: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub condition: Condition,
    /// Worst relative residual over samples.
    pub residual_rel: f64,
    pub residual_raw: f64,
    pub holds: bool,
    /// Every sample was degenerate (both sides vanish).
    pub degenerate: bool,
    pub dimension_warning: Option<String>,
    pub samples_used: usize,
    pub tolerance: f64,
    /// Summary of fitted quantities across samples.
    pub fitted: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub per_sample: Vec<SampleFit>,
}

pub fn is_degenerate<T: Scalar>(b: &TensorBundle<T>, tol: f64) -> bool {
    (b.f() * b.c_norm()).to_f64_lossy() <= tol
}

fn finish(cond: Condition, tols: &Tolerances, per_sample: Vec<SampleFit>) -> ConditionVerdict {
    let tolerance = tols.get(cond.tol_key());
    let residual_rel = per_sample
        .iter()
        .map(|s| s.residual_rel)
        .fold(0.0, f64::max);
    let residual_raw = per_sample
        .iter()
        .map(|s| s.residual_raw)
        .fold(0.0, f64::max);
    let degenerate = cond != Condition::Riemannian && per_sample.iter().all(|s| s.degenerate);
    let nan = per_sample.iter().any(|s| s.residual_rel.is_nan());
    ConditionVerdict {
        condition: cond,
        residual_rel,
        residual_raw,
        holds: !nan && (degenerate || residual_rel <= tolerance),
        degenerate,
        dimension_warning: None,
        samples_used: per_sample.len(),
        tolerance,
        fitted: BTreeMap::new(),
        notes: Vec::new(),
        per_sample,
    }
}

fn sample<T: Scalar>(index: usize, raw: T, lhs: T, degenerate: bool) -> SampleFit {
    let raw = raw.to_f64_lossy();
    SampleFit {
        index,
        residual_rel: raw / (1.0 + lhs.to_f64_lossy()),
        residual_raw: raw,
        degenerate,
        fitted: BTreeMap::new(),
    }
}

fn to_f64s<T: Scalar>(v: impl IntoIterator<Item = T>) -> Vec<f64> {
    v.into_iter().map(|x| x.to_f64_lossy()).collect()
}

/// Errors on small dimension unless every sample is degenerate, in which
/// case the condition holds vacuously and only a warning is attached.
fn require_dim<T: Scalar>(
    cond: Condition,
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
    required: usize,
) -> Result<Option<ConditionVerdict>, SpaceError> {
    if bundles.is_empty() {
        return Err(SpaceError::Empty);
    }
    let n = bundles[0].dim();
    if n >= required {
        return Ok(None);
    }
    let deg = tols.get(TolKey::Degenerate);
    if !bundles.iter().all(|b| is_degenerate(b, deg)) {
        return Err(SpaceError::Dimension {
            condition: cond,
            n,
            required,
        });
    }
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| sample(i, b.c_norm(), b.c_norm(), true))
        .collect();
    let mut v = finish(cond, tols, per);
    v.dimension_warning = Some(format!(
        "{cond} is defined for n >= {required}; n = {n} accepted only because C vanishes"
    ));
    Ok(Some(v))
}

fn nonempty<T: Scalar>(bundles: &[TensorBundle<T>]) -> Result<(), SpaceError> {
    if bundles.is_empty() {
        Err(SpaceError::Empty)
    } else {
        Ok(())
    }
}

/// `sup ‖C‖` over samples.
pub fn is_riemannian<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    nonempty(bundles)?;
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| sample(i, b.c_norm(), b.c_norm(), false))
        .collect();
    Ok(finish(Condition::Riemannian, tols, per))
}

fn cyc_h<T: Scalar>(b: &TensorBundle<T>, v: &[T]) -> Tensor3<T> {
    Tensor3::cyclic(&b.h, v)
}

fn inv_np1<T: Scalar>(n: usize) -> T {
    T::one() / T::lit((n + 1) as f64)
}

/// `C_ijk = (1/(n+1)) Σ_cyc h_ij C_k`.
pub fn check_c_reducible<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    if let Some(v) = require_dim(Condition::CReducible, bundles, tols, 3)? {
        return Ok(v);
    }
    let deg = tols.get(TolKey::Degenerate);
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let rhs = cyc_h(b, &b.c_mean).scale(inv_np1(b.dim()));
            sample(i, b.c.sub(&rhs).norm(), b.c_norm(), is_degenerate(b, deg))
        })
        .collect();
    Ok(finish(Condition::CReducible, tols, per))
}

/// `C_ijk = (r/(n+1)) Σ_cyc h_ij C_k + (t/C²) C_i C_j C_k` with `r + t = 1`,
/// fitted per sample by eliminating `t` and solving the one-variable least
/// squares problem for `r`.
pub fn fit_semi_c_reducible<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    if let Some(v) = require_dim(Condition::SemiCReducible, bundles, tols, 3)? {
        return Ok(v);
    }
    let deg = tols.get(TolKey::Degenerate);
    let mut rs = Vec::new();
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if is_degenerate(b, deg) || !(b.c_norm2 > T::zero()) {
                return sample(i, b.c_norm(), b.c_norm(), true);
            }
            let a = cyc_h(b, &b.c_mean).scale(inv_np1(b.dim()));
            let cc = Tensor3::outer(&b.c_mean, &b.c_mean, &b.c_mean).scale(T::one() / b.c_norm2);
            let d = b.c.sub(&cc);
            let e = a.sub(&cc);
            let ee = e.dot(&e);
            let r = if ee > T::zero() {
                d.dot(&e) / ee
            } else {
                T::one()
            };
            let t = T::one() - r;
            let raw = d.sub(&e.scale(r)).norm();
            let mut s = sample(i, raw, b.c_norm(), false);
            s.fitted.insert("r".into(), vec![r.to_f64_lossy()]);
            s.fitted.insert("t".into(), vec![t.to_f64_lossy()]);
            rs.push(r.to_f64_lossy());
            s
        })
        .collect();
    let mut v = finish(Condition::SemiCReducible, tols, per);
    if !rs.is_empty() {
        let mean = rs.iter().sum::<f64>() / rs.len() as f64;
        v.fitted.insert("r_mean".into(), mean);
        v.fitted.insert("t_mean".into(), 1.0 - mean);
        v.fitted.insert(
            "r_min".into(),
            rs.iter().copied().fold(f64::INFINITY, f64::min),
        );
        v.fitted.insert(
            "r_max".into(),
            rs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        );
    }
    Ok(v)
}

/// `C_ijk = h_ij C_k + h_ki C_j + h_jk C_i`.
pub fn check_quasi_c_reducible<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    if let Some(v) = require_dim(Condition::QuasiCReducible, bundles, tols, 3)? {
        return Ok(v);
    }
    let deg = tols.get(TolKey::Degenerate);
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let rhs = cyc_h(b, &b.c_mean);
            sample(i, b.c.sub(&rhs).norm(), b.c_norm(), is_degenerate(b, deg))
        })
        .collect();
    Ok(finish(Condition::QuasiCReducible, tols, per))
}

/// Orthonormal basis (columns) of the Euclidean complement of `y`, from a
/// Householder reflection.
pub fn complement_basis<T: Scalar>(y: &[T]) -> DMatrix<T> {
    let n = y.len();
    let norm = crate::tensors::vec_norm(y);
    let mut w = DVector::from_iterator(n, y.iter().map(|&v| v / norm));
    let sign = if w[0] >= T::zero() {
        T::one()
    } else {
        -T::one()
    };
    w[0] = w[0] + sign;
    let ww = w.dot(&w);
    let two = T::lit(2.0);
    let house = DMatrix::<T>::identity(n, n) - (&w * w.transpose()).map(|v| v * two / ww);
    house.columns(1, n - 1).into_owned()
}

/// Minimum-norm least squares via SVD; returns `(solution, rank)`.
fn lstsq<T: Scalar>(m: &DMatrix<T>, rhs: &DVector<T>) -> (DVector<T>, usize) {
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(T::zero(), scalar::fmax);
    let eps = smax * T::lit(1e-12) * T::lit(m.nrows().max(m.ncols()) as f64);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let sol = svd
        .solve(rhs, eps)
        .unwrap_or_else(|_| DVector::zeros(m.ncols()));
    (sol, rank)
}

fn flat3<T: Scalar>(t: &Tensor3<T>) -> DVector<T> {
    DVector::from_column_slice(t.as_slice())
}

/// `C_ijk = Σ_cyc{h_ij a_k + C_i C_j b_k}` with `a·y = b·y = 0`, imposed by
/// writing `a = Z α`, `b = Z β` with `Z` spanning the complement of `y`.
pub fn fit_c3_like<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    fit_c3_like_with(bundles, tols, false)
}

/// As [`fit_c3_like`]; with `force_b_zero` only `a` is fitted.
pub fn fit_c3_like_with<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
    force_b_zero: bool,
) -> Result<ConditionVerdict, SpaceError> {
    if let Some(v) = require_dim(Condition::C3Like, bundles, tols, 3)? {
        return Ok(v);
    }
    let n = bundles[0].dim();
    let deg = tols.get(TolKey::Degenerate);
    let mut a_max: f64 = 0.0;
    let mut b_max: f64 = 0.0;
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            if is_degenerate(b, deg) {
                let mut s = sample(i, b.c_norm(), b.c_norm(), true);
                s.fitted.insert("a".into(), vec![0.0; n]);
                s.fitted.insert("b".into(), vec![0.0; n]);
                return s;
            }
            let z = complement_basis(b.y());
            let cc = &DVector::from_column_slice(&b.c_mean)
                * DVector::from_column_slice(&b.c_mean).transpose();
            let k = n - 1;
            let ncols = if force_b_zero { k } else { 2 * k };
            let mut design = DMatrix::zeros(n * n * n, ncols);
            for e in 0..k {
                let ze: Vec<T> = z.column(e).iter().copied().collect();
                design.set_column(e, &flat3(&Tensor3::cyclic(&b.h, &ze)));
                if !force_b_zero {
                    design.set_column(k + e, &flat3(&Tensor3::cyclic(&cc, &ze)));
                }
            }
            let target = flat3(&b.c);
            let (coef, rank) = lstsq(&design, &target);
            let raw = crate::tensors::vec_norm((&design * &coef - &target).as_slice());
            let a = &z * coef.rows(0, k);
            let bv = if force_b_zero {
                DVector::zeros(n)
            } else {
                &z * coef.rows(k, k)
            };
            a_max = a_max.max(a.norm().to_f64_lossy());
            b_max = b_max.max(bv.norm().to_f64_lossy());
            let mut s = sample(i, raw, b.c_norm(), false);
            s.fitted.insert("a".into(), to_f64s(a.iter().copied()));
            s.fitted.insert("b".into(), to_f64s(bv.iter().copied()));
            s.fitted.insert("rank".into(), vec![rank as f64]);
            if n == 3 {
                if let Ok(frame) = moor_frame_3d(b) {
                    s.fitted.insert("a_moor".into(), frame.a_printed);
                    s.fitted.insert("b_moor".into(), frame.b_printed);
                }
            }
            s
        })
        .collect();
    let mut v = finish(Condition::C3Like, tols, per);
    v.fitted.insert("a_norm_max".into(), a_max);
    v.fitted.insert("b_norm_max".into(), b_max);
    if force_b_zero {
        v.notes.push("b forced to zero".into());
    }
    if n == 3 && !v.degenerate {
        v.dimension_warning = Some(
            "C3-like is defined for n >= 4; in n = 3 every metric has this form (Moor frame), \
             so the fit is reported but carries no information"
                .into(),
        );
    }
    Ok(v)
}

/// `C_ijk|h = K_h C_ijk`, with `K_h = ⟨C_··· |h, C⟩ / ⟨C, C⟩` per sample.
pub fn check_ch_recurrent<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    nonempty(bundles)?;
    let deg = tols.get(TolKey::Degenerate);
    let mut k_max: f64 = 0.0;
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let lhs = b.c_hder.norm();
            if is_degenerate(b, deg) {
                return sample(i, lhs, lhs, true);
            }
            let n = b.dim();
            let cc = b.c.dot(&b.c);
            let k: Vec<T> = (0..n)
                .map(|h| {
                    let num = b.c.indices().fold(T::zero(), |a, [p, q, r]| {
                        a + b.c_hder[[p, q, r, h]] * b.c[[p, q, r]]
                    });
                    num / cc
                })
                .collect();
            let model = Tensor4::from_fn(n, |[p, q, r, h]| b.c[[p, q, r]] * k[h]);
            let raw = b.c_hder.sub(&model).norm();
            k_max = k_max.max(crate::tensors::vec_norm(&k).to_f64_lossy());
            let mut s = sample(i, raw, lhs, false);
            s.fitted.insert("K".into(), to_f64s(k));
            s
        })
        .collect();
    let mut v = finish(Condition::ChRecurrent, tols, per);
    v.fitted.insert("K_norm_max".into(), k_max);
    Ok(v)
}

/// `P_hijk = K_h C_ijk − K_i C_kjh`, least squares in `K` per sample.
pub fn check_p2_like<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    nonempty(bundles)?;
    let deg = tols.get(TolKey::Degenerate);
    let mut k_max: f64 = 0.0;
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let lhs = b.p.norm();
            if is_degenerate(b, deg) {
                return sample(i, lhs, lhs, true);
            }
            let n = b.dim();
            let mut design = DMatrix::zeros(n.pow(4), n);
            for m in 0..n {
                let col = Tensor4::from_fn(n, |[h, ii, j, k]| {
                    let mut v = T::zero();
                    if h == m {
                        v = v + b.c[[ii, j, k]];
                    }
                    if ii == m {
                        v = v - b.c[[k, j, h]];
                    }
                    v
                });
                design.set_column(m, &DVector::from_column_slice(col.as_slice()));
            }
            let target = DVector::from_column_slice(b.p.as_slice());
            let (k, rank) = lstsq(&design, &target);
            let raw = (&design * &k - &target).norm();
            k_max = k_max.max(k.norm().to_f64_lossy());
            let mut s = sample(i, raw, lhs, false);
            s.fitted.insert("K".into(), to_f64s(k.iter().copied()));
            s.fitted.insert("rank".into(), vec![rank as f64]);
            s
        })
        .collect();
    let mut v = finish(Condition::P2Like, tols, per);
    v.fitted.insert("K_norm_max".into(), k_max);
    Ok(v)
}

/// P-reducible (`P_ijk = (1/(n+1)) Σ_cyc h_ij P_k` with `P_k = P^r_kr`) and
/// Landsberg (`P_ijk = C_ijk|0 = 0`).
pub fn check_p_reducible_landsberg<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<(ConditionVerdict, ConditionVerdict), SpaceError> {
    nonempty(bundles)?;
    let deg = tols.get(TolKey::Degenerate);
    let p_red = match require_dim(Condition::PReducible, bundles, tols, 3)? {
        Some(v) => v,
        None => {
            let mut gap: f64 = 0.0;
            let per = bundles
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let lhs = b.p_lo.norm();
                    let rhs = cyc_h(b, &b.p_mean).scale(inv_np1(b.dim()));
                    let both_zero = (b.f() * lhs).to_f64_lossy() <= deg;
                    let mut s = sample(
                        i,
                        b.p_lo.sub(&rhs).norm(),
                        lhs,
                        is_degenerate(b, deg) || both_zero,
                    );
                    let d: Vec<T> = b
                        .p_mean
                        .iter()
                        .zip(&b.c_mean)
                        .map(|(&p, &c)| p - c)
                        .collect();
                    let dn = crate::tensors::vec_norm(&d).to_f64_lossy();
                    gap = gap.max(dn);
                    s.fitted.insert("P_i_minus_C_i_norm".into(), vec![dn]);
                    s
                })
                .collect();
            let mut v = finish(Condition::PReducible, tols, per);
            v.fitted.insert("P_i_minus_C_i_norm_max".into(), gap);
            v.notes.push(
                "P_k is taken as P^r_kr from P_ijk = C_ijk|0; its deviation from C_k is reported, not assumed"
                    .into(),
            );
            v
        }
    };
    Ok((p_red, check_landsberg_only(bundles, tols)?))
}

/// `T_hijk = 0`.
pub fn check_t_condition<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    nonempty(bundles)?;
    let deg = tols.get(TolKey::Degenerate);
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let lhs = b.t.norm();
            sample(i, lhs, lhs, is_degenerate(b, deg))
        })
        .collect();
    Ok(finish(Condition::TCondition, tols, per))
}

/// Every condition, in [`Condition::ALL`] order. Dimension errors are kept
/// per condition rather than aborting the whole classification.
pub fn classify<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Vec<(Condition, Result<ConditionVerdict, SpaceError>)> {
    let (p_red, lands) = match check_p_reducible_landsberg(bundles, tols) {
        Ok((a, b)) => (Ok(a), Ok(b)),
        Err(e) => {
            // Landsberg has no dimension requirement of its own.
            let l = check_landsberg_only(bundles, tols);
            (Err(e), l)
        }
    };
    let mut p_red = Some(p_red);
    let mut lands = Some(lands);
    Condition::ALL
        .iter()
        .map(|&c| {
            let r = match c {
                Condition::Riemannian => is_riemannian(bundles, tols),
                Condition::CReducible => check_c_reducible(bundles, tols),
                Condition::SemiCReducible => fit_semi_c_reducible(bundles, tols),
                Condition::QuasiCReducible => check_quasi_c_reducible(bundles, tols),
                Condition::C3Like => fit_c3_like(bundles, tols),
                Condition::ChRecurrent => check_ch_recurrent(bundles, tols),
                Condition::P2Like => check_p2_like(bundles, tols),
                Condition::PReducible => p_red.take().expect("used once"),
                Condition::Landsberg => lands.take().expect("used once"),
                Condition::TCondition => check_t_condition(bundles, tols),
            };
            (c, r)
        })
        .collect()
}

fn check_landsberg_only<T: Scalar>(
    bundles: &[TensorBundle<T>],
    tols: &Tolerances,
) -> Result<ConditionVerdict, SpaceError> {
    nonempty(bundles)?;
    let deg = tols.get(TolKey::Degenerate);
    let per = bundles
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let lhs = b.p_lo.norm();
            sample(i, lhs, lhs, is_degenerate(b, deg))
        })
        .collect();
    Ok(finish(Condition::Landsberg, tols, per))
}

#[cfg(test)]
mod tests;
