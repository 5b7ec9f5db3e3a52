//! Evaluation of expression trees as plain scalars and as jets.
//!
//! The two evaluators are deliberately separate code paths: the scalar one
//! feeds the finite-difference oracle that checks the jet one.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_traits::{Float, ToPrimitive};
use thiserror::Error;

use super::ast::{BinOp, Expr, Func, VarKind};
use crate::jet::{fd_partial, FdError, FdSettings, Jet, JetDomainError, Layout, MultiIndex};
use crate::scalar::Scalar;

/// Evaluation failure, carrying the printed offending subexpression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("{kind} in `{subexpr}`")]
    Domain {
        kind: JetDomainError,
        subexpr: String,
    },
    #[error("non-finite value in `{subexpr}`")]
    NonFinite { subexpr: String },
    #[error("unbound parameter '{0}'")]
    UnboundParam(String),
    #[error("dimension mismatch: expression uses index {needed}, got x of length {x} and y of length {y}")]
    Dimension { needed: usize, x: usize, y: usize },
}

fn domain(kind: JetDomainError, e: &Expr) -> EvalError {
    EvalError::Domain {
        kind,
        subexpr: e.to_string(),
    }
}

fn check_dims(expr: &Expr, x_len: usize, y_len: usize) -> Result<(), EvalError> {
    for v in expr.variables() {
        let len = match v.kind {
            VarKind::X => x_len,
            VarKind::Y => y_len,
        };
        if v.index >= len {
            return Err(EvalError::Dimension {
                needed: v.index + 1,
                x: x_len,
                y: y_len,
            });
        }
    }
    Ok(())
}

/// Scalar value of `expr` at `(x, y)`.
pub fn eval_scalar<T: Scalar>(
    expr: &Expr,
    x: &[T],
    y: &[T],
    params: &BTreeMap<String, f64>,
) -> Result<T, EvalError> {
    check_dims(expr, x.len(), y.len())?;
    scalar_rec(expr, x, y, params)
}

fn scalar_rec<T: Scalar>(
    e: &Expr,
    x: &[T],
    y: &[T],
    params: &BTreeMap<String, f64>,
) -> Result<T, EvalError> {
    let v = match e {
        Expr::Num(v) => T::lit(*v),
        Expr::Var(v) => match v.kind {
            VarKind::X => x[v.index],
            VarKind::Y => y[v.index],
        },
        Expr::Param(p) => T::lit(
            *params
                .get(p)
                .ok_or_else(|| EvalError::UnboundParam(p.clone()))?,
        ),
        Expr::Neg(inner) => -scalar_rec(inner, x, y, params)?,
        Expr::Binary { op, lhs, rhs } => {
            let a = scalar_rec(lhs, x, y, params)?;
            let b = scalar_rec(rhs, x, y, params)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == T::zero() {
                        return Err(domain(JetDomainError::DivisionByZero, e));
                    }
                    a / b
                }
            }
        }
        Expr::Pow { base, exponent } => {
            let a = scalar_rec(base, x, y, params)?;
            let p = scalar_rec(exponent, x, y, params)?;
            scalar_pow(a, p, e)?
        }
        Expr::Call { func, args } => {
            let a = scalar_rec(&args[0], x, y, params)?;
            match func {
                Func::Sqrt => {
                    if a < T::zero() {
                        return Err(domain(JetDomainError::SqrtNonPositive, e));
                    }
                    Float::sqrt(a)
                }
                Func::Exp => Float::exp(a),
                Func::Log => {
                    if !(a > T::zero()) {
                        return Err(domain(JetDomainError::LogNonPositive, e));
                    }
                    Float::ln(a)
                }
                Func::Sin => Float::sin(a),
                Func::Cos => Float::cos(a),
                Func::Pow => {
                    let p = scalar_rec(&args[1], x, y, params)?;
                    scalar_pow(a, p, e)?
                }
            }
        }
    };
    if !Float::is_finite(v) {
        return Err(EvalError::NonFinite {
            subexpr: e.to_string(),
        });
    }
    Ok(v)
}

fn scalar_pow<T: Scalar>(a: T, p: T, e: &Expr) -> Result<T, EvalError> {
    if Float::fract(p) == T::zero() {
        if a == T::zero() && p < T::zero() {
            return Err(domain(JetDomainError::DivisionByZero, e));
        }
        return Ok(Float::powi(a, ToPrimitive::to_i32(&p).unwrap_or(i32::MAX)));
    }
    if a < T::zero() {
        return Err(domain(JetDomainError::PowNonPositiveBase, e));
    }
    Ok(Float::powf(a, p))
}

/// Jet of `expr` at `(x, y)` over the Finsler truncation set.
pub fn eval_jet<T: Scalar>(
    expr: &Expr,
    x: &[T],
    y: &[T],
    params: &BTreeMap<String, f64>,
) -> Result<Jet<T>, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::Dimension {
            needed: expr.max_index(),
            x: x.len(),
            y: y.len(),
        });
    }
    check_dims(expr, x.len(), y.len())?;
    let layout = Layout::finsler(y.len());
    let seeds = Seeds {
        x: (0..x.len())
            .map(|i| Jet::seed_x(&layout, i, x[i]))
            .collect(),
        y: (0..y.len())
            .map(|i| Jet::seed_y(&layout, i, y[i]))
            .collect(),
        layout,
    };
    jet_rec(expr, &seeds, params)
}

struct Seeds<T> {
    layout: Arc<Layout>,
    x: Vec<Jet<T>>,
    y: Vec<Jet<T>>,
}

fn jet_rec<T: Scalar>(
    e: &Expr,
    s: &Seeds<T>,
    params: &BTreeMap<String, f64>,
) -> Result<Jet<T>, EvalError> {
    let wrap = |r: Result<Jet<T>, JetDomainError>| r.map_err(|k| domain(k, e));
    let j = match e {
        Expr::Num(v) => Jet::constant(&s.layout, T::lit(*v)),
        Expr::Var(v) => match v.kind {
            VarKind::X => s.x[v.index].clone(),
            VarKind::Y => s.y[v.index].clone(),
        },
        Expr::Param(p) => Jet::constant(
            &s.layout,
            T::lit(
                *params
                    .get(p)
                    .ok_or_else(|| EvalError::UnboundParam(p.clone()))?,
            ),
        ),
        Expr::Neg(inner) => -&jet_rec(inner, s, params)?,
        Expr::Binary { op, lhs, rhs } => {
            let a = jet_rec(lhs, s, params)?;
            let b = jet_rec(rhs, s, params)?;
            match op {
                BinOp::Add => &a + &b,
                BinOp::Sub => &a - &b,
                BinOp::Mul => &a * &b,
                BinOp::Div => wrap(a.div(&b))?,
            }
        }
        Expr::Pow { base, exponent } => {
            let a = jet_rec(base, s, params)?;
            let p = exponent
                .literal_value()
                .expect("parser guarantees literal exponents");
            wrap(a.powf(T::lit(p)))?
        }
        Expr::Call { func, args } => {
            let a = jet_rec(&args[0], s, params)?;
            match func {
                Func::Sqrt => wrap(a.sqrt())?,
                Func::Exp => a.exp(),
                Func::Log => wrap(a.ln())?,
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Pow => {
                    let b = jet_rec(&args[1], s, params)?;
                    wrap(a.pow_jet(&b))?
                }
            }
        }
    };
    if !j.is_finite() {
        return Err(EvalError::NonFinite {
            subexpr: e.to_string(),
        });
    }
    Ok(j)
}

/// Finite-difference estimate of a mixed partial of `F²`.
pub fn fd_oracle<T: Scalar>(
    expr: &Expr,
    params: &BTreeMap<String, f64>,
    x: &[T],
    y: &[T],
    which: &MultiIndex,
    settings: &FdSettings<T>,
) -> Result<T, FdError> {
    let f2 = |xs: &[T], ys: &[T]| -> Result<T, EvalError> {
        let v = eval_scalar(expr, xs, ys, params)?;
        Ok(v * v)
    };
    fd_partial(f2, x, y, which, settings)
}

#[cfg(test)]
mod tests {
    use super::super::parser::parse_metric;
    use super::*;

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    #[test]
    fn scalar_and_jet_values_agree() {
        let e = parse_metric("sqrt(y1^2 + exp(2*x1)*y2^2) + 0.1*sin(x2)*y1").unwrap();
        let (x, y) = ([0.3, -0.2], [1.0, 1.0]);
        let s: f64 = eval_scalar(&e, &x, &y, &no_params()).unwrap();
        let j = eval_jet::<f64>(&e, &x, &y, &no_params()).unwrap();
        assert!((s - j.value()).abs() < 1e-14);
    }

    #[test]
    fn domain_error_names_subexpression() {
        let e = parse_metric("y1 + log(y2 - 2)").unwrap();
        let err = eval_jet::<f64>(&e, &[0.0, 0.0], &[1.0, 1.0], &no_params()).unwrap_err();
        assert_eq!(
            err.to_string(),
            "logarithm of a non-positive value in `log(y2 - 2)`"
        );
        let err = eval_scalar::<f64>(&e, &[0.0, 0.0], &[1.0, 1.0], &no_params()).unwrap_err();
        assert!(matches!(err, EvalError::Domain { .. }));
    }

    #[test]
    fn dimension_mismatch() {
        let e = parse_metric("y3").unwrap();
        let err = eval_jet::<f64>(&e, &[0.0, 0.0], &[1.0, 1.0], &no_params()).unwrap_err();
        assert!(matches!(err, EvalError::Dimension { needed: 3, .. }));
        let err = eval_jet::<f64>(&e, &[0.0], &[1.0, 1.0, 1.0], &no_params()).unwrap_err();
        assert!(matches!(err, EvalError::Dimension { .. }));
    }

    #[test]
    fn unbound_parameter() {
        let e = parse_metric("b*y1").unwrap();
        let err = eval_scalar::<f64>(&e, &[0.0], &[1.0], &no_params()).unwrap_err();
        assert_eq!(err, EvalError::UnboundParam("b".into()));
    }

    #[test]
    fn general_pow_uses_exp_log() {
        let e = parse_metric("pow(y1, x1)").unwrap();
        let j = eval_jet::<f64>(&e, &[2.0], &[3.0], &no_params()).unwrap();
        assert!((j.value() - 9.0).abs() < 1e-12);
        // d/dx y^x = y^x ln y
        assert!((j.partial(&[0], &[]) - 9.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn fd_oracle_identity_and_euclidean_hessian() {
        let e = parse_metric("sqrt(y1^2 + y2^2)").unwrap();
        let (x, y) = ([0.0, 0.0], [0.6, 0.8]);
        let settings = FdSettings::default();
        let v = fd_oracle(&e, &no_params(), &x, &y, &MultiIndex::zero(2), &settings).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        let mi = MultiIndex::from_indices(2, &[], &[0, 0]);
        let v = fd_oracle(&e, &no_params(), &x, &y, &mi, &settings).unwrap();
        assert!((v - 2.0).abs() < 1e-8);
    }
}
