//! Canonical printer. Output reparses to an identical tree.

use std::fmt;

use super::ast::{BinOp, Expr};

const PREC_ADD: u8 = 1;
const PREC_MUL: u8 = 2;
const PREC_NEG: u8 = 3;
const PREC_POW: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e {
        Expr::Binary { op, .. } => match op {
            BinOp::Add | BinOp::Sub => PREC_ADD,
            BinOp::Mul | BinOp::Div => PREC_MUL,
        },
        Expr::Neg(_) => PREC_NEG,
        Expr::Pow { .. } => PREC_POW,
        Expr::Num(_) | Expr::Var(_) | Expr::Param(_) | Expr::Call { .. } => PREC_ATOM,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min: u8) -> fmt::Result {
    let paren = precedence(e) < min;
    if paren {
        f.write_str("(")?;
    }
    match e {
        Expr::Num(v) => write!(f, "{v}")?,
        Expr::Var(v) => write!(f, "{v}")?,
        Expr::Param(p) => f.write_str(p)?,
        Expr::Neg(inner) => {
            f.write_str("-")?;
            write_at(f, inner, PREC_NEG)?;
        }
        Expr::Binary { op, lhs, rhs } => {
            let p = precedence(e);
            write_at(f, lhs, p)?;
            write!(f, " {} ", op.symbol())?;
            write_at(f, rhs, p + 1)?;
        }
        Expr::Pow { base, exponent } => {
            write_at(f, base, PREC_ATOM)?;
            f.write_str("^")?;
            write_at(f, exponent, PREC_NEG)?;
        }
        Expr::Call { func, args } => {
            write!(f, "{}(", func.name())?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(", ")?;
                }
                write_at(f, a, 0)?;
            }
            f.write_str(")")?;
        }
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_at(f, self, 0)
    }
}
