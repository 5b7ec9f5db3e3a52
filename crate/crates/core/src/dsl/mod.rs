//! Metric expression language: AST, parser, printer, evaluators, spec files
//! and the structural validation of Finsler functions.

mod ast;
mod eval;
mod parser;
mod printer;
mod spec;
mod validate;

pub use ast::{BinOp, Expr, Func, Var, VarKind};
pub use eval::{eval_jet, eval_scalar, fd_oracle, EvalError};
pub use parser::{parse_metric, parse_with_scope, ParseError, ParseErrorKind, Pos, Scope};
pub use spec::{MetricSpec, SampleRegion, SpecError, VectorFieldSpec};
pub use validate::{validate_spec, CheckSummary, ValidationError, ValidationReport};
