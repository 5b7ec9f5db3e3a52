//! Lexer and recursive-descent parser for the metric expression language.
//!
//! ```text
//! expr     = term { ("+" | "-") term } ;
//! term     = unary { ("*" | "/") unary } ;
//! unary    = "-" unary | power ;
//! power    = primary [ "^" unary ] ;          (* exponent: literals only *)
//! primary  = number | ident [ "(" expr { "," expr } ")" ] | "(" expr ")" ;
//! ```

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Var, VarKind};

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    InvalidNumber(String),
    Syntax {
        found: String,
        expected: Vec<&'static str>,
    },
    UnknownFunction(String),
    UnknownVariable(String),
    Arity {
        func: &'static str,
        expected: usize,
        found: usize,
    },
    NonConstantExponent,
    FiberVariableInField(String),
}

/// Positioned diagnostic produced by the parser.
#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn at(pos: Pos, kind: ParseErrorKind) -> Self {
        Self {
            line: pos.line,
            column: pos.column,
            kind,
        }
    }

    pub fn expected(&self) -> &[&'static str] {
        match &self.kind {
            ParseErrorKind::Syntax { expected, .. } => expected,
            _ => &[],
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: ", self.line, self.column)?;
        match &self.kind {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character '{c}'"),
            ParseErrorKind::InvalidNumber(t) => write!(f, "invalid number literal '{t}'"),
            ParseErrorKind::Syntax { found, expected } => {
                write!(f, "syntax error: expected {}", expected.join(" or "))?;
                write!(f, ", found {found}")
            }
            ParseErrorKind::UnknownFunction(n) => write!(
                f,
                "unknown function '{n}' (known: sqrt, exp, log, sin, cos, pow)"
            ),
            ParseErrorKind::UnknownVariable(n) => write!(f, "unknown variable '{n}'"),
            ParseErrorKind::Arity {
                func,
                expected,
                found,
            } => write!(
                f,
                "function '{func}' takes {expected} argument(s), found {found}"
            ),
            ParseErrorKind::NonConstantExponent => {
                write!(f, "exponent of '^' must be a numeric constant")
            }
            ParseErrorKind::FiberVariableInField(n) => write!(
                f,
                "variable '{n}' not allowed: vector field components depend on x only"
            ),
        }
    }
}

/// Name resolution rules applied while parsing.
#[derive(Debug, Clone, Default)]
pub struct Scope {
    /// Highest admissible coordinate index; `None` accepts any.
    pub dim: Option<usize>,
    /// Declared parameter names; `None` accepts any identifier.
    pub params: Option<BTreeSet<String>>,
    /// Reject `y` variables (vector fields).
    pub x_only: bool,
}

impl Scope {
    pub fn permissive() -> Self {
        Self::default()
    }

    pub fn metric(dim: usize, params: impl IntoIterator<Item = String>) -> Self {
        Self {
            dim: Some(dim),
            params: Some(params.into_iter().collect()),
            x_only: false,
        }
    }

    pub fn field(dim: usize, params: impl IntoIterator<Item = String>) -> Self {
        Self {
            x_only: true,
            ..Self::metric(dim, params)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier '{s}'"),
            Tok::Plus => "'+'".into(),
            Tok::Minus => "'-'".into(),
            Tok::Star => "'*'".into(),
            Tok::Slash => "'/'".into(),
            Tok::Caret => "'^'".into(),
            Tok::LParen => "'('".into(),
            Tok::RParen => "')'".into(),
            Tok::Comma => "','".into(),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, column: col };
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            col += 1;
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, pos));
            col += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            // a literal glued to letters ("2x") is not a number
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            let value: f64 = text
                .parse()
                .map_err(|_| ParseError::at(pos, ParseErrorKind::InvalidNumber(text.clone())))?;
            out.push((Tok::Num(value), pos));
            col += i - start;
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            out.push((Tok::Ident(text), pos));
            col += i - start;
            continue;
        }
        return Err(ParseError::at(pos, ParseErrorKind::UnexpectedChar(c)));
    }
    out.push((Tok::End, Pos { line, column: col }));
    Ok(out)
}

const EXPR_START: &[&str] = &["expression"];

struct Parser<'s> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    scope: &'s Scope,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, Pos) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn syntax(&self, expected: &[&'static str]) -> ParseError {
        ParseError::at(
            self.pos(),
            ParseErrorKind::Syntax {
                found: self.peek().describe(),
                expected: expected.to_vec(),
            },
        )
    }

    fn expect(&mut self, tok: Tok, name: &'static str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.syntax(&[name]))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let exp_pos = self.pos();
        let exponent = self.unary()?;
        if !exponent.is_literal_constant() {
            return Err(ParseError::at(exp_pos, ParseErrorKind::NonConstantExponent));
        }
        Ok(Expr::Pow {
            base: Box::new(base),
            exponent: Box::new(exponent),
        })
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen, "')'")?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LParen {
                    self.call(name, pos)
                } else if Func::from_name(&name).is_some() {
                    Err(self.syntax(&["'('"]))
                } else {
                    self.resolve(name, pos)
                }
            }
            _ => Err(self.syntax(EXPR_START)),
        }
    }

    fn call(&mut self, name: String, pos: Pos) -> Result<Expr, ParseError> {
        let func = Func::from_name(&name)
            .ok_or_else(|| ParseError::at(pos, ParseErrorKind::UnknownFunction(name.clone())))?;
        self.bump(); // '('
        let mut args = Vec::new();
        if *self.peek() != Tok::RParen {
            loop {
                args.push(self.expr()?);
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => break,
                    _ => return Err(self.syntax(&["','", "')'"])),
                }
            }
        }
        self.expect(Tok::RParen, "')'")?;
        if args.len() != func.arity() {
            return Err(ParseError::at(
                pos,
                ParseErrorKind::Arity {
                    func: func.name(),
                    expected: func.arity(),
                    found: args.len(),
                },
            ));
        }
        Ok(Expr::Call { func, args })
    }

    fn resolve(&self, name: String, pos: Pos) -> Result<Expr, ParseError> {
        let unknown = || ParseError::at(pos, ParseErrorKind::UnknownVariable(name.clone()));
        if let Some(var) = coordinate(&name) {
            let index = var.ok_or_else(unknown)?;
            if let Some(d) = self.scope.dim {
                if index.index >= d {
                    return Err(unknown());
                }
            }
            if self.scope.x_only && index.kind == VarKind::Y {
                return Err(ParseError::at(
                    pos,
                    ParseErrorKind::FiberVariableInField(name),
                ));
            }
            return Ok(Expr::Var(index));
        }
        if let Some(params) = &self.scope.params {
            if !params.contains(&name) {
                return Err(unknown());
            }
        }
        Ok(Expr::Param(name))
    }
}

/// `Some(Some(var))` for `x<k>`/`y<k>` with `k >= 1`, `Some(None)` for a
/// coordinate-shaped name with an invalid index, `None` otherwise.
fn coordinate(name: &str) -> Option<Option<Var>> {
    let mut chars = name.chars();
    let kind = match chars.next()? {
        'x' => VarKind::X,
        'y' => VarKind::Y,
        _ => return None,
    };
    let digits = chars.as_str();
    if digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    match digits.parse::<usize>() {
        Ok(k) if k >= 1 => Some(Some(Var { kind, index: k - 1 })),
        _ => Some(None),
    }
}

/// Parses an expression with the given name-resolution scope.
pub fn parse_with_scope(source: &str, scope: &Scope) -> Result<Expr, ParseError> {
    let toks = lex(source)?;
    let mut p = Parser { toks, at: 0, scope };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.syntax(&["operator", "end of input"]));
    }
    Ok(e)
}

/// Parses an expression; identifiers that are not coordinates become parameters.
pub fn parse_metric(source: &str) -> Result<Expr, ParseError> {
    parse_with_scope(source, &Scope::permissive())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_norm_shape() {
        let e = parse_metric("sqrt(y1^2 + y2^2)").unwrap();
        assert_eq!(e.depth(), 3);
        assert_eq!(e.variable_leaves(), 2);
    }

    #[test]
    fn parameter_leaf() {
        let scope = Scope::metric(2, ["b".to_string()]);
        let e = parse_with_scope("sqrt(y1^2+y2^2) + b*y1", &scope).unwrap();
        assert_eq!(e.parameter_leaves(), 1);
    }

    #[test]
    fn dangling_operator_reports_column_six() {
        let err = parse_metric("y1 + ").unwrap_err();
        assert_eq!((err.line, err.column), (1, 6));
        assert_eq!(err.expected(), &["expression"]);
        assert!(err
            .to_string()
            .starts_with("1:6: syntax error: expected expression"));
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_metric("1 - 2 - 3").unwrap();
        assert_eq!(e.literal_value(), Some(-4.0));
        let e = parse_metric("2^3^2").unwrap();
        assert_eq!(e.literal_value(), Some(512.0));
        let e = parse_metric("-2^2").unwrap();
        assert_eq!(e.literal_value(), Some(-4.0));
        let e = parse_metric("8/4/2").unwrap();
        assert_eq!(e.literal_value(), Some(1.0));
        let e = parse_metric("2^-1").unwrap();
        assert_eq!(e.literal_value(), Some(0.5));
    }

    #[test]
    fn unknown_names() {
        let err = parse_metric("foo(y1)").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownFunction("foo".into()));
        let scope = Scope::metric(2, []);
        let err = parse_with_scope("y3 + y1", &scope).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownVariable("y3".into()));
        assert_eq!(err.column, 1);
        let err = parse_with_scope("y1 + c", &scope).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownVariable("c".into()));
        assert_eq!(err.column, 6);
        let err = parse_metric("x0").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnknownVariable("x0".into()));
    }

    #[test]
    fn arity_and_exponent_checks() {
        let err = parse_metric("pow(y1)").unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::Arity {
                expected: 2,
                found: 1,
                ..
            }
        ));
        let err = parse_metric("sqrt(y1, y2)").unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::Arity {
                expected: 1,
                found: 2,
                ..
            }
        ));
        let err = parse_metric("y1^y2").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::NonConstantExponent);
        assert_eq!(err.column, 4);
        assert!(parse_metric("(y1^4 + y2^4)^(1/4)").is_ok());
    }

    #[test]
    fn field_scope_rejects_fiber_variables() {
        let scope = Scope::field(2, []);
        assert!(parse_with_scope("-x1", &scope).is_ok());
        let err = parse_with_scope("x1 * y2", &scope).unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::FiberVariableInField(_)));
        assert_eq!(err.column, 6);
    }

    #[test]
    fn multi_line_positions() {
        let err = parse_metric("y1 +\n  * y2").unwrap_err();
        assert_eq!((err.line, err.column), (2, 3));
    }

    #[test]
    fn lexical_errors() {
        let err = parse_metric("y1 $ y2").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::UnexpectedChar('$'));
        assert_eq!(err.column, 4);
        let err = parse_metric("1e+").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::InvalidNumber(_)));
        let err = parse_metric("2y1").unwrap_err();
        assert!(matches!(err.kind, ParseErrorKind::InvalidNumber(_)));
    }
}
