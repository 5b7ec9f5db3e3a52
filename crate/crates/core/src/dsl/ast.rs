use std::collections::BTreeSet;
use std::fmt;

/// Coordinate family of a variable leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    /// Chart coordinate `x^i`.
    X,
    /// Fiber coordinate `y^i`.
    Y,
}

/// Variable leaf; `index` is 0-based (`x1` has index 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    pub kind: VarKind,
    pub index: usize,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self.kind {
            VarKind::X => 'x',
            VarKind::Y => 'y',
        };
        write!(f, "{c}{}", self.index + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    pub fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
    Pow,
}

impl Func {
    pub const ALL: [Func; 6] = [
        Func::Sqrt,
        Func::Exp,
        Func::Log,
        Func::Sin,
        Func::Cos,
        Func::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == name)
    }
}

/// Expression tree of the metric language.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// Non-negative numeric literal.
    Num(f64),
    Var(Var),
    Param(String),
    Neg(Box<Expr>),
    Binary {
        op: BinOp,
        lhs: Box<Expr>,
        rhs: Box<Expr>,
    },
    /// `base ^ exponent`; the exponent is a constant built from literals.
    Pow {
        base: Box<Expr>,
        exponent: Box<Expr>,
    },
    Call {
        func: Func,
        args: Vec<Expr>,
    },
}

impl Expr {
    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Num(_) | Expr::Var(_) | Expr::Param(_) => Vec::new(),
            Expr::Neg(e) => vec![e],
            Expr::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            Expr::Pow { base, exponent } => vec![base, exponent],
            Expr::Call { args, .. } => args.iter().collect(),
        }
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        self.children()
            .into_iter()
            .map(|c| c.depth() + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self
            .children()
            .into_iter()
            .map(Expr::node_count)
            .sum::<usize>()
    }

    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn variable_leaves(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Var(_)) {
                n += 1;
            }
        });
        n
    }

    pub fn parameter_leaves(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if matches!(e, Expr::Param(_)) {
                n += 1;
            }
        });
        n
    }

    pub fn variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                out.insert(*v);
            }
        });
        out
    }

    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                out.insert(p.clone());
            }
        });
        out
    }

    pub fn uses_kind(&self, kind: VarKind) -> bool {
        self.variables().iter().any(|v| v.kind == kind)
    }

    /// True when the tree contains only literals and arithmetic.
    pub fn is_literal_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var(_) | Expr::Param(_) | Expr::Call { .. } => false,
            Expr::Neg(e) => e.is_literal_constant(),
            Expr::Binary { lhs, rhs, .. } => lhs.is_literal_constant() && rhs.is_literal_constant(),
            Expr::Pow { base, exponent } => {
                base.is_literal_constant() && exponent.is_literal_constant()
            }
        }
    }

    /// Value of a literal-only subtree.
    pub fn literal_value(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            Expr::Neg(e) => e.literal_value().map(|v| -v),
            Expr::Binary { op, lhs, rhs } => {
                let (a, b) = (lhs.literal_value()?, rhs.literal_value()?);
                Some(match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                })
            }
            Expr::Pow { base, exponent } => {
                Some(base.literal_value()?.powf(exponent.literal_value()?))
            }
            _ => None,
        }
    }

    /// Largest 1-based coordinate index used by the tree (0 if none).
    pub fn max_index(&self) -> usize {
        self.variables()
            .iter()
            .map(|v| v.index + 1)
            .max()
            .unwrap_or(0)
    }
}
