//! Navigation expressions shared by the constraint and template languages.
//!
//! Both languages use the same surface: `a.b` navigation, `x->op(args)`
//! collection calls, `x.op(args)` string calls, comparisons, boolean
//! connectives and literals. They differ only in which operations they
//! accept, which the [`Dialect`] decides at parse time.

mod eval;
mod lexer;
mod parser;

use std::fmt;

use thiserror::Error;

pub use eval::{eval, Env, EvalError, Val};
pub use lexer::{tokenize, Tok, Token};
pub use parser::{parse_expr, Parser};

/// Line/column (1-based) plus byte offset in the enclosing document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pos {
    pub line: usize,
    pub column: usize,
    pub offset: usize,
}

impl Pos {
    pub fn start() -> Self {
        Pos {
            line: 1,
            column: 1,
            offset: 0,
        }
    }

    /// Position after consuming `text` from `self`.
    pub fn advance(self, text: &str) -> Pos {
        let mut p = self;
        for c in text.chars() {
            if c == '\n' {
                p.line += 1;
                p.column = 1;
            } else {
                p.column += 1;
            }
        }
        p.offset += text.len();
        p
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("syntax error at {pos}: {message}")]
pub struct SyntaxError {
    pub pos: Pos,
    pub message: String,
}

impl SyntaxError {
    pub fn new(pos: Pos, message: impl Into<String>) -> Self {
        SyntaxError {
            pos,
            message: message.into(),
        }
    }
}

/// Which operation set an expression may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// Constraint language: `self`, `implies`, `notEmpty`, `isEmpty`, `size`,
    /// `forAll`, `exists`.
    Constraint,
    /// Template query language: `concat`, `toLowerCase`, `tokenize`, `first`,
    /// `last`, `size`, `indexOf`, `union`.
    Query,
}

impl Dialect {
    fn allows_arrow(self, op: &str) -> bool {
        match self {
            Dialect::Constraint => matches!(op, "notEmpty" | "isEmpty" | "size" | "forAll" | "exists"),
            Dialect::Query => matches!(op, "first" | "last" | "size" | "indexOf" | "union"),
        }
    }

    fn allows_method(self, op: &str) -> bool {
        match self {
            Dialect::Constraint => false,
            Dialect::Query => matches!(op, "concat" | "toLowerCase" | "tokenize"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    And,
    Or,
    Implies,
    Eq,
    Neq,
    Lt,
    Le,
    Gt,
    Ge,
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Implies => "implies",
            BinOp::Eq => "=",
            BinOp::Neq => "<>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    SelfRef(Pos),
    Var(String, Pos),
    Lit(Literal),
    /// `target.feature`
    Nav { target: Box<Expr>, feature: String, pos: Pos },
    /// `target->op(args)` when `arrow`, else `target.op(args)`.
    Call {
        target: Box<Expr>,
        op: String,
        args: Vec<Expr>,
        arrow: bool,
        pos: Pos,
    },
    /// `target->forAll(var | body)` / `target->exists(var | body)`
    Iterate {
        target: Box<Expr>,
        op: String,
        var: String,
        body: Box<Expr>,
        pos: Pos,
    },
    Not(Box<Expr>, Pos),
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr>, pos: Pos },
}

impl Expr {
    pub fn pos(&self) -> Pos {
        match self {
            Expr::SelfRef(p) | Expr::Var(_, p) | Expr::Not(_, p) => *p,
            Expr::Lit(_) => Pos::default(),
            Expr::Nav { pos, .. } | Expr::Call { pos, .. } | Expr::Iterate { pos, .. } | Expr::Binary { pos, .. } => {
                *pos
            }
        }
    }
}
