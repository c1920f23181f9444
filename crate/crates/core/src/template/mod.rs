//! Model-to-text templates.
//!
//! The surface syntax:
//!
//! - `[template public main(param : Class)]` … `[/template]` binds `param` to
//!   the single object of `Class` in the model.
//! - `[file (nameExpr, append, 'UTF-8')]` … `[/file]` redirects output to a
//!   generated file.
//! - `[for (var : Class | expr)]` … `[/for]` iterates; the loop variable
//!   shadows outer bindings.
//! - `[if (expr)]` … `[else]` … `[/if]`
//! - `[comment text /]` or `[comment]text[/comment]`
//! - `[expr/]` interpolates a query result.
//!
//! A `[` that does not start one of these is literal text, so subscripts such
//! as `output['x']` pass through unchanged. A block tag alone on a line takes
//! that line's indentation and newline with it.

mod parse;
mod render;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Expr, Pos, SyntaxError};

pub use parse::parse_template;
pub use render::render;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Text(String),
    Comment(String),
    Interp {
        expr: Expr,
        pos: Pos,
    },
    For {
        var: String,
        class: Option<String>,
        iter: Expr,
        body: Vec<Node>,
        pos: Pos,
    },
    If {
        cond: Expr,
        then: Vec<Node>,
        otherwise: Vec<Node>,
        pos: Pos,
    },
    File {
        name: Expr,
        append: bool,
        encoding: String,
        body: Vec<Node>,
        pos: Pos,
    },
}

/// Parsed template. Text without a `[template]` header is an implicit
/// parameterless template.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    pub name: String,
    pub param: Option<String>,
    pub param_class: Option<String>,
    pub body: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedFile {
    pub name: String,
    pub content: String,
}

/// Output of a render, files in generation order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct GeneratedFileSet {
    pub files: Vec<GeneratedFile>,
    /// Text emitted outside any `[file]` block.
    pub unfiled: String,
}

impl GeneratedFileSet {
    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|f| f.name == name).map(|f| f.content.as_str())
    }

    pub fn names(&self) -> Vec<&str> {
        self.files.iter().map(|f| f.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TemplateError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("unbalanced block at {pos}: {message}")]
    Unbalanced { pos: Pos, message: String },
    #[error("evaluation error at {pos}: {message}")]
    Eval { pos: Pos, message: String },
    #[error("file `{0}` is generated twice")]
    DuplicateFile(String),
}

impl TemplateError {
    fn syntax(pos: Pos, message: impl Into<String>) -> Self {
        TemplateError::Syntax(SyntaxError::new(pos, message))
    }
}
