use std::cmp::Ordering;

use thiserror::Error;

use super::{BinOp, Expr, Literal, Pos};
use crate::model::{format_float, Feature, InstanceModel, ModelObject, Navigation, Value};

/// Runtime value of an expression.
#[derive(Debug, Clone)]
pub enum Val<'m> {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Obj(&'m ModelObject),
    /// An unset single-valued reference, or `first`/`last` of an empty list.
    Null,
    Coll(Vec<Val<'m>>),
}

impl<'m> Val<'m> {
    fn from_value(v: &Value) -> Self {
        match v {
            Value::Str(s) => Val::Str(s.clone()),
            Value::Float(f) => Val::Float(*f),
            Value::Int(i) => Val::Int(*i),
            Value::Bool(b) => Val::Bool(*b),
        }
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Val::Bool(_) => "Boolean",
            Val::Int(_) => "Integer",
            Val::Float(_) => "Real",
            Val::Str(_) => "String",
            Val::Obj(_) => "Object",
            Val::Null => "null",
            Val::Coll(_) => "Collection",
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match *self {
            Val::Int(i) => Some(i as f64),
            Val::Float(f) => Some(f),
            _ => None,
        }
    }

    /// Collection view used by `->` operations: objects and scalars are
    /// singletons, null is empty.
    pub fn into_items(self) -> Vec<Val<'m>> {
        match self {
            Val::Coll(items) => items,
            Val::Null => Vec::new(),
            other => vec![other],
        }
    }

    /// Text produced when the value is interpolated into a template.
    pub fn render(&self) -> Result<String, String> {
        match self {
            Val::Bool(b) => Ok(b.to_string()),
            Val::Int(i) => Ok(i.to_string()),
            Val::Float(f) => Ok(format_float(*f)),
            Val::Str(s) => Ok(s.clone()),
            other => Err(format!("cannot render a {} as text", other.type_name())),
        }
    }

    /// Value equality: numbers compare across int/float, objects by identity.
    /// Mixing kinds is a type error.
    pub fn equals(&self, other: &Val<'m>) -> Result<bool, String> {
        match (self, other) {
            (Val::Bool(a), Val::Bool(b)) => Ok(a == b),
            (Val::Str(a), Val::Str(b)) => Ok(a == b),
            (Val::Obj(a), Val::Obj(b)) => Ok(a.id == b.id),
            (Val::Null, Val::Null) => Ok(true),
            (Val::Null, Val::Obj(_)) | (Val::Obj(_), Val::Null) => Ok(false),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => Ok(x == y),
                _ => Err(format!("cannot compare {} with {}", a.type_name(), b.type_name())),
            },
        }
    }

    fn order(&self, other: &Val<'m>) -> Result<Ordering, String> {
        match (self, other) {
            (Val::Str(a), Val::Str(b)) => Ok(a.cmp(b)),
            (a, b) => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x
                    .partial_cmp(&y)
                    .ok_or_else(|| "cannot order NaN".to_string()),
                _ => Err(format!("cannot order {} against {}", a.type_name(), b.type_name())),
            },
        }
    }
}

/// Variable bindings. Later bindings shadow earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Env<'m> {
    bindings: Vec<(String, Val<'m>)>,
}

impl<'m> Env<'m> {
    pub fn new() -> Self {
        Env { bindings: Vec::new() }
    }

    pub fn with(mut self, name: impl Into<String>, value: Val<'m>) -> Self {
        self.push(name, value);
        self
    }

    pub fn push(&mut self, name: impl Into<String>, value: Val<'m>) {
        self.bindings.push((name.into(), value));
    }

    pub fn pop(&mut self) {
        self.bindings.pop();
    }

    pub fn get(&self, name: &str) -> Option<&Val<'m>> {
        self.bindings.iter().rev().find(|(n, _)| n == name).map(|(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation error at {pos}: {message}")]
pub struct EvalError {
    pub pos: Pos,
    pub message: String,
}

fn fail<T>(pos: Pos, message: impl Into<String>) -> Result<T, EvalError> {
    Err(EvalError {
        pos,
        message: message.into(),
    })
}

/// Evaluates `expr` against `model` under `env`.
pub fn eval<'m>(expr: &Expr, env: &mut Env<'m>, model: &'m InstanceModel) -> Result<Val<'m>, EvalError> {
    match expr {
        Expr::Lit(lit) => Ok(match lit {
            Literal::Bool(b) => Val::Bool(*b),
            Literal::Int(i) => Val::Int(*i),
            Literal::Float(f) => Val::Float(*f),
            Literal::Str(s) => Val::Str(s.clone()),
        }),
        Expr::SelfRef(pos) => env.get("self").cloned().ok_or_else(|| EvalError {
            pos: *pos,
            message: "`self` is not bound".into(),
        }),
        Expr::Var(name, pos) => env.get(name).cloned().ok_or_else(|| EvalError {
            pos: *pos,
            message: format!("unbound variable `{name}`"),
        }),
        Expr::Nav { target, feature, pos } => {
            let target = eval(target, env, model)?;
            navigate(target, feature, *pos, model)
        }
        Expr::Not(inner, pos) => match eval(inner, env, model)? {
            Val::Bool(b) => Ok(Val::Bool(!b)),
            other => fail(*pos, format!("`not` expects a Boolean, got {}", other.type_name())),
        },
        Expr::Binary { op, lhs, rhs, pos } => binary(*op, lhs, rhs, *pos, env, model),
        Expr::Iterate {
            target,
            op,
            var,
            body,
            pos,
        } => {
            let items = eval(target, env, model)?.into_items();
            let want_all = op == "forAll";
            for item in items {
                env.push(var.clone(), item);
                let result = eval(body, env, model);
                env.pop();
                match result? {
                    Val::Bool(b) if b != want_all => return Ok(Val::Bool(b)),
                    Val::Bool(_) => {}
                    other => return fail(*pos, format!("`{op}` body must be Boolean, got {}", other.type_name())),
                }
            }
            Ok(Val::Bool(want_all))
        }
        Expr::Call {
            target,
            op,
            args,
            arrow,
            pos,
        } => {
            let target = eval(target, env, model)?;
            let args = args
                .iter()
                .map(|a| eval(a, env, model))
                .collect::<Result<Vec<_>, _>>()?;
            if *arrow {
                collection_op(target.into_items(), op, args, *pos)
            } else {
                string_op(target, op, args, *pos)
            }
        }
    }
}

fn navigate<'m>(target: Val<'m>, feature: &str, pos: Pos, model: &'m InstanceModel) -> Result<Val<'m>, EvalError> {
    let obj = match target {
        Val::Obj(obj) => obj,
        Val::Null => return fail(pos, format!("navigating `{feature}` through an empty reference")),
        other => return fail(pos, format!("cannot navigate `{feature}` on a {}", other.type_name())),
    };
    let single = match model.metamodel().class(&obj.class).and_then(|c| c.feature(feature)) {
        Some(Feature::Reference(r)) => r.multiplicity.is_single(),
        _ => false,
    };
    match model.navigate(obj, feature) {
        Ok(Navigation::Value(v)) => Ok(Val::from_value(v)),
        Ok(Navigation::Objects(objs)) if single => Ok(objs.first().map_or(Val::Null, |o| Val::Obj(o))),
        Ok(Navigation::Objects(objs)) => Ok(Val::Coll(objs.into_iter().map(Val::Obj).collect())),
        Err(e) => fail(pos, e.to_string()),
    }
}

fn binary<'m>(
    op: BinOp,
    lhs: &Expr,
    rhs: &Expr,
    pos: Pos,
    env: &mut Env<'m>,
    model: &'m InstanceModel,
) -> Result<Val<'m>, EvalError> {
    let boolean = |v: Val<'m>, side: &str| match v {
        Val::Bool(b) => Ok(b),
        other => fail(pos, format!("{side} of `{op}` must be Boolean, got {}", other.type_name())),
    };
    match op {
        BinOp::And | BinOp::Or | BinOp::Implies => {
            let left = boolean(eval(lhs, env, model)?, "left operand")?;
            // Short-circuit: the right side is not evaluated when the left
            // side decides the result.
            let decided = match op {
                BinOp::And => (!left).then_some(false),
                BinOp::Or => left.then_some(true),
                _ => (!left).then_some(true),
            };
            if let Some(result) = decided {
                return Ok(Val::Bool(result));
            }
            Ok(Val::Bool(boolean(eval(rhs, env, model)?, "right operand")?))
        }
        _ => {
            let a = eval(lhs, env, model)?;
            let b = eval(rhs, env, model)?;
            let result = match op {
                BinOp::Eq => a.equals(&b),
                BinOp::Neq => a.equals(&b).map(|e| !e),
                BinOp::Lt => a.order(&b).map(|o| o == Ordering::Less),
                BinOp::Le => a.order(&b).map(|o| o != Ordering::Greater),
                BinOp::Gt => a.order(&b).map(|o| o == Ordering::Greater),
                BinOp::Ge => a.order(&b).map(|o| o != Ordering::Less),
                _ => unreachable!(),
            };
            result.map(Val::Bool).or_else(|m| fail(pos, m))
        }
    }
}

fn arity(op: &str, args: &[Val<'_>], n: usize, pos: Pos) -> Result<(), EvalError> {
    if args.len() == n {
        Ok(())
    } else {
        fail(pos, format!("`{op}` takes {n} argument(s), got {}", args.len()))
    }
}

fn collection_op<'m>(items: Vec<Val<'m>>, op: &str, mut args: Vec<Val<'m>>, pos: Pos) -> Result<Val<'m>, EvalError> {
    match op {
        "notEmpty" | "isEmpty" | "size" | "first" | "last" => arity(op, &args, 0, pos)?,
        _ => arity(op, &args, 1, pos)?,
    }
    match op {
        "notEmpty" => Ok(Val::Bool(!items.is_empty())),
        "isEmpty" => Ok(Val::Bool(items.is_empty())),
        "size" => Ok(Val::Int(items.len() as i64)),
        "first" => Ok(items.into_iter().next().unwrap_or(Val::Null)),
        "last" => Ok(items.into_iter().last().unwrap_or(Val::Null)),
        "indexOf" => {
            // 1-based; 0 when absent.
            let needle = &args[0];
            for (i, item) in items.iter().enumerate() {
                if item.equals(needle).or_else(|m| fail(pos, m))? {
                    return Ok(Val::Int(i as i64 + 1));
                }
            }
            Ok(Val::Int(0))
        }
        "union" => {
            let mut out = items;
            out.extend(args.pop().expect("arity checked").into_items());
            Ok(Val::Coll(out))
        }
        other => fail(pos, format!("unknown collection operation `{other}`")),
    }
}

fn string_op<'m>(target: Val<'m>, op: &str, args: Vec<Val<'m>>, pos: Pos) -> Result<Val<'m>, EvalError> {
    let Val::Str(s) = target else {
        return fail(pos, format!("`{op}` expects a String receiver, got {}", target.type_name()));
    };
    let str_arg = |i: usize| match &args[i] {
        Val::Str(a) => Ok(a.clone()),
        other => fail(pos, format!("`{op}` expects a String argument, got {}", other.type_name())),
    };
    match op {
        "toLowerCase" => {
            arity(op, &args, 0, pos)?;
            Ok(Val::Str(s.to_lowercase()))
        }
        "concat" => {
            arity(op, &args, 1, pos)?;
            Ok(Val::Str(s + &str_arg(0)?))
        }
        "tokenize" => {
            arity(op, &args, 1, pos)?;
            let sep = str_arg(0)?;
            if sep.is_empty() {
                return fail(pos, "`tokenize` separator must not be empty");
            }
            Ok(Val::Coll(
                s.split(sep.as_str())
                    .filter(|t| !t.is_empty())
                    .map(|t| Val::Str(t.to_string()))
                    .collect(),
            ))
        }
        other => fail(pos, format!("unknown operation `{other}`")),
    }
}
