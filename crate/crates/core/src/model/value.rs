use std::fmt;

use serde::{Deserialize, Serialize};

/// Primitive attribute types a metamodel may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveType {
    String,
    Float,
    Int,
    Bool,
}

impl fmt::Display for PrimitiveType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PrimitiveType::String => "string",
            PrimitiveType::Float => "float",
            PrimitiveType::Int => "int",
            PrimitiveType::Bool => "bool",
        };
        f.write_str(s)
    }
}

/// A primitive attribute value stored on a model object.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Float(f64),
    Int(i64),
    Bool(bool),
}

impl Value {
    pub fn primitive_type(&self) -> PrimitiveType {
        match self {
            Value::Str(_) => PrimitiveType::String,
            Value::Float(_) => PrimitiveType::Float,
            Value::Int(_) => PrimitiveType::Int,
            Value::Bool(_) => PrimitiveType::Bool,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Float(v) => Some(v),
            Value::Int(v) => Some(v as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Converts a JSON scalar into a value of the declared type. Integers are
    /// accepted where floats are declared; the reverse is rejected.
    pub(crate) fn from_json(json: &serde_json::Value, ty: PrimitiveType) -> Option<Value> {
        match (ty, json) {
            (PrimitiveType::String, serde_json::Value::String(s)) => Some(Value::Str(s.clone())),
            (PrimitiveType::Bool, serde_json::Value::Bool(b)) => Some(Value::Bool(*b)),
            (PrimitiveType::Int, serde_json::Value::Number(n)) => n.as_i64().map(Value::Int),
            (PrimitiveType::Float, serde_json::Value::Number(n)) => n.as_f64().map(Value::Float),
            _ => None,
        }
    }

    pub(crate) fn to_json(&self) -> serde_json::Value {
        match self {
            Value::Str(s) => serde_json::Value::String(s.clone()),
            Value::Float(v) => serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Value::Int(v) => serde_json::Value::from(*v),
            Value::Bool(b) => serde_json::Value::Bool(*b),
        }
    }
}

/// Formats a float with the shortest representation that round-trips,
/// always keeping a fractional part (`20.0`, not `20`).
pub fn format_float(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    format!("{v:?}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Str(s) => f.write_str(s),
            Value::Float(v) => f.write_str(&format_float(*v)),
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}
