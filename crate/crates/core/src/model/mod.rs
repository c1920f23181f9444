//! Flat metamodels and the instance models that conform to them.
//!
//! Both are read from JSON. A [`Metamodel`] lists classes with typed
//! attributes and references; an [`InstanceModel`] is an object graph that has
//! passed every conformance rule of its metamodel (class existence, attribute
//! typing, reference resolution, multiplicity bounds, containment forest and
//! the optional single-root rule). There is no way to obtain a partially valid
//! model.

mod instance;
mod meta;
mod value;

use thiserror::Error;

pub use instance::{load_instance, serialize_instance, InstanceModel, ModelBuilder, ModelObject, Navigation};
pub use meta::{load_metamodel, Attribute, Feature, MetaClass, Metamodel, Multiplicity, Reference};
pub use value::{format_float, PrimitiveType, Value};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate {kind} name `{name}`")]
    DuplicateName { kind: &'static str, name: String },
    #[error("reference `{class}.{reference}` targets undeclared class `{target}`")]
    DanglingTarget { class: String, reference: String, target: String },
    #[error("object `{object}`: {rule}")]
    Conformance { object: String, rule: String },
    #[error("unknown feature `{feature}` on class `{class}`")]
    UnknownFeature { class: String, feature: String },
    #[error("attribute `{feature}` is unset on object `{object}`")]
    Unset { object: String, feature: String },
}

impl ModelError {
    pub(crate) fn from_json(err: serde_json::Error) -> Self {
        ModelError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
