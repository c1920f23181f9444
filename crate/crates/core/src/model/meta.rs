use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelError, PrimitiveType};

/// Reference multiplicity. Only the four bounds used by flat event-chain
/// metamodels are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Multiplicity {
    /// `0..1`
    Optional,
    /// `1..1`
    One,
    /// `0..*`
    Many,
    /// `1..*`
    OneOrMore,
}

impl Multiplicity {
    pub fn lower(self) -> usize {
        match self {
            Multiplicity::Optional | Multiplicity::Many => 0,
            Multiplicity::One | Multiplicity::OneOrMore => 1,
        }
    }

    pub fn upper(self) -> Option<usize> {
        match self {
            Multiplicity::Optional | Multiplicity::One => Some(1),
            Multiplicity::Many | Multiplicity::OneOrMore => None,
        }
    }

    pub fn is_single(self) -> bool {
        self.upper() == Some(1)
    }

    pub fn admits(self, count: usize) -> bool {
        count >= self.lower() && self.upper().is_none_or(|u| count <= u)
    }
}

impl FromStr for Multiplicity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "0..1" => Ok(Multiplicity::Optional),
            "1..1" | "1" => Ok(Multiplicity::One),
            "0..*" | "*" => Ok(Multiplicity::Many),
            "1..*" => Ok(Multiplicity::OneOrMore),
            other => Err(ModelError::Schema(format!("invalid multiplicity `{other}`"))),
        }
    }
}

impl fmt::Display for Multiplicity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Multiplicity::Optional => "0..1",
            Multiplicity::One => "1..1",
            Multiplicity::Many => "0..*",
            Multiplicity::OneOrMore => "1..*",
        })
    }
}

impl Serialize for Multiplicity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Multiplicity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: PrimitiveType,
    /// Must be present on every object of the owning class.
    #[serde(default, skip_serializing_if = "is_false")]
    pub required: bool,
    /// Numeric value must be strictly greater than zero when present.
    #[serde(default, skip_serializing_if = "is_false")]
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reference {
    pub name: String,
    pub target: String,
    pub multiplicity: Multiplicity,
    #[serde(default)]
    pub containment: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetaClass {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<Attribute>,
    #[serde(default)]
    pub references: Vec<Reference>,
}

/// A feature declared on a class, as resolved by name.
#[derive(Debug, Clone, Copy)]
pub enum Feature<'a> {
    Attribute(&'a Attribute),
    Reference(&'a Reference),
}

impl MetaClass {
    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn reference(&self, name: &str) -> Option<&Reference> {
        self.references.iter().find(|r| r.name == name)
    }

    pub fn feature(&self, name: &str) -> Option<Feature<'_>> {
        self.attribute(name)
            .map(Feature::Attribute)
            .or_else(|| self.reference(name).map(Feature::Reference))
    }
}

/// A flat metamodel: a set of classes with typed attributes and references.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metamodel {
    pub name: String,
    /// Class of the single uncontained object every conforming instance must have.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root: Option<String>,
    #[serde(default)]
    pub classes: Vec<MetaClass>,
}

impl Metamodel {
    pub fn class(&self, name: &str) -> Option<&MetaClass> {
        self.classes.iter().find(|c| c.name == name)
    }

    /// Checks the structural invariants: unique class names, unique feature
    /// names per class, resolvable reference targets.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut class_names = BTreeSet::new();
        for class in &self.classes {
            if !class_names.insert(class.name.as_str()) {
                return Err(ModelError::DuplicateName {
                    kind: "class",
                    name: class.name.clone(),
                });
            }
        }
        for class in &self.classes {
            let mut features = BTreeSet::new();
            let names = class
                .attributes
                .iter()
                .map(|a| &a.name)
                .chain(class.references.iter().map(|r| &r.name));
            for name in names {
                if !features.insert(name.as_str()) {
                    return Err(ModelError::DuplicateName {
                        kind: "feature",
                        name: format!("{}.{}", class.name, name),
                    });
                }
            }
            for attr in &class.attributes {
                if attr.positive && !matches!(attr.ty, PrimitiveType::Float | PrimitiveType::Int) {
                    return Err(ModelError::Schema(format!(
                        "attribute `{}.{}` is marked positive but is not numeric",
                        class.name, attr.name
                    )));
                }
            }
            for r in &class.references {
                if !class_names.contains(r.target.as_str()) {
                    return Err(ModelError::DanglingTarget {
                        class: class.name.clone(),
                        reference: r.name.clone(),
                        target: r.target.clone(),
                    });
                }
            }
        }
        if let Some(root) = &self.root {
            if !class_names.contains(root.as_str()) {
                return Err(ModelError::Schema(format!("root class `{root}` is not declared")));
            }
        }
        Ok(())
    }

    /// Index of containment references: (owner class, reference) pairs.
    pub(crate) fn containment_refs(&self) -> BTreeMap<(&str, &str), &Reference> {
        self.classes
            .iter()
            .flat_map(|c| {
                c.references
                    .iter()
                    .filter(|r| r.containment)
                    .map(move |r| ((c.name.as_str(), r.name.as_str()), r))
            })
            .collect()
    }
}

/// Parses and validates a metamodel document.
pub fn load_metamodel(document: &str) -> Result<Metamodel, ModelError> {
    let mm: Metamodel = serde_json::from_str(document).map_err(ModelError::from_json)?;
    mm.validate()?;
    Ok(mm)
}

fn is_false(b: &bool) -> bool {
    !*b
}
