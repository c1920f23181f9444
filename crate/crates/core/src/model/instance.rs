use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Feature, MetaClass, Metamodel, ModelError, Value};

/// One object in an instance model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelObject {
    pub id: String,
    pub class: String,
    pub attributes: BTreeMap<String, Value>,
    /// Reference name to ordered target ids. Empty lists are never stored.
    pub references: BTreeMap<String, Vec<String>>,
}

impl ModelObject {
    pub fn new(id: impl Into<String>, class: impl Into<String>) -> Self {
        ModelObject {
            id: id.into(),
            class: class.into(),
            attributes: BTreeMap::new(),
            references: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, name: impl Into<String>, value: Value) -> &mut Self {
        self.attributes.insert(name.into(), value);
        self
    }

    pub fn link(&mut self, reference: impl Into<String>, target: impl Into<String>) -> &mut Self {
        self.references.entry(reference.into()).or_default().push(target.into());
        self
    }

    pub fn attribute(&self, name: &str) -> Option<&Value> {
        self.attributes.get(name)
    }

    pub fn targets(&self, reference: &str) -> &[String] {
        self.references.get(reference).map_or(&[], Vec::as_slice)
    }
}

/// A conforming instance of a [`Metamodel`]. Only constructed through
/// [`load_instance`] or [`ModelBuilder::build`], both of which run the full
/// conformance check.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceModel {
    metamodel: Arc<Metamodel>,
    objects: BTreeMap<String, ModelObject>,
}

/// Result of navigating a feature from an object.
#[derive(Debug, Clone, PartialEq)]
pub enum Navigation<'m> {
    Value(&'m Value),
    Objects(Vec<&'m ModelObject>),
}

impl InstanceModel {
    pub fn metamodel(&self) -> &Arc<Metamodel> {
        &self.metamodel
    }

    pub fn object(&self, id: &str) -> Option<&ModelObject> {
        self.objects.get(id)
    }

    /// Objects in id order.
    pub fn objects(&self) -> impl Iterator<Item = &ModelObject> {
        self.objects.values()
    }

    pub fn objects_of<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a ModelObject> + 'a {
        self.objects.values().filter(move |o| o.class == class)
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    /// Replaces one attribute value in place. Attributes take no part in
    /// the structural rules, so checking the new value alone keeps the model
    /// conformant.
    pub fn set_attribute(&mut self, id: &str, name: &str, value: Value) -> Result<(), ModelError> {
        let obj = self
            .objects
            .get_mut(id)
            .ok_or_else(|| conformance(id, "no such object"))?;
        let class = self.metamodel.class(&obj.class).expect("conformant model");
        check_attribute(class, id, name, &value)?;
        match obj.attributes.get_mut(name) {
            Some(slot) => *slot = value,
            None => {
                obj.attributes.insert(name.to_string(), value);
            }
        }
        Ok(())
    }

    /// Resolves `path` on `obj`: attributes yield their value, references
    /// yield the ordered list of target objects.
    pub fn navigate<'m>(&'m self, obj: &'m ModelObject, path: &str) -> Result<Navigation<'m>, ModelError> {
        let class = self
            .metamodel
            .class(&obj.class)
            .ok_or_else(|| ModelError::UnknownFeature {
                class: obj.class.clone(),
                feature: path.to_string(),
            })?;
        match class.feature(path) {
            Some(Feature::Attribute(_)) => obj
                .attributes
                .get(path)
                .map(Navigation::Value)
                .ok_or_else(|| ModelError::Unset {
                    object: obj.id.clone(),
                    feature: path.to_string(),
                }),
            Some(Feature::Reference(_)) => Ok(Navigation::Objects(
                obj.targets(path).iter().filter_map(|id| self.objects.get(id)).collect(),
            )),
            None => Err(ModelError::UnknownFeature {
                class: obj.class.clone(),
                feature: path.to_string(),
            }),
        }
    }

    /// Returns an editable copy. Edits only become a model again through
    /// [`ModelBuilder::build`].
    pub fn to_builder(&self) -> ModelBuilder {
        ModelBuilder {
            metamodel: Arc::clone(&self.metamodel),
            objects: self.objects.values().cloned().collect(),
        }
    }
}

/// Accumulates objects and checks conformance once, on [`build`](Self::build).
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    metamodel: Arc<Metamodel>,
    objects: Vec<ModelObject>,
}

impl ModelBuilder {
    pub fn new(metamodel: Arc<Metamodel>) -> Self {
        ModelBuilder {
            metamodel,
            objects: Vec::new(),
        }
    }

    pub fn object(&mut self, id: impl Into<String>, class: impl Into<String>) -> &mut ModelObject {
        self.objects.push(ModelObject::new(id, class));
        self.objects.last_mut().expect("just pushed")
    }

    pub fn get_mut(&mut self, id: &str) -> Option<&mut ModelObject> {
        self.objects.iter_mut().find(|o| o.id == id)
    }

    pub fn remove(&mut self, id: &str) -> Option<ModelObject> {
        let pos = self.objects.iter().position(|o| o.id == id)?;
        Some(self.objects.remove(pos))
    }

    pub fn build(self) -> Result<InstanceModel, ModelError> {
        let mut objects = BTreeMap::new();
        for mut obj in self.objects {
            obj.references.retain(|_, targets| !targets.is_empty());
            let id = obj.id.clone();
            if objects.insert(id.clone(), obj).is_some() {
                return Err(conformance(&id, "duplicate object id"));
            }
        }
        check_conformance(&self.metamodel, &objects)?;
        Ok(InstanceModel {
            metamodel: self.metamodel,
            objects,
        })
    }
}

fn conformance(object: &str, rule: impl Into<String>) -> ModelError {
    ModelError::Conformance {
        object: object.to_string(),
        rule: rule.into(),
    }
}

fn check_attribute(class: &MetaClass, id: &str, name: &str, value: &Value) -> Result<(), ModelError> {
    let attr = class
        .attribute(name)
        .ok_or_else(|| conformance(id, format!("attribute `{name}` is not declared on `{}`", class.name)))?;
    if value.primitive_type() != attr.ty {
        return Err(conformance(
            id,
            format!("attribute `{name}` expects {} but holds {}", attr.ty, value.primitive_type()),
        ));
    }
    if attr.positive && !value.as_f64().is_some_and(|v| v > 0.0) {
        return Err(conformance(id, format!("attribute `{name}` must be > 0, got {value}")));
    }
    Ok(())
}

fn check_conformance(mm: &Metamodel, objects: &BTreeMap<String, ModelObject>) -> Result<(), ModelError> {
    for obj in objects.values() {
        if obj.id.is_empty() {
            return Err(conformance("", "object id must not be empty"));
        }
        let class = mm
            .class(&obj.class)
            .ok_or_else(|| conformance(&obj.id, format!("class `{}` does not exist", obj.class)))?;

        for (name, value) in &obj.attributes {
            check_attribute(class, &obj.id, name, value)?;
        }
        for attr in class.attributes.iter().filter(|a| a.required) {
            if !obj.attributes.contains_key(&attr.name) {
                return Err(conformance(&obj.id, format!("required attribute `{}` is unset", attr.name)));
            }
        }

        for (name, targets) in &obj.references {
            let reference = class.reference(name).ok_or_else(|| {
                conformance(&obj.id, format!("reference `{name}` is not declared on `{}`", class.name))
            })?;
            // Short lists are the norm; a set only pays off for long ones.
            let mut seen = BTreeSet::new();
            for (i, target) in targets.iter().enumerate() {
                let dup = if targets.len() <= 16 {
                    targets[..i].contains(target)
                } else {
                    !seen.insert(target.as_str())
                };
                if dup {
                    return Err(conformance(&obj.id, format!("reference `{name}` lists `{target}` twice")));
                }
                let target_obj = objects.get(target).ok_or_else(|| {
                    conformance(&obj.id, format!("reference `{name}` target `{target}` does not resolve"))
                })?;
                if target_obj.class != reference.target {
                    return Err(conformance(
                        &obj.id,
                        format!(
                            "reference `{name}` expects `{}` but `{target}` is a `{}`",
                            reference.target, target_obj.class
                        ),
                    ));
                }
            }
        }
        for reference in &class.references {
            let count = obj.targets(&reference.name).len();
            if !reference.multiplicity.admits(count) {
                return Err(conformance(
                    &obj.id,
                    format!(
                        "reference `{}` has {count} target(s), multiplicity {}",
                        reference.name, reference.multiplicity
                    ),
                ));
            }
        }
    }

    // Containment must form a forest.
    let containment = mm.containment_refs();
    let mut container: BTreeMap<&str, &str> = BTreeMap::new();
    for obj in objects.values() {
        for (name, targets) in &obj.references {
            if !containment.contains_key(&(obj.class.as_str(), name.as_str())) {
                continue;
            }
            for target in targets {
                if let Some(prev) = container.insert(target.as_str(), obj.id.as_str()) {
                    return Err(conformance(
                        target,
                        format!("contained by both `{prev}` and `{}`", obj.id),
                    ));
                }
            }
        }
    }
    for start in container.keys() {
        let mut current = *start;
        let mut steps = 0;
        while let Some(parent) = container.get(current) {
            if *parent == *start || steps > objects.len() {
                return Err(conformance(start, "containment cycle"));
            }
            current = parent;
            steps += 1;
        }
    }

    if let Some(root_class) = &mm.root {
        let roots: Vec<&ModelObject> = objects
            .values()
            .filter(|o| !container.contains_key(o.id.as_str()))
            .collect();
        match roots.as_slice() {
            [root] if root.class == *root_class => {}
            [root] => {
                return Err(conformance(
                    &root.id,
                    format!("root object must be a `{root_class}`, found `{}`", root.class),
                ))
            }
            [] => return Err(conformance("", format!("no root `{root_class}` object"))),
            [_, second, ..] => {
                return Err(conformance(
                    &second.id,
                    format!("expected exactly one root `{root_class}`, found {} uncontained objects", roots.len()),
                ))
            }
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    metamodel: String,
    #[serde(default)]
    objects: Vec<ObjectDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectDoc {
    id: String,
    class: String,
    #[serde(default)]
    attributes: BTreeMap<String, serde_json::Value>,
    #[serde(default)]
    references: BTreeMap<String, Vec<String>>,
}

/// Parses an instance document and checks it against `mm`.
pub fn load_instance(document: &str, mm: Arc<Metamodel>) -> Result<InstanceModel, ModelError> {
    let doc: InstanceDoc = serde_json::from_str(document).map_err(ModelError::from_json)?;
    if doc.metamodel != mm.name {
        return Err(conformance(
            "",
            format!("document targets metamodel `{}`, expected `{}`", doc.metamodel, mm.name),
        ));
    }
    let mut builder = ModelBuilder::new(Arc::clone(&mm));
    for raw in doc.objects {
        let class = mm.class(&raw.class);
        let obj = builder.object(raw.id.clone(), raw.class.clone());
        // Unknown classes are reported by build().
        let Some(class) = class else { continue };
        for (name, json) in raw.attributes {
            let attr = class.attribute(&name).ok_or_else(|| {
                conformance(&raw.id, format!("attribute `{name}` is not declared on `{}`", class.name))
            })?;
            let value = Value::from_json(&json, attr.ty).ok_or_else(|| {
                conformance(&raw.id, format!("attribute `{name}` expects {}, got `{json}`", attr.ty))
            })?;
            obj.attributes.insert(name, value);
        }
        obj.references = raw.references;
    }
    builder.build()
}

/// Canonical JSON: objects ordered by id, keys sorted, two-space indent,
/// trailing newline.
pub fn serialize_instance(m: &InstanceModel) -> String {
    let doc = InstanceDoc {
        metamodel: m.metamodel.name.clone(),
        objects: m
            .objects
            .values()
            .map(|o| ObjectDoc {
                id: o.id.clone(),
                class: o.class.clone(),
                attributes: o.attributes.iter().map(|(k, v)| (k.clone(), v.to_json())).collect(),
                references: o.references.clone(),
            })
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("instance documents always serialize");
    out.push('\n');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::model::load_metamodel;

    fn mm() -> Arc<Metamodel> {
        Arc::new(load_metamodel(assets::EVENT_CHAIN_METAMODEL).unwrap())
    }

    fn aeb() -> InstanceModel {
        load_instance(assets::AEB_INSTANCE, mm()).unwrap()
    }

    #[test]
    fn aeb_instance_loads() {
        let m = aeb();
        assert_eq!(m.objects_of("SoftwareNode").count(), 4);
        assert_eq!(m.objects_of("EventChain").count(), 1);
        let ttc = m.object("node:TTC_Calculation").unwrap();
        let next = m.navigate(ttc, "nextstep").unwrap();
        match next {
            Navigation::Objects(objs) => assert_eq!(objs[0].id, "node:Braking_Decision"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn navigate_attribute_reference_and_unknown() {
        let m = aeb();
        let ttc = m.object("node:TTC_Calculation").unwrap();
        assert_eq!(m.navigate(ttc, "frequency").unwrap(), Navigation::Value(&Value::Float(20.0)));
        match m.navigate(ttc, "input").unwrap() {
            Navigation::Objects(objs) => {
                assert_eq!(objs.len(), 2);
                assert!(objs.iter().all(|o| o.class == "Data"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(m.navigate(ttc, "bogus"), Err(ModelError::UnknownFeature { .. })));
    }

    #[test]
    fn unknown_class_is_a_conformance_error() {
        let doc = r#"{"metamodel": "EventChain", "objects": [
            {"id": "chain", "class": "EventChain", "attributes": {"name": "x"}},
            {"id": "u", "class": "Unknown"}]}"#;
        match load_instance(doc, mm()) {
            Err(ModelError::Conformance { object, rule }) => {
                assert_eq!(object, "u");
                assert!(rule.contains("Unknown"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn two_nextsteps_violate_multiplicity() {
        let mut b = aeb().to_builder();
        b.get_mut("node:ObjectDetection")
            .unwrap()
            .link("nextstep", "node:Braking_Decision");
        match b.build() {
            Err(ModelError::Conformance { object, rule }) => {
                assert_eq!(object, "node:ObjectDetection");
                assert!(rule.contains("nextstep"), "{rule}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_mismatch_and_non_positive_frequency() {
        let mut b = aeb().to_builder();
        b.get_mut("node:TTC_Calculation").unwrap().set("frequency", Value::Str("fast".into()));
        assert!(b.build().is_err());
        let mut b = aeb().to_builder();
        b.get_mut("node:TTC_Calculation").unwrap().set("frequency", Value::Float(0.0));
        assert!(b.build().is_err());
    }

    #[test]
    fn set_attribute_checks_the_new_value() {
        let mut m = aeb();
        m.set_attribute("node:TTC_Calculation", "frequency", Value::Float(50.0)).unwrap();
        assert_eq!(
            m.object("node:TTC_Calculation").unwrap().attribute("frequency"),
            Some(&Value::Float(50.0))
        );
        let before = serialize_instance(&m);
        assert!(m.set_attribute("node:TTC_Calculation", "frequency", Value::Float(0.0)).is_err());
        assert!(m.set_attribute("node:TTC_Calculation", "frequency", Value::Str("x".into())).is_err());
        assert!(m.set_attribute("node:TTC_Calculation", "bogus", Value::Int(1)).is_err());
        assert!(m.set_attribute("nope", "name", Value::Str("x".into())).is_err());
        assert_eq!(serialize_instance(&m), before);
        m.set_attribute("node:TTC_Calculation", "existing", Value::Bool(true)).unwrap();
    }

    #[test]
    fn null_attribute_is_rejected() {
        let doc = r#"{"metamodel": "EventChain", "objects": [
            {"id": "chain", "class": "EventChain", "attributes": {"name": null}}]}"#;
        assert!(matches!(load_instance(doc, mm()), Err(ModelError::Conformance { .. })));
    }

    #[test]
    fn dangling_and_wrongly_typed_targets() {
        let mut b = aeb().to_builder();
        b.get_mut("node:TTC_Calculation").unwrap().link("input", "ghost");
        assert!(b.build().is_err());
        let mut b = aeb().to_builder();
        b.get_mut("node:Braking_Decision").unwrap().link("input", "node:TTC_Calculation");
        assert!(b.build().is_err());
    }

    #[test]
    fn root_rules() {
        let doc = r#"{"metamodel": "EventChain", "objects": [
            {"id": "chain", "class": "EventChain", "attributes": {"name": "x"}},
            {"id": "n", "class": "SoftwareNode", "attributes": {"name": "n"}}]}"#;
        assert!(load_instance(doc, mm()).is_err(), "uncontained node is a second root");
        let doc = r#"{"metamodel": "EventChain", "objects": []}"#;
        assert!(load_instance(doc, mm()).is_err());
    }

    #[test]
    fn root_only_model_serializes_minimally() {
        let doc = r#"{"metamodel": "EventChain", "objects": [
            {"id": "chain", "class": "EventChain", "attributes": {"name": "empty"}}]}"#;
        let m = load_instance(doc, mm()).unwrap();
        let text = serialize_instance(&m);
        assert_eq!(
            text,
            "{\n  \"metamodel\": \"EventChain\",\n  \"objects\": [\n    {\n      \"id\": \"chain\",\n      \
             \"class\": \"EventChain\",\n      \"attributes\": {\n        \"name\": \"empty\"\n      },\n      \
             \"references\": {}\n    }\n  ]\n}\n"
        );
    }

    #[test]
    fn aeb_round_trip_and_determinism() {
        let m = aeb();
        let text = serialize_instance(&m);
        assert_eq!(text, serialize_instance(&m));
        let back = load_instance(&text, mm()).unwrap();
        assert_eq!(back, m);
        assert_eq!(serialize_instance(&back), text);
    }
}
