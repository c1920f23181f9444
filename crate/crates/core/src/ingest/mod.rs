//! Event-chain descriptions: parsing, reuse analysis against the registry of
//! existing components, and deterministic lowering into an instance model of
//! the event-chain metamodel.

mod schema;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{InstanceModel, Metamodel, ModelBuilder, ModelError, Value};

pub use schema::{
    parse_component_registry, parse_event_chain, parse_signal_registry, ComponentDesc, ComponentRegistry,
    EventChainDescription, PortDesc, PortValue, SignalEntry, SignalField, SignalRegistry,
};

/// Name given to the root `EventChain` object produced by lowering.
pub const CHAIN_NAME: &str = "event_chain";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("no frequency resolvable for node `{0}`")]
    Frequency(String),
    #[error("signal {topic} field `{field}` declared with conflicting {what}: `{first}` vs `{second}`")]
    SignalConflict {
        topic: String,
        field: String,
        what: &'static str,
        first: String,
        second: String,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Partition of the chain's component names by registry membership.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ComponentDiff {
    pub existing: Vec<String>,
    pub to_generate: Vec<String>,
}

/// Splits components into reused and to-be-generated by exact name match.
pub fn diff_components(desc: &EventChainDescription, reg: &ComponentRegistry) -> ComponentDiff {
    let (existing, to_generate) = desc
        .components
        .iter()
        .map(|c| c.name.clone())
        .partition(|name| reg.contains(name));
    ComponentDiff { existing, to_generate }
}

/// Execution frequency per node: explicit override, else the default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyPolicy {
    #[serde(default = "FrequencyPolicy::default_hz")]
    pub default: Option<f64>,
    #[serde(default)]
    pub overrides: BTreeMap<String, f64>,
}

impl Default for FrequencyPolicy {
    fn default() -> Self {
        FrequencyPolicy {
            default: Self::default_hz(),
            overrides: BTreeMap::new(),
        }
    }
}

impl FrequencyPolicy {
    pub const DEFAULT_HZ: f64 = 20.0;

    fn default_hz() -> Option<f64> {
        Some(Self::DEFAULT_HZ)
    }

    pub fn with_override(mut self, node: impl Into<String>, hz: f64) -> Self {
        self.overrides.insert(node.into(), hz);
        self
    }

    pub fn resolve(&self, node: &str) -> Result<f64, IngestError> {
        self.overrides
            .get(node)
            .copied()
            .or(self.default)
            .filter(|hz| hz.is_finite() && *hz > 0.0)
            .ok_or_else(|| IngestError::Frequency(node.to_string()))
    }
}

pub fn node_id(component: &str) -> String {
    format!("node:{component}")
}

pub fn data_id(topic: &str, field: &str) -> String {
    format!("data:{topic}:{field}")
}

/// Builds the instance model for `desc`: one `SoftwareNode` per component,
/// one `Data` per distinct (topic, field), wired through `input`/`output`
/// and chained with `nextstep` in component order.
pub fn lower_to_instance(
    desc: &EventChainDescription,
    reg: &ComponentRegistry,
    freq: &FrequencyPolicy,
    mm: Arc<Metamodel>,
) -> Result<InstanceModel, IngestError> {
    struct DataInfo<'a> {
        id: String,
        value: &'a PortValue,
        port: &'a PortDesc,
    }

    let mut data: Vec<DataInfo<'_>> = Vec::new();
    let mut index: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for component in &desc.components {
        for port in component.input.iter().chain(&component.output) {
            for value in &port.values {
                let key = (port.topic.as_str(), value.field.as_str());
                if let Some(&i) = index.get(&key) {
                    let first = data[i].port;
                    for (what, a, b) in [
                        ("qos profile", &first.qos_profile, &port.qos_profile),
                        ("message type", &first.message_type, &port.message_type),
                    ] {
                        if a != b {
                            return Err(IngestError::SignalConflict {
                                topic: port.topic.clone(),
                                field: value.field.clone(),
                                what,
                                first: a.clone(),
                                second: b.clone(),
                            });
                        }
                    }
                } else {
                    index.insert(key, data.len());
                    data.push(DataInfo {
                        id: data_id(&port.topic, &value.field),
                        value,
                        port,
                    });
                }
            }
        }
    }

    let mut builder = ModelBuilder::new(mm);
    let root = builder.object("chain", "EventChain");
    root.set("name", Value::Str(CHAIN_NAME.into()));
    for component in &desc.components {
        root.link("software", node_id(&component.name));
    }
    for d in &data {
        root.link("data", d.id.clone());
    }

    for d in &data {
        let obj = builder.object(d.id.clone(), "Data");
        obj.set("name", Value::Str(d.value.name.clone()))
            .set("topicName", Value::Str(d.port.topic.clone()))
            .set("messageType", Value::Str(d.port.message_type.clone()))
            .set("fieldName", Value::Str(d.value.field.clone()))
            .set("qosProfile", Value::Str(d.port.qos_profile.clone()));
        if !d.value.description.is_empty() {
            obj.set("description", Value::Str(d.value.description.clone()));
        }
    }

    for (i, component) in desc.components.iter().enumerate() {
        let hz = freq.resolve(&component.name)?;
        let obj = builder.object(node_id(&component.name), "SoftwareNode");
        obj.set("name", Value::Str(component.name.clone()))
            .set("frequency", Value::Float(hz))
            .set("existing", Value::Bool(reg.contains(&component.name)));
        for (reference, ports) in [("input", &component.input), ("output", &component.output)] {
            let mut linked: Vec<String> = Vec::new();
            for port in ports {
                for value in &port.values {
                    let id = data_id(&port.topic, &value.field);
                    if !linked.contains(&id) {
                        linked.push(id);
                    }
                }
            }
            for id in linked {
                obj.link(reference, id);
            }
        }
        if let Some(next) = desc.components.get(i + 1) {
            obj.link("nextstep", node_id(&next.name));
        }
    }

    Ok(builder.build()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;
    use crate::model::{load_metamodel, serialize_instance, Navigation};

    fn mm() -> Arc<Metamodel> {
        Arc::new(load_metamodel(assets::EVENT_CHAIN_METAMODEL).unwrap())
    }

    fn aeb() -> (EventChainDescription, ComponentRegistry) {
        (
            parse_event_chain(assets::AEB_EVENT_CHAIN).unwrap(),
            parse_component_registry(assets::AEB_COMPONENTS).unwrap(),
        )
    }

    fn component(name: &str, inputs: &[(&str, &str)], outputs: &[(&str, &str)]) -> ComponentDesc {
        let port = |(topic, field): &(&str, &str)| PortDesc {
            topic: topic.to_string(),
            message_type: "std_msgs/Float64".into(),
            qos_profile: "default".into(),
            values: vec![PortValue {
                name: field.to_string(),
                field: field.to_string(),
                description: String::new(),
            }],
        };
        ComponentDesc {
            name: name.into(),
            description: String::new(),
            input: inputs.iter().map(port).collect(),
            output: outputs.iter().map(port).collect(),
        }
    }

    #[test]
    fn aeb_diff_matches_case_study() {
        let (desc, reg) = aeb();
        let diff = diff_components(&desc, &reg);
        assert_eq!(diff.existing, ["ObjectDetection", "Carla_Vehicle_Control"]);
        assert_eq!(diff.to_generate, ["TTC_Calculation", "Braking_Decision"]);
    }

    #[test]
    fn diff_edge_cases() {
        let (desc, reg) = aeb();
        let all = diff_components(&desc, &ComponentRegistry::default());
        assert!(all.existing.is_empty());
        assert_eq!(all.to_generate.len(), 4);
        let superset = ComponentRegistry {
            components: desc.components.iter().cloned().chain(reg.components.clone()).collect(),
        };
        assert!(diff_components(&desc, &superset).to_generate.is_empty());
        // Case-sensitive: "BrakingDecision" does not match "Braking_Decision".
        let near = ComponentRegistry {
            components: vec![component("BrakingDecision", &[], &[])],
        };
        assert_eq!(diff_components(&desc, &near).to_generate.len(), 4);
    }

    #[test]
    fn aeb_lowers_to_chained_nodes() {
        let (desc, reg) = aeb();
        let m = lower_to_instance(&desc, &reg, &FrequencyPolicy::default(), mm()).unwrap();
        let nodes: Vec<_> = m.objects_of("SoftwareNode").collect();
        assert_eq!(nodes.len(), 4);
        let mut current = m.object("node:ObjectDetection").unwrap();
        let mut order = vec![current.id.clone()];
        while let Navigation::Objects(next) = m.navigate(current, "nextstep").unwrap() {
            let Some(n) = next.first() else { break };
            current = n;
            order.push(current.id.clone());
        }
        assert_eq!(order.len(), 4);
        assert_eq!(order[3], "node:Carla_Vehicle_Control");
        let ttc = m.object("node:TTC_Calculation").unwrap();
        assert_eq!(ttc.attribute("existing"), Some(&Value::Bool(false)));
        assert_eq!(ttc.attribute("frequency"), Some(&Value::Float(20.0)));
        // The committed AEB instance is exactly this lowering.
        assert_eq!(serialize_instance(&m), assets::AEB_INSTANCE);
    }

    #[test]
    fn single_component_has_no_nextstep() {
        let desc = EventChainDescription {
            components: vec![component("Solo", &[("/in", "data")], &[("/out", "data")])],
        };
        let m = lower_to_instance(&desc, &ComponentRegistry::default(), &FrequencyPolicy::default(), mm()).unwrap();
        let node = m.object("node:Solo").unwrap();
        assert!(node.targets("nextstep").is_empty());
    }

    #[test]
    fn shared_topic_becomes_one_data_object() {
        let desc = EventChainDescription {
            components: vec![
                component("A", &[("/in", "data")], &[("/ttc", "data")]),
                component("B", &[("/ttc", "data")], &[("/out", "data")]),
            ],
        };
        let m = lower_to_instance(&desc, &ComponentRegistry::default(), &FrequencyPolicy::default(), mm()).unwrap();
        // Oracle: distinct (topic, field) pairs across all ports.
        let mut keys: Vec<(String, String)> = desc
            .components
            .iter()
            .flat_map(|c| c.input.iter().chain(&c.output))
            .flat_map(|p| p.values.iter().map(move |v| (p.topic.clone(), v.field.clone())))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(m.objects_of("Data").count(), keys.len());
        assert_eq!(keys.len(), 3);
        let shared = data_id("/ttc", "data");
        assert_eq!(m.object("node:A").unwrap().targets("output"), [shared.clone()]);
        assert_eq!(m.object("node:B").unwrap().targets("input"), [shared]);
    }

    #[test]
    fn qos_conflict_is_an_error() {
        let mut b = component("B", &[("/ttc", "data")], &[]);
        b.input[0].qos_profile = "sensor_data".into();
        let desc = EventChainDescription {
            components: vec![component("A", &[], &[("/ttc", "data")]), b],
        };
        let err = lower_to_instance(&desc, &ComponentRegistry::default(), &FrequencyPolicy::default(), mm());
        assert!(matches!(err, Err(IngestError::SignalConflict { what: "qos profile", .. })));
    }

    #[test]
    fn frequency_policy() {
        let policy = FrequencyPolicy::default().with_override("Fast", 50.0);
        assert_eq!(policy.resolve("Fast").unwrap(), 50.0);
        assert_eq!(policy.resolve("Other").unwrap(), 20.0);
        let none = FrequencyPolicy {
            default: None,
            overrides: BTreeMap::new(),
        };
        assert_eq!(none.resolve("X"), Err(IngestError::Frequency("X".into())));
        let desc = EventChainDescription {
            components: vec![component("X", &[("/a", "data")], &[("/b", "data")])],
        };
        assert!(matches!(
            lower_to_instance(&desc, &ComponentRegistry::default(), &none, mm()),
            Err(IngestError::Frequency(_))
        ));
        let bad = FrequencyPolicy::default().with_override("X", -1.0);
        assert!(bad.resolve("X").is_err());
    }
}
