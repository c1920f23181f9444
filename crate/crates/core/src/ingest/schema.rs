use serde::{Deserialize, Serialize};
use serde_json::{Map, Value as Json};

use super::IngestError;

/// One signal value carried by a port.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortValue {
    pub name: String,
    pub field: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortDesc {
    pub topic: String,
    pub message_type: String,
    pub qos_profile: String,
    pub values: Vec<PortValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentDesc {
    pub name: String,
    pub description: String,
    pub input: Vec<PortDesc>,
    pub output: Vec<PortDesc>,
}

impl ComponentDesc {
    /// Input value names in declaration order; these become the keyword
    /// arguments of the component's `execute` entry point.
    pub fn input_names(&self) -> Vec<&str> {
        port_value_names(&self.input)
    }

    pub fn output_names(&self) -> Vec<&str> {
        port_value_names(&self.output)
    }

    /// Pretty JSON of this single component, as handed to the code agent.
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("component serializes")
    }
}

fn port_value_names(ports: &[PortDesc]) -> Vec<&str> {
    ports.iter().flat_map(|p| p.values.iter().map(|v| v.name.as_str())).collect()
}

/// Ordered list of components; order is the processing sequence of the chain.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventChainDescription {
    pub components: Vec<ComponentDesc>,
}

impl EventChainDescription {
    pub fn component(&self, name: &str) -> Option<&ComponentDesc> {
        self.components.iter().find(|c| c.name == name)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("description serializes");
        s.push('\n');
        s
    }
}

/// Already implemented components, in the same format as the chain.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ComponentRegistry {
    pub components: Vec<ComponentDesc>,
}

impl ComponentRegistry {
    pub fn contains(&self, name: &str) -> bool {
        self.components.iter().any(|c| c.name == name)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(&self.components).expect("registry serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalField {
    #[serde(rename = "Field")]
    pub field: String,
    #[serde(rename = "Type")]
    pub ty: String,
    #[serde(rename = "Description")]
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignalEntry {
    #[serde(rename = "Topic Name")]
    pub topic: String,
    #[serde(rename = "Message Type")]
    pub message_type: String,
    pub qos_profile: String,
    #[serde(rename = "Message Definition")]
    pub fields: Vec<SignalField>,
}

/// Signals already present in the runtime.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignalRegistry {
    pub entries: Vec<SignalEntry>,
}

impl SignalRegistry {
    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("registry serializes")
    }
}

/// Field-by-field reader that reports the JSON path of the first violation.
struct Reader<'a> {
    path: String,
    value: &'a Json,
}

impl<'a> Reader<'a> {
    fn root(value: &'a Json) -> Self {
        Reader { path: String::new(), value }
    }

    fn err(&self, message: impl Into<String>) -> IngestError {
        IngestError::Schema {
            path: if self.path.is_empty() { "$".into() } else { self.path.clone() },
            message: message.into(),
        }
    }

    fn object(&self) -> Result<&'a Map<String, Json>, IngestError> {
        self.value.as_object().ok_or_else(|| self.err("expected an object"))
    }

    fn array(&self) -> Result<Vec<Reader<'a>>, IngestError> {
        let items = self.value.as_array().ok_or_else(|| self.err("expected an array"))?;
        Ok(items
            .iter()
            .enumerate()
            .map(|(i, value)| Reader {
                path: format!("{}[{i}]", self.path),
                value,
            })
            .collect())
    }

    fn field(&self, key: &str) -> Result<Reader<'a>, IngestError> {
        let obj = self.object()?;
        let path = if self.path.is_empty() { key.to_string() } else { format!("{}.{key}", self.path) };
        match obj.get(key) {
            Some(value) => Ok(Reader { path, value }),
            None => Err(IngestError::Schema {
                path,
                message: "missing".into(),
            }),
        }
    }

    fn opt_field(&self, key: &str) -> Result<Option<Reader<'a>>, IngestError> {
        match self.field(key) {
            Ok(r) => Ok(Some(r)),
            Err(IngestError::Schema { message, .. }) if message == "missing" => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn string(&self) -> Result<String, IngestError> {
        self.value
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| self.err("expected a string"))
    }

    fn string_field(&self, key: &str) -> Result<String, IngestError> {
        self.field(key)?.string()
    }

    fn opt_string_field(&self, key: &str) -> Result<String, IngestError> {
        self.opt_field(key)?.map_or(Ok(String::new()), |r| r.string())
    }
}

fn parse_json(document: &str) -> Result<Json, IngestError> {
    serde_json::from_str(document).map_err(|e| IngestError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

fn read_port(r: &Reader<'_>) -> Result<PortDesc, IngestError> {
    let topic_r = r.field("topic")?;
    let topic = topic_r.string()?;
    if !topic.starts_with('/') {
        return Err(topic_r.err(format!("topic `{topic}` must start with '/'")));
    }
    let type_r = r.field("message_type")?;
    let message_type = type_r.string()?;
    let parts: Vec<&str> = message_type.split('/').collect();
    if parts.len() != 2 || parts.iter().any(|p| p.is_empty()) {
        return Err(type_r.err(format!("message type `{message_type}` must have the form pkg/Type")));
    }
    let qos_profile = r.string_field("qos_profile")?;
    let values = r
        .field("values")?
        .array()?
        .iter()
        .map(|v| {
            Ok(PortValue {
                name: v.string_field("name")?,
                field: v.string_field("field")?,
                description: v.opt_string_field("description")?,
            })
        })
        .collect::<Result<_, IngestError>>()?;
    Ok(PortDesc {
        topic,
        message_type,
        qos_profile,
        values,
    })
}

fn read_components(root: &Reader<'_>, label: &str) -> Result<Vec<ComponentDesc>, IngestError> {
    // Accept the bare list, or an object wrapping it under `components`.
    let list = if root.value.is_object() { root.field("components")? } else { Reader::root(root.value) };
    let mut components: Vec<ComponentDesc> = Vec::new();
    for item in list.array()? {
        let name_r = item.field("name")?;
        let name = name_r.string()?;
        if name.is_empty() {
            return Err(name_r.err("component name must not be empty"));
        }
        if components.iter().any(|c| c.name == name) {
            return Err(name_r.err(format!("duplicate {label} name `{name}`")));
        }
        let ports = |key: &str| -> Result<Vec<PortDesc>, IngestError> {
            item.field(key)?.array()?.iter().map(read_port).collect()
        };
        components.push(ComponentDesc {
            description: item.opt_string_field("description")?,
            input: ports("input")?,
            output: ports("output")?,
            name,
        });
    }
    Ok(components)
}

/// Parses a structured event-chain description, preserving component order.
pub fn parse_event_chain(document: &str) -> Result<EventChainDescription, IngestError> {
    let json = parse_json(document)?;
    let components = read_components(&Reader::root(&json), "component")?;
    Ok(EventChainDescription { components })
}

pub fn parse_component_registry(document: &str) -> Result<ComponentRegistry, IngestError> {
    let json = parse_json(document)?;
    let components = read_components(&Reader::root(&json), "registry component")?;
    Ok(ComponentRegistry { components })
}

pub fn parse_signal_registry(document: &str) -> Result<SignalRegistry, IngestError> {
    let json = parse_json(document)?;
    let mut entries: Vec<SignalEntry> = Vec::new();
    for item in Reader::root(&json).array()? {
        let topic_r = item.field("Topic Name")?;
        let topic = topic_r.string()?;
        if entries.iter().any(|e| e.topic == topic) {
            return Err(topic_r.err(format!("duplicate topic `{topic}`")));
        }
        let fields = item
            .field("Message Definition")?
            .array()?
            .iter()
            .map(|f| {
                Ok(SignalField {
                    field: f.string_field("Field")?,
                    ty: f.string_field("Type")?,
                    description: f.opt_string_field("Description")?,
                })
            })
            .collect::<Result<_, IngestError>>()?;
        entries.push(SignalEntry {
            topic,
            message_type: item.string_field("Message Type")?,
            qos_profile: item.string_field("qos_profile")?,
            fields,
        });
    }
    Ok(SignalRegistry { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets;

    #[test]
    fn aeb_description_keeps_order() {
        let desc = parse_event_chain(assets::AEB_EVENT_CHAIN).unwrap();
        let names: Vec<_> = desc.components.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["ObjectDetection", "TTC_Calculation", "Braking_Decision", "Carla_Vehicle_Control"]);
        let ttc = desc.component("TTC_Calculation").unwrap();
        assert_eq!(ttc.input_names(), ["obstacle_distance", "ego_speed"]);
        assert_eq!(ttc.output_names(), ["ttc"]);
    }

    #[test]
    fn empty_list_is_valid() {
        assert!(parse_event_chain("[]").unwrap().components.is_empty());
    }

    #[test]
    fn message_type_without_package_is_rejected() {
        let doc = r#"[{"name": "A", "input": [{"topic": "/scan", "message_type": "LaserScan",
            "qos_profile": "q", "values": []}], "output": []}]"#;
        match parse_event_chain(doc) {
            Err(IngestError::Schema { path, .. }) => assert_eq!(path, "[0].input[0].message_type"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_topic_names_its_path() {
        let doc = r#"[
            {"name": "A", "input": [], "output": []},
            {"name": "B", "input": [{"message_type": "a/B", "qos_profile": "q", "values": []}], "output": []}
        ]"#;
        let err = parse_event_chain(doc).unwrap_err();
        assert_eq!(err.to_string(), "schema error at [1].input[0].topic: missing");
        let wrapped = format!(r#"{{"components": {}}}"#, doc);
        match parse_event_chain(&wrapped) {
            Err(IngestError::Schema { path, .. }) => assert_eq!(path, "components[1].input[0].topic"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_component_names_are_rejected() {
        let doc = r#"[{"name": "A", "input": [], "output": []}, {"name": "A", "input": [], "output": []}]"#;
        assert!(parse_event_chain(doc).is_err());
    }

    #[test]
    fn malformed_json_reports_position() {
        assert!(matches!(parse_event_chain("[{"), Err(IngestError::Parse { .. })));
    }

    #[test]
    fn registries_parse() {
        let reg = parse_component_registry(assets::AEB_COMPONENTS).unwrap();
        assert_eq!(reg.components.len(), 2);
        let signals = parse_signal_registry(assets::AEB_SIGNALS).unwrap();
        assert!(signals.entries.iter().any(|e| e.topic == "/scan" && e.message_type == "LaserScan"));
        let dup = r#"[{"Topic Name": "/a", "Message Type": "T", "qos_profile": "q", "Message Definition": []},
                      {"Topic Name": "/a", "Message Type": "T", "qos_profile": "q", "Message Definition": []}]"#;
        assert!(parse_signal_registry(dup).is_err());
    }
}
