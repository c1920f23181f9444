use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PortSpec {
    pub topic: String,
    pub field: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qos_profile: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub name: String,
    /// Key into the behavior registry; the node name when absent.
    #[serde(default)]
    pub behavior: String,
    pub frequency: f64,
    #[serde(default)]
    pub subscriptions: Vec<PortSpec>,
    #[serde(default)]
    pub publications: Vec<PortSpec>,
}

impl NodeSpec {
    pub fn input_names(&self) -> Vec<&str> {
        self.subscriptions.iter().map(|p| p.name.as_str()).collect()
    }

    pub fn output_names(&self) -> Vec<&str> {
        self.publications.iter().map(|p| p.name.as_str()).collect()
    }
}

/// Nodes in chain order.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NodeGraph {
    pub nodes: Vec<NodeSpec>,
}

impl NodeGraph {
    pub fn node(&self, name: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.name == name)
    }

    pub fn published_topics(&self) -> BTreeSet<&str> {
        self.nodes
            .iter()
            .flat_map(|n| n.publications.iter().map(|p| p.topic.as_str()))
            .collect()
    }

    pub fn max_frequency(&self) -> Option<f64> {
        self.nodes.iter().map(|n| n.frequency).reduce(f64::max)
    }

    /// Subscriptions whose topic is neither published by a node nor in `external`.
    pub fn dangling<'a>(&'a self, external: &[String]) -> Vec<(&'a str, &'a str)> {
        let published = self.published_topics();
        self.nodes
            .iter()
            .flat_map(|n| n.subscriptions.iter().map(move |s| (n.name.as_str(), s.topic.as_str())))
            .filter(|(_, t)| !published.contains(t) && !external.iter().any(|e| e == t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WiringMode {
    Lenient,
    /// Every subscription must be published by a node or by one of these topics.
    Strict { external: Vec<String> },
}

pub fn load_wiring(manifest: &str, mode: &WiringMode) -> Result<NodeGraph, SimError> {
    let mut graph: NodeGraph = if manifest.trim().is_empty() {
        NodeGraph::default()
    } else {
        serde_json::from_str(manifest).map_err(|e| SimError::Schema(e.to_string()))?
    };
    let mut names = BTreeSet::new();
    for (i, node) in graph.nodes.iter_mut().enumerate() {
        if node.name.is_empty() {
            return Err(SimError::Schema(format!("nodes[{i}].name is empty")));
        }
        if !names.insert(node.name.clone()) {
            return Err(SimError::Schema(format!("duplicate node `{}`", node.name)));
        }
        if !(node.frequency.is_finite() && node.frequency > 0.0) {
            return Err(SimError::Schema(format!(
                "nodes[{i}].frequency must be positive, got {}",
                node.frequency
            )));
        }
        for (what, ports) in [("subscriptions", &node.subscriptions), ("publications", &node.publications)] {
            let mut seen = BTreeSet::new();
            for (j, p) in ports.iter().enumerate() {
                if p.name.is_empty() || p.topic.is_empty() || p.field.is_empty() {
                    return Err(SimError::Schema(format!("nodes[{i}].{what}[{j}] has an empty name, topic or field")));
                }
                if !seen.insert(p.name.as_str()) {
                    return Err(SimError::Schema(format!("nodes[{i}].{what}: duplicate name `{}`", p.name)));
                }
            }
        }
        if node.behavior.is_empty() {
            node.behavior = node.name.clone();
        }
    }
    if let WiringMode::Strict { external } = mode {
        if let Some((node, topic)) = graph.dangling(external).first() {
            return Err(SimError::Dangling {
                node: node.to_string(),
                topic: topic.to_string(),
            });
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"nodes": [{"name": "A", "frequency": 10,
        "subscriptions": [{"topic": "/ghost", "field": "data", "name": "x"}],
        "publications": [{"topic": "/out", "field": "data", "name": "y"}]}]}"#;

    #[test]
    fn lenient_and_strict() {
        let g = load_wiring(ONE, &WiringMode::Lenient).unwrap();
        assert_eq!(g.nodes[0].behavior, "A");
        assert_eq!(g.dangling(&[]), [("A", "/ghost")]);
        let strict = WiringMode::Strict { external: vec![] };
        assert_eq!(
            load_wiring(ONE, &strict).unwrap_err(),
            SimError::Dangling {
                node: "A".into(),
                topic: "/ghost".into()
            }
        );
        let ok = WiringMode::Strict {
            external: vec!["/ghost".into()],
        };
        assert!(load_wiring(ONE, &ok).is_ok());
    }

    #[test]
    fn empty_manifest() {
        assert!(load_wiring(r#"{"nodes": []}"#, &WiringMode::Lenient).unwrap().nodes.is_empty());
        assert!(load_wiring("", &WiringMode::Lenient).unwrap().nodes.is_empty());
    }

    #[test]
    fn schema_errors() {
        let bad = [
            r#"{"nodes": [{"name": "A"}]}"#,
            r#"{"nodes": [{"name": "A", "frequency": 0}]}"#,
            r#"{"nodes": [{"name": "A", "frequency": 1}, {"name": "A", "frequency": 1}]}"#,
            r#"{"nodes": [{"name": "A", "frequency": 1, "publications": [
                {"topic": "/a", "field": "f", "name": "n"}, {"topic": "/b", "field": "f", "name": "n"}]}]}"#,
            "[1, 2]",
        ];
        for text in bad {
            assert!(matches!(load_wiring(text, &WiringMode::Lenient), Err(SimError::Schema(_))), "{text}");
        }
    }
}
