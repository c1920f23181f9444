use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::assets;

use super::AgentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PromptKind {
    EventChain,
    FunctionCode,
    InstanceModel,
    Constraints,
}

impl PromptKind {
    pub const ALL: [PromptKind; 4] = [
        PromptKind::EventChain,
        PromptKind::FunctionCode,
        PromptKind::InstanceModel,
        PromptKind::Constraints,
    ];

    pub fn template(self) -> &'static str {
        match self {
            PromptKind::EventChain => assets::PROMPT_EVENT_CHAIN,
            PromptKind::FunctionCode => assets::PROMPT_FUNCTION_CODE,
            PromptKind::InstanceModel => assets::PROMPT_INSTANCE_MODEL,
            PromptKind::Constraints => assets::PROMPT_CONSTRAINTS,
        }
    }

    /// Slot names in order of first appearance.
    pub fn slots(self) -> Vec<&'static str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for piece in split(self.template()) {
            if let Piece::Slot(name) = piece {
                if seen.insert(name) {
                    out.push(name);
                }
            }
        }
        out
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PromptKind::EventChain => "event_chain",
            PromptKind::FunctionCode => "function_code",
            PromptKind::InstanceModel => "instance_model",
            PromptKind::Constraints => "constraints",
        }
    }
}

impl fmt::Display for PromptKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PromptKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PromptKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown prompt `{s}`"))
    }
}

enum Piece<'a> {
    Text(&'a str),
    Slot(&'a str),
}

fn split(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let Some(len) = rest[start + 2..].find("}}") else { break };
        let name = &rest[start + 2..start + 2 + len];
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            out.push(Piece::Text(&rest[..start + 2]));
            rest = &rest[start + 2..];
            continue;
        }
        out.push(Piece::Text(&rest[..start]));
        out.push(Piece::Slot(name));
        rest = &rest[start + 4 + len..];
    }
    out.push(Piece::Text(rest));
    out
}

/// Fills every slot of the shipped template. Slot values are inserted
/// verbatim and never rescanned; a missing or unknown slot is an error.
pub fn build_prompt(kind: PromptKind, slots: &BTreeMap<&str, String>) -> Result<String, AgentError> {
    let declared = kind.slots();
    if let Some(extra) = slots.keys().find(|k| !declared.contains(k)) {
        return Err(AgentError::UnknownSlot {
            prompt: kind,
            slot: extra.to_string(),
        });
    }
    let mut out = String::new();
    for piece in split(kind.template()) {
        match piece {
            Piece::Text(t) => out.push_str(t),
            Piece::Slot(name) => match slots.get(name) {
                Some(v) => out.push_str(v.trim_end()),
                None => {
                    return Err(AgentError::MissingSlot {
                        prompt: kind,
                        slot: name.to_string(),
                    })
                }
            },
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use sha2::{Digest, Sha256};

    use super::*;

    #[test]
    fn declared_slots() {
        assert_eq!(
            PromptKind::EventChain.slots(),
            ["requirements", "existing_components", "existing_signals"]
        );
        assert_eq!(PromptKind::FunctionCode.slots(), ["submodule_description"]);
        assert_eq!(
            PromptKind::InstanceModel.slots(),
            ["metamodel", "one_shot_example", "event_chain_description"]
        );
        assert_eq!(PromptKind::Constraints.slots(), ["metamodel", "nl_constraint_text"]);
    }

    #[test]
    fn pinned_checksums() {
        let pinned = [
            (PromptKind::EventChain, "662bf083e9d46f731789bdd4261f4a0d647203007eb04fcfec1bfb92a021965e"),
            (PromptKind::FunctionCode, "48e1eba009d8e3f48d7d4cd826d7f50a3442026bd3f0c01bab7450525b74ec9c"),
            (PromptKind::InstanceModel, "ae20a1798f992c8e0ec1de8856a9a8d384f14cfebc3497d5c68e4a2542356869"),
            (PromptKind::Constraints, "9365214e2d6c8a476b5f4ebee876d0688c5dc22dfc2e4a1012e6aa520356588c"),
        ];
        for (kind, want) in pinned {
            let got = hex::encode(Sha256::digest(kind.template().as_bytes()));
            assert_eq!(got, want, "prompt template `{kind}` changed");
        }
    }

    #[test]
    fn missing_and_unknown_slots() {
        let slots = BTreeMap::from([("nl_constraint_text", "x".to_string())]);
        assert_eq!(
            build_prompt(PromptKind::Constraints, &slots).unwrap_err(),
            AgentError::MissingSlot {
                prompt: PromptKind::Constraints,
                slot: "metamodel".into()
            }
        );
        let slots = BTreeMap::from([("bogus", "x".to_string())]);
        assert!(matches!(
            build_prompt(PromptKind::FunctionCode, &slots),
            Err(AgentError::UnknownSlot { .. })
        ));
    }

    #[test]
    fn values_are_not_rescanned() {
        let slots = BTreeMap::from([("submodule_description", "{{submodule_description}}".to_string())]);
        let p = build_prompt(PromptKind::FunctionCode, &slots).unwrap();
        assert_eq!(p.matches("{{submodule_description}}").count(), 1);
        assert!(p.contains("executed directly in the function execute(input1, input2, ...)"));
        assert!(p.ends_with("# The generated sub software module is:\n"));
    }
}
