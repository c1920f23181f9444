//! LLM agent stages: prompt construction, backends, artifact extraction and
//! the multi-run evaluation harness.

mod backend;
mod eval;
mod extract;
mod prompts;
mod python;

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use crate::assets;
use crate::constraints::{parse_constraints, ConstraintSet};
use crate::ingest::{parse_component_registry, ComponentDesc, ComponentRegistry, FrequencyPolicy};
use crate::model::{load_metamodel, Metamodel};

pub use backend::{
    extract_message, prompt_hash, BackendError, Fixture, HttpChatBackend, HttpConfig, LlmBackend, ReplayBackend,
};
pub use eval::{
    evaluate_run, fixture_path, run_evaluation, run_evaluation_with, BackendReport, EvalConfig, EvalReport, RunOutcome,
};
pub use extract::{check_signature, extract_artifact, AgentResult, Artifact, ArtifactKind, CodeArtifact, ExtractError};
pub use prompts::{build_prompt, PromptKind};
pub use python::PythonBehavior;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgentError {
    #[error("prompt `{prompt}` needs slot `{slot}`")]
    MissingSlot { prompt: PromptKind, slot: String },
    #[error("prompt `{prompt}` has no slot `{slot}`")]
    UnknownSlot { prompt: PromptKind, slot: String },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
}

/// Everything the chain-level stages read: requirement text, registries,
/// metamodel, constraints and the frequency policy.
#[derive(Debug, Clone)]
pub struct ChainInputs {
    pub requirements: String,
    pub components_text: String,
    pub signals_text: String,
    pub registry: ComponentRegistry,
    pub metamodel: Arc<Metamodel>,
    pub constraints: ConstraintSet,
    pub frequency: FrequencyPolicy,
}

impl ChainInputs {
    /// The shipped AEB case study.
    pub fn aeb() -> Self {
        ChainInputs {
            requirements: assets::AEB_REQUIREMENTS.to_string(),
            components_text: assets::AEB_COMPONENTS.to_string(),
            signals_text: assets::AEB_SIGNALS.to_string(),
            registry: parse_component_registry(assets::AEB_COMPONENTS).expect("shipped registry parses"),
            metamodel: Arc::new(load_metamodel(assets::EVENT_CHAIN_METAMODEL).expect("shipped metamodel loads")),
            constraints: parse_constraints(assets::EVENT_CHAIN_CONSTRAINTS).expect("shipped constraints parse"),
            frequency: FrequencyPolicy::default(),
        }
    }

    pub fn event_chain_prompt(&self) -> Result<String, AgentError> {
        build_prompt(
            PromptKind::EventChain,
            &BTreeMap::from([
                ("requirements", self.requirements.clone()),
                ("existing_components", self.components_text.clone()),
                ("existing_signals", self.signals_text.clone()),
            ]),
        )
    }
}

pub fn function_code_prompt(component: &ComponentDesc) -> Result<String, AgentError> {
    build_prompt(
        PromptKind::FunctionCode,
        &BTreeMap::from([("submodule_description", component.to_json_pretty())]),
    )
}

pub fn instance_model_prompt(metamodel_text: &str, event_chain_json: &str) -> Result<String, AgentError> {
    build_prompt(
        PromptKind::InstanceModel,
        &BTreeMap::from([
            ("metamodel", metamodel_text.to_string()),
            ("one_shot_example", assets::ONE_SHOT_INSTANCE.to_string()),
            ("event_chain_description", event_chain_json.to_string()),
        ]),
    )
}

/// Runs one agent step: prompt, completion, extraction.
pub fn ask(backend: &dyn LlmBackend, prompt: &str, kind: ArtifactKind) -> Result<AgentResult, AgentError> {
    let response = backend.complete(prompt)?;
    Ok(extract_artifact(kind, &response)?)
}
