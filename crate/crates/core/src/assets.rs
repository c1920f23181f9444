//! Files shipped with the crate: the event-chain metamodel, constraints,
//! templates, prompt templates and the AEB case-study fixtures.

pub const EVENT_CHAIN_METAMODEL: &str = include_str!("../assets/metamodel/event_chain.json");
pub const EVENT_CHAIN_CONSTRAINTS: &str = include_str!("../assets/constraints/event_chain.ocl");

pub const AEB_REQUIREMENTS: &str = include_str!("../assets/aeb/requirements.md");
pub const AEB_EVENT_CHAIN: &str = include_str!("../assets/aeb/event_chain.json");
pub const AEB_COMPONENTS: &str = include_str!("../assets/aeb/components.json");
pub const AEB_SIGNALS: &str = include_str!("../assets/aeb/signals.json");
pub const AEB_INSTANCE: &str = include_str!("../assets/aeb/instance.json");

pub const ROS_NODE_TEMPLATE: &str = include_str!("../assets/templates/ros_node.tmpl");
pub const WIRING_MANIFEST_TEMPLATE: &str = include_str!("../assets/templates/wiring_manifest.tmpl");

pub const PROMPT_EVENT_CHAIN: &str = include_str!("../assets/prompts/event_chain.txt");
pub const PROMPT_FUNCTION_CODE: &str = include_str!("../assets/prompts/function_code.txt");
pub const PROMPT_INSTANCE_MODEL: &str = include_str!("../assets/prompts/instance_model.txt");
pub const PROMPT_CONSTRAINTS: &str = include_str!("../assets/prompts/constraints.txt");
/// Hand-written two-node example for the instance-model prompt (not from the AEB case).
pub const ONE_SHOT_INSTANCE: &str = include_str!("../assets/prompts/one_shot_instance.json");

/// Subprocess driver that hosts generated Python component classes.
pub const PYTHON_DRIVER: &str = include_str!("../assets/python/driver.py");
