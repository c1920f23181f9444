pub mod assets;
pub mod agents;
pub mod constraints;
pub mod expr;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod sim;
pub mod template;

pub type Scenario = sim::AebScenario<f64>;
pub type Trace = sim::ScenarioTrace<f64>;
pub type Registry = sim::BehaviorRegistry<f64>;
