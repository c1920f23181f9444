//! The end-to-end workflow: event chain -> diff -> instance model ->
//! validation gate -> code generation -> function code -> simulation ->
//! report. Every stage reads and writes files under the output directory,
//! so each one can also run on its own.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    ask, check_signature, function_code_prompt, instance_model_prompt, run_evaluation_with, AgentError, Artifact,
    ArtifactKind, BackendError, ChainInputs, EvalConfig, EvalReport, Fixture, HttpChatBackend, HttpConfig,
    LlmBackend, PythonBehavior, ReplayBackend,
};
use crate::assets;
use crate::constraints::{evaluate, parse_constraints, ValidationReport};
use crate::ingest::{
    diff_components, lower_to_instance, parse_component_registry, parse_event_chain, ComponentDiff,
    EventChainDescription, FrequencyPolicy, IngestError,
};
use crate::model::{format_float, load_instance, load_metamodel, serialize_instance, InstanceModel, ModelError};
use crate::sim::{
    load_wiring, messages_jsonl, metrics_json, run_scenario, trace_csv, SimError, WiringMode,
    WorldTopics,
};
use crate::template::{parse_template, render, TemplateError};
use crate::{Registry, Scenario, Trace};

pub const EVENT_CHAIN_FILE: &str = "event_chain.json";
pub const DIFF_FILE: &str = "diff.json";
pub const INSTANCE_FILE: &str = "instance.json";
pub const VALIDATION_FILE: &str = "validation.json";
pub const GENERATED_DIR: &str = "generated";
pub const FUNCTION_CODE_DIR: &str = "function_code";
pub const SIMULATION_DIR: &str = "simulation";
pub const REPORT_FILE: &str = "report.json";
pub const RECORDED_FIXTURE_FILE: &str = "recorded_fixture.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("validation gate: {failed} invariant check(s) did not pass")]
    Gate { failed: usize },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scenario unsafe: {0}")]
    Unsafe(String),
}

impl From<BackendError> for PipelineError {
    fn from(e: BackendError) -> Self {
        PipelineError::Agent(e.into())
    }
}

impl PipelineError {
    /// 2 gate, 3 agent/backend, 4 simulation, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Gate { .. } => 2,
            PipelineError::Agent(_) => 3,
            PipelineError::Sim(_) | PipelineError::Unsafe(_) => 4,
            _ => 1,
        }
    }
}

fn io_err(path: &Path, e: impl ToString) -> PipelineError {
    PipelineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<String, PipelineError> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn remove_dir(path: &Path) -> Result<(), PipelineError> {
    match fs::remove_dir_all(path) {
        Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(io_err(path, e)),
        _ => Ok(()),
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelSource {
    #[default]
    Deterministic,
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeSource {
    /// Ask the backend for every component that is not in the registry.
    Agent,
    /// Skip code acquisition; simulate with reference behaviors.
    #[default]
    Reference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BehaviorSource {
    #[default]
    Reference,
    /// Generated function code for new components, reference for reused ones.
    Generated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum BackendConfig {
    Replay {
        fixture: PathBuf,
    },
    Http {
        endpoint: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
        #[serde(default)]
        temperature: f64,
        #[serde(default)]
        max_tokens: Option<u32>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub speeds: Vec<f64>,
    pub distance: f64,
    pub a_max: f64,
    pub dt: f64,
    pub duration: f64,
    pub sensor_hz: f64,
    pub hold_speed: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let sc = Scenario::new(10.0, 50.0);
        ScenarioConfig {
            speeds: vec![5.0, 10.0, 15.0],
            distance: sc.d0,
            a_max: sc.a_max,
            dt: sc.dt,
            duration: sc.duration,
            sensor_hz: sc.sensor_hz,
            hold_speed: sc.hold_speed,
        }
    }
}

impl ScenarioConfig {
    pub fn scenario(&self, v0: f64) -> Scenario {
        Scenario {
            v0,
            d0: self.distance,
            a_max: self.a_max,
            dt: self.dt,
            duration: self.duration,
            sensor_hz: self.sensor_hz,
            hold_speed: self.hold_speed,
            world: WorldTopics::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Directory of `<backend>/run_<i>.json` replay fixtures.
    pub fixtures: Option<PathBuf>,
    pub backends: Vec<String>,
    pub runs: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            fixtures: None,
            backends: Vec::new(),
            runs: 5,
        }
    }
}

/// Pipeline configuration. Relative paths resolve against the config file's
/// directory. Metamodel, constraints and templates default to the shipped ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub requirements: PathBuf,
    pub components: PathBuf,
    pub signals: PathBuf,
    #[serde(default)]
    pub metamodel: Option<PathBuf>,
    #[serde(default)]
    pub constraints: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<Vec<PathBuf>>,
    /// Read the event chain from this file instead of asking the backend.
    #[serde(default)]
    pub event_chain: Option<PathBuf>,
    #[serde(default)]
    pub instance_model: ModelSource,
    #[serde(default)]
    pub function_code: CodeSource,
    #[serde(default)]
    pub behaviors: BehaviorSource,
    #[serde(default)]
    pub backends: BTreeMap<String, BackendConfig>,
    #[serde(default)]
    pub backend: Option<String>,
    #[serde(default)]
    pub frequency: FrequencyPolicy,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub eval: EvalSection,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = read(path)?;
        let mut cfg: PipelineConfig =
            serde_json::from_str(&text).map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.requirements);
        fix(&mut self.components);
        fix(&mut self.signals);
        fix(&mut self.out);
        for p in [&mut self.metamodel, &mut self.constraints, &mut self.event_chain, &mut self.eval.fixtures]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        for p in self.templates.iter_mut().flatten() {
            fix(p);
        }
        for b in self.backends.values_mut() {
            if let BackendConfig::Replay { fixture } = b {
                fix(fixture);
            }
        }
    }

    /// Every configured input path must exist.
    pub fn check_paths(&self) -> Result<(), PipelineError> {
        let mut paths = vec![&self.requirements, &self.components, &self.signals];
        paths.extend(self.metamodel.iter());
        paths.extend(self.constraints.iter());
        paths.extend(self.event_chain.iter());
        paths.extend(self.templates.iter().flatten());
        for b in self.backends.values() {
            if let BackendConfig::Replay { fixture } = b {
                paths.push(fixture);
            }
        }
        match paths.into_iter().find(|p| !p.exists()) {
            Some(p) => Err(PipelineError::Config(format!("{} does not exist", p.display()))),
            None => Ok(()),
        }
    }
}

/// A configured backend; HTTP backends may record their exchanges.
pub enum Backend {
    Replay(ReplayBackend),
    Http(HttpChatBackend),
}

impl LlmBackend for Backend {
    fn name(&self) -> &str {
        match self {
            Backend::Replay(b) => b.name(),
            Backend::Http(b) => b.name(),
        }
    }

    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        match self {
            Backend::Replay(b) => b.complete(prompt),
            Backend::Http(b) => b.complete(prompt),
        }
    }
}

impl Backend {
    pub fn open(name: &str, cfg: &BackendConfig, record: bool) -> Result<Self, BackendError> {
        match cfg {
            BackendConfig::Replay { fixture } => ReplayBackend::load(fixture).map(Backend::Replay),
            BackendConfig::Http {
                endpoint,
                model,
                api_key_env,
                temperature,
                max_tokens,
            } => {
                let mut h = HttpConfig::new(name, endpoint.clone(), model.clone());
                h.api_key_env = api_key_env.clone();
                h.temperature = *temperature;
                h.max_tokens = *max_tokens;
                let b = HttpChatBackend::new(h)?;
                Ok(Backend::Http(if record { b.recording("recorded") } else { b }))
            }
        }
    }

    pub fn recorded(&self) -> Option<Fixture> {
        match self {
            Backend::Http(b) => b.recorded(),
            Backend::Replay(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub status: StageStatus,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioSummary {
    pub v0: f64,
    pub safe: bool,
    pub collided: bool,
    pub final_speed: f64,
    pub final_gap: f64,
    pub engagement_time: Option<f64>,
    pub max_brake_force: f64,
    pub brake_in_range: bool,
}

impl ScenarioSummary {
    fn new(v0: f64, t: &Trace) -> Self {
        ScenarioSummary {
            v0,
            safe: t.safe(),
            collided: t.collided,
            final_speed: t.final_speed,
            final_gap: t.final_gap,
            engagement_time: t.engagement().map(|r| r.time),
            max_brake_force: t.records.iter().map(|r| r.brake_force).fold(0.0, f64::max),
            brake_in_range: t.brake_in_range(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineReport {
    pub stages: Vec<StageReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationReport>,
    pub scenarios: Vec<ScenarioSummary>,
    pub exit_code: i32,
}

impl PipelineReport {
    pub fn to_json_pretty(&self) -> String {
        pretty(self)
    }
}

pub struct Pipeline {
    pub cfg: PipelineConfig,
    backend_override: Option<String>,
    record: bool,
    backend: std::cell::OnceCell<Result<Backend, BackendError>>,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        cfg.check_paths()?;
        Ok(Pipeline {
            cfg,
            backend_override: None,
            record: false,
            backend: std::cell::OnceCell::new(),
        })
    }

    pub fn with_backend(mut self, name: Option<String>) -> Self {
        self.backend_override = name;
        self
    }

    pub fn recording(mut self, on: bool) -> Self {
        self.record = on;
        self
    }

    pub fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.cfg.out.join(rel)
    }

    fn backend(&self) -> Result<&Backend, PipelineError> {
        let r = self.backend.get_or_init(|| {
            let name = self
                .backend_override
                .clone()
                .or_else(|| self.cfg.backend.clone())
                .ok_or_else(|| BackendError::Transport("no backend selected".into()))?;
            let cfg = self
                .cfg
                .backends
                .get(&name)
                .ok_or_else(|| BackendError::Transport(format!("backend `{name}` is not configured")))?;
            Backend::open(&name, cfg, self.record)
        });
        r.as_ref().map_err(|e| e.clone().into())
    }

    pub fn inputs(&self) -> Result<ChainInputs, PipelineError> {
        let components_text = read(&self.cfg.components)?;
        let metamodel = match &self.cfg.metamodel {
            Some(p) => load_metamodel(&read(p)?)?,
            None => load_metamodel(assets::EVENT_CHAIN_METAMODEL)?,
        };
        let constraints_text = match &self.cfg.constraints {
            Some(p) => read(p)?,
            None => assets::EVENT_CHAIN_CONSTRAINTS.to_string(),
        };
        let constraints = parse_constraints(&constraints_text)
            .map_err(|e| PipelineError::Config(format!("constraints: {e}")))?;
        Ok(ChainInputs {
            requirements: read(&self.cfg.requirements)?,
            registry: parse_component_registry(&components_text)?,
            components_text,
            signals_text: read(&self.cfg.signals)?,
            metamodel: Arc::new(metamodel),
            constraints,
            frequency: self.cfg.frequency.clone(),
        })
    }

    fn metamodel_text(&self) -> Result<String, PipelineError> {
        match &self.cfg.metamodel {
            Some(p) => read(p),
            None => Ok(assets::EVENT_CHAIN_METAMODEL.to_string()),
        }
    }

    fn templates(&self) -> Result<Vec<(String, String)>, PipelineError> {
        match &self.cfg.templates {
            None => Ok(vec![
                ("ros_node.tmpl".into(), assets::ROS_NODE_TEMPLATE.into()),
                ("wiring_manifest.tmpl".into(), assets::WIRING_MANIFEST_TEMPLATE.into()),
            ]),
            Some(paths) => paths
                .iter()
                .map(|p| Ok((p.display().to_string(), read(p)?)))
                .collect(),
        }
    }

    fn load_chain(&self) -> Result<EventChainDescription, PipelineError> {
        Ok(parse_event_chain(&read(&self.path(EVENT_CHAIN_FILE))?)?)
    }

    fn load_model(&self, inputs: &ChainInputs) -> Result<InstanceModel, PipelineError> {
        Ok(load_instance(&read(&self.path(INSTANCE_FILE))?, inputs.metamodel.clone())?)
    }

    /// Event chain from file or agent, plus the reuse diff.
    pub fn ingest(&self) -> Result<Vec<String>, PipelineError> {
        let inputs = self.inputs()?;
        let desc = match &self.cfg.event_chain {
            Some(p) => parse_event_chain(&read(p)?)?,
            None => {
                let prompt = inputs.event_chain_prompt()?;
                match ask(self.backend()?, &prompt, ArtifactKind::EventChain)?.artifact {
                    Artifact::EventChain(d) => d,
                    _ => unreachable!("event chain kind"),
                }
            }
        };
        write(&self.path(EVENT_CHAIN_FILE), &desc.to_json_pretty())?;
        write(&self.path(DIFF_FILE), &pretty(&diff_components(&desc, &inputs.registry)))?;
        Ok(vec![EVENT_CHAIN_FILE.into(), DIFF_FILE.into()])
    }

    pub fn model(&self) -> Result<Vec<String>, PipelineError> {
        let inputs = self.inputs()?;
        let desc = self.load_chain()?;
        let model = match self.cfg.instance_model {
            ModelSource::Deterministic => {
                lower_to_instance(&desc, &inputs.registry, &inputs.frequency, inputs.metamodel.clone())?
            }
            ModelSource::Agent => {
                let prompt = instance_model_prompt(&self.metamodel_text()?, &desc.to_json_pretty())?;
                match ask(self.backend()?, &prompt, ArtifactKind::InstanceModel)?.artifact {
                    Artifact::InstanceModel(text) => load_instance(&text, inputs.metamodel.clone())?,
                    _ => unreachable!("instance model kind"),
                }
            }
        };
        write(&self.path(INSTANCE_FILE), &serialize_instance(&model))?;
        Ok(vec![INSTANCE_FILE.into()])
    }

    /// Writes the validation report. On any non-passing invariant, removes
    /// previously generated code and fails with the gate error.
    pub fn validate(&self) -> Result<(Vec<String>, ValidationReport), PipelineError> {
        let inputs = self.inputs()?;
        let model = self.load_model(&inputs)?;
        let report = evaluate(&inputs.constraints, &model);
        write(&self.path(VALIDATION_FILE), &report.to_json_pretty())?;
        if !report.all_pass() {
            remove_dir(&self.path(GENERATED_DIR))?;
            remove_dir(&self.path(FUNCTION_CODE_DIR))?;
            return Err(PipelineError::Gate {
                failed: report.failures().count(),
            });
        }
        Ok((vec![VALIDATION_FILE.into()], report))
    }

    /// Renders every template; refuses to run on a model that fails validation.
    pub fn generate(&self) -> Result<Vec<String>, PipelineError> {
        let inputs = self.inputs()?;
        let model = self.load_model(&inputs)?;
        let failed = evaluate(&inputs.constraints, &model).failures().count();
        if failed > 0 {
            return Err(PipelineError::Gate { failed });
        }
        let dir = self.path(GENERATED_DIR);
        remove_dir(&dir)?;
        let mut artifacts = Vec::new();
        for (_, text) in self.templates()? {
            let out = render(&parse_template(&text)?, &model)?;
            for f in &out.files {
                write(&dir.join(&f.name), &f.content)?;
                artifacts.push(format!("{GENERATED_DIR}/{}", f.name));
            }
        }
        Ok(artifacts)
    }

    /// Asks for code of every component to generate; writes `<Name>.py`.
    pub fn function_code(&self) -> Result<Vec<String>, PipelineError> {
        if self.cfg.function_code == CodeSource::Reference {
            return Ok(Vec::new());
        }
        let inputs = self.inputs()?;
        let desc = self.load_chain()?;
        let diff = diff_components(&desc, &inputs.registry);
        let dir = self.path(FUNCTION_CODE_DIR);
        remove_dir(&dir)?;
        let mut artifacts = Vec::new();
        for name in &diff.to_generate {
            let component = desc.component(name).expect("diff names come from the chain");
            let prompt = function_code_prompt(component)?;
            let code = match ask(self.backend()?, &prompt, ArtifactKind::Code)?.artifact {
                Artifact::Code(c) => c,
                _ => unreachable!("code kind"),
            };
            check_signature(&code, component).map_err(AgentError::from)?;
            write(&dir.join(format!("{name}.py")), &code.source)?;
            artifacts.push(format!("{FUNCTION_CODE_DIR}/{name}.py"));
        }
        Ok(artifacts)
    }

    fn registry(&self) -> Result<Registry, PipelineError> {
        let mut registry = Registry::reference();
        if self.cfg.behaviors == BehaviorSource::Reference {
            return Ok(registry);
        }
        let inputs = self.inputs()?;
        let diff: ComponentDiff = diff_components(&self.load_chain()?, &inputs.registry);
        for name in diff.to_generate {
            let path = self.path(FUNCTION_CODE_DIR).join(format!("{name}.py"));
            let fenced = format!("```python\n{}```\n", read(&path)?);
            match crate::agents::extract_artifact(ArtifactKind::Code, &fenced).map_err(AgentError::from)?.artifact {
                Artifact::Code(c) => {
                    registry.register(name, PythonBehavior::factory(c));
                }
                _ => unreachable!("code kind"),
            }
        }
        Ok(registry)
    }

    /// Runs the scenario at every configured speed. Writes a trace, message
    /// log and metrics sidecar per speed and a summary.
    pub fn simulate(&self) -> Result<(Vec<String>, Vec<ScenarioSummary>), PipelineError> {
        let manifest = read(&self.path(GENERATED_DIR).join("wiring_manifest.json"))?;
        let mode = if self.cfg.strict {
            WiringMode::Strict {
                external: WorldTopics::default().published(),
            }
        } else {
            WiringMode::Lenient
        };
        let graph = load_wiring(&manifest, &mode)?;
        let registry = self.registry()?;
        let dir = self.path(SIMULATION_DIR);
        remove_dir(&dir)?;
        let mut artifacts = Vec::new();
        let mut summaries = Vec::new();
        for &v0 in &self.cfg.scenario.speeds {
            let trace = run_scenario(&graph, &registry, &self.cfg.scenario.scenario(v0))?;
            let sub = format!("v0_{}", format_float(v0));
            for (file, text) in [
                ("trace.csv", trace_csv(&trace)),
                ("messages.jsonl", messages_jsonl(&trace)),
                ("metrics.json", metrics_json(&trace)),
            ] {
                write(&dir.join(&sub).join(file), &text)?;
                artifacts.push(format!("{SIMULATION_DIR}/{sub}/{file}"));
            }
            summaries.push(ScenarioSummary::new(v0, &trace));
        }
        write(&dir.join("summary.json"), &pretty(&summaries))?;
        artifacts.push(format!("{SIMULATION_DIR}/summary.json"));
        if let Some(bad) = summaries.iter().find(|s| !s.safe) {
            return Err(PipelineError::Unsafe(format!(
                "v0={}: final gap {:.3} m, final speed {:.3} m/s, brake in range {}",
                bad.v0, bad.final_gap, bad.final_speed, bad.brake_in_range
            )));
        }
        Ok((artifacts, summaries))
    }

    /// All stages in order; stops at the first failure and always writes the report.
    pub fn run(&self) -> Result<PipelineReport, PipelineError> {
        fs::create_dir_all(&self.cfg.out).map_err(|e| io_err(&self.cfg.out, e))?;
        let mut report = PipelineReport {
            stages: Vec::new(),
            validation: None,
            scenarios: Vec::new(),
            exit_code: 0,
        };
        let stages = ["ingest", "model", "validate", "generate", "function_code", "simulate"];
        let mut failed = false;
        for stage in stages {
            if failed {
                report.stages.push(StageReport {
                    stage: stage.into(),
                    status: StageStatus::Skipped,
                    artifacts: Vec::new(),
                    message: None,
                });
                continue;
            }
            let result = match stage {
                "ingest" => self.ingest(),
                "model" => self.model(),
                "validate" => self.validate().map(|(a, r)| {
                    report.validation = Some(r);
                    a
                }),
                "generate" => self.generate(),
                "function_code" => self.function_code(),
                _ => self.simulate().map(|(a, s)| {
                    report.scenarios = s;
                    a
                }),
            };
            let entry = match result {
                Ok(artifacts) => StageReport {
                    stage: stage.into(),
                    status: StageStatus::Ok,
                    artifacts,
                    message: None,
                },
                Err(e) => {
                    failed = true;
                    report.exit_code = e.exit_code();
                    if let PipelineError::Gate { .. } = e {
                        report.validation = self.gate_report();
                    }
                    StageReport {
                        stage: stage.into(),
                        status: StageStatus::Failed,
                        artifacts: Vec::new(),
                        message: Some(e.to_string()),
                    }
                }
            };
            report.stages.push(entry);
        }
        self.save_recording()?;
        write(&self.path(REPORT_FILE), &report.to_json_pretty())?;
        Ok(report)
    }

    fn gate_report(&self) -> Option<ValidationReport> {
        let inputs = self.inputs().ok()?;
        let model = self.load_model(&inputs).ok()?;
        Some(evaluate(&inputs.constraints, &model))
    }

    /// Writes the recorded HTTP exchanges, if recording was enabled.
    pub fn save_recording(&self) -> Result<(), PipelineError> {
        if let Some(Ok(b)) = self.backend.get() {
            if let Some(f) = b.recorded() {
                write(&self.path(RECORDED_FIXTURE_FILE), &f.to_json_pretty())?;
            }
        }
        Ok(())
    }

    /// Multi-run evaluation. Configured HTTP backends run live, configured
    /// replay backends replay their one fixture for every run, and any other
    /// name replays `<eval.fixtures>/<name>/run_<i>.json`.
    pub fn eval(&self, backends: &[String], runs: usize) -> Result<EvalReport, PipelineError> {
        if runs == 0 {
            return Err(PipelineError::Config("runs must be at least 1".into()));
        }
        let inputs = self.inputs()?;
        let fixtures = self.cfg.eval.fixtures.clone().unwrap_or_else(|| PathBuf::from("."));
        let mut cfg = EvalConfig::new(backends.to_vec(), runs, fixtures.clone());
        cfg.speeds = self.cfg.scenario.speeds.clone();
        cfg.distance = self.cfg.scenario.distance;
        let report = run_evaluation_with(&cfg, &inputs, |name, run| match self.cfg.backends.get(name) {
            Some(c @ BackendConfig::Http { .. }) => {
                Backend::open(name, c, false).map(|b| Box::new(b) as Box<dyn LlmBackend>)
            }
            Some(BackendConfig::Replay { fixture }) => {
                ReplayBackend::load(fixture).map(|b| Box::new(b) as Box<dyn LlmBackend>)
            }
            None => ReplayBackend::load(&crate::agents::fixture_path(&fixtures, name, run))
                .map(|b| Box::new(b) as Box<dyn LlmBackend>),
        });
        write(&self.path("eval_report.json"), &report.to_json_pretty())?;
        Ok(report)
    }
}

