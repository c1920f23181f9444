use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::constraints::evaluate;
use crate::ingest::{diff_components, lower_to_instance, EventChainDescription};
use crate::model::InstanceModel;
use crate::sim::{load_wiring, run_scenario, BehaviorRegistry, WiringMode};
use crate::template::{parse_template, render};
use crate::{assets, Scenario};

use super::backend::{BackendError, LlmBackend, ReplayBackend};
use super::extract::{check_signature, Artifact, ArtifactKind, CodeArtifact};
use super::python::PythonBehavior;
use super::{ask, function_code_prompt, ChainInputs};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub backends: Vec<String>,
    pub runs: usize,
    /// Holds `<backend>/run_<i>.json` replay fixtures.
    pub fixtures_dir: PathBuf,
    /// Initial ego speeds; a run's scenario passes only if every one is safe.
    pub speeds: Vec<f64>,
    pub distance: f64,
}

impl EvalConfig {
    pub fn new(backends: Vec<String>, runs: usize, fixtures_dir: impl Into<PathBuf>) -> Self {
        EvalConfig {
            backends,
            runs,
            fixtures_dir: fixtures_dir.into(),
            speeds: vec![5.0, 10.0, 15.0],
            distance: 50.0,
        }
    }
}

pub fn fixture_path(dir: &Path, backend: &str, run: usize) -> PathBuf {
    dir.join(backend).join(format!("run_{run}.json"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub run: usize,
    pub model_valid: bool,
    pub code_valid: bool,
    /// `None` when the scenario was not reached.
    pub scenario_pass: Option<bool>,
    pub overall: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BackendReport {
    pub backend: String,
    pub runs: usize,
    pub model_valid: usize,
    pub code_valid: usize,
    pub overall: usize,
    pub model_valid_rate: f64,
    pub code_valid_rate: f64,
    pub overall_rate: f64,
    pub outcomes: Vec<RunOutcome>,
}

impl BackendReport {
    fn new(backend: &str, outcomes: Vec<RunOutcome>) -> Self {
        let runs = outcomes.len();
        let count = |f: fn(&RunOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
        let (m, c, o) = (count(|o| o.model_valid), count(|o| o.code_valid), count(|o| o.overall));
        let rate = |n: usize| if runs == 0 { 0.0 } else { n as f64 / runs as f64 };
        BackendReport {
            backend: backend.to_string(),
            runs,
            model_valid: m,
            code_valid: c,
            overall: o,
            model_valid_rate: rate(m),
            code_valid_rate: rate(c),
            overall_rate: rate(o),
            outcomes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct EvalReport {
    pub backends: Vec<BackendReport>,
}

impl EvalReport {
    pub fn backend(&self, name: &str) -> Option<&BackendReport> {
        self.backends.iter().find(|b| b.backend == name)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<16} {:>4} {:>14} {:>14} {:>14}", "backend", "runs", "model-valid", "code-valid", "overall")?;
        for b in &self.backends {
            let cell = |n: usize, r: f64| format!("{n}/{} {:>5.1}%", b.runs, r * 100.0);
            writeln!(
                f,
                "{:<16} {:>4} {:>14} {:>14} {:>14}",
                b.backend,
                b.runs,
                cell(b.model_valid, b.model_valid_rate),
                cell(b.code_valid, b.code_valid_rate),
                cell(b.overall, b.overall_rate)
            )?;
        }
        Ok(())
    }
}

/// One complete development run against `backend`. Code generation depends
/// only on the event-chain description, so a chain that extracts but fails
/// validation still has its code scored; a chain that does not extract fails
/// every later stage.
pub fn evaluate_run(backend: &dyn LlmBackend, inputs: &ChainInputs, cfg: &EvalConfig, run: usize) -> RunOutcome {
    let mut out = RunOutcome {
        run,
        model_valid: false,
        code_valid: false,
        scenario_pass: None,
        overall: false,
        notes: Vec::new(),
    };
    let desc = match inputs
        .event_chain_prompt()
        .and_then(|p| ask(backend, &p, ArtifactKind::EventChain))
    {
        Ok(r) => match r.artifact {
            Artifact::EventChain(d) => d,
            _ => unreachable!("event chain kind"),
        },
        Err(e) => {
            out.notes.push(format!("event chain: {e}"));
            return out;
        }
    };

    let model = model_stage(&desc, inputs, &mut out.notes);
    out.model_valid = model.is_some();

    let diff = diff_components(&desc, &inputs.registry);
    let mut codes = Vec::new();
    out.code_valid = true;
    for name in &diff.to_generate {
        let component = desc.component(name).expect("diff names come from the chain");
        let result = function_code_prompt(component)
            .and_then(|p| ask(backend, &p, ArtifactKind::Code))
            .and_then(|r| match r.artifact {
                Artifact::Code(c) => check_signature(&c, component).map(|_| c).map_err(Into::into),
                _ => unreachable!("code kind"),
            });
        match result {
            Ok(c) => codes.push(c),
            Err(e) => {
                out.code_valid = false;
                out.notes.push(format!("code {name}: {e}"));
            }
        }
    }

    if let (Some(model), true) = (model, out.code_valid) {
        let pass = scenario_stage(&model, &diff.existing, codes, cfg, &mut out.notes);
        out.scenario_pass = Some(pass);
        out.overall = pass;
    }
    out
}

fn model_stage(desc: &EventChainDescription, inputs: &ChainInputs, notes: &mut Vec<String>) -> Option<InstanceModel> {
    let model = match lower_to_instance(desc, &inputs.registry, &inputs.frequency, inputs.metamodel.clone()) {
        Ok(m) => m,
        Err(e) => {
            notes.push(format!("model: {e}"));
            return None;
        }
    };
    let report = evaluate(&inputs.constraints, &model);
    if report.all_pass() {
        Some(model)
    } else {
        for f in report.failures() {
            notes.push(format!("constraint {} {} on {}", f.invariant, f.verdict, f.object));
        }
        None
    }
}

fn scenario_stage(
    model: &InstanceModel,
    existing: &[String],
    codes: Vec<CodeArtifact>,
    cfg: &EvalConfig,
    notes: &mut Vec<String>,
) -> bool {
    let manifest = parse_template(assets::WIRING_MANIFEST_TEMPLATE)
        .and_then(|t| render(&t, model))
        .map_err(|e| e.to_string())
        .and_then(|out| out.get("wiring_manifest.json").map(str::to_string).ok_or("no manifest".into()));
    let manifest = match manifest {
        Ok(m) => m,
        Err(e) => {
            notes.push(format!("wiring: {e}"));
            return false;
        }
    };
    let base = Scenario::new(1.0, cfg.distance);
    let strict = WiringMode::Strict {
        external: base.world.published(),
    };
    let graph = match load_wiring(&manifest, &strict) {
        Ok(g) => g,
        Err(e) => {
            notes.push(format!("wiring: {e}"));
            return false;
        }
    };
    let reference = BehaviorRegistry::<f64>::reference();
    let mut registry = BehaviorRegistry::new();
    for name in existing {
        if reference.contains(name) {
            registry.register(name.clone(), move |n| {
                BehaviorRegistry::<f64>::reference()
                    .instantiate(n)
                    .expect("registered above")
            });
        }
    }
    for code in codes {
        registry.register(code.class_name.clone(), PythonBehavior::factory(code));
    }
    let mut pass = true;
    for &v0 in &cfg.speeds {
        let sc = Scenario { v0, ..base.clone() };
        match run_scenario(&graph, &registry, &sc) {
            Ok(t) if t.safe() => {}
            Ok(t) => {
                pass = false;
                notes.push(format!(
                    "scenario v0={v0}: unsafe (final gap {:.3} m, speed {:.3} m/s, collided {})",
                    t.final_gap, t.final_speed, t.collided
                ));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("scenario v0={v0}: {e}"));
            }
        }
    }
    pass
}

/// Runs `runs` evaluations per backend, obtaining each run's backend from
/// `open(backend, run)`. An open failure is a failed run, never an abort.
pub fn run_evaluation_with(
    cfg: &EvalConfig,
    inputs: &ChainInputs,
    mut open: impl FnMut(&str, usize) -> Result<Box<dyn LlmBackend>, BackendError>,
) -> EvalReport {
    let mut report = EvalReport::default();
    for name in &cfg.backends {
        let outcomes = (1..=cfg.runs)
            .map(|run| match open(name, run) {
                Ok(b) => evaluate_run(b.as_ref(), inputs, cfg, run),
                Err(e) => RunOutcome {
                    run,
                    model_valid: false,
                    code_valid: false,
                    scenario_pass: None,
                    overall: false,
                    notes: vec![format!("backend: {e}")],
                },
            })
            .collect();
        report.backends.push(BackendReport::new(name, outcomes));
    }
    report
}

/// Replay evaluation over `<fixtures_dir>/<backend>/run_<i>.json`.
pub fn run_evaluation(cfg: &EvalConfig, inputs: &ChainInputs) -> EvalReport {
    run_evaluation_with(cfg, inputs, |backend, run| {
        ReplayBackend::load(&fixture_path(&cfg.fixtures_dir, backend, run)).map(|b| Box::new(b) as Box<dyn LlmBackend>)
    })
}
