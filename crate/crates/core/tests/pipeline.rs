use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use autochain::agents::Fixture;
use autochain::pipeline::{
    BackendConfig, BehaviorSource, CodeSource, Pipeline, PipelineConfig, PipelineError, StageStatus,
};
use tempfile::TempDir;

fn core() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn config(out: &Path) -> PipelineConfig {
    let text = serde_json::json!({
        "requirements": core().join("assets/aeb/requirements.md"),
        "components": core().join("assets/aeb/components.json"),
        "signals": core().join("assets/aeb/signals.json"),
        "function_code": "agent",
        "backends": {
            "replay": {"kind": "replay", "fixture": core().join("tests/fixtures/aeb_replay.json")}
        },
        "backend": "replay",
        "strict": true,
        "out": out,
    });
    serde_json::from_value(text).unwrap()
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_aeb_run() {
    let tmp = TempDir::new().unwrap();
    let report = Pipeline::new(config(tmp.path())).unwrap().run().unwrap();
    assert_eq!(report.exit_code, 0, "{report:?}");
    assert!(report.stages.iter().all(|s| s.status == StageStatus::Ok));
    assert_eq!(report.stages.len(), 6);

    let generated = files(&tmp.path().join("generated"));
    let nodes: Vec<_> = generated.keys().filter(|k| k.ends_with("_node.py")).collect();
    assert_eq!(nodes.len(), 4);
    assert!(generated.contains_key("wiring_manifest.json"));

    let code = files(&tmp.path().join("function_code"));
    assert_eq!(
        code.keys().cloned().collect::<Vec<_>>(),
        ["Braking_Decision.py", "TTC_Calculation.py"]
    );

    assert_eq!(report.scenarios.len(), 3);
    assert!(report.scenarios.iter().all(|s| s.safe && s.brake_in_range));
    let validation = report.validation.as_ref().unwrap();
    assert!(validation.all_pass());

    // paths in the report are relative to the output directory
    let text = fs::read_to_string(tmp.path().join("report.json")).unwrap();
    assert!(!text.contains(&tmp.path().display().to_string()));
    assert!(text.contains("simulation/v0_10.0/trace.csv"));
}

#[test]
fn generated_behaviors_drive_the_scenario() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config(tmp.path());
    cfg.behaviors = BehaviorSource::Generated;
    let report = Pipeline::new(cfg).unwrap().run().unwrap();
    assert_eq!(report.exit_code, 0, "{report:?}");
    assert!(report.scenarios.iter().all(|s| s.safe));
}

#[test]
fn mutated_frequency_halts_at_gate() {
    let tmp = TempDir::new().unwrap();
    // leftovers from an earlier good run must not survive the gate
    fs::create_dir_all(tmp.path().join("generated")).unwrap();
    fs::write(tmp.path().join("generated/stale_node.py"), "x").unwrap();
    fs::create_dir_all(tmp.path().join("function_code")).unwrap();

    let mut cfg = config(tmp.path());
    cfg.frequency.overrides.insert("TTC_Calculation".into(), 50.0);
    let p = Pipeline::new(cfg).unwrap();
    let report = p.run().unwrap();
    assert_eq!(report.exit_code, 2);
    let status: Vec<_> = report.stages.iter().map(|s| (s.stage.as_str(), s.status)).collect();
    assert_eq!(status[2], ("validate", StageStatus::Failed));
    assert!(status[3..].iter().all(|(_, s)| *s == StageStatus::Skipped));
    assert!(!tmp.path().join("generated").exists());
    assert!(!tmp.path().join("function_code").exists());
    assert!(!report.validation.unwrap().all_pass());

    // generate on its own also refuses
    assert!(matches!(p.generate(), Err(PipelineError::Gate { failed: 1 })));
    assert!(!tmp.path().join("generated").exists());
}

#[test]
fn missing_fixture_fails_function_code_stage() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.json");
    fs::write(&empty, Fixture::new("replay", "never").to_json_pretty()).unwrap();
    let mut cfg = config(&tmp.path().join("out"));
    cfg.event_chain = Some(core().join("assets/aeb/event_chain.json"));
    cfg.backends.insert("replay".into(), BackendConfig::Replay { fixture: empty });
    let report = Pipeline::new(cfg).unwrap().run().unwrap();
    assert_eq!(report.exit_code, 3);
    let fc = report.stages.iter().find(|s| s.stage == "function_code").unwrap();
    assert_eq!(fc.status, StageStatus::Failed);
    assert!(fc.message.as_deref().unwrap().contains("fixture"), "{fc:?}");
    assert_eq!(report.stages.last().unwrap().status, StageStatus::Skipped);
}

#[test]
fn reruns_are_byte_identical() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    Pipeline::new(config(a.path())).unwrap().run().unwrap();
    Pipeline::new(config(b.path())).unwrap().run().unwrap();
    let (fa, fb) = (files(a.path()), files(b.path()));
    assert_eq!(fa.keys().collect::<Vec<_>>(), fb.keys().collect::<Vec<_>>());
    for (k, v) in &fa {
        assert!(fb[k] == *v, "{k} differs");
    }
}

#[test]
fn stages_rerun_from_disk() {
    let tmp = TempDir::new().unwrap();
    let p = Pipeline::new(config(tmp.path())).unwrap();
    p.run().unwrap();
    let before = files(tmp.path());

    p.model().unwrap();
    p.validate().unwrap();
    p.generate().unwrap();
    p.generate().unwrap();
    p.simulate().unwrap();
    let after = files(tmp.path());
    for (k, v) in &before {
        assert!(after[k] == *v, "{k} changed on rerun");
    }
}

#[test]
fn reference_code_source_skips_the_backend() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config(tmp.path());
    cfg.function_code = CodeSource::Reference;
    cfg.event_chain = Some(core().join("assets/aeb/event_chain.json"));
    cfg.backends.clear();
    cfg.backend = None;
    let report = Pipeline::new(cfg).unwrap().run().unwrap();
    assert_eq!(report.exit_code, 0, "{report:?}");
    assert!(!tmp.path().join("function_code").exists());
}

#[test]
fn config_paths_resolve_and_must_exist() {
    let tmp = TempDir::new().unwrap();
    let dir = tmp.path();
    for f in ["requirements.md", "components.json", "signals.json"] {
        fs::copy(core().join("assets/aeb").join(f), dir.join(f)).unwrap();
    }
    let cfg_path = dir.join("pipeline.json");
    fs::write(
        &cfg_path,
        r#"{"requirements": "requirements.md", "components": "components.json",
            "signals": "signals.json", "event_chain": "chain.json"}"#,
    )
    .unwrap();
    let cfg = PipelineConfig::load(&cfg_path).unwrap();
    assert_eq!(cfg.requirements, dir.join("requirements.md"));
    assert_eq!(cfg.out, dir.join("out"));
    let err = Pipeline::new(cfg).err().unwrap();
    assert!(err.to_string().contains("chain.json"), "{err}");
    assert_eq!(err.exit_code(), 1);

    fs::write(&cfg_path, r#"{"requirements": "requirements.md", "bogus": 1}"#).unwrap();
    assert!(matches!(PipelineConfig::load(&cfg_path), Err(PipelineError::Config(_))));
}

#[test]
fn unknown_backend_is_a_backend_failure() {
    let tmp = TempDir::new().unwrap();
    let p = Pipeline::new(config(tmp.path())).unwrap().with_backend(Some("nope".into()));
    let err = p.ingest().unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("nope"));
}

#[test]
fn eval_replays_fixture_sets() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = config(tmp.path());
    cfg.eval.fixtures = Some(core().join("tests/fixtures/eval"));
    let report = Pipeline::new(cfg)
        .unwrap()
        .eval(&["engineered".into(), "replay".into()], 5)
        .unwrap();
    let eng = report.backend("engineered").unwrap();
    assert_eq!(eng.runs, 5);
    let replay = report.backend("replay").unwrap();
    assert!(replay.outcomes.iter().all(|o| o.overall));
    assert!(tmp.path().join("eval_report.json").exists());
}
