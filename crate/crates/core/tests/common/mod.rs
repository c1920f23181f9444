//! Replay fixtures authored from the readable sources in
//! `tests/fixtures/responses`. `BLESS=1` rewrites the committed JSON.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use autochain::agents::{function_code_prompt, ChainInputs, Fixture};
use autochain::assets;
use autochain::ingest::{parse_event_chain, EventChainDescription};

pub const CAPTURED: &str = "2026-10-18 (hand-authored)";

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn source(name: &str) -> String {
    std::fs::read_to_string(fixtures_dir().join("responses").join(name)).unwrap()
}

#[derive(Clone, Copy)]
pub enum Chain {
    Ok,
    /// Braking_Decision publishes nothing.
    NoOutput,
    /// Carla_Vehicle_Control subscribes to nothing.
    NoInput,
    Prose,
}

fn chain(c: Chain) -> Option<EventChainDescription> {
    let mut d = parse_event_chain(assets::AEB_EVENT_CHAIN).unwrap();
    match c {
        Chain::Ok => {}
        Chain::NoOutput => d.components[2].output.clear(),
        Chain::NoInput => d.components[3].input.clear(),
        Chain::Prose => return None,
    }
    Some(d)
}

/// A replay fixture for one run: chain response plus code responses for
/// TTC_Calculation and Braking_Decision.
pub fn run_fixture(backend: &str, c: Chain, ttc: &str, braking: &str) -> Fixture {
    let inputs = ChainInputs::aeb();
    let mut f = Fixture::new(backend, CAPTURED);
    let prompt = inputs.event_chain_prompt().unwrap();
    let Some(desc) = chain(c) else {
        f.insert(&prompt, source("prose.md"));
        return f;
    };
    f.insert(
        &prompt,
        format!("Here is the event chain description.\n\n```json\n{}```\n", desc.to_json_pretty()),
    );
    for (name, file) in [("TTC_Calculation", ttc), ("Braking_Decision", braking)] {
        let p = function_code_prompt(desc.component(name).unwrap()).unwrap();
        f.insert(&p, format!("```python\n{}```\n", source(file)));
    }
    f
}

/// (backend, runs) for every committed evaluation fixture set.
pub fn eval_sets() -> Vec<(&'static str, Vec<Fixture>)> {
    let ok = |b| run_fixture(b, Chain::Ok, "ttc_ok.py", "braking_ok.py");
    vec![
        (
            "engineered",
            vec![
                ok("engineered"),
                run_fixture("engineered", Chain::NoOutput, "ttc_ok.py", "braking_ok.py"),
                ok("engineered"),
                run_fixture("engineered", Chain::NoInput, "ttc_ok.py", "braking_ok.py"),
                ok("engineered"),
            ],
        ),
        (
            "sabotaged",
            (0..5)
                .map(|_| run_fixture("sabotaged", Chain::Ok, "ttc_ok.py", "braking_late.py"))
                .collect(),
        ),
        (
            "codefail",
            vec![
                ok("codefail"),
                run_fixture("codefail", Chain::Ok, "ttc_ok.py", "braking_no_execute.py"),
                ok("codefail"),
                run_fixture("codefail", Chain::Ok, "ttc_wrong_signature.py", "braking_ok.py"),
                run_fixture("codefail", Chain::Prose, "", ""),
            ],
        ),
    ]
}

pub fn aeb_replay() -> Fixture {
    run_fixture("replay", Chain::Ok, "ttc_ok.py", "braking_ok.py")
}

/// Every committed fixture file with its expected content.
pub fn expected_files() -> Vec<(PathBuf, String)> {
    let dir = fixtures_dir();
    let mut out = vec![(dir.join("aeb_replay.json"), aeb_replay().to_json_pretty())];
    for (backend, runs) in eval_sets() {
        for (i, f) in runs.into_iter().enumerate() {
            out.push((
                dir.join("eval").join(backend).join(format!("run_{}.json", i + 1)),
                f.to_json_pretty(),
            ));
        }
    }
    out
}
