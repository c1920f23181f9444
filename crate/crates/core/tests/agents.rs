mod common;

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use autochain::agents::{
    extract_artifact, prompt_hash, run_evaluation, run_evaluation_with, ArtifactKind, BackendError, ChainInputs,
    EvalConfig, Fixture, HttpChatBackend, HttpConfig, LlmBackend, PythonBehavior, ReplayBackend, Artifact,
};
use autochain::sim::Behavior;

#[test]
fn fixtures_are_current() {
    let bless = std::env::var_os("BLESS").is_some();
    for (path, want) in common::expected_files() {
        if bless {
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(&path, &want).unwrap();
        } else {
            let got = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert_eq!(got, want, "{} is stale; rerun with BLESS=1", path.display());
        }
    }
}

#[test]
fn event_chain_prompt_shape() {
    let p = ChainInputs::aeb().event_chain_prompt().unwrap();
    assert!(p.starts_with("# Task description\nYou are an automotive software system developer."));
    assert!(p.ends_with("# Generated Event Chain\n"));
    assert!(p.contains("Full brake if TTC < 1.0s"));
    assert!(p.contains("\"Topic Name\": \"/carla/ego_vehicle/lidar\""));
    assert!(!p.contains("{{"));
}

#[test]
fn replay_hit_and_miss() {
    let mut f = Fixture::new("replay", "now");
    f.insert("hello", "world");
    let b = ReplayBackend::new(f);
    assert_eq!(b.complete("hello").unwrap(), "world");
    assert_eq!(
        b.complete("hello!").unwrap_err(),
        BackendError::FixtureMiss {
            backend: "replay".into(),
            hash: prompt_hash("hello!")
        }
    );
}

/// Serves the canned `(status, headers, body)` replies in order and returns
/// the raw requests it saw.
fn canned_server(replies: Vec<(u16, &'static str, String)>) -> (String, thread::JoinHandle<Vec<String>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let handle = thread::spawn(move || {
        let mut seen = Vec::new();
        for (status, headers, body) in replies {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut req_body = vec![0; len];
            reader.read_exact(&mut req_body).unwrap();
            seen.push(head + &String::from_utf8(req_body).unwrap());
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\n{headers}content-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
        seen
    });
    (url, handle)
}

fn chat_body(content: &str) -> String {
    serde_json::json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string()
}

#[test]
fn http_backend_extracts_message_and_records() {
    let (url, server) = canned_server(vec![(200, "", chat_body("```json\n[]\n```"))]);
    std::env::set_var("AUTOCHAIN_TEST_KEY", "sekrit");
    let mut cfg = HttpConfig::new("live", url, "some-model");
    cfg.api_key_env = Some("AUTOCHAIN_TEST_KEY".into());
    let b = HttpChatBackend::new(cfg).unwrap().recording("today");
    assert_eq!(b.complete("prompt text").unwrap(), "```json\n[]\n```");
    let seen = server.join().unwrap();
    assert!(seen[0].starts_with("POST /v1/chat/completions"));
    assert!(seen[0].to_ascii_lowercase().contains("authorization: bearer sekrit"));
    let body: serde_json::Value = serde_json::from_str(seen[0].split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["model"], "some-model");
    assert_eq!(body["messages"][0]["content"], "prompt text");
    let rec = b.recorded().unwrap();
    assert_eq!(rec.responses[&prompt_hash("prompt text")], "```json\n[]\n```");
}

#[test]
fn http_backend_retries_rate_limits() {
    let limited = || (429, "retry-after: 0\r\n", "{}".to_string());
    let (url, server) = canned_server(vec![limited(), limited(), (200, "", chat_body("ok"))]);
    let mut cfg = HttpConfig::new("live", url, "m");
    cfg.base_delay = Duration::from_millis(1);
    assert_eq!(HttpChatBackend::new(cfg).unwrap().complete("p").unwrap(), "ok");
    assert_eq!(server.join().unwrap().len(), 3);

    let (url, server) = canned_server(vec![limited(), limited(), limited()]);
    let mut cfg = HttpConfig::new("live", url, "m");
    cfg.base_delay = Duration::from_millis(1);
    assert_eq!(
        HttpChatBackend::new(cfg).unwrap().complete("p").unwrap_err(),
        BackendError::RateLimited {
            retry_after: Some(0.0),
            attempts: 3
        }
    );
    server.join().unwrap();
}

#[test]
fn http_backend_errors() {
    let (url, server) = canned_server(vec![(400, "", "{\"error\": \"bad\"}".into())]);
    let err = HttpChatBackend::new(HttpConfig::new("live", url, "m")).unwrap().complete("p").unwrap_err();
    assert!(matches!(err, BackendError::Http { status: 400, .. }), "{err}");
    server.join().unwrap();

    let (url, server) = canned_server(vec![(200, "", "{\"choices\": []}".into())]);
    let err = HttpChatBackend::new(HttpConfig::new("live", url, "m")).unwrap().complete("p").unwrap_err();
    assert!(matches!(err, BackendError::Malformed(_)));
    server.join().unwrap();

    let mut cfg = HttpConfig::new("live", "http://127.0.0.1:9/", "m");
    cfg.api_key_env = Some("AUTOCHAIN_SURELY_UNSET_VAR".into());
    assert!(matches!(HttpChatBackend::new(cfg).unwrap().complete("p"), Err(BackendError::Credentials(_))));
}

#[test]
fn python_behavior_roundtrip() {
    let code = std::fs::read_to_string(common::fixtures_dir().join("responses/ttc_ok.py")).unwrap();
    let Artifact::Code(c) = extract_artifact(ArtifactKind::Code, &format!("```python\n{code}```")).unwrap().artifact
    else {
        panic!()
    };
    let mut b = PythonBehavior::spawn(&c).unwrap();
    let args = |d: f64, v: f64| {
        std::collections::BTreeMap::from([("obstacle_distance".to_string(), d), ("ego_speed".to_string(), v)])
    };
    assert_eq!(b.execute(&args(20.0, 10.0)).unwrap()["ttc"], 2.0);
    assert_eq!(b.execute(&args(20.0, 0.0)).unwrap()["ttc"], f64::INFINITY);
    assert!(b.execute(&args(-1.0, 1.0)).unwrap_err().contains("ValueError"));

    let mut broken = c.clone();
    broken.source = "class TTC_Calculation:\n    def __init__(self):\n        raise RuntimeError('boom')\n".into();
    assert!(PythonBehavior::spawn(&broken).err().unwrap().contains("boom"));
}

fn eval(backend: &str) -> autochain::agents::EvalReport {
    let cfg = EvalConfig::new(vec![backend.into()], 5, common::fixtures_dir().join("eval"));
    run_evaluation(&cfg, &ChainInputs::aeb())
}

#[test]
fn engineered_rates() {
    let r = eval("engineered");
    let b = r.backend("engineered").unwrap();
    assert_eq!((b.model_valid, b.code_valid, b.overall), (3, 5, 3), "{r}\n{:#?}", b.outcomes);
    assert_eq!((b.model_valid_rate, b.code_valid_rate, b.overall_rate), (0.6, 1.0, 0.6));
    assert!(b.outcomes[1].notes.iter().any(|n| n.contains("HasInputAndOutputData")));
}

#[test]
fn sabotaged_threshold_fails_overall() {
    let r = eval("sabotaged");
    let b = &r.backends[0];
    assert_eq!((b.model_valid_rate, b.code_valid_rate, b.overall_rate), (1.0, 1.0, 0.0), "{r}");
    assert!(b.outcomes.iter().all(|o| o.scenario_pass == Some(false)));
}

#[test]
fn code_failures_and_early_failure_convention() {
    let r = eval("codefail");
    let b = &r.backends[0];
    assert_eq!((b.model_valid, b.code_valid, b.overall), (4, 2, 2), "{r}\n{:#?}", b.outcomes);
    let last = &b.outcomes[4];
    assert!(!last.model_valid && !last.code_valid && last.scenario_pass.is_none());
    for o in &b.outcomes {
        assert!(o.overall <= (o.model_valid && o.code_valid));
    }
}

#[test]
fn missing_fixture_is_a_failed_run() {
    let cfg = EvalConfig::new(vec!["nobody".into()], 2, common::fixtures_dir().join("eval"));
    let r = run_evaluation(&cfg, &ChainInputs::aeb());
    assert_eq!(r.backends[0].runs, 2);
    assert_eq!(r.backends[0].overall, 0);
    assert!(r.backends[0].outcomes[0].notes[0].starts_with("backend:"));
}

#[test]
fn report_is_deterministic() {
    let a = eval("engineered").to_json_pretty();
    assert_eq!(a, eval("engineered").to_json_pretty());
    let open = |_: &str, _: usize| Err(BackendError::Transport("down".into()));
    let cfg = EvalConfig::new(vec!["x".into()], 3, ".");
    let r = run_evaluation_with(&cfg, &ChainInputs::aeb(), open);
    assert_eq!(r.backends[0].overall_rate, 0.0);
    assert!(r.to_string().contains("0/3"));
}
