use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};

use super::scenario::ScenarioTrace;
use super::{Scalar, SimError};
use crate::model::format_float;

fn num<T: Scalar>(x: T) -> String {
    format_float(x.to_f64().unwrap_or(f64::NAN))
}

/// Non-finite numbers become strings so the line stays valid JSON.
fn json_num<T: Scalar>(x: T) -> Json {
    let f = x.to_f64().unwrap_or(f64::NAN);
    serde_json::Number::from_f64(f).map_or_else(|| Json::String(format_float(f)), Json::Number)
}

pub fn trace_csv<T: Scalar>(trace: &ScenarioTrace<T>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["time", "speed", "gap", "ttc", "brake_force"]).expect("in-memory write");
    for r in &trace.records {
        w.write_record([num(r.time), num(r.speed), num(r.gap), num(r.ttc), num(r.brake_force)])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}

pub fn messages_jsonl<T: Scalar>(trace: &ScenarioTrace<T>) -> String {
    let mut out = String::new();
    for m in &trace.messages {
        let payload: serde_json::Map<String, Json> =
            m.payload.iter().map(|(k, v)| (k.clone(), json_num(*v))).collect();
        let line = json!({"seq": m.seq, "time": json_num(m.time), "topic": m.topic, "payload": payload});
        out.push_str(&line.to_string());
        out.push('\n');
    }
    out
}

/// Per-node runtime metrics plus the scenario outcome.
pub fn metrics_json<T: Scalar>(trace: &ScenarioTrace<T>) -> String {
    let doc = json!({
        "nodes": trace.metrics,
        "outcome": {
            "ticks": trace.records.len(),
            "messages": trace.messages.len(),
            "final_speed": json_num(trace.final_speed),
            "final_gap": json_num(trace.final_gap),
            "collided": trace.collided,
            "stopped": trace.stopped(),
            "brake_in_range": trace.brake_in_range(),
            "engagement_time": trace.engagement().map(|r| json_num(r.time)),
            "engagement_gap": trace.engagement().map(|r| json_num(r.gap)),
        }
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("metrics serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub time: f64,
    pub speed: f64,
    pub gap: f64,
    pub ttc: f64,
    pub brake_force: f64,
}

fn parse_num(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

pub fn read_trace_csv(text: &str) -> Result<Vec<TraceRow>, SimError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| SimError::Trace(e.to_string()))?.clone();
    let want = ["time", "speed", "gap", "ttc", "brake_force"];
    if headers.iter().ne(want) {
        return Err(SimError::Trace(format!("unexpected header {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| SimError::Trace(e.to_string()))?;
        let cols: Vec<f64> = rec
            .iter()
            .map(parse_num)
            .collect::<Option<_>>()
            .ok_or_else(|| SimError::Trace(format!("row {}: not a number", i + 1)))?;
        let [time, speed, gap, ttc, brake_force] = cols[..] else {
            return Err(SimError::Trace(format!("row {}: expected 5 columns", i + 1)));
        };
        rows.push(TraceRow {
            time,
            speed,
            gap,
            ttc,
            brake_force,
        });
    }
    Ok(rows)
}
