use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use serde_json::{json, Map, Value as Json};
use tempfile::NamedTempFile;

use crate::assets;
use crate::sim::{Behavior, NodeSpec, Outputs};

use super::extract::CodeArtifact;

/// A generated component class executed by `python3` in a child process.
pub struct PythonBehavior {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    _files: (NamedTempFile, NamedTempFile),
}

fn write_temp(text: &str, suffix: &str) -> Result<NamedTempFile, String> {
    let mut f = tempfile::Builder::new()
        .suffix(suffix)
        .tempfile()
        .map_err(|e| e.to_string())?;
    f.write_all(text.as_bytes()).map_err(|e| e.to_string())?;
    f.flush().map_err(|e| e.to_string())?;
    Ok(f)
}

fn number(v: &Json) -> Option<f64> {
    match v {
        Json::Number(n) => n.as_f64(),
        Json::String(s) => match s.as_str() {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        },
        _ => None,
    }
}

impl PythonBehavior {
    pub fn spawn(code: &CodeArtifact) -> Result<Self, String> {
        let driver = write_temp(assets::PYTHON_DRIVER, ".py")?;
        let source = write_temp(&code.source, ".py")?;
        let mut child = Command::new("python3")
            .arg("-u")
            .arg(driver.path())
            .arg(source.path())
            .arg(&code.class_name)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| format!("cannot start python3: {e}"))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut b = PythonBehavior {
            child,
            stdin,
            stdout,
            _files: (driver, source),
        };
        match b.read()? {
            v if v.get("ready").is_some() => Ok(b),
            v => Err(v.get("error").and_then(Json::as_str).unwrap_or("driver failed").to_string()),
        }
    }

    fn read(&mut self) -> Result<Json, String> {
        let mut line = String::new();
        let n = self.stdout.read_line(&mut line).map_err(|e| e.to_string())?;
        if n == 0 {
            return Err("python process exited".into());
        }
        serde_json::from_str(&line).map_err(|e| format!("bad driver reply: {e}"))
    }

    /// Registry factory running `code` for any node.
    pub fn factory(code: CodeArtifact) -> impl Fn(&NodeSpec) -> Result<Box<dyn Behavior<f64>>, String> {
        move |_| Ok(Box::new(PythonBehavior::spawn(&code)?) as Box<dyn Behavior<f64>>)
    }
}

impl Behavior<f64> for PythonBehavior {
    fn execute(&mut self, inputs: &BTreeMap<String, f64>) -> Result<Outputs<f64>, String> {
        let args: Map<String, Json> = inputs
            .iter()
            .map(|(k, v)| {
                let v = serde_json::Number::from_f64(*v).map_or_else(|| json!(format!("{v}")), Json::Number);
                (k.clone(), v)
            })
            .collect();
        writeln!(self.stdin, "{}", Json::Object(args)).map_err(|e| e.to_string())?;
        self.stdin.flush().map_err(|e| e.to_string())?;
        let reply = self.read()?;
        if let Some(err) = reply.get("error") {
            return Err(err.as_str().unwrap_or("error").to_string());
        }
        let ok = reply.get("ok").and_then(Json::as_object).ok_or("malformed driver reply")?;
        ok.iter()
            .map(|(k, v)| number(v).map(|x| (k.clone(), x)).ok_or_else(|| format!("output `{k}` is not a number")))
            .collect()
    }
}

impl Drop for PythonBehavior {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
