use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

/// How a report came to be: enough to rerun it.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub elapsed_ms: u128,
    #[serde(skip)]
    started: Option<Instant>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            seed: None,
            tool_version: env!("CARGO_PKG_VERSION"),
            elapsed_ms: 0,
            started: Some(Instant::now()),
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn param(mut self, name: &str, value: impl Serialize) -> Self {
        self.parameters
            .insert(name.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn finish(&mut self) {
        if let Some(t) = self.started {
            self.elapsed_ms = t.elapsed().as_millis();
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a, T> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    result: &'a T,
}

/// Writes to stdout, ignoring a closed pipe.
pub fn out(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

/// Prints either the JSON report or the human summary.
pub fn emit<T: Serialize>(json: bool, mut manifest: RunManifest, result: &T, summary: impl FnOnce() -> String) {
    manifest.finish();
    if json {
        let env = Envelope {
            manifest: &manifest,
            result,
        };
        out(&format!("{}\n", serde_json::to_string_pretty(&env).expect("reports serialize")));
    } else {
        out(&format!(
            "{}({} v{}, {} ms)\n",
            summary(),
            manifest.command,
            manifest.tool_version,
            manifest.elapsed_ms
        ));
    }
}
