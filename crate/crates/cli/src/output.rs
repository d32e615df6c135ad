use std::io::Write;
use std::path::Path;

use quench_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

/// Routes results to stdout either as JSON or as human-readable text.
#[derive(Debug, Clone, Copy)]
pub struct Output {
    json: bool,
}

impl Output {
    pub fn new(json: bool) -> Self {
        Self { json }
    }

    pub fn emit(&self, value: &Value, text: impl FnOnce() -> String) {
        let body = if self.json { serde_json::to_string_pretty(value).expect("JSON value") + "\n" } else { text() };
        // a closed pipe (e.g. `| head`) is not an error worth reporting
        let _ = std::io::stdout().lock().write_all(body.as_bytes());
    }

    /// Error object on stdout in JSON mode, on stderr otherwise.
    pub fn error(&self, e: &Error) {
        let obj = json!({ "error": { "code": e.code(), "message": e.to_string(), "exit_code": e.exit_code() } });
        if self.json {
            println!("{}", serde_json::to_string_pretty(&obj).expect("JSON value"));
        } else {
            eprintln!("error: {e}");
            eprintln!("{obj}");
        }
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> quench_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
