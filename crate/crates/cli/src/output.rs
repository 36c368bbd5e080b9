//! Rendering of run artifacts with the embedded configuration block.

use qwm_core::numfmt::num;
use serde_json::{json, Value};

use crate::config::Format;
use crate::config::{RunConfig, BLOCK_BEGIN, BLOCK_END};

pub const TOOL: &str = "qwm";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Result of one command before rendering.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    /// Scalar diagnostics, rendered as `# key = value` lines in CSV.
    pub meta: Vec<(String, Value)>,
    /// CSV table body including its header line.
    pub csv: String,
    pub json: Value,
}

impl Artifact {
    pub fn new(csv: String, json: Value) -> Self {
        Artifact { meta: Vec::new(), csv, json }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.meta.push((key.to_string(), value.into()));
    }

    pub fn meta_num(&mut self, key: &str, x: f64) {
        self.meta(key, json_num(x));
    }
}

/// A JSON number, or `null` when `x` is not finite.
pub fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

fn meta_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) if !n.is_f64() => i.to_string(),
            (_, Some(x)) => num(x),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}

pub fn render(cfg: &RunConfig, art: &Artifact) -> String {
    match cfg.format {
        Format::Csv => render_csv(cfg, art),
        Format::Json => render_json(cfg, art),
    }
}

fn render_csv(cfg: &RunConfig, art: &Artifact) -> String {
    let mut out = format!("# {TOOL} {VERSION} {}\n# {BLOCK_BEGIN}\n", cfg.command);
    for line in cfg.config_text().lines() {
        out.push_str(&format!("# {line}\n"));
    }
    out.push_str(&format!("# {BLOCK_END}\n"));
    for (k, v) in &art.meta {
        out.push_str(&format!("# {k} = {}\n", meta_text(v)));
    }
    out.push_str(&art.csv);
    out
}

fn render_json(cfg: &RunConfig, art: &Artifact) -> String {
    let meta: serde_json::Map<String, Value> = art.meta.iter().cloned().collect();
    let doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "command": cfg.command.name(),
        "config": cfg.config_text(),
        "provenance": cfg.values,
        "meta": meta,
        "result": art.json,
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    s.push('\n');
    s
}

/// Machine-readable error document.
pub fn error_envelope(kind: &str, code: i32, message: &str, details: Value) -> String {
    let doc = json!({
        "tool": TOOL,
        "version": VERSION,
        "error": { "kind": kind, "exit_code": code, "message": message, "details": details },
    });
    let mut s = serde_json::to_string_pretty(&doc).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, Command, ConfigFile, ConfigInput};

    #[test]
    fn csv_meta_uses_round_trip_numbers() {
        assert_eq!(meta_text(&json_num(0.1)), "0.1");
        assert_eq!(meta_text(&json_num(1e-9)), "1e-9");
        assert_eq!(meta_text(&Value::from(3)), "3");
        assert_eq!(meta_text(&Value::from("a b")), "a b");
        assert_eq!(json_num(f64::NAN), Value::Null);
    }

    #[test]
    fn rendered_outputs_reparse_to_same_config() {
        for format in [Format::Csv, Format::Json] {
            let input = ConfigInput { sets: vec!["mu=0.25".into()], format: Some(format), ..ConfigInput::default() };
            let cfg = parse_config(Command::Triplet, &input).unwrap();
            let mut art = Artifact::new("a,b\n1,2\n".into(), json!([1, 2]));
            art.meta_num("x", 0.5);
            let text = render(&cfg, &art);
            let again = ConfigInput {
                file: Some(ConfigFile { name: "prev".into(), text: text.clone() }),
                ..ConfigInput::default()
            };
            let cfg2 = parse_config(Command::Triplet, &again).unwrap();
            assert_eq!(render(&cfg2, &art), text);
        }
    }

    #[test]
    fn envelope_is_json() {
        let v: Value = serde_json::from_str(&error_envelope("validation", 1, "bad", Value::Null)).unwrap();
        assert_eq!(v["error"]["exit_code"], 1);
    }
}
