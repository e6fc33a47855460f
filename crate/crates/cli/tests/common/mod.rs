//! A structural checker for the subset of JSON Schema used in docs/schemas:
//! type, required, properties, items, min/maxItems, enum, minimum, maximum,
//! a hex-digest pattern and `$ref` into `$defs` (local or common.json).

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

pub fn schema_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../docs/schemas")
}

pub fn load_schema(name: &str) -> Value {
    let text = std::fs::read_to_string(schema_dir().join(name)).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn ep3(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ep3")).args(args).output().expect("binary runs")
}

pub struct Checker {
    root: Value,
    common: Value,
}

impl Checker {
    pub fn new(name: &str) -> Self {
        Self { root: load_schema(name), common: load_schema("common.json") }
    }

    pub fn check(&self, value: &Value) -> Vec<String> {
        let mut errors = Vec::new();
        self.walk(&self.root, &self.root, value, "$", &mut errors);
        errors
    }

    fn resolve<'a>(&'a self, doc: &'a Value, reference: &str) -> (&'a Value, &'a Value) {
        let (file, pointer) = reference.split_once('#').expect("fragment reference");
        let base = match file {
            "" => doc,
            "common.json" => &self.common,
            other => panic!("unsupported reference {other}"),
        };
        (base, base.pointer(pointer).unwrap_or_else(|| panic!("dangling {reference}")))
    }

    fn walk(&self, doc: &Value, schema: &Value, v: &Value, at: &str, errors: &mut Vec<String>) {
        if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
            let (base, target) = self.resolve(doc, r);
            self.walk(base, target, v, at, errors);
        }
        if let Some(t) = schema.get("type") {
            let allowed: Vec<&str> = match t {
                Value::String(s) => vec![s.as_str()],
                Value::Array(a) => a.iter().filter_map(Value::as_str).collect(),
                _ => vec![],
            };
            if !allowed.iter().any(|t| type_matches(t, v)) {
                errors.push(format!("{at}: expected {allowed:?}, got {v}"));
                return;
            }
        }
        if let Some(options) = schema.get("enum").and_then(Value::as_array) {
            if !options.contains(v) {
                errors.push(format!("{at}: {v} not in {options:?}"));
            }
        }
        if let Some(x) = v.as_f64() {
            if let Some(m) = schema.get("minimum").and_then(Value::as_f64) {
                if x < m {
                    errors.push(format!("{at}: {x} < {m}"));
                }
            }
            if let Some(m) = schema.get("maximum").and_then(Value::as_f64) {
                if x > m {
                    errors.push(format!("{at}: {x} > {m}"));
                }
            }
        }
        if let (Some(p), Some(s)) = (schema.get("pattern").and_then(Value::as_str), v.as_str()) {
            assert_eq!(p, "^[0-9a-f]{64}$", "checker only knows the digest pattern");
            if s.len() != 64 || !s.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)) {
                errors.push(format!("{at}: {s} is not a hex digest"));
            }
        }
        if let Some(obj) = v.as_object() {
            for key in schema.get("required").and_then(Value::as_array).into_iter().flatten() {
                let key = key.as_str().unwrap();
                if !obj.contains_key(key) {
                    errors.push(format!("{at}: missing {key}"));
                }
            }
            if let Some(props) = schema.get("properties").and_then(Value::as_object) {
                for (k, sub) in props {
                    if let Some(child) = obj.get(k) {
                        self.walk(doc, sub, child, &format!("{at}.{k}"), errors);
                    }
                }
            }
        }
        if let Some(arr) = v.as_array() {
            if let Some(n) = schema.get("minItems").and_then(Value::as_u64) {
                if (arr.len() as u64) < n {
                    errors.push(format!("{at}: fewer than {n} items"));
                }
            }
            if let Some(n) = schema.get("maxItems").and_then(Value::as_u64) {
                if (arr.len() as u64) > n {
                    errors.push(format!("{at}: more than {n} items"));
                }
            }
            if let Some(items) = schema.get("items") {
                for (i, child) in arr.iter().enumerate() {
                    self.walk(doc, items, child, &format!("{at}[{i}]"), errors);
                }
            }
        }
    }
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => v.as_i64().is_some() || v.as_u64().is_some(),
        _ => false,
    }
}

pub fn ep3_with_env(args: &[&str], var: (&str, &str)) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ep3")).args(args).env(var.0, var.1).output().expect("binary runs")
}
