//! Validation against the shipped schema file.

use serde_json::Value;

use crate::error::{CliError, CliResult};

pub const SCHEMA_TEXT: &str = include_str!("../schema/covert.schema.json");

/// Validates `instance` against `#/$defs/<def>`, reporting the first violation.
pub fn validate(def: &str, instance: &Value) -> CliResult<()> {
    let mut root: Value = serde_json::from_str(SCHEMA_TEXT).expect("shipped schema is valid JSON");
    let defs = root.get("$defs").and_then(Value::as_object);
    assert!(defs.is_some_and(|d| d.contains_key(def)), "schema has no definition `{def}`");
    root["$ref"] = Value::String(format!("#/$defs/{def}"));
    let validator = jsonschema::validator_for(&root).expect("shipped schema compiles");
    let first = validator.iter_errors(instance).next();
    match first {
        None => Ok(()),
        Some(err) => {
            let schema = err.schema_path.as_str();
            // The wrapper's `$ref` hop is an implementation detail.
            let schema = match schema.strip_prefix("/$ref") {
                Some(rest) => format!("/$defs/{def}{rest}"),
                None => schema.to_string(),
            };
            let instance = err.instance_path.as_str();
            Err(CliError::Schema {
                instance: if instance.is_empty() { "/".into() } else { instance.into() },
                schema,
                message: err.to_string(),
            })
        }
    }
}

/// Replaces keys of `base` with the non-null entries of `overrides`.
pub fn merge(base: &mut Value, overrides: Value) {
    if let (Value::Object(b), Value::Object(o)) = (base, overrides) {
        for (k, v) in o {
            if v.is_null() {
                continue;
            }
            match b.get_mut(&k) {
                Some(existing) if existing.is_object() && v.is_object() => merge(existing, v),
                _ => {
                    b.insert(k, v);
                }
            }
        }
    }
}
