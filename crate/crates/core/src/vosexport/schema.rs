//! Minimal JSON Schema interpreter covering the keywords used by
//! `schema/vosviewer-network.schema.json`.
//!
//! Supported: `type`, `required`, `properties`, `items` (single schema),
//! `additionalProperties`, `enum`, `minimum`, `maximum`, `exclusiveMinimum`.
//! Other keywords are ignored.

use serde_json::Value;

/// A schema violation, located by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaViolation {
    pub path: String,
    pub message: String,
}

pub fn validate(schema: &Value, instance: &Value) -> Vec<SchemaViolation> {
    let mut out = Vec::new();
    check(schema, instance, "", &mut out);
    out
}

fn type_matches(ty: &str, v: &Value) -> bool {
    match ty {
        "object" => v.is_object(),
        "array" => v.is_array(),
        "string" => v.is_string(),
        "boolean" => v.is_boolean(),
        "null" => v.is_null(),
        "number" => v.is_number(),
        "integer" => {
            v.as_i64().is_some()
                || v.as_u64().is_some()
                || v.as_f64().is_some_and(|f| f.fract() == 0.0)
        }
        _ => false,
    }
}

fn check(schema: &Value, v: &Value, path: &str, out: &mut Vec<SchemaViolation>) {
    let Some(s) = schema.as_object() else {
        if schema == &Value::Bool(false) {
            out.push(violation(path, "no value is allowed here"));
        }
        return;
    };
    let mut fail = |msg: String| out.push(violation(path, &msg));

    if let Some(ty) = s.get("type") {
        let ok = match ty {
            Value::String(t) => type_matches(t, v),
            Value::Array(ts) => ts
                .iter()
                .filter_map(Value::as_str)
                .any(|t| type_matches(t, v)),
            _ => true,
        };
        if !ok {
            fail(format!("expected type {ty}, found {v}"));
            return;
        }
    }
    if let Some(Value::Array(allowed)) = s.get("enum") {
        if !allowed.contains(v) {
            fail(format!(
                "{v} is not one of {}",
                Value::Array(allowed.clone())
            ));
        }
    }
    if let Some(x) = v.as_f64() {
        if let Some(min) = s.get("minimum").and_then(Value::as_f64) {
            if x < min {
                fail(format!("{x} is below the minimum {min}"));
            }
        }
        if let Some(max) = s.get("maximum").and_then(Value::as_f64) {
            if x > max {
                fail(format!("{x} is above the maximum {max}"));
            }
        }
        if let Some(min) = s.get("exclusiveMinimum").and_then(Value::as_f64) {
            if x <= min {
                fail(format!("{x} must be greater than {min}"));
            }
        }
    }
    if let Some(obj) = v.as_object() {
        if let Some(Value::Array(req)) = s.get("required") {
            for name in req.iter().filter_map(Value::as_str) {
                if !obj.contains_key(name) {
                    fail(format!("missing required property `{name}`"));
                }
            }
        }
        let props = s.get("properties").and_then(Value::as_object);
        for (key, child) in obj {
            let child_path = format!("{path}/{}", escape_pointer(key));
            match props.and_then(|p| p.get(key)) {
                Some(sub) => check(sub, child, &child_path, out),
                None => {
                    if let Some(extra) = s.get("additionalProperties") {
                        check(extra, child, &child_path, out);
                    }
                }
            }
        }
    }
    if let (Some(arr), Some(items)) = (v.as_array(), s.get("items")) {
        for (i, child) in arr.iter().enumerate() {
            check(items, child, &format!("{path}/{i}"), out);
        }
    }
}

fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn violation(path: &str, message: &str) -> SchemaViolation {
    SchemaViolation {
        path: if path.is_empty() {
            "/".to_string()
        } else {
            path.to_string()
        },
        message: message.to_string(),
    }
}
