//! `--set key.path=value` overrides applied to any serde config.

use serde_json::Value;

use chansel::{Error, Result};

/// Parse `a.b.c=value`. The value is read as JSON when it parses, otherwise
/// as a bare string, so `nsga2.generations=50` and `montage=bciiv2a22` both
/// work.
fn parse(arg: &str) -> Result<(Vec<&str>, Value)> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{arg}` is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("override `{arg}` has an empty key")));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((path, value))
}

/// Apply overrides in order. Unknown keys are rejected when the result is
/// deserialized back, since the configs deny unknown fields.
pub fn apply<T>(cfg: &T, overrides: &[String]) -> Result<T>
where
    T: serde::Serialize + serde::de::DeserializeOwned,
{
    let mut root = serde_json::to_value(cfg).map_err(|e| Error::Config(e.to_string()))?;
    for arg in overrides {
        let (path, value) = parse(arg)?;
        let (last, parents) = path.split_last().expect("non-empty path");
        let mut node = &mut root;
        for p in parents {
            if node.get(*p).is_none_or(Value::is_null) {
                node[*p] = Value::Object(Default::default());
            }
            node = node
                .get_mut(*p)
                .filter(|n| n.is_object())
                .ok_or_else(|| Error::Config(format!("override `{arg}`: `{p}` is not a table")))?;
        }
        match node {
            Value::Object(map) => {
                map.insert(last.to_string(), value);
            }
            _ => return Err(Error::Config(format!("override `{arg}`: parent is not a table"))),
        }
    }
    serde_json::from_value(root).map_err(|e| Error::Config(format!("overrides: {e}")))
}
