//! JSON config files: each key names a flag of the chosen subcommand.
//!
//! Config values are spliced in as flags directly after the subcommand
//! name, ahead of the user's own flags, so a flag given on the command line
//! overrides the same key from the file.

use std::fs;

use serde_json::Value;

use crate::Failure;

pub const SUBCOMMANDS: [&str; 7] = ["gen", "spectrum", "histogram", "approx", "sweep", "embed", "extend"];

/// Removes `--config PATH` (or `--config=PATH`) from `args` and returns the
/// path if present.
fn take_config(args: &mut Vec<String>) -> Result<Option<String>, Failure> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(None);
    };
    let flag = args.remove(pos);
    if let Some(path) = flag.strip_prefix("--config=") {
        return Ok(Some(path.to_string()));
    }
    if pos >= args.len() {
        return Err(Failure::Usage("--config requires a path".into()));
    }
    Ok(Some(args.remove(pos)))
}

fn scalar(key: &str, value: &Value) -> Result<String, Failure> {
    match value {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        other => Err(Failure::Usage(format!("config key '{key}': unsupported value {other}"))),
    }
}

fn tokens(config: &serde_json::Map<String, Value>) -> Result<Vec<String>, Failure> {
    let mut out = Vec::new();
    for (key, value) in config {
        let flag = format!("--{key}");
        match value {
            Value::Bool(true) => out.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                let parts: Result<Vec<String>, Failure> = items.iter().map(|v| scalar(key, v)).collect();
                out.push(flag);
                out.push(parts?.join(","));
            }
            other => {
                out.push(flag);
                out.push(scalar(key, other)?);
            }
        }
    }
    Ok(out)
}

/// Expands a `--config` file into flags. Arguments are returned unchanged
/// when no config is given.
pub fn expand(mut args: Vec<String>) -> Result<Vec<String>, Failure> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| Failure::Io(format!("{path}: {e}")))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{path}: invalid JSON: {e}")))?;
    let Value::Object(map) = value else {
        return Err(Failure::Usage(format!("{path}: config must be a JSON object")));
    };
    let Some(pos) = args.iter().position(|a| SUBCOMMANDS.contains(&a.as_str())) else {
        return Err(Failure::Usage("--config requires a subcommand".into()));
    };
    // `gen` takes its kind as a positional; keep it first.
    let at = if args[pos] == "gen" && args.get(pos + 1).is_some_and(|a| !a.starts_with('-')) { pos + 2 } else { pos + 1 };
    let injected = tokens(&map)?;
    args.splice(at..at, injected);
    Ok(args)
}
