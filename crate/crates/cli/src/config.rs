//! Merging flags from a JSON config file into the command line.
//!
//! The file is an object of flag values, either flat or sectioned by
//! subcommand (`{"simulate": {"seed": 3}}`). File flags are inserted before
//! the user's own arguments, so anything given on the command line wins.

use std::ffi::OsString;

use serde_json::Value;

/// Removes `--config <path>` / `--config=<path>` from `args`, returning the path.
fn take_config(args: &mut Vec<OsString>) -> Result<Option<OsString>, String> {
    let mut i = 1;
    while i < args.len() {
        let arg = args[i].to_string_lossy().into_owned();
        if arg == "--" {
            break;
        }
        if arg == "--config" {
            if i + 1 >= args.len() {
                return Err("--config needs a path".into());
            }
            let path = args.remove(i + 1);
            args.remove(i);
            return Ok(Some(path));
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            let path = OsString::from(path);
            args.remove(i);
            return Ok(Some(path));
        }
        i += 1;
    }
    Ok(None)
}

fn flag_tokens(key: &str, value: &Value) -> Result<Vec<OsString>, String> {
    let flag = format!("--{}", key.replace('_', "-"));
    match value {
        Value::Bool(true) => Ok(vec![flag.into()]),
        Value::Bool(false) | Value::Null => Ok(vec![]),
        Value::String(s) => Ok(vec![flag.into(), s.into()]),
        Value::Number(n) => Ok(vec![flag.into(), n.to_string().into()]),
        Value::Array(items) => {
            let mut out = Vec::new();
            for item in items {
                out.extend(flag_tokens(key, item)?);
            }
            Ok(out)
        }
        Value::Object(_) => Err(format!("config value for {key:?} must be a scalar")),
    }
}

/// Expands `--config` into explicit flags placed right after the subcommand.
pub fn expand_args(mut args: Vec<OsString>, subcommands: &[&str]) -> Result<Vec<OsString>, String> {
    let Some(path) = take_config(&mut args)? else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(&path)
        .map_err(|e| format!("cannot read config {}: {e}", path.to_string_lossy()))?;
    let config: Value =
        serde_json::from_str(&text).map_err(|e| format!("config {} is not JSON: {e}", path.to_string_lossy()))?;
    let Value::Object(map) = config else {
        return Err("config must be a JSON object".into());
    };
    let Some(pos) = args
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(&a.to_string_lossy().as_ref()))
        .map(|p| p + 1)
    else {
        return Ok(args);
    };
    let command = args[pos].to_string_lossy().into_owned();
    let flags = match map.get(&command) {
        Some(Value::Object(section)) => section.clone(),
        _ => map.into_iter().filter(|(k, _)| !subcommands.contains(&k.as_str())).collect(),
    };
    let mut inserted = Vec::new();
    for (key, value) in &flags {
        inserted.extend(flag_tokens(key, value)?);
    }
    args.splice(pos + 1..pos + 1, inserted);
    Ok(args)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(items: &[&str]) -> Vec<OsString> {
        items.iter().map(OsString::from).collect()
    }

    #[test]
    fn sectioned_and_flat_configs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"simulate": {"seed": 3, "out_dir": "x"}, "train": {"c": 1}}"#).unwrap();
        let args = os(&["bin", "--config", path.to_str().unwrap(), "simulate", "--points", "2"]);
        let out = expand_args(args, &["simulate", "train"]).unwrap();
        assert_eq!(out, os(&["bin", "simulate", "--out-dir", "x", "--seed", "3", "--points", "2"]));

        std::fs::write(&path, r#"{"seed": 9, "verbose": true, "quiet": false}"#).unwrap();
        let args = os(&["bin", "simulate", &format!("--config={}", path.to_str().unwrap())]);
        let out = expand_args(args, &["simulate"]).unwrap();
        assert_eq!(out, os(&["bin", "simulate", "--seed", "9", "--verbose"]));
    }

    #[test]
    fn missing_or_bad_config() {
        assert!(expand_args(os(&["bin", "simulate", "--config"]), &["simulate"]).is_err());
        assert!(expand_args(os(&["bin", "--config", "/nonexistent.json", "simulate"]), &["simulate"]).is_err());
        assert_eq!(
            expand_args(os(&["bin", "simulate", "--seed", "1"]), &["simulate"]).unwrap(),
            os(&["bin", "simulate", "--seed", "1"])
        );
    }
}
