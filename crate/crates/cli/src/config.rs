//! `--config` files: one `key = value` per line, `#` comments. Keys are
//! flag names without the leading dashes; `true`/`false` toggle switches.
//! Entries become flags appended to argv unless the command line already
//! sets that flag or another flag of the same exclusive group.

use std::ffi::OsString;

use crate::{CliError, CliResult};

const EXCLUSIVE: [[&str; 2]; 2] = [["nex", "gamma2"], ["eta-ratio", "eta"]];

fn given(argv: &[OsString], key: &str) -> bool {
    let flag = format!("--{key}");
    let with_eq = format!("--{key}=");
    argv.iter().any(|a| a.to_str().is_some_and(|s| s == flag || s.starts_with(&with_eq)))
}

fn config_path(argv: &[OsString]) -> CliResult<Option<String>> {
    for (i, a) in argv.iter().enumerate() {
        let Some(s) = a.to_str() else { continue };
        if let Some(p) = s.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
        if s == "--config" {
            return argv
                .get(i + 1)
                .and_then(|p| p.to_str())
                .map(|p| Some(p.to_string()))
                .ok_or_else(|| CliError::Usage("--config needs a path".into()));
        }
    }
    Ok(None)
}

pub fn parse(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("config line {}: expected key=value", n + 1)))?;
        let k = k.trim().trim_start_matches("--").replace('_', "-");
        if k.is_empty() || k == "config" {
            return Err(CliError::Usage(format!("config line {}: bad key", n + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

pub fn merge(mut argv: Vec<OsString>) -> CliResult<Vec<OsString>> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("cannot read config {path}: {e}")))?;
    let entries = parse(&text)?;
    let original = argv.clone();
    for (key, value) in entries {
        let group: Vec<&str> = EXCLUSIVE
            .iter()
            .find(|g| g.contains(&key.as_str()))
            .map(|g| g.to_vec())
            .unwrap_or_else(|| vec![key.as_str()]);
        if group.iter().any(|k| given(&original, k)) {
            continue;
        }
        match value.as_str() {
            "true" => argv.push(format!("--{key}").into()),
            "false" => {}
            _ => argv.push(format!("--{key}={value}").into()),
        }
    }
    Ok(argv)
}
