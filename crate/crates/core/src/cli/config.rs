//! Plain-text `key = value` run configuration.
//!
//! A config file is merged into the command line as flags placed before the
//! user's own flags, so explicit flags win. `#` starts a comment, keys may
//! use `_` or `-`, and `true`/`false` toggle switches.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{invalid, Result};

pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| invalid(format!("config line {}: expected key = value", n + 1)))?;
        let k = k.trim().replace('_', "-");
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(invalid(format!("config line {}: bad key {k:?}", n + 1)));
        }
        out.push((k, v.trim().to_string()));
    }
    Ok(out)
}

/// Command-line arguments with the config file named by `--config` spliced in.
/// The file's flags go after the subcommand words and before every flag.
pub fn splice(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let mut path = None;
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = args.get(i + 1).cloned();
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        }
    }
    let Some(path) = path else {
        return Ok(args);
    };
    let text = std::fs::read_to_string(Path::new(&path))
        .map_err(|e| invalid(format!("cannot read config {}: {e}", Path::new(&path).display())))?;
    let mut flags = Vec::new();
    for (k, v) in parse(&text)? {
        if k == "config" {
            return Err(invalid("a config file cannot name another config file"));
        }
        match v.as_str() {
            "true" => flags.push(OsString::from(format!("--{k}"))),
            "false" => {}
            _ => {
                flags.push(OsString::from(format!("--{k}")));
                flags.push(OsString::from(v));
            }
        }
    }
    let split = args
        .iter()
        .skip(1)
        .position(|a| a.to_string_lossy().starts_with('-'))
        .map_or(args.len(), |p| p + 1);
    let mut out = args[..split].to_vec();
    out.extend(flags);
    out.extend_from_slice(&args[split..]);
    Ok(out)
}

/// `key = value` lines of a serialisable parameter set, in field order.
/// Lists are written comma-separated, absent options are skipped.
pub fn render<T: Serialize>(command: &str, params: &T) -> Result<String> {
    let v = serde_json::to_value(params)?;
    let mut out = String::new();
    let _ = writeln!(out, "command = {command}");
    if let serde_json::Value::Object(map) = v {
        for (k, v) in map {
            let text = match v {
                serde_json::Value::Null => continue,
                serde_json::Value::String(s) => s,
                serde_json::Value::Array(a) => a
                    .iter()
                    .map(|x| match x {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            let _ = writeln!(out, "{} = {text}", k.replace('_', "-"));
        }
    }
    Ok(out)
}
