//! `key=value` configuration files, merged underneath command-line flags.

use std::ffi::OsString;
use std::fs;

use rmtest::{Error, Result};

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i + 1,
            msg: format!("expected key=value, got {line:?}"),
        })?;
        let k = k.trim();
        if k.is_empty() || k.contains(char::is_whitespace) {
            return Err(Error::Parse {
                line: i + 1,
                msg: format!("bad key {k:?}"),
            });
        }
        out.push((k.replace('_', "-"), v.trim().to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

/// Inserts the file's settings as flags right after the subcommand, so that
/// flags given on the command line, which come later, take precedence.
pub fn merge(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path)?;
    let mut injected = Vec::new();
    for (k, v) in parse_file(&text)? {
        if k == "config" {
            return Err(Error::Config(
                "config files cannot include other config files".into(),
            ));
        }
        injected.push(OsString::from(format!("--{k}")));
        injected.push(OsString::from(v));
    }
    let at = args
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map_or(args.len(), |p| p + 2);
    let mut out = args[..at.min(args.len())].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[at.min(args.len())..]);
    Ok(out)
}
