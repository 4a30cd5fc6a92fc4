//! Plain-text configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys are long
//! flag names without the leading dashes. A value of `true` enables a
//! switch and `false` leaves it off. Flags given on the command line are
//! appended after the file's pairs, so they win.

use std::fs;

/// Removes `--config PATH` (or `--config=PATH`) from `args` and returns the
/// path if present.
pub fn take_config_path(args: &mut Vec<String>) -> Result<Option<String>, String> {
    let Some(i) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(None);
    };
    let a = args.remove(i);
    if let Some(v) = a.strip_prefix("--config=") {
        return Ok(Some(v.to_string()));
    }
    if i < args.len() {
        Ok(Some(args.remove(i)))
    } else {
        Err("--config requires a path".into())
    }
}

/// Turns file contents into flag arguments.
pub fn parse(text: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
        if key.is_empty() || key.starts_with('-') {
            return Err(format!("config line {}: bad key `{key}`", n + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            v => {
                out.push(format!("--{key}"));
                out.push(v.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices the config file named in `args` (if any) in front of the
/// subcommand's own flags.
pub fn expand(mut args: Vec<String>) -> Result<Vec<String>, String> {
    let Some(path) = take_config_path(&mut args)? else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("--config {path}: {e}"))?;
    let extra = parse(&text)?;
    // args[0] is the program, args[1] the subcommand.
    let at = args.len().min(2);
    args.splice(at..at, extra);
    Ok(args)
}
