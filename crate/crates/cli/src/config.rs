//! `--config FILE` support: each `key = value` line becomes `--key value`,
//! inserted before the command-line flags so that explicit flags win.

use std::path::Path;

use graphcal::io;
use graphcal::{Error, Result};

/// Path given by `--config PATH` or `--config=PATH`, if any.
pub fn config_path(args: &[String]) -> Option<String> {
    let mut iter = args.iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            return iter.next().cloned();
        }
        if let Some(path) = arg.strip_prefix("--config=") {
            return Some(path.to_string());
        }
    }
    None
}

/// Flags read from a config file. `key = true` becomes a bare switch and
/// `key = false` is dropped.
pub fn config_args(path: &Path) -> Result<Vec<String>> {
    let text = io::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: idx + 1,
            msg: "expected key = value".into(),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: idx + 1,
                msg: format!("invalid key {key:?}"),
            });
        }
        match value.trim() {
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

/// `args` with the config file's flags spliced in after the subcommand.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let extra = config_args(Path::new(&path))?;
    let split = args.len().min(2);
    let mut out: Vec<String> = args[..split].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[split..]);
    Ok(out)
}
