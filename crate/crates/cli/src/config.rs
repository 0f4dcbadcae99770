//! `key = value` run files. Each key names a long flag of the subcommand
//! (`vocab-size = 20000` or `vocab_size = 20000`). Values from the file are
//! spliced in ahead of the command-line flags, so explicit flags win, and a
//! key is skipped when its `LMTK_` environment variable is set.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

#[derive(Debug, PartialEq, Eq)]
pub struct Entry {
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split_once('#').map_or(line, |(a, _)| a).trim();
        if line.is_empty() || line.starts_with('[') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("line {}: expected key = value", n + 1);
        };
        let key = k.trim().replace('_', "-");
        let value = v.trim().trim_matches('"').to_string();
        if key.is_empty() {
            bail!("line {}: empty key", n + 1);
        }
        out.push(Entry { key, value });
    }
    Ok(out)
}

fn env_name(key: &str) -> String {
    format!("LMTK_{}", key.replace('-', "_").to_uppercase())
}

/// Finds `--config PATH` (or `LMTK_CONFIG`) and returns argv with the file's
/// entries inserted right after the subcommand.
pub fn expand_args(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let strs: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let mut path = None;
    for (i, a) in strs.iter().enumerate() {
        if a == "--config" {
            path = strs.get(i + 1).cloned();
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(p.to_string());
        }
    }
    let path = match path.or_else(|| std::env::var("LMTK_CONFIG").ok()) {
        Some(p) => p,
        None => return Ok(args),
    };
    let text = fs::read_to_string(Path::new(&path)).with_context(|| format!("reading config file {path}"))?;
    let mut injected = Vec::new();
    for e in parse(&text)? {
        if e.key == "config" || std::env::var_os(env_name(&e.key)).is_some() {
            continue;
        }
        match e.value.as_str() {
            "true" => injected.push(format!("--{}", e.key)),
            "false" => {}
            v => {
                // Lists expand to repeated flags.
                for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    injected.push(format!("--{}", e.key));
                    injected.push(part.to_string());
                }
            }
        }
    }
    // The subcommand is the first argument after the program name.
    let at = 2.min(args.len());
    let mut out = args[..at].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(args[at..].iter().cloned());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_sections() {
        let e = parse("# run\n[train]\nvocab_size = 2000\nsentinel = \"_\"  # note\n\n").unwrap();
        assert_eq!(
            e,
            [
                Entry { key: "vocab-size".into(), value: "2000".into() },
                Entry { key: "sentinel".into(), value: "_".into() },
            ]
        );
        assert!(parse("oops").is_err());
    }

    #[test]
    fn env_names() {
        assert_eq!(env_name("vocab-size"), "LMTK_VOCAB_SIZE");
    }
}
