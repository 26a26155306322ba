//! Flat `key = value` config files.
//!
//! Each key names a long flag of the chosen subcommand. File entries are
//! spliced in directly after the subcommand token, ahead of the user's own
//! flags, so a flag given on the command line overrides the file.

use std::ffi::OsString;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// Global options that take a value and may precede the subcommand.
const GLOBAL_VALUED: [&str; 2] = ["--workers", "--config"];

/// Parses the file body into `(key, value)` pairs in order.
pub fn parse(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got {raw:?}", i + 1);
        };
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty()
            || !k
                .chars()
                .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
        {
            bail!("config line {}: invalid key {k:?}", i + 1);
        }
        if k == "config" {
            bail!("config line {}: config files cannot include other config files", i + 1);
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            return None;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(p.into());
        }
    }
    None
}

fn subcommand_index(args: &[OsString]) -> Option<usize> {
    let mut i = 1;
    while i < args.len() {
        let s = args[i].to_string_lossy();
        if GLOBAL_VALUED.contains(&s.as_ref()) {
            i += 2;
            continue;
        }
        if !s.starts_with('-') {
            return Some(i);
        }
        i += 1;
    }
    None
}

/// The argument vector with any `--config` file's entries spliced in.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(at) = subcommand_index(&args) else {
        return Ok(args);
    };
    let path = Path::new(&path);
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config file {}", path.display()))?;
    let entries = parse(&text).with_context(|| format!("in {}", path.display()))?;
    let given: Vec<String> = args[at + 1..]
        .iter()
        .filter_map(|a| {
            a.to_str()?
                .strip_prefix("--")
                .map(|f| f.split('=').next().unwrap_or(f).to_string())
        })
        .collect();
    let mut out: Vec<OsString> = args[..=at].to_vec();
    // flags repeated on the command line win
    for (k, v) in entries.into_iter().filter(|(k, _)| !given.contains(k)) {
        out.push(format!("--{k}").into());
        out.push(v.into());
    }
    out.extend_from_slice(&args[at + 1..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn parses_comments_and_blanks() {
        let got = parse("# header\nk = 5\n\n value=7 # trailing\n").unwrap();
        assert_eq!(got, vec![("k".into(), "5".into()), ("value".into(), "7".into())]);
        assert!(parse("novalue\n").is_err());
        assert!(parse("Bad_Key = 1\n").is_err());
        assert!(parse("config = x\n").is_err());
    }

    #[test]
    fn finds_subcommand_after_globals() {
        assert_eq!(
            subcommand_index(&os(&["x", "--workers", "2", "simulate", "--k", "5"])),
            Some(3)
        );
        assert_eq!(
            config_path(&os(&["x", "simulate", "--config=a.cfg"])),
            Some("a.cfg".into())
        );
        assert_eq!(
            config_path(&os(&["x", "simulate", "--config", "b.cfg"])),
            Some("b.cfg".into())
        );
        assert_eq!(config_path(&os(&["x", "simulate"])), None);
    }

    #[test]
    fn command_line_flags_shadow_file_entries() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("c.conf");
        fs::write(
            &f,
            "k = 5
value = 7
",
        )
        .unwrap();
        let f = f.to_str().unwrap();
        let got = expand(os(&["x", "--config", f, "simulate", "--k=9"])).unwrap();
        assert_eq!(got, os(&["x", "--config", f, "simulate", "--value", "7", "--k=9"]));
    }
}
