//! Minimal CSV helpers for the two-column `k,<value>` files and
//! `key=value,...` footer lines used throughout the CLI.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Renders an indexed sequence as `k,<name>` rows with 1-based `k`.
pub fn write_indexed(header: &str, values: &[f64]) -> String {
    let mut s = String::with_capacity(16 * (values.len() + 1));
    s.push_str("k,");
    s.push_str(header);
    s.push('\n');
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{},{}", i + 1, v);
    }
    s
}

/// Parsed `k,<name>` file: the values plus any `key=value` footer pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedFile {
    pub values: Vec<f64>,
    pub footer: BTreeMap<String, String>,
}

pub fn read_indexed(text: &str, header: &str, source_name: &str) -> Result<IndexedFile> {
    let perr = |line: usize, message: String| Error::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let expected = format!("k,{header}");
    match lines.next() {
        Some((_, h)) if h.trim() == expected => {}
        Some((i, h)) => {
            return Err(perr(
                i + 1,
                format!("expected header `{expected}`, got `{h}`"),
            ))
        }
        None => return Err(perr(0, "empty file".into())),
    }
    let mut values = Vec::new();
    let mut footer = BTreeMap::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.contains('=') {
            footer.extend(parse_footer(line).map_err(|m| perr(i + 1, m))?);
            continue;
        }
        if !footer.is_empty() {
            return Err(perr(i + 1, "data row after footer".into()));
        }
        let (k, v) = line
            .split_once(',')
            .ok_or_else(|| perr(i + 1, format!("expected two columns, got `{line}`")))?;
        let k: usize = k
            .trim()
            .parse()
            .map_err(|_| perr(i + 1, format!("bad index `{k}`")))?;
        if k != values.len() + 1 {
            return Err(perr(i + 1, format!("index {k} out of sequence")));
        }
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| perr(i + 1, format!("bad value `{v}`")))?;
        values.push(v);
    }
    Ok(IndexedFile { values, footer })
}

pub fn parse_footer(line: &str) -> std::result::Result<Vec<(String, String)>, String> {
    line.split(',')
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("malformed footer entry `{kv}`"))
        })
        .collect()
}
