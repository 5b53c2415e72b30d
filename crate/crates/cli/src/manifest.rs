//! Run manifests: `key = value` lines standing in for command-line flags.
//!
//! ```text
//! # classify.manifest
//! command = classify
//! mode = simultaneous
//! train = train.txt
//! test = test.txt
//! score-against-truth = true
//! ```
//!
//! Keys are long flag names without the dashes. A flag given on the command
//! line replaces the manifest entry of the same name.

use std::fs;
use std::path::Path;

use clap::Command;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

pub fn parse(text: &str) -> Result<Vec<Entry>, String> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected 'key = value', got '{line}'", i + 1))?;
        let key = key.trim().trim_start_matches("--");
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        entries.push(Entry {
            line: i + 1,
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(entries)
}

pub fn load(path: &Path) -> Result<Vec<Entry>, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

/// Splits `--manifest <path>` (or `--manifest=<path>`) out of `args`.
pub fn take_manifest_flag(args: &mut Vec<String>) -> Result<Option<String>, String> {
    let mut found = None;
    let mut i = 0;
    while i < args.len() {
        if args[i] == "--manifest" {
            if i + 1 >= args.len() {
                return Err("--manifest needs a file path".into());
            }
            found = Some(args.remove(i + 1));
            args.remove(i);
        } else if let Some(path) = args[i].strip_prefix("--manifest=") {
            found = Some(path.to_string());
            args.remove(i);
        } else {
            i += 1;
        }
    }
    Ok(found)
}

fn flag_name(arg: &str) -> Option<&str> {
    let name = arg.strip_prefix("--")?;
    Some(name.split_once('=').map_or(name, |(n, _)| n))
}

/// Inserts manifest entries as flags right after the subcommand, skipping any
/// flag already present in `args`. `args[0]` is the program name.
pub fn merge(cli: &Command, mut args: Vec<String>, entries: &[Entry]) -> Result<Vec<String>, String> {
    let sub_pos = args.iter().skip(1).position(|a| !a.starts_with('-')).map(|p| p + 1);
    let sub_pos = match sub_pos {
        Some(p) => p,
        None => {
            let command = entries
                .iter()
                .find(|e| e.key == "command")
                .ok_or("no subcommand given on the command line or in the manifest")?;
            args.insert(1, command.value.clone());
            1
        }
    };
    let sub_name = args[sub_pos].clone();
    let sub = cli
        .find_subcommand(&sub_name)
        .ok_or_else(|| format!("unknown subcommand '{sub_name}'"))?;
    let given: Vec<&str> = args[sub_pos + 1..].iter().filter_map(|a| flag_name(a)).collect();

    let mut extra = Vec::new();
    for entry in entries.iter().filter(|e| e.key != "command") {
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(entry.key.as_str()))
            .ok_or_else(|| format!("manifest line {}: unknown option '{}' for '{sub_name}'", entry.line, entry.key))?;
        if given.contains(&entry.key.as_str()) {
            continue;
        }
        let flag = format!("--{}", entry.key);
        if arg.get_action().takes_values() {
            extra.push(flag);
            extra.push(entry.value.clone());
        } else {
            match entry.value.as_str() {
                "true" | "yes" | "1" => extra.push(flag),
                "false" | "no" | "0" => {}
                other => {
                    return Err(format!(
                        "manifest line {}: '{}' is a switch, expected true or false, got '{other}'",
                        entry.line, entry.key
                    ))
                }
            }
        }
    }
    let tail = args.split_off(sub_pos + 1);
    args.extend(extra);
    args.extend(tail);
    Ok(args)
}
