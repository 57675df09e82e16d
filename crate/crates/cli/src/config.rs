//! `key = value` run configuration mirroring the command-line flags.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use greedy_ldp::{Error, Result};

/// A subcommand with its flags, without the leading dashes.
///
/// Boolean flags are stored as `true`. The text form is
/// `command = <name>` followed by one `key = value` line per flag.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Option<String>,
    pub entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("config line {}: expected `key = value`", no + 1)))?;
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if k == "command" {
                cfg.command = Some(v);
            } else if cfg.entries.insert(k.clone(), v).is_some() {
                return Err(Error::InvalidInput(format!("config line {}: {k} given twice", no + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.command {
            out.push_str(&format!("command = {c}\n"));
        }
        for (k, v) in &self.entries {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    /// Leading 16 hex digits of the SHA-256 of [`RunConfig::to_text`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_text().as_bytes()))[..16].to_string()
    }

    /// Read a subcommand invocation back: `args` starts at the subcommand name.
    pub fn from_args(args: &[String]) -> Self {
        let mut cfg = RunConfig { command: args.first().cloned(), entries: BTreeMap::new() };
        let mut i = 1;
        while i < args.len() {
            if let Some(key) = args[i].strip_prefix("--") {
                if let Some((k, v)) = key.split_once('=') {
                    cfg.entries.insert(k.to_string(), v.to_string());
                } else if i + 1 < args.len() && !is_flag(&args[i + 1]) {
                    cfg.entries.insert(key.to_string(), args[i + 1].clone());
                    i += 1;
                } else {
                    cfg.entries.insert(key.to_string(), "true".to_string());
                }
            }
            i += 1;
        }
        cfg
    }

    /// Arguments for the subcommand: its name, then `--key=value` flags.
    /// Switches set to `false` are left out.
    pub fn to_args(&self) -> Vec<String> {
        let mut args: Vec<String> = self.command.iter().cloned().collect();
        for (k, v) in &self.entries {
            match v.as_str() {
                "true" => args.push(format!("--{k}")),
                "false" => {}
                _ => args.push(format!("--{k}={v}")),
            }
        }
        args
    }

    /// Entries of `self` not already set in `over`, then everything in `over`.
    pub fn merged_under(&self, over: &RunConfig) -> RunConfig {
        let mut entries = self.entries.clone();
        entries.extend(over.entries.clone());
        RunConfig { command: over.command.clone().or_else(|| self.command.clone()), entries }
    }
}

/// `--name`, but not a negative number such as `-0.5` or `--1`.
fn is_flag(s: &str) -> bool {
    s.strip_prefix("--").is_some_and(|rest| rest.chars().next().is_some_and(|c| c.is_ascii_alphabetic()))
}
