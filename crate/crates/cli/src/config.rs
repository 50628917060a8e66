//! `--config FILE`: TOML defaults for flags.
//!
//! Keys are flag names (`pfa_min` and `pfa-min` both work). Top-level keys
//! apply to every subcommand that has such a flag; a table named after the
//! subcommand (`[roc]`, `[sweep-kappa]`) applies to that subcommand and wins
//! over top-level keys. Flags given on the command line always win.

use std::collections::BTreeMap;

use anyhow::Context;
use clap::CommandFactory;

use crate::args::Cli;
use crate::{CliError, CliResult};

fn normalize(key: &str) -> String {
    key.replace('_', "-")
}

fn scalar(v: &toml::Value) -> CliResult<String> {
    match v {
        toml::Value::String(s) => Ok(s.clone()),
        toml::Value::Integer(i) => Ok(i.to_string()),
        toml::Value::Float(f) => Ok(f.to_string()),
        other => Err(CliError::Usage(format!("unsupported config value {other}"))),
    }
}

/// Tokens for one key, or none when a boolean flag is off.
fn tokens(flag: &str, v: &toml::Value) -> CliResult<Vec<String>> {
    let name = format!("--{flag}");
    Ok(match v {
        toml::Value::Boolean(true) => vec![name],
        toml::Value::Boolean(false) => vec![],
        toml::Value::Array(items) => {
            let mut out = vec![name];
            for item in items {
                out.push(scalar(item)?);
            }
            out
        }
        other => vec![name, scalar(other)?],
    })
}

fn config_path(argv: &[String]) -> CliResult<Option<String>> {
    for (i, a) in argv.iter().enumerate() {
        if a == "--config" {
            return argv
                .get(i + 1)
                .cloned()
                .map(Some)
                .ok_or_else(|| CliError::Usage("--config needs a file".into()));
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Ok(Some(p.to_string()));
        }
    }
    Ok(None)
}

/// Returns `argv` with config-file values inserted right after the subcommand
/// for every flag not already present.
pub fn merge_config(argv: Vec<String>) -> CliResult<Vec<String>> {
    let Some(path) = config_path(&argv)? else {
        return Ok(argv);
    };
    let cmd = Cli::command();
    let Some(pos) = argv
        .iter()
        .position(|a| cmd.get_subcommands().any(|s| s.get_name() == a))
    else {
        // let clap report the missing subcommand
        return Ok(argv);
    };
    let sub_name = argv[pos].clone();
    let sub = cmd.find_subcommand(&sub_name).expect("found above");
    let known: Vec<String> = sub
        .get_arguments()
        .filter_map(|a| a.get_long().map(str::to_string))
        .collect();

    let text =
        std::fs::read_to_string(&path).with_context(|| format!("reading config file {path}"))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| CliError::Usage(format!("config file {path}: {e}")))?;

    let mut values: BTreeMap<String, toml::Value> = BTreeMap::new();
    for (k, v) in &table {
        if !v.is_table() && known.contains(&normalize(k)) {
            values.insert(normalize(k), v.clone());
        }
    }
    for (name, section) in &table {
        if let toml::Value::Table(t) = section {
            if normalize(name) != sub_name {
                continue;
            }
            for (k, v) in t {
                let flag = normalize(k);
                if !known.contains(&flag) {
                    return Err(CliError::Usage(format!(
                        "config section [{name}] has unknown key {k}"
                    )));
                }
                values.insert(flag, v.clone());
            }
        }
    }
    values.remove("config");

    let user = &argv[pos + 1..];
    let given = |flag: &str| {
        let long = format!("--{flag}");
        let eq = format!("--{flag}=");
        user.iter().any(|a| *a == long || a.starts_with(&eq))
    };
    let mut inserted = Vec::new();
    for (flag, v) in &values {
        if !given(flag) {
            inserted.extend(tokens(flag, v)?);
        }
    }
    let mut out = argv[..=pos].to_vec();
    out.extend(inserted);
    out.extend_from_slice(user);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(str::to_string).collect()
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(
            &path,
            "seed = 5\nrho0 = 0.4\n[roc]\nrho = 0.2\nkappa = [0.1, 0.2]\nn = 10\n",
        )
        .unwrap();
        let a = merge_config(argv(&format!(
            "nrdetect --config {} roc --n 20",
            path.display()
        )))
        .unwrap();
        let joined = a.join(" ");
        assert!(joined.contains("--kappa 0.1 0.2"));
        assert!(joined.contains("--rho 0.2"));
        assert!(joined.contains("--seed 5"));
        // rho0 belongs to another subcommand and is skipped
        assert!(!joined.contains("rho0"));
        assert!(joined.ends_with("--n 20"));
        assert_eq!(joined.matches("--n ").count(), 1);
    }

    #[test]
    fn unknown_section_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "[roc]\nbogus = 1\n").unwrap();
        let r = merge_config(argv(&format!("nrdetect --config {} roc", path.display())));
        assert!(matches!(r, Err(CliError::Usage(_))));
    }

    #[test]
    fn no_config_is_identity() {
        let a = argv("nrdetect roc --rho 0.1");
        assert_eq!(merge_config(a.clone()).unwrap(), a);
    }
}
