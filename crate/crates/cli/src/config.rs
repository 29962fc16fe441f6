//! Optional `key=value` config files. Keys are long flag names; values on
//! the command line take precedence.

use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::CommandFactory;

use crate::Cli;

/// Pulls `--config <path>` out of the arguments and returns the config
/// entries rewritten as flags. Keys also given on the command line are
/// dropped from the file.
pub fn expand(args: Vec<String>) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(args.len());
    let mut config = None;
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().context("--config needs a path")?);
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    if rest.len() < 2 {
        bail!("--config must follow a subcommand");
    }
    let injected = flags_from_file(Path::new(&path), &rest[1], &rest[2..])?;
    let mut out = vec![rest[0].clone(), rest[1].clone()];
    out.extend(injected);
    out.extend(rest.into_iter().skip(2));
    Ok(out)
}

fn flags_from_file(path: &Path, subcommand: &str, given: &[String]) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let command = Cli::command();
    let Some(sub) = command.find_subcommand(subcommand) else {
        return Ok(Vec::new());
    };
    let mut flags = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected key=value", path.display(), n + 1);
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key)) else {
            bail!("{}:{}: `{key}` is not an option of `{subcommand}`", path.display(), n + 1);
        };
        let flag = format!("--{key}");
        if given.iter().any(|g| *g == flag || g.starts_with(&format!("{flag}="))) {
            continue;
        }
        if arg.get_action().takes_values() {
            flags.push(format!("--{key}"));
            flags.push(value.to_string());
        } else {
            match value {
                "true" | "1" | "yes" => flags.push(format!("--{key}")),
                "false" | "0" | "no" => {}
                _ => bail!("{}:{}: `{key}` expects true or false", path.display(), n + 1),
            }
        }
    }
    Ok(flags)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn file_values_yield_to_command_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# comment\nlr = 0.001\nseed=3\nsynthetic=true\n").unwrap();
        let cmd = format!("fgseg train --config {} --seed=9", path.display());
        let out = expand(args(&cmd)).unwrap();
        assert_eq!(out, args("fgseg train --lr 0.001 --synthetic --seed=9"));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.cfg");
        std::fs::write(&path, "nonsense=1\n").unwrap();
        assert!(expand(args(&format!("fgseg train --config {}", path.display()))).is_err());
        std::fs::write(&path, "lr 0.1\n").unwrap();
        assert!(expand(args(&format!("fgseg train --config {}", path.display()))).is_err());
        std::fs::write(&path, "synthetic=maybe\n").unwrap();
        assert!(expand(args(&format!("fgseg train --config {}", path.display()))).is_err());
    }

    #[test]
    fn no_config_is_identity() {
        assert_eq!(expand(args("fgseg info --seed 2")).unwrap(), args("fgseg info --seed 2"));
    }
}
