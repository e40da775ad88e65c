//! Flat `key = value` config files merged into the argument list.
//!
//! Each entry becomes `--key value` inserted right after the subcommand, so
//! clap validates it like any flag. Keys given on the command line win.
//! `true` turns into a bare switch and `false` drops the entry.

use std::fs;
use std::path::Path;

use crate::CliError;

pub fn parse(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Config {
            line: idx + 1,
            message: format!("expected `key = value`, found {line:?}"),
        })?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key.starts_with('-') {
            return Err(CliError::Config {
                line: idx + 1,
                message: format!("invalid key {key:?}"),
            });
        }
        entries.push((key, value.trim().to_string()));
    }
    Ok(entries)
}

/// Returns `args` with the config file named by `--config` spliced in.
pub fn merge_args(args: Vec<String>, subcommands: &[&str]) -> Result<Vec<String>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let Some(sub_idx) = args
        .iter()
        .skip(1)
        .position(|a| subcommands.contains(&a.as_str()))
    else {
        return Ok(args);
    };
    let sub_idx = sub_idx + 1;
    let text = fs::read_to_string(Path::new(&path)).map_err(|source| CliError::Io {
        path: path.clone().into(),
        source,
    })?;
    let given: Vec<&str> = args
        .iter()
        .filter_map(|a| a.strip_prefix("--"))
        .map(|a| a.split('=').next().unwrap_or(a))
        .collect();

    let mut injected = Vec::new();
    for (key, value) in parse(&text)? {
        if key == "config" || given.contains(&key.as_str()) {
            continue;
        }
        match value.as_str() {
            "true" => injected.push(format!("--{key}")),
            "false" => {}
            _ => {
                injected.push(format!("--{key}"));
                injected.push(value);
            }
        }
    }
    let mut merged = args[..=sub_idx].to_vec();
    merged.extend(injected);
    merged.extend_from_slice(&args[sub_idx + 1..]);
    Ok(merged)
}

fn config_path(args: &[String]) -> Option<String> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        if a == "--config" {
            return it.next().cloned();
        }
        if let Some(p) = a.strip_prefix("--config=") {
            return Some(p.to_string());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn argv(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn parses_comments_and_blank_lines() {
        let e = parse("# header\n\nm = 3.34  # detections\nps=0.935\noptimize_m = true\n").unwrap();
        assert_eq!(
            e,
            vec![
                ("m".into(), "3.34".into()),
                ("ps".into(), "0.935".into()),
                ("optimize-m".into(), "true".into()),
            ]
        );
        assert!(matches!(
            parse("a = 1\nbroken\n"),
            Err(CliError::Config { line: 2, .. })
        ));
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "m = 2\nreps = 3\noptimize-m = false\nverbose = true").unwrap();
        let path = f.path().to_str().unwrap();
        let args = argv(&format!("twoway --config {path} protocol --m 5"));
        let merged = merge_args(args, &["protocol"]).unwrap();
        assert_eq!(
            merged,
            argv(&format!(
                "twoway --config {path} protocol --reps 3 --verbose --m 5"
            ))
        );
    }

    #[test]
    fn no_config_is_identity() {
        let args = argv("twoway protocol --m 5");
        assert_eq!(merge_args(args.clone(), &["protocol"]).unwrap(), args);
    }
}
