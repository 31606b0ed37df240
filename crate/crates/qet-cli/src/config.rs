//! Run configuration: a flat `key = value` file with one `[section]` per
//! subcommand, overridden by command-line flags.
//!
//! ```text
//! seed = 7
//! output = run.csv
//!
//! [minimal]
//! h = 1
//! k = 0.2
//! ```
//!
//! Keys before the first section (`seed`, `output`, `metrics`) apply to every
//! subcommand. Sections for other subcommands are type-checked too, so a
//! single file can drive several runs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::CliError;
use crate::schema::{flag_name, Subcommand, Value, GLOBAL_KEYS};

/// Fully resolved configuration of one run. Every parameter of the
/// subcommand is present, defaults included.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub params: BTreeMap<String, Value>,
    pub seed: u64,
    pub output_path: Option<String>,
    pub metrics_path: Option<String>,
}

/// Where a resolved value came from; used to attribute errors.
#[derive(Clone, Debug, PartialEq)]
pub enum Origin {
    Default,
    Flag,
    File { path: String, line: usize },
    Env(&'static str),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance(BTreeMap<String, Origin>);

impl Provenance {
    /// Human-readable location of `key`, e.g. `--k` or `run.cfg:4 (k)`.
    pub fn describe(&self, key: &str) -> Option<String> {
        Some(match self.0.get(key)? {
            Origin::Flag => flag_name(key),
            Origin::File { path, line } => format!("{path}:{line} ({key})"),
            Origin::Env(var) => var.to_string(),
            Origin::Default => format!("{key} (default)"),
        })
    }

    pub fn origin(&self, key: &str) -> Option<&Origin> {
        self.0.get(key)
    }
}

/// Raw command-line input, before resolution.
#[derive(Clone, Debug, Default)]
pub struct Invocation {
    pub subcommand: Option<Subcommand>,
    /// (key, text) pairs of the parameter flags that were given.
    pub flags: Vec<(String, String)>,
    pub seed: Option<String>,
    pub output: Option<String>,
    pub metrics: Option<String>,
}

#[derive(Clone, Debug)]
struct Entry {
    text: String,
    line: usize,
}

/// A parsed, type-checked config file.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    path: String,
    globals: BTreeMap<String, Entry>,
    sections: BTreeMap<Subcommand, BTreeMap<String, Entry>>,
}

impl ConfigFile {
    pub fn parse(path: &str, text: &str) -> Result<Self, CliError> {
        let err = |line: usize, msg: String| CliError::Config(format!("{path}:{line}: {msg}"));
        let mut file = ConfigFile {
            path: path.to_string(),
            ..Default::default()
        };
        let mut section: Option<Subcommand> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
                continue;
            }
            if let Some(name) = t.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("malformed section header `{t}`")))?
                    .trim();
                let cmd: Subcommand = name.parse().map_err(|_| err(line, format!("unknown section `[{name}]`")))?;
                if file.sections.contains_key(&cmd) {
                    return Err(err(line, format!("duplicate section `[{name}]`")));
                }
                file.sections.insert(cmd, BTreeMap::new());
                section = Some(cmd);
                continue;
            }
            let (key, value) = t
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{t}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let map = match section {
                None => {
                    if !GLOBAL_KEYS.contains(&key) {
                        return Err(err(
                            line,
                            format!("unknown key `{key}` outside a section (expected one of {})", GLOBAL_KEYS.join(", ")),
                        ));
                    }
                    if key == "seed" {
                        parse_seed(value).map_err(|m| err(line, format!("key `seed`: {m}")))?;
                    } else if value.is_empty() {
                        return Err(err(line, format!("key `{key}`: empty path")));
                    }
                    &mut file.globals
                }
                Some(cmd) => {
                    let spec = cmd
                        .spec(key)
                        .ok_or_else(|| err(line, format!("unknown key `{key}` in section [{cmd}]")))?;
                    Value::parse(spec.kind, value).map_err(|m| err(line, format!("key `{key}`: {m}")))?;
                    file.sections.get_mut(&cmd).expect("section was inserted")
                }
            };
            if map.contains_key(key) {
                return Err(err(line, format!("duplicate key `{key}`")));
            }
            map.insert(
                key.to_string(),
                Entry {
                    text: value.to_string(),
                    line,
                },
            );
        }
        Ok(file)
    }

    fn origin(&self, e: &Entry) -> Origin {
        Origin::File {
            path: self.path.clone(),
            line: e.line,
        }
    }
}

pub fn parse_seed(text: &str) -> Result<u64, String> {
    text.trim()
        .parse::<u64>()
        .map_err(|_| format!("expected a 64-bit unsigned integer, got `{}`", text.trim()))
}

/// Resolves a run configuration. Precedence, highest first: flags, the
/// config file, `QET_SEED` (seed only), built-in defaults.
pub fn parse_config(
    inv: &Invocation,
    file: Option<&ConfigFile>,
    env_seed: Option<&str>,
) -> Result<(RunConfig, Provenance), CliError> {
    let cmd = inv
        .subcommand
        .ok_or_else(|| CliError::Config("no subcommand given".into()))?;
    let mut params = BTreeMap::new();
    let mut prov = Provenance::default();
    let section = file.and_then(|f| f.sections.get(&cmd));

    for spec in cmd.params() {
        let (text, origin) = if let Some((_, t)) = inv.flags.iter().rev().find(|(k, _)| k == spec.key) {
            (t.as_str(), Origin::Flag)
        } else if let Some(e) = section.and_then(|s| s.get(spec.key)) {
            (e.text.as_str(), file.expect("section implies file").origin(e))
        } else {
            (spec.default, Origin::Default)
        };
        let v = Value::parse(spec.kind, text).map_err(|m| {
            let place = match &origin {
                Origin::File { path, line } => format!("{path}:{line}: key `{}`", spec.key),
                _ => format!("invalid value for {}", spec.flag()),
            };
            CliError::Config(format!("{cmd}: {place}: {m}"))
        })?;
        params.insert(spec.key.to_string(), v);
        prov.0.insert(spec.key.to_string(), origin);
    }
    for (k, _) in &inv.flags {
        if cmd.spec(k).is_none() {
            return Err(CliError::Config(format!("{cmd}: unknown flag {}", flag_name(k))));
        }
    }

    let global = |key: &str| file.and_then(|f| f.globals.get(key).map(|e| (e.text.clone(), f.origin(e))));
    let seed = if let Some(t) = &inv.seed {
        prov.0.insert("seed".into(), Origin::Flag);
        parse_seed(t).map_err(|m| CliError::Config(format!("invalid value for --seed: {m}")))?
    } else if let Some((t, o)) = global("seed") {
        prov.0.insert("seed".into(), o);
        parse_seed(&t).map_err(CliError::Config)?
    } else if let Some(t) = env_seed {
        prov.0.insert("seed".into(), Origin::Env("QET_SEED"));
        parse_seed(t).map_err(|m| CliError::Config(format!("invalid value for QET_SEED: {m}")))?
    } else {
        prov.0.insert("seed".into(), Origin::Default);
        0
    };
    let path = |flag: &Option<String>, key: &str| flag.clone().or_else(|| global(key).map(|(t, _)| t));

    Ok((
        RunConfig {
            subcommand: cmd,
            params,
            seed,
            output_path: path(&inv.output, "output"),
            metrics_path: path(&inv.metrics, "metrics"),
        },
        prov,
    ))
}

impl RunConfig {
    /// Config-file text that resolves back to this configuration.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "seed = {}", self.seed).unwrap();
        if let Some(p) = &self.output_path {
            writeln!(s, "output = {p}").unwrap();
        }
        if let Some(p) = &self.metrics_path {
            writeln!(s, "metrics = {p}").unwrap();
        }
        writeln!(s, "[{}]", self.subcommand).unwrap();
        for spec in self.subcommand.params() {
            writeln!(s, "{} = {}", spec.key, self.params[spec.key]).unwrap();
        }
        s
    }

    /// Parses text produced by [`RunConfig::to_config_text`].
    pub fn from_config_text(origin: &str, text: &str) -> Result<Self, CliError> {
        let file = ConfigFile::parse(origin, text)?;
        let mut cmds = file.sections.keys();
        let cmd = match (cmds.next(), cmds.next()) {
            (Some(&c), None) => c,
            _ => return Err(CliError::Config(format!("{origin}: expected exactly one section"))),
        };
        let inv = Invocation {
            subcommand: Some(cmd),
            ..Default::default()
        };
        parse_config(&inv, Some(&file), None).map(|(c, _)| c)
    }

    fn get(&self, key: &str) -> &Value {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not a parameter of {}", self.subcommand))
    }

    pub fn real(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Real(v) => *v,
            v => panic!("`{key}` is not real: {v:?}"),
        }
    }

    /// `None` for `auto`.
    pub fn real_or_auto(&self, key: &str) -> Option<f64> {
        match self.get(key) {
            Value::Real(v) => Some(*v),
            Value::Auto => None,
            v => panic!("`{key}` is not real: {v:?}"),
        }
    }

    pub fn count(&self, key: &str) -> u64 {
        match self.get(key) {
            Value::Count(n) => *n,
            v => panic!("`{key}` is not a count: {v:?}"),
        }
    }

    pub fn flag(&self, key: &str) -> bool {
        match self.get(key) {
            Value::Flag(b) => *b,
            v => panic!("`{key}` is not a flag: {v:?}"),
        }
    }

    pub fn choice(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Choice(s) => s,
            v => panic!("`{key}` is not a choice: {v:?}"),
        }
    }
}
