//! Command-line runner for the `qet-core` simulations.
//!
//! Each subcommand takes its parameters from flags, a `--config` file and
//! built-in defaults (in that order of precedence), runs one scenario and
//! writes a CSV table plus, when a destination is known, a JSON metrics
//! sidecar.

pub mod config;
pub mod error;
pub mod run;
pub mod schema;
pub mod table;

use std::ffi::OsString;
use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Arg, ArgAction, ArgMatches, Command};

use config::{parse_config, ConfigFile, Invocation, Provenance, RunConfig};
use error::CliError;
use schema::{Kind, Subcommand};

pub const SEED_ENV: &str = "QET_SEED";

/// The full clap command tree, generated from the parameter tables.
pub fn command() -> Command {
    let mut cmd = Command::new("qet")
        .version(run::VERSION)
        .about("Quantum energy teleportation scenario runner")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for sub in Subcommand::ALL {
        let mut c = Command::new(sub.name())
            .about(sub.about())
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value config file"))
            .arg(
                Arg::new("seed")
                    .long("seed")
                    .value_name("U64")
                    .help(format!("RNG seed [fallback: ${SEED_ENV}, then 0]")),
            )
            .arg(Arg::new("output").long("output").short('o').value_name("PATH").help("CSV destination [default: stdout]"))
            .arg(
                Arg::new("metrics")
                    .long("metrics")
                    .value_name("PATH")
                    .help("JSON metrics destination [default: output path with .json extension]"),
            )
            .arg(
                Arg::new("deterministic")
                    .long("deterministic")
                    .action(ArgAction::SetTrue)
                    .help("omit the timestamp so repeated runs are byte-identical"),
            );
        for spec in sub.params() {
            let mut a = Arg::new(spec.key)
                .long(spec.flag().trim_start_matches("--").to_string())
                .value_name(spec.kind.hint())
                .help(format!("{} [default: {}]", spec.help, spec.default));
            a = match spec.kind {
                Kind::Flag => a.num_args(0..=1).default_missing_value("true"),
                Kind::Real | Kind::RealOrAuto => a.allow_negative_numbers(true),
                Kind::Choice(options) => a.help(format!("{} [{}] [default: {}]", spec.help, options.join("|"), spec.default)),
                Kind::Count => a,
            };
            c = c.arg(a);
        }
        cmd = cmd.subcommand(c);
    }
    cmd
}

/// Collects the raw invocation from parsed matches.
pub fn invocation(matches: &ArgMatches) -> (Invocation, Option<String>, bool) {
    let (name, sub) = matches.subcommand().expect("subcommand is required");
    let cmd: Subcommand = name.parse().expect("clap only accepts known subcommands");
    let get = |id: &str| sub.get_one::<String>(id).cloned();
    let flags = cmd
        .params()
        .iter()
        .filter_map(|s| get(s.key).map(|v| (s.key.to_string(), v)))
        .collect();
    (
        Invocation {
            subcommand: Some(cmd),
            flags,
            seed: get("seed"),
            output: get("output"),
            metrics: get("metrics"),
        },
        get("config"),
        sub.get_flag("deterministic"),
    )
}

/// Reads the config file (if any) and resolves the run configuration.
pub fn resolve(inv: &Invocation, config_path: Option<&str>) -> Result<(RunConfig, Provenance), CliError> {
    let file = match config_path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(format!("cannot read config {p}"), e))?;
            Some(ConfigFile::parse(p, &text)?)
        }
        None => None,
    };
    let env_seed = std::env::var(SEED_ENV).ok();
    parse_config(inv, file.as_ref(), env_seed.as_deref())
}

/// Sidecar destination: explicit, else the CSV path with a `.json` extension.
pub fn metrics_destination(cfg: &RunConfig) -> Option<String> {
    cfg.metrics_path.clone().or_else(|| {
        cfg.output_path
            .as_ref()
            .map(|p| Path::new(p).with_extension("json").to_string_lossy().into_owned())
    })
}

/// Resolves, runs and writes outputs. Returns the CSV text for stdout when
/// no output path is configured.
pub fn execute(inv: &Invocation, config_path: Option<&str>, deterministic: bool) -> Result<Option<String>, CliError> {
    let (cfg, prov) = resolve(inv, config_path)?;
    let timestamp = (!deterministic).then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
    let out = run::run(&cfg, timestamp)
        .map_err(|e| CliError::from_module(cfg.subcommand.name(), e, |k| prov.describe(k)))?;
    let csv = out.table.to_csv();
    if let Some(path) = metrics_destination(&cfg) {
        let text = serde_json::to_string_pretty(&out.metrics).expect("metrics are plain JSON") + "\n";
        fs::write(&path, text).map_err(|e| CliError::io(format!("cannot write {path}"), e))?;
    }
    match &cfg.output_path {
        Some(path) => {
            fs::write(path, csv).map_err(|e| CliError::io(format!("cannot write {path}"), e))?;
            Ok(None)
        }
        None => Ok(Some(csv)),
    }
}

/// Entry point shared by the binary and tests; returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (inv, config_path, deterministic) = invocation(&matches);
    match execute(&inv, config_path.as_deref(), deterministic) {
        Ok(Some(csv)) => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(csv.as_bytes()) {
                Ok(()) => 0,
                Err(e) => {
                    eprintln!("error: {}", CliError::io("cannot write to stdout", e));
                    4
                }
            }
        }
        Ok(None) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_is_well_formed() {
        command().debug_assert();
    }

    #[test]
    fn negative_reals_reach_validation() {
        let m = command().try_get_matches_from(["qet", "minimal", "--k", "-1"]).unwrap();
        let (inv, _, _) = invocation(&m);
        assert_eq!(inv.flags, vec![("k".to_string(), "-1".to_string())]);
    }

    #[test]
    fn bare_boolean_flag_means_true() {
        let m = command().try_get_matches_from(["qet", "qft", "--optimize", "--family", "lorentz"]).unwrap();
        let (inv, _, _) = invocation(&m);
        assert!(inv.flags.contains(&("optimize".to_string(), "true".to_string())));
    }

    #[test]
    fn sidecar_defaults_next_to_output() {
        let mut cfg = RunConfig::from_config_text("t", "seed = 1\noutput = out/run.csv\n[minimal]\n").unwrap();
        assert_eq!(metrics_destination(&cfg).as_deref(), Some("out/run.json"));
        cfg.output_path = None;
        assert_eq!(metrics_destination(&cfg), None);
    }
}
