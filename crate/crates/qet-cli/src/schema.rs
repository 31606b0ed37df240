//! Per-subcommand parameter tables. Everything the CLI accepts — flags,
//! config-file keys, defaults and `--help` text — is derived from here.

use std::fmt;
use std::str::FromStr;

/// Type of a parameter value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Real,
    /// A real number or the word `auto`.
    RealOrAuto,
    Count,
    Flag,
    Choice(&'static [&'static str]),
}

impl Kind {
    pub fn hint(&self) -> &'static str {
        match self {
            Kind::Real => "REAL",
            Kind::RealOrAuto => "REAL|auto",
            Kind::Count => "INT",
            Kind::Flag => "BOOL",
            Kind::Choice(_) => "CHOICE",
        }
    }
}

/// A parsed parameter value.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Real(f64),
    Auto,
    Count(u64),
    Flag(bool),
    Choice(String),
}

impl Value {
    /// Parses `text` as a value of `kind`; the error describes the expected type.
    pub fn parse(kind: Kind, text: &str) -> Result<Self, String> {
        let t = text.trim();
        match kind {
            Kind::Real => parse_real(t).map(Value::Real),
            Kind::RealOrAuto if t == "auto" => Ok(Value::Auto),
            Kind::RealOrAuto => parse_real(t).map(Value::Real),
            Kind::Count => t
                .parse::<u64>()
                .map(Value::Count)
                .map_err(|_| format!("expected a non-negative integer, got `{t}`")),
            Kind::Flag => match t {
                "true" | "yes" | "on" | "1" => Ok(Value::Flag(true)),
                "false" | "no" | "off" | "0" => Ok(Value::Flag(false)),
                _ => Err(format!("expected true or false, got `{t}`")),
            },
            Kind::Choice(options) => {
                if options.contains(&t) {
                    Ok(Value::Choice(t.to_string()))
                } else {
                    Err(format!("expected one of {}, got `{t}`", options.join("|")))
                }
            }
        }
    }
}

fn parse_real(t: &str) -> Result<f64, String> {
    match t.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite real number, got `{t}`")),
    }
}

/// Shortest text that parses back to the same value.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(v) => write!(f, "{v:?}"),
            Value::Auto => f.write_str("auto"),
            Value::Count(n) => write!(f, "{n}"),
            Value::Flag(b) => write!(f, "{b}"),
            Value::Choice(s) => f.write_str(s),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ParamSpec {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

impl ParamSpec {
    /// Command-line spelling: `h_a` becomes `--h-a`.
    pub fn flag(&self) -> String {
        flag_name(self.key)
    }
}

pub fn flag_name(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

const fn p(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> ParamSpec {
    ParamSpec { key, kind, default, help }
}

const FAMILIES: &[&str] = &["gauss", "lorentz", "bump"];
const ANGLES: &[&str] = &["energy", "purity", "reoptimized"];
const SLP_SOURCES: &[&str] = &["minimal", "random"];

const MINIMAL: &[ParamSpec] = &[
    p("h", Kind::Real, "1", "local field strength h (> 0)"),
    p("k", Kind::Real, "1", "coupling strength k (> 0)"),
    p("theta", Kind::RealOrAuto, "auto", "Bob's rotation angle; auto picks the extraction-optimal one"),
];

const UNITARY: &[ParamSpec] = &[
    p("h_a", Kind::Real, "1", "field on qubit A (> 0)"),
    p("h_b", Kind::Real, "1", "field on qubit B (> 0)"),
    p("k", Kind::Real, "1", "A–B coupling (> 0)"),
    p("theta", Kind::RealOrAuto, "auto", "angle of Bob's conditional rotation blocks; auto scans for the best one"),
    p("j_an_a", Kind::Real, "72.27", "An–A J-coupling in Hz"),
    p("j_an_b", Kind::Real, "69.68", "An–B J-coupling in Hz"),
    p("t_pulse", Kind::Real, "0.0095", "total pulse time in seconds"),
    p("j_ab", Kind::Real, "1.16", "A–B J-coupling in Hz"),
];

const HARDWARE: &[ParamSpec] = &[
    p("h", Kind::Real, "1", "local field strength h (> 0)"),
    p("k", Kind::Real, "1", "coupling strength k (> 0)"),
    p("shots", Kind::Count, "100000", "shots per estimation circuit"),
    p("noise", Kind::Real, "0", "symmetric per-bit readout flip probability; 0 disables noise"),
    p("mitigate", Kind::Flag, "false", "invert the readout confusion matrix"),
];

const COOLING: &[ParamSpec] = &[
    p("h", Kind::Real, "1", "local field strength h (> 0)"),
    p("k", Kind::Real, "1", "coupling strength k (> 0)"),
    p("beta_min", Kind::Real, "0", "first inverse temperature of the sweep"),
    p("beta_max", Kind::Real, "2", "last inverse temperature of the sweep"),
    p("beta_points", Kind::Count, "9", "number of sweep points"),
    p("eta", Kind::Real, "1", "sharpness of Alice's σx measurement in [0, 1]"),
    p("angles", Kind::Choice(ANGLES), "energy", "Bob's LOCC angles: ground-state energy-optimal, ground-state purity-optimal, or re-optimized for ρ_β"),
    p("h_an", Kind::Real, "1", "ancilla gap of the unitary protocol"),
    p("ppa_qubits", Kind::Count, "3", "register size of the partner-pairing baseline (2 or 3)"),
    p("bath_h", Kind::Real, "1", "bath qubit gap of the partner-pairing baseline"),
    p("probes", Kind::Flag, "false", "also optimize the 18 probe couplings at every β"),
    p("probe_restarts", Kind::Count, "4", "Nelder–Mead restarts of the probe optimization"),
];

const QFT: &[ParamSpec] = &[
    p("family", Kind::Choice(FAMILIES), "gauss", "smearing family of both detectors"),
    p("optimize", Kind::Flag, "false", "search amplitudes and Bob's placement for the deepest well"),
    p("delta", Kind::Real, "1", "smearing width δ (> 0)"),
    p("sigma_a", Kind::Real, "1", "plateau width of Alice's compact bump"),
    p("sigma_b", Kind::Real, "1", "plateau width of Bob's compact bump"),
    p("lambda0", Kind::Real, "1.7724538509055159", "Alice's coupling amplitude"),
    p("mu0", Kind::Real, "2.5", "Bob's coupling amplitude"),
    p("t_signal", Kind::Real, "10", "time T at which Bob acts (> 0)"),
    p("offset", Kind::Real, "1.5", "Bob's position relative to T"),
    p("sigma_y", Kind::Real, "1", "⟨σy⟩ of Alice's detector after the interaction, in [−1, 1]"),
    p("time", Kind::RealOrAuto, "auto", "evaluation time (> T); auto waits until Bob's packets separate"),
    p("points", Kind::Count, "2001", "points of the emitted density profile"),
    p("restarts", Kind::Count, "8", "optimizer restarts"),
    p("max_evals", Kind::Count, "600", "objective evaluations per optimizer restart"),
    p("scaling", Kind::Flag, "false", "also run the Υ ∈ {1,2,4,8} scaling study"),
];

const SLP: &[ParamSpec] = &[
    p("source", Kind::Choice(SLP_SOURCES), "minimal", "minimal-model ground state or random energy-diagonal instances"),
    p("h", Kind::Real, "1", "local field strength h of the minimal model"),
    p("k", Kind::Real, "1", "coupling strength k of the minimal model"),
    p("instances", Kind::Count, "20", "number of random instances"),
    p("dim_a", Kind::Count, "2", "dimension of the operated subsystem"),
    p("dim_b", Kind::Count, "2", "dimension of the other subsystem"),
    p("trials", Kind::Count, "500", "brute-force oracle trials per instance"),
    p("threshold", Kind::Real, "1e-6", "oracle gain counted as extraction"),
];

/// Keys accepted outside any section of a config file.
pub const GLOBAL_KEYS: &[&str] = &["seed", "output", "metrics"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Subcommand {
    Minimal,
    Unitary,
    Hardware,
    Cooling,
    Qft,
    Slp,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Minimal,
        Subcommand::Unitary,
        Subcommand::Hardware,
        Subcommand::Cooling,
        Subcommand::Qft,
        Subcommand::Slp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Minimal => "minimal",
            Subcommand::Unitary => "unitary",
            Subcommand::Hardware => "hardware",
            Subcommand::Cooling => "cooling",
            Subcommand::Qft => "qft",
            Subcommand::Slp => "slp",
        }
    }

    pub fn about(self) -> &'static str {
        match self {
            Subcommand::Minimal => "Energy ledger of the two-qubit minimal protocol",
            Subcommand::Unitary => "Fully unitary three-qubit protocol, extraction bound and timing budget",
            Subcommand::Hardware => "Shot-level circuit estimates with optional readout noise and mitigation",
            Subcommand::Cooling => "Purity of B under LOCC, ancilla and partner-pairing cooling over a β sweep",
            Subcommand::Qft => "Energy density of the 1+1-D field after the detector protocol",
            Subcommand::Slp => "Strong-local-passivity verdicts checked against a brute-force oracle",
        }
    }

    pub fn params(self) -> &'static [ParamSpec] {
        match self {
            Subcommand::Minimal => MINIMAL,
            Subcommand::Unitary => UNITARY,
            Subcommand::Hardware => HARDWARE,
            Subcommand::Cooling => COOLING,
            Subcommand::Qft => QFT,
            Subcommand::Slp => SLP,
        }
    }

    pub fn spec(self, key: &str) -> Option<&'static ParamSpec> {
        self.params().iter().find(|s| s.key == key)
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        for cmd in Subcommand::ALL {
            for s in cmd.params() {
                assert!(Value::parse(s.kind, s.default).is_ok(), "{cmd}.{}", s.key);
            }
        }
    }

    #[test]
    fn keys_are_unique_and_not_global() {
        for cmd in Subcommand::ALL {
            let keys: Vec<_> = cmd.params().iter().map(|s| s.key).collect();
            for (i, k) in keys.iter().enumerate() {
                assert!(!keys[i + 1..].contains(k));
                assert!(!GLOBAL_KEYS.contains(k));
            }
        }
    }

    #[test]
    fn value_display_round_trips() {
        for v in [0.1, -1.0 / 3.0, 1e-300, 72.27, 1.7724538509055159] {
            let s = Value::Real(v).to_string();
            assert_eq!(Value::parse(Kind::Real, &s), Ok(Value::Real(v)));
        }
        assert_eq!(Value::parse(Kind::RealOrAuto, "auto"), Ok(Value::Auto));
        assert!(Value::parse(Kind::Real, "nan").is_err());
        assert!(Value::parse(Kind::Count, "-3").is_err());
        assert!(Value::parse(Kind::Choice(FAMILIES), "box").is_err());
    }
}
