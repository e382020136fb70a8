//! Command-line flags, the optional `key = value` config file, and their
//! resolution into a [`RunConfig`]. Flags win over the file, the file wins
//! over built-in defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use bosefunc::StrategyChoice;
use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};

use crate::error::CliError;
use crate::output::json_number;

#[derive(Debug, Parser)]
#[command(name = "bosefunc", version, about = "Functionals and QFIM of the Bose-Hubbard dimer")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Evaluate F and the QFIM over the gamma_y = 0 disk.
    Sweep(SweepArgs),
    /// Tabulate the small-depletion M_zz expansion over (theta, phi, delta).
    BecMap(BecMapArgs),
    /// Run the verification suite and report each check.
    Verify(VerifyArgs),
    /// Exact ground state of -2t J_x + u sum n(n-1).
    Groundstate(GroundstateArgs),
    /// Entanglement-depth certificates from a QFIM.
    Witness(WitnessArgs),
}

#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// `key = value` file with defaults for any flag below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Interaction strength u (+1 / -1 select the sign only).
    #[arg(long, allow_hyphen_values = true)]
    pub sign: Option<f64>,
    #[arg(long)]
    pub grid: Option<usize>,
    /// auto, dual, direct or closed_form.
    #[arg(long)]
    pub strategy: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    pub format: Option<String>,
    /// Exit with status 2 if any grid point fails.
    #[arg(long)]
    pub strict: bool,
    /// Worker cap; overrides RDMFT_QFI_THREADS.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct BecMapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Number of theta values in [0, pi].
    #[arg(long)]
    pub theta_points: Option<usize>,
    /// Number of phi values in [0, 2 pi).
    #[arg(long)]
    pub phi_points: Option<usize>,
    /// Comma-separated depletions.
    #[arg(long, allow_hyphen_values = true)]
    pub delta: Option<String>,
    /// Also run the constrained search for M_zz at every point.
    #[arg(long)]
    pub numeric: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated check names to run (`eq13` and `eq14` are accepted
    /// for `operator_identity` and `generating_relation`).
    #[arg(long)]
    pub only: Option<String>,
    /// Deliberately break one relation (`generating_relation`, alias `eq14`)
    /// to exercise the harness.
    #[arg(long)]
    pub inject_fault: Option<String>,
}

#[derive(Debug, Args)]
pub struct GroundstateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, allow_hyphen_values = true)]
    pub t: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<f64>,
}

#[derive(Debug, Args)]
pub struct WitnessArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// noon, coherent, twin or fock:K.
    #[arg(long)]
    pub state: Option<String>,
    /// JSON file `{"n_particles": N, "entries": [[..], [..], [..]]}`.
    #[arg(long)]
    pub qfim: Option<PathBuf>,
    /// `gx,gz`: QFIM of the constrained-search minimizer at this 1-RDM.
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<String>,
    /// Semicolon-separated directions `x,y,z`; the three axes by default.
    #[arg(long, allow_hyphen_values = true)]
    pub direction: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Sweep,
    BecMap,
    Verify,
    Groundstate,
    Witness,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Sweep => "sweep",
            Command::BecMap => "bec-map",
            Command::Verify => "verify",
            Command::Groundstate => "groundstate",
            Command::Witness => "witness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (csv or json)")),
        }
    }
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum WitnessSource {
    Noon,
    Coherent,
    Twin,
    Fock(usize),
    File(PathBuf),
    Gamma(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Params {
    Sweep,
    BecMap { theta_points: usize, phi_points: usize, deltas: Vec<f64>, numeric: bool },
    Verify { only: Vec<String>, inject_fault: Option<String> },
    Groundstate { t: f64, u: f64 },
    Witness { source: WitnessSource, directions: Vec<[f64; 3]> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub n_particles: usize,
    pub sign_or_u: f64,
    pub grid: usize,
    pub strategy: StrategyChoice,
    pub strategy_name: String,
    pub seed: u64,
    pub output_path: Option<PathBuf>,
    pub format: Format,
    pub strict: bool,
    pub threads: Option<usize>,
    pub params: Params,
}

pub const VERIFY_CHECKS: [&str; 12] = [
    "operator_identity",
    "closed_form",
    "spot_values",
    "generating_relation",
    "reconstruction",
    "two_coupling",
    "hellmann_feynman",
    "bec_mzz_scaling",
    "bec_f_scaling",
    "variational",
    "stationarity",
    "witness",
];

/// Short names accepted for `--only` and `--inject-fault`.
pub const CHECK_ALIASES: [(&str, &str); 2] = [("eq13", "operator_identity"), ("eq14", "generating_relation")];

/// The fault `--inject-fault` can plant: the generating relation with the wrong prefactor.
pub const FAULTS: [&str; 1] = ["generating_relation"];

fn canonical_check(name: &str) -> String {
    CHECK_ALIASES.iter().find(|(alias, _)| *alias == name).map_or(name, |(_, full)| full).to_string()
}

const FILE_KEYS: [&str; 21] = [
    "n", "sign", "grid", "strategy", "seed", "out", "format", "strict", "threads", "theta-points", "phi-points", "delta", "numeric", "only",
    "inject-fault", "t", "u", "state", "qfim", "gamma", "direction",
];

/// Parses a `key = value` file. `#` starts a comment; keys use the long
/// flag names.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('_', "-");
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(CliError::Usage(format!("config line {}: unknown key '{}'", i + 1, k.trim())));
        }
        if map.insert(key, v.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("config line {}: duplicate key '{}'", i + 1, k.trim())));
        }
    }
    Ok(map)
}

struct Layers {
    file: BTreeMap<String, String>,
}

impl Layers {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config_file(&text)?
            }
            None => BTreeMap::new(),
        };
        Ok(Self { file })
    }

    fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.file.get(key) {
            Some(s) => s.parse().map_err(|e| CliError::Usage(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }

    fn pick_opt<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, CliError>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file.get(key).map(|s| s.parse().map_err(|e| CliError::Usage(format!("config key '{key}': {e}")))).transpose()
    }

    fn pick_flag(&self, flag: bool, key: &str) -> Result<bool, CliError> {
        if flag {
            return Ok(true);
        }
        self.pick(None, key, false)
    }
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("{what}: '{}' is not a number", p.trim()))))
        .collect()
}

fn parse_directions(s: &str) -> Result<Vec<[f64; 3]>, CliError> {
    s.split(';')
        .map(|d| {
            let v = parse_list(d, "direction")?;
            let arr: [f64; 3] = v.try_into().map_err(|_| CliError::Usage(format!("direction '{}' needs three components", d.trim())))?;
            if arr.iter().any(|c| !c.is_finite()) || arr.iter().all(|&c| c == 0.0) {
                return Err(CliError::Usage(format!("direction '{}' must be finite and nonzero", d.trim())));
            }
            Ok(arr)
        })
        .collect()
}

fn parse_state(s: &str) -> Result<WitnessSource, CliError> {
    match s {
        "noon" => Ok(WitnessSource::Noon),
        "coherent" => Ok(WitnessSource::Coherent),
        "twin" => Ok(WitnessSource::Twin),
        other => match other.strip_prefix("fock:").map(str::parse::<usize>) {
            Some(Ok(k)) => Ok(WitnessSource::Fock(k)),
            _ => Err(CliError::Usage(format!("unknown state '{other}' (noon, coherent, twin, fock:K)"))),
        },
    }
}

impl RunConfig {
    pub fn resolve(args: CommandArgs) -> Result<Self, CliError> {
        let (command, common) = match &args {
            CommandArgs::Sweep(a) => (Command::Sweep, &a.common),
            CommandArgs::BecMap(a) => (Command::BecMap, &a.common),
            CommandArgs::Verify(a) => (Command::Verify, &a.common),
            CommandArgs::Groundstate(a) => (Command::Groundstate, &a.common),
            CommandArgs::Witness(a) => (Command::Witness, &a.common),
        };
        let layers = Layers::load(common.config.as_deref())?;
        let default_n = if command == Command::BecMap { 1000 } else { 2 };
        let default_grid = if command == Command::Verify { 12 } else { 50 };
        let default_format = match command {
            Command::Sweep | Command::BecMap => Format::Csv,
            _ => Format::Json,
        };
        let strategy_name: String = layers.pick(common.strategy.clone(), "strategy", "auto".to_string())?;
        let strategy = strategy_name.parse::<StrategyChoice>().map_err(|e| CliError::Usage(e.to_string()))?;
        let cfg_format: Option<String> = layers.pick_opt(common.format.clone(), "format")?;
        let format = match cfg_format {
            Some(f) => f.parse().map_err(CliError::Usage)?,
            None => default_format,
        };
        let threads = layers.pick_opt(common.threads, "threads")?;
        let mut cfg = RunConfig {
            command,
            n_particles: layers.pick(common.n, "n", default_n)?,
            sign_or_u: layers.pick(common.sign, "sign", 1.0)?,
            grid: layers.pick(common.grid, "grid", default_grid)?,
            strategy,
            strategy_name,
            seed: layers.pick(common.seed, "seed", 0x5eed)?,
            output_path: layers.pick_opt(common.out.clone(), "out")?,
            format,
            strict: layers.pick_flag(common.strict, "strict")?,
            threads,
            params: Params::Sweep,
        };
        cfg.params = match args {
            CommandArgs::Sweep(_) => Params::Sweep,
            CommandArgs::BecMap(a) => {
                let deltas: String = layers.pick(a.delta, "delta", "0.1".to_string())?;
                Params::BecMap {
                    theta_points: layers.pick(a.theta_points, "theta-points", 37)?,
                    phi_points: layers.pick(a.phi_points, "phi-points", 36)?,
                    deltas: parse_list(&deltas, "delta")?,
                    numeric: layers.pick_flag(a.numeric, "numeric")?,
                }
            }
            CommandArgs::Verify(a) => {
                let only: Option<String> = layers.pick_opt(a.only, "only")?;
                let only = match only {
                    Some(s) => s.split(',').map(str::trim).filter(|c| !c.is_empty()).map(canonical_check).collect(),
                    None => Vec::new(),
                };
                let fault: Option<String> = layers.pick_opt(a.inject_fault, "inject-fault")?;
                Params::Verify { only, inject_fault: fault.as_deref().map(canonical_check) }
            }
            CommandArgs::Groundstate(a) => Params::Groundstate { t: layers.pick(a.t, "t", 1.0)?, u: layers.pick(a.u, "u", cfg.sign_or_u)? },
            CommandArgs::Witness(a) => {
                let state: Option<String> = layers.pick_opt(a.state, "state")?;
                let qfim: Option<PathBuf> = layers.pick_opt(a.qfim, "qfim")?;
                let gamma: Option<String> = layers.pick_opt(a.gamma, "gamma")?;
                let source = match (state, qfim, gamma) {
                    (None, None, None) => WitnessSource::Noon,
                    (Some(s), None, None) => parse_state(&s)?,
                    (None, Some(p), None) => WitnessSource::File(p),
                    (None, None, Some(g)) => match parse_list(&g, "gamma")?.as_slice() {
                        &[x, z] => WitnessSource::Gamma(x, z),
                        _ => return Err(CliError::Usage("gamma needs two components gx,gz".into())),
                    },
                    _ => return Err(CliError::Usage("give at most one of --state, --qfim, --gamma".into())),
                };
                let dirs: Option<String> = layers.pick_opt(a.direction, "direction")?;
                let directions = match dirs {
                    Some(d) => parse_directions(&d)?,
                    None => vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
                };
                Params::Witness { source, directions }
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Usage(m.to_string()));
        if self.grid < 2 {
            return bad("grid must be at least 2");
        }
        if !self.sign_or_u.is_finite() {
            return bad("sign/u must be finite");
        }
        if self.threads == Some(0) {
            return bad("threads must be positive");
        }
        match &self.params {
            Params::Sweep => {
                if self.n_particles == 0 {
                    return bad("sweep needs n >= 1");
                }
                if self.strategy == StrategyChoice::ClosedForm && (self.n_particles != 2 || self.sign_or_u == 0.0) {
                    return bad("the closed form exists only for n = 2 and u != 0");
                }
                if self.sign_or_u == 0.0 {
                    return bad("sweep needs u != 0");
                }
            }
            Params::BecMap { theta_points, phi_points, deltas, .. } => {
                if self.n_particles < 2 {
                    return bad("bec-map needs n >= 2");
                }
                if *theta_points == 0 || *phi_points == 0 || deltas.is_empty() {
                    return bad("bec-map grids must be nonempty");
                }
                let radius = self.n_particles as f64 / 2.0;
                if deltas.iter().any(|d| !(*d >= 0.0 && *d <= radius)) {
                    return bad("depletions must lie in [0, n/2]");
                }
            }
            Params::Verify { only, inject_fault } => {
                if let Some(c) = only.iter().find(|c| !VERIFY_CHECKS.contains(&c.as_str())) {
                    return Err(CliError::Usage(format!("unknown check '{c}' (one of {})", VERIFY_CHECKS.join(", "))));
                }
                if let Some(f) = inject_fault {
                    if !FAULTS.contains(&f.as_str()) {
                        return Err(CliError::Usage(format!("unknown fault '{f}' ({})", FAULTS.join(", "))));
                    }
                }
            }
            Params::Groundstate { t, u } => {
                if self.n_particles == 0 {
                    return bad("groundstate needs n >= 1");
                }
                if !t.is_finite() || !u.is_finite() {
                    return bad("t and u must be finite");
                }
            }
            Params::Witness { source, .. } => {
                if self.n_particles == 0 && !matches!(source, WitnessSource::File(_)) {
                    return bad("witness needs n >= 1");
                }
                if let WitnessSource::Fock(k) = source {
                    if *k > self.n_particles {
                        return bad("fock:K needs K <= n");
                    }
                }
                if matches!(source, WitnessSource::Gamma(..)) && self.sign_or_u == 0.0 {
                    return bad("witness --gamma needs u != 0");
                }
            }
        }
        Ok(())
    }

    /// Settings echoed into JSON output. Output path and thread count are
    /// left out so that the document depends only on what is computed.
    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("command".into(), self.command.name().into());
        m.insert("n_particles".into(), self.n_particles.into());
        m.insert("sign_or_u".into(), json_number(self.sign_or_u));
        m.insert("grid".into(), self.grid.into());
        m.insert("strategy".into(), self.strategy_name.clone().into());
        m.insert("seed".into(), self.seed.into());
        m.insert("format".into(), self.format.name().into());
        m.insert("strict".into(), self.strict.into());
        match &self.params {
            Params::Sweep => {}
            Params::BecMap { theta_points, phi_points, deltas, numeric } => {
                m.insert("theta_points".into(), (*theta_points).into());
                m.insert("phi_points".into(), (*phi_points).into());
                m.insert("delta".into(), Value::Array(deltas.iter().map(|d| json_number(*d)).collect()));
                m.insert("numeric".into(), (*numeric).into());
            }
            Params::Verify { only, inject_fault } => {
                m.insert("only".into(), Value::Array(only.iter().map(|c| c.clone().into()).collect()));
                m.insert("inject_fault".into(), inject_fault.clone().map_or(Value::Null, Value::String));
            }
            Params::Groundstate { t, u } => {
                m.insert("t".into(), json_number(*t));
                m.insert("u".into(), json_number(*u));
            }
            Params::Witness { source, directions } => {
                let src = match source {
                    WitnessSource::Noon => "noon".to_string(),
                    WitnessSource::Coherent => "coherent".to_string(),
                    WitnessSource::Twin => "twin".to_string(),
                    WitnessSource::Fock(k) => format!("fock:{k}"),
                    WitnessSource::File(p) => format!("file:{}", p.display()),
                    WitnessSource::Gamma(x, z) => format!("gamma:{x},{z}"),
                };
                m.insert("source".into(), src.into());
                m.insert(
                    "directions".into(),
                    Value::Array(directions.iter().map(|d| Value::Array(d.iter().map(|c| json_number(*c)).collect())).collect()),
                );
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(argv: &[&str]) -> Result<RunConfig, CliError> {
        let cli = Cli::try_parse_from(std::iter::once("bosefunc").chain(argv.iter().copied())).map_err(|e| CliError::Usage(e.to_string()))?;
        RunConfig::resolve(cli.command)
    }

    #[test]
    fn defaults() {
        let c = resolve(&["sweep"]).unwrap();
        assert_eq!((c.n_particles, c.grid, c.sign_or_u, c.format), (2, 50, 1.0, Format::Csv));
        assert_eq!(c.strategy, StrategyChoice::Auto);
        let c = resolve(&["bec-map"]).unwrap();
        assert_eq!(c.n_particles, 1000);
        assert_eq!(resolve(&["verify"]).unwrap().format, Format::Json);
    }

    #[test]
    fn flags_parse_signs() {
        assert_eq!(resolve(&["sweep", "--sign", "-1"]).unwrap().sign_or_u, -1.0);
        assert_eq!(resolve(&["sweep", "--sign", "+1"]).unwrap().sign_or_u, 1.0);
        assert_eq!(resolve(&["sweep", "--sign", "2.5"]).unwrap().sign_or_u, 2.5);
    }

    #[test]
    fn config_precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(&path, "# batch\nn = 4\ngrid = 7\nsign=-1\nstrict = true\n").unwrap();
        let p = path.to_str().unwrap();
        let c = resolve(&["sweep", "--config", p, "--grid", "9"]).unwrap();
        assert_eq!((c.n_particles, c.grid, c.sign_or_u, c.strict), (4, 9, -1.0, true));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(resolve(&["sweep", "--grid", "1"]).is_err());
        assert!(resolve(&["sweep", "--format", "xml"]).is_err());
        assert!(resolve(&["sweep", "--strategy", "magic"]).is_err());
        assert!(resolve(&["sweep", "--strategy", "closed_form", "--n", "3"]).is_err());
        assert!(resolve(&["verify", "--only", "nope"]).is_err());
        assert!(resolve(&["verify", "--inject-fault", "eq99"]).is_err());
        assert!(resolve(&["witness", "--state", "noon", "--gamma", "0,1"]).is_err());
        assert!(resolve(&["witness", "--direction", "0,0,0"]).is_err());
        assert!(resolve(&["bec-map", "--delta", "-0.1"]).is_err());
        assert!(parse_config_file("bogus = 1").is_err());
        assert!(parse_config_file("n = 1\nn = 2").is_err());
        assert!(parse_config_file("no equals sign").is_err());
    }

    #[test]
    fn verify_only_list() {
        let c = resolve(&["verify", "--only", "eq13, witness", "--inject-fault", "eq14"]).unwrap();
        let want = Params::Verify { only: vec!["operator_identity".into(), "witness".into()], inject_fault: Some("generating_relation".into()) };
        assert_eq!(c.params, want);
        assert!(resolve(&["verify", "--inject-fault", "witness"]).is_err());
    }
}
