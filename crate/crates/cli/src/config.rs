//! Run configuration: flat `key = value` text under `[section]` headers,
//! overridden by `--set` flags, with the origin of every value recorded.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use qwm_core::cascade::{SteadyMethod, SteadyOptions};
use qwm_core::numfmt::num;
use qwm_core::ode::Tolerance;
use qwm_core::source::SqueezeMode;
use qwm_core::spectral::HarmonicSet;
use qwm_core::{InvalidParam, RabiConvention, SystemParams};
use serde::Serialize;
use thiserror::Error;

/// Marker lines delimiting the configuration block embedded in CSV output.
pub const BLOCK_BEGIN: &str = "--- config ---";
pub const BLOCK_END: &str = "--- end config ---";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Simulate,
    Spectrum,
    Compare,
    Sweep,
    Triplet,
    OracleCheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Simulate,
        Command::Spectrum,
        Command::Compare,
        Command::Sweep,
        Command::Triplet,
        Command::OracleCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Spectrum => "spectrum",
            Command::Compare => "compare",
            Command::Sweep => "sweep",
            Command::Triplet => "triplet",
            Command::OracleCheck => "oracle-check",
        }
    }

    /// Name of the configuration section holding this command's options.
    pub fn section(self) -> &'static str {
        match self {
            Command::OracleCheck => "oracle_check",
            other => other.name(),
        }
    }

    fn from_section(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.section() == s)
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("expected `csv` or `json`, got `{other}`")),
        }
    }
}

/// Which peak model the `spectrum` command evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// Projection of the full cascaded steady state.
    #[default]
    Cascade,
    /// Stationary solution of the effective probe model.
    Stationary,
    /// Weak-drive series of the effective probe model.
    Series,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Cascade => "cascade",
            Model::Stationary => "stationary",
            Model::Series => "series",
        }
    }
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cascade" => Ok(Model::Cascade),
            "stationary" => Ok(Model::Stationary),
            "series" => Ok(Model::Series),
            other => Err(format!("expected `cascade`, `stationary` or `series`, got `{other}`")),
        }
    }
}

pub fn method_name(m: SteadyMethod) -> &'static str {
    match m {
        SteadyMethod::Integrate => "integrate",
        SteadyMethod::HarmonicBalance => "harmonic_balance",
    }
}

pub fn squeeze_name(m: SqueezeMode) -> &'static str {
    match m {
        SqueezeMode::Text => "text",
        SqueezeMode::EqM => "eq_m",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Default,
    File,
    Flag,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Default => "default",
            Origin::File => "file",
            Origin::Flag => "flag",
        }
    }
}

impl FromStr for Origin {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "default" => Ok(Origin::Default),
            "file" => Ok(Origin::File),
            "flag" => Ok(Origin::Flag),
            _ => Err(()),
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{}line {line}: {reason}", file.as_ref().map(|f| format!("{f}: ")).unwrap_or_default())]
    Parse { file: Option<String>, line: usize, reason: String },
    #[error("conflicting subcommands: requested `{requested}` but the configuration holds [{}]", found.join("], ["))]
    ConflictingSubcommands { requested: Command, found: Vec<String> },
    #[error("--set {arg}: {reason}")]
    Flag { arg: String, reason: String },
    #[error("{at}: {source}")]
    InvalidParam { source: InvalidParam, at: String },
    #[error("{at}: invalid `{key}`: {reason}")]
    Invalid { key: String, at: String, reason: String },
    #[error("cannot read configuration `{path}`: {reason}")]
    Read { path: String, reason: String },
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Real,
    Count,
    Convention,
    Harmonics,
    /// A real number or `auto`.
    RealOrAuto,
    Method,
    Squeeze,
    Model,
    RealList,
    Format,
}

fn parse_real(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("expected a number, got `{}`", s.trim()))?;
    if !x.is_finite() {
        return Err(format!("must be finite, got `{}`", s.trim()));
    }
    Ok(x)
}

impl Kind {
    /// Parses `raw` and returns its canonical text form.
    fn canonical(self, raw: &str) -> Result<String, String> {
        let raw = raw.trim();
        match self {
            Kind::Real => parse_real(raw).map(num),
            Kind::Count => {
                raw.parse::<usize>().map(|n| n.to_string()).map_err(|_| format!("expected a count, got `{raw}`"))
            }
            Kind::Convention => RabiConvention::from_str(raw).map(|c| c.to_string()),
            Kind::Harmonics => HarmonicSet::from_str(raw).map(|h| h.to_string()).map_err(|e| e.to_string()),
            Kind::RealOrAuto if raw.eq_ignore_ascii_case("auto") => Ok("auto".to_string()),
            Kind::RealOrAuto => parse_real(raw).map(num),
            Kind::Method => SteadyMethod::from_str(raw).map(|m| method_name(m).to_string()),
            Kind::Squeeze => SqueezeMode::from_str(raw).map(|m| squeeze_name(m).to_string()),
            Kind::Model => Model::from_str(raw).map(|m| m.name().to_string()),
            Kind::RealList => {
                let xs: Result<Vec<String>, String> = raw.split(',').map(|p| parse_real(p).map(num)).collect();
                xs.map(|v| v.join(","))
            }
            Kind::Format => Format::from_str(raw).map(|f| f.name().to_string()),
        }
    }
}

struct KeySpec {
    section: &'static str,
    key: &'static str,
    kind: Kind,
    default: String,
}

const FIXED_SECTIONS: [&str; 3] = ["params", "numerics", "output"];

fn schema() -> Vec<KeySpec> {
    let p = SystemParams::default();
    let key = |section, key, kind, default: &str| KeySpec { section, key, kind, default: default.to_string() };
    let tol = Tolerance::default();
    let steady = SteadyOptions::default();
    vec![
        key("params", "gamma_s", Kind::Real, &num(p.gamma_s)),
        key("params", "gamma_pr", Kind::Real, &num(p.gamma_pr)),
        key("params", "omega_rabi_s", Kind::Real, &num(p.omega_rabi_s)),
        key("params", "omega_rabi_pr", Kind::Real, &num(p.omega_rabi_pr)),
        key("params", "delta", Kind::Real, &num(p.delta)),
        key("params", "delta_omega", Kind::Real, &num(p.delta_omega)),
        key("params", "mu", Kind::Real, &num(p.mu)),
        key("params", "rabi_convention", Kind::Convention, &p.rabi_convention.to_string()),
        key("numerics", "rel_tol", Kind::Real, &num(tol.rel)),
        key("numerics", "abs_tol", Kind::Real, &num(tol.abs)),
        key("numerics", "harmonics", Kind::Harmonics, &HarmonicSet::default().to_string()),
        key("numerics", "transient", Kind::RealOrAuto, "auto"),
        key("numerics", "samples", Kind::Count, &steady.samples.to_string()),
        key("numerics", "periodicity_threshold", Kind::Real, &num(steady.threshold)),
        key("simulate", "t_end", Kind::Real, "20.0"),
        key("simulate", "samples", Kind::Count, "200"),
        key("spectrum", "model", Kind::Model, "cascade"),
        key("spectrum", "steady_method", Kind::Method, "integrate"),
        key("spectrum", "squeeze_mode", Kind::Squeeze, "text"),
        key("spectrum", "series_order", Kind::Count, "4"),
        key("compare", "steady_method", Kind::Method, "integrate"),
        key("compare", "squeeze_mode", Kind::Squeeze, "text"),
        key("sweep", "omega_s_min", Kind::Real, "0.1"),
        key("sweep", "omega_s_max", Kind::Real, "1000.0"),
        key("sweep", "omega_s_points", Kind::Count, "25"),
        key("sweep", "omega_pr_min", Kind::Real, "0.01"),
        key("sweep", "omega_pr_max", Kind::Real, "10.0"),
        key("sweep", "omega_pr_points", Kind::Count, "25"),
        key("sweep", "steady_method", Kind::Method, "harmonic_balance"),
        key("triplet", "omega_min", Kind::RealOrAuto, "auto"),
        key("triplet", "omega_max", Kind::RealOrAuto, "auto"),
        key("triplet", "points", Kind::Count, "401"),
        key("oracle_check", "t_end", Kind::Real, "20.0"),
        key("oracle_check", "samples", Kind::Count, "200"),
        key("oracle_check", "gamma_ratios", Kind::RealList, "0.1,1.0,10.0"),
        key("oracle_check", "omega_s_ratios", Kind::RealList, "0.5,5.0,50.0"),
        key("oracle_check", "omega_pr_values", Kind::RealList, "0.0,0.2"),
        key("oracle_check", "threshold", Kind::Real, "1e-6"),
        key("output", "format", Kind::Format, "csv"),
    ]
}

/// One effective configuration value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub section: &'static str,
    pub key: &'static str,
    pub value: String,
    pub origin: Origin,
    #[serde(skip)]
    file: Option<String>,
    #[serde(skip)]
    line: Option<usize>,
}

impl Resolved {
    /// Human-readable location for error messages.
    pub fn location(&self) -> String {
        match (self.origin, &self.file, self.line) {
            (Origin::Flag, _, _) => format!("flag `{}`", self.key),
            (_, Some(f), Some(l)) => format!("{f}:{l}"),
            (_, None, Some(l)) => format!("line {l}"),
            _ => format!("default `{}`", self.key),
        }
    }
}

/// Configuration text, typically the contents of `--config`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigFile {
    pub name: String,
    pub text: String,
}

/// Raw inputs of [`parse_config`].
#[derive(Debug, Clone, Default)]
pub struct ConfigInput {
    pub file: Option<ConfigFile>,
    /// `key=value` or `section.key=value` overrides.
    pub sets: Vec<String>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Numerics {
    pub tol: Tolerance,
    pub harmonics: HarmonicSet,
    pub transient: Option<f64>,
    pub samples: usize,
    pub threshold: f64,
}

impl Numerics {
    pub fn steady(&self, method: SteadyMethod) -> SteadyOptions {
        SteadyOptions {
            tol: self.tol,
            transient: self.transient,
            samples: self.samples,
            threshold: self.threshold,
            method,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateBlock {
    pub t_end: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumBlock {
    pub model: Model,
    pub method: SteadyMethod,
    pub squeeze: SqueezeMode,
    pub series_order: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareBlock {
    pub method: SteadyMethod,
    pub squeeze: SqueezeMode,
}

/// Log-spaced axis `min..=max` with `points` entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepBlock {
    pub omega_s: Axis,
    pub omega_pr: Axis,
    pub method: SteadyMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripletBlock {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleBlock {
    pub t_end: f64,
    pub samples: usize,
    pub gamma_ratios: Vec<f64>,
    pub omega_s_ratios: Vec<f64>,
    pub omega_pr_values: Vec<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Simulate(SimulateBlock),
    Spectrum(SpectrumBlock),
    Compare(CompareBlock),
    Sweep(SweepBlock),
    Triplet(TripletBlock),
    OracleCheck(OracleBlock),
}

/// Fully validated configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: SystemParams,
    pub numerics: Numerics,
    pub block: Block,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    /// Every effective value in section order.
    pub values: Vec<Resolved>,
}

impl RunConfig {
    pub fn get(&self, section: &str, key: &str) -> Option<&Resolved> {
        self.values.iter().find(|r| r.section == section && r.key == key)
    }

    /// Canonical configuration text, each value annotated with its origin.
    /// Parsing it back yields the same configuration.
    pub fn config_text(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for r in &self.values {
            if r.section != current {
                current = r.section;
                out.push_str(&format!("[{current}]\n"));
            }
            out.push_str(&format!("{} = {} ; {}\n", r.key, r.value, r.origin));
        }
        out
    }
}

/// Lines of configuration text with their line numbers in the original input.
struct Source<'a> {
    lines: Vec<(usize, &'a str)>,
    embedded: bool,
}

/// Recognises the output of an earlier run and extracts its embedded block.
fn extract(text: &str) -> Result<(Option<String>, bool), String> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| format!("not a qwm JSON output: {e}"))?;
        let cfg = v.get("config").and_then(|c| c.as_str()).ok_or("JSON input has no `config` string")?;
        return Ok((Some(cfg.to_string()), true));
    }
    Ok((None, text.lines().next().is_some_and(|l| l.starts_with("# qwm "))))
}

fn source_lines<'a>(text: &'a str, embedded_csv: bool, embedded_json: bool) -> Source<'a> {
    if embedded_json {
        return Source { lines: text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(), embedded: true };
    }
    if !embedded_csv {
        return Source { lines: text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect(), embedded: false };
    }
    let mut inside = false;
    let mut lines = Vec::new();
    for (i, l) in text.lines().enumerate() {
        let Some(body) = l.strip_prefix('#') else { break };
        let body = body.strip_prefix(' ').unwrap_or(body);
        if body == BLOCK_BEGIN {
            inside = true;
        } else if body == BLOCK_END {
            break;
        } else if inside {
            lines.push((i + 1, body));
        }
    }
    Source { lines, embedded: true }
}

/// Splits off a trailing comment; returns the recorded origin for embedded blocks.
fn strip_comment(line: &str) -> (&str, Option<&str>) {
    match line.find([';', '#']) {
        Some(i) => (&line[..i], Some(line[i + 1..].trim())),
        None => (line, None),
    }
}

struct Table {
    specs: Vec<KeySpec>,
    values: Vec<Resolved>,
    command: Command,
}

impl Table {
    fn new(command: Command) -> Self {
        let specs = schema();
        let mut values = Vec::new();
        let order = ["params", "numerics", command.section(), "output"];
        for section in order {
            for s in specs.iter().filter(|s| s.section == section) {
                values.push(Resolved {
                    section: s.section,
                    key: s.key,
                    value: s.default.clone(),
                    origin: Origin::Default,
                    file: None,
                    line: None,
                });
            }
        }
        Table { specs, values, command }
    }

    /// Maps `(section, key)` to a schema entry. Bare keys are looked up in
    /// the active command section first, then in the fixed sections.
    fn lookup(&self, section: Option<&str>, key: &str) -> Result<(&'static str, &'static str, Kind), LookupError> {
        let candidates: Vec<&str> = match section {
            Some(s) => {
                if let Some(c) = Command::from_section(s) {
                    if c != self.command {
                        return Err(LookupError::Conflict(s.to_string()));
                    }
                } else if !FIXED_SECTIONS.contains(&s) {
                    return Err(LookupError::Unknown(format!("unknown section `{s}`")));
                }
                vec![s]
            }
            None => vec![self.command.section(), "params", "numerics", "output"],
        };
        for sec in candidates {
            if let Some(s) = self.specs.iter().find(|s| s.section == sec && s.key == key) {
                return Ok((s.section, s.key, s.kind));
            }
        }
        Err(LookupError::Unknown(match section {
            Some(s) => format!("unknown key `{key}` in [{s}]"),
            None => format!("unknown key `{key}` for `{}`", self.command),
        }))
    }

    fn set(
        &mut self,
        section: &str,
        key: &str,
        value: String,
        origin: Origin,
        file: Option<String>,
        line: Option<usize>,
    ) {
        if let Some(r) = self.values.iter_mut().find(|r| r.section == section && r.key == key) {
            *r = Resolved { section: r.section, key: r.key, value, origin, file, line };
        }
    }

    fn get(&self, section: &str, key: &str) -> &Resolved {
        self.values.iter().find(|r| r.section == section && r.key == key).expect("key present in schema")
    }
}

enum LookupError {
    Conflict(String),
    Unknown(String),
}

fn apply_file(table: &mut Table, file: &ConfigFile) -> Result<(), ConfigError> {
    let (json_cfg, embedded_csv) =
        extract(&file.text).map_err(|reason| ConfigError::Parse { file: Some(file.name.clone()), line: 1, reason })?;
    let src = match &json_cfg {
        Some(cfg) => source_lines(cfg, false, true),
        None => source_lines(&file.text, embedded_csv, false),
    };
    let err = |line: usize, reason: String| ConfigError::Parse { file: Some(file.name.clone()), line, reason };
    let mut section: Option<String> = None;
    let mut conflicts: Vec<String> = Vec::new();
    let mut seen: Vec<(&'static str, &'static str)> = Vec::new();
    for (line_no, raw) in src.lines {
        let (body, comment) = strip_comment(raw);
        let body = body.trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(line_no, format!("malformed section header `{body}`")))?
                .trim();
            if let Some(c) = Command::from_section(name) {
                if c != table.command && !conflicts.iter().any(|x| x == name) {
                    conflicts.push(name.to_string());
                }
            } else if !FIXED_SECTIONS.contains(&name) {
                return Err(err(line_no, format!("unknown section `{name}`")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) =
            body.split_once('=').ok_or_else(|| err(line_no, format!("expected `key = value`, got `{body}`")))?;
        let key = key.trim();
        let (sec, key, kind) = match table.lookup(section.as_deref(), key) {
            Ok(x) => x,
            Err(LookupError::Conflict(_)) => continue,
            Err(LookupError::Unknown(reason)) => return Err(err(line_no, reason)),
        };
        if seen.contains(&(sec, key)) {
            return Err(err(line_no, format!("duplicate key `{key}`")));
        }
        seen.push((sec, key));
        let value = kind.canonical(value).map_err(|r| err(line_no, format!("`{key}`: {r}")))?;
        let origin = match (src.embedded, comment.and_then(|c| c.parse::<Origin>().ok())) {
            (true, Some(o)) => o,
            _ => Origin::File,
        };
        table.set(sec, key, value, origin, Some(file.name.clone()), Some(line_no));
    }
    if !conflicts.is_empty() {
        return Err(ConfigError::ConflictingSubcommands { requested: table.command, found: conflicts });
    }
    Ok(())
}

fn apply_flag(table: &mut Table, arg: &str) -> Result<(), ConfigError> {
    let flag_err = |reason: String| ConfigError::Flag { arg: arg.to_string(), reason };
    let (key, value) = arg.split_once('=').ok_or_else(|| flag_err("expected key=value".to_string()))?;
    let key = key.trim();
    let (section, key) = match key.split_once('.') {
        Some((s, k)) => (Some(s.trim()), k.trim()),
        None => (None, key),
    };
    let (sec, key, kind) = match table.lookup(section, key) {
        Ok(x) => x,
        Err(LookupError::Conflict(s)) => {
            return Err(ConfigError::ConflictingSubcommands { requested: table.command, found: vec![s] })
        }
        Err(LookupError::Unknown(reason)) => return Err(flag_err(reason)),
    };
    let value = kind.canonical(value).map_err(flag_err)?;
    table.set(sec, key, value, Origin::Flag, None, None);
    Ok(())
}

struct Typed<'a> {
    table: &'a Table,
    section: &'static str,
}

impl Typed<'_> {
    fn raw(&self, key: &str) -> &Resolved {
        self.table.get(self.section, key)
    }

    fn invalid(&self, key: &str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invalid { key: key.to_string(), at: self.raw(key).location(), reason: reason.into() }
    }

    fn real(&self, key: &str) -> f64 {
        self.raw(key).value.parse().expect("canonical real")
    }

    fn positive(&self, key: &str) -> Result<f64, ConfigError> {
        let x = self.real(key);
        if x > 0.0 {
            Ok(x)
        } else {
            Err(self.invalid(key, format!("must be positive, got {x}")))
        }
    }

    fn count(&self, key: &str, min: usize) -> Result<usize, ConfigError> {
        let n: usize = self.raw(key).value.parse().expect("canonical count");
        if n < min {
            return Err(self.invalid(key, format!("must be at least {min}, got {n}")));
        }
        Ok(n)
    }

    fn auto(&self, key: &str) -> Option<f64> {
        let v = &self.raw(key).value;
        (v != "auto").then(|| v.parse().expect("canonical real"))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> T {
        match self.raw(key).value.parse() {
            Ok(v) => v,
            Err(_) => unreachable!("canonical values always parse"),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let xs: Vec<f64> = self.raw(key).value.split(',').map(|p| p.parse().expect("canonical real")).collect();
        if xs.is_empty() {
            return Err(self.invalid(key, "must not be empty"));
        }
        Ok(xs)
    }

    fn axis(&self, prefix: &str) -> Result<Axis, ConfigError> {
        let (lo, hi, n) = (format!("{prefix}_min"), format!("{prefix}_max"), format!("{prefix}_points"));
        let min = self.positive(&lo)?;
        let max = self.positive(&hi)?;
        if max < min {
            return Err(self.invalid(&hi, format!("must not be below {lo} = {min}")));
        }
        Ok(Axis { min, max, points: self.count(&n, 1)? })
    }
}

fn build(table: Table, input: &ConfigInput) -> Result<RunConfig, ConfigError> {
    let p = Typed { table: &table, section: "params" };
    let params = SystemParams {
        gamma_s: p.real("gamma_s"),
        gamma_pr: p.real("gamma_pr"),
        omega_rabi_s: p.real("omega_rabi_s"),
        omega_rabi_pr: p.real("omega_rabi_pr"),
        delta: p.real("delta"),
        delta_omega: p.real("delta_omega"),
        mu: p.real("mu"),
        rabi_convention: p.parsed("rabi_convention"),
    };
    if let Err(source) = params.validate() {
        let at = p.raw(source.field).location();
        return Err(ConfigError::InvalidParam { source, at });
    }

    let n = Typed { table: &table, section: "numerics" };
    let tol = Tolerance::new(n.real("rel_tol"), n.real("abs_tol")).map_err(|e| n.invalid("rel_tol", e.to_string()))?;
    let samples = n.count("samples", 512)?;
    if samples % 2 != 0 {
        return Err(n.invalid("samples", format!("must be even, got {samples}")));
    }
    let transient = n.auto("transient");
    if let Some(t) = transient {
        if t < 0.0 {
            return Err(n.invalid("transient", format!("must not be negative, got {t}")));
        }
    }
    let numerics = Numerics {
        tol,
        harmonics: n.parsed("harmonics"),
        transient,
        samples,
        threshold: n.positive("periodicity_threshold")?,
    };

    let c = Typed { table: &table, section: table.command.section() };
    let block = match table.command {
        Command::Simulate => {
            Block::Simulate(SimulateBlock { t_end: c.positive("t_end")?, samples: c.count("samples", 1)? })
        }
        Command::Spectrum => {
            let series_order = c.count("series_order", 1)?;
            if series_order > qwm_core::probe::MAX_SERIES_ORDER {
                return Err(c.invalid("series_order", format!("must be at most {}", qwm_core::probe::MAX_SERIES_ORDER)));
            }
            Block::Spectrum(SpectrumBlock {
                model: c.parsed("model"),
                method: c.parsed("steady_method"),
                squeeze: c.parsed("squeeze_mode"),
                series_order,
            })
        }
        Command::Compare => {
            Block::Compare(CompareBlock { method: c.parsed("steady_method"), squeeze: c.parsed("squeeze_mode") })
        }
        Command::Sweep => Block::Sweep(SweepBlock {
            omega_s: c.axis("omega_s")?,
            omega_pr: c.axis("omega_pr")?,
            method: c.parsed("steady_method"),
        }),
        Command::Triplet => {
            let (lo, hi) = (c.auto("omega_min"), c.auto("omega_max"));
            if let (Some(a), Some(b)) = (lo, hi) {
                if b <= a {
                    return Err(c.invalid("omega_max", format!("must exceed omega_min = {a}")));
                }
            }
            Block::Triplet(TripletBlock { omega_min: lo, omega_max: hi, points: c.count("points", 2)? })
        }
        Command::OracleCheck => Block::OracleCheck(OracleBlock {
            t_end: c.positive("t_end")?,
            samples: c.count("samples", 1)?,
            gamma_ratios: c.list("gamma_ratios")?,
            omega_s_ratios: c.list("omega_s_ratios")?,
            omega_pr_values: c.list("omega_pr_values")?,
            threshold: c.positive("threshold")?,
        }),
    };

    let o = Typed { table: &table, section: "output" };
    let format = o.parsed("format");
    if input.jobs == Some(0) {
        return Err(ConfigError::Invalid {
            key: "jobs".into(),
            at: "flag `--jobs`".into(),
            reason: "must be at least 1".into(),
        });
    }
    Ok(RunConfig {
        command: table.command,
        params,
        numerics,
        block,
        format,
        out: input.out.clone(),
        jobs: input.jobs,
        values: table.values,
    })
}

/// Builds the effective configuration: defaults, then the file, then flags.
pub fn parse_config(command: Command, input: &ConfigInput) -> Result<RunConfig, ConfigError> {
    let mut table = Table::new(command);
    if let Some(file) = &input.file {
        apply_file(&mut table, file)?;
    }
    for arg in &input.sets {
        apply_flag(&mut table, arg)?;
    }
    if let Some(f) = input.format {
        table.set("output", "format", f.name().to_string(), Origin::Flag, None, None);
    }
    build(table, input)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(text: &str) -> ConfigInput {
        ConfigInput { file: Some(ConfigFile { name: "run.ini".into(), text: text.into() }), ..ConfigInput::default() }
    }

    #[test]
    fn empty_config_gives_defaults() {
        let cfg = parse_config(Command::Spectrum, &ConfigInput::default()).unwrap();
        assert_eq!(cfg.params, SystemParams::default());
        assert!(cfg.values.iter().all(|r| r.origin == Origin::Default));
        assert_eq!(cfg.format, Format::Csv);
        assert!(cfg.config_text().contains("[spectrum]\nmodel = cascade ; default\n"));
    }

    #[test]
    fn flag_overrides_file() {
        let mut input = file("[params]\ngamma_s = 10\n");
        input.sets.push("gamma_s=100".into());
        let cfg = parse_config(Command::Spectrum, &input).unwrap();
        assert_eq!(cfg.params.gamma_s, 100.0);
        assert_eq!(cfg.get("params", "gamma_s").unwrap().origin, Origin::Flag);
        let cfg = parse_config(Command::Spectrum, &file("[params]\ngamma_s = 10\n")).unwrap();
        assert_eq!(cfg.get("params", "gamma_s").unwrap().origin, Origin::File);
    }

    #[test]
    fn invalid_param_carries_file_and_line() {
        let err = parse_config(Command::Spectrum, &file("# comment\n[params]\nmu = 1.5\n")).unwrap_err();
        match &err {
            ConfigError::InvalidParam { source, at } => {
                assert_eq!(source.field, "mu");
                assert_eq!(at, "run.ini:3");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_report_line() {
        let err = parse_config(Command::Simulate, &file("[params]\n\ngamma_s 10\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 3, .. }), "{err:?}");
        let err = parse_config(Command::Simulate, &file("[params]\ngamma_s = ten\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err:?}");
        let err = parse_config(Command::Simulate, &file("[nowhere]\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 1, .. }), "{err:?}");
        let err = parse_config(Command::Simulate, &file("[params]\nfoo = 1\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err:?}");
        let err = parse_config(Command::Simulate, &file("mu = 1\nmu = 0.5\n")).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn foreign_command_section_conflicts() {
        let err = parse_config(Command::Simulate, &file("[sweep]\nomega_s_points = 3\n")).unwrap_err();
        assert!(matches!(err, ConfigError::ConflictingSubcommands { requested: Command::Simulate, .. }), "{err:?}");
        let input = ConfigInput { sets: vec!["sweep.omega_s_points=3".into()], ..ConfigInput::default() };
        let err = parse_config(Command::Simulate, &input).unwrap_err();
        assert!(matches!(err, ConfigError::ConflictingSubcommands { .. }), "{err:?}");
    }

    #[test]
    fn bare_keys_resolve_to_active_section() {
        let input =
            ConfigInput { sets: vec!["samples=7".into(), "numerics.samples=600".into()], ..ConfigInput::default() };
        let cfg = parse_config(Command::Simulate, &input).unwrap();
        assert_eq!(cfg.block, Block::Simulate(SimulateBlock { t_end: 20.0, samples: 7 }));
        assert_eq!(cfg.numerics.samples, 600);
    }

    #[test]
    fn values_are_canonicalised() {
        let cfg =
            parse_config(Command::Sweep, &file("[sweep]\nomega_s_max = 1e3\n[numerics]\nharmonics = -3..3\n")).unwrap();
        assert_eq!(cfg.get("sweep", "omega_s_max").unwrap().value, "1000.0");
        assert_eq!(cfg.get("numerics", "harmonics").unwrap().value, "-3,-1,1,3");
    }

    #[test]
    fn embedded_block_round_trips_with_origins() {
        let mut input = file("[params]\nmu = 0.5\n");
        input.sets.push("omega_rabi_pr=0.1".into());
        let cfg = parse_config(Command::Triplet, &input).unwrap();
        let text = cfg.config_text();
        let mut csv = format!("# qwm 0.0.0 triplet\n# {BLOCK_BEGIN}\n");
        for l in text.lines() {
            csv.push_str(&format!("# {l}\n"));
        }
        csv.push_str(&format!("# {BLOCK_END}\n# note = 1\nquantity,value\n"));
        let again = parse_config(Command::Triplet, &file(&csv)).unwrap();
        assert_eq!(again.config_text(), text);
        assert_eq!(again.params, cfg.params);
        let json = serde_json::json!({ "config": text }).to_string();
        let again = parse_config(Command::Triplet, &file(&json)).unwrap();
        assert_eq!(again.config_text(), text);
    }

    #[test]
    fn semantic_checks() {
        let input = ConfigInput { sets: vec!["numerics.samples=513".into()], ..ConfigInput::default() };
        assert!(matches!(parse_config(Command::Compare, &input), Err(ConfigError::Invalid { .. })));
        let input = ConfigInput { sets: vec!["rel_tol=1".into()], ..ConfigInput::default() };
        assert!(matches!(parse_config(Command::Compare, &input), Err(ConfigError::Invalid { .. })));
        let input =
            ConfigInput { sets: vec!["omega_s_min=10".into(), "omega_s_max=1".into()], ..ConfigInput::default() };
        assert!(matches!(parse_config(Command::Sweep, &input), Err(ConfigError::Invalid { .. })));
        let input = ConfigInput { sets: vec!["series_order=5".into()], ..ConfigInput::default() };
        assert!(matches!(parse_config(Command::Spectrum, &input), Err(ConfigError::Invalid { .. })));
        let input = ConfigInput { sets: vec!["gamma_s".into()], ..ConfigInput::default() };
        assert!(matches!(parse_config(Command::Spectrum, &input), Err(ConfigError::Flag { .. })));
    }

    #[test]
    fn format_flag_is_recorded() {
        let input = ConfigInput { format: Some(Format::Json), ..ConfigInput::default() };
        let cfg = parse_config(Command::Triplet, &input).unwrap();
        assert_eq!(cfg.format, Format::Json);
        assert_eq!(cfg.get("output", "format").unwrap().origin, Origin::Flag);
    }
}
