//! Run configuration: a small line-oriented `key = value` format.
//!
//! ```text
//! command = amplitude
//! seed = 1
//!
//! [params]
//! nu = 0.8
//! chi = 1.0
//!
//! [grid]
//! k = 0.1..1.5:8     # eight evenly spaced points, endpoints included
//! p = 0.3, 0.7
//!
//! [output]
//! path = amps.csv
//! ```
//!
//! Every problem in a file is collected before reporting, each with its line.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::path::PathBuf;

use dtscatter_core::spectral::{Band, DiracWalk};
use dtscatter_core::thirring::{check_momentum, ThirringParams};
use dtscatter_core::trotter::ContinuousModel;
use serde_json::{json, Map, Value as Json};

use crate::table::Format;
use crate::wavepacket::{GaussianPacketSpec, PacketChannel, WalkModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Dispersion,
    Amplitude,
    Born,
    Dyson,
    Trotter,
    Wavepacket,
    Sweep,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Self::Dispersion,
        Self::Amplitude,
        Self::Born,
        Self::Dyson,
        Self::Trotter,
        Self::Wavepacket,
        Self::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Dispersion => "dispersion",
            Self::Amplitude => "amplitude",
            Self::Born => "born",
            Self::Dyson => "dyson",
            Self::Trotter => "trotter",
            Self::Wavepacket => "wavepacket",
            Self::Sweep => "sweep",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketModel {
    Thirring,
    Single,
}

/// Every physical and numerical knob, with defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub nu: f64,
    pub chi: f64,
    pub p: f64,
    pub k: f64,
    pub band: Band,
    /// Highest Born order kept.
    pub n_max: usize,
    /// Partial sums reported as `born_<N>` columns.
    pub born_orders: Vec<usize>,
    pub model: PacketModel,
    pub sigma: f64,
    pub extent: usize,
    pub x0: i64,
    /// Sandwich half-length; 0 picks the traversal time.
    pub steps: usize,
    pub snapshot: Option<PathBuf>,
    pub sites: usize,
    pub hopping: f64,
    pub eps: f64,
    pub potential: Vec<(usize, f64)>,
    /// Trotter step as a fraction of the certified threshold `m*`.
    pub tau_scale: f64,
}

impl Default for Params {
    fn default() -> Self {
        let toy = ContinuousModel::toy();
        Self {
            nu: 0.8,
            chi: 1.0,
            p: 0.3,
            k: 0.7,
            band: Band::Plus,
            n_max: 60,
            born_orders: vec![1, 2, 5, 10, 20, 60],
            model: PacketModel::Thirring,
            sigma: 64.0,
            extent: 4096,
            x0: 0,
            steps: 0,
            snapshot: None,
            sites: toy.sites,
            hopping: toy.hopping,
            eps: toy.eps,
            potential: toy.potential,
            tau_scale: 1.0,
        }
    }
}

/// Keys accepted in `[params]`.
pub const PARAM_KEYS: [&str; 18] = [
    "nu", "chi", "p", "k", "band", "n_max", "born_orders", "model", "sigma", "extent", "x0", "steps", "snapshot",
    "sites", "hopping", "eps", "potential", "tau_scale",
];

/// Keys that can be swept in `[grid]`.
pub const GRID_KEYS: [&str; 13] = [
    "nu", "chi", "p", "k", "sigma", "hopping", "eps", "tau_scale", "n_max", "extent", "x0", "steps", "sites",
];

impl Params {
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), String> {
        match key {
            "band" => {
                self.band = match raw {
                    "plus" | "+" | "1" | "+1" => Band::Plus,
                    "minus" | "-" | "-1" => Band::Minus,
                    _ => return Err(format!("`band` expects plus or minus, got `{raw}`")),
                }
            }
            "born_orders" => {
                self.born_orders = split_list(raw)
                    .map(|s| s.parse::<usize>().map_err(|_| format!("`born_orders` expects integers, got `{s}`")))
                    .collect::<Result<_, _>>()?
            }
            "model" => {
                self.model = match raw {
                    "thirring" => PacketModel::Thirring,
                    "single" => PacketModel::Single,
                    _ => return Err(format!("`model` expects thirring or single, got `{raw}`")),
                }
            }
            "snapshot" => self.snapshot = (!raw.is_empty()).then(|| PathBuf::from(raw)),
            "potential" => {
                self.potential = split_list(raw)
                    .map(|s| {
                        let (site, v) = s.split_once(':').ok_or_else(|| format!("`potential` entries look like site:value, got `{s}`"))?;
                        let site = site.trim().parse::<usize>().map_err(|_| format!("bad potential site `{site}`"))?;
                        let v = parse_real(v.trim()).map_err(|_| format!("bad potential value `{v}`"))?;
                        Ok((site, v))
                    })
                    .collect::<Result<_, String>>()?
            }
            _ if GRID_KEYS.contains(&key) => {
                let x = parse_real(raw).map_err(|_| format!("`{key}` expects a number, got `{raw}`"))?;
                self.set_number(key, x)?
            }
            _ => return Err(format!("unknown parameter `{key}`")),
        }
        Ok(())
    }

    /// Assigns a numeric key; integer keys reject fractional values.
    pub fn set_number(&mut self, key: &str, x: f64) -> Result<(), String> {
        let int = |x: f64| -> Result<i64, String> {
            if x.fract() == 0.0 && x.abs() < 1e15 {
                Ok(x as i64)
            } else {
                Err(format!("`{key}` expects an integer, got {x}"))
            }
        };
        let count = |x: f64| -> Result<usize, String> {
            usize::try_from(int(x)?).map_err(|_| format!("`{key}` must be non-negative, got {x}"))
        };
        match key {
            "nu" => self.nu = x,
            "chi" => self.chi = x,
            "p" => self.p = x,
            "k" => self.k = x,
            "sigma" => self.sigma = x,
            "hopping" => self.hopping = x,
            "eps" => self.eps = x,
            "tau_scale" => self.tau_scale = x,
            "n_max" => self.n_max = count(x)?,
            "extent" => self.extent = count(x)?,
            "x0" => self.x0 = int(x)?,
            "steps" => self.steps = count(x)?,
            "sites" => self.sites = count(x)?,
            _ => return Err(format!("`{key}` cannot be swept")),
        }
        Ok(())
    }

    pub fn get_number(&self, key: &str) -> Option<f64> {
        Some(match key {
            "nu" => self.nu,
            "chi" => self.chi,
            "p" => self.p,
            "k" => self.k,
            "sigma" => self.sigma,
            "hopping" => self.hopping,
            "eps" => self.eps,
            "tau_scale" => self.tau_scale,
            "n_max" => self.n_max as f64,
            "extent" => self.extent as f64,
            "x0" => self.x0 as f64,
            "steps" => self.steps as f64,
            "sites" => self.sites as f64,
            _ => return None,
        })
    }

    pub fn echo(&self) -> Map<String, Json> {
        let mut m = Map::new();
        for key in GRID_KEYS {
            let x = self.get_number(key).expect("grid keys are numeric");
            m.insert(key.into(), json!(x));
        }
        m.insert("band".into(), json!(if self.band == Band::Plus { "plus" } else { "minus" }));
        m.insert("born_orders".into(), json!(self.born_orders));
        m.insert(
            "model".into(),
            json!(match self.model {
                PacketModel::Thirring => "thirring",
                PacketModel::Single => "single",
            }),
        );
        m.insert(
            "snapshot".into(),
            json!(self.snapshot.as_ref().map(|p| p.display().to_string()).unwrap_or_default()),
        );
        m.insert(
            "potential".into(),
            json!(self.potential.iter().map(|(s, v)| json!([s, v])).collect::<Vec<_>>()),
        );
        m
    }

    pub fn thirring(&self) -> dtscatter_core::Result<ThirringParams> {
        ThirringParams::new(self.nu, self.chi)
    }

    pub fn continuous_model(&self) -> dtscatter_core::Result<ContinuousModel> {
        ContinuousModel::new(self.sites, self.hopping, self.potential.clone(), self.k, self.eps)
    }

    pub fn walk_model(&self) -> Result<WalkModel, crate::wavepacket::WavepacketError> {
        match self.model {
            PacketModel::Thirring => WalkModel::thirring(self.nu, self.p, self.chi),
            PacketModel::Single => WalkModel::single_site(self.nu, self.chi),
        }
    }

    pub fn packet_spec(&self) -> GaussianPacketSpec {
        GaussianPacketSpec {
            k0: self.k,
            sigma_x: self.sigma,
            x0: self.x0,
            channel: match self.model {
                PacketModel::Thirring => PacketChannel::Pair {
                    s1: Band::Plus,
                    s2: Band::Plus,
                },
                PacketModel::Single => PacketChannel::Band(self.band),
            },
        }
    }

    /// Module preconditions for `command`; returns `(key, message)` pairs.
    pub fn validate(&self, command: Command) -> Vec<(&'static str, String)> {
        let mut out = Vec::new();
        let mut check = |key: &'static str, r: Result<(), String>| {
            if let Err(e) = r {
                out.push((key, e));
            }
        };
        let core = |r: dtscatter_core::Result<()>| r.map_err(|e| e.to_string());
        match command {
            Command::Dispersion => check("nu", core(DiracWalk::new(self.nu).map(|_| ()))),
            Command::Amplitude | Command::Born | Command::Dyson => {
                check("nu", core(self.thirring().map(|_| ())));
                check("p", core(check_momentum(self.p)));
                check(
                    "k",
                    (0.0..=FRAC_PI_2)
                        .contains(&self.k)
                        .then_some(())
                        .ok_or_else(|| format!("`k` = {} outside [0, pi/2]", self.k)),
                );
                if command != Command::Dyson {
                    check(
                        "n_max",
                        (self.n_max <= 10_000).then_some(()).ok_or_else(|| "`n_max` above 10000".to_string()),
                    );
                }
                if command == Command::Amplitude {
                    if let Some(n) = self.born_orders.iter().find(|&&n| n > self.n_max) {
                        check("born_orders", Err(format!("order {n} exceeds n_max = {}", self.n_max)));
                    }
                }
            }
            Command::Trotter => {
                check("sites", core(self.continuous_model().map(|_| ())));
                check(
                    "tau_scale",
                    (self.tau_scale > 0.0 && self.tau_scale.is_finite())
                        .then_some(())
                        .ok_or_else(|| format!("`tau_scale` must be positive, got {}", self.tau_scale)),
                );
            }
            Command::Wavepacket => {
                check("model", self.walk_model().map(|_| ()).map_err(|e| e.to_string()));
                check(
                    "extent",
                    (self.extent >= 64 && self.extent.is_multiple_of(2))
                        .then_some(())
                        .ok_or_else(|| format!("`extent` must be even and at least 64, got {}", self.extent)),
                );
                if self.extent >= 64 {
                    check("sigma", self.packet_spec().validate(self.extent).map_err(|e| e.to_string()));
                }
                if self.model == PacketModel::Thirring {
                    check(
                        "k",
                        (0.0..=FRAC_PI_2)
                            .contains(&self.k)
                            .then_some(())
                            .ok_or_else(|| format!("`k` = {} outside [0, pi/2]", self.k)),
                    );
                }
            }
            Command::Sweep => {
                check("nu", core(DiracWalk::new(self.nu).map(|_| ())));
                check(
                    "chi",
                    self.chi.is_finite().then_some(()).ok_or_else(|| "`chi` must be finite".to_string()),
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    /// `None` writes to stdout.
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    /// Swept keys in declaration order; the first varies slowest.
    pub grid: Vec<(String, Vec<f64>)>,
    pub output: OutputSpec,
    /// Echoed into the metadata; no current command samples randomly.
    pub seed: u64,
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn echo(&self) -> Map<String, Json> {
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command.name()));
        m.insert("seed".into(), json!(self.seed));
        m.insert("threads".into(), json!(self.threads));
        m.insert("params".into(), Json::Object(self.params.echo()));
        let grid: Vec<Json> = self.grid.iter().map(|(k, v)| json!({ "key": k, "values": v })).collect();
        m.insert("grid".into(), json!(grid));
        m.insert(
            "output".into(),
            json!({
                "path": self.output.path.as_ref().map(|p| p.display().to_string()),
                "format": match self.output.format { Format::Csv => "csv", Format::Json => "json" },
            }),
        );
        m
    }
}

/// One located problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    /// `None` for defaults and command-line overrides.
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub problems: Vec<Problem>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration ({} problem{})", self.problems.len(), if self.problems.len() == 1 { "" } else { "s" })?;
        for p in &self.problems {
            match p.line {
                Some(l) => write!(f, "\n  line {l}: {}", p.message)?,
                None => write!(f, "\n  {}", p.message)?,
            }
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Section {
    Top,
    Params,
    Grid,
    Output,
}

impl Section {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "params" => Self::Params,
            "grid" => Self::Grid,
            "output" => Self::Output,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
struct Entry {
    section: Section,
    key: String,
    value: String,
    /// `None` for `--set` overrides.
    line: Option<usize>,
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_with_overrides(text, &[])
}

/// Parses `text`, then applies `key=value` overrides. Bare keys go to
/// `[params]` (or the top level for `command`, `seed`, `threads`); a
/// `section.key` prefix picks the section explicitly.
pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut problems = Vec::new();
    let mut entries: BTreeMap<(Section, String), Entry> = BTreeMap::new();
    let mut section = Section::Top;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = strip_comment(raw).trim();
        if body.is_empty() {
            continue;
        }
        if let Some(name) = body.strip_prefix('[') {
            match name.strip_suffix(']').map(str::trim).and_then(Section::parse) {
                Some(s) => section = s,
                None => problems.push(Problem {
                    line: Some(line),
                    message: format!("unknown section `{body}`"),
                }),
            }
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            problems.push(Problem {
                line: Some(line),
                message: format!("expected `key = value`, got `{body}`"),
            });
            continue;
        };
        let key = key.trim().to_string();
        let slot = (section, key.clone());
        if let Some(prev) = entries.get(&slot) {
            problems.push(Problem {
                line: Some(line),
                message: format!("duplicate key `{key}` (lines {} and {line})", prev.line.unwrap_or(0)),
            });
            continue;
        }
        entries.insert(
            slot,
            Entry {
                section,
                key,
                value: value.trim().to_string(),
                line: Some(line),
            },
        );
    }
    for o in overrides {
        let Some((key, value)) = o.split_once('=') else {
            problems.push(Problem {
                line: None,
                message: format!("--set expects key=value, got `{o}`"),
            });
            continue;
        };
        let key = key.trim();
        let (section, key) = match key.split_once('.') {
            Some(("params", k)) => (Section::Params, k),
            Some(("grid", k)) => (Section::Grid, k),
            Some(("output", k)) => (Section::Output, k),
            Some(_) => {
                problems.push(Problem {
                    line: None,
                    message: format!("--set: unknown section in `{key}`"),
                });
                continue;
            }
            None if matches!(key, "command" | "seed" | "threads") => (Section::Top, key),
            None => (Section::Params, key),
        };
        entries.insert(
            (section, key.to_string()),
            Entry {
                section,
                key: key.to_string(),
                value: value.trim().to_string(),
                line: None,
            },
        );
    }
    build(entries.into_values().collect(), problems)
}

fn build(mut entries: Vec<Entry>, mut problems: Vec<Problem>) -> Result<RunConfig, ConfigError> {
    entries.sort_by_key(|e| (e.section, e.line.unwrap_or(usize::MAX)));
    let mut report = |line: Option<usize>, message: String| problems.push(Problem { line, message });
    let mut command = None;
    let mut seed = 0u64;
    let mut threads = None;
    let mut params = Params::default();
    let mut key_lines: BTreeMap<String, Option<usize>> = BTreeMap::new();
    let mut grid = Vec::new();
    let mut path = None;
    let mut format = None;

    for e in &entries {
        let v = e.value.as_str();
        match e.section {
            Section::Top => match e.key.as_str() {
                "command" => match Command::parse(v) {
                    Some(c) => command = Some(c),
                    None => report(
                        e.line,
                        format!(
                            "unknown command `{v}` (expected one of {})",
                            Command::ALL.map(Command::name).join(", ")
                        ),
                    ),
                },
                "seed" => match v.parse() {
                    Ok(s) => seed = s,
                    Err(_) => report(e.line, format!("`seed` expects a non-negative integer, got `{v}`")),
                },
                "threads" => match v.parse::<usize>() {
                    Ok(t) if t > 0 => threads = Some(t),
                    _ => report(e.line, format!("`threads` expects a positive integer, got `{v}`")),
                },
                k => report(e.line, format!("unknown top-level key `{k}`")),
            },
            Section::Params => {
                if !PARAM_KEYS.contains(&e.key.as_str()) {
                    report(e.line, format!("unknown parameter `{}`", e.key));
                    continue;
                }
                match params.set(&e.key, v) {
                    Ok(()) => {
                        key_lines.insert(e.key.clone(), e.line);
                    }
                    Err(m) => report(e.line, m),
                }
            }
            Section::Grid => {
                if !GRID_KEYS.contains(&e.key.as_str()) {
                    report(e.line, format!("`{}` cannot be swept", e.key));
                    continue;
                }
                match parse_grid_values(v) {
                    Ok(values) => {
                        key_lines.insert(format!("grid.{}", e.key), e.line);
                        grid.push((e.key.clone(), values));
                    }
                    Err(m) => report(e.line, format!("grid `{}`: {m}", e.key)),
                }
            }
            Section::Output => match e.key.as_str() {
                "path" => path = (!v.is_empty()).then(|| PathBuf::from(v)),
                "format" => match v {
                    "csv" => format = Some(Format::Csv),
                    "json" => format = Some(Format::Json),
                    _ => report(e.line, format!("`format` expects csv or json, got `{v}`")),
                },
                k => report(e.line, format!("unknown output key `{k}`")),
            },
        }
    }

    let Some(command) = command else {
        report(None, "missing `command`".into());
        return Err(ConfigError { problems });
    };
    if command == Command::Trotter && !key_lines.contains_key("k") {
        params.k = ContinuousModel::toy().k;
    }

    for (key, message) in params.validate(command) {
        report(key_lines.get(key).copied().flatten(), message);
    }
    for (key, values) in &grid {
        let line = key_lines.get(&format!("grid.{key}")).copied().flatten();
        for &x in values {
            let mut trial = params.clone();
            if let Err(m) = trial.set_number(key, x) {
                report(line, m);
                continue;
            }
            for (_, message) in trial.validate(command) {
                report(line, format!("grid value {key} = {x}: {message}"));
            }
        }
    }

    let format = format.unwrap_or_else(|| match path.as_ref().and_then(|p: &PathBuf| p.extension()) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    });
    if problems.is_empty() {
        Ok(RunConfig {
            command,
            params,
            grid,
            output: OutputSpec { path, format },
            seed,
            threads,
        })
    } else {
        problems.sort_by_key(|p| p.line.unwrap_or(usize::MAX));
        problems.dedup();
        Err(ConfigError { problems })
    }
}

fn strip_comment(line: &str) -> &str {
    let t = line.trim_start();
    if t.starts_with('#') || t.starts_with(';') {
        return "";
    }
    match line.find(" #") {
        Some(i) => &line[..i],
        None => line,
    }
}

fn split_list(raw: &str) -> impl Iterator<Item = &str> {
    raw.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Accepts plain numbers plus `pi`, `-pi`, `pi/n` and `a*pi/n` spellings.
fn parse_real(s: &str) -> Result<f64, ()> {
    if let Ok(x) = s.parse::<f64>() {
        return if x.is_finite() { Ok(x) } else { Err(()) };
    }
    let (sign, rest) = match s.strip_prefix('-') {
        Some(r) => (-1.0, r),
        None => (1.0, s),
    };
    let (num, den) = match rest.split_once('/') {
        Some((a, b)) => (a, b.trim().parse::<f64>().map_err(|_| ())?),
        None => (rest, 1.0),
    };
    let coef = match num.trim() {
        "pi" => 1.0,
        n => n.strip_suffix("*pi").ok_or(())?.trim().parse::<f64>().map_err(|_| ())?,
    };
    Ok(sign * coef * std::f64::consts::PI / den)
}

/// Comma lists, or `start..end:count` for evenly spaced points.
fn parse_grid_values(raw: &str) -> Result<Vec<f64>, String> {
    if let Some((range, count)) = raw.split_once(':') {
        let (a, b) = range.split_once("..").ok_or_else(|| format!("expected start..end:count, got `{raw}`"))?;
        let a = parse_real(a.trim()).map_err(|_| format!("bad range start `{a}`"))?;
        let b = parse_real(b.trim()).map_err(|_| format!("bad range end `{b}`"))?;
        let n: usize = count.trim().parse().map_err(|_| format!("bad point count `{count}`"))?;
        return Ok(match n {
            0 => Vec::new(),
            1 => vec![a],
            _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
        });
    }
    split_list(raw)
        .map(|s| parse_real(s).map_err(|_| format!("not a number: `{s}`")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_dispersion_config() {
        let c = parse_config("command = dispersion\n").unwrap();
        assert_eq!(c.command, Command::Dispersion);
        assert_eq!(c.params, Params::default());
        assert!(c.grid.is_empty());
        assert_eq!(c.output.format, Format::Csv);
    }

    #[test]
    fn constraint_error_names_the_field() {
        let e = parse_config("command = amplitude\n[params]\nnu = 1.2\n").unwrap_err();
        assert_eq!(e.problems.len(), 1);
        assert_eq!(e.problems[0].line, Some(3));
        assert!(e.problems[0].message.contains("nu"), "{}", e);
    }

    #[test]
    fn duplicate_key_cites_both_lines() {
        let e = parse_config("command = born\n[params]\nchi = 0.2\n\nchi = 0.3\n").unwrap_err();
        assert!(e.to_string().contains("lines 3 and 5"), "{e}");
    }

    #[test]
    fn all_problems_are_listed() {
        let text = "command = dyson\nbogus = 1\n[params]\nk = fast\nwidth = 3\n[grid]\nband = plus\n[colours]\n";
        let e = parse_config(text).unwrap_err();
        let lines: Vec<_> = e.problems.iter().map(|p| p.line).collect();
        assert_eq!(lines, vec![Some(2), Some(4), Some(5), Some(7), Some(8)]);
    }

    #[test]
    fn grids_ranges_and_overrides() {
        let text = "command = amplitude\n[grid]\nk = 0.1..1.5:8  # inclusive\np = 0.3, 0.7\n[output]\npath = a.json\n";
        let c = parse_with_overrides(text, &["chi=pi/2".into(), "output.format=csv".into()]).unwrap();
        assert_eq!(c.grid[0].0, "k");
        assert_eq!(c.grid[0].1.len(), 8);
        assert_eq!(c.grid[0].1[7], 1.5);
        assert_eq!(c.grid[1].1, vec![0.3, 0.7]);
        assert_eq!(c.params.chi, std::f64::consts::FRAC_PI_2);
        assert_eq!(c.output.format, Format::Csv);
        let e = parse_config("command = amplitude\n[grid]\nk = 0.2, 2.0\n").unwrap_err();
        assert_eq!(e.problems[0].line, Some(3));
    }

    #[test]
    fn empty_grid_is_allowed() {
        let c = parse_config("command = amplitude\n[grid]\nk =\n").unwrap();
        assert!(c.grid[0].1.is_empty());
    }

    #[test]
    fn command_defaults_and_echo() {
        let c = parse_config("command = trotter\n").unwrap();
        assert_eq!(c.params.k, ContinuousModel::toy().k);
        let echo = c.echo();
        assert_eq!(echo["params"]["sites"], json!(128.0));
        assert_eq!(echo["command"], json!("trotter"));
        assert!(parse_config("[params]\nnu = 0.5\n").is_err());
    }

    #[test]
    fn pi_spellings() {
        assert_eq!(parse_real("pi"), Ok(std::f64::consts::PI));
        assert_eq!(parse_real("-pi/4"), Ok(-std::f64::consts::FRAC_PI_4));
        assert_eq!(parse_real("3*pi/4"), Ok(0.75 * std::f64::consts::PI));
        assert!(parse_real("inf").is_err());
    }
}
