//! Run configuration: TOML or JSON with unit-suffixed keys, plus dotted
//! `--section.key value` overrides from the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use geodd::ensemble::{linear_grid, EnsembleSpec, DEFAULT_OU_DT_US};
use geodd::sequence::{DEFAULT_DT_US, DEFAULT_FREE_DT_US};
use geodd::{DriveParams, EdgeConvention, GateTiming, IntegratorSettings, NoiseModel, StateVector};
use serde::{Deserialize, Deserializer, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub drive: DriveSection,
    pub noise: NoiseSection,
    pub sequence: SequenceSection,
    pub ensemble: EnsembleSection,
    pub output: OutputSection,
    pub sweep: SweepSection,
    pub integrator: IntegratorSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    pub rabi_mhz: f64,
    pub detuning_khz: f64,
    pub phase_rad: f64,
    pub pulse_length_error: f64,
    pub gate_timing: GateTiming,
}

impl Default for DriveSection {
    fn default() -> Self {
        let d = DriveParams::default();
        Self {
            rabi_mhz: d.rabi_mhz,
            detuning_khz: d.detuning_khz,
            phase_rad: d.phase_rad,
            pulse_length_error: d.pulse_length_error,
            gate_timing: d.gate_timing,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSection {
    pub c13_width_1e_mhz: f64,
    pub n14_splitting_mhz: f64,
    /// `null` in JSON, or `"none"` / `"inf"` in TOML, switches relaxation off.
    #[serde(deserialize_with = "t1_value")]
    pub t1_ms: Option<f64>,
    pub ou_amplitude_mhz: f64,
    pub ou_tau_us: f64,
    pub detuning_jitter_khz: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            c13_width_1e_mhz: 0.3,
            n14_splitting_mhz: 2.2,
            t1_ms: Some(2.6),
            ou_amplitude_mhz: 0.0,
            ou_tau_us: 0.0,
            detuning_jitter_khz: 0.0,
        }
    }
}

fn t1_value<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(v)) if v.is_infinite() && v > 0.0 => Ok(None),
        Some(Raw::Num(v)) => Ok(Some(v)),
        Some(Raw::Text(s)) if matches!(s.as_str(), "none" | "inf" | "off") => Ok(None),
        Some(Raw::Text(s)) => Err(serde::de::Error::custom(format!(
            "expected a number or \"none\", got \"{s}\""
        ))),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    #[default]
    Bright,
    Dark,
    PlusOne,
    MinusOne,
}

impl InitialKind {
    pub fn state(self) -> StateVector {
        match self {
            InitialKind::Bright => StateVector::bright(),
            InitialKind::Dark => StateVector::dark(),
            InitialKind::PlusOne => StateVector::plus_one(),
            InitialKind::MinusOne => StateVector::minus_one(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceSection {
    /// Takes precedence over `n_list`.
    pub n_gates: Option<usize>,
    pub n_list: Vec<usize>,
    /// Takes precedence over the τ range.
    pub tau_us: Option<f64>,
    pub tau_start_us: f64,
    pub tau_stop_us: f64,
    pub tau_step_us: f64,
    pub edge_convention: EdgeConvention,
    pub initial_state: InitialKind,
}

impl Default for SequenceSection {
    fn default() -> Self {
        Self {
            n_gates: None,
            n_list: vec![8],
            tau_us: None,
            tau_start_us: 0.5,
            tau_stop_us: 30.0,
            tau_step_us: 0.1,
            edge_convention: EdgeConvention::HalfInterval,
            initial_state: InitialKind::Bright,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub samples: usize,
    pub seed: u64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            samples: geodd::ensemble::DEFAULT_SAMPLE_COUNT,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub splitting_start_mhz: f64,
    pub splitting_stop_mhz: f64,
    pub splitting_step_mhz: f64,
    pub tau_start_us: f64,
    pub tau_stop_us: f64,
    pub tau_step_us: f64,
    pub n_list: Vec<usize>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            splitting_start_mhz: -4.0,
            splitting_stop_mhz: 4.0,
            splitting_step_mhz: 0.1,
            tau_start_us: 0.5,
            tau_stop_us: 30.0,
            tau_step_us: 0.5,
            n_list: vec![1, 2, 4, 8],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorSection {
    pub dt_us: f64,
    pub free_dt_us: f64,
    pub ou_dt_us: f64,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            dt_us: DEFAULT_DT_US,
            free_dt_us: DEFAULT_FREE_DT_US,
            ou_dt_us: DEFAULT_OU_DT_US,
        }
    }
}

impl RunConfig {
    pub fn drive(&self) -> DriveParams {
        DriveParams {
            rabi_mhz: self.drive.rabi_mhz,
            detuning_khz: self.drive.detuning_khz,
            phase_rad: self.drive.phase_rad,
            pulse_length_error: self.drive.pulse_length_error,
            gate_timing: self.drive.gate_timing,
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            c13_width_1e_mhz: self.noise.c13_width_1e_mhz,
            n14_splitting_mhz: self.noise.n14_splitting_mhz,
            t1_ms: self.noise.t1_ms,
            ou_amplitude_mhz: self.noise.ou_amplitude_mhz,
            ou_correlation_time_us: self.noise.ou_tau_us,
            detuning_jitter_khz: self.noise.detuning_jitter_khz,
        }
    }

    pub fn ensemble(&self) -> EnsembleSpec {
        EnsembleSpec {
            sample_count: self.ensemble.samples,
            master_seed: self.ensemble.seed,
            noise: self.noise(),
            ou_dt_us: self.integrator.ou_dt_us,
        }
    }

    pub fn integrator(&self) -> IntegratorSettings {
        IntegratorSettings {
            dt_us: self.integrator.dt_us,
            free_dt_us: self.integrator.free_dt_us,
        }
    }

    pub fn gate_counts(&self) -> Vec<usize> {
        match self.sequence.n_gates {
            Some(n) => vec![n],
            None => self.sequence.n_list.clone(),
        }
    }

    pub fn taus(&self) -> Result<Vec<f64>> {
        match self.sequence.tau_us {
            Some(t) => Ok(vec![t]),
            None => {
                let s = &self.sequence;
                linear_grid(s.tau_start_us, s.tau_stop_us, s.tau_step_us).context("sequence.tau_step_us")
            }
        }
    }

    /// Bounds checks for every section; errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        self.drive().validate().map_err(|e| keyed("drive", e))?;
        self.noise().validate().map_err(|e| keyed("noise", e))?;
        if self.noise.ou_amplitude_mhz > 0.0 && !(self.noise.ou_tau_us > 0.0) {
            bail!("noise.ou_tau_us: must be > 0 when ou_amplitude_mhz > 0");
        }
        let counts = self.gate_counts();
        if counts.is_empty() {
            bail!("sequence.n_list: must not be empty");
        }
        if counts.contains(&0) {
            bail!("sequence.n_gates: gate counts must be >= 1");
        }
        if let Some(t) = self.sequence.tau_us {
            if !(t >= 0.0) || !t.is_finite() {
                bail!("sequence.tau_us: must be a finite value >= 0, got {t}");
            }
        } else {
            let s = &self.sequence;
            if !(s.tau_start_us >= 0.0) {
                bail!("sequence.tau_start_us: must be >= 0, got {}", s.tau_start_us);
            }
            if !(s.tau_step_us > 0.0) {
                bail!("sequence.tau_step_us: must be > 0, got {}", s.tau_step_us);
            }
            if !(s.tau_stop_us >= s.tau_start_us) {
                bail!("sequence.tau_stop_us: must be >= tau_start_us");
            }
        }
        if self.ensemble.seed > i64::MAX as u64 {
            bail!("ensemble.seed: must be <= {}", i64::MAX);
        }
        if self.ensemble.samples == 0 {
            bail!("ensemble.samples: must be >= 1");
        }
        let i = &self.integrator;
        for (key, v) in [
            ("dt_us", i.dt_us),
            ("free_dt_us", i.free_dt_us),
            ("ou_dt_us", i.ou_dt_us),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                bail!("integrator.{key}: must be a finite value > 0, got {v}");
            }
        }
        let w = &self.sweep;
        for (key, v) in [
            ("splitting_step_mhz", w.splitting_step_mhz),
            ("tau_step_us", w.tau_step_us),
        ] {
            if !(v > 0.0) {
                bail!("sweep.{key}: must be > 0, got {v}");
            }
        }
        if !(w.tau_start_us >= 0.0) {
            bail!("sweep.tau_start_us: must be >= 0, got {}", w.tau_start_us);
        }
        if w.n_list.contains(&0) {
            bail!("sweep.n_list: gate counts must be >= 1");
        }
        Ok(())
    }
}

/// Prefixes a core validation error with its config section so the message
/// names the dotted key.
fn keyed(section: &str, e: geodd::Error) -> anyhow::Error {
    match e {
        geodd::Error::InvalidParameter { name, reason } => {
            let key = if name == "ou_correlation_time_us" {
                "ou_tau_us"
            } else {
                name
            };
            anyhow!("{section}.{key}: {reason}")
        }
        other => anyhow!("{section}: {other}"),
    }
}

/// Parses a config file; `.json` files (or content starting with `{`) are
/// read as JSON, everything else as TOML.
pub fn read_config_value(path: &Path) -> Result<toml::Table> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        let json: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("invalid JSON in {}", path.display()))?;
        json_to_toml(json).with_context(|| format!("in {}", path.display()))
    } else {
        toml::from_str(&text).with_context(|| format!("invalid TOML in {}", path.display()))
    }
}

/// JSON `null` has no TOML counterpart; it becomes the string `"none"`,
/// which only `noise.t1_ms` and optional keys understand.
fn json_to_toml(v: serde_json::Value) -> Result<toml::Table> {
    match convert(v)? {
        Some(toml::Value::Table(t)) => Ok(t),
        _ => bail!("config root must be an object"),
    }
}

fn convert(v: serde_json::Value) -> Result<Option<toml::Value>> {
    use serde_json::Value as J;
    Ok(match v {
        J::Null => None,
        J::Bool(b) => Some(toml::Value::Boolean(b)),
        J::Number(n) => Some(match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => toml::Value::Integer(i),
            (None, Some(_)) => bail!("integer {n} out of range"),
            _ => toml::Value::Float(n.as_f64().ok_or_else(|| anyhow!("number {n} out of range"))?),
        }),
        J::String(s) => Some(toml::Value::String(s)),
        J::Array(a) => Some(toml::Value::Array(
            a.into_iter()
                .map(|x| convert(x).map(|o| o.unwrap_or_else(|| toml::Value::String("none".into()))))
                .collect::<Result<_>>()?,
        )),
        J::Object(o) => {
            let mut t = toml::Table::new();
            for (k, x) in o {
                match convert(x)? {
                    Some(val) => {
                        t.insert(k, val);
                    }
                    // absent optional keys fall back to their defaults, except
                    // relaxation, where null means "off"
                    None if k == "t1_ms" => {
                        t.insert(k, toml::Value::String("none".into()));
                    }
                    None => {}
                }
            }
            Some(toml::Value::Table(t))
        }
    })
}

/// Command-line spellings accepted next to dotted paths.
const ALIASES: &[(&str, &str)] = &[
    ("detuning-khz", "drive.detuning_khz"),
    ("rabi-mhz", "drive.rabi_mhz"),
    ("pulse-length-error", "drive.pulse_length_error"),
    ("t1-ms", "noise.t1_ms"),
    ("samples", "ensemble.samples"),
];

type Overrides = Vec<(String, String)>;

/// Splits `--a.b value`, `--a.b=value` and alias flags out of `args`.
/// Returns the remaining arguments and the `(path, raw value)` overrides.
pub fn extract_overrides(args: Vec<String>) -> Result<(Vec<String>, Overrides)> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            rest.push(arg);
            continue;
        };
        let (name, inline) = match flag.split_once('=') {
            Some((n, v)) => (n.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        let path = if name.contains('.') {
            name.clone()
        } else if let Some((_, p)) = ALIASES.iter().find(|(a, _)| *a == name) {
            p.to_string()
        } else {
            rest.push(arg);
            continue;
        };
        let value = match inline {
            Some(v) => v,
            None => it.next().ok_or_else(|| anyhow!("--{name}: missing value"))?,
        };
        overrides.push((path, value));
    }
    Ok((rest, overrides))
}

fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        bail!("--{path}: malformed key");
    }
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| anyhow!("--{path}: {k} is not a section"))?;
    }
    cur.insert(last.to_string(), parse_value(raw));
    Ok(())
}

/// Loads the config (or the shipped defaults), applies overrides and
/// validates the result.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
    let mut table = match path {
        Some(p) => read_config_value(p)?,
        None => toml::Table::new(),
    };
    for (k, v) in overrides {
        apply_override(&mut table, k, v)?;
    }
    let cfg: RunConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| anyhow!("config: {}", e.message().trim()))?;
    cfg.validate()?;
    Ok(cfg)
}
