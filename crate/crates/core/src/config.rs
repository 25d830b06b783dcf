//! Scenario description and its text configuration format.
//!
//! The format is line oriented: `[section.sub]` headers, `key = value`
//! pairs and `#` comments. Dimensioned values carry a unit suffix
//! (`c1 = 5 nF`); bare numbers are taken in the selected system's unit
//! registry.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::device::{JfetParams, MosfetParams, NndrPairSpec, Polarity, UnipolarMemristorParams};
use crate::export::fmt_f64;
use crate::protocol::InputProtocol;
use crate::systems::{
    FetResonator, FetResonatorParams, Inapik, InapikParams, MemristorResonator, MemristorResonatorParams,
    NeuronSystem, UnitSystem,
};
use crate::units::{parse_unit, split_quantity, symbol_for, to_registry, Dim};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SystemSpec {
    Inapik(InapikParams),
    FetResonator(FetResonatorParams),
    JfetResonator(FetResonatorParams),
    MemristorResonator(MemristorResonatorParams),
    /// Stand-alone lambda diode, for I-V experiments.
    NndrPair(NndrPairSpec),
    /// Stand-alone memristor, for I-V experiments.
    Memristor(UnipolarMemristorParams),
}

impl SystemSpec {
    pub fn name(&self) -> &'static str {
        match self {
            SystemSpec::Inapik(_) => "inapik",
            SystemSpec::FetResonator(_) => "fet_resonator",
            SystemSpec::JfetResonator(_) => "jfet_resonator",
            SystemSpec::MemristorResonator(_) => "memristor_resonator",
            SystemSpec::NndrPair(_) => "nndr_pair",
            SystemSpec::Memristor(_) => "memristor",
        }
    }

    pub fn units(&self) -> UnitSystem {
        match self {
            SystemSpec::Inapik(_) => UnitSystem::MILLI,
            _ => UnitSystem::SI,
        }
    }

    pub fn is_device(&self) -> bool {
        matches!(self, SystemSpec::NndrPair(_) | SystemSpec::Memristor(_))
    }

    /// Validate the parameter record and build the dynamical system.
    pub fn build(&self) -> crate::Result<Option<Box<dyn NeuronSystem>>> {
        Ok(match *self {
            SystemSpec::Inapik(p) => Some(Box::new(Inapik::new(p)?)),
            SystemSpec::FetResonator(p) | SystemSpec::JfetResonator(p) => Some(Box::new(FetResonator::new(p)?)),
            SystemSpec::MemristorResonator(p) => Some(Box::new(MemristorResonator::new(p)?)),
            SystemSpec::NndrPair(p) => {
                p.validate()?;
                None
            }
            SystemSpec::Memristor(p) => {
                p.validate()?;
                None
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Nullclines,
    Equilibria,
    Bifurcation,
    Amplitude,
    Iv,
    Ramp,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Simulate,
        Experiment::Nullclines,
        Experiment::Equilibria,
        Experiment::Bifurcation,
        Experiment::Amplitude,
        Experiment::Iv,
        Experiment::Ramp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Nullclines => "nullclines",
            Experiment::Equilibria => "equilibria",
            Experiment::Bifurcation => "bifurcation",
            Experiment::Amplitude => "amplitude",
            Experiment::Iv => "iv",
            Experiment::Ramp => "ramp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        if self.count < 2 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count)
            .map(|k| if k == self.count - 1 { self.stop } else { self.start + step * k as f64 })
            .collect()
    }
}

/// Numerical settings, in the system's unit registry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Numerics {
    pub tolerance: f64,
    pub t_end: f64,
    pub sample_interval: f64,
    pub transient_fraction: f64,
    /// Initial state; the zero-input resting state when absent.
    pub initial: Option<Vec<f64>>,
    /// Constant current for nullcline and equilibrium experiments.
    pub current: f64,
    pub sweep: Option<Sweep>,
    pub v_min: Option<f64>,
    pub v_max: Option<f64>,
    pub n_points: usize,
    pub resolution: usize,
    pub v_peak: Option<f64>,
    pub sweep_rate: Option<f64>,
    pub r_initial: Option<f64>,
    /// Current whose equilibrium is the after-hyperpolarization reference;
    /// the applied current when absent.
    pub rest_current: Option<f64>,
}

impl Numerics {
    pub fn defaults_for(units: &UnitSystem) -> Self {
        let milli = units.volts == 1e3;
        Numerics {
            tolerance: 1e-8,
            t_end: if milli { 200.0 } else { 0.05 },
            sample_interval: if milli { 0.01 } else { 5e-6 },
            transient_fraction: 0.5,
            initial: None,
            current: 0.0,
            sweep: None,
            v_min: None,
            v_max: None,
            n_points: 500,
            resolution: 2000,
            v_peak: None,
            sweep_rate: None,
            r_initial: None,
            rest_current: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: Option<String>,
    pub system: SystemSpec,
    pub experiment: Experiment,
    pub protocol: InputProtocol,
    pub numerics: Numerics,
    pub output: OutputSpec,
}

impl Scenario {
    /// Cross-field checks beyond the per-record invariants.
    pub fn check(&self) -> Vec<(String, String)> {
        let mut errs = Vec::new();
        let mut push = |f: &str, m: &str| errs.push((f.to_owned(), m.to_owned()));
        if let Err(e) = self.system.build() {
            push("params", &e.to_string());
        }
        if let Err(e) = self.protocol.normalized().validate() {
            push("protocol", &e.to_string());
        }
        let n = &self.numerics;
        if !(n.tolerance > 1e-12 && n.tolerance < 1e-2) {
            push("numerics.tolerance", "must lie strictly between 1e-12 and 1e-2");
        }
        if !(n.t_end > 0.0) {
            push("numerics.t_end", "must be positive");
        }
        if !(n.sample_interval > 0.0) {
            push("numerics.sample_interval", "must be positive");
        }
        if !(0.0..=0.9).contains(&n.transient_fraction) {
            push("numerics.transient_fraction", "must lie in [0, 0.9]");
        }
        let device = self.system.is_device();
        match self.experiment {
            Experiment::Iv if !device => push("experiment", "iv requires system = nndr_pair or memristor"),
            Experiment::Iv => {
                if let SystemSpec::Memristor(_) = self.system {
                    if n.v_peak.is_none() {
                        push("numerics.v_peak", "required for a memristor sweep");
                    }
                } else if n.v_min.is_none() || n.v_max.is_none() {
                    push("numerics.v_min", "v_min and v_max are required for a pair sweep");
                }
            }
            e if device => push("experiment", &format!("{} requires a neuron system", e.name())),
            Experiment::Bifurcation | Experiment::Amplitude => match n.sweep {
                None => push("numerics.sweep_start", "sweep_start, sweep_stop and sweep_count are required"),
                Some(s) if s.count < 2 || !(s.stop > s.start) => {
                    push("numerics.sweep_count", "need at least two increasing sweep values")
                }
                _ => {}
            },
            _ => {}
        }
        if let (Some(init), Ok(Some(sys))) = (&n.initial, self.system.build()) {
            if init.len() != sys.dim() {
                push("numerics.initial", &format!("expected {} values", sys.dim()));
            }
        }
        errs
    }
}

// ---------------------------------------------------------------------------
// Parsing

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigError {
    /// 1-based line, 0 when the problem is not tied to a line.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub scenario: Scenario,
    /// Informational notes about interpreted values.
    pub notes: Vec<String>,
}

struct Entry {
    value: String,
    line: usize,
    used: bool,
}

struct Reader {
    entries: BTreeMap<String, Entry>,
    section_lines: BTreeMap<String, usize>,
    errors: Vec<ConfigError>,
    notes: Vec<String>,
    units: UnitSystem,
}

impl Reader {
    fn err(&mut self, line: usize, msg: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: msg.into(),
        });
    }

    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            (e.value.clone(), e.line)
        })
    }

    fn line_of(&self, key: &str) -> usize {
        if let Some(e) = self.entries.get(key) {
            return e.line;
        }
        let mut k = key;
        while let Some((head, _)) = k.rsplit_once('.') {
            if let Some(&l) = self.section_lines.get(head) {
                return l;
            }
            k = head;
        }
        0
    }

    fn missing(&mut self, key: &str) {
        let line = self.line_of(key);
        self.err(line, format!("missing required field `{key}`"));
    }

    fn quantity_opt(&mut self, key: &str, dim: Dim) -> Option<f64> {
        let (text, line) = self.take(key)?;
        let Some((x, unit)) = split_quantity(&text) else {
            self.err(line, format!("`{key}`: cannot parse `{text}` as a number"));
            return None;
        };
        match unit {
            None => Some(self.bare(key, x)),
            Some(u) => match parse_unit(u) {
                None => {
                    self.err(line, format!("`{key}`: unknown unit `{u}`"));
                    None
                }
                Some(unit) => match to_registry(x, unit, dim, &self.units) {
                    Ok(v) => Some(v),
                    Err(m) => {
                        self.err(line, format!("`{key}`: {m}"));
                        None
                    }
                },
            },
        }
    }

    /// Bare numbers are in registry units, except the model's slope factors
    /// written the way the figure caption prints them (in volts).
    fn bare(&mut self, key: &str, x: f64) -> f64 {
        let slope = matches!(key, "params.k_na" | "params.k_k");
        if slope && self.units.volts == 1e3 && x != 0.0 && x.abs() < 1.0 {
            let mv = x * 1e3;
            self.notes.push(format!(
                "`{key} = {x}` has no unit; read as {x} V = {} mV",
                fmt_f64(mv)
            ));
            return mv;
        }
        x
    }

    fn quantity(&mut self, key: &str, dim: Dim) -> f64 {
        match self.quantity_opt(key, dim) {
            Some(x) => x,
            None => {
                if !self.entries.contains_key(key) {
                    self.missing(key);
                }
                f64::NAN
            }
        }
    }

    /// Like [`Reader::quantity`], and flags non-positive values on the spot
    /// so they are reported alongside parse errors.
    fn positive(&mut self, key: &str, dim: Dim) -> f64 {
        let x = self.quantity(key, dim);
        if x <= 0.0 {
            let line = self.line_of(key);
            self.err(line, format!("`{key}`: must be positive"));
        }
        x
    }

    fn text_opt(&mut self, key: &str) -> Option<(String, usize)> {
        self.take(key)
    }

    fn usize_opt(&mut self, key: &str) -> Option<usize> {
        let (text, line) = self.take(key)?;
        match text.trim().parse::<usize>() {
            Ok(n) => Some(n),
            Err(_) => {
                self.err(line, format!("`{key}`: expected a non-negative integer, got `{text}`"));
                None
            }
        }
    }

    fn bool_opt(&mut self, key: &str) -> Option<bool> {
        let (text, line) = self.take(key)?;
        match text.trim() {
            "true" | "yes" | "on" => Some(true),
            "false" | "no" | "off" => Some(false),
            other => {
                self.err(line, format!("`{key}`: expected true or false, got `{other}`"));
                None
            }
        }
    }

    fn list_opt(&mut self, key: &str, dims: &[Dim]) -> Option<Vec<f64>> {
        let (text, line) = self.take(key)?;
        let parts: Vec<&str> = text.split(',').map(str::trim).collect();
        let mut out = Vec::new();
        for (k, p) in parts.iter().enumerate() {
            let dim = dims.get(k).copied().unwrap_or(Dim::NONE);
            match self.parse_inline(p, dim) {
                Ok(x) => out.push(x),
                Err(m) => self.err(line, format!("`{key}` item {}: {m}", k + 1)),
            }
        }
        Some(out)
    }

    fn parse_inline(&self, text: &str, dim: Dim) -> Result<f64, String> {
        let (x, unit) = split_quantity(text).ok_or_else(|| format!("cannot parse `{text}`"))?;
        match unit {
            None => Ok(x),
            Some(u) => {
                let unit = parse_unit(u).ok_or_else(|| format!("unknown unit `{u}`"))?;
                to_registry(x, unit, dim, &self.units)
            }
        }
    }
}

fn tokenize(text: &str) -> (BTreeMap<String, Entry>, BTreeMap<String, usize>, Vec<ConfigError>) {
    let mut entries = BTreeMap::new();
    let mut sections = BTreeMap::new();
    let mut errors = Vec::new();
    let mut section = String::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            match rest.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() && name.split('.').all(valid_ident) => {
                    section = name.trim().to_owned();
                    sections.insert(section.clone(), line);
                }
                _ => errors.push(ConfigError {
                    line,
                    message: format!("malformed section header `{content}`"),
                }),
            }
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            errors.push(ConfigError {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            });
            continue;
        };
        let k = k.trim();
        if !valid_ident(k) {
            errors.push(ConfigError {
                line,
                message: format!("invalid key `{k}`"),
            });
            continue;
        }
        let full = if section.is_empty() {
            k.to_owned()
        } else {
            format!("{section}.{k}")
        };
        if let Some(prev) = entries.get(&full) {
            let prev: &Entry = prev;
            errors.push(ConfigError {
                line,
                message: format!("duplicate key `{full}` (first set on line {})", prev.line),
            });
            continue;
        }
        entries.insert(
            full,
            Entry {
                value: v.trim().to_owned(),
                line,
                used: false,
            },
        );
    }
    (entries, sections, errors)
}

fn valid_ident(s: &str) -> bool {
    let s = s.trim();
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn read_mosfet(r: &mut Reader, prefix: &str, polarity: Polarity) -> MosfetParams {
    check_polarity(r, prefix, polarity);
    MosfetParams::new(
        polarity,
        r.positive(&format!("{prefix}.k_trans"), Dim::TRANSCONDUCTANCE),
        r.quantity(&format!("{prefix}.v_t0"), Dim::VOLTAGE),
        r.quantity(&format!("{prefix}.lambda"), Dim::INVERSE_VOLTAGE),
    )
}

fn read_jfet(r: &mut Reader, prefix: &str, polarity: Polarity) -> JfetParams {
    check_polarity(r, prefix, polarity);
    JfetParams::new(
        polarity,
        r.positive(&format!("{prefix}.beta"), Dim::TRANSCONDUCTANCE),
        r.quantity(&format!("{prefix}.v_t0"), Dim::VOLTAGE),
        r.quantity(&format!("{prefix}.lambda"), Dim::INVERSE_VOLTAGE),
    )
}

fn check_polarity(r: &mut Reader, prefix: &str, expected: Polarity) {
    let key = format!("{prefix}.polarity");
    if let Some((v, line)) = r.text_opt(&key) {
        let want = match expected {
            Polarity::N => "n",
            Polarity::P => "p",
        };
        if v.trim().to_ascii_lowercase() != want {
            r.err(line, format!("`{key}` must be `{want}` for this position"));
        }
    }
}

fn read_pair(r: &mut Reader, prefix: &str, family: &str) -> Option<NndrPairSpec> {
    match family {
        "mosfet" => Some(NndrPairSpec::Mosfet {
            upper: read_mosfet(r, &format!("{prefix}.upper"), Polarity::N),
            lower: read_mosfet(r, &format!("{prefix}.lower"), Polarity::P),
        }),
        "jfet" => Some(NndrPairSpec::Jfet {
            upper: read_jfet(r, &format!("{prefix}.upper"), Polarity::N),
            lower: read_jfet(r, &format!("{prefix}.lower"), Polarity::P),
        }),
        _ => None,
    }
}

fn read_memristor(r: &mut Reader, prefix: &str) -> UnipolarMemristorParams {
    UnipolarMemristorParams {
        r_on: r.positive(&format!("{prefix}.r_on"), Dim::RESISTANCE),
        r_off: r.positive(&format!("{prefix}.r_off"), Dim::RESISTANCE),
        alpha: r.positive(&format!("{prefix}.alpha"), Dim::RESISTANCE_RATE),
        beta_rate: r.positive(&format!("{prefix}.beta_rate"), Dim::RESISTANCE_RATE),
        v_rst: r.quantity(&format!("{prefix}.v_rst"), Dim::VOLTAGE),
        v_set: r.quantity(&format!("{prefix}.v_set"), Dim::VOLTAGE),
    }
}

fn read_system(r: &mut Reader, name: &str, line: usize) -> Option<SystemSpec> {
    let spec = match name {
        "inapik" => SystemSpec::Inapik(InapikParams {
            c_mem: r.positive("params.c_mem", Dim::CAPACITANCE),
            g_l: r.quantity("params.g_l", Dim::CONDUCTANCE),
            g_na: r.quantity("params.g_na", Dim::CONDUCTANCE),
            g_k: r.quantity("params.g_k", Dim::CONDUCTANCE),
            e_l: r.quantity("params.e_l", Dim::VOLTAGE),
            e_na: r.quantity("params.e_na", Dim::VOLTAGE),
            e_k: r.quantity("params.e_k", Dim::VOLTAGE),
            v_half_na: r.quantity("params.v_half_na", Dim::VOLTAGE),
            v_half_k: r.quantity("params.v_half_k", Dim::VOLTAGE),
            k_na: r.quantity("params.k_na", Dim::VOLTAGE),
            k_k: r.quantity("params.k_k", Dim::VOLTAGE),
            tau: r.positive("params.tau", Dim::TIME),
        }),
        "fet_resonator" | "jfet_resonator" => {
            let family = if name == "fet_resonator" { "mosfet" } else { "jfet" };
            let p = FetResonatorParams {
                c1: r.positive("params.c1", Dim::CAPACITANCE),
                c2: r.positive("params.c2", Dim::CAPACITANCE),
                r1: r.positive("params.r1", Dim::RESISTANCE),
                v_dc: r.quantity("params.v_dc", Dim::VOLTAGE),
                q1: read_mosfet(r, "params.q1", Polarity::N),
                pair: read_pair(r, "params.pair", family)?,
            };
            if name == "fet_resonator" {
                SystemSpec::FetResonator(p)
            } else {
                SystemSpec::JfetResonator(p)
            }
        }
        "memristor_resonator" => SystemSpec::MemristorResonator(MemristorResonatorParams {
            c1: r.positive("params.c1", Dim::CAPACITANCE),
            c2: r.positive("params.c2", Dim::CAPACITANCE),
            r1: r.positive("params.r1", Dim::RESISTANCE),
            v_dc: r.quantity("params.v_dc", Dim::VOLTAGE),
            q1: read_mosfet(r, "params.q1", Polarity::N),
            memristor: read_memristor(r, "params.memristor"),
        }),
        "nndr_pair" => {
            let Some((family, fline)) = r.text_opt("params.family") else {
                r.missing("params.family");
                return None;
            };
            match read_pair(r, "params", family.trim()) {
                Some(p) => SystemSpec::NndrPair(p),
                None => {
                    r.err(fline, format!("`params.family`: expected mosfet or jfet, got `{family}`"));
                    return None;
                }
            }
        }
        "memristor" => SystemSpec::Memristor(read_memristor(r, "params")),
        other => {
            r.err(
                line,
                format!(
                    "unknown system `{other}` (expected inapik, fet_resonator, jfet_resonator, memristor_resonator, nndr_pair or memristor)"
                ),
            );
            return None;
        }
    };
    Some(spec)
}

fn read_protocol(r: &mut Reader) -> InputProtocol {
    let kind = r.text_opt("protocol.kind");
    let Some((kind, line)) = kind else {
        return InputProtocol::Constant {
            amplitude: r.quantity_opt("protocol.amplitude", Dim::CURRENT).unwrap_or(0.0),
        };
    };
    match kind.trim() {
        "constant" => InputProtocol::Constant {
            amplitude: r.quantity("protocol.amplitude", Dim::CURRENT),
        },
        "pulse_train" => InputProtocol::PulseTrain {
            base: r.quantity_opt("protocol.base", Dim::CURRENT).unwrap_or(0.0),
            amplitude: r.quantity("protocol.amplitude", Dim::CURRENT),
            onset: r.quantity_opt("protocol.onset", Dim::TIME).unwrap_or(0.0),
            width: r.quantity("protocol.width", Dim::TIME),
            period: r.quantity("protocol.period", Dim::TIME),
            count: r.usize_opt("protocol.count"),
        },
        "ramp" => InputProtocol::Ramp {
            base: r.quantity_opt("protocol.base", Dim::CURRENT).unwrap_or(0.0),
            slope: r.quantity("protocol.slope", Dim::CURRENT_RATE),
        },
        "piecewise_linear" => {
            let mut points = Vec::new();
            match r.take("protocol.points") {
                None => r.missing("protocol.points"),
                Some((text, pline)) => {
                    for (k, item) in text.split(';').map(str::trim).filter(|s| !s.is_empty()).enumerate() {
                        let parsed = item.split_once(':').ok_or_else(|| "expected `time : current`".to_owned()).and_then(
                            |(t, i)| Ok((r.parse_inline(t.trim(), Dim::TIME)?, r.parse_inline(i.trim(), Dim::CURRENT)?)),
                        );
                        match parsed {
                            Ok(p) => points.push(p),
                            Err(m) => r.err(pline, format!("`protocol.points` item {}: {m}", k + 1)),
                        }
                    }
                }
            }
            InputProtocol::PiecewiseLinear { points }
        }
        other => {
            r.err(
                line,
                format!("unknown protocol kind `{other}` (expected constant, pulse_train, ramp or piecewise_linear)"),
            );
            InputProtocol::constant(0.0)
        }
    }
}

fn read_numerics(r: &mut Reader, system: Option<&SystemSpec>) -> Numerics {
    let mut n = Numerics::defaults_for(&r.units);
    let state_dims: Vec<Dim> = match system {
        Some(SystemSpec::Inapik(_)) => vec![Dim::VOLTAGE, Dim::NONE],
        Some(SystemSpec::MemristorResonator(_)) => vec![Dim::VOLTAGE, Dim::VOLTAGE, Dim::RESISTANCE],
        _ => vec![Dim::VOLTAGE, Dim::VOLTAGE],
    };
    if let Some(x) = r.quantity_opt("numerics.tolerance", Dim::NONE) {
        n.tolerance = x;
    }
    if let Some(x) = r.quantity_opt("numerics.t_end", Dim::TIME) {
        n.t_end = x;
    }
    if let Some(x) = r.quantity_opt("numerics.sample_interval", Dim::TIME) {
        n.sample_interval = x;
    }
    if let Some(x) = r.quantity_opt("numerics.transient_fraction", Dim::NONE) {
        n.transient_fraction = x;
    }
    n.initial = r.list_opt("numerics.initial", &state_dims);
    if let Some(x) = r.quantity_opt("numerics.current", Dim::CURRENT) {
        n.current = x;
    }
    let start = r.quantity_opt("numerics.sweep_start", Dim::CURRENT);
    let stop = r.quantity_opt("numerics.sweep_stop", Dim::CURRENT);
    let count = r.usize_opt("numerics.sweep_count");
    n.sweep = match (start, stop, count) {
        (Some(start), Some(stop), Some(count)) => Some(Sweep { start, stop, count }),
        (None, None, None) => None,
        _ => {
            let line = r.line_of("numerics.sweep_start").max(r.line_of("numerics.sweep_count"));
            r.err(line, "sweep_start, sweep_stop and sweep_count must be given together");
            None
        }
    };
    n.v_min = r.quantity_opt("numerics.v_min", Dim::VOLTAGE);
    n.v_max = r.quantity_opt("numerics.v_max", Dim::VOLTAGE);
    if let Some(x) = r.usize_opt("numerics.n_points") {
        n.n_points = x;
    }
    if let Some(x) = r.usize_opt("numerics.resolution") {
        n.resolution = x;
    }
    n.v_peak = r.quantity_opt("numerics.v_peak", Dim::VOLTAGE);
    n.sweep_rate = r.quantity_opt("numerics.sweep_rate", Dim::VOLTAGE_RATE);
    n.r_initial = r.quantity_opt("numerics.r_initial", Dim::RESISTANCE);
    n.rest_current = r.quantity_opt("numerics.rest_current", Dim::CURRENT);
    n
}

/// Parse and validate a scenario, collecting every problem found.
pub fn validate_scenario(text: &str) -> Result<Parsed, Vec<ConfigError>> {
    let (entries, section_lines, errors) = tokenize(text);
    let mut r = Reader {
        entries,
        section_lines,
        errors,
        notes: Vec::new(),
        units: UnitSystem::SI,
    };
    let system_name = r.take("system");
    let experiment = match r.take("experiment") {
        None => {
            r.err(0, "missing required field `experiment`");
            None
        }
        Some((e, line)) => match Experiment::from_name(e.trim()) {
            Some(e) => Some(e),
            None => {
                r.err(line, format!("unknown experiment `{e}`"));
                None
            }
        },
    };
    let name = r.take("name").map(|(n, _)| n);
    let system = match system_name {
        None => {
            r.err(0, "missing required field `system`");
            None
        }
        Some((s, line)) => {
            r.units = if s.trim() == "inapik" {
                UnitSystem::MILLI
            } else {
                UnitSystem::SI
            };
            read_system(&mut r, s.trim(), line)
        }
    };
    let protocol = read_protocol(&mut r);
    let numerics = read_numerics(&mut r, system.as_ref());
    let output = OutputSpec {
        dir: r.take("output.dir").map(|(d, _)| d),
        svg: r.bool_opt("output.svg").unwrap_or(false),
    };

    let unused: Vec<(String, usize)> = r
        .entries
        .iter()
        .filter(|(_, e)| !e.used)
        .map(|(k, e)| (k.clone(), e.line))
        .collect();
    for (k, line) in unused {
        r.err(line, format!("unknown key `{k}`"));
    }

    if let (Some(system), Some(experiment)) = (system, experiment) {
        let scenario = Scenario {
            name,
            system,
            experiment,
            protocol,
            numerics,
            output,
        };
        if r.errors.is_empty() {
            for (field, msg) in scenario.check() {
                let line = field_line(&r, &field, &msg);
                r.err(line, format!("`{field}`: {msg}"));
            }
        }
        if r.errors.is_empty() {
            return Ok(Parsed {
                scenario,
                notes: r.notes,
            });
        }
    }
    r.errors.sort_by_key(|e| e.line);
    Err(r.errors)
}

/// Best line for a validation message: the offending key if it is named in
/// the message, else the section.
fn field_line(r: &Reader, field: &str, msg: &str) -> usize {
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            let name = &msg[start + 1..start + 1 + len];
            let hit = r
                .entries
                .iter()
                .find(|(k, _)| k.starts_with(field) && (k.ends_with(&format!(".{name}")) || k.as_str() == name));
            if let Some((_, e)) = hit {
                return e.line;
            }
        }
    }
    r.line_of(field).max(r.section_lines.get(field).copied().unwrap_or(0))
}

// ---------------------------------------------------------------------------
// Serialization

struct Writer {
    out: String,
    units: UnitSystem,
}

impl Writer {
    fn section(&mut self, name: &str) {
        let _ = write!(self.out, "\n[{name}]\n");
    }

    fn q(&mut self, key: &str, x: f64, dim: Dim) {
        let unit = symbol_for(dim, &self.units);
        if unit.is_empty() {
            let _ = writeln!(self.out, "{key} = {}", fmt_f64(x));
        } else {
            let _ = writeln!(self.out, "{key} = {} {unit}", fmt_f64(x));
        }
    }

    fn raw(&mut self, key: &str, v: impl fmt::Display) {
        let _ = writeln!(self.out, "{key} = {v}");
    }

    fn inline(&self, x: f64, dim: Dim) -> String {
        let unit = symbol_for(dim, &self.units);
        if unit.is_empty() {
            fmt_f64(x)
        } else {
            format!("{} {unit}", fmt_f64(x))
        }
    }

    fn mosfet(&mut self, section: &str, p: &MosfetParams) {
        self.section(section);
        self.raw("polarity", if p.polarity == Polarity::N { "n" } else { "p" });
        self.q("k_trans", p.k_trans, Dim::TRANSCONDUCTANCE);
        self.q("v_t0", p.v_t0, Dim::VOLTAGE);
        self.q("lambda", p.lambda, Dim::INVERSE_VOLTAGE);
    }

    fn jfet(&mut self, section: &str, p: &JfetParams) {
        self.section(section);
        self.raw("polarity", if p.polarity == Polarity::N { "n" } else { "p" });
        self.q("beta", p.beta, Dim::TRANSCONDUCTANCE);
        self.q("v_t0", p.v_t0, Dim::VOLTAGE);
        self.q("lambda", p.lambda, Dim::INVERSE_VOLTAGE);
    }

    fn pair(&mut self, prefix: &str, p: &NndrPairSpec) {
        match p {
            NndrPairSpec::Mosfet { upper, lower } => {
                self.mosfet(&format!("{prefix}.upper"), upper);
                self.mosfet(&format!("{prefix}.lower"), lower);
            }
            NndrPairSpec::Jfet { upper, lower } => {
                self.jfet(&format!("{prefix}.upper"), upper);
                self.jfet(&format!("{prefix}.lower"), lower);
            }
        }
    }

    fn memristor(&mut self, p: &UnipolarMemristorParams) {
        self.q("r_on", p.r_on, Dim::RESISTANCE);
        self.q("r_off", p.r_off, Dim::RESISTANCE);
        self.q("alpha", p.alpha, Dim::RESISTANCE_RATE);
        self.q("beta_rate", p.beta_rate, Dim::RESISTANCE_RATE);
        self.q("v_rst", p.v_rst, Dim::VOLTAGE);
        self.q("v_set", p.v_set, Dim::VOLTAGE);
    }

    fn rc(&mut self, c1: f64, c2: f64, r1: f64, v_dc: f64) {
        self.q("c1", c1, Dim::CAPACITANCE);
        self.q("c2", c2, Dim::CAPACITANCE);
        self.q("r1", r1, Dim::RESISTANCE);
        self.q("v_dc", v_dc, Dim::VOLTAGE);
    }
}

/// Write a scenario in the configuration format; `validate_scenario`
/// reads it back to an identical value.
pub fn serialize_scenario(s: &Scenario) -> String {
    let mut w = Writer {
        out: String::new(),
        units: s.system.units(),
    };
    if let Some(name) = &s.name {
        w.raw("name", name);
    }
    w.raw("system", s.system.name());
    w.raw("experiment", s.experiment.name());
    w.section("params");
    match &s.system {
        SystemSpec::Inapik(p) => {
            w.q("c_mem", p.c_mem, Dim::CAPACITANCE);
            w.q("g_l", p.g_l, Dim::CONDUCTANCE);
            w.q("g_na", p.g_na, Dim::CONDUCTANCE);
            w.q("g_k", p.g_k, Dim::CONDUCTANCE);
            w.q("e_l", p.e_l, Dim::VOLTAGE);
            w.q("e_na", p.e_na, Dim::VOLTAGE);
            w.q("e_k", p.e_k, Dim::VOLTAGE);
            w.q("v_half_na", p.v_half_na, Dim::VOLTAGE);
            w.q("v_half_k", p.v_half_k, Dim::VOLTAGE);
            w.q("k_na", p.k_na, Dim::VOLTAGE);
            w.q("k_k", p.k_k, Dim::VOLTAGE);
            w.q("tau", p.tau, Dim::TIME);
        }
        SystemSpec::FetResonator(p) | SystemSpec::JfetResonator(p) => {
            w.rc(p.c1, p.c2, p.r1, p.v_dc);
            w.mosfet("params.q1", &p.q1);
            w.pair("params.pair", &p.pair);
        }
        SystemSpec::MemristorResonator(p) => {
            w.rc(p.c1, p.c2, p.r1, p.v_dc);
            w.mosfet("params.q1", &p.q1);
            w.section("params.memristor");
            w.memristor(&p.memristor);
        }
        SystemSpec::NndrPair(p) => {
            w.raw(
                "family",
                match p {
                    NndrPairSpec::Mosfet { .. } => "mosfet",
                    NndrPairSpec::Jfet { .. } => "jfet",
                },
            );
            w.pair("params", p);
        }
        SystemSpec::Memristor(p) => w.memristor(p),
    }

    w.section("protocol");
    match &s.protocol {
        InputProtocol::Constant { amplitude } => {
            w.raw("kind", "constant");
            w.q("amplitude", *amplitude, Dim::CURRENT);
        }
        InputProtocol::PulseTrain {
            base,
            amplitude,
            onset,
            width,
            period,
            count,
        } => {
            w.raw("kind", "pulse_train");
            w.q("base", *base, Dim::CURRENT);
            w.q("amplitude", *amplitude, Dim::CURRENT);
            w.q("onset", *onset, Dim::TIME);
            w.q("width", *width, Dim::TIME);
            w.q("period", *period, Dim::TIME);
            if let Some(c) = count {
                w.raw("count", c);
            }
        }
        InputProtocol::Ramp { base, slope } => {
            w.raw("kind", "ramp");
            w.q("base", *base, Dim::CURRENT);
            w.q("slope", *slope, Dim::CURRENT_RATE);
        }
        InputProtocol::PiecewiseLinear { points } => {
            w.raw("kind", "piecewise_linear");
            let items: Vec<String> = points
                .iter()
                .map(|&(t, i)| format!("{} : {}", w.inline(t, Dim::TIME), w.inline(i, Dim::CURRENT)))
                .collect();
            w.raw("points", items.join("; "));
        }
    }

    let n = &s.numerics;
    w.section("numerics");
    w.q("tolerance", n.tolerance, Dim::NONE);
    w.q("t_end", n.t_end, Dim::TIME);
    w.q("sample_interval", n.sample_interval, Dim::TIME);
    w.q("transient_fraction", n.transient_fraction, Dim::NONE);
    if let Some(init) = &n.initial {
        let dims: Vec<Dim> = match s.system {
            SystemSpec::Inapik(_) => vec![Dim::VOLTAGE, Dim::NONE],
            SystemSpec::MemristorResonator(_) => vec![Dim::VOLTAGE, Dim::VOLTAGE, Dim::RESISTANCE],
            _ => vec![Dim::VOLTAGE, Dim::VOLTAGE],
        };
        let items: Vec<String> = init
            .iter()
            .enumerate()
            .map(|(k, &x)| w.inline(x, dims.get(k).copied().unwrap_or(Dim::NONE)))
            .collect();
        w.raw("initial", items.join(", "));
    }
    w.q("current", n.current, Dim::CURRENT);
    if let Some(sw) = n.sweep {
        w.q("sweep_start", sw.start, Dim::CURRENT);
        w.q("sweep_stop", sw.stop, Dim::CURRENT);
        w.raw("sweep_count", sw.count);
    }
    let opt = |w: &mut Writer, key: &str, x: Option<f64>, dim: Dim| {
        if let Some(x) = x {
            w.q(key, x, dim);
        }
    };
    opt(&mut w, "v_min", n.v_min, Dim::VOLTAGE);
    opt(&mut w, "v_max", n.v_max, Dim::VOLTAGE);
    w.raw("n_points", n.n_points);
    w.raw("resolution", n.resolution);
    opt(&mut w, "v_peak", n.v_peak, Dim::VOLTAGE);
    opt(&mut w, "sweep_rate", n.sweep_rate, Dim::VOLTAGE_RATE);
    opt(&mut w, "r_initial", n.r_initial, Dim::RESISTANCE);
    opt(&mut w, "rest_current", n.rest_current, Dim::CURRENT);

    w.section("output");
    if let Some(d) = &s.output.dir {
        w.raw("dir", d);
    }
    w.raw("svg", s.output.svg);
    w.out
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG6: &str = "
system = fet_resonator
experiment = simulate

[params]
c1 = 5 nF
c2 = 0.6 nF
r1 = 1 Mohm
v_dc = 3.5 V

[params.q1]
k_trans = 100 uA/V^2
v_t0 = 0 V
lambda = 0.01 1/V

[params.pair.upper]
k_trans = 40 uA/V^2
v_t0 = -2 V
lambda = 0.01 1/V

[params.pair.lower]
k_trans = 40 uA/V^2
v_t0 = 2 V
lambda = 0.01 1/V

[protocol]
kind = constant
amplitude = 70 uA
";

    #[test]
    fn parses_circuit() {
        let p = validate_scenario(FIG6).unwrap();
        let SystemSpec::FetResonator(f) = p.scenario.system else {
            panic!()
        };
        assert_eq!(f.c1, 5e-9);
        assert_eq!(f.r1, 1e6);
        assert_eq!(f.q1.k_trans, 100e-6);
        assert_eq!(p.scenario.protocol, InputProtocol::constant(70e-6));
    }

    #[test]
    fn negative_capacitance_rejected() {
        let text = FIG6.replace("c1 = 5 nF", "c1 = -5 nF");
        let errs = validate_scenario(&text).unwrap_err();
        assert_eq!(errs.len(), 1);
        assert!(errs[0].message.contains("c1"), "{:?}", errs);
        assert_eq!(errs[0].line, 6);
    }

    #[test]
    fn collects_all_errors() {
        let text = FIG6
            .replace("c2 = 0.6 nF\n", "")
            .replace("v_dc = 3.5 V", "v_dc = 3.5 nF")
            .replace("lambda = 0.01 1/V\n\n[params.pair.upper]", "lambda = 0.01 1/V\nbogus = 1\n\n[params.pair.upper]");
        let errs = validate_scenario(&text).unwrap_err();
        let joined: Vec<String> = errs.iter().map(|e| e.to_string()).collect();
        assert_eq!(errs.len(), 3, "{joined:?}");
        assert!(joined.iter().any(|e| e.contains("params.c2")));
        assert!(joined.iter().any(|e| e.contains("v_dc") && e.contains("dimension")));
        assert!(joined.iter().any(|e| e.contains("bogus")));
    }

    #[test]
    fn missing_field_named() {
        let text = FIG6.replace("r1 = 1 Mohm\n", "");
        let errs = validate_scenario(&text).unwrap_err();
        assert!(errs[0].message.contains("params.r1"));
    }

    #[test]
    fn round_trip_circuit() {
        let p = validate_scenario(FIG6).unwrap();
        let text = serialize_scenario(&p.scenario);
        let again = validate_scenario(&text).unwrap();
        assert_eq!(again.scenario, p.scenario);
    }

    #[test]
    fn iv_only_for_devices() {
        let text = FIG6.replace("experiment = simulate", "experiment = iv");
        assert!(validate_scenario(&text).is_err());
    }
}
