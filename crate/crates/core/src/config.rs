//! Run configuration: an INI-like `key = value` text format with sections.
//!
//! ```text
//! [model]
//! kind = manakov            # manakov | birefringent
//! [initial]
//! shape = single            # single | pair
//! u0 = 2
//! [fiber]
//! length = 6.283185307179586
//! ```
//!
//! Every section and key is listed in [`SCHEMA`]. Parsing reports all
//! problems at once, each with its line and key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use crate::lattice::{
    make_initial_pair, make_initial_single, Coefficient, FiberProfile, ModulationKind, ModulationSpec, PolarizedField,
    TemporalGrid,
};
use crate::nlse::default_steps;
use crate::quantum_meas::{CorrelationKind, Domain, SlotSpec};
use crate::scenarios::PhysicalParams;

/// Known `(section, key)` pairs.
pub const SCHEMA: &[(&str, &[&str])] = &[
    ("model", &["kind"]),
    ("initial", &["shape", "u0", "t_sep", "d_omega"]),
    ("fiber", &["length"]),
    ("dispersion", &["value", "modulation", "period", "depth"]),
    ("birefringence", &["value", "modulation", "period", "depth"]),
    ("group_delay", &["value", "modulation", "period", "depth"]),
    ("grid", &["n_points", "tau_min", "tau_max", "n_steps"]),
    ("slots", &["time_start", "time_end", "time_count", "frequency_panels"]),
    ("measure", &["theta", "kinds", "spectral_kinds", "curve_samples"]),
    ("output", &["dir", "intensity_map", "spectrum", "trajectory", "heatmaps"]),
];

/// Default modulation depth of the dispersion when only the kind and
/// period are given.
pub const DEFAULT_DISPERSION_DEPTH: f64 = 0.2;

/// Default depth for birefringence and group-delay modulation. Negative:
/// the factor is `1 + 0.01 sin(2 pi zeta / period)`.
pub const DEFAULT_COUPLING_DEPTH: f64 = -0.01;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.key, self.message),
            None => write!(f, "`{}`: {}", self.key, self.message),
        }
    }
}

/// All problems found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let lines: Vec<String> = self.0.iter().map(|e| e.to_string()).collect();
        f.write_str(&lines.join("\n"))
    }
}

impl std::error::Error for ConfigErrors {}

impl ConfigErrors {
    pub fn mentions(&self, key: &str) -> bool {
        self.0.iter().any(|e| e.key == key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Manakov,
    Birefringent,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Manakov => "manakov",
            ModelKind::Birefringent => "birefringent",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "manakov" => Some(ModelKind::Manakov),
            "birefringent" => Some(ModelKind::Birefringent),
            _ => None,
        }
    }

    /// `(A, B, C)`.
    pub fn coefficients(&self) -> (f64, f64, f64) {
        match self {
            ModelKind::Manakov => (8.0 / 9.0, 8.0 / 9.0, 0.0),
            ModelKind::Birefringent => (1.0, 2.0 / 3.0, 1.0 / 3.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    /// `U_x = U_y = (u0 / sqrt 2) sech(tau)`.
    Single { u0: f64 },
    /// Two orthogonally polarized pulses at `-t_sep` and `+t_sep` with
    /// opposite frequency shifts `+-d_omega`.
    Pair { u0: f64, t_sep: f64, d_omega: f64 },
}

impl InitialCondition {
    pub fn u0(&self) -> f64 {
        match *self {
            InitialCondition::Single { u0 } | InitialCondition::Pair { u0, .. } => u0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_points: usize,
    pub tau_min: f64,
    pub tau_max: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = TemporalGrid::default();
        Self {
            n_points: g.n_points(),
            tau_min: g.tau_min(),
            tau_max: g.tau_max(),
        }
    }
}

/// `count` contiguous time slots tiling `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSlots {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl Default for TimeSlots {
    fn default() -> Self {
        Self {
            start: -20.0,
            end: 20.0,
            count: 80,
        }
    }
}

/// A set of single-bin frequency slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FrequencyPanel {
    /// Bins `first..=last`, counted from `Omega = 0` in units of `dOmega`.
    Bins { first: i64, last: i64 },
    /// Bins within `half_width` of `-center` and of `+center`.
    Pair { center: f64, half_width: f64 },
}

impl FrequencyPanel {
    pub fn slots(&self, grid: &TemporalGrid) -> SlotSpec {
        let d = grid.d_omega();
        let centers: Vec<f64> = match *self {
            FrequencyPanel::Bins { first, last } => (first..=last).map(|m| m as f64 * d).collect(),
            FrequencyPanel::Pair { center, half_width } => {
                let side = |c: f64| {
                    let lo = ((c - half_width) / d - 1e-9).ceil() as i64;
                    let hi = ((c + half_width) / d + 1e-9).floor() as i64;
                    (lo..=hi).collect::<Vec<i64>>()
                };
                let mut bins = side(-center);
                bins.extend(side(center));
                bins.sort_unstable();
                bins.dedup();
                bins.into_iter().map(|m| m as f64 * d).collect()
            }
        };
        SlotSpec::new(Domain::Frequency, centers, d)
    }

    pub fn label(&self) -> String {
        match *self {
            FrequencyPanel::Bins { first, last } => format!("bins:{first}:{last}"),
            FrequencyPanel::Pair { center, half_width } => format!("pair:{center}:{half_width}"),
        }
    }

    fn parse(s: &str) -> Option<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        match parts.as_slice() {
            ["bins", a, b] => {
                let (first, last) = (a.parse().ok()?, b.parse().ok()?);
                (first <= last).then_some(FrequencyPanel::Bins { first, last })
            }
            ["pair", c, w] => {
                let (center, half_width): (f64, f64) = (c.parse().ok()?, w.parse().ok()?);
                (center.is_finite() && half_width > 0.0 && half_width.is_finite())
                    .then_some(FrequencyPanel::Pair { center, half_width })
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThetaChoice {
    /// Use the phase that minimizes the squeezing ratio.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputOptions {
    pub intensity_map: bool,
    pub spectrum: bool,
    pub trajectory: bool,
    pub heatmaps: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self {
            intensity_map: true,
            spectrum: true,
            trajectory: false,
            heatmaps: true,
        }
    }
}

/// Everything needed to run the pipeline once.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub initial: InitialCondition,
    pub length: f64,
    /// `D(zeta)`; the base value is 1 in every preset.
    pub dispersion: Coefficient,
    pub birefringence: Coefficient,
    pub group_delay: Coefficient,
    pub grid: GridConfig,
    /// `None` selects `ceil(200 L)`.
    pub n_steps: Option<usize>,
    pub time_slots: TimeSlots,
    pub frequency_panels: Vec<FrequencyPanel>,
    pub theta: ThetaChoice,
    /// Time-domain correlation kinds to compute.
    pub kinds: Vec<CorrelationKind>,
    /// Frequency-domain correlation kinds, one matrix per panel and kind.
    pub spectral_kinds: Vec<CorrelationKind>,
    /// Number of points on the `min_theta R(zeta)` curve; 0 disables it.
    pub curve_samples: usize,
    pub outputs: OutputOptions,
    pub output_dir: Option<PathBuf>,
}

impl RunConfig {
    /// Defaults for everything except the physics that must be given.
    pub fn new(model: ModelKind, initial: InitialCondition, length: f64) -> Self {
        Self {
            model,
            initial,
            length,
            dispersion: Coefficient::constant(1.0),
            birefringence: Coefficient::constant(0.0),
            group_delay: Coefficient::constant(0.0),
            grid: GridConfig::default(),
            n_steps: None,
            time_slots: TimeSlots::default(),
            frequency_panels: Vec::new(),
            theta: ThetaChoice::Auto,
            kinds: vec![CorrelationKind::Complete],
            spectral_kinds: Vec::new(),
            curve_samples: 0,
            outputs: OutputOptions::default(),
            output_dir: None,
        }
    }

    pub fn temporal_grid(&self) -> crate::Result<TemporalGrid> {
        TemporalGrid::new(self.grid.n_points, self.grid.tau_min, self.grid.tau_max)
    }

    pub fn profile(&self) -> FiberProfile {
        let (a, b, c) = self.model.coefficients();
        FiberProfile {
            self_phase: a,
            cross_phase: b,
            coherent: c,
            dispersion: self.dispersion,
            birefringence: self.birefringence,
            group_delay: self.group_delay,
            length: self.length,
        }
    }

    pub fn steps(&self) -> usize {
        self.n_steps.unwrap_or_else(|| default_steps(self.length))
    }

    pub fn initial_field(&self) -> crate::Result<PolarizedField> {
        let grid = self.temporal_grid()?;
        match self.initial {
            InitialCondition::Single { u0 } => make_initial_single(grid, u0),
            InitialCondition::Pair { u0, t_sep, d_omega } => make_initial_pair(grid, u0, t_sep, d_omega),
        }
    }

    pub fn time_slot_spec(&self) -> SlotSpec {
        SlotSpec::contiguous(Domain::Time, self.time_slots.start, self.time_slots.end, self.time_slots.count)
    }

    /// Checks the physics and layout against the solver's preconditions.
    pub fn validate(&self) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        let mut push = |key: &str, message: String| {
            errs.push(ConfigError {
                line: None,
                key: key.to_string(),
                message,
            })
        };
        if !(self.initial.u0() > 0.0 && self.initial.u0().is_finite()) {
            push("initial.u0", format!("must be positive, got {}", self.initial.u0()));
        }
        if let InitialCondition::Pair { t_sep, d_omega, .. } = self.initial {
            if !t_sep.is_finite() {
                push("initial.t_sep", "must be finite".into());
            }
            if !d_omega.is_finite() {
                push("initial.d_omega", "must be finite".into());
            }
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            push("fiber.length", format!("must be positive, got {}", self.length));
        }
        for (name, m) in [
            ("dispersion", self.dispersion.modulation),
            ("birefringence", self.birefringence.modulation),
            ("group_delay", self.group_delay.modulation),
        ] {
            if m.kind != ModulationKind::None && !(m.period > 0.0) {
                push(&format!("{name}.period"), format!("must be positive, got {}", m.period));
            }
            if !m.depth.is_finite() {
                push(&format!("{name}.depth"), "must be finite".into());
            }
        }
        if !(self.dispersion.base.is_finite() && self.dispersion.base != 0.0) {
            push("dispersion.value", format!("must be finite and nonzero, got {}", self.dispersion.base));
        }
        for (name, v) in [
            ("birefringence.value", self.birefringence.base),
            ("group_delay.value", self.group_delay.base),
        ] {
            if !v.is_finite() {
                push(name, "must be finite".into());
            }
        }
        let grid = match self.temporal_grid() {
            Ok(g) => Some(g),
            Err(e) => {
                push("grid", e.to_string());
                None
            }
        };
        if self.n_steps == Some(0) {
            push("grid.n_steps", "must be at least 1".into());
        }
        let ts = self.time_slots;
        if ts.count == 0 || !(ts.end > ts.start) {
            push("slots.time_count", "need at least one slot and time_end > time_start".into());
        } else if let Some(g) = &grid {
            if let Err(e) = self.time_slot_spec().validate(g) {
                push("slots.time_count", e.to_string());
            }
        }
        if let Some(g) = &grid {
            for p in &self.frequency_panels {
                let s = p.slots(g);
                if s.is_empty() {
                    push("slots.frequency_panels", format!("panel {} selects no bins", p.label()));
                } else if let Err(e) = s.validate(g) {
                    push("slots.frequency_panels", format!("panel {}: {e}", p.label()));
                }
            }
        }
        if !self.spectral_kinds.is_empty() && self.frequency_panels.is_empty() {
            push("measure.spectral_kinds", "requires at least one frequency panel".into());
        }
        if let ThetaChoice::Fixed(t) = self.theta {
            if !t.is_finite() {
                push("measure.theta", "must be finite".into());
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }

    /// Serializes every field; [`parse_config`] reads it back unchanged.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let mut section = |name: &str, entries: Vec<(&str, String)>| {
            s.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                s.push_str(&format!("{k} = {v}\n"));
            }
            s.push('\n');
        };
        section("model", vec![("kind", self.model.name().into())]);
        section(
            "initial",
            match self.initial {
                InitialCondition::Single { u0 } => vec![("shape", "single".into()), ("u0", fmt_f64(u0))],
                InitialCondition::Pair { u0, t_sep, d_omega } => vec![
                    ("shape", "pair".into()),
                    ("u0", fmt_f64(u0)),
                    ("t_sep", fmt_f64(t_sep)),
                    ("d_omega", fmt_f64(d_omega)),
                ],
            },
        );
        section("fiber", vec![("length", fmt_f64(self.length))]);
        let mut d = vec![("value", fmt_f64(self.dispersion.base))];
        d.extend(modulation_entries(&self.dispersion.modulation));
        section("dispersion", d);
        let mut b = vec![("value", fmt_f64(self.birefringence.base))];
        b.extend(modulation_entries(&self.birefringence.modulation));
        section("birefringence", b);
        let mut g = vec![("value", fmt_f64(self.group_delay.base))];
        g.extend(modulation_entries(&self.group_delay.modulation));
        section("group_delay", g);
        section(
            "grid",
            vec![
                ("n_points", self.grid.n_points.to_string()),
                ("tau_min", fmt_f64(self.grid.tau_min)),
                ("tau_max", fmt_f64(self.grid.tau_max)),
                ("n_steps", self.n_steps.map_or("auto".into(), |n| n.to_string())),
            ],
        );
        section(
            "slots",
            vec![
                ("time_start", fmt_f64(self.time_slots.start)),
                ("time_end", fmt_f64(self.time_slots.end)),
                ("time_count", self.time_slots.count.to_string()),
                (
                    "frequency_panels",
                    self.frequency_panels.iter().map(|p| p.label()).collect::<Vec<_>>().join(", "),
                ),
            ],
        );
        section(
            "measure",
            vec![
                (
                    "theta",
                    match self.theta {
                        ThetaChoice::Auto => "auto".into(),
                        ThetaChoice::Fixed(t) => fmt_f64(t),
                    },
                ),
                ("kinds", kinds_text(&self.kinds)),
                ("spectral_kinds", kinds_text(&self.spectral_kinds)),
                ("curve_samples", self.curve_samples.to_string()),
            ],
        );
        let mut out = vec![
            ("intensity_map", self.outputs.intensity_map.to_string()),
            ("spectrum", self.outputs.spectrum.to_string()),
            ("trajectory", self.outputs.trajectory.to_string()),
            ("heatmaps", self.outputs.heatmaps.to_string()),
        ];
        if let Some(d) = &self.output_dir {
            out.insert(0, ("dir", d.display().to_string()));
        }
        section("output", out);
        s
    }
}

fn fmt_f64(v: f64) -> String {
    // `{:?}` is the shortest representation that parses back exactly.
    format!("{v:?}")
}

fn kinds_text(kinds: &[CorrelationKind]) -> String {
    kinds.iter().map(|k| k.name()).collect::<Vec<_>>().join(", ")
}

fn modulation_entries(m: &ModulationSpec) -> Vec<(&'static str, String)> {
    let mut v = vec![("modulation", m.kind.name().to_string())];
    if m.kind != ModulationKind::None {
        v.push(("period", fmt_f64(m.period)));
        v.push(("depth", fmt_f64(m.depth)));
    }
    v
}

struct Entry {
    line: usize,
    value: String,
}

struct Reader {
    entries: BTreeMap<(String, String), Entry>,
    errors: Vec<ConfigError>,
}

impl Reader {
    fn error(&mut self, line: Option<usize>, key: &str, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            key: key.to_string(),
            message: message.into(),
        });
    }

    fn raw(&self, section: &str, key: &str) -> Option<(usize, String)> {
        self.entries
            .get(&(section.to_string(), key.to_string()))
            .map(|e| (e.line, e.value.clone()))
    }

    fn get<T>(&mut self, section: &str, key: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let (line, value) = self.raw(section, key)?;
        match parse(&value) {
            Some(v) => Some(v),
            None => {
                self.error(Some(line), &format!("{section}.{key}"), format!("expected {what}, got `{value}`"));
                None
            }
        }
    }

    fn f64(&mut self, section: &str, key: &str) -> Option<f64> {
        self.get(section, key, "a number", |s| s.parse::<f64>().ok())
    }

    fn usize(&mut self, section: &str, key: &str) -> Option<usize> {
        self.get(section, key, "a non-negative integer", |s| s.parse::<usize>().ok())
    }

    fn bool(&mut self, section: &str, key: &str) -> Option<bool> {
        self.get(section, key, "true or false", |s| s.parse::<bool>().ok())
    }

    fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        self.raw(section, key).map(|(l, _)| l)
    }

    fn modulation(&mut self, section: &str, default_depth: f64) -> ModulationSpec {
        let kind = self
            .get(section, "modulation", "none, sine or truncated_sine", ModulationKind::parse)
            .unwrap_or(ModulationKind::None);
        let period = self.f64(section, "period");
        let depth = self.f64(section, "depth");
        if kind == ModulationKind::None {
            for (key, given) in [("period", period.is_some()), ("depth", depth.is_some())] {
                if given {
                    let line = self.line_of(section, key);
                    self.error(line, &format!("{section}.{key}"), "given but modulation is none");
                }
            }
            return ModulationSpec::none();
        }
        let period = match period {
            Some(p) if p > 0.0 && !p.is_nan() => p,
            Some(p) => {
                let line = self.line_of(section, "period");
                self.error(line, &format!("{section}.period"), format!("must be positive, got {p}"));
                f64::INFINITY
            }
            None => {
                let line = self.line_of(section, "modulation");
                self.error(line, &format!("{section}.period"), "required when modulation is not none");
                f64::INFINITY
            }
        };
        ModulationSpec {
            kind,
            period,
            depth: depth.unwrap_or(default_depth),
        }
    }
}

fn parse_kinds(s: &str) -> Option<Vec<CorrelationKind>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(|k| CorrelationKind::parse(k.trim())).collect()
}

fn parse_panels(s: &str) -> Option<Vec<FrequencyPanel>> {
    if s.trim().is_empty() {
        return Some(Vec::new());
    }
    s.split(',').map(FrequencyPanel::parse).collect()
}

fn tokenize(text: &str, schema: &[(&str, &[&str])]) -> Reader {
    let mut reader = Reader {
        entries: BTreeMap::new(),
        errors: Vec::new(),
    };
    let mut section: Option<String> = None;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if schema.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                reader.error(Some(line_no), name, "unknown section");
                section = None;
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            reader.error(Some(line_no), line, "expected `key = value`");
            continue;
        };
        let (key, value) = (key.trim(), value.trim());
        let Some(sec) = section.clone() else {
            reader.error(Some(line_no), key, "key outside of a known section");
            continue;
        };
        let known = schema
            .iter()
            .find(|(s, _)| *s == sec)
            .is_some_and(|(_, keys)| keys.contains(&key));
        if !known {
            reader.error(Some(line_no), &format!("{sec}.{key}"), "unknown key");
            continue;
        }
        let k = (sec.clone(), key.to_string());
        if let Some(prev) = reader.entries.get(&k) {
            let first = prev.line;
            reader.error(Some(line_no), &format!("{sec}.{key}"), format!("duplicate key (first on line {first})"));
            continue;
        }
        reader.entries.insert(
            k,
            Entry {
                line: line_no,
                value: value.to_string(),
            },
        );
    }
    reader
}

/// Parses and validates a configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let mut reader = tokenize(text, SCHEMA);
    let r = &mut reader;
    let model = match r.get("model", "kind", "manakov or birefringent", ModelKind::parse) {
        Some(m) => m,
        None => {
            if r.raw("model", "kind").is_none() {
                r.error(None, "model.kind", "required");
            }
            ModelKind::Manakov
        }
    };
    let shape = r
        .get("initial", "shape", "single or pair", |s| match s {
            "single" | "pair" => Some(s.to_string()),
            _ => None,
        })
        .unwrap_or_else(|| "single".into());
    let u0 = r.f64("initial", "u0");
    if u0.is_none() && r.raw("initial", "u0").is_none() {
        r.error(None, "initial.u0", "required");
    }
    let u0 = u0.unwrap_or(f64::NAN);
    let t_sep = r.f64("initial", "t_sep");
    let d_omega = r.f64("initial", "d_omega");
    let initial = if shape == "pair" {
        InitialCondition::Pair {
            u0,
            t_sep: t_sep.unwrap_or(0.0),
            d_omega: d_omega.unwrap_or(0.0),
        }
    } else {
        for (key, given) in [("t_sep", t_sep.is_some()), ("d_omega", d_omega.is_some())] {
            if given {
                let line = r.line_of("initial", key);
                r.error(line, &format!("initial.{key}"), "only valid for shape = pair");
            }
        }
        InitialCondition::Single { u0 }
    };
    let length = r.f64("fiber", "length");
    if length.is_none() && r.raw("fiber", "length").is_none() {
        r.error(None, "fiber.length", "required");
    }
    let mut cfg = RunConfig::new(model, initial, length.unwrap_or(f64::NAN));
    cfg.dispersion = Coefficient::modulated(
        r.f64("dispersion", "value").unwrap_or(1.0),
        r.modulation("dispersion", DEFAULT_DISPERSION_DEPTH),
    );
    cfg.birefringence = Coefficient::modulated(
        r.f64("birefringence", "value").unwrap_or(0.0),
        r.modulation("birefringence", DEFAULT_COUPLING_DEPTH),
    );
    cfg.group_delay = Coefficient::modulated(
        r.f64("group_delay", "value").unwrap_or(0.0),
        r.modulation("group_delay", DEFAULT_COUPLING_DEPTH),
    );
    if let Some(n) = r.usize("grid", "n_points") {
        cfg.grid.n_points = n;
    }
    if let Some(v) = r.f64("grid", "tau_min") {
        cfg.grid.tau_min = v;
    }
    if let Some(v) = r.f64("grid", "tau_max") {
        cfg.grid.tau_max = v;
    }
    cfg.n_steps = r
        .get("grid", "n_steps", "a positive integer or auto", |s| match s {
            "auto" => Some(None),
            _ => s.parse::<usize>().ok().map(Some),
        })
        .unwrap_or(None);
    if let Some(v) = r.f64("slots", "time_start") {
        cfg.time_slots.start = v;
    }
    if let Some(v) = r.f64("slots", "time_end") {
        cfg.time_slots.end = v;
    }
    if let Some(v) = r.usize("slots", "time_count") {
        cfg.time_slots.count = v;
    }
    if let Some(p) = r.get("slots", "frequency_panels", "panels like bins:-32:31 or pair:1.63:0.46", parse_panels) {
        cfg.frequency_panels = p;
    }
    if let Some(t) = r.get("measure", "theta", "auto or a number", |s| match s {
        "auto" => Some(ThetaChoice::Auto),
        _ => s.parse::<f64>().ok().map(ThetaChoice::Fixed),
    }) {
        cfg.theta = t;
    }
    if let Some(k) = r.get("measure", "kinds", "a list of xx, yy, xy, complete", parse_kinds) {
        cfg.kinds = k;
    }
    if let Some(k) = r.get("measure", "spectral_kinds", "a list of xx, yy, xy, complete", parse_kinds) {
        cfg.spectral_kinds = k;
    }
    if let Some(n) = r.usize("measure", "curve_samples") {
        cfg.curve_samples = n;
    }
    if let Some((_, d)) = r.raw("output", "dir") {
        cfg.output_dir = Some(PathBuf::from(d));
    }
    let flags = &mut cfg.outputs;
    for (key, slot) in [
        ("intensity_map", &mut flags.intensity_map),
        ("spectrum", &mut flags.spectrum),
        ("trajectory", &mut flags.trajectory),
        ("heatmaps", &mut flags.heatmaps),
    ] {
        if let Some(v) = r.bool("output", key) {
            *slot = v;
        }
    }

    if r.errors.is_empty() {
        if let Err(ConfigErrors(more)) = cfg.validate() {
            for mut e in more {
                let mut parts = e.key.splitn(2, '.');
                if let (Some(s), Some(k)) = (parts.next(), parts.next()) {
                    e.line = r.line_of(s, k);
                }
                r.errors.push(e);
            }
        }
    }
    if reader.errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigErrors(reader.errors))
    }
}

/// Known `(section, key)` pairs of a physical-units description.
pub const PHYSICAL_SCHEMA: &[(&str, &[&str])] = &[
    ("fiber", &["model", "length", "gamma", "a_eff", "refractive_index"]),
    ("pulse", &["t0", "peak_power"]),
    ("dispersion", &["beta2_avg", "beta2", "modulation", "period", "depth"]),
    ("group_delay", &["beta1_diff", "modulation", "period", "depth"]),
    ("birefringence", &["delta_beta", "modulation", "period", "depth"]),
];

/// Physical fiber parameters plus the input peak power (W).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalInput {
    pub params: PhysicalParams,
    pub peak_power: f64,
}

/// Parses a physical-units description. Lengths and modulation periods are
/// in meters, times in seconds.
pub fn parse_physical_config(text: &str) -> Result<PhysicalInput, ConfigErrors> {
    let mut reader = tokenize(text, PHYSICAL_SCHEMA);
    let r = &mut reader;
    let required = |r: &mut Reader, section: &str, key: &str| -> f64 {
        match r.f64(section, key) {
            Some(v) => v,
            None => {
                if r.raw(section, key).is_none() {
                    r.error(None, &format!("{section}.{key}"), "required");
                }
                f64::NAN
            }
        }
    };
    let model = r
        .get("fiber", "model", "manakov or birefringent", ModelKind::parse)
        .unwrap_or(ModelKind::Manakov);
    let length = required(r, "fiber", "length");
    let gamma = required(r, "fiber", "gamma");
    let a_eff = required(r, "fiber", "a_eff");
    let refractive_index = r.f64("fiber", "refractive_index").unwrap_or(1.45);
    let t0 = required(r, "pulse", "t0");
    let peak_power = required(r, "pulse", "peak_power");
    let beta2_avg = required(r, "dispersion", "beta2_avg");
    let beta2 = r.f64("dispersion", "beta2").unwrap_or(beta2_avg);
    let params = PhysicalParams {
        model,
        t0,
        beta2_avg,
        beta2,
        beta2_modulation: r.modulation("dispersion", DEFAULT_DISPERSION_DEPTH),
        beta1_diff: r.f64("group_delay", "beta1_diff").unwrap_or(0.0),
        beta1_diff_modulation: r.modulation("group_delay", DEFAULT_COUPLING_DEPTH),
        delta_beta: r.f64("birefringence", "delta_beta").unwrap_or(0.0),
        delta_beta_modulation: r.modulation("birefringence", DEFAULT_COUPLING_DEPTH),
        gamma,
        a_eff,
        refractive_index,
        length,
    };
    if r.errors.is_empty() && !(peak_power > 0.0 && peak_power.is_finite()) {
        let line = r.line_of("pulse", "peak_power");
        r.error(line, "pulse.peak_power", format!("must be positive, got {peak_power}"));
    }
    if reader.errors.is_empty() {
        Ok(PhysicalInput { params, peak_power })
    } else {
        Err(ConfigErrors(reader.errors))
    }
}


#[cfg(test)]
mod physical_tests {
    use super::*;

    #[test]
    fn physical_config_parses_and_reports_missing_keys() {
        let text = "[fiber]\nmodel = birefringent\nlength = 5000\ngamma = 1.3e-3\na_eff = 8e-11\n\
                    [pulse]\nt0 = 1e-12\npeak_power = 2.5\n[dispersion]\nbeta2_avg = -2e-26\n\
                    modulation = sine\nperiod = 650\n";
        let p = parse_physical_config(text).unwrap();
        assert_eq!(p.params.beta2, -2e-26);
        assert_eq!(p.params.beta2_modulation, ModulationSpec::sine(650.0, DEFAULT_DISPERSION_DEPTH));
        assert_eq!(p.peak_power, 2.5);
        let err = parse_physical_config("[fiber]\nlength = 1\nwidth = 3\n").unwrap_err();
        assert!(err.mentions("fiber.width") && err.mentions("pulse.t0") && err.mentions("dispersion.beta2_avg"));
    }
}
