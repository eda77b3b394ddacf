//! Scenario configuration: TOML with flat sections, validated in one pass
//! so that every problem is reported at once.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use toml::{Table, Value};

use crate::ensemble::FixedGeometry;
use crate::model::{make_domain, Boundary, DomainSpec, GaugeKind, GaugeSchedule, PhysParams, Ramp};
use crate::ops::{Order, Stencil};
use crate::solver::{Method, NoiseKind, Quench};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    UniformStationary,
    DiscStationary,
    RingQuench,
    StripHall,
    Custom,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::UniformStationary,
        ScenarioKind::DiscStationary,
        ScenarioKind::RingQuench,
        ScenarioKind::StripHall,
        ScenarioKind::Custom,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::UniformStationary => "uniform-stationary",
            ScenarioKind::DiscStationary => "disc-stationary",
            ScenarioKind::RingQuench => "ring-quench",
            ScenarioKind::StripHall => "strip-hall",
            ScenarioKind::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioKind::UniformStationary => "relax to the uniform state, check residuals and pair-event silence",
            ScenarioKind::DiscStationary => "vortex in a uniform field (radial reduction), radial force balance",
            ScenarioKind::RingQuench => "flux-threaded ring after a quench: growth rates, potentials, pair ensemble",
            ScenarioKind::StripHall => "current-carrying strip in a transverse field: Lorentz vs quantum force",
            ScenarioKind::Custom => "free combination of domain, gauge, initial state and solver",
        }
    }

    pub fn has_oracle(self) -> bool {
        matches!(
            self,
            ScenarioKind::UniformStationary | ScenarioKind::DiscStationary | ScenarioKind::RingQuench
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Evolve,
    Relax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSection {
    pub mode: SolverMode,
    pub method: Method,
    /// `None` picks 90% of the stability bound.
    pub dt: Option<f64>,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub tol_stat: f64,
    pub max_relax_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Zero,
    Uniform,
    PlaneWave,
    Vortex,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialSection {
    pub kind: InitialKind,
    /// `None` means `√(-α/β)` (or 1 when α ≥ 0).
    pub amplitude: Option<f64>,
    pub phase: f64,
    pub wave_x: i64,
    pub wave_y: i64,
    pub winding: i64,
    pub core_radius: f64,
    pub noise_amplitude: f64,
    pub noise: NoiseKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuenchSection {
    pub alpha_before: f64,
    pub at: f64,
    pub growth_window: [f64; 2],
    pub decay_window: [f64; 2],
    pub measure_at: f64,
    /// Harmonics `|n| ≤ modes` are recorded and fitted.
    pub modes: i64,
}

impl QuenchSection {
    pub fn quench(&self) -> Quench {
        Quench {
            alpha_before: self.alpha_before,
            at: self.at,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    IntervalCells,
    FixedCells,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnsembleSection {
    pub particles: usize,
    /// Seed the ensemble once the mean density reaches this value; `None`
    /// seeds it at the start of the evolution.
    pub start_density: Option<f64>,
    pub tau: f64,
    pub variant: Variant,
    pub fixed: FixedGeometry,
    pub bins: usize,
    pub events: bool,
    /// Advect a second ensemble without events alongside.
    pub negative_control: bool,
    /// Check intervals run on stationary states.
    pub intervals: usize,
    pub trajectory_particles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscSection {
    pub winding: i64,
    pub b0: f64,
    pub outer_radius: f64,
    pub nodes: usize,
    pub relax_dt: f64,
    /// Comparisons use `r ≥ window_fraction · r_B`.
    pub window_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputSection {
    pub dir: Option<String>,
    pub snapshots: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    pub seed: Option<u64>,
    pub domain: DomainSpec,
    pub params: PhysParams,
    pub gauge: GaugeSchedule,
    pub stencil: Stencil,
    pub solver: SolverSection,
    pub initial: InitialSection,
    pub quench: Option<QuenchSection>,
    pub ensemble: Option<EnsembleSection>,
    pub disc: DiscSection,
    pub output: OutputSection,
}

/// Every problem found in a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const TOP_KEYS: &[&str] = &[
    "scenario", "seed", "domain", "params", "gauge", "solver", "initial", "quench", "ensemble", "disc", "output",
];

fn section_keys(section: &str) -> &'static [&'static str] {
    match section {
        "domain" => &["kind", "radius", "nodes", "lx", "ly", "nx", "ny", "boundary_x", "boundary_y"],
        "params" => &["alpha", "beta", "gamma", "mass", "charge", "hbar", "light_c"],
        "gauge" => &["kind", "b0", "flux_ratio", "ramp_start", "ramp_duration"],
        "solver" => &[
            "mode", "method", "dt", "t_end", "snapshot_stride", "tol_stat", "max_relax_steps", "order", "epsilon_rho",
        ],
        "initial" => &[
            "kind", "amplitude", "phase", "wave_x", "wave_y", "winding", "core_radius", "noise_amplitude", "noise", "max_mode",
        ],
        "quench" => &["enabled", "alpha_before", "at", "growth_window", "decay_window", "measure_at", "modes"],
        "ensemble" => &[
            "enabled", "particles", "start_density", "tau", "variant", "fixed_cells_x", "fixed_cells_y", "bins", "events",
            "negative_control", "intervals", "trajectory_particles",
        ],
        "disc" => &["winding", "b0", "outer_radius", "nodes", "relax_dt", "window_fraction"],
        "output" => &["dir", "snapshots"],
        _ => &[],
    }
}

fn suggest(key: &str, candidates: &[&str]) -> Option<String> {
    candidates
        .iter()
        .map(|c| (strsim::damerau_levenshtein(key, c), *c))
        .filter(|(d, c)| *d <= 2.max(c.len() / 3))
        .min()
        .map(|(_, c)| c.to_string())
}

fn unknown(errors: &mut Vec<String>, path: &str, key: &str, candidates: &[&str]) {
    let msg = match suggest(key, candidates) {
        Some(s) => format!("{path}: unknown key `{key}` (did you mean `{s}`?)"),
        None => format!("{path}: unknown key `{key}`"),
    };
    errors.push(msg);
}

/// Typed access to one section, recording problems instead of failing.
struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

impl<'a> Section<'a> {
    fn present(&self) -> bool {
        self.table.is_some()
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn raw(&self, key: &str) -> Option<&'a Value> {
        self.table.and_then(|t| t.get(key))
    }

    fn mismatch(&self, errors: &mut Vec<String>, key: &str, want: &str, got: &Value) {
        errors.push(format!("{}.{key}: expected {want}, found {}", self.name, got.type_str()));
    }

    fn f64(&self, errors: &mut Vec<String>, key: &str, default: f64) -> f64 {
        self.opt_f64(errors, key).unwrap_or(default)
    }

    fn opt_f64(&self, errors: &mut Vec<String>, key: &str) -> Option<f64> {
        match self.raw(key)? {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            other => {
                self.mismatch(errors, key, "a number", other);
                None
            }
        }
    }

    fn int(&self, errors: &mut Vec<String>, key: &str, default: i64) -> i64 {
        match self.raw(key) {
            None => default,
            Some(Value::Integer(i)) => *i,
            Some(other) => {
                self.mismatch(errors, key, "an integer", other);
                default
            }
        }
    }

    fn count(&self, errors: &mut Vec<String>, key: &str, default: usize) -> usize {
        let v = self.int(errors, key, default as i64);
        if v < 0 {
            errors.push(format!("{}.{key}: must be ≥ 0, got {v}", self.name));
            default
        } else {
            v as usize
        }
    }

    fn boolean(&self, errors: &mut Vec<String>, key: &str, default: bool) -> bool {
        match self.raw(key) {
            None => default,
            Some(Value::Boolean(b)) => *b,
            Some(other) => {
                self.mismatch(errors, key, "true or false", other);
                default
            }
        }
    }

    fn string(&self, errors: &mut Vec<String>, key: &str) -> Option<&'a str> {
        match self.raw(key)? {
            Value::String(s) => Some(s.as_str()),
            other => {
                self.mismatch(errors, key, "a string", other);
                None
            }
        }
    }

    fn choice<T: Copy>(&self, errors: &mut Vec<String>, key: &str, options: &[(&str, T)], default: T) -> T {
        let Some(s) = self.string(errors, key) else {
            return default;
        };
        match options.iter().find(|(n, _)| *n == s) {
            Some((_, v)) => *v,
            None => {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                let hint = suggest(s, &names).map(|h| format!(" (did you mean `{h}`?)")).unwrap_or_default();
                errors.push(format!("{}.{key}: `{s}` is not one of {}{hint}", self.name, names.join(", ")));
                default
            }
        }
    }

    fn window(&self, errors: &mut Vec<String>, key: &str, default: [f64; 2]) -> [f64; 2] {
        match self.raw(key) {
            None => default,
            Some(Value::Array(a)) if a.len() == 2 => {
                let mut out = default;
                for (k, v) in a.iter().enumerate() {
                    match v {
                        Value::Float(x) => out[k] = *x,
                        Value::Integer(i) => out[k] = *i as f64,
                        other => self.mismatch(errors, key, "two numbers", other),
                    }
                }
                if !(out[1] > out[0]) {
                    errors.push(format!("{}.{key}: window end must exceed its start, got {out:?}", self.name));
                }
                out
            }
            Some(other) => {
                self.mismatch(errors, key, "a two-element array", other);
                default
            }
        }
    }
}

/// Baseline configuration of each scenario; files override individual keys.
pub fn defaults(kind: ScenarioKind) -> ScenarioConfig {
    let ring = DomainSpec::Ring { radius: 1.0, nodes: 64 };
    let base = ScenarioConfig {
        scenario: kind,
        seed: None,
        domain: ring,
        params: PhysParams::default(),
        gauge: GaugeSchedule::zero(),
        stencil: Stencil::default(),
        solver: SolverSection {
            mode: SolverMode::Relax,
            method: Method::SemiImplicit,
            dt: Some(1.0),
            t_end: 10.0,
            snapshot_stride: 1000,
            tol_stat: 1e-10,
            max_relax_steps: 100_000,
        },
        initial: InitialSection {
            kind: InitialKind::Uniform,
            amplitude: None,
            phase: 0.0,
            wave_x: 0,
            wave_y: 0,
            winding: 1,
            core_radius: 1.0,
            noise_amplitude: 0.0,
            noise: NoiseKind::Nodes,
        },
        quench: None,
        ensemble: None,
        disc: DiscSection {
            winding: 1,
            b0: 2.0,
            outer_radius: 2.5,
            nodes: 256,
            relax_dt: 0.05,
            window_fraction: 0.75,
        },
        output: OutputSection {
            dir: None,
            snapshots: true,
        },
    };
    let ensemble = EnsembleSection {
        particles: 10_000,
        start_density: None,
        tau: 0.05,
        variant: Variant::IntervalCells,
        fixed: FixedGeometry { cells_x: 16, cells_y: 1 },
        bins: 32,
        events: true,
        negative_control: false,
        intervals: 1000,
        trajectory_particles: 16,
    };
    match kind {
        ScenarioKind::UniformStationary => ScenarioConfig {
            initial: InitialSection {
                noise_amplitude: 1e-3,
                ..base.initial
            },
            ensemble: Some(EnsembleSection { bins: 16, ..ensemble }),
            ..base
        },
        ScenarioKind::DiscStationary => ScenarioConfig {
            params: PhysParams { alpha: -4.0, ..base.params },
            gauge: GaugeSchedule::stat(GaugeKind::UniformFieldDisc { b0: 2.0 }),
            solver: SolverSection {
                // 512 radial nodes put the roundoff floor of the residual near 3e-11
                tol_stat: 1e-10,
                ..base.solver
            },
            ..base
        },
        ScenarioKind::RingQuench => ScenarioConfig {
            gauge: GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: 0.3 }),
            solver: SolverSection {
                mode: SolverMode::Evolve,
                method: Method::Rk4,
                dt: None,
                t_end: 350.0,
                snapshot_stride: 5000,
                ..base.solver
            },
            initial: InitialSection {
                kind: InitialKind::Zero,
                noise_amplitude: 1e-8,
                noise: NoiseKind::Harmonics { max_mode: None },
                ..base.initial
            },
            quench: Some(QuenchSection {
                alpha_before: 0.1,
                at: 0.0,
                growth_window: [0.0, 40.0],
                decay_window: [0.0, 15.0],
                measure_at: 200.0,
                modes: 2,
            }),
            ensemble: Some(EnsembleSection {
                start_density: Some(0.005),
                negative_control: true,
                ..ensemble
            }),
            ..base
        },
        ScenarioKind::StripHall => ScenarioConfig {
            domain: DomainSpec::Grid {
                lx: 8.0,
                ly: 6.0,
                nx: 64,
                ny: 128,
                boundary_x: Boundary::Periodic,
                boundary_y: Boundary::ZeroCurrent,
            },
            params: PhysParams { alpha: -1.0, ..base.params },
            gauge: GaugeSchedule::stat(GaugeKind::UniformFieldStrip { b0: 0.1 }),
            solver: SolverSection {
                dt: Some(0.2),
                tol_stat: 1e-9,
                ..base.solver
            },
            initial: InitialSection {
                kind: InitialKind::PlaneWave,
                wave_x: 1,
                ..base.initial
            },
            ..base
        },
        ScenarioKind::Custom => ScenarioConfig {
            solver: SolverSection {
                mode: SolverMode::Evolve,
                method: Method::Rk4,
                dt: None,
                ..base.solver
            },
            ..base
        },
    }
}

/// Applies `section.key=value` (or `key=value` at top level) to a parsed
/// table. The value is read as a TOML value, falling back to a string.
pub fn apply_override(table: &mut Table, spec: &str) -> Result<(), String> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| format!("override `{spec}` is not of the form key=value"))?;
    let path = path.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    };
    match path.split_once('.') {
        None => {
            table.insert(path.to_string(), value);
        }
        Some((section, key)) => {
            let entry = table
                .entry(section.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            match entry {
                Value::Table(t) => {
                    t.insert(key.to_string(), value);
                }
                _ => return Err(format!("override `{spec}`: `{section}` is not a section")),
            }
        }
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigErrors> {
    parse_config_with(text, &[])
}

/// Parses, applies overrides, fills scenario defaults and validates.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigErrors> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigErrors(vec![format!("syntax error: {}", e.message().trim())]))?;
    let mut errors = Vec::new();
    for o in overrides {
        if let Err(e) = apply_override(&mut table, o) {
            errors.push(e);
        }
    }
    let cfg = from_table(&table, &mut errors);
    // fields that failed to parse keep their defaults, so validation still
    // reports the remaining problems in the same pass
    if let Some(cfg) = &cfg {
        validate(cfg, &table, &mut errors);
    }
    match cfg {
        Some(cfg) if errors.is_empty() => Ok(cfg),
        _ => Err(ConfigErrors(errors)),
    }
}

fn from_table(table: &Table, errors: &mut Vec<String>) -> Option<ScenarioConfig> {
    let mut sections: BTreeMap<&str, Option<&Table>> = BTreeMap::new();
    for (key, value) in table {
        if !TOP_KEYS.contains(&key.as_str()) {
            // a misplaced section key gets pointed at its section
            let home = TOP_KEYS.iter().find(|s| section_keys(s).contains(&key.as_str()));
            match home {
                Some(s) => errors.push(format!("unknown top-level key `{key}` (it belongs in [{s}])")),
                None => unknown(errors, "top level", key, TOP_KEYS),
            }
            continue;
        }
        if key == "scenario" || key == "seed" {
            continue;
        }
        match value {
            Value::Table(t) => {
                let allowed = section_keys(key);
                for k in t.keys() {
                    if !allowed.contains(&k.as_str()) {
                        unknown(errors, &format!("[{key}]"), k, allowed);
                    }
                }
                sections.insert(TOP_KEYS.iter().find(|s| **s == key).unwrap(), Some(t));
            }
            other => errors.push(format!("`{key}` must be a section, found {}", other.type_str())),
        }
    }
    let sec = |name: &'static str| Section {
        name,
        table: sections.get(name).copied().flatten(),
    };

    let kind = match table.get("scenario") {
        None => {
            errors.push("missing required key `scenario`".into());
            return None;
        }
        Some(Value::String(s)) => match ScenarioKind::parse(s) {
            Some(k) => k,
            None => {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.name()).collect();
                let hint = suggest(s, &names).map(|h| format!(" (did you mean `{h}`?)")).unwrap_or_default();
                errors.push(format!("scenario: `{s}` is not one of {}{hint}", names.join(", ")));
                return None;
            }
        },
        Some(other) => {
            errors.push(format!("scenario: expected a string, found {}", other.type_str()));
            return None;
        }
    };
    let mut cfg = defaults(kind);
    match table.get("seed") {
        None => {}
        Some(Value::Integer(i)) if *i >= 0 => cfg.seed = Some(*i as u64),
        Some(other) => errors.push(format!("seed: expected a non-negative integer, found {other}")),
    }

    read_domain(&sec("domain"), &mut cfg, errors);
    read_params(&sec("params"), &mut cfg, errors);
    read_gauge(&sec("gauge"), &mut cfg, errors);
    read_solver(&sec("solver"), &mut cfg, errors);
    read_initial(&sec("initial"), &mut cfg, errors);
    read_quench(&sec("quench"), &mut cfg, errors);
    read_ensemble(&sec("ensemble"), &mut cfg, errors);
    read_disc(&sec("disc"), &mut cfg, errors);
    let out = sec("output");
    if let Some(dir) = out.string(errors, "dir") {
        cfg.output.dir = Some(dir.to_string());
    }
    cfg.output.snapshots = out.boolean(errors, "snapshots", cfg.output.snapshots);
    Some(cfg)
}

const BOUNDARIES: [(&str, Boundary); 2] = [("periodic", Boundary::Periodic), ("zero-current", Boundary::ZeroCurrent)];

fn read_domain(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    if !s.present() {
        return;
    }
    let current = match cfg.domain {
        DomainSpec::Ring { .. } => "ring",
        DomainSpec::Grid { .. } => "grid",
    };
    let kind = s.choice(errors, "kind", &[("ring", "ring"), ("grid", "grid")], current);
    match kind {
        "ring" => {
            let (r0, n0) = match cfg.domain {
                DomainSpec::Ring { radius, nodes } => (radius, nodes),
                _ => (1.0, 64),
            };
            cfg.domain = DomainSpec::Ring {
                radius: s.f64(errors, "radius", r0),
                nodes: s.count(errors, "nodes", n0),
            };
            for k in ["lx", "ly", "nx", "ny", "boundary_x", "boundary_y"] {
                if s.has(k) {
                    errors.push(format!("domain.{k}: only meaningful for kind = \"grid\""));
                }
            }
        }
        _ => {
            let (lx, ly, nx, ny, bx, by) = match cfg.domain {
                DomainSpec::Grid { lx, ly, nx, ny, boundary_x, boundary_y } => (lx, ly, nx, ny, boundary_x, boundary_y),
                _ => (10.0, 10.0, 64, 64, Boundary::Periodic, Boundary::Periodic),
            };
            cfg.domain = DomainSpec::Grid {
                lx: s.f64(errors, "lx", lx),
                ly: s.f64(errors, "ly", ly),
                nx: s.count(errors, "nx", nx),
                ny: s.count(errors, "ny", ny),
                boundary_x: s.choice(errors, "boundary_x", &BOUNDARIES, bx),
                boundary_y: s.choice(errors, "boundary_y", &BOUNDARIES, by),
            };
            for k in ["radius", "nodes"] {
                if s.has(k) {
                    errors.push(format!("domain.{k}: only meaningful for kind = \"ring\""));
                }
            }
        }
    }
}

fn read_params(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    let p = &mut cfg.params;
    p.alpha = s.f64(errors, "alpha", p.alpha);
    p.beta = s.f64(errors, "beta", p.beta);
    p.gamma = s.f64(errors, "gamma", p.gamma);
    p.mass = s.f64(errors, "mass", p.mass);
    p.charge = s.f64(errors, "charge", p.charge);
    p.hbar = s.f64(errors, "hbar", p.hbar);
    p.light_c = s.f64(errors, "light_c", p.light_c);
}

fn read_gauge(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    if !s.present() {
        return;
    }
    let (cur_kind, cur_b0, cur_flux) = match cfg.gauge.kind {
        GaugeKind::Zero => ("zero", 1.0, 0.0),
        GaugeKind::UniformFieldDisc { b0 } => ("uniform-field-disc", b0, 0.0),
        GaugeKind::UniformFieldStrip { b0 } => ("uniform-field-strip", b0, 0.0),
        GaugeKind::RingFlux { flux_ratio } => ("ring-flux", 1.0, flux_ratio),
    };
    let kind = s.choice(
        errors,
        "kind",
        &[
            ("zero", "zero"),
            ("uniform-field-disc", "uniform-field-disc"),
            ("uniform-field-strip", "uniform-field-strip"),
            ("ring-flux", "ring-flux"),
        ],
        cur_kind,
    );
    let b0 = s.f64(errors, "b0", cur_b0);
    let flux = s.f64(errors, "flux_ratio", cur_flux);
    cfg.gauge.kind = match kind {
        "zero" => GaugeKind::Zero,
        "uniform-field-disc" => GaugeKind::UniformFieldDisc { b0 },
        "uniform-field-strip" => GaugeKind::UniformFieldStrip { b0 },
        _ => GaugeKind::RingFlux { flux_ratio: flux },
    };
    if kind != "ring-flux" && s.has("flux_ratio") {
        errors.push("gauge.flux_ratio: only meaningful for kind = \"ring-flux\"".into());
    }
    if !kind.starts_with("uniform") && s.has("b0") {
        errors.push(format!("gauge.b0: not used by kind = \"{kind}\""));
    }
    let start = s.opt_f64(errors, "ramp_start");
    let duration = s.opt_f64(errors, "ramp_duration");
    if start.is_some() || duration.is_some() {
        cfg.gauge.ramp = Some(Ramp {
            start: start.unwrap_or(0.0),
            duration: duration.unwrap_or(1.0),
        });
    }
}

fn read_solver(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    let v = &mut cfg.solver;
    v.mode = s.choice(errors, "mode", &[("evolve", SolverMode::Evolve), ("relax", SolverMode::Relax)], v.mode);
    v.method = s.choice(errors, "method", &[("rk4", Method::Rk4), ("semi-implicit", Method::SemiImplicit)], v.method);
    if s.has("dt") {
        v.dt = match s.raw("dt") {
            Some(Value::String(a)) if a == "auto" => None,
            _ => s.opt_f64(errors, "dt").or(v.dt),
        };
    }
    v.t_end = s.f64(errors, "t_end", v.t_end);
    v.snapshot_stride = s.count(errors, "snapshot_stride", v.snapshot_stride);
    v.tol_stat = s.f64(errors, "tol_stat", v.tol_stat);
    v.max_relax_steps = s.count(errors, "max_relax_steps", v.max_relax_steps);
    let order = s.count(errors, "order", cfg.stencil.order.as_usize());
    match Order::from_usize(order) {
        Some(o) => cfg.stencil.order = o,
        None => errors.push(format!("solver.order: must be 2 or 4, got {order}")),
    }
    cfg.stencil.epsilon_rho = s.f64(errors, "epsilon_rho", cfg.stencil.epsilon_rho);
}

fn read_initial(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    let i = &mut cfg.initial;
    i.kind = s.choice(
        errors,
        "kind",
        &[
            ("zero", InitialKind::Zero),
            ("uniform", InitialKind::Uniform),
            ("plane-wave", InitialKind::PlaneWave),
            ("vortex", InitialKind::Vortex),
        ],
        i.kind,
    );
    if s.has("amplitude") {
        i.amplitude = s.opt_f64(errors, "amplitude");
    }
    i.phase = s.f64(errors, "phase", i.phase);
    i.wave_x = s.int(errors, "wave_x", i.wave_x);
    i.wave_y = s.int(errors, "wave_y", i.wave_y);
    i.winding = s.int(errors, "winding", i.winding);
    i.core_radius = s.f64(errors, "core_radius", i.core_radius);
    i.noise_amplitude = s.f64(errors, "noise_amplitude", i.noise_amplitude);
    let cur = match i.noise {
        NoiseKind::Nodes => "nodes",
        NoiseKind::Harmonics { .. } => "harmonics",
    };
    let kind = s.choice(errors, "noise", &[("nodes", "nodes"), ("harmonics", "harmonics")], cur);
    let cur_max = match i.noise {
        NoiseKind::Harmonics { max_mode } => max_mode,
        NoiseKind::Nodes => None,
    };
    let max_mode = if s.has("max_mode") {
        Some(s.count(errors, "max_mode", 0))
    } else {
        cur_max
    };
    i.noise = match kind {
        "nodes" => NoiseKind::Nodes,
        _ => NoiseKind::Harmonics { max_mode },
    };
}

fn read_quench(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    if !s.present() {
        return;
    }
    let base = cfg.quench.unwrap_or(QuenchSection {
        alpha_before: cfg.params.alpha.abs(),
        at: 0.0,
        growth_window: [0.0, 40.0],
        decay_window: [0.0, 15.0],
        measure_at: 200.0,
        modes: 2,
    });
    if !s.boolean(errors, "enabled", true) {
        cfg.quench = None;
        return;
    }
    cfg.quench = Some(QuenchSection {
        alpha_before: s.f64(errors, "alpha_before", base.alpha_before),
        at: s.f64(errors, "at", base.at),
        growth_window: s.window(errors, "growth_window", base.growth_window),
        decay_window: s.window(errors, "decay_window", base.decay_window),
        measure_at: s.f64(errors, "measure_at", base.measure_at),
        modes: s.int(errors, "modes", base.modes),
    });
}

fn read_ensemble(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    if !s.present() {
        return;
    }
    let base = cfg.ensemble.unwrap_or(EnsembleSection {
        particles: 10_000,
        start_density: None,
        tau: 0.05,
        variant: Variant::IntervalCells,
        fixed: FixedGeometry { cells_x: 16, cells_y: 1 },
        bins: 32,
        events: true,
        negative_control: false,
        intervals: 1000,
        trajectory_particles: 16,
    });
    if !s.boolean(errors, "enabled", true) {
        cfg.ensemble = None;
        return;
    }
    let start_density = if s.has("start_density") {
        s.opt_f64(errors, "start_density")
    } else {
        base.start_density
    };
    cfg.ensemble = Some(EnsembleSection {
        particles: s.count(errors, "particles", base.particles),
        start_density,
        tau: s.f64(errors, "tau", base.tau),
        variant: s.choice(
            errors,
            "variant",
            &[("interval-cells", Variant::IntervalCells), ("fixed-cells", Variant::FixedCells)],
            base.variant,
        ),
        fixed: FixedGeometry {
            cells_x: s.count(errors, "fixed_cells_x", base.fixed.cells_x),
            cells_y: s.count(errors, "fixed_cells_y", base.fixed.cells_y),
        },
        bins: s.count(errors, "bins", base.bins),
        events: s.boolean(errors, "events", base.events),
        negative_control: s.boolean(errors, "negative_control", base.negative_control),
        intervals: s.count(errors, "intervals", base.intervals),
        trajectory_particles: s.count(errors, "trajectory_particles", base.trajectory_particles),
    });
}

fn read_disc(s: &Section, cfg: &mut ScenarioConfig, errors: &mut Vec<String>) {
    let d = &mut cfg.disc;
    d.winding = s.int(errors, "winding", d.winding);
    d.b0 = s.f64(errors, "b0", d.b0);
    d.outer_radius = s.f64(errors, "outer_radius", d.outer_radius);
    d.nodes = s.count(errors, "nodes", d.nodes);
    d.relax_dt = s.f64(errors, "relax_dt", d.relax_dt);
    d.window_fraction = s.f64(errors, "window_fraction", d.window_fraction);
}

fn positive(errors: &mut Vec<String>, name: &str, x: f64) {
    if !(x > 0.0) || !x.is_finite() {
        errors.push(format!("{name}: must be finite and > 0, got {x}"));
    }
}

fn validate(cfg: &ScenarioConfig, table: &Table, errors: &mut Vec<String>) {
    if let Err(e) = cfg.params.validate() {
        errors.push(format!("params.{e}"));
    }
    if cfg.scenario == ScenarioKind::DiscStationary {
        if table.contains_key("domain") {
            errors.push("[domain]: disc-stationary uses the radial grid configured in [disc]".into());
        }
        if cfg.disc.winding < 1 {
            errors.push(format!("disc.winding: must be ≥ 1, got {}", cfg.disc.winding));
        }
        positive(errors, "disc.b0", cfg.disc.b0);
        positive(errors, "disc.outer_radius", cfg.disc.outer_radius);
        positive(errors, "disc.relax_dt", cfg.disc.relax_dt);
        if !(cfg.disc.window_fraction >= 0.0) {
            errors.push(format!("disc.window_fraction: must be ≥ 0, got {}", cfg.disc.window_fraction));
        }
        if cfg.disc.nodes < crate::model::MIN_NODES {
            errors.push(format!("disc.nodes: must be ≥ {}, got {}", crate::model::MIN_NODES, cfg.disc.nodes));
        }
        if cfg.params.alpha >= 0.0 {
            errors.push(format!(
                "params.alpha: disc-stationary needs α < 0 for a nontrivial stationary state, got {}",
                cfg.params.alpha
            ));
        }
    } else if let Err(e) = make_domain(&cfg.domain) {
        errors.push(format!("domain: {e}"));
    }
    let s = &cfg.solver;
    if let Some(dt) = s.dt {
        positive(errors, "solver.dt", dt);
    }
    positive(errors, "solver.tol_stat", s.tol_stat);
    if s.mode == SolverMode::Evolve {
        positive(errors, "solver.t_end", s.t_end);
    }
    if s.snapshot_stride == 0 {
        errors.push("solver.snapshot_stride: must be ≥ 1".into());
    }
    if !(cfg.stencil.epsilon_rho > 0.0 && cfg.stencil.epsilon_rho < 1.0) {
        errors.push(format!("solver.epsilon_rho: must lie in (0, 1), got {}", cfg.stencil.epsilon_rho));
    }
    if let Some(r) = cfg.gauge.ramp {
        positive(errors, "gauge.ramp_duration", r.duration);
    }
    let i = &cfg.initial;
    if i.noise_amplitude < 0.0 || !i.noise_amplitude.is_finite() {
        errors.push(format!("initial.noise_amplitude: must be ≥ 0, got {}", i.noise_amplitude));
    }
    if let Some(a) = i.amplitude {
        if a < 0.0 || !a.is_finite() {
            errors.push(format!("initial.amplitude: must be ≥ 0, got {a}"));
        }
    }
    if i.kind == InitialKind::Vortex {
        positive(errors, "initial.core_radius", i.core_radius);
    }
    let is_ring = matches!(cfg.domain, DomainSpec::Ring { .. });
    if matches!(i.noise, NoiseKind::Harmonics { .. }) && !is_ring && i.noise_amplitude > 0.0 {
        errors.push("initial.noise: harmonic seeding needs a ring domain".into());
    }
    if i.kind == InitialKind::Vortex && is_ring {
        errors.push("initial.kind: a vortex needs a grid domain".into());
    }
    if cfg.scenario == ScenarioKind::RingQuench {
        if !is_ring {
            errors.push("domain.kind: ring-quench needs a ring domain".into());
        }
        if cfg.quench.is_none() {
            errors.push("[quench]: ring-quench cannot run with the quench disabled".into());
        }
        if !matches!(cfg.gauge.kind, GaugeKind::RingFlux { .. } | GaugeKind::Zero) {
            errors.push("gauge.kind: ring-quench needs a ring-flux or zero gauge".into());
        }
    }
    if let Some(q) = &cfg.quench {
        if !q.alpha_before.is_finite() || !q.at.is_finite() {
            errors.push("quench: alpha_before and at must be finite".into());
        }
        if q.modes < 0 {
            errors.push(format!("quench.modes: must be ≥ 0, got {}", q.modes));
        }
    }
    if let Some(e) = &cfg.ensemble {
        positive(errors, "ensemble.tau", e.tau);
        if e.particles < crate::ensemble::MIN_PARTICLES {
            errors.push(format!(
                "ensemble.particles: must be ≥ {}, got {}",
                crate::ensemble::MIN_PARTICLES,
                e.particles
            ));
        }
        if let Some(d) = e.start_density {
            positive(errors, "ensemble.start_density", d);
        }
        if e.bins == 0 {
            errors.push("ensemble.bins: must be ≥ 1".into());
        }
        if e.variant == Variant::FixedCells && (e.fixed.cells_x == 0 || e.fixed.cells_y == 0) {
            errors.push("ensemble.fixed_cells_x/y: must be ≥ 1".into());
        }
        if cfg.seed.is_none() {
            errors.push("seed: required when the ensemble is enabled".into());
        }
        if cfg.scenario == ScenarioKind::DiscStationary || cfg.scenario == ScenarioKind::StripHall {
            if e.start_density.is_some() {
                errors.push("ensemble.start_density: not used on stationary scenarios".into());
            }
        }
    }
    if cfg.seed.is_none() && cfg.initial.noise_amplitude > 0.0 {
        errors.push("seed: required when initial.noise_amplitude > 0".into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ring_quench_gets_defaults() {
        let cfg = parse_config("scenario = \"ring-quench\"\nseed = 3\n").unwrap();
        assert_eq!(cfg.scenario, ScenarioKind::RingQuench);
        assert_eq!(cfg.domain, DomainSpec::Ring { radius: 1.0, nodes: 64 });
        assert_eq!(cfg.gauge.kind, GaugeKind::RingFlux { flux_ratio: 0.3 });
        assert_eq!(cfg.quench.unwrap().alpha_before, 0.1);
        assert_eq!(cfg.params.alpha, -0.1);
        assert!(cfg.ensemble.is_some());
    }

    #[test]
    fn negative_gamma_names_the_invariant() {
        let err = parse_config("scenario = \"uniform-stationary\"\nseed = 1\n[params]\ngamma = -1\n").unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert!(err.0[0].contains("gamma"), "{err}");
        assert!(err.0[0].contains("> 0"), "{err}");
    }

    #[test]
    fn unknown_key_gets_suggestion() {
        let err = parse_config("scenario = \"custom\"\n[params]\nvicosity = 1.0\n").unwrap_err();
        assert!(err.0[0].contains("vicosity"));
        let err = parse_config("scenario = \"custom\"\n[solver]\ntend = 1.0\n").unwrap_err();
        assert!(err.0[0].contains("did you mean `t_end`"), "{err}");
        let err = parse_config("scenario = \"custom\"\nalpha = 1.0\n").unwrap_err();
        assert!(err.0[0].contains("[params]"), "{err}");
    }

    #[test]
    fn all_errors_are_reported() {
        let text = "scenario = \"ring-quench\"\n[params]\nbeta = \"x\"\ngama = 2\n[solver]\ndt = -1\n[ensemble]\ntau = 0\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.0.len() >= 2, "{err}");
        assert!(err.0.iter().any(|e| e.contains("params.beta: expected a number")));
        assert!(err.0.iter().any(|e| e.contains("gama") && e.contains("gamma")));
    }

    #[test]
    fn validation_collects_every_violation() {
        let text = "scenario = \"ring-quench\"\n[solver]\ndt = -1\n[ensemble]\ntau = 0\nparticles = 5\n";
        let err = parse_config(text).unwrap_err();
        for needle in ["solver.dt", "ensemble.tau", "ensemble.particles", "seed"] {
            assert!(err.0.iter().any(|e| e.contains(needle)), "{needle} missing in {err}");
        }
    }

    #[test]
    fn missing_and_bad_scenario() {
        assert!(parse_config("seed = 1").unwrap_err().0[0].contains("missing required key `scenario`"));
        let err = parse_config("scenario = \"ring-quensh\"").unwrap_err();
        assert!(err.0[0].contains("did you mean `ring-quench`"), "{err}");
    }

    #[test]
    fn overrides_apply_before_validation() {
        let cfg = parse_config_with(
            "scenario = \"ring-quench\"\n",
            &["seed=9".into(), "domain.nodes=128".into(), "ensemble.variant=fixed-cells".into()],
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.domain, DomainSpec::Ring { radius: 1.0, nodes: 128 });
        assert_eq!(cfg.ensemble.unwrap().variant, Variant::FixedCells);
        assert!(parse_config_with("scenario = \"custom\"", &["nonsense".into()]).is_err());
    }

    #[test]
    fn grid_domain_and_ramped_gauge() {
        let text = r#"
scenario = "custom"
[domain]
kind = "grid"
lx = 4
ly = 3
nx = 32
ny = 24
boundary_y = "zero-current"
[gauge]
kind = "uniform-field-disc"
b0 = 0.5
ramp_start = 1.0
ramp_duration = 2.0
[initial]
kind = "vortex"
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(
            cfg.domain,
            DomainSpec::Grid { lx: 4.0, ly: 3.0, nx: 32, ny: 24, boundary_x: Boundary::Periodic, boundary_y: Boundary::ZeroCurrent }
        );
        assert_eq!(cfg.gauge.ramp, Some(Ramp { start: 1.0, duration: 2.0 }));
    }

    #[test]
    fn harmonic_noise_on_grid_rejected() {
        let text = "scenario = \"custom\"\nseed = 1\n[domain]\nkind = \"grid\"\n[initial]\nnoise = \"harmonics\"\nnoise_amplitude = 1e-3\n";
        assert!(parse_config(text).unwrap_err().0.iter().any(|e| e.contains("harmonic")));
    }

    #[test]
    fn syntax_errors_are_reported() {
        assert!(parse_config("scenario = ").unwrap_err().0[0].starts_with("syntax error"));
    }
}
