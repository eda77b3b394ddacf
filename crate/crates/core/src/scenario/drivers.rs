//! Scenario drivers. Each returns typed results; [`run`] flattens them into
//! metrics and output tables.

use std::f64::consts::PI;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use super::config::{ConfigErrors, InitialKind, ScenarioConfig, ScenarioKind, SolverMode, Variant};
use super::io::{write_outputs, Manifest, Snapshot, SnapshotRow, SnapshotTable, TrajectoryRow};
use crate::bohm::{force_decomposition, masked_max_abs, stationary_checks, BohmFields, StationaryReport};
use crate::ensemble::{
    build_cells, continuum_guard, density_tracking_report, init_ensemble, EnsembleError, Event, EventKind,
    FixedCells, PairEnsemble, TrackingReport,
};
use crate::model::{make_domain, DomainKind, DomainSpec, FieldState, GaugeKind};
use crate::oracles::{DiscOracle, OracleError, RingOracle};
use crate::ops::VelocityField;
use crate::solver::radial::{RadialDisc, RadialDiscSpec, RadialProfile};
use crate::solver::{
    relax_to_stationary, ring_harmonic, seed_noise, step, Method, Model, RelaxReport, SolverConfig, SolverError,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration:\n{0}")]
    Config(#[from] ConfigErrors),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("pair ensemble: {0}")]
    Ensemble(#[from] EnsembleError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("no oracle registered for scenario `{0}`")]
    NoOracle(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// 1 for anything wrong with the input, 2 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::NoOracle(_) => 1,
            _ => 2,
        }
    }
}

/// Harmonic amplitudes at or below this are left out of the rate fits.
const FIT_FLOOR: f64 = 1e-280;
pub const Q_STAT_SLACK: f64 = 1e-6;
/// Ensemble tracking is checked every this many intervals.
const TRACK_EVERY: usize = 20;

pub fn build_model(cfg: &ScenarioConfig) -> Result<Model, RunError> {
    let domain = make_domain(&cfg.domain).map_err(SolverError::from)?;
    let mut model = Model::new(&domain, cfg.params, cfg.gauge, cfg.stencil).map_err(SolverError::from)?;
    if let Some(q) = &cfg.quench {
        model = model.with_quench(q.quench());
    }
    Ok(model)
}

/// Time step: the configured one, or 90% of the stability bound; shortened
/// so that it divides the ensemble interval when an ensemble rides along.
pub fn time_step(cfg: &ScenarioConfig, model: &Model) -> f64 {
    let probe = SolverConfig {
        method: cfg.solver.method,
        ..SolverConfig::default()
    };
    let bound = probe.stability_bound(model);
    let mut dt = match (cfg.solver.dt, cfg.solver.method) {
        (Some(dt), _) => dt,
        (None, Method::Rk4) => 0.9 * bound,
        (None, Method::SemiImplicit) => (0.9 * bound).min(0.5),
    };
    if let Some(e) = &cfg.ensemble {
        if cfg.solver.mode == SolverMode::Evolve {
            dt = e.tau / (e.tau / dt).ceil();
        }
    }
    dt
}

pub fn solver_config(cfg: &ScenarioConfig, dt: f64) -> SolverConfig {
    SolverConfig {
        dt,
        method: cfg.solver.method,
        t_end: cfg.solver.t_end,
        snapshot_stride: cfg.solver.snapshot_stride,
        tol_stat: cfg.solver.tol_stat,
        max_relax_steps: cfg.solver.max_relax_steps,
    }
}

/// Initial ψ from `[initial]`, plus seeded noise.
pub fn initial_state(cfg: &ScenarioConfig, model: &Model) -> Result<FieldState, RunError> {
    let domain = model.domain();
    let p = &cfg.params;
    let i = &cfg.initial;
    let amp = i
        .amplitude
        .unwrap_or_else(|| if p.alpha < 0.0 { (-p.alpha / p.beta).sqrt() } else { 1.0 });
    let n = domain.len();
    let psi: Vec<Complex64> = (0..n)
        .map(|node| {
            let c = domain.coords(node);
            match i.kind {
                InitialKind::Zero => Complex64::default(),
                InitialKind::Uniform => Complex64::from_polar(amp, i.phase),
                InitialKind::PlaneWave => {
                    let phase = match domain.kind() {
                        DomainKind::Ring1D => i.wave_x as f64 * c[0] / domain.radius(),
                        DomainKind::Grid2D => {
                            2.0 * PI
                                * (i.wave_x as f64 * c[0] / domain.axis(0).length
                                    + i.wave_y as f64 * c[1] / domain.axis(1).length)
                        }
                    };
                    Complex64::from_polar(amp, phase + i.phase)
                }
                InitialKind::Vortex => {
                    let dx = c[0] - 0.5 * domain.axis(0).length;
                    let dy = c[1] - 0.5 * domain.axis(1).length;
                    let r = dx.hypot(dy);
                    let f = (r / i.core_radius).tanh().powi(i.winding.unsigned_abs() as i32);
                    Complex64::from_polar(amp * f, i.winding as f64 * dy.atan2(dx) + i.phase)
                }
            }
        })
        .collect();
    let state = model.state(0.0, psi);
    if i.noise_amplitude > 0.0 {
        let seed = cfg.seed.unwrap_or(0);
        Ok(seed_noise(&state, domain, i.noise_amplitude, seed, i.noise)?)
    } else {
        Ok(state)
    }
}

/// Seed of the pair ensemble, kept apart from the noise stream.
fn ensemble_seed(cfg: &ScenarioConfig) -> u64 {
    cfg.seed.unwrap_or(0).wrapping_add(0x9e37_79b9_7f4a_7c15)
}

pub fn snapshot_of(state: &FieldState, fields: &BohmFields, step: usize, model: &Model) -> Snapshot {
    let domain = model.domain();
    let dim = domain.dim();
    let rows = (0..domain.len())
        .map(|i| {
            let z = state.psi[i];
            let v = fields.v.at(i);
            SnapshotRow {
                node_index: i,
                x: domain.coords(i),
                re_psi: z.re,
                im_psi: z.im,
                abs2: z.norm_sqr(),
                v: if dim == 2 { v } else { [v[0], 0.0] },
                q_stat: fields.q_stat[i],
                q_dyn: fields.q_dyn[i],
                q_dep: fields.q_dep[i],
            }
        })
        .collect();
    Snapshot {
        step,
        t: state.t,
        table: SnapshotTable { dim, rows },
    }
}

// ---------------------------------------------------------------- disc

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscSummary {
    pub nodes: usize,
    pub spacing: f64,
    pub r_b: f64,
    pub relax: RelaxReport,
    /// Comparisons cover `r ≥ window_start`.
    pub window_start: f64,
    /// `max |−∂_r Q_stat − F_oracle|` over the window.
    pub force_error: f64,
    /// `max |−∂_r Q_stat + F_Lorentz − m a|` over the window.
    pub newton_max: f64,
    /// Radius of the largest computed `Q_stat`.
    pub q_stat_argmax: f64,
    /// `|argmax − r_B| / h`.
    pub argmax_offset: f64,
}

#[derive(Debug, Clone)]
pub struct DiscRun {
    pub summary: DiscSummary,
    pub profile: RadialProfile,
}

pub fn run_disc(cfg: &ScenarioConfig, nodes: usize) -> Result<DiscRun, RunError> {
    let d = &cfg.disc;
    let disc = RadialDisc::new(
        RadialDiscSpec {
            winding: d.winding,
            b0: d.b0,
            outer_radius: d.outer_radius,
            nodes,
        },
        cfg.params,
    )?;
    let oracle = DiscOracle::new(d.winding, d.b0, cfg.params)?;
    let (f, relax) = disc.relax(disc.initial_guess(), d.relax_dt, cfg.solver.tol_stat, cfg.solver.max_relax_steps)?;
    let profile = disc.profile(&f);
    let r_b = oracle.r_b();
    let window_start = d.window_fraction * r_b;
    let mut force_error = 0.0f64;
    let mut newton_max = 0.0f64;
    for (k, &r) in profile.r.iter().enumerate() {
        if r >= window_start {
            force_error = force_error.max((profile.quantum_force[k] - oracle.quantum_force(r)?).abs());
            newton_max = newton_max.max(profile.newton_residual[k].abs());
        }
    }
    let (kmax, _) = profile
        .q_stat
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (k, &q)| if q > acc.1 { (k, q) } else { acc });
    let q_stat_argmax = profile.r[kmax];
    let h = disc.spacing();
    Ok(DiscRun {
        summary: DiscSummary {
            nodes,
            spacing: h,
            r_b,
            relax,
            window_start,
            force_error,
            newton_max,
            q_stat_argmax,
            argmax_offset: (q_stat_argmax - r_b).abs() / h,
        },
        profile,
    })
}

fn disc_snapshot(run: &DiscRun, cfg: &ScenarioConfig) -> Snapshot {
    let p = &run.profile;
    let params = &cfg.params;
    let rows = (0..p.r.len())
        .map(|k| {
            let f = p.f[k];
            let q_stat = p.q_stat[k];
            let q_dep = 2.0 * (params.gamma + 1.0 / params.gamma) * (q_stat + params.alpha + 0.5 * params.mass * p.v[k] * p.v[k]);
            SnapshotRow {
                node_index: k,
                x: [p.r[k], 0.0],
                re_psi: f,
                im_psi: 0.0,
                abs2: f * f,
                v: [p.v[k], 0.0],
                q_stat,
                q_dyn: 0.0,
                q_dep,
            }
        })
        .collect();
    Snapshot {
        step: run.summary.relax.steps,
        t: 0.0,
        table: SnapshotTable { dim: 1, rows },
    }
}

// ------------------------------------------------------ ensemble stepping

/// Pair ensemble advanced interval by interval next to the field.
struct EnsembleDriver {
    tau: f64,
    variant: Variant,
    events_on: bool,
    bins: usize,
    trajectory_particles: u64,
    main: PairEnsemble,
    control: Option<PairEnsemble>,
    fixed: Option<FixedCells>,
    start_t: f64,
    initial_particles: usize,
    intervals: usize,
    worst_ratio: f64,
    control_worst_ratio: f64,
    guard: Option<(String, usize)>,
    trajectories: Vec<TrajectoryRow>,
}

/// Field quantities an ensemble interval needs at one end.
struct Boundary {
    q_rho: Vec<f64>,
    velocity: VelocityField,
    rho: Vec<f64>,
}

fn boundary_of(state: &FieldState, model: &Model) -> Boundary {
    let f = force_decomposition(state, model);
    let q_rho = f
        .q_dep
        .iter()
        .zip(&f.rho)
        .map(|(q, r)| if q.is_finite() { q * r } else { 0.0 })
        .collect();
    let params = model.params_at(state.t);
    Boundary {
        q_rho,
        velocity: model.ops().velocity_field(&state.psi, &state.a, &params),
        rho: f.rho,
    }
}

fn tracking_ratio(r: &TrackingReport) -> f64 {
    if r.bins_used == 0 || !(r.sampling_noise > 0.0) {
        f64::NAN
    } else {
        r.sup_relative / r.sampling_noise
    }
}

impl EnsembleDriver {
    fn start(cfg: &ScenarioConfig, model: &Model, rho: &[f64], t: f64) -> Result<Self, RunError> {
        let e = cfg.ensemble.expect("ensemble section");
        let domain = model.domain();
        let sigma = domain.integrate(rho) / e.particles as f64;
        let main = init_ensemble(rho, domain, sigma, ensemble_seed(cfg))?;
        let fixed = match e.variant {
            Variant::FixedCells => Some(FixedCells::new(domain, e.fixed, sigma, cfg.params.hbar)?),
            Variant::IntervalCells => None,
        };
        let mut d = Self {
            tau: e.tau,
            variant: e.variant,
            events_on: e.events,
            bins: e.bins,
            trajectory_particles: e.trajectory_particles as u64,
            control: e.negative_control.then(|| main.clone()),
            initial_particles: main.len(),
            main,
            fixed,
            start_t: t,
            intervals: 0,
            worst_ratio: 0.0,
            control_worst_ratio: f64::INFINITY,
            guard: None,
            trajectories: Vec::new(),
        };
        d.record(t);
        Ok(d)
    }

    fn record(&mut self, t: f64) {
        for p in self.main.particles.iter().take_while(|p| p.id < self.trajectory_particles) {
            self.trajectories.push(TrajectoryRow { t, id: p.id, pos: p.pos });
        }
    }

    fn track(&mut self, rho: &[f64], model: &Model) {
        let domain = model.domain();
        let r = density_tracking_report(&self.main, rho, domain, self.bins);
        let ratio = tracking_ratio(&r);
        if ratio.is_finite() {
            self.worst_ratio = self.worst_ratio.max(ratio);
        }
        if let Some(c) = &self.control {
            let r = density_tracking_report(c, rho, domain, self.bins);
            let ratio = tracking_ratio(&r);
            if ratio.is_finite() {
                self.control_worst_ratio = self.control_worst_ratio.min(ratio);
            }
        }
    }

    /// Advances one interval ending at `t` and applies its pair events.
    fn interval(&mut self, model: &Model, from: &Boundary, to: &Boundary, t: f64) {
        let ops = model.ops();
        let domain = model.domain();
        let hbar = model.params.hbar;
        self.main.advect(ops, &from.velocity, &to.velocity, self.tau);
        if let Some(c) = self.control.as_mut() {
            c.advect(ops, &from.velocity, &to.velocity, self.tau);
        }
        let mean: Vec<f64> = from.q_rho.iter().zip(&to.q_rho).map(|(a, b)| 0.5 * (a + b)).collect();
        if let Some(msg) = continuum_guard(&mean, domain, self.tau, self.main.sigma, hbar) {
            match self.guard.as_mut() {
                Some((_, n)) => *n += 1,
                None => self.guard = Some((msg, 1)),
            }
        }
        if self.events_on {
            match (self.variant, self.fixed.as_mut()) {
                (Variant::FixedCells, Some(fixed)) => {
                    let crossings = fixed.accumulate(domain, &mean, self.tau);
                    self.main.apply_fixed(domain, &crossings, t);
                }
                _ => {
                    let partition = build_cells(&mean, domain, self.tau, self.main.sigma, hbar);
                    self.main.apply_events(domain, &partition, t);
                }
            }
        }
        self.intervals += 1;
        self.record(t);
        if self.intervals % TRACK_EVERY == 0 {
            self.track(&to.rho, model);
        }
    }

    fn finish(mut self, rho: &[f64], model: &Model) -> (EnsembleSummary, Vec<Event>, Vec<TrajectoryRow>) {
        self.track(rho, model);
        let domain = model.domain();
        let count = |k: EventKind| self.main.events.iter().filter(|e| e.kind == k).count();
        let control = self.control.as_ref().map(|c| density_tracking_report(c, rho, domain, self.bins));
        let mut warnings = Vec::new();
        if let Some((msg, n)) = &self.guard {
            warnings.push(format!("{msg} (in {n} intervals)"));
        }
        let summary = EnsembleSummary {
            start_t: self.start_t,
            sigma: self.main.sigma,
            initial_particles: self.initial_particles,
            final_particles: self.main.len(),
            frozen: self.main.frozen_count(),
            intervals: self.intervals,
            creations: count(EventKind::Create),
            destructions: count(EventKind::Destroy),
            starved: count(EventKind::Starved),
            tracking: density_tracking_report(&self.main, rho, domain, self.bins),
            worst_ratio: self.worst_ratio,
            control_worst_ratio: control.as_ref().map(|_| self.control_worst_ratio),
            control,
            warnings,
        };
        (summary, self.main.events, self.trajectories)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub start_t: f64,
    pub sigma: f64,
    pub initial_particles: usize,
    pub final_particles: usize,
    pub frozen: usize,
    pub intervals: usize,
    pub creations: usize,
    pub destructions: usize,
    pub starved: usize,
    /// Histogram against `|ψ|²` at the end of the run.
    pub tracking: TrackingReport,
    /// Largest `sup_relative / sampling_noise` over the periodic checks.
    pub worst_ratio: f64,
    /// The same histogram for the advection-only control.
    pub control: Option<TrackingReport>,
    /// Smallest control ratio over the periodic checks.
    pub control_worst_ratio: Option<f64>,
    pub warnings: Vec<String>,
}

// ------------------------------------------------------ stationary runs

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HallSummary {
    /// `max |qE|`.
    pub electric_max: f64,
    /// `max |f_em,y|`, the transverse Lorentz force.
    pub lorentz_max: f64,
    /// `max |f_quantum,y|`.
    pub quantum_max: f64,
    /// `max |f_quantum,y + f_em,y|`.
    pub balance_max: f64,
    pub nodes_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarySummary {
    pub dt: f64,
    pub relax: RelaxReport,
    pub checks: StationaryReport,
    pub hall: Option<HallSummary>,
    pub ensemble: Option<EnsembleSummary>,
}

#[derive(Debug, Clone)]
pub struct StationaryRun {
    pub summary: StationarySummary,
    pub state: FieldState,
    pub fields: BohmFields,
    pub events: Vec<Event>,
    pub trajectories: Vec<TrajectoryRow>,
    pub snapshots: Vec<Snapshot>,
}

fn hall_summary(f: &BohmFields, state: &FieldState, params: &crate::model::PhysParams) -> HallSummary {
    let n = f.rho.len();
    let e_abs: Vec<f64> = (0..n).map(|i| params.charge.abs() * state.e.norm_sq_at(i).sqrt()).collect();
    let fy = |v: &crate::model::VectorField| -> Vec<f64> {
        if v.dim() > 1 {
            v.components[1].clone()
        } else {
            vec![0.0; n]
        }
    };
    let q = fy(&f.f_quantum);
    let l = fy(&f.f_em);
    let sum: Vec<f64> = q.iter().zip(&l).map(|(a, b)| a + b).collect();
    HallSummary {
        electric_max: masked_max_abs(&e_abs, &vec![false; n]),
        lorentz_max: masked_max_abs(&l, &f.force_mask),
        quantum_max: masked_max_abs(&q, &f.force_mask),
        balance_max: masked_max_abs(&sum, &f.force_mask),
        nodes_used: f.force_mask.iter().filter(|m| !**m).count(),
    }
}

/// Relaxes to a stationary state; then the ensemble, if any, is run for
/// `intervals` check intervals on it.
pub fn run_relaxed(cfg: &ScenarioConfig) -> Result<StationaryRun, RunError> {
    let model = build_model(cfg)?;
    let dt = time_step(cfg, &model);
    let scfg = solver_config(cfg, dt);
    let init = initial_state(cfg, &model)?;
    let mut snapshots = Vec::new();
    if cfg.output.snapshots {
        snapshots.push(snapshot_of(&init, &force_decomposition(&init, &model), 0, &model));
    }
    let (state, relax) = relax_to_stationary(init, &model, &scfg)?;
    let fields = force_decomposition(&state, &model);
    if cfg.output.snapshots {
        snapshots.push(snapshot_of(&state, &fields, relax.steps, &model));
    }
    let checks = stationary_checks(&state, &model);
    let hall = (matches!(cfg.gauge.kind, GaugeKind::UniformFieldStrip { .. }) || cfg.scenario == ScenarioKind::StripHall)
        .then(|| hall_summary(&fields, &state, &model.params_at(state.t)));

    let mut ensemble = None;
    let mut events = Vec::new();
    let mut trajectories = Vec::new();
    if let Some(e) = cfg.ensemble {
        let sub = (e.tau / dt).ceil().max(1.0) as usize;
        let c = SolverConfig { dt: e.tau / sub as f64, ..scfg };
        let mut s = state.clone();
        s.t = 0.0;
        let mut from = boundary_of(&s, &model);
        let mut driver = EnsembleDriver::start(cfg, &model, &from.rho, 0.0)?;
        for k in 1..=e.intervals {
            for _ in 0..sub {
                s = step(&s, &model, &c)?;
            }
            s.t = k as f64 * e.tau;
            let to = boundary_of(&s, &model);
            driver.interval(&model, &from, &to, s.t);
            from = to;
        }
        let (summary, ev, tr) = driver.finish(&from.rho, &model);
        ensemble = Some(summary);
        events = ev;
        trajectories = tr;
    }
    Ok(StationaryRun {
        summary: StationarySummary {
            dt,
            relax,
            checks,
            hall,
            ensemble,
        },
        state,
        fields,
        events,
        trajectories,
        snapshots,
    })
}

// ------------------------------------------------------ evolution runs

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    pub n: i64,
    pub window: [f64; 2],
    pub fitted: f64,
    pub oracle: f64,
    pub relative_error: f64,
    pub samples: usize,
}

/// Uniform-field diagnostics at one instant of the linear window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeSummary {
    pub t: f64,
    pub q_dyn_min: f64,
    pub q_dyn_max: f64,
    pub q_dep_min: f64,
    pub q_dep_max: f64,
    pub q_stat_abs_max: f64,
    /// `β max|ψ|²`.
    pub beta_rho_max: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub oracle_q_dyn: f64,
    pub oracle_q_dep: f64,
    pub oracle_speed: f64,
    pub dominant: i64,
}

impl ProbeSummary {
    /// Every node within `rel·|oracle| + β max|ψ|²` of the uniform values,
    /// and `|Q_stat| ≤ β max|ψ|²`. A uniform mode has `Q_stat = β|ψ|²`
    /// exactly, so that bound is met with equality; a relative slack of
    /// [`Q_STAT_SLACK`] absorbs roundoff.
    pub fn potentials_ok(&self, rel: f64) -> bool {
        let tol = |o: f64| rel * o.abs() + self.beta_rho_max;
        (self.q_dyn_min - self.oracle_q_dyn).abs() <= tol(self.oracle_q_dyn)
            && (self.q_dyn_max - self.oracle_q_dyn).abs() <= tol(self.oracle_q_dyn)
            && (self.q_dep_min - self.oracle_q_dep).abs() <= tol(self.oracle_q_dep)
            && (self.q_dep_max - self.oracle_q_dep).abs() <= tol(self.oracle_q_dep)
            && self.q_stat_abs_max <= self.beta_rho_max * (1.0 + Q_STAT_SLACK)
    }

    pub fn speed_error(&self) -> f64 {
        (self.speed_min - self.oracle_speed.abs())
            .abs()
            .max((self.speed_max - self.oracle_speed.abs()).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvolveSummary {
    pub dt: f64,
    pub steps: usize,
    pub t_end: f64,
    pub final_mean_density: f64,
    pub rates: Vec<RateFit>,
    pub probe: Option<ProbeSummary>,
    pub ensemble: Option<EnsembleSummary>,
}

#[derive(Debug, Clone)]
pub struct EvolveRun {
    pub summary: EvolveSummary,
    pub state: FieldState,
    pub events: Vec<Event>,
    pub trajectories: Vec<TrajectoryRow>,
    pub snapshots: Vec<Snapshot>,
}

/// Slope of a least-squares line through `(t, y)`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (st, sy) = points.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mt) * (p.1 - my), a.1 + (p.0 - mt) * (p.0 - mt)));
    num / den
}

fn probe(state: &FieldState, model: &Model, oracle: &RingOracle) -> Result<ProbeSummary, RunError> {
    let f = force_decomposition(state, model);
    let expected = oracle.expected_fields()?;
    let live = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(&f.mask)
            .filter(|(v, m)| !**m && v.is_finite())
            .map(|(v, _)| *v)
            .collect()
    };
    let min = |x: &[f64]| x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = |x: &[f64]| x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let q_dyn = live(&f.q_dyn);
    let q_dep = live(&f.q_dep);
    let speeds: Vec<f64> = (0..f.rho.len()).map(|i| f.v.norm_sq_at(i).sqrt()).collect();
    let speeds = live(&speeds);
    let p = model.params_at(state.t);
    Ok(ProbeSummary {
        t: state.t,
        q_dyn_min: min(&q_dyn),
        q_dyn_max: max(&q_dyn),
        q_dep_min: min(&q_dep),
        q_dep_max: max(&q_dep),
        q_stat_abs_max: masked_max_abs(&f.q_stat, &f.mask),
        beta_rho_max: p.beta * f.rho.iter().copied().fold(0.0, f64::max),
        speed_min: min(&speeds),
        speed_max: max(&speeds),
        oracle_q_dyn: expected.q_dyn,
        oracle_q_dep: expected.q_dep,
        oracle_speed: expected.pair_velocity,
        dominant: expected.dominant,
    })
}

/// The ring oracle of a quench scenario, if it applies.
pub fn ring_oracle(cfg: &ScenarioConfig) -> Option<RingOracle> {
    let (radius, flux) = match (cfg.domain, cfg.gauge.kind) {
        (DomainSpec::Ring { radius, .. }, GaugeKind::RingFlux { flux_ratio }) => (radius, flux_ratio),
        (DomainSpec::Ring { radius, .. }, GaugeKind::Zero) => (radius, 0.0),
        _ => return None,
    };
    cfg.quench?;
    RingOracle::new(radius, flux, cfg.params).ok()
}

/// Time evolution to `t_end` (the configured one when `None`), with
/// harmonic fits and the single-mode probe when a ring quench is set up,
/// and the pair ensemble when enabled.
pub fn run_evolve(cfg: &ScenarioConfig, t_end: Option<f64>) -> Result<EvolveRun, RunError> {
    let model = build_model(cfg)?;
    let dt = time_step(cfg, &model);
    let scfg = solver_config(cfg, dt);
    scfg.check_stability(&model)?;
    let t_end = t_end.unwrap_or(cfg.solver.t_end);
    let steps = (t_end / dt).round().max(1.0) as usize;
    let domain = model.domain().clone();
    let oracle = ring_oracle(cfg);
    let quench = cfg.quench;

    // harmonic series for the rate fits
    let modes: Vec<i64> = match (&oracle, &quench) {
        (Some(_), Some(q)) => (-q.modes..=q.modes).collect(),
        _ => Vec::new(),
    };
    let fit_end = quench.map_or(0.0, |q| q.growth_window[1].max(q.decay_window[1]));
    let mut series: Vec<Vec<(f64, f64)>> = vec![Vec::new(); modes.len()];
    let record_harmonics = |s: &FieldState, series: &mut Vec<Vec<(f64, f64)>>| {
        if s.t <= fit_end + 0.5 * dt {
            for (k, &n) in modes.iter().enumerate() {
                let a = ring_harmonic(&s.psi, n).norm();
                if a > FIT_FLOOR {
                    series[k].push((s.t, a.ln()));
                }
            }
        }
    };
    let probe_step = match (&oracle, &quench) {
        (Some(_), Some(q)) if q.measure_at <= t_end => Some((q.measure_at / dt).round() as usize),
        _ => None,
    };

    let mut state = initial_state(cfg, &model)?;
    let mut snapshots = Vec::new();
    let stride = cfg.solver.snapshot_stride;
    if cfg.output.snapshots {
        snapshots.push(snapshot_of(&state, &force_decomposition(&state, &model), 0, &model));
    }
    record_harmonics(&state, &mut series);

    let ens_cfg = cfg.ensemble;
    let per_interval = ens_cfg.map(|e| (e.tau / dt).round().max(1.0) as usize);
    let mut driver: Option<EnsembleDriver> = None;
    let mut last_boundary: Option<Boundary> = None;
    let mut probe_result = None;

    let on_boundary = |state: &FieldState,
                           driver: &mut Option<EnsembleDriver>,
                           last: &mut Option<Boundary>|
     -> Result<(), RunError> {
        let Some(e) = ens_cfg else { return Ok(()) };
        match driver.as_mut() {
            Some(d) => {
                let to = boundary_of(state, &model);
                let from = last.take().expect("previous boundary");
                d.interval(&model, &from, &to, state.t);
                *last = Some(to);
            }
            None => {
                let rho = state.density();
                let mean = domain.integrate(&rho) / domain.total_volume();
                if e.start_density.map_or(true, |d| mean >= d) {
                    *driver = Some(EnsembleDriver::start(cfg, &model, &rho, state.t)?);
                    *last = Some(boundary_of(state, &model));
                }
            }
        }
        Ok(())
    };
    on_boundary(&state, &mut driver, &mut last_boundary)?;

    for k in 1..=steps {
        state = step(&state, &model, &scfg)?;
        // pin the clock to the step grid so intervals line up exactly
        state.t = k as f64 * dt;
        record_harmonics(&state, &mut series);
        if Some(k) == probe_step {
            if let Some(o) = &oracle {
                probe_result = Some(probe(&state, &model, o)?);
            }
        }
        if let Some(m) = per_interval {
            if k % m == 0 {
                on_boundary(&state, &mut driver, &mut last_boundary)?;
            }
        }
        if cfg.output.snapshots && (k % stride == 0 || k == steps) {
            snapshots.push(snapshot_of(&state, &force_decomposition(&state, &model), k, &model));
        }
    }

    let mut rates = Vec::new();
    if let (Some(o), Some(q)) = (&oracle, &quench) {
        for (k, &n) in modes.iter().enumerate() {
            let lambda = o.lambda(n);
            let window = if lambda > 0.0 { q.growth_window } else { q.decay_window };
            let pts: Vec<(f64, f64)> = series[k]
                .iter()
                .copied()
                .filter(|(t, _)| *t >= window[0] - 1e-9 && *t <= window[1] + 1e-9)
                .collect();
            let fitted = if pts.len() >= 2 { fit_slope(&pts) } else { f64::NAN };
            rates.push(RateFit {
                n,
                window,
                fitted,
                oracle: lambda,
                relative_error: ((fitted - lambda) / lambda).abs(),
                samples: pts.len(),
            });
        }
    }

    let rho = state.density();
    let final_mean_density = domain.integrate(&rho) / domain.total_volume();
    let (ensemble, events, trajectories) = match driver {
        Some(d) => {
            let (s, e, t) = d.finish(&rho, &model);
            (Some(s), e, t)
        }
        None => (None, Vec::new(), Vec::new()),
    };
    Ok(EvolveRun {
        summary: EvolveSummary {
            dt,
            steps,
            t_end: state.t,
            final_mean_density,
            rates,
            probe: probe_result,
            ensemble,
        },
        state,
        events,
        trajectories,
        snapshots,
    })
}

/// `‖∂|ψ|²/∂t + ∇·(|ψ|²v) + Q_dep|ψ|²/ħ‖∞` at each of the given instants
/// of the configured evolution.
pub fn density_balance_at(cfg: &ScenarioConfig, instants: &[f64]) -> Result<Vec<f64>, RunError> {
    let model = build_model(cfg)?;
    let dt = time_step(cfg, &model);
    let scfg = solver_config(cfg, dt);
    let mut order: Vec<usize> = (0..instants.len()).collect();
    order.sort_by(|a, b| instants[*a].total_cmp(&instants[*b]));
    let mut state = initial_state(cfg, &model)?;
    let mut out = vec![f64::NAN; instants.len()];
    for k in order {
        state = crate::solver::evolve(state, &model, &scfg, instants[k], |_| {})?;
        let f = force_decomposition(&state, &model);
        let p = model.params_at(state.t);
        out[k] = masked_max_abs(&f.density_balance(&p), &f.mask);
    }
    Ok(out)
}

// ------------------------------------------------------ outcome

/// Everything a run produces, ready to be written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub metrics: serde_json::Value,
    pub warnings: Vec<String>,
    pub snapshots: Vec<Snapshot>,
    pub events: Option<Vec<Event>>,
    pub trajectories: Option<Vec<TrajectoryRow>>,
    pub dim: usize,
}

fn to_json<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutcome, RunError> {
    if cfg.scenario == ScenarioKind::DiscStationary {
        let r = run_disc(cfg, cfg.disc.nodes)?;
        let snapshots = if cfg.output.snapshots { vec![disc_snapshot(&r, cfg)] } else { Vec::new() };
        return Ok(RunOutcome {
            metrics: serde_json::json!({ "disc": to_json(&r.summary) }),
            warnings: Vec::new(),
            snapshots,
            events: None,
            trajectories: None,
            dim: 1,
        });
    }
    let dim = make_domain(&cfg.domain).map_err(SolverError::from)?.dim();
    let has_ens = cfg.ensemble.is_some();
    let (metrics, warnings, snapshots, events, trajectories) = match cfg.solver.mode {
        SolverMode::Relax => {
            let r = run_relaxed(cfg)?;
            let w = r.summary.ensemble.as_ref().map(|e| e.warnings.clone()).unwrap_or_default();
            (to_json(&r.summary), w, r.snapshots, r.events, r.trajectories)
        }
        SolverMode::Evolve => {
            let r = run_evolve(cfg, None)?;
            let mut w = r.summary.ensemble.as_ref().map(|e| e.warnings.clone()).unwrap_or_default();
            if has_ens && r.summary.ensemble.is_none() {
                w.push("the ensemble start density was never reached; no pairs were tracked".into());
            }
            (to_json(&r.summary), w, r.snapshots, r.events, r.trajectories)
        }
    };
    Ok(RunOutcome {
        metrics,
        warnings,
        snapshots,
        events: has_ens.then_some(events),
        trajectories: has_ens.then_some(trajectories),
        dim,
    })
}

/// Manifest for a finished run. Only `created_unix_s` differs between
/// repeated runs of the same configuration.
pub fn manifest_for(cfg: &ScenarioConfig, outcome: &RunOutcome) -> Manifest {
    let created_unix_s = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    Manifest {
        scenario: cfg.scenario.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        config: to_json(cfg),
        metrics: outcome.metrics.clone(),
        warnings: outcome.warnings.clone(),
        snapshots: Vec::new(),
        created_unix_s,
    }
}

/// Runs the scenario and writes every output into `dir`.
pub fn run_to_dir(cfg: &ScenarioConfig, dir: &Path) -> Result<(RunOutcome, Manifest), RunError> {
    let outcome = run(cfg)?;
    let mut manifest = manifest_for(cfg, &outcome);
    write_outputs(
        dir,
        &outcome.snapshots,
        outcome.events.as_deref(),
        outcome.trajectories.as_deref(),
        outcome.dim,
        &mut manifest,
    )?;
    Ok((outcome, manifest))
}
