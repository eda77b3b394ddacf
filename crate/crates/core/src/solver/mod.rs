//! Time integration of the time-dependent Ginzburg-Landau equation
//!
//! ```text
//! (1/2m)(-iħ∇ - (q/c)A)²ψ + αψ + β|ψ|²ψ = -γħ ∂ψ/∂t
//! ```
//!
//! and relaxation to its stationary solutions.

pub mod linear;
pub mod radial;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    sample_gauge, Domain, DomainKind, FieldState, GaugeFields, GaugeSchedule, ModelError, PhysParams,
};
use crate::ops::{DiffOps, Order, Stencil};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("time step {dt} violates the stability bound {bound:.6e} of the {method:?} stepper")]
    Unstable { dt: f64, bound: f64, method: Method },
    #[error("non-finite order parameter at t = {t} (node {node}); the integration is unstable")]
    NonFinite { t: f64, node: usize },
    #[error("relaxation did not converge in {steps} steps (residual {residual:.3e} > {tol:.3e})")]
    NotConverged { steps: usize, residual: f64, tol: f64 },
    #[error("linear solve failed at t = {t} (relative residual {residual:.3e})")]
    LinearSolve { t: f64, residual: f64 },
    #[error("harmonic seeding needs a ring domain")]
    HarmonicsOnGrid,
}

/// Step change of α at `at`: `alpha_before` earlier, `PhysParams::alpha`
/// from then on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quench {
    pub alpha_before: f64,
    pub at: f64,
}

/// Everything the right-hand side depends on besides ψ.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: PhysParams,
    pub gauge: GaugeSchedule,
    pub quench: Option<Quench>,
    ops: DiffOps,
    static_gauge: Option<GaugeFields>,
}

impl Model {
    pub fn new(domain: &Domain, params: PhysParams, gauge: GaugeSchedule, stencil: Stencil) -> Result<Self, ModelError> {
        params.validate()?;
        if !(stencil.epsilon_rho > 0.0) {
            return Err(ModelError::Param {
                name: "epsilon_rho",
                reason: format!("must be positive, got {}", stencil.epsilon_rho),
            });
        }
        let static_gauge = gauge.is_static().then(|| sample_gauge(&gauge, domain, 0.0, &params));
        Ok(Self {
            params,
            gauge,
            quench: None,
            ops: DiffOps::new(domain, stencil),
            static_gauge,
        })
    }

    pub fn with_quench(mut self, quench: Quench) -> Self {
        self.quench = Some(quench);
        self
    }

    pub fn domain(&self) -> &Domain {
        self.ops.domain()
    }

    pub fn ops(&self) -> &DiffOps {
        &self.ops
    }

    pub fn params_at(&self, t: f64) -> PhysParams {
        match self.quench {
            Some(q) if t < q.at => self.params.with_alpha(q.alpha_before),
            _ => self.params,
        }
    }

    pub fn gauge_at(&self, t: f64) -> GaugeFields {
        match &self.static_gauge {
            Some(g) => g.clone(),
            None => sample_gauge(&self.gauge, self.domain(), t, &self.params),
        }
    }

    pub fn state(&self, t: f64, psi: Vec<Complex64>) -> FieldState {
        FieldState::new(t, psi, self.gauge_at(t))
    }
}

/// `∂ψ/∂t = -(1/γħ)[(1/2m)(-iħ∇ - (q/c)A)²ψ + αψ + β|ψ|²ψ]`.
pub fn gl_rhs(state: &FieldState, model: &Model) -> Vec<Complex64> {
    let p = model.params_at(state.t);
    let kin = model.ops().kinetic(&state.psi, &state.a, &p);
    let s = -1.0 / (p.gamma * p.hbar);
    kin.iter()
        .zip(&state.psi)
        .map(|(k, z)| (k + z * (p.alpha + p.beta * z.norm_sqr())) * s)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Implicit kinetic term, explicit local terms (IMEX Euler). Its fixed
    /// points are exactly the stationary solutions.
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub method: Method,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub tol_stat: f64,
    pub max_relax_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            method: Method::Rk4,
            t_end: 1.0,
            snapshot_stride: 100,
            tol_stat: 1e-10,
            max_relax_steps: 200_000,
        }
    }
}

/// Explicit RK4 stability constant: `dt < c_stab γ m h² / ħ`.
///
/// The RK4 region reaches 2.78 on the negative real axis; the spectral
/// radius of the discrete kinetic operator is `ħ κ d / (2 m γ h²)` with
/// `κ = 4` (order 2) or `16/3` (order 4) in `d` dimensions. We keep 80% of
/// the exact limit.
pub fn rk4_stability_constant(dim: usize, order: Order) -> f64 {
    let kappa = match order {
        Order::Two => 4.0,
        Order::Four => 16.0 / 3.0,
    };
    0.8 * 2.0 * 2.78 / (kappa * dim as f64)
}

/// Largest `dt·|α|/(γħ)` accepted by the semi-implicit stepper.
pub const SEMI_IMPLICIT_LOCAL_BOUND: f64 = 0.5;

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SolverError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.tol_stat > 0.0) {
            return Err(SolverError::Config(format!("tol_stat must be positive, got {}", self.tol_stat)));
        }
        if self.snapshot_stride == 0 {
            return Err(SolverError::Config("snapshot_stride must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Largest admissible time step for this model.
    pub fn stability_bound(&self, model: &Model) -> f64 {
        let p = &model.params;
        match self.method {
            Method::Rk4 => {
                let h = model.domain().min_spacing();
                let c = rk4_stability_constant(model.domain().dim(), model.ops().stencil().order);
                c * p.gamma * p.mass * h * h / p.hbar
            }
            Method::SemiImplicit => {
                let alpha = model
                    .quench
                    .map_or(p.alpha.abs(), |q| q.alpha_before.abs().max(p.alpha.abs()));
                if alpha == 0.0 {
                    f64::INFINITY
                } else {
                    SEMI_IMPLICIT_LOCAL_BOUND * p.gamma * p.hbar / alpha
                }
            }
        }
    }

    pub fn check_stability(&self, model: &Model) -> Result<(), SolverError> {
        self.validate()?;
        let bound = self.stability_bound(model);
        if self.dt >= bound {
            return Err(SolverError::Unstable {
                dt: self.dt,
                bound,
                method: self.method,
            });
        }
        Ok(())
    }
}

fn axpy(psi: &[Complex64], k: &[Complex64], s: f64) -> Vec<Complex64> {
    psi.iter().zip(k).map(|(a, b)| a + b * s).collect()
}

fn check_finite(psi: &[Complex64], t: f64) -> Result<(), SolverError> {
    match psi.iter().position(|z| !(z.re.is_finite() && z.im.is_finite())) {
        Some(node) => Err(SolverError::NonFinite { t, node }),
        None => Ok(()),
    }
}

/// Advances ψ by one step and refreshes the gauge fields at `t + dt`.
/// Assumes [`SolverConfig::check_stability`] has passed.
pub fn step(state: &FieldState, model: &Model, cfg: &SolverConfig) -> Result<FieldState, SolverError> {
    let dt = cfg.dt;
    let t = state.t;
    let psi = match cfg.method {
        Method::Rk4 => {
            let k1 = gl_rhs(state, model);
            let half = model.gauge_at(t + 0.5 * dt);
            let s2 = FieldState::new(t + 0.5 * dt, axpy(&state.psi, &k1, 0.5 * dt), half.clone());
            let k2 = gl_rhs(&s2, model);
            let s3 = FieldState::new(t + 0.5 * dt, axpy(&state.psi, &k2, 0.5 * dt), half);
            let k3 = gl_rhs(&s3, model);
            let s4 = model.state(t + dt, axpy(&state.psi, &k3, dt));
            let k4 = gl_rhs(&s4, model);
            (0..state.psi.len())
                .map(|i| state.psi[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (dt / 6.0))
                .collect()
        }
        Method::SemiImplicit => semi_implicit_psi(state, model, dt)?,
    };
    check_finite(&psi, t + dt)?;
    Ok(model.state(t + dt, psi))
}

fn semi_implicit_psi(state: &FieldState, model: &Model, dt: f64) -> Result<Vec<Complex64>, SolverError> {
    let t = state.t;
    let p_now = model.params_at(t);
    let p_next = model.params_at(t + dt);
    let c_now = dt / (p_now.gamma * p_now.hbar);
    let rhs: Vec<Complex64> = state
        .psi
        .iter()
        .map(|z| z * (1.0 - c_now * (p_now.alpha + p_now.beta * z.norm_sqr())))
        .collect();
    let gauge = model.gauge_at(t + dt);
    let c_next = dt / (p_next.gamma * p_next.hbar);
    let ops = model.ops();
    let apply = |x: &[Complex64]| -> Vec<Complex64> {
        let k = ops.kinetic(x, &gauge.a, &p_next);
        x.iter().zip(&k).map(|(x, k)| x + k * c_next).collect()
    };
    let mut x = state.psi.clone();
    let stats = linear::bicgstab(apply, &rhs, &mut x, 1e-14, 2000);
    if !stats.converged && stats.relative_residual > 1e-10 {
        return Err(SolverError::LinearSolve {
            t,
            residual: stats.relative_residual,
        });
    }
    Ok(x)
}

/// Integrates from `state.t` to `t_end` (the last step is shortened to land
/// on it), calling `observe` after every step.
pub fn evolve<F>(state: FieldState, model: &Model, cfg: &SolverConfig, t_end: f64, mut observe: F) -> Result<FieldState, SolverError>
where
    F: FnMut(&FieldState),
{
    cfg.check_stability(model)?;
    let mut s = state;
    let eps = 1e-9 * cfg.dt;
    while s.t < t_end - eps {
        let c = SolverConfig {
            dt: cfg.dt.min(t_end - s.t),
            ..*cfg
        };
        s = step(&s, model, &c)?;
        observe(&s);
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RelaxReport {
    pub steps: usize,
    pub residual: f64,
}

/// `‖∂ψ/∂t‖∞`.
pub fn residual_norm(state: &FieldState, model: &Model) -> f64 {
    gl_rhs(state, model).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Steps until `‖gl_rhs‖∞ ≤ tol_stat`.
pub fn relax_to_stationary(
    state: FieldState,
    model: &Model,
    cfg: &SolverConfig,
) -> Result<(FieldState, RelaxReport), SolverError> {
    cfg.check_stability(model)?;
    const CHECK_EVERY: usize = 10;
    let mut s = state;
    let mut residual = residual_norm(&s, model);
    let mut steps = 0;
    while residual > cfg.tol_stat {
        if steps >= cfg.max_relax_steps {
            return Err(SolverError::NotConverged {
                steps,
                residual,
                tol: cfg.tol_stat,
            });
        }
        s = step(&s, model, cfg)?;
        steps += 1;
        if steps % CHECK_EVERY == 0 || steps == cfg.max_relax_steps {
            residual = residual_norm(&s, model);
        }
    }
    Ok((s, RelaxReport { steps, residual }))
}

/// How initial fluctuations are laid down.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseKind {
    /// Independent complex Gaussian per node with RMS `amplitude`.
    Nodes,
    /// Ring only: every harmonic `|n| ≤ max_mode` (all resolvable ones when
    /// `None`) gets `|T_n| = amplitude` with a random phase. A given mode
    /// receives the same phase at any resolution.
    Harmonics { max_mode: Option<usize> },
}

/// Harmonic indices resolvable on `n` nodes: `-n/2 .. n/2`, exclusive.
pub fn resolvable_modes(nodes: usize) -> std::ops::Range<i64> {
    let half = (nodes / 2) as i64;
    -half..(nodes as i64 - half)
}

/// Adds seeded fluctuations; deterministic per `seed`.
pub fn seed_noise(
    state: &FieldState,
    domain: &Domain,
    amplitude: f64,
    seed: u64,
    kind: NoiseKind,
) -> Result<FieldState, SolverError> {
    let mut out = state.clone();
    if amplitude == 0.0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        NoiseKind::Nodes => {
            let s = amplitude / 2f64.sqrt();
            for z in out.psi.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *z += Complex64::new(re * s, im * s);
            }
        }
        NoiseKind::Harmonics { max_mode } => {
            if domain.kind() != DomainKind::Ring1D {
                return Err(SolverError::HarmonicsOnGrid);
            }
            let nodes = domain.len();
            let modes = resolvable_modes(nodes);
            let limit = max_mode.map_or(nodes, |m| m.min(nodes));
            // phases drawn in the order 0, 1, -1, 2, -2, ... so a mode gets the
            // same phase at every resolution
            let order = (0..=limit as i64).flat_map(|k| if k == 0 { vec![0] } else { vec![k, -k] });
            for n in order.filter(|n| modes.contains(n)) {
                let phase = rng.gen::<f64>() * 2.0 * PI;
                let t_n = Complex64::from_polar(amplitude, phase);
                for (j, z) in out.psi.iter_mut().enumerate() {
                    let theta = 2.0 * PI * j as f64 / nodes as f64;
                    *z += t_n * Complex64::from_polar(1.0, -(n as f64) * theta);
                }
            }
        }
    }
    Ok(out)
}

/// Ring harmonic amplitude `T_n = (1/N) Σ_j ψ_j e^{+inθ_j}` of
/// `ψ = Σ_n T_n e^{-inθ}`.
pub fn ring_harmonic(psi: &[Complex64], n: i64) -> Complex64 {
    let nodes = psi.len();
    let s: Complex64 = psi
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, n as f64 * 2.0 * PI * j as f64 / nodes as f64))
        .sum();
    s / nodes as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_domain, Boundary, DomainSpec, GaugeKind};
    use crate::oracles::RingOracle;
    use approx::assert_relative_eq;

    fn ring(n: usize) -> Domain {
        make_domain(&DomainSpec::Ring { radius: 1.0, nodes: n }).unwrap()
    }

    fn ring_model(n: usize, flux: f64, alpha: f64, order: Order) -> Model {
        let d = ring(n);
        let p = PhysParams {
            alpha,
            ..PhysParams::default()
        };
        Model::new(
            &d,
            p,
            GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: flux }),
            Stencil { order, ..Stencil::default() },
        )
        .unwrap()
    }

    fn mode(n: usize, wind: i64, amp: f64) -> Vec<Complex64> {
        (0..n)
            .map(|j| Complex64::from_polar(amp, -(wind as f64) * 2.0 * PI * j as f64 / n as f64))
            .collect()
    }

    #[test]
    fn uniform_solution_is_stationary() {
        let m = ring_model(32, 0.0, -0.4, Order::Two);
        let s = m.state(0.0, vec![Complex64::from_polar((0.4f64).sqrt(), 0.7); 32]);
        let r = gl_rhs(&s, &m);
        assert!(r.iter().all(|z| z.norm() < 1e-15));
        let cfg = SolverConfig { dt: 0.01, ..SolverConfig::default() };
        let next = step(&s, &m, &cfg).unwrap();
        for (a, b) in next.psi.iter().zip(&s.psi) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_state_has_zero_rhs() {
        let m = ring_model(32, 0.3, -0.1, Order::Two);
        let s = m.state(0.0, vec![Complex64::default(); 32]);
        assert!(gl_rhs(&s, &m).iter().all(|z| *z == Complex64::default()));
    }

    #[test]
    fn linearized_dispersion_matches_ring_oracle() {
        let n = 256;
        let eps = 1e-6;
        for order in [Order::Two, Order::Four] {
            let m = ring_model(n, 0.3, -0.1, order);
            let oracle = RingOracle::new(1.0, 0.3, m.params).unwrap();
            for wind in [0i64, 1, -1, 2] {
                let s = m.state(0.0, mode(n, wind, eps));
                let rhs = gl_rhs(&s, &m);
                let lam = oracle.lambda(wind);
                let h = 2.0 * PI / n as f64;
                let bound = eps * eps / (0.1 * lam.abs()) + 2.0 * (wind as f64).powi(4) * h * h;
                for i in 0..n {
                    let ratio = rhs[i] / s.psi[i];
                    assert!((ratio.re - lam).abs() / lam.abs() <= bound, "{order:?} n={wind}: {} vs {lam}", ratio.re);
                    assert!(ratio.im.abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn rk4_step_reproduces_mode_exponential() {
        // The n = 0 mode is an exact eigenvector of the discrete operator,
        // so one RK4 step is e^{λ dt} up to O((λ dt)⁵).
        let n = 64;
        let m = ring_model(n, 0.3, -0.1, Order::Two);
        let cfg = SolverConfig { dt: 0.005, ..SolverConfig::default() };
        let s = m.state(0.0, mode(n, 0, 1e-9));
        let next = step(&s, &m, &cfg).unwrap();
        let lam = 0.055;
        let z = lam * cfg.dt;
        let ratio = (next.psi[3] / s.psi[3]).re;
        assert!((ratio - z.exp()).abs() <= z.powi(5) / 120.0 + 1e-15);
    }

    #[test]
    fn quench_growth_is_monotone_in_linear_regime() {
        let n = 32;
        let m = ring_model(n, 0.3, -0.1, Order::Two).with_quench(Quench { alpha_before: 0.1, at: 0.0 });
        let s0 = seed_noise(&m.state(0.0, vec![Complex64::default(); n]), m.domain(), 1e-6, 9, NoiseKind::Harmonics { max_mode: None }).unwrap();
        let cfg = SolverConfig { dt: 0.02, ..SolverConfig::default() };
        let mut last = f64::NEG_INFINITY;
        let mut samples = Vec::new();
        evolve(s0, &m, &cfg, 120.0, |s| {
            if (s.t / 5.0).fract() < 1e-9 || (s.t / 5.0).fract() > 1.0 - 1e-9 {
                samples.push((s.t, ring_harmonic(&s.psi, 0).norm_sqr()));
            }
        })
        .unwrap();
        for (_, a) in &samples {
            assert!(*a > last);
            last = *a;
        }
        assert!(samples.len() > 10);
    }

    #[test]
    fn before_quench_alpha_is_used() {
        let m = ring_model(16, 0.0, -0.1, Order::Two).with_quench(Quench { alpha_before: 0.1, at: 1.0 });
        assert_eq!(m.params_at(0.5).alpha, 0.1);
        assert_eq!(m.params_at(1.0).alpha, -0.1);
    }

    #[test]
    fn relax_near_uniform_solution() {
        let n = 32;
        let m = ring_model(n, 0.0, -0.2, Order::Two);
        let psi: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.4 + 0.02 * (j as f64).sin(), 0.01)).collect();
        let cfg = SolverConfig { dt: 0.5, method: Method::SemiImplicit, tol_stat: 1e-11, ..SolverConfig::default() };
        let (s, rep) = relax_to_stationary(m.state(0.0, psi), &m, &cfg).unwrap();
        assert!(rep.residual <= 1e-11);
        for z in &s.psi {
            assert_relative_eq!(z.norm_sqr(), 0.2, max_relative = 1e-9);
        }
    }

    #[test]
    fn relax_normal_state_goes_to_zero() {
        let n = 32;
        let m = ring_model(n, 0.2, 0.3, Order::Two);
        let psi: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.3 * (j as f64).cos(), 0.2)).collect();
        let cfg = SolverConfig { dt: 0.5, method: Method::SemiImplicit, tol_stat: 1e-12, ..SolverConfig::default() };
        let (s, _) = relax_to_stationary(m.state(0.0, psi), &m, &cfg).unwrap();
        assert!(s.psi.iter().all(|z| z.norm() < 1e-11));
    }

    #[test]
    fn relax_reports_non_convergence() {
        let n = 32;
        let m = ring_model(n, 0.0, -0.2, Order::Two);
        let psi = vec![Complex64::new(0.01, 0.0); n];
        let cfg = SolverConfig { dt: 0.1, method: Method::SemiImplicit, tol_stat: 1e-12, max_relax_steps: 5, ..SolverConfig::default() };
        assert!(matches!(relax_to_stationary(m.state(0.0, psi), &m, &cfg), Err(SolverError::NotConverged { .. })));
    }

    #[test]
    fn stability_bound_enforced() {
        let m = ring_model(64, 0.0, -0.1, Order::Two);
        let h = 2.0 * PI / 64.0;
        let cfg = SolverConfig { dt: 2.0 * h * h, ..SolverConfig::default() };
        assert!(matches!(cfg.check_stability(&m), Err(SolverError::Unstable { .. })));
        let ok = SolverConfig { dt: 0.5 * h * h, ..SolverConfig::default() };
        assert!(ok.check_stability(&m).is_ok());
    }

    #[test]
    fn blow_up_is_detected() {
        let m = ring_model(64, 0.0, -0.1, Order::Two);
        let psi: Vec<Complex64> = (0..64).map(|j| Complex64::new(if j % 2 == 0 { 1.0 } else { -1.0 }, 0.0)).collect();
        // deliberately bypass the stability check
        let cfg = SolverConfig { dt: 0.5, ..SolverConfig::default() };
        let mut s = m.state(0.0, psi);
        let mut err = None;
        for _ in 0..200 {
            match step(&s, &m, &cfg) {
                Ok(n) => s = n,
                Err(e) => {
                    err = Some(e);
                    break;
                }
            }
        }
        assert!(matches!(err, Some(SolverError::NonFinite { .. })));
    }

    #[test]
    fn seed_noise_contracts() {
        let d = ring(64);
        let m = ring_model(64, 0.0, -0.1, Order::Two);
        let s = m.state(0.0, vec![Complex64::new(0.5, 0.0); 64]);
        let same = seed_noise(&s, &d, 0.0, 1, NoiseKind::Nodes).unwrap();
        assert_eq!(same, s);
        let a = seed_noise(&s, &d, 1e-3, 42, NoiseKind::Nodes).unwrap();
        let b = seed_noise(&s, &d, 1e-3, 42, NoiseKind::Nodes).unwrap();
        assert_eq!(a, b);
        let c = seed_noise(&s, &d, 1e-3, 43, NoiseKind::Nodes).unwrap();
        assert_ne!(a, c);

        let zero = m.state(0.0, vec![Complex64::default(); 64]);
        let h = seed_noise(&zero, &d, 2.5e-4, 7, NoiseKind::Harmonics { max_mode: None }).unwrap();
        for n in resolvable_modes(64) {
            assert_relative_eq!(ring_harmonic(&h.psi, n).norm(), 2.5e-4, max_relative = 1e-10);
        }
        let low = seed_noise(&zero, &d, 1e-3, 7, NoiseKind::Harmonics { max_mode: Some(2) }).unwrap();
        assert_relative_eq!(ring_harmonic(&low.psi, -2).norm(), 1e-3, max_relative = 1e-10);
        assert!(ring_harmonic(&low.psi, 3).norm() < 1e-15);
        let d128 = ring(128);
        let m128 = ring_model(128, 0.0, -0.1, Order::Two);
        let fine = seed_noise(&m128.state(0.0, vec![Complex64::default(); 128]), &d128, 1e-3, 7, NoiseKind::Harmonics { max_mode: Some(2) }).unwrap();
        for n in -2..=2 {
            assert!((ring_harmonic(&fine.psi, n) - ring_harmonic(&low.psi, n)).norm() < 1e-15);
        }
    }

    #[test]
    fn harmonic_seeding_rejected_on_grid() {
        let d = make_domain(&DomainSpec::Grid { lx: 1.0, ly: 1.0, nx: 16, ny: 16, boundary_x: Boundary::Periodic, boundary_y: Boundary::Periodic }).unwrap();
        let m = Model::new(&d, PhysParams::default(), GaugeSchedule::zero(), Stencil::default()).unwrap();
        let s = m.state(0.0, vec![Complex64::default(); d.len()]);
        assert_eq!(seed_noise(&s, &d, 1.0, 0, NoiseKind::Harmonics { max_mode: None }), Err(SolverError::HarmonicsOnGrid));
    }

    #[test]
    fn semi_implicit_and_rk4_agree_on_short_run() {
        let n = 32;
        let m = ring_model(n, 0.3, -0.5, Order::Two);
        let psi: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.3 + 0.05 * (2.0 * PI * j as f64 / n as f64).cos(), 0.0)).collect();
        let h = 2.0 * PI / n as f64;
        let rk = SolverConfig { dt: 0.5 * h * h, ..SolverConfig::default() };
        let a = evolve(m.state(0.0, psi.clone()), &m, &rk, 1.0, |_| {}).unwrap();
        let errs: Vec<f64> = [1e-2, 5e-3]
            .iter()
            .map(|&dt| {
                let si = SolverConfig { dt, method: Method::SemiImplicit, ..SolverConfig::default() };
                let b = evolve(m.state(0.0, psi.clone()), &m, &si, 1.0, |_| {}).unwrap();
                a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
            })
            .collect();
        // first order in time
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn rk4_step_halving_is_fourth_order() {
        let n = 32;
        let m = ring_model(n, 0.3, -0.5, Order::Two);
        let psi: Vec<Complex64> = (0..n).map(|j| Complex64::new(0.3 + 0.1 * (2.0 * PI * j as f64 / n as f64).sin(), 0.05)).collect();
        let run = |dt: f64| evolve(m.state(0.0, psi.clone()), &m, &SolverConfig { dt, ..SolverConfig::default() }, 0.8, |_| {}).unwrap();
        let h = 2.0 * PI / n as f64;
        let dt = 0.8 * h * h;
        let (a, b, c) = (run(dt), run(dt / 2.0), run(dt / 4.0));
        let e1 = a.psi.iter().zip(&b.psi).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let e2 = b.psi.iter().zip(&c.psi).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        let slope = (e1 / e2).log2();
        assert!((slope - 4.0).abs() < 0.3, "slope {slope}");
    }
}
