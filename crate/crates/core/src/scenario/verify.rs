//! Oracle comparisons at two resolutions.

use serde::Serialize;

use super::config::{ScenarioConfig, ScenarioKind};
use super::drivers::{density_balance_at, ring_oracle, run_disc, run_evolve, run_relaxed, RunError};
use crate::model::DomainSpec;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Accepted range, inclusive.
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self::within(name, value, f64::NEG_INFINITY, upper)
    }

    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            passed: value >= lower && value <= upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub resolutions: [usize; 2],
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Convergence order from errors at spacing `h` and `h/2`.
pub fn refinement_slope(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

pub const SLOPE_RANGE: (f64, f64) = (1.7, 2.3);

fn with_ring_nodes(cfg: &ScenarioConfig, nodes: usize) -> ScenarioConfig {
    let mut c = cfg.clone();
    match &mut c.domain {
        DomainSpec::Ring { nodes: n, .. } => *n = nodes,
        DomainSpec::Grid { nx, ny, .. } => {
            let f = nodes as f64 / *nx as f64;
            *nx = nodes;
            *ny = ((*ny as f64) * f).round() as usize;
        }
    }
    c
}

fn base_nodes(cfg: &ScenarioConfig) -> usize {
    match cfg.domain {
        DomainSpec::Ring { nodes, .. } => nodes,
        DomainSpec::Grid { nx, .. } => nx,
    }
}

/// Runs the scenario at its resolution and at twice it and compares with
/// the oracle. Scenarios without one are refused.
pub fn verify(cfg: &ScenarioConfig) -> Result<VerifyReport, RunError> {
    match cfg.scenario {
        ScenarioKind::DiscStationary => verify_disc(cfg),
        ScenarioKind::RingQuench => verify_quench(cfg),
        ScenarioKind::UniformStationary => verify_uniform(cfg),
        other => Err(RunError::NoOracle(other.name().to_string())),
    }
}

fn verify_disc(cfg: &ScenarioConfig) -> Result<VerifyReport, RunError> {
    let n = cfg.disc.nodes;
    let a = run_disc(cfg, n)?.summary;
    let b = run_disc(cfg, 2 * n)?.summary;
    let (lo, hi) = SLOPE_RANGE;
    let checks = vec![
        Check::at_most(format!("force error, {n} nodes"), a.force_error, 1e-3),
        Check::within("force error slope", refinement_slope(a.force_error, b.force_error), lo, hi),
        Check::within("Newton residual slope", refinement_slope(a.newton_max, b.newton_max), lo, hi),
        Check::at_most(format!("Q_stat argmax offset / h, {n} nodes"), a.argmax_offset, 1.0),
        Check::at_most(format!("Q_stat argmax offset / h, {} nodes", 2 * n), b.argmax_offset, 1.0),
    ];
    Ok(VerifyReport {
        scenario: cfg.scenario.name().into(),
        resolutions: [n, 2 * n],
        checks,
    })
}

fn verify_quench(cfg: &ScenarioConfig) -> Result<VerifyReport, RunError> {
    let q = cfg.quench.expect("validated ring-quench has a quench");
    let oracle = ring_oracle(cfg).ok_or_else(|| RunError::NoOracle("ring-quench without a ring-flux gauge".into()))?;
    let t_end = q.growth_window[1].max(q.decay_window[1]).max(q.measure_at);
    let n = base_nodes(cfg);
    let mut checks = Vec::new();
    for nodes in [n, 2 * n] {
        let mut c = with_ring_nodes(cfg, nodes);
        c.ensemble = None;
        c.output.snapshots = false;
        let r = run_evolve(&c, Some(t_end))?.summary;
        for fit in &r.rates {
            let tol = if oracle.lambda(fit.n) > 0.0 { 1e-3 } else { 1e-2 };
            checks.push(Check::at_most(
                format!("rate n={} relative error, {nodes} nodes", fit.n),
                fit.relative_error,
                tol,
            ));
        }
        if let Some(p) = r.probe {
            let ok = if p.potentials_ok(0.01) { 0.0 } else { 1.0 };
            checks.push(Check::at_most(format!("uniform potentials, {nodes} nodes"), ok, 0.0));
            checks.push(Check::at_most(format!("pair speed error, {nodes} nodes"), p.speed_error(), 1e-6));
        }
    }
    // density identity inside the growth window; later on the non-uniform
    // content has decayed to the roundoff floor and no order is visible
    let g = q.growth_window[1];
    let instants = [0.25 * g, 0.5 * g, 0.75 * g];
    let mut c = cfg.clone();
    c.ensemble = None;
    let coarse = density_balance_at(&with_ring_nodes(&c, n), &instants)?;
    let fine = density_balance_at(&with_ring_nodes(&c, 2 * n), &instants)?;
    let (lo, hi) = SLOPE_RANGE;
    for (k, t) in instants.iter().enumerate() {
        checks.push(Check::within(
            format!("density identity slope at t={t}"),
            refinement_slope(coarse[k], fine[k]),
            lo,
            hi,
        ));
    }
    Ok(VerifyReport {
        scenario: cfg.scenario.name().into(),
        resolutions: [n, 2 * n],
        checks,
    })
}

fn verify_uniform(cfg: &ScenarioConfig) -> Result<VerifyReport, RunError> {
    let n = base_nodes(cfg);
    let tol = cfg.solver.tol_stat;
    let mut checks = Vec::new();
    for nodes in [n, 2 * n] {
        let c = with_ring_nodes(cfg, nodes);
        let r = run_relaxed(&c)?.summary;
        checks.push(Check::at_most(format!("GL residual, {nodes} nodes"), r.relax.residual, tol));
        // the residual norms are ψ̇ scaled by γħ/|ψ| at most
        let scale = 1e3 * tol;
        checks.push(Check::at_most(format!("continuity, {nodes} nodes"), r.checks.continuity, scale));
        checks.push(Check::at_most(format!("energy, {nodes} nodes"), r.checks.energy, scale));
        checks.push(Check::at_most(format!("depairing, {nodes} nodes"), r.checks.depairing, scale));
        if let Some(e) = r.ensemble {
            let events = (e.creations + e.destructions + e.starved) as f64;
            checks.push(Check::at_most(format!("pair events, {nodes} nodes"), events, 0.0));
        }
    }
    Ok(VerifyReport {
        scenario: cfg.scenario.name().into(),
        resolutions: [n, 2 * n],
        checks,
    })
}
