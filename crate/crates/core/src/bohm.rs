//! Pair velocity, quantum potentials and the force balance derived from ψ.
//!
//! Time derivatives of |ψ|², the phase and the velocity are assembled
//! analytically from a supplied `∂ψ/∂t` (normally [`gl_rhs`]), never by
//! differencing successive snapshots.
//!
//! Nodes whose density sits at or below the floor carry no pairs; every
//! derived quantity is `NaN` there, and force fields are also `NaN` on the
//! neighbours whose stencils reach into such nodes.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::model::{DomainKind, FieldState, PhysParams, VectorField};
use crate::ops::{DiffOps, Edge};
use crate::solver::{gl_rhs, Model};

/// Derived real fields at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct BohmFields {
    pub t: f64,
    pub v: VectorField,
    /// True where the density is floored (no pairs).
    pub mask: Vec<bool>,
    /// `mask` grown by the stencil reach: forces are absent there.
    pub force_mask: Vec<bool>,
    pub rho: Vec<f64>,
    /// `∂|ψ|²/∂t`.
    pub rho_dot: Vec<f64>,
    pub q_stat: Vec<f64>,
    pub q_dyn: Vec<f64>,
    pub q_dep: Vec<f64>,
    /// `∇·(|ψ|² v)`.
    pub div_flux: Vec<f64>,
    /// `-∇(Q_stat + Q_dyn)`.
    pub f_quantum: VectorField,
    /// `q(E + v×B/c)`. Rings keep the tangential part only.
    pub f_em: VectorField,
    /// `(v·∇)v + ∂v/∂t`.
    pub accel: VectorField,
    pub newton_residual: VectorField,
}

/// Per-node kinematics shared by all potentials.
struct Kinematics {
    rho: Vec<f64>,
    rho_dot: Vec<f64>,
    mask: Vec<bool>,
    /// `Im(ψ*∇ψ)` per axis.
    current: Vec<Vec<f64>>,
    /// `Im(ψ̇*∇ψ + ψ*∇ψ̇)` per axis.
    current_dot: Vec<Vec<f64>>,
    v: VectorField,
    /// `∇·(|ψ|² v)`, from the unfloored flux.
    div_flux: Vec<f64>,
}

fn kinematics(psi: &[Complex64], dpsi: &[Complex64], a: &VectorField, p: &PhysParams, ops: &DiffOps) -> Kinematics {
    let n = psi.len();
    let dim = ops.domain().dim();
    let g = p.coupling();
    let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
    let rho_dot = psi.iter().zip(dpsi).map(|(z, d)| 2.0 * (z.conj() * d).re).collect();
    let (floor, mask) = ops.density_mask(&rho);
    let mut current = vec![vec![0.0; n]; dim];
    let mut current_dot = vec![vec![0.0; n]; dim];
    let mut v = VectorField::zeros(dim, n);
    let mut flux = VectorField::zeros(dim, n);
    for k in 0..dim {
        let grad_dpsi = ops.partial(dpsi, k);
        for i in 0..n {
            let grad = ops.d1_at(psi, k, i);
            let j = (psi[i].conj() * grad).im;
            current[k][i] = j;
            current_dot[k][i] = (dpsi[i].conj() * grad + psi[i].conj() * grad_dpsi[i]).im;
            flux.components[k][i] = (p.hbar * j - g * a.components[k][i] * rho[i]) / p.mass;
            if !mask[i] {
                v.components[k][i] = (p.hbar * j / rho[i].max(floor) - g * a.components[k][i]) / p.mass;
            } else {
                v.components[k][i] = f64::NAN;
            }
        }
    }
    let div_flux = ops.divergence(&flux);
    Kinematics {
        rho,
        rho_dot,
        mask,
        current,
        current_dot,
        v,
        div_flux,
    }
}

fn masked(values: impl Iterator<Item = f64>, mask: &[bool]) -> Vec<f64> {
    values.zip(mask).map(|(x, &m)| if m { f64::NAN } else { x }).collect()
}

fn q_stat_of(kin: &Kinematics, psi: &[Complex64], p: &PhysParams, ops: &DiffOps) -> Vec<f64> {
    let amp: Vec<f64> = psi.iter().map(|z| z.norm()).collect();
    // ∂ₙ|ψ| = 0 on zero-current walls, so the even reflection is exact there
    let lap = ops.laplacian_with(&amp, Edge::Reflect);
    let k = p.hbar * p.hbar / (2.0 * p.mass);
    masked(
        (0..psi.len()).map(|i| p.beta * kin.rho[i] - k * lap[i] / amp[i]),
        &kin.mask,
    )
}

fn q_dyn_of(kin: &Kinematics, p: &PhysParams) -> Vec<f64> {
    masked(
        (0..kin.rho.len()).map(|i| {
            p.hbar / (2.0 * kin.rho[i]) * (p.gamma * kin.rho_dot[i] - kin.div_flux[i] / p.gamma)
        }),
        &kin.mask,
    )
}

fn q_dep_of(q_stat: &[f64], q_dyn: &[f64], v: &VectorField, p: &PhysParams) -> Vec<f64> {
    let g = p.gamma;
    (0..q_stat.len())
        .map(|i| {
            let ke = 0.5 * p.mass * v.norm_sq_at(i);
            2.0 * (g + 1.0 / g) * (q_stat[i] + p.alpha + ke) + 2.0 * g * q_dyn[i]
        })
        .collect()
}

/// `Q_stat = β|ψ|² - (ħ²/2m) ∇²|ψ| / |ψ|`.
pub fn q_stat(psi: &[Complex64], a: &VectorField, params: &PhysParams, ops: &DiffOps) -> Vec<f64> {
    let zero = vec![Complex64::default(); psi.len()];
    let kin = kinematics(psi, &zero, a, params, ops);
    q_stat_of(&kin, psi, params, ops)
}

/// `Q_dyn = (ħ/2|ψ|²)(γ ∂|ψ|²/∂t - (1/γ) ∇·(|ψ|² v))`.
pub fn q_dyn(psi: &[Complex64], a: &VectorField, params: &PhysParams, ops: &DiffOps, dpsi_dt: &[Complex64]) -> Vec<f64> {
    let kin = kinematics(psi, dpsi_dt, a, params, ops);
    q_dyn_of(&kin, params)
}

/// `Q_dep = 2(γ + 1/γ)(Q_stat + α + ½mv²) + 2γ Q_dyn`.
pub fn q_dep(psi: &[Complex64], a: &VectorField, params: &PhysParams, ops: &DiffOps, dpsi_dt: &[Complex64]) -> Vec<f64> {
    let kin = kinematics(psi, dpsi_dt, a, params, ops);
    let qs = q_stat_of(&kin, psi, params, ops);
    let qd = q_dyn_of(&kin, params);
    q_dep_of(&qs, &qd, &kin.v, params)
}

/// All derived fields for a given `∂ψ/∂t`.
pub fn bohm_fields_with(state: &FieldState, params: &PhysParams, ops: &DiffOps, dpsi_dt: &[Complex64]) -> BohmFields {
    let p = params;
    let psi = &state.psi;
    let n = psi.len();
    let dim = ops.domain().dim();
    let kin = kinematics(psi, dpsi_dt, &state.a, p, ops);
    let q_stat = q_stat_of(&kin, psi, p, ops);
    let q_dyn = q_dyn_of(&kin, p);
    let q_dep = q_dep_of(&q_stat, &q_dyn, &kin.v, p);
    let force_mask = ops.dilate_mask(&kin.mask);

    // differentiate finite stand-ins; the dilated mask hides the damage
    let q_sum: Vec<f64> = (0..n)
        .map(|i| if kin.mask[i] { 0.0 } else { q_stat[i] + q_dyn[i] })
        .collect();
    let v_clean: Vec<Vec<f64>> = kin
        .v
        .components
        .iter()
        .map(|c| c.iter().map(|x| if x.is_nan() { 0.0 } else { *x }).collect())
        .collect();

    let mut f_quantum = VectorField::zeros(dim, n);
    let mut f_em = VectorField::zeros(dim, n);
    let mut accel = VectorField::zeros(dim, n);
    let mut newton_residual = VectorField::zeros(dim, n);
    let ring = ops.domain().kind() == DomainKind::Ring1D;
    for i in 0..n {
        if force_mask[i] {
            for k in 0..dim {
                for f in [&mut f_quantum, &mut f_em, &mut accel, &mut newton_residual] {
                    f.components[k][i] = f64::NAN;
                }
            }
            continue;
        }
        let rho = kin.rho[i];
        let vi = [v_clean[0][i], if dim > 1 { v_clean[1][i] } else { 0.0 }];
        for k in 0..dim {
            let fq = -ops.d1_at(&q_sum, k, i);
            let ek = state.e.components[k][i];
            let lorentz = if ring {
                0.0
            } else if k == 0 {
                vi[1] * state.b[i]
            } else {
                -vi[0] * state.b[i]
            };
            let fe = p.charge * (ek + lorentz / p.light_c);
            let dv_dt = (p.hbar * (kin.current_dot[k][i] / rho - kin.current[k][i] * kin.rho_dot[i] / (rho * rho))
                + p.charge * ek)
                / p.mass;
            let adv: f64 = (0..dim).map(|l| vi[l] * ops.d1_at(&v_clean[k], l, i)).sum();
            let ak = adv + dv_dt;
            f_quantum.components[k][i] = fq;
            f_em.components[k][i] = fe;
            accel.components[k][i] = ak;
            newton_residual.components[k][i] = fq + fe - p.mass * ak;
        }
    }
    BohmFields {
        t: state.t,
        v: kin.v,
        mask: kin.mask,
        force_mask,
        rho: kin.rho,
        rho_dot: kin.rho_dot,
        q_stat,
        q_dyn,
        q_dep,
        div_flux: kin.div_flux,
        f_quantum,
        f_em,
        accel,
        newton_residual,
    }
}

/// All derived fields with `∂ψ/∂t` from the TDGL right-hand side.
pub fn force_decomposition(state: &FieldState, model: &Model) -> BohmFields {
    let dpsi = gl_rhs(state, model);
    bohm_fields_with(state, &model.params_at(state.t), model.ops(), &dpsi)
}

/// `max` of `|f|` over nodes where `keep` is false, ignoring NaN.
pub fn masked_max_abs(f: &[f64], skip: &[bool]) -> f64 {
    f.iter()
        .zip(skip)
        .filter(|(x, &m)| !m && x.is_finite())
        .map(|(x, _)| x.abs())
        .fold(0.0, f64::max)
}

fn vector_max(u: &VectorField, skip: &[bool]) -> f64 {
    (0..u.len())
        .filter(|&i| !skip[i])
        .map(|i| u.norm_sq_at(i).sqrt())
        .filter(|x| x.is_finite())
        .fold(0.0, f64::max)
}

impl BohmFields {
    /// `∂|ψ|²/∂t + ∇·(|ψ|² v) + Q_dep |ψ|²/ħ`, which vanishes in the
    /// continuum. `NaN` on masked nodes.
    pub fn density_balance(&self, params: &PhysParams) -> Vec<f64> {
        (0..self.rho.len())
            .map(|i| {
                if self.mask[i] {
                    f64::NAN
                } else {
                    self.rho_dot[i] + self.div_flux[i] + self.q_dep[i] * self.rho[i] / params.hbar
                }
            })
            .collect()
    }

    /// Real-part identity `-Q_stat - α - ½mv² - (γħ/2|ψ|²) ∂|ψ|²/∂t`.
    pub fn real_part_identity(&self, params: &PhysParams) -> Vec<f64> {
        let p = params;
        (0..self.rho.len())
            .map(|i| {
                -self.q_stat[i] - p.alpha - 0.5 * p.mass * self.v.norm_sq_at(i)
                    - p.gamma * p.hbar / (2.0 * self.rho[i]) * self.rho_dot[i]
            })
            .collect()
    }

    /// `‖newton_residual‖∞` over nodes with forces.
    pub fn newton_max(&self) -> f64 {
        vector_max(&self.newton_residual, &self.force_mask)
    }

    pub fn unmasked_count(&self) -> usize {
        self.mask.iter().filter(|m| !**m).count()
    }
}

/// Imaginary-part identity `∇·(|ψ|² v) - 2γ|ψ|² ∂φ/∂t` with
/// `∂φ/∂t = Im(ψ* ∂ψ/∂t)/|ψ|²`. `NaN` on masked nodes.
pub fn imaginary_part_identity(state: &FieldState, params: &PhysParams, ops: &DiffOps, dpsi_dt: &[Complex64]) -> Vec<f64> {
    let kin = kinematics(&state.psi, dpsi_dt, &state.a, params, ops);
    masked(
        (0..state.psi.len()).map(|i| {
            let phase_rate = (state.psi[i].conj() * dpsi_dt[i]).im;
            kin.div_flux[i] - 2.0 * params.gamma * phase_rate
        }),
        &kin.mask,
    )
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ViscousError {
    #[error("|ψ| varies by {measured:.3e} relative to its mean (allowed {allowed:.3e}); the viscous form needs uniform |ψ|")]
    Nonuniform { measured: f64, allowed: f64 },
    #[error("|ψ|² changes at relative rate {measured:.3e} (allowed {allowed:.3e}); the viscous form needs ∂|ψ|²/∂t = 0")]
    Unsteady { measured: f64, allowed: f64 },
    #[error("magnetic field present (max |B| = {0:.3e}); v is not curl-free")]
    Magnetic(f64),
    #[error("every node is below the density floor")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ViscousReport {
    /// `‖-∇Q_dyn - (ħ/2γ)∇²v‖∞ / ‖∇²v‖∞`; zero when both vanish.
    pub relative_discrepancy: f64,
    pub absolute_discrepancy: f64,
    pub laplacian_norm: f64,
    /// `(max|ψ| - min|ψ|) / mean|ψ|`.
    pub nonuniformity: f64,
}

/// Compares `-∇Q_dyn` with the viscous force `(ħ/2γ)∇²v` per pair.
///
/// The identity holds when |ψ| is uniform in space and constant in time and
/// `v` is curl-free. With `∂ψ/∂t` taken from the TDGL equation the density
/// generally changes wherever `|v|` varies, so the caller supplies the time
/// derivative; it is refused if `∂|ψ|²/∂t` is not negligible.
pub fn viscous_force_check(
    state: &FieldState,
    params: &PhysParams,
    ops: &DiffOps,
    dpsi_dt: &[Complex64],
    max_nonuniformity: f64,
) -> Result<ViscousReport, ViscousError> {
    let n = state.psi.len();
    let amp: Vec<f64> = state.psi.iter().map(|z| z.norm()).collect();
    let mean = amp.iter().sum::<f64>() / n as f64;
    if mean == 0.0 {
        return Err(ViscousError::Empty);
    }
    let (lo, hi) = amp.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    let nonuniformity = (hi - lo) / mean;
    if nonuniformity > max_nonuniformity {
        return Err(ViscousError::Nonuniform {
            measured: nonuniformity,
            allowed: max_nonuniformity,
        });
    }
    let b_max = state.b.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    if b_max > 0.0 {
        return Err(ViscousError::Magnetic(b_max));
    }
    let kin = kinematics(&state.psi, dpsi_dt, &state.a, params, ops);
    let rate = masked_max_abs(&kin.rho_dot, &kin.mask) / (mean * mean);
    if rate > max_nonuniformity {
        return Err(ViscousError::Unsteady {
            measured: rate,
            allowed: max_nonuniformity,
        });
    }
    let q = q_dyn_of(&kin, params);
    let force_mask = ops.dilate_mask(&kin.mask);
    let q_clean: Vec<f64> = q.iter().map(|x| if x.is_nan() { 0.0 } else { *x }).collect();
    let dim = ops.domain().dim();
    let visc = params.hbar / (2.0 * params.gamma);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let lap: Vec<Vec<f64>> = kin
        .v
        .components
        .iter()
        .map(|c| ops.laplacian_scalar(&c.iter().map(|x| if x.is_nan() { 0.0 } else { *x }).collect::<Vec<_>>()))
        .collect();
    for i in 0..n {
        if force_mask[i] {
            continue;
        }
        let mut d2 = 0.0;
        let mut l2 = 0.0;
        for k in 0..dim {
            let lhs = -ops.d1_at(&q_clean, k, i);
            let rhs = visc * lap[k][i];
            d2 += (lhs - rhs).powi(2);
            l2 += rhs.powi(2);
        }
        num = num.max(d2.sqrt());
        den = den.max(l2.sqrt());
    }
    // below roundoff of the second differences both sides count as zero
    let h = ops.domain().min_spacing();
    let v_max = (0..n).map(|i| kin.v.norm_sq_at(i).sqrt()).filter(|x| x.is_finite()).fold(0.0, f64::max);
    let noise = 1e-10 * visc * (1.0 + v_max) / (h * h);
    let relative = if den <= noise {
        if num <= noise {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    };
    Ok(ViscousReport {
        relative_discrepancy: relative,
        absolute_discrepancy: num,
        laplacian_norm: den,
        nonuniformity,
    })
}

/// Residual norms of a (supposedly) stationary state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryReport {
    /// `‖∇·(|ψ|² v)‖∞`.
    pub continuity: f64,
    /// `‖Q_stat + α + ½mv²‖∞`.
    pub energy: f64,
    /// `‖-∇Q_stat + q(E + v×B/c) - m(v·∇)v‖∞`, with the time terms kept.
    pub newton: f64,
    /// `‖Q_dep‖∞`.
    pub depairing: f64,
    pub unmasked_nodes: usize,
    /// Every node is below the density floor (e.g. the normal state).
    pub empty_mask: bool,
}

pub fn stationary_checks(state: &FieldState, model: &Model) -> StationaryReport {
    let f = force_decomposition(state, model);
    let p = model.params_at(state.t);
    let energy: Vec<f64> = (0..f.rho.len())
        .map(|i| f.q_stat[i] + p.alpha + 0.5 * p.mass * f.v.norm_sq_at(i))
        .collect();
    let unmasked = f.unmasked_count();
    StationaryReport {
        continuity: masked_max_abs(&f.div_flux, &f.mask),
        energy: masked_max_abs(&energy, &f.mask),
        newton: f.newton_max(),
        depairing: masked_max_abs(&f.q_dep, &f.mask),
        unmasked_nodes: unmasked,
        empty_mask: unmasked == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_domain, Boundary, Domain, DomainSpec, GaugeKind, GaugeSchedule, Ramp};
    use crate::ops::{Order, Stencil};
    use crate::oracles::RingOracle;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ring(n: usize) -> Domain {
        make_domain(&DomainSpec::Ring { radius: 1.0, nodes: n }).unwrap()
    }

    fn ring_model(n: usize, gauge: GaugeSchedule, alpha: f64) -> Model {
        let p = PhysParams { alpha, ..PhysParams::default() };
        Model::new(&ring(n), p, gauge, Stencil::default()).unwrap()
    }

    fn ring_state(m: &Model, t: f64, f: impl Fn(f64) -> Complex64) -> FieldState {
        let n = m.domain().len();
        m.state(t, (0..n).map(|j| f(2.0 * PI * j as f64 / n as f64)).collect())
    }

    #[test]
    fn uniform_state_has_no_forces() {
        let m = ring_model(64, GaugeSchedule::zero(), -0.3);
        let s = ring_state(&m, 0.0, |_| Complex64::from_polar(0.3f64.sqrt(), 1.1));
        let f = force_decomposition(&s, &m);
        for i in 0..64 {
            assert!((f.q_stat[i] - 0.3).abs() < 1e-13);
            assert!(f.q_dyn[i].abs() < 1e-13);
            assert!(f.q_dep[i].abs() < 1e-12);
            assert!(f.f_quantum.components[0][i].abs() < 1e-12);
        }
        assert!(f.newton_max() < 1e-12);
        let r = stationary_checks(&s, &m);
        assert!(r.energy < 1e-13 && r.continuity < 1e-13 && r.newton < 1e-12 && !r.empty_mask);
    }

    #[test]
    fn normal_state_is_fully_masked() {
        let m = ring_model(32, GaugeSchedule::zero(), 0.2);
        let s = ring_state(&m, 0.0, |_| Complex64::default());
        let r = stationary_checks(&s, &m);
        assert!(r.empty_mask);
        assert_eq!(r.unmasked_nodes, 0);
        let f = force_decomposition(&s, &m);
        assert!(f.q_stat.iter().all(|x| x.is_nan()));
        assert!(f.newton_residual.components[0].iter().all(|x| x.is_nan()));
    }

    #[test]
    fn ring_single_mode_potentials_match_oracle() {
        let m = ring_model(128, GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: 0.3 }), -0.1);
        let oracle = RingOracle::new(1.0, 0.3, m.params).unwrap().expected_fields().unwrap();
        let amp = 1e-4;
        let s = ring_state(&m, 0.0, |_| Complex64::new(amp, 0.0));
        let f = force_decomposition(&s, &m);
        let beta_rho = m.params.beta * amp * amp;
        for i in 0..128 {
            assert!(f.q_stat[i].abs() <= beta_rho * (1.0 + 1e-9));
            assert!((f.q_dyn[i] - oracle.q_dyn).abs() <= 0.01 * oracle.q_dyn.abs() + beta_rho);
            assert!((f.q_dep[i] - oracle.q_dep).abs() <= 0.01 * oracle.q_dep.abs() + beta_rho);
            assert!((f.v.components[0][i] - oracle.pair_velocity).abs() < 1e-12);
        }
    }

    fn messy(theta: f64) -> Complex64 {
        Complex64::new(0.6 + 0.2 * theta.cos() + 0.05 * (3.0 * theta).sin(), 0.3 * (2.0 * theta).sin() - 0.1)
            * Complex64::from_polar(1.0, -theta)
    }

    fn max_norm(v: &[f64]) -> f64 {
        v.iter().filter(|x| x.is_finite()).fold(0.0, |m, x| m.max(x.abs()))
    }

    #[test]
    fn density_balance_converges_at_second_order() {
        let ramp = Ramp { start: 0.0, duration: 2.0 };
        let gauge = GaugeSchedule { kind: GaugeKind::RingFlux { flux_ratio: 0.4 }, ramp: Some(ramp) };
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let m = ring_model(n, gauge, -0.5);
                let s = ring_state(&m, 0.7, messy);
                let f = force_decomposition(&s, &m);
                max_norm(&f.density_balance(&m.params))
            })
            .collect();
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}, errs {errs:?}");
    }

    #[test]
    fn newton_residual_converges_on_ring_with_electric_field() {
        let ramp = Ramp { start: 0.0, duration: 2.0 };
        let gauge = GaugeSchedule { kind: GaugeKind::RingFlux { flux_ratio: 0.4 }, ramp: Some(ramp) };
        let errs: Vec<f64> = [64, 128]
            .iter()
            .map(|&n| {
                let m = ring_model(n, gauge, -0.5);
                let s = ring_state(&m, 0.7, messy);
                assert!(s.e.max_norm() > 0.01);
                force_decomposition(&s, &m).newton_max()
            })
            .collect();
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}, errs {errs:?}");
    }

    #[test]
    fn newton_residual_converges_on_grid_with_field() {
        // walled square in a uniform field: v has curl, so the Lorentz term matters
        let errs: Vec<f64> = [40, 80]
            .iter()
            .map(|&n| {
                let d = make_domain(&DomainSpec::Grid {
                    lx: 4.0,
                    ly: 4.0,
                    nx: n,
                    ny: n,
                    boundary_x: Boundary::ZeroCurrent,
                    boundary_y: Boundary::ZeroCurrent,
                })
                .unwrap();
                let p = PhysParams { alpha: -0.5, ..PhysParams::default() };
                let m = Model::new(&d, p, GaugeSchedule::stat(GaugeKind::UniformFieldDisc { b0: 0.8 }), Stencil::default()).unwrap();
                let psi: Vec<Complex64> = (0..d.len())
                    .map(|i| {
                        let c = d.coords(i);
                        let (x, y) = (c[0] / 4.0, c[1] / 4.0);
                        Complex64::new(0.7 + 0.1 * (2.0 * x).sin() * y, 0.3 * x - 0.2 * (y * 3.0).cos())
                    })
                    .collect();
                let s = m.state(0.0, psi);
                let f = force_decomposition(&s, &m);
                // stay clear of the walls where one-sided stencils stack
                let idx = |i: usize| d.unflatten(i);
                (0..d.len())
                    .filter(|&i| {
                        let [a, b] = idx(i);
                        a > n / 8 && b > n / 8 && a < n - n / 8 && b < n - n / 8
                    })
                    .map(|i| f.newton_residual.norm_sq_at(i).sqrt())
                    .fold(0.0, f64::max)
            })
            .collect();
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}, errs {errs:?}");
    }

    #[test]
    fn real_and_imaginary_identities_hold_at_second_order() {
        let gauge = GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: 0.2 });
        let mut re = Vec::new();
        let mut im = Vec::new();
        for n in [64, 128] {
            let m = ring_model(n, gauge, -0.5);
            let s = ring_state(&m, 0.0, messy);
            let dpsi = gl_rhs(&s, &m);
            let f = bohm_fields_with(&s, &m.params, m.ops(), &dpsi);
            re.push(max_norm(&f.real_part_identity(&m.params)));
            im.push(max_norm(&imaginary_part_identity(&s, &m.params, m.ops(), &dpsi)));
        }
        for e in [re, im] {
            let slope = (e[0] / e[1]).log2();
            assert!((slope - 2.0).abs() < 0.3, "slope {slope}, errs {e:?}");
        }
    }

    fn phase_only(m: &Model, n: usize) -> (FieldState, Vec<Complex64>) {
        // ψ = e^{iφ}, ∂ψ/∂t = iψ ∂φ/∂t with ∂φ/∂t = (ħ/2mγ) φ''
        let phi = |t: f64| 0.8 * t.sin() + 0.3 * (2.0 * t).cos();
        let phi2 = |t: f64| -0.8 * t.sin() - 1.2 * (2.0 * t).cos();
        let s = ring_state(m, 0.0, |t| Complex64::from_polar(1.0, phi(t)));
        let dpsi = (0..n)
            .map(|j| {
                let t = 2.0 * PI * j as f64 / n as f64;
                s.psi[j] * Complex64::new(0.0, 0.5 * phi2(t))
            })
            .collect();
        (s, dpsi)
    }

    #[test]
    fn viscous_limit_converges() {
        let errs: Vec<f64> = [256, 512]
            .iter()
            .map(|&n| {
                let m = ring_model(n, GaugeSchedule::zero(), -1.0);
                let (s, dpsi) = phase_only(&m, n);
                viscous_force_check(&s, &m.params, m.ops(), &dpsi, 1e-6).unwrap().relative_discrepancy
            })
            .collect();
        assert!(errs[1] <= 1e-3, "{errs:?}");
        let slope = (errs[0] / errs[1]).log2();
        assert!((slope - 2.0).abs() < 0.3, "slope {slope}");
    }

    #[test]
    fn viscous_check_uniform_velocity_is_zero() {
        let m = ring_model(64, GaugeSchedule::zero(), -1.0);
        let s = ring_state(&m, 0.0, |t| Complex64::from_polar(1.0, 2.0 * t));
        let dpsi = vec![Complex64::default(); 64];
        let r = viscous_force_check(&s, &m.params, m.ops(), &dpsi, 1e-6).unwrap();
        assert!(r.absolute_discrepancy < 1e-10 && r.laplacian_norm < 1e-10);
        assert_eq!(r.relative_discrepancy, 0.0);
    }

    #[test]
    fn viscous_check_refuses_bad_input() {
        let m = ring_model(64, GaugeSchedule::zero(), -1.0);
        let s = ring_state(&m, 0.0, |t| Complex64::new(1.0 + 0.5 * t.cos(), 0.0));
        let dpsi = vec![Complex64::default(); 64];
        assert!(matches!(
            viscous_force_check(&s, &m.params, m.ops(), &dpsi, 1e-3),
            Err(ViscousError::Nonuniform { .. })
        ));
        let s = ring_state(&m, 0.0, |t| Complex64::from_polar(1.0, t.sin()));
        let growing = s.psi.clone();
        assert!(matches!(
            viscous_force_check(&s, &m.params, m.ops(), &growing, 1e-3),
            Err(ViscousError::Unsteady { .. })
        ));
    }

    #[test]
    fn order_four_newton_residual_is_smaller() {
        let gauge = GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: 0.2 });
        let errs: Vec<f64> = [Order::Two, Order::Four]
            .iter()
            .map(|&order| {
                let p = PhysParams { alpha: -0.5, ..PhysParams::default() };
                let m = Model::new(&ring(128), p, gauge, Stencil { order, ..Stencil::default() }).unwrap();
                force_decomposition(&ring_state(&m, 0.0, messy), &m).newton_max()
            })
            .collect();
        assert!(errs[1] < 0.1 * errs[0], "{errs:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn global_phase_does_not_change_fields(c in -PI..PI, flux in -0.5f64..0.5) {
            let m = ring_model(48, GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: flux }), -0.4);
            let a = ring_state(&m, 0.0, messy);
            let rot = Complex64::from_polar(1.0, c);
            let b = m.state(0.0, a.psi.iter().map(|z| z * rot).collect());
            let fa = force_decomposition(&a, &m);
            let fb = force_decomposition(&b, &m);
            for i in 0..48 {
                for (x, y) in [
                    (fa.q_stat[i], fb.q_stat[i]),
                    (fa.q_dyn[i], fb.q_dyn[i]),
                    (fa.q_dep[i], fb.q_dep[i]),
                    (fa.v.components[0][i], fb.v.components[0][i]),
                    (fa.newton_residual.components[0][i], fb.newton_residual.components[0][i]),
                ] {
                    prop_assert!((x - y).abs() <= 1e-11 * (1.0 + x.abs()));
                }
            }
        }
    }
}
