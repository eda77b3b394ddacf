//! Cylindrically symmetric vortex `ψ = f(r) e^{-inθ}` in a uniform field
//! `A = ½ B₀ r θ̂`, reduced to a real radial profile on a disc of radius `R`.
//!
//! Nodes sit at cell centres `r_i = (i + ½) h`, so the axis is never a node.
//! The Laplacian is the flux form
//! `(1/r_i h²)[r_{i+½}(f_{i+1} - f_i) - r_{i-½}(f_i - f_{i-1})]` with no flux
//! through the axis and through the outer wall (zero current).

use serde::{Deserialize, Serialize};

use super::linear::solve_tridiagonal;
use super::{RelaxReport, SolverError};
use crate::model::{ModelError, PhysParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialDiscSpec {
    pub winding: i64,
    pub b0: f64,
    pub outer_radius: f64,
    pub nodes: usize,
}

#[derive(Debug, Clone)]
pub struct RadialDisc {
    pub spec: RadialDiscSpec,
    pub params: PhysParams,
    r: Vec<f64>,
    h: f64,
    /// Tangential velocity, fixed by the winding and the gauge.
    v: Vec<f64>,
}

/// Stationary profile and the radial force balance on it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RadialProfile {
    pub r: Vec<f64>,
    pub f: Vec<f64>,
    pub v: Vec<f64>,
    pub q_stat: Vec<f64>,
    /// `-dQ_stat/dr`.
    pub quantum_force: Vec<f64>,
    /// `q v B₀ / c`, radial.
    pub lorentz: Vec<f64>,
    /// Radial `m a = -m v² / r`.
    pub mass_accel: Vec<f64>,
    pub newton_residual: Vec<f64>,
}

impl RadialDisc {
    pub fn new(spec: RadialDiscSpec, params: PhysParams) -> Result<Self, SolverError> {
        params.validate()?;
        if spec.nodes < crate::model::MIN_NODES {
            return Err(ModelError::Domain(format!(
                "radial node count {} below minimum {}",
                spec.nodes,
                crate::model::MIN_NODES
            ))
            .into());
        }
        if !(spec.outer_radius > 0.0) || !(spec.b0.is_finite()) {
            return Err(ModelError::Domain(format!("invalid disc radius {} or field {}", spec.outer_radius, spec.b0)).into());
        }
        let h = spec.outer_radius / spec.nodes as f64;
        let r: Vec<f64> = (0..spec.nodes).map(|i| (i as f64 + 0.5) * h).collect();
        let v = r
            .iter()
            .map(|&r| (-(spec.winding as f64) * params.hbar / r - params.coupling() * 0.5 * spec.b0 * r) / params.mass)
            .collect();
        Ok(Self { spec, params, r, h, v })
    }

    pub fn radii(&self) -> &[f64] {
        &self.r
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn velocity(&self) -> &[f64] {
        &self.v
    }

    /// Coefficients `(lower, diag, upper)` of the flux-form Laplacian.
    fn laplacian_bands(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.r.len();
        let h2 = self.h * self.h;
        let mut lo = vec![0.0; n];
        let mut di = vec![0.0; n];
        let mut up = vec![0.0; n];
        for i in 0..n {
            let inner = i as f64 * self.h;
            let outer = if i + 1 < n { (i as f64 + 1.0) * self.h } else { 0.0 };
            let s = 1.0 / (self.r[i] * h2);
            lo[i] = inner * s;
            up[i] = outer * s;
            di[i] = -(inner + outer) * s;
        }
        (lo, di, up)
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let (lo, di, up) = self.laplacian_bands();
        let n = f.len();
        (0..n)
            .map(|i| {
                let mut s = di[i] * f[i];
                if i > 0 {
                    s += lo[i] * f[i - 1];
                }
                if i + 1 < n {
                    s += up[i] * f[i + 1];
                }
                s
            })
            .collect()
    }

    /// Right-hand side of the time-dependent equation for the real profile.
    pub fn rhs(&self, f: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let lap = self.laplacian(f);
        (0..f.len())
            .map(|i| {
                let k = -p.hbar * p.hbar / (2.0 * p.mass) * lap[i] + 0.5 * p.mass * self.v[i] * self.v[i] * f[i];
                -(k + (p.alpha + p.beta * f[i] * f[i]) * f[i]) / (p.gamma * p.hbar)
            })
            .collect()
    }

    /// Profile `√(-α/β) tanh(r/r_B)^n`, a reasonable starting point.
    pub fn initial_guess(&self) -> Vec<f64> {
        let p = &self.params;
        let amp = (-p.alpha / p.beta).max(0.0).sqrt().max(1e-3);
        let rb = (2.0 * self.spec.winding.max(1) as f64 * p.light_c * p.hbar / (p.charge.abs() * self.spec.b0.abs().max(1e-12))).sqrt();
        self.r
            .iter()
            .map(|&r| amp * (r / rb).tanh().powi(self.spec.winding.unsigned_abs() as i32))
            .collect()
    }

    /// Semi-implicit relaxation: kinetic and centrifugal terms implicit,
    /// local nonlinearity explicit. Stops when `‖rhs‖∞ ≤ tol`.
    pub fn relax(&self, mut f: Vec<f64>, dt: f64, tol: f64, max_steps: usize) -> Result<(Vec<f64>, RelaxReport), SolverError> {
        let p = &self.params;
        if !(dt > 0.0) || !(tol > 0.0) {
            return Err(SolverError::Config(format!("dt and tol must be positive, got {dt}, {tol}")));
        }
        let c = dt / (p.gamma * p.hbar);
        let (lo, di, up) = self.laplacian_bands();
        let k = -p.hbar * p.hbar / (2.0 * p.mass);
        let lower: Vec<f64> = lo.iter().map(|x| c * k * x).collect();
        let upper: Vec<f64> = up.iter().map(|x| c * k * x).collect();
        let diag: Vec<f64> = di
            .iter()
            .zip(&self.v)
            .map(|(d, v)| 1.0 + c * (k * d + 0.5 * p.mass * v * v))
            .collect();
        let mut steps = 0;
        loop {
            let residual = self.rhs(&f).iter().map(|x| x.abs()).fold(0.0, f64::max);
            if !residual.is_finite() {
                return Err(SolverError::NonFinite { t: steps as f64 * dt, node: 0 });
            }
            if residual <= tol {
                return Ok((f, RelaxReport { steps, residual }));
            }
            if steps >= max_steps {
                return Err(SolverError::NotConverged { steps, residual, tol });
            }
            let rhs: Vec<f64> = f.iter().map(|x| x - c * (p.alpha + p.beta * x * x) * x).collect();
            f = solve_tridiagonal(&lower, &diag, &upper, &rhs);
            steps += 1;
        }
    }

    /// `Q_stat = β f² - (ħ²/2m) ∇²f / f`, with the solver's own Laplacian.
    pub fn q_stat(&self, f: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let lap = self.laplacian(f);
        (0..f.len())
            .map(|i| p.beta * f[i] * f[i] - p.hbar * p.hbar / (2.0 * p.mass) * lap[i] / f[i])
            .collect()
    }

    /// Second-order derivative along `r`, one-sided at both ends.
    pub fn derivative(&self, g: &[f64]) -> Vec<f64> {
        let n = g.len();
        let h = self.h;
        (0..n)
            .map(|i| {
                if i == 0 {
                    (-3.0 * g[0] + 4.0 * g[1] - g[2]) / (2.0 * h)
                } else if i + 1 == n {
                    (3.0 * g[n - 1] - 4.0 * g[n - 2] + g[n - 3]) / (2.0 * h)
                } else {
                    (g[i + 1] - g[i - 1]) / (2.0 * h)
                }
            })
            .collect()
    }

    pub fn profile(&self, f: &[f64]) -> RadialProfile {
        let p = &self.params;
        let q_stat = self.q_stat(f);
        let quantum_force: Vec<f64> = self.derivative(&q_stat).iter().map(|d| -d).collect();
        let lorentz: Vec<f64> = self.v.iter().map(|v| p.charge * v * self.spec.b0 / p.light_c).collect();
        let mass_accel: Vec<f64> = self.v.iter().zip(&self.r).map(|(v, r)| -p.mass * v * v / r).collect();
        let newton_residual = (0..f.len())
            .map(|i| quantum_force[i] + lorentz[i] - mass_accel[i])
            .collect();
        RadialProfile {
            r: self.r.clone(),
            f: f.to_vec(),
            v: self.v.clone(),
            q_stat,
            quantum_force,
            lorentz,
            mass_accel,
            newton_residual,
        }
    }
}
