//! Closed-form reference values for the two analytic configurations: a
//! vortex of winding `n` in a uniform field with cylindrical symmetry, and a
//! thin ring threaded by flux right after a quench. No grids are involved.

use thiserror::Error;

use crate::model::PhysParams;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("radius must be positive, got {0}")]
    Radius(f64),
    #[error("invalid oracle configuration: {0}")]
    Config(String),
    #[error("{count} harmonics grow (λ_n > 0); the single-mode picture does not apply")]
    MultiMode { count: usize },
    #[error("no harmonic grows (all λ_n ≤ 0)")]
    NoGrowth,
}

/// Cylindrically symmetric state `φ = -nθ` in `B = B₀ ẑ`, `A = ½ B₀ r θ̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscOracle {
    pub n: i64,
    pub b0: f64,
    pub params: PhysParams,
}

impl DiscOracle {
    pub fn new(n: i64, b0: f64, params: PhysParams) -> Result<Self, OracleError> {
        if n < 1 {
            return Err(OracleError::Config(format!("winding must be ≥ 1, got {n}")));
        }
        if !(b0 > 0.0) {
            return Err(OracleError::Config(format!("B₀ must be positive, got {b0}")));
        }
        Ok(Self { n, b0, params })
    }

    /// Radius where the magnetic and centrifugal forces cancel,
    /// `r_B = (2 n c ħ / |q| B₀)^{1/2}`.
    pub fn r_b(&self) -> f64 {
        let p = &self.params;
        (2.0 * self.n as f64 * p.light_c * p.hbar / (p.charge.abs() * self.b0)).sqrt()
    }

    fn check(r: f64) -> Result<(), OracleError> {
        if r > 0.0 && r.is_finite() {
            Ok(())
        } else {
            Err(OracleError::Radius(r))
        }
    }

    /// Tangential pair velocity `(1/m)(|q| B₀ r / 2c - n ħ / r)`.
    pub fn velocity(&self, r: f64) -> Result<f64, OracleError> {
        Self::check(r)?;
        let p = &self.params;
        Ok((p.charge.abs() * self.b0 * r / (2.0 * p.light_c) - self.n as f64 * p.hbar / r) / p.mass)
    }

    /// Radial Lorentz plus centrifugal force
    /// `(1/mr)(n²ħ²/r² - q²B₀²r²/4c²)`; positive points away from the axis.
    pub fn force_sum(&self, r: f64) -> Result<f64, OracleError> {
        Self::check(r)?;
        let p = &self.params;
        let n = self.n as f64;
        let magnetic = p.charge * p.charge * self.b0 * self.b0 * r * r / (4.0 * p.light_c * p.light_c);
        Ok((n * n * p.hbar * p.hbar / (r * r) - magnetic) / (p.mass * r))
    }

    /// `-Q_stat(r) = (1/2m)(nħ/r - |q|B₀r/2c)² + α`.
    pub fn neg_q_stat(&self, r: f64) -> Result<f64, OracleError> {
        Self::check(r)?;
        let p = &self.params;
        let w = self.n as f64 * p.hbar / r - p.charge.abs() * self.b0 * r / (2.0 * p.light_c);
        Ok(w * w / (2.0 * p.mass) + p.alpha)
    }

    /// Radial quantum force `-dQ_stat/dr`, in closed form.
    pub fn quantum_force(&self, r: f64) -> Result<f64, OracleError> {
        Ok(-self.force_sum(r)?)
    }
}

/// Thin ring of radius `R` threaded by flux `Φ = flux_ratio · Φ₀`, linear
/// regime after the quench.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingOracle {
    pub radius: f64,
    pub flux_ratio: f64,
    pub params: PhysParams,
}

/// Uniform fields expected once the dominant harmonic has taken over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingFields {
    pub dominant: i64,
    pub lambda: f64,
    pub q_stat: f64,
    pub q_dyn: f64,
    pub q_dep: f64,
    /// Signed tangential velocity `(ħ/mR)(Φ/Φ₀ - ñ)`.
    pub pair_velocity: f64,
}

impl RingOracle {
    pub fn new(radius: f64, flux_ratio: f64, params: PhysParams) -> Result<Self, OracleError> {
        if !(radius > 0.0) {
            return Err(OracleError::Radius(radius));
        }
        Ok(Self {
            radius,
            flux_ratio,
            params,
        })
    }

    /// `λ_n = -α/ħγ - ħ(n - Φ/Φ₀)²/(2mγR²)`.
    pub fn lambda(&self, n: i64) -> f64 {
        let p = &self.params;
        let dn = n as f64 - self.flux_ratio;
        -p.alpha / (p.hbar * p.gamma) - p.hbar * dn * dn / (2.0 * p.mass * p.gamma * self.radius * self.radius)
    }

    /// Index maximizing `λ_n`: the integer closest to `Φ/Φ₀`.
    pub fn argmax(&self) -> i64 {
        self.flux_ratio.round() as i64
    }

    /// Harmonics with `λ_n > 0`. The spectrum is a downward parabola in
    /// `n`, so they form a contiguous window around the argmax.
    pub fn growing(&self) -> Vec<i64> {
        let c = self.argmax();
        let mut out = Vec::new();
        let mut lo = c;
        while self.lambda(lo) > 0.0 {
            out.push(lo);
            lo -= 1;
        }
        let mut hi = c + 1;
        while self.lambda(hi) > 0.0 {
            out.push(hi);
            hi += 1;
        }
        out.sort_unstable();
        out
    }

    /// The single growing harmonic `ñ`.
    pub fn dominant(&self) -> Result<i64, OracleError> {
        match self.growing().as_slice() {
            [] => Err(OracleError::NoGrowth),
            [n] => Ok(*n),
            g => Err(OracleError::MultiMode { count: g.len() }),
        }
    }

    /// Mode amplitude `T_n(t) = T_n(0) e^{λ_n t}`.
    pub fn amplitude(&self, n: i64, t0_amplitude: f64, t: f64) -> f64 {
        t0_amplitude * (self.lambda(n) * t).exp()
    }

    /// `Q_stat = 0`, `Q_dyn = ħγλ_ñ`, `Q_dep = -2ħλ_ñ`, velocity
    /// `(ħ/mR)(Φ/Φ₀ - ñ)`. Time independent in the linear regime.
    pub fn expected_fields(&self) -> Result<RingFields, OracleError> {
        let n = self.dominant()?;
        let p = &self.params;
        let lambda = self.lambda(n);
        Ok(RingFields {
            dominant: n,
            lambda,
            q_stat: 0.0,
            q_dyn: p.hbar * p.gamma * lambda,
            q_dep: -2.0 * p.hbar * lambda,
            pair_velocity: p.hbar / (p.mass * self.radius) * (self.flux_ratio - n as f64),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn units(alpha: f64) -> PhysParams {
        PhysParams {
            alpha,
            ..PhysParams::default()
        }
    }

    #[test]
    fn disc_values_at_r_b() {
        let o = DiscOracle::new(1, 2.0, units(0.0)).unwrap();
        assert_relative_eq!(o.r_b(), 1.0, epsilon = 1e-15);
        assert_eq!(o.velocity(1.0).unwrap(), 0.0);
        assert_eq!(o.force_sum(1.0).unwrap(), 0.0);
        assert_eq!(o.neg_q_stat(1.0).unwrap(), 0.0);
    }

    #[test]
    fn disc_values_at_two_points() {
        let o = DiscOracle::new(1, 2.0, units(0.0)).unwrap();
        assert_relative_eq!(o.velocity(2.0).unwrap(), 1.5, epsilon = 1e-15);
        assert_relative_eq!(o.force_sum(2.0).unwrap(), -1.875, epsilon = 1e-15);
        assert_relative_eq!(o.neg_q_stat(2.0).unwrap(), 1.125, epsilon = 1e-15);
        assert_relative_eq!(o.velocity(0.5).unwrap(), -1.5, epsilon = 1e-15);
        // (1/0.5)(4 - 0.25): positive, pointing away from the axis inside r_B
        assert_relative_eq!(o.force_sum(0.5).unwrap(), 7.5, epsilon = 1e-14);
    }

    #[test]
    fn disc_rejects_nonpositive_radius() {
        let o = DiscOracle::new(1, 2.0, units(0.0)).unwrap();
        assert!(o.velocity(0.0).is_err());
        assert!(o.force_sum(-1.0).is_err());
        assert!(o.neg_q_stat(0.0).is_err());
        assert!(DiscOracle::new(0, 2.0, units(0.0)).is_err());
    }

    #[test]
    fn force_balance_identity_on_dense_grid() {
        // -∇Q_stat = -(F_Lorentz + F_centrifugal), differentiating -Q_stat
        // with a sixth-order central difference
        for (n, b0, alpha) in [(1, 2.0, 0.0), (2, 0.7, -0.3), (3, 5.0, 1.0)] {
            let o = DiscOracle::new(n, b0, units(alpha)).unwrap();
            let h = 1e-3;
            for k in 1..=2000 {
                let r = 0.2 + 2.8 * k as f64 / 2000.0;
                let f = |x: f64| o.neg_q_stat(x).unwrap();
                let d = (f(r + 3.0 * h) - 9.0 * f(r + 2.0 * h) + 45.0 * f(r + h) - 45.0 * f(r - h)
                    + 9.0 * f(r - 2.0 * h)
                    - f(r - 3.0 * h))
                    / (60.0 * h);
                let expect = -o.force_sum(r).unwrap();
                assert!(
                    (d - expect).abs() <= 1e-10 * expect.abs().max(1.0),
                    "n={n} r={r}: {d} vs {expect}"
                );
            }
        }
    }

    #[test]
    fn quantum_potential_is_maximal_at_r_b() {
        let o = DiscOracle::new(1, 2.0, units(-0.5)).unwrap();
        let q = |r: f64| -o.neg_q_stat(r).unwrap();
        let best = (1..3000)
            .map(|k| k as f64 * 1e-3)
            .max_by(|a, b| q(*a).total_cmp(&q(*b)))
            .unwrap();
        assert!((best - o.r_b()).abs() <= 1e-3);
    }

    #[test]
    fn ring_growth_rates() {
        let o = RingOracle::new(1.0, 0.3, units(-0.1)).unwrap();
        assert_relative_eq!(o.lambda(0), 0.055, epsilon = 1e-15);
        assert_relative_eq!(o.lambda(1), -0.145, epsilon = 1e-15);
        let z = RingOracle::new(1.0, 0.0, units(-0.1)).unwrap();
        assert_relative_eq!(z.lambda(0), 0.1, epsilon = 1e-15);
        for n in 1..10 {
            assert_eq!(z.lambda(n), z.lambda(-n));
        }
    }

    #[test]
    fn ring_dominant_is_argmax() {
        for flux in [-2.7, -0.4, 0.3, 0.49, 1.6, 4.2] {
            let o = RingOracle::new(1.0, flux, units(-0.1)).unwrap();
            let best = (-10..=10).max_by(|a, b| o.lambda(*a).total_cmp(&o.lambda(*b))).unwrap();
            assert_eq!(o.argmax(), best);
            if let Ok(n) = o.dominant() {
                assert_eq!(n, best);
            }
        }
    }

    #[test]
    fn ring_expected_fields() {
        let o = RingOracle::new(1.0, 0.3, units(-0.1)).unwrap();
        let f = o.expected_fields().unwrap();
        assert_eq!(f.dominant, 0);
        assert_relative_eq!(f.q_dyn, 0.055, epsilon = 1e-15);
        assert_relative_eq!(f.q_dep, -0.11, epsilon = 1e-15);
        assert_relative_eq!(f.pair_velocity, 0.3, epsilon = 1e-15);
        assert_eq!(f.q_stat, 0.0);
    }

    #[test]
    fn ring_multi_mode_flagged() {
        let o = RingOracle::new(3.0, 0.5, units(-1.0)).unwrap();
        assert!(matches!(o.expected_fields(), Err(OracleError::MultiMode { .. })));
        let normal = RingOracle::new(1.0, 0.3, units(0.1)).unwrap();
        assert_eq!(normal.dominant(), Err(OracleError::NoGrowth));
    }
}
