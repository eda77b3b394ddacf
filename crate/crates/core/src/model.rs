//! Physical parameters, discretized geometry, prescribed gauge fields and the
//! field snapshot shared by every other module.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest admissible node count along any axis.
pub const MIN_NODES: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },
    #[error("invalid domain: {0}")]
    Domain(String),
}

/// Material and fundamental constants in simulation units.
///
/// The charge carries its sign. Cooper pairs are negatively charged, which is
/// why the default is `charge = -1`; formulas written with `|q|` take the
/// absolute value explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mass: f64,
    pub charge: f64,
    pub hbar: f64,
    pub light_c: f64,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            alpha: -0.1,
            beta: 1.0,
            gamma: 1.0,
            mass: 1.0,
            charge: -1.0,
            hbar: 1.0,
            light_c: 1.0,
        }
    }
}

impl PhysParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("mass", self.mass),
            ("hbar", self.hbar),
            ("light_c", self.light_c),
        ];
        for (name, value) in positive {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ModelError::Param {
                    name,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        if self.charge == 0.0 || !self.charge.is_finite() {
            return Err(ModelError::Param {
                name: "charge",
                reason: format!("must be finite and nonzero, got {}", self.charge),
            });
        }
        if !self.alpha.is_finite() {
            return Err(ModelError::Param {
                name: "alpha",
                reason: "must be finite".into(),
            });
        }
        Ok(())
    }

    /// Planck's constant `h = 2π ħ`.
    pub fn planck_h(&self) -> f64 {
        2.0 * PI * self.hbar
    }

    /// Flux quantum `Φ₀ = c h / |q|`.
    pub fn flux_quantum(&self) -> f64 {
        self.light_c * self.planck_h() / self.charge.abs()
    }

    /// `q / c`, the coupling in front of the vector potential.
    pub fn coupling(&self) -> f64 {
        self.charge / self.light_c
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }
}

/// Boundary treatment of one grid axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Periodic,
    /// Superconductor/insulator wall: the covariant normal derivative of ψ vanishes.
    ZeroCurrent,
}

/// One axis of the node lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub nodes: usize,
    pub length: f64,
    pub boundary: Boundary,
}

impl Axis {
    /// Node spacing. Periodic axes hold `nodes` cells; walled axes put a node
    /// on each wall.
    pub fn spacing(&self) -> f64 {
        match self.boundary {
            Boundary::Periodic => self.length / self.nodes as f64,
            Boundary::ZeroCurrent => self.length / (self.nodes - 1) as f64,
        }
    }

    pub fn coord(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn is_periodic(&self) -> bool {
        self.boundary == Boundary::Periodic
    }

    /// Fraction of a full cell owned by node `j` (walls own half a cell).
    pub fn cell_fraction(&self, j: usize) -> f64 {
        match self.boundary {
            Boundary::Periodic => 1.0,
            Boundary::ZeroCurrent if j == 0 || j + 1 == self.nodes => 0.5,
            Boundary::ZeroCurrent => 1.0,
        }
    }

    /// Brings a coordinate back into the axis: wraps periodic axes, returns
    /// `None` outside a walled axis.
    pub fn wrap(&self, x: f64) -> Option<f64> {
        match self.boundary {
            Boundary::Periodic => Some(x.rem_euclid(self.length)),
            Boundary::ZeroCurrent => {
                let tol = 1e-12 * self.length;
                if x < -tol || x > self.length + tol {
                    None
                } else {
                    Some(x.clamp(0.0, self.length))
                }
            }
        }
    }

    /// Signed separation `b - a` using the minimum image on periodic axes.
    pub fn separation(&self, a: f64, b: f64) -> f64 {
        let d = b - a;
        if self.is_periodic() {
            d - self.length * (d / self.length).round()
        } else {
            d
        }
    }
}

/// Geometry descriptor, as read from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DomainSpec {
    Ring {
        radius: f64,
        nodes: usize,
    },
    Grid {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        boundary_x: Boundary,
        boundary_y: Boundary,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainKind {
    Ring1D,
    Grid2D,
}

/// Discretized geometry. A ring is a single periodic axis parametrized by arc
/// length; vectors on it are tangential. A grid is a rectangle `[0,lx]×[0,ly]`
/// with node index `ix + nx * iy`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    axes: Vec<Axis>,
    radius: f64,
}

pub fn make_domain(spec: &DomainSpec) -> Result<Domain, ModelError> {
    match *spec {
        DomainSpec::Ring { radius, nodes } => {
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(ModelError::Domain(format!(
                    "ring radius must be positive, got {radius}"
                )));
            }
            if nodes < MIN_NODES {
                return Err(ModelError::Domain(format!(
                    "ring node count {nodes} is below the minimum of {MIN_NODES}"
                )));
            }
            Ok(Domain {
                kind: DomainKind::Ring1D,
                axes: vec![Axis {
                    nodes,
                    length: 2.0 * PI * radius,
                    boundary: Boundary::Periodic,
                }],
                radius,
            })
        }
        DomainSpec::Grid {
            lx,
            ly,
            nx,
            ny,
            boundary_x,
            boundary_y,
        } => {
            for (name, l) in [("lx", lx), ("ly", ly)] {
                if !(l > 0.0) || !l.is_finite() {
                    return Err(ModelError::Domain(format!(
                        "grid extent {name} must be positive, got {l}"
                    )));
                }
            }
            for (name, n) in [("nx", nx), ("ny", ny)] {
                if n < MIN_NODES {
                    return Err(ModelError::Domain(format!(
                        "grid node count {name} = {n} is below the minimum of {MIN_NODES}"
                    )));
                }
            }
            Ok(Domain {
                kind: DomainKind::Grid2D,
                axes: vec![
                    Axis {
                        nodes: nx,
                        length: lx,
                        boundary: boundary_x,
                    },
                    Axis {
                        nodes: ny,
                        length: ly,
                        boundary: boundary_y,
                    },
                ],
                radius: 0.0,
            })
        }
    }
}

impl Domain {
    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Axis {
        &self.axes[k]
    }

    /// Ring radius; zero for grids.
    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.nodes).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Full-cell measure: arc length per node on a ring, area element on a grid.
    pub fn node_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    /// Quadrature weight of node `i` (half cells on walls).
    pub fn node_weight(&self, i: usize) -> f64 {
        let idx = self.unflatten(i);
        self.axes
            .iter()
            .zip(idx.iter())
            .map(|(a, &j)| a.spacing() * a.cell_fraction(j))
            .product()
    }

    pub fn total_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.length).product()
    }

    pub fn min_spacing(&self) -> f64 {
        self.axes
            .iter()
            .map(Axis::spacing)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn stride(&self, k: usize) -> usize {
        self.axes[..k].iter().map(|a| a.nodes).product()
    }

    pub fn unflatten(&self, i: usize) -> [usize; 2] {
        match self.kind {
            DomainKind::Ring1D => [i, 0],
            DomainKind::Grid2D => {
                let nx = self.axes[0].nodes;
                [i % nx, i / nx]
            }
        }
    }

    pub fn flatten(&self, idx: [usize; 2]) -> usize {
        match self.kind {
            DomainKind::Ring1D => idx[0],
            DomainKind::Grid2D => idx[0] + self.axes[0].nodes * idx[1],
        }
    }

    /// Node coordinates in the domain's own parametrization (arc length on a
    /// ring; `y` is zero there).
    pub fn coords(&self, i: usize) -> [f64; 2] {
        let idx = self.unflatten(i);
        match self.kind {
            DomainKind::Ring1D => [self.axes[0].coord(idx[0]), 0.0],
            DomainKind::Grid2D => [self.axes[0].coord(idx[0]), self.axes[1].coord(idx[1])],
        }
    }

    /// Cartesian position in the plane. Rings are centered at the origin.
    pub fn embed(&self, coords: [f64; 2]) -> [f64; 2] {
        match self.kind {
            DomainKind::Ring1D => {
                let theta = coords[0] / self.radius;
                [self.radius * theta.cos(), self.radius * theta.sin()]
            }
            DomainKind::Grid2D => coords,
        }
    }

    /// Wraps periodic coordinates; `None` if outside a walled axis.
    pub fn wrap(&self, coords: [f64; 2]) -> Option<[f64; 2]> {
        let mut out = [0.0; 2];
        for (k, a) in self.axes.iter().enumerate() {
            out[k] = a.wrap(coords[k])?;
        }
        Some(out)
    }

    /// Squared minimum-image distance between two points.
    pub fn distance_sq(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        self.axes
            .iter()
            .enumerate()
            .map(|(k, ax)| ax.separation(a[k], b[k]).powi(2))
            .sum()
    }

    /// Index of the node whose cell contains `coords` (coordinates must be
    /// wrapped already).
    pub fn nearest_node(&self, coords: [f64; 2]) -> usize {
        let mut idx = [0usize; 2];
        for (k, a) in self.axes.iter().enumerate() {
            let j = (coords[k] / a.spacing()).round() as i64;
            idx[k] = if a.is_periodic() {
                j.rem_euclid(a.nodes as i64) as usize
            } else {
                j.clamp(0, a.nodes as i64 - 1) as usize
            };
        }
        self.flatten(idx)
    }

    /// ∫ f dV with the node quadrature weights.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter()
            .enumerate()
            .map(|(i, v)| v * self.node_weight(i))
            .sum()
    }
}

/// Real vector field stored per component; rings carry one (tangential)
/// component, grids two.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub components: Vec<Vec<f64>>,
}

impl VectorField {
    pub fn zeros(dim: usize, n: usize) -> Self {
        Self {
            components: vec![vec![0.0; n]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn len(&self) -> usize {
        self.components.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, i: usize) -> [f64; 2] {
        let mut out = [0.0; 2];
        for (k, c) in self.components.iter().enumerate() {
            out[k] = c[i];
        }
        out
    }

    pub fn norm_sq_at(&self, i: usize) -> f64 {
        self.components.iter().map(|c| c[i] * c[i]).sum()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            components: self
                .components
                .iter()
                .map(|c| c.iter().map(|v| v * s).collect())
                .collect(),
        }
    }

    /// Largest pointwise Euclidean norm.
    pub fn max_norm(&self) -> f64 {
        (0..self.len())
            .map(|i| self.norm_sq_at(i).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Smooth switch-on of the vector potential: `A(x,t) = s(t) A₀(x)` with
/// `s = (1 - cos(π (t - start)/duration)) / 2` inside the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ramp {
    pub start: f64,
    pub duration: f64,
}

impl Ramp {
    fn factor(&self, t: f64) -> (f64, f64) {
        if t <= self.start {
            (0.0, 0.0)
        } else if t >= self.start + self.duration {
            (1.0, 0.0)
        } else {
            let w = PI / self.duration;
            let phase = w * (t - self.start);
            (0.5 * (1.0 - phase.cos()), 0.5 * w * phase.sin())
        }
    }
}

/// Closed-form vector potentials. Centers default to the ring axis (origin)
/// or the grid center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GaugeKind {
    Zero,
    /// Uniform `B₀ ẑ` in the symmetric gauge `A = ½ B₀ r θ̂`.
    UniformFieldDisc { b0: f64 },
    /// Uniform `B₀ ẑ` in the Landau gauge `A = -B₀ (y - y_c) x̂`.
    UniformFieldStrip { b0: f64 },
    /// Flux tube through the axis: `A = Φ/(2π r) θ̂`, no field off-axis.
    RingFlux { flux_ratio: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeSchedule {
    pub kind: GaugeKind,
    pub ramp: Option<Ramp>,
}

impl GaugeSchedule {
    pub fn stat(kind: GaugeKind) -> Self {
        Self { kind, ramp: None }
    }

    pub fn zero() -> Self {
        Self::stat(GaugeKind::Zero)
    }

    pub fn is_static(&self) -> bool {
        self.ramp.is_none() || matches!(self.kind, GaugeKind::Zero)
    }

    fn center(domain: &Domain) -> [f64; 2] {
        match domain.kind() {
            DomainKind::Ring1D => [0.0, 0.0],
            DomainKind::Grid2D => [0.5 * domain.axis(0).length, 0.5 * domain.axis(1).length],
        }
    }

    /// Static profile `A₀` and field `B₀` at a Cartesian point.
    fn profile(&self, p: [f64; 2], center: [f64; 2], params: &PhysParams) -> ([f64; 2], f64) {
        let (dx, dy) = (p[0] - center[0], p[1] - center[1]);
        match self.kind {
            GaugeKind::Zero => ([0.0, 0.0], 0.0),
            GaugeKind::UniformFieldDisc { b0 } => ([-0.5 * b0 * dy, 0.5 * b0 * dx], b0),
            GaugeKind::UniformFieldStrip { b0 } => ([-b0 * dy, 0.0], b0),
            GaugeKind::RingFlux { flux_ratio } => {
                let r2 = dx * dx + dy * dy;
                if r2 == 0.0 {
                    return ([0.0, 0.0], 0.0);
                }
                let flux = flux_ratio * params.flux_quantum();
                let s = flux / (2.0 * PI * r2);
                ([-s * dy, s * dx], 0.0)
            }
        }
    }
}

/// Prescribed electromagnetic fields at one instant. `b` is the out-of-plane
/// component.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeFields {
    pub a: VectorField,
    pub e: VectorField,
    pub b: Vec<f64>,
}

/// Samples `A`, `E = -(1/c) ∂A/∂t` and `B = ∇×A` on every node. On a ring
/// only tangential components are kept.
pub fn sample_gauge(
    schedule: &GaugeSchedule,
    domain: &Domain,
    t: f64,
    params: &PhysParams,
) -> GaugeFields {
    let n = domain.len();
    let dim = domain.dim();
    let center = GaugeSchedule::center(domain);
    let (s, ds) = schedule.ramp.map_or((1.0, 0.0), |r| r.factor(t));
    let mut a = VectorField::zeros(dim, n);
    let mut e = VectorField::zeros(dim, n);
    let mut b = vec![0.0; n];
    for i in 0..n {
        let c = domain.coords(i);
        let p = domain.embed(c);
        let (a0, b0) = schedule.profile(p, center, params);
        let comps: [f64; 2] = match domain.kind() {
            DomainKind::Ring1D => {
                let theta = c[0] / domain.radius();
                [-a0[0] * theta.sin() + a0[1] * theta.cos(), 0.0]
            }
            DomainKind::Grid2D => a0,
        };
        for k in 0..dim {
            a.components[k][i] = s * comps[k];
            e.components[k][i] = -ds * comps[k] / params.light_c;
        }
        b[i] = s * b0;
    }
    GaugeFields { a, e, b }
}

/// Complex order parameter plus the gauge fields at time `t`. The scalar
/// potential is identically zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub psi: Vec<Complex64>,
    pub a: VectorField,
    pub e: VectorField,
    pub b: Vec<f64>,
}

impl FieldState {
    pub fn new(t: f64, psi: Vec<Complex64>, gauge: GaugeFields) -> Self {
        Self {
            t,
            psi,
            a: gauge.a,
            e: gauge.e,
            b: gauge.b,
        }
    }

    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.psi.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ring(n: usize) -> Domain {
        make_domain(&DomainSpec::Ring { radius: 1.0, nodes: n }).unwrap()
    }

    #[test]
    fn ring_node_volume() {
        let d = ring(256);
        assert_relative_eq!(d.node_volume(), 2.0 * PI / 256.0, max_relative = 1e-15);
        assert_eq!(d.len(), 256);
    }

    #[test]
    fn periodic_grid_volume() {
        let d = make_domain(&DomainSpec::Grid {
            lx: 10.0,
            ly: 10.0,
            nx: 64,
            ny: 64,
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Periodic,
        })
        .unwrap();
        assert_eq!(d.len(), 4096);
        assert_relative_eq!(d.node_volume(), (10.0f64 / 64.0).powi(2), max_relative = 1e-15);
        assert_relative_eq!(d.integrate(&vec![1.0; 4096]), 100.0, max_relative = 1e-12);
    }

    #[test]
    fn walled_axis_weights_integrate_area() {
        let d = make_domain(&DomainSpec::Grid {
            lx: 3.0,
            ly: 2.0,
            nx: 16,
            ny: 21,
            boundary_x: Boundary::ZeroCurrent,
            boundary_y: Boundary::Periodic,
        })
        .unwrap();
        assert_relative_eq!(d.integrate(&vec![1.0; d.len()]), 6.0, max_relative = 1e-12);
    }

    #[test]
    fn rejects_small_or_degenerate_domains() {
        assert!(make_domain(&DomainSpec::Ring { radius: 1.0, nodes: 4 }).is_err());
        assert!(make_domain(&DomainSpec::Ring { radius: 0.0, nodes: 64 }).is_err());
        assert!(make_domain(&DomainSpec::Grid {
            lx: -1.0,
            ly: 1.0,
            nx: 32,
            ny: 32,
            boundary_x: Boundary::Periodic,
            boundary_y: Boundary::Periodic,
        })
        .is_err());
    }

    #[test]
    fn params_invariants() {
        let p = PhysParams::default();
        assert!(p.validate().is_ok());
        assert_eq!(p.planck_h(), 2.0 * PI * p.hbar);
        assert_eq!(p.flux_quantum(), 2.0 * PI);
        let bad = PhysParams { gamma: -1.0, ..p };
        assert!(matches!(bad.validate(), Err(ModelError::Param { name: "gamma", .. })));
        let bad = PhysParams { charge: 0.0, ..p };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn uniform_disc_gauge_on_grid() {
        let d = make_domain(&DomainSpec::Grid {
            lx: 8.0,
            ly: 8.0,
            nx: 33,
            ny: 33,
            boundary_x: Boundary::ZeroCurrent,
            boundary_y: Boundary::ZeroCurrent,
        })
        .unwrap();
        let p = PhysParams::default();
        let g = sample_gauge(&GaugeSchedule::stat(GaugeKind::UniformFieldDisc { b0: 2.0 }), &d, 3.0, &p);
        for i in 0..d.len() {
            let c = d.coords(i);
            let (dx, dy) = (c[0] - 4.0, c[1] - 4.0);
            // A = ½ B₀ r θ̂ = r θ̂ for B₀ = 2
            assert_relative_eq!(g.a.components[0][i], -dy, epsilon = 1e-14);
            assert_relative_eq!(g.a.components[1][i], dx, epsilon = 1e-14);
            assert_eq!(g.b[i], 2.0);
            assert_eq!(g.e.at(i), [0.0, 0.0]);
        }
    }

    #[test]
    fn ring_flux_loop_integral() {
        let d = ring(97);
        let p = PhysParams::default();
        let g = sample_gauge(&GaugeSchedule::stat(GaugeKind::RingFlux { flux_ratio: 0.3 }), &d, 0.0, &p);
        let h = d.axis(0).spacing();
        let loop_sum: f64 = g.a.components[0].iter().map(|a| a * h).sum();
        assert_relative_eq!(loop_sum, 0.3 * p.flux_quantum(), max_relative = 1e-14);
        assert!(g.e.components[0].iter().all(|&e| e == 0.0));
        assert!(g.b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn ramp_electric_field_matches_time_derivative() {
        let d = ring(32);
        let p = PhysParams::default();
        let sched = GaugeSchedule {
            kind: GaugeKind::RingFlux { flux_ratio: 0.4 },
            ramp: Some(Ramp { start: 0.0, duration: 2.0 }),
        };
        let t = 0.7;
        let mut errs = Vec::new();
        for dt in [1e-2, 5e-3] {
            let ap = sample_gauge(&sched, &d, t + dt, &p).a.components[0][3];
            let am = sample_gauge(&sched, &d, t - dt, &p).a.components[0][3];
            let e = sample_gauge(&sched, &d, t, &p).e.components[0][3];
            errs.push(((ap - am) / (2.0 * dt) + p.light_c * e).abs());
        }
        assert!(errs[0] > 0.0);
        let ratio = errs[0] / errs[1];
        assert!((ratio - 4.0).abs() < 0.1, "expected O(dt²), ratio {ratio}");
    }

    #[test]
    fn zero_gauge() {
        let d = ring(16);
        let g = sample_gauge(&GaugeSchedule::zero(), &d, 1.0, &PhysParams::default());
        assert!(g.a.components[0].iter().all(|&a| a == 0.0));
        assert!(g.b.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn axis_wrap_and_separation() {
        let d = ring(16);
        let ax = d.axis(0);
        assert_relative_eq!(ax.wrap(-0.1).unwrap(), 2.0 * PI - 0.1, epsilon = 1e-14);
        assert_relative_eq!(ax.separation(0.1, 2.0 * PI - 0.1), -0.2, epsilon = 1e-14);
        let wall = Axis { nodes: 17, length: 1.0, boundary: Boundary::ZeroCurrent };
        assert!(wall.wrap(1.5).is_none());
        assert_eq!(wall.spacing(), 1.0 / 16.0);
    }
}
