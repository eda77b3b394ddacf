//! Finite-difference operators, gauge-covariant derivatives and off-grid
//! interpolation on rings and rectangles.
//!
//! Periodic axes use central stencils everywhere. Walled axes use central
//! stencils in the interior and one-sided stencils of the same order near
//! the walls, unless [`Edge::Reflect`] is requested for fields known to obey
//! a homogeneous Neumann condition.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::model::{Domain, FieldState, PhysParams, VectorField};

/// Spatial accuracy order of the central stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Order {
    Two,
    Four,
}

impl Order {
    pub fn as_usize(self) -> usize {
        match self {
            Order::Two => 2,
            Order::Four => 4,
        }
    }

    pub fn from_usize(n: usize) -> Option<Self> {
        match n {
            2 => Some(Order::Two),
            4 => Some(Order::Four),
            _ => None,
        }
    }

    /// Number of nodes the central stencil reaches on each side.
    pub fn reach(self) -> usize {
        self.as_usize() / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stencil {
    pub order: Order,
    /// Floor on |ψ|², relative to the domain maximum, applied wherever we
    /// divide by the density.
    pub epsilon_rho: f64,
}

impl Default for Stencil {
    fn default() -> Self {
        Self {
            order: Order::Two,
            epsilon_rho: 1e-6,
        }
    }
}

/// Wall closure for derivative stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    OneSided,
    /// Even reflection about the wall (zero normal derivative).
    Reflect,
}

/// Scalar types the stencils operate on.
pub trait FieldValue:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
}

impl FieldValue for f64 {}
impl FieldValue for Complex64 {}

const MAX_TAPS: usize = 6;

/// Weighted node list along one axis line; indices are line positions.
#[derive(Debug, Clone, Copy)]
struct Taps {
    idx: [usize; MAX_TAPS],
    w: [f64; MAX_TAPS],
    len: usize,
}

impl Taps {
    fn from_pairs(pairs: &[(usize, f64)]) -> Self {
        let mut t = Taps {
            idx: [0; MAX_TAPS],
            w: [0.0; MAX_TAPS],
            len: 0,
        };
        for &(j, w) in pairs {
            if let Some(k) = t.idx[..t.len].iter().position(|&x| x == j) {
                t.w[k] += w;
            } else {
                t.idx[t.len] = j;
                t.w[t.len] = w;
                t.len += 1;
            }
        }
        t
    }

    #[inline]
    fn apply<T: FieldValue>(&self, f: &[T], base: usize, stride: usize) -> T {
        let mut acc = T::default();
        for k in 0..self.len {
            acc = acc + f[base + self.idx[k] * stride] * self.w[k];
        }
        acc
    }
}

const D1_C2: [(i64, f64); 2] = [(-1, -0.5), (1, 0.5)];
const D1_C4: [(i64, f64); 4] = [
    (-2, 1.0 / 12.0),
    (-1, -8.0 / 12.0),
    (1, 8.0 / 12.0),
    (2, -1.0 / 12.0),
];
const D2_C2: [(i64, f64); 3] = [(-1, 1.0), (0, -2.0), (1, 1.0)];
const D2_C4: [(i64, f64); 5] = [
    (-2, -1.0 / 12.0),
    (-1, 16.0 / 12.0),
    (0, -30.0 / 12.0),
    (1, 16.0 / 12.0),
    (2, -1.0 / 12.0),
];

// One-sided closures, written for the low wall; row `r` serves node `r`.
const D1_W2: [&[f64]; 1] = [&[-1.5, 2.0, -0.5]];
const D1_W4: [&[f64]; 2] = [
    &[-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -0.25],
    &[-0.25, -10.0 / 12.0, 1.5, -0.5, 1.0 / 12.0],
];
const D2_W2: [&[f64]; 1] = [&[2.0, -5.0, 4.0, -1.0]];
const D2_W4: [&[f64]; 2] = [
    &[
        45.0 / 12.0,
        -154.0 / 12.0,
        214.0 / 12.0,
        -156.0 / 12.0,
        61.0 / 12.0,
        -10.0 / 12.0,
    ],
    &[
        10.0 / 12.0,
        -15.0 / 12.0,
        -4.0 / 12.0,
        14.0 / 12.0,
        -6.0 / 12.0,
        1.0 / 12.0,
    ],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Deriv {
    First,
    Second,
}

fn build_taps(
    n: usize,
    j: usize,
    periodic: bool,
    order: Order,
    deriv: Deriv,
    edge: Edge,
    h: f64,
) -> Taps {
    let scale = match deriv {
        Deriv::First => 1.0 / h,
        Deriv::Second => 1.0 / (h * h),
    };
    let central: &[(i64, f64)] = match (deriv, order) {
        (Deriv::First, Order::Two) => &D1_C2,
        (Deriv::First, Order::Four) => &D1_C4,
        (Deriv::Second, Order::Two) => &D2_C2,
        (Deriv::Second, Order::Four) => &D2_C4,
    };
    let reach = order.reach();
    let ni = n as i64;
    let ji = j as i64;
    if periodic || (j >= reach && j + reach < n) {
        let pairs: Vec<(usize, f64)> = central
            .iter()
            .map(|&(o, w)| (((ji + o).rem_euclid(ni)) as usize, w * scale))
            .collect();
        return Taps::from_pairs(&pairs);
    }
    match edge {
        Edge::Reflect => {
            let pairs: Vec<(usize, f64)> = central
                .iter()
                .map(|&(o, w)| {
                    let mut p = ji + o;
                    if p < 0 {
                        p = -p;
                    } else if p >= ni {
                        p = 2 * (ni - 1) - p;
                    }
                    (p as usize, w * scale)
                })
                .collect();
            Taps::from_pairs(&pairs)
        }
        Edge::OneSided => {
            let rows: &[&[f64]] = match (deriv, order) {
                (Deriv::First, Order::Two) => &D1_W2,
                (Deriv::First, Order::Four) => &D1_W4,
                (Deriv::Second, Order::Two) => &D2_W2,
                (Deriv::Second, Order::Four) => &D2_W4,
            };
            let low = j < reach;
            let r = if low { j } else { n - 1 - j };
            let sign = if low || deriv == Deriv::Second { 1.0 } else { -1.0 };
            let pairs: Vec<(usize, f64)> = rows[r]
                .iter()
                .enumerate()
                .map(|(k, &w)| {
                    let node = if low { k } else { n - 1 - k };
                    (node, sign * w * scale)
                })
                .collect();
            Taps::from_pairs(&pairs)
        }
    }
}

#[derive(Debug, Clone)]
struct AxisTables {
    d1: Vec<Taps>,
    d2: Vec<Taps>,
    d2_reflect: Vec<Taps>,
}

/// Operator context: stencil tables for one domain and accuracy order.
#[derive(Debug, Clone)]
pub struct DiffOps {
    domain: Domain,
    stencil: Stencil,
    tables: Vec<AxisTables>,
}

impl DiffOps {
    pub fn new(domain: &Domain, stencil: Stencil) -> Self {
        let tables = domain
            .axes()
            .iter()
            .map(|ax| {
                let h = ax.spacing();
                let p = ax.is_periodic();
                let mk = |deriv, edge| {
                    (0..ax.nodes)
                        .map(|j| build_taps(ax.nodes, j, p, stencil.order, deriv, edge, h))
                        .collect::<Vec<_>>()
                };
                AxisTables {
                    d1: mk(Deriv::First, Edge::OneSided),
                    d2: mk(Deriv::Second, Edge::OneSided),
                    d2_reflect: mk(Deriv::Second, Edge::Reflect),
                }
            })
            .collect();
        Self {
            domain: domain.clone(),
            stencil,
            tables,
        }
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn stencil(&self) -> Stencil {
        self.stencil
    }

    #[inline]
    fn line(&self, k: usize, i: usize) -> (usize, usize, usize) {
        let j = self.domain.unflatten(i)[k];
        let stride = self.domain.stride(k);
        (j, i - j * stride, stride)
    }

    /// ∂f/∂x_k at node `i`.
    #[inline]
    pub fn d1_at<T: FieldValue>(&self, f: &[T], k: usize, i: usize) -> T {
        let (j, base, stride) = self.line(k, i);
        self.tables[k].d1[j].apply(f, base, stride)
    }

    /// ∂²f/∂x_k² at node `i`.
    #[inline]
    pub fn d2_at<T: FieldValue>(&self, f: &[T], k: usize, i: usize, edge: Edge) -> T {
        let (j, base, stride) = self.line(k, i);
        let t = match edge {
            Edge::OneSided => &self.tables[k].d2[j],
            Edge::Reflect => &self.tables[k].d2_reflect[j],
        };
        t.apply(f, base, stride)
    }

    pub fn partial<T: FieldValue>(&self, f: &[T], k: usize) -> Vec<T> {
        (0..f.len()).map(|i| self.d1_at(f, k, i)).collect()
    }

    pub fn gradient_scalar(&self, f: &[f64]) -> VectorField {
        VectorField {
            components: (0..self.domain.dim()).map(|k| self.partial(f, k)).collect(),
        }
    }

    pub fn divergence(&self, u: &VectorField) -> Vec<f64> {
        let n = self.domain.len();
        let mut out = vec![0.0; n];
        for (k, c) in u.components.iter().enumerate() {
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.d1_at(c, k, i);
            }
        }
        out
    }

    pub fn laplacian_scalar(&self, f: &[f64]) -> Vec<f64> {
        self.laplacian_with(f, Edge::OneSided)
    }

    /// Laplacian with an explicit wall closure.
    pub fn laplacian_with<T: FieldValue>(&self, f: &[T], edge: Edge) -> Vec<T> {
        (0..f.len())
            .map(|i| {
                (0..self.domain.dim()).fold(T::default(), |acc, k| acc + self.d2_at(f, k, i, edge))
            })
            .collect()
    }

    pub fn laplacian_vector(&self, u: &VectorField) -> VectorField {
        VectorField {
            components: u.components.iter().map(|c| self.laplacian_scalar(c)).collect(),
        }
    }

    /// Interpolates a nodal field at `pos` (linear for order 2, cubic for
    /// order 4). `None` outside a walled axis.
    pub fn interpolate(&self, f: &[f64], pos: [f64; 2]) -> Option<f64> {
        let (nodes, weights, count) = self.interp_stencil(pos)?;
        Some((0..count).map(|k| f[nodes[k]] * weights[k]).sum())
    }

    /// As [`interpolate`](Self::interpolate) for several fields at once,
    /// returning `None` as well when the stencil touches a masked node.
    pub fn interpolate_masked(
        &self,
        fields: &[&[f64]],
        mask: &[bool],
        pos: [f64; 2],
    ) -> Option<[f64; 2]> {
        let (nodes, weights, count) = self.interp_stencil(pos)?;
        if nodes[..count].iter().any(|&i| mask[i]) {
            return None;
        }
        let mut out = [0.0; 2];
        for (c, f) in fields.iter().enumerate() {
            out[c] = (0..count).map(|k| f[nodes[k]] * weights[k]).sum();
        }
        Some(out)
    }

    fn interp_stencil(&self, pos: [f64; 2]) -> Option<([usize; 16], [f64; 16], usize)> {
        let pos = self.domain.wrap(pos)?;
        let width = match self.stencil.order {
            Order::Two => 2,
            Order::Four => 4,
        };
        let mut per_axis: [([usize; 4], [f64; 4]); 2] = [([0; 4], [0.0; 4]); 2];
        for (k, ax) in self.domain.axes().iter().enumerate() {
            let h = ax.spacing();
            let s = pos[k] / h;
            let n = ax.nodes as i64;
            let mut j0 = s.floor() as i64;
            if !ax.is_periodic() {
                j0 = j0.clamp(0, n - 2);
            }
            let (first, pts): (i64, Vec<f64>) = if width == 2 {
                (j0, vec![0.0, 1.0])
            } else {
                let mut f = j0 - 1;
                if !ax.is_periodic() {
                    f = f.clamp(0, n - 4);
                }
                (f, (0..4).map(|m| (f + m - j0) as f64).collect())
            };
            let x = s - j0 as f64;
            for m in 0..width {
                // Lagrange basis through the stencil points
                let mut w = 1.0;
                for (q, &xq) in pts.iter().enumerate() {
                    if q != m {
                        w *= (x - xq) / (pts[m] - xq);
                    }
                }
                let node = (first + m as i64).rem_euclid(n) as usize;
                per_axis[k].0[m] = node;
                per_axis[k].1[m] = w;
            }
        }
        let mut nodes = [0usize; 16];
        let mut weights = [0.0; 16];
        let mut count = 0;
        if self.domain.dim() == 1 {
            for m in 0..width {
                nodes[m] = per_axis[0].0[m];
                weights[m] = per_axis[0].1[m];
            }
            count = width;
        } else {
            for my in 0..width {
                for mx in 0..width {
                    nodes[count] = self.domain.flatten([per_axis[0].0[mx], per_axis[1].0[my]]);
                    weights[count] = per_axis[0].1[mx] * per_axis[1].1[my];
                    count += 1;
                }
            }
        }
        Some((nodes, weights, count))
    }

    /// `Dψ = (-iħ∇ - (q/c)A)ψ`, one complex component per axis.
    pub fn covariant_gradient(
        &self,
        psi: &[Complex64],
        a: &VectorField,
        params: &PhysParams,
    ) -> Vec<Vec<Complex64>> {
        let g = params.coupling();
        let mi_hbar = Complex64::new(0.0, -params.hbar);
        (0..self.domain.dim())
            .map(|k| {
                (0..psi.len())
                    .map(|i| mi_hbar * self.d1_at(psi, k, i) - psi[i] * (g * a.components[k][i]))
                    .collect()
            })
            .collect()
    }

    /// Kinetic operator `(1/2m)(-iħ∇ - (q/c)A)² ψ`.
    ///
    /// Periodic axes use the symmetric form `∂(aψ) + a∂ψ` for the cross term.
    /// On walled axes the zero-current condition `(-iħ∂ₙ - aₙ)ψ = 0` supplies
    /// ghost values `ψ(-x) = ψ(x) - 2x ∂ₙψ(0)`.
    pub fn kinetic(&self, psi: &[Complex64], a: &VectorField, params: &PhysParams) -> Vec<Complex64> {
        let n = psi.len();
        let hbar = params.hbar;
        let g = params.coupling();
        let i_hbar = Complex64::new(0.0, hbar);
        let mut out = vec![Complex64::default(); n];
        for k in 0..self.domain.dim() {
            let ax = *self.domain.axis(k);
            let ak: Vec<f64> = a.components[k].iter().map(|x| g * x).collect();
            if ax.is_periodic() {
                let a_psi: Vec<Complex64> = psi.iter().zip(&ak).map(|(p, &av)| p * av).collect();
                for i in 0..n {
                    let d1 = self.d1_at(psi, k, i);
                    let d2 = self.d2_at(psi, k, i, Edge::OneSided);
                    let d_apsi = self.d1_at(&a_psi, k, i);
                    out[i] += d2 * (-hbar * hbar) + i_hbar * (d_apsi + d1 * ak[i]) + psi[i] * (ak[i] * ak[i]);
                }
            } else {
                self.kinetic_walled_axis(psi, &ak, k, hbar, &mut out);
            }
        }
        let inv_2m = 0.5 / params.mass;
        out.iter_mut().for_each(|z| *z *= inv_2m);
        out
    }

    fn kinetic_walled_axis(
        &self,
        psi: &[Complex64],
        ak: &[f64],
        k: usize,
        hbar: f64,
        out: &mut [Complex64],
    ) {
        let ax = *self.domain.axis(k);
        let h = ax.spacing();
        let nn = ax.nodes as i64;
        let i_hbar = Complex64::new(0.0, hbar);
        let i_over_hbar = Complex64::new(0.0, 1.0 / hbar);
        let (c1, c2): (&[(i64, f64)], &[(i64, f64)]) = match self.stencil.order {
            Order::Two => (&D1_C2, &D2_C2),
            Order::Four => (&D1_C4, &D2_C4),
        };
        for i in 0..psi.len() {
            let (j, base, stride) = self.line(k, i);
            let at = |p: i64| base + p as usize * stride;
            let wall_low = at(0);
            let wall_high = at(nn - 1);
            let get = |m: i64| -> Complex64 {
                let p = j as i64 + m;
                if p < 0 {
                    let dpsi = i_over_hbar * ak[wall_low] * psi[wall_low];
                    psi[at(-p)] - dpsi * (2.0 * (-p) as f64 * h)
                } else if p >= nn {
                    let q = p - (nn - 1);
                    let dpsi = i_over_hbar * ak[wall_high] * psi[wall_high];
                    psi[at(nn - 1 - q)] + dpsi * (2.0 * q as f64 * h)
                } else {
                    psi[at(p)]
                }
            };
            let d1 = c1.iter().fold(Complex64::default(), |s, &(o, w)| s + get(o) * w) / h;
            let d2 = c2.iter().fold(Complex64::default(), |s, &(o, w)| s + get(o) * w) / (h * h);
            let da = self.d1_at(ak, k, i);
            out[i] += d2 * (-hbar * hbar) + i_hbar * (d1 * (2.0 * ak[i]) + psi[i] * da) + psi[i] * (ak[i] * ak[i]);
        }
    }

    /// Density floor `ε · max|ψ|²` and the mask of nodes at or below it.
    pub fn density_mask(&self, rho: &[f64]) -> (f64, Vec<bool>) {
        let max = rho.iter().cloned().fold(0.0, f64::max);
        let floor = self.stencil.epsilon_rho * max;
        let mask = rho.iter().map(|&r| max == 0.0 || r <= floor).collect();
        (floor, mask)
    }

    /// Mask grown by the stencil reach, for quantities that differentiate
    /// masked fields.
    pub fn dilate_mask(&self, mask: &[bool]) -> Vec<bool> {
        let reach = self.stencil.order.reach() as i64;
        let mut out = mask.to_vec();
        for (i, &m) in mask.iter().enumerate() {
            if !m {
                continue;
            }
            let idx = self.domain.unflatten(i);
            for k in 0..self.domain.dim() {
                let ax = self.domain.axis(k);
                for o in -reach..=reach {
                    let p = idx[k] as i64 + o;
                    let p = if ax.is_periodic() {
                        p.rem_euclid(ax.nodes as i64)
                    } else if p < 0 || p >= ax.nodes as i64 {
                        continue;
                    } else {
                        p
                    };
                    let mut q = idx;
                    q[k] = p as usize;
                    out[self.domain.flatten(q)] = true;
                }
            }
        }
        out
    }

    /// Guidance velocity `v = (ħ Im(ψ*∇ψ)/|ψ|² - (q/c)A)/m` with the density
    /// floor; no phase unwrapping is involved.
    pub fn velocity_field(&self, psi: &[Complex64], a: &VectorField, params: &PhysParams) -> VelocityField {
        let rho: Vec<f64> = psi.iter().map(|z| z.norm_sqr()).collect();
        let (floor, mask) = self.density_mask(&rho);
        let g = params.coupling();
        let mut v = VectorField::zeros(self.domain.dim(), psi.len());
        for k in 0..self.domain.dim() {
            for i in 0..psi.len() {
                if mask[i] {
                    continue;
                }
                let current = (psi[i].conj() * self.d1_at(psi, k, i)).im;
                v.components[k][i] =
                    (params.hbar * current / rho[i].max(floor) - g * a.components[k][i]) / params.mass;
            }
        }
        VelocityField { v, mask }
    }

    pub fn velocity_of(&self, state: &FieldState, params: &PhysParams) -> VelocityField {
        self.velocity_field(&state.psi, &state.a, params)
    }
}

/// Velocity with the mask of density-floored nodes (true = no pairs there).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub v: VectorField,
    pub mask: Vec<bool>,
}
