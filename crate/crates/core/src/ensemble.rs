//! Discrete pair ensemble: advection along the guidance velocity, and pair
//! creation/destruction driven by the depairing potential.
//!
//! One computational particle stands for `sigma` pairs, so every `ħ`
//! threshold of the event model is scaled by `sigma`.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Domain, DomainKind};
use crate::ops::{DiffOps, VelocityField};

/// Smallest ensemble `init_ensemble` accepts.
pub const MIN_PARTICLES: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnsembleError {
    #[error("density integrates to zero; there is nothing to sample")]
    Empty,
    #[error("ensemble would hold {count} particles, below the statistical floor of {MIN_PARTICLES}")]
    TooFew { count: usize },
    #[error("invalid ensemble configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub id: u64,
    /// Domain coordinates (arc length on a ring).
    pub pos: [f64; 2],
    /// Set when the last advection step left the particle in place because
    /// its interpolation stencil touched a density-floored node.
    pub frozen: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Create,
    Destroy,
    /// Destruction requested while no particle exists.
    Starved,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Create => "create",
            EventKind::Destroy => "destroy",
            EventKind::Starved => "starved",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "create" => Some(EventKind::Create),
            "destroy" => Some(EventKind::Destroy),
            "starved" => Some(EventKind::Starved),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    pub cell_id: usize,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairEnsemble {
    pub particles: Vec<Particle>,
    pub sigma: f64,
    pub events: Vec<Event>,
    next_id: u64,
}

/// Draws `round(∫|ψ|² dV / sigma)` particles from the normalized density.
/// A node is picked with probability proportional to `ρ_i w_i`, then the
/// position is uniform inside that node's cell.
pub fn init_ensemble(rho: &[f64], domain: &Domain, sigma: f64, seed: u64) -> Result<PairEnsemble, EnsembleError> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(EnsembleError::Config(format!("sigma must be positive, got {sigma}")));
    }
    let weights: Vec<f64> = rho
        .iter()
        .enumerate()
        .map(|(i, r)| if r.is_finite() { r.max(0.0) * domain.node_weight(i) } else { 0.0 })
        .collect();
    let mass: f64 = weights.iter().sum();
    if mass <= 0.0 {
        return Err(EnsembleError::Empty);
    }
    let count = (mass / sigma).round() as usize;
    if count < MIN_PARTICLES {
        return Err(EnsembleError::TooFew { count });
    }
    let pick = WeightedIndex::new(&weights).map_err(|_| EnsembleError::Empty)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let particles = (0..count as u64)
        .map(|id| {
            let node = pick.sample(&mut rng);
            Particle {
                id,
                pos: jitter_in_cell(domain, node, &mut rng),
                frozen: false,
            }
        })
        .collect();
    Ok(PairEnsemble {
        particles,
        sigma,
        events: Vec::new(),
        next_id: count as u64,
    })
}

fn jitter_in_cell(domain: &Domain, node: usize, rng: &mut impl Rng) -> [f64; 2] {
    let c = domain.coords(node);
    let idx = domain.unflatten(node);
    let mut out = [0.0; 2];
    for (k, ax) in domain.axes().iter().enumerate() {
        let h = ax.spacing();
        let (mut lo, mut hi) = (c[k] - 0.5 * h, c[k] + 0.5 * h);
        if !ax.is_periodic() {
            if idx[k] == 0 {
                lo = 0.0;
            }
            if idx[k] + 1 == ax.nodes {
                hi = ax.length;
            }
        }
        let x = lo + (hi - lo) * rng.gen::<f64>();
        out[k] = ax.wrap(x).unwrap_or(c[k]);
    }
    out
}

impl PairEnsemble {
    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn frozen_count(&self) -> usize {
        self.particles.iter().filter(|p| p.frozen).count()
    }

    /// Midpoint step through the velocity interpolated at the start and end
    /// of the interval: `x + dt·v̄(x + ½dt·v₀(x))` with `v̄ = ½(v₀ + v₁)`.
    /// Particles whose stencil touches a floored node stay put and are
    /// flagged.
    pub fn advect(&mut self, ops: &DiffOps, v_now: &VelocityField, v_next: &VelocityField, dt: f64) {
        let domain = ops.domain();
        let dim = domain.dim();
        let f0: Vec<&[f64]> = v_now.v.components.iter().map(|c| c.as_slice()).collect();
        let f1: Vec<&[f64]> = v_next.v.components.iter().map(|c| c.as_slice()).collect();
        let mask: Vec<bool> = v_now.mask.iter().zip(&v_next.mask).map(|(a, b)| *a || *b).collect();
        self.particles.par_iter_mut().for_each(|p| {
            let step = || -> Option<[f64; 2]> {
                let v0 = ops.interpolate_masked(&f0, &mask, p.pos)?;
                let mut mid = p.pos;
                for k in 0..dim {
                    mid[k] += 0.5 * dt * v0[k];
                }
                let mid = domain.wrap(mid)?;
                let a = ops.interpolate_masked(&f0, &mask, mid)?;
                let b = ops.interpolate_masked(&f1, &mask, mid)?;
                let mut end = p.pos;
                for k in 0..dim {
                    end[k] += dt * 0.5 * (a[k] + b[k]);
                }
                domain.wrap(end)
            };
            match step() {
                Some(x) => {
                    p.pos = x;
                    p.frozen = false;
                }
                None => p.frozen = true,
            }
        });
    }

    fn create(&mut self, t: f64, cell_id: usize, position: [f64; 2]) {
        self.particles.push(Particle {
            id: self.next_id,
            pos: position,
            frozen: false,
        });
        self.next_id += 1;
        self.events.push(Event {
            t,
            kind: EventKind::Create,
            cell_id,
            position,
        });
    }

    /// Removes the particle nearest to `center` (minimum image; ties go to
    /// the lowest id).
    fn destroy_nearest(&mut self, domain: &Domain, t: f64, cell_id: usize, center: [f64; 2]) {
        let nearest = self
            .particles
            .iter()
            .enumerate()
            .map(|(k, p)| (domain.distance_sq(p.pos, center), p.id, k))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        match nearest {
            Some((_, _, k)) => {
                self.particles.swap_remove(k);
                self.events.push(Event {
                    t,
                    kind: EventKind::Destroy,
                    cell_id,
                    position: center,
                });
            }
            None => self.events.push(Event {
                t,
                kind: EventKind::Starved,
                cell_id,
                position: center,
            }),
        }
    }

    /// One creation per negative cell at its center, one destruction per
    /// positive cell. Returns the number of events logged.
    pub fn apply_events(&mut self, domain: &Domain, partition: &CellPartition, t: f64) -> usize {
        let before = self.events.len();
        for (id, cell) in partition.cells.iter().enumerate() {
            if cell.integral < 0.0 {
                self.create(t, id, cell.center);
            } else {
                self.destroy_nearest(domain, t, id, cell.center);
            }
        }
        // keep particle order independent of swap_remove history
        self.particles.sort_unstable_by_key(|p| p.id);
        self.events.len() - before
    }

    /// Applies the crossings reported by [`FixedCells::accumulate`].
    pub fn apply_fixed(&mut self, domain: &Domain, crossings: &[Crossing], t: f64) -> usize {
        let before = self.events.len();
        for c in crossings {
            if c.create {
                self.create(t, c.cell_id, c.center);
            } else {
                self.destroy_nearest(domain, t, c.cell_id, c.center);
            }
        }
        self.particles.sort_unstable_by_key(|p| p.id);
        self.events.len() - before
    }
}

/// A node, or part of one, assigned to a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Share {
    pub node: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub members: Vec<Share>,
    /// `∫ Q_dep |ψ|² dV` over the cell; `±ħσ/τ` by construction.
    pub integral: f64,
    pub center: [f64; 2],
}

impl Cell {
    pub fn sign(&self) -> i8 {
        if self.integral < 0.0 {
            -1
        } else {
            1
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellPartition {
    pub cells: Vec<Cell>,
    /// Left out of every cell, including zero and non-finite nodes.
    pub marginal: Vec<Share>,
    /// `ħσ/τ`.
    pub threshold: f64,
}

impl CellPartition {
    pub fn creations(&self) -> usize {
        self.cells.iter().filter(|c| c.integral < 0.0).count()
    }

    pub fn destructions(&self) -> usize {
        self.cells.len() - self.creations()
    }
}

/// Node visiting order: ring order, or boustrophedon rows on a grid. On a
/// ring whose first and last nodes share a sign, the path starts where that
/// wrapping run begins so the run is not cut at node 0.
pub fn sweep_path(domain: &Domain, sign: &[i8]) -> Vec<usize> {
    let n = domain.len();
    match domain.kind() {
        DomainKind::Ring1D => {
            let s0 = sign[0];
            let mut start = 0;
            if s0 != 0 && sign[n - 1] == s0 && sign.iter().any(|&s| s != s0) {
                start = n - 1;
                while sign[start - 1] == s0 {
                    start -= 1;
                }
            }
            (0..n).map(|k| (start + k) % n).collect()
        }
        DomainKind::Grid2D => {
            let nx = domain.axis(0).nodes;
            let ny = domain.axis(1).nodes;
            let mut path = Vec::with_capacity(n);
            for y in 0..ny {
                if y % 2 == 0 {
                    path.extend((0..nx).map(|x| domain.flatten([x, y])));
                } else {
                    path.extend((0..nx).rev().map(|x| domain.flatten([x, y])));
                }
            }
            path
        }
    }
}

/// Volume-weighted centroid with minimum-image offsets from the first member.
fn centroid(domain: &Domain, members: &[Share]) -> [f64; 2] {
    let origin = domain.coords(members[0].node);
    let mut acc = [0.0; 2];
    let mut wsum = 0.0;
    for s in members {
        let w = s.fraction * domain.node_weight(s.node);
        let c = domain.coords(s.node);
        for (k, ax) in domain.axes().iter().enumerate() {
            acc[k] += w * ax.separation(origin[k], c[k]);
        }
        wsum += w;
    }
    let mut out = origin;
    for k in 0..domain.dim() {
        out[k] += acc[k] / wsum;
    }
    domain.wrap(out).unwrap_or(origin)
}

/// Partitions the domain into depairing cells of `|∫Q_dep|ψ|²dV| = ħσ/τ`.
///
/// The sweep path is cut into maximal runs of one sign; each run is swept
/// accumulating `|Q_dep|ψ|²| w_i` and a cell closes exactly at the
/// threshold, splitting the node where it is crossed. What is left of each
/// run is marginal.
pub fn build_cells(q_dep_density: &[f64], domain: &Domain, tau: f64, sigma: f64, hbar: f64) -> CellPartition {
    let threshold = hbar * sigma / tau;
    let sign: Vec<i8> = q_dep_density
        .iter()
        .map(|&x| {
            if !x.is_finite() || x == 0.0 {
                0
            } else if x > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect();
    let path = sweep_path(domain, &sign);
    let mut cells = Vec::new();
    let mut marginal = Vec::new();
    let mut k = 0;
    while k < path.len() {
        let s = sign[path[k]];
        if s == 0 {
            marginal.push(Share { node: path[k], fraction: 1.0 });
            k += 1;
            continue;
        }
        let mut current: Vec<Share> = Vec::new();
        let mut acc = 0.0;
        while k < path.len() && sign[path[k]] == s {
            let node = path[k];
            let mut left = 1.0;
            let full = q_dep_density[node].abs() * domain.node_weight(node);
            while left > 0.0 {
                let avail = full * left;
                if acc + avail < threshold {
                    acc += avail;
                    current.push(Share { node, fraction: left });
                    left = 0.0;
                } else {
                    let take = (threshold - acc) / full;
                    current.push(Share { node, fraction: take });
                    left -= take;
                    let members = std::mem::take(&mut current);
                    cells.push(Cell {
                        center: centroid(domain, &members),
                        members,
                        integral: s as f64 * threshold,
                    });
                    acc = 0.0;
                    if left <= 1e-14 {
                        left = 0.0;
                    }
                }
            }
            k += 1;
        }
        marginal.extend(current);
    }
    CellPartition { cells, marginal, threshold }
}

/// Expected cells per check `|∫Q_dep|ψ|²dV|·τ/(ħσ)`; a warning when cells
/// shrink to a few nodes and the construction stops resolving the field.
pub fn continuum_guard(q_dep_density: &[f64], domain: &Domain, tau: f64, sigma: f64, hbar: f64) -> Option<String> {
    let total: f64 = q_dep_density
        .iter()
        .enumerate()
        .filter(|(_, x)| x.is_finite())
        .map(|(i, x)| x.abs() * domain.node_weight(i))
        .sum();
    let cells = total * tau / (hbar * sigma);
    let limit = domain.len() as f64 / 4.0;
    (cells > limit).then(|| format!("{cells:.1} cells per check on {} nodes; reduce tau or raise sigma", domain.len()))
}

/// Fixed cell geometry: equal arcs on a ring, rectangular blocks on a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixedGeometry {
    pub cells_x: usize,
    #[serde(default = "one")]
    pub cells_y: usize,
}

fn one() -> usize {
    1
}

/// One threshold crossing of a fixed cell's running integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub cell_id: usize,
    pub center: [f64; 2],
    pub create: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedCells {
    /// Cell index of every node.
    owner: Vec<usize>,
    pub centers: Vec<[f64; 2]>,
    /// Running `∫∫ Q_dep |ψ|² dV dt` per cell.
    pub accumulators: Vec<f64>,
    /// `ħσ`.
    pub threshold: f64,
}

impl FixedCells {
    pub fn new(domain: &Domain, geometry: FixedGeometry, sigma: f64, hbar: f64) -> Result<Self, EnsembleError> {
        let cy = if domain.dim() == 1 { 1 } else { geometry.cells_y };
        if geometry.cells_x == 0 || cy == 0 {
            return Err(EnsembleError::Config("fixed cell counts must be ≥ 1".into()));
        }
        let counts = [geometry.cells_x, cy];
        for k in 0..domain.dim() {
            if counts[k] > domain.axis(k).nodes {
                return Err(EnsembleError::Config(format!(
                    "{} fixed cells along axis {k} exceed its {} nodes",
                    counts[k],
                    domain.axis(k).nodes
                )));
            }
        }
        let owner: Vec<usize> = (0..domain.len())
            .map(|i| {
                let idx = domain.unflatten(i);
                let mut c = [0usize; 2];
                for k in 0..domain.dim() {
                    c[k] = idx[k] * counts[k] / domain.axis(k).nodes;
                }
                c[0] + counts[0] * c[1]
            })
            .collect();
        let n_cells = counts[0] * cy;
        let mut members = vec![Vec::new(); n_cells];
        for (i, &o) in owner.iter().enumerate() {
            members[o].push(Share { node: i, fraction: 1.0 });
        }
        let centers = members.iter().map(|m| centroid(domain, m)).collect();
        Ok(Self {
            owner,
            centers,
            accumulators: vec![0.0; n_cells],
            threshold: hbar * sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// Adds `dt · ∫_cell Q_dep|ψ|² dV` to every cell and reports each
    /// crossing of `±ħσ`; the remainder is kept.
    pub fn accumulate(&mut self, domain: &Domain, q_dep_density: &[f64], dt: f64) -> Vec<Crossing> {
        for (i, x) in q_dep_density.iter().enumerate() {
            if x.is_finite() {
                self.accumulators[self.owner[i]] += dt * x * domain.node_weight(i);
            }
        }
        let mut out = Vec::new();
        for (c, acc) in self.accumulators.iter_mut().enumerate() {
            while *acc <= -self.threshold {
                *acc += self.threshold;
                out.push(Crossing { cell_id: c, center: self.centers[c], create: true });
            }
            while *acc >= self.threshold {
                *acc -= self.threshold;
                out.push(Crossing { cell_id: c, center: self.centers[c], create: false });
            }
        }
        out
    }
}

/// Histogram of the ensemble against `|ψ|²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackingReport {
    pub particles: usize,
    /// `∫|ψ|² dV / sigma`.
    pub expected_total: f64,
    pub bins: usize,
    /// Bins with at least [`TRACKING_MIN_EXPECTED`] expected particles.
    pub bins_used: usize,
    pub counts: Vec<usize>,
    pub expected: Vec<f64>,
    /// `max |n_b - e_b| / e_b`.
    pub sup_relative: f64,
    /// `(Σ (n_b - e_b)² / Σ e_b²)^{1/2}`.
    pub l2_relative: f64,
    /// `max sqrt(N p_b (1 - p_b)) / e_b` for the current count `N`.
    pub sampling_noise: f64,
}

impl TrackingReport {
    /// `sup_relative ≤ factor · sampling_noise`.
    pub fn within(&self, factor: f64) -> bool {
        self.bins_used > 0 && self.sup_relative <= factor * self.sampling_noise
    }
}

pub const TRACKING_MIN_EXPECTED: f64 = 25.0;

/// Bins are contiguous blocks of nodes: `bins` arcs on a ring, a
/// `bins × bins` block grid in 2D.
pub fn density_tracking_report(ensemble: &PairEnsemble, rho: &[f64], domain: &Domain, bins: usize) -> TrackingReport {
    let geometry = FixedGeometry { cells_x: bins.max(1), cells_y: bins.max(1) };
    let blocks = FixedCells::new(domain, geometry, 1.0, 1.0).unwrap_or_else(|_| {
        FixedCells::new(domain, FixedGeometry { cells_x: 1, cells_y: 1 }, 1.0, 1.0).expect("single block")
    });
    let nb = blocks.len();
    let mut expected = vec![0.0; nb];
    for (i, r) in rho.iter().enumerate() {
        if r.is_finite() {
            expected[blocks.owner[i]] += r * domain.node_weight(i) / ensemble.sigma;
        }
    }
    let mut counts = vec![0usize; nb];
    for p in &ensemble.particles {
        counts[blocks.owner[domain.nearest_node(p.pos)]] += 1;
    }
    let total: f64 = expected.iter().sum();
    let n = ensemble.len() as f64;
    let mut sup = 0.0f64;
    let mut noise = 0.0f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut used = 0;
    for b in 0..nb {
        let e = expected[b];
        let d = counts[b] as f64 - e;
        num += d * d;
        den += e * e;
        if e < TRACKING_MIN_EXPECTED {
            continue;
        }
        used += 1;
        sup = sup.max(d.abs() / e);
        let p = e / total;
        noise = noise.max((n * p * (1.0 - p)).sqrt() / e);
    }
    TrackingReport {
        particles: ensemble.len(),
        expected_total: total,
        bins: nb,
        bins_used: used,
        counts,
        expected,
        sup_relative: sup,
        l2_relative: if den > 0.0 { (num / den).sqrt() } else { 0.0 },
        sampling_noise: noise,
    }
}
