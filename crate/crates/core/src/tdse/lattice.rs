//! Lattice geometry, Dirichlet masks and Peierls link phases.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{PhysicalConstants, VectorPotential};
use crate::geometry::Scene;
use crate::tdse::field::Field;
use crate::vec2::Vec2;

/// Finite-difference order of the kinetic operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// 5-point Laplacian.
    SecondOrder,
    /// 9-point (nearest and next-nearest along each axis) Laplacian.
    #[default]
    FourthOrder,
}

fn default_tolerance() -> f64 {
    1e-12
}

/// Grid shape, spacing, placement and time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub nx: usize,
    pub ny: usize,
    pub spacing: f64,
    /// Position of site (0, 0).
    pub origin: Vec2,
    pub dt: f64,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub stencil: Stencil,
    /// Relative residual at which each linear solve stops.
    #[serde(default = "default_tolerance")]
    pub solver_tolerance: f64,
}

impl LatticeSpec {
    pub fn new(nx: usize, ny: usize, spacing: f64, origin: Vec2, dt: f64) -> Self {
        Self {
            nx,
            ny,
            spacing,
            origin,
            dt,
            constants: PhysicalConstants::default(),
            stencil: Stencil::FourthOrder,
            solver_tolerance: default_tolerance(),
        }
    }

    /// Square grid of `n` sites per side centered on `center`.
    pub fn centered(n: usize, spacing: f64, center: Vec2, dt: f64) -> Self {
        let half = 0.5 * (n as f64 - 1.0) * spacing;
        Self::new(n, n, spacing, center - Vec2::new(half, half), dt)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.ny < 16 {
            return Err(Error::InvalidInput("lattice needs at least 16 sites per side".into()));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) || !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidInput("spacing and dt must be positive".into()));
        }
        if !(self.solver_tolerance > 0.0 && self.solver_tolerance < 1e-6) {
            return Err(Error::InvalidInput("solver_tolerance must lie in (0, 1e-6)".into()));
        }
        if !self.origin.is_finite() {
            return Err(Error::InvalidInput("origin is not finite".into()));
        }
        self.constants.validate()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn position(&self, i: usize, j: usize) -> Vec2 {
        self.origin + Vec2::new(i as f64 * self.spacing, j as f64 * self.spacing)
    }

    pub fn position_of(&self, k: usize) -> Vec2 {
        self.position(k % self.nx, k / self.nx)
    }

    /// Upper-right corner.
    pub fn extent_max(&self) -> Vec2 {
        self.position(self.nx - 1, self.ny - 1)
    }

    /// Kinetic prefactor ħ²/(2m Δx²).
    pub fn hopping_scale(&self) -> f64 {
        let c = self.constants;
        c.hbar * c.hbar / (2.0 * c.mass * self.spacing * self.spacing)
    }

    /// Same grid with a different time step.
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = dt;
        self
    }
}

/// A discretized domain: mask, link phases, potential energy.
///
/// `link_x[k]` is the phase of the edge from site k to its +x neighbor and
/// `link_y[k]` of the edge to its +y neighbor; reversed edges carry the
/// negated phase. Edges are active when both endpoints are unmasked and the
/// edge does not cross an obstacle.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    spec: LatticeSpec,
    mask: Vec<bool>,
    link_x: Vec<f64>,
    link_y: Vec<f64>,
    blocked_x: Vec<bool>,
    blocked_y: Vec<bool>,
    potential_energy: Vec<f64>,
}

impl Lattice {
    /// Assembles a lattice from raw parts. Edge blocking defaults to none.
    pub fn from_parts(
        spec: LatticeSpec,
        mask: Vec<bool>,
        link_x: Vec<f64>,
        link_y: Vec<f64>,
        potential_energy: Vec<f64>,
    ) -> Result<Self> {
        spec.validate()?;
        let n = spec.len();
        if mask.len() != n || link_x.len() != n || link_y.len() != n || potential_energy.len() != n {
            return Err(Error::GridMismatch("lattice part sizes differ from the grid".into()));
        }
        Ok(Self {
            spec,
            mask,
            link_x,
            link_y,
            blocked_x: vec![false; n],
            blocked_y: vec![false; n],
            potential_energy,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn link_x(&self) -> &[f64] {
        &self.link_x
    }

    pub fn link_y(&self) -> &[f64] {
        &self.link_y
    }

    pub fn potential_energy(&self) -> &[f64] {
        &self.potential_energy
    }

    pub fn active_sites(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn edge_x_active(&self, k: usize) -> bool {
        let nx = self.spec.nx;
        k % nx + 1 < nx && self.mask[k] && self.mask[k + 1] && !self.blocked_x[k]
    }

    pub fn edge_y_active(&self, k: usize) -> bool {
        let nx = self.spec.nx;
        k / nx + 1 < self.spec.ny && self.mask[k] && self.mask[k + nx] && !self.blocked_y[k]
    }

    /// Same lattice with another mask; edge blocking by obstacles is kept.
    pub fn with_mask(&self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.spec.len() {
            return Err(Error::GridMismatch("mask size differs from the grid".into()));
        }
        let mut out = self.clone();
        out.mask = mask;
        Ok(out)
    }

    /// Same lattice with a new per-site potential energy.
    pub fn with_potential_energy(&self, energy: Vec<f64>) -> Result<Self> {
        if energy.len() != self.spec.len() {
            return Err(Error::GridMismatch("potential size differs from the grid".into()));
        }
        let mut out = self.clone();
        out.potential_energy = energy;
        Ok(out)
    }

    /// Same lattice with another time step.
    pub fn with_dt(&self, dt: f64) -> Result<Self> {
        let mut out = self.clone();
        out.spec.dt = dt;
        out.spec.validate()?;
        Ok(out)
    }

    /// Oriented phase sum around the unit cell with lower-left corner (i, j).
    pub fn plaquette_phase(&self, i: usize, j: usize) -> f64 {
        let k = self.spec.index(i, j);
        let nx = self.spec.nx;
        self.link_x[k] + self.link_y[k + 1] - self.link_x[k + nx] - self.link_y[k]
    }

    /// Sum of plaquette phases over cells with lower-left corners in
    /// [i0, i1) x [j0, j1): the phase around that rectangle's boundary.
    pub fn region_phase(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> f64 {
        let mut s = 0.0;
        for j in j0..j1 {
            for i in i0..i1 {
                s += self.plaquette_phase(i, j);
            }
        }
        s
    }

    /// Site indices whose positions satisfy `pred`.
    pub fn sites_where<F: Fn(Vec2) -> bool>(&self, pred: F) -> Vec<usize> {
        (0..self.spec.len())
            .filter(|&k| pred(self.spec.position_of(k)))
            .collect()
    }
}

/// Discretizes `scene` with Peierls links from `potential`.
///
/// Sites in closed obstacle disks and on the outermost ring are masked.
/// Link phases use the closed-form edge integral where the potential has
/// one and the midpoint rule for any remaining terms.
pub fn build_lattice(
    scene: &Scene,
    potential: &VectorPotential,
    spec: LatticeSpec,
    potential_fn: Option<&dyn Fn(Vec2) -> f64>,
) -> Result<Lattice> {
    spec.validate()?;
    let (nx, ny, dx) = (spec.nx, spec.ny, spec.spacing);
    let b = scene.bound();
    let lo = spec.origin;
    let hi = spec.extent_max();
    let slack = 1e-9 * dx;
    if lo.x > b.min.x + slack || lo.y > b.min.y + slack || hi.x < b.max.x - slack || hi.y < b.max.y - slack {
        return Err(Error::InvalidInput("lattice does not cover the scene bound".into()));
    }
    for (j, d) in scene.obstacles().iter().enumerate() {
        if 2.0 * d.radius < 2.0 * dx {
            return Err(Error::Resolution(format!(
                "obstacle {j} of diameter {} is thinner than two lattice spacings",
                2.0 * d.radius
            )));
        }
    }
    let n = spec.len();
    let in_disk = |p: Vec2| scene.obstacles().iter().any(|d| (p - d.center).norm() <= d.radius);
    let mut solid = vec![false; n];
    let mut mask = vec![false; n];
    for j in 0..ny {
        for i in 0..nx {
            let k = spec.index(i, j);
            solid[k] = in_disk(spec.position(i, j));
            let ring = i == 0 || j == 0 || i == nx - 1 || j == ny - 1;
            mask[k] = !ring && !solid[k];
        }
    }
    let mut link_x = vec![0.0; n];
    let mut link_y = vec![0.0; n];
    let mut blocked_x = vec![false; n];
    let mut blocked_y = vec![false; n];
    let near_obstacle = |p: Vec2| {
        scene
            .obstacles()
            .iter()
            .any(|d| (p - d.center).norm() <= d.radius + 1.5 * dx)
    };
    for j in 0..ny {
        for i in 0..nx {
            let k = spec.index(i, j);
            if solid[k] {
                continue;
            }
            let a = spec.position(i, j);
            if i + 1 < nx && !solid[k + 1] {
                let e = spec.position(i + 1, j);
                link_x[k] = potential.edge_phase(a, e);
                blocked_x[k] = near_obstacle(a) && scene.segment_blocked(a, e).is_some();
            }
            if j + 1 < ny && !solid[k + nx] {
                let e = spec.position(i, j + 1);
                link_y[k] = potential.edge_phase(a, e);
                blocked_y[k] = near_obstacle(a) && scene.segment_blocked(a, e).is_some();
            }
        }
    }
    let charge = spec.constants.charge;
    let potential_energy = match potential_fn {
        Some(v) => (0..n)
            .map(|k| if mask[k] { charge * v(spec.position_of(k)) } else { 0.0 })
            .collect(),
        None => vec![0.0; n],
    };
    Ok(Lattice {
        spec,
        mask,
        link_x,
        link_y,
        blocked_x,
        blocked_y,
        potential_energy,
    })
}

/// Applies the discrete gauge transformation ψ → e^{iφ}ψ,
/// θ(a→b) → θ(a→b) + φ(b) − φ(a).
pub fn lattice_gauge_transform(lattice: &Lattice, field: &Field, phase: &[f64]) -> Result<(Lattice, Field)> {
    let spec = lattice.spec;
    if phase.len() != spec.len() || field.len() != spec.len() {
        return Err(Error::GridMismatch("phase or field size differs from the lattice".into()));
    }
    let nx = spec.nx;
    let mut out = lattice.clone();
    for k in 0..spec.len() {
        if k % nx + 1 < nx {
            out.link_x[k] += phase[k + 1] - phase[k];
        }
        if k / nx + 1 < spec.ny {
            out.link_y[k] += phase[k + nx] - phase[k];
        }
    }
    let mut f = field.clone();
    for (v, &p) in f.values_mut().iter_mut().zip(phase) {
        *v *= num_complex::Complex64::from_polar(1.0, p);
    }
    Ok((out, f))
}
