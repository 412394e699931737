//! Curl-free vector potentials realizing prescribed obstacle fluxes, gauge
//! phases along paths, loop fluxes, gauge transforms, the spacetime
//! electromagnetic flux and the stationary-metric (gravitational) flux.
//!
//! All phases are dimensionless: a line integral returns (e/ħc)∫A·dx.

use std::cell::Cell;
use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{check_unit, Disk, Scene};
use crate::path::{Loop, Path, Segment};
use crate::quadrature::integrate_breakpoints;
use crate::vec2::Vec2;

/// Physical constants; the default is natural units with every value 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub mass: f64,
    pub charge: f64,
    pub light_speed: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            hbar: 1.0,
            mass: 1.0,
            charge: 1.0,
            light_speed: 1.0,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("hbar", self.hbar),
            ("mass", self.mass),
            ("charge", self.charge),
            ("light_speed", self.light_speed),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive and finite")));
            }
        }
        Ok(())
    }

    /// e/(ħc): converts ∫A·dx into a dimensionless phase.
    pub fn phase_per_potential(&self) -> f64 {
        self.charge / (self.hbar * self.light_speed)
    }

    /// ħc/e: converts a phase gradient into a vector potential.
    pub fn potential_per_phase(&self) -> f64 {
        self.hbar * self.light_speed / self.charge
    }
}

pub type ScalarField = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

/// Addition of (ħc/e)∇φ for a single-valued dimensionless phase φ.
#[derive(Clone)]
pub struct GaugeTerm {
    pub phase: ScalarField,
    pub grad: VectorField,
    /// When set, φ vanishes outside the disk `(center, radius)`.
    pub support: Option<(Vec2, f64)>,
}

impl GaugeTerm {
    pub fn new(phase: ScalarField, grad: VectorField) -> Self {
        Self {
            phase,
            grad,
            support: None,
        }
    }

    pub fn with_support(mut self, center: Vec2, radius: f64) -> Self {
        self.support = Some((center, radius));
        self
    }
}

/// Ingredient of a [`VectorPotential`].
#[derive(Clone)]
pub enum Term {
    /// Point solenoid at `center` enclosing flux `flux` (radians).
    Solenoid { center: Vec2, flux: f64 },
    Gauge(GaugeTerm),
    /// Arbitrary field in potential units. Has no closed-form edge phase and
    /// no tail bound; mainly for tests with nonzero field strength.
    Custom(VectorField),
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Solenoid { center, flux } => f
                .debug_struct("Solenoid")
                .field("center", center)
                .field("flux", flux)
                .finish(),
            Term::Gauge(g) => f.debug_struct("Gauge").field("support", &g.support).finish(),
            Term::Custom(_) => f.write_str("Custom"),
        }
    }
}

/// Evaluatable vector potential with solenoid metadata.
#[derive(Clone, Debug)]
pub struct VectorPotential {
    constants: PhysicalConstants,
    terms: Vec<Term>,
    /// Regions where A is not defined (the shielded obstacle interiors).
    excluded: Vec<Disk>,
}

impl VectorPotential {
    /// Potential that vanishes identically, with no excluded regions.
    pub fn zero(constants: PhysicalConstants) -> Self {
        Self {
            constants,
            terms: Vec::new(),
            excluded: Vec::new(),
        }
    }

    /// Arbitrary smooth field, defined everywhere.
    pub fn custom(constants: PhysicalConstants, field: VectorField) -> Self {
        Self {
            constants,
            terms: vec![Term::Custom(field)],
            excluded: Vec::new(),
        }
    }

    pub fn constants(&self) -> PhysicalConstants {
        self.constants
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// (center, flux) for every solenoid.
    pub fn solenoids(&self) -> Vec<(Vec2, f64)> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Solenoid { center, flux } => Some((*center, *flux)),
                _ => None,
            })
            .collect()
    }

    pub fn excluded(&self) -> &[Disk] {
        &self.excluded
    }

    pub fn with_term(mut self, term: Term) -> Self {
        self.terms.push(term);
        self
    }

    pub fn check_point(&self, p: Vec2) -> Result<()> {
        if let Some(i) = self.excluded.iter().position(|d| d.contains_interior(p)) {
            return Err(Error::Domain(format!(
                "potential is not defined inside obstacle {i} at ({}, {})",
                p.x, p.y
            )));
        }
        Ok(())
    }

    /// A(p) in potential units; domain error inside an obstacle.
    pub fn eval(&self, p: Vec2) -> Result<Vec2> {
        self.check_point(p)?;
        Ok(self.eval_unchecked(p))
    }

    /// A(p) without the obstacle check.
    pub fn eval_unchecked(&self, p: Vec2) -> Vec2 {
        let scale = self.constants.potential_per_phase();
        let mut a = Vec2::ZERO;
        for t in &self.terms {
            match t {
                Term::Solenoid { center, flux } => {
                    let r = p - *center;
                    a += r.perp() * (scale * flux / (TAU * r.norm_sq()));
                }
                Term::Gauge(g) => a += (g.grad)(p) * scale,
                Term::Custom(f) => a += f(p),
            }
        }
        a
    }

    /// Dimensionless phase of A along `path`, in closed form. `None` when a
    /// custom term has no closed form.
    pub fn exact_phase(&self, path: &Path) -> Option<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            match t {
                Term::Solenoid { center, flux } => {
                    let swept: f64 = path
                        .segments
                        .iter()
                        .map(|s| s.angle_swept_around(*center))
                        .sum();
                    total += flux / TAU * swept;
                }
                Term::Gauge(g) => {
                    let (a, b) = (path.start()?, path.end()?);
                    total += (g.phase)(b) - (g.phase)(a);
                }
                Term::Custom(_) => return None,
            }
        }
        Some(total)
    }

    /// Closed-form phase of the straight edge a-b (solenoid and gauge terms).
    pub fn exact_edge_phase(&self, a: Vec2, b: Vec2) -> Option<f64> {
        let mut total = 0.0;
        for t in &self.terms {
            match t {
                Term::Solenoid { center, flux } => {
                    total += flux / TAU * (a - *center).angle_to(b - *center);
                }
                Term::Gauge(g) => total += (g.phase)(b) - (g.phase)(a),
                Term::Custom(_) => return None,
            }
        }
        Some(total)
    }

    /// Phase of the straight edge a-b used for lattice links: closed form for
    /// solenoid and gauge terms, midpoint rule for custom terms.
    pub fn edge_phase(&self, a: Vec2, b: Vec2) -> f64 {
        let k = self.constants.phase_per_potential();
        let mid = (a + b) * 0.5;
        let mut total = 0.0;
        for t in &self.terms {
            match t {
                Term::Solenoid { center, flux } => {
                    total += flux / TAU * (a - *center).angle_to(b - *center);
                }
                Term::Gauge(g) => total += (g.phase)(b) - (g.phase)(a),
                Term::Custom(f) => total += k * f(mid).dot(b - a),
            }
        }
        total
    }

    /// Upper bound on |phase| accumulated beyond distance `l` along the ray
    /// `origin + s*dir`; `None` when some term has no decay guarantee.
    pub fn ray_tail_bound(&self, origin: Vec2, dir: Vec2, l: f64) -> Option<f64> {
        let mut bound = 0.0;
        for t in &self.terms {
            match t {
                Term::Solenoid { center, flux } => {
                    let rel = origin - *center;
                    let perp = dir.cross(rel).abs();
                    // angle still to be swept from s = l to infinity
                    let remaining = perp.atan2(rel.dot(dir) + l);
                    bound += flux.abs() / TAU * remaining;
                }
                Term::Gauge(g) => {
                    let (c, r) = g.support?;
                    let closest = (origin - c).dot(dir);
                    if l + closest < r {
                        // the ray beyond l may still cross the support
                        return Some(f64::INFINITY);
                    }
                }
                Term::Custom(_) => return None,
            }
        }
        Some(bound)
    }
}

/// Multi-solenoid potential realizing each obstacle's flux.
pub fn ab_potential(scene: &Scene, constants: PhysicalConstants) -> Result<VectorPotential> {
    constants.validate()?;
    let terms = scene
        .obstacles()
        .iter()
        .filter(|d| d.flux != 0.0)
        .map(|d| Term::Solenoid {
            center: d.center,
            flux: d.flux,
        })
        .collect();
    Ok(VectorPotential {
        constants,
        terms,
        excluded: scene.obstacles().to_vec(),
    })
}

/// A' = A + (ħc/e)∇φ. Solenoid fluxes are unchanged.
pub fn gauge_transform(potential: &VectorPotential, phase: ScalarField, grad_phase: VectorField) -> VectorPotential {
    potential
        .clone()
        .with_term(Term::Gauge(GaugeTerm::new(phase, grad_phase)))
}

/// Adaptive quadrature of (e/ħc)∫A·dx along a chain of segments.
pub fn line_integral(potential: &VectorPotential, path: &Path, rel_tol: f64) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    check_path_domain(potential, path)?;
    let k = potential.constants.phase_per_potential();
    integrate_segments(&path.segments, rel_tol, |p, v| k * potential.eval_unchecked(p).dot(v))
}

/// Integrates `f(point, velocity)` over consecutive segments, each mapped to
/// one unit of the quadrature parameter.
fn integrate_segments<F>(segments: &[Segment], rel_tol: f64, f: F) -> Result<f64>
where
    F: Fn(Vec2, Vec2) -> f64,
{
    if segments.is_empty() {
        return Ok(0.0);
    }
    let breaks: Vec<f64> = (0..=segments.len()).map(|k| k as f64).collect();
    let n = segments.len();
    let q = integrate_breakpoints(
        |t| {
            let k = (t.floor() as usize).min(n - 1);
            let s = &segments[k];
            let u = t - k as f64;
            f(s.point(u), s.velocity(u))
        },
        &breaks,
        rel_tol,
        0.0,
    )?;
    Ok(q.value)
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if !(rel_tol > 1e-14 && rel_tol < 1e-2) {
        return Err(Error::InvalidInput(format!(
            "rel_tol {rel_tol} outside (1e-14, 1e-2)"
        )));
    }
    Ok(())
}

fn check_path_domain(potential: &VectorPotential, path: &Path) -> Result<()> {
    for (k, seg) in path.segments.iter().enumerate() {
        for (j, d) in potential.excluded.iter().enumerate() {
            if seg.distance_to(d.center) < d.radius * (1.0 - 1e-12) {
                return Err(Error::Domain(format!("path segment {k} enters obstacle {j}")));
            }
        }
    }
    Ok(())
}

/// Flux through a closed loop: the line integral over the loop.
pub fn loop_flux(potential: &VectorPotential, lp: &Loop, rel_tol: f64) -> Result<f64> {
    line_integral(potential, lp.path(), rel_tol)
}

/// Distance along the ray beyond which the omitted tail is below
/// `0.5 * rel_tol * max(1, Σ|α_j|/2π)`.
pub fn ray_cutoff(potential: &VectorPotential, origin: Vec2, dir: Vec2, rel_tol: f64) -> Result<f64> {
    let total_flux: f64 = potential.solenoids().iter().map(|(_, f)| f.abs()).sum();
    let budget = 0.5 * rel_tol * (total_flux / TAU).max(1.0);
    let start = potential
        .terms
        .iter()
        .map(|t| match t {
            Term::Solenoid { center, .. } => (origin - *center).norm(),
            Term::Gauge(g) => g.support.map_or(1.0, |(c, r)| (origin - c).norm() + r),
            Term::Custom(_) => 1.0,
        })
        .fold(1.0, f64::max);
    let mut l = start;
    for _ in 0..200 {
        match potential.ray_tail_bound(origin, dir, l) {
            None => {
                return Err(Error::InvalidInput(
                    "semi-infinite integral needs a potential with a tail bound".into(),
                ))
            }
            Some(b) if b <= budget => return Ok(l),
            Some(_) => l *= 2.0,
        }
    }
    Err(Error::Convergence {
        estimate: f64::NAN,
        error: f64::INFINITY,
        intervals: 0,
    })
}

/// (e/ħc)∫₀^L dir·A(origin + s·dir) ds with geometric breakpoints.
pub fn ray_integral_to(
    potential: &VectorPotential,
    origin: Vec2,
    dir: Vec2,
    length: f64,
    rel_tol: f64,
) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    check_unit(dir)?;
    let seg = Path::new(vec![Segment::line(origin, origin + dir * length)]);
    check_path_domain(potential, &seg)?;
    let mut breaks = vec![0.0];
    let mut b = 1.0;
    while b < length {
        breaks.push(b);
        b *= 2.0;
    }
    breaks.push(length);
    let k = potential.constants.phase_per_potential();
    let q = integrate_breakpoints(
        |s| k * potential.eval_unchecked(origin + dir * s).dot(dir),
        &breaks,
        rel_tol,
        0.0,
    )?;
    Ok(q.value)
}

/// (e/ħc)∫₀^∞ dir·A(origin + s·dir) ds, truncated where the analytic tail
/// bound guarantees the remainder is within tolerance.
pub fn ray_integral(potential: &VectorPotential, origin: Vec2, dir: Vec2, rel_tol: f64) -> Result<f64> {
    check_unit(dir)?;
    let l = ray_cutoff(potential, origin, dir, rel_tol)?;
    ray_integral_to(potential, origin, dir, l, rel_tol)
}

/// Numerical curl ∂₁A₂ − ∂₂A₁ by central differences with step `h`.
pub fn curl_at(potential: &VectorPotential, point: Vec2, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput("step must be positive".into()));
    }
    let reach = h * std::f64::consts::SQRT_2;
    for (j, d) in potential.excluded.iter().enumerate() {
        if (point - d.center).norm() < d.radius + reach {
            return Err(Error::Domain(format!(
                "difference stencil at ({}, {}) clips obstacle {j}",
                point.x, point.y
            )));
        }
    }
    let a = |p: Vec2| potential.eval_unchecked(p);
    let ex = Vec2::new(h, 0.0);
    let ey = Vec2::new(0.0, h);
    let d1a2 = (a(point + ex).y - a(point - ex).y) / (2.0 * h);
    let d2a1 = (a(point + ey).x - a(point - ey).x) / (2.0 * h);
    Ok(d1a2 - d2a1)
}

pub type SpacetimeVectorField = Arc<dyn Fn(Vec2, f64) -> Vec2 + Send + Sync>;
pub type SpacetimeScalarField = Arc<dyn Fn(Vec2, f64) -> f64 + Send + Sync>;

/// Time-dependent potentials (A(x,t), V(x,t)).
#[derive(Clone)]
pub struct SpacetimePotential {
    pub constants: PhysicalConstants,
    pub magnetic: SpacetimeVectorField,
    pub electric: SpacetimeScalarField,
}

impl SpacetimePotential {
    pub fn new(constants: PhysicalConstants, magnetic: SpacetimeVectorField, electric: SpacetimeScalarField) -> Self {
        Self {
            constants,
            magnetic,
            electric,
        }
    }

    /// Static magnetic potential with V ≡ 0.
    pub fn from_static(potential: &VectorPotential) -> Self {
        let p = potential.clone();
        Self {
            constants: potential.constants,
            magnetic: Arc::new(move |x, _| p.eval_unchecked(x)),
            electric: Arc::new(|_, _| 0.0),
        }
    }
}

/// Piece of a closed path in (x, t).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpacetimeSegment {
    /// Spatial segment at frozen time.
    Frozen { segment: Segment, time: f64 },
    /// Straight line in spacetime.
    Line { from: (Vec2, f64), to: (Vec2, f64) },
}

impl SpacetimeSegment {
    fn start(&self) -> (Vec2, f64) {
        match *self {
            SpacetimeSegment::Frozen { segment, time } => (segment.start(), time),
            SpacetimeSegment::Line { from, .. } => from,
        }
    }

    fn end(&self) -> (Vec2, f64) {
        match *self {
            SpacetimeSegment::Frozen { segment, time } => (segment.end(), time),
            SpacetimeSegment::Line { to, .. } => to,
        }
    }

    /// Position, time and their parameter derivatives at u in [0, 1].
    fn eval(&self, u: f64) -> (Vec2, f64, Vec2, f64) {
        match *self {
            SpacetimeSegment::Frozen { segment, time } => (segment.point(u), time, segment.velocity(u), 0.0),
            SpacetimeSegment::Line { from, to } => (
                from.0 + (to.0 - from.0) * u,
                from.1 + (to.1 - from.1) * u,
                to.0 - from.0,
                to.1 - from.1,
            ),
        }
    }
}

/// Closed path in spacetime.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimeLoop {
    segments: Vec<SpacetimeSegment>,
}

impl SpacetimeLoop {
    pub fn new(segments: Vec<SpacetimeSegment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Geometry("spacetime loop has no segments".into()));
        }
        let n = segments.len();
        for i in 0..n {
            let (x1, t1) = segments[i].end();
            let (x2, t2) = segments[(i + 1) % n].start();
            let scale = 1.0 + x1.norm().max(t1.abs());
            if x1.distance(x2) > 1e-12 * scale || (t1 - t2).abs() > 1e-12 * scale {
                return Err(Error::Geometry(format!("spacetime loop is not closed after segment {i}")));
            }
        }
        Ok(Self { segments })
    }

    /// Spatial loop at a single instant.
    pub fn frozen(lp: &Loop, time: f64) -> Self {
        Self {
            segments: lp
                .segments()
                .iter()
                .map(|&segment| SpacetimeSegment::Frozen { segment, time })
                .collect(),
        }
    }

    /// Closed polyline through spacetime vertices.
    pub fn polyline(vertices: &[(Vec2, f64)]) -> Result<Self> {
        let n = vertices.len();
        Self::new(
            (0..n)
                .map(|i| SpacetimeSegment::Line {
                    from: vertices[i],
                    to: vertices[(i + 1) % n],
                })
                .collect(),
        )
    }

    pub fn segments(&self) -> &[SpacetimeSegment] {
        &self.segments
    }
}

/// (e/ħ)∮ (1/c)A·dx − V dt.
pub fn electromagnetic_flux(potential: &SpacetimePotential, lp: &SpacetimeLoop, rel_tol: f64) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    let c = potential.constants;
    let ka = c.phase_per_potential();
    let kv = c.charge / c.hbar;
    let segs = &lp.segments;
    let n = segs.len();
    let breaks: Vec<f64> = (0..=n).map(|k| k as f64).collect();
    let q = integrate_breakpoints(
        |t| {
            let k = (t.floor() as usize).min(n - 1);
            let (x, time, dx, dt) = segs[k].eval(t - k as f64);
            let mag = ka * (potential.magnetic)(x, time).dot(dx);
            if dt == 0.0 {
                mag
            } else {
                mag - kv * (potential.electric)(x, time) * dt
            }
        },
        &breaks,
        rel_tol,
        0.0,
    )?;
    if !q.value.is_finite() {
        return Err(Error::Domain("potential is not finite along the loop".into()));
    }
    Ok(q.value)
}

/// Stationary metric components on the plane.
#[derive(Clone)]
pub struct StationaryMetric {
    pub g00: ScalarField,
    pub g0j: VectorField,
}

/// ∮ Σ_j (g_j0 / g_00) dx_j along `lp`.
pub fn gravitational_flux(metric: &StationaryMetric, lp: &Loop, rel_tol: f64) -> Result<f64> {
    check_rel_tol(rel_tol)?;
    let bad = Cell::new(None::<Vec2>);
    let value = integrate_segments(lp.segments(), rel_tol, |p, v| {
        let g00 = (metric.g00)(p);
        if !(g00 > 0.0) {
            bad.set(Some(p));
            return 0.0;
        }
        (metric.g0j)(p).dot(v) / g00
    })?;
    if let Some(p) = bad.get() {
        return Err(Error::Domain(format!(
            "g00 is not positive at ({}, {})",
            p.x, p.y
        )));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Bound;
    use std::f64::consts::PI;

    fn scene(fluxes: &[(Vec2, f64)]) -> Scene {
        scene_r(fluxes, 0.5)
    }

    fn scene_r(fluxes: &[(Vec2, f64)], radius: f64) -> Scene {
        Scene::new(
            fluxes.iter().map(|&(c, f)| Disk::with_flux(c, radius, f)).collect(),
            Bound::new(Vec2::new(-20.0, -20.0), Vec2::new(20.0, 20.0)),
        )
        .unwrap()
    }

    #[test]
    fn ab_closed_form_value() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, TAU)]), PhysicalConstants::default()).unwrap();
        let a = pot.eval(Vec2::new(2.0, 0.0)).unwrap();
        assert!((a - Vec2::new(0.0, 0.5)).norm() < 1e-15);
        let f = loop_flux(&pot, &Loop::circle(Vec2::ZERO, 2.0, true), 1e-12).unwrap();
        assert!((f - TAU).abs() < 1e-11);
        assert!(matches!(pot.eval(Vec2::new(0.1, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn zero_flux_gives_zero_field() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, 0.0)]), PhysicalConstants::default()).unwrap();
        assert_eq!(pot.eval(Vec2::new(3.0, 1.0)).unwrap(), Vec2::ZERO);
    }

    #[test]
    fn non_unit_constants_keep_dimensionless_flux() {
        let c = PhysicalConstants {
            hbar: 0.7,
            mass: 2.0,
            charge: 1.3,
            light_speed: 5.0,
        };
        let pot = ab_potential(&scene(&[(Vec2::ZERO, 1.1)]), c).unwrap();
        let f = loop_flux(&pot, &Loop::circle(Vec2::new(0.3, 0.1), 3.0, true), 1e-12).unwrap();
        assert!((f - 1.1).abs() < 1e-11);
    }

    #[test]
    fn radial_path_has_no_phase() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, 1.0)]), PhysicalConstants::default()).unwrap();
        let p = Path::polyline(&[Vec2::new(1.0, 1.0), Vec2::new(5.0, 5.0)]);
        assert!(line_integral(&pot, &p, 1e-10).unwrap().abs() < 1e-14);
    }

    #[test]
    fn half_circle_quarter_phase() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, PI)]), PhysicalConstants::default()).unwrap();
        let p = Path::new(vec![Segment::arc(Vec2::ZERO, 2.0, 0.0, PI)]);
        let v = line_integral(&pot, &p, 1e-12).unwrap();
        assert!((v - PI / 2.0).abs() < 1e-12 * PI);
        assert!((pot.exact_phase(&p).unwrap() - PI / 2.0).abs() < 1e-14);
    }

    #[test]
    fn two_obstacle_enclosure_and_multiple_winding() {
        let (a, b) = (0.7, -1.9);
        let s = scene(&[(Vec2::new(-2.0, 0.0), a), (Vec2::new(2.0, 0.0), b)]);
        let pot = ab_potential(&s, PhysicalConstants::default()).unwrap();
        let both = Loop::circle(Vec2::ZERO, 5.0, true);
        assert!((loop_flux(&pot, &both, 1e-12).unwrap() - (a + b)).abs() < 1e-10);
        // twice around the first, once clockwise around the second
        let c1 = Loop::circle(Vec2::new(-2.0, 0.0), 1.0, true);
        let fig = c1.concat(&c1).unwrap();
        let v1 = loop_flux(&pot, &fig, 1e-12).unwrap();
        let v2 = loop_flux(&pot, &Loop::circle(Vec2::new(2.0, 0.0), 1.0, false), 1e-12).unwrap();
        assert!((v1 + v2 - (2.0 * a - b)).abs() < 1e-10);
    }

    #[test]
    fn gauge_transform_linear_phase() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, 0.9)]), PhysicalConstants::default()).unwrap();
        let v = Vec2::new(0.3, -1.2);
        let g = gauge_transform(&pot, Arc::new(move |p: Vec2| p.dot(v)), Arc::new(move |_| v));
        let p = Vec2::new(2.0, 1.0);
        assert!((g.eval(p).unwrap() - pot.eval(p).unwrap() - v).norm() < 1e-15);
        let lp = Loop::circle(Vec2::new(0.5, 0.0), 3.0, true);
        let before = loop_flux(&pot, &lp, 1e-12).unwrap();
        let after = loop_flux(&g, &lp, 1e-12).unwrap();
        assert!((before - after).abs() < 1e-10);
        let id = gauge_transform(&pot, Arc::new(|_| 0.0), Arc::new(|_| Vec2::ZERO));
        assert_eq!(id.eval(p).unwrap(), pot.eval(p).unwrap());
    }

    #[test]
    fn curl_of_uniform_field_is_one() {
        let pot = VectorPotential::custom(
            PhysicalConstants::default(),
            Arc::new(|p: Vec2| Vec2::new(-p.y, p.x) * 0.5),
        );
        let c = curl_at(&pot, Vec2::new(0.3, -2.0), 1e-4).unwrap();
        assert!((c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn curl_near_obstacle_is_domain_error() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, 1.0)]), PhysicalConstants::default()).unwrap();
        assert!(matches!(
            curl_at(&pot, Vec2::new(0.50001, 0.0), 1e-4),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ray_tail_truncation_is_controlled() {
        let pot = ab_potential(&scene_r(&[(Vec2::ZERO, PI)], 0.2), PhysicalConstants::default()).unwrap();
        let (o, d) = (Vec2::new(5.0, 0.3), Vec2::new(-1.0, 0.0));
        let rel_tol = 1e-9;
        let l = ray_cutoff(&pot, o, d, rel_tol).unwrap();
        let short = ray_integral_to(&pot, o, d, l, rel_tol).unwrap();
        let long = ray_integral_to(&pot, o, d, 2.0 * l, rel_tol).unwrap();
        assert!((short - long).abs() <= rel_tol);
        // oracle: full half-line sweeps the angle from the origin to pi
        let exact = 0.5 * (o.angle_to(Vec2::new(-1.0, 0.0)));
        assert!((ray_integral(&pot, o, d, rel_tol).unwrap() - exact).abs() < 2.0 * rel_tol);
    }

    #[test]
    fn em_flux_static_equals_loop_flux() {
        let pot = ab_potential(&scene(&[(Vec2::ZERO, 1.3)]), PhysicalConstants::default()).unwrap();
        let lp = Loop::circle(Vec2::ZERO, 2.0, true);
        let st = SpacetimePotential::from_static(&pot);
        let a = electromagnetic_flux(&st, &SpacetimeLoop::frozen(&lp, 0.4), 1e-10).unwrap();
        let b = loop_flux(&pot, &lp, 1e-10).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn em_flux_temporal_rectangle() {
        // V = V1 for x > 0, V2 for x < 0; rectangle x in {-1, 1}, t in [0, T]
        let (v1, v2, t_end) = (0.8, -0.3, 2.5);
        let st = SpacetimePotential::new(
            PhysicalConstants::default(),
            Arc::new(|_, _| Vec2::ZERO),
            Arc::new(move |x, _| if x.x > 0.0 { v1 } else { v2 }),
        );
        let (l, r) = (Vec2::new(-1.0, 0.0), Vec2::new(1.0, 0.0));
        // up in time on the right, across, down in time on the left
        let lp = SpacetimeLoop::polyline(&[(r, 0.0), (r, t_end), (l, t_end), (l, 0.0)]).unwrap();
        let f = electromagnetic_flux(&st, &lp, 1e-12).unwrap();
        assert!((f - (v2 - v1) * t_end).abs() < 1e-12);
    }

    #[test]
    fn gravitational_static_and_ab_form() {
        let lp = Loop::circle(Vec2::new(0.2, 0.0), 2.0, true);
        let flat = StationaryMetric {
            g00: Arc::new(|_| 1.0),
            g0j: Arc::new(|_| Vec2::ZERO),
        };
        assert_eq!(gravitational_flux(&flat, &lp, 1e-10).unwrap(), 0.0);
        let a = 0.77;
        let ab = StationaryMetric {
            g00: Arc::new(|p: Vec2| 1.0 + 0.1 / (1.0 + p.norm_sq())),
            g0j: Arc::new(move |p: Vec2| {
                p.perp() * (a / (TAU * p.norm_sq())) * (1.0 + 0.1 / (1.0 + p.norm_sq()))
            }),
        };
        assert!((gravitational_flux(&ab, &lp, 1e-12).unwrap() - a).abs() < 1e-10);
        let neg = StationaryMetric {
            g00: Arc::new(|p: Vec2| p.x),
            g0j: Arc::new(|_| Vec2::ZERO),
        };
        assert!(matches!(gravitational_flux(&neg, &lp, 1e-10), Err(Error::Domain(_))));
    }
}
