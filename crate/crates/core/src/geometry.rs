//! Scenes of disk obstacles, ray intersection, specular reflection and
//! broken-ray tracing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::Vec2;

/// Relative slack used when deciding whether a point is inside a disk.
/// Points on the boundary (reflection points) are admissible.
const INTERIOR_SLACK: f64 = 1e-12;

/// Threshold on |d.n| below which incidence is treated as tangential.
pub const GRAZING_THRESHOLD: f64 = 1e-12;

/// A disk obstacle. `flux` is the enclosed flux in radians; geometry code
/// ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
    #[serde(default)]
    pub flux: f64,
}

impl Disk {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Self {
            center,
            radius,
            flux: 0.0,
        }
    }

    pub fn with_flux(center: Vec2, radius: f64, flux: f64) -> Self {
        Self {
            center,
            radius,
            flux,
        }
    }

    /// True when `p` lies strictly inside the disk (boundary excluded,
    /// up to a relative slack of 1e-12).
    pub fn contains_interior(&self, p: Vec2) -> bool {
        (p - self.center).norm() < self.radius * (1.0 - INTERIOR_SLACK)
    }

    /// Outward unit normal at the boundary point nearest to `p`.
    pub fn normal_at(&self, p: Vec2) -> Vec2 {
        (p - self.center).normalized()
    }
}

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bound {
    pub fn new(min: Vec2, max: Vec2) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    /// Distance along `dir` from `p` (inside the rectangle) to its boundary.
    pub fn exit_distance(&self, p: Vec2, dir: Vec2) -> f64 {
        let mut t = f64::INFINITY;
        for (pc, dc, lo, hi) in [
            (p.x, dir.x, self.min.x, self.max.x),
            (p.y, dir.y, self.min.y, self.max.y),
        ] {
            if dc > 0.0 {
                t = t.min((hi - pc) / dc);
            } else if dc < 0.0 {
                t = t.min((lo - pc) / dc);
            }
        }
        t.max(0.0)
    }
}

/// Planar domain: disk obstacles inside a rectangular outer bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SceneRepr", into = "SceneRepr")]
pub struct Scene {
    obstacles: Vec<Disk>,
    bound: Bound,
}

#[derive(Serialize, Deserialize)]
struct SceneRepr {
    obstacles: Vec<Disk>,
    bound: Bound,
}

impl TryFrom<SceneRepr> for Scene {
    type Error = Error;
    fn try_from(r: SceneRepr) -> Result<Self> {
        Scene::new(r.obstacles, r.bound)
    }
}

impl From<Scene> for SceneRepr {
    fn from(s: Scene) -> Self {
        SceneRepr {
            obstacles: s.obstacles,
            bound: s.bound,
        }
    }
}

impl Scene {
    /// Validates disjointness of obstacle closures and containment in the bound.
    pub fn new(obstacles: Vec<Disk>, bound: Bound) -> Result<Self> {
        if !(bound.min.is_finite() && bound.max.is_finite())
            || bound.min.x >= bound.max.x
            || bound.min.y >= bound.max.y
        {
            return Err(Error::Geometry("outer bound must be a non-empty rectangle".into()));
        }
        for (i, d) in obstacles.iter().enumerate() {
            if !(d.radius > 0.0 && d.radius.is_finite()) || !d.center.is_finite() {
                return Err(Error::Geometry(format!("obstacle {i} has invalid center or radius")));
            }
            if !d.flux.is_finite() {
                return Err(Error::Geometry(format!("obstacle {i} has non-finite flux")));
            }
            let c = d.center;
            let inside = c.x - d.radius > bound.min.x
                && c.x + d.radius < bound.max.x
                && c.y - d.radius > bound.min.y
                && c.y + d.radius < bound.max.y;
            if !inside {
                return Err(Error::Geometry(format!("obstacle {i} is not strictly inside the bound")));
            }
            for (j, e) in obstacles.iter().enumerate().skip(i + 1) {
                if c.distance(e.center) <= d.radius + e.radius {
                    return Err(Error::Geometry(format!("obstacles {i} and {j} overlap or touch")));
                }
            }
        }
        Ok(Self { obstacles, bound })
    }

    pub fn obstacles(&self) -> &[Disk] {
        &self.obstacles
    }

    pub fn bound(&self) -> Bound {
        self.bound
    }

    pub fn fluxes(&self) -> Vec<f64> {
        self.obstacles.iter().map(|d| d.flux).collect()
    }

    /// Same geometry with new fluxes.
    pub fn with_fluxes(&self, fluxes: &[f64]) -> Result<Scene> {
        if fluxes.len() != self.obstacles.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} fluxes, got {}",
                self.obstacles.len(),
                fluxes.len()
            )));
        }
        let obstacles = self
            .obstacles
            .iter()
            .zip(fluxes)
            .map(|(d, &f)| Disk::with_flux(d.center, d.radius, f))
            .collect();
        Scene::new(obstacles, self.bound)
    }

    /// Index of an obstacle whose interior contains `p`.
    pub fn obstacle_containing(&self, p: Vec2) -> Option<usize> {
        self.obstacles.iter().position(|d| d.contains_interior(p))
    }

    pub fn check_exterior(&self, p: Vec2) -> Result<()> {
        match self.obstacle_containing(p) {
            Some(i) => Err(Error::Domain(format!(
                "point ({}, {}) lies inside obstacle {i}",
                p.x, p.y
            ))),
            None => Ok(()),
        }
    }

    /// True when the closed segment a-b meets the interior of some obstacle.
    pub fn segment_blocked(&self, a: Vec2, b: Vec2) -> Option<usize> {
        self.obstacles
            .iter()
            .position(|d| segment_point_distance(a, b, d.center) < d.radius * (1.0 - INTERIOR_SLACK))
    }
}

/// Distance from `p` to the closed segment a-b.
pub fn segment_point_distance(a: Vec2, b: Vec2, p: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    if l2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

/// Half-line with unit direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ray {
    pub origin: Vec2,
    pub direction: Vec2,
}

impl Ray {
    pub fn new(origin: Vec2, direction: Vec2) -> Result<Self> {
        check_unit(direction)?;
        Ok(Self { origin, direction })
    }

    pub fn at(&self, s: f64) -> Vec2 {
        self.origin + self.direction * s
    }
}

pub(crate) fn check_unit(d: Vec2) -> Result<()> {
    if (d.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidInput(format!(
            "direction ({}, {}) is not a unit vector",
            d.x, d.y
        )));
    }
    Ok(())
}

/// First intersection of a ray with an obstacle boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub point: Vec2,
    pub distance: f64,
    pub outward_normal: Vec2,
    pub obstacle_index: usize,
}

/// Nearest obstacle hit along `ray`, or `None` when the ray escapes.
///
/// A ray starting on a boundary and leaving the disk does not hit that disk
/// again; one starting on a boundary and pointing inward is a domain error.
pub fn ray_hit(ray: &Ray, scene: &Scene) -> Result<Option<Hit>> {
    scene.check_exterior(ray.origin)?;
    let mut best: Option<Hit> = None;
    for (i, disk) in scene.obstacles().iter().enumerate() {
        let oc = ray.origin - disk.center;
        let b = ray.direction.dot(oc);
        let c = oc.norm_sq() - disk.radius * disk.radius;
        let on_boundary = c.abs() <= 4.0 * INTERIOR_SLACK * disk.radius * disk.radius;
        if on_boundary {
            if b < 0.0 && b.abs() > GRAZING_THRESHOLD * disk.radius {
                return Err(Error::Domain(format!(
                    "ray starting on obstacle {i} points into it"
                )));
            }
            continue;
        }
        if b >= 0.0 {
            continue;
        }
        let disc = b * b - c;
        if disc < 0.0 {
            continue;
        }
        // Stable form of the nearer root -b - sqrt(disc).
        let q = -b + disc.sqrt();
        let t = c / q;
        if !(t > 0.0) {
            continue;
        }
        if best.map_or(true, |h| t < h.distance) {
            let point = ray.at(t);
            best = Some(Hit {
                point,
                distance: t,
                outward_normal: disk.normal_at(point),
                obstacle_index: i,
            });
        }
    }
    Ok(best)
}

/// Specular reflection d - 2(d.n)n of an incoming direction.
pub fn reflect(direction: Vec2, normal: Vec2) -> Result<Vec2> {
    let dn = direction.dot(normal);
    if dn.abs() < GRAZING_THRESHOLD {
        return Err(Error::GrazingRay {
            x: direction.x,
            y: direction.y,
            cos: dn.abs(),
        });
    }
    if dn > 0.0 {
        return Err(Error::InvalidInput(
            "direction is outgoing with respect to the normal".into(),
        ));
    }
    Ok(direction - normal * (2.0 * dn))
}

/// One straight piece of a broken ray.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub start: Vec2,
    pub direction: Vec2,
    pub length: f64,
}

impl Leg {
    pub fn end(&self) -> Vec2 {
        self.start + self.direction * self.length
    }
}

/// Polyline of legs joined by specular reflections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrokenRay {
    pub legs: Vec<Leg>,
    pub reflection_points: Vec<Vec2>,
    /// Obstacle index for each reflection point.
    pub reflecting_obstacles: Vec<usize>,
    pub total_length: f64,
}

impl BrokenRay {
    pub fn start(&self) -> Vec2 {
        self.legs[0].start
    }

    pub fn end(&self) -> Vec2 {
        self.legs.last().map(Leg::end).unwrap_or(Vec2::ZERO)
    }

    /// Direction of the final leg.
    pub fn final_direction(&self) -> Vec2 {
        self.legs.last().map(|l| l.direction).unwrap_or(Vec2::ZERO)
    }

    /// Vertices start, reflection points..., end.
    pub fn vertices(&self) -> Vec<Vec2> {
        let mut v: Vec<Vec2> = self.legs.iter().map(|l| l.start).collect();
        v.push(self.end());
        v
    }

    /// Largest violation of the chaining and specular-reflection invariants.
    pub fn invariant_defect(&self, scene: &Scene) -> f64 {
        let mut worst: f64 = 0.0;
        for (p, w) in self.legs.windows(2).enumerate() {
            let (a, b) = (w[0], w[1]);
            let scale = 1.0 + a.start.norm().max(b.start.norm());
            worst = worst.max(a.end().distance(b.start) / scale);
            let disk = scene.obstacles()[self.reflecting_obstacles[p]];
            let n = disk.normal_at(b.start);
            // angle of incidence equals angle of reflection, and tangential
            // components agree
            worst = worst.max((a.direction.dot(n) + b.direction.dot(n)).abs());
            worst = worst.max((a.direction.cross(n) - b.direction.cross(n)).abs());
        }
        worst
    }
}

/// Follows a ray through specular reflections until it leaves the outer
/// bound. The final leg is truncated at the bound.
pub fn trace_broken_ray(
    start: Vec2,
    direction: Vec2,
    scene: &Scene,
    max_reflections: usize,
) -> Result<BrokenRay> {
    check_unit(direction)?;
    if !scene.bound().contains(start) {
        return Err(Error::Geometry("broken ray starts outside the outer bound".into()));
    }
    let mut legs = Vec::new();
    let mut reflection_points = Vec::new();
    let mut reflecting_obstacles = Vec::new();
    let mut origin = start;
    let mut dir = direction;
    loop {
        let ray = Ray {
            origin,
            direction: dir,
        };
        match ray_hit(&ray, scene)? {
            None => {
                let len = scene.bound().exit_distance(origin, dir);
                legs.push(Leg {
                    start: origin,
                    direction: dir,
                    length: len,
                });
                break;
            }
            Some(hit) => {
                if reflection_points.len() == max_reflections {
                    return Err(Error::ReflectionBudget {
                        budget: max_reflections,
                    });
                }
                let leg = Leg {
                    start: origin,
                    direction: dir,
                    length: hit.distance,
                };
                let p = leg.end();
                let n = scene.obstacles()[hit.obstacle_index].normal_at(p);
                let new_dir = reflect(dir, n).map_err(|_| Error::GrazingRay {
                    x: p.x,
                    y: p.y,
                    cos: dir.dot(n).abs(),
                })?;
                legs.push(leg);
                reflection_points.push(p);
                reflecting_obstacles.push(hit.obstacle_index);
                origin = p;
                dir = new_dir;
            }
        }
    }
    let total_length = legs.iter().map(|l| l.length).sum();
    Ok(BrokenRay {
        legs,
        reflection_points,
        reflecting_obstacles,
        total_length,
    })
}
