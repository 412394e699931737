//! Piecewise paths made of line segments and circular arcs, closed loops,
//! and winding numbers around obstacles.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{segment_point_distance, BrokenRay, Scene};
use crate::vec2::Vec2;

/// A smooth path primitive parameterized over t in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Line { a: Vec2, b: Vec2 },
    /// Arc of the circle `center`, `radius` from polar angle `start_angle`
    /// sweeping by `sweep` radians (positive = counterclockwise).
    Arc {
        center: Vec2,
        radius: f64,
        start_angle: f64,
        sweep: f64,
    },
}

impl Segment {
    pub fn line(a: Vec2, b: Vec2) -> Self {
        Segment::Line { a, b }
    }

    pub fn arc(center: Vec2, radius: f64, start_angle: f64, sweep: f64) -> Self {
        Segment::Arc {
            center,
            radius,
            start_angle,
            sweep,
        }
    }

    pub fn point(&self, t: f64) -> Vec2 {
        match *self {
            Segment::Line { a, b } => a + (b - a) * t,
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => center + Vec2::from_angle(start_angle + sweep * t) * radius,
        }
    }

    /// Derivative of `point` with respect to t.
    pub fn velocity(&self, t: f64) -> Vec2 {
        match *self {
            Segment::Line { a, b } => b - a,
            Segment::Arc {
                radius,
                start_angle,
                sweep,
                ..
            } => Vec2::from_angle(start_angle + sweep * t).perp() * (radius * sweep),
        }
    }

    pub fn start(&self) -> Vec2 {
        match *self {
            Segment::Line { a, .. } => a,
            _ => self.point(0.0),
        }
    }

    pub fn end(&self) -> Vec2 {
        match *self {
            Segment::Line { b, .. } => b,
            _ => self.point(1.0),
        }
    }

    pub fn length(&self) -> f64 {
        match *self {
            Segment::Line { a, b } => a.distance(b),
            Segment::Arc { radius, sweep, .. } => radius * sweep.abs(),
        }
    }

    pub fn reversed(&self) -> Segment {
        match *self {
            Segment::Line { a, b } => Segment::Line { a: b, b: a },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center,
                radius,
                start_angle: start_angle + sweep,
                sweep: -sweep,
            },
        }
    }

    /// Sub-segment over the parameter range [t0, t1].
    pub fn slice(&self, t0: f64, t1: f64) -> Segment {
        match *self {
            Segment::Line { .. } => Segment::Line {
                a: self.point(t0),
                b: self.point(t1),
            },
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => Segment::Arc {
                center,
                radius,
                start_angle: start_angle + sweep * t0,
                sweep: sweep * (t1 - t0),
            },
        }
    }

    /// Smallest distance between the segment and the point `p`.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        match *self {
            Segment::Line { a, b } => segment_point_distance(a, b, p),
            Segment::Arc {
                center,
                radius,
                start_angle,
                sweep,
            } => {
                let ends = p.distance(self.start()).min(p.distance(self.end()));
                let rel = p - center;
                if rel.norm() == 0.0 {
                    return radius;
                }
                if sweep.abs() >= TAU {
                    return (rel.norm() - radius).abs();
                }
                // parameter of the polar angle of p along the sweep
                let phi = rel.angle();
                let mut delta = (phi - start_angle).rem_euclid(TAU);
                if sweep < 0.0 {
                    delta = (TAU - delta) % TAU;
                }
                if delta <= sweep.abs() {
                    (rel.norm() - radius).abs()
                } else {
                    ends
                }
            }
        }
    }

    /// Continuous change of the polar angle of the segment as seen from `c`.
    /// `c` must not lie on the segment.
    pub fn angle_swept_around(&self, c: Vec2) -> f64 {
        match *self {
            Segment::Line { a, b } => (a - c).angle_to(b - c),
            Segment::Arc { .. } => {
                let d = self.distance_to(c);
                // pieces shorter than half the clearance turn by less than
                // half a radian each, so per-piece angles never wrap
                let n = ((self.length() / (0.5 * d)).ceil() as usize).max(1);
                let mut total = 0.0;
                let mut prev = self.start() - c;
                for k in 1..=n {
                    let next = self.point(k as f64 / n as f64) - c;
                    total += prev.angle_to(next);
                    prev = next;
                }
                total
            }
        }
    }
}

/// An open chain of segments.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Path {
    pub segments: Vec<Segment>,
}

impl Path {
    pub fn new(segments: Vec<Segment>) -> Self {
        Self { segments }
    }

    /// Straight polyline through the given vertices.
    pub fn polyline(points: &[Vec2]) -> Self {
        Self::new(points.windows(2).map(|w| Segment::line(w[0], w[1])).collect())
    }

    pub fn from_broken_ray(ray: &BrokenRay) -> Self {
        Self::new(
            ray.legs
                .iter()
                .map(|l| Segment::line(l.start, l.end()))
                .collect(),
        )
    }

    pub fn start(&self) -> Option<Vec2> {
        self.segments.first().map(Segment::start)
    }

    pub fn end(&self) -> Option<Vec2> {
        self.segments.last().map(Segment::end)
    }

    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn reversed(&self) -> Path {
        Path::new(self.segments.iter().rev().map(Segment::reversed).collect())
    }

    pub fn then(mut self, other: &Path) -> Path {
        self.segments.extend_from_slice(&other.segments);
        self
    }

    /// Fails with a domain error when the path enters an obstacle interior.
    pub fn check_clear(&self, scene: &Scene) -> Result<()> {
        for (k, seg) in self.segments.iter().enumerate() {
            for (j, d) in scene.obstacles().iter().enumerate() {
                if seg.distance_to(d.center) < d.radius * (1.0 - 1e-12) {
                    return Err(Error::Domain(format!(
                        "path segment {k} enters obstacle {j}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Smallest distance from the path to the center of each obstacle,
    /// minus its radius.
    pub fn clearance(&self, scene: &Scene) -> f64 {
        let mut c = f64::INFINITY;
        for seg in &self.segments {
            for d in scene.obstacles() {
                c = c.min(seg.distance_to(d.center) - d.radius);
            }
        }
        c
    }
}

/// Closed path; counterclockwise is positive orientation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Path", into = "Path")]
pub struct Loop {
    path: Path,
}

impl TryFrom<Path> for Loop {
    type Error = Error;
    fn try_from(p: Path) -> Result<Self> {
        Loop::new(p.segments)
    }
}

impl From<Loop> for Path {
    fn from(l: Loop) -> Path {
        l.path
    }
}

impl Loop {
    /// Checks that consecutive segments join and the last one returns to
    /// the start, within 1e-12 relative to the loop's extent.
    pub fn new(segments: Vec<Segment>) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Geometry("loop has no segments".into()));
        }
        let scale = segments
            .iter()
            .map(|s| s.start().norm().max(s.length()))
            .fold(1.0, f64::max);
        let tol = 1e-12 * scale;
        let n = segments.len();
        for i in 0..n {
            let gap = segments[i].end().distance(segments[(i + 1) % n].start());
            if gap > tol {
                return Err(Error::Geometry(format!(
                    "loop is not closed: gap {gap:.3e} after segment {i}"
                )));
            }
        }
        Ok(Self {
            path: Path::new(segments),
        })
    }

    /// Full circle, counterclockwise when `ccw`.
    pub fn circle(center: Vec2, radius: f64, ccw: bool) -> Self {
        let sweep = if ccw { TAU } else { -TAU };
        Self {
            path: Path::new(vec![Segment::arc(center, radius, 0.0, sweep)]),
        }
    }

    /// Closed polygon through `vertices` (the closing edge is added).
    pub fn polygon(vertices: &[Vec2]) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::Geometry("polygon needs at least two vertices".into()));
        }
        let mut pts = vertices.to_vec();
        pts.push(vertices[0]);
        Loop::new(Path::polyline(&pts).segments)
    }

    pub fn from_path(path: Path) -> Result<Self> {
        Loop::new(path.segments)
    }

    pub fn segments(&self) -> &[Segment] {
        &self.path.segments
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn reversed(&self) -> Loop {
        Loop {
            path: self.path.reversed(),
        }
    }

    /// Traverses `self` then `other`. Both loops must share a base point.
    pub fn concat(&self, other: &Loop) -> Result<Loop> {
        let mut segs = self.path.segments.clone();
        segs.extend_from_slice(&other.path.segments);
        Loop::new(segs)
    }

    pub fn check_clear(&self, scene: &Scene) -> Result<()> {
        self.path.check_clear(scene)
    }

    /// Winding number around an arbitrary point not on the loop.
    pub fn winding_around(&self, c: Vec2) -> i64 {
        let total: f64 = self
            .path
            .segments
            .iter()
            .map(|s| s.angle_swept_around(c))
            .sum();
        (total / TAU).round() as i64
    }
}

/// Winding number of `lp` around each obstacle center.
pub fn winding_numbers(lp: &Loop, scene: &Scene) -> Result<Vec<i64>> {
    lp.check_clear(scene)?;
    Ok(scene
        .obstacles()
        .iter()
        .map(|d| lp.winding_around(d.center))
        .collect())
}

/// Even-odd parity of a closed polyline around `p`, by horizontal ray casting.
/// Used as an independent check of winding parity.
pub fn crossing_parity(vertices: &[Vec2], p: Vec2) -> bool {
    let n = vertices.len();
    let mut inside = false;
    for i in 0..n {
        let a = vertices[i];
        let b = vertices[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if x > p.x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Angle in (-pi, pi] equivalent to `a`.
pub fn wrap_pi(a: f64) -> f64 {
    let r = (a + PI).rem_euclid(TAU) - PI;
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}
