//! Leading-order geometric optics: gauge phases carried along straight and
//! broken rays, wavenumber matching, and the two-beam interference law
//! |v₁ − v₂|² = 4 sin²(α/2).
//!
//! The two-beam circuit is closed with finite anchors: beam 1 runs from its
//! anchor to the meeting point (through any reflections), beam 2 from its
//! anchor to the meeting point, and a straight segment joins the anchors.
//! The circuit phase is therefore an exact loop integral.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{line_integral, ray_integral, PhysicalConstants, VectorPotential};
use crate::geometry::{check_unit, trace_broken_ray, BrokenRay, Leg, Scene};
use crate::path::{winding_numbers, Loop, Path};
use crate::vec2::Vec2;

/// Even window equal to 1 on |t| < 1/2 and 0 on |t| > 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CutoffProfile {
    /// C-infinity transition built from exp(-1/s).
    #[default]
    Smooth,
    /// Raised-cosine transition (C¹).
    RaisedCosine,
}

impl CutoffProfile {
    pub fn eval(&self, t: f64) -> f64 {
        let a = t.abs();
        if a <= 0.5 {
            return 1.0;
        }
        if a >= 1.0 {
            return 0.0;
        }
        let u = 2.0 * (a - 0.5);
        match self {
            CutoffProfile::Smooth => {
                let psi = |s: f64| if s <= 0.0 { 0.0 } else { (-1.0 / s).exp() };
                let p = psi(1.0 - u);
                p / (p + psi(u))
            }
            CutoffProfile::RaisedCosine => 0.5 * (1.0 + (std::f64::consts::PI * u).cos()),
        }
    }
}

/// How a beam propagates from its anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BeamPath {
    #[default]
    Straight,
    /// Specular reflections off obstacles, up to the given budget.
    Broken { max_reflections: usize },
}

/// Cutoff-windowed plane-wave beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub anchor: Vec2,
    pub direction: Vec2,
    pub transverse_width: f64,
    pub longitudinal_width: f64,
    pub wavenumber: f64,
    #[serde(default)]
    pub cutoff: CutoffProfile,
    #[serde(default)]
    pub path: BeamPath,
}

impl BeamSpec {
    pub fn straight(anchor: Vec2, direction: Vec2, transverse_width: f64, longitudinal_width: f64, wavenumber: f64) -> Self {
        Self {
            anchor,
            direction,
            transverse_width,
            longitudinal_width,
            wavenumber,
            cutoff: CutoffProfile::Smooth,
            path: BeamPath::Straight,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_unit(self.direction)?;
        for (name, v) in [
            ("transverse_width", self.transverse_width),
            ("longitudinal_width", self.longitudinal_width),
            ("wavenumber", self.wavenumber),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("beam {name} must be positive")));
            }
        }
        if !self.anchor.is_finite() {
            return Err(Error::InvalidInput("beam anchor is not finite".into()));
        }
        Ok(())
    }
}

/// Phases and intensity predicted for two interfering beams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GOPrediction {
    #[serde(rename = "I1")]
    pub phase_1: f64,
    #[serde(rename = "I2")]
    pub phase_2: f64,
    #[serde(rename = "I3")]
    pub closing_correction: f64,
    pub alpha: f64,
    pub intensity: f64,
    pub winding: Vec<i64>,
    pub meeting_point: Vec2,
    /// Vertices of the closed circuit: beam 1 anchor, reflection points,
    /// meeting point, beam 2 anchor.
    pub circuit: Vec<Vec2>,
}

impl GOPrediction {
    pub fn circuit_loop(&self) -> Result<Loop> {
        Loop::polygon(&self.circuit)
    }
}

/// (e/ħc)∫₀^∞ ω·A(x − sω) ds: phase carried by a beam arriving at `x`
/// along direction ω from infinity.
pub fn straight_ray_phase(potential: &VectorPotential, x: Vec2, direction: Vec2, rel_tol: f64) -> Result<f64> {
    check_unit(direction)?;
    let back = -direction;
    for (j, d) in potential.excluded().iter().enumerate() {
        let rel = d.center - x;
        let s = rel.dot(back).max(0.0);
        if (rel - back * s).norm() < d.radius * (1.0 - 1e-12) {
            return Err(Error::Geometry(format!(
                "incoming ray meets obstacle {j}; use a broken ray"
            )));
        }
    }
    Ok(-ray_integral(potential, x, back, rel_tol)?)
}

/// Phase accumulated along every leg of a broken ray.
pub fn broken_ray_phase(potential: &VectorPotential, ray: &BrokenRay, rel_tol: f64) -> Result<f64> {
    line_integral(potential, &Path::from_broken_ray(ray), rel_tol)
}

/// k_n = 2πnħ / (m x⁰·(ω − θ)), the wavenumber at which the two plane
/// waves are in phase at `x0`.
pub fn matched_wavenumber(
    x0: Vec2,
    omega: Vec2,
    theta: Vec2,
    n: i64,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let denom = x0.dot(omega - theta);
    if denom.abs() <= 1e-14 * x0.norm() * (omega - theta).norm() || denom == 0.0 {
        return Err(Error::DegenerateGeometry(
            "x0·(ω − θ) vanishes; every wavenumber matches".into(),
        ));
    }
    Ok(TAU * n as f64 * constants.hbar / (constants.mass * denom))
}

/// 4 sin²(α/2).
pub fn interference_intensity(alpha: f64) -> f64 {
    let s = (0.5 * alpha).sin();
    4.0 * s * s
}

/// Legs travelled by a beam from its anchor until it leaves the scene.
pub fn beam_legs(scene: &Scene, beam: &BeamSpec) -> Result<Vec<Leg>> {
    let budget = match beam.path {
        BeamPath::Straight => 0,
        BeamPath::Broken { max_reflections } => max_reflections,
    };
    let traced = trace_broken_ray(beam.anchor, beam.direction, scene, budget);
    match (beam.path, traced) {
        (_, Ok(r)) => Ok(r.legs),
        (BeamPath::Straight, Err(Error::ReflectionBudget { .. })) => Err(Error::Geometry(
            "straight beam runs into an obstacle".into(),
        )),
        (_, Err(e)) => Err(e),
    }
}

/// Intersection of the forward ray `o + s d` (s > 0) with the leg.
fn ray_leg_intersection(o: Vec2, d: Vec2, leg: &Leg) -> Option<(f64, f64)> {
    let denom = d.cross(leg.direction);
    if denom.abs() < 1e-12 {
        return None;
    }
    let w = leg.start - o;
    let s = w.cross(leg.direction) / denom;
    let t = w.cross(d) / denom;
    let eps = 1e-12 * (1.0 + leg.length);
    if s > 0.0 && t > eps && t <= leg.length + eps {
        Some((s, t))
    } else {
        None
    }
}

/// Two-beam prediction. Beam 1 may be straight or broken; beam 2 is straight.
///
/// The meeting point is where beam 2 first crosses beam 1's trajectory.
/// α = I₁ − I₂ + I₃ equals the loop integral over the closed circuit, and its
/// winding vector is reported for cross-checking against the fluxes.
pub fn predict_two_beam(
    scene: &Scene,
    potential: &VectorPotential,
    beam1: &BeamSpec,
    beam2: &BeamSpec,
    rel_tol: f64,
) -> Result<GOPrediction> {
    beam1.validate()?;
    beam2.validate()?;
    if beam2.path != BeamPath::Straight {
        return Err(Error::InvalidInput("beam 2 must be straight".into()));
    }
    let k = beam1.wavenumber;
    if (beam2.wavenumber - k).abs() > 1e-12 * k {
        return Err(Error::InvalidInput("beams must share one wavenumber".into()));
    }
    scene.check_exterior(beam1.anchor)?;
    scene.check_exterior(beam2.anchor)?;

    let legs1 = beam_legs(scene, beam1)?;
    let mut meeting = None;
    for (i, leg) in legs1.iter().enumerate() {
        if let Some((s, t)) = ray_leg_intersection(beam2.anchor, beam2.direction, leg) {
            meeting = Some((i, s, t));
            break;
        }
    }
    let (leg_idx, s2, t1) = meeting.ok_or_else(|| Error::Geometry("beams do not meet".into()))?;
    let m = legs1[leg_idx].start + legs1[leg_idx].direction * t1;

    let mut path1_pts: Vec<Vec2> = legs1[..=leg_idx].iter().map(|l| l.start).collect();
    path1_pts.push(m);
    let path1 = Path::polyline(&path1_pts);
    let m2 = beam2.anchor + beam2.direction * s2;
    let path2 = Path::polyline(&[beam2.anchor, m]);
    if let Some(j) = scene.segment_blocked(beam2.anchor, m2) {
        return Err(Error::Geometry(format!("beam 2 runs into obstacle {j} before the meeting point")));
    }
    let closing = Path::polyline(&[beam2.anchor, beam1.anchor]);
    if let Some(j) = scene.segment_blocked(beam2.anchor, beam1.anchor) {
        return Err(Error::Geometry(format!("closing segment crosses obstacle {j}")));
    }

    let phase_1 = line_integral(potential, &path1, rel_tol)?;
    let phase_2 = line_integral(potential, &path2, rel_tol)?;
    let closing_correction = line_integral(potential, &closing, rel_tol)?;
    let alpha = phase_1 - phase_2 + closing_correction;

    let mut circuit = path1_pts;
    circuit.push(beam2.anchor);
    let lp = Loop::polygon(&circuit)?;
    let winding = winding_numbers(&lp, scene).map_err(|e| match e {
        Error::Domain(m) => Error::Geometry(m),
        other => other,
    })?;
    Ok(GOPrediction {
        phase_1,
        phase_2,
        closing_correction,
        alpha,
        intensity: interference_intensity(alpha),
        winding,
        meeting_point: m,
        circuit,
    })
}
