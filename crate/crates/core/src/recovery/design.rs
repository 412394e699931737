//! Construction of measurement circuits with verified winding vectors.
//!
//! Strategies, in order:
//! 1. a straight-beam triangle around a single obstacle;
//! 2. for clusters that no triangle can separate, one triangle around the
//!    whole cluster plus, for all members but one, a broken-ray circuit whose
//!    first beam reflects off a neighbour on the side facing the member, so the
//!    circuit slips through the gap between them.
//!
//! Every candidate is checked by running the geometric-optics predictor with
//! a zero potential, which traces the beams, checks their clearance and
//! computes the winding vector of the closed circuit.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{PhysicalConstants, VectorPotential};
use crate::geometry::{trace_broken_ray, Scene};
use crate::optics::{predict_two_beam, BeamPath, BeamSpec};
use crate::recovery::{smith, Beta};
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CircuitKind {
    /// Straight beams around one obstacle.
    Isolating,
    /// Straight beams around a group of obstacles.
    Enclosing,
    /// Beam 1 reflects once, off a neighbour, to isolate one obstacle.
    BrokenIsolating,
}

/// Two beams whose closed circuit has winding vector `winding`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementCircuit {
    pub kind: CircuitKind,
    pub beam1: BeamSpec,
    pub beam2: BeamSpec,
    pub winding: Vec<i64>,
}

fn zero_potential() -> VectorPotential {
    VectorPotential::zero(PhysicalConstants::default())
}

/// Winding vector of the circuit if the beams form a valid measurement.
fn verified_winding(scene: &Scene, b1: &BeamSpec, b2: &BeamSpec) -> Option<Vec<i64>> {
    predict_two_beam(scene, &zero_potential(), b1, b2, 1e-10)
        .ok()
        .map(|p| p.winding)
}

/// The verified winding when it is `target` up to orientation.
fn matching_winding(scene: &Scene, b1: &BeamSpec, b2: &BeamSpec, target: &[i64]) -> Option<Vec<i64>> {
    let w = verified_winding(scene, b1, b2)?;
    let flipped = w.iter().zip(target).all(|(a, b)| *a == -b);
    (w == target || flipped).then_some(w)
}

fn inside(scene: &Scene, p: Vec2) -> bool {
    let b = scene.bound();
    p.x > b.min.x && p.x < b.max.x && p.y > b.min.y && p.y < b.max.y && scene.obstacle_containing(p).is_none()
}

/// Isoceles triangles around a disk of the given centre and radius: apex
/// beyond the disk along u, base on the opposite side.
fn triangle_around(scene: &Scene, center: Vec2, radius: f64, target: &[i64], kind: CircuitKind) -> Option<MeasurementCircuit> {
    for scale in [1.0, 1.4, 2.0, 2.8, 4.0, 5.6, 8.0] {
        // side distance is L/√5, so L = 2.5r leaves a 12% margin
        let l = 2.5 * radius * scale;
        for step in 0..24 {
            let u = Vec2::from_angle(TAU * step as f64 / 24.0);
            let m = center + u * l;
            let a1 = center - u * l + u.perp() * l;
            let a2 = center - u * l - u.perp() * l;
            if ![m, a1, a2].iter().all(|&p| inside(scene, p)) {
                continue;
            }
            let b1 = BeamSpec::straight(a1, (m - a1).normalized(), radius, radius, 1.0);
            let b2 = BeamSpec::straight(a2, (m - a2).normalized(), radius, radius, 1.0);
            if let Some(winding) = matching_winding(scene, &b1, &b2, target) {
                return Some(MeasurementCircuit { kind, beam1: b1, beam2: b2, winding });
            }
        }
    }
    None
}

fn unit(m: usize, j: usize) -> Vec<i64> {
    (0..m).map(|i| i64::from(i == j)).collect()
}

/// Straight-beam circuit winding once (either orientation) around obstacle `j` only.
pub fn isolating_circuit(scene: &Scene, j: usize) -> Option<MeasurementCircuit> {
    let d = scene.obstacles().get(j)?;
    triangle_around(scene, d.center, d.radius, &unit(scene.obstacles().len(), j), CircuitKind::Isolating)
}

/// Straight-beam circuit winding once around every obstacle in `members`.
pub fn enclosing_circuit(scene: &Scene, members: &[usize]) -> Option<MeasurementCircuit> {
    let obs = scene.obstacles();
    if members.is_empty() || members.iter().any(|&j| j >= obs.len()) {
        return None;
    }
    let centroid = members.iter().fold(Vec2::ZERO, |s, &j| s + obs[j].center) * (1.0 / members.len() as f64);
    let radius = members
        .iter()
        .map(|&j| (obs[j].center - centroid).norm() + obs[j].radius)
        .fold(0.0, f64::max);
    let mut target = vec![0; obs.len()];
    for &j in members {
        target[j] = 1;
    }
    triangle_around(scene, centroid, radius, &target, CircuitKind::Enclosing)
}

/// Circuit around obstacle `j` whose first beam reflects off `reflector` at
/// the point facing `j`, so the circuit passes between the two.
pub fn broken_isolating_circuit(scene: &Scene, j: usize, reflector: usize) -> Option<MeasurementCircuit> {
    let obs = scene.obstacles();
    let (a, b) = (obs.get(reflector)?, obs.get(j)?);
    if j == reflector {
        return None;
    }
    let n = (b.center - a.center).normalized();
    let p = a.center + n * a.radius;
    let gap = (b.center - a.center).norm() - a.radius - b.radius;
    let target = unit(obs.len(), j);
    for side in [1.0, -1.0] {
        let t = n.perp() * side;
        for deg in [80.0, 85.0, 75.0, 70.0, 87.0, 65.0, 60.0, 88.5, 50.0] {
            let psi = deg * PI / 180.0;
            let d_in = n * (-psi.cos()) + t * psi.sin();
            let d_out = n * psi.cos() + t * psi.sin();
            for reach in [2.0, 3.0, 4.5, 7.0] {
                let l = reach * (b.radius + gap);
                let a1 = p - d_in * l;
                let m = p + d_out * l;
                for lift in [2.0, 3.0, 4.5, 7.0] {
                    let a2 = b.center + n * (lift * b.radius);
                    if ![a1, m, a2].iter().all(|&q| inside(scene, q)) {
                        continue;
                    }
                    // the incoming beam must reflect off the chosen neighbour at p
                    let Ok(ray) = trace_broken_ray(a1, d_in, scene, 1) else { continue };
                    let hit_ok = ray.reflecting_obstacles.first() == Some(&reflector)
                        && ray.reflection_points.first().is_some_and(|q| (*q - p).norm() < 1e-9 * (1.0 + l));
                    if !hit_ok {
                        continue;
                    }
                    let mut b1 = BeamSpec::straight(a1, d_in, b.radius, b.radius, 1.0);
                    b1.path = BeamPath::Broken { max_reflections: 1 };
                    let b2 = BeamSpec::straight(a2, (m - a2).normalized(), b.radius, b.radius, 1.0);
                    if let Some(winding) = matching_winding(scene, &b1, &b2, &target) {
                        return Some(MeasurementCircuit {
                            kind: CircuitKind::BrokenIsolating,
                            beam1: b1,
                            beam2: b2,
                            winding,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Circuits whose winding matrix is the identity where straight triangles
/// separate the obstacles, and otherwise unimodular (cluster circuits plus
/// broken-ray circuits).
pub fn design_measurements(scene: &Scene) -> Result<Vec<MeasurementCircuit>> {
    let m = scene.obstacles().len();
    if m == 0 {
        return Ok(vec![]);
    }
    let mut rows: Vec<Option<MeasurementCircuit>> = (0..m).map(|j| isolating_circuit(scene, j)).collect();
    let missing: Vec<usize> = (0..m).filter(|&j| rows[j].is_none()).collect();

    // group the unseparated obstacles by proximity
    let obs = scene.obstacles();
    let near = |i: usize, j: usize| {
        (obs[i].center - obs[j].center).norm() - obs[i].radius - obs[j].radius < 2.0 * obs[i].radius.max(obs[j].radius)
    };
    let mut clusters: Vec<Vec<usize>> = vec![];
    for &j in &missing {
        match clusters.iter_mut().find(|c| c.iter().any(|&i| near(i, j))) {
            Some(c) => c.push(j),
            None => clusters.push(vec![j]),
        }
    }
    let neighbours = |j: usize| {
        let mut v: Vec<usize> = (0..m).filter(|&i| i != j).collect();
        v.sort_by(|&x, &y| {
            let dx = (obs[x].center - obs[j].center).norm() - obs[x].radius;
            let dy = (obs[y].center - obs[j].center).norm() - obs[y].radius;
            dx.total_cmp(&dy)
        });
        v
    };
    let broken = |j: usize| neighbours(j).into_iter().find_map(|i| broken_isolating_circuit(scene, j, i));

    let mut extra = vec![];
    for cluster in clusters {
        if cluster.len() > 1 {
            if let Some(enc) = enclosing_circuit(scene, &cluster) {
                // the cluster circuit replaces the last member's own circuit
                let singles: Vec<Option<MeasurementCircuit>> = cluster[..cluster.len() - 1].iter().map(|&j| broken(j)).collect();
                if singles.iter().all(Option::is_some) {
                    for (&j, c) in cluster.iter().zip(singles) {
                        rows[j] = c;
                    }
                    extra.push(enc);
                    continue;
                }
            }
        }
        for &j in &cluster {
            rows[j] = broken(j);
        }
    }

    let mut circuits: Vec<MeasurementCircuit> = vec![];
    for (j, r) in rows.into_iter().enumerate() {
        match r {
            Some(c) => circuits.push(c),
            None if extra.iter().any(|c: &MeasurementCircuit| c.winding[j] != 0) => {}
            None => {
                return Err(Error::DesignFailure(format!(
                    "no circuit isolates obstacle {j}; supply circuits manually"
                )))
            }
        }
    }
    circuits.extend(extra);
    let n: Vec<Vec<i64>> = circuits.iter().map(|c| c.winding.clone()).collect();
    let s = smith(&n);
    if n.len() != m || s.rank() != m || s.index() != 1 {
        return Err(Error::DesignFailure("designed circuits do not form a unimodular system".into()));
    }
    Ok(circuits)
}

/// Oracle reporting the geometric-optics circuit phase of each circuit.
pub fn go_oracle<'a>(
    scene: &'a Scene,
    potential: &'a VectorPotential,
    rel_tol: f64,
) -> impl FnMut(&MeasurementCircuit) -> Result<Beta> + 'a {
    move |c| predict_two_beam(scene, potential, &c.beam1, &c.beam2, rel_tol).map(|p| Beta::Phase(p.alpha))
}
