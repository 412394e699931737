//! Two-beam interference on the lattice and fringe-phase extraction.
//!
//! Each packet is dressed with the gauge phase accumulated along the straight
//! segment from the midpoint of the two anchors, so near its anchor it is a
//! free packet in a local pure gauge. Carried to the meeting point, the
//! relative phase of the two packets is then the circuit phase
//! I₁ − I₂ + I₃ of the geometric-optics prediction plus the kinematic term
//! (m/ħ)k(ω − θ)·x, which the fit removes.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::{line_integral, VectorPotential};
use crate::geometry::Scene;
use crate::optics::{beam_legs, BeamSpec};
use crate::path::{wrap_pi, Path};
use crate::tdse::field::{init_packet, Field};
use crate::tdse::lattice::{build_lattice, Lattice, LatticeSpec};
use crate::tdse::solver::Propagator;
use crate::vec2::Vec2;

/// Knobs of the experiment that have sensible defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoBeamOptions {
    /// Overlap Σ|ψ₁||ψ₂|Δx² below which the run is rejected.
    pub min_overlap: f64,
    /// Screen samples per lattice spacing.
    pub screen_density: usize,
    /// Screen points whose weight |ψ₁||ψ₂| falls below this fraction of the
    /// maximum are left out of the fit.
    pub weight_floor: f64,
    /// Quadrature tolerance for dressing phases of potentials with custom terms.
    pub rel_tol: f64,
}

impl Default for TwoBeamOptions {
    fn default() -> Self {
        Self {
            min_overlap: 1e-3,
            screen_density: 2,
            weight_floor: 0.05,
            rel_tol: 1e-10,
        }
    }
}

/// Outcome of a two-beam run.
#[derive(Debug, Clone, Serialize)]
pub struct FringeRecord {
    /// Screen coordinate s along `screen_direction`, zero at the meeting point.
    pub screen: Vec<f64>,
    /// |ψ₁ − ψ₂|² on the screen.
    pub density: Vec<f64>,
    pub density_1: Vec<f64>,
    pub density_2: Vec<f64>,
    /// Fitted offset of the fringes relative to the kinematic phase, wrapped
    /// to (−π, π]. Matches the circuit phase α for straight beams.
    pub fringe_phase: f64,
    /// Fitted fringe wavenumber κ and the geometric seed (m/ħ)k|ω − θ|.
    pub fringe_wavenumber: f64,
    pub seed_wavenumber: f64,
    /// Weighted RMS misfit of the normalized interference term.
    pub fit_residual: f64,
    pub overlap: f64,
    pub meeting_point: Vec2,
    pub screen_direction: Vec2,
    pub time: f64,
    pub steps: usize,
    pub solver_iterations: usize,
    pub clipped_fraction: [f64; 2],
    /// ψ₁ − ψ₂ at the final time.
    #[serde(skip)]
    pub field: Field,
}

/// Meeting point of beam 2 with beam 1's trajectory and the direction of
/// beam 1 on the leg where they meet, plus both travel distances.
fn meeting(scene: &Scene, beam1: &BeamSpec, beam2: &BeamSpec) -> Result<(Vec2, Vec2, f64, f64)> {
    let legs = beam_legs(scene, beam1)?;
    let mut travelled = 0.0;
    for leg in &legs {
        let denom = beam2.direction.cross(leg.direction);
        if denom.abs() > 1e-12 {
            let w = leg.start - beam2.anchor;
            let s = w.cross(leg.direction) / denom;
            let t = w.cross(beam2.direction) / denom;
            if s > 0.0 && t > 0.0 && t <= leg.length {
                return Ok((leg.start + leg.direction * t, leg.direction, travelled + t, s));
            }
        }
        travelled += leg.length;
    }
    Err(Error::ExperimentDesign("beams do not meet".into()))
}

/// Number of steps after which the packet centres, moving at the free group
/// velocity k, have on average reached the meeting point.
pub fn meeting_steps(scene: &Scene, beam1: &BeamSpec, beam2: &BeamSpec, dt: f64) -> Result<usize> {
    let (_, _, d1, d2) = meeting(scene, beam1, beam2)?;
    let t = 0.5 * (d1 / beam1.wavenumber + d2 / beam2.wavenumber);
    Ok((t / dt).round().max(1.0) as usize)
}

/// Multiplies the packet by e^{iΛ}, Λ(x) being the phase of A along the
/// straight segment from `origin` to x.
fn dress(field: &mut Field, lattice: &Lattice, scene: &Scene, pot: &VectorPotential, origin: Vec2, rel_tol: f64) -> Result<()> {
    let spec = *lattice.spec();
    for (k, v) in field.values_mut().iter_mut().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let x = spec.position_of(k);
        if let Some(j) = scene.segment_blocked(origin, x) {
            return Err(Error::ExperimentDesign(format!(
                "packet is not in a simply connected region with its partner: obstacle {j} lies between"
            )));
        }
        let phase = match pot.exact_edge_phase(origin, x) {
            Some(p) => p,
            None if (x - origin).norm() == 0.0 => 0.0,
            None => line_integral(pot, &Path::polyline(&[origin, x]), rel_tol)?,
        };
        *v *= Complex64::from_polar(1.0, phase);
    }
    Ok(())
}

/// Runs the experiment with default options.
pub fn two_beam_experiment(
    scene: &Scene,
    potential: &VectorPotential,
    beam1: &BeamSpec,
    beam2: &BeamSpec,
    spec: LatticeSpec,
    n_steps: usize,
) -> Result<FringeRecord> {
    two_beam_experiment_with(scene, potential, beam1, beam2, spec, n_steps, TwoBeamOptions::default())
}

/// Launches both dressed packets, evolves them to time `n_steps·dt` and fits
/// the fringes of |ψ₁ − ψ₂|² on the screen line through the meeting point.
///
/// The beams are evolved one after the other; by linearity this equals
/// evolving the superposition ψ₁ − ψ₂, and it gives the fit access to the
/// individual amplitudes.
pub fn two_beam_experiment_with(
    scene: &Scene,
    potential: &VectorPotential,
    beam1: &BeamSpec,
    beam2: &BeamSpec,
    spec: LatticeSpec,
    n_steps: usize,
    opts: TwoBeamOptions,
) -> Result<FringeRecord> {
    if (beam1.wavenumber - beam2.wavenumber).abs() > 1e-12 * beam1.wavenumber {
        return Err(Error::InvalidInput("beams must share one wavenumber".into()));
    }
    if beam2.path != crate::optics::BeamPath::Straight {
        return Err(Error::InvalidInput("beam 2 must be straight".into()));
    }
    let (m, omega, _, _) = meeting(scene, beam1, beam2)?;
    let theta = beam2.direction;
    let diff = omega - theta;
    if diff.norm() < 1e-6 {
        return Err(Error::ExperimentDesign("parallel beams produce no fringes".into()));
    }
    let lattice = build_lattice(scene, potential, spec, None)?;
    let origin = (beam1.anchor + beam2.anchor) * 0.5;

    let mut prop = Propagator::new(&lattice);
    let mut finals = Vec::with_capacity(2);
    let mut clipped = [0.0; 2];
    for (n, beam) in [beam1, beam2].into_iter().enumerate() {
        let init = init_packet(&lattice, beam)?;
        clipped[n] = init.clipped_fraction;
        let mut f = init.field;
        dress(&mut f, &lattice, scene, potential, origin, opts.rel_tol)?;
        for _ in 0..n_steps {
            prop.step(&mut f)?;
        }
        finals.push(f);
    }
    let (f1, f2) = (&finals[0], &finals[1]);

    let dx = spec.spacing;
    let overlap: f64 = f1
        .values()
        .iter()
        .zip(f2.values())
        .map(|(a, b)| a.norm() * b.norm())
        .sum::<f64>()
        * dx
        * dx;
    if overlap < opts.min_overlap {
        return Err(Error::ExperimentDesign(format!(
            "packets do not overlap at the final time (overlap {overlap:.3e})"
        )));
    }

    // Screen line through the meeting point along ω − θ, clipped to the grid.
    let e = diff.normalized();
    let h = dx / opts.screen_density.max(1) as f64;
    let reach = 2.0 * beam1.transverse_width.max(beam2.transverse_width) / (0.5 * diff.norm()).max(0.1);
    let n_half = (reach / h).ceil() as i64;
    let (mut screen, mut dens, mut d1, mut d2) = (vec![], vec![], vec![], vec![]);
    let mut amps = vec![];
    for i in -n_half..=n_half {
        let s = i as f64 * h;
        let p = m + e * s;
        if let (Some(a), Some(b)) = (f1.interpolate(spec.origin, p), f2.interpolate(spec.origin, p)) {
            screen.push(s);
            dens.push((a - b).norm_sqr());
            d1.push(a.norm_sqr());
            d2.push(b.norm_sqr());
            amps.push((a, b));
        }
    }

    // cos of the relative phase, weighted by the product of amplitudes
    let wmax = amps.iter().map(|(a, b)| a.norm() * b.norm()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64, f64)> = screen
        .iter()
        .zip(&amps)
        .filter_map(|(&s, (a, b))| {
            let w = a.norm() * b.norm();
            (w > opts.weight_floor * wmax && w > 0.0).then(|| (s, (a * b.conj()).re / w, w))
        })
        .collect();
    if pts.len() < 8 {
        return Err(Error::ExperimentDesign("too few overlapping screen points to fit fringes".into()));
    }

    let c = spec.constants;
    let kw = c.mass / c.hbar * beam1.wavenumber;
    let seed = kw * diff.norm();
    let kappa = golden_min(|q| fit_cosine(&pts, q).3, 0.7 * seed, 1.3 * seed, 1e-10 * seed);
    let (_, a, b, resid) = fit_cosine(&pts, kappa);
    let phi = (-b).atan2(a);
    let fringe_phase = wrap_pi(phi - kw * diff.dot(m));

    let field = f1.difference(f2)?;
    Ok(FringeRecord {
        screen,
        density: dens,
        density_1: d1,
        density_2: d2,
        fringe_phase,
        fringe_wavenumber: kappa,
        seed_wavenumber: seed,
        fit_residual: resid,
        overlap,
        meeting_point: m,
        screen_direction: e,
        time: field.time,
        steps: n_steps,
        solver_iterations: prop.total_iterations,
        clipped_fraction: clipped,
        field,
    })
}

/// Weighted least squares of y ≈ c₀ + a cos κs + b sin κs over (s, y, w).
/// Returns (c₀, a, b, weighted RMS residual).
fn fit_cosine(pts: &[(f64, f64, f64)], kappa: f64) -> (f64, f64, f64, f64) {
    let mut ata = [[0.0; 3]; 3];
    let mut aty = [0.0; 3];
    for &(s, y, w) in pts {
        let row = [1.0, (kappa * s).cos(), (kappa * s).sin()];
        for i in 0..3 {
            aty[i] += w * row[i] * y;
            for j in 0..3 {
                ata[i][j] += w * row[i] * row[j];
            }
        }
    }
    let x = solve3(ata, aty).unwrap_or([0.0; 3]);
    let (mut num, mut den) = (0.0, 0.0);
    for &(s, y, w) in pts {
        let r = y - x[0] - x[1] * (kappa * s).cos() - x[2] * (kappa * s).sin();
        num += w * r * r;
        den += w;
    }
    (x[0], x[1], x[2], (num / den).sqrt())
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> Option<[f64; 3]> {
    for col in 0..3 {
        let piv = (col..3).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

/// Minimizer of a unimodal function on [lo, hi].
fn golden_min<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{ab_potential, PhysicalConstants};
    use crate::geometry::{Bound, Disk};
    use crate::optics::predict_two_beam;
    use std::f64::consts::PI;

    #[test]
    fn cosine_fit_recovers_phase_and_wavenumber() {
        let pts: Vec<_> = (0..200)
            .map(|i| {
                let s = -20.0 + 0.2 * i as f64;
                (s, 0.1 + (0.7 * s + 1.2).cos(), (-s * s / 100.0).exp())
            })
            .collect();
        let k = golden_min(|q| fit_cosine(&pts, q).3, 0.5, 0.9, 1e-12);
        let (c0, a, b, r) = fit_cosine(&pts, k);
        assert!((k - 0.7).abs() < 1e-8);
        assert!((c0 - 0.1).abs() < 1e-8);
        assert!(((-b).atan2(a) - 1.2).abs() < 1e-8);
        assert!(r < 1e-8);
    }

    fn setup(flux: f64) -> (Scene, VectorPotential, BeamSpec, BeamSpec, LatticeSpec) {
        let scene = Scene::new(
            vec![Disk::with_flux(Vec2::new(0.0, -5.0), 2.0, flux)],
            Bound::new(Vec2::new(-63.0, -63.0), Vec2::new(63.0, 63.0)),
        )
        .unwrap();
        let pot = ab_potential(&scene, PhysicalConstants::default()).unwrap();
        let half: f64 = 0.6;
        let m = Vec2::new(0.0, 20.0);
        let w = Vec2::new(half.sin(), half.cos());
        let t = Vec2::new(-half.sin(), half.cos());
        let b1 = BeamSpec::straight(m - w * 50.0, w, 10.0, 16.0, 0.7);
        let b2 = BeamSpec::straight(m - t * 50.0, t, 10.0, 16.0, 0.7);
        (scene, pot, b1, b2, LatticeSpec::centered(128, 1.0, Vec2::ZERO, 1.0))
    }

    #[test]
    fn small_lattice_fringes_follow_circuit_phase() {
        for flux in [0.0, PI] {
            let (scene, pot, b1, b2, spec) = setup(flux);
            let go = predict_two_beam(&scene, &pot, &b1, &b2, 1e-10).unwrap();
            let n = meeting_steps(&scene, &b1, &b2, spec.dt).unwrap();
            let rec = two_beam_experiment(&scene, &pot, &b1, &b2, spec, n).unwrap();
            assert!(
                wrap_pi(rec.fringe_phase - go.alpha).abs() < 0.2,
                "flux {flux}: fringe {} vs alpha {}",
                rec.fringe_phase,
                go.alpha
            );
        }
    }

    #[test]
    fn separated_packets_are_rejected() {
        let (scene, pot, b1, b2, spec) = setup(0.0);
        let err = two_beam_experiment(&scene, &pot, &b1, &b2, spec, 0).unwrap_err();
        assert!(matches!(err, Error::ExperimentDesign(_)));
    }
}
