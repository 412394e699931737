//! Recovery of per-obstacle fluxes mod 2π from circuit phases or
//! interference intensities over circuits with known winding vectors.
//!
//! A circuit with winding vector n measures β = Σ nⱼαⱼ (mod 2π). Stacking
//! circuits gives N·α ≡ β. The residue classes of α are determined uniquely
//! exactly when every invariant factor of N is 1; larger factors leave a coset
//! of admissible solutions, which is enumerated rather than guessed.

mod design;
mod snf;

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::wrap_pi;

pub use design::{
    broken_isolating_circuit, design_measurements, enclosing_circuit, go_oracle, isolating_circuit, MeasurementCircuit,
};
pub use snf::{smith, Smith};

/// Base residual tolerance of N·α ≡ β, widened by the noise bound.
pub const RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Cosets larger than this are reported by size only.
pub const MAX_ENUMERATED: u64 = 4096;

/// One measured circuit: a phase, or an intensity 4 sin²(β/2) that fixes β
/// only up to sign.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Beta {
    Phase(f64),
    Intensity(f64),
}

/// Winding matrix (rows = circuits, columns = obstacles) and measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxSystem {
    #[serde(rename = "N")]
    pub n: Vec<Vec<i64>>,
    pub betas: Vec<Beta>,
    /// Bound on the phase noise of each measurement.
    #[serde(default)]
    pub noise_bound: f64,
}

impl FluxSystem {
    pub fn new(n: Vec<Vec<i64>>, betas: Vec<Beta>) -> Self {
        Self { n, betas, noise_bound: 0.0 }
    }

    pub fn unknowns(&self) -> usize {
        self.n.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.unknowns();
        if self.n.is_empty() || m == 0 {
            return Err(Error::InvalidInput("flux system has no equations or no unknowns".into()));
        }
        if self.n.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidInput("winding matrix rows differ in length".into()));
        }
        if self.betas.len() != self.n.len() {
            return Err(Error::InvalidInput("one measurement per winding row is required".into()));
        }
        if !(self.noise_bound >= 0.0 && self.noise_bound.is_finite()) {
            return Err(Error::InvalidInput("noise bound must be nonnegative".into()));
        }
        for b in &self.betas {
            let v = match b {
                Beta::Phase(v) | Beta::Intensity(v) => *v,
            };
            if !v.is_finite() {
                return Err(Error::Data("measurement is not finite".into()));
            }
        }
        Ok(())
    }

    fn tolerance(&self) -> f64 {
        RESIDUAL_TOLERANCE + self.noise_bound
    }
}

/// Recovered fluxes as representatives in [0, 2π), with the admissible
/// representatives of each flux (a single value when the data pin it down).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FluxEstimate {
    pub alphas: Vec<f64>,
    pub ambiguity: Vec<Vec<f64>>,
    /// Largest |N·α − β| mod 2π over the equations.
    #[serde(default)]
    pub residual: f64,
}

impl FluxEstimate {
    pub fn is_unique(&self) -> bool {
        self.ambiguity.iter().all(|s| s.len() <= 1)
    }
}

/// Representative of x mod 2π in [0, 2π).
pub fn mod_tau(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Phases compatible with an intensity 4 sin²(β/2): {β, 2π − β}, a single
/// value at 0 and 4. Values within 1e-9 outside [0, 4] are clamped.
pub fn invert_intensity(intensity: f64) -> Result<Vec<f64>> {
    if !(-1e-9..=4.0 + 1e-9).contains(&intensity) {
        return Err(Error::Data(format!("intensity {intensity} is outside [0, 4]")));
    }
    let i = intensity.clamp(0.0, 4.0);
    if i == 0.0 {
        return Ok(vec![0.0]);
    }
    if i == 4.0 {
        return Ok(vec![std::f64::consts::PI]);
    }
    let b = 2.0 * (i.sqrt() / 2.0).asin();
    Ok(vec![b, TAU - b])
}

/// Largest wrapped residual |N·α − β| over rows.
pub fn residual(n: &[Vec<i64>], alphas: &[f64], betas: &[f64]) -> f64 {
    n.iter()
        .zip(betas)
        .map(|(row, b)| {
            let s: f64 = row.iter().zip(alphas).map(|(&k, a)| k as f64 * a).sum();
            wrap_pi(s - b).abs()
        })
        .fold(0.0, f64::max)
}

fn matvec(m: &[Vec<i64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|r| r.iter().zip(x).map(|(&k, v)| k as f64 * v).sum())
        .collect()
}

/// Every α ∈ [0, 2π)ᵐ with N·α ≡ β, via the Smith form P·N·Q = D:
/// y = Q⁻¹α solves dᵢyᵢ ≡ (Pβ)ᵢ, so yᵢ = ((Pβ)ᵢ + 2πk)/dᵢ for k < dᵢ.
fn solution_coset(s: &Smith, betas: &[f64], limit: u64) -> Vec<Vec<f64>> {
    let m = s.q.len();
    // reduce β first so Pβ stays small
    let b: Vec<f64> = betas.iter().map(|&v| wrap_pi(v)).collect();
    let pb = matvec(&s.p, &b);
    let count = s.index();
    if count > limit {
        return vec![];
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut k = vec![0i64; m];
    loop {
        let y: Vec<f64> = (0..m).map(|i| (pb[i] + TAU * k[i] as f64) / s.d[i] as f64).collect();
        out.push(matvec(&s.q, &y).into_iter().map(mod_tau).collect());
        // odometer over k_i < d_i
        let mut i = 0;
        loop {
            if i == m {
                return out;
            }
            k[i] += 1;
            if k[i] < s.d[i] {
                break;
            }
            k[i] = 0;
            i += 1;
        }
    }
}

/// Solves N·α ≡ β (mod 2π) for phase measurements.
///
/// Rank below the number of unknowns is a rank-deficient error. A lattice
/// index above 1 is an ambiguity error carrying the coset size and, for
/// cosets up to [`MAX_ENUMERATED`], every admissible solution.
pub fn solve_mod2pi(system: &FluxSystem) -> Result<FluxEstimate> {
    system.validate()?;
    let betas: Vec<f64> = system
        .betas
        .iter()
        .map(|b| match b {
            Beta::Phase(v) => Ok(*v),
            Beta::Intensity(_) => Err(Error::InvalidInput(
                "intensity measurements need recover_from_measurements".into(),
            )),
        })
        .collect::<Result<_>>()?;
    let m = system.unknowns();
    let s = smith(&system.n);
    if s.rank() < m {
        return Err(Error::RankDeficient { rank: s.rank(), unknowns: m });
    }
    let tol = system.tolerance();
    let candidates = solution_coset(&s, &betas, MAX_ENUMERATED);
    let index = s.index();
    if index > 1 {
        let admissible: Vec<Vec<f64>> = candidates
            .into_iter()
            .filter(|a| residual(&system.n, a, &betas) <= tol)
            .collect();
        if admissible.is_empty() && index <= MAX_ENUMERATED {
            let r = solution_coset(&s, &betas, MAX_ENUMERATED)
                .iter()
                .map(|a| residual(&system.n, a, &betas))
                .fold(f64::INFINITY, f64::min);
            return Err(Error::Inconsistent { residual: r });
        }
        return Err(Error::Ambiguous { coset_size: index, solutions: admissible });
    }
    let alphas = candidates.into_iter().next().expect("index 1 coset has one member");
    let r = residual(&system.n, &alphas, &betas);
    if r > tol {
        return Err(Error::Inconsistent { residual: r });
    }
    Ok(FluxEstimate {
        ambiguity: alphas.iter().map(|&a| vec![a]).collect(),
        alphas,
        residual: r,
    })
}

/// Solves a system whose rows may be intensities.
///
/// Each intensity contributes its pair {β, 2π − β}; every combination is
/// solved and the consistent ones are kept. The union of surviving solutions
/// is reported per obstacle as the residual ambiguity.
pub fn recover_from_measurements(system: &FluxSystem) -> Result<FluxEstimate> {
    system.validate()?;
    let options: Vec<Vec<f64>> = system
        .betas
        .iter()
        .map(|b| match b {
            Beta::Phase(v) => Ok(vec![*v]),
            Beta::Intensity(i) => invert_intensity(*i),
        })
        .collect::<Result<_>>()?;
    let combos: usize = options.iter().map(Vec::len).product();
    if combos > 1 << 16 {
        return Err(Error::InvalidInput("too many intensity-only measurements to enumerate".into()));
    }
    let mut solutions: Vec<(Vec<f64>, f64)> = vec![];
    let mut best_residual = f64::INFINITY;
    let mut idx = vec![0usize; options.len()];
    for _ in 0..combos {
        let betas: Vec<Beta> = idx.iter().zip(&options).map(|(&i, o)| Beta::Phase(o[i])).collect();
        let sys = FluxSystem { n: system.n.clone(), betas, noise_bound: system.noise_bound };
        match solve_mod2pi(&sys) {
            Ok(est) => solutions.push((est.alphas, est.residual)),
            Err(Error::Inconsistent { residual }) => best_residual = best_residual.min(residual),
            Err(e) => return Err(e),
        }
        for (i, o) in idx.iter_mut().zip(&options) {
            *i += 1;
            if *i < o.len() {
                break;
            }
            *i = 0;
        }
    }
    if solutions.is_empty() {
        return Err(Error::Inconsistent { residual: best_residual });
    }
    let tol = system.tolerance();
    let m = system.unknowns();
    let mut ambiguity: Vec<Vec<f64>> = vec![vec![]; m];
    for (a, _) in &solutions {
        for (set, &v) in ambiguity.iter_mut().zip(a) {
            if !set.iter().any(|&u| wrap_pi(u - v).abs() <= tol) {
                set.push(v);
            }
        }
    }
    for set in &mut ambiguity {
        set.sort_by(f64::total_cmp);
    }
    let (alphas, residual) = solutions.swap_remove(0);
    Ok(FluxEstimate { alphas, ambiguity, residual })
}

/// Designs circuits for the scene, measures each with `oracle` and solves.
pub fn recover<F>(scene: &crate::geometry::Scene, mut oracle: F) -> Result<FluxEstimate>
where
    F: FnMut(&MeasurementCircuit) -> Result<Beta>,
{
    let circuits = design_measurements(scene)?;
    let betas = circuits.iter().map(&mut oracle).collect::<Result<Vec<_>>>()?;
    let system = FluxSystem::new(circuits.iter().map(|c| c.winding.clone()).collect(), betas);
    recover_from_measurements(&system)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn phases(v: &[f64]) -> Vec<Beta> {
        v.iter().map(|&b| Beta::Phase(b)).collect()
    }

    #[test]
    fn intensity_inversion() {
        assert_eq!(invert_intensity(0.0).unwrap(), vec![0.0]);
        assert_eq!(invert_intensity(4.0).unwrap(), vec![PI]);
        let p = invert_intensity(2.0).unwrap();
        assert!((p[0] - PI / 2.0).abs() < 1e-15 && (p[1] - 1.5 * PI).abs() < 1e-15);
        assert_eq!(invert_intensity(-5e-10).unwrap(), vec![0.0]);
        assert!(matches!(invert_intensity(4.1), Err(Error::Data(_))));
    }

    #[test]
    fn identity_system() {
        let est = solve_mod2pi(&FluxSystem::new(vec![vec![1, 0], vec![0, 1]], phases(&[1.0, 2.0]))).unwrap();
        assert!((est.alphas[0] - 1.0).abs() < 1e-15 && (est.alphas[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn triangular_system() {
        let est = solve_mod2pi(&FluxSystem::new(vec![vec![1, 1], vec![0, 1]], phases(&[5.0 * PI / 6.0, PI / 3.0]))).unwrap();
        assert!((est.alphas[0] - PI / 2.0).abs() < 1e-14);
        assert!((est.alphas[1] - PI / 3.0).abs() < 1e-14);
    }

    #[test]
    fn determinant_two_is_ambiguous() {
        let err = solve_mod2pi(&FluxSystem::new(vec![vec![2, 0], vec![0, 1]], phases(&[1.0, 2.0]))).unwrap_err();
        match err {
            Error::Ambiguous { coset_size, solutions } => {
                assert_eq!(coset_size, 2);
                assert_eq!(solutions.len(), 2);
                let mut a: Vec<f64> = solutions.iter().map(|s| s[0]).collect();
                a.sort_by(f64::total_cmp);
                assert!((a[0] - 0.5).abs() < 1e-14 && (a[1] - 0.5 - PI).abs() < 1e-14);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn singular_is_rank_deficient() {
        let err = solve_mod2pi(&FluxSystem::new(vec![vec![1, 1], vec![2, 2]], phases(&[1.0, 2.0]))).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { rank: 1, unknowns: 2 }));
    }

    #[test]
    fn contradictory_rows_are_inconsistent() {
        let sys = FluxSystem::new(vec![vec![1, 0], vec![0, 1], vec![1, 1]], phases(&[1.0, 2.0, 1.0]));
        assert!(matches!(solve_mod2pi(&sys), Err(Error::Inconsistent { .. })));
        let mut noisy = sys.clone();
        noisy.betas[2] = Beta::Phase(3.0 + 1e-6);
        noisy.noise_bound = 1e-5;
        assert!(solve_mod2pi(&noisy).is_ok());
    }

    #[test]
    fn intensities_are_intersected() {
        // α = (1, 2): the pair circuit rules out flipping only one sign
        let a = [1.0f64, 2.0];
        let i = |b: f64| 4.0 * (b / 2.0).sin().powi(2);
        let sys = FluxSystem::new(
            vec![vec![1, 0], vec![0, 1], vec![1, 1]],
            vec![Beta::Intensity(i(a[0])), Beta::Intensity(i(a[1])), Beta::Intensity(i(a[0] + a[1]))],
        );
        let est = recover_from_measurements(&sys).unwrap();
        // only the global reflection α → −α survives
        assert_eq!(est.ambiguity[0].len(), 2);
        assert_eq!(est.ambiguity[1].len(), 2);
        let flipped = [TAU - 1.0, TAU - 2.0];
        let ok = |x: &[f64]| (0..2).all(|k| wrap_pi(x[k] - a[k]).abs() < 1e-9)
            || (0..2).all(|k| wrap_pi(x[k] - flipped[k]).abs() < 1e-9);
        assert!(ok(&est.alphas));
    }

    #[test]
    fn system_serializes_with_named_fields() {
        let sys = FluxSystem::new(vec![vec![1, 0], vec![0, 1]], vec![Beta::Phase(1.0), Beta::Intensity(2.0)]);
        let text = serde_json::to_string(&sys).unwrap();
        assert!(text.contains("\"N\":[[1,0],[0,1]]"));
        assert!(text.contains("{\"phase\":1.0}") && text.contains("{\"intensity\":2.0}"));
        let back: FluxSystem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, sys);
    }
}
