//! Electric Aharonov-Bohm effect in a domain whose time slices split in two
//! and merge again.
//!
//! The domain is the disk of radius R minus two horizontal slabs
//! {|x₂| ≤ h, x₁ ≥ τR} and {|x₂| ≤ h, x₁ ≤ −τR}. τ falls from 1/2 to 0
//! (the slabs grow until they meet and cut the disk into an upper and a lower
//! part), stays at 0, then rises back to 1/2. While the disk is cut, each
//! part carries its own spatially constant potential, so there is no electric
//! field anywhere, yet the relative phase α = (e/ħ)∫(V₁ − V₂)dt changes the
//! densities after the parts merge unless α ∈ 2πℤ.

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gauge::PhysicalConstants;
use crate::quadrature::integrate_breakpoints;
use crate::tdse::{Field, Lattice, LatticeSpec, Propagator};
use crate::vec2::Vec2;

/// Largest fraction of the current probability a single mask update may remove.
pub const MAX_STEP_LOSS: f64 = 0.2;
/// Smallest probability each component must hold when the disk is cut.
pub const MIN_COMPONENT_PROBABILITY: f64 = 0.1;

/// Slab geometry and the grow / hold / retract timetable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainSchedule {
    #[serde(default = "one")]
    pub radius: f64,
    pub slab_half_width: f64,
    pub grow_duration: f64,
    pub hold_duration: f64,
    /// Defaults to the grow duration.
    #[serde(default)]
    pub retract_duration: Option<f64>,
    /// Extra time in the fully retracted disk after the slabs are gone.
    #[serde(default)]
    pub tail_duration: f64,
}

fn one() -> f64 {
    1.0
}

impl DomainSchedule {
    pub fn new(slab_half_width: f64, grow_duration: f64, hold_duration: f64) -> Self {
        Self {
            radius: 1.0,
            slab_half_width,
            grow_duration,
            hold_duration,
            retract_duration: None,
            tail_duration: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.radius) || !ok(self.slab_half_width) || !ok(self.grow_duration) || !ok(self.hold_duration) {
            return Err(Error::InvalidInput("schedule lengths and durations must be positive".into()));
        }
        if self.slab_half_width >= 0.5 * self.radius {
            return Err(Error::InvalidInput("slabs must be thinner than the disk radius".into()));
        }
        if !ok(self.retract()) || !(self.tail_duration >= 0.0 && self.tail_duration.is_finite()) {
            return Err(Error::InvalidInput("retract and tail durations must be positive".into()));
        }
        Ok(())
    }

    pub fn retract(&self) -> f64 {
        self.retract_duration.unwrap_or(self.grow_duration)
    }

    /// Start and end of the cut (static split) phase.
    pub fn split_window(&self) -> (f64, f64) {
        (self.grow_duration, self.grow_duration + self.hold_duration)
    }

    /// Times after the parts start to merge again.
    pub fn post_merge_window(&self) -> (f64, f64) {
        (self.split_window().1, self.total_duration())
    }

    pub fn total_duration(&self) -> f64 {
        self.grow_duration + self.hold_duration + self.retract() + self.tail_duration
    }

    /// Slab tip parameter τ(t) ∈ [0, 1/2].
    pub fn tau(&self, t: f64) -> f64 {
        let (a, b) = self.split_window();
        if t <= 0.0 {
            0.5
        } else if t < a {
            0.5 * (1.0 - t / a)
        } else if t <= b {
            0.0
        } else {
            (0.5 * (t - b) / self.retract()).min(0.5)
        }
    }

    /// Whether the point lies in the open domain at time t.
    pub fn contains(&self, p: Vec2, t: f64) -> bool {
        if p.norm() >= self.radius {
            return false;
        }
        !(p.y.abs() <= self.slab_half_width && p.x.abs() >= self.tau(t) * self.radius)
    }

    pub fn mask(&self, spec: &LatticeSpec, t: f64) -> Vec<bool> {
        (0..spec.len()).map(|k| self.contains(spec.position_of(k), t)).collect()
    }

    /// Uniform time grid of step `dt` covering the schedule.
    pub fn times(&self, dt: f64) -> Result<Vec<f64>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidInput("time step must be positive".into()));
        }
        let n = (self.total_duration() / dt).round() as usize;
        Ok((0..=n).map(|i| i as f64 * dt).collect())
    }
}

/// Time profile of a component potential.
#[derive(Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialProfile {
    Constant(f64),
    /// (t, V) nodes, linearly interpolated, increasing in t.
    Table(Vec<[f64; 2]>),
    #[serde(skip)]
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl std::fmt::Debug for PotentialProfile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PotentialProfile::Constant(v) => write!(f, "Constant({v})"),
            PotentialProfile::Table(t) => write!(f, "Table({} nodes)", t.len()),
            PotentialProfile::Function(_) => f.write_str("Function"),
        }
    }
}

impl PotentialProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            PotentialProfile::Constant(v) => *v,
            PotentialProfile::Table(nodes) => {
                let i = nodes.partition_point(|n| n[0] <= t);
                if i == 0 {
                    nodes.first().map_or(0.0, |n| n[1])
                } else if i == nodes.len() {
                    nodes[i - 1][1]
                } else {
                    let ([t0, v0], [t1, v1]) = (nodes[i - 1], nodes[i]);
                    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
                }
            }
            PotentialProfile::Function(f) => f(t),
        }
    }

    fn nodes(&self) -> Vec<f64> {
        match self {
            PotentialProfile::Table(n) => n.iter().map(|n| n[0]).collect(),
            _ => vec![],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PotentialProfile::Constant(v) if !v.is_finite() => Err(Error::InvalidInput("potential is not finite".into())),
            PotentialProfile::Table(n) => {
                if n.is_empty() || n.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
                    return Err(Error::InvalidInput("potential table needs finite nodes".into()));
                }
                if n.windows(2).any(|w| w[1][0] <= w[0][0]) {
                    return Err(Error::InvalidInput("potential table times must increase".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Potentials V₁ on the upper part and V₂ on the lower part, switched on only
/// inside `window`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitPotential {
    #[serde(rename = "V1")]
    pub v1: PotentialProfile,
    #[serde(rename = "V2")]
    pub v2: PotentialProfile,
    pub window: [f64; 2],
}

impl SplitPotential {
    pub fn new(v1: PotentialProfile, v2: PotentialProfile, window: [f64; 2]) -> Self {
        Self { v1, v2, window }
    }

    /// Constant potentials over the hold phase shrunk by `margin` at each end.
    pub fn constant(v1: f64, v2: f64, schedule: &DomainSchedule, margin: f64) -> Self {
        let (a, b) = schedule.split_window();
        Self::new(
            PotentialProfile::Constant(v1),
            PotentialProfile::Constant(v2),
            [a + margin, b - margin],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.window;
        if !(a.is_finite() && b.is_finite() && a <= b) {
            return Err(Error::InvalidInput("potential window must be an interval".into()));
        }
        self.v1.validate()?;
        self.v2.validate()
    }

    /// V on the given component (+1 upper, −1 lower) at time t.
    pub fn eval(&self, component: i8, t: f64) -> f64 {
        if t < self.window[0] || t > self.window[1] {
            return 0.0;
        }
        match component {
            1 => self.v1.eval(t),
            -1 => self.v2.eval(t),
            _ => 0.0,
        }
    }

    /// (e/ħ)∫V over [t0, t1] on one component.
    pub fn component_phase(&self, component: i8, t0: f64, t1: f64, constants: &PhysicalConstants) -> Result<f64> {
        let lo = t0.max(self.window[0]);
        let hi = t1.min(self.window[1]);
        if hi <= lo || component == 0 {
            return Ok(0.0);
        }
        let profile = if component > 0 { &self.v1 } else { &self.v2 };
        if let PotentialProfile::Constant(v) = profile {
            return Ok(constants.charge / constants.hbar * v * (hi - lo));
        }
        let mut bps = vec![lo];
        bps.extend(profile.nodes().into_iter().filter(|&t| t > lo && t < hi));
        bps.push(hi);
        let q = integrate_breakpoints(|t| profile.eval(t), &bps, 1e-13, 0.0)?;
        Ok(constants.charge / constants.hbar * q.value)
    }
}

/// Electric flux α = (e/ħ)∫(V₁ − V₂)dt over the potential window.
pub fn electric_flux(split: &SplitPotential, constants: &PhysicalConstants) -> Result<f64> {
    split.validate()?;
    let [a, b] = split.window;
    if b <= a {
        return Ok(0.0);
    }
    let mut bps = vec![a];
    let mut nodes: Vec<f64> = split.v1.nodes().into_iter().chain(split.v2.nodes()).filter(|&t| t > a && t < b).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    bps.extend(nodes);
    bps.push(b);
    let q = integrate_breakpoints(|t| split.v1.eval(t) - split.v2.eval(t), &bps, 1e-13, 1e-15 * (b - a))?;
    Ok(constants.charge / constants.hbar * q.value)
}

/// Labels 4-connected components of the mask: +1 for the component with the
/// larger mean x₂, −1 for the other, 0 for masked sites. Anything other than
/// exactly two components is a labeling error.
pub fn label_components(spec: &LatticeSpec, mask: &[bool]) -> Result<Vec<i8>> {
    let (nx, ny) = (spec.nx, spec.ny);
    let mut comp = vec![usize::MAX; mask.len()];
    let mut sums: Vec<(f64, usize)> = vec![];
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = sums.len();
        sums.push((0.0, 0));
        comp[start] = id;
        queue.push_back(start);
        while let Some(k) = queue.pop_front() {
            sums[id].0 += spec.position_of(k).y;
            sums[id].1 += 1;
            let (i, j) = (k % nx, k / nx);
            let mut visit = |q: usize| {
                if mask[q] && comp[q] == usize::MAX {
                    comp[q] = id;
                    queue.push_back(q);
                }
            };
            if i > 0 {
                visit(k - 1);
            }
            if i + 1 < nx {
                visit(k + 1);
            }
            if j > 0 {
                visit(k - nx);
            }
            if j + 1 < ny {
                visit(k + nx);
            }
        }
    }
    if sums.len() != 2 {
        return Err(Error::Labeling(format!("domain has {} components, expected 2", sums.len())));
    }
    let upper = if sums[0].0 / sums[0].1 as f64 >= sums[1].0 / sums[1].1 as f64 { 0 } else { 1 };
    Ok(comp
        .iter()
        .map(|&c| match c {
            usize::MAX => 0,
            c if c == upper => 1,
            _ => -1,
        })
        .collect())
}

/// Number of 4-connected components of the mask.
pub fn count_components(spec: &LatticeSpec, mask: &[bool]) -> usize {
    match label_components(spec, mask) {
        Ok(_) => 2,
        Err(Error::Labeling(m)) => m
            .split_whitespace()
            .nth(2)
            .and_then(|s| s.parse().ok())
            .unwrap_or(0),
        Err(_) => 0,
    }
}

/// Applies the whole split-window phase at once: sites labeled +1 are
/// multiplied by e^{−iα₁}, sites labeled −1 by e^{−iα₂}. Valid because V is
/// constant in space on each component, so it commutes with the kinetic term.
pub fn component_phase_evolution(
    field: &Field,
    split: &SplitPotential,
    labels: &[i8],
    constants: &PhysicalConstants,
) -> Result<Field> {
    if labels.len() != field.len() {
        return Err(Error::GridMismatch("labels and field sizes differ".into()));
    }
    let [a, b] = split.window;
    let a1 = split.component_phase(1, a, b, constants)?;
    let a2 = split.component_phase(-1, a, b, constants)?;
    apply_component_phases(field, labels, a1, a2)
}

fn apply_component_phases(field: &Field, labels: &[i8], a1: f64, a2: f64) -> Result<Field> {
    let (p1, p2) = (Complex64::from_polar(1.0, -a1), Complex64::from_polar(1.0, -a2));
    let mut out = field.clone();
    for (v, &l) in out.values_mut().iter_mut().zip(labels) {
        match l {
            1 => *v *= p1,
            -1 => *v *= p2,
            _ if *v != Complex64::new(0.0, 0.0) => {
                return Err(Error::Labeling("field is nonzero on an unlabeled site".into()))
            }
            _ => {}
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElectricMode {
    /// Free evolution with the component phases applied once, after the
    /// potential window closes.
    AnalyticPhase,
    /// The potential is applied step by step as exact per-component phases
    /// ∫V dt over each step.
    FullNumeric,
}

/// Densities on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityHistory {
    pub spec: LatticeSpec,
    pub times: Vec<f64>,
    pub densities: Vec<Vec<f64>>,
}

/// A full run: densities, per-step mask losses and the split-time balance.
#[derive(Debug, Clone)]
pub struct ElectricRun {
    pub history: DensityHistory,
    /// Probability removed by the mask update before each step.
    pub mask_loss: Vec<f64>,
    pub total_mask_loss: f64,
    /// Probability in the upper and lower parts when the disk is first cut.
    pub split_probability: [f64; 2],
    pub final_field: Field,
}

/// Evolves `u0` through the schedule on a zero-vector-potential lattice with
/// time-dependent masks. Newly masked sites are zeroed before each step; a
/// step that removes more than [`MAX_STEP_LOSS`] of the probability is an
/// error, as is a cut leaving less than [`MIN_COMPONENT_PROBABILITY`] in a part.
pub fn run_electric_ab(
    schedule: &DomainSchedule,
    split: &SplitPotential,
    u0: &Field,
    spec: LatticeSpec,
    mode: ElectricMode,
) -> Result<ElectricRun> {
    schedule.validate()?;
    split.validate()?;
    spec.validate()?;
    let (sa, sb) = schedule.split_window();
    let [wa, wb] = split.window;
    if wa < wb && (wa < sa || wb > sb) {
        return Err(Error::InvalidInput("potential window must lie inside the split phase".into()));
    }
    let reach = Vec2::new(schedule.radius, schedule.radius);
    let (lo, hi) = (spec.origin, spec.extent_max());
    if lo.x > -reach.x || lo.y > -reach.y || hi.x < reach.x || hi.y < reach.y {
        return Err(Error::InvalidInput("lattice must cover the disk".into()));
    }
    let constants = spec.constants;
    let n = spec.len();
    let base = Lattice::from_parts(spec, schedule.mask(&spec, 0.0), vec![0.0; n], vec![0.0; n], vec![0.0; n])?;
    let times = schedule.times(spec.dt)?;

    let mut f = Field::from_values(&spec, u0.values().to_vec(), 0.0)?;
    let outside = f.apply_mask(base.mask());
    if outside > 1e-12 * f.probability().max(1e-300) {
        return Err(Error::InvalidInput("initial field is not supported in the initial domain".into()));
    }
    let mut densities = vec![f.density()];
    let mut mask_loss = Vec::with_capacity(times.len());
    let mut split_probability = None;
    let mut phase_applied = false;

    for w in times.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let mask = schedule.mask(&spec, t1);
        let before = f.probability();
        let lost = f.apply_mask(&mask);
        if before > 0.0 && lost > MAX_STEP_LOSS * before {
            return Err(Error::ScheduleTooFast {
                step: mask_loss.len(),
                fraction: lost / before,
            });
        }
        mask_loss.push(lost);
        let split_now = t1 >= sa && t1 <= sb;
        let labels = if split_now { Some(label_components(&spec, &mask)?) } else { None };
        if let (Some(l), None) = (&labels, split_probability) {
            let mut p = [0.0; 2];
            for (v, &c) in f.values().iter().zip(l) {
                match c {
                    1 => p[0] += v.norm_sqr(),
                    -1 => p[1] += v.norm_sqr(),
                    _ => {}
                }
            }
            let scale = spec.spacing * spec.spacing;
            let p = [p[0] * scale, p[1] * scale];
            let total = f.probability();
            if p.iter().any(|&q| q < MIN_COMPONENT_PROBABILITY * total) {
                return Err(Error::ExperimentDesign(format!(
                    "split leaves probabilities {:.3} / {:.3}; each part needs at least {MIN_COMPONENT_PROBABILITY}",
                    p[0] / total,
                    p[1] / total
                )));
            }
            split_probability = Some(p);
        }
        if mode == ElectricMode::FullNumeric {
            let a1 = split.component_phase(1, t0, t1, &constants)?;
            let a2 = split.component_phase(-1, t0, t1, &constants)?;
            if a1 != 0.0 || a2 != 0.0 {
                let l = labels
                    .as_ref()
                    .ok_or_else(|| Error::Labeling("potential is on while the domain is connected".into()))?;
                f = apply_component_phases(&f, l, a1, a2)?;
            }
        }
        let lattice = base.with_mask(mask)?;
        let mut prop = Propagator::new(&lattice);
        prop.step(&mut f)?;
        if mode == ElectricMode::AnalyticPhase && !phase_applied && wa < wb && t1 >= wb {
            let l = labels
                .as_ref()
                .ok_or_else(|| Error::Labeling("potential window ends after the parts merge".into()))?;
            f = component_phase_evolution(&f, split, l, &constants)?;
            phase_applied = true;
        }
        densities.push(f.density());
    }

    let total_mask_loss = mask_loss.iter().sum();
    Ok(ElectricRun {
        history: DensityHistory { spec, times, densities },
        mask_loss,
        total_mask_loss,
        split_probability: split_probability.unwrap_or([0.0; 2]),
        final_field: f,
    })
}

/// Largest L² distance between density slices with times in `window`,
/// each divided by the probability of the first history at that time.
pub fn density_discrepancy(a: &DensityHistory, b: &DensityHistory, window: (f64, f64)) -> Result<f64> {
    let same_grid = a.spec.nx == b.spec.nx && a.spec.ny == b.spec.ny && a.spec.spacing == b.spec.spacing;
    if !same_grid || a.times.len() != b.times.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(Error::GridMismatch("histories differ in grid or time samples".into()));
    }
    let area = a.spec.spacing * a.spec.spacing;
    let tol = 1e-9 * (window.1 - window.0).abs().max(1.0);
    let mut worst = 0.0f64;
    for ((t, da), db) in a.times.iter().zip(&a.densities).zip(&b.densities) {
        if *t < window.0 - tol || *t > window.1 + tol {
            continue;
        }
        let p: f64 = da.iter().sum::<f64>() * area;
        if p <= 0.0 {
            continue;
        }
        let d2: f64 = da.iter().zip(db).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() * area;
        worst = worst.max(d2.sqrt() / p);
    }
    Ok(worst)
}

/// Sum of Gaussian bumps exp(−|x − c|²/2σ²)·e^{i p·x}, masked to the domain at
/// t = 0 and normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialPacket {
    pub centers: Vec<Vec2>,
    pub width: f64,
    #[serde(default)]
    pub momenta: Vec<Vec2>,
}

impl InitialPacket {
    pub fn field(&self, schedule: &DomainSchedule, spec: &LatticeSpec) -> Result<Field> {
        if !(self.width > 0.0) || self.centers.is_empty() {
            return Err(Error::InvalidInput("packet needs centers and a positive width".into()));
        }
        let mask = schedule.mask(spec, 0.0);
        let values = (0..spec.len())
            .map(|k| {
                if !mask[k] {
                    return Complex64::new(0.0, 0.0);
                }
                let x = spec.position_of(k);
                self.centers
                    .iter()
                    .enumerate()
                    .map(|(i, c)| {
                        let p = self.momenta.get(i).copied().unwrap_or(Vec2::ZERO);
                        let g = (-(x - *c).norm_sq() / (2.0 * self.width * self.width)).exp();
                        Complex64::from_polar(g, p.dot(x))
                    })
                    .sum()
            })
            .collect();
        let mut f = Field::from_values(spec, values, 0.0)?;
        f.normalize()?;
        Ok(f)
    }
}

/// A complete electric-effect setup.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElectricConfig {
    #[serde(flatten)]
    pub schedule: DomainSchedule,
    #[serde(rename = "V1")]
    pub v1: PotentialProfile,
    #[serde(rename = "V2")]
    pub v2: PotentialProfile,
    /// Potential window; defaults to the split phase minus 5% of the hold
    /// duration at each end.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
    pub spacing: f64,
    pub dt: f64,
    pub packet: InitialPacket,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub solver_tolerance: Option<f64>,
}

impl ElectricConfig {
    /// The calibrated reference setup (unit disk, ħ = m = e = 1) with a
    /// constant V₁ chosen so the electric flux is `alpha`, and V₂ = 0.
    pub fn reference(alpha: f64) -> Self {
        let schedule = DomainSchedule::new(0.15, 0.5, 1.0);
        // default window: the hold phase minus 5% at each end
        let v1 = alpha / (0.9 * schedule.hold_duration);
        Self {
            schedule,
            v1: PotentialProfile::Constant(v1),
            v2: PotentialProfile::Constant(0.0),
            window: None,
            spacing: 1.0 / 32.0,
            dt: 0.004,
            packet: InitialPacket {
                centers: vec![Vec2::new(0.0, 0.55), Vec2::new(0.0, -0.55)],
                width: 0.15,
                momenta: vec![],
            },
            constants: PhysicalConstants::default(),
            solver_tolerance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        self.split().validate()?;
        self.constants.validate()?;
        if !(self.packet.width > 0.0) || self.packet.centers.is_empty() {
            return Err(Error::InvalidInput("packet needs a positive width and at least one center".into()));
        }
        self.lattice_spec().validate()
    }

    pub fn split(&self) -> SplitPotential {
        let (a, b) = self.schedule.split_window();
        let m = 0.05 * self.schedule.hold_duration;
        SplitPotential::new(self.v1.clone(), self.v2.clone(), self.window.unwrap_or([a + m, b - m]))
    }

    pub fn lattice_spec(&self) -> LatticeSpec {
        let r = self.schedule.radius;
        let n = (2.0 * r / self.spacing).ceil() as usize + 5;
        let mut spec = LatticeSpec::centered(n, self.spacing, Vec2::ZERO, self.dt);
        spec.constants = self.constants;
        if let Some(tol) = self.solver_tolerance {
            spec.solver_tolerance = tol;
        }
        spec
    }

    pub fn run(&self, mode: ElectricMode) -> Result<ElectricRun> {
        let spec = self.lattice_spec();
        let u0 = self.packet.field(&self.schedule, &spec)?;
        run_electric_ab(&self.schedule, &self.split(), &u0, spec, mode)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn consts() -> PhysicalConstants {
        PhysicalConstants::default()
    }

    #[test]
    fn flux_of_equal_potentials_is_zero() {
        let s = SplitPotential::new(PotentialProfile::Constant(2.0), PotentialProfile::Constant(2.0), [0.5, 1.5]);
        assert_eq!(electric_flux(&s, &consts()).unwrap(), 0.0);
    }

    #[test]
    fn flux_of_constant_difference_is_rectangle() {
        let mut c = consts();
        c.charge = 2.0;
        c.hbar = 0.5;
        let s = SplitPotential::new(PotentialProfile::Constant(1.5), PotentialProfile::Constant(0.25), [0.5, 2.0]);
        let want = 2.0 / 0.5 * 1.25 * 1.5;
        assert!((electric_flux(&s, &c).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn sinusoidal_difference_integrates_to_zero() {
        let s = SplitPotential::new(
            PotentialProfile::Function(Arc::new(|t: f64| (2.0 * PI * t).sin())),
            PotentialProfile::Constant(0.0),
            [1.0, 3.0],
        );
        assert!(electric_flux(&s, &consts()).unwrap().abs() < 1e-12);
    }

    #[test]
    fn table_profile_is_piecewise_linear() {
        let p = PotentialProfile::Table(vec![[0.0, 0.0], [1.0, 2.0], [3.0, 0.0]]);
        assert_eq!(p.eval(0.5), 1.0);
        assert_eq!(p.eval(2.0), 1.0);
        assert_eq!(p.eval(5.0), 0.0);
        let s = SplitPotential::new(p, PotentialProfile::Constant(0.0), [0.0, 3.0]);
        assert!((electric_flux(&s, &consts()).unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn profiles_parse_from_numbers_and_tables() {
        let p: PotentialProfile = serde_json::from_str("1.5").unwrap();
        assert!(matches!(p, PotentialProfile::Constant(v) if v == 1.5));
        let p: PotentialProfile = serde_json::from_str("[[0, 1], [2, 3]]").unwrap();
        assert!(matches!(p, PotentialProfile::Table(ref n) if n.len() == 2));
    }

    #[test]
    fn schedule_topology() {
        let cfg = ElectricConfig::reference(0.0);
        let spec = cfg.lattice_spec();
        let s = cfg.schedule;
        let (a, b) = s.split_window();
        assert_eq!(count_components(&spec, &s.mask(&spec, 0.0)), 1);
        assert_eq!(count_components(&spec, &s.mask(&spec, 0.5 * a)), 1);
        for t in [a, 0.5 * (a + b), b] {
            assert_eq!(count_components(&spec, &s.mask(&spec, t)), 2, "t = {t}");
        }
        assert_eq!(count_components(&spec, &s.mask(&spec, b + 0.1)), 1);
        assert_eq!(count_components(&spec, &s.mask(&spec, s.total_duration())), 1);
    }

    #[test]
    fn masks_change_by_at_most_a_strip_per_step() {
        let cfg = ElectricConfig::reference(0.0);
        let spec = cfg.lattice_spec();
        let s = cfg.schedule;
        let times = s.times(cfg.dt).unwrap();
        let area = spec.spacing * spec.spacing;
        // tips move at speed R/(2·grow): area swept per step ≤ 2 slabs · 2h · speed · dt, plus one row of sites
        let bound = 2.0 * (2.0 * s.slab_half_width + 2.0 * spec.spacing) * (0.5 / s.grow_duration * cfg.dt + spec.spacing);
        let mut prev = s.mask(&spec, 0.0);
        for &t in &times[1..] {
            let m = s.mask(&spec, t);
            let diff = m.iter().zip(&prev).filter(|(a, b)| a != b).count() as f64 * area;
            assert!(diff <= bound, "t = {t}: {diff} > {bound}");
            prev = m;
        }
    }

    #[test]
    fn equal_phases_give_a_global_phase() {
        let cfg = ElectricConfig::reference(0.0);
        let spec = cfg.lattice_spec();
        let mask = cfg.schedule.mask(&spec, 1.0);
        let labels = label_components(&spec, &mask).unwrap();
        let mut f = cfg.packet.field(&cfg.schedule, &spec).unwrap();
        f.apply_mask(&mask);
        let split = SplitPotential::new(PotentialProfile::Constant(0.7), PotentialProfile::Constant(0.7), [0.6, 1.4]);
        let g = component_phase_evolution(&f, &split, &labels, &consts()).unwrap();
        let rot = Complex64::from_polar(1.0, -0.7 * 0.8);
        for (a, b) in f.values().iter().zip(g.values()) {
            assert!((a.norm_sqr() - b.norm_sqr()).abs() <= 1e-15 * a.norm_sqr());
            assert!((a * rot - b).norm() < 1e-14);
        }
    }

    #[test]
    fn pi_flips_one_side_only() {
        let cfg = ElectricConfig::reference(0.0);
        let spec = cfg.lattice_spec();
        let mask = cfg.schedule.mask(&spec, 1.0);
        let labels = label_components(&spec, &mask).unwrap();
        let mut f = cfg.packet.field(&cfg.schedule, &spec).unwrap();
        f.apply_mask(&mask);
        let split = SplitPotential::new(PotentialProfile::Constant(PI), PotentialProfile::Constant(0.0), [0.5, 1.5]);
        let g = component_phase_evolution(&f, &split, &labels, &consts()).unwrap();
        for ((a, b), &l) in f.values().iter().zip(g.values()).zip(&labels) {
            match l {
                1 => assert!((a + b).norm() < 1e-15),
                -1 => assert_eq!(a, b),
                _ => assert_eq!(*a, Complex64::new(0.0, 0.0)),
            }
        }
    }

    #[test]
    fn unlabeled_support_is_rejected() {
        let cfg = ElectricConfig::reference(0.0);
        let spec = cfg.lattice_spec();
        let f = cfg.packet.field(&cfg.schedule, &spec).unwrap();
        let labels = label_components(&spec, &cfg.schedule.mask(&spec, 1.0)).unwrap();
        let split = SplitPotential::new(PotentialProfile::Constant(1.0), PotentialProfile::Constant(0.0), [0.5, 1.5]);
        // the t = 0 packet still has weight inside the future slabs
        assert!(matches!(
            component_phase_evolution(&f, &split, &labels, &consts()),
            Err(Error::Labeling(_))
        ));
    }

    #[test]
    fn discrepancy_of_identical_histories_is_zero() {
        let cfg = ElectricConfig::reference(0.0);
        let spec = cfg.lattice_spec();
        let f = cfg.packet.field(&cfg.schedule, &spec).unwrap();
        let h = DensityHistory { spec, times: vec![0.0, 1.0], densities: vec![f.density(), f.density()] };
        assert_eq!(density_discrepancy(&h, &h, (0.0, 1.0)).unwrap(), 0.0);
        let mut g = f.clone();
        g.scale(1.0);
        for v in g.values_mut() {
            *v *= Complex64::from_polar(1.0, 0.3);
        }
        let h2 = DensityHistory { spec, times: vec![0.0, 1.0], densities: vec![g.density(), g.density()] };
        assert!(density_discrepancy(&h, &h2, (0.0, 1.0)).unwrap() < 1e-15);
        let short = DensityHistory { spec, times: vec![0.0], densities: vec![f.density()] };
        assert!(matches!(density_discrepancy(&h, &short, (0.0, 1.0)), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn too_fast_schedule_is_rejected() {
        let mut cfg = ElectricConfig::reference(0.0);
        cfg.schedule.grow_duration = 0.01;
        cfg.schedule.slab_half_width = 0.3;
        cfg.packet.centers = vec![Vec2::new(0.3, 0.0), Vec2::new(-0.3, 0.0)];
        assert!(matches!(cfg.run(ElectricMode::AnalyticPhase), Err(Error::ScheduleTooFast { .. })));
    }

    #[test]
    fn modes_agree_and_effect_appears() {
        let zero = ElectricConfig::reference(0.0).run(ElectricMode::AnalyticPhase).unwrap();
        let cfg = ElectricConfig::reference(PI);
        assert!((electric_flux(&cfg.split(), &cfg.constants).unwrap() - PI).abs() < 1e-14);
        let a = cfg.run(ElectricMode::AnalyticPhase).unwrap();
        let n = cfg.run(ElectricMode::FullNumeric).unwrap();
        let win = cfg.schedule.post_merge_window();
        let agree = density_discrepancy(&a.history, &n.history, win).unwrap();
        let effect = density_discrepancy(&zero.history, &a.history, win).unwrap();
        // per-step residuals of 1e-12 accumulate like a random walk
        let steps = a.history.times.len() as f64;
        assert!(agree < 10.0 * 1e-12 * steps.sqrt(), "mode gap {agree:.3e}");
        assert!(a.split_probability.iter().all(|&p| p > 0.1));
        assert!(effect > 0.05);
    }
}
