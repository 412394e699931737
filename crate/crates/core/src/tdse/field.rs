//! Complex lattice wavefunctions and initial wave packets.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::optics::BeamSpec;
use crate::tdse::lattice::{Lattice, LatticeSpec};
use crate::vec2::Vec2;

/// Wavefunction values on lattice sites (row-major, x fastest) at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    nx: usize,
    ny: usize,
    spacing: f64,
    values: Vec<Complex64>,
    pub time: f64,
}

impl Field {
    pub fn zeros(spec: &LatticeSpec) -> Self {
        Self {
            nx: spec.nx,
            ny: spec.ny,
            spacing: spec.spacing,
            values: vec![Complex64::new(0.0, 0.0); spec.len()],
            time: 0.0,
        }
    }

    pub fn from_values(spec: &LatticeSpec, values: Vec<Complex64>, time: f64) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::GridMismatch("field size differs from the grid".into()));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidInput("field has non-finite values".into()));
        }
        Ok(Self {
            nx: spec.nx,
            ny: spec.ny,
            spacing: spec.spacing,
            values,
            time,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// |ψ|² per site.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Σ|ψ|² Δx².
    pub fn probability(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.spacing * self.spacing
    }

    /// Probability carried by the listed sites.
    pub fn probability_on(&self, sites: &[usize]) -> f64 {
        sites.iter().map(|&k| self.values[k].norm_sqr()).sum::<f64>() * self.spacing * self.spacing
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Rescales to unit probability; errors on a zero field.
    pub fn normalize(&mut self) -> Result<()> {
        let p = self.probability();
        if !(p > 0.0) {
            return Err(Error::InvalidInput("cannot normalize a zero field".into()));
        }
        self.scale(1.0 / p.sqrt());
        Ok(())
    }

    /// Sets every masked site to zero and returns the probability removed.
    pub fn apply_mask(&mut self, mask: &[bool]) -> f64 {
        let mut removed = 0.0;
        for (v, &m) in self.values.iter_mut().zip(mask) {
            if !m {
                removed += v.norm_sqr();
                *v = Complex64::new(0.0, 0.0);
            }
        }
        removed * self.spacing * self.spacing
    }

    /// Pointwise ψ_a − ψ_b.
    pub fn difference(&self, other: &Field) -> Result<Field> {
        self.same_grid(other)?;
        let mut out = self.clone();
        for (v, w) in out.values.iter_mut().zip(&other.values) {
            *v -= *w;
        }
        Ok(out)
    }

    pub fn same_grid(&self, other: &Field) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny || self.spacing != other.spacing {
            return Err(Error::GridMismatch("fields live on different grids".into()));
        }
        Ok(())
    }

    /// Bilinear interpolation at a physical point, given the grid origin.
    pub fn interpolate(&self, origin: Vec2, p: Vec2) -> Option<Complex64> {
        let u = (p.x - origin.x) / self.spacing;
        let w = (p.y - origin.y) / self.spacing;
        if u < 0.0 || w < 0.0 {
            return None;
        }
        let (i, j) = (u.floor() as usize, w.floor() as usize);
        if i + 1 >= self.nx || j + 1 >= self.ny {
            return None;
        }
        let (fu, fw) = (u - i as f64, w - j as f64);
        let k = j * self.nx + i;
        let v = &self.values;
        Some(
            v[k] * ((1.0 - fu) * (1.0 - fw))
                + v[k + 1] * (fu * (1.0 - fw))
                + v[k + self.nx] * ((1.0 - fu) * fw)
                + v[k + self.nx + 1] * (fu * fw),
        )
    }
}

/// An initial packet and the fraction of its window lost to the mask.
#[derive(Debug, Clone)]
pub struct PacketInit {
    pub field: Field,
    pub clipped_fraction: f64,
}

/// Samples χ₀(τ/δ₁)·χ₀(s/δ₂)·exp(i(m/ħ)k ω·x), where s and τ are the
/// longitudinal and transverse offsets from the anchor, zeroes masked sites
/// and normalizes to unit probability.
///
/// Clipping by the mask is reported, not treated as an error.
pub fn init_packet(lattice: &Lattice, beam: &BeamSpec) -> Result<PacketInit> {
    beam.validate()?;
    let spec = lattice.spec();
    let c = spec.constants;
    let kw = c.mass / c.hbar * beam.wavenumber;
    let omega = beam.direction;
    let perp = omega.perp();
    let mut values = vec![Complex64::new(0.0, 0.0); spec.len()];
    let (mut total, mut clipped) = (0.0, 0.0);
    for (k, v) in values.iter_mut().enumerate() {
        let x = spec.position_of(k);
        let rel = x - beam.anchor;
        let w = beam.cutoff.eval(rel.dot(perp) / beam.transverse_width)
            * beam.cutoff.eval(rel.dot(omega) / beam.longitudinal_width);
        if w == 0.0 {
            continue;
        }
        total += w * w;
        if !lattice.mask()[k] {
            clipped += w * w;
            continue;
        }
        *v = Complex64::from_polar(w, kw * omega.dot(x));
    }
    if total == 0.0 {
        return Err(Error::InvalidInput("packet window contains no lattice sites".into()));
    }
    let mut field = Field::from_values(spec, values, 0.0)?;
    field.normalize()?;
    Ok(PacketInit {
        field,
        clipped_fraction: clipped / total,
    })
}
