//! Crank-Nicolson time stepping with a Jacobi-preconditioned BiCGSTAB solve.
//!
//! The Hamiltonian acts as
//! (Hψ)_a = d_a ψ_a + Σ_b h_ab e^{−iθ(a→b)} ψ_b
//! with d_a the kinetic diagonal plus eV, hopping weights h from the chosen
//! stencil and θ the Peierls link phases. Inactive edges carry no hopping and
//! masked sites are identity rows, so they stay exactly zero.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tdse::field::Field;
use crate::tdse::lattice::{Lattice, Stencil};

const PAD: usize = 2;
const MAX_ITERATIONS: usize = 2000;

type C = Complex64;

/// Hamiltonian in padded storage: row stride `w`, two ghost cells on each side.
///
/// Each edge stores its hop amplitude t₁e^{−iθ}, zero when inactive. The
/// next-nearest hop along an axis is t₂ times the product of the two unit edge
/// factors, which vanishes whenever either edge is inactive.
#[derive(Debug, Clone)]
pub struct Operator {
    nx: usize,
    ny: usize,
    w: usize,
    diag: Vec<f64>,
    active: Vec<bool>,
    ex: Vec<C>,
    ey: Vec<C>,
    ex2: Vec<C>,
    ey2: Vec<C>,
    fourth: bool,
}

impl Operator {
    pub fn new(lattice: &Lattice) -> Self {
        let spec = lattice.spec();
        let (nx, ny) = (spec.nx, spec.ny);
        let w = nx + 2 * PAD;
        let h = ny + 2 * PAD;
        let c = spec.hopping_scale();
        let fourth = spec.stencil == Stencil::FourthOrder;
        let (d0, t1, t2) = if fourth {
            (5.0 * c, -16.0 / 12.0 * c, 1.0 / 12.0 * c)
        } else {
            (4.0 * c, -c, 0.0)
        };
        let zero = C::new(0.0, 0.0);
        let mut op = Operator {
            nx,
            ny,
            w,
            diag: vec![0.0; w * h],
            active: vec![false; w * h],
            ex: vec![zero; w * h],
            ey: vec![zero; w * h],
            ex2: vec![zero; w * h],
            ey2: vec![zero; w * h],
            fourth,
        };
        let mask = lattice.mask();
        let (lx, ly) = (lattice.link_x(), lattice.link_y());
        let energy = lattice.potential_energy();
        for j in 0..ny {
            for i in 0..nx {
                let k = j * nx + i;
                let p = op.padded(i, j);
                if !mask[k] {
                    continue;
                }
                op.active[p] = true;
                op.diag[p] = d0 + energy[k];
                if lattice.edge_x_active(k) {
                    op.ex[p] = C::from_polar(1.0, -lx[k]);
                }
                if lattice.edge_y_active(k) {
                    op.ey[p] = C::from_polar(1.0, -ly[k]);
                }
            }
        }
        // products of unit factors first, then scale by the stencil weights
        for p in 0..op.ex.len() {
            if p + 1 < op.ex.len() {
                op.ex2[p] = op.ex[p] * op.ex[p + 1] * t2;
            }
            if p + w < op.ey.len() {
                op.ey2[p] = op.ey[p] * op.ey[p + w] * t2;
            }
        }
        for p in 0..op.ex.len() {
            op.ex[p] *= t1;
            op.ey[p] *= t1;
        }
        op
    }

    fn padded(&self, i: usize, j: usize) -> usize {
        (j + PAD) * self.w + i + PAD
    }

    fn padded_len(&self) -> usize {
        self.w * (self.ny + 2 * PAD)
    }

    fn load(&self, values: &[C], out: &mut [C]) {
        for j in 0..self.ny {
            let p = self.padded(0, j);
            out[p..p + self.nx].copy_from_slice(&values[j * self.nx..(j + 1) * self.nx]);
        }
    }

    fn store(&self, buf: &[C], values: &mut [C]) {
        for j in 0..self.ny {
            let p = self.padded(0, j);
            values[j * self.nx..(j + 1) * self.nx].copy_from_slice(&buf[p..p + self.nx]);
        }
    }

    /// out = (I + s·H) x for interior sites, where `s` is a complex scalar.
    /// Masked sites map to x (identity rows).
    fn apply_shifted(&self, s: C, x: &[C], out: &mut [C]) {
        self.apply_with(x, out, |xp, hxp| xp + mul(s, hxp));
    }

    /// out_p = combine(x_p, (Hx)_p) on interior sites. Masked rows of H are
    /// zero, so they see combine(x_p, 0).
    #[inline(always)]
    fn apply_with<F: Fn(C, C) -> C>(&self, x: &[C], out: &mut [C], combine: F) {
        let (w, nx) = (self.w, self.nx);
        for j in 0..self.ny {
            let r = self.padded(0, j);
            let xc = &x[r..r + nx];
            let xe = &x[r + 1..r + 1 + nx];
            let xw = &x[r - 1..r - 1 + nx];
            let xn = &x[r + w..r + w + nx];
            let xs = &x[r - w..r - w + nx];
            let d = &self.diag[r..r + nx];
            let exc = &self.ex[r..r + nx];
            let exw = &self.ex[r - 1..r - 1 + nx];
            let eyc = &self.ey[r..r + nx];
            let eys = &self.ey[r - w..r - w + nx];
            let o = &mut out[r..r + nx];
            if self.fourth {
                let xee = &x[r + 2..r + 2 + nx];
                let xww = &x[r - 2..r - 2 + nx];
                let xnn = &x[r + 2 * w..r + 2 * w + nx];
                let xss = &x[r - 2 * w..r - 2 * w + nx];
                let fxc = &self.ex2[r..r + nx];
                let fxw = &self.ex2[r - 2..r - 2 + nx];
                let fyc = &self.ey2[r..r + nx];
                let fys = &self.ey2[r - 2 * w..r - 2 * w + nx];
                for i in 0..nx {
                    let hv = xc[i] * d[i]
                        + mul(exc[i], xe[i])
                        + mul_conj(exw[i], xw[i])
                        + mul(eyc[i], xn[i])
                        + mul_conj(eys[i], xs[i])
                        + mul(fxc[i], xee[i])
                        + mul_conj(fxw[i], xww[i])
                        + mul(fyc[i], xnn[i])
                        + mul_conj(fys[i], xss[i]);
                    o[i] = combine(xc[i], hv);
                }
            } else {
                for i in 0..nx {
                    let hv = xc[i] * d[i]
                        + mul(exc[i], xe[i])
                        + mul_conj(exw[i], xw[i])
                        + mul(eyc[i], xn[i])
                        + mul_conj(eys[i], xs[i]);
                    o[i] = combine(xc[i], hv);
                }
            }
        }
    }


    /// Hψ on unpadded values.
    pub fn apply(&self, values: &[C]) -> Vec<C> {
        let n = self.padded_len();
        let mut x = vec![C::new(0.0, 0.0); n];
        let mut y = vec![C::new(0.0, 0.0); n];
        self.load(values, &mut x);
        self.apply_with(&x, &mut y, |_, hx| hx);
        let mut out = vec![C::new(0.0, 0.0); values.len()];
        self.store(&y, &mut out);
        for (k, o) in out.iter_mut().enumerate() {
            if !self.active[self.padded(k % self.nx, k / self.nx)] {
                *o = C::new(0.0, 0.0);
            }
        }
        out
    }

    /// ⟨ψ|H|ψ⟩ Δx² / ⟨ψ|ψ⟩ Δx².
    pub fn energy(&self, field: &Field) -> f64 {
        let h = self.apply(field.values());
        let num: C = field.values().iter().zip(&h).map(|(a, b)| a.conj() * b).sum();
        num.re / field.values().iter().map(|v| v.norm_sqr()).sum::<f64>()
    }
}

#[inline(always)]
fn mul(a: C, b: C) -> C {
    C::new(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)
}

/// conj(a) * b
#[inline(always)]
fn mul_conj(a: C, b: C) -> C {
    C::new(a.re * b.re + a.im * b.im, a.re * b.im - a.im * b.re)
}

fn dot(a: &[C], b: &[C]) -> C {
    // Σ conj(a) b, accumulated in two lanes
    let mut re = 0.0;
    let mut im = 0.0;
    for (x, y) in a.iter().zip(b) {
        re += x.re * y.re + x.im * y.im;
        im += x.re * y.im - x.im * y.re;
    }
    C::new(re, im)
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// Statistics of one linear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Reusable Crank-Nicolson propagator for one lattice.
#[derive(Debug, Clone)]
pub struct Propagator {
    op: Operator,
    tau: f64,
    tol: f64,
    dt: f64,
    precond: Vec<C>,
    work: Vec<Vec<C>>,
    pub last: SolveStats,
    pub total_iterations: usize,
}

impl Propagator {
    pub fn new(lattice: &Lattice) -> Self {
        let spec = lattice.spec();
        let op = Operator::new(lattice);
        let tau = spec.dt / (2.0 * spec.constants.hbar);
        let n = op.padded_len();
        let precond = (0..n)
            .map(|p| {
                if op.active[p] {
                    C::new(1.0, tau * op.diag[p]).inv()
                } else {
                    C::new(1.0, 0.0)
                }
            })
            .collect();
        Self {
            tau,
            tol: spec.solver_tolerance,
            dt: spec.dt,
            precond,
            work: vec![vec![C::new(0.0, 0.0); n]; 10],
            op,
            last: SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            },
            total_iterations: 0,
        }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// Advances `field` by one time step in place.
    pub fn step(&mut self, field: &mut Field) -> Result<()> {
        let (nx, ny) = field.shape();
        if nx != self.op.nx || ny != self.op.ny {
            return Err(Error::GridMismatch("field and lattice shapes differ".into()));
        }
        let mut w = std::mem::take(&mut self.work);
        let [u, b, x, r, rhat, p, v, s, t, phat] = &mut w[..] else {
            unreachable!("ten work buffers")
        };
        self.op.load(field.values(), u);
        let itau = C::new(0.0, self.tau);
        // b = (I − iτH)u, masked rows give zero since u is zero there
        self.op.apply_shifted(-itau, u, b);
        for (k, bk) in b.iter_mut().enumerate() {
            if !self.op.active[k] {
                *bk = C::new(0.0, 0.0);
            }
        }
        // initial guess 2b − u, exact to second order in τ
        for k in 0..x.len() {
            x[k] = if self.op.active[k] { b[k] * 2.0 - u[k] } else { C::new(0.0, 0.0) };
        }
        let stats = self.bicgstab(itau, b, x, [r, rhat, p, v, s, t, phat]);
        self.work = w;
        let stats = stats?;
        self.last = stats;
        self.total_iterations += stats.iterations;
        self.op.store(&self.work[2], field.values_mut());
        field.time += self.dt;
        Ok(())
    }

    /// Solves (I + shift·H)x = b starting from the given x.
    fn bicgstab(&self, shift: C, b: &[C], x: &mut [C], scratch: [&mut Vec<C>; 7]) -> Result<SolveStats> {
        let [r, rhat, p, v, s, t, phat] = scratch;
        let op = &self.op;
        let m = &self.precond;
        let bnorm = norm(b);
        if bnorm == 0.0 {
            x.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
            return Ok(SolveStats {
                iterations: 0,
                relative_residual: 0.0,
            });
        }
        let target = self.tol * bnorm;
        op.apply_shifted(shift, x, t);
        for k in 0..r.len() {
            r[k] = b[k] - t[k];
        }
        rhat.copy_from_slice(r);
        let mut rho = C::new(1.0, 0.0);
        let mut alpha = C::new(1.0, 0.0);
        let mut omega = C::new(1.0, 0.0);
        v.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        p.iter_mut().for_each(|z| *z = C::new(0.0, 0.0));
        let mut rnorm = norm(r);
        for it in 0..MAX_ITERATIONS {
            if rnorm <= target {
                return Ok(SolveStats {
                    iterations: it,
                    relative_residual: rnorm / bnorm,
                });
            }
            let rho_new = dot(rhat, r);
            if rho_new.norm() < 1e-300 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for k in 0..p.len() {
                p[k] = r[k] + beta * (p[k] - omega * v[k]);
                phat[k] = m[k] * p[k];
            }
            op.apply_shifted(shift, phat, v);
            alpha = rho / dot(rhat, v);
            for k in 0..s.len() {
                s[k] = r[k] - alpha * v[k];
            }
            let snorm = norm(s);
            if snorm <= target {
                for k in 0..x.len() {
                    x[k] += alpha * phat[k];
                }
                return Ok(SolveStats {
                    iterations: it + 1,
                    relative_residual: snorm / bnorm,
                });
            }
            for k in 0..s.len() {
                r[k] = m[k] * s[k];
            }
            // r holds the preconditioned s until it is overwritten below
            op.apply_shifted(shift, r, t);
            let tt = dot(t, t).re;
            omega = dot(t, s) / tt;
            for k in 0..x.len() {
                x[k] += alpha * phat[k] + omega * r[k];
                r[k] = s[k] - omega * t[k];
            }
            rnorm = norm(r);
        }
        // confirm the final residual explicitly
        op.apply_shifted(shift, x, t);
        let mut res = 0.0;
        for k in 0..t.len() {
            res += (b[k] - t[k]).norm_sqr();
        }
        let rel = res.sqrt() / bnorm;
        if rel <= self.tol {
            return Ok(SolveStats {
                iterations: MAX_ITERATIONS,
                relative_residual: rel,
            });
        }
        Err(Error::Solver {
            iterations: MAX_ITERATIONS,
            residual: rel,
        })
    }
}

/// One Crank-Nicolson step: (1 + iτH)u⁺ = (1 − iτH)u with τ = Δt/2ħ.
pub fn step(lattice: &Lattice, field: &Field) -> Result<Field> {
    let mut prop = Propagator::new(lattice);
    let mut out = field.clone();
    prop.step(&mut out)?;
    Ok(out)
}

/// Named set of sites whose probability is recorded after every step.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub sites: Vec<usize>,
}

/// One probe reading.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub step: usize,
    pub time: f64,
    pub probe_name: String,
    pub value: f64,
}

/// Repeated stepping with probe readings after each step (step 0 is the
/// initial field).
pub fn evolve(lattice: &Lattice, field: &Field, n_steps: usize, probes: &[Probe]) -> Result<(Field, Vec<ProbeRecord>)> {
    let mut prop = Propagator::new(lattice);
    let mut f = field.clone();
    let mut records = Vec::with_capacity(probes.len() * (n_steps + 1));
    let read = |step: usize, f: &Field, records: &mut Vec<ProbeRecord>| {
        for p in probes {
            records.push(ProbeRecord {
                step,
                time: f.time,
                probe_name: p.name.clone(),
                value: f.probability_on(&p.sites),
            });
        }
    };
    read(0, &f, &mut records);
    for n in 1..=n_steps {
        prop.step(&mut f)?;
        read(n, &f, &mut records);
    }
    Ok((f, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauge::{ab_potential, PhysicalConstants, VectorPotential};
    use crate::geometry::{Bound, Disk, Scene};
    use crate::tdse::lattice::{build_lattice, LatticeSpec};
    use crate::vec2::Vec2;

    fn box_lattice(n: usize, dt: f64, stencil: Stencil) -> Lattice {
        let h = 0.5 * (n as f64 - 1.0);
        let scene = Scene::new(vec![], Bound::new(Vec2::new(-h, -h), Vec2::new(h, h))).unwrap();
        let pot = VectorPotential::zero(PhysicalConstants::default());
        let mut spec = LatticeSpec::centered(n, 1.0, Vec2::ZERO, dt);
        spec.stencil = stencil;
        build_lattice(&scene, &pot, spec, None).unwrap()
    }

    fn gaussian(lat: &Lattice, c: Vec2, sigma: f64, k: Vec2) -> Field {
        let spec = lat.spec();
        let vals = (0..spec.len())
            .map(|i| {
                let x = spec.position_of(i);
                if !lat.mask()[i] {
                    return C::new(0.0, 0.0);
                }
                C::from_polar((-(x - c).norm_sq() / (4.0 * sigma * sigma)).exp(), k.dot(x))
            })
            .collect();
        let mut f = Field::from_values(spec, vals, 0.0).unwrap();
        f.normalize().unwrap();
        f
    }

    #[test]
    fn operator_is_hermitian_with_flux() {
        let scene = Scene::new(
            vec![Disk::with_flux(Vec2::new(0.5, 0.2), 2.5, 1.7)],
            Bound::new(Vec2::new(-9.0, -9.0), Vec2::new(9.0, 9.0)),
        )
        .unwrap();
        let pot = ab_potential(&scene, PhysicalConstants::default()).unwrap();
        let spec = LatticeSpec::centered(20, 1.0, Vec2::ZERO, 0.3);
        let v = |p: Vec2| 0.01 * p.x;
        let lat = build_lattice(&scene, &pot, spec, Some(&v)).unwrap();
        let op = Operator::new(&lat);
        let a: Vec<C> = (0..spec.len()).map(|k| C::new((k as f64).sin(), (k as f64 * 0.3).cos())).collect();
        let b: Vec<C> = (0..spec.len()).map(|k| C::new((k as f64 * 1.7).cos(), (k as f64 * 0.11).sin())).collect();
        let mask = lat.mask();
        let a: Vec<C> = a.iter().zip(mask).map(|(v, &m)| if m { *v } else { C::new(0.0, 0.0) }).collect();
        let b: Vec<C> = b.iter().zip(mask).map(|(v, &m)| if m { *v } else { C::new(0.0, 0.0) }).collect();
        let lhs = dot(&a, &op.apply(&b));
        let rhs = dot(&op.apply(&a), &b);
        assert!((lhs - rhs).norm() < 1e-12 * lhs.norm().max(1.0));
    }

    #[test]
    fn norm_is_conserved() {
        let lat = box_lattice(48, 0.5, Stencil::FourthOrder);
        let f0 = gaussian(&lat, Vec2::ZERO, 4.0, Vec2::new(0.5, 0.2));
        let (f, _) = evolve(&lat, &f0, 50, &[]).unwrap();
        assert!((f.probability() - 1.0).abs() < 1e-10);
        assert!((f.time - 25.0).abs() < 1e-12);
    }

    #[test]
    fn lowest_mode_only_rotates() {
        // oracle: dense Hermitian eigensolve of the same operator
        let n = 16;
        let lat = box_lattice(n, 0.2, Stencil::SecondOrder);
        let op = Operator::new(&lat);
        let spec = lat.spec();
        let active: Vec<usize> = (0..spec.len()).filter(|&k| lat.mask()[k]).collect();
        let m = active.len();
        let mut h = nalgebra::DMatrix::<f64>::zeros(m, m);
        for (col, &k) in active.iter().enumerate() {
            let mut e = vec![C::new(0.0, 0.0); spec.len()];
            e[k] = C::new(1.0, 0.0);
            let he = op.apply(&e);
            for (row, &q) in active.iter().enumerate() {
                assert!(he[q].im.abs() < 1e-15);
                h[(row, col)] = he[q].re;
            }
        }
        let eig = nalgebra::SymmetricEigen::new(h);
        let imin = eig.eigenvalues.imin();
        let mut vals = vec![C::new(0.0, 0.0); spec.len()];
        for (row, &q) in active.iter().enumerate() {
            vals[q] = C::new(eig.eigenvectors[(row, imin)], 0.0);
        }
        let mut f0 = Field::from_values(spec, vals, 0.0).unwrap();
        f0.normalize().unwrap();
        let (f, _) = evolve(&lat, &f0, 100, &[]).unwrap();
        let d0 = f0.density();
        let d1 = f.density();
        let worst = d0.iter().zip(&d1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-8, "density drift {worst}");
    }

    #[test]
    fn centroid_moves_at_group_velocity() {
        let lat = box_lattice(160, 0.5, Stencil::FourthOrder);
        let k = 2.0 * std::f64::consts::PI / 10.0;
        let f0 = gaussian(&lat, Vec2::new(-30.0, 0.0), 8.0, Vec2::new(k, 0.0));
        let centroid = |f: &Field| {
            let spec = lat.spec();
            let d = f.density();
            let tot: f64 = d.iter().sum();
            (0..spec.len()).map(|i| spec.position_of(i).x * d[i]).sum::<f64>() / tot
        };
        let (f, _) = evolve(&lat, &f0, 80, &[]).unwrap();
        let v = (centroid(&f) - centroid(&f0)) / 40.0;
        assert!((v - k).abs() < 0.02 * k, "velocity {v} vs {k}");
    }

    #[test]
    fn probes_partition_probability() {
        let lat = box_lattice(32, 0.5, Stencil::FourthOrder);
        let f0 = gaussian(&lat, Vec2::ZERO, 3.0, Vec2::new(0.4, 0.0));
        let left = lat.sites_where(|p| p.x < 0.0);
        let right = lat.sites_where(|p| p.x >= 0.0);
        let all: Vec<usize> = (0..lat.spec().len()).collect();
        let probes = vec![
            Probe { name: "left".into(), sites: left },
            Probe { name: "right".into(), sites: right },
            Probe { name: "all".into(), sites: all },
        ];
        let (_, rec) = evolve(&lat, &f0, 10, &probes).unwrap();
        assert_eq!(rec.len(), 33);
        for chunk in rec.chunks(3) {
            assert!((chunk[0].value + chunk[1].value - chunk[2].value).abs() < 1e-12);
            assert!((chunk[2].value - 1.0).abs() < 1e-10);
        }
    }
}
