//! Globally adaptive 7/15-point Gauss-Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Maximum number of subintervals before giving up.
pub const MAX_INTERVALS: usize = 1 << 16;

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
    /// Integral of |f|, used for relative tolerances.
    pub abs_value: f64,
    pub intervals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Single 15-point Kronrod application with the QUADPACK error estimate.
fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Piece {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }
    let hab = h.abs();
    let value = resk * h;
    let resabs = resabs * hab;
    let resasc = resasc * hab;
    let mut err = ((resk - resg) * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let eps = f64::EPSILON;
    if resabs > f64::MIN_POSITIVE / (50.0 * eps) {
        err = err.max(50.0 * eps * resabs);
    }
    Piece {
        a,
        b,
        value,
        error: err,
        abs_value: resabs,
    }
}

/// Integrates `f` over the union of consecutive intervals given by
/// `breakpoints` (at least two, increasing), until the estimated error is
/// at most `max(rel_tol * integral of |f|, abs_tol)`. Relative tolerances
/// below 64 machine epsilons are raised to that floor.
///
/// Hitting [`MAX_INTERVALS`] yields [`Error::Convergence`] carrying the best
/// estimate.
pub fn integrate_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    rel_tol: f64,
    abs_tol: f64,
) -> Result<Quad> {
    if breakpoints.len() < 2 {
        return Err(Error::InvalidInput("quadrature needs at least one interval".into()));
    }
    let mut heap = BinaryHeap::new();
    let (mut value, mut error, mut abs_value) = (0.0, 0.0, 0.0);
    for w in breakpoints.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let p = gk15(&mut f, w[0], w[1]);
        value += p.value;
        error += p.error;
        abs_value += p.abs_value;
        heap.push(p);
    }
    let mut count = heap.len();
    // below ~64 eps the per-piece roundoff floor dominates every estimate
    let rel_tol = rel_tol.max(64.0 * f64::EPSILON);
    loop {
        if !(value.is_finite() && error.is_finite()) {
            return Err(Error::Domain("integrand is not finite".into()));
        }
        let tol = (rel_tol * abs_value).max(abs_tol);
        if error <= tol || heap.is_empty() {
            break;
        }
        if count >= MAX_INTERVALS {
            return Err(Error::Convergence {
                estimate: value,
                error,
                intervals: count,
            });
        }
        let worst = heap.pop().expect("heap is non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // interval cannot be split further in floating point
            return Err(Error::Convergence {
                estimate: value,
                error,
                intervals: count,
            });
        }
        let l = gk15(&mut f, worst.a, mid);
        let r = gk15(&mut f, mid, worst.b);
        value += l.value + r.value - worst.value;
        error += l.error + r.error - worst.error;
        abs_value += l.abs_value + r.abs_value - worst.abs_value;
        heap.push(l);
        heap.push(r);
        count += 1;
    }
    // re-sum to remove drift from incremental updates
    let (mut v, mut e, mut av) = (0.0, 0.0, 0.0);
    for p in heap.iter() {
        v += p.value;
        e += p.error;
        av += p.abs_value;
    }
    Ok(Quad {
        value: v,
        error: e,
        abs_value: av,
        intervals: count,
    })
}

/// Adaptive integral of `f` over [a, b].
pub fn integrate<F: FnMut(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<Quad> {
    integrate_breakpoints(f, &[a, b], rel_tol, 0.0)
}
