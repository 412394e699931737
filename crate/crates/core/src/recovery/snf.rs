//! Smith normal form of small integer matrices.

/// P·N·Q = diag(d) with P, Q unimodular and d₀ | d₁ | … (nonnegative).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Smith {
    pub p: Vec<Vec<i64>>,
    pub q: Vec<Vec<i64>>,
    /// Invariant factors, `min(rows, cols)` of them; zeros past the rank.
    pub d: Vec<i64>,
}

impl Smith {
    pub fn rank(&self) -> usize {
        self.d.iter().filter(|&&v| v != 0).count()
    }

    /// Index of the lattice N·ℤᵐ in ℤ^rank: the product of nonzero factors.
    pub fn index(&self) -> u64 {
        self.d.iter().filter(|&&v| v != 0).map(|&v| v as u64).product()
    }
}

fn identity(n: usize) -> Vec<Vec<i64>> {
    (0..n).map(|i| (0..n).map(|j| i64::from(i == j)).collect()).collect()
}

fn row_axpy(m: &mut [Vec<i64>], dst: usize, src: usize, f: i64) {
    for c in 0..m[dst].len() {
        m[dst][c] -= f * m[src][c];
    }
}

fn col_axpy(m: &mut [Vec<i64>], dst: usize, src: usize, f: i64) {
    for row in m.iter_mut() {
        row[dst] -= f * row[src];
    }
}

fn col_swap(m: &mut [Vec<i64>], a: usize, b: usize) {
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

/// Smith normal form by elementary row and column operations.
pub fn smith(n: &[Vec<i64>]) -> Smith {
    let rows = n.len();
    let cols = n.first().map_or(0, Vec::len);
    let mut a: Vec<Vec<i64>> = n.to_vec();
    let mut p = identity(rows);
    let mut q = identity(cols);
    let mut d = vec![0; rows.min(cols)];
    for t in 0..rows.min(cols) {
        // smallest nonzero entry of the trailing block becomes the pivot
        let mut best = None;
        for (i, row) in a.iter().enumerate().skip(t) {
            for (j, &v) in row.iter().enumerate().skip(t) {
                if v != 0 && best.is_none_or(|(_, _, b): (usize, usize, i64)| v.abs() < b) {
                    best = Some((i, j, v.abs()));
                }
            }
        }
        let Some((bi, bj, _)) = best else { break };
        a.swap(t, bi);
        p.swap(t, bi);
        col_swap(&mut a, t, bj);
        col_swap(&mut q, t, bj);
        loop {
            let mut changed = false;
            for i in t + 1..rows {
                if a[i][t] != 0 {
                    let f = a[i][t] / a[t][t];
                    row_axpy(&mut a, i, t, f);
                    row_axpy(&mut p, i, t, f);
                    if a[i][t] != 0 {
                        a.swap(t, i);
                        p.swap(t, i);
                        changed = true;
                    }
                }
            }
            for j in t + 1..cols {
                if a[t][j] != 0 {
                    let f = a[t][j] / a[t][t];
                    col_axpy(&mut a, j, t, f);
                    col_axpy(&mut q, j, t, f);
                    if a[t][j] != 0 {
                        col_swap(&mut a, t, j);
                        col_swap(&mut q, t, j);
                        changed = true;
                    }
                }
            }
            if changed {
                continue;
            }
            // pivot must divide the rest; otherwise fold an offending row in
            let piv = a[t][t];
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| a[i][j] % piv != 0));
            match bad {
                Some(i) => {
                    row_axpy(&mut a, t, i, -1);
                    row_axpy(&mut p, t, i, -1);
                }
                None => break,
            }
        }
        if a[t][t] < 0 {
            for v in a[t].iter_mut() {
                *v = -*v;
            }
            for v in p[t].iter_mut() {
                *v = -*v;
            }
        }
        d[t] = a[t][t];
    }
    Smith { p, q, d }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mul(a: &[Vec<i64>], b: &[Vec<i64>]) -> Vec<Vec<i64>> {
        let m = b.first().map_or(0, Vec::len);
        a.iter()
            .map(|row| (0..m).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
            .collect()
    }

    /// Determinant by cofactor expansion (small matrices only).
    fn det(a: &[Vec<i64>]) -> i64 {
        let n = a.len();
        if n == 1 {
            return a[0][0];
        }
        (0..n)
            .map(|j| {
                let minor: Vec<Vec<i64>> = a[1..]
                    .iter()
                    .map(|r| r.iter().enumerate().filter(|&(c, _)| c != j).map(|(_, &v)| v).collect())
                    .collect();
                let s = if j % 2 == 0 { 1 } else { -1 };
                s * a[0][j] * det(&minor)
            })
            .sum()
    }

    #[test]
    fn diagonal_example() {
        let s = smith(&[vec![2, 0], vec![0, 1]]);
        assert_eq!(s.d, vec![1, 2]);
        assert_eq!(s.index(), 2);
    }

    #[test]
    fn classic_example() {
        let n = vec![vec![2, 4, 4], vec![-6, 6, 12], vec![10, -4, -16]];
        let s = smith(&n);
        assert_eq!(s.d, vec![2, 6, 12]);
    }

    proptest! {
        #[test]
        fn factorization_holds(rows in 1usize..5, cols in 1usize..5, seed in proptest::collection::vec(-4i64..5, 16)) {
            let n: Vec<Vec<i64>> = (0..rows).map(|i| (0..cols).map(|j| seed[i * 4 + j]).collect()).collect();
            let s = smith(&n);
            let dn = mul(&mul(&s.p, &n), &s.q);
            for (i, row) in dn.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    let want = if i == j { s.d[i] } else { 0 };
                    prop_assert_eq!(v, want);
                }
            }
            prop_assert_eq!(det(&s.p).abs(), 1);
            prop_assert_eq!(det(&s.q).abs(), 1);
            let nz: Vec<i64> = s.d.iter().copied().filter(|&v| v != 0).collect();
            prop_assert!(nz.iter().all(|&v| v > 0));
            prop_assert!(nz.windows(2).all(|w| w[1] % w[0] == 0));
            prop_assert!(s.d[nz.len()..].iter().all(|&v| v == 0));
            if rows == cols {
                prop_assert_eq!(det(&n).unsigned_abs(), if s.rank() == rows { s.index() } else { 0 });
            }
        }
    }
}
