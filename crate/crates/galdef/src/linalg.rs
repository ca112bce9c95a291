//! Dense exact linear algebra over `F_q`.
//!
//! Everything downstream (cocycle spaces, local conditions, pairing Gram
//! matrices, obstruction systems) reduces to small dense systems over the
//! residue field, so this module is the workhorse. Vectors are rows; a
//! subspace is an [`FqMat`] whose rows span it.

use crate::fq::{Fq, FqElem};

#[derive(Clone, PartialEq, Debug)]
pub struct FqMat {
    pub rows: usize,
    pub cols: usize,
    pub d: Vec<FqElem>,
}

impl FqMat {
    pub fn zeros(rows: usize, cols: usize) -> FqMat {
        FqMat {
            rows,
            cols,
            d: vec![FqElem::default(); rows * cols],
        }
    }

    pub fn identity(fq: &Fq, n: usize) -> FqMat {
        let mut m = FqMat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, fq.one());
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<FqElem>>, cols: usize) -> FqMat {
        let r = rows.len();
        let mut d = Vec::with_capacity(r * cols);
        for row in rows {
            assert_eq!(row.len(), cols);
            d.extend(row);
        }
        FqMat { rows: r, cols, d }
    }

    pub fn get(&self, i: usize, j: usize) -> FqElem {
        self.d[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: FqElem) {
        self.d[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[FqElem] {
        &self.d[i * self.cols..(i + 1) * self.cols]
    }

    pub fn push_row(&mut self, row: &[FqElem]) {
        assert_eq!(row.len(), self.cols);
        self.d.extend_from_slice(row);
        self.rows += 1;
    }

    pub fn is_zero(&self) -> bool {
        self.d.iter().all(|&x| x == FqElem::default())
    }

    /// Vertical stacking.
    pub fn stack(top: &FqMat, bottom: &FqMat) -> FqMat {
        assert_eq!(top.cols, bottom.cols);
        let mut m = top.clone();
        m.d.extend_from_slice(&bottom.d);
        m.rows += bottom.rows;
        m
    }

    /// Horizontal concatenation.
    pub fn hcat(left: &FqMat, right: &FqMat) -> FqMat {
        assert_eq!(left.rows, right.rows);
        let mut m = FqMat::zeros(left.rows, left.cols + right.cols);
        for i in 0..left.rows {
            for j in 0..left.cols {
                m.set(i, j, left.get(i, j));
            }
            for j in 0..right.cols {
                m.set(i, left.cols + j, right.get(i, j));
            }
        }
        m
    }
}

pub fn mat_mul(fq: &Fq, a: &FqMat, b: &FqMat) -> FqMat {
    assert_eq!(a.cols, b.rows);
    let mut m = FqMat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.get(i, k);
            if fq.is_zero(aik) {
                continue;
            }
            for j in 0..b.cols {
                let v = fq.add(m.get(i, j), fq.mul(aik, b.get(k, j)));
                m.set(i, j, v);
            }
        }
    }
    m
}

pub fn mat_add(fq: &Fq, a: &FqMat, b: &FqMat) -> FqMat {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols));
    let mut m = a.clone();
    for (x, &y) in m.d.iter_mut().zip(&b.d) {
        *x = fq.add(*x, y);
    }
    m
}

pub fn mat_sub(fq: &Fq, a: &FqMat, b: &FqMat) -> FqMat {
    assert_eq!((a.rows, a.cols), (b.rows, b.cols));
    let mut m = a.clone();
    for (x, &y) in m.d.iter_mut().zip(&b.d) {
        *x = fq.sub(*x, y);
    }
    m
}

pub fn mat_scale(fq: &Fq, s: FqElem, a: &FqMat) -> FqMat {
    let mut m = a.clone();
    for x in m.d.iter_mut() {
        *x = fq.mul(s, *x);
    }
    m
}

pub fn transpose(a: &FqMat) -> FqMat {
    let mut m = FqMat::zeros(a.cols, a.rows);
    for i in 0..a.rows {
        for j in 0..a.cols {
            m.set(j, i, a.get(i, j));
        }
    }
    m
}

pub fn mat_vec(fq: &Fq, a: &FqMat, v: &[FqElem]) -> Vec<FqElem> {
    assert_eq!(a.cols, v.len());
    (0..a.rows)
        .map(|i| {
            let mut acc = fq.zero();
            for j in 0..a.cols {
                acc = fq.add(acc, fq.mul(a.get(i, j), v[j]));
            }
            acc
        })
        .collect()
}

pub fn vec_add(fq: &Fq, a: &[FqElem], b: &[FqElem]) -> Vec<FqElem> {
    a.iter().zip(b).map(|(&x, &y)| fq.add(x, y)).collect()
}

pub fn vec_sub(fq: &Fq, a: &[FqElem], b: &[FqElem]) -> Vec<FqElem> {
    a.iter().zip(b).map(|(&x, &y)| fq.sub(x, y)).collect()
}

pub fn vec_scale(fq: &Fq, s: FqElem, a: &[FqElem]) -> Vec<FqElem> {
    a.iter().map(|&x| fq.mul(s, x)).collect()
}

pub fn vec_is_zero(a: &[FqElem]) -> bool {
    a.iter().all(|&x| x == FqElem::default())
}

pub fn vec_dot(fq: &Fq, a: &[FqElem], b: &[FqElem]) -> FqElem {
    a.iter()
        .zip(b)
        .fold(fq.zero(), |acc, (&x, &y)| fq.add(acc, fq.mul(x, y)))
}

/// Reduced row echelon form, in place; returns the pivot columns.
pub fn rref(fq: &Fq, m: &mut FqMat) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..m.cols {
        if r == m.rows {
            break;
        }
        // find a pivot row
        let mut pr = None;
        for i in r..m.rows {
            if !fq.is_zero(m.get(i, c)) {
                pr = Some(i);
                break;
            }
        }
        let Some(pr) = pr else { continue };
        // swap into place
        if pr != r {
            for j in 0..m.cols {
                let a = m.get(r, j);
                let b = m.get(pr, j);
                m.set(r, j, b);
                m.set(pr, j, a);
            }
        }
        // normalize
        let inv = fq.inv(m.get(r, c)).unwrap();
        for j in 0..m.cols {
            m.set(r, j, fq.mul(inv, m.get(r, j)));
        }
        // eliminate everywhere else
        for i in 0..m.rows {
            if i == r {
                continue;
            }
            let f = m.get(i, c);
            if fq.is_zero(f) {
                continue;
            }
            for j in 0..m.cols {
                let v = fq.sub(m.get(i, j), fq.mul(f, m.get(r, j)));
                m.set(i, j, v);
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

pub fn rank(fq: &Fq, m: &FqMat) -> usize {
    let mut c = m.clone();
    rref(fq, &mut c).len()
}

/// Basis of the right kernel `{v : M v = 0}`, rows of the result.
pub fn kernel_basis(fq: &Fq, m: &FqMat) -> FqMat {
    let mut r = m.clone();
    let pivots = rref(fq, &mut r);
    let mut basis = FqMat::zeros(0, m.cols);
    let pivot_set: std::collections::BTreeSet<usize> = pivots.iter().copied().collect();
    for free in 0..m.cols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = vec![fq.zero(); m.cols];
        v[free] = fq.one();
        for (pi, &pc) in pivots.iter().enumerate() {
            v[pc] = fq.neg(r.get(pi, free));
        }
        basis.push_row(&v);
    }
    basis
}

/// A particular solution of `M x = b`, or `None` when inconsistent.
pub fn solve(fq: &Fq, m: &FqMat, b: &[FqElem]) -> Option<Vec<FqElem>> {
    assert_eq!(m.rows, b.len());
    let mut aug = FqMat::zeros(m.rows, m.cols + 1);
    for i in 0..m.rows {
        for j in 0..m.cols {
            aug.set(i, j, m.get(i, j));
        }
        aug.set(i, m.cols, b[i]);
    }
    let pivots = rref(fq, &mut aug);
    if pivots.contains(&m.cols) {
        return None; // pivot in the augmented column
    }
    let mut x = vec![fq.zero(); m.cols];
    for (pi, &pc) in pivots.iter().enumerate() {
        x[pc] = aug.get(pi, m.cols);
    }
    Some(x)
}

/// Row-space basis in reduced echelon form (drops zero rows).
pub fn row_space(fq: &Fq, m: &FqMat) -> FqMat {
    let mut r = m.clone();
    let pivots = rref(fq, &mut r);
    let mut out = FqMat::zeros(0, m.cols);
    for i in 0..pivots.len() {
        out.push_row(r.row(i));
    }
    out
}

/// Is `v` in the row space of `space`?
pub fn in_span(fq: &Fq, space: &FqMat, v: &[FqElem]) -> bool {
    if vec_is_zero(v) {
        return true;
    }
    // v in rowspace(S) iff rank doesn't grow
    let base = rank(fq, space);
    let mut ext = space.clone();
    ext.push_row(v);
    rank(fq, &ext) == base
}

/// Express `v` in terms of the rows of `space`: coefficients `c` with
/// `c * space = v`, or `None`.
pub fn coords_in_span(fq: &Fq, space: &FqMat, v: &[FqElem]) -> Option<Vec<FqElem>> {
    solve(fq, &transpose(space), v)
}

/// Basis of the intersection of two row spaces.
pub fn space_intersection(fq: &Fq, a: &FqMat, b: &FqMat) -> FqMat {
    assert_eq!(a.cols, b.cols);
    if a.rows == 0 || b.rows == 0 {
        return FqMat::zeros(0, a.cols);
    }
    // [x | y] in ker(A^T x stacked -B^T y) ... solve c_a * A = c_b * B via
    // kernel of [A^T appended column block -B^T]
    let stacked = FqMat::stack(a, &mat_scale(fq, fq.from_int(-1), b));
    let ker = kernel_basis(fq, &transpose(&stacked));
    // each kernel row gives coefficients (c_a, c_b) with c_a A = c_b B... in
    // row form: c_a A + (-1)(c_b B)... take first block applied to A
    let mut out = FqMat::zeros(0, a.cols);
    for i in 0..ker.rows {
        let ca = &ker.row(i)[..a.rows];
        let mut v = vec![fq.zero(); a.cols];
        for (k, &c) in ca.iter().enumerate() {
            if fq.is_zero(c) {
                continue;
            }
            for j in 0..a.cols {
                v[j] = fq.add(v[j], fq.mul(c, a.get(k, j)));
            }
        }
        if !vec_is_zero(&v) {
            out.push_row(&v);
        }
    }
    row_space(fq, &out)
}

/// Basis of the sum of two row spaces.
pub fn space_sum(fq: &Fq, a: &FqMat, b: &FqMat) -> FqMat {
    row_space(fq, &FqMat::stack(a, b))
}

/// Extend a basis of `sub` (assumed independent rows inside the row space of
/// `big`) to a basis of `big`'s row space; returns the complement rows.
pub fn complement_in(fq: &Fq, sub: &FqMat, big: &FqMat) -> FqMat {
    let mut acc = row_space(fq, sub);
    let target = rank(fq, big);
    let mut out = FqMat::zeros(0, big.cols);
    for i in 0..big.rows {
        if rank(fq, &acc) == target {
            break;
        }
        let v = big.row(i);
        if !in_span(fq, &acc, v) {
            acc.push_row(v);
            out.push_row(v);
        }
    }
    out
}
