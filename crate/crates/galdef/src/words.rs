//! Signed words in a fixed generating set, and the word calculus the
//! cohomology machinery runs on.
//!
//! A word is stored run-length encoded as a sequence of `(generator,
//! exponent)` pairs ([`PWord`]).  Exponents are signed and may be as large as
//! `p^cap`, so nothing here ever expands a power letter by letter: matrix
//! evaluation uses square-and-multiply, and the Fox-derivative and
//! cocycle-evaluation routines use the partial geometric sums
//!
//! ```text
//!     N_e(A) = 1 + A + ... + A^{e-1},
//! ```
//!
//! computed together with `A^e` by a doubling recursion
//! (`N_{2k} = (1 + A^k) N_k`).
//!
//! For a 1-cocycle `f` with `f(gh) = f(g) + g.f(h)` one has
//! `f(g^e) = N_e(g) f(g)` and `f(g^{-e}) = -g^{-e} N_e(g) f(g)
//! = -g^{-1} N_e(g^{-1}) f(g)`, so a single "step" routine serves both the
//! free-derivative rows and cocycle evaluation along arbitrary words.

use crate::fq::Fq;
use crate::fq::FqElem;
use crate::linalg::{mat_add, mat_mul, mat_scale, mat_vec, vec_add, FqMat};
use crate::mat2::{identity, mat_inv, mat_mul as m2_mul, mat_pow, Mat2, Ring};

/// A signed word in generators indexed `0..k`, run-length encoded.
/// Invariant: exponents are nonzero and adjacent runs use distinct
/// generators (enforced by the constructors below).
pub type PWord = Vec<(usize, i64)>;

/// The empty word.
pub fn pw_one() -> PWord {
    Vec::new()
}

/// The single-letter word `g_i`.
pub fn pw_gen(i: usize) -> PWord {
    vec![(i, 1)]
}

/// The word `g_i^e`.
pub fn pw_genpow(i: usize, e: i64) -> PWord {
    if e == 0 {
        Vec::new()
    } else {
        vec![(i, e)]
    }
}

/// Append one run to a word, merging with the tail run and dropping
/// cancellations.
pub fn pw_push(w: &mut PWord, i: usize, e: i64) {
    if e == 0 {
        return;
    }
    if let Some(last) = w.last_mut() {
        if last.0 == i {
            last.1 += e;
            if last.1 == 0 {
                w.pop();
            }
            return;
        }
    }
    w.push((i, e));
}

/// Concatenation `a · b` in reduced run-length form.
pub fn pw_mul(a: &PWord, b: &PWord) -> PWord {
    let mut out = a.clone();
    for &(i, e) in b {
        pw_push(&mut out, i, e);
    }
    out
}

/// The inverse word.
pub fn pw_inv(a: &PWord) -> PWord {
    a.iter().rev().map(|&(i, e)| (i, -e)).collect()
}

/// `w x w^{-1}`.
pub fn pw_conj(w: &PWord, x: &PWord) -> PWord {
    pw_mul(&pw_mul(w, x), &pw_inv(w))
}

/// `w^e` for small `e` (used for relator assembly, never for big powers).
pub fn pw_pow(w: &PWord, e: i64) -> PWord {
    let base = if e < 0 { pw_inv(w) } else { w.clone() };
    let mut out = pw_one();
    for _ in 0..e.unsigned_abs() {
        out = pw_mul(&out, &base);
    }
    out
}

/// Total letter count (sum of |exponent|), useful only as a size diagnostic.
pub fn pw_letters(w: &PWord) -> u64 {
    w.iter().map(|&(_, e)| e.unsigned_abs()).sum()
}

/// Evaluate a word in 2x2 matrices over any [`Ring`].  Generators must be
/// invertible whenever a negative exponent appears.
pub fn eval_mat2<R: Ring>(r: &R, w: &PWord, gens: &[Mat2<R::Elem>]) -> Mat2<R::Elem> {
    let mut acc = identity(r);
    for &(i, e) in w {
        let base = if e < 0 {
            mat_inv(r, &gens[i]).expect("generator image must be invertible")
        } else {
            gens[i].clone()
        };
        acc = m2_mul(r, &acc, &mat_pow(r, &base, e.unsigned_abs()));
    }
    acc
}

/// `(A^e, N_e(A))` with `N_e(A) = 1 + A + ... + A^{e-1}`, by doubling.
pub fn pow_sum(fq: &Fq, a: &FqMat, e: u64) -> (FqMat, FqMat) {
    let n = a.rows;
    let id = FqMat::identity(fq, n);
    let mut pow = id.clone();
    let mut sum = FqMat::zeros(n, n);
    if e == 0 {
        return (pow, sum);
    }
    let bits = 64 - e.leading_zeros();
    for b in (0..bits).rev() {
        // doubling step: N_{2k} = (1 + A^k) N_k, A^{2k} = (A^k)^2
        sum = mat_mul(fq, &mat_add(fq, &id, &pow), &sum);
        pow = mat_mul(fq, &pow, &pow);
        if (e >> b) & 1 == 1 {
            sum = mat_add(fq, &sum, &pow);
            pow = mat_mul(fq, &pow, a);
        }
    }
    (pow, sum)
}

/// Invert a square matrix over `F_q`, if possible.
pub fn fqmat_inv(fq: &Fq, a: &FqMat) -> Option<FqMat> {
    let n = a.rows;
    let mut work = FqMat::hcat(a, &FqMat::identity(fq, n));
    let pivots = crate::linalg::rref(fq, &mut work);
    if pivots.len() != n || pivots.iter().any(|&c| c >= n) {
        return None;
    }
    let mut out = FqMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out.set(i, j, work.get(i, n + j));
        }
    }
    Some(out)
}

/// For one signed run `g^e` acted through `A`: returns `(P, S)` where `P` is
/// the action of `g^e` and `S` is the matrix with `f(g^e) = S · f(g)` for
/// any 1-cocycle `f`.  For `e >= 0` these are `(A^e, N_e(A))`; for `e = -k`
/// they are `(B^k, -B N_k(B))` with `B = A^{-1}`.
pub fn run_step(fq: &Fq, a: &FqMat, e: i64) -> (FqMat, FqMat) {
    if e >= 0 {
        pow_sum(fq, a, e as u64)
    } else {
        let b = fqmat_inv(fq, a).expect("module action must be invertible");
        let (p, s) = pow_sum(fq, &b, e.unsigned_abs());
        let minus_one = fq.neg(fq.one());
        (p, mat_scale(fq, minus_one, &mat_mul(fq, &b, &s)))
    }
}

/// The action of a whole word on a module with generator actions `acts`.
pub fn word_act(fq: &Fq, w: &PWord, acts: &[FqMat]) -> FqMat {
    let n = acts.first().map_or(0, |a| a.rows);
    let mut acc = FqMat::identity(fq, n);
    for &(i, e) in w {
        let (p, _) = run_step(fq, &acts[i], e);
        acc = mat_mul(fq, &acc, &p);
    }
    acc
}

/// The row of Fox derivatives of `w`: matrices `D_j` such that for any map
/// `f` on generators extending to a 1-cocycle, `f(w) = sum_j D_j · f(g_j)`.
/// Computed left to right, keeping the action of the prefix.
pub fn fox_row(fq: &Fq, w: &PWord, acts: &[FqMat]) -> Vec<FqMat> {
    let n = acts.first().map_or(0, |a| a.rows);
    let mut rows: Vec<FqMat> = (0..acts.len()).map(|_| FqMat::zeros(n, n)).collect();
    let mut prefix = FqMat::identity(fq, n);
    for &(i, e) in w {
        let (p, s) = run_step(fq, &acts[i], e);
        rows[i] = mat_add(fq, &rows[i], &mat_mul(fq, &prefix, &s));
        prefix = mat_mul(fq, &prefix, &p);
    }
    rows
}

/// Evaluate a cocycle (given by its generator values, as coordinate vectors)
/// along a word.
pub fn cocycle_eval(fq: &Fq, w: &PWord, acts: &[FqMat], vals: &[Vec<FqElem>]) -> Vec<FqElem> {
    let n = acts.first().map_or(0, |a| a.rows);
    let mut out = vec![fq.zero(); n];
    let mut prefix = FqMat::identity(fq, n);
    for &(i, e) in w {
        let (p, s) = run_step(fq, &acts[i], e);
        let term = mat_vec(fq, &prefix, &mat_vec(fq, &s, &vals[i]));
        out = vec_add(fq, &out, &term);
        prefix = mat_mul(fq, &prefix, &p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::vec_is_zero;
    use proptest::prelude::*;

    fn f5() -> Fq {
        Fq::new(5, 1).unwrap()
    }

    fn mat(fq: &Fq, entries: &[&[u16]]) -> FqMat {
        let rows = entries
            .iter()
            .map(|r| r.iter().map(|&x| fq.from_int(x as i64)).collect())
            .collect();
        FqMat::from_rows(rows, entries[0].len())
    }

    #[test]
    fn word_reduction_cancels() {
        let w = pw_mul(&pw_genpow(0, 3), &pw_genpow(0, -3));
        assert!(w.is_empty());
        let w2 = pw_mul(&pw_mul(&pw_gen(0), &pw_gen(1)), &pw_inv(&pw_gen(1)));
        assert_eq!(w2, pw_gen(0));
    }

    #[test]
    fn pow_sum_matches_direct_sum() {
        let fq = f5();
        let a = mat(&fq, &[&[2, 1], &[0, 3]]);
        for e in 0..12u64 {
            let (p, s) = pow_sum(&fq, &a, e);
            let mut dp = FqMat::identity(&fq, 2);
            let mut ds = FqMat::zeros(2, 2);
            for _ in 0..e {
                ds = mat_add(&fq, &ds, &dp);
                dp = mat_mul(&fq, &dp, &a);
            }
            assert_eq!(p.d, dp.d, "power at e={e}");
            assert_eq!(s.d, ds.d, "sum at e={e}");
        }
    }

    #[test]
    fn fox_of_cube_is_one_plus_a_plus_a_squared() {
        let fq = f5();
        let a = mat(&fq, &[&[2, 0], &[0, 1]]);
        let rows = fox_row(&fq, &pw_genpow(0, 3), &[a.clone()]);
        let expect = mat_add(
            &fq,
            &FqMat::identity(&fq, 2),
            &mat_add(&fq, &a, &mat_mul(&fq, &a, &a)),
        );
        assert_eq!(rows[0].d, expect.d);
    }

    #[test]
    fn fox_of_inverse_letter() {
        let fq = f5();
        let a = mat(&fq, &[&[2, 1], &[0, 3]]);
        let rows = fox_row(&fq, &pw_genpow(0, -1), &[a.clone()]);
        let minus_ainv = mat_scale(&fq, fq.from_int(-1), &fqmat_inv(&fq, &a).unwrap());
        assert_eq!(rows[0].d, minus_ainv.d);
    }

    #[test]
    fn cocycle_identity_on_products() {
        // f(uv) = f(u) + u.f(v) must hold for the evaluator on arbitrary
        // generator values, for any pair of words.
        let fq = f5();
        let acts = vec![mat(&fq, &[&[2, 1], &[0, 3]]), mat(&fq, &[&[1, 4], &[0, 1]])];
        let vals = vec![
            vec![fq.from_int(1), fq.from_int(2)],
            vec![fq.from_int(3), fq.from_int(1)],
        ];
        let u: PWord = vec![(0, 2), (1, -3)];
        let v: PWord = vec![(1, 1), (0, -2), (1, 5)];
        let fu = cocycle_eval(&fq, &u, &acts, &vals);
        let fv = cocycle_eval(&fq, &v, &acts, &vals);
        let fuv = cocycle_eval(&fq, &pw_mul(&u, &v), &acts, &vals);
        let rhs = vec_add(&fq, &fu, &mat_vec(&fq, &word_act(&fq, &u, &acts), &fv));
        assert!(vec_is_zero(&crate::linalg::vec_sub(&fq, &fuv, &rhs)));
    }

    #[test]
    fn fox_row_reproduces_cocycle_eval() {
        let fq = f5();
        let acts = vec![mat(&fq, &[&[2, 1], &[0, 3]]), mat(&fq, &[&[1, 4], &[0, 1]])];
        let vals = vec![
            vec![fq.from_int(2), fq.from_int(2)],
            vec![fq.from_int(0), fq.from_int(3)],
        ];
        let w: PWord = vec![(0, 7), (1, -2), (0, -11), (1, 4)];
        let direct = cocycle_eval(&fq, &w, &acts, &vals);
        let rows = fox_row(&fq, &w, &acts);
        let mut via_fox = vec![fq.zero(); 2];
        for (j, row) in rows.iter().enumerate() {
            via_fox = vec_add(&fq, &via_fox, &mat_vec(&fq, row, &vals[j]));
        }
        assert_eq!(direct, via_fox);
    }

    #[test]
    fn matrix_evaluation_handles_big_exponents() {
        // (1 1; 0 1)^57 = (1 57; 0 1) = (1 7; 0 1) over Z/25.
        let ctx = crate::witt::WittCtx::new(Fq::new(5, 1).unwrap());
        let r = crate::mat2::WittAt {
            ctx: ctx.clone(),
            level: 2,
        };
        let u = Mat2::new(
            ctx.one(2),
            ctx.one(2),
            ctx.zero(2),
            ctx.one(2),
        );
        let got = eval_mat2(&r, &pw_genpow(0, 57), &[u]);
        assert_eq!(got.e[1], ctx.from_int(7, 2));
        let got_inv = eval_mat2(&r, &pw_genpow(0, -57), &[Mat2::new(
            ctx.one(2),
            ctx.one(2),
            ctx.zero(2),
            ctx.one(2),
        )]);
        assert_eq!(got_inv.e[1], ctx.from_int(-7, 2));
    }

    proptest! {
        #[test]
        fn prop_word_inverse_cancels(runs in proptest::collection::vec((0usize..2, -6i64..6), 0..8)) {
            let fq = f5();
            let acts = vec![
                mat(&fq, &[&[2, 1], &[0, 3]]),
                mat(&fq, &[&[1, 4], &[0, 1]]),
            ];
            let mut w = pw_one();
            for (i, e) in runs {
                pw_push(&mut w, i, e);
            }
            let prod = word_act(&fq, &pw_mul(&w, &pw_inv(&w)), &acts);
            prop_assert_eq!(prod.d, FqMat::identity(&fq, 2).d);
        }
    }
}
