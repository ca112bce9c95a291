//! The local cup-product pairing carried by the tame relation.
//!
//! A tamely ramified local group is generated by a Frobenius `s` and a tame
//! generator `t` subject to `s t s^{-1} = t^q`.  Two 1-cocycles `a` (valued
//! in a module `M`) and `b` (valued in a module `N` paired with `M` by a
//! perfect equivariant form) cup to the 2-cocycle
//! `c(g, h) = <a(g), g·b(h)>`, and the class of a 2-cocycle is read off by
//! evaluating it on the 2-chain of the defining relator.  For a word
//! `y_1 ... y_m` that chain is built letter by letter: a positive letter
//! `g` occurring after the prefix `P` contributes `+c(P, g)`, a negative
//! letter contributes `-c(P g^{-1}, g)` — the same bookkeeping that makes
//! `d[g|h] = g[h] - [gh] + [g]` telescope to zero over a word representing
//! the identity.
//!
//! At the primes used to cut new local conditions the residual
//! representation is trivial and `q = 1 (mod p)`, the actions on both sides
//! collapse, and the whole pairing degenerates to the closed form
//! `<a(s), b(t)> - <a(t), b(s)>`; the general walk is kept because the
//! obstruction calculus evaluates the same chains against nontrivial
//! actions.  The Gram matrix of the pairing on the six-dimensional local
//! cohomology is nonsingular, which is what lets annihilators behave like
//! complements.

use crate::fq::{Fq, FqElem};
use crate::linalg::{kernel_basis, mat_mul, mat_vec, rank, vec_add, vec_dot, vec_scale, FqMat};
use crate::module::GModule;
use crate::words::{fqmat_inv, PWord};

/// Index of the Frobenius generator in local two-generator words.
pub const LOC_S: usize = 0;
/// Index of the tame generator.
pub const LOC_T: usize = 1;

/// The tame relation `s t s^{-1} t^{-q}` as a word in generators `(s, t)`.
pub fn tame_relator(q: u64) -> PWord {
    vec![(LOC_S, 1), (LOC_T, 1), (LOC_S, -1), (LOC_T, -(q as i64))]
}

/// Evaluate the cup product of two 1-cocycles on the 2-chain of a relator
/// word.  `a_vals`/`b_vals` are the generator values of the cocycles,
/// `ma`/`mb` the modules they live in (same generator indexing), and the
/// pairing is the coordinate dot product — callers pick coordinates in
/// which their form is standard.
pub fn cup_relator(
    fq: &Fq,
    rel: &PWord,
    ma: &GModule,
    mb: &GModule,
    a_vals: &[Vec<FqElem>],
    b_vals: &[Vec<FqElem>],
) -> FqElem {
    let mut total = fq.zero();
    // running prefix: value of `a` and the action of the prefix on both sides
    let mut a_pref = vec![fq.zero(); ma.dim];
    let mut act_a = FqMat::identity(fq, ma.dim);
    let mut act_b = FqMat::identity(fq, mb.dim);
    let inv_a: Vec<FqMat> = ma.acts.iter().map(|m| fqmat_inv(fq, m).unwrap()).collect();
    let inv_b: Vec<FqMat> = mb.acts.iter().map(|m| fqmat_inv(fq, m).unwrap()).collect();
    for &(g, e) in rel {
        let steps = e.unsigned_abs();
        for _ in 0..steps {
            if e > 0 {
                // + c(P, g), then P <- P g
                let term = vec_dot(fq, &a_pref, &mat_vec(fq, &act_b, &b_vals[g]));
                total = fq.add(total, term);
                a_pref = vec_add(fq, &a_pref, &mat_vec(fq, &act_a, &a_vals[g]));
                act_a = mat_mul(fq, &act_a, &ma.acts[g]);
                act_b = mat_mul(fq, &act_b, &mb.acts[g]);
            } else {
                // P <- P g^{-1}, then - c(P, g)
                let a_inv_val = vec_scale(
                    fq,
                    fq.neg(fq.one()),
                    &mat_vec(fq, &inv_a[g], &a_vals[g]),
                );
                a_pref = vec_add(fq, &a_pref, &mat_vec(fq, &act_a, &a_inv_val));
                act_a = mat_mul(fq, &act_a, &inv_a[g]);
                act_b = mat_mul(fq, &act_b, &inv_b[g]);
                let term = vec_dot(fq, &a_pref, &mat_vec(fq, &act_b, &b_vals[g]));
                total = fq.sub(total, term);
            }
        }
    }
    total
}

/// Gram matrix of the relator pairing between two spaces of cocycles given
/// by flat rows of generator values.
pub fn gram_matrix(
    fq: &Fq,
    rel: &PWord,
    ma: &GModule,
    mb: &GModule,
    rows_a: &FqMat,
    rows_b: &FqMat,
) -> FqMat {
    let mut g = FqMat::zeros(rows_a.rows, rows_b.rows);
    for i in 0..rows_a.rows {
        let av = crate::cohomology::flat_to_vals(ma.dim, rows_a.row(i));
        for j in 0..rows_b.rows {
            let bv = crate::cohomology::flat_to_vals(mb.dim, rows_b.row(j));
            g.set(i, j, cup_relator(fq, rel, ma, mb, &av, &bv));
        }
    }
    g
}

/// The annihilator of a subspace under a Gram matrix: `sub` holds
/// coordinate rows in the left basis; the result spans
/// `{y : (sub · gram) y = 0}` in right-basis coordinates.
pub fn annihilator(fq: &Fq, gram: &FqMat, sub: &FqMat) -> FqMat {
    let prod = mat_mul(fq, sub, gram);
    kernel_basis(fq, &prod)
}

/// True when the Gram matrix is nonsingular (square and of full rank).
pub fn is_nondegenerate(fq: &Fq, gram: &FqMat) -> bool {
    gram.rows == gram.cols && rank(fq, gram) == gram.rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cohomology::{cocycle_space, flat_to_vals};
    use crate::linalg::{in_span, vec_is_zero};
    use proptest::prelude::*;

    fn f5() -> Fq {
        Fq::new(5, 1).unwrap()
    }

    fn trivial_local(fq: &Fq, dim: usize) -> GModule {
        GModule::trivial(fq.clone(), dim, 2)
    }

    #[test]
    fn closed_form_for_trivial_action() {
        let fq = f5();
        let m = trivial_local(&fq, 3);
        let rel = tame_relator(6); // q = 1 + p
        let a = vec![
            vec![fq.from_int(1), fq.from_int(2), fq.from_int(0)],
            vec![fq.from_int(3), fq.from_int(0), fq.from_int(4)],
        ];
        let b = vec![
            vec![fq.from_int(2), fq.from_int(2), fq.from_int(1)],
            vec![fq.from_int(0), fq.from_int(1), fq.from_int(3)],
        ];
        let got = cup_relator(&fq, &rel, &m, &m, &a, &b);
        let want = fq.sub(vec_dot(&fq, &a[0], &b[1]), vec_dot(&fq, &a[1], &b[0]));
        assert_eq!(got, want);
        // and the swap is the negative
        let swapped = cup_relator(&fq, &rel, &m, &m, &b, &a);
        assert_eq!(swapped, fq.neg(got));
    }

    #[test]
    fn closed_form_holds_for_any_q_one_mod_p() {
        let fq = f5();
        let m = trivial_local(&fq, 1);
        let a = vec![vec![fq.from_int(2)], vec![fq.from_int(3)]];
        let b = vec![vec![fq.from_int(1)], vec![fq.from_int(4)]];
        for q in [6u64, 11, 26, 126] {
            let got = cup_relator(&fq, &tame_relator(q), &m, &m, &a, &b);
            let want = fq.sub(fq.mul(a[0][0], b[1][0]), fq.mul(a[1][0], b[0][0]));
            assert_eq!(got, want, "q = {q}");
        }
    }

    #[test]
    fn coboundaries_pair_to_zero_with_nontrivial_action() {
        // s acts by diag(2,1,3), t trivially; the dual side acts by the
        // inverse transpose so the dot product is equivariant
        let fq = f5();
        let d = |x: i64, y: i64, z: i64| {
            let mut m = FqMat::zeros(3, 3);
            m.set(0, 0, fq.from_int(x));
            m.set(1, 1, fq.from_int(y));
            m.set(2, 2, fq.from_int(z));
            m
        };
        let ma = GModule::new(fq.clone(), vec![d(2, 1, 3), d(1, 1, 1)]).unwrap();
        let mb = GModule::new(fq.clone(), vec![d(3, 1, 2), d(1, 1, 1)]).unwrap();
        let rel = tame_relator(6);
        let rels = vec![rel.clone()];
        let sa = cocycle_space(&ma, &rels);
        let sb = cocycle_space(&mb, &rels);
        assert!(sa.b1.rows > 0, "need actual coboundaries for this test");
        for i in 0..sa.b1.rows {
            let av = flat_to_vals(3, sa.b1.row(i));
            for j in 0..sb.z1.rows {
                let bv = flat_to_vals(3, sb.z1.row(j));
                assert!(fq.is_zero(cup_relator(&fq, &rel, &ma, &mb, &av, &bv)));
            }
        }
        for i in 0..sb.b1.rows {
            let bv = flat_to_vals(3, sb.b1.row(i));
            for j in 0..sa.z1.rows {
                let av = flat_to_vals(3, sa.z1.row(j));
                assert!(fq.is_zero(cup_relator(&fq, &rel, &ma, &mb, &av, &bv)));
            }
        }
    }

    #[test]
    fn local_model_dimensions_at_a_cutting_prime() {
        // trivial residual action, q = 1 mod p: H^0 = 3, Z^1 = H^1 = 6
        let fq = f5();
        let m = trivial_local(&fq, 3);
        let space = cocycle_space(&m, &[tame_relator(6)]);
        assert_eq!(m.fixed_points().rows, 3);
        assert_eq!(space.z1.rows, 6);
        assert_eq!(space.b1.rows, 0);
        assert_eq!(space.h1_dim(), 6);
    }

    #[test]
    fn gram_matrix_is_nonsingular_and_block_skew() {
        let fq = f5();
        let m = trivial_local(&fq, 3);
        let rel = tame_relator(6);
        let space = cocycle_space(&m, &[rel.clone()]);
        let g = gram_matrix(&fq, &rel, &m, &m, &space.z1, &space.z1);
        assert!(is_nondegenerate(&fq, &g));
        // in the (s-values | t-values) basis the form is [[0, I], [-I, 0]]
        for i in 0..6 {
            for j in 0..6 {
                let want = if j == i + 3 {
                    fq.one()
                } else if i == j + 3 {
                    fq.neg(fq.one())
                } else {
                    fq.zero()
                };
                assert_eq!(g.get(i, j), want, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn unramified_classes_annihilate_unramified_classes() {
        let fq = f5();
        let m = trivial_local(&fq, 3);
        let rel = tame_relator(6);
        let space = cocycle_space(&m, &[rel.clone()]);
        let g = gram_matrix(&fq, &rel, &m, &m, &space.z1, &space.z1);
        // the unramified line: t-value zero; in the z1 basis those are the
        // coordinate rows whose flat vector has zero t-block
        let mut unram = FqMat::zeros(0, 6);
        for i in 0..space.z1.rows {
            let row = space.z1.row(i);
            if row[3..].iter().all(|&c| fq.is_zero(c)) {
                let mut coords = vec![fq.zero(); 6];
                coords[i] = fq.one();
                unram.push_row(&coords);
            }
        }
        assert_eq!(unram.rows, 3);
        let ann = annihilator(&fq, &g, &unram);
        assert_eq!(ann.rows, 3);
        // the annihilator is again the unramified part: flatten back and
        // check the t-block vanishes
        for i in 0..ann.rows {
            let mut flat = vec![fq.zero(); 6];
            for (k, &c) in ann.row(i).iter().enumerate() {
                flat = vec_add(&fq, &flat, &vec_scale(&fq, c, space.z1.row(k)));
            }
            assert!(flat[3..].iter().all(|&c| fq.is_zero(c)));
        }
    }

    proptest! {
        #[test]
        fn pairing_is_bilinear(seed in 0u64..500) {
            let fq = f5();
            let m = trivial_local(&fq, 2);
            let rel = tame_relator(11);
            let el = |s: u64| fq.element_from_index(s % 5);
            let v = |s: u64| vec![vec![el(s), el(s / 5)], vec![el(s / 25), el(s / 125)]];
            let a1 = v(seed);
            let a2 = v(seed.wrapping_mul(7) + 3);
            let b = v(seed.wrapping_mul(13) + 1);
            let lam = el(seed / 3 + 1);
            // <a1 + lam a2, b> = <a1, b> + lam <a2, b>
            let mut sum = Vec::new();
            for (x, y) in a1.iter().zip(&a2) {
                sum.push(vec_add(&fq, x, &vec_scale(&fq, lam, y)));
            }
            let lhs = cup_relator(&fq, &rel, &m, &m, &sum, &b);
            let rhs = fq.add(
                cup_relator(&fq, &rel, &m, &m, &a1, &b),
                fq.mul(lam, cup_relator(&fq, &rel, &m, &m, &a2, &b)),
            );
            prop_assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn in_span_sanity_for_annihilator_coords() {
        // annihilator rows are coordinate vectors in the right basis; the
        // zero subspace annihilates everything
        let fq = f5();
        let m = trivial_local(&fq, 3);
        let rel = tame_relator(6);
        let space = cocycle_space(&m, &[rel.clone()]);
        let g = gram_matrix(&fq, &rel, &m, &m, &space.z1, &space.z1);
        let none = FqMat::zeros(0, 6);
        let ann = annihilator(&fq, &g, &none);
        assert_eq!(ann.rows, 6);
        for i in 0..6 {
            let mut e = vec![fq.zero(); 6];
            e[i] = fq.one();
            assert!(in_span(&fq, &ann, &e));
        }
        // full space annihilates nothing
        let full = FqMat::identity(&fq, 6);
        let ann2 = annihilator(&fq, &g, &full);
        assert!(ann2.rows == 0 || ann2.rows == 6 - rank(&fq, &g));
        assert!(!vec_is_zero(&[fq.one()]));
    }
}
