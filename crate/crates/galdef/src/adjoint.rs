//! The conjugation module: trace-zero 2x2 matrices under `x -> g x g^{-1}`,
//! with its canonical flag and twisted dual.
//!
//! Basis, in this order:
//!
//! ```text
//!     e+ = (0 1; 0 0),   eh = (1 0; 0 -1),   e- = (0 0; 1 0).
//! ```
//!
//! For an upper-triangular residual image the flag
//! `0 ⊂ <e+> ⊂ <e+, eh> ⊂ X` is stable, with graded characters
//! `phi, 1, phi^{-1}`.  The dual module twisted by the mod-`p` cyclotomic
//! character carries the complementary flag (annihilators of the first one)
//! with graded characters `chi·phi, chi, chi·phi^{-1}`; together these six
//! characters are the ones required to be pairwise distinct by the running
//! hypotheses.  The module structure itself is always computed by honest
//! conjugation — the closed formulas only ever appear in tests.

use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem};
use crate::linalg::{mat_scale, rank, transpose, FqMat};
use crate::mat2::{mat_inv, mat_mul, Mat2};
use crate::module::GModule;
use crate::rep::ResidualRep;
use crate::words::fqmat_inv;

/// Matrix of a coordinate vector `(x+, xh, x-)`.
pub fn mat_of_x(fq: &Fq, v: &[FqElem]) -> Mat2<FqElem> {
    Mat2::new(v[1], v[0], v[2], fq.neg(v[1]))
}

/// Coordinates of a trace-zero matrix.
pub fn x_of_mat(fq: &Fq, m: &Mat2<FqElem>) -> Result<Vec<FqElem>> {
    if !fq.is_zero(fq.add(m.e[0], m.e[3])) {
        return Err(Error::Domain("matrix has nonzero trace".into()));
    }
    Ok(vec![m.e[1], m.e[0], m.e[2]])
}

/// The conjugation module of a residual representation.
pub fn adjoint_rep(rep: &ResidualRep) -> Result<GModule> {
    let fq = &rep.fq;
    let basis = [
        mat_of_x(fq, &[fq.one(), fq.zero(), fq.zero()]),
        mat_of_x(fq, &[fq.zero(), fq.one(), fq.zero()]),
        mat_of_x(fq, &[fq.zero(), fq.zero(), fq.one()]),
    ];
    let mut acts = Vec::with_capacity(rep.mats.len());
    for g in &rep.mats {
        let ginv = mat_inv(fq, g)
            .ok_or_else(|| Error::BadRep("residual matrix is not invertible".into()))?;
        let mut a = FqMat::zeros(3, 3);
        for (j, e) in basis.iter().enumerate() {
            let img = mat_mul(fq, &mat_mul(fq, g, e), &ginv);
            let co = x_of_mat(fq, &img)?;
            for (i, &c) in co.iter().enumerate() {
                a.set(i, j, c);
            }
        }
        acts.push(a);
    }
    GModule::new(fq.clone(), acts)
}

/// The stable flag `<e+> ⊂ <e+, eh>` as row matrices.
pub fn standard_flag(fq: &Fq) -> (FqMat, FqMat) {
    let u1 = FqMat::from_rows(vec![vec![fq.one(), fq.zero(), fq.zero()]], 3);
    let u2 = FqMat::from_rows(
        vec![
            vec![fq.one(), fq.zero(), fq.zero()],
            vec![fq.zero(), fq.one(), fq.zero()],
        ],
        3,
    );
    (u1, u2)
}

/// The flag on the twisted dual: annihilator of `<e+, eh>`, then of `<e+>`,
/// in dual coordinates.
pub fn dual_flag(fq: &Fq) -> (FqMat, FqMat) {
    let v1 = FqMat::from_rows(vec![vec![fq.zero(), fq.zero(), fq.one()]], 3);
    let v2 = FqMat::from_rows(
        vec![
            vec![fq.zero(), fq.zero(), fq.one()],
            vec![fq.zero(), fq.one(), fq.zero()],
        ],
        3,
    );
    (v1, v2)
}

/// Graded characters of a full flag given by the rows of `flag` (the first
/// `dims[i]` rows must span an invariant subspace for each `i`).  Errors if
/// some graded piece is not scalar.
pub fn flag_graded_chars(m: &GModule, flag: &FqMat, dims: &[usize]) -> Result<Vec<Vec<FqElem>>> {
    let fq = &m.fq;
    if flag.rows != m.dim || rank(fq, flag) != m.dim {
        return Err(Error::BadRep("flag must be a basis".into()));
    }
    // change of basis: columns of B are the flag vectors
    let b = crate::linalg::transpose(flag);
    let binv = fqmat_inv(fq, &b).ok_or_else(|| Error::BadRep("flag not invertible".into()))?;
    let mut chars: Vec<Vec<FqElem>> = vec![Vec::new(); dims.len()];
    for a in &m.acts {
        let an = crate::linalg::mat_mul(fq, &binv, &crate::linalg::mat_mul(fq, a, &b));
        let mut lo = 0;
        for (piece, &hi) in dims.iter().enumerate() {
            // block-triangularity: columns lo..hi must vanish below row hi
            for j in lo..hi {
                for i in hi..m.dim {
                    if !fq.is_zero(an.get(i, j)) {
                        return Err(Error::BadRep(format!(
                            "flag level {piece} is not invariant"
                        )));
                    }
                }
            }
            // the block must be scalar
            let s = an.get(lo, lo);
            for j in lo..hi {
                for i in lo..hi {
                    let want = if i == j { s } else { fq.zero() };
                    if an.get(i, j) != want {
                        return Err(Error::BadRep(format!(
                            "graded piece {piece} is not scalar"
                        )));
                    }
                }
            }
            chars[piece].push(s);
            lo = hi;
        }
    }
    Ok(chars)
}

/// Largest subspace on which every generator acts through the given
/// character: the simultaneous eigenspace.
pub fn character_socle(m: &GModule, chars: &[FqElem]) -> FqMat {
    let fq = &m.fq;
    let mut stacked = FqMat::zeros(0, m.dim);
    for (a, &c) in m.acts.iter().zip(chars) {
        let scaled = crate::linalg::mat_sub(
            fq,
            a,
            &crate::linalg::mat_scale(fq, c, &FqMat::identity(fq, m.dim)),
        );
        stacked = FqMat::stack(&stacked, &scaled);
    }
    crate::linalg::kernel_basis(fq, &stacked)
}

/// Discover the filtration of a module by repeatedly peeling the socle at a
/// prescribed list of characters; returns the dimensions peeled at each
/// step.  Used as an independent check that the designed flag is exactly
/// the character filtration.
pub fn peel_by_characters(m: &GModule, char_list: &[Vec<FqElem>]) -> Result<Vec<usize>> {
    let mut cur = m.clone();
    let mut dims = Vec::new();
    for chars in char_list {
        if cur.dim == 0 {
            dims.push(0);
            continue;
        }
        let soc = character_socle(&cur, chars);
        dims.push(soc.rows);
        if soc.rows == 0 {
            continue;
        }
        let (quot, _) = cur.quotient(&soc)?;
        cur = quot;
    }
    if cur.dim != 0 {
        return Err(Error::BadRep("characters do not exhaust the module".into()));
    }
    Ok(dims)
}

/// The six graded characters `[phi, 1, phi^{-1}, chi·phi, chi, chi·phi^{-1}]`
/// as value vectors over the generators.
pub fn six_characters(
    fq: &Fq,
    rep: &ResidualRep,
    chi: &[FqElem],
) -> Result<[Vec<FqElem>; 6]> {
    let n = rep.mats.len();
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        phi.push(rep.phi(i));
    }
    let phi_inv: Vec<FqElem> = phi
        .iter()
        .map(|&v| fq.inv(v).ok_or_else(|| Error::BadRep("phi value is zero".into())))
        .collect::<Result<_>>()?;
    let one = vec![fq.one(); n];
    let mul = |a: &[FqElem], b: &[FqElem]| -> Vec<FqElem> {
        a.iter().zip(b).map(|(&x, &y)| fq.mul(x, y)).collect()
    };
    Ok([
        phi.clone(),
        one,
        phi_inv.clone(),
        mul(chi, &phi),
        chi.to_vec(),
        mul(chi, &phi_inv),
    ])
}

pub fn pairwise_distinct(chars: &[Vec<FqElem>]) -> bool {
    for i in 0..chars.len() {
        for j in (i + 1)..chars.len() {
            if chars[i] == chars[j] {
                return false;
            }
        }
    }
    true
}

/// The dual module twisted by a character, in dual coordinates: `g` acts by
/// `chi(g) · (A_g^{-1})^T`, which makes the evaluation pairing equivariant,
/// `<g·x, g·lam> = chi(g)·<x, lam>`.  With `chi` the mod-`p` cyclotomic
/// values this is the coefficient module of the dual Selmer group.
pub fn dual_twist(m: &GModule, chi: &[FqElem]) -> Result<GModule> {
    if chi.len() != m.acts.len() {
        return Err(Error::Domain("need one character value per generator".into()));
    }
    let fq = &m.fq;
    let mut acts = Vec::with_capacity(m.acts.len());
    for (a, &c) in m.acts.iter().zip(chi) {
        let inv = fqmat_inv(fq, a)
            .ok_or_else(|| Error::BadRep("module action is not invertible".into()))?;
        acts.push(mat_scale(fq, c, &transpose(&inv)));
    }
    GModule::new(fq.clone(), acts)
}

/// Evaluation pairing between a module in standard coordinates and its
/// (twisted) dual in dual coordinates.
pub fn dual_pair(fq: &Fq, x: &[FqElem], lam: &[FqElem]) -> FqElem {
    let mut acc = fq.zero();
    for (&a, &b) in x.iter().zip(lam) {
        acc = fq.add(acc, fq.mul(a, b));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GenOrder, GenSpec, GroupSpec, UnitSpec};
    use crate::linalg::mat_vec;
    use std::collections::BTreeMap;

    fn toy_data() -> (Fq, GroupSpec, ResidualRep) {
        let fq = Fq::new(5, 1).unwrap();
        let q2 = UnitSpec { teich: 2, one_plus_p: 0 };
        let mut conj = BTreeMap::new();
        conj.insert((0, 3), q2);
        conj.insert((0, 4), q2);
        let spec = GroupSpec {
            p: 5,
            t: 1,
            cap: 8,
            gens: vec![
                GenSpec { name: "a".into(), order: GenOrder::Exact(4), chi_tilde: UnitSpec::one() },
                GenSpec { name: "c".into(), order: GenOrder::Exact(4), chi_tilde: q2 },
                GenSpec {
                    name: "m0".into(),
                    order: GenOrder::Depth { offset: 0 },
                    chi_tilde: UnitSpec { teich: 1, one_plus_p: 1 },
                },
                GenSpec { name: "b".into(), order: GenOrder::Depth { offset: 1 }, chi_tilde: UnitSpec::one() },
                GenSpec { name: "b1".into(), order: GenOrder::Depth { offset: 1 }, chi_tilde: UnitSpec::one() },
            ],
            conj,
            tame: Vec::new(),
        };
        let m = |a: i64, b: i64| Mat2::new(fq.from_int(a), fq.from_int(b), fq.zero(), fq.one());
        let rep = ResidualRep::new(
            fq.clone(),
            vec![m(2, 0), m(1, 0), m(1, 0), m(1, 1), m(1, 0)],
        );
        (fq, spec, rep)
    }

    fn chi_residual(fq: &Fq, spec: &GroupSpec) -> Vec<FqElem> {
        spec.gens
            .iter()
            .map(|g| fq.from_int(g.chi_tilde.value(spec.p, 1) as i64))
            .collect()
    }

    #[test]
    fn conjugation_by_diagonal_is_diag_2_1_3() {
        let (fq, _, rep) = toy_data();
        let x = adjoint_rep(&rep).unwrap();
        let a = &x.acts[0];
        let expect = [[2i64, 0, 0], [0, 1, 0], [0, 0, 3]];
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(a.get(i, j), fq.from_int(expect[i][j]));
            }
        }
    }

    #[test]
    fn conjugation_by_unipotent_frozen_columns() {
        let (fq, _, rep) = toy_data();
        let x = adjoint_rep(&rep).unwrap();
        let u = &x.acts[3];
        // e+ -> e+, eh -> eh - 2 e+, e- -> e- + eh - e+
        let cols = [[1i64, 0, 0], [-2, 1, 0], [-1, 1, 1]];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                assert_eq!(u.get(i, j), fq.from_int(v), "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn flag_is_invariant_with_the_right_graded_characters() {
        let (fq, spec, rep) = toy_data();
        let x = adjoint_rep(&rep).unwrap();
        let (u1, u2) = standard_flag(&fq);
        assert!(x.is_invariant(&u1));
        assert!(x.is_invariant(&u2));
        let flag = FqMat::identity(&fq, 3);
        let chars = flag_graded_chars(&x, &flag, &[1, 2, 3]).unwrap();
        let chi = chi_residual(&fq, &spec);
        let six = six_characters(&fq, &rep, &chi).unwrap();
        assert_eq!(chars[0], six[0], "bottom piece is phi");
        assert_eq!(chars[1], six[1], "middle piece is trivial");
        assert_eq!(chars[2], six[2], "top piece is phi inverse");
        // no global fixed vectors
        assert_eq!(x.fixed_points().rows, 0);
    }

    #[test]
    fn twisted_dual_flag_characters() {
        let (fq, spec, rep) = toy_data();
        let x = adjoint_rep(&rep).unwrap();
        let chi = chi_residual(&fq, &spec);
        let xstar = x.dual().twist(&chi);
        let (v1, v2) = dual_flag(&fq);
        assert!(xstar.is_invariant(&v1));
        assert!(xstar.is_invariant(&v2));
        let flag = FqMat::from_rows(
            vec![
                vec![fq.zero(), fq.zero(), fq.one()],
                vec![fq.zero(), fq.one(), fq.zero()],
                vec![fq.one(), fq.zero(), fq.zero()],
            ],
            3,
        );
        let chars = flag_graded_chars(&xstar, &flag, &[1, 2, 3]).unwrap();
        let six = six_characters(&fq, &rep, &chi).unwrap();
        assert_eq!(chars[0], six[3], "bottom piece is chi phi");
        assert_eq!(chars[1], six[4], "middle piece is chi");
        assert_eq!(chars[2], six[5], "top piece is chi phi inverse");
    }

    #[test]
    fn six_characters_are_distinct_for_the_toy() {
        let (fq, spec, rep) = toy_data();
        let chi = chi_residual(&fq, &spec);
        let six = six_characters(&fq, &rep, &chi).unwrap();
        assert!(pairwise_distinct(&six));
    }

    #[test]
    fn socle_peeling_rediscovers_both_flags() {
        let (fq, spec, rep) = toy_data();
        let x = adjoint_rep(&rep).unwrap();
        let chi = chi_residual(&fq, &spec);
        let six = six_characters(&fq, &rep, &chi).unwrap();
        // peeling X at (phi, 1, phi^{-1}) takes one dimension each
        let dims = peel_by_characters(&x, &[six[0].clone(), six[1].clone(), six[2].clone()])
            .unwrap();
        assert_eq!(dims, vec![1, 1, 1]);
        // the socle at phi is exactly <e+>
        let soc = character_socle(&x, &six[0]);
        assert_eq!(soc.rows, 1);
        assert!(!fq.is_zero(soc.get(0, 0)));
        assert!(fq.is_zero(soc.get(0, 1)));
        assert!(fq.is_zero(soc.get(0, 2)));
        // dual side
        let xstar = x.dual().twist(&chi);
        let dims =
            peel_by_characters(&xstar, &[six[3].clone(), six[4].clone(), six[5].clone()])
                .unwrap();
        assert_eq!(dims, vec![1, 1, 1]);
    }

    #[test]
    fn pairing_is_equivariant_for_the_twist() {
        let (fq, spec, rep) = toy_data();
        let x = adjoint_rep(&rep).unwrap();
        let chi = chi_residual(&fq, &spec);
        let xstar = x.dual().twist(&chi);
        let v = vec![fq.from_int(1), fq.from_int(2), fq.from_int(3)];
        let lam = vec![fq.from_int(2), fq.from_int(0), fq.from_int(4)];
        for i in 0..x.acts.len() {
            let gv = mat_vec(&fq, &x.acts[i], &v);
            let glam = mat_vec(&fq, &xstar.acts[i], &lam);
            assert_eq!(
                dual_pair(&fq, &gv, &glam),
                fq.mul(chi[i], dual_pair(&fq, &v, &lam))
            );
        }
    }

    #[test]
    fn coordinates_round_trip_through_matrices() {
        let (fq, _, _) = toy_data();
        let v = vec![fq.from_int(4), fq.from_int(1), fq.from_int(2)];
        let m = mat_of_x(&fq, &v);
        assert_eq!(x_of_mat(&fq, &m).unwrap(), v);
        let bad = Mat2::new(fq.one(), fq.zero(), fq.zero(), fq.one());
        assert!(x_of_mat(&fq, &bad).is_err());
    }
}
