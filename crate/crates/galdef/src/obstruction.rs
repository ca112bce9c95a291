//! Obstruction calculus for one step of the lifting tower.
//!
//! A representation at level `n` is lifted entry-wise (digit-preserving, so
//! a section of the projection, not a homomorphism), its determinant is
//! renormalized to the exact character `theta`, and each relator `r` is
//! evaluated.  Because the input was a homomorphism one level down, the
//! evaluation is `I + E_r` with `E_r` in `m^n`, trace zero (determinants
//! are already exact), so `E_r` is a vector of `m^n/m^{n+1}`-graded
//! coordinates in the residual adjoint.  Replacing the candidate by
//! `g -> (I + h(g)) * cand(g)` changes `E_r` by the free-derivative sum of
//! `h` over `r` — the same matrix whose kernel is `Z^1` — so killing all
//! defects is one inhomogeneous linear solve per graded coordinate.  When
//! the combined system is insoluble the obstruction is real (a nonzero
//! class in the presentation `H^2`) and no amount of retrying fixes it at
//! this level; callers change the local data instead.
//!
//! The exhaustive search at the bottom of the file is the independent
//! check: for a one-generator group of exact order `p` it tries every
//! candidate matrix over `Z/p^2` congruent to the residual one and simply
//! counts which satisfy the relator, with no free calculus anywhere.

use crate::cohomology::z1_matrix;
use crate::error::{Error, Result};
use crate::fq::FqElem;
use crate::group::GroupSpec;
use crate::linalg::{solve, vec_scale};
use crate::mat2::{det, identity, is_identity, mat_add, mat_mul, scalar, Mat2};
use crate::module::GModule;
use crate::rep::{ResidualRep, Theta};
use crate::series::{SeriesRing, TruncSeries};
use crate::words::{eval_mat2, PWord};

/// A lift of the residual representation to one truncation level, stored as
/// generator matrices over the graded coefficient ring.
#[derive(Clone, Debug)]
pub struct LiftRep {
    pub ring: SeriesRing,
    pub mats: Vec<Mat2<TruncSeries>>,
}

impl LiftRep {
    pub fn new(ring: SeriesRing, mats: Vec<Mat2<TruncSeries>>) -> LiftRep {
        LiftRep { ring, mats }
    }

    /// Entry-wise canonical lift of a residual representation into `ring`.
    pub fn from_residual(ring: SeriesRing, rep: &ResidualRep) -> LiftRep {
        let mats = rep
            .mats
            .iter()
            .map(|m| {
                Mat2::new(
                    ring.from_witt(ring.witt.naive_lift(m.e[0], ring.n)),
                    ring.from_witt(ring.witt.naive_lift(m.e[1], ring.n)),
                    ring.from_witt(ring.witt.naive_lift(m.e[2], ring.n)),
                    ring.from_witt(ring.witt.naive_lift(m.e[3], ring.n)),
                )
            })
            .collect();
        LiftRep { ring, mats }
    }

    pub fn eval(&self, w: &PWord) -> Mat2<TruncSeries> {
        eval_mat2(&self.ring, w, &self.mats)
    }

    /// Entry-wise canonical lift into a bigger ring (more levels and/or more
    /// variables); the result is a candidate, not yet a homomorphism.
    pub fn lift_to(&self, up: &SeriesRing) -> LiftRep {
        let mats = self
            .mats
            .iter()
            .map(|m| {
                Mat2::new(
                    self.ring.lift_into(&m.e[0], up),
                    self.ring.lift_into(&m.e[1], up),
                    self.ring.lift_into(&m.e[2], up),
                    self.ring.lift_into(&m.e[3], up),
                )
            })
            .collect();
        LiftRep { ring: up.clone(), mats }
    }

    /// Entry-wise projection down the tower.
    pub fn project_to(&self, k: u8, vars_k: u8) -> LiftRep {
        let target = SeriesRing::new(self.ring.witt.clone(), k, vars_k);
        let mats = self
            .mats
            .iter()
            .map(|m| {
                Mat2::new(
                    self.ring.project(&m.e[0], k, vars_k),
                    self.ring.project(&m.e[1], k, vars_k),
                    self.ring.project(&m.e[2], k, vars_k),
                    self.ring.project(&m.e[3], k, vars_k),
                )
            })
            .collect();
        LiftRep { ring: target, mats }
    }

    /// Check that every relator evaluates to the identity and every
    /// generator determinant equals `theta`.
    pub fn verify(&self, spec: &GroupSpec, theta: &Theta) -> Result<()> {
        let level = self.ring.n;
        for r in spec.relators(level) {
            if !is_identity(&self.ring, &self.eval(&r)) {
                return Err(Error::BadRep(format!(
                    "relator {r:?} does not hold at level {level}"
                )));
            }
        }
        for (i, m) in self.mats.iter().enumerate() {
            let want = self
                .ring
                .from_witt(theta.value(&self.ring.witt, i, level));
            if det(&self.ring, m) != want {
                return Err(Error::BadRep(format!(
                    "determinant at generator {i} deviates from the character"
                )));
            }
        }
        Ok(())
    }
}

/// Rescale each generator so its determinant is exactly `theta`.  The
/// deviation must be principal-unit of square zero (automatic one step up
/// the tower), making `1 + (u-1)/2` an exact square root of `u`.
pub fn det_normalize(lift: &mut LiftRep, theta: &Theta) -> Result<()> {
    let ring = lift.ring.clone();
    let half = ring
        .inv(&ring.from_int(2))
        .expect("2 is a unit for odd p");
    for (i, m) in lift.mats.iter_mut().enumerate() {
        let d = det(&ring, m);
        let want = ring.from_witt(theta.value(&ring.witt, i, ring.n));
        let u = ring
            .mul(&want, &ring.inv(&d).ok_or_else(|| {
                Error::BadRep(format!("determinant at generator {i} is not a unit"))
            })?);
        let s = ring.mul(&ring.sub(&u, &ring.one()), &half);
        let one_plus_s = ring.add(&ring.one(), &s);
        if ring.mul(&one_plus_s, &one_plus_s) != u {
            return Err(Error::BadRep(format!(
                "determinant deviation at generator {i} is too deep to renormalize"
            )));
        }
        *m = mat_mul(&ring, &scalar(&ring, &one_plus_s), m);
    }
    Ok(())
}

/// Graded defect of one relator: evaluates it, checks the shape
/// `I + (trace-zero in m^k)`, and returns the adjoint coordinates
/// `(e_plus, e_h, e_minus)` per graded basis element of `m^k/m^{k+1}`.
pub fn relator_defect(lift: &LiftRep, rel: &PWord, k: u8) -> Result<Vec<Vec<FqElem>>> {
    let ring = &lift.ring;
    let v = lift.eval(rel);
    let one = ring.one();
    let e00 = ring.sub(&v.e[0], &one);
    let e01 = v.e[1].clone();
    let e10 = v.e[2].clone();
    let e11 = ring.sub(&v.e[3], &one);
    if !ring.add(&e00, &e11).is_zero() {
        return Err(Error::BadRep(
            "relator defect has nonzero trace; determinants were not normalized".into(),
        ));
    }
    let plus = ring.extract_graded(&e01, k)?;
    let h = ring.extract_graded(&e00, k)?;
    let minus = ring.extract_graded(&e10, k)?;
    let width = plus.len();
    Ok((0..width).map(|g| vec![plus[g], h[g], minus[g]]).collect())
}

/// Defects of all relators at the top graded piece of the lift's ring.
pub fn all_defects(lift: &LiftRep, spec: &GroupSpec) -> Result<Vec<Vec<Vec<FqElem>>>> {
    let k = lift.ring.n - 1;
    spec.relators(lift.ring.n)
        .iter()
        .map(|r| relator_defect(lift, r, k))
        .collect()
}

/// Solve for generator corrections killing the given defects: one linear
/// system per graded coordinate, all sharing the free-derivative matrix of
/// the relators over the residual adjoint.  Returns a flat correction row
/// (generator-major adjoint coordinates) per graded basis element, or the
/// obstruction error when some component has no solution.
pub fn solve_defects(
    x: &GModule,
    relators: &[PWord],
    defects: &[Vec<Vec<FqElem>>],
) -> Result<Vec<Vec<FqElem>>> {
    let fq = &x.fq;
    let sys = z1_matrix(x, relators);
    let width = defects.first().map_or(0, |d| d.len());
    let mut out = Vec::with_capacity(width);
    for g in 0..width {
        let mut rhs = Vec::with_capacity(relators.len() * 3);
        for d in defects {
            rhs.extend(vec_scale(fq, fq.neg(fq.one()), &d[g]));
        }
        match solve(fq, &sys, &rhs) {
            Some(h) => out.push(h),
            None => {
                return Err(Error::Obstructed(format!(
                    "graded component {g}: defect lies outside the image of the \
                     free-derivative map"
                )))
            }
        }
    }
    Ok(out)
}

/// Apply a correction `g -> (I + h(g)) g` where `h` is given per graded
/// basis element as flat adjoint rows.
pub fn apply_correction(lift: &mut LiftRep, corr: &[Vec<FqElem>], k: u8) {
    let ring = lift.ring.clone();
    let ngens = lift.mats.len();
    for i in 0..ngens {
        // collect the three adjoint coordinate streams for this generator
        let width = corr.len();
        let mut plus = Vec::with_capacity(width);
        let mut hco = Vec::with_capacity(width);
        let mut minus = Vec::with_capacity(width);
        for row in corr {
            plus.push(row[3 * i]);
            hco.push(row[3 * i + 1]);
            minus.push(row[3 * i + 2]);
        }
        let sp = ring.inject_graded(&plus, k);
        let sh = ring.inject_graded(&hco, k);
        let sm = ring.inject_graded(&minus, k);
        let e = Mat2::new(sh.clone(), sp, sm, ring.neg(&sh));
        let m = mat_add(&ring, &identity(&ring), &e);
        lift.mats[i] = mat_mul(&ring, &m, &lift.mats[i]);
    }
}

/// One unconditioned tower step: lift a verified level-`n` representation
/// to level `n+1` with `vars_up` variables, renormalize determinants, kill
/// all relator defects, and verify.  Local tangent conditions are imposed
/// by the callers that own them; this is the bare obstruction kill.
pub fn lift_step_unconditional(
    spec: &GroupSpec,
    theta: &Theta,
    x: &GModule,
    lift_n: &LiftRep,
    vars_up: u8,
) -> Result<LiftRep> {
    let up = SeriesRing::new(lift_n.ring.witt.clone(), lift_n.ring.n + 1, vars_up);
    let mut cand = lift_n.lift_to(&up);
    det_normalize(&mut cand, theta)?;
    let defects = all_defects(&cand, spec)?;
    let rels = spec.relators(up.n);
    let corr = solve_defects(x, &rels, &defects)?;
    apply_correction(&mut cand, &corr, up.n - 1);
    cand.verify(spec, theta)?;
    Ok(cand)
}

/// Independent oracle: count matrices over `Z/p^2` that reduce to
/// `[[1,1],[0,1]]` mod `p`, have determinant `1`, and satisfy `A^p = I`.
/// No lifting machinery involved — plain modular arithmetic over all
/// `p^4` candidates.
pub fn exhaustive_order_p_search(p: u64) -> u64 {
    let m = p * p;
    let mul = |a: [u64; 4], b: [u64; 4]| {
        [
            (a[0] * b[0] + a[1] * b[2]) % m,
            (a[0] * b[1] + a[1] * b[3]) % m,
            (a[2] * b[0] + a[3] * b[2]) % m,
            (a[2] * b[1] + a[3] * b[3]) % m,
        ]
    };
    let mut count = 0;
    for d0 in 0..p {
        for d1 in 0..p {
            for d2 in 0..p {
                for d3 in 0..p {
                    let a = [
                        (1 + p * d0) % m,
                        (1 + p * d1) % m,
                        (p * d2) % m,
                        (1 + p * d3) % m,
                    ];
                    let detv = (a[0] * a[3] + m * m - a[1] * a[2]) % m;
                    if detv != 1 {
                        continue;
                    }
                    let mut acc = [1, 0, 0, 1];
                    for _ in 0..p {
                        acc = mul(acc, a);
                    }
                    if acc == [1, 0, 0, 1] {
                        count += 1;
                    }
                }
            }
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adjoint::adjoint_rep;
    use crate::fq::Fq;
    use crate::group::{GenOrder, GenSpec, GroupSpec, UnitSpec};
    use crate::witt::WittCtx;
    use std::collections::BTreeMap;

    fn one_gen_spec(p: u64) -> GroupSpec {
        GroupSpec {
            p,
            t: 1,
            cap: 4,
            gens: vec![GenSpec {
                name: "g".into(),
                order: GenOrder::Exact(p),
                chi_tilde: UnitSpec::one(),
            }],
            conj: BTreeMap::new(),
            tame: Vec::new(),
        }
    }

    fn unipotent_rep(p: u16) -> ResidualRep {
        let fq = Fq::new(p, 1).unwrap();
        ResidualRep::new(
            fq.clone(),
            vec![Mat2::new(fq.one(), fq.one(), fq.zero(), fq.one())],
        )
    }

    #[test]
    fn order_five_unipotent_cannot_lift() {
        // the oracle sees no candidate at all...
        assert_eq!(exhaustive_order_p_search(5), 0);
        // ...and the machinery reports a genuine obstruction
        let spec = one_gen_spec(5);
        let rep = unipotent_rep(5);
        let theta = Theta::from_data(&rep, &spec);
        let x = adjoint_rep(&rep).unwrap();
        let witt = WittCtx::new(rep.fq.clone());
        let base = LiftRep::from_residual(SeriesRing::new(witt, 1, 0), &rep);
        base.verify(&spec, &theta).unwrap();
        let err = lift_step_unconditional(&spec, &theta, &x, &base, 0).unwrap_err();
        assert!(matches!(err, Error::Obstructed(_)), "got {err:?}");
    }

    #[test]
    fn order_three_unipotent_lifts() {
        let found = exhaustive_order_p_search(3);
        assert!(found > 0, "oracle must find solutions for p = 3");
        let spec = one_gen_spec(3);
        let rep = unipotent_rep(3);
        let theta = Theta::from_data(&rep, &spec);
        let x = adjoint_rep(&rep).unwrap();
        let witt = WittCtx::new(rep.fq.clone());
        let base = LiftRep::from_residual(SeriesRing::new(witt, 1, 0), &rep);
        let lifted = lift_step_unconditional(&spec, &theta, &x, &base, 0).unwrap();
        lifted.verify(&spec, &theta).unwrap();
        // the lift reduces to the residual representation
        let down = lifted.project_to(1, 0);
        for (a, b) in down.mats.iter().zip(&base.mats) {
            assert_eq!(a.e, b.e);
        }
    }

    #[test]
    fn toy_level_two_lift_matches_designed_matrices() {
        // the designed instance has an exact closed-form lift at level 2:
        // a -> diag(2 + 5, 1), c -> I, m0 -> (1+p)^... = 16*I at level 2? no:
        // m0 -> (1+5)I scaled to determinant theta... checked coordinatewise
        // against the machinery's lift below by verifying both satisfy all
        // relators and agree after a change of basis is *not* required: the
        // test only pins that the machinery finds some verified lift
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
        rep.validate(&spec).unwrap();
        let theta = Theta::from_data(&rep, &spec);
        let x = adjoint_rep(&rep).unwrap();
        let witt = WittCtx::new(fq.clone());
        let base = LiftRep::from_residual(SeriesRing::new(witt.clone(), 1, 0), &rep);
        base.verify(&spec, &theta).unwrap();
        let l2 = lift_step_unconditional(&spec, &theta, &x, &base, 1).unwrap();
        l2.verify(&spec, &theta).unwrap();

        // independent closed form at level 2 with one variable:
        // a = diag(7, 1) (Teichmueller of 2 mod 25), c = I, m0 = 6*I? no —
        // det(m0) must be (1+p)^1 = 6, and m0 = (1+s)I with (1+s)^2 = 6...
        // 6 is a square mod 25 (16^2 = 256 = 6 + 250); m0 = 16*I
        let ring2 = SeriesRing::new(witt.clone(), 2, 1);
        let s = |k: i128| ring2.from_int(k);
        let designed = LiftRep::new(
            ring2.clone(),
            vec![
                Mat2::new(s(7), s(0), s(0), s(1)),
                Mat2::new(s(1), s(0), s(0), s(1)),
                Mat2::new(s(16), s(0), s(0), s(16)),
                Mat2::new(s(1), s(1), s(0), s(1)),
                Mat2::new(s(1), s(0), s(0), s(1)),
            ],
        );
        designed.verify(&spec, &theta).unwrap();

        // both lifts project to the residual representation
        let down = l2.project_to(1, 0);
        for (a, b) in down.mats.iter().zip(&base.mats) {
            assert_eq!(a.e, b.e);
        }
    }

    #[test]
    fn defect_extraction_flags_nonvanishing_elements() {
        // evaluating a relator that fails at the *current* level (not one
        // deeper) must refuse to extract
        let fq = Fq::new(5, 1).unwrap();
        let witt = WittCtx::new(fq.clone());
        let ring = SeriesRing::new(witt, 2, 0);
        let lift = LiftRep::new(
            ring.clone(),
            vec![Mat2::new(
                ring.from_int(2),
                ring.zero(),
                ring.zero(),
                ring.from_int(1),
            )],
        );
        // g^1 evaluates to diag(2,1); defect 1 - diag(2,1) is a unit, not
        // in m^1, and has nonzero trace
        let err = relator_defect(&lift, &vec![(0usize, 1i64)], 1).unwrap_err();
        assert!(matches!(err, Error::BadRep(_) | Error::Domain(_)));
    }

    #[test]
    fn determinant_normalization_is_exact() {
        let fq = Fq::new(5, 1).unwrap();
        let spec = one_gen_spec(5);
        let rep = ResidualRep::new(
            fq.clone(),
            vec![Mat2::new(fq.one(), fq.one(), fq.zero(), fq.one())],
        );
        let theta = Theta::from_data(&rep, &spec);
        let witt = WittCtx::new(fq.clone());
        let ring = SeriesRing::new(witt, 2, 1);
        // perturb the canonical lift by a unit with non-theta determinant
        let mut lift = LiftRep::from_residual(SeriesRing::new(ring.witt.clone(), 1, 0), &rep)
            .lift_to(&ring);
        let t = ring.var(0);
        lift.mats[0].e[0] = ring.add(&lift.mats[0].e[0], &t);
        det_normalize(&mut lift, &theta).unwrap();
        let d = det(&ring, &lift.mats[0]);
        assert_eq!(d, ring.from_witt(theta.value(&ring.witt, 0, 2)));
    }
}
