//! First cohomology of presented groups, three independent ways.
//!
//! The production route works on a presentation: a 1-cocycle is determined
//! by its generator values, the cocycle condition is `f(r) = 0` for every
//! relator `r`, and `f(r)` is a linear function of the generator values with
//! coefficient matrices given by the free-derivative rows of `r`
//! ([`crate::words::fox_row`]).  So `Z^1` is the kernel of one stacked
//! matrix, `B^1` is the row space of `{g -> (g-1)m}`, and `H^1` is a chosen
//! complement.
//!
//! Because everything downstream leans on this one computation, there are
//! two oracles against honest multiplication-table groups that know nothing
//! about presentations or free derivatives:
//!
//! * [`h1_enumerate`] walks *all* generator-value maps, extends each along
//!   the normal-form word of every element, and keeps those satisfying
//!   `f(xy) = f(x) + x f(y)` for every single pair — pure counting;
//! * [`h1_table`] exploits that the same extend-and-check procedure is
//!   linear in the generator values and computes the kernel rank of the
//!   violation map without ever enumerating maps, which scales to groups of
//!   a few thousand elements.
//!
//! The randomized comparison of all three lives in the integration tests;
//! helpers for generating random (but consistent) polycyclic groups and
//! random modules over them are exported here so the acceptance suite can
//! reuse them.

use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem};
use crate::group::ConcreteGroup;
use crate::linalg::{
    complement_in, in_span, kernel_basis, mat_vec, rank, row_space, solve, vec_add, vec_sub,
    vec_is_zero, FqMat,
};
use crate::module::GModule;
use crate::words::{cocycle_eval, fox_row, pw_genpow, pw_inv, pw_mul, PWord};
use rand::Rng;
use std::collections::BTreeMap;

/// Split a flat coordinate row into per-generator module values.
pub fn flat_to_vals(dim: usize, flat: &[FqElem]) -> Vec<Vec<FqElem>> {
    flat.chunks(dim).map(|c| c.to_vec()).collect()
}

/// Concatenate per-generator values into a flat row.
pub fn vals_to_flat(vals: &[Vec<FqElem>]) -> Vec<FqElem> {
    vals.iter().flatten().copied().collect()
}

/// Evaluate a flat cocycle along a word.
pub fn eval_flat(m: &GModule, flat: &[FqElem], w: &PWord) -> Vec<FqElem> {
    let vals = flat_to_vals(m.dim, flat);
    cocycle_eval(&m.fq, w, &m.acts, &vals)
}

/// The stacked constraint matrix whose kernel is `Z^1`: one block row of
/// `dim` scalar rows per relator, `dim` columns per generator.
pub fn z1_matrix(m: &GModule, relators: &[PWord]) -> FqMat {
    let fq = &m.fq;
    let n = m.acts.len();
    let dim = m.dim;
    let mut out = FqMat::zeros(0, dim * n);
    for r in relators {
        let rows = fox_row(fq, r, &m.acts);
        let mut block = FqMat::zeros(dim, dim * n);
        for (j, d) in rows.iter().enumerate() {
            for a in 0..dim {
                for b in 0..dim {
                    block.set(a, j * dim + b, d.get(a, b));
                }
            }
        }
        out = FqMat::stack(&out, &block);
    }
    out
}

/// Rows spanning the coboundaries `{g -> (g-1)m}` in flat coordinates.
pub fn b1_rows(m: &GModule) -> FqMat {
    let fq = &m.fq;
    let dim = m.dim;
    let mut rows = FqMat::zeros(0, dim * m.acts.len());
    for k in 0..dim {
        let mut basis = vec![fq.zero(); dim];
        basis[k] = fq.one();
        let mut flat = Vec::with_capacity(dim * m.acts.len());
        for a in &m.acts {
            let img = vec_sub(fq, &mat_vec(fq, a, &basis), &basis);
            flat.extend(img);
        }
        rows.push_row(&flat);
    }
    row_space(fq, &rows)
}

/// The cocycle space of a presented group with coefficients in `m`.
#[derive(Clone, Debug)]
pub struct CocycleSpace {
    pub dim: usize,
    pub ngens: usize,
    /// Basis of `Z^1`, flat rows.
    pub z1: FqMat,
    /// Basis of `B^1`, flat rows.
    pub b1: FqMat,
    /// Chosen representatives spanning `H^1` (a complement of `b1` in `z1`).
    pub h1: FqMat,
}

impl CocycleSpace {
    pub fn h1_dim(&self) -> usize {
        self.h1.rows
    }

    /// Class coordinates of a cocycle in the chosen `H^1` basis, reducing
    /// modulo coboundaries; `None` if the input is not in `Z^1`'s span.
    pub fn class_coords(&self, fq: &Fq, flat: &[FqElem]) -> Option<Vec<FqElem>> {
        let full = FqMat::stack(&self.h1, &self.b1);
        let co = crate::linalg::coords_in_span(fq, &full, flat)?;
        Some(co[..self.h1.rows].to_vec())
    }

    pub fn is_coboundary(&self, fq: &Fq, flat: &[FqElem]) -> bool {
        in_span(fq, &self.b1, flat)
    }
}

pub fn cocycle_space(m: &GModule, relators: &[PWord]) -> CocycleSpace {
    let fq = &m.fq;
    let z = z1_matrix(m, relators);
    let z1 = kernel_basis(fq, &z);
    let b1 = b1_rows(m);
    let h1 = complement_in(fq, &b1, &z1);
    CocycleSpace { dim: m.dim, ngens: m.acts.len(), z1, b1, h1 }
}

pub fn h1_dim(m: &GModule, relators: &[PWord]) -> usize {
    cocycle_space(m, relators).h1_dim()
}

/// Module element actions for every element of a table group, computed along
/// the normal-form words.
fn element_actions(g: &ConcreteGroup, m: &GModule) -> Vec<FqMat> {
    g.words.iter().map(|w| m.act_word(w)).collect()
}

/// Values of a generator-value map on every element, extended along the
/// normal-form words.
fn extend_to_elements(g: &ConcreteGroup, m: &GModule, vals: &[Vec<FqElem>]) -> Vec<Vec<FqElem>> {
    g.words
        .iter()
        .map(|w| cocycle_eval(&m.fq, w, &m.acts, vals))
        .collect()
}

/// Exhaustive cocycle count on a multiplication-table group: returns
/// `(dim Z^1, dim B^1)` over `F_q`.  Cost `q^{dim · ngens} · |G|^2`, so this
/// is for small inputs; errors when the candidate count exceeds the limit.
pub fn h1_enumerate(g: &ConcreteGroup, m: &GModule, limit: u64) -> Result<(usize, usize)> {
    let fq = &m.fq;
    let q = fq.q();
    let dim = m.dim;
    let slots = dim * g.ngens;
    let total = q.checked_pow(slots as u32).filter(|&t| t <= limit).ok_or_else(|| {
        Error::Domain(format!("enumeration would visit q^{slots} maps, over the limit"))
    })?;
    let acts = element_actions(g, m);
    let mut z1_count = 0u64;
    for idx in 0..total {
        // unrank the candidate generator values
        let mut rem = idx;
        let mut flat = Vec::with_capacity(slots);
        for _ in 0..slots {
            flat.push(fq.element_from_index(rem % q));
            rem /= q;
        }
        let vals = flat_to_vals(dim, &flat);
        let f = extend_to_elements(g, m, &vals);
        // the tuple must agree with its own extension on the generators —
        // this is what kills candidates on generators that collapse in the
        // finite quotient (their normal form no longer mentions the letter)
        let mut ok = g
            .gen_elems
            .iter()
            .zip(&vals)
            .all(|(&ge, v)| f[ge as usize] == *v);
        if ok {
            'outer: for x in 0..g.order {
                for y in 0..g.order {
                    let xy = g.mul(x as u32, y as u32) as usize;
                    let rhs = vec_add(fq, &f[x], &mat_vec(fq, &acts[x], &f[y]));
                    if !vec_is_zero(&vec_sub(fq, &f[xy], &rhs)) {
                        ok = false;
                        break 'outer;
                    }
                }
            }
        }
        if ok {
            z1_count += 1;
        }
    }
    let z1_dim = perfect_log(z1_count, q)?;
    // coboundaries: tuples of the form g -> (g-1) m, ranked on module basis
    let mut cob_rows = FqMat::zeros(0, slots);
    for k in 0..dim {
        let mut basis = vec![fq.zero(); dim];
        basis[k] = fq.one();
        let mut flat = Vec::with_capacity(slots);
        for &ge in &g.gen_elems {
            let img = vec_sub(fq, &mat_vec(fq, &acts[ge as usize], &basis), &basis);
            flat.extend(img);
        }
        cob_rows.push_row(&flat);
    }
    Ok((z1_dim, rank(fq, &cob_rows)))
}

fn perfect_log(count: u64, q: u64) -> Result<usize> {
    let mut d = 0;
    let mut acc = 1u64;
    while acc < count {
        acc *= q;
        d += 1;
    }
    if acc != count {
        return Err(Error::Domain(format!(
            "solution count {count} is not a power of {q} — not a linear space?"
        )));
    }
    Ok(d)
}

/// Linearized honest `H^1` on a table group: the extend-and-check-all-pairs
/// condition is linear in the generator values, so `Z^1` is the kernel of
/// the violation map, whose rank is accumulated pairwise without enumerating
/// candidate maps.  Returns `(dim Z^1, dim B^1)`.
pub fn h1_table(g: &ConcreteGroup, m: &GModule) -> (usize, usize) {
    let fq = &m.fq;
    let dim = m.dim;
    let slots = dim * g.ngens;
    let acts = element_actions(g, m);
    // extensions of the basis tuples to all elements
    let mut basis_ext: Vec<Vec<Vec<FqElem>>> = Vec::with_capacity(slots);
    for s in 0..slots {
        let mut flat = vec![fq.zero(); slots];
        flat[s] = fq.one();
        basis_ext.push(extend_to_elements(g, m, &flat_to_vals(dim, &flat)));
    }
    // online elimination over constraint rows in the `slots` unknowns;
    // start with the tuple-consistency rows pinning each generator slot to
    // the value of the extension at the generator's element
    let mut constraints = FqMat::zeros(0, slots);
    for (i, &ge) in g.gen_elems.iter().enumerate() {
        for d in 0..dim {
            let mut row: Vec<FqElem> = basis_ext
                .iter()
                .map(|ext| ext[ge as usize][d])
                .collect();
            row[i * dim + d] = fq.sub(row[i * dim + d], fq.one());
            if !vec_is_zero(&row) {
                constraints.push_row(&row);
            }
        }
    }
    'pairs: for x in 0..g.order {
        for y in 0..g.order {
            let xy = g.mul(x as u32, y as u32) as usize;
            for d in 0..dim {
                let mut row = Vec::with_capacity(slots);
                for ext in basis_ext.iter() {
                    let rhs = fq.add(ext[x][d], mat_vec(fq, &acts[x], &ext[y])[d]);
                    row.push(fq.sub(ext[xy][d], rhs));
                }
                if !vec_is_zero(&row) {
                    constraints.push_row(&row);
                }
            }
            if constraints.rows >= 4 * slots {
                constraints = row_space(fq, &constraints);
                if constraints.rows == slots {
                    break 'pairs;
                }
            }
        }
    }
    constraints = row_space(fq, &constraints);
    let z1_dim = slots - constraints.rows;
    // coboundary rank, computed on generator images
    let mut cob_rows = FqMat::zeros(0, slots);
    for k in 0..dim {
        let mut basis = vec![fq.zero(); dim];
        basis[k] = fq.one();
        let mut flat = Vec::with_capacity(slots);
        for &ge in &g.gen_elems {
            let img = vec_sub(fq, &mat_vec(fq, &acts[ge as usize], &basis), &basis);
            flat.extend(img);
        }
        cob_rows.push_row(&flat);
    }
    (z1_dim, rank(fq, &cob_rows))
}

/// Relators presenting a collected polycyclic group: the powers `g_i^{o_i}`
/// and, for *every* pair `i < j`, the rule `g_i g_j g_i^{-1} = w_{ij}` —
/// undeclared pairs commute in the collection, so they get the default
/// `w_{ij} = g_j`.  Omitting those defaults would present a strictly larger
/// group than the multiplication table realizes.
pub fn polycyclic_relators(orders: &[u64], conj: &BTreeMap<(usize, usize), PWord>) -> Vec<PWord> {
    let mut rels: Vec<PWord> = orders
        .iter()
        .enumerate()
        .map(|(i, &o)| pw_genpow(i, o as i64))
        .collect();
    for i in 0..orders.len() {
        for j in (i + 1)..orders.len() {
            let w = conj.get(&(i, j)).cloned().unwrap_or_else(|| pw_genpow(j, 1));
            let lhs = pw_mul(
                &pw_mul(&pw_genpow(i, 1), &pw_genpow(j, 1)),
                &pw_genpow(i, -1),
            );
            rels.push(pw_mul(&lhs, &pw_inv(&w)));
        }
    }
    rels
}

/// A randomized consistent polycyclic datum with group order at most
/// `max_order`.  Exponent-form conjugation rules are drawn and checked; the
/// construction retries until the table group builds cleanly.
pub fn random_polycyclic(
    rng: &mut impl Rng,
    max_order: u64,
) -> (Vec<u64>, BTreeMap<(usize, usize), PWord>, ConcreteGroup) {
    loop {
        let ngens = rng.gen_range(2..=3);
        let mut orders = Vec::with_capacity(ngens);
        let mut prod = 1u64;
        for _ in 0..ngens {
            let cands: Vec<u64> = [2u64, 3, 4, 5, 7, 9]
                .into_iter()
                .filter(|&o| prod * o <= max_order)
                .collect();
            let o = if cands.is_empty() {
                1
            } else {
                cands[rng.gen_range(0..cands.len())]
            };
            prod *= o;
            orders.push(o);
        }
        let mut conj: BTreeMap<(usize, usize), PWord> = BTreeMap::new();
        for i in 0..ngens {
            for j in (i + 1)..ngens {
                if orders[j] <= 2 || rng.gen_bool(0.5) {
                    continue;
                }
                // candidate exponents: units u with u^{o_i} = 1 mod o_j
                let units: Vec<u64> = (2..orders[j])
                    .filter(|&u| {
                        crate::group::modpow(u, orders[i], orders[j]) == 1
                            && crate::group::modinv(u, orders[j]).is_some()
                    })
                    .collect();
                if units.is_empty() {
                    continue;
                }
                let u = units[rng.gen_range(0..units.len())];
                conj.insert((i, j), pw_genpow(j, u as i64));
            }
        }
        if let Ok(g) = ConcreteGroup::from_polycyclic_words(&orders, &conj) {
            return (orders, conj, g);
        }
    }
}

/// A random module of the requested dimension over a presented group:
/// generator images are drawn from `GL_dim(F_q)` until all relators map to
/// the identity.  Gives up (returns `None`) after the retry budget; callers
/// fall back to sums of characters or the trivial module.
pub fn random_module(
    rng: &mut impl Rng,
    fq: &Fq,
    dim: usize,
    ngens: usize,
    relators: &[PWord],
    tries: u64,
) -> Option<GModule> {
    let units = invertible_matrices(fq, dim);
    for _ in 0..tries {
        let acts: Vec<FqMat> = (0..ngens)
            .map(|_| units[rng.gen_range(0..units.len())].clone())
            .collect();
        let m = GModule { fq: fq.clone(), dim, acts };
        let ok = relators.iter().all(|r| {
            let a = m.act_word(r);
            let mut id_ok = true;
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j { fq.one() } else { fq.zero() };
                    id_ok &= a.get(i, j) == want;
                }
            }
            id_ok
        });
        if ok {
            return Some(m);
        }
    }
    None
}

/// All invertible `dim x dim` matrices over `F_q` (small `q`, `dim <= 2`).
pub fn invertible_matrices(fq: &Fq, dim: usize) -> Vec<FqMat> {
    let q = fq.q() as usize;
    let cells = dim * dim;
    let total = q.pow(cells as u32);
    let mut out = Vec::new();
    for idx in 0..total {
        let mut rem = idx;
        let mut m = FqMat::zeros(dim, dim);
        for c in 0..cells {
            m.set(c / dim, c % dim, fq.element_from_index((rem % q) as u64));
            rem /= q;
        }
        if crate::words::fqmat_inv(fq, &m).is_some() {
            out.push(m);
        }
    }
    out
}

/// Solve for a cocycle with prescribed class: find `z` in the span of
/// `space.z1` with `z ≡ target mod B^1`; `target` must be a cocycle.
pub fn normalize_mod_coboundaries(
    fq: &Fq,
    space: &CocycleSpace,
    target: &[FqElem],
) -> Option<Vec<FqElem>> {
    let co = space.class_coords(fq, target)?;
    let mut out = vec![fq.zero(); target.len()];
    for (i, &c) in co.iter().enumerate() {
        out = vec_add(fq, &out, &crate::linalg::vec_scale(fq, c, space.h1.row(i)));
    }
    Some(out)
}

/// Check that a flat row satisfies all relator conditions (is in `Z^1`).
pub fn is_cocycle(m: &GModule, relators: &[PWord], flat: &[FqElem]) -> bool {
    relators
        .iter()
        .all(|r| vec_is_zero(&eval_flat(m, flat, r)))
}

/// A particular solution of an inhomogeneous cocycle problem: find flat `h`
/// with `sum_j D_j^{(r)} h_j = rhs_r` for every relator, where the `rhs` are
/// given per relator.  Used by the obstruction step.
pub fn solve_relator_system(
    m: &GModule,
    relators: &[PWord],
    rhs: &[Vec<FqElem>],
) -> Option<Vec<FqElem>> {
    let fq = &m.fq;
    let sys = z1_matrix(m, relators);
    let b: Vec<FqElem> = rhs.iter().flatten().copied().collect();
    solve(fq, &sys, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{GenOrder, GenSpec, GroupSpec, UnitSpec};
    use crate::mat2::Mat2;
    use crate::rep::ResidualRep;
    use rand::SeedableRng;

    fn f5() -> Fq {
        Fq::new(5, 1).unwrap()
    }

    fn f3() -> Fq {
        Fq::new(3, 1).unwrap()
    }

    #[test]
    fn cyclic_group_cohomology_catalogue() {
        // H^1(C_n, F_p trivial) is F_p when p | n, else 0
        for (n, p, expect) in [(3u64, 3u16, 1usize), (9, 3, 1), (4, 3, 0), (5, 5, 1), (4, 5, 0)] {
            let fq = Fq::new(p, 1).unwrap();
            let m = GModule::trivial(fq, 1, 1);
            let rels = vec![pw_genpow(0, n as i64)];
            assert_eq!(h1_dim(&m, &rels), expect, "C_{n} over F_{p}");
        }
        // elementary abelian (C_3)^2: Hom to F_3 has dimension 2
        let fq = f3();
        let m = GModule::trivial(fq, 1, 2);
        let rels = polycyclic_relators(&[3, 3], &BTreeMap::new());
        assert_eq!(h1_dim(&m, &rels), 2);
    }

    #[test]
    fn heisenberg_h1_trivial_coefficients() {
        // abelianization is (C_3)^2, so Hom(G, F_3) has dimension 2
        let mut conj = BTreeMap::new();
        conj.insert((0usize, 1usize), pw_mul(&pw_genpow(1, 1), &pw_genpow(2, 1)));
        let orders = [3u64, 3, 3];
        let g = ConcreteGroup::from_polycyclic_words(&orders, &conj).unwrap();
        let fq = f3();
        let m = GModule::trivial(fq, 1, 3);
        let rels = polycyclic_relators(&orders, &conj);
        let fox = h1_dim(&m, &rels);
        let (z_en, b_en) = h1_enumerate(&g, &m, 1 << 20).unwrap();
        let (z_tb, b_tb) = h1_table(&g, &m);
        assert_eq!(fox, 2);
        assert_eq!(z_en - b_en, 2);
        assert_eq!((z_en, b_en), (z_tb, b_tb));
    }

    #[test]
    fn nontrivial_character_on_dihedral() {
        // D_9 = <s, r | s^2, r^9, s r s^{-1} r>: with the sign character of
        // the reflection, H^1(D_9, F_3(sign)) has dimension 1
        let mut conj = BTreeMap::new();
        conj.insert((0usize, 1usize), pw_genpow(1, 8));
        let orders = [2u64, 9];
        let g = ConcreteGroup::from_polycyclic_words(&orders, &conj).unwrap();
        let fq = f3();
        let sign = FqMat::from_rows(vec![vec![fq.from_int(-1)]], 1);
        let triv = FqMat::identity(&fq, 1);
        let m = GModule::new(fq.clone(), vec![sign, triv]).unwrap();
        let rels = polycyclic_relators(&orders, &conj);
        let fox = h1_dim(&m, &rels);
        let (z_en, b_en) = h1_enumerate(&g, &m, 1 << 20).unwrap();
        let (z_tb, b_tb) = h1_table(&g, &m);
        assert_eq!((z_en, b_en), (z_tb, b_tb));
        assert_eq!(fox, z_en - b_en);
        assert_eq!(fox, 1);
    }

    fn toy_spec_and_adjoint() -> (GroupSpec, GModule) {
        let fq = f5();
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
        let x = crate::adjoint::adjoint_rep(&rep).unwrap();
        (spec, x)
    }

    #[test]
    fn toy_adjoint_h1_is_one_dimensional_at_level_one() {
        let (spec, x) = toy_spec_and_adjoint();
        let space = cocycle_space(&x, &spec.relators(1));
        assert_eq!(space.h1_dim(), 1);
        // the class is carried by the last generator, in the e+ direction:
        // normalize the representative modulo coboundaries of the value at a
        let rep = space.h1.row(0);
        let vals = flat_to_vals(3, rep);
        // f(b1) must be a nonzero multiple of e+ for *any* representative
        // whose other values are cleaned up; check the class pairs
        // nontrivially against the b1 slot and that f(b1) ∈ <e+> always
        let fq = f5();
        assert!(!fq.is_zero(vals[4][0]), "class is supported on b1 in the e+ slot");
        assert!(fq.is_zero(vals[4][1]));
        assert!(fq.is_zero(vals[4][2]));
    }

    #[test]
    fn toy_adjoint_h1_grows_at_level_two() {
        // at level 2 the depth relator on m0 relaxes from m0^1 to m0^5; the
        // action there is trivial, so the relator block N_5(I) = 5I vanishes
        // mod 5 and all three value coordinates at m0 come free, while every
        // other relator block is unchanged
        let (spec, x) = toy_spec_and_adjoint();
        let d1 = h1_dim(&x, &spec.relators(1));
        let d2 = h1_dim(&x, &spec.relators(2));
        assert_eq!(d1, 1);
        assert_eq!(d2, d1 + 3);
    }

    #[test]
    fn toy_level_one_h1_matches_table_oracle() {
        // the level-1 collection quotient imposes commutation between every
        // undeclared generator pair; on this instance those extra relators
        // are satisfied by all of Z^1, so the quotient carries the full
        // cocycle space (checked against the honest all-pairs oracle)
        let (spec, x) = toy_spec_and_adjoint();
        let g = spec.concrete(1).unwrap();
        assert_eq!(g.order, 400);
        let (z, b) = h1_table(&g, &x);
        let space = cocycle_space(&x, &spec.relators(1));
        assert_eq!((z, b), (4, 3));
        assert_eq!(space.z1.rows, 4);
        assert_eq!(space.b1.rows, 3);
        assert_eq!(space.h1_dim(), z - b);
    }

    #[test]
    fn randomized_fox_vs_oracles_small() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..8 {
            let (orders, conj, g) = random_polycyclic(&mut rng, 27);
            let rels = polycyclic_relators(&orders, &conj);
            let fq = f3();
            let m = random_module(&mut rng, &fq, 1, orders.len(), &rels, 200)
                .unwrap_or_else(|| GModule::trivial(fq.clone(), 1, orders.len()));
            let fox = h1_dim(&m, &rels);
            let (z_en, b_en) = h1_enumerate(&g, &m, 1 << 22).unwrap();
            let (z_tb, b_tb) = h1_table(&g, &m);
            assert_eq!((z_en, b_en), (z_tb, b_tb), "trial {trial}");
            assert_eq!(fox, z_en - b_en, "trial {trial}: fox vs enumeration");
        }
    }

    #[test]
    fn cocycle_class_coordinates_detect_coboundaries() {
        let (spec, x) = toy_spec_and_adjoint();
        let fq = f5();
        let space = cocycle_space(&x, &spec.relators(1));
        // a known coboundary: m = e+
        let mut flat = Vec::new();
        let basis = vec![fq.one(), fq.zero(), fq.zero()];
        for a in &x.acts {
            flat.extend(vec_sub(&fq, &mat_vec(&fq, a, &basis), &basis));
        }
        assert!(space.is_coboundary(&fq, &flat));
        let co = space.class_coords(&fq, &flat).unwrap();
        assert!(vec_is_zero(&co));
        // the h1 representative is not a coboundary
        assert!(!space.is_coboundary(&fq, space.h1.row(0)));
        assert!(is_cocycle(&x, &spec.relators(1), space.h1.row(0)));
    }
}
