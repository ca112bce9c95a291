//! Group data for the global objects: a generators-and-relators description
//! whose relators evolve with the coefficient level, together with two
//! concrete realizations used by different parts of the machinery.
//!
//! The description ([`GroupSpec`]) lists generators that either have a fixed
//! finite order or are "depth" generators whose order at coefficient level
//! `n` is `p^{n-1+offset}`, plus power-conjugation rules
//! `g_i g_j g_i^{-1} = g_j^{u_{ij}}` with unit exponents.  From it we
//! materialize, per level:
//!
//! * the relator list for cohomology and obstruction calculus (exact powers,
//!   depth powers, and one conjugation relator per rule) — nothing else, so
//!   the presented group stays as free as the declared local shape allows;
//! * a [`PolyQuotient`]: the polycyclic quotient in which *all* generators
//!   satisfy the conjugation rules and generators without a rule commute.
//!   Its normal forms biject with exponent tuples, which is what makes
//!   uniform sampling of Frobenius words trivial.  Constraints on sampled
//!   elements are always evaluated on the designated normal-form *word*, so
//!   nothing downstream depends on the quotient being more than a uniform
//!   source of words.
//!
//! [`ConcreteGroup`] is an honest multiplication-table group built by
//! iterated cyclic extensions.  It accepts arbitrary tail-word conjugation
//! rules (so nonabelian `p`-groups like the Heisenberg group are available)
//! and is the ground truth that the cohomology oracle enumerates over.

use crate::error::{Error, Result};
use crate::words::{pw_genpow, pw_inv, pw_mul, pw_one, PWord};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// `b^e mod m` with 128-bit intermediates; `m = 1` gives `0`.
pub fn modpow(mut b: u64, mut e: u64, m: u64) -> u64 {
    if m <= 1 {
        return 0;
    }
    let mut acc: u64 = 1;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            acc = ((acc as u128 * b as u128) % m as u128) as u64;
        }
        b = ((b as u128 * b as u128) % m as u128) as u64;
        e >>= 1;
    }
    acc
}

/// Inverse of `a` modulo `m` (requires `gcd(a, m) = 1`; `m = 1` gives `0`).
pub fn modinv(a: u64, m: u64) -> Option<u64> {
    if m <= 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (m as i128, (a % m) as i128);
    let (mut s0, mut s1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
    }
    if r0 != 1 {
        return None;
    }
    Some(((s0 % m as i128 + m as i128) % m as i128) as u64)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// A unit of `Z_p` presented multiplicatively: the Teichmüller lift of
/// `teich` (a residue in `1..p`) times `(1+p)^{one_plus_p}`.  Every unit we
/// care about — cyclotomic character values, tame exponents, determinant
/// targets — has this shape, and storing the two coordinates keeps values at
/// different coefficient levels compatible by construction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSpec {
    pub teich: u64,
    pub one_plus_p: u64,
}

impl UnitSpec {
    pub fn one() -> UnitSpec {
        UnitSpec { teich: 1, one_plus_p: 0 }
    }

    pub fn is_one(&self) -> bool {
        self.teich == 1 && self.one_plus_p == 0
    }

    /// The value modulo `p^level`.  The Teichmüller lift of `t` mod `p^k`
    /// is `t^{p^{k-1}}`.
    pub fn value(&self, p: u64, level: u8) -> u64 {
        let m = p.pow(level as u32);
        let teich = modpow(self.teich, p.pow(level as u32 - 1), m);
        let rest = modpow(1 + p, self.one_plus_p, m);
        ((teich as u128 * rest as u128) % m as u128) as u64
    }

    /// Normalize the coordinates: `teich` into `1..p`, the `(1+p)`-exponent
    /// modulo its order `p^{cap-1}`.
    fn normalized(mut self, p: u64, cap: u8) -> UnitSpec {
        self.teich %= p;
        debug_assert!(self.teich != 0, "unit must be prime to p");
        self.one_plus_p %= p.pow(cap as u32 - 1);
        self
    }

    pub fn mul(&self, other: &UnitSpec, p: u64, cap: u8) -> UnitSpec {
        UnitSpec {
            teich: self.teich * other.teich,
            one_plus_p: self.one_plus_p + other.one_plus_p,
        }
        .normalized(p, cap)
    }

    pub fn pow(&self, e: i64, p: u64, cap: u8) -> UnitSpec {
        let tord = p - 1;
        let eord = p.pow(cap as u32 - 1);
        let te = e.rem_euclid(tord as i64) as u64;
        let ee = e.rem_euclid(eord as i64) as u64;
        UnitSpec {
            teich: modpow(self.teich, te, p),
            one_plus_p: ((self.one_plus_p as u128 * ee as u128) % eord as u128) as u64,
        }
        .normalized(p, cap)
    }

    pub fn inv(&self, p: u64, cap: u8) -> UnitSpec {
        self.pow(-1, p, cap)
    }
}

/// Order behaviour of a generator across the coefficient tower.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GenOrder {
    /// Fixed finite order, the same at every level.
    Exact(u64),
    /// Order `p^{n-1+offset}` at level `n`: the generator's image gains one
    /// `p`-power of order per level.
    Depth { offset: u8 },
}

#[derive(Clone, Debug)]
pub struct GenSpec {
    pub name: String,
    pub order: GenOrder,
    /// Cyclotomic character value at this generator.
    pub chi_tilde: UnitSpec,
}

/// A relator schema, materialized per level.
#[derive(Clone, Debug)]
pub enum RelTemplate {
    /// `g^o` for an exact-order generator.
    Power { gen: usize, order: u64 },
    /// `g^{p^{n-1+offset}}` at level `n`.
    DepthPow { gen: usize, offset: u8 },
    /// `w t w^{-1} t^{-q}` with the exponent `q` frozen at full precision.
    Conj { actor: PWord, target: usize, q: UnitSpec },
}

#[derive(Clone, Debug)]
pub struct GroupSpec {
    pub p: u64,
    pub t: usize,
    /// Precision cap: all unit exponents live modulo `p^cap`.
    pub cap: u8,
    pub gens: Vec<GenSpec>,
    /// `(i, j) -> u` with `i < j`: `g_i g_j g_i^{-1} = g_j^{u}`.  Missing
    /// pairs commute.  Targets must be depth generators.
    pub conj: BTreeMap<(usize, usize), UnitSpec>,
    /// Word-actor tame rules `(w, j)`: `w g_j w^{-1} = g_j^{q}` with
    /// `q = chi_tilde(w)`, used for generators adjoined when a new prime
    /// enters the ramification set.  Unlike `conj` rules, a tame rule is the
    /// *only* presentation relator tying its target to the rest of the group:
    /// the adjoined generator is otherwise free, so cohomology can grow.
    pub tame: Vec<(PWord, usize)>,
}

impl GroupSpec {
    pub fn validate(&self) -> Result<()> {
        if self.p < 3 || self.cap < 2 {
            return Err(Error::BadGroup("need odd p and cap >= 2".into()));
        }
        let mut names: Vec<&str> = self.gens.iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        if names.len() != self.gens.len() {
            return Err(Error::BadGroup("duplicate generator names".into()));
        }
        for g in &self.gens {
            if g.chi_tilde.teich == 0 || g.chi_tilde.teich >= self.p {
                return Err(Error::BadGroup(format!(
                    "chi_tilde teich part of {} out of range",
                    g.name
                )));
            }
        }
        for (&(i, j), _) in &self.conj {
            if i >= j || j >= self.gens.len() {
                return Err(Error::BadGroup("conjugation rule must have actor < target".into()));
            }
            if !matches!(self.gens[j].order, GenOrder::Depth { .. }) {
                return Err(Error::BadGroup(format!(
                    "conjugation target {} must be a depth generator",
                    self.gens[j].name
                )));
            }
        }
        for (w, j) in &self.tame {
            if *j >= self.gens.len() || w.iter().any(|&(i, _)| i >= *j) {
                return Err(Error::BadGroup("tame rule actor must precede its target".into()));
            }
            if !matches!(self.gens[*j].order, GenOrder::Depth { .. }) {
                return Err(Error::BadGroup(format!(
                    "tame rule target {} must be a depth generator",
                    self.gens[*j].name
                )));
            }
        }
        Ok(())
    }

    pub fn gen_index(&self, name: &str) -> Option<usize> {
        self.gens.iter().position(|g| g.name == name)
    }

    pub fn order_at(&self, i: usize, level: u8) -> u64 {
        match self.gens[i].order {
            GenOrder::Exact(o) => o,
            GenOrder::Depth { offset } => self.p.pow(level as u32 - 1 + offset as u32),
        }
    }

    /// Cyclotomic character evaluated on a word.
    pub fn chi_word(&self, w: &PWord) -> UnitSpec {
        let mut acc = UnitSpec::one();
        for &(i, e) in w {
            acc = acc.mul(&self.gens[i].chi_tilde.pow(e, self.p, self.cap), self.p, self.cap);
        }
        acc
    }

    /// The relator schemas: exact powers, depth powers, one conjugation
    /// relator per declared rule.
    pub fn rel_templates(&self) -> Vec<RelTemplate> {
        let mut rels = Vec::new();
        for (i, g) in self.gens.iter().enumerate() {
            match g.order {
                GenOrder::Exact(o) => rels.push(RelTemplate::Power { gen: i, order: o }),
                GenOrder::Depth { offset } => rels.push(RelTemplate::DepthPow { gen: i, offset }),
            }
        }
        for (&(i, j), &u) in &self.conj {
            rels.push(RelTemplate::Conj { actor: pw_genpow(i, 1), target: j, q: u });
        }
        for (w, j) in &self.tame {
            rels.push(RelTemplate::Conj { actor: w.clone(), target: *j, q: self.chi_word(w) });
        }
        rels
    }

    pub fn materialize_relator(&self, rel: &RelTemplate, level: u8) -> PWord {
        match rel {
            RelTemplate::Power { gen, order } => pw_genpow(*gen, *order as i64),
            RelTemplate::DepthPow { gen, offset } => {
                pw_genpow(*gen, self.p.pow(level as u32 - 1 + *offset as u32) as i64)
            }
            RelTemplate::Conj { actor, target, q } => {
                let q_int = q.value(self.p, self.cap) as i64;
                let mut w = pw_mul(actor, &pw_genpow(*target, 1));
                w = pw_mul(&w, &pw_inv(actor));
                pw_mul(&w, &pw_genpow(*target, -q_int))
            }
        }
    }

    pub fn relators(&self, level: u8) -> Vec<PWord> {
        self.rel_templates()
            .iter()
            .map(|r| self.materialize_relator(r, level))
            .collect()
    }

    /// Adjoin a tame generator for a newly conditioned prime with Frobenius
    /// word `sigma`.  The presentation gains exactly two relators: the depth
    /// power of the new generator and `sigma t sigma^{-1} t^{-q}` with
    /// `q = chi_tilde(sigma)`.  No other relation ties `t` to the group, so
    /// cocycle values at `t` range over the full `ker(sigma-action - q)` and
    /// cohomology grows by that dimension.  (The *sampling* quotient
    /// normalizes `t` past every generator cyclotomically — a quotient is
    /// free to impose more — but the cohomology of the presentation is what
    /// the lifting machinery consumes.)
    pub fn add_tame_gen(&mut self, name: &str, sigma: &PWord) -> usize {
        let j = self.gens.len();
        self.tame.push((sigma.clone(), j));
        self.gens.push(GenSpec {
            name: name.into(),
            order: GenOrder::Depth { offset: 1 },
            chi_tilde: UnitSpec::one(),
        });
        j
    }

    /// The polycyclic quotient at a level, for sampling.  Tame-adjoined
    /// generators are normalized past every earlier generator through the
    /// cyclotomic character (the semidirect collapse of the free tame model:
    /// strictly more relations, hence an honest quotient).
    pub fn quotient(&self, level: u8) -> Result<PolyQuotient> {
        let k = self.gens.len();
        let orders: Vec<u64> = (0..k).map(|i| self.order_at(i, level)).collect();
        // orders of depth targets are p-powers, so a unit value at the
        // matching precision reduces faithfully
        let reduce = |u: &UnitSpec, m: u64| -> u64 {
            let mut lv = 0u8;
            while self.p.pow(lv as u32) < m {
                lv += 1;
            }
            if m == 1 { 0 } else { u.value(self.p, lv.max(1)) % m }
        };
        let mut conj = vec![vec![1u64; k]; k];
        for (&(i, j), u) in &self.conj {
            conj[i][j] = reduce(u, orders[j]);
        }
        for (_, j) in &self.tame {
            for i in 0..*j {
                conj[i][*j] = reduce(&self.gens[i].chi_tilde, orders[*j]);
            }
        }
        PolyQuotient::new(orders, conj)
    }

    /// The same data as an honest multiplication-table group (small levels
    /// only), for cross-checking the quotient arithmetic and for oracle use.
    pub fn concrete(&self, level: u8) -> Result<ConcreteGroup> {
        let q = self.quotient(level)?;
        let conj_words: BTreeMap<(usize, usize), PWord> = self
            .conj
            .iter()
            .map(|(&(i, j), _)| ((i, j), pw_genpow(j, q.conj[i][j] as i64)))
            .collect();
        ConcreteGroup::from_polycyclic_words(&q.orders, &conj_words)
    }
}

/// A finite polycyclic group with power-conjugation rules, in normal form
/// `g_0^{e_0} ... g_{k-1}^{e_{k-1}}`.  Multiplication is by collection; no
/// tables are built, so orders can be large.
#[derive(Clone, Debug)]
pub struct PolyQuotient {
    pub orders: Vec<u64>,
    /// `conj[i][j]` for `i < j`: `g_i g_j g_i^{-1} = g_j^{conj[i][j]}`.
    pub conj: Vec<Vec<u64>>,
    conj_inv: Vec<Vec<u64>>,
}

pub type PolyElem = Vec<u64>;

impl PolyQuotient {
    pub fn new(orders: Vec<u64>, conj: Vec<Vec<u64>>) -> Result<PolyQuotient> {
        let k = orders.len();
        if orders.iter().any(|&o| o == 0) {
            return Err(Error::BadGroup("zero generator order".into()));
        }
        let mut conj_inv = vec![vec![1u64; k]; k];
        for i in 0..k {
            for j in (i + 1)..k {
                let m = orders[j];
                let u = if m == 1 { 0 } else { conj[i][j] % m };
                if m > 1 {
                    if gcd(u, m) != 1 {
                        return Err(Error::BadGroup(format!(
                            "conjugation exponent {u} not a unit mod {m}"
                        )));
                    }
                    // conjugation by g_i^{ord_i} must be trivial
                    if modpow(u, orders[i], m) != 1 % m {
                        return Err(Error::BadGroup(format!(
                            "exponent {u} has order not dividing {} mod {m}",
                            orders[i]
                        )));
                    }
                }
                conj_inv[i][j] = modinv(u, m).unwrap_or(0);
            }
        }
        // compatibility of nested rules: conjugating the (j,k) rule by g_i
        // demands u_{jk}^{u_{ij}} = u_{jk}
        for i in 0..k {
            for j in (i + 1)..k {
                if orders[j] == 1 {
                    continue;
                }
                for l in (j + 1)..k {
                    let m = orders[l];
                    if m == 1 {
                        continue;
                    }
                    let u_ij = conj[i][j] % orders[j];
                    let u_jl = conj[j][l] % m;
                    if modpow(u_jl, u_ij, m) != u_jl % m {
                        return Err(Error::BadGroup(format!(
                            "incompatible conjugation rules at ({i},{j},{l})"
                        )));
                    }
                }
            }
        }
        Ok(PolyQuotient { orders, conj, conj_inv })
    }

    pub fn ngens(&self) -> usize {
        self.orders.len()
    }

    pub fn one(&self) -> PolyElem {
        vec![0; self.orders.len()]
    }

    pub fn order(&self) -> Result<u64> {
        self.orders
            .iter()
            .try_fold(1u64, |a, &o| a.checked_mul(o))
            .ok_or_else(|| Error::BadGroup("group order overflows".into()))
    }

    /// `nf := nf · g_i^f`.  The incoming power passes left over the tail of
    /// the normal form; passing `g_i^f` over `g_j^{e}` replaces `e` by
    /// `e · u_{ij}^{-f}`.
    pub fn mul_genpow(&self, nf: &mut PolyElem, i: usize, f: i64) {
        let oi = self.orders[i];
        for j in (i + 1)..self.orders.len() {
            let m = self.orders[j];
            if m == 1 || nf[j] == 0 {
                continue;
            }
            let u = if f >= 0 { self.conj_inv[i][j] } else { self.conj[i][j] % m };
            let scale = modpow(u, f.unsigned_abs(), m);
            nf[j] = ((nf[j] as u128 * scale as u128) % m as u128) as u64;
        }
        if oi > 1 {
            nf[i] = ((nf[i] as i128 + f as i128).rem_euclid(oi as i128)) as u64;
        }
    }

    pub fn mul(&self, a: &PolyElem, b: &PolyElem) -> PolyElem {
        let mut out = a.clone();
        for (i, &e) in b.iter().enumerate() {
            if e != 0 {
                self.mul_genpow(&mut out, i, e as i64);
            }
        }
        out
    }

    pub fn inv(&self, a: &PolyElem) -> PolyElem {
        let mut out = self.one();
        for i in (0..a.len()).rev() {
            if a[i] != 0 {
                self.mul_genpow(&mut out, i, -(a[i] as i64));
            }
        }
        out
    }

    pub fn eval_pword(&self, w: &PWord) -> PolyElem {
        let mut out = self.one();
        for &(i, e) in w {
            self.mul_genpow(&mut out, i, e);
        }
        out
    }

    /// The designated normal-form word of an element.
    pub fn to_pword(&self, a: &PolyElem) -> PWord {
        let mut w = pw_one();
        for (i, &e) in a.iter().enumerate() {
            if e != 0 {
                w.push((i, e as i64));
            }
        }
        w
    }

    /// Uniform random element, as its exponent tuple.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> PolyElem {
        self.orders
            .iter()
            .map(|&o| if o == 1 { 0 } else { rng.gen_range(0..o) })
            .collect()
    }

    pub fn index_of(&self, a: &PolyElem) -> u64 {
        let mut idx = 0u64;
        for (i, &e) in a.iter().enumerate() {
            idx = idx * self.orders[i] + e;
        }
        idx
    }

    pub fn element_at(&self, mut idx: u64) -> PolyElem {
        let mut out = self.one();
        for i in (0..self.orders.len()).rev() {
            out[i] = idx % self.orders[i];
            idx /= self.orders[i];
        }
        out
    }

    /// Conjugacy classes (small groups only): returns the class index of
    /// every element and the class sizes.
    pub fn conj_classes(&self) -> Result<(Vec<usize>, Vec<u64>)> {
        let n = self.order()?;
        if n > 1 << 16 {
            return Err(Error::BadGroup("group too large to enumerate classes".into()));
        }
        let n = n as usize;
        let mut class = vec![usize::MAX; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if class[start] != usize::MAX {
                continue;
            }
            let cid = sizes.len();
            let mut stack = vec![start as u64];
            class[start] = cid;
            let mut size = 0u64;
            while let Some(x) = stack.pop() {
                size += 1;
                let xe = self.element_at(x);
                for i in 0..self.orders.len() {
                    if self.orders[i] == 1 {
                        continue;
                    }
                    let mut y = self.one();
                    self.mul_genpow(&mut y, i, 1);
                    let conj = self.mul(&self.mul(&y, &xe), &self.inv(&y));
                    let idx = self.index_of(&conj);
                    if class[idx as usize] == usize::MAX {
                        class[idx as usize] = cid;
                        stack.push(idx);
                    }
                }
            }
            sizes.push(size);
        }
        Ok((class, sizes))
    }
}

/// A finite group with full multiplication table, built by iterated cyclic
/// extensions from polycyclic data with tail-word conjugation rules.
#[derive(Clone, Debug)]
pub struct ConcreteGroup {
    pub order: usize,
    mul: Vec<u32>,
    inv: Vec<u32>,
    pub ngens: usize,
    /// Element index of each generator.
    pub gen_elems: Vec<u32>,
    /// Normal-form word of each element in the generators.
    pub words: Vec<PWord>,
}

const CONCRETE_MAX: usize = 1 << 13;

impl ConcreteGroup {
    pub fn trivial() -> ConcreteGroup {
        ConcreteGroup {
            order: 1,
            mul: vec![0],
            inv: vec![0],
            ngens: 0,
            gen_elems: Vec::new(),
            words: vec![pw_one()],
        }
    }

    pub fn mul(&self, a: u32, b: u32) -> u32 {
        self.mul[a as usize * self.order + b as usize]
    }

    pub fn inv(&self, a: u32) -> u32 {
        self.inv[a as usize]
    }

    pub fn pow(&self, a: u32, e: i64) -> u32 {
        let base = if e < 0 { self.inv(a) } else { a };
        let mut acc = 0u32;
        let mut b = base;
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                acc = self.mul(acc, b);
            }
            b = self.mul(b, b);
            k >>= 1;
        }
        acc
    }

    pub fn eval_pword(&self, w: &PWord) -> u32 {
        let mut acc = 0u32;
        for &(i, e) in w {
            acc = self.mul(acc, self.pow(self.gen_elems[i], e));
        }
        acc
    }

    /// Build from polycyclic data: generator `i` conjugates each later
    /// generator `j` by the tail word `conj[(i,j)]` (a word in generators
    /// `>= j`); absent rules commute.  Generators with nontrivial power
    /// relations are not supported — each `g_i` has exact order `orders[i]`.
    pub fn from_polycyclic_words(
        orders: &[u64],
        conj: &BTreeMap<(usize, usize), PWord>,
    ) -> Result<ConcreteGroup> {
        let k = orders.len();
        let total: u64 = orders.iter().product();
        if total as usize > CONCRETE_MAX {
            return Err(Error::BadGroup(format!(
                "table group of order {total} exceeds limit {CONCRETE_MAX}"
            )));
        }
        let mut g = ConcreteGroup::trivial();
        // fold in generators back to front, so conjugation rules only ever
        // reference generators already present
        for i in (0..k).rev() {
            let mut phi_gen_images: BTreeMap<usize, u32> = BTreeMap::new();
            for j in (i + 1)..k {
                if let Some(w) = conj.get(&(i, j)) {
                    phi_gen_images.insert(j, g.eval_word_tail(w, i + 1));
                }
            }
            g = g.extend_front(i, orders[i], &phi_gen_images)?;
        }
        // renumber: after the fold, generator i of the input is generator i
        // of the result by construction; sanity-check the orders
        for (i, &o) in orders.iter().enumerate() {
            let mut acc = g.gen_elems[i];
            let mut m = 1u64;
            while acc != 0 {
                acc = g.mul(acc, g.gen_elems[i]);
                m += 1;
            }
            if o % m != 0 {
                return Err(Error::BadGroup(format!(
                    "generator {i} has order {m}, not dividing declared {o}"
                )));
            }
        }
        Ok(g)
    }

    /// Evaluate a word whose generator indices are all `>= base`, in a group
    /// whose generators are numbered `base..`.
    fn eval_word_tail(&self, w: &PWord, base: usize) -> u32 {
        let mut acc = 0u32;
        for &(i, e) in w {
            acc = self.mul(acc, self.pow(self.gen_elems[i - base], e));
        }
        acc
    }

    /// Extend by a new *first* generator of exact order `o`, acting on the
    /// current generators by `phi_gen_images` (absent = fixed).  Elements of
    /// the result are `g^e · x` with `x` in the old group.
    fn extend_front(
        &self,
        new_gen_global_idx: usize,
        o: u64,
        phi_gen_images: &BTreeMap<usize, u32>,
    ) -> Result<ConcreteGroup> {
        let h = self.order;
        let total = o as usize * h;
        if total > CONCRETE_MAX {
            return Err(Error::BadGroup(format!(
                "table group of order {total} exceeds limit {CONCRETE_MAX}"
            )));
        }
        // build the automorphism table from the generator images:
        // phi(element) = product of images along its normal-form word
        let mut phi = vec![0u32; h];
        for (x, w) in self.words.iter().enumerate() {
            let mut acc = 0u32;
            for &(gi, e) in w {
                let local = gi - (new_gen_global_idx + 1);
                let img = phi_gen_images
                    .get(&gi)
                    .copied()
                    .unwrap_or(self.gen_elems[local]);
                acc = self.mul(acc, self.pow(img, e));
            }
            phi[x] = acc;
        }
        // verify phi is an automorphism whose o-th power is the identity
        let mut seen = vec![false; h];
        for &y in &phi {
            if seen[y as usize] {
                return Err(Error::BadGroup("conjugation map is not injective".into()));
            }
            seen[y as usize] = true;
        }
        for a in 0..h as u32 {
            for b in 0..h as u32 {
                if phi[self.mul(a, b) as usize] != self.mul(phi[a as usize], phi[b as usize]) {
                    return Err(Error::BadGroup("conjugation map is not a homomorphism".into()));
                }
            }
        }
        let phi_pows = permutation_powers(&phi, o)?;
        // index of g^e x is e*h + x
        let mut mul = vec![0u32; total * total];
        for e in 0..o as usize {
            for x in 0..h {
                let a = e * h + x;
                for f in 0..o as usize {
                    let phi_neg_f = &phi_pows[(o as usize - f) % o as usize];
                    let xf = phi_neg_f[x] as usize;
                    for y in 0..h {
                        let r = (e + f) % o as usize;
                        let z = self.mul(xf as u32, y as u32) as usize;
                        mul[a * total + f * h + y] = (r * h + z) as u32;
                    }
                }
            }
        }
        let mut inv = vec![0u32; total];
        for e in 0..o as usize {
            for x in 0..h {
                // (e,x)^{-1} = (f, phi^{-f}(x^{-1})) and -f = e mod o
                let f = (o as usize - e) % o as usize;
                let y = phi_pows[e][self.inv(x as u32) as usize];
                inv[e * h + x] = (f * h + y as usize) as u32;
            }
        }
        // the new generator is (1 mod o, id)
        let mut gen_elems = vec![((1 % o as usize) * h) as u32];
        gen_elems.extend(self.gen_elems.iter().copied());
        let mut words = Vec::with_capacity(total);
        for e in 0..o as usize {
            for x in 0..h {
                words.push(pw_mul(
                    &pw_genpow(new_gen_global_idx, e as i64),
                    &self.words[x],
                ));
            }
        }
        Ok(ConcreteGroup {
            order: total,
            mul,
            inv,
            ngens: self.ngens + 1,
            gen_elems,
            words,
        })
    }

    /// All-triples associativity check; test use only, small groups.
    pub fn verify_associative(&self) -> bool {
        let n = self.order as u32;
        for a in 0..n {
            for b in 0..n {
                let ab = self.mul(a, b);
                for c in 0..n {
                    if self.mul(ab, c) != self.mul(a, self.mul(b, c)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn conj_class_sizes(&self) -> Vec<usize> {
        let n = self.order as u32;
        let mut class = vec![usize::MAX; self.order];
        let mut sizes = Vec::new();
        for s in 0..n {
            if class[s as usize] != usize::MAX {
                continue;
            }
            let cid = sizes.len();
            let mut size = 0;
            for g in 0..n {
                let c = self.mul(self.mul(g, s), self.inv(g));
                if class[c as usize] == usize::MAX {
                    class[c as usize] = cid;
                    size += 1;
                }
            }
            sizes.push(size);
        }
        sizes
    }
}

/// Powers `phi^0 .. phi^{o-1}` of a permutation, via cycle decomposition,
/// checking `phi^o = id`.
fn permutation_powers(phi: &[u32], o: u64) -> Result<Vec<Vec<u32>>> {
    let n = phi.len();
    // decompose into cycles once
    let mut cycle_of = vec![usize::MAX; n];
    let mut pos_in_cycle = vec![0usize; n];
    let mut cycles: Vec<Vec<u32>> = Vec::new();
    for s in 0..n {
        if cycle_of[s] != usize::MAX {
            continue;
        }
        let cid = cycles.len();
        let mut cyc = Vec::new();
        let mut x = s;
        loop {
            cycle_of[x] = cid;
            pos_in_cycle[x] = cyc.len();
            cyc.push(x as u32);
            x = phi[x] as usize;
            if x == s {
                break;
            }
        }
        cycles.push(cyc);
    }
    for c in &cycles {
        if o % c.len() as u64 != 0 {
            return Err(Error::BadGroup(format!(
                "conjugation automorphism order does not divide {o}"
            )));
        }
    }
    let mut pows = Vec::with_capacity(o as usize);
    for e in 0..o as usize {
        let mut table = vec![0u32; n];
        for c in &cycles {
            let len = c.len();
            for (pos, &x) in c.iter().enumerate() {
                table[x as usize] = c[(pos + e) % len];
            }
        }
        pows.push(table);
    }
    Ok(pows)
}
