//! The coefficient tower: truncated multivariate series
//! `R = W(F_q)[[T_1..T_v]] / (p, T_1, ..., T_v)^n`.
//!
//! Writing `m = (p, T_1, ..., T_v)`, an element of `R` is a finite sum of
//! monomials `T^alpha` of total degree `d < n`, and the coefficient of a
//! degree-`d` monomial is only defined modulo `p^{n-d}` (that is exactly the
//! part of `m^n` sitting in that graded slot). So the representation stores,
//! per monomial, a Witt element at level `n - d`, and the level bookkeeping
//! in [`crate::witt`] keeps multiplication honest: the product of a level
//! `n - d1` and a level `n - d2` coefficient lands at level `n - d1 - d2`,
//! reached by reducing both factors first.
//!
//! The graded pieces `m^n / m^{n+1}` are a recurring object downstream (all
//! obstruction calculus happens there); they are spanned by the "p-monomials"
//! `p^a T^alpha` with `a + |alpha| = n`, and [`SeriesRing::extract_graded`] /
//! [`SeriesRing::inject_graded`] convert between ring elements that vanish in
//! `R_n` and vectors of `F_q` coordinates in that basis.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fq::FqElem;
use crate::witt::{WittCtx, WittElem};

/// Exponent vector of a monomial, graded-lex ordered (total degree first,
/// then lexicographic). The ordering makes serialized maps deterministic.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub Vec<u8>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    pub fn one(vars: u8) -> Monomial {
        Monomial(vec![0; vars as usize])
    }

    pub fn var(i: usize, vars: u8) -> Monomial {
        let mut v = vec![0; vars as usize];
        v[i] = 1;
        Monomial(v)
    }

    fn try_mul(&self, other: &Monomial) -> Monomial {
        Monomial(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(&a, &b)| a + b)
                .collect(),
        )
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct TruncSeries {
    pub n: u8,
    pub vars: u8,
    /// monomial -> coefficient at witt level `n - degree`; zero coefficients
    /// are never stored
    terms: BTreeMap<Monomial, WittElem>,
}

impl TruncSeries {
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &WittElem)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Context for a fixed truncation level and variable count.
#[derive(Clone, Debug)]
pub struct SeriesRing {
    pub witt: WittCtx,
    pub n: u8,
    pub vars: u8,
}

/// Basis index of a graded piece `m^n/m^{n+1}`: the monomial `p^a T^alpha`
/// with `p_exp = a` and `a + |alpha| = n`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct GradedMono {
    pub p_exp: u8,
    pub mono: Monomial,
}

impl SeriesRing {
    pub fn new(witt: WittCtx, n: u8, vars: u8) -> SeriesRing {
        assert!(n >= 1);
        SeriesRing { witt, n, vars }
    }

    fn coeff_level(&self, deg: u32) -> u8 {
        debug_assert!(deg < self.n as u32);
        self.n - deg as u8
    }

    pub fn zero(&self) -> TruncSeries {
        TruncSeries {
            n: self.n,
            vars: self.vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn one(&self) -> TruncSeries {
        self.from_witt(self.witt.one(self.n))
    }

    pub fn from_witt(&self, c: WittElem) -> TruncSeries {
        let c = self.witt.reduce(c, self.n);
        let mut s = self.zero();
        if !self.witt.is_zero(c) {
            s.terms.insert(Monomial::one(self.vars), c);
        }
        s
    }

    pub fn from_int(&self, k: i128) -> TruncSeries {
        self.from_witt(self.witt.from_int(k, self.n))
    }

    /// The variable `T_{i+1}` (0-based index).
    pub fn var(&self, i: usize) -> TruncSeries {
        assert!(i < self.vars as usize, "variable index out of range");
        assert!(self.n >= 2, "variables vanish at level 1");
        let mut s = self.zero();
        s.terms
            .insert(Monomial::var(i, self.vars), self.witt.one(self.n - 1));
        s
    }

    pub fn coeff(&self, s: &TruncSeries, m: &Monomial) -> WittElem {
        match s.terms.get(m) {
            Some(&c) => c,
            None => self.witt.zero(self.coeff_level(m.degree())),
        }
    }

    fn insert_term(&self, s: &mut TruncSeries, m: Monomial, c: WittElem) {
        debug_assert_eq!(c.level, self.coeff_level(m.degree()));
        if !self.witt.is_zero(c) {
            s.terms.insert(m, c);
        }
    }

    fn add_term(&self, s: &mut TruncSeries, m: Monomial, c: WittElem) {
        if self.witt.is_zero(c) {
            return;
        }
        match s.terms.remove(&m) {
            None => {
                s.terms.insert(m, c);
            }
            Some(old) => {
                let sum = self.witt.add(old, c);
                if !self.witt.is_zero(sum) {
                    s.terms.insert(m, sum);
                }
            }
        }
    }

    fn assert_compat(&self, s: &TruncSeries) {
        assert_eq!(s.n, self.n, "series level mismatch");
        assert_eq!(s.vars, self.vars, "series variable count mismatch");
    }

    pub fn add(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        self.assert_compat(a);
        self.assert_compat(b);
        let mut r = a.clone();
        for (m, &c) in &b.terms {
            self.add_term(&mut r, m.clone(), c);
        }
        r
    }

    pub fn neg(&self, a: &TruncSeries) -> TruncSeries {
        let mut r = self.zero();
        for (m, &c) in &a.terms {
            self.insert_term(&mut r, m.clone(), self.witt.neg(c));
        }
        r
    }

    pub fn sub(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        self.add(a, &self.neg(b))
    }

    pub fn mul(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        self.assert_compat(a);
        self.assert_compat(b);
        let mut r = self.zero();
        for (ma, &ca) in &a.terms {
            let da = ma.degree();
            for (mb, &cb) in &b.terms {
                let d = da + mb.degree();
                if d >= self.n as u32 {
                    continue;
                }
                let lvl = self.coeff_level(d);
                let c = self
                    .witt
                    .mul(self.witt.reduce(ca, lvl), self.witt.reduce(cb, lvl));
                self.add_term(&mut r, ma.try_mul(mb), c);
            }
        }
        r
    }

    pub fn mul_witt(&self, a: &TruncSeries, c: WittElem) -> TruncSeries {
        self.mul(a, &self.from_witt(c))
    }

    pub fn pow(&self, a: &TruncSeries, mut e: u64) -> TruncSeries {
        let mut base = a.clone();
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(&acc, &base);
            }
            base = self.mul(&base, &base);
            e >>= 1;
        }
        acc
    }

    pub fn is_unit(&self, a: &TruncSeries) -> bool {
        self.witt.is_unit(self.coeff(a, &Monomial::one(self.vars)))
    }

    /// Inverse of a unit. Newton iteration `x <- x(2 - ax)` starting from the
    /// inverse of the constant term; precision doubles in the `m`-adic
    /// filtration, which is nilpotent of index `n`.
    pub fn inv(&self, a: &TruncSeries) -> Option<TruncSeries> {
        let c0 = self.coeff(a, &Monomial::one(self.vars));
        let c0i = self.witt.inv(c0)?;
        let mut x = self.from_witt(c0i);
        let two = self.from_int(2);
        let mut prec = 1u32;
        while prec < self.n as u32 {
            x = self.mul(&x, &self.sub(&two, &self.mul(a, &x)));
            prec *= 2;
        }
        debug_assert_eq!(self.mul(a, &x), self.one());
        Some(x)
    }

    /// The tower surjection onto a smaller ring: truncate to level `k` and
    /// kill the variables of index `>= vars_k`.
    pub fn project(&self, a: &TruncSeries, k: u8, vars_k: u8) -> TruncSeries {
        self.assert_compat(a);
        assert!(k <= self.n && vars_k <= self.vars);
        let target = SeriesRing::new(self.witt.clone(), k, vars_k);
        let mut r = target.zero();
        for (m, &c) in &a.terms {
            if m.0[vars_k as usize..].iter().any(|&e| e > 0) {
                continue;
            }
            let d = m.degree();
            if d >= k as u32 {
                continue;
            }
            let mono = Monomial(m.0[..vars_k as usize].to_vec());
            target.add_term(&mut r, mono, self.witt.reduce(c, k - d as u8));
        }
        r
    }

    /// Canonical (digit-preserving) lift into a larger ring: same monomials,
    /// same integer representatives, read at level `n_up` with `vars_up`
    /// variables. A section of [`SeriesRing::project`], not a ring map.
    pub fn lift_into(&self, a: &TruncSeries, up: &SeriesRing) -> TruncSeries {
        self.assert_compat(a);
        assert!(up.n >= self.n && up.vars >= self.vars);
        let mut r = up.zero();
        for (m, &c) in &a.terms {
            let mut exps = m.0.clone();
            exps.resize(up.vars as usize, 0);
            let lvl = up.coeff_level(m.degree());
            up.insert_term(&mut r, Monomial(exps), self.witt.lift(c, lvl));
        }
        r
    }

    /// Ordered basis of the graded piece `m^k/m^{k+1}` of *this* ring (so
    /// monomial degrees are `<= min(k, n-1)`; the `p`-exponent makes up the
    /// rest).
    pub fn graded_basis(&self, k: u8) -> Vec<GradedMono> {
        let mut out = Vec::new();
        let max_deg = (self.n - 1).min(k);
        for d in 0..=max_deg {
            for mono in monomials_of_degree(self.vars, d) {
                out.push(GradedMono {
                    p_exp: k - d,
                    mono,
                });
            }
        }
        out.sort();
        out
    }

    /// Read off the `m^k/m^{k+1}` coordinates of an element that vanishes in
    /// `R_k` (i.e. lies in the kernel of projection to level `k`; with
    /// `k = n - 1` this is the top graded piece). Errors when the element
    /// does not actually vanish there.
    pub fn extract_graded(&self, a: &TruncSeries, k: u8) -> Result<Vec<FqElem>> {
        self.assert_compat(a);
        assert!(k < self.n);
        let basis = self.graded_basis(k);
        let mut out = vec![self.witt.fq.zero(); basis.len()];
        let p = self.witt.p();
        for (m, &c) in &a.terms {
            let d = m.degree() as u8;
            if d > k {
                // below m^k in the graded sense is impossible; above it means
                // the term contributes nothing at this graded level only if
                // it vanishes at level k+1 too -- but degree > k monomials are
                // killed by projection to k+1 only when degree > k, so they
                // are allowed and simply do not contribute
                continue;
            }
            let a_exp = (k - d) as u32;
            let div = p.pow(a_exp);
            for (i, coeff) in c.coeffs(self.witt.t()).iter().enumerate() {
                if coeff % div != 0 {
                    return Err(Error::Domain(format!(
                        "element does not vanish at level {k}: coefficient {coeff} at degree {d}"
                    )));
                }
                let digit = (coeff / div) % p;
                if digit != 0 {
                    let pos = basis
                        .iter()
                        .position(|g| g.p_exp == k - d && g.mono == *m)
                        .expect("graded basis covers all monomials");
                    let mut add = FqElem::default();
                    add.c[i] = digit as u16;
                    out[pos] = self.witt.fq.add(out[pos], add);
                }
            }
        }
        Ok(out)
    }

    /// Build the element `sum coords[i] * p^{a_i} T^{alpha_i}` of this ring
    /// from `m^k/m^{k+1}` coordinates. Lifting ambiguity is killed by the
    /// `p`-power factor, so the naive coefficient lift is canonical here.
    pub fn inject_graded(&self, coords: &[FqElem], k: u8) -> TruncSeries {
        assert!(k < self.n);
        let basis = self.graded_basis(k);
        assert_eq!(coords.len(), basis.len());
        let mut r = self.zero();
        for (g, &x) in basis.iter().zip(coords) {
            if self.witt.fq.is_zero(x) {
                continue;
            }
            let lvl = self.coeff_level(g.mono.degree());
            let c = self.witt.mul_pk(self.witt.naive_lift(x, lvl), g.p_exp);
            self.add_term(&mut r, g.mono.clone(), c);
        }
        r
    }

    pub fn fmt_elem(&self, a: &TruncSeries) -> String {
        if a.is_zero() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (m, &c) in &a.terms {
            let cs = self.witt.fmt_elem(c);
            if m.degree() == 0 {
                parts.push(cs);
            } else {
                let mut vs = String::new();
                for (i, &e) in m.0.iter().enumerate() {
                    if e == 1 {
                        vs.push_str(&format!("T{}", i + 1));
                    } else if e > 1 {
                        vs.push_str(&format!("T{}^{}", i + 1, e));
                    }
                }
                if cs == "1" {
                    parts.push(vs);
                } else {
                    parts.push(format!("{cs}*{vs}"));
                }
            }
        }
        parts.join(" + ")
    }
}

/// All monomials in `vars` variables of exact total degree `d`, ordered.
pub fn monomials_of_degree(vars: u8, d: u8) -> Vec<Monomial> {
    fn rec(vars: usize, d: u8, prefix: &mut Vec<u8>, out: &mut Vec<Monomial>) {
        if vars == 1 {
            prefix.push(d);
            out.push(Monomial(prefix.clone()));
            prefix.pop();
            return;
        }
        for e in 0..=d {
            prefix.push(e);
            rec(vars - 1, d - e, prefix, out);
            prefix.pop();
        }
    }
    if vars == 0 {
        return if d == 0 {
            vec![Monomial(vec![])]
        } else {
            vec![]
        };
    }
    let mut out = Vec::new();
    rec(vars as usize, d, &mut Vec::new(), &mut out);
    out.sort();
    out
}
