//! Arithmetic in the residue field `F_q`, `q = p^t`.
//!
//! Elements are polynomials of degree `< t` over `F_p`, reduced modulo a
//! fixed monic irreducible polynomial. The modulus is found deterministically
//! at construction time (first irreducible in the little-endian enumeration
//! of coefficient vectors), so two contexts with the same `(p, t)` are always
//! the same field with the same element encoding.
//!
//! Elements are plain `Copy` data; every operation goes through the [`Fq`]
//! context. That keeps matrices of field elements flat and hashable, which
//! the cohomology code leans on heavily.

use crate::error::{Error, Result};

/// Maximum supported extension degree. Everything downstream is sized for
/// small fields (the interesting towers run at `t = 1` or `2`).
pub const MAX_T: usize = 4;

/// An element of `F_{p^t}`: coefficients of `1, x, x^2, ...` with unused
/// slots zero. Context-free and `Copy`; interpret via an [`Fq`].
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Debug)]
pub struct FqElem {
    pub c: [u16; MAX_T],
}

/// The field context: prime `p`, degree `t`, and the monic modulus
/// `x^t + m[t-1] x^{t-1} + ... + m[0]` (lower coefficients stored).
#[derive(Clone, Debug)]
pub struct Fq {
    pub p: u16,
    pub t: usize,
    modulus: [u16; MAX_T],
}

fn is_prime(p: u16) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p as u32 {
        if p as u32 % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Remainder of `a` modulo monic `b` over `F_p`; both little-endian, `b`
/// monic of degree `b.len() - 1`.
fn poly_rem(mut a: Vec<u16>, b: &[u16], p: u16) -> Vec<u16> {
    let db = b.len() - 1;
    while a.len() > db {
        let lead = *a.last().unwrap() % p;
        let da = a.len() - 1;
        if lead != 0 {
            for j in 0..db {
                let sub = (lead as u32 * b[j] as u32) % p as u32;
                let idx = da - db + j;
                a[idx] = ((a[idx] as u32 + p as u32 - sub as u32) % p as u32) as u16;
            }
        }
        a.pop();
        while a.len() > 1 && *a.last().unwrap() == 0 {
            a.pop();
        }
        if a.iter().all(|&x| x == 0) {
            return vec![0];
        }
    }
    a
}

/// Trial-division irreducibility for small degrees: a monic polynomial of
/// degree `t <= 4` is irreducible iff no monic polynomial of degree
/// `1..=t/2` divides it.
fn is_irreducible(f: &[u16], p: u16) -> bool {
    let t = f.len() - 1;
    for d in 1..=t / 2 {
        // enumerate monic divisors of degree d, little-endian counting
        let count = (p as u64).pow(d as u32);
        for k in 0..count {
            let mut g = Vec::with_capacity(d + 1);
            let mut kk = k;
            for _ in 0..d {
                g.push((kk % p as u64) as u16);
                kk /= p as u64;
            }
            g.push(1); // monic
            let r = poly_rem(f.to_vec(), &g, p);
            if r.iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

impl Fq {
    pub fn new(p: u16, t: usize) -> Result<Fq> {
        if !is_prime(p) {
            return Err(Error::BadField(format!("{p} is not prime")));
        }
        if t == 0 || t > MAX_T {
            return Err(Error::BadField(format!(
                "extension degree {t} outside 1..={MAX_T}"
            )));
        }
        let mut modulus = [0u16; MAX_T];
        if t > 1 {
            let count = (p as u64).pow(t as u32);
            let mut found = false;
            for k in 0..count {
                let mut f = Vec::with_capacity(t + 1);
                let mut kk = k;
                for _ in 0..t {
                    f.push((kk % p as u64) as u16);
                    kk /= p as u64;
                }
                f.push(1);
                if is_irreducible(&f, p) {
                    for (i, &x) in f[..t].iter().enumerate() {
                        modulus[i] = x;
                    }
                    found = true;
                    break;
                }
            }
            if !found {
                // cannot happen: irreducibles of every degree exist
                return Err(Error::BadField("no irreducible modulus found".into()));
            }
        }
        Ok(Fq { p, t, modulus })
    }

    pub fn q(&self) -> u64 {
        (self.p as u64).pow(self.t as u32)
    }

    /// Lower coefficients of the monic modulus (length `t`, only meaningful
    /// for `t > 1`).
    pub fn modulus(&self) -> &[u16] {
        &self.modulus[..self.t]
    }

    pub fn zero(&self) -> FqElem {
        FqElem::default()
    }

    pub fn one(&self) -> FqElem {
        self.from_int(1)
    }

    pub fn from_int(&self, k: i64) -> FqElem {
        let p = self.p as i64;
        let mut r = k % p;
        if r < 0 {
            r += p;
        }
        let mut e = FqElem::default();
        e.c[0] = r as u16;
        e
    }

    /// Build an element from explicit coefficients (length `<= t`).
    pub fn elem(&self, coeffs: &[u16]) -> Result<FqElem> {
        if coeffs.len() > self.t {
            return Err(Error::Domain(format!(
                "element has {} coefficients but t = {}",
                coeffs.len(),
                self.t
            )));
        }
        let mut e = FqElem::default();
        for (i, &x) in coeffs.iter().enumerate() {
            e.c[i] = x % self.p;
        }
        Ok(e)
    }

    pub fn is_zero(&self, a: FqElem) -> bool {
        a.c.iter().all(|&x| x == 0)
    }

    /// The integer value of an element of the prime field. Panics when the
    /// element has higher coefficients (programming error).
    pub fn as_int(&self, a: FqElem) -> u16 {
        assert!(
            a.c[1..].iter().all(|&x| x == 0),
            "as_int on a non-prime-field element"
        );
        a.c[0]
    }

    pub fn add(&self, a: FqElem, b: FqElem) -> FqElem {
        let mut r = FqElem::default();
        for i in 0..self.t {
            r.c[i] = (a.c[i] + b.c[i]) % self.p;
        }
        r
    }

    pub fn neg(&self, a: FqElem) -> FqElem {
        let mut r = FqElem::default();
        for i in 0..self.t {
            r.c[i] = (self.p - a.c[i] % self.p) % self.p;
        }
        r
    }

    pub fn sub(&self, a: FqElem, b: FqElem) -> FqElem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: FqElem, b: FqElem) -> FqElem {
        let p = self.p as u32;
        let t = self.t;
        let mut prod = [0u32; 2 * MAX_T - 1];
        for i in 0..t {
            if a.c[i] == 0 {
                continue;
            }
            for j in 0..t {
                prod[i + j] = (prod[i + j] + a.c[i] as u32 * b.c[j] as u32) % p;
            }
        }
        // reduce degrees >= t using x^t = -(m[0] + m[1] x + ...)
        for k in (t..2 * t - 1).rev() {
            let lead = prod[k];
            if lead == 0 {
                continue;
            }
            prod[k] = 0;
            for j in 0..t {
                let sub = (lead * self.modulus[j] as u32) % p;
                prod[k - t + j] = (prod[k - t + j] + p - sub) % p;
            }
        }
        let mut r = FqElem::default();
        for i in 0..t {
            r.c[i] = prod[i] as u16;
        }
        r
    }

    pub fn pow(&self, a: FqElem, mut e: u64) -> FqElem {
        let mut base = a;
        let mut acc = self.one();
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: FqElem) -> Option<FqElem> {
        if self.is_zero(a) {
            return None;
        }
        Some(self.pow(a, self.q() - 2))
    }

    pub fn div(&self, a: FqElem, b: FqElem) -> Option<FqElem> {
        self.inv(b).map(|bi| self.mul(a, bi))
    }

    /// `a^p`, the arithmetic Frobenius.
    pub fn frobenius(&self, a: FqElem) -> FqElem {
        self.pow(a, self.p as u64)
    }

    /// Trace down to the prime field, returned as an integer in `[0, p)`.
    pub fn trace_fp(&self, a: FqElem) -> u16 {
        let mut acc = self.zero();
        let mut x = a;
        for _ in 0..self.t {
            acc = self.add(acc, x);
            x = self.frobenius(x);
        }
        debug_assert!(acc.c[1..].iter().all(|&c| c == 0), "trace not in F_p");
        acc.c[0]
    }

    /// Multiplicative order of a nonzero element.
    pub fn mult_order(&self, a: FqElem) -> u64 {
        assert!(!self.is_zero(a));
        let mut x = a;
        let mut n = 1;
        while x != self.one() {
            x = self.mul(x, a);
            n += 1;
        }
        n
    }

    /// All `q` elements, in the fixed little-endian coefficient order.
    pub fn elements(&self) -> impl Iterator<Item = FqElem> + '_ {
        (0..self.q()).map(move |k| self.element_from_index(k))
    }

    pub fn element_from_index(&self, mut k: u64) -> FqElem {
        let mut e = FqElem::default();
        for i in 0..self.t {
            e.c[i] = (k % self.p as u64) as u16;
            k /= self.p as u64;
        }
        e
    }

    pub fn element_index(&self, a: FqElem) -> u64 {
        let mut k = 0u64;
        for i in (0..self.t).rev() {
            k = k * self.p as u64 + a.c[i] as u64;
        }
        k
    }

    pub fn random<R: rand::Rng>(&self, rng: &mut R) -> FqElem {
        let mut e = FqElem::default();
        for i in 0..self.t {
            e.c[i] = rng.gen_range(0..self.p);
        }
        e
    }

    /// Short display form: an integer for prime fields, a coefficient vector
    /// otherwise.
    pub fn fmt_elem(&self, a: FqElem) -> String {
        if self.t == 1 {
            format!("{}", a.c[0])
        } else {
            let v: Vec<u16> = a.c[..self.t].to_vec();
            format!("{v:?}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_field_basics() {
        let f = Fq::new(5, 1).unwrap();
        let two = f.from_int(2);
        let three = f.from_int(3);
        assert_eq!(f.mul(two, three), f.from_int(6));
        assert_eq!(f.add(two, three), f.zero());
        assert_eq!(f.inv(two), Some(f.from_int(3)));
        assert_eq!(f.pow(two, 4), f.one());
        assert_eq!(f.mult_order(two), 4);
        assert_eq!(f.trace_fp(three), 3);
    }

    #[test]
    fn f9_is_f3_adjoin_i() {
        // over F_3 the first irreducible monic quadratic in our ordering is
        // x^2 + 1, so F_9 = F_3(i)
        let f = Fq::new(3, 2).unwrap();
        assert_eq!(f.modulus(), &[1, 0]);
        let i = f.elem(&[0, 1]).unwrap();
        assert_eq!(f.mul(i, i), f.from_int(-1));
        // (1 + i)^2 = 2i
        let a = f.elem(&[1, 1]).unwrap();
        assert_eq!(f.mul(a, a), f.elem(&[0, 2]).unwrap());
        // tr(i) = i + i^3 = 0, tr(1) = 2
        assert_eq!(f.trace_fp(i), 0);
        assert_eq!(f.trace_fp(f.one()), 2);
        // multiplicative group has order 8 and 1 + i generates it
        assert_eq!(f.mult_order(a), 8);
    }

    #[test]
    fn f25_inverse_table_closes() {
        let f = Fq::new(5, 2).unwrap();
        for a in f.elements() {
            if f.is_zero(a) {
                assert_eq!(f.inv(a), None);
            } else {
                let ai = f.inv(a).unwrap();
                assert_eq!(f.mul(a, ai), f.one());
            }
        }
    }

    #[test]
    fn frobenius_is_additive_and_fixes_fp() {
        let f = Fq::new(3, 3).unwrap();
        for a in f.elements() {
            for b in f.elements() {
                assert_eq!(
                    f.frobenius(f.add(a, b)),
                    f.add(f.frobenius(a), f.frobenius(b))
                );
            }
        }
        for k in 0..3 {
            let a = f.from_int(k);
            assert_eq!(f.frobenius(a), a);
        }
    }

    #[test]
    fn element_indexing_round_trips() {
        let f = Fq::new(5, 2).unwrap();
        for k in 0..f.q() {
            let a = f.element_from_index(k);
            assert_eq!(f.element_index(a), k);
        }
    }
}
