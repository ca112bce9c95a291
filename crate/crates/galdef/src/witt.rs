//! Truncated Witt vectors of `F_q`: the unramified coefficient rings
//! `W(F_q)/p^m`.
//!
//! `W(F_q)` is realized concretely as `Z_p[x]/(f~)` where `f~` is the monic
//! lift (coefficients in `{0..p-1}`) of the modulus chosen by [`crate::fq::Fq`].
//! Any monic lift gives the same unramified extension, and fixing this one
//! makes the encoding canonical. An element at level `m` is a polynomial of
//! degree `< t` with coefficients in `Z/p^m`.
//!
//! Elements carry their own level because downstream the coefficient of a
//! degree-`d` monomial in the series ring lives at level `n - d`; mixing
//! levels is always an explicit [`WittCtx::reduce`] or [`WittCtx::lift`].

use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem, MAX_T};

/// Largest supported level: `p^level` must stay well inside `u64` so that
/// products fit in `u128` intermediates. 20 is far beyond desk scale.
pub const MAX_LEVEL: u8 = 20;

#[derive(Copy, Clone, PartialEq, Eq, Hash, Debug)]
pub struct WittElem {
    pub level: u8,
    c: [u64; MAX_T],
}

impl WittElem {
    pub fn coeffs(&self, t: usize) -> &[u64] {
        &self.c[..t]
    }
}

#[derive(Clone, Debug)]
pub struct WittCtx {
    pub fq: Fq,
    /// lower coefficients of the monic modulus, lifted to integers
    modulus: [u64; MAX_T],
}

impl WittCtx {
    pub fn new(fq: Fq) -> WittCtx {
        let mut modulus = [0u64; MAX_T];
        for (i, &m) in fq.modulus().iter().enumerate() {
            modulus[i] = m as u64;
        }
        WittCtx { fq, modulus }
    }

    pub fn p(&self) -> u64 {
        self.fq.p as u64
    }

    pub fn t(&self) -> usize {
        self.fq.t
    }

    pub fn pk(&self, level: u8) -> u64 {
        assert!(level <= MAX_LEVEL, "witt level {level} too large");
        self.p().pow(level as u32)
    }

    pub fn zero(&self, level: u8) -> WittElem {
        assert!(level >= 1 && level <= MAX_LEVEL);
        WittElem {
            level,
            c: [0; MAX_T],
        }
    }

    pub fn one(&self, level: u8) -> WittElem {
        self.from_int(1, level)
    }

    pub fn from_int(&self, k: i128, level: u8) -> WittElem {
        let m = self.pk(level) as i128;
        let mut r = k % m;
        if r < 0 {
            r += m;
        }
        let mut e = self.zero(level);
        e.c[0] = r as u64;
        e
    }

    pub fn from_coeffs(&self, coeffs: &[u64], level: u8) -> Result<WittElem> {
        if coeffs.len() > self.t() {
            return Err(Error::Domain(format!(
                "witt element has {} coefficients but t = {}",
                coeffs.len(),
                self.t()
            )));
        }
        let m = self.pk(level);
        let mut e = self.zero(level);
        for (i, &x) in coeffs.iter().enumerate() {
            e.c[i] = x % m;
        }
        Ok(e)
    }

    /// Coefficient-wise integer lift of a residue element. This is *not* the
    /// Teichmueller lift; it is the naive section used where only the residue
    /// matters (graded injections).
    pub fn naive_lift(&self, a: FqElem, level: u8) -> WittElem {
        let mut e = self.zero(level);
        for i in 0..self.t() {
            e.c[i] = a.c[i] as u64;
        }
        e
    }

    pub fn residue(&self, a: WittElem) -> FqElem {
        let mut e = FqElem::default();
        for i in 0..self.t() {
            e.c[i] = (a.c[i] % self.p()) as u16;
        }
        e
    }

    pub fn is_zero(&self, a: WittElem) -> bool {
        a.c.iter().all(|&x| x == 0)
    }

    pub fn is_unit(&self, a: WittElem) -> bool {
        !self.fq.is_zero(self.residue(a))
    }

    pub fn add(&self, a: WittElem, b: WittElem) -> WittElem {
        assert_eq!(a.level, b.level, "witt level mismatch in add");
        let m = self.pk(a.level);
        let mut r = self.zero(a.level);
        for i in 0..self.t() {
            r.c[i] = (a.c[i] + b.c[i]) % m;
        }
        r
    }

    pub fn neg(&self, a: WittElem) -> WittElem {
        let m = self.pk(a.level);
        let mut r = self.zero(a.level);
        for i in 0..self.t() {
            r.c[i] = (m - a.c[i] % m) % m;
        }
        r
    }

    pub fn sub(&self, a: WittElem, b: WittElem) -> WittElem {
        self.add(a, self.neg(b))
    }

    pub fn mul(&self, a: WittElem, b: WittElem) -> WittElem {
        assert_eq!(a.level, b.level, "witt level mismatch in mul");
        let m = self.pk(a.level) as u128;
        let t = self.t();
        let mut prod = [0u128; 2 * MAX_T - 1];
        for i in 0..t {
            if a.c[i] == 0 {
                continue;
            }
            for j in 0..t {
                prod[i + j] = (prod[i + j] + a.c[i] as u128 * b.c[j] as u128) % m;
            }
        }
        for k in (t..2 * t - 1).rev() {
            let lead = prod[k];
            if lead == 0 {
                continue;
            }
            prod[k] = 0;
            for j in 0..t {
                let sub = (lead * self.modulus[j] as u128) % m;
                prod[k - t + j] = (prod[k - t + j] + m - sub) % m;
            }
        }
        let mut r = self.zero(a.level);
        for i in 0..t {
            r.c[i] = prod[i] as u64;
        }
        r
    }

    pub fn pow(&self, a: WittElem, mut e: u64) -> WittElem {
        let mut base = a;
        let mut acc = self.one(a.level);
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    /// Inverse of a unit by Hensel/Newton from the residue inverse:
    /// `x <- x(2 - ax)` doubles the precision each round.
    pub fn inv(&self, a: WittElem) -> Option<WittElem> {
        let res_inv = self.fq.inv(self.residue(a))?;
        let mut x = self.naive_lift(res_inv, a.level);
        let two = self.from_int(2, a.level);
        let mut prec = 1u32;
        while prec < a.level as u32 {
            x = self.mul(x, self.sub(two, self.mul(a, x)));
            prec *= 2;
        }
        debug_assert_eq!(self.mul(a, x), self.one(a.level));
        Some(x)
    }

    /// Reduce to a lower (or equal) level.
    pub fn reduce(&self, a: WittElem, level: u8) -> WittElem {
        assert!(level <= a.level && level >= 1);
        let m = self.pk(level);
        let mut r = self.zero(level);
        for i in 0..self.t() {
            r.c[i] = a.c[i] % m;
        }
        r
    }

    /// Canonical digit-preserving lift to a higher (or equal) level: the same
    /// integer representatives read at the larger modulus.
    pub fn lift(&self, a: WittElem, level: u8) -> WittElem {
        assert!(level >= a.level);
        let mut r = self.zero(level);
        r.c[..self.t()].copy_from_slice(&a.c[..self.t()]);
        r
    }

    /// Multiply by `p^k`, staying at the same level.
    pub fn mul_pk(&self, a: WittElem, k: u8) -> WittElem {
        let m = self.pk(a.level) as u128;
        let f = self.pk(k.min(a.level)) as u128;
        let mut r = self.zero(a.level);
        for i in 0..self.t() {
            r.c[i] = ((a.c[i] as u128 * f) % m) as u64;
        }
        r
    }

    /// The Teichmueller (multiplicative) lift: the unique root of unity (or
    /// zero) above `a`. Computed as the limit of `x -> x^q`, which gains one
    /// p-adic digit per iteration.
    pub fn teichmuller(&self, a: FqElem, level: u8) -> WittElem {
        let mut x = self.naive_lift(a, level);
        let q = self.fq.q();
        for _ in 0..level {
            x = self.pow(x, q);
        }
        debug_assert_eq!(self.pow(x, q), x);
        x
    }

    /// Teichmueller lift of an integer residue, as an integer mod `p^level`.
    pub fn teich_int(&self, k: i64, level: u8) -> u64 {
        let e = self.teichmuller(self.fq.from_int(k), level);
        e.c[0]
    }

    /// Square root of a unit congruent to a square mod p (p odd), by Hensel
    /// lifting from a residue square root. Returns `None` when the residue is
    /// not a square.
    pub fn sqrt_unit(&self, a: WittElem) -> Option<WittElem> {
        let r = self.residue(a);
        if self.fq.is_zero(r) {
            return None;
        }
        // find a residue square root by scanning (fields here are tiny)
        let mut root = None;
        for x in self.fq.elements() {
            if self.fq.mul(x, x) == r {
                root = Some(x);
                break;
            }
        }
        let root = root?;
        let mut x = self.naive_lift(root, a.level);
        // Newton: x <- (x + a/x)/2
        let inv2 = self.inv(self.from_int(2, a.level)).expect("p odd");
        let mut prec = 1u32;
        while prec < a.level as u32 {
            let xi = self.inv(x)?;
            x = self.mul(inv2, self.add(x, self.mul(a, xi)));
            prec *= 2;
        }
        debug_assert_eq!(self.mul(x, x), a);
        Some(x)
    }

    /// Base-p digits of each polynomial coefficient, little-endian, length =
    /// level. Used for exact serialization.
    pub fn digits(&self, a: WittElem) -> Vec<Vec<u16>> {
        let p = self.p();
        (0..self.t())
            .map(|i| {
                let mut x = a.c[i];
                (0..a.level)
                    .map(|_| {
                        let d = (x % p) as u16;
                        x /= p;
                        d
                    })
                    .collect()
            })
            .collect()
    }

    pub fn fmt_elem(&self, a: WittElem) -> String {
        if self.t() == 1 {
            format!("{}", a.c[0])
        } else {
            format!("{:?}", &a.c[..self.t()])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w5() -> WittCtx {
        WittCtx::new(Fq::new(5, 1).unwrap())
    }

    #[test]
    fn teichmuller_of_two_mod_powers_of_five() {
        let w = w5();
        // the multiplicative lift of 2: 7 mod 25, 57 mod 125, and a 4th root
        // of unity at every level
        assert_eq!(w.teich_int(2, 1), 2);
        assert_eq!(w.teich_int(2, 2), 7);
        assert_eq!(w.teich_int(2, 3), 57);
        for level in 1..=6 {
            let t = w.teichmuller(w.fq.from_int(2), level);
            assert_eq!(w.pow(t, 4), w.one(level));
            assert_eq!(w.residue(t), w.fq.from_int(2));
        }
    }

    #[test]
    fn p_times_p_is_p_squared() {
        let w = w5();
        let p = w.from_int(5, 3);
        let p2 = w.mul(p, p);
        assert_eq!(p2, w.from_int(25, 3));
        assert!(!w.is_zero(p2));
        assert!(w.is_zero(w.mul(p2, p)));
    }

    #[test]
    fn unit_inverse_round_trip() {
        let w = w5();
        for k in 1..125u64 {
            if k % 5 == 0 {
                continue;
            }
            let a = w.from_int(k as i128, 3);
            let ai = w.inv(a).unwrap();
            assert_eq!(w.mul(a, ai), w.one(3));
        }
        assert_eq!(w.inv(w.from_int(5, 3)), None);
    }

    #[test]
    fn sqrt_of_one_plus_p() {
        let w = w5();
        // 6 = 1 + 5 has square roots mod 25; 16^2 = 256 = 6 + 10*25
        let s = w.sqrt_unit(w.from_int(6, 2)).unwrap();
        assert_eq!(w.mul(s, s), w.from_int(6, 2));
        let s3 = w.sqrt_unit(w.from_int(6, 3)).unwrap();
        assert_eq!(w.mul(s3, s3), w.from_int(6, 3));
    }

    #[test]
    fn teichmuller_in_an_extension_is_frobenius_stable() {
        let w = WittCtx::new(Fq::new(3, 2).unwrap());
        for a in w.fq.elements() {
            let t = w.teichmuller(a, 4);
            assert_eq!(w.residue(t), a);
            assert_eq!(w.pow(t, w.fq.q()), t);
        }
    }

    #[test]
    fn digit_serialization_round_trips() {
        let w = w5();
        let a = w.from_int(117, 4);
        let d = w.digits(a);
        assert_eq!(d.len(), 1);
        // 117 = 2 + 3*5 + 4*25 + 0*125
        assert_eq!(d[0], vec![2, 3, 4, 0]);
        let mut back = 0u64;
        for (i, &dig) in d[0].iter().enumerate() {
            back += dig as u64 * 5u64.pow(i as u32);
        }
        assert_eq!(back, 117);
    }
}
