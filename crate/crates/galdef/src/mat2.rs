//! 2x2 matrices over an arbitrary commutative coefficient context.
//!
//! The representation-theoretic code needs the same matrix algebra over
//! `F_q`, over `W(F_q)/p^m`, and over the truncated series rings, so the
//! arithmetic contexts implement one small [`Ring`] trait (context + element
//! type) and the matrix operations are generic over it.

use crate::fq::{Fq, FqElem};
use crate::series::{SeriesRing, TruncSeries};
use crate::witt::{WittCtx, WittElem};

/// A commutative ring presented as a context handing out operations on a
/// plain element type.
pub trait Ring {
    type Elem: Clone + PartialEq + std::fmt::Debug;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }
    fn is_unit(&self, a: &Self::Elem) -> bool {
        self.inv(a).is_some()
    }
    fn from_int(&self, k: i64) -> Self::Elem {
        let mut acc = self.zero();
        let one = self.one();
        for _ in 0..k.unsigned_abs() {
            acc = self.add(&acc, &one);
        }
        if k < 0 {
            acc = self.neg(&acc);
        }
        acc
    }
}

impl Ring for Fq {
    type Elem = FqElem;

    fn zero(&self) -> FqElem {
        Fq::zero(self)
    }
    fn one(&self) -> FqElem {
        Fq::one(self)
    }
    fn add(&self, a: &FqElem, b: &FqElem) -> FqElem {
        Fq::add(self, *a, *b)
    }
    fn neg(&self, a: &FqElem) -> FqElem {
        Fq::neg(self, *a)
    }
    fn mul(&self, a: &FqElem, b: &FqElem) -> FqElem {
        Fq::mul(self, *a, *b)
    }
    fn inv(&self, a: &FqElem) -> Option<FqElem> {
        Fq::inv(self, *a)
    }
    fn is_unit(&self, a: &FqElem) -> bool {
        !self.is_zero(*a)
    }
    fn from_int(&self, k: i64) -> FqElem {
        Fq::from_int(self, k)
    }
}

/// A Witt ring pinned at a fixed level, so it can act as a [`Ring`].
#[derive(Clone, Debug)]
pub struct WittAt {
    pub ctx: WittCtx,
    pub level: u8,
}

impl Ring for WittAt {
    type Elem = WittElem;

    fn zero(&self) -> WittElem {
        self.ctx.zero(self.level)
    }
    fn one(&self) -> WittElem {
        self.ctx.one(self.level)
    }
    fn add(&self, a: &WittElem, b: &WittElem) -> WittElem {
        self.ctx.add(*a, *b)
    }
    fn neg(&self, a: &WittElem) -> WittElem {
        self.ctx.neg(*a)
    }
    fn mul(&self, a: &WittElem, b: &WittElem) -> WittElem {
        self.ctx.mul(*a, *b)
    }
    fn inv(&self, a: &WittElem) -> Option<WittElem> {
        self.ctx.inv(*a)
    }
    fn is_unit(&self, a: &WittElem) -> bool {
        self.ctx.is_unit(*a)
    }
    fn from_int(&self, k: i64) -> WittElem {
        self.ctx.from_int(k as i128, self.level)
    }
}

impl Ring for SeriesRing {
    type Elem = TruncSeries;

    fn zero(&self) -> TruncSeries {
        SeriesRing::zero(self)
    }
    fn one(&self) -> TruncSeries {
        SeriesRing::one(self)
    }
    fn add(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        SeriesRing::add(self, a, b)
    }
    fn neg(&self, a: &TruncSeries) -> TruncSeries {
        SeriesRing::neg(self, a)
    }
    fn mul(&self, a: &TruncSeries, b: &TruncSeries) -> TruncSeries {
        SeriesRing::mul(self, a, b)
    }
    fn inv(&self, a: &TruncSeries) -> Option<TruncSeries> {
        SeriesRing::inv(self, a)
    }
    fn is_unit(&self, a: &TruncSeries) -> bool {
        SeriesRing::is_unit(self, a)
    }
    fn from_int(&self, k: i64) -> TruncSeries {
        SeriesRing::from_int(self, k as i128)
    }
}

/// Row-major 2x2 matrix: `e = [a, b, c, d]` is `(a b; c d)`.
#[derive(Clone, PartialEq, Debug)]
pub struct Mat2<E> {
    pub e: [E; 4],
}

impl<E> Mat2<E> {
    pub fn new(a: E, b: E, c: E, d: E) -> Mat2<E> {
        Mat2 { e: [a, b, c, d] }
    }
}

pub fn identity<R: Ring>(r: &R) -> Mat2<R::Elem> {
    Mat2::new(r.one(), r.zero(), r.zero(), r.one())
}

pub fn scalar<R: Ring>(r: &R, s: &R::Elem) -> Mat2<R::Elem> {
    Mat2::new(s.clone(), r.zero(), r.zero(), s.clone())
}

pub fn mat_add<R: Ring>(r: &R, x: &Mat2<R::Elem>, y: &Mat2<R::Elem>) -> Mat2<R::Elem> {
    Mat2 {
        e: [
            r.add(&x.e[0], &y.e[0]),
            r.add(&x.e[1], &y.e[1]),
            r.add(&x.e[2], &y.e[2]),
            r.add(&x.e[3], &y.e[3]),
        ],
    }
}

pub fn mat_sub<R: Ring>(r: &R, x: &Mat2<R::Elem>, y: &Mat2<R::Elem>) -> Mat2<R::Elem> {
    Mat2 {
        e: [
            r.sub(&x.e[0], &y.e[0]),
            r.sub(&x.e[1], &y.e[1]),
            r.sub(&x.e[2], &y.e[2]),
            r.sub(&x.e[3], &y.e[3]),
        ],
    }
}

pub fn mat_mul<R: Ring>(r: &R, x: &Mat2<R::Elem>, y: &Mat2<R::Elem>) -> Mat2<R::Elem> {
    let [a, b, c, d] = &x.e;
    let [e, f, g, h] = &y.e;
    Mat2 {
        e: [
            r.add(&r.mul(a, e), &r.mul(b, g)),
            r.add(&r.mul(a, f), &r.mul(b, h)),
            r.add(&r.mul(c, e), &r.mul(d, g)),
            r.add(&r.mul(c, f), &r.mul(d, h)),
        ],
    }
}

pub fn mat_scale<R: Ring>(r: &R, s: &R::Elem, x: &Mat2<R::Elem>) -> Mat2<R::Elem> {
    Mat2 {
        e: [
            r.mul(s, &x.e[0]),
            r.mul(s, &x.e[1]),
            r.mul(s, &x.e[2]),
            r.mul(s, &x.e[3]),
        ],
    }
}

pub fn det<R: Ring>(r: &R, x: &Mat2<R::Elem>) -> R::Elem {
    r.sub(&r.mul(&x.e[0], &x.e[3]), &r.mul(&x.e[1], &x.e[2]))
}

pub fn trace<R: Ring>(r: &R, x: &Mat2<R::Elem>) -> R::Elem {
    r.add(&x.e[0], &x.e[3])
}

pub fn mat_inv<R: Ring>(r: &R, x: &Mat2<R::Elem>) -> Option<Mat2<R::Elem>> {
    let di = r.inv(&det(r, x))?;
    Some(Mat2 {
        e: [
            r.mul(&di, &x.e[3]),
            r.neg(&r.mul(&di, &x.e[1])),
            r.neg(&r.mul(&di, &x.e[2])),
            r.mul(&di, &x.e[0]),
        ],
    })
}

pub fn mat_pow<R: Ring>(r: &R, x: &Mat2<R::Elem>, mut e: u64) -> Mat2<R::Elem> {
    let mut base = x.clone();
    let mut acc = identity(r);
    while e > 0 {
        if e & 1 == 1 {
            acc = mat_mul(r, &acc, &base);
        }
        base = mat_mul(r, &base, &base);
        e >>= 1;
    }
    acc
}

/// `g x g^{-1}`; panics when `g` is not invertible.
pub fn conj<R: Ring>(r: &R, g: &Mat2<R::Elem>, x: &Mat2<R::Elem>) -> Mat2<R::Elem> {
    let gi = mat_inv(r, g).expect("conjugating by a non-unit");
    mat_mul(r, &mat_mul(r, g, x), &gi)
}

pub fn is_identity<R: Ring>(r: &R, x: &Mat2<R::Elem>) -> bool {
    *x == identity(r)
}
