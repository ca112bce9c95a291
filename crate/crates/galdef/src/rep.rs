//! The residual representation and the determinant character of the tower.
//!
//! The residual object is a 2-dimensional representation over `F_q` of the
//! presented group, upper-triangular of the shape
//!
//! ```text
//!     g  |->  ( phi(g)  s(g) )
//!             (   0      1   )
//! ```
//!
//! i.e. a nonsplit extension of the trivial character by `phi`.  All lifts
//! in the tower are required to have determinant equal to the fixed
//! character
//!
//! ```text
//!     theta = [phi] · <chi~>,
//! ```
//!
//! the Teichmüller lift of `phi` times the principal-unit part of the
//! cyclotomic character; `theta` reduces to `phi` at level 1 and is given on
//! each generator by a Teichmüller coordinate in `F_q` and a `(1+p)`-power
//! exponent, so its value is available exactly at every level.

use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem};
use crate::group::{modpow, GroupSpec};
use crate::mat2::{identity, mat_sub, Mat2};
use crate::witt::{WittCtx, WittElem};
use crate::words::{eval_mat2, PWord};

#[derive(Clone, Debug)]
pub struct ResidualRep {
    pub fq: Fq,
    /// One matrix per generator of the ambient group data.
    pub mats: Vec<Mat2<FqElem>>,
}

impl ResidualRep {
    pub fn new(fq: Fq, mats: Vec<Mat2<FqElem>>) -> ResidualRep {
        ResidualRep { fq, mats }
    }

    /// The diagonal character `phi`.
    pub fn phi(&self, i: usize) -> FqElem {
        self.mats[i].e[0]
    }

    /// The top-right entries (the extension cocycle, valued in `F_q(phi)`).
    pub fn s(&self, i: usize) -> FqElem {
        self.mats[i].e[1]
    }

    pub fn eval(&self, w: &PWord) -> Mat2<FqElem> {
        eval_mat2(&self.fq, w, &self.mats)
    }

    /// Structural checks: shape, relators, and indecomposability.
    ///
    /// Indecomposability means the standard line is the *only* stable line,
    /// equivalently the system `w (1 - phi(g)) = s(g)` over all generators
    /// has no solution `w` in `F_q` (a solution would conjugate the image
    /// into diagonal matrices).
    pub fn validate(&self, spec: &GroupSpec) -> Result<()> {
        let fq = &self.fq;
        if self.mats.len() != spec.gens.len() {
            return Err(Error::BadRep("one matrix per generator required".into()));
        }
        for (i, m) in self.mats.iter().enumerate() {
            if !fq.is_zero(m.e[2]) || m.e[3] != fq.one() {
                return Err(Error::BadRep(format!(
                    "generator {} is not of the required triangular shape",
                    spec.gens[i].name
                )));
            }
            if fq.is_zero(m.e[0]) {
                return Err(Error::BadRep("phi value is zero".into()));
            }
        }
        for r in spec.relators(1) {
            let img = self.eval(&r);
            if !mat_sub(fq, &img, &identity(fq)).e.iter().all(|e| fq.is_zero(*e)) {
                return Err(Error::BadRep(format!("residual relator {r:?} fails")));
            }
        }
        // indecomposability: no consistent choice of w with
        // (1 - phi(g)) w = s(g) for every generator
        let mut w: Option<FqElem> = None;
        let mut consistent = true;
        for i in 0..self.mats.len() {
            let one_minus_phi = fq.sub(fq.one(), self.phi(i));
            if fq.is_zero(one_minus_phi) {
                if !fq.is_zero(self.s(i)) {
                    consistent = false;
                }
            } else {
                let cand = fq.div(self.s(i), one_minus_phi).unwrap();
                match w {
                    None => w = Some(cand),
                    Some(prev) if prev != cand => consistent = false,
                    _ => {}
                }
            }
        }
        if consistent {
            return Err(Error::BadRep(
                "representation is decomposable (a second stable line exists)".into(),
            ));
        }
        Ok(())
    }
}

/// The determinant character of the tower, exact at every level.
#[derive(Clone, Debug)]
pub struct Theta {
    /// Teichmüller coordinate per generator (equals `phi` there).
    pub teich: Vec<FqElem>,
    /// `(1+p)`-exponent per generator (the principal-unit part of the
    /// cyclotomic character).
    pub unit_exp: Vec<u64>,
}

impl Theta {
    pub fn from_data(rep: &ResidualRep, spec: &GroupSpec) -> Theta {
        let teich = (0..spec.gens.len()).map(|i| rep.phi(i)).collect();
        let unit_exp = spec.gens.iter().map(|g| g.chi_tilde.one_plus_p).collect();
        Theta { teich, unit_exp }
    }

    /// Value at a generator, at a coefficient level.
    pub fn value(&self, ctx: &WittCtx, i: usize, level: u8) -> WittElem {
        let p = ctx.p();
        let unit = modpow(1 + p, self.unit_exp[i], ctx.pk(level));
        let t = ctx.teichmuller(self.teich[i], level);
        ctx.mul(t, ctx.from_int(unit as i128, level))
    }

    /// Multiplicative extension to words.
    pub fn value_word(&self, ctx: &WittCtx, w: &PWord, level: u8) -> WittElem {
        let mut acc = ctx.one(level);
        for &(i, e) in w {
            let v = self.value(ctx, i, level);
            let ve = if e >= 0 {
                ctx.pow(v, e as u64)
            } else {
                ctx.pow(ctx.inv(v).expect("theta values are units"), e.unsigned_abs())
            };
            acc = ctx.mul(acc, ve);
        }
        acc
    }

    /// Residual reduction at level 1 must be `phi`; used as a sanity check.
    pub fn residual_matches_phi(&self, ctx: &WittCtx, rep: &ResidualRep) -> bool {
        (0..self.teich.len()).all(|i| ctx.residue(self.value(ctx, i, 1)) == rep.phi(i))
    }
}
