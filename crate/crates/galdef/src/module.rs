//! Finite-dimensional `F_q[G]`-modules, presented by the action matrices of
//! the group generators.
//!
//! Everything downstream (cohomology, local conditions, pairings) works with
//! coordinates relative to a fixed basis, so a module is just a list of
//! invertible matrices — one per generator, in the generator order of the
//! ambient group data — plus the routines for passing to submodules,
//! quotients, duals and character twists.

use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem};
use crate::linalg::{coords_in_span, kernel_basis, mat_scale, mat_sub, row_space, transpose, FqMat};
use crate::words::{fqmat_inv, word_act, PWord};

#[derive(Clone, Debug)]
pub struct GModule {
    pub fq: Fq,
    pub dim: usize,
    pub acts: Vec<FqMat>,
}

impl GModule {
    pub fn new(fq: Fq, acts: Vec<FqMat>) -> Result<GModule> {
        let dim = acts.first().map_or(0, |a| a.rows);
        for a in &acts {
            if a.rows != dim || a.cols != dim {
                return Err(Error::BadRep("module actions must be square of equal size".into()));
            }
            if fqmat_inv(&fq, a).is_none() {
                return Err(Error::BadRep("module action is not invertible".into()));
            }
        }
        Ok(GModule { fq, dim, acts })
    }

    /// Trivial module of a given dimension.
    pub fn trivial(fq: Fq, dim: usize, ngens: usize) -> GModule {
        let acts = (0..ngens).map(|_| FqMat::identity(&fq, dim)).collect();
        GModule { fq, dim, acts }
    }

    pub fn act_word(&self, w: &PWord) -> FqMat {
        word_act(&self.fq, w, &self.acts)
    }

    /// Row space of `G`-fixed vectors.
    pub fn fixed_points(&self) -> FqMat {
        let fq = &self.fq;
        let mut stacked = FqMat::zeros(0, self.dim);
        for a in &self.acts {
            let diff = mat_sub(fq, a, &FqMat::identity(fq, self.dim));
            // fixed vectors are left null vectors of (A - 1) acting on
            // column vectors; our convention keeps vectors as rows acted on
            // from the left, i.e. v fixed iff (A - 1) v^T = 0
            stacked = FqMat::stack(&stacked, &diff);
        }
        kernel_basis(fq, &stacked)
    }

    /// Is the row space of `rows` stable under every generator?
    pub fn is_invariant(&self, rows: &FqMat) -> bool {
        let fq = &self.fq;
        let space = row_space(fq, rows);
        for a in &self.acts {
            for i in 0..space.rows {
                let img = crate::linalg::mat_vec(fq, a, space.row(i));
                if !crate::linalg::in_span(fq, &space, &img) {
                    return false;
                }
            }
        }
        true
    }

    /// The submodule on an invariant row space, in the basis given by the
    /// rows.
    pub fn submodule(&self, rows: &FqMat) -> Result<GModule> {
        let fq = &self.fq;
        if !self.is_invariant(rows) {
            return Err(Error::BadRep("row space is not a submodule".into()));
        }
        let d = rows.rows;
        let mut acts = Vec::with_capacity(self.acts.len());
        for a in &self.acts {
            let mut sub = FqMat::zeros(d, d);
            for i in 0..d {
                let img = crate::linalg::mat_vec(fq, a, rows.row(i));
                let co = coords_in_span(fq, rows, &img)
                    .ok_or_else(|| Error::BadRep("image leaves the subspace".into()))?;
                // columns of the sub-action: image of basis vector i
                for (j, &c) in co.iter().enumerate() {
                    sub.set(j, i, c);
                }
            }
            acts.push(sub);
        }
        GModule::new(fq.clone(), acts)
    }

    /// The quotient by an invariant row space, in the basis of a chosen
    /// complement inside the standard basis.
    pub fn quotient(&self, rows: &FqMat) -> Result<(GModule, FqMat)> {
        let fq = &self.fq;
        if !self.is_invariant(rows) {
            return Err(Error::BadRep("row space is not a submodule".into()));
        }
        let comp = crate::linalg::complement_in(fq, rows, &FqMat::identity(fq, self.dim));
        let d = comp.rows;
        let full = FqMat::stack(rows, &comp);
        let mut acts = Vec::with_capacity(self.acts.len());
        for a in &self.acts {
            let mut q = FqMat::zeros(d, d);
            for i in 0..d {
                let img = crate::linalg::mat_vec(fq, a, comp.row(i));
                let co = coords_in_span(fq, &full, &img)
                    .ok_or_else(|| Error::BadRep("quotient basis failure".into()))?;
                for j in 0..d {
                    q.set(j, i, co[rows.rows + j]);
                }
            }
            acts.push(q);
        }
        Ok((GModule::new(fq.clone(), acts)?, comp))
    }

    /// Contragredient module: `g` acts on the dual basis by `(A_g^{-1})^T`.
    pub fn dual(&self) -> GModule {
        let fq = &self.fq;
        let acts = self
            .acts
            .iter()
            .map(|a| transpose(&fqmat_inv(fq, a).expect("module action invertible")))
            .collect();
        GModule { fq: fq.clone(), dim: self.dim, acts }
    }

    /// Twist by a character, given by its value at each generator.
    pub fn twist(&self, chars: &[FqElem]) -> GModule {
        let fq = &self.fq;
        let acts = self
            .acts
            .iter()
            .zip(chars)
            .map(|(a, &c)| mat_scale(fq, c, a))
            .collect();
        GModule { fq: fq.clone(), dim: self.dim, acts }
    }

    /// For a one-dimensional module: the character value at each generator.
    pub fn character(&self) -> Result<Vec<FqElem>> {
        if self.dim != 1 {
            return Err(Error::BadRep("character of a module of dimension != 1".into()));
        }
        Ok(self.acts.iter().map(|a| a.get(0, 0)).collect())
    }

    /// The scalar by which each generator acts, if the module is scalar.
    pub fn scalar_action(&self) -> Option<Vec<FqElem>> {
        let fq = &self.fq;
        let mut out = Vec::with_capacity(self.acts.len());
        for a in &self.acts {
            let s = a.get(0, 0);
            let expect = mat_scale(fq, s, &FqMat::identity(fq, self.dim));
            if mat_sub(fq, a, &expect).is_zero() {
                out.push(s);
            } else {
                return None;
            }
        }
        Some(out)
    }
}

/// Dimension of the space of coboundary values `{(g-1)m}` — the rank of the
/// stacked `(A_i - 1)`, equivalently `dim M - dim M^G`.
pub fn coboundary_rank(m: &GModule) -> usize {
    m.dim - m.fixed_points().rows
}

/// Multiply two modules' generator actions entrywise (tensor of a module
/// with a character given as a 1-dim module).
pub fn tensor_char(m: &GModule, chi: &GModule) -> Result<GModule> {
    if chi.dim != 1 || chi.acts.len() != m.acts.len() {
        return Err(Error::BadRep("tensor_char needs a matching 1-dim module".into()));
    }
    Ok(m.twist(&chi.character()?))
}

/// Check two modules have the same dimension and generator count.
pub fn same_shape(a: &GModule, b: &GModule) -> bool {
    a.dim == b.dim && a.acts.len() == b.acts.len()
}
