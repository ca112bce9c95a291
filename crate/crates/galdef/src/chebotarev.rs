//! Frobenius sampling in the Chebotarev distribution.
//!
//! The arithmetic the lifting tower consumes from a prime `v` is remarkably
//! small: a word σ_v in the global generators (a Frobenius of `v`), the
//! residue class q_v of `v` read off through the cyclotomic character, and
//! the position of σ_v relative to finitely many splitting conditions —
//! "`v` splits completely in Q(M)" means σ_v acts trivially on `M`, "`v`
//! does not split in the extension cut out by a class ψ" means ψ(σ_v) ≠ 0.
//! The density theorem says Frobenius classes of primes equidistribute over
//! the conjugacy classes of any finite quotient, so a uniform element of the
//! polycyclic sampling quotient is a faithful stand-in for "the Frobenius of
//! a random prime".
//!
//! Every constraint is evaluated on the designated normal-form *word* of the
//! sampled element, never on the element itself, so nothing downstream
//! depends on the quotient identifying more words than the presentation
//! does.  Sampling is rejection against the constraint list with an explicit
//! budget; when the quotient is small enough to enumerate, an exhausted
//! budget is settled exactly — either the class is empty and we report which
//! conditions conflict, or it is merely rare and we return a uniform draw
//! from the enumerated class, which is the same conditional distribution the
//! rejection loop targets.

use crate::cohomology::eval_flat;
use crate::error::{Error, Result};
use crate::fq::FqElem;
use crate::group::{GroupSpec, PolyElem, PolyQuotient, UnitSpec};
use crate::linalg::{vec_is_zero, FqMat};
use crate::mat2::identity;
use crate::module::GModule;
use crate::rep::ResidualRep;
use crate::words::PWord;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Quotients up to this order are enumerated to settle feasibility exactly.
const ENUM_MAX: u64 = 1 << 16;

/// One sampled Frobenius: the quotient element, its designated word, the
/// residue class of the prime, and how many draws the rejection loop used.
#[derive(Clone, Debug)]
pub struct FrobSample {
    pub elem: PolyElem,
    pub word: PWord,
    /// `q_v = χ̃(σ_v)`: the residue data of the prime at full precision.
    pub q: UnitSpec,
    pub tries: u64,
}

/// Splitting conditions cutting out a Chebotarev class.
///
/// All cocycles are flat vectors over the module's generator values.  The
/// value of a class at σ is representative-dependent in general, but under
/// the matching `split` condition the coboundaries vanish at σ and the
/// constraint is honestly a condition on the class.
#[derive(Clone, Default)]
pub struct FrobConstraints<'a> {
    /// ρ̄(σ) = 1: the prime splits completely in the residual field.
    pub rhobar_trivial: Option<&'a ResidualRep>,
    /// σ acts trivially on each listed module (splits completely in Q(M)).
    pub split: Vec<&'a GModule>,
    /// Cocycles whose value at σ must be nonzero (the prime does not split
    /// in the cyclic extension the class cuts out over Q(M)).
    pub nonvanish: Vec<(&'a GModule, Vec<FqElem>)>,
    /// Cocycles whose value at σ must vanish.
    pub vanish: Vec<(&'a GModule, Vec<FqElem>)>,
    /// Cocycles whose value at σ is pinned to an exact vector.
    pub pin: Vec<(&'a GModule, Vec<FqElem>, Vec<FqElem>)>,
    /// `q ≡ 1 mod p` — with `rhobar_trivial`, the trivial-prime condition.
    pub chi_one_mod_p: bool,
    /// `q ≢ 1 mod p²`, so the tame deformation problem at `v` does not
    /// degenerate.
    pub chi_sharp_mod_p2: bool,
}

impl<'a> FrobConstraints<'a> {
    /// The two bullets of the trivial-prime condition.
    pub fn trivial_prime(rep: &'a ResidualRep) -> FrobConstraints<'a> {
        FrobConstraints {
            rhobar_trivial: Some(rep),
            chi_one_mod_p: true,
            ..FrobConstraints::default()
        }
    }

    fn len(&self) -> usize {
        self.rhobar_trivial.is_some() as usize
            + self.split.len()
            + self.nonvanish.len()
            + self.vanish.len()
            + self.pin.len()
            + self.chi_one_mod_p as usize
            + self.chi_sharp_mod_p2 as usize
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.len());
        if self.rhobar_trivial.is_some() {
            out.push("rhobar trivial".into());
        }
        for i in 0..self.split.len() {
            out.push(format!("split[{i}]"));
        }
        for i in 0..self.nonvanish.len() {
            out.push(format!("nonvanish[{i}]"));
        }
        for i in 0..self.vanish.len() {
            out.push(format!("vanish[{i}]"));
        }
        for i in 0..self.pin.len() {
            out.push(format!("pin[{i}]"));
        }
        if self.chi_one_mod_p {
            out.push("q = 1 mod p".into());
        }
        if self.chi_sharp_mod_p2 {
            out.push("q != 1 mod p^2".into());
        }
        out
    }

    /// Evaluate every condition on a designated word, in `names` order.
    fn evaluate(&self, spec: &GroupSpec, w: &PWord) -> Vec<bool> {
        let mut out = Vec::with_capacity(self.len());
        if let Some(rep) = self.rhobar_trivial {
            out.push(rep.eval(w) == identity(&rep.fq));
        }
        for m in &self.split {
            out.push(m.act_word(w) == FqMat::identity(&m.fq, m.dim));
        }
        for (m, flat) in &self.nonvanish {
            out.push(!vec_is_zero(&eval_flat(m, flat, w)));
        }
        for (m, flat) in &self.vanish {
            out.push(vec_is_zero(&eval_flat(m, flat, w)));
        }
        for (m, flat, target) in &self.pin {
            out.push(eval_flat(m, flat, w) == *target);
        }
        if self.chi_one_mod_p || self.chi_sharp_mod_p2 {
            let chi = spec.chi_word(w);
            if self.chi_one_mod_p {
                out.push(chi.value(spec.p, 1) == 1);
            }
            if self.chi_sharp_mod_p2 {
                out.push(chi.value(spec.p, 2) != 1);
            }
        }
        out
    }

    pub fn holds(&self, spec: &GroupSpec, w: &PWord) -> bool {
        self.evaluate(spec, w).into_iter().all(|b| b)
    }
}

/// Seeded Frobenius source over a sampling quotient.  The sampler owns the
/// only mutable state (its RNG); everything it touches is immutable, so one
/// sampler per task is the whole concurrency story.
pub struct ChebotarevSampler {
    pub quotient: PolyQuotient,
    rng: ChaCha8Rng,
}

impl ChebotarevSampler {
    pub fn new(quotient: PolyQuotient, seed: u64) -> ChebotarevSampler {
        ChebotarevSampler { quotient, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn from_spec(spec: &GroupSpec, level: u8, seed: u64) -> Result<ChebotarevSampler> {
        Ok(ChebotarevSampler::new(spec.quotient(level)?, seed))
    }

    /// One uniform draw: the element and its designated word.
    pub fn draw(&mut self) -> (PolyElem, PWord) {
        let e = self.quotient.sample(&mut self.rng);
        let w = self.quotient.to_pword(&e);
        (e, w)
    }

    /// Sample a Frobenius from the Chebotarev class cut out by `cons`.
    ///
    /// Rejection sampling up to `budget` draws.  On exhaustion of an
    /// enumerable quotient the class is computed outright: if empty, the
    /// error lists how many elements satisfy each condition separately, so
    /// the conflicting combination is visible; if nonempty, a uniform member
    /// is returned.  On a quotient too large to enumerate, exhaustion is a
    /// resumable sampling failure.
    pub fn sample(
        &mut self,
        spec: &GroupSpec,
        cons: &FrobConstraints,
        budget: u64,
    ) -> Result<FrobSample> {
        self.sample_inner(spec, cons, budget, None)
    }

    /// Like [`sample`](Self::sample), with an extra word predicate evaluated
    /// only after every declared condition holds.  The predicate is opaque to
    /// the diagnostics except for a combined count, so keep the declarative
    /// constraints in `cons` whenever they fit.
    pub fn sample_filtered(
        &mut self,
        spec: &GroupSpec,
        cons: &FrobConstraints,
        budget: u64,
        extra: &dyn Fn(&GroupSpec, &PWord) -> bool,
    ) -> Result<FrobSample> {
        self.sample_inner(spec, cons, budget, Some(extra))
    }

    fn sample_inner(
        &mut self,
        spec: &GroupSpec,
        cons: &FrobConstraints,
        budget: u64,
        extra: Option<&dyn Fn(&GroupSpec, &PWord) -> bool>,
    ) -> Result<FrobSample> {
        for tries in 1..=budget {
            let (elem, word) = self.draw();
            if cons.holds(spec, &word) && extra.map_or(true, |f| f(spec, &word)) {
                let q = spec.chi_word(&word);
                return Ok(FrobSample { elem, word, q, tries });
            }
        }
        let order = self.quotient.order()?;
        if order <= ENUM_MAX {
            let (matches, counts) = self.enumerate_class(spec, cons, extra);
            if matches.is_empty() {
                let mut detail: Vec<String> = cons
                    .names()
                    .iter()
                    .zip(&counts)
                    .map(|(n, c)| format!("{n}: {c}/{order}"))
                    .collect();
                if extra.is_some() {
                    detail.push(format!(
                        "caller filter (jointly with the rest): {}/{order}",
                        counts.last().copied().unwrap_or(0)
                    ));
                }
                return Err(Error::NoSolution(format!(
                    "empty Chebotarev class; elements satisfying each condition alone: {}",
                    detail.join(", ")
                )));
            }
            let idx = matches[self.rng.gen_range(0..matches.len())];
            let elem = self.quotient.element_at(idx);
            let word = self.quotient.to_pword(&elem);
            let q = spec.chi_word(&word);
            return Ok(FrobSample { elem, word, q, tries: budget });
        }
        Err(Error::SamplingExhausted {
            tries: budget,
            context: format!(
                "Frobenius class not hit in {budget} draws over a quotient of order {order} \
                 (conditions: {})",
                cons.names().join(", ")
            ),
        })
    }

    /// Exhaustive pass over the quotient: indices of the class members and,
    /// per condition, how many elements satisfy it alone.  An extra filter,
    /// when present, appends one joint count and cuts the class itself.
    fn enumerate_class(
        &self,
        spec: &GroupSpec,
        cons: &FrobConstraints,
        extra: Option<&dyn Fn(&GroupSpec, &PWord) -> bool>,
    ) -> (Vec<u64>, Vec<u64>) {
        let order = self.quotient.order().expect("caller checked enumerability");
        let mut counts = vec![0u64; cons.len() + extra.is_some() as usize];
        let mut matches = Vec::new();
        for idx in 0..order {
            let e = self.quotient.element_at(idx);
            let w = self.quotient.to_pword(&e);
            let mut all = true;
            for (c, ok) in counts.iter_mut().zip(cons.evaluate(spec, &w)) {
                if ok {
                    *c += 1;
                } else {
                    all = false;
                }
            }
            if let Some(f) = extra {
                if all && f(spec, &w) {
                    *counts.last_mut().expect("extra slot") += 1;
                } else {
                    all = false;
                }
            }
            if all {
                matches.push(idx);
            }
        }
        (matches, counts)
    }
}

/// The trivial-prime test: σ_v acts trivially in the residual representation
/// (so `v` splits completely in its fixed field) and `q_v ≡ 1 mod p`.
pub fn is_trivial_prime(rep: &ResidualRep, sigma: &PWord, q: &UnitSpec) -> bool {
    rep.eval(sigma) == identity(&rep.fq) && q.value(rep.fq.p as u64, 1) == 1
}

/// One prime's worth of external arithmetic: a designated Frobenius word and
/// the residue data of the prime.  Records come from the sampler or are
/// ingested from tables computed elsewhere; either way the format carries one
/// redundancy — the residue class must be readable off the word through the
/// cyclotomic character — and `validate` enforces it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrimeRecord {
    pub label: String,
    pub sigma: PWord,
    pub q: UnitSpec,
}

impl PrimeRecord {
    pub fn from_sample(label: &str, s: &FrobSample) -> PrimeRecord {
        PrimeRecord { label: label.into(), sigma: s.word.clone(), q: s.q }
    }

    pub fn validate(&self, spec: &GroupSpec) -> Result<()> {
        if self.sigma.iter().any(|&(i, _)| i >= spec.gens.len()) {
            return Err(Error::Domain(format!(
                "record {}: Frobenius word references unknown generators",
                self.label
            )));
        }
        // compare values, not coordinates: (teich, exponent) pairs are not
        // unique representations of a unit
        let chi = spec.chi_word(&self.sigma);
        if chi.value(spec.p, spec.cap) != self.q.value(spec.p, spec.cap) {
            return Err(Error::Domain(format!(
                "record {}: residue data disagrees with the cyclotomic character of its word",
                self.label
            )));
        }
        Ok(())
    }
}

/// A batch of ingested prime records.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub records: Vec<PrimeRecord>,
}

impl Dataset {
    pub fn validate(&self, spec: &GroupSpec) -> Result<()> {
        let mut labels: Vec<&str> = self.records.iter().map(|r| r.label.as_str()).collect();
        labels.sort_unstable();
        labels.dedup();
        if labels.len() != self.records.len() {
            return Err(Error::Domain("duplicate prime labels in dataset".into()));
        }
        for r in &self.records {
            r.validate(spec)?;
        }
        Ok(())
    }
}
