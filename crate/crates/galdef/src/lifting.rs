//! The inductive lifting tower.
//!
//! Start from a reducible indecomposable `ρ̄ = (φ *; 0 1): G → GL₂(F_q)` and
//! the fixed determinant `θ`.  The tower climbs the coefficient rings
//! `R_n = W(F_q)[T_1,…,T_{n-1}]/(p,T)^n` one level at a time, keeping three
//! invariants: the lift is exact on every relator, the Selmer group of the
//! running local conditions has dimension exactly `n`, and every auxiliary
//! place stays inside its prescribed tamely ramified conjugacy family.
//!
//! One level `n → n+1` proceeds in four movements.
//!
//! 1. *Cleanup* ([`LevelWork::kill_sha`]): any everywhere-locally-trivial
//!    class of the six modules `U_1 ⊂ U_2 ⊂ X` and `V_1 ⊂ V_2 ⊂ X*(1)`
//!    would derail the duality bookkeeping later, so each one is killed by a
//!    trivial prime at which it does not vanish, imposed unramified forever.
//! 2. *Growth* ([`LevelWork::select_b`]): trivial primes with `q_v ≢ 1
//!    (mod p²)` and a two-line condition span raise the Selmer dimension by
//!    one each, from `n` to `n+1`, without disturbing the old classes (they
//!    are sampled to vanish at the new Frobenius).
//! 3. *Obstruction walk* ([`LevelWork::solve_level`]): the candidate
//!    `ρ_n ⊗ R_{n+1}` is normalized to determinant `θ` and its relator
//!    defects are solved one graded coordinate at a time — the small
//!    extension chain of `R_{n+1} → R_n` — against the pinned rows that keep
//!    every auxiliary place inside its family.  A coordinate whose defect
//!    escapes the reachable span triggers the pair machinery: two further
//!    primes carry cocycles `h^{v_1}, h^{v_2}` with prescribed restrictions,
//!    the combination `h = -h^{v_1} + 2·h^{v_2}` twists the candidate by
//!    `I + h·μ` at the stuck monomial `μ`, and the walk resumes on the
//!    enlarged group.
//! 4. *Certification* ([`LevelWork::finish`]): the corrected lift is
//!    verified on all relators, its projection down one level is compared
//!    with `ρ_n`, the conjugacy families are re-searched from scratch, and
//!    the Selmer dimension is recounted.
//!
//! Everything here is exact arithmetic; randomness enters only through the
//! seeded Chebotarev draws, so a run is reproducible from its configuration.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::adjoint::{adjoint_rep, dual_flag, dual_twist, mat_of_x, standard_flag, x_of_mat};
use crate::augment::{augment_group, extend_module, extend_residual};
use crate::chebotarev::{ChebotarevSampler, FrobConstraints};
use crate::cohomology::{cocycle_space, eval_flat, z1_matrix};
use crate::error::{Error, Result};
use crate::fq::{Fq, FqElem};
use crate::group::GroupSpec;
use crate::linalg::{
    coords_in_span, in_span, kernel_basis, mat_vec, rank, row_space, solve, vec_add, vec_is_zero,
    vec_scale, vec_sub, FqMat,
};
use crate::mat2::{self, Mat2};
use crate::module::GModule;
use crate::obstruction::{all_defects, apply_correction, det_normalize, LiftRep};
use crate::rep::{ResidualRep, Theta};
use crate::selmer::{
    chi_bar, choose_z_classes, cl_membership, class_rank, dual_selmer_group, restrict_flat,
    restrict_rows, selmer_group, sha1, split_dual_basis, LocalCondition, LocalStructure,
    TameShape, ZChoice,
};
use crate::series::{Monomial, SeriesRing, TruncSeries};
use crate::witt::WittCtx;
use crate::words::PWord;

/// Tuning knobs for a tower run.  All sampling is seeded; two runs with the
/// same configuration and instance produce identical towers.
#[derive(Clone, Debug, Serialize)]
pub struct LiftConfig {
    /// Master seed; every sampling site derives its own stream from it.
    pub seed: u64,
    /// Rejection budget per sampled prime.
    pub sample_budget: u64,
    /// Node budget per conjugacy-family membership search.
    pub membership_budget: u64,
    /// How many times a failed auxiliary construction is resampled before
    /// the failure is reported.
    pub max_retries: u32,
    /// Cap on cleanup primes per level.
    pub max_q1: usize,
    /// Cap on obstruction-absorbing pairs per level.
    pub max_pairs: u32,
}

impl Default for LiftConfig {
    fn default() -> Self {
        LiftConfig {
            seed: 0x11d4_c0de,
            sample_budget: 4_000_000,
            membership_budget: 50_000,
            max_retries: 4,
            max_q1: 24,
            max_pairs: 12,
        }
    }
}

/// How a tame place entered the tower.  The kind decides which rows the
/// place contributes to the correction systems and whether a conjugacy
/// family is tracked for it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PlaceKind {
    /// Base ramification of the starting instance; carries the full local
    /// condition and imposes nothing.
    Base,
    /// Cleanup prime: stays unramified forever.
    Cleanup,
    /// Selmer-growth prime.
    Auxiliary,
    /// First member of an obstruction-absorbing pair.
    PairFirst,
    /// Second member of an obstruction-absorbing pair.
    PairSecond,
}

impl PlaceKind {
    fn ramified_family(self) -> bool {
        matches!(self, PlaceKind::Auxiliary | PlaceKind::PairFirst | PlaceKind::PairSecond)
    }
}

/// Facts about the places the exact global model cannot see (the
/// decomposition group at `p` and the archimedean behaviour beyond the
/// parity word); supplied by the instance.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct LocalAtPFlags {
    /// `φ` restricted to a decomposition group at `p` agrees with the local
    /// cyclotomic character or its inverse.
    pub phi_locally_cyclotomic: bool,
    /// `ρ̄` is split at `p` with locally trivial `φ`.
    pub phi_locally_trivial: bool,
}

/// Outcome of the hypothesis audit: one flag per requirement plus a list of
/// human-readable failures.  The audit never errors — an instance that
/// violates a hypothesis is reported, not rejected mid-computation.
#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub odd_prime: bool,
    pub indecomposable: bool,
    pub phi_generates_coefficients: bool,
    pub phi_square_nontrivial: bool,
    pub phi_differs_from_cyclotomic: bool,
    /// `φ(σ_∞) = 1`: the even case, which activates the local-at-`p`
    /// exclusions below; in the odd case they are vacuous.
    pub even: bool,
    pub local_at_p_admissible: bool,
    pub failures: Vec<String>,
}

impl HypothesisReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Audit the running hypotheses on `(ρ̄, φ)`:
///
/// * `p ≥ 3`;
/// * `ρ̄` is indecomposable: no global change of basis splits off the
///   `φ`-line (equivalently the extension class `*` is not a multiple of
///   the coboundary `φ - 1`);
/// * the values of `φ` generate `F_q` over `F_p` multiplicatively;
/// * `φ² ≠ 1`, so the adjoint splits with distinct weights;
/// * `φ ∉ {χ̄, χ̄^{-1}}` as characters of the group;
/// * in the even case (`φ` trivial on the archimedean word) the supplied
///   local-at-`p` flags must both be clear.
pub fn verify_hypotheses(
    spec: &GroupSpec,
    rep: &ResidualRep,
    locs: &[LocalStructure],
    flags: &LocalAtPFlags,
) -> HypothesisReport {
    let fq = &rep.fq;
    let mut failures = Vec::new();

    let odd_prime = fq.p >= 3;
    if !odd_prime {
        failures.push("the residue characteristic must be odd".into());
    }

    // indecomposability: s(g) = x·(φ(g) - 1) for a single x across all
    // generators is exactly the coboundary condition on the extension class
    let indecomposable = !fq.elements().any(|x| {
        (0..rep.mats.len()).all(|i| {
            let want = fq.mul(x, fq.sub(rep.phi(i), fq.one()));
            rep.s(i) == want
        })
    });
    if !indecomposable {
        failures.push("the extension class splits: ρ̄ is decomposable".into());
    }

    // multiplicative closure of the φ-values, then its F_p-span
    let phi_generates_coefficients = {
        let mut closure: Vec<FqElem> = vec![fq.one()];
        loop {
            let mut grew = false;
            for i in 0..rep.mats.len() {
                for &c in closure.clone().iter() {
                    let prod = fq.mul(c, rep.phi(i));
                    if !closure.contains(&prod) {
                        closure.push(prod);
                        grew = true;
                    }
                }
            }
            if !grew {
                break;
            }
        }
        let fp = Fq::new(fq.p, 1).expect("prime field");
        let rows: Vec<Vec<FqElem>> = closure
            .iter()
            .map(|e| (0..fq.t).map(|i| fp.from_int(e.c[i] as i64)).collect())
            .collect();
        rank(&fp, &FqMat::from_rows(rows, fq.t)) == fq.t
    };
    if !phi_generates_coefficients {
        failures.push("the values of φ span a proper subfield".into());
    }

    let phi_square_nontrivial =
        (0..rep.mats.len()).any(|i| fq.mul(rep.phi(i), rep.phi(i)) != fq.one());
    if !phi_square_nontrivial {
        failures.push("φ² = 1: the adjoint weights collide".into());
    }

    let cb = chi_bar(spec, fq);
    let eq_chi = (0..rep.mats.len()).all(|i| rep.phi(i) == cb[i]);
    let eq_chi_inv = (0..rep.mats.len()).all(|i| {
        fq.inv(cb[i]).map_or(false, |c| rep.phi(i) == c)
    });
    let phi_differs_from_cyclotomic = !eq_chi && !eq_chi_inv;
    if !phi_differs_from_cyclotomic {
        failures.push("φ is the mod-p cyclotomic character or its inverse".into());
    }

    // parity: φ on the archimedean word, when the instance names one
    let even = locs
        .iter()
        .find(|l| !l.is_tame())
        .map_or(true, |l| {
            let m = rep.eval(&l.sigma);
            m.e[0] == fq.one()
        });
    let local_at_p_admissible =
        !even || (!flags.phi_locally_cyclotomic && !flags.phi_locally_trivial);
    if !local_at_p_admissible {
        failures.push(
            "even case with an excluded local-at-p shape (φ locally cyclotomic or trivial)"
                .into(),
        );
    }

    HypothesisReport {
        odd_prime,
        indecomposable,
        phi_generates_coefficients,
        phi_square_nontrivial,
        phi_differs_from_cyclotomic,
        even,
        local_at_p_admissible,
        failures,
    }
}

/// One line of the tower log: what a level added and how the bookkeeping
/// came out.  Values are rendered as strings so the log serializes without
/// carrying field contexts around.
#[derive(Clone, Debug, Serialize)]
pub struct LevelReport {
    pub level: u8,
    pub selmer_dim: usize,
    pub cleanup: Vec<String>,
    pub auxiliary: Vec<String>,
    pub pairs: Vec<(String, String)>,
    /// Prescribed local corrections at each pair firing: place label →
    /// rendered `(σ|τ)` value pair.
    pub z: Vec<(String, Vec<String>)>,
    /// The combining twist's values on Frobenius words of added places.
    pub h_sigma: Vec<(String, Vec<String>)>,
    /// ... and on their inertia words.
    pub h_tau: Vec<(String, Vec<String>)>,
    /// Rank of the raw defect of `ρ_n ⊗ R_{n+1}` before any correction.
    pub defect_rank: usize,
    pub memberships: Vec<(String, bool)>,
    pub irreducible: bool,
    pub notes: Vec<String>,
}

/// One rung of the tower: an exact lift over `R_n` with the group,
/// conditions, conjugacy-family witnesses, and history that certify it.
#[derive(Clone, Debug)]
pub struct TowerState {
    pub spec: GroupSpec,
    pub rep: ResidualRep,
    pub theta: Theta,
    pub x: GModule,
    pub locs: Vec<LocalStructure>,
    pub rho: LiftRep,
    pub level: u8,
    pub selmer_dim: usize,
    pub kinds: BTreeMap<String, PlaceKind>,
    /// Family witnesses: `P` with `P·ρ(σ_v)·P⁻¹ = diag(1, q_v)` exactly and
    /// `P·ρ(τ_v)·P⁻¹` lower unipotent, over the state ring.
    pub certs: BTreeMap<String, Mat2<TruncSeries>>,
    pub history: Vec<LevelReport>,
}

impl TowerState {
    /// The base rung: `ρ̄` itself over `R_1 = F_q`, with the instance's
    /// places marked as base ramification.  The level-one Selmer group must
    /// be a line — that is the `n = 1` case of the tower invariant.
    pub fn initial(spec: GroupSpec, rep: ResidualRep, locs: Vec<LocalStructure>) -> Result<TowerState> {
        rep.validate(&spec)?;
        let x = adjoint_rep(&rep)?;
        let theta = Theta::from_data(&rep, &spec);
        let ring = SeriesRing::new(WittCtx::new(rep.fq.clone()), 1, 0);
        let rho = LiftRep::from_residual(ring, &rep);
        rho.verify(&spec, &theta)?;
        let sel = selmer_group(&x, &spec.relators(1), &locs, rep.fq.t)?;
        if sel.dim_q != 1 {
            return Err(Error::BadInstance(format!(
                "the level-one Selmer group has dimension {}, not 1",
                sel.dim_q
            )));
        }
        let kinds = locs
            .iter()
            .map(|l| (l.label.clone(), PlaceKind::Base))
            .collect();
        Ok(TowerState {
            spec,
            rep,
            theta,
            x,
            locs,
            rho,
            level: 1,
            selmer_dim: 1,
            kinds,
            certs: BTreeMap::new(),
            history: Vec::new(),
        })
    }
}

/// An auxiliary cocycle ramified at one added place: the class `h^v` with
/// prescribed restrictions everywhere old and a genuinely ramified value at
/// its own inertia.
#[derive(Clone, Debug)]
pub struct AuxClass {
    pub label: String,
    /// Index of the place in the working `locs`.
    pub li: usize,
    /// Generator index of the inertia word.
    pub gen: usize,
    /// Flat cocycle values at the time of construction.
    pub flat: Vec<FqElem>,
    /// The inertia value's lower-triangular coordinate; nonzero by
    /// construction.
    pub s: FqElem,
}

/// A combined obstruction-absorbing pair: `h = -h^{v_1} + 2·h^{v_2}`.
#[derive(Clone, Debug)]
pub struct PairClass {
    pub first: AuxClass,
    pub second: AuxClass,
    pub h: Vec<FqElem>,
}

/// Outcome of the Selmer-preservation audit after a pair: either the group
/// is unchanged as a subspace of cohomology, or a violating class comes back
/// with its decomposition over the old classes, the coboundaries, and the
/// supplied explanation rows (normally `h^{v_1}, h^{v_2}`).
#[derive(Clone, Debug)]
pub struct PreservationOutcome {
    pub preserved: bool,
    pub violator: Option<Vec<FqElem>>,
    /// Coordinates of the violator over `[old | B¹ | explanations]` when it
    /// decomposes there — the certificate that the new class is the pair
    /// combination in disguise.
    pub decomposition: Option<Vec<FqElem>>,
}

/// Span-equality of the Selmer group across an augmentation: the old
/// representatives (zero-extended to the new generators) and the new ones
/// must generate the same subspace modulo coboundaries.
pub fn selmer_preservation_check(
    x: &GModule,
    relators: &[PWord],
    locs: &[LocalStructure],
    t: usize,
    before: &FqMat,
    explanations: &FqMat,
) -> Result<PreservationOutcome> {
    let fq = &x.fq;
    let width = x.acts.len() * x.dim;
    let cs = cocycle_space(x, relators);
    let after = selmer_group(x, relators, locs, t)?;

    let mut old_padded = FqMat::zeros(0, width);
    for r in 0..before.rows {
        let mut row = vec![fq.zero(); width];
        row[..before.cols].copy_from_slice(before.row(r));
        old_padded.push_row(&row);
    }

    let old_side = row_space(fq, &FqMat::stack(&old_padded, &cs.b1));
    let both = row_space(fq, &FqMat::stack(&old_side, &after.reps));
    let new_side = row_space(fq, &FqMat::stack(&after.reps, &cs.b1));

    if old_side.rows == both.rows && new_side.rows == both.rows {
        return Ok(PreservationOutcome { preserved: true, violator: None, decomposition: None });
    }

    // find a violating representative on whichever side grew
    let mut violator = None;
    for r in 0..after.reps.rows {
        if !in_span(fq, &old_side, after.reps.row(r)) {
            violator = Some(after.reps.row(r).to_vec());
            break;
        }
    }
    if violator.is_none() {
        for r in 0..old_padded.rows {
            if !in_span(fq, &new_side, old_padded.row(r)) {
                violator = Some(old_padded.row(r).to_vec());
                break;
            }
        }
    }
    let decomposition = violator.as_ref().and_then(|v| {
        let mut expl = FqMat::stack(&old_padded, &cs.b1);
        let mut padded_expl = FqMat::zeros(0, width);
        for r in 0..explanations.rows {
            let mut row = vec![fq.zero(); width];
            row[..explanations.cols].copy_from_slice(explanations.row(r));
            padded_expl.push_row(&row);
        }
        expl = FqMat::stack(&expl, &padded_expl);
        coords_in_span(fq, &expl, v)
    });
    Ok(PreservationOutcome { preserved: false, violator, decomposition })
}

fn residual_of(ring: &SeriesRing, m: &Mat2<TruncSeries>) -> Mat2<FqElem> {
    let one = Monomial::one(ring.vars);
    let r = |s: &TruncSeries| ring.witt.residue(ring.coeff(s, &one));
    Mat2::new(r(&m.e[0]), r(&m.e[1]), r(&m.e[2]), r(&m.e[3]))
}

fn lift_mat2(ring: &SeriesRing, up: &SeriesRing, m: &Mat2<TruncSeries>) -> Mat2<TruncSeries> {
    Mat2::new(
        ring.lift_into(&m.e[0], up),
        ring.lift_into(&m.e[1], up),
        ring.lift_into(&m.e[2], up),
        ring.lift_into(&m.e[3], up),
    )
}

/// Conjugation action of a residually invertible matrix on the traceless
/// coordinates `(e+, h, e-)`: the matrix `M` with `M·x(v) = x(P·v·P⁻¹)`.
fn ad_matrix(fq: &Fq, p: &Mat2<FqElem>) -> Result<FqMat> {
    let pinv = mat2::mat_inv(fq, p)
        .ok_or_else(|| Error::Domain("family witness is residually singular".into()))?;
    let mut cols = Vec::with_capacity(3);
    for j in 0..3 {
        let mut e = vec![fq.zero(); 3];
        e[j] = fq.one();
        let im = mat2::mat_mul(fq, &mat2::mat_mul(fq, p, &mat_of_x(fq, &e)), &pinv);
        cols.push(x_of_mat(fq, &im)?);
    }
    let rows = (0..3)
        .map(|i| vec![cols[0][i], cols[1][i], cols[2][i]])
        .collect();
    Ok(FqMat::from_rows(rows, 3))
}

/// `Σ_j c[j]·rows[base+j]` — a pinned functional in the witness frame.
fn combine_rows(fq: &Fq, c: &[FqElem], m: &FqMat, base: usize) -> Vec<FqElem> {
    let mut out = vec![fq.zero(); m.cols];
    for (j, &cj) in c.iter().enumerate() {
        out = vec_add(fq, &out, &vec_scale(fq, cj, m.row(base + j)));
    }
    out
}

/// Membership pins of one ramified place: the conjugation frame and the
/// top-graded residues of `P·ρ(σ)·P⁻¹ − diag(1, q_v)` and of the inertia
/// against its own lower-unipotent shadow.
struct PlacePins {
    li: usize,
    kind: PlaceKind,
    /// Residual frame matrix and its inverse (ramified kinds only).
    frame: Option<(FqMat, FqMat)>,
    /// Per graded coordinate: traceless coordinates of the Frobenius
    /// residue.  Empty for cleanup places.
    e_sig: Vec<Vec<FqElem>>,
    /// Same for inertia; the `e-` slot is zero by construction.
    e_tau: Vec<Vec<FqElem>>,
}

/// The assembled correction system of one group snapshot: cocycle rows for
/// the level-`n+1` relators stacked over the local pins, with the defect and
/// pin right-hand sides indexed by graded coordinate.
struct LevelSystem {
    sys: FqMat,
    z1m: FqMat,
    defects: Vec<Vec<Vec<FqElem>>>,
    places: Vec<PlacePins>,
}

impl LevelSystem {
    fn base_rhs(&self, fq: &Fq, g: usize) -> Vec<FqElem> {
        let minus = fq.sub(fq.zero(), fq.one());
        let mut rhs = Vec::new();
        for d in &self.defects {
            rhs.extend(vec_scale(fq, minus, &d[g]));
        }
        rhs
    }

    fn rhs(&self, fq: &Fq, g: usize) -> Vec<FqElem> {
        let minus = fq.sub(fq.zero(), fq.one());
        let mut rhs = self.base_rhs(fq, g);
        for pp in &self.places {
            match pp.kind {
                PlaceKind::Cleanup => rhs.extend(vec![fq.zero(); 3]),
                _ => {
                    rhs.extend(vec_scale(fq, minus, &pp.e_sig[g]));
                    rhs.push(fq.mul(minus, pp.e_tau[g][0]));
                    rhs.push(fq.mul(minus, pp.e_tau[g][1]));
                }
            }
        }
        rhs
    }
}

/// The in-progress level `n → n+1`: a mutable workspace holding the growing
/// group, conditions, and corrections.  [`LevelWork::finish`] folds it back
/// into an immutable [`TowerState`].
#[derive(Clone)]
pub struct LevelWork {
    cfg: LiftConfig,
    fq: Fq,
    t: usize,
    n: u8,
    state_ring: SeriesRing,
    up: SeriesRing,
    rho_n: LiftRep,
    old_gens: usize,
    pub spec: GroupSpec,
    pub rep: ResidualRep,
    pub theta: Theta,
    pub x: GModule,
    pub locs: Vec<LocalStructure>,
    kinds: BTreeMap<String, PlaceKind>,
    certs: BTreeMap<String, Mat2<TruncSeries>>,
    selmer_dim: usize,
    site: u64,
    /// Per graded coordinate: the solved correction (width at solve time).
    solved: Vec<Option<Vec<FqElem>>>,
    /// Twists applied to the candidate: `(coordinate, flat cocycle)`.
    twists: Vec<(usize, Vec<FqElem>)>,
    // log accumulators
    cleanup_added: Vec<String>,
    aux_added: Vec<String>,
    pairs: Vec<(String, String)>,
    zlog: Vec<(String, Vec<String>)>,
    hlog_sigma: Vec<(String, Vec<String>)>,
    hlog_tau: Vec<(String, Vec<String>)>,
    defect_rank: Option<usize>,
    notes: Vec<String>,
    prior_history: Vec<LevelReport>,
}

impl LevelWork {
    pub fn begin(state: &TowerState, cfg: &LiftConfig) -> Result<LevelWork> {
        if state.selmer_dim != state.level as usize {
            return Err(Error::ConditionViolation(format!(
                "entering level {}: Selmer dimension is {}, violating the tower invariant",
                state.level, state.selmer_dim
            )));
        }
        let n = state.level;
        let up = SeriesRing::new(state.rho.ring.witt.clone(), n + 1, n);
        let monos = up.graded_basis(n).len();
        let certs = state
            .certs
            .iter()
            .map(|(k, v)| (k.clone(), lift_mat2(&state.rho.ring, &up, v)))
            .collect();
        Ok(LevelWork {
            cfg: cfg.clone(),
            fq: state.rep.fq.clone(),
            t: state.rep.fq.t,
            n,
            state_ring: state.rho.ring.clone(),
            up,
            rho_n: state.rho.clone(),
            old_gens: state.spec.gens.len(),
            spec: state.spec.clone(),
            rep: state.rep.clone(),
            theta: state.theta.clone(),
            x: state.x.clone(),
            locs: state.locs.clone(),
            kinds: state.kinds.clone(),
            certs,
            selmer_dim: state.selmer_dim,
            site: 0,
            solved: vec![None; monos],
            twists: Vec::new(),
            cleanup_added: Vec::new(),
            aux_added: Vec::new(),
            pairs: Vec::new(),
            zlog: Vec::new(),
            hlog_sigma: Vec::new(),
            hlog_tau: Vec::new(),
            defect_rank: None,
            notes: Vec::new(),
            prior_history: state.history.clone(),
        })
    }

    fn rel1(&self) -> Vec<PWord> {
        self.spec.relators(1)
    }

    fn selmer(&self) -> Result<crate::selmer::SelmerSpace> {
        selmer_group(&self.x, &self.rel1(), &self.locs, self.t)
    }

    fn next_seed(&mut self) -> u64 {
        self.site += 1;
        self.cfg
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(((self.n as u64) << 32) | self.site)
    }

    fn width(&self) -> usize {
        3 * self.spec.gens.len()
    }

    /// Rebuild the working candidate over `R_{n+1}`: the canonical lift of
    /// `ρ_n`, identity on generators added this level, determinant
    /// normalized, with all solved corrections and twists folded in.
    fn candidate(&self) -> Result<LiftRep> {
        let mut mats = self.rho_n.lift_to(&self.up).mats;
        while mats.len() < self.spec.gens.len() {
            mats.push(mat2::identity(&self.up));
        }
        let mut lift = LiftRep::new(self.up.clone(), mats);
        det_normalize(&mut lift, &self.theta)?;
        let width = self.width();
        let monos = self.solved.len();
        let mut corr = vec![vec![self.fq.zero(); width]; monos];
        let mut any = false;
        for (g, h) in self.solved.iter().enumerate() {
            if let Some(h) = h {
                corr[g][..h.len()].copy_from_slice(h);
                any = true;
            }
        }
        for (g, h) in &self.twists {
            let row = &mut corr[*g];
            let re = vec_add(&self.fq, &row[..h.len()].to_vec(), h);
            row[..h.len()].copy_from_slice(&re);
            any = true;
        }
        if any {
            apply_correction(&mut lift, &corr, self.n);
        }
        Ok(lift)
    }

    /// Conjugacy-family filter for prime sampling: the word's image under
    /// the current candidate must already sit in the tame family of its own
    /// `q_v` at the full ring `R_{n+1}` — with trivial inertia, since the
    /// place is not yet ramified.
    fn family_filter(&self) -> Result<impl Fn(&GroupSpec, &PWord) -> bool> {
        let lift = self.candidate()?;
        let up = self.up.clone();
        let budget = self.cfg.membership_budget;
        Ok(move |spec: &GroupSpec, w: &PWord| {
            let qv = spec.chi_word(w).value(spec.p, spec.cap);
            if qv % (spec.p * spec.p) == 1 {
                return false; // degenerate family: no Frobenius direction
            }
            let sig = lift.eval(w);
            let tau = mat2::identity(&up);
            cl_membership(&up, &sig, &tau, &TameShape { l: qv, conjugated: true }, budget).member
        })
    }

    /// Extract the family witness for a sampled word from the current
    /// candidate — the filter already certified membership.
    fn witness_for(&self, word: &PWord) -> Result<Mat2<TruncSeries>> {
        let lift = self.candidate()?;
        let qv = self.spec.chi_word(word).value(self.spec.p, self.spec.cap);
        let mem = cl_membership(
            &self.up,
            &lift.eval(word),
            &mat2::identity(&self.up),
            &TameShape { l: qv, conjugated: true },
            self.cfg.membership_budget,
        );
        match (mem.member, mem.conjugator) {
            (true, Some(p)) => Ok(p),
            _ => Err(Error::ConditionViolation(
                "sampled word lost its family membership between filter and witness".into(),
            )),
        }
    }

    /// Adjoin a tame place: one new inertia generator, trivially extended
    /// module, residual, determinant, and lift data.
    fn augment_place(
        &mut self,
        label: &str,
        sigma: &PWord,
        condition: LocalCondition,
        kind: PlaceKind,
    ) -> Result<usize> {
        let loc = augment_group(&mut self.spec, label, sigma, condition);
        self.x = extend_module(&self.x)?;
        self.rep = extend_residual(&self.rep);
        self.theta = Theta::from_data(&self.rep, &self.spec);
        self.kinds.insert(label.to_string(), kind);
        self.locs.push(loc);
        Ok(self.locs.len() - 1)
    }

    /// Kill the everywhere-locally-trivial classes of the six modules
    /// `U_1 ⊂ U_2 ⊂ X` and `V_1 ⊂ V_2 ⊂ X*(1)` by cleanup primes: a class
    /// surviving every local condition is made to not vanish at a fresh
    /// trivial prime that is then imposed unramified, so the class acquires
    /// a nontrivial local image with trivial local cohomology to hide in.
    pub fn kill_sha(&mut self) -> Result<Vec<String>> {
        let mut added = Vec::new();
        loop {
            let rel1 = self.rel1();
            let chib = chi_bar(&self.spec, &self.fq);
            let (u1_rows, u2_rows) = standard_flag(&self.fq);
            let (v1_rows, v2_rows) = dual_flag(&self.fq);
            let xd = dual_twist(&self.x, &chib)?;
            let modules: Vec<(&str, GModule)> = vec![
                ("U1", self.x.submodule(&u1_rows)?),
                ("U2", self.x.submodule(&u2_rows)?),
                ("X", self.x.clone()),
                ("V1", xd.submodule(&v1_rows)?),
                ("V2", xd.submodule(&v2_rows)?),
                ("X*(1)", xd.clone()),
            ];
            let mut fired = false;
            for (name, module) in &modules {
                let sh = sha1(module, &rel1, &self.locs, self.t)?;
                if sh.dim_q == 0 {
                    continue;
                }
                if added.len() >= self.cfg.max_q1 {
                    return Err(Error::ConditionViolation(format!(
                        "locally trivial classes of {name} persist beyond the cleanup budget"
                    )));
                }
                let psi: Vec<FqElem> = sh.reps.row(0).to_vec();
                let seed = self.next_seed();
                let mut cons = FrobConstraints::trivial_prime(&self.rep);
                cons.split = vec![module];
                cons.nonvanish = vec![(module, psi)];
                let mut sampler = ChebotarevSampler::from_spec(&self.spec, 2, seed)?;
                let got = sampler.sample(&self.spec, &cons, self.cfg.sample_budget)?;
                drop(cons);
                let label = format!("u{}", self.spec.gens.len());
                self.augment_place(&label, &got.word, LocalCondition::Unramified, PlaceKind::Cleanup)?;
                added.push(label);
                fired = true;
                break;
            }
            if !fired {
                break;
            }
        }
        let sel = self.selmer()?;
        if sel.dim_q != self.selmer_dim {
            return Err(Error::ConditionViolation(format!(
                "cleanup moved the Selmer dimension from {} to {}",
                self.selmer_dim, sel.dim_q
            )));
        }
        self.cleanup_added.extend(added.iter().cloned());
        Ok(added)
    }

    /// Raise the Selmer dimension from `n` to `n+1` by trivial primes with
    /// `q_v ≢ 1 (mod p²)` carrying the two-line condition
    /// `⟨(e-|0), (0|e-)⟩`: each adds exactly the one-dimensional span of the
    /// extend-by-zero inertia class, and the old classes survive because
    /// they are sampled to vanish at the new Frobenius.
    pub fn select_b(&mut self) -> Result<Vec<String>> {
        let target = self.n as usize + 1;
        let mut added = Vec::new();
        let mut guard = 0;
        while self.selmer_dim < target {
            guard += 1;
            if guard > 8 {
                return Err(Error::ConditionViolation(
                    "growth primes failed to raise the Selmer dimension".into(),
                ));
            }
            let sel = self.selmer()?;
            let seed = self.next_seed();
            let filter = self.family_filter()?;
            let mut cons = FrobConstraints::trivial_prime(&self.rep);
            cons.chi_sharp_mod_p2 = true;
            cons.split = vec![&self.x];
            for r in 0..sel.reps.rows {
                cons.vanish.push((&self.x, sel.reps.row(r).to_vec()));
            }
            let mut sampler = ChebotarevSampler::from_spec(&self.spec, 2, seed)?;
            let got =
                sampler.sample_filtered(&self.spec, &cons, self.cfg.sample_budget, &filter)?;
            drop(cons);
            drop(filter);
            let witness = self.witness_for(&got.word)?;
            let label = format!("b{}", self.spec.gens.len());
            let span = self.ramified_span(true);
            self.augment_place(&label, &got.word, LocalCondition::Span(span), PlaceKind::Auxiliary)?;
            self.certs.insert(label.clone(), witness);
            let after = self.selmer()?;
            if after.dim_q != self.selmer_dim + 1 {
                return Err(Error::ConditionViolation(format!(
                    "growth prime {} moved the Selmer dimension from {} to {}",
                    label, self.selmer_dim, after.dim_q
                )));
            }
            self.selmer_dim = after.dim_q;
            added.push(label);
        }
        self.aux_added.extend(added.iter().cloned());
        Ok(added)
    }

    /// The stored condition span at a ramified auxiliary place: always the
    /// inertia line `(0|e-)`, plus the Frobenius line `(e-|0)` except at a
    /// pair's second member, whose asymmetry is what excludes the combined
    /// class from the Selmer group.
    fn ramified_span(&self, with_sigma_line: bool) -> FqMat {
        let fq = &self.fq;
        let mut rows = Vec::new();
        if with_sigma_line {
            let mut r = vec![fq.zero(); 6];
            r[2] = fq.one();
            rows.push(r);
        }
        let mut r = vec![fq.zero(); 6];
        r[5] = fq.one();
        rows.push(r);
        FqMat::from_rows(rows, 6)
    }

    /// Build one auxiliary class: sample a trivial prime `v` with
    /// `q_v ≢ 1 (mod p²)` whose Frobenius annihilates every global class of
    /// `X`, `U_1*`, `U_2*`, and the designated dual complement; adjoin it;
    /// then solve for a cocycle restricting to `z_w` at every old
    /// constrained place, with upper-triangular-trivial inertia and a
    /// nonzero lower-triangular inertia value.
    ///
    /// `prior` is the first member when building a pair's second: its class
    /// must additionally vanish at the new Frobenius, and the first member's
    /// extend-by-zero inertia class is pinned to the value `e+` there — the
    /// cross-condition that kills the symmetric combination.
    /// `value_pins` prescribes values at arbitrary known words, and
    /// `own_target` pins the class's value at its own Frobenius.
    pub fn build_hv(
        &mut self,
        z: &[(usize, Vec<FqElem>)],
        prior: Option<&AuxClass>,
        value_pins: &[(PWord, Vec<FqElem>)],
        own_target: Option<&[FqElem]>,
    ) -> Result<AuxClass> {
        let fq = self.fq.clone();
        let rel1 = self.rel1();
        let chib = chi_bar(&self.spec, &fq);
        let (u1_rows, u2_rows) = standard_flag(&fq);
        let u1s = dual_twist(&self.x.submodule(&u1_rows)?, &chib)?;
        let u2s = dual_twist(&self.x.submodule(&u2_rows)?, &chib)?;
        let xd = dual_twist(&self.x, &chib)?;
        let h1x = cocycle_space(&self.x, &rel1).h1;
        let h1u1s = cocycle_space(&u1s, &rel1).h1;
        let h1u2s = cocycle_space(&u2s, &rel1).h1;
        let dual = dual_selmer_group(&self.x, &xd, &rel1, &self.locs, self.t)?;
        let psi_split = split_dual_basis(&self.x, &xd, &self.locs, &dual.space.reps, z)?;
        if psi_split.is_none() && !z.is_empty() {
            self.notes.push(
                "dual pairing degenerate against the prescribed tuple; sampling without the \
                 nonvanishing dual constraint"
                    .into(),
            );
        }

        let seed = self.next_seed();
        let filter = self.family_filter()?;
        let mut cons = FrobConstraints::trivial_prime(&self.rep);
        cons.chi_sharp_mod_p2 = true;
        cons.split = vec![&self.x];
        for r in 0..h1x.rows {
            cons.vanish.push((&self.x, h1x.row(r).to_vec()));
        }
        for r in 0..h1u1s.rows {
            cons.vanish.push((&u1s, h1u1s.row(r).to_vec()));
        }
        for r in 0..h1u2s.rows {
            cons.vanish.push((&u2s, h1u2s.row(r).to_vec()));
        }
        if let Some((psi, others)) = &psi_split {
            cons.nonvanish.push((&xd, psi.clone()));
            for r in 0..others.rows {
                cons.vanish.push((&xd, others.row(r).to_vec()));
            }
        }
        if let Some(first) = prior {
            let mut padded = first.flat.clone();
            padded.resize(self.width(), fq.zero());
            cons.vanish.push((&self.x, padded));
            // the first member's extend-by-zero inertia class is pinned to
            // the value e+ at the new Frobenius: this is what bars the
            // symmetric combination from re-entering the Selmer group
            let mut g1 = vec![fq.zero(); self.width()];
            g1[3 * first.gen + 2] = fq.one();
            let mut eplus = vec![fq.zero(); 3];
            eplus[0] = fq.one();
            cons.pin.push((&self.x, g1, eplus));
        }
        let mut sampler = ChebotarevSampler::from_spec(&self.spec, 2, seed)?;
        let got = sampler.sample_filtered(&self.spec, &cons, self.cfg.sample_budget, &filter)?;
        drop(cons);
        drop(filter);

        let witness = self.witness_for(&got.word)?;
        let label = format!(
            "v{}{}",
            self.spec.gens.len(),
            if prior.is_some() { "b" } else { "a" }
        );
        let span = self.ramified_span(prior.is_none());
        let kind = if prior.is_some() { PlaceKind::PairSecond } else { PlaceKind::PairFirst };
        let li = self.augment_place(&label, &got.word.clone(), LocalCondition::Span(span), kind)?;
        self.certs.insert(label.clone(), witness);
        let gen = self.spec.gens.len() - 1;

        // the linear system for h^v on the enlarged group
        let rel1 = self.rel1();
        let width = self.width();
        let mut sys = z1_matrix(&self.x, &rel1);
        let mut rhs = vec![fq.zero(); sys.rows];
        for (wi, loc) in self.locs.iter().enumerate() {
            if wi == li || !loc.is_tame() {
                continue;
            }
            if matches!(self.kinds[&loc.label], PlaceKind::Base) {
                continue;
            }
            let rr = restrict_rows(&self.x, loc);
            let zw = z
                .iter()
                .find(|(i, _)| *i == wi)
                .map(|(_, v)| v.clone())
                .unwrap_or_else(|| vec![fq.zero(); 6]);
            for r in 0..rr.rows {
                sys.push_row(rr.row(r));
                rhs.push(zw[r]);
            }
        }
        // inertia at v: trivial upper-triangular part
        for c in 0..2 {
            let mut row = vec![fq.zero(); width];
            row[3 * gen + c] = fq.one();
            sys.push_row(&row);
            rhs.push(fq.zero());
        }
        // value pins at known words, and at the new Frobenius itself
        let fake = |w: &PWord| LocalStructure {
            label: String::new(),
            sigma: w.clone(),
            tau: None,
            q: 0,
            condition: LocalCondition::Full,
        };
        for (w, want) in value_pins {
            let rr = restrict_rows(&self.x, &fake(w));
            for r in 0..3 {
                sys.push_row(rr.row(r));
                rhs.push(want[r]);
            }
        }
        if let Some(tgt) = own_target {
            let loc = self.locs[li].clone();
            let rr = restrict_rows(&self.x, &fake(&loc.sigma));
            for r in 0..3 {
                sys.push_row(rr.row(r));
                rhs.push(tgt[r]);
            }
        }

        let s_index = 3 * gen + 2;
        let particular = solve(&fq, &sys, &rhs).ok_or_else(|| {
            Error::NoSolution(format!(
                "auxiliary class at {label}: the prescribed restrictions admit no cocycle"
            ))
        })?;
        let mut flat = particular;
        if fq.is_zero(flat[s_index]) {
            let ker = kernel_basis(&fq, &sys);
            let fix = (0..ker.rows).find(|&r| !fq.is_zero(ker.get(r, s_index)));
            match fix {
                Some(r) => flat = vec_add(&fq, &flat, ker.row(r)),
                None => {
                    return Err(Error::NoSolution(format!(
                        "auxiliary class at {label} cannot be made ramified: the inertia \
                         coordinate is forced to zero"
                    )))
                }
            }
        }
        let s = flat[s_index];

        // the class must escape the submodule filtration: rank 3 exactly
        let filtration = [u1_rows.clone(), u2_rows.clone(), FqMat::identity(&fq, 3)];
        let cr = class_rank(&self.x, &rel1, &filtration, &flat)?;
        if cr != 3 {
            return Err(Error::ConditionViolation(format!(
                "auxiliary class at {label} has filtration rank {cr}, not 3"
            )));
        }

        Ok(AuxClass { label, li, gen, flat, s })
    }

    /// Build and combine one obstruction-absorbing pair: `h^{v_1}` free at
    /// its own Frobenius, `h^{v_2}` with the triangular targets, and
    /// `h = -h^{v_1} + 2·h^{v_2}`, which restricts to `z_w` at every old
    /// constrained place and takes the prescribed values at the two new
    /// Frobenius words.
    pub fn combine_pair(
        &mut self,
        z: &[(usize, Vec<FqElem>)],
        t1: &[FqElem],
        t2: &[FqElem],
    ) -> Result<PairClass> {
        let fq = self.fq.clone();
        let inv2 = fq
            .inv(fq.from_int(2))
            .ok_or_else(|| Error::Domain("2 is not invertible".into()))?;
        let first = self.build_hv(z, None, &[], None)?;
        let sigma1 = self.locs[first.li].sigma.clone();
        let h1_at_s1: Vec<FqElem> = eval_flat(&self.x, &first.flat, &sigma1);
        let pin1 = (
            sigma1.clone(),
            vec_scale(&fq, inv2, &vec_add(&fq, t1, &h1_at_s1)),
        );
        let own2 = vec_scale(&fq, inv2, t2);
        let second = self.build_hv(z, Some(&first), &[pin1], Some(&own2))?;

        let width = self.width();
        let mut h = vec![fq.zero(); width];
        let minus = fq.sub(fq.zero(), fq.one());
        let mut first_padded = first.flat.clone();
        first_padded.resize(width, fq.zero());
        h = vec_add(&fq, &h, &vec_scale(&fq, minus, &first_padded));
        h = vec_add(&fq, &h, &vec_scale(&fq, fq.from_int(2), &second.flat));

        // certify the combination before anyone uses it
        let rel1 = self.rel1();
        let z1rows = z1_matrix(&self.x, &rel1);
        if !vec_is_zero(&mat_vec(&fq, &z1rows, &h)) {
            return Err(Error::ConditionViolation(
                "combined pair class fails the cocycle conditions".into(),
            ));
        }
        let h_at_s1 = eval_flat(&self.x, &h, &sigma1);
        let sigma2 = self.locs[second.li].sigma.clone();
        let h_at_s2 = eval_flat(&self.x, &h, &sigma2);
        if h_at_s1 != t1 || h_at_s2 != t2 {
            return Err(Error::ConditionViolation(format!(
                "combined pair class misses its Frobenius targets at {} or {}",
                first.label, second.label
            )));
        }
        for (wi, zw) in z {
            let got = restrict_flat(&self.x, &self.locs[*wi], &h);
            if &got != zw {
                return Err(Error::ConditionViolation(format!(
                    "combined pair class deviates from the prescribed restriction at {}",
                    self.locs[*wi].label
                )));
            }
        }
        Ok(PairClass { first, second, h })
    }

    /// The local conditions seen by the obstruction walk: at a ramified
    /// place the correction may only drift along the inertia line `(0|e-)`
    /// (absorbed by the family's free unipotent parameter), at a cleanup
    /// place only along unramified classes, and base places absorb
    /// anything.  These are the slack spans of the pinned rows, not the
    /// stored Selmer conditions.
    fn slack_locs(&self) -> Vec<LocalStructure> {
        let fq = &self.fq;
        self.locs
            .iter()
            .map(|loc| {
                let mut l = loc.clone();
                if !l.is_tame() {
                    return l;
                }
                match self.kinds[&l.label] {
                    PlaceKind::Base => {}
                    PlaceKind::Cleanup => l.condition = LocalCondition::Unramified,
                    _ => {
                        let mut r = vec![fq.zero(); 6];
                        r[5] = fq.one();
                        l.condition = LocalCondition::Span(FqMat::from_rows(vec![r], 6));
                    }
                }
                l
            })
            .collect()
    }

    /// Frobenius and inertia residues of one ramified place against its
    /// family shape, in the witness frame, per top graded coordinate.  The
    /// witness certifies exactness below the top, so extraction fails loudly
    /// if the certificate has been violated.
    fn membership_residues(&self, lift: &LiftRep, li: usize) -> Result<PlacePins> {
        let up = &self.up;
        let fq = &self.fq;
        let loc = &self.locs[li];
        let p_up = self
            .certs
            .get(&loc.label)
            .ok_or_else(|| {
                Error::ConditionViolation(format!("ramified place {} has no witness", loc.label))
            })?
            .clone();
        let pinv = mat2::mat_inv(up, &p_up)
            .ok_or_else(|| Error::Domain("family witness is not invertible".into()))?;
        let a_sig = mat2::mat_mul(up, &mat2::mat_mul(up, &p_up, &lift.eval(&loc.sigma)), &pinv);
        let tau_w = loc.tau.as_ref().expect("tame place has an inertia word");
        let a_tau = mat2::mat_mul(up, &mat2::mat_mul(up, &p_up, &lift.eval(tau_w)), &pinv);

        let k = self.n;
        let shape_sig = Mat2::new(
            up.from_int(1),
            up.from_int(0),
            up.from_int(0),
            up.from_int(loc.q as i128),
        );
        let e_sig_m = mat2::mat_sub(up, &a_sig, &shape_sig);
        let shape_tau = Mat2::new(up.from_int(1), up.from_int(0), a_tau.e[2].clone(), up.from_int(1));
        let e_tau_m = mat2::mat_sub(up, &a_tau, &shape_tau);

        let grade = |m: &Mat2<TruncSeries>| -> Result<Vec<Vec<FqElem>>> {
            let ca = up.extract_graded(&m.e[0], k)?;
            let cb = up.extract_graded(&m.e[1], k)?;
            let cc = up.extract_graded(&m.e[2], k)?;
            let cd = up.extract_graded(&m.e[3], k)?;
            (0..ca.len())
                .map(|g| x_of_mat(fq, &Mat2::new(ca[g], cb[g], cc[g], cd[g])))
                .collect()
        };
        let e_sig = grade(&e_sig_m).map_err(|e| {
            Error::ConditionViolation(format!(
                "place {}: Frobenius residue escapes the top graded piece ({e})",
                loc.label
            ))
        })?;
        let e_tau = grade(&e_tau_m).map_err(|e| {
            Error::ConditionViolation(format!(
                "place {}: inertia residue escapes the top graded piece ({e})",
                loc.label
            ))
        })?;

        let p0 = residual_of(up, &p_up);
        let frame = ad_matrix(fq, &p0)?;
        let frame_inv = mat2_frame_inv(fq, &frame)?;
        Ok(PlacePins {
            li,
            kind: self.kinds[&loc.label],
            frame: Some((frame, frame_inv)),
            e_sig,
            e_tau,
        })
    }

    /// Assemble the correction system of the current group snapshot.
    fn assemble(&self, lift: &LiftRep) -> Result<LevelSystem> {
        let rels = self.spec.relators(self.up.n);
        let z1m = z1_matrix(&self.x, &rels);
        let defects = all_defects(lift, &self.spec)?;
        let mut sys = z1m.clone();
        let mut places = Vec::new();
        for (li, loc) in self.locs.iter().enumerate() {
            if !loc.is_tame() {
                continue;
            }
            let kind = self.kinds[&loc.label];
            match kind {
                PlaceKind::Base => continue,
                PlaceKind::Cleanup => {
                    let rr = restrict_rows(&self.x, loc);
                    for r in 3..6 {
                        sys.push_row(rr.row(r));
                    }
                    places.push(PlacePins { li, kind, frame: None, e_sig: vec![], e_tau: vec![] });
                }
                _ => {
                    let pins = self.membership_residues(lift, li)?;
                    let rr = restrict_rows(&self.x, loc);
                    let (frame, _) = pins.frame.as_ref().expect("ramified pins carry a frame");
                    for i in 0..3 {
                        sys.push_row(&combine_rows(&self.fq, frame.row(i), &rr, 0));
                    }
                    for i in 0..2 {
                        sys.push_row(&combine_rows(&self.fq, frame.row(i), &rr, 3));
                    }
                    places.push(pins);
                }
            }
        }
        Ok(LevelSystem { sys, z1m, defects, places })
    }

    /// The wanted local value pair of the correction at one pinned place,
    /// given the unconstrained solution `c0` of the defect system at graded
    /// coordinate `g`: pinned coordinates take the membership values, free
    /// coordinates keep `c0`'s own.
    fn gap_targets(
        &self,
        system: &LevelSystem,
        c0: &[FqElem],
        g: usize,
    ) -> Result<Vec<(usize, Vec<FqElem>)>> {
        let fq = &self.fq;
        let minus = fq.sub(fq.zero(), fq.one());
        let mut targets = Vec::new();
        for pp in &system.places {
            let loc = &self.locs[pp.li];
            let r = restrict_flat(&self.x, loc, c0);
            let want: Vec<FqElem> = match pp.kind {
                PlaceKind::Cleanup => {
                    let mut w = r[..3].to_vec();
                    w.extend(vec![fq.zero(); 3]);
                    w
                }
                _ => {
                    let (frame, frame_inv) = pp.frame.as_ref().expect("frame");
                    let want_sig =
                        mat_vec(fq, frame_inv, &vec_scale(fq, minus, &pp.e_sig[g]));
                    let mc0_tau = mat_vec(fq, frame, &r[3..6]);
                    let u = vec![
                        fq.mul(minus, pp.e_tau[g][0]),
                        fq.mul(minus, pp.e_tau[g][1]),
                        mc0_tau[2],
                    ];
                    let mut w = want_sig;
                    w.extend(mat_vec(fq, frame_inv, &u));
                    w
                }
            };
            let t = vec_sub(fq, &r, &want);
            if !vec_is_zero(&t) {
                targets.push((pp.li, t));
            }
        }
        Ok(targets)
    }

    /// Walk the small-extension chain of `R_{n+1} → R_n`: solve the defect
    /// of each graded coordinate against the family pins, and when a
    /// coordinate's wanted corrections escape the reachable span, absorb
    /// them with a pair and re-attempt on the enlarged group.
    pub fn solve_level(&mut self) -> Result<()> {
        let monos = self.solved.len();
        let mut g = 0usize;
        let mut fired = 0u32;
        'walk: while g < monos {
            let lift = self.candidate()?;
            let system = self.assemble(&lift)?;
            if self.defect_rank.is_none() {
                let rows: Vec<Vec<FqElem>> =
                    (0..monos).map(|gg| system.base_rhs(&self.fq, gg)).collect();
                let cols = rows.first().map_or(0, |r| r.len());
                self.defect_rank = Some(rank(&self.fq, &FqMat::from_rows(rows, cols)));
            }
            while g < monos {
                let rhs = system.rhs(&self.fq, g);
                if let Some(h) = solve(&self.fq, &system.sys, &rhs) {
                    self.solved[g] = Some(h);
                    g += 1;
                    continue;
                }
                let base = system.base_rhs(&self.fq, g);
                let c0 = solve(&self.fq, &system.z1m, &base).ok_or_else(|| {
                    Error::Obstructed(format!(
                        "graded coordinate {g}: defect lies outside the image of the \
                         free-derivative map"
                    ))
                })?;
                let targets = self.gap_targets(&system, &c0, g)?;
                if targets.is_empty() {
                    return Err(Error::Obstructed(format!(
                        "graded coordinate {g}: pins unreachable yet no local deviation found"
                    )));
                }
                let rels = self.spec.relators(self.up.n);
                match choose_z_classes(&self.x, &rels, &self.slack_locs(), &targets)? {
                    ZChoice::InSpan { global } => {
                        let h = vec_sub(&self.fq, &c0, &global);
                        let back = mat_vec(&self.fq, &system.sys, &h);
                        if back != rhs {
                            return Err(Error::ConditionViolation(format!(
                                "graded coordinate {g}: the in-span decomposition escapes \
                                 its slack"
                            )));
                        }
                        self.solved[g] = Some(h);
                        g += 1;
                    }
                    ZChoice::Tuple(z) => {
                        if fired >= self.cfg.max_pairs {
                            return Err(Error::Obstructed(format!(
                                "graded coordinate {g}: obstruction persists after {fired} \
                                 absorbing pairs"
                            )));
                        }
                        fired += 1;
                        self.absorb_with_pair(&z, g)?;
                        continue 'walk;
                    }
                }
            }
        }
        Ok(())
    }

    /// Fire the pair machinery for one stuck coordinate: build the pair
    /// with zero Frobenius targets, audit Selmer preservation, twist the
    /// candidate by `I + h·μ_g`, and log everything.
    fn absorb_with_pair(&mut self, z: &[(usize, Vec<FqElem>)], g: usize) -> Result<()> {
        let fq = self.fq.clone();
        let zeros = vec![fq.zero(); 3];
        let sel_before = self.selmer()?;
        let mut last_err = None;
        for _ in 0..=self.cfg.max_retries {
            let checkpoint = self.clone();
            match self.combine_pair(z, &zeros, &zeros) {
                Ok(pc) => {
                    let expl = FqMat::from_rows(
                        vec![{
                            let mut f = pc.first.flat.clone();
                            f.resize(self.width(), fq.zero());
                            f
                        }, pc.second.flat.clone()],
                        self.width(),
                    );
                    let outcome = selmer_preservation_check(
                        &self.x,
                        &self.rel1(),
                        &self.locs,
                        self.t,
                        &sel_before.reps,
                        &expl,
                    )?;
                    if !outcome.preserved {
                        return Err(Error::ConditionViolation(format!(
                            "pair ({}, {}) moved the Selmer group{}",
                            pc.first.label,
                            pc.second.label,
                            match &outcome.decomposition {
                                Some(c) => format!(
                                    "; violator decomposes with coordinates {}",
                                    render_vec(&fq, c)
                                ),
                                None => String::new(),
                            }
                        )));
                    }
                    let after = self.selmer()?;
                    if after.dim_q != self.selmer_dim {
                        return Err(Error::ConditionViolation(format!(
                            "pair ({}, {}) moved the Selmer dimension from {} to {}",
                            pc.first.label, pc.second.label, self.selmer_dim, after.dim_q
                        )));
                    }
                    self.log_pair(&pc, z, g);
                    self.twists.push((g, pc.h));
                    return Ok(());
                }
                Err(
                    e @ (Error::NoSolution(_)
                    | Error::SamplingExhausted { .. }
                    | Error::DegenerateLocal(_)),
                ) => {
                    last_err = Some(e);
                    *self = checkpoint;
                    self.site += 7; // decorrelate the retry streams
                }
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or_else(|| {
            Error::Obstructed("pair construction failed with no sampling diagnostic".into())
        }))
    }

    fn log_pair(&mut self, pc: &PairClass, z: &[(usize, Vec<FqElem>)], g: usize) {
        let fq = &self.fq;
        self.pairs.push((pc.first.label.clone(), pc.second.label.clone()));
        for (wi, zv) in z {
            self.zlog.push((self.locs[*wi].label.clone(), render_each(fq, zv)));
        }
        for loc in &self.locs {
            if !loc.is_tame() || matches!(self.kinds[&loc.label], PlaceKind::Base) {
                continue;
            }
            let hs = eval_flat(&self.x, &pc.h, &loc.sigma);
            let ht = eval_flat(&self.x, &pc.h, loc.tau.as_ref().expect("tame"));
            self.hlog_sigma.push((loc.label.clone(), render_each(fq, &hs)));
            self.hlog_tau.push((loc.label.clone(), render_each(fq, &ht)));
        }
        self.notes.push(format!("pair absorbed the obstruction at graded coordinate {g}"));
    }

    /// Certify the finished level and fold the workspace into the next
    /// tower rung.
    pub fn finish(mut self) -> Result<TowerState> {
        let lift = self.candidate()?;
        lift.verify(&self.spec, &self.theta)?;

        // compatibility with the rung below
        let down = lift.project_to(self.state_ring.n, self.state_ring.vars);
        for (i, m) in down.mats.iter().enumerate() {
            let want = if i < self.old_gens {
                self.rho_n.mats[i].clone()
            } else {
                mat2::identity(&self.state_ring)
            };
            if *m != want {
                return Err(Error::ConditionViolation(format!(
                    "projection to level {} deviates from the previous rung at generator {i}",
                    self.state_ring.n
                )));
            }
        }

        // family membership at every auxiliary ramified place, searched from
        // scratch: the witness bookkeeping must never substitute for the
        // real thing
        let mut memberships = Vec::new();
        for loc in &self.locs {
            if !loc.is_tame() || !self.kinds[&loc.label].ramified_family() {
                continue;
            }
            let mem = cl_membership(
                &self.up,
                &lift.eval(&loc.sigma),
                &lift.eval(loc.tau.as_ref().expect("tame")),
                &TameShape { l: loc.q, conjugated: true },
                self.cfg.membership_budget,
            );
            memberships.push((loc.label.clone(), mem.member));
            if !mem.member {
                return Err(Error::ConditionViolation(format!(
                    "place {} left its tame conjugacy family",
                    loc.label
                )));
            }
            if let Some(p) = mem.conjugator {
                self.certs.insert(loc.label.clone(), p);
            }
        }

        let sel = self.selmer()?;
        let target = self.n as usize + 1;
        if sel.dim_q != target {
            return Err(Error::ConditionViolation(format!(
                "level {} closes with Selmer dimension {}, wanted {}",
                self.up.n, sel.dim_q, target
            )));
        }

        let irreducible = is_irreducible(&lift);
        let report = LevelReport {
            level: self.up.n,
            selmer_dim: sel.dim_q,
            cleanup: self.cleanup_added.clone(),
            auxiliary: self.aux_added.clone(),
            pairs: self.pairs.clone(),
            z: self.zlog.clone(),
            h_sigma: self.hlog_sigma.clone(),
            h_tau: self.hlog_tau.clone(),
            defect_rank: self.defect_rank.unwrap_or(0),
            memberships,
            irreducible,
            notes: self.notes.clone(),
        };
        let mut history = self.prior_history;
        history.push(report);
        Ok(TowerState {
            spec: self.spec,
            rep: self.rep,
            theta: self.theta,
            x: self.x,
            locs: self.locs,
            rho: lift,
            level: self.up.n,
            selmer_dim: sel.dim_q,
            kinds: self.kinds,
            certs: self.certs,
            history,
        })
    }
}

fn mat2_frame_inv(fq: &Fq, frame: &FqMat) -> Result<FqMat> {
    // a 3×3 inverse via the solver: columns of the inverse solve against
    // the unit vectors
    let mut cols = Vec::with_capacity(3);
    for j in 0..3 {
        let mut e = vec![fq.zero(); 3];
        e[j] = fq.one();
        let c = solve(fq, frame, &e)
            .ok_or_else(|| Error::Domain("conjugation frame is singular".into()))?;
        cols.push(c);
    }
    let rows = (0..3)
        .map(|i| vec![cols[0][i], cols[1][i], cols[2][i]])
        .collect();
    Ok(FqMat::from_rows(rows, 3))
}

fn render_each(fq: &Fq, v: &[FqElem]) -> Vec<String> {
    v.iter().map(|e| fq.fmt_elem(*e)).collect()
}

fn render_vec(fq: &Fq, v: &[FqElem]) -> String {
    render_each(fq, v).join(", ")
}

/// One full level `n → n+1`.
pub fn lift_step(state: &TowerState, cfg: &LiftConfig) -> Result<TowerState> {
    let mut work = LevelWork::begin(state, cfg)?;
    work.kill_sha()?;
    work.select_b()?;
    work.solve_level()?;
    work.finish()
}

/// Audit the hypotheses, build the base rung, and climb to `n_max`.
pub fn run_tower(
    spec: &GroupSpec,
    rep: &ResidualRep,
    locs: &[LocalStructure],
    flags: &LocalAtPFlags,
    n_max: u8,
    cfg: &LiftConfig,
) -> Result<TowerState> {
    let audit = verify_hypotheses(spec, rep, locs, flags);
    if !audit.ok() {
        return Err(Error::BadInstance(format!(
            "hypotheses fail: {}",
            audit.failures.join("; ")
        )));
    }
    let mut state = TowerState::initial(spec.clone(), rep.clone(), locs.to_vec())?;
    while state.level < n_max {
        state = lift_step(&state, cfg)?;
    }
    Ok(state)
}

/// Does the lift stabilize no free line of rank one?  A stable primitive
/// line reduces to a stable residual line, so the candidates are exactly
/// the residually stable lines, each lifted layer by layer: in the chart
/// `v = (1, y)` the stability of `y` under `g = (a b; c d)` reads
/// `c + (d-a)·y − b·y² = 0`, whose layer-`k` piece is linear in the
/// degree-`k` correction with constant slope `(d̄ − ā − 2b̄y₀)`.  A line
/// survives all layers iff the representation is reducible.
pub fn is_irreducible(rho: &LiftRep) -> bool {
    let ring = &rho.ring;
    let fq = &ring.witt.fq;
    let res: Vec<Mat2<FqElem>> = rho.mats.iter().map(|m| residual_of(ring, m)).collect();

    let stable_a = |y: FqElem| {
        res.iter().all(|g| {
            let f = fq.sub(
                fq.add(g.e[2], fq.mul(fq.sub(g.e[3], g.e[0]), y)),
                fq.mul(g.e[1], fq.mul(y, y)),
            );
            fq.is_zero(f)
        })
    };
    let mut lines: Vec<Option<FqElem>> = fq.elements().filter(|&y| stable_a(y)).map(Some).collect();
    if res.iter().all(|g| fq.is_zero(g.e[1])) {
        lines.push(None); // the line at infinity, chart (x, 1) with x ∈ m
    }
    if lines.is_empty() {
        return true; // residually irreducible
    }
    lines.iter().all(|line| !line_lifts(rho, &res, *line))
}

/// Layer-by-layer lift of one residually stable line; `None` is the chart
/// at infinity.
fn line_lifts(rho: &LiftRep, res: &[Mat2<FqElem>], line: Option<FqElem>) -> bool {
    let ring = &rho.ring;
    let fq = &ring.witt.fq;
    let y0 = line.unwrap_or_else(|| fq.zero());

    // constant slopes per generator
    let slopes: Vec<FqElem> = res
        .iter()
        .map(|g| match line {
            Some(y) => fq.sub(fq.sub(g.e[3], g.e[0]), fq.mul(fq.add(g.e[1], g.e[1]), y)),
            None => fq.sub(g.e[0], g.e[3]),
        })
        .collect();

    let stability = |y: &TruncSeries, g: &Mat2<TruncSeries>| -> TruncSeries {
        match line {
            // c + (d - a)·y - b·y²
            Some(_) => ring.sub(
                &ring.add(&g.e[2], &ring.mul(&ring.sub(&g.e[3], &g.e[0]), y)),
                &ring.mul(&g.e[1], &ring.mul(y, y)),
            ),
            // b + (a - d)·x - c·x²  for v = (x, 1)
            None => ring.sub(
                &ring.add(&g.e[1], &ring.mul(&ring.sub(&g.e[0], &g.e[3]), y)),
                &ring.mul(&g.e[2], &ring.mul(y, y)),
            ),
        }
    };

    let mut y = match line {
        Some(_) => ring.inject_graded(&[y0], 0),
        None => ring.zero(),
    };
    for k in 1..ring.n {
        let monos = ring.graded_basis(k).len();
        let mut update = vec![fq.zero(); monos];
        for mu in 0..monos {
            let mut forced: Option<FqElem> = None;
            for (gi, g) in rho.mats.iter().enumerate() {
                let f = stability(&y, g);
                let coords = ring
                    .extract_graded(&f, k)
                    .expect("stability cleared below the current layer");
                let rhs = coords[mu];
                let j = slopes[gi];
                match (fq.is_zero(j), &forced) {
                    (true, _) => {
                        if !fq.is_zero(rhs) {
                            return false; // flat equation with a nonzero value
                        }
                    }
                    (false, None) => {
                        let w = fq.mul(fq.sub(fq.zero(), rhs), fq.inv(j).expect("nonzero slope"));
                        forced = Some(w);
                    }
                    (false, Some(w)) => {
                        if !fq.is_zero(fq.add(rhs, fq.mul(j, *w))) {
                            return false; // inconsistent across generators
                        }
                    }
                }
            }
            update[mu] = forced.unwrap_or_else(|| fq.zero());
        }
        y = ring.add(&y, &ring.inject_graded(&update, k));
    }
    // exact check: every stability value must vanish identically
    rho.mats.iter().all(|g| stability(&y, g) == ring.zero())
}
