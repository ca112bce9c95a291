//! Exact-arithmetic laboratory for deforming a reducible two-dimensional
//! residual representation into an irreducible one, one infinitesimal layer
//! at a time.
//!
//! The base object is an upper-triangular representation
//! `rho_1 : G -> GL_2(F_q)`, `rho_1 = (phi *; 0 1)`, of a finitely presented
//! group carrying local structures (distinguished "decomposition" subgroup
//! data at a finite set of labels). The tower lifts `rho_1` through the rings
//! `R_n = W(F_q)[[T_1..T_{n-1}]] / (p, T_1..T_{n-1})^n`, keeping each lift
//! inside prescribed local deformation conditions, enlarging the group by
//! tame auxiliary generators when an obstruction or a missing deformation
//! direction demands it. Everything is exact: no floats, no approximations,
//! and every cohomological dimension used by the driver is recomputed and
//! asserted rather than assumed.

pub mod adjoint;
pub mod augment;
pub mod chebotarev;
pub mod cohomology;
pub mod error;
pub mod fq;
pub mod group;
pub mod lifting;
pub mod witt;
pub mod words;
pub mod series;
pub mod mat2;
pub mod module;
pub mod obstruction;
pub mod pairing;
pub mod rep;
pub mod linalg;
pub mod selmer;
