//! Lévy fluctuation-theory laboratory.
//!
//! Ladder exponents and renewal measures from the Wiener–Hopf factorization,
//! Vigon's identities between `Π_X` and `Π_H`, first-passage probabilities,
//! `L^(α)`/`S^(α)` tail diagnostics, and an exact simulator for reflected
//! compound-Poisson paths and their excursions.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod ladder;
pub mod law;
pub mod model;
pub mod pathsim;
pub mod quad;
pub mod rng;
pub mod tails;

pub use error::{LabError, Result};
pub use ladder::{
    e0_residual, kappa_eval, pk_first_passage, renewal_measure, theorem_constants, vigon_forward_residual,
    vigon_inverse, wh_factorize, FirstPassageTable, LadderExponentData, LadderMeasure, LadderSide, RenewalDensity,
    RenewalGrid, TheoremConstants,
};
pub use law::{JumpLaw, TabulatedLaw};
pub use model::{
    classify_path_regularity, cramer_root, exp_moment, pi_tail, psi_eval, JumpComponent, LevyModel, ModelKind,
    MomentClass, MomentReport, RegularityCase, RegularityReport, Side,
};
pub use pathsim::{
    decompose_excursions, estimate_excursion_tail, estimate_first_passage, identity_b_check, simulate_path,
    theorem1_experiment, EventPath, ExcursionRecord, McEstimate, Method,
};
pub use tails::{conv_tail, lalpha_profile, potter_min_A, salpha_check, ClassReport, TailFunction, Verdict};
