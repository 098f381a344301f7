//! Multiple testing with false discovery rate control.
//!
//! The centrepiece is the multiple-stage adaptive step-down procedure, which
//! compares the ordered p-values with `alpha_i = i q / (m + 1 - i (1 - q))`
//! and rejects the longest prefix that stays below them. Alongside it the
//! crate provides the linear step-up procedure, the two-stage adaptive
//! step-up procedure, a Storey-type adaptive procedure, the oracle that knows
//! the number of true nulls, and a step-down variant that stays valid under
//! positive regression dependence.
//!
//! [`simulate`] runs the equicorrelated Gaussian Monte Carlo study comparing
//! them, and [`exactref`] holds slow reference computations used in tests.

pub mod cli;
pub mod error;
pub mod exactref;
pub mod normal;
pub mod procedures;
pub mod pvalues;
pub mod simulate;

pub use error::{Error, Result};
pub use procedures::{
    apply, bh_constants, bh_procedure, check_theorem1_condition, ms_constants, ms_procedure,
    oracle_bh, prds_constants, prds_procedure, step_down, step_up, sts_procedure, two_stage_bky,
    Procedure, ProcedureOptions,
};
pub use pvalues::{
    sort_pvalues, validate_constants, ConfusionCounts, ConstantsFamily, CriticalConstants,
    OrderedPValues, PValueVector, RejectionSet, Truth,
};
