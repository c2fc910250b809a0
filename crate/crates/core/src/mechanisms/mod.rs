//! Mechanism zoo: finite models for exact verification and an executable
//! Guess-and-Check with a Monte Carlo auditor.

mod audit;
mod dataset;
mod finite;
mod guess_check;

pub use audit::{
    audit_guess_and_check, audit_mechanism, clopper_pearson, AuditConfig, AuditReport, AuditVerdict, EventEstimate,
    EventFamily,
};
pub use dataset::{Comparison, Dataset, QueryScript, ScriptedQuery, Statistic, SCRIPT_FORMAT_VERSION};
pub use finite::{
    make_approx_rr, make_discrete_laplace, make_rr, make_svt_finite, FiniteModel, Grid, SvtConfig, HALTED, PASS,
    TRUNCATION_SCALES, WRONG,
};
pub use guess_check::{
    laplace_cdf, run_guess_and_check, run_on_values, sample_laplace, Answer, GuessCheck, GuessCheckConfig,
    GuessCheckState,
};
