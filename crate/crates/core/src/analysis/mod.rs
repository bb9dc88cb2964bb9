//! Executable checks of the analytical claims behind adder training.

pub mod gradcheck;
pub mod gradnorm;
pub mod props;
pub mod suite;
pub mod variance;

pub use gradcheck::{central_difference, finite_diff_check, relative_error, GradCheckReport};
pub use gradnorm::{grad_norm_table, GradNormRow, GradNormTable};
pub use props::{simulate_full_descent, simulate_sign_descent, ConvergenceTrace, Verdict};
pub use suite::{gradient_suite, ComponentCheck, SuiteConfig, COMPONENTS};
pub use variance::{variance_report, VarianceReport};
