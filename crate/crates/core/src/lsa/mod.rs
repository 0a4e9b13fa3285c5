//! The LSA recursion with Polyak–Ruppert averaging.

mod export;
mod run;
mod schedule;

pub use export::{read_trajectory, write_trajectory, MAGIC};
pub use run::{pr_error_projection, run_lsa, ChainStart, LsaRunner, LsaTrajectory, DIVERGENCE_BOUND};
pub use schedule::StepSchedule;
