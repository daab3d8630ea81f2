//! Experiment driver: artifact checks, query sweeps and strategy
//! feasibility runs behind the `dade` binary.

pub mod artifacts;
pub mod feasibility;
pub mod spec;
pub mod sweep;

pub use feasibility::{run_feasibility, FeasibilityData, FeasibilityRow};
pub use spec::{DcoKind, FeasibilitySpec, IndexKind, SweepSpec};
pub use sweep::{run_sweep, sweep_csv, IndexRef, SweepInputs, SweepRow};
