//! Verification, simulation and instance generation behind the command line.

mod congest_cmd;
mod gen;
mod params;
mod verify;

pub use congest_cmd::{cmd_congest, CongestReport, CongestRun, GraphStats, STATE_TOLERANCE};
pub use gen::{cmd_gen, generate, GenRequest, GEN_TASKS};
pub use params::{is_prime, next_prime, parse_cycle_kind, Resolved, Task, TaskParams};
pub use verify::{
    attention_mass_violations, cmd_verify, instance_seed, with_workers, MismatchExample,
    VerifyReport, EXHAUSTIVE_LIMIT, REPORT_SCHEMA_VERSION, WORKERS_ENV,
};
