//! Batch front-end for certification and attack experiments: parse a
//! config file, run the experiment grid, emit CSV.

pub mod commands;
pub mod config;

/// Exit code for configuration problems (missing file, parse error,
/// invalid keys).
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for runtime failures (rollout, solver, output I/O).
pub const EXIT_RUNTIME: i32 = 3;
