//! Std companion of `drsc-core`: the pmf text format, the `DRSC` container,
//! Monte Carlo analysis with CSV output, property suites and the command
//! line.

pub mod analysis;
pub mod cli;
pub mod container;
pub mod pmf;
pub mod verify;
