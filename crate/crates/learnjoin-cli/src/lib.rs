//! Library side of the `learnjoin` command: run configuration, execution,
//! CSV records, benchmark grids and self checks.

pub mod bench;
pub mod config;
pub mod exec;
pub mod record;
pub mod verify;
