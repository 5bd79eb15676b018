//! Library surface behind the `bohmion-dyn` binary: scenario configuration,
//! deterministic artifact writing, scenario runners, and the verification
//! front end. The binary is a thin argument-parsing shell over these modules;
//! integration tests drive them directly.

pub mod config;
pub mod output;
pub mod run;
pub mod verify;
