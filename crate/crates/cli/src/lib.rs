//! Command-line front end for the farm finance model: scenario file schema,
//! command dispatch, and report serialization.

pub mod commands;
pub mod config;
