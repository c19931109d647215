//! Farm-level profit model with transaction costs and credit constraints,
//! plus the token rails it runs on: a two-currency ledger, purchase-order
//! escrow, parametric rainfall insurance, and a cross-border settlement
//! simulator that compares a correspondent-banking rail against a
//! stablecoin rail on common random draws.
//!
//! Everything is deterministic given a seed. Ledger money is integer minor
//! units; model quantities are `f64`.

pub mod contracts;
pub mod econ;
pub mod ledger;
pub mod optimizer;
pub mod rng;
pub mod settlement;
pub mod units;
