//! Deterministic contract engine over the ledger: purchase-order escrow and
//! parametric rainfall insurance. Contracts move money only through ledger
//! transfers, so every ledger invariant keeps holding underneath them.

mod escrow;
mod insurance;

pub use escrow::{EscrowContract, EscrowState, OracleAttestation, SettlementDecision};
pub use insurance::{
    evaluate_trigger, parse_rainfall_csv, InsurancePolicy, PayoutRow, PremiumPool, RainfallSeries,
};

use chrono::NaiveDate;
use thiserror::Error;

use crate::ledger::LedgerError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("escrow {id} cannot {action} while {state:?}")]
    InvalidTransition {
        id: String,
        state: EscrowState,
        action: &'static str,
    },
    #[error("attestation for contract {got} does not belong to escrow {expected}")]
    WrongContract { expected: String, got: String },
    #[error("attestation oracle {got} is not the registered oracle {expected}")]
    WrongOracle { expected: String, got: String },
    #[error("attestation dated {observed} arrived after the delivery deadline {deadline}")]
    AttestationLate {
        observed: NaiveDate,
        deadline: NaiveDate,
    },
    #[error("invalid attestation: {0}")]
    InvalidAttestation(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("duplicate policy id: {0}")]
    DuplicatePolicy(String),
    #[error("premium pool has already settled")]
    PoolSettled,
    #[error("cannot settle on {now}: the last coverage window runs through {last_end}")]
    WindowStillOpen { now: NaiveDate, last_end: NaiveDate },
    #[error("rainfall series for region {got} cannot evaluate a policy on region {expected}")]
    RegionMismatch { expected: String, got: String },
    #[error("rainfall series for region {region} has no observation for {date}")]
    MissingObservation { region: String, date: NaiveDate },
    #[error("no rainfall series bound for region {0}")]
    MissingSeries(String),
    #[error("invalid rainfall series: {0}")]
    InvalidSeries(String),
}
