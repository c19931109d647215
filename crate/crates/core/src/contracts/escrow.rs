//! Purchase-order escrow: buyer funds a vault, a registered oracle attests
//! delivery, and settlement releases to the seller or refunds the buyer.
//!
//! Release is all-or-nothing: the full price goes to the seller only when
//! the measured quantity covers the order and quality passed; any shortfall
//! refunds the buyer in full. An unattested contract refunds once the
//! deadline passes and otherwise stays pending.

use chrono::NaiveDate;

use crate::ledger::{AccountId, Currency, Ledger, ESCROW_VAULT};
use crate::units::MinorUnits;

use super::ContractError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EscrowState {
    Created,
    Funded,
    Delivered,
    Released,
    Refunded,
}

impl EscrowState {
    pub fn is_terminal(&self) -> bool {
        matches!(self, Self::Released | Self::Refunded)
    }
}

impl std::fmt::Display for EscrowState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Self::Created => "created",
            Self::Funded => "funded",
            Self::Delivered => "delivered",
            Self::Released => "released",
            Self::Refunded => "refunded",
        };
        write!(f, "{name}")
    }
}

/// What a settlement attempt did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SettlementDecision {
    Released,
    Refunded,
    /// Funded, unattested, deadline not yet passed; nothing moved.
    Pending,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleAttestation {
    pub contract_id: String,
    pub measured_quantity: f64,
    pub quality_pass: bool,
    pub timestamp: NaiveDate,
    pub oracle_id: String,
}

impl OracleAttestation {
    pub fn new(
        contract_id: impl Into<String>,
        measured_quantity: f64,
        quality_pass: bool,
        timestamp: NaiveDate,
        oracle_id: impl Into<String>,
    ) -> Result<Self, ContractError> {
        if !(measured_quantity.is_finite() && measured_quantity >= 0.0) {
            return Err(ContractError::InvalidAttestation(format!(
                "measured quantity must be non-negative and finite, got {measured_quantity}"
            )));
        }
        Ok(Self {
            contract_id: contract_id.into(),
            measured_quantity,
            quality_pass,
            timestamp,
            oracle_id: oracle_id.into(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscrowContract {
    id: String,
    buyer: AccountId,
    seller: AccountId,
    price: MinorUnits,
    quantity_ordered: f64,
    quality_spec: String,
    deadline: NaiveDate,
    oracle_id: String,
    state: EscrowState,
    attestation: Option<OracleAttestation>,
}

impl EscrowContract {
    /// Registers a purchase order. No money moves until [`fund`].
    ///
    /// [`fund`]: EscrowContract::fund
    #[allow(clippy::too_many_arguments)]
    pub fn create(
        ledger: &Ledger,
        id: impl Into<String>,
        buyer: AccountId,
        seller: AccountId,
        price: MinorUnits,
        quantity_ordered: f64,
        quality_spec: impl Into<String>,
        deadline: NaiveDate,
        oracle_id: impl Into<String>,
    ) -> Result<Self, ContractError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ContractError::InvalidContract(
                "contract id must not be empty".into(),
            ));
        }
        for party in [&buyer, &seller] {
            if ledger.account(party).is_none() {
                return Err(ContractError::InvalidContract(format!(
                    "party {party} is not a ledger account"
                )));
            }
        }
        if price <= 0 {
            return Err(ContractError::InvalidContract(format!(
                "price must be positive, got {price}"
            )));
        }
        if !(quantity_ordered.is_finite() && quantity_ordered > 0.0) {
            return Err(ContractError::InvalidContract(format!(
                "ordered quantity must be positive and finite, got {quantity_ordered}"
            )));
        }
        Ok(Self {
            id,
            buyer,
            seller,
            price,
            quantity_ordered,
            quality_spec: quality_spec.into(),
            deadline,
            oracle_id: oracle_id.into(),
            state: EscrowState::Created,
            attestation: None,
        })
    }

    /// Locks the full price from the buyer into the escrow vault.
    pub fn fund(&mut self, ledger: &mut Ledger) -> Result<(), ContractError> {
        if self.state != EscrowState::Created {
            return Err(self.wrong_state("fund"));
        }
        ledger.transfer(
            &self.buyer,
            &AccountId::from(ESCROW_VAULT),
            Currency::Stablecoin,
            self.price,
            0,
        )?;
        self.state = EscrowState::Funded;
        Ok(())
    }

    /// Records the registered oracle's delivery measurement. Only accepted
    /// while funded, only from the registered oracle, only for this
    /// contract, and only dated on or before the deadline.
    pub fn submit_attestation(
        &mut self,
        attestation: OracleAttestation,
    ) -> Result<(), ContractError> {
        if self.state != EscrowState::Funded {
            return Err(self.wrong_state("accept an attestation"));
        }
        if attestation.contract_id != self.id {
            return Err(ContractError::WrongContract {
                expected: self.id.clone(),
                got: attestation.contract_id,
            });
        }
        if attestation.oracle_id != self.oracle_id {
            return Err(ContractError::WrongOracle {
                expected: self.oracle_id.clone(),
                got: attestation.oracle_id,
            });
        }
        if attestation.timestamp > self.deadline {
            return Err(ContractError::AttestationLate {
                observed: attestation.timestamp,
                deadline: self.deadline,
            });
        }
        self.attestation = Some(attestation);
        self.state = EscrowState::Delivered;
        Ok(())
    }

    /// Settles an attested contract on its attestation, or refunds an
    /// unattested one whose deadline has passed. Exactly one vault outflow
    /// ever happens per contract; afterwards the state is terminal and any
    /// further call is an error.
    pub fn settle(
        &mut self,
        ledger: &mut Ledger,
        now: NaiveDate,
    ) -> Result<SettlementDecision, ContractError> {
        match self.state {
            EscrowState::Delivered => {
                let attestation = self
                    .attestation
                    .as_ref()
                    .expect("delivered state always carries an attestation");
                let fulfilled = attestation.quality_pass
                    && attestation.measured_quantity >= self.quantity_ordered;
                let recipient = if fulfilled { &self.seller } else { &self.buyer };
                ledger.transfer(
                    &AccountId::from(ESCROW_VAULT),
                    recipient,
                    Currency::Stablecoin,
                    self.price,
                    0,
                )?;
                if fulfilled {
                    self.state = EscrowState::Released;
                    Ok(SettlementDecision::Released)
                } else {
                    self.state = EscrowState::Refunded;
                    Ok(SettlementDecision::Refunded)
                }
            }
            EscrowState::Funded => {
                if now > self.deadline {
                    ledger.transfer(
                        &AccountId::from(ESCROW_VAULT),
                        &self.buyer,
                        Currency::Stablecoin,
                        self.price,
                        0,
                    )?;
                    self.state = EscrowState::Refunded;
                    Ok(SettlementDecision::Refunded)
                } else {
                    Ok(SettlementDecision::Pending)
                }
            }
            EscrowState::Created | EscrowState::Released | EscrowState::Refunded => {
                Err(self.wrong_state("settle"))
            }
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn buyer(&self) -> &AccountId {
        &self.buyer
    }

    pub fn seller(&self) -> &AccountId {
        &self.seller
    }

    pub fn price(&self) -> MinorUnits {
        self.price
    }

    pub fn quantity_ordered(&self) -> f64 {
        self.quantity_ordered
    }

    pub fn quality_spec(&self) -> &str {
        &self.quality_spec
    }

    pub fn deadline(&self) -> NaiveDate {
        self.deadline
    }

    pub fn oracle_id(&self) -> &str {
        &self.oracle_id
    }

    pub fn state(&self) -> EscrowState {
        self.state
    }

    pub fn attestation(&self) -> Option<&OracleAttestation> {
        self.attestation.as_ref()
    }

    fn wrong_state(&self, action: &'static str) -> ContractError {
        ContractError::InvalidTransition {
            id: self.id.clone(),
            state: self.state,
            action,
        }
    }
}
