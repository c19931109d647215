//! Two-currency in-memory ledger with an issuer reserve.
//!
//! Money is integer minor units. Every operation validates completely before
//! touching state, so a failed call leaves the ledger exactly as it was.
//! Fees never vanish: transfer fees land in the fee sink and conversion
//! spreads stay with the fx desk, so totals per currency are conserved by
//! `transfer` and `fx_convert`. Stablecoin enters circulation only through
//! `mint`, which books an equal amount of fiat into the issuer reserve;
//! tokens held by the issuer reserve account do not count as circulating.
//!
//! Every applied operation is journaled. Replaying a journal against a fresh
//! ledger rebuilds the exact state, including the journal itself.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{snap_floor, MinorUnits};

pub const FEE_SINK: &str = "fee_sink";
pub const FX_DESK: &str = "fx_desk";
pub const ESCROW_VAULT: &str = "escrow_vault";
pub const ISSUER_RESERVE: &str = "issuer_reserve";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Currency {
    Local,
    Stablecoin,
}

impl fmt::Display for Currency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Local => write!(f, "local"),
            Self::Stablecoin => write!(f, "stablecoin"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccountRole {
    Farmer,
    Buyer,
    Processor,
    Cooperative,
    InsurerPool,
    EscrowVault,
    IssuerReserve,
    FeeSink,
    FxDesk,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountId(String);

impl AccountId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for AccountId {
    fn from(id: &str) -> Self {
        Self(id.to_owned())
    }
}

impl fmt::Display for AccountId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Account {
    id: AccountId,
    role: AccountRole,
    local: MinorUnits,
    stablecoin: MinorUnits,
}

impl Account {
    fn new(id: AccountId, role: AccountRole) -> Self {
        Self {
            id,
            role,
            local: 0,
            stablecoin: 0,
        }
    }

    pub fn id(&self) -> &AccountId {
        &self.id
    }

    pub fn role(&self) -> AccountRole {
        self.role
    }

    pub fn balance(&self, currency: Currency) -> MinorUnits {
        match currency {
            Currency::Local => self.local,
            Currency::Stablecoin => self.stablecoin,
        }
    }

    fn balance_mut(&mut self, currency: Currency) -> &mut MinorUnits {
        match currency {
            Currency::Local => &mut self.local,
            Currency::Stablecoin => &mut self.stablecoin,
        }
    }
}

/// Ledger-wide sums recorded with every journal entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub local_total: MinorUnits,
    pub stablecoin_total: MinorUnits,
    pub circulating_stablecoin: MinorUnits,
    pub reserve_fiat: MinorUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LedgerOp {
    OpenAccount {
        id: AccountId,
        role: AccountRole,
    },
    /// Local fiat entering from outside the ledger (genesis funding).
    DepositLocal {
        to: AccountId,
        amount: MinorUnits,
    },
    Mint {
        to: AccountId,
        amount: MinorUnits,
    },
    Transfer {
        from: AccountId,
        to: AccountId,
        currency: Currency,
        amount: MinorUnits,
        fee: MinorUnits,
    },
    FxConvert {
        account: AccountId,
        from_currency: Currency,
        to_currency: Currency,
        amount_in: MinorUnits,
        amount_out: MinorUnits,
        rate: f64,
        fee_rate: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalEntry {
    pub seq: u64,
    #[serde(flatten)]
    pub op: LedgerOp,
    pub totals: Totals,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LedgerError {
    #[error("unknown account: {0}")]
    UnknownAccount(AccountId),
    #[error("account already exists: {0}")]
    DuplicateAccount(AccountId),
    #[error("amount must be positive, got {0}")]
    NonPositiveAmount(MinorUnits),
    #[error("fee must be non-negative, got {0}")]
    NegativeFee(MinorUnits),
    #[error("insufficient funds: account {account} holds {available} {currency} but needs {required}")]
    InsufficientFunds {
        account: AccountId,
        currency: Currency,
        required: MinorUnits,
        available: MinorUnits,
    },
    #[error("unsupported conversion: {0} to {1}")]
    UnsupportedCurrencyPair(Currency, Currency),
    #[error("fx rate must be positive and finite, got {0}")]
    InvalidRate(f64),
    #[error("fee rate must lie in [0, 1), got {0}")]
    InvalidFeeRate(f64),
    #[error("amount overflows the ledger's integer range")]
    AmountOutOfRange,
    #[error("account {account} has a negative {currency} balance of {balance}")]
    NegativeBalance {
        account: AccountId,
        currency: Currency,
        balance: MinorUnits,
    },
    #[error("circulating stablecoin {circulating} exceeds the fiat reserve {reserve}")]
    ReserveViolation {
        circulating: MinorUnits,
        reserve: MinorUnits,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ledger {
    accounts: BTreeMap<AccountId, Account>,
    reserve_fiat: MinorUnits,
    journal: Vec<JournalEntry>,
}

impl Default for Ledger {
    fn default() -> Self {
        Self::new()
    }
}

impl Ledger {
    /// Empty ledger with the four system accounts already registered. The
    /// system accounts are genesis state, not journal entries, so replaying
    /// a journal against `new()` reproduces any ledger built from `new()`.
    pub fn new() -> Self {
        let mut accounts = BTreeMap::new();
        for (id, role) in [
            (FEE_SINK, AccountRole::FeeSink),
            (FX_DESK, AccountRole::FxDesk),
            (ESCROW_VAULT, AccountRole::EscrowVault),
            (ISSUER_RESERVE, AccountRole::IssuerReserve),
        ] {
            let id = AccountId::from(id);
            accounts.insert(id.clone(), Account::new(id, role));
        }
        Self {
            accounts,
            reserve_fiat: 0,
            journal: Vec::new(),
        }
    }

    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn balance(&self, id: &AccountId, currency: Currency) -> Result<MinorUnits, LedgerError> {
        self.accounts
            .get(id)
            .map(|a| a.balance(currency))
            .ok_or_else(|| LedgerError::UnknownAccount(id.clone()))
    }

    pub fn reserve_fiat(&self) -> MinorUnits {
        self.reserve_fiat
    }

    /// Stablecoin held outside the issuer reserve account.
    pub fn circulating_stablecoin(&self) -> MinorUnits {
        self.accounts
            .values()
            .filter(|a| a.role != AccountRole::IssuerReserve)
            .map(|a| a.stablecoin)
            .sum()
    }

    pub fn totals(&self) -> Totals {
        Totals {
            local_total: self.accounts.values().map(|a| a.local).sum(),
            stablecoin_total: self.accounts.values().map(|a| a.stablecoin).sum(),
            circulating_stablecoin: self.circulating_stablecoin(),
            reserve_fiat: self.reserve_fiat,
        }
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }

    /// One JSON object per line, in journal order.
    pub fn export_journal(&self) -> String {
        let mut out = String::new();
        for entry in &self.journal {
            out.push_str(&serde_json::to_string(entry).expect("journal entries serialize"));
            out.push('\n');
        }
        out
    }

    pub fn open_account(&mut self, id: AccountId, role: AccountRole) -> Result<(), LedgerError> {
        if self.accounts.contains_key(&id) {
            return Err(LedgerError::DuplicateAccount(id));
        }
        self.accounts
            .insert(id.clone(), Account::new(id.clone(), role));
        self.record(LedgerOp::OpenAccount { id, role });
        Ok(())
    }

    /// Local fiat entering from outside (bank deposit, harvest revenue).
    pub fn deposit_local(&mut self, to: &AccountId, amount: MinorUnits) -> Result<(), LedgerError> {
        require_positive(amount)?;
        let account = self.account_mut(to)?;
        account.local = account
            .local
            .checked_add(amount)
            .ok_or(LedgerError::AmountOutOfRange)?;
        self.record(LedgerOp::DepositLocal {
            to: to.clone(),
            amount,
        });
        Ok(())
    }

    /// Issues stablecoin against an equal fiat amount booked into the
    /// issuer reserve, keeping the reserve equal to everything ever minted.
    pub fn mint(&mut self, to: &AccountId, amount: MinorUnits) -> Result<(), LedgerError> {
        require_positive(amount)?;
        let new_reserve = self
            .reserve_fiat
            .checked_add(amount)
            .ok_or(LedgerError::AmountOutOfRange)?;
        let account = self.account_mut(to)?;
        account.stablecoin = account
            .stablecoin
            .checked_add(amount)
            .ok_or(LedgerError::AmountOutOfRange)?;
        self.reserve_fiat = new_reserve;
        self.record(LedgerOp::Mint {
            to: to.clone(),
            amount,
        });
        Ok(())
    }

    /// Moves `amount` of `currency` from `from` to `to`; the sender also
    /// pays `fee` into the fee sink, so `from` needs `amount + fee`.
    pub fn transfer(
        &mut self,
        from: &AccountId,
        to: &AccountId,
        currency: Currency,
        amount: MinorUnits,
        fee: MinorUnits,
    ) -> Result<(), LedgerError> {
        require_positive(amount)?;
        if fee < 0 {
            return Err(LedgerError::NegativeFee(fee));
        }
        let required = amount.checked_add(fee).ok_or(LedgerError::AmountOutOfRange)?;
        self.expect_account(to)?;
        let available = self.balance(from, currency)?;
        if available < required {
            return Err(LedgerError::InsufficientFunds {
                account: from.clone(),
                currency,
                required,
                available,
            });
        }
        let fee_sink = AccountId::from(FEE_SINK);
        self.apply_deltas(&[
            (from.clone(), currency, -required),
            (to.clone(), currency, amount),
            (fee_sink, currency, fee),
        ])?;
        self.record(LedgerOp::Transfer {
            from: from.clone(),
            to: to.clone(),
            currency,
            amount,
            fee,
        });
        Ok(())
    }

    /// Converts `amount` of `from_currency` into
    /// `floor(amount * rate * (1 - fee_rate))` of `to_currency` against the
    /// fx desk's inventory. The desk keeps the spread in the source
    /// currency, so both currencies are conserved.
    pub fn fx_convert(
        &mut self,
        account: &AccountId,
        from_currency: Currency,
        to_currency: Currency,
        amount: MinorUnits,
        rate: f64,
        fee_rate: f64,
    ) -> Result<MinorUnits, LedgerError> {
        if from_currency == to_currency {
            return Err(LedgerError::UnsupportedCurrencyPair(
                from_currency,
                to_currency,
            ));
        }
        require_positive(amount)?;
        if !(rate.is_finite() && rate > 0.0) {
            return Err(LedgerError::InvalidRate(rate));
        }
        if !(fee_rate.is_finite() && (0.0..1.0).contains(&fee_rate)) {
            return Err(LedgerError::InvalidFeeRate(fee_rate));
        }
        let net = amount as f64 * rate * (1.0 - fee_rate);
        if !net.is_finite() || net >= MinorUnits::MAX as f64 {
            return Err(LedgerError::AmountOutOfRange);
        }
        let amount_out = snap_floor(net);

        let available = self.balance(account, from_currency)?;
        if available < amount {
            return Err(LedgerError::InsufficientFunds {
                account: account.clone(),
                currency: from_currency,
                required: amount,
                available,
            });
        }
        let desk = AccountId::from(FX_DESK);
        let desk_inventory = self.balance(&desk, to_currency)?;
        if desk_inventory < amount_out {
            return Err(LedgerError::InsufficientFunds {
                account: desk.clone(),
                currency: to_currency,
                required: amount_out,
                available: desk_inventory,
            });
        }
        self.apply_deltas(&[
            (account.clone(), from_currency, -amount),
            (desk.clone(), from_currency, amount),
            (desk, to_currency, -amount_out),
            (account.clone(), to_currency, amount_out),
        ])?;
        self.record(LedgerOp::FxConvert {
            account: account.clone(),
            from_currency,
            to_currency,
            amount_in: amount,
            amount_out,
            rate,
            fee_rate,
        });
        Ok(amount_out)
    }

    /// Rebuilds a ledger by applying `ops` to a fresh one.
    pub fn replay<'a>(ops: impl IntoIterator<Item = &'a LedgerOp>) -> Result<Self, LedgerError> {
        let mut ledger = Self::new();
        for op in ops {
            match op {
                LedgerOp::OpenAccount { id, role } => ledger.open_account(id.clone(), *role)?,
                LedgerOp::DepositLocal { to, amount } => ledger.deposit_local(to, *amount)?,
                LedgerOp::Mint { to, amount } => ledger.mint(to, *amount)?,
                LedgerOp::Transfer {
                    from,
                    to,
                    currency,
                    amount,
                    fee,
                } => ledger.transfer(from, to, *currency, *amount, *fee)?,
                LedgerOp::FxConvert {
                    account,
                    from_currency,
                    to_currency,
                    amount_in,
                    rate,
                    fee_rate,
                    ..
                } => {
                    // amount_out is recomputed; determinism makes it equal.
                    ledger.fx_convert(
                        account,
                        *from_currency,
                        *to_currency,
                        *amount_in,
                        *rate,
                        *fee_rate,
                    )?;
                }
            }
        }
        Ok(ledger)
    }

    /// Structural invariants, re-checked by tests after every operation.
    pub fn check_invariants(&self) -> Result<(), LedgerError> {
        for account in self.accounts.values() {
            for currency in [Currency::Local, Currency::Stablecoin] {
                let balance = account.balance(currency);
                if balance < 0 {
                    return Err(LedgerError::NegativeBalance {
                        account: account.id.clone(),
                        currency,
                        balance,
                    });
                }
            }
        }
        let circulating = self.circulating_stablecoin();
        if circulating > self.reserve_fiat {
            return Err(LedgerError::ReserveViolation {
                circulating,
                reserve: self.reserve_fiat,
            });
        }
        Ok(())
    }

    fn account_mut(&mut self, id: &AccountId) -> Result<&mut Account, LedgerError> {
        self.accounts
            .get_mut(id)
            .ok_or_else(|| LedgerError::UnknownAccount(id.clone()))
    }

    fn expect_account(&self, id: &AccountId) -> Result<(), LedgerError> {
        if self.accounts.contains_key(id) {
            Ok(())
        } else {
            Err(LedgerError::UnknownAccount(id.clone()))
        }
    }

    /// Applies balance deltas all-or-nothing. Deltas to the same
    /// `(account, currency)` are merged first, so aliased parties (a
    /// self-transfer, the fee sink sending a payment) net out correctly;
    /// the merged result must leave every balance non-negative.
    fn apply_deltas(
        &mut self,
        deltas: &[(AccountId, Currency, MinorUnits)],
    ) -> Result<(), LedgerError> {
        let mut merged: BTreeMap<(&AccountId, Currency), MinorUnits> = BTreeMap::new();
        for (id, currency, delta) in deltas {
            self.expect_account(id)?;
            let entry = merged.entry((id, *currency)).or_insert(0);
            *entry = entry
                .checked_add(*delta)
                .ok_or(LedgerError::AmountOutOfRange)?;
        }
        let mut staged: Vec<(AccountId, Currency, MinorUnits)> = Vec::with_capacity(merged.len());
        for ((id, currency), delta) in &merged {
            let balance = self.accounts[*id].balance(*currency);
            let updated = balance
                .checked_add(*delta)
                .ok_or(LedgerError::AmountOutOfRange)?;
            if updated < 0 {
                return Err(LedgerError::InsufficientFunds {
                    account: (*id).clone(),
                    currency: *currency,
                    required: -*delta,
                    available: balance,
                });
            }
            staged.push(((*id).clone(), *currency, updated));
        }
        for (id, currency, updated) in staged {
            *self
                .accounts
                .get_mut(&id)
                .expect("validated above")
                .balance_mut(currency) = updated;
        }
        Ok(())
    }

    fn record(&mut self, op: LedgerOp) {
        let entry = JournalEntry {
            seq: self.journal.len() as u64,
            op,
            totals: self.totals(),
        };
        self.journal.push(entry);
    }
}

fn require_positive(amount: MinorUnits) -> Result<(), LedgerError> {
    if amount <= 0 {
        Err(LedgerError::NonPositiveAmount(amount))
    } else {
        Ok(())
    }
}
