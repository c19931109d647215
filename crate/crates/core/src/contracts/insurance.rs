//! Parametric rainfall insurance: a policy pays out when cumulative rainfall
//! over its coverage window falls strictly below the threshold.
//!
//! Trigger evaluation refuses incomplete data: every calendar day of the
//! window must have an observation, missing days are an error rather than a
//! guess. Payouts come from a premium pool; when the pool cannot cover all
//! triggered payouts it pays pro rata, floored to minor units, and the pool
//! settles exactly once.

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};

use crate::ledger::{AccountId, Currency, Ledger};
use crate::units::MinorUnits;

use super::ContractError;

#[derive(Debug, Clone, PartialEq)]
pub struct InsurancePolicy {
    id: String,
    holder: AccountId,
    region: String,
    window_start: NaiveDate,
    window_end: NaiveDate,
    threshold_mm: f64,
    payout: MinorUnits,
    premium: MinorUnits,
}

impl InsurancePolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        holder: AccountId,
        region: impl Into<String>,
        window_start: NaiveDate,
        window_end: NaiveDate,
        threshold_mm: f64,
        payout: MinorUnits,
        premium: MinorUnits,
    ) -> Result<Self, ContractError> {
        let id = id.into();
        if id.is_empty() {
            return Err(ContractError::InvalidPolicy(
                "policy id must not be empty".into(),
            ));
        }
        if window_start >= window_end {
            return Err(ContractError::InvalidPolicy(format!(
                "coverage window start {window_start} must precede its end {window_end}"
            )));
        }
        if !(threshold_mm.is_finite() && threshold_mm > 0.0) {
            return Err(ContractError::InvalidPolicy(format!(
                "rainfall threshold must be positive and finite, got {threshold_mm}"
            )));
        }
        if payout <= 0 {
            return Err(ContractError::InvalidPolicy(format!(
                "payout must be positive, got {payout}"
            )));
        }
        if premium < 0 {
            return Err(ContractError::InvalidPolicy(format!(
                "premium must be non-negative, got {premium}"
            )));
        }
        Ok(Self {
            id,
            holder,
            region: region.into(),
            window_start,
            window_end,
            threshold_mm,
            payout,
            premium,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn holder(&self) -> &AccountId {
        &self.holder
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn window_start(&self) -> NaiveDate {
        self.window_start
    }

    pub fn window_end(&self) -> NaiveDate {
        self.window_end
    }

    pub fn threshold_mm(&self) -> f64 {
        self.threshold_mm
    }

    pub fn payout(&self) -> MinorUnits {
        self.payout
    }

    pub fn premium(&self) -> MinorUnits {
        self.premium
    }
}

/// Daily rainfall for one region, strictly ordered by date.
#[derive(Debug, Clone, PartialEq)]
pub struct RainfallSeries {
    region: String,
    observations: Vec<(NaiveDate, f64)>,
}

impl RainfallSeries {
    pub fn new(
        region: impl Into<String>,
        observations: Vec<(NaiveDate, f64)>,
    ) -> Result<Self, ContractError> {
        for pair in observations.windows(2) {
            if pair[0].0 >= pair[1].0 {
                return Err(ContractError::InvalidSeries(format!(
                    "observations must be strictly increasing by date; {} is not before {}",
                    pair[0].0, pair[1].0
                )));
            }
        }
        for (date, mm) in &observations {
            if !(mm.is_finite() && *mm >= 0.0) {
                return Err(ContractError::InvalidSeries(format!(
                    "rainfall on {date} must be non-negative and finite, got {mm}"
                )));
            }
        }
        Ok(Self {
            region: region.into(),
            observations,
        })
    }

    pub fn region(&self) -> &str {
        &self.region
    }

    pub fn observations(&self) -> &[(NaiveDate, f64)] {
        &self.observations
    }

    /// Sum over every day in `[start, end]`, requiring full coverage.
    fn window_total(&self, start: NaiveDate, end: NaiveDate) -> Result<f64, ContractError> {
        let from = self.observations.partition_point(|(d, _)| *d < start);
        let mut expected = start;
        let mut total = 0.0;
        for (date, mm) in &self.observations[from..] {
            if *date > end {
                break;
            }
            if *date != expected {
                return Err(self.missing(expected));
            }
            total += mm;
            expected = date
                .checked_add_days(Days::new(1))
                .expect("calendar overflow");
        }
        if expected <= end {
            return Err(self.missing(expected));
        }
        Ok(total)
    }

    fn missing(&self, date: NaiveDate) -> ContractError {
        ContractError::MissingObservation {
            region: self.region.clone(),
            date,
        }
    }
}

/// True when cumulative rainfall over the policy window is strictly below
/// the threshold. A sum exactly at the threshold does not trigger.
pub fn evaluate_trigger(
    policy: &InsurancePolicy,
    series: &RainfallSeries,
) -> Result<bool, ContractError> {
    if series.region() != policy.region() {
        return Err(ContractError::RegionMismatch {
            expected: policy.region().to_owned(),
            got: series.region().to_owned(),
        });
    }
    let total = series.window_total(policy.window_start(), policy.window_end())?;
    Ok(total < policy.threshold_mm())
}

/// `date,mm` CSV with a header row; dates must be ISO and already sorted.
pub fn parse_rainfall_csv(
    region: impl Into<String>,
    text: &str,
) -> Result<RainfallSeries, ContractError> {
    let mut lines = text.lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((n, line)) if !line.trim().is_empty() => break (n, line),
            Some(_) => continue,
            None => {
                return Err(ContractError::InvalidSeries(
                    "rainfall file is empty".into(),
                ))
            }
        }
    };
    if header.1.trim() != "date,mm" {
        return Err(ContractError::InvalidSeries(format!(
            "line {}: expected header 'date,mm', got '{}'",
            header.0 + 1,
            header.1.trim()
        )));
    }
    let mut observations = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (date, mm) = line.split_once(',').ok_or_else(|| {
            ContractError::InvalidSeries(format!("line {}: expected 'date,mm'", n + 1))
        })?;
        let date: NaiveDate = date.trim().parse().map_err(|e| {
            ContractError::InvalidSeries(format!("line {}: bad date '{}': {e}", n + 1, date))
        })?;
        let mm: f64 = mm.trim().parse().map_err(|e| {
            ContractError::InvalidSeries(format!("line {}: bad rainfall '{}': {e}", n + 1, mm))
        })?;
        observations.push((date, mm));
    }
    RainfallSeries::new(region, observations)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PayoutRow {
    pub policy_id: String,
    pub triggered: bool,
    pub paid: MinorUnits,
}

/// Collects premiums at issuance and pays triggered policies at settlement.
#[derive(Debug, Clone, PartialEq)]
pub struct PremiumPool {
    pool_account: AccountId,
    policies: Vec<InsurancePolicy>,
    settled: bool,
}

impl PremiumPool {
    pub fn new(pool_account: AccountId) -> Self {
        Self {
            pool_account,
            policies: Vec::new(),
            settled: false,
        }
    }

    pub fn pool_account(&self) -> &AccountId {
        &self.pool_account
    }

    pub fn policies(&self) -> &[InsurancePolicy] {
        &self.policies
    }

    pub fn is_settled(&self) -> bool {
        self.settled
    }

    /// Accepts a policy and moves its premium from the holder to the pool.
    pub fn issue_policy(
        &mut self,
        ledger: &mut Ledger,
        policy: InsurancePolicy,
    ) -> Result<(), ContractError> {
        if self.settled {
            return Err(ContractError::PoolSettled);
        }
        if self.policies.iter().any(|p| p.id() == policy.id()) {
            return Err(ContractError::DuplicatePolicy(policy.id().to_owned()));
        }
        if ledger.account(policy.holder()).is_none() {
            return Err(ContractError::Ledger(
                crate::ledger::LedgerError::UnknownAccount(policy.holder().clone()),
            ));
        }
        if policy.premium() > 0 {
            ledger.transfer(
                policy.holder(),
                &self.pool_account,
                Currency::Stablecoin,
                policy.premium(),
                0,
            )?;
        }
        self.policies.push(policy);
        Ok(())
    }

    /// Evaluates every policy against its region's series and pays the
    /// triggered ones. All triggers are evaluated before any money moves, so
    /// a data error pays nobody. When intended payouts exceed the pool
    /// balance everyone triggered gets `floor(payout * balance / total)`.
    /// The pool settles exactly once.
    pub fn execute_payouts(
        &mut self,
        ledger: &mut Ledger,
        series_by_region: &BTreeMap<String, RainfallSeries>,
        now: NaiveDate,
    ) -> Result<Vec<PayoutRow>, ContractError> {
        if self.settled {
            return Err(ContractError::PoolSettled);
        }
        if let Some(last_end) = self.policies.iter().map(|p| p.window_end()).max() {
            if now < last_end {
                return Err(ContractError::WindowStillOpen { now, last_end });
            }
        }
        let mut triggered = Vec::with_capacity(self.policies.len());
        for policy in &self.policies {
            let series = series_by_region
                .get(policy.region())
                .ok_or_else(|| ContractError::MissingSeries(policy.region().to_owned()))?;
            triggered.push(evaluate_trigger(policy, series)?);
        }

        let total_intended: i128 = self
            .policies
            .iter()
            .zip(&triggered)
            .filter(|(_, t)| **t)
            .map(|(p, _)| p.payout() as i128)
            .sum();
        let balance = ledger.balance(&self.pool_account, Currency::Stablecoin)?;

        let mut rows = Vec::with_capacity(self.policies.len());
        for (policy, hit) in self.policies.iter().zip(&triggered) {
            let paid = if !*hit {
                0
            } else if total_intended <= balance as i128 {
                policy.payout()
            } else {
                // Integer pro rata: floor(payout * balance / total). The
                // floors guarantee the paid sum never exceeds the balance.
                (policy.payout() as i128 * balance as i128 / total_intended) as MinorUnits
            };
            if paid > 0 {
                ledger.transfer(
                    &self.pool_account,
                    policy.holder(),
                    Currency::Stablecoin,
                    paid,
                    0,
                )?;
            }
            rows.push(PayoutRow {
                policy_id: policy.id().to_owned(),
                triggered: *hit,
                paid,
            });
        }
        self.settled = true;
        Ok(rows)
    }
}
