//! Cross-border settlement: a correspondent-banking rail against a
//! stablecoin rail, compared trade by trade on common random draws.
//!
//! Each trade gets its own substream; both rails consume the same invoice
//! and the same uniform draw for their delay quantile, so a rail that is
//! componentwise cheaper and faster dominates on every single trade, not
//! just on average. Fees stay in integer minor units; delays are minutes.
//!
//! The measured mean fee gap between the rails can be folded back into the
//! farm model: it shrinks the fixed output cost, and an assumed fee
//! reduction fraction scales down the per-unit transaction cost.

use rand::Rng;
use thiserror::Error;

use crate::econ::{CostRegime, EconError, RegimeLabel};
use crate::rng;
use crate::units::{snap_floor, MinorUnits};

pub const MINUTES_PER_DAY: u64 = 1440;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SettlementError {
    #[error("invalid rail: {0}")]
    InvalidRail(String),
    #[error("uneconomic trade: fees {fees} exceed the invoice {invoice}")]
    UneconomicTrade {
        invoice: MinorUnits,
        fees: MinorUnits,
    },
    #[error("simulation needs at least one trade")]
    NoTrades,
    #[error("every trade on the {0} rail was uneconomic; means are undefined")]
    AllTradesExcluded(String),
    #[error("stablecoin rail came out costlier than the traditional rail (mean fee gap {0})")]
    StablecoinRailWorse(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("malformed event list: {0}")]
    MalformedEvents(String),
    #[error(transparent)]
    Econ(#[from] EconError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RailKind {
    Traditional,
    Stablecoin,
}

impl std::fmt::Display for RailKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Traditional => write!(f, "traditional"),
            Self::Stablecoin => write!(f, "stablecoin"),
        }
    }
}

/// Settlement delay family. All variants expose a quantile so two rails can
/// be coupled through one shared uniform draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelayDistribution {
    ConstantMinutes(u64),
    /// Uniform over whole minutes in `[min, max]`.
    UniformMinutes { min: u64, max: u64 },
    /// Uniform over whole days in `[min, max]`, reported in minutes.
    UniformDays { min: u64, max: u64 },
}

impl DelayDistribution {
    fn validate(&self) -> Result<(), SettlementError> {
        match self {
            Self::ConstantMinutes(_) => Ok(()),
            Self::UniformMinutes { min, max } | Self::UniformDays { min, max } => {
                if min > max {
                    Err(SettlementError::InvalidParameter(format!(
                        "delay range is inverted: min {min} > max {max}"
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }

    /// Delay in minutes at quantile `unit` in `[0, 1)`.
    pub fn delay_minutes(&self, unit: f64) -> u64 {
        match self {
            Self::ConstantMinutes(m) => *m,
            Self::UniformMinutes { min, max } => uniform_integer(*min, *max, unit),
            Self::UniformDays { min, max } => uniform_integer(*min, *max, unit) * MINUTES_PER_DAY,
        }
    }
}

fn uniform_integer(min: u64, max: u64, unit: f64) -> u64 {
    let span = (max - min + 1) as f64;
    let pick = min + (unit * span) as u64;
    pick.min(max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RailSpec {
    pub kind: RailKind,
    pub settlement_delay: DelayDistribution,
    /// Fraction of the invoice lost to currency conversion.
    pub fx_fee_rate: f64,
    /// Correspondent hops between the payer's and payee's banks.
    pub hops: u32,
    pub per_hop_fee: MinorUnits,
    /// Letter-of-credit style fixed cost; traditional rail only.
    pub fixed_instrument_cost: MinorUnits,
    /// Flat on-chain cost; stablecoin rail only.
    pub network_fee: MinorUnits,
}

impl RailSpec {
    pub fn validate(&self) -> Result<(), SettlementError> {
        self.settlement_delay.validate()?;
        if !(self.fx_fee_rate.is_finite() && (0.0..=1.0).contains(&self.fx_fee_rate)) {
            return Err(SettlementError::InvalidRail(format!(
                "fx_fee_rate must lie in [0, 1], got {}",
                self.fx_fee_rate
            )));
        }
        for (name, value) in [
            ("per_hop_fee", self.per_hop_fee),
            ("fixed_instrument_cost", self.fixed_instrument_cost),
            ("network_fee", self.network_fee),
        ] {
            if value < 0 {
                return Err(SettlementError::InvalidRail(format!(
                    "{name} must be non-negative, got {value}"
                )));
            }
        }
        match self.kind {
            RailKind::Stablecoin => {
                if self.hops != 0 {
                    return Err(SettlementError::InvalidRail(
                        "stablecoin rail routes directly; hops must be 0".into(),
                    ));
                }
                if self.fixed_instrument_cost != 0 {
                    return Err(SettlementError::InvalidRail(
                        "fixed instrument cost applies to the traditional rail only".into(),
                    ));
                }
            }
            RailKind::Traditional => {
                if self.network_fee != 0 {
                    return Err(SettlementError::InvalidRail(
                        "network fee applies to the stablecoin rail only".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    fn fx_fee(&self, invoice: MinorUnits) -> MinorUnits {
        if self.fx_fee_rate > 0.0 {
            snap_floor(invoice as f64 * self.fx_fee_rate)
        } else {
            0
        }
    }

    fn total_fees(&self, invoice: MinorUnits) -> Result<MinorUnits, SettlementError> {
        let hop_fees = (self.hops as MinorUnits)
            .checked_mul(self.per_hop_fee)
            .ok_or_else(fee_overflow)?;
        self.fixed_instrument_cost
            .checked_add(hop_fees)
            .and_then(|f| f.checked_add(self.fx_fee(invoice)))
            .and_then(|f| f.checked_add(self.network_fee))
            .ok_or_else(fee_overflow)
    }
}

fn fee_overflow() -> SettlementError {
    SettlementError::InvalidParameter("fee arithmetic overflows minor units".into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TradeEventKind {
    Initiated,
    PaymentSent,
    HopCleared,
    FxConverted,
    FundsAvailable,
}

/// One step of a trade's settlement pipeline. `amount_delta` is the change
/// to the exporter's eventual proceeds: the invoice arrives at initiation
/// and each fee subtracts, so the deltas of a trade sum to its proceeds.
#[derive(Debug, Clone, PartialEq)]
pub struct TradeEvent {
    pub trade_id: u64,
    pub seq: u32,
    pub time_minutes: u64,
    pub kind: TradeEventKind,
    pub amount_delta: MinorUnits,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettlementOutcome {
    pub trade_id: u64,
    pub invoice: MinorUnits,
    pub total_fees: MinorUnits,
    /// Always `invoice - total_fees`.
    pub proceeds: MinorUnits,
    pub delay_minutes: u64,
    /// Days of working capital locked up awaiting the funds.
    pub working_capital_days: f64,
}

/// Simulates one trade. Draws exactly one uniform from `rng` (the delay
/// quantile), so callers can couple rails by handing each a clone of the
/// same stream. Uneconomic trades (fees exceeding the invoice) are errors.
pub fn simulate_trade(
    rail: &RailSpec,
    trade_id: u64,
    invoice: MinorUnits,
    rng: &mut impl Rng,
) -> Result<(SettlementOutcome, Vec<TradeEvent>), SettlementError> {
    rail.validate()?;
    if invoice <= 0 {
        return Err(SettlementError::InvalidParameter(format!(
            "invoice must be positive, got {invoice}"
        )));
    }
    let total_fees = rail.total_fees(invoice)?;
    if total_fees > invoice {
        return Err(SettlementError::UneconomicTrade {
            invoice,
            fees: total_fees,
        });
    }
    let unit: f64 = rng.random();
    let delay_minutes = rail.settlement_delay.delay_minutes(unit);

    let mut stages: Vec<(TradeEventKind, MinorUnits)> = Vec::with_capacity(rail.hops as usize + 4);
    stages.push((TradeEventKind::Initiated, invoice));
    stages.push((
        TradeEventKind::PaymentSent,
        -(rail.fixed_instrument_cost + rail.network_fee),
    ));
    for _ in 0..rail.hops {
        stages.push((TradeEventKind::HopCleared, -rail.per_hop_fee));
    }
    if rail.fx_fee_rate > 0.0 {
        stages.push((TradeEventKind::FxConverted, -rail.fx_fee(invoice)));
    }
    stages.push((TradeEventKind::FundsAvailable, 0));

    let last = (stages.len() - 1) as u128;
    let events = stages
        .into_iter()
        .enumerate()
        .map(|(i, (kind, amount_delta))| TradeEvent {
            trade_id,
            seq: i as u32,
            time_minutes: (delay_minutes as u128 * i as u128 / last) as u64,
            kind,
            amount_delta,
        })
        .collect();

    Ok((
        SettlementOutcome {
            trade_id,
            invoice,
            total_fees,
            proceeds: invoice - total_fees,
            delay_minutes,
            working_capital_days: delay_minutes as f64 / MINUTES_PER_DAY as f64,
        },
        events,
    ))
}

/// Rebuilds the outcome a list of trade events describes; the inverse of
/// [`simulate_trade`]'s event emission.
pub fn outcome_from_events(events: &[TradeEvent]) -> Result<SettlementOutcome, SettlementError> {
    let first = events
        .first()
        .ok_or_else(|| SettlementError::MalformedEvents("empty event list".into()))?;
    let last = events.last().expect("non-empty");
    if first.kind != TradeEventKind::Initiated {
        return Err(SettlementError::MalformedEvents(
            "first event must be the initiation".into(),
        ));
    }
    if last.kind != TradeEventKind::FundsAvailable {
        return Err(SettlementError::MalformedEvents(
            "last event must make funds available".into(),
        ));
    }
    for pair in events.windows(2) {
        if pair[1].seq != pair[0].seq + 1 {
            return Err(SettlementError::MalformedEvents(format!(
                "event sequence jumps from {} to {}",
                pair[0].seq, pair[1].seq
            )));
        }
        if pair[1].time_minutes < pair[0].time_minutes {
            return Err(SettlementError::MalformedEvents(format!(
                "event time goes backwards at seq {}",
                pair[1].seq
            )));
        }
        if pair[1].trade_id != pair[0].trade_id {
            return Err(SettlementError::MalformedEvents(
                "events mix trades".into(),
            ));
        }
    }
    let invoice = first.amount_delta;
    let total_fees: MinorUnits = events
        .iter()
        .skip(1)
        .map(|e| -e.amount_delta)
        .sum();
    let delay_minutes = last.time_minutes - first.time_minutes;
    Ok(SettlementOutcome {
        trade_id: first.trade_id,
        invoice,
        total_fees,
        proceeds: invoice - total_fees,
        delay_minutes,
        working_capital_days: delay_minutes as f64 / MINUTES_PER_DAY as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InvoiceDistribution {
    Degenerate(MinorUnits),
    /// Uniform over whole minor units in `[min, max]`.
    Uniform { min: MinorUnits, max: MinorUnits },
}

impl InvoiceDistribution {
    fn validate(&self) -> Result<(), SettlementError> {
        match self {
            Self::Degenerate(v) if *v <= 0 => Err(SettlementError::InvalidParameter(format!(
                "invoice must be positive, got {v}"
            ))),
            Self::Uniform { min, max } if *min <= 0 || min > max => {
                Err(SettlementError::InvalidParameter(format!(
                    "invoice range must satisfy 0 < min <= max, got [{min}, {max}]"
                )))
            }
            _ => Ok(()),
        }
    }

    fn sample(&self, rng: &mut impl Rng) -> MinorUnits {
        match self {
            Self::Degenerate(v) => *v,
            Self::Uniform { min, max } => rng.random_range(*min..=*max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RailMetrics {
    pub mean_fees: f64,
    pub mean_delay_minutes: f64,
    pub mean_proceeds: f64,
    pub settled_trades: u64,
    pub excluded_trades: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationMetrics {
    pub traditional: RailMetrics,
    pub stablecoin: RailMetrics,
}

#[derive(Default)]
struct RailAccumulator {
    fees: f64,
    delay: f64,
    proceeds: f64,
    settled: u64,
    excluded: u64,
}

impl RailAccumulator {
    fn add(&mut self, outcome: &SettlementOutcome) {
        self.fees += outcome.total_fees as f64;
        self.delay += outcome.delay_minutes as f64;
        self.proceeds += outcome.proceeds as f64;
        self.settled += 1;
    }

    fn finish(self, kind: RailKind) -> Result<RailMetrics, SettlementError> {
        if self.settled == 0 {
            return Err(SettlementError::AllTradesExcluded(kind.to_string()));
        }
        let n = self.settled as f64;
        Ok(RailMetrics {
            mean_fees: self.fees / n,
            mean_delay_minutes: self.delay / n,
            mean_proceeds: self.proceeds / n,
            settled_trades: self.settled,
            excluded_trades: self.excluded,
        })
    }
}

/// Runs `n_trades` paired trades over both rails. Trade `i` uses substream
/// `i` of `seed`: the invoice draw and then one shared delay quantile, so
/// results do not depend on iteration order and repeated runs are
/// bit-identical. Uneconomic trades are excluded per rail and counted.
pub fn run_simulation(
    traditional: &RailSpec,
    stablecoin: &RailSpec,
    n_trades: u64,
    invoices: &InvoiceDistribution,
    seed: u64,
) -> Result<SimulationMetrics, SettlementError> {
    if n_trades == 0 {
        return Err(SettlementError::NoTrades);
    }
    if traditional.kind != RailKind::Traditional {
        return Err(SettlementError::InvalidRail(
            "first rail must be the traditional one".into(),
        ));
    }
    if stablecoin.kind != RailKind::Stablecoin {
        return Err(SettlementError::InvalidRail(
            "second rail must be the stablecoin one".into(),
        ));
    }
    traditional.validate()?;
    stablecoin.validate()?;
    invoices.validate()?;

    let mut acc_traditional = RailAccumulator::default();
    let mut acc_stablecoin = RailAccumulator::default();
    for trade_id in 0..n_trades {
        let mut stream = rng::substream(seed, trade_id);
        let invoice = invoices.sample(&mut stream);
        for (rail, acc) in [
            (traditional, &mut acc_traditional),
            (stablecoin, &mut acc_stablecoin),
        ] {
            let mut rail_stream = stream.clone();
            match simulate_trade(rail, trade_id, invoice, &mut rail_stream) {
                Ok((outcome, _)) => acc.add(&outcome),
                Err(SettlementError::UneconomicTrade { .. }) => acc.excluded += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(SimulationMetrics {
        traditional: acc_traditional.finish(RailKind::Traditional)?,
        stablecoin: acc_stablecoin.finish(RailKind::Stablecoin)?,
    })
}

/// Folds measured rail metrics into a stablecoin cost regime: the mean fee
/// gap (in minor units, converted at `minor_units_per_model_unit`) comes off
/// the fixed output cost, and `input_fee_reduction_fraction` scales down
/// `tau_i` (and the interest annotation with it, preserving the
/// `tau_i = fee + r * w` decomposition).
pub fn derive_regime_costs(
    baseline: &CostRegime,
    metrics: &SimulationMetrics,
    input_fee_reduction_fraction: f64,
    minor_units_per_model_unit: f64,
) -> Result<CostRegime, SettlementError> {
    if baseline.label() != RegimeLabel::Baseline {
        return Err(SettlementError::InvalidParameter(
            "cost derivation starts from the baseline regime".into(),
        ));
    }
    let f = input_fee_reduction_fraction;
    if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
        return Err(SettlementError::InvalidParameter(format!(
            "input_fee_reduction_fraction must lie in [0, 1], got {f}"
        )));
    }
    let scale = minor_units_per_model_unit;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(SettlementError::InvalidParameter(format!(
            "minor_units_per_model_unit must be positive, got {scale}"
        )));
    }
    let fee_gap_minor = metrics.traditional.mean_fees - metrics.stablecoin.mean_fees;
    if fee_gap_minor < 0.0 {
        return Err(SettlementError::StablecoinRailWorse(fee_gap_minor));
    }
    let fixed_output_cost = (baseline.fixed_output_cost() - fee_gap_minor / scale).max(0.0);
    let tau_i = baseline.tau_i() * (1.0 - f);
    let interest_rate = baseline.interest_rate().map(|r| r * (1.0 - f));
    CostRegime::new(
        RegimeLabel::Stablecoin,
        baseline.input_price(),
        tau_i,
        fixed_output_cost,
        baseline.capital_cap(),
        interest_rate,
    )
    .map_err(SettlementError::from)
}
