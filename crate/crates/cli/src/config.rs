//! Scenario file schema and validation.
//!
//! One TOML document drives every command. Parsing is strict (unknown keys
//! are rejected) and every domain-rule violation is reported under the key
//! path that caused it. [`load`] returns a [`Bundle`] of fully validated
//! domain objects; the raw [`ScenarioConfig`] stays serializable so
//! parse -> serialize -> parse is a fixpoint.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use agrofin_core::econ::{
    CapitalCap, CostRegime, FarmScenario, ProductionParams, RegimeLabel, ShockDistribution,
};
use agrofin_core::ledger::{AccountId, AccountRole, ESCROW_VAULT, FEE_SINK, FX_DESK, ISSUER_RESERVE};
use agrofin_core::optimizer::SweepGrid;
use agrofin_core::settlement::{DelayDistribution, InvoiceDistribution, RailKind, RailSpec};
use agrofin_core::units::MinorUnits;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: impl Into<String>, message: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        path: path.into(),
        message: message.to_string(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub monte_carlo_n: u64,
    pub model: ModelConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statics: Option<StaticsConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub settlement: Option<SettlementConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub accounts: Vec<AccountConfig>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub escrow: Vec<EscrowConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub insurance: Option<InsuranceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub tfp: f64,
    pub alpha: f64,
    pub price: ShockConfig,
    pub r#yield: ShockConfig,
    pub baseline: RegimeConfig,
    pub stablecoin: RegimeConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ShockConfig {
    Degenerate { value: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Discrete { points: Vec<(f64, f64)> },
}

impl ShockConfig {
    fn build(&self, path: &str) -> Result<ShockDistribution, ConfigError> {
        match self {
            Self::Degenerate { value } => ShockDistribution::degenerate(*value),
            Self::LogNormal { mu, sigma } => ShockDistribution::log_normal(*mu, *sigma),
            Self::Discrete { points } => ShockDistribution::discrete(points.clone()),
        }
        .map_err(|e| invalid(path, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeConfig {
    pub input_price: f64,
    pub tau_i: f64,
    pub fixed_output_cost: f64,
    pub capital_cap: CapValue,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interest_rate: Option<f64>,
}

impl RegimeConfig {
    fn build(&self, label: RegimeLabel, path: &str) -> Result<CostRegime, ConfigError> {
        let cap = self.capital_cap.build(&format!("{path}.capital_cap"))?;
        CostRegime::new(
            label,
            self.input_price,
            self.tau_i,
            self.fixed_output_cost,
            cap,
            self.interest_rate,
        )
        .map_err(|e| invalid(path, e))
    }
}

/// A capital cap in config form: a number, or the literal `"unconstrained"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CapValue {
    Finite(f64),
    Keyword(String),
}

impl CapValue {
    fn build(&self, path: &str) -> Result<CapitalCap, ConfigError> {
        match self {
            Self::Finite(v) => Ok(CapitalCap::Finite(*v)),
            Self::Keyword(k) if k == "unconstrained" => Ok(CapitalCap::Unconstrained),
            Self::Keyword(k) => Err(invalid(
                path,
                format!("expected a number or \"unconstrained\", got \"{k}\""),
            )),
        }
    }

    fn finite(&self, path: &str) -> Result<f64, ConfigError> {
        match self {
            Self::Finite(v) => Ok(*v),
            Self::Keyword(k) => Err(invalid(
                path,
                format!("this parameter takes numeric grid values, got \"{k}\""),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeChoice {
    Baseline,
    Stablecoin,
}

impl From<RegimeChoice> for RegimeLabel {
    fn from(choice: RegimeChoice) -> Self {
        match choice {
            RegimeChoice::Baseline => Self::Baseline,
            RegimeChoice::Stablecoin => Self::Stablecoin,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    TauI,
    FixedOutputCost,
    InputPrice,
    CapitalCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticsConfig {
    pub regime: RegimeChoice,
    pub parameter: SweepParameter,
    pub grid: Vec<CapValue>,
}

impl StaticsConfig {
    /// Probes every grid value against the swept regime so an invalid sweep
    /// fails at parse time, not mid-run.
    fn build(&self, scenario: &FarmScenario) -> Result<StaticsPlan, ConfigError> {
        if self.grid.is_empty() {
            return Err(invalid("statics.grid", "grid must not be empty"));
        }
        let label = RegimeLabel::from(self.regime);
        let regime = scenario.regime(label);
        let mut numbers = Vec::new();
        let mut caps = Vec::new();
        for (i, value) in self.grid.iter().enumerate() {
            let path = format!("statics.grid[{i}]");
            match self.parameter {
                SweepParameter::TauI => {
                    let v = value.finite(&path)?;
                    regime.with_tau_i(v).map_err(|e| invalid(&path, e))?;
                    numbers.push(v);
                }
                SweepParameter::FixedOutputCost => {
                    let v = value.finite(&path)?;
                    regime.with_fixed_output_cost(v).map_err(|e| invalid(&path, e))?;
                    numbers.push(v);
                }
                SweepParameter::InputPrice => {
                    let v = value.finite(&path)?;
                    regime.with_input_price(v).map_err(|e| invalid(&path, e))?;
                    numbers.push(v);
                }
                SweepParameter::CapitalCap => {
                    let cap = value.build(&path)?;
                    regime.with_capital_cap(cap).map_err(|e| invalid(&path, e))?;
                    caps.push(cap);
                }
            }
        }
        let grid = match self.parameter {
            SweepParameter::TauI => SweepGrid::TauI(numbers),
            SweepParameter::FixedOutputCost => SweepGrid::FixedOutputCost(numbers),
            SweepParameter::InputPrice => SweepGrid::InputPrice(numbers),
            SweepParameter::CapitalCap => SweepGrid::CapitalCap(caps),
        };
        Ok(StaticsPlan {
            regime: label,
            grid,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SettlementConfig {
    pub n_trades: u64,
    pub invoice: InvoiceConfig,
    pub traditional: RailConfig,
    pub stablecoin: RailConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derive: Option<DeriveConfig>,
}

impl SettlementConfig {
    fn build(&self) -> Result<SettlementPlan, ConfigError> {
        if self.n_trades == 0 {
            return Err(invalid("settlement.n_trades", "at least one trade is required"));
        }
        Ok(SettlementPlan {
            n_trades: self.n_trades,
            invoices: self.invoice.build("settlement.invoice")?,
            traditional: self
                .traditional
                .build(RailKind::Traditional, "settlement.traditional")?,
            stablecoin: self
                .stablecoin
                .build(RailKind::Stablecoin, "settlement.stablecoin")?,
            derive: self.derive.as_ref().map(DeriveConfig::build).transpose()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InvoiceConfig {
    Degenerate { value: MinorUnits },
    Uniform { min: MinorUnits, max: MinorUnits },
}

impl InvoiceConfig {
    fn build(&self, path: &str) -> Result<InvoiceDistribution, ConfigError> {
        match self {
            Self::Degenerate { value } => {
                if *value <= 0 {
                    return Err(invalid(path, format!("invoice must be positive, got {value}")));
                }
                Ok(InvoiceDistribution::Degenerate(*value))
            }
            Self::Uniform { min, max } => {
                if *min <= 0 || min > max {
                    return Err(invalid(
                        path,
                        format!("invoice range must satisfy 0 < min <= max, got [{min}, {max}]"),
                    ));
                }
                Ok(InvoiceDistribution::Uniform {
                    min: *min,
                    max: *max,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayConfig {
    ConstantMinutes { minutes: u64 },
    UniformMinutes { min: u64, max: u64 },
    UniformDays { min: u64, max: u64 },
}

impl From<&DelayConfig> for DelayDistribution {
    fn from(config: &DelayConfig) -> Self {
        match *config {
            DelayConfig::ConstantMinutes { minutes } => Self::ConstantMinutes(minutes),
            DelayConfig::UniformMinutes { min, max } => Self::UniformMinutes { min, max },
            DelayConfig::UniformDays { min, max } => Self::UniformDays { min, max },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RailConfig {
    pub delay: DelayConfig,
    #[serde(default)]
    pub fx_fee_rate: f64,
    #[serde(default)]
    pub hops: u32,
    #[serde(default)]
    pub per_hop_fee: MinorUnits,
    #[serde(default)]
    pub fixed_instrument_cost: MinorUnits,
    #[serde(default)]
    pub network_fee: MinorUnits,
}

impl RailConfig {
    fn build(&self, kind: RailKind, path: &str) -> Result<RailSpec, ConfigError> {
        let spec = RailSpec {
            kind,
            settlement_delay: (&self.delay).into(),
            fx_fee_rate: self.fx_fee_rate,
            hops: self.hops,
            per_hop_fee: self.per_hop_fee,
            fixed_instrument_cost: self.fixed_instrument_cost,
            network_fee: self.network_fee,
        };
        spec.validate().map_err(|e| invalid(path, e))?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeriveConfig {
    pub input_fee_reduction_fraction: f64,
    pub minor_units_per_model_unit: f64,
}

impl DeriveConfig {
    fn build(&self) -> Result<DerivePlan, ConfigError> {
        let f = self.input_fee_reduction_fraction;
        if !(f.is_finite() && (0.0..=1.0).contains(&f)) {
            return Err(invalid(
                "settlement.derive.input_fee_reduction_fraction",
                format!("must lie in [0, 1], got {f}"),
            ));
        }
        let scale = self.minor_units_per_model_unit;
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid(
                "settlement.derive.minor_units_per_model_unit",
                format!("must be positive, got {scale}"),
            ));
        }
        Ok(DerivePlan {
            input_fee_reduction_fraction: f,
            minor_units_per_model_unit: scale,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AccountConfig {
    pub id: String,
    pub role: AccountRole,
    #[serde(default)]
    pub initial_local: MinorUnits,
    #[serde(default)]
    pub initial_stablecoin: MinorUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EscrowConfig {
    pub id: String,
    pub buyer: String,
    pub seller: String,
    pub price: MinorUnits,
    pub quantity_ordered: f64,
    pub quality_spec: String,
    pub deadline: NaiveDate,
    pub oracle_id: String,
    pub settle_on: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attestation: Option<AttestationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttestationConfig {
    pub measured_quantity: f64,
    pub quality_pass: bool,
    pub timestamp: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsuranceConfig {
    pub pool_account: String,
    pub pool_capital: MinorUnits,
    pub settle_on: NaiveDate,
    pub policies: Vec<PolicyConfig>,
    pub rainfall: Vec<RainfallBinding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub id: String,
    pub holder: String,
    pub region: String,
    pub window_start: NaiveDate,
    pub window_end: NaiveDate,
    pub threshold_mm: f64,
    pub payout: MinorUnits,
    pub premium: MinorUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RainfallBinding {
    pub region: String,
    /// Rainfall CSV path, resolved relative to the scenario file.
    pub file: String,
}

/// Fully validated run plan built from a [`ScenarioConfig`].
#[derive(Debug, Clone)]
pub struct Bundle {
    pub seed: u64,
    pub monte_carlo_n: u64,
    pub scenario: FarmScenario,
    pub statics: Option<StaticsPlan>,
    pub settlement: Option<SettlementPlan>,
    pub accounts: Vec<AccountPlan>,
    pub escrow: Vec<EscrowPlan>,
    pub insurance: Option<InsurancePlan>,
}

#[derive(Debug, Clone)]
pub struct StaticsPlan {
    pub regime: RegimeLabel,
    pub grid: SweepGrid,
}

#[derive(Debug, Clone)]
pub struct SettlementPlan {
    pub n_trades: u64,
    pub invoices: InvoiceDistribution,
    pub traditional: RailSpec,
    pub stablecoin: RailSpec,
    pub derive: Option<DerivePlan>,
}

#[derive(Debug, Clone, Copy)]
pub struct DerivePlan {
    pub input_fee_reduction_fraction: f64,
    pub minor_units_per_model_unit: f64,
}

#[derive(Debug, Clone)]
pub struct AccountPlan {
    pub id: AccountId,
    pub role: AccountRole,
    pub initial_local: MinorUnits,
    pub initial_stablecoin: MinorUnits,
}

#[derive(Debug, Clone)]
pub struct EscrowPlan {
    pub id: String,
    pub buyer: AccountId,
    pub seller: AccountId,
    pub price: MinorUnits,
    pub quantity_ordered: f64,
    pub quality_spec: String,
    pub deadline: NaiveDate,
    pub oracle_id: String,
    pub settle_on: NaiveDate,
    pub attestation: Option<AttestationConfig>,
}

#[derive(Debug, Clone)]
pub struct InsurancePlan {
    pub pool_account: AccountId,
    pub pool_capital: MinorUnits,
    pub settle_on: NaiveDate,
    pub policies: Vec<agrofin_core::contracts::InsurancePolicy>,
    /// `(region, file path)` pairs, paths already resolved.
    pub rainfall: Vec<(String, PathBuf)>,
}

const SYSTEM_IDS: [&str; 4] = [FEE_SINK, FX_DESK, ESCROW_VAULT, ISSUER_RESERVE];

/// Reads, parses, and validates a scenario file. Relative rainfall paths
/// resolve against the scenario file's directory.
pub fn load(path: &Path) -> Result<Bundle, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    let config: ScenarioConfig = toml::from_str(&text).map_err(|source| ConfigError::Parse {
        path: path.to_owned(),
        source: Box::new(source),
    })?;
    let dir = path.parent().map(Path::to_owned).unwrap_or_default();
    config.build(&dir)
}

impl ScenarioConfig {
    /// Serializes back to TOML. Valid configs always serialize: every field
    /// is TOML-representable and absent optional tables are skipped.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario configs are TOML-representable")
    }

    pub fn build(&self, config_dir: &Path) -> Result<Bundle, ConfigError> {
        if self.monte_carlo_n == 0 {
            return Err(invalid("monte_carlo_n", "must be positive"));
        }
        let production = ProductionParams::new(self.model.tfp, self.model.alpha)
            .map_err(|e| invalid("model", e))?;
        let price = self.model.price.build("model.price")?;
        let yield_dist = self.model.r#yield.build("model.yield")?;
        let baseline = self.model.baseline.build(RegimeLabel::Baseline, "model.baseline")?;
        let stablecoin = self
            .model
            .stablecoin
            .build(RegimeLabel::Stablecoin, "model.stablecoin")?;
        let scenario = FarmScenario::new(production, price, yield_dist, baseline, stablecoin)
            .map_err(|e| invalid("model", e))?;

        let statics = self
            .statics
            .as_ref()
            .map(|s| s.build(&scenario))
            .transpose()?;
        let settlement = self
            .settlement
            .as_ref()
            .map(SettlementConfig::build)
            .transpose()?;
        let accounts = self.build_accounts()?;
        let declared: BTreeSet<&str> = self.accounts.iter().map(|a| a.id.as_str()).collect();
        let escrow = self.build_escrow(&declared)?;
        let insurance = self.build_insurance(&declared, config_dir)?;

        Ok(Bundle {
            seed: self.seed,
            monte_carlo_n: self.monte_carlo_n,
            scenario,
            statics,
            settlement,
            accounts,
            escrow,
            insurance,
        })
    }

    fn build_accounts(&self) -> Result<Vec<AccountPlan>, ConfigError> {
        let mut seen = BTreeSet::new();
        let mut plans = Vec::new();
        for (i, a) in self.accounts.iter().enumerate() {
            let path = format!("accounts[{i}]");
            if a.id.is_empty() {
                return Err(invalid(format!("{path}.id"), "must not be empty"));
            }
            if SYSTEM_IDS.contains(&a.id.as_str()) {
                return Err(invalid(
                    format!("{path}.id"),
                    format!("{} is a reserved system account", a.id),
                ));
            }
            if !seen.insert(a.id.as_str()) {
                return Err(invalid(format!("{path}.id"), format!("duplicate account {}", a.id)));
            }
            if a.initial_local < 0 || a.initial_stablecoin < 0 {
                return Err(invalid(path, "initial balances must be non-negative"));
            }
            plans.push(AccountPlan {
                id: AccountId::new(a.id.clone()),
                role: a.role,
                initial_local: a.initial_local,
                initial_stablecoin: a.initial_stablecoin,
            });
        }
        Ok(plans)
    }

    fn build_escrow(&self, declared: &BTreeSet<&str>) -> Result<Vec<EscrowPlan>, ConfigError> {
        let mut ids = BTreeSet::new();
        let mut plans = Vec::new();
        for (i, e) in self.escrow.iter().enumerate() {
            let path = format!("escrow[{i}]");
            if e.id.is_empty() {
                return Err(invalid(format!("{path}.id"), "must not be empty"));
            }
            if !ids.insert(e.id.as_str()) {
                return Err(invalid(format!("{path}.id"), format!("duplicate contract {}", e.id)));
            }
            for (field, party) in [("buyer", &e.buyer), ("seller", &e.seller)] {
                if !declared.contains(party.as_str()) {
                    return Err(invalid(
                        format!("{path}.{field}"),
                        format!("account {party} is not declared under [[accounts]]"),
                    ));
                }
            }
            if e.price <= 0 {
                return Err(invalid(
                    format!("{path}.price"),
                    format!("must be positive, got {}", e.price),
                ));
            }
            if !(e.quantity_ordered.is_finite() && e.quantity_ordered > 0.0) {
                return Err(invalid(
                    format!("{path}.quantity_ordered"),
                    format!("must be positive and finite, got {}", e.quantity_ordered),
                ));
            }
            if e.oracle_id.is_empty() {
                return Err(invalid(format!("{path}.oracle_id"), "must not be empty"));
            }
            if let Some(att) = &e.attestation {
                if !(att.measured_quantity.is_finite() && att.measured_quantity >= 0.0) {
                    return Err(invalid(
                        format!("{path}.attestation.measured_quantity"),
                        format!("must be non-negative and finite, got {}", att.measured_quantity),
                    ));
                }
            }
            plans.push(EscrowPlan {
                id: e.id.clone(),
                buyer: AccountId::new(e.buyer.clone()),
                seller: AccountId::new(e.seller.clone()),
                price: e.price,
                quantity_ordered: e.quantity_ordered,
                quality_spec: e.quality_spec.clone(),
                deadline: e.deadline,
                oracle_id: e.oracle_id.clone(),
                settle_on: e.settle_on,
                attestation: e.attestation.clone(),
            });
        }
        Ok(plans)
    }

    fn build_insurance(
        &self,
        declared: &BTreeSet<&str>,
        config_dir: &Path,
    ) -> Result<Option<InsurancePlan>, ConfigError> {
        let Some(ins) = &self.insurance else {
            return Ok(None);
        };
        if ins.pool_account.is_empty() {
            return Err(invalid("insurance.pool_account", "must not be empty"));
        }
        if SYSTEM_IDS.contains(&ins.pool_account.as_str())
            || declared.contains(ins.pool_account.as_str())
        {
            return Err(invalid(
                "insurance.pool_account",
                format!("{} collides with another account", ins.pool_account),
            ));
        }
        if ins.pool_capital < 0 {
            return Err(invalid("insurance.pool_capital", "must be non-negative"));
        }
        let mut regions = BTreeSet::new();
        let mut rainfall = Vec::new();
        for (i, binding) in ins.rainfall.iter().enumerate() {
            if !regions.insert(binding.region.as_str()) {
                return Err(invalid(
                    format!("insurance.rainfall[{i}].region"),
                    format!("duplicate series for region {}", binding.region),
                ));
            }
            rainfall.push((binding.region.clone(), config_dir.join(&binding.file)));
        }
        let mut ids = BTreeSet::new();
        let mut policies = Vec::new();
        let mut last_end: Option<NaiveDate> = None;
        for (i, p) in ins.policies.iter().enumerate() {
            let path = format!("insurance.policies[{i}]");
            if !ids.insert(p.id.as_str()) {
                return Err(invalid(format!("{path}.id"), format!("duplicate policy {}", p.id)));
            }
            if !declared.contains(p.holder.as_str()) {
                return Err(invalid(
                    format!("{path}.holder"),
                    format!("account {} is not declared under [[accounts]]", p.holder),
                ));
            }
            if !regions.contains(p.region.as_str()) {
                return Err(invalid(
                    format!("{path}.region"),
                    format!("no rainfall series bound for region {}", p.region),
                ));
            }
            let policy = agrofin_core::contracts::InsurancePolicy::new(
                p.id.clone(),
                AccountId::new(p.holder.clone()),
                p.region.clone(),
                p.window_start,
                p.window_end,
                p.threshold_mm,
                p.payout,
                p.premium,
            )
            .map_err(|e| invalid(&path, e))?;
            last_end = Some(last_end.map_or(p.window_end, |d| d.max(p.window_end)));
            policies.push(policy);
        }
        if let Some(last_end) = last_end {
            if ins.settle_on < last_end {
                return Err(invalid(
                    "insurance.settle_on",
                    format!("must not precede the last coverage window end {last_end}"),
                ));
            }
        }
        Ok(Some(InsurancePlan {
            pool_account: AccountId::new(ins.pool_account.clone()),
            pool_capital: ins.pool_capital,
            settle_on: ins.settle_on,
            policies,
            rainfall,
        }))
    }
}
