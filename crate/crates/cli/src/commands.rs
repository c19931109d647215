//! Command dispatch and report assembly.
//!
//! Every command accumulates its report files in memory; nothing touches the
//! output directory until the whole run has succeeded, so a failing run
//! leaves no partial reports behind. All numbers are printed with Rust's
//! shortest round-trip formatting, which keeps repeated runs byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use agrofin_core::contracts::{
    parse_rainfall_csv, ContractError, EscrowContract, OracleAttestation, PremiumPool,
    SettlementDecision,
};
use agrofin_core::econ::{
    expected_profit, CostRegime, EconError, EvalMethod, FarmScenario, RegimeLabel,
};
use agrofin_core::ledger::{
    AccountId, AccountRole, Currency, Ledger, LedgerError, ESCROW_VAULT,
};
use agrofin_core::optimizer::{
    comparative_statics, compare_regimes, RegimeComparison, SolveError, StaticsRow,
};
use agrofin_core::rng;
use agrofin_core::settlement::{
    derive_regime_costs, run_simulation, RailMetrics, SettlementError, SimulationMetrics,
};

use crate::config::{Bundle, ConfigError, EscrowPlan, InsurancePlan, SettlementPlan, StaticsPlan};

/// Seed tags keep the settlement draws and the two Monte Carlo cross-checks
/// on disjoint substream families of the scenario seed.
const SETTLEMENT_SEED_TAG: u64 = 1;
const MC_BASELINE_SEED_TAG: u64 = 2;
const MC_STABLECOIN_SEED_TAG: u64 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Optimize,
    Compare,
    Statics,
    Settle,
    Escrow,
    Insure,
    All,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Self::Optimize => "optimize",
            Self::Compare => "compare",
            Self::Statics => "statics",
            Self::Settle => "settle",
            Self::Escrow => "escrow",
            Self::Insure => "insure",
            Self::All => "all",
        }
    }
}

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("model: {0}")]
    Econ(#[from] EconError),
    #[error("optimizer: {0}")]
    Solve(#[from] SolveError),
    #[error("settlement: {0}")]
    Settlement(#[from] SettlementError),
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("contracts: {0}")]
    Contract(#[from] ContractError),
    #[error("cannot read {path}: {source}")]
    ReadInput {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write report {path}: {source}")]
    Report {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

/// Report files buffered in memory, in write order.
#[derive(Debug, Default)]
pub struct ReportSet {
    files: Vec<(&'static str, String)>,
}

impl ReportSet {
    fn push(&mut self, name: &'static str, contents: String) {
        self.files.push((name, contents));
    }

    pub fn len(&self) -> usize {
        self.files.len()
    }

    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn contents(&self, name: &str) -> Option<&str> {
        self.files
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, c)| c.as_str())
    }

    /// Writes every report, or nothing: reports already on disk are removed
    /// again if a later write fails.
    pub fn write_to(&self, dir: &Path) -> Result<(), RuntimeError> {
        std::fs::create_dir_all(dir).map_err(|source| RuntimeError::Report {
            path: dir.to_owned(),
            source,
        })?;
        let mut written = Vec::new();
        for (name, contents) in &self.files {
            let path = dir.join(name);
            match std::fs::write(&path, contents) {
                Ok(()) => written.push(path),
                Err(source) => {
                    for already in &written {
                        let _ = std::fs::remove_file(already);
                    }
                    return Err(RuntimeError::Report { path, source });
                }
            }
        }
        Ok(())
    }
}

struct Summary {
    text: String,
}

impl Summary {
    fn new(command: Command, bundle: &Bundle) -> Self {
        let mut summary = Self {
            text: String::new(),
        };
        summary.line(format!("command: {}", command.name()));
        summary.line(format!("seed: {}", bundle.seed));
        summary.line(format!("monte_carlo_n: {}", bundle.monte_carlo_n));
        summary
    }

    fn section(&mut self, name: &str) {
        self.text.push('\n');
        self.line(format!("[{name}]"));
    }

    fn line(&mut self, line: String) {
        self.text.push_str(&line);
        self.text.push('\n');
    }

    fn finish(self) -> String {
        self.text
    }
}

fn missing_section(section: &str, command: Command) -> CliError {
    CliError::Config(ConfigError::Invalid {
        path: section.to_owned(),
        message: format!("section required by command {}", command.name()),
    })
}

pub fn run(command: Command, bundle: &Bundle) -> Result<ReportSet, CliError> {
    let mut reports = ReportSet::default();
    let mut summary = Summary::new(command, bundle);
    match command {
        Command::Optimize => {
            stage_optimize(&bundle.scenario, &mut reports, &mut summary)?;
        }
        Command::Compare => {
            stage_compare(bundle, &bundle.scenario, &mut reports, &mut summary)?;
        }
        Command::Statics => {
            let plan = bundle
                .statics
                .as_ref()
                .ok_or_else(|| missing_section("statics", command))?;
            stage_statics(bundle, plan, &mut reports, &mut summary)?;
        }
        Command::Settle => {
            let plan = bundle
                .settlement
                .as_ref()
                .ok_or_else(|| missing_section("settlement", command))?;
            let derived = stage_settle(bundle, plan, &mut reports, &mut summary)?;
            if let Some(regime) = derived {
                let scenario = derived_scenario(bundle, regime)?;
                stage_compare(bundle, &scenario, &mut reports, &mut summary)?;
            }
        }
        Command::Escrow => {
            if bundle.escrow.is_empty() {
                return Err(missing_section("escrow", command));
            }
            stage_escrow(&bundle.accounts, &bundle.escrow, &mut reports, &mut summary)?;
        }
        Command::Insure => {
            let plan = bundle
                .insurance
                .as_ref()
                .ok_or_else(|| missing_section("insurance", command))?;
            stage_insure(&bundle.accounts, plan, &mut reports, &mut summary)?;
        }
        Command::All => {
            let plan = bundle
                .settlement
                .as_ref()
                .ok_or_else(|| missing_section("settlement", command))?;
            let derived = stage_settle(bundle, plan, &mut reports, &mut summary)?;
            let scenario = match derived {
                Some(regime) => derived_scenario(bundle, regime)?,
                None => bundle.scenario.clone(),
            };
            stage_compare(bundle, &scenario, &mut reports, &mut summary)?;
            if !bundle.escrow.is_empty() {
                stage_escrow(&bundle.accounts, &bundle.escrow, &mut reports, &mut summary)?;
            }
            if let Some(plan) = &bundle.insurance {
                stage_insure(&bundle.accounts, plan, &mut reports, &mut summary)?;
            }
        }
    }
    reports.push("summary", summary.finish());
    Ok(reports)
}

/// Swaps the configured stablecoin regime for one derived from measured rail
/// metrics; production and shocks carry over unchanged.
fn derived_scenario(bundle: &Bundle, stablecoin: CostRegime) -> Result<FarmScenario, RuntimeError> {
    FarmScenario::new(
        *bundle.scenario.production(),
        bundle.scenario.price_dist().clone(),
        bundle.scenario.yield_dist().clone(),
        *bundle.scenario.baseline(),
        stablecoin,
    )
    .map_err(RuntimeError::from)
}

fn stage_optimize(
    scenario: &FarmScenario,
    reports: &mut ReportSet,
    summary: &mut Summary,
) -> Result<(), RuntimeError> {
    let comparison = compare_regimes(scenario)?;
    reports.push("comparison.csv", comparison_csv(&comparison));
    summary.section("optimize");
    push_solution_lines(summary, &comparison);
    Ok(())
}

fn stage_compare(
    bundle: &Bundle,
    scenario: &FarmScenario,
    reports: &mut ReportSet,
    summary: &mut Summary,
) -> Result<(), RuntimeError> {
    let comparison = compare_regimes(scenario)?;
    reports.push("comparison.csv", comparison_csv(&comparison));
    summary.section("comparison");
    push_solution_lines(summary, &comparison);
    summary.line(format!("delta_input: {}", comparison.delta_input));
    summary.line(format!("delta_profit: {}", comparison.delta_profit));
    summary.line(format!(
        "proposition1_holds: {}",
        comparison.proposition1_holds
    ));
    summary.line(format!(
        "proposition2_holds: {}",
        prop2_cell(comparison.proposition2_holds)
    ));
    for (label, regime_label, input, tag) in [
        (
            "baseline",
            RegimeLabel::Baseline,
            comparison.baseline_solution.optimal_input,
            MC_BASELINE_SEED_TAG,
        ),
        (
            "stablecoin",
            RegimeLabel::Stablecoin,
            comparison.stablecoin_solution.optimal_input,
            MC_STABLECOIN_SEED_TAG,
        ),
    ] {
        let estimate = expected_profit(
            input,
            scenario,
            scenario.regime(regime_label),
            EvalMethod::MonteCarlo {
                n: bundle.monte_carlo_n,
                seed: rng::derive_seed(bundle.seed, tag),
            },
        )?;
        summary.line(format!(
            "monte_carlo_{label}: value={} std_error={}",
            estimate.value, estimate.std_error
        ));
    }
    Ok(())
}

fn push_solution_lines(summary: &mut Summary, comparison: &RegimeComparison) {
    for (label, solution) in [
        ("baseline", &comparison.baseline_solution),
        ("stablecoin", &comparison.stablecoin_solution),
    ] {
        summary.line(format!(
            "{label}: optimal_input={} expected_profit={} constrained={}",
            solution.optimal_input, solution.expected_profit_at_opt, solution.constrained
        ));
    }
}

fn stage_statics(
    bundle: &Bundle,
    plan: &StaticsPlan,
    reports: &mut ReportSet,
    summary: &mut Summary,
) -> Result<(), RuntimeError> {
    let regime = bundle.scenario.regime(plan.regime);
    let rows = comparative_statics(&bundle.scenario, regime, &plan.grid)?;
    reports.push(
        "statics.csv",
        statics_csv(plan.regime, plan.grid.parameter_name(), &rows),
    );
    summary.section("statics");
    summary.line(format!("regime: {}", plan.regime));
    summary.line(format!("parameter: {}", plan.grid.parameter_name()));
    summary.line(format!("rows: {}", rows.len()));
    Ok(())
}

fn stage_settle(
    bundle: &Bundle,
    plan: &SettlementPlan,
    reports: &mut ReportSet,
    summary: &mut Summary,
) -> Result<Option<CostRegime>, RuntimeError> {
    let seed = rng::derive_seed(bundle.seed, SETTLEMENT_SEED_TAG);
    let metrics = run_simulation(
        &plan.traditional,
        &plan.stablecoin,
        plan.n_trades,
        &plan.invoices,
        seed,
    )?;
    reports.push("settlement.csv", settlement_csv(&metrics));
    summary.section("settlement");
    summary.line(format!("trades_requested: {}", plan.n_trades));
    for (name, rail) in [
        ("traditional", &metrics.traditional),
        ("stablecoin", &metrics.stablecoin),
    ] {
        summary.line(format!(
            "{name}: mean_fees={} mean_delay_minutes={} mean_proceeds={} settled={} excluded={}",
            rail.mean_fees,
            rail.mean_delay_minutes,
            rail.mean_proceeds,
            rail.settled_trades,
            rail.excluded_trades
        ));
    }
    summary.line(format!(
        "mean_fee_gap_minor_units: {}",
        metrics.traditional.mean_fees - metrics.stablecoin.mean_fees
    ));
    let derived = plan
        .derive
        .map(|d| {
            derive_regime_costs(
                bundle.scenario.baseline(),
                &metrics,
                d.input_fee_reduction_fraction,
                d.minor_units_per_model_unit,
            )
        })
        .transpose()?;
    if let Some(regime) = &derived {
        summary.section("derived_regime");
        summary.line(format!("tau_i: {}", regime.tau_i()));
        summary.line(format!("fixed_output_cost: {}", regime.fixed_output_cost()));
        summary.line(format!("capital_cap: {}", regime.capital_cap()));
        if let Some(rate) = regime.interest_rate() {
            summary.line(format!("interest_rate: {rate}"));
        }
    }
    Ok(derived)
}

fn build_ledger(accounts: &[crate::config::AccountPlan]) -> Result<Ledger, RuntimeError> {
    let mut ledger = Ledger::new();
    for account in accounts {
        ledger.open_account(account.id.clone(), account.role)?;
        if account.initial_local > 0 {
            ledger.deposit_local(&account.id, account.initial_local)?;
        }
        if account.initial_stablecoin > 0 {
            ledger.mint(&account.id, account.initial_stablecoin)?;
        }
    }
    Ok(ledger)
}

fn stage_escrow(
    accounts: &[crate::config::AccountPlan],
    fixtures: &[EscrowPlan],
    reports: &mut ReportSet,
    summary: &mut Summary,
) -> Result<(), RuntimeError> {
    let mut ledger = build_ledger(accounts)?;
    let vault = AccountId::from(ESCROW_VAULT);
    let mut csv = String::from("contract_id,action,state,vault_stablecoin,detail\n");
    summary.section("escrow");
    for plan in fixtures {
        let mut contract = EscrowContract::create(
            &ledger,
            plan.id.clone(),
            plan.buyer.clone(),
            plan.seller.clone(),
            plan.price,
            plan.quantity_ordered,
            plan.quality_spec.clone(),
            plan.deadline,
            plan.oracle_id.clone(),
        )?;
        escrow_row(&mut csv, &ledger, &vault, &contract, "create", format!("price={}", plan.price))?;
        contract.fund(&mut ledger)?;
        escrow_row(
            &mut csv,
            &ledger,
            &vault,
            &contract,
            "fund",
            format!("buyer_debited={}", plan.price),
        )?;
        if let Some(att) = &plan.attestation {
            let attestation = OracleAttestation::new(
                plan.id.clone(),
                att.measured_quantity,
                att.quality_pass,
                att.timestamp,
                plan.oracle_id.clone(),
            )?;
            contract.submit_attestation(attestation)?;
            escrow_row(
                &mut csv,
                &ledger,
                &vault,
                &contract,
                "attest",
                format!(
                    "measured={} quality_pass={}",
                    att.measured_quantity, att.quality_pass
                ),
            )?;
        }
        let decision = contract.settle(&mut ledger, plan.settle_on)?;
        let decision_name = match decision {
            SettlementDecision::Released => "released",
            SettlementDecision::Refunded => "refunded",
            SettlementDecision::Pending => "pending",
        };
        escrow_row(
            &mut csv,
            &ledger,
            &vault,
            &contract,
            "settle",
            format!("decision={decision_name}"),
        )?;
        summary.line(format!(
            "{}: state={} decision={decision_name}",
            plan.id,
            contract.state()
        ));
    }
    reports.push("escrow_log.csv", csv);
    Ok(())
}

fn escrow_row(
    csv: &mut String,
    ledger: &Ledger,
    vault: &AccountId,
    contract: &EscrowContract,
    action: &str,
    detail: String,
) -> Result<(), RuntimeError> {
    let vault_balance = ledger.balance(vault, Currency::Stablecoin)?;
    csv.push_str(&format!(
        "{},{action},{},{vault_balance},{detail}\n",
        contract.id(),
        contract.state()
    ));
    Ok(())
}

fn stage_insure(
    accounts: &[crate::config::AccountPlan],
    plan: &InsurancePlan,
    reports: &mut ReportSet,
    summary: &mut Summary,
) -> Result<(), RuntimeError> {
    let mut ledger = build_ledger(accounts)?;
    ledger.open_account(plan.pool_account.clone(), AccountRole::InsurerPool)?;
    if plan.pool_capital > 0 {
        ledger.mint(&plan.pool_account, plan.pool_capital)?;
    }
    let mut pool = PremiumPool::new(plan.pool_account.clone());
    for policy in &plan.policies {
        pool.issue_policy(&mut ledger, policy.clone())?;
    }
    let mut series_by_region = BTreeMap::new();
    for (region, path) in &plan.rainfall {
        let text = std::fs::read_to_string(path).map_err(|source| RuntimeError::ReadInput {
            path: path.clone(),
            source,
        })?;
        let series = parse_rainfall_csv(region.clone(), &text)?;
        series_by_region.insert(region.clone(), series);
    }
    let pool_before = ledger.balance(&plan.pool_account, Currency::Stablecoin)?;
    let rows = pool.execute_payouts(&mut ledger, &series_by_region, plan.settle_on)?;
    let pool_after = ledger.balance(&plan.pool_account, Currency::Stablecoin)?;

    let mut csv = String::from("policy_id,triggered,paid_minor_units\n");
    let mut paid_total = 0i64;
    let mut triggered = 0usize;
    for row in &rows {
        csv.push_str(&format!("{},{},{}\n", row.policy_id, row.triggered, row.paid));
        paid_total += row.paid;
        triggered += usize::from(row.triggered);
    }
    reports.push("insurance_payouts.csv", csv);
    summary.section("insurance");
    summary.line(format!("pool_account: {}", plan.pool_account));
    summary.line(format!("policies: {}", rows.len()));
    summary.line(format!("triggered: {triggered}"));
    summary.line(format!("pool_before: {pool_before}"));
    summary.line(format!("paid_total: {paid_total}"));
    summary.line(format!("pool_after: {pool_after}"));
    Ok(())
}

fn prop2_cell(value: Option<bool>) -> &'static str {
    match value {
        Some(true) => "true",
        Some(false) => "false",
        None => "not_applicable",
    }
}

fn comparison_csv(comparison: &RegimeComparison) -> String {
    let mut out = String::from(
        "baseline_input,baseline_profit,baseline_constrained,\
         stablecoin_input,stablecoin_profit,stablecoin_constrained,\
         delta_input,delta_profit,proposition1_holds,proposition2_holds\n",
    );
    out.push_str(&format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        comparison.baseline_solution.optimal_input,
        comparison.baseline_solution.expected_profit_at_opt,
        comparison.baseline_solution.constrained,
        comparison.stablecoin_solution.optimal_input,
        comparison.stablecoin_solution.expected_profit_at_opt,
        comparison.stablecoin_solution.constrained,
        comparison.delta_input,
        comparison.delta_profit,
        comparison.proposition1_holds,
        prop2_cell(comparison.proposition2_holds),
    ));
    out
}

fn statics_csv(regime: RegimeLabel, parameter: &str, rows: &[StaticsRow]) -> String {
    let mut out = String::from("regime,parameter,value,optimal_input,expected_profit,constrained\n");
    for row in rows {
        out.push_str(&format!(
            "{regime},{parameter},{},{},{},{}\n",
            row.point,
            row.solution.optimal_input,
            row.solution.expected_profit_at_opt,
            row.solution.constrained
        ));
    }
    out
}

fn settlement_csv(metrics: &SimulationMetrics) -> String {
    fn row(name: &str, rail: &RailMetrics) -> String {
        format!(
            "{name},{},{},{},{}\n",
            rail.mean_fees, rail.mean_delay_minutes, rail.mean_proceeds, rail.excluded_trades
        )
    }
    let mut out = String::from("rail,mean_fees,mean_delay_minutes,mean_proceeds,excluded_trades\n");
    out.push_str(&row("traditional", &metrics.traditional));
    out.push_str(&row("stablecoin", &metrics.stablecoin));
    out
}
