//! Input-choice solvers and regime comparisons.
//!
//! The interior optimum solves `E[p] E[theta] tfp alpha x^(alpha-1) = w + tau_i`,
//! giving `x* = (alpha tfp E[p] E[theta] / (w + tau_i))^(1 / (1 - alpha))`.
//! The bisection route never touches that formula; it drives the first-order
//! condition residual to zero, so the two solvers act as mutual checks.
//! A finite capital cap truncates the optimum at `k / (w + tau_i)`.

use thiserror::Error;

use crate::econ::{
    expected_profit, foc_residual, CapitalCap, CostRegime, EconError, EvalMethod, FarmScenario,
};

/// Bisection stops once the residual is this small in absolute value and the
/// bracket has collapsed (see `RELATIVE_BRACKET_WIDTH`).
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Second stopping condition: bracket width relative to the midpoint. Keeping
/// the bracket this tight gives the closed form and the bisection root
/// comfortably more than eight common digits even for steep residuals.
pub const RELATIVE_BRACKET_WIDTH: f64 = 1e-12;

/// Doublings allowed while searching for an upper bracket before the
/// parameters are declared degenerate.
pub const MAX_BRACKET_DOUBLINGS: u32 = 200;

pub const MAX_BISECTION_ITERATIONS: u32 = 200;

/// Smallest input considered; the residual must still be positive here.
const BRACKET_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Econ(#[from] EconError),
    #[error(
        "first-order condition stayed non-negative after {0} bracket doublings; \
         marginal revenue never falls below marginal cost"
    )]
    BracketingFailed(u32),
    #[error("optimum lies at or below the bracket floor {BRACKET_FLOOR}; parameters are degenerate")]
    DegenerateOptimum,
    #[error("comparative statics grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ClosedForm,
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solution {
    pub optimal_input: f64,
    pub expected_profit_at_opt: f64,
    /// True only when a finite capital cap strictly binds. A cap met exactly
    /// at the interior optimum does not bind.
    pub constrained: bool,
    pub method: SolveMethod,
}

fn closed_profit(scenario: &FarmScenario, regime: &CostRegime, x: f64) -> Result<f64, SolveError> {
    Ok(expected_profit(x, scenario, regime, EvalMethod::ClosedForm)?.value)
}

fn closed_form_optimum(scenario: &FarmScenario, regime: &CostRegime) -> f64 {
    let alpha = scenario.production().alpha();
    let ratio = alpha
        * scenario.production().tfp()
        * scenario.price_dist().mean()
        * scenario.yield_dist().mean()
        / regime.unit_input_cost();
    ratio.powf(1.0 / (1.0 - alpha))
}

fn bisect_optimum(scenario: &FarmScenario, regime: &CostRegime) -> Result<f64, SolveError> {
    let mut lo = BRACKET_FLOOR;
    if foc_residual(lo, scenario, regime)? <= 0.0 {
        return Err(SolveError::DegenerateOptimum);
    }
    let mut hi = 1.0;
    let mut doublings = 0;
    while foc_residual(hi, scenario, regime)? >= 0.0 {
        hi *= 2.0;
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS {
            return Err(SolveError::BracketingFailed(MAX_BRACKET_DOUBLINGS));
        }
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let residual = foc_residual(mid, scenario, regime)?;
        if residual > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if residual.abs() < RESIDUAL_TOLERANCE && (hi - lo) <= mid * RELATIVE_BRACKET_WIDTH {
            break;
        }
    }
    Ok(mid)
}

/// Profit-maximizing input ignoring any capital cap.
pub fn solve_unconstrained(
    scenario: &FarmScenario,
    regime: &CostRegime,
    method: SolveMethod,
) -> Result<Solution, SolveError> {
    let optimal_input = match method {
        SolveMethod::ClosedForm => closed_form_optimum(scenario, regime),
        SolveMethod::Bisection => bisect_optimum(scenario, regime)?,
    };
    Ok(Solution {
        optimal_input,
        expected_profit_at_opt: closed_profit(scenario, regime, optimal_input)?,
        constrained: false,
        method,
    })
}

/// Profit-maximizing input subject to `(w + tau_i) * x <= k`. Because
/// expected profit is strictly concave, a binding cap puts the optimum
/// exactly at `k / (w + tau_i)`.
pub fn solve_constrained(
    scenario: &FarmScenario,
    regime: &CostRegime,
    method: SolveMethod,
) -> Result<Solution, SolveError> {
    let unconstrained = solve_unconstrained(scenario, regime, method)?;
    match regime.capital_cap() {
        CapitalCap::Unconstrained => Ok(unconstrained),
        CapitalCap::Finite(k) => {
            let cap_input = k / regime.unit_input_cost();
            if cap_input < unconstrained.optimal_input {
                Ok(Solution {
                    optimal_input: cap_input,
                    expected_profit_at_opt: closed_profit(scenario, regime, cap_input)?,
                    constrained: true,
                    method,
                })
            } else {
                Ok(unconstrained)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeComparison {
    /// Constrained solution under the baseline regime.
    pub baseline_solution: Solution,
    /// Constrained solution under the stablecoin regime.
    pub stablecoin_solution: Solution,
    pub delta_input: f64,
    pub delta_profit: f64,
    /// A strict reduction in `tau_i` or the fixed output cost raised both the
    /// unconstrained optimal input and the profit at that optimum.
    pub proposition1_holds: bool,
    /// Whether a binding baseline capital cap left the stablecoin regime with
    /// strictly more input; `None` when the baseline cap does not bind.
    pub proposition2_holds: Option<bool>,
}

pub fn compare_regimes(scenario: &FarmScenario) -> Result<RegimeComparison, SolveError> {
    let base = scenario.baseline();
    let stab = scenario.stablecoin();

    let base_unconstrained = solve_unconstrained(scenario, base, SolveMethod::ClosedForm)?;
    let stab_unconstrained = solve_unconstrained(scenario, stab, SolveMethod::ClosedForm)?;
    let base_constrained = solve_constrained(scenario, base, SolveMethod::ClosedForm)?;
    let stab_constrained = solve_constrained(scenario, stab, SolveMethod::ClosedForm)?;

    let strictly_cheaper =
        stab.tau_i() < base.tau_i() || stab.fixed_output_cost() < base.fixed_output_cost();
    let proposition1_holds = strictly_cheaper
        && stab_unconstrained.optimal_input > base_unconstrained.optimal_input
        && stab_unconstrained.expected_profit_at_opt > base_unconstrained.expected_profit_at_opt;

    let proposition2_holds = base_constrained
        .constrained
        .then_some(stab_constrained.optimal_input > base_constrained.optimal_input);

    Ok(RegimeComparison {
        delta_input: stab_constrained.optimal_input - base_constrained.optimal_input,
        delta_profit: stab_constrained.expected_profit_at_opt
            - base_constrained.expected_profit_at_opt,
        baseline_solution: base_constrained,
        stablecoin_solution: stab_constrained,
        proposition1_holds,
        proposition2_holds,
    })
}

/// One regime parameter swept over a grid, the rest held fixed.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepGrid {
    TauI(Vec<f64>),
    FixedOutputCost(Vec<f64>),
    InputPrice(Vec<f64>),
    CapitalCap(Vec<CapitalCap>),
}

impl SweepGrid {
    pub fn parameter_name(&self) -> &'static str {
        match self {
            Self::TauI(_) => "tau_i",
            Self::FixedOutputCost(_) => "fixed_output_cost",
            Self::InputPrice(_) => "input_price",
            Self::CapitalCap(_) => "capital_cap",
        }
    }

    fn is_empty(&self) -> bool {
        match self {
            Self::TauI(v) | Self::FixedOutputCost(v) | Self::InputPrice(v) => v.is_empty(),
            Self::CapitalCap(v) => v.is_empty(),
        }
    }
}

/// A grid coordinate: a number, or the removed-cap point of a capital sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPoint {
    Finite(f64),
    Unconstrained,
}

impl std::fmt::Display for GridPoint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Finite(v) => write!(f, "{v}"),
            Self::Unconstrained => write!(f, "unconstrained"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticsRow {
    pub point: GridPoint,
    pub solution: Solution,
}

/// Constrained solution at every grid value. Each grid value must itself
/// satisfy the regime's parameter rules; order of rows follows the grid.
pub fn comparative_statics(
    scenario: &FarmScenario,
    regime: &CostRegime,
    grid: &SweepGrid,
) -> Result<Vec<StaticsRow>, SolveError> {
    if grid.is_empty() {
        return Err(SolveError::EmptyGrid);
    }
    let mut rows = Vec::new();
    match grid {
        SweepGrid::TauI(values) => {
            for &v in values {
                let r = regime.with_tau_i(v)?;
                rows.push(StaticsRow {
                    point: GridPoint::Finite(v),
                    solution: solve_constrained(scenario, &r, SolveMethod::ClosedForm)?,
                });
            }
        }
        SweepGrid::FixedOutputCost(values) => {
            for &v in values {
                let r = regime.with_fixed_output_cost(v)?;
                rows.push(StaticsRow {
                    point: GridPoint::Finite(v),
                    solution: solve_constrained(scenario, &r, SolveMethod::ClosedForm)?,
                });
            }
        }
        SweepGrid::InputPrice(values) => {
            for &v in values {
                let r = regime.with_input_price(v)?;
                rows.push(StaticsRow {
                    point: GridPoint::Finite(v),
                    solution: solve_constrained(scenario, &r, SolveMethod::ClosedForm)?,
                });
            }
        }
        SweepGrid::CapitalCap(caps) => {
            for &cap in caps {
                let r = regime.with_capital_cap(cap)?;
                let point = match cap {
                    CapitalCap::Finite(v) => GridPoint::Finite(v),
                    CapitalCap::Unconstrained => GridPoint::Unconstrained,
                };
                rows.push(StaticsRow {
                    point,
                    solution: solve_constrained(scenario, &r, SolveMethod::ClosedForm)?,
                });
            }
        }
    }
    Ok(rows)
}
