//! Farm production technology, stochastic shocks, and profit evaluation.
//!
//! Output is `theta * tfp * x^alpha` with `0 < alpha < 1`, so output is
//! strictly increasing and strictly concave in the input and the input
//! choice problem has a unique interior optimum. Price and yield shocks are
//! independent, which lets expected revenue factor as
//! `E[p] * E[theta] * tfp * x^alpha`; the closed-form expected profit and
//! the Monte Carlo estimate in [`expected_profit`] must agree.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};
use thiserror::Error;

/// Discrete shock probabilities must sum to one within this.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-12;

/// Slack allowed when checking that the financing component `r * w` of the
/// per-unit transaction cost does not exceed `tau_i` itself.
const INTEREST_IDENTITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EconError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("domain error: {0}")]
    Domain(String),
}

/// Production technology `f(x; theta) = theta * tfp * x^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductionParams {
    tfp: f64,
    alpha: f64,
}

impl ProductionParams {
    pub fn new(tfp: f64, alpha: f64) -> Result<Self, EconError> {
        if !(tfp.is_finite() && tfp > 0.0) {
            return Err(EconError::InvalidParameter(format!(
                "tfp must be a positive finite number, got {tfp}"
            )));
        }
        if !(alpha.is_finite() && alpha > 0.0 && alpha < 1.0) {
            return Err(EconError::InvalidParameter(format!(
                "alpha must lie strictly inside (0, 1), got {alpha}"
            )));
        }
        Ok(Self { tfp, alpha })
    }

    pub fn tfp(&self) -> f64 {
        self.tfp
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Distribution of a multiplicative shock with strictly positive support.
#[derive(Debug, Clone, PartialEq)]
pub enum ShockDistribution {
    /// Point mass at `value`.
    Degenerate { value: f64 },
    /// Log-normal with location `mu` and scale `sigma` of the underlying
    /// normal; the mean is `exp(mu + sigma^2 / 2)`.
    LogNormal { mu: f64, sigma: f64 },
    /// Finite support as `(value, probability)` pairs.
    Discrete { points: Vec<(f64, f64)> },
}

impl ShockDistribution {
    pub fn degenerate(value: f64) -> Result<Self, EconError> {
        let dist = Self::Degenerate { value };
        dist.validate()?;
        Ok(dist)
    }

    pub fn log_normal(mu: f64, sigma: f64) -> Result<Self, EconError> {
        let dist = Self::LogNormal { mu, sigma };
        dist.validate()?;
        Ok(dist)
    }

    pub fn discrete(points: Vec<(f64, f64)>) -> Result<Self, EconError> {
        let dist = Self::Discrete { points };
        dist.validate()?;
        Ok(dist)
    }

    pub fn validate(&self) -> Result<(), EconError> {
        match self {
            Self::Degenerate { value } => {
                if !(value.is_finite() && *value > 0.0) {
                    return Err(EconError::InvalidParameter(format!(
                        "degenerate shock value must be positive and finite, got {value}"
                    )));
                }
            }
            Self::LogNormal { mu, sigma } => {
                if !mu.is_finite() {
                    return Err(EconError::InvalidParameter(format!(
                        "log-normal mu must be finite, got {mu}"
                    )));
                }
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(EconError::InvalidParameter(format!(
                        "log-normal sigma must be non-negative and finite, got {sigma}"
                    )));
                }
                let mean = (mu + 0.5 * sigma * sigma).exp();
                if !mean.is_finite() {
                    return Err(EconError::InvalidParameter(format!(
                        "log-normal mean exp(mu + sigma^2/2) overflows for mu={mu}, sigma={sigma}"
                    )));
                }
            }
            Self::Discrete { points } => {
                if points.is_empty() {
                    return Err(EconError::InvalidParameter(
                        "discrete shock needs at least one support point".into(),
                    ));
                }
                let mut total = 0.0;
                for (value, prob) in points {
                    if !(value.is_finite() && *value > 0.0) {
                        return Err(EconError::InvalidParameter(format!(
                            "discrete shock values must be positive and finite, got {value}"
                        )));
                    }
                    if !(prob.is_finite() && *prob >= 0.0) {
                        return Err(EconError::InvalidParameter(format!(
                            "discrete shock probabilities must be non-negative, got {prob}"
                        )));
                    }
                    total += prob;
                }
                if (total - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
                    return Err(EconError::InvalidParameter(format!(
                        "discrete shock probabilities must sum to 1 within {PROBABILITY_SUM_TOLERANCE}, got {total}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Degenerate { value } => *value,
            Self::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            Self::Discrete { points } => points.iter().map(|(v, p)| v * p).sum(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Degenerate { value } => *value,
            Self::LogNormal { mu, sigma } => {
                if *sigma == 0.0 {
                    mu.exp()
                } else {
                    LogNormal::new(*mu, *sigma)
                        .expect("validated at construction")
                        .sample(rng)
                }
            }
            Self::Discrete { points } => {
                let u: f64 = rng.random();
                let mut cumulative = 0.0;
                for (value, prob) in points {
                    cumulative += prob;
                    if u < cumulative {
                        return *value;
                    }
                }
                // u landed in the float slack above the cumulative sum.
                points.last().expect("validated non-empty").0
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeLabel {
    Baseline,
    Stablecoin,
}

impl std::fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Baseline => write!(f, "baseline"),
            Self::Stablecoin => write!(f, "stablecoin"),
        }
    }
}

/// Seasonal credit ceiling on input spending `(w + tau_i) * x <= k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CapitalCap {
    Unconstrained,
    Finite(f64),
}

impl CapitalCap {
    /// True when `self` admits at least every spending level `other` admits.
    pub fn at_least(&self, other: &CapitalCap) -> bool {
        match (self, other) {
            (Self::Unconstrained, _) => true,
            (Self::Finite(_), Self::Unconstrained) => false,
            (Self::Finite(a), Self::Finite(b)) => a >= b,
        }
    }
}

impl std::fmt::Display for CapitalCap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Unconstrained => write!(f, "unconstrained"),
            Self::Finite(v) => write!(f, "{v}"),
        }
    }
}

/// Cost environment the farm trades in: input price `w`, per-unit
/// transaction cost `tau_i`, fixed cost of selling output `fixed_output_cost`,
/// and the seasonal capital cap. `interest_rate` is an optional annotation
/// recording the financing component of `tau_i = fee + r * w`; it never
/// enters profit directly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRegime {
    label: RegimeLabel,
    input_price: f64,
    tau_i: f64,
    fixed_output_cost: f64,
    capital_cap: CapitalCap,
    interest_rate: Option<f64>,
}

impl CostRegime {
    pub fn new(
        label: RegimeLabel,
        input_price: f64,
        tau_i: f64,
        fixed_output_cost: f64,
        capital_cap: CapitalCap,
        interest_rate: Option<f64>,
    ) -> Result<Self, EconError> {
        if !(input_price.is_finite() && input_price > 0.0) {
            return Err(EconError::InvalidParameter(format!(
                "input_price must be positive and finite, got {input_price}"
            )));
        }
        if !(tau_i.is_finite() && tau_i >= 0.0) {
            return Err(EconError::InvalidParameter(format!(
                "tau_i must be non-negative and finite, got {tau_i}"
            )));
        }
        if !(fixed_output_cost.is_finite() && fixed_output_cost >= 0.0) {
            return Err(EconError::InvalidParameter(format!(
                "fixed_output_cost must be non-negative and finite, got {fixed_output_cost}"
            )));
        }
        if let CapitalCap::Finite(k) = capital_cap {
            if !(k.is_finite() && k > 0.0) {
                return Err(EconError::InvalidParameter(format!(
                    "a finite capital cap must be positive, got {k}"
                )));
            }
        }
        if let Some(r) = interest_rate {
            if !(r.is_finite() && r >= 0.0) {
                return Err(EconError::InvalidParameter(format!(
                    "interest_rate must be non-negative and finite, got {r}"
                )));
            }
            if r * input_price > tau_i + INTEREST_IDENTITY_TOLERANCE {
                return Err(EconError::InvalidParameter(format!(
                    "financing component r * w = {} exceeds tau_i = {tau_i}; \
                     tau_i must cover fee plus interest",
                    r * input_price
                )));
            }
        }
        Ok(Self {
            label,
            input_price,
            tau_i,
            fixed_output_cost,
            capital_cap,
            interest_rate,
        })
    }

    pub fn label(&self) -> RegimeLabel {
        self.label
    }

    pub fn input_price(&self) -> f64 {
        self.input_price
    }

    pub fn tau_i(&self) -> f64 {
        self.tau_i
    }

    pub fn fixed_output_cost(&self) -> f64 {
        self.fixed_output_cost
    }

    pub fn capital_cap(&self) -> CapitalCap {
        self.capital_cap
    }

    pub fn interest_rate(&self) -> Option<f64> {
        self.interest_rate
    }

    /// Per-unit outlay for the input: price plus transaction cost.
    pub fn unit_input_cost(&self) -> f64 {
        self.input_price + self.tau_i
    }

    /// Non-financing share of `tau_i` under the `tau_i = fee + r * w`
    /// decomposition, when the interest annotation is present.
    pub fn fee_component(&self) -> Option<f64> {
        self.interest_rate.map(|r| self.tau_i - r * self.input_price)
    }

    pub fn with_tau_i(&self, tau_i: f64) -> Result<Self, EconError> {
        Self::new(
            self.label,
            self.input_price,
            tau_i,
            self.fixed_output_cost,
            self.capital_cap,
            self.interest_rate,
        )
    }

    pub fn with_input_price(&self, input_price: f64) -> Result<Self, EconError> {
        Self::new(
            self.label,
            input_price,
            self.tau_i,
            self.fixed_output_cost,
            self.capital_cap,
            self.interest_rate,
        )
    }

    pub fn with_fixed_output_cost(&self, fixed_output_cost: f64) -> Result<Self, EconError> {
        Self::new(
            self.label,
            self.input_price,
            self.tau_i,
            fixed_output_cost,
            self.capital_cap,
            self.interest_rate,
        )
    }

    pub fn with_capital_cap(&self, capital_cap: CapitalCap) -> Result<Self, EconError> {
        Self::new(
            self.label,
            self.input_price,
            self.tau_i,
            self.fixed_output_cost,
            capital_cap,
            self.interest_rate,
        )
    }
}

/// A farm plus the pair of cost regimes it is compared under. The stablecoin
/// regime must be weakly cheaper than the baseline in every dimension:
/// `tau_i` and `fixed_output_cost` no higher, capital cap no tighter.
#[derive(Debug, Clone, PartialEq)]
pub struct FarmScenario {
    production: ProductionParams,
    price_dist: ShockDistribution,
    yield_dist: ShockDistribution,
    baseline: CostRegime,
    stablecoin: CostRegime,
}

impl FarmScenario {
    pub fn new(
        production: ProductionParams,
        price_dist: ShockDistribution,
        yield_dist: ShockDistribution,
        baseline: CostRegime,
        stablecoin: CostRegime,
    ) -> Result<Self, EconError> {
        price_dist.validate()?;
        yield_dist.validate()?;
        if baseline.label() != RegimeLabel::Baseline {
            return Err(EconError::InvalidParameter(
                "first regime must carry the baseline label".into(),
            ));
        }
        if stablecoin.label() != RegimeLabel::Stablecoin {
            return Err(EconError::InvalidParameter(
                "second regime must carry the stablecoin label".into(),
            ));
        }
        if stablecoin.tau_i() > baseline.tau_i() {
            return Err(EconError::InvalidParameter(format!(
                "stablecoin tau_i {} must not exceed baseline tau_i {}",
                stablecoin.tau_i(),
                baseline.tau_i()
            )));
        }
        if stablecoin.fixed_output_cost() > baseline.fixed_output_cost() {
            return Err(EconError::InvalidParameter(format!(
                "stablecoin fixed_output_cost {} must not exceed baseline fixed_output_cost {}",
                stablecoin.fixed_output_cost(),
                baseline.fixed_output_cost()
            )));
        }
        if !stablecoin
            .capital_cap()
            .at_least(&baseline.capital_cap())
        {
            return Err(EconError::InvalidParameter(format!(
                "stablecoin capital cap {} must be at least the baseline cap {}",
                stablecoin.capital_cap(),
                baseline.capital_cap()
            )));
        }
        Ok(Self {
            production,
            price_dist,
            yield_dist,
            baseline,
            stablecoin,
        })
    }

    pub fn production(&self) -> &ProductionParams {
        &self.production
    }

    pub fn price_dist(&self) -> &ShockDistribution {
        &self.price_dist
    }

    pub fn yield_dist(&self) -> &ShockDistribution {
        &self.yield_dist
    }

    pub fn baseline(&self) -> &CostRegime {
        &self.baseline
    }

    pub fn stablecoin(&self) -> &CostRegime {
        &self.stablecoin
    }

    pub fn regime(&self, label: RegimeLabel) -> &CostRegime {
        match label {
            RegimeLabel::Baseline => &self.baseline,
            RegimeLabel::Stablecoin => &self.stablecoin,
        }
    }
}

/// Physical output `theta * tfp * x^alpha`.
pub fn production_output(x: f64, theta: f64, params: &ProductionParams) -> Result<f64, EconError> {
    if !(x.is_finite() && x >= 0.0) {
        return Err(EconError::Domain(format!(
            "input quantity must be non-negative and finite, got {x}"
        )));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(EconError::Domain(format!(
            "yield shock must be positive and finite, got {theta}"
        )));
    }
    Ok(theta * params.tfp() * x.powf(params.alpha()))
}

/// `d f / d x = theta * tfp * alpha * x^(alpha - 1)`, defined for `x > 0`.
pub fn marginal_product(x: f64, theta: f64, params: &ProductionParams) -> Result<f64, EconError> {
    if !(x.is_finite() && x > 0.0) {
        return Err(EconError::Domain(format!(
            "marginal product needs a strictly positive input, got {x}"
        )));
    }
    if !(theta.is_finite() && theta > 0.0) {
        return Err(EconError::Domain(format!(
            "yield shock must be positive and finite, got {theta}"
        )));
    }
    Ok(theta * params.tfp() * params.alpha() * x.powf(params.alpha() - 1.0))
}

/// Profit at one realization: `p * f(x; theta) - (w + tau_i) * x - fixed`.
/// The closed-form expected profit evaluates this same expression at the
/// shock means, so at degenerate shocks the two are bit-identical.
fn profit_at(
    x: f64,
    p: f64,
    theta: f64,
    production: &ProductionParams,
    regime: &CostRegime,
) -> Result<f64, EconError> {
    if !(p.is_finite() && p > 0.0) {
        return Err(EconError::Domain(format!(
            "price shock must be positive and finite, got {p}"
        )));
    }
    let revenue = p * production_output(x, theta, production)?;
    Ok(revenue - regime.unit_input_cost() * x - regime.fixed_output_cost())
}

pub fn realized_profit(
    x: f64,
    p: f64,
    theta: f64,
    scenario: &FarmScenario,
    regime: &CostRegime,
) -> Result<f64, EconError> {
    profit_at(x, p, theta, scenario.production(), regime)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMethod {
    /// `E[p] * E[theta] * tfp * x^alpha - (w + tau_i) * x - fixed`, exact
    /// because the shocks are independent.
    ClosedForm,
    /// Sample mean over `n` independent substreams of `seed`.
    MonteCarlo { n: u64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfitEstimate {
    pub value: f64,
    /// Standard error of the estimate: 0 for the closed form and for n = 1.
    pub std_error: f64,
}

pub fn expected_profit(
    x: f64,
    scenario: &FarmScenario,
    regime: &CostRegime,
    method: EvalMethod,
) -> Result<ProfitEstimate, EconError> {
    match method {
        EvalMethod::ClosedForm => {
            let value = profit_at(
                x,
                scenario.price_dist().mean(),
                scenario.yield_dist().mean(),
                scenario.production(),
                regime,
            )?;
            Ok(ProfitEstimate {
                value,
                std_error: 0.0,
            })
        }
        EvalMethod::MonteCarlo { n, seed } => {
            if n == 0 {
                return Err(EconError::InvalidParameter(
                    "monte carlo evaluation needs at least one replicate".into(),
                ));
            }
            // Welford in fixed replicate order keeps the result independent
            // of everything but (n, seed).
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for i in 0..n {
                let mut rng = crate::rng::substream(seed, i);
                let p = scenario.price_dist().sample(&mut rng);
                let theta = scenario.yield_dist().sample(&mut rng);
                let profit = profit_at(x, p, theta, scenario.production(), regime)?;
                let count = (i + 1) as f64;
                let delta = profit - mean;
                mean += delta / count;
                m2 += delta * (profit - mean);
            }
            let std_error = if n > 1 {
                (m2 / (n - 1) as f64 / n as f64).sqrt()
            } else {
                0.0
            };
            Ok(ProfitEstimate {
                value: mean,
                std_error,
            })
        }
    }
}

/// First-order condition residual
/// `E[p] * E[theta] * tfp * alpha * x^(alpha-1) - (w + tau_i)`.
/// Strictly decreasing in `x`; its unique root is the interior optimum.
pub fn foc_residual(x: f64, scenario: &FarmScenario, regime: &CostRegime) -> Result<f64, EconError> {
    let expected_marginal_revenue = scenario.price_dist().mean()
        * marginal_product(x, scenario.yield_dist().mean(), scenario.production())?;
    Ok(expected_marginal_revenue - regime.unit_input_cost())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(tfp: f64, alpha: f64) -> ProductionParams {
        ProductionParams::new(tfp, alpha).unwrap()
    }

    fn regime(w: f64, tau: f64, fixed: f64, cap: CapitalCap) -> CostRegime {
        CostRegime::new(RegimeLabel::Baseline, w, tau, fixed, cap, None).unwrap()
    }

    fn scenario_deg(
        production: ProductionParams,
        p: f64,
        theta: f64,
        base: CostRegime,
    ) -> FarmScenario {
        let stab = CostRegime::new(
            RegimeLabel::Stablecoin,
            base.input_price(),
            base.tau_i(),
            base.fixed_output_cost(),
            base.capital_cap(),
            base.interest_rate(),
        )
        .unwrap();
        FarmScenario::new(
            production,
            ShockDistribution::degenerate(p).unwrap(),
            ShockDistribution::degenerate(theta).unwrap(),
            base,
            stab,
        )
        .unwrap()
    }

    #[test]
    fn production_output_matches_hand_values() {
        let p = params(2.0, 0.5);
        assert_eq!(production_output(4.0, 0.9, &p).unwrap(), 3.6);
        assert_eq!(production_output(0.0, 1.0, &p).unwrap(), 0.0);
    }

    #[test]
    fn production_rejects_bad_domain() {
        let p = params(1.0, 0.5);
        assert!(production_output(-1.0, 1.0, &p).is_err());
        assert!(production_output(1.0, 0.0, &p).is_err());
        assert!(production_output(f64::NAN, 1.0, &p).is_err());
    }

    #[test]
    fn production_params_reject_bad_shapes() {
        assert!(ProductionParams::new(0.0, 0.5).is_err());
        assert!(ProductionParams::new(-1.0, 0.5).is_err());
        assert!(ProductionParams::new(1.0, 0.0).is_err());
        assert!(ProductionParams::new(1.0, 1.0).is_err());
        assert!(ProductionParams::new(1.0, 1.5).is_err());
        assert!(ProductionParams::new(f64::INFINITY, 0.5).is_err());
    }

    #[test]
    fn marginal_product_hand_values_and_finite_difference() {
        let p = params(1.0, 0.5);
        assert_eq!(marginal_product(1.0, 1.0, &p).unwrap(), 0.5);
        assert_eq!(marginal_product(4.0, 1.0, &p).unwrap(), 0.25);
        let p2 = params(3.0, 0.5);
        assert_eq!(marginal_product(1.0, 2.0, &p2).unwrap(), 3.0);

        // Central difference oracle on a grid of points and shapes.
        for &(tfp, alpha) in &[(1.0, 0.5), (2.0, 0.3), (0.7, 0.9)] {
            let pp = params(tfp, alpha);
            for &x in &[0.5, 1.0, 4.0, 25.0] {
                let h = 1e-6 * x;
                let fd = (production_output(x + h, 1.3, &pp).unwrap()
                    - production_output(x - h, 1.3, &pp).unwrap())
                    / (2.0 * h);
                let analytic = marginal_product(x, 1.3, &pp).unwrap();
                assert_relative_eq!(analytic, fd, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn marginal_product_needs_positive_input() {
        let p = params(1.0, 0.5);
        assert!(marginal_product(0.0, 1.0, &p).is_err());
    }

    #[test]
    fn realized_profit_hand_values() {
        let s = scenario_deg(
            params(1.0, 0.5),
            1.0,
            1.0,
            regime(0.4, 0.1, 0.2, CapitalCap::Unconstrained),
        );
        let r = *s.baseline();
        assert_relative_eq!(
            realized_profit(1.0, 1.0, 1.0, &s, &r).unwrap(),
            0.3,
            max_relative = 1e-15
        );
        // Zero input still pays the fixed cost.
        assert_eq!(realized_profit(0.0, 1.0, 1.0, &s, &r).unwrap(), -0.2);

        let s2 = scenario_deg(
            params(2.0, 0.5),
            2.0,
            0.9,
            regime(1.0, 0.2, 0.5, CapitalCap::Unconstrained),
        );
        let r2 = *s2.baseline();
        assert_relative_eq!(
            realized_profit(4.0, 2.0, 0.9, &s2, &r2).unwrap(),
            1.9,
            max_relative = 1e-15
        );
    }

    #[test]
    fn closed_form_expected_profit_hand_value() {
        let s = scenario_deg(
            params(2.0, 0.5),
            2.0,
            0.9,
            regime(1.0, 0.2, 0.0, CapitalCap::Unconstrained),
        );
        let est = expected_profit(2.25, &s, s.baseline(), EvalMethod::ClosedForm).unwrap();
        assert_relative_eq!(est.value, 2.7, max_relative = 1e-15);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn degenerate_expected_profit_is_bit_identical_to_realized() {
        let s = scenario_deg(
            params(1.7, 0.62),
            1.3,
            0.85,
            regime(0.9, 0.07, 0.4, CapitalCap::Unconstrained),
        );
        let r = *s.baseline();
        for &x in &[0.3, 1.0, 7.7] {
            let closed = expected_profit(x, &s, &r, EvalMethod::ClosedForm)
                .unwrap()
                .value;
            let realized = realized_profit(x, 1.3, 0.85, &s, &r).unwrap();
            assert_eq!(closed.to_bits(), realized.to_bits());
            let mc = expected_profit(x, &s, &r, EvalMethod::MonteCarlo { n: 10, seed: 9 })
                .unwrap();
            assert_eq!(mc.value.to_bits(), closed.to_bits());
            assert_eq!(mc.std_error, 0.0);
        }
    }

    #[test]
    fn monte_carlo_tracks_closed_form() {
        let s = FarmScenario::new(
            params(2.0, 0.5),
            ShockDistribution::log_normal(0.2, 0.3).unwrap(),
            ShockDistribution::discrete(vec![(0.8, 0.3), (1.0, 0.5), (1.2, 0.2)]).unwrap(),
            regime(1.0, 0.2, 0.5, CapitalCap::Unconstrained),
            CostRegime::new(
                RegimeLabel::Stablecoin,
                1.0,
                0.05,
                0.2,
                CapitalCap::Unconstrained,
                None,
            )
            .unwrap(),
        )
        .unwrap();
        let closed = expected_profit(3.0, &s, s.baseline(), EvalMethod::ClosedForm).unwrap();
        let mc = expected_profit(
            3.0,
            &s,
            s.baseline(),
            EvalMethod::MonteCarlo { n: 40_000, seed: 11 },
        )
        .unwrap();
        assert!(mc.std_error > 0.0);
        assert!(
            (mc.value - closed.value).abs() <= 4.0 * mc.std_error,
            "mc {} vs closed {} with se {}",
            mc.value,
            closed.value,
            mc.std_error
        );
    }

    #[test]
    fn monte_carlo_is_reproducible_and_order_fixed() {
        let s = FarmScenario::new(
            params(1.0, 0.4),
            ShockDistribution::log_normal(0.0, 0.25).unwrap(),
            ShockDistribution::degenerate(1.0).unwrap(),
            regime(0.5, 0.1, 0.0, CapitalCap::Unconstrained),
            CostRegime::new(
                RegimeLabel::Stablecoin,
                0.5,
                0.1,
                0.0,
                CapitalCap::Unconstrained,
                None,
            )
            .unwrap(),
        )
        .unwrap();
        let method = EvalMethod::MonteCarlo { n: 500, seed: 3 };
        let a = expected_profit(1.0, &s, s.baseline(), method).unwrap();
        let b = expected_profit(1.0, &s, s.baseline(), method).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
    }

    #[test]
    fn monte_carlo_rejects_zero_replicates() {
        let s = scenario_deg(
            params(1.0, 0.5),
            1.0,
            1.0,
            regime(0.5, 0.0, 0.0, CapitalCap::Unconstrained),
        );
        assert!(expected_profit(
            1.0,
            &s,
            s.baseline(),
            EvalMethod::MonteCarlo { n: 0, seed: 1 }
        )
        .is_err());
    }

    #[test]
    fn foc_residual_hand_values() {
        let s = scenario_deg(
            params(1.0, 0.5),
            1.0,
            1.0,
            regime(0.4, 0.1, 0.0, CapitalCap::Unconstrained),
        );
        let r = *s.baseline();
        assert_eq!(foc_residual(1.0, &s, &r).unwrap(), 0.0);
        assert_eq!(foc_residual(0.25, &s, &r).unwrap(), 0.5);
        assert_eq!(foc_residual(4.0, &s, &r).unwrap(), -0.25);
    }

    #[test]
    fn shock_distribution_means() {
        assert_eq!(ShockDistribution::degenerate(2.5).unwrap().mean(), 2.5);
        let ln = ShockDistribution::log_normal(0.0, 0.5).unwrap();
        assert_relative_eq!(ln.mean(), (0.125f64).exp(), max_relative = 1e-15);
        let d =
            ShockDistribution::discrete(vec![(0.8, 0.3), (1.0, 0.5), (1.2, 0.2)]).unwrap();
        assert_relative_eq!(d.mean(), 0.98, max_relative = 1e-15);
    }

    #[test]
    fn shock_distribution_rejects_bad_parameters() {
        assert!(ShockDistribution::degenerate(0.0).is_err());
        assert!(ShockDistribution::degenerate(-1.0).is_err());
        assert!(ShockDistribution::log_normal(f64::NAN, 0.1).is_err());
        assert!(ShockDistribution::log_normal(0.0, -0.1).is_err());
        assert!(ShockDistribution::log_normal(800.0, 1.0).is_err());
        assert!(ShockDistribution::discrete(vec![]).is_err());
        assert!(ShockDistribution::discrete(vec![(1.0, 0.5), (2.0, 0.6)]).is_err());
        assert!(ShockDistribution::discrete(vec![(0.0, 1.0)]).is_err());
        assert!(ShockDistribution::discrete(vec![(1.0, -0.1), (2.0, 1.1)]).is_err());
    }

    #[test]
    fn discrete_sampling_respects_weights() {
        let d = ShockDistribution::discrete(vec![(1.0, 0.25), (2.0, 0.75)]).unwrap();
        let mut rng = crate::rng::substream(5, 0);
        let n = 20_000;
        let hits = (0..n).filter(|_| d.sample(&mut rng) == 2.0).count();
        let freq = hits as f64 / n as f64;
        assert!((freq - 0.75).abs() < 0.02, "frequency {freq}");
    }

    #[test]
    fn cost_regime_interest_annotation_must_fit_inside_tau() {
        // tau_i = 0.1 with r * w = 0.06 decomposes fine.
        let ok = CostRegime::new(
            RegimeLabel::Baseline,
            0.4,
            0.1,
            0.2,
            CapitalCap::Unconstrained,
            Some(0.15),
        );
        assert!(ok.is_ok());
        assert_relative_eq!(ok.unwrap().fee_component().unwrap(), 0.04, epsilon = 1e-15);
        // r * w = 0.2 cannot fit inside tau_i = 0.1.
        assert!(CostRegime::new(
            RegimeLabel::Baseline,
            0.4,
            0.1,
            0.2,
            CapitalCap::Unconstrained,
            Some(0.5),
        )
        .is_err());
    }

    #[test]
    fn cost_regime_rejects_bad_parameters() {
        let cap = CapitalCap::Unconstrained;
        assert!(CostRegime::new(RegimeLabel::Baseline, 0.0, 0.1, 0.0, cap, None).is_err());
        assert!(CostRegime::new(RegimeLabel::Baseline, 1.0, -0.1, 0.0, cap, None).is_err());
        assert!(CostRegime::new(RegimeLabel::Baseline, 1.0, 0.1, -1.0, cap, None).is_err());
        assert!(CostRegime::new(
            RegimeLabel::Baseline,
            1.0,
            0.1,
            0.0,
            CapitalCap::Finite(0.0),
            None
        )
        .is_err());
    }

    #[test]
    fn scenario_enforces_regime_ordering() {
        let production = params(1.0, 0.5);
        let price = ShockDistribution::degenerate(1.0).unwrap();
        let yld = ShockDistribution::degenerate(1.0).unwrap();
        let base = regime(0.4, 0.1, 0.2, CapitalCap::Finite(1.0));

        let worse_tau = CostRegime::new(
            RegimeLabel::Stablecoin,
            0.4,
            0.2,
            0.2,
            CapitalCap::Finite(1.0),
            None,
        )
        .unwrap();
        let err = FarmScenario::new(
            production,
            price.clone(),
            yld.clone(),
            base,
            worse_tau,
        )
        .unwrap_err();
        assert!(err.to_string().contains("tau_i"));

        let tighter_cap = CostRegime::new(
            RegimeLabel::Stablecoin,
            0.4,
            0.1,
            0.2,
            CapitalCap::Finite(0.5),
            None,
        )
        .unwrap();
        assert!(FarmScenario::new(production, price.clone(), yld.clone(), base, tighter_cap)
            .is_err());

        let wrong_label = regime(0.4, 0.1, 0.2, CapitalCap::Finite(1.0));
        assert!(FarmScenario::new(production, price, yld, base, wrong_label).is_err());
    }

    #[test]
    fn capital_cap_ordering() {
        use CapitalCap::*;
        assert!(Unconstrained.at_least(&Unconstrained));
        assert!(Unconstrained.at_least(&Finite(5.0)));
        assert!(!Finite(5.0).at_least(&Unconstrained));
        assert!(Finite(5.0).at_least(&Finite(5.0)));
        assert!(Finite(6.0).at_least(&Finite(5.0)));
        assert!(!Finite(4.0).at_least(&Finite(5.0)));
    }
}
