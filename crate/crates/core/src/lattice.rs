//! Per-step parameters of the defaultable-stock binomial tree.
//!
//! Over one step of length `dt` the stock moves to `S*u`, `S*d` or, on
//! default, to `S*(1 - eta)`. The multipliers are the usual CRR pair
//! `u = exp(sigma*sqrt(dt))`, `d = 1/u`; the default branch carries the
//! Poisson jump probability `1 - exp(-lambda*dt)` and the up probability is
//! chosen so that the one-step mean grows at the risk-free rate exactly.

use crate::error::{PricingError, Result};
use crate::intensity::HazardModel;

/// Absolute tolerance on `p_down` when deciding whether a step is valid.
///
/// Steps with `-PROB_TOLERANCE <= p_down < 0` are accepted and snapped to
/// `p_down = 0`.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Flat risk-free rate and lognormal volatility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketState {
    /// Continuously compounded risk-free rate, per year.
    pub rate: f64,
    /// Lognormal volatility, per sqrt(year).
    pub sigma: f64,
}

impl MarketState {
    pub fn new(rate: f64, sigma: f64) -> Result<Self> {
        let market = Self { rate, sigma };
        market.validate()?;
        Ok(market)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(PricingError::InvalidInput(format!(
                "risk-free rate must be > 0, got {}",
                self.rate
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(PricingError::InvalidInput(format!(
                "volatility must be > 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// How the stock behaves on default: the fractional drop `eta` and the
/// intensity model driving the jump.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DefaultSpec {
    pub eta: f64,
    pub hazard: HazardModel,
}

impl DefaultSpec {
    pub fn new(eta: f64, hazard: HazardModel) -> Result<Self> {
        validate_eta(eta)?;
        hazard.validate()?;
        Ok(Self { eta, hazard })
    }
}

pub(crate) fn validate_eta(eta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eta) {
        Ok(())
    } else {
        Err(PricingError::InvalidInput(format!(
            "default drop eta must lie in [0, 1], got {eta}"
        )))
    }
}

/// Multipliers and branch probabilities of a single tree step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub up: f64,
    pub down: f64,
    pub p_up: f64,
    pub p_down: f64,
    pub p_default: f64,
    /// Step length in years.
    pub dt: f64,
    /// Intensity used for the default branch, per year.
    pub lambda: f64,
}

impl StepParams {
    /// Survival probability over the step, `exp(-lambda*dt)`.
    pub fn survival(&self) -> f64 {
        (-self.lambda * self.dt).exp()
    }

    /// True when all three probabilities lie in `[0, 1]`, up to
    /// [`PROB_TOLERANCE`].
    pub fn is_valid(&self) -> bool {
        let in_unit = |p: f64| (-PROB_TOLERANCE..=1.0 + PROB_TOLERANCE).contains(&p);
        in_unit(self.p_up) && in_unit(self.p_down) && in_unit(self.p_default)
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(PricingError::InvalidStep {
                p_up: self.p_up,
                p_down: self.p_down,
                p_default: self.p_default,
            })
        }
    }
}

fn validate_step_inputs(market: &MarketState, lambda: f64, dt: f64) -> Result<()> {
    market.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(PricingError::InvalidInput(format!(
            "time step must be > 0, got {dt}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(PricingError::InvalidInput(format!(
            "intensity must be >= 0, got {lambda}"
        )));
    }
    Ok(())
}

/// Step quantities that do not depend on the intensity, so that node-local
/// hazards only cost one exponential per node.
#[derive(Debug, Clone, Copy)]
pub(crate) struct StepKernel {
    up: f64,
    down: f64,
    growth: f64,
    eta: f64,
    dt: f64,
}

impl StepKernel {
    pub(crate) fn new(rate: f64, eta: f64, dt: f64, up: f64) -> Self {
        Self {
            up,
            down: 1.0 / up,
            growth: (rate * dt).exp_m1(),
            eta,
            dt,
        }
    }

    /// Probabilities with no validity check.
    ///
    /// The up-probability numerator `exp(r dt) - s d - (1 - eta)(1 - s)` is
    /// rearranged into the sum of non-negative terms
    /// `expm1(r dt) + eta (1 - s) + s (1 - d)`, which avoids cancellation.
    pub(crate) fn step(&self, lambda: f64) -> StepParams {
        let survival = (-lambda * self.dt).exp();
        let p_default = 1.0 - survival;
        let numerator = self.growth + self.eta * p_default + survival * (1.0 - self.down);
        let p_up = numerator / (self.up - self.down);
        StepParams {
            up: self.up,
            down: self.down,
            p_up,
            p_down: survival - p_up,
            p_default,
            dt: self.dt,
            lambda,
        }
    }
}

fn probabilities(rate: f64, eta: f64, lambda: f64, dt: f64, up: f64) -> StepParams {
    StepKernel::new(rate, eta, dt, up).step(lambda)
}

/// Step parameters without the hazard-step check. Probabilities may fall
/// outside `[0, 1]` when the step is too coarse.
pub fn step_params_unchecked(
    market: &MarketState,
    eta: f64,
    lambda: f64,
    dt: f64,
) -> Result<StepParams> {
    validate_step_inputs(market, lambda, dt)?;
    validate_eta(eta)?;
    let up = (market.sigma * dt.sqrt()).exp();
    Ok(probabilities(market.rate, eta, lambda, dt, up))
}

/// Largest admissible `lambda * dt` for the given market and step:
/// `ln((u - (1 - eta)) / (exp(r dt) - (1 - eta)))`.
///
/// A step is valid iff `lambda * dt` does not exceed this bound.
pub fn max_hazard_step(market: &MarketState, eta: f64, dt: f64) -> Result<f64> {
    validate_step_inputs(market, 0.0, dt)?;
    validate_eta(eta)?;
    Ok(hazard_bound(
        market.rate,
        eta,
        dt,
        (market.sigma * dt.sqrt()).exp_m1(),
    ))
}

/// `ln((u - 1 + eta) / (exp(r dt) - 1 + eta))` with `u - 1` passed in.
pub(crate) fn hazard_bound(rate: f64, eta: f64, dt: f64, up_minus_one: f64) -> f64 {
    let growth = (rate * dt).exp_m1();
    ((up_minus_one - growth) / (growth + eta)).ln_1p()
}

/// Validated step parameters of the defaultable-stock tree.
///
/// Fails with [`PricingError::StepTooCoarse`] when `p_down` is negative
/// beyond [`PROB_TOLERANCE`]; the error carries the admissible bound so the
/// caller can refine the step.
pub fn build_step_params(
    market: &MarketState,
    eta: f64,
    lambda: f64,
    dt: f64,
) -> Result<StepParams> {
    let step = step_params_unchecked(market, eta, lambda, dt)?;
    accept(step, || max_hazard_step(market, eta, dt))
}

pub(crate) fn accept(
    mut step: StepParams,
    bound: impl FnOnce() -> Result<f64>,
) -> Result<StepParams> {
    if step.p_down >= 0.0 {
        return Ok(step);
    }
    if step.p_down >= -PROB_TOLERANCE {
        step.p_down = 0.0;
        step.p_up = step.survival();
        return Ok(step);
    }
    Err(PricingError::StepTooCoarse {
        hazard_step: step.lambda * step.dt,
        max_hazard_step: bound()?,
    })
}

/// Effective diffusion coefficient of the comparison tree, `sqrt(sigma^2 - lambda)`.
///
/// `sigma^2 <= lambda` (up to a few ulps, so that `sigma = 0.2, lambda = 0.04`
/// counts as equal) is rejected with [`PricingError::DegenerateVolatility`].
pub fn hull_diffusion(market: &MarketState, lambda: f64) -> Result<f64> {
    let sigma_sq = market.sigma * market.sigma;
    let excess = sigma_sq - lambda;
    if excess <= 8.0 * f64::EPSILON * sigma_sq.max(lambda) {
        return Err(PricingError::DegenerateVolatility { sigma_sq, lambda });
    }
    Ok(excess.sqrt())
}

/// Step parameters of the total-default comparison tree, whose multipliers
/// use the reduced variance `sigma^2 - lambda`.
///
/// Probabilities follow the total-default formulas (`eta = 1`) and are not
/// validated here; see [`StepParams::is_valid`].
pub fn hull_step_params(market: &MarketState, lambda: f64, dt: f64) -> Result<StepParams> {
    validate_step_inputs(market, lambda, dt)?;
    let diffusion = hull_diffusion(market, lambda)?;
    let up = (diffusion * dt.sqrt()).exp();
    Ok(probabilities(market.rate, 1.0, lambda, dt, up))
}

/// Total-default hazard-step bound of the comparison tree, evaluated with its
/// reduced multipliers.
pub fn hull_max_hazard_step(market: &MarketState, lambda: f64, dt: f64) -> Result<f64> {
    validate_step_inputs(market, lambda, dt)?;
    let diffusion = hull_diffusion(market, lambda)?;
    Ok(hazard_bound(
        market.rate,
        1.0,
        dt,
        (diffusion * dt.sqrt()).exp_m1(),
    ))
}

/// Validated variant of [`hull_step_params`]; the bound reported on failure
/// comes from [`hull_max_hazard_step`].
pub fn hull_step_params_checked(market: &MarketState, lambda: f64, dt: f64) -> Result<StepParams> {
    let step = hull_step_params(market, lambda, dt)?;
    accept(step, || hull_max_hazard_step(market, lambda, dt))
}
