//! Backward induction on the defaultable-stock tree.
//!
//! Each interior node takes the discounted expectation over the up, down and
//! default branches, adds the survival-weighted present value of any coupon
//! paid inside the step, and then applies the embedded provisions. Default pays
//! `max(R N, k (1 - eta) S)` with `k` the conversion ratio at the end of the
//! step.
//!
//! Under the synthesis model the intensity is node-local while the multipliers
//! stay global, so the lattice still recombines. Nodes whose intensity would
//! break the hazard-step bound are clamped to the bound (`p_down = 0`) and
//! counted in [`PriceResult::clamped_nodes`].

use rayon::prelude::*;

use crate::error::{PricingError, Result};
use crate::instrument::{year_fraction, ConvertibleTerms, Date, Provisions};
use crate::intensity::HazardModel;
use crate::lattice::{
    accept, build_step_params, hazard_bound, hull_diffusion, hull_step_params_checked, DefaultSpec,
    MarketState, StepKernel, StepParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Constant intensity `lambda0`.
    ConstantIntensity,
    /// Power-law intensity evaluated at every node.
    Synthesis,
    /// Total-default tree with multipliers built from `sigma^2 - lambda`.
    Hull2011,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ConstantIntensity => "constant",
            ModelKind::Synthesis => "synthesis",
            ModelKind::Hull2011 => "hull",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = PricingError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(ModelKind::ConstantIntensity),
            "synthesis" => Ok(ModelKind::Synthesis),
            "hull" => Ok(ModelKind::Hull2011),
            other => Err(PricingError::InvalidInput(format!(
                "unknown model {other:?} (expected constant, synthesis or hull)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingConfig {
    pub n_steps: usize,
    pub model: ModelKind,
    /// Stock price at the valuation date.
    pub spot: f64,
    pub valuation_date: Date,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceResult {
    pub value: f64,
    /// Hedge ratio in shares, `(V+ - V-) / (S (u - d))`.
    pub delta: f64,
    /// Stock floor of the synthesis tree.
    pub floor: Option<f64>,
    /// Value obtained by the linear extension below the floor.
    pub floor_extended: bool,
    /// Smallest `B - lambda dt` over the evaluated nodes, with `B` the
    /// admissible hazard step. Negative only when nodes were clamped.
    pub step_margin: f64,
    /// Synthesis nodes whose intensity was clamped to the hazard-step bound.
    pub clamped_nodes: usize,
}

/// Holder's payoff when default strikes at `date` with the stock at `spot`
/// just before the jump.
pub fn default_payoff(terms: &ConvertibleTerms, spot: f64, eta: f64, date: Date) -> f64 {
    recovery_payoff(
        terms.recovery * terms.face,
        terms.provisions_at(date).conversion_ratio,
        eta,
        spot,
    )
}

fn recovery_payoff(recovered: f64, ratio: Option<f64>, eta: f64, spot: f64) -> f64 {
    match ratio {
        Some(k) => recovered.max(k * (1.0 - eta) * spot),
        None => recovered,
    }
}

/// Present value at the start of a step of a coupon paid `offset` years into
/// the step, conditional on surviving the whole step.
pub fn coupon_present_value(amount: f64, offset: f64, rate: f64, step: &StepParams) -> f64 {
    amount * (-rate * offset - step.lambda * step.dt).exp()
}

/// One node of backward induction:
/// `exp(-r dt) (p_up V+ + p_down V- + p_default X) + coupon_pv`.
pub fn rollback_step(
    v_up: f64,
    v_down: f64,
    default_value: f64,
    step: &StepParams,
    rate: f64,
    coupon_pv: f64,
) -> Result<f64> {
    step.check()?;
    Ok(rollback_unchecked(v_up, v_down, default_value, step, rate) + coupon_pv)
}

#[inline]
fn rollback_unchecked(v_up: f64, v_down: f64, x: f64, step: &StepParams, rate: f64) -> f64 {
    (-rate * step.dt).exp() * (step.p_up * v_up + step.p_down * v_down + step.p_default * x)
}

/// Embedded options on top of the continuation value:
/// `max(conv, put, min(continuation, max(call, conv)))`, where an inactive
/// conversion or put counts as `-inf` and an inactive call as `+inf`.
///
/// A call forces conversion whenever conversion is worth more than the call
/// price.
pub fn apply_provisions(continuation: f64, spot: f64, provisions: &Provisions) -> f64 {
    let conversion = provisions
        .conversion_ratio
        .map_or(f64::NEG_INFINITY, |k| k * spot);
    let call = provisions.call_price.unwrap_or(f64::INFINITY);
    let put = provisions.put_price.unwrap_or(f64::NEG_INFINITY);
    conversion
        .max(put)
        .max(continuation.min(call.max(conversion)))
}

/// Intensity source for the rollback.
enum NodeHazard {
    Shared(StepParams),
    Local {
        model: HazardModel,
        kernel: StepKernel,
        lambda_cap: f64,
    },
}

struct Prepared {
    dt: f64,
    log_up: f64,
    eta: f64,
    hazard: NodeHazard,
    bound: f64,
    floor: Option<f64>,
}

fn validate_config(terms: &ConvertibleTerms, config: &PricingConfig) -> Result<()> {
    terms.validate()?;
    if config.n_steps == 0 {
        return Err(PricingError::InvalidInput("n_steps must be >= 1".into()));
    }
    if config.valuation_date < terms.issue_date || config.valuation_date >= terms.maturity_date {
        return Err(PricingError::InvalidInput(format!(
            "valuation date {} must lie in [{}, {})",
            config.valuation_date, terms.issue_date, terms.maturity_date
        )));
    }
    Ok(())
}

fn prepare(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    config: &PricingConfig,
) -> Result<Prepared> {
    validate_config(terms, config)?;
    market.validate()?;
    spec.hazard.validate()?;
    let horizon = year_fraction(config.valuation_date, terms.maturity_date);
    let dt = horizon / config.n_steps as f64;
    let lambda0 = spec.hazard.lambda0();
    match config.model {
        ModelKind::ConstantIntensity => {
            let step = build_step_params(market, spec.eta, lambda0, dt)?;
            let bound = hazard_bound(market.rate, spec.eta, dt, step.up - 1.0);
            Ok(Prepared {
                dt,
                log_up: market.sigma * dt.sqrt(),
                eta: spec.eta,
                hazard: NodeHazard::Shared(step),
                bound,
                floor: None,
            })
        }
        ModelKind::Hull2011 => {
            let diffusion = hull_diffusion(market, lambda0)?;
            let step = hull_step_params_checked(market, lambda0, dt)?;
            Ok(Prepared {
                dt,
                log_up: diffusion * dt.sqrt(),
                eta: 1.0,
                hazard: NodeHazard::Shared(step),
                bound: hazard_bound(market.rate, 1.0, dt, step.up - 1.0),
                floor: None,
            })
        }
        ModelKind::Synthesis => {
            if spec.hazard.is_constant() {
                return Err(PricingError::InvalidInput(
                    "the synthesis model needs a power-law hazard".into(),
                ));
            }
            crate::lattice::validate_eta(spec.eta)?;
            let log_up = market.sigma * dt.sqrt();
            let up = log_up.exp();
            let bound = hazard_bound(market.rate, spec.eta, dt, log_up.exp_m1());
            let floor = spec.hazard.stock_floor(market, spec.eta, dt)?;
            Ok(Prepared {
                dt,
                log_up,
                eta: spec.eta,
                hazard: NodeHazard::Local {
                    model: spec.hazard,
                    kernel: StepKernel::new(market.rate, spec.eta, dt, up),
                    lambda_cap: bound / dt,
                },
                bound,
                floor,
            })
        }
    }
}

/// Values the convertible at `config.spot`.
pub fn price(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    config: &PricingConfig,
) -> Result<PriceResult> {
    let prepared = prepare(terms, market, spec, config)?;
    if !(config.spot > 0.0 && config.spot.is_finite()) {
        return Err(PricingError::InvalidInput(format!(
            "spot must be > 0, got {}",
            config.spot
        )));
    }
    if let Some(floor) = prepared.floor {
        if config.spot < floor {
            return Err(PricingError::FloorUnreachable {
                spot: config.spot,
                floor,
            });
        }
    }
    rollback(terms, market, config, &prepared, config.spot)
}

fn rollback(
    terms: &ConvertibleTerms,
    market: &MarketState,
    config: &PricingConfig,
    prepared: &Prepared,
    spot: f64,
) -> Result<PriceResult> {
    let n = config.n_steps;
    let rate = market.rate;
    let dt = prepared.dt;
    let recovered = terms.recovery * terms.face;
    let levels = terms.level_provisions(config.valuation_date, n);
    let coupons = terms.coupon_step_factors(config.valuation_date, n, rate);

    // spot * u^k for k = -n..=n
    let spots: Vec<f64> = (0..=2 * n)
        .map(|k| spot * ((k as f64 - n as f64) * prepared.log_up).exp())
        .collect();
    let node_spot = |level: usize, ups: usize| spots[n + 2 * ups - level];

    let mut values: Vec<f64> = (0..=n)
        .map(|j| {
            let s = node_spot(n, j);
            match levels[n].conversion_ratio {
                Some(k) => terms.redemption.max(k * s),
                None => terms.redemption,
            }
        })
        .collect();

    let mut step_margin = f64::INFINITY;
    let mut clamped_nodes = 0usize;
    if let NodeHazard::Shared(step) = &prepared.hazard {
        step_margin = prepared.bound - step.lambda * step.dt;
    }
    // level-1 values; with a single step they are the terminal layer
    let mut children = (values[0], values[1]);

    for level in (0..n).rev() {
        let provisions = &levels[level];
        let ratio_next = levels[level + 1].conversion_ratio;
        let coupon = coupons[level];
        for j in 0..=level {
            let s = node_spot(level, j);
            let step = match &prepared.hazard {
                NodeHazard::Shared(step) => *step,
                NodeHazard::Local {
                    model,
                    kernel,
                    lambda_cap,
                } => {
                    let raw = model.hazard_at(s)?;
                    step_margin = step_margin.min(prepared.bound - raw * dt);
                    let lambda = if raw > *lambda_cap {
                        clamped_nodes += 1;
                        *lambda_cap
                    } else {
                        raw
                    };
                    accept(kernel.step(lambda), || Ok(prepared.bound))?
                }
            };
            let x = recovery_payoff(recovered, ratio_next, prepared.eta, s);
            let coupon_pv = if coupon == 0.0 {
                0.0
            } else {
                coupon * step.survival()
            };
            let continuation = rollback_step(values[j + 1], values[j], x, &step, rate, coupon_pv)?;
            values[j] = apply_provisions(continuation, s, provisions);
        }
        if level == 1 {
            children = (values[0], values[1]);
        }
    }
    let (v_down, v_up) = children;
    let up = prepared.log_up.exp();
    let delta = (v_up - v_down) / (spot * (up - 1.0 / up));
    Ok(PriceResult {
        value: values[0],
        delta,
        floor: prepared.floor,
        floor_extended: false,
        step_margin,
        clamped_nodes,
    })
}

/// Values over an ascending list of spots.
///
/// Under the synthesis model spots below the stock floor are filled by the
/// straight line from `(0, R N)` to `(S*, V(S*))` and flagged
/// `floor_extended`. Valuations run in parallel; output order follows `spots`.
pub fn price_profile(
    terms: &ConvertibleTerms,
    market: &MarketState,
    spec: &DefaultSpec,
    config: &PricingConfig,
    spots: &[f64],
) -> Result<Vec<(f64, PriceResult)>> {
    if spots.is_empty() {
        return Err(PricingError::InvalidInput("spot grid is empty".into()));
    }
    if spots.windows(2).any(|w| w[0].is_nan() || w[0] > w[1]) {
        return Err(PricingError::InvalidInput(
            "spot grid must be ascending".into(),
        ));
    }
    let allow_zero = config.model == ModelKind::Synthesis;
    if spots
        .iter()
        .any(|&s| !s.is_finite() || s < 0.0 || (s == 0.0 && !allow_zero))
    {
        return Err(PricingError::InvalidInput(
            "spots must be positive (zero is allowed only for the synthesis model)".into(),
        ));
    }
    let prepared = prepare(terms, market, spec, config)?;

    let anchor = match prepared.floor {
        Some(floor) if spots[0] < floor => {
            let at_floor = rollback(terms, market, config, &prepared, floor)?;
            Some((floor, at_floor))
        }
        _ => None,
    };
    let recovered = terms.recovery * terms.face;

    spots
        .par_iter()
        .map(|&spot| {
            let result = match anchor {
                Some((floor, at_floor)) if spot < floor => {
                    let slope = (at_floor.value - recovered) / floor;
                    PriceResult {
                        value: recovered + slope * spot,
                        delta: slope,
                        floor_extended: true,
                        ..at_floor
                    }
                }
                _ => rollback(terms, market, config, &prepared, spot)?,
            };
            Ok((spot, result))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{ConversionPeriod, Window};

    fn step(p_up: f64, p_down: f64, p_default: f64, dt: f64) -> StepParams {
        StepParams {
            up: 1.1,
            down: 1.0 / 1.1,
            p_up,
            p_down,
            p_default,
            dt,
            lambda: 0.0,
        }
    }

    #[test]
    fn default_payoff_cases() {
        let mut terms = ConvertibleTerms::example_five_year();
        let date = terms.issue_date;
        assert_eq!(default_payoff(&terms, 500.0, 1.0, date), 40.0);
        assert!((default_payoff(&terms, 100.0, 0.3, date) - 70.0).abs() < 1e-12);
        assert_eq!(default_payoff(&terms, 40.0, 0.3, date), 40.0);
        terms.conversion.clear();
        assert_eq!(default_payoff(&terms, 500.0, 0.0, date), 40.0);
    }

    #[test]
    fn rollback_cases() {
        let v = rollback_step(110.0, 90.0, 0.0, &step(0.5, 0.5, 0.0, 0.01), 0.0, 0.0).unwrap();
        assert_eq!(v, 100.0);
        let v = rollback_step(110.0, 90.0, 40.0, &step(0.0, 0.0, 1.0, 0.01), 0.0, 0.0).unwrap();
        assert_eq!(v, 40.0);
        let err = rollback_step(1.0, 1.0, 1.0, &step(1.2, -0.2, 0.0, 0.01), 0.0, 0.0);
        assert!(matches!(err, Err(PricingError::InvalidStep { .. })));
    }

    #[test]
    fn one_step_hand_rollback() {
        // Frozen from a 40-digit evaluation.
        let market = MarketState::new(0.05, 0.2).unwrap();
        let step = build_step_params(&market, 1.0, 0.02, 0.01).unwrap();
        let v = rollback_step(100.0, 100.0, 40.0, &step, 0.05, 0.0).unwrap();
        assert!((v - 99.938_019_695_737_37).abs() < 1e-11);
    }

    #[test]
    fn provision_cases() {
        let none = Provisions::none();
        assert_eq!(apply_provisions(123.0, 50.0, &none), 123.0);
        let conv = Provisions {
            conversion_ratio: Some(1.0),
            ..Provisions::none()
        };
        assert_eq!(apply_provisions(150.0, 200.0, &conv), 200.0);
        let called = Provisions {
            conversion_ratio: Some(1.0),
            call_price: Some(110.0),
            put_price: None,
        };
        assert_eq!(apply_provisions(130.0, 90.0, &called), 110.0);
        assert_eq!(apply_provisions(130.0, 120.0, &called), 120.0);
        let put = Provisions {
            put_price: Some(105.0),
            ..Provisions::none()
        };
        assert_eq!(apply_provisions(80.0, 10.0, &put), 105.0);
    }

    fn straight_bond() -> ConvertibleTerms {
        let mut terms = ConvertibleTerms::example_five_year().without_provisions();
        terms.conversion.clear();
        terms
    }

    fn config(model: ModelKind, n_steps: usize, spot: f64) -> PricingConfig {
        PricingConfig {
            n_steps,
            model,
            spot,
            valuation_date: ConvertibleTerms::example_five_year().issue_date,
        }
    }

    #[test]
    fn default_free_straight_bond_is_discounting() {
        let terms = straight_bond();
        let market = MarketState::new(0.05, 0.25).unwrap();
        let spec = DefaultSpec::new(1.0, HazardModel::constant(0.0).unwrap()).unwrap();
        let result = price(
            &terms,
            &market,
            &spec,
            &config(ModelKind::ConstantIntensity, 200, 50.0),
        )
        .unwrap();
        let horizon = year_fraction(terms.issue_date, terms.maturity_date);
        assert!((result.value - 100.0 * (-0.05 * horizon).exp()).abs() < 1e-10);
        assert!(result.delta.abs() < 1e-12);
    }

    #[test]
    fn single_step_tree() {
        let mut terms = straight_bond();
        terms.conversion.push(ConversionPeriod {
            window: Window::new(terms.issue_date, terms.maturity_date),
            ratio: 1.0,
        });
        let market = MarketState::new(0.05, 0.25).unwrap();
        let spec = DefaultSpec::new(1.0, HazardModel::constant(0.02).unwrap()).unwrap();
        let result = price(
            &terms,
            &market,
            &spec,
            &config(ModelKind::ConstantIntensity, 1, 100.0),
        )
        .unwrap();
        assert!(result.value > 0.0 && result.delta > 0.0);
    }

    #[test]
    fn coarse_constant_tree_is_rejected() {
        let terms = straight_bond();
        let market = MarketState::new(0.05, 0.25).unwrap();
        let spec = DefaultSpec::new(1.0, HazardModel::constant(2.0).unwrap()).unwrap();
        let err = price(
            &terms,
            &market,
            &spec,
            &config(ModelKind::ConstantIntensity, 5, 50.0),
        )
        .unwrap_err();
        assert_eq!(err.token(), "STEP_TOO_COARSE");
    }

    #[test]
    fn synthesis_below_floor() {
        let terms = ConvertibleTerms::example_five_year();
        let market = MarketState::new(0.05, 0.25).unwrap();
        let spec = DefaultSpec::new(1.0, HazardModel::power(0.062, -0.5, 50.0).unwrap()).unwrap();
        let cfg = config(ModelKind::Synthesis, 100, 50.0);
        let floor = price(&terms, &market, &spec, &cfg).unwrap().floor.unwrap();
        let err = price(
            &terms,
            &market,
            &spec,
            &PricingConfig {
                spot: 0.5 * floor,
                ..cfg
            },
        )
        .unwrap_err();
        assert_eq!(err.token(), "FLOOR_UNREACHABLE");

        let grid = [0.0, 0.5 * floor, floor, 2.0 * floor, 50.0];
        let profile = price_profile(&terms, &market, &spec, &cfg, &grid).unwrap();
        assert_eq!(profile[0].1.value, 40.0);
        assert!(profile[0].1.floor_extended && profile[1].1.floor_extended);
        assert!(!profile[2].1.floor_extended);
        let at_floor = profile[2].1.value;
        assert!((profile[1].1.value - (40.0 + 0.5 * (at_floor - 40.0))).abs() < 1e-12);
        let direct = price(&terms, &market, &spec, &PricingConfig { spot: 50.0, ..cfg }).unwrap();
        assert_eq!(profile[4].1, direct);
    }

    #[test]
    fn profile_validates_grid() {
        let terms = ConvertibleTerms::example_five_year();
        let market = MarketState::new(0.05, 0.25).unwrap();
        let spec = DefaultSpec::new(1.0, HazardModel::constant(0.062).unwrap()).unwrap();
        let cfg = config(ModelKind::ConstantIntensity, 50, 50.0);
        assert!(price_profile(&terms, &market, &spec, &cfg, &[]).is_err());
        assert!(price_profile(&terms, &market, &spec, &cfg, &[20.0, 10.0]).is_err());
        assert!(price_profile(&terms, &market, &spec, &cfg, &[0.0, 10.0]).is_err());
    }
}
