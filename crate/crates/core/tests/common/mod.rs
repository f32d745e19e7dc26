#![allow(dead_code)]

use cbond::instrument::{year_fraction, ConversionPeriod, Window};
use cbond::{ConvertibleTerms, DefaultSpec, HazardModel, MarketState, ModelKind, PricingConfig};
use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

pub fn worked_market() -> MarketState {
    MarketState::new(0.05, 0.25).unwrap()
}

pub fn constant_spec(lambda: f64) -> DefaultSpec {
    DefaultSpec::new(1.0, HazardModel::constant(lambda).unwrap()).unwrap()
}

pub fn synthesis_spec() -> DefaultSpec {
    DefaultSpec::new(1.0, HazardModel::power(0.062, -0.5, 50.0).unwrap()).unwrap()
}

pub fn config(
    terms: &ConvertibleTerms,
    n_steps: usize,
    spot: f64,
    model: ModelKind,
) -> PricingConfig {
    PricingConfig {
        n_steps,
        model,
        spot,
        valuation_date: terms.issue_date,
    }
}

pub fn horizon(terms: &ConvertibleTerms) -> f64 {
    year_fraction(terms.issue_date, terms.maturity_date)
}

/// Zero-coupon bond convertible into `ratio` shares at any time.
pub fn plain_convertible(ratio: f64) -> ConvertibleTerms {
    let mut terms = ConvertibleTerms::example_five_year().without_provisions();
    terms.conversion[0].ratio = ratio;
    terms
}

/// Zero-coupon bond convertible only at maturity.
pub fn european_convertible() -> ConvertibleTerms {
    let mut terms = ConvertibleTerms::example_five_year().without_provisions();
    let m = terms.maturity_date;
    terms.conversion = vec![ConversionPeriod {
        window: Window::new(m, m),
        ratio: 1.0,
    }];
    terms
}

pub fn bs_call(spot: f64, strike: f64, rate: f64, sigma: f64, t: f64) -> f64 {
    let n = Normal::new(0.0, 1.0).unwrap();
    let sd = sigma * t.sqrt();
    let d1 = ((spot / strike).ln() + (rate + 0.5 * sigma * sigma) * t) / sd;
    spot * n.cdf(d1) - strike * (-rate * t).exp() * n.cdf(d1 - sd)
}

/// Zero-coupon convertible with conversion at maturity only, total default
/// and constant intensity: survival discounting at `r + lambda` plus the
/// recovery leg.
#[allow(clippy::too_many_arguments)]
pub fn european_total_default(
    face: f64,
    ratio: f64,
    recovery: f64,
    spot: f64,
    rate: f64,
    sigma: f64,
    lambda: f64,
    t: f64,
) -> f64 {
    let k = rate + lambda;
    let recovery_leg = if k > 0.0 {
        recovery * face * lambda / k * -(-k * t).exp_m1()
    } else {
        0.0
    };
    face * (-k * t).exp() + ratio * bs_call(spot, face / ratio, k, sigma, t) + recovery_leg
}

/// (r, sigma, eta, lambda, dt) spanning valid and invalid steps.
pub fn step_draw(rng: &mut impl Rng) -> (f64, f64, f64, f64, f64) {
    let r = rng.gen_range(0.001..0.15);
    let sigma = rng.gen_range(0.05..0.8);
    let eta = if rng.gen_bool(0.1) {
        1.0
    } else {
        rng.gen_range(0.0..=1.0)
    };
    let lambda = if rng.gen_bool(0.05) {
        0.0
    } else {
        10f64.powf(rng.gen_range(-4.0..1.3))
    };
    let dt = 10f64.powf(rng.gen_range(-4.0..-0.3));
    (r, sigma, eta, lambda, dt)
}
