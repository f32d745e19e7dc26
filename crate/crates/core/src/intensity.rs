//! Hazard-rate models.
//!
//! Two models are supported: a constant intensity, and the equity-linked power
//! law `lambda(S) = lambda0 * (S / S0)^alpha` with `alpha < 0`, under which
//! default becomes more likely as the stock falls. The intensity `lambda0` is
//! often read off a credit spread via `lambda ~ spread / (1 - R)`; that
//! mapping is left to the caller.
//!
//! With a fixed tree step the power law makes the hazard-step bound fail for
//! small enough spots. [`HazardModel::stock_floor`] returns that threshold.

use crate::error::{PricingError, Result};
use crate::lattice::{max_hazard_step, validate_eta, MarketState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HazardModel {
    Constant {
        lambda0: f64,
    },
    PowerSynthesis {
        lambda0: f64,
        alpha: f64,
        /// Reference stock price at which the intensity equals `lambda0`.
        s_ref: f64,
    },
}

impl HazardModel {
    pub fn constant(lambda0: f64) -> Result<Self> {
        let model = HazardModel::Constant { lambda0 };
        model.validate()?;
        Ok(model)
    }

    pub fn power(lambda0: f64, alpha: f64, s_ref: f64) -> Result<Self> {
        let model = HazardModel::PowerSynthesis {
            lambda0,
            alpha,
            s_ref,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            HazardModel::Constant { lambda0 } => {
                if !(lambda0 >= 0.0 && lambda0.is_finite()) {
                    return Err(PricingError::InvalidInput(format!(
                        "constant intensity must be >= 0, got {lambda0}"
                    )));
                }
            }
            HazardModel::PowerSynthesis {
                lambda0,
                alpha,
                s_ref,
            } => {
                if !(lambda0 > 0.0 && lambda0.is_finite()) {
                    return Err(PricingError::InvalidInput(format!(
                        "power-law lambda0 must be > 0, got {lambda0}"
                    )));
                }
                if !(alpha < 0.0 && alpha.is_finite()) {
                    return Err(PricingError::InvalidInput(format!(
                        "power-law exponent must be < 0, got {alpha}"
                    )));
                }
                if !(s_ref > 0.0 && s_ref.is_finite()) {
                    return Err(PricingError::InvalidInput(format!(
                        "power-law reference spot must be > 0, got {s_ref}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Intensity at the reference level: `lambda0` for both variants.
    pub fn lambda0(&self) -> f64 {
        match *self {
            HazardModel::Constant { lambda0 } | HazardModel::PowerSynthesis { lambda0, .. } => {
                lambda0
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, HazardModel::Constant { .. })
    }

    /// Default intensity at stock price `spot`, per year.
    pub fn hazard_at(&self, spot: f64) -> Result<f64> {
        match *self {
            HazardModel::Constant { lambda0 } => {
                if spot < 0.0 {
                    return Err(PricingError::NonpositiveSpot(spot));
                }
                Ok(lambda0)
            }
            HazardModel::PowerSynthesis {
                lambda0,
                alpha,
                s_ref,
            } => {
                if spot.is_nan() || spot <= 0.0 {
                    return Err(PricingError::NonpositiveSpot(spot));
                }
                Ok(lambda0 * (spot / s_ref).powf(alpha))
            }
        }
    }

    /// Lowest spot at which a tree with step `dt` keeps all branch
    /// probabilities in `[0, 1]`:
    ///
    /// `S* = S0 * (B / (lambda0 * dt))^(1 / alpha)`, with `B` the admissible
    /// hazard step from [`max_hazard_step`].
    ///
    /// Constant models have no floor; they either pass the hazard-step check
    /// everywhere (`Ok(None)`) or nowhere (`StepTooCoarse`).
    pub fn stock_floor(&self, market: &MarketState, eta: f64, dt: f64) -> Result<Option<f64>> {
        validate_eta(eta)?;
        let bound = max_hazard_step(market, eta, dt)?;
        match *self {
            HazardModel::Constant { lambda0 } => {
                let hazard_step = lambda0 * dt;
                // Same decision rule as the step builder.
                crate::lattice::build_step_params(market, eta, lambda0, dt).map_err(|_| {
                    PricingError::StepTooCoarse {
                        hazard_step,
                        max_hazard_step: bound,
                    }
                })?;
                Ok(None)
            }
            HazardModel::PowerSynthesis {
                lambda0,
                alpha,
                s_ref,
            } => Ok(Some(s_ref * (bound / (lambda0 * dt)).powf(alpha.recip()))),
        }
    }
}
