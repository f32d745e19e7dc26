use thiserror::Error;

/// Errors raised by the valuation engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The tree step violates the hazard-step bound; `max_hazard_step` is the
    /// largest admissible `lambda * dt` for the same market and step.
    #[error("step too coarse: lambda*dt = {hazard_step:.6e} exceeds admissible bound {max_hazard_step:.6e}")]
    StepTooCoarse {
        hazard_step: f64,
        max_hazard_step: f64,
    },

    #[error("degenerate volatility: sigma^2 = {sigma_sq} does not exceed lambda = {lambda}")]
    DegenerateVolatility { sigma_sq: f64, lambda: f64 },

    #[error("power-law hazard needs a positive spot, got {0}")]
    NonpositiveSpot(f64),

    #[error("spot {spot} lies below the stock floor {floor} of the synthesis tree")]
    FloorUnreachable { spot: f64, floor: f64 },

    #[error("branch probabilities outside [0, 1]: p_up = {p_up}, p_down = {p_down}, p_default = {p_default}")]
    InvalidStep {
        p_up: f64,
        p_down: f64,
        p_default: f64,
    },

    #[error(
        "grid too coarse: refinement moved the value by {change:.3e} (tolerance {tolerance:.3e})"
    )]
    GridTooCoarse { change: f64, tolerance: f64 },
}

impl PricingError {
    /// Stable machine-readable token, printed by the command line tool.
    pub fn token(&self) -> &'static str {
        match self {
            PricingError::InvalidInput(_) => "INVALID_INPUT",
            PricingError::StepTooCoarse { .. } => "STEP_TOO_COARSE",
            PricingError::DegenerateVolatility { .. } => "DEGENERATE_VOL",
            PricingError::NonpositiveSpot(_) => "NONPOSITIVE_SPOT",
            PricingError::FloorUnreachable { .. } => "FLOOR_UNREACHABLE",
            PricingError::InvalidStep { .. } => "INVALID_STEP",
            PricingError::GridTooCoarse { .. } => "GRID_TOO_COARSE",
        }
    }
}

pub type Result<T> = std::result::Result<T, PricingError>;
