//! Convertible bond valuation on a binomial tree for a stock that can jump
//! on default, with constant or equity-linked hazard rates, and a
//! finite-difference solver of the limiting pricing equation used to
//! cross-check the tree.

pub mod config;
pub mod error;
pub mod instrument;
pub mod intensity;
pub mod lattice;
pub mod pde;
pub mod pricer;

pub use error::{PricingError, Result};
pub use instrument::{ConvertibleTerms, Date, Provisions};
pub use intensity::HazardModel;
pub use lattice::{DefaultSpec, MarketState, StepParams};
pub use pricer::{ModelKind, PriceResult, PricingConfig};
