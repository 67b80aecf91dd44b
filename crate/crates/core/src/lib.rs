//! Location-then-price competition between two firms serving loyal fans at
//! the ends of a line and price-sensitive switchers in the middle.
//!
//! The crate computes subgame-perfect equilibria in closed form and checks
//! them numerically.

pub mod error;
pub mod location;
pub mod model;
pub mod oracle;
pub mod price;
pub mod quadrature;

pub use error::{GameError, Result};
pub use model::{
    classify_location_regime, classify_price_regime, consumer_utilities, demand, profits,
    thresholds, validate_params, Firm, LocationPair, LocationRegime, MarketParams, PricePair,
    PriceRegime,
};
