//! Independent checks of the closed-form equilibria: deviation scans and
//! Monte Carlo simulation of the two-stage game.

pub mod simulate;
pub mod verify;

pub use simulate::{simulate, simulate_prices, Histogram, PriceSampleStats, SimulationStats};
pub use verify::{
    discretized_best_response, perturbations, shift_top_atom, verify_location_equilibrium,
    verify_price_equilibrium, VerificationReport,
};
