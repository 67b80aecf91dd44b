use thiserror::Error;

use crate::model::PriceRegime;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("x >= 1 violated (x = {x})")]
    ViolatesDensityFloor { x: f64 },

    #[error("y > 0 violated (y = {y})")]
    NonpositiveReservation { y: f64 },

    #[error("y·x < 3/4·(1+x) violated ({lhs} >= {rhs})")]
    ViolatesSalesCondition { lhs: f64, rhs: f64 },

    #[error("locations must satisfy 0 <= z1 <= 1/2 <= z2 <= 1 (got z1 = {z1}, z2 = {z2})")]
    InvalidLocation { z1: f64, z2: f64 },

    #[error("prices must be nonnegative (got p1 = {p1}, p2 = {p2})")]
    NegativePrice { p1: f64, p2: f64 },

    #[error("instance is not canonical: z1 + z2 = {sum} > 1; reflect it first")]
    NotCanonical { sum: f64 },

    #[error("symmetric-pair strategies need z1 + z2 = 1 (got {sum}) and a near-near regime (got {regime:?})")]
    VariantUnavailable { sum: f64, regime: PriceRegime },

    #[error("operation needs the censored location regime: y(1+x) >= 1 and (y-1/4)(1+x) <= 1")]
    WrongRegime,

    #[error("closed-form hat z2 = {closed} disagrees with the root of the indifference equation ({root})")]
    HatZMismatch { closed: f64, root: f64 },
}

pub type Result<T> = std::result::Result<T, GameError>;
