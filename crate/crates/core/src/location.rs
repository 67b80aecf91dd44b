//! First-stage location competition.
//!
//! Payoffs of the location game are the price-subgame equilibrium profits.
//! Mixed location strategies are built from two closed-form families:
//!
//! * `G1(z) = 2z / (x(1-2z) + 1)` on firm 1's half `[0, 1/2]`,
//! * `G2(z) = (2z-1)(1+x) / (x(2z-1) + 1)` on firm 2's half `[1/2, 1]`,
//!
//! plus flats and atoms at the market edges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::model::{far_threshold, Firm, LocationPair, LocationRegime, MarketParams};
use crate::quadrature::{bisect, integrate_split};

/// Absolute tolerance for the location-payoff integrals.
pub const QUAD_TOL: f64 = 1e-12;

/// Maximum disagreement between the closed-form and root-found `ẑ2`.
pub const HAT_Z_TOL: f64 = 1e-10;

/// Closed-form location payoffs `(Π1, Π2)` of the location game.
///
/// With `z̄` present, each firm earns its fan-only profit when it is far
/// (`z1 <= z̄1`, resp. `z2 >= z̄2`); a near firm facing a far rival earns
/// the serve-both profit; with both near, the outer firm earns its fan-only
/// profit and the inner one earns the outer firm's fan-only profit plus
/// `T_outer·(1+x)`. Without `z̄` every location is near and the last rule
/// applies throughout.
pub fn location_payoff(params: &MarketParams, loc: &LocationPair) -> [f64; 2] {
    let z_bar = far_threshold(params);
    let s = 1.0 + params.x();
    Firm::BOTH.map(|firm| {
        let other = firm.other();
        let d = loc.edge(firm);
        let far = |f: Firm| z_bar.is_some_and(|zb| loc.edge(f) <= zb);
        if far(firm) {
            1.0 - d * d
        } else if far(other) {
            (params.y() - loc.center_cost(firm)) * s
        } else if d <= loc.edge(other) {
            1.0 - d * d
        } else {
            let d_other = loc.edge(other);
            1.0 - d_other * d_other + loc.transport_gap(other) * s
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LocationPiece {
    G1 { lo: f64, hi: f64 },
    G2 { lo: f64, hi: f64 },
    Flat { lo: f64, hi: f64, level: f64 },
    Atom { at: f64, mass: f64 },
}

impl LocationPiece {
    fn start(&self) -> f64 {
        match *self {
            LocationPiece::G1 { lo, .. }
            | LocationPiece::G2 { lo, .. }
            | LocationPiece::Flat { lo, .. } => lo,
            LocationPiece::Atom { at, .. } => at,
        }
    }

    fn end(&self) -> f64 {
        match *self {
            LocationPiece::G1 { hi, .. }
            | LocationPiece::G2 { hi, .. }
            | LocationPiece::Flat { hi, .. } => hi,
            LocationPiece::Atom { at, .. } => at,
        }
    }
}

pub fn g1_cdf(x: f64, z: f64) -> f64 {
    2.0 * z / (x * (1.0 - 2.0 * z) + 1.0)
}

pub fn g2_cdf(x: f64, z: f64) -> f64 {
    let v = 2.0 * z - 1.0;
    v * (1.0 + x) / (x * v + 1.0)
}

pub fn g1_density(x: f64, z: f64) -> f64 {
    let den = x * (1.0 - 2.0 * z) + 1.0;
    2.0 * (1.0 + x) / (den * den)
}

pub fn g2_density(x: f64, z: f64) -> f64 {
    let den = x * (2.0 * z - 1.0) + 1.0;
    2.0 * (1.0 + x) / (den * den)
}

pub fn g1_quantile(x: f64, u: f64) -> f64 {
    u * (1.0 + x) / (2.0 * (1.0 + u * x))
}

pub fn g2_quantile(x: f64, u: f64) -> f64 {
    0.5 + u / (2.0 * (1.0 + x - u * x))
}

/// A location distribution for one firm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocationStrategy {
    pub x: f64,
    pub pieces: Vec<LocationPiece>,
}

impl LocationStrategy {
    pub fn new(x: f64, pieces: Vec<LocationPiece>) -> Self {
        LocationStrategy { x, pieces }
    }

    pub fn pure(x: f64, z: f64) -> Self {
        LocationStrategy::new(x, vec![LocationPiece::Atom { at: z, mass: 1.0 }])
    }

    fn family_cdf(&self, piece: &LocationPiece, z: f64) -> f64 {
        match *piece {
            LocationPiece::G1 { .. } => g1_cdf(self.x, z),
            LocationPiece::G2 { .. } => g2_cdf(self.x, z),
            _ => unreachable!("only called on continuous pieces"),
        }
    }

    pub fn support_lo(&self) -> f64 {
        self.pieces.first().map_or(0.0, LocationPiece::start)
    }

    pub fn support_hi(&self) -> f64 {
        self.pieces.last().map_or(0.0, LocationPiece::end)
    }

    pub fn cdf(&self, z: f64) -> f64 {
        self.cdf_impl(z, false)
    }

    /// `Pr[Z < z]`.
    pub fn cdf_left(&self, z: f64) -> f64 {
        self.cdf_impl(z, true)
    }

    fn cdf_impl(&self, z: f64, left: bool) -> f64 {
        let mut level = 0.0;
        for piece in &self.pieces {
            match *piece {
                LocationPiece::G1 { lo, hi } | LocationPiece::G2 { lo, hi } => {
                    if z < lo {
                        return level;
                    }
                    if z < hi {
                        return self.family_cdf(piece, z);
                    }
                    level = self.family_cdf(piece, hi);
                }
                LocationPiece::Flat { lo, hi, level: l } => {
                    if z < lo {
                        return level;
                    }
                    level = l;
                    if z < hi {
                        return level;
                    }
                }
                LocationPiece::Atom { at, mass } => {
                    if z < at || (left && z == at) {
                        return level;
                    }
                    level += mass;
                }
            }
        }
        level
    }

    /// Smallest `z` with `cdf(z) >= u`.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut level = 0.0;
        for piece in &self.pieces {
            match *piece {
                LocationPiece::G1 { lo, hi } | LocationPiece::G2 { lo, hi } => {
                    let top = self.family_cdf(piece, hi);
                    if u <= top {
                        let z = match piece {
                            LocationPiece::G1 { .. } => g1_quantile(self.x, u),
                            _ => g2_quantile(self.x, u),
                        };
                        return z.clamp(lo, hi);
                    }
                    level = top;
                }
                LocationPiece::Flat { level: l, .. } => level = l,
                LocationPiece::Atom { at, mass } => {
                    if u <= level + mass {
                        return at;
                    }
                    level += mass;
                }
            }
        }
        self.support_hi()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.gen::<f64>())
    }

    pub fn density(&self, z: f64) -> f64 {
        self.pieces
            .iter()
            .find_map(|pc| match *pc {
                LocationPiece::G1 { lo, hi } if z >= lo && z < hi => Some(g1_density(self.x, z)),
                LocationPiece::G2 { lo, hi } if z >= lo && z < hi => Some(g2_density(self.x, z)),
                _ => None,
            })
            .unwrap_or(0.0)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pieces.iter().filter_map(|pc| match *pc {
            LocationPiece::Atom { at, mass } => Some((at, mass)),
            _ => None,
        })
    }

    pub fn atom_mass_at(&self, z: f64) -> f64 {
        self.atoms().filter(|a| a.0 == z).fold(0.0, |m, a| m + a.1)
    }

    /// Continuous pieces as `(lo, hi)`.
    pub fn increasing(&self) -> Vec<(f64, f64)> {
        self.pieces
            .iter()
            .filter_map(|pc| match *pc {
                LocationPiece::G1 { lo, hi } | LocationPiece::G2 { lo, hi } => Some((lo, hi)),
                _ => None,
            })
            .collect()
    }

    pub fn defects(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.pieces.is_empty() {
            out.push("no pieces".to_string());
            return out;
        }
        let mut level = 0.0;
        let mut cursor = 0.0;
        for (i, piece) in self.pieces.iter().enumerate() {
            if i > 0 && (piece.start() - cursor).abs() > tol {
                out.push(format!("piece {i} starts at {} but the previous one ends at {cursor}", piece.start()));
            }
            match *piece {
                LocationPiece::G1 { lo, hi } | LocationPiece::G2 { lo, hi } => {
                    if !(lo < hi) {
                        out.push(format!("piece {i}: empty interval [{lo}, {hi}]"));
                    }
                    let start = self.family_cdf(piece, lo);
                    if (start - level).abs() > tol {
                        out.push(format!("piece {i}: jumps from {level} to {start} at {lo}"));
                    }
                    level = self.family_cdf(piece, hi);
                }
                LocationPiece::Flat { lo, hi, level: l } => {
                    if !(lo < hi) {
                        out.push(format!("piece {i}: empty flat [{lo}, {hi}]"));
                    }
                    if (l - level).abs() > tol {
                        out.push(format!("piece {i}: flat at {l} but CDF is {level}"));
                    }
                    level = l;
                }
                LocationPiece::Atom { at, mass } => {
                    if !(mass > 0.0) {
                        out.push(format!("piece {i}: atom at {at} with mass {mass}"));
                    }
                    level += mass;
                }
            }
            if level > 1.0 + tol {
                out.push(format!("piece {i}: CDF reaches {level} > 1"));
            }
            cursor = piece.end();
        }
        if (level - 1.0).abs() > tol {
            out.push(format!("total mass {level} differs from 1"));
        }
        if self.support_lo() < 0.0 || self.support_hi() > 1.0 {
            out.push("support leaves [0, 1]".to_string());
        }
        out
    }

    /// Whether the support lies inside the firm's half of the line.
    pub fn within_half(&self, firm: Firm) -> bool {
        match firm {
            Firm::One => self.support_lo() >= 0.0 && self.support_hi() <= 0.5,
            Firm::Two => self.support_lo() >= 0.5 && self.support_hi() <= 1.0,
        }
    }
}

/// `G1*` and `G2*` over the full halves.
pub fn full_mix_strategies(x: f64) -> [LocationStrategy; 2] {
    [
        LocationStrategy::new(x, vec![LocationPiece::G1 { lo: 0.0, hi: 0.5 }]),
        LocationStrategy::new(x, vec![LocationPiece::G2 { lo: 0.5, hi: 1.0 }]),
    ]
}

/// `G1**` and `G2**`: the families truncated at `ẑ1` and `ẑ2` with the
/// residual mass at the market edges.
pub fn censored_strategies(x: f64, hat_z1: f64, hat_z2: f64) -> [LocationStrategy; 2] {
    let mut g1 = Vec::with_capacity(3);
    let m0 = g1_cdf(x, hat_z1);
    if m0 > 0.0 {
        g1.push(LocationPiece::Atom { at: 0.0, mass: m0 });
    }
    if hat_z1 > 0.0 {
        g1.push(LocationPiece::Flat { lo: 0.0, hi: hat_z1, level: m0 });
    }
    if hat_z1 < 0.5 {
        g1.push(LocationPiece::G1 { lo: hat_z1, hi: 0.5 });
    }

    let mut g2 = Vec::with_capacity(3);
    let level = g2_cdf(x, hat_z2);
    if hat_z2 > 0.5 {
        g2.push(LocationPiece::G2 { lo: 0.5, hi: hat_z2 });
    }
    if hat_z2 < 1.0 {
        g2.push(LocationPiece::Flat { lo: hat_z2, hi: 1.0, level });
    }
    let m1 = 1.0 - level;
    if m1 > 0.0 {
        g2.push(LocationPiece::Atom { at: 1.0, mass: m1 });
    }
    [LocationStrategy::new(x, g1), LocationStrategy::new(x, g2)]
}

/// Firm 2's indifference residual between `z2` and the edge, given `G2**`
/// truncated at `z2`. Zero at `ẑ2` and, trivially, at `z2 = 1`.
pub fn indifference_residual(params: &MarketParams, z2: f64) -> f64 {
    let (x, y) = (params.x(), params.y());
    let g = g2_cdf(x, z2);
    let d = 1.0 - z2;
    let c = z2 - 0.5;
    (1.0 - d * d) * g + (1.0 - g) * (y - c * c) * (1.0 + x) - 1.0
}

/// `(ẑ1, ẑ2)` for the censored regime.
///
/// The closed form is checked against a bracketed root of the indifference
/// residual with its trivial root at `z2 = 1` divided out.
pub fn hat_z(params: &MarketParams) -> Result<(f64, f64)> {
    if params.location_regime() != LocationRegime::CensoredMix {
        return Err(GameError::WrongRegime);
    }
    let (x, y) = (params.x(), params.y());
    let closed = 0.5 + 2.0 * (y - 1.0 / (1.0 + x));
    let z_bar2 = far_threshold(params).map_or(1.0, |zb| 1.0 - zb);

    let hi = z_bar2.min(1.0 - 1e-9);
    let root = if closed >= hi {
        // ẑ2 -> 1 at the full-mix boundary, where the two roots merge; only
        // the undeflated residual is meaningful there.
        if indifference_residual(params, closed).abs() <= HAT_Z_TOL {
            closed
        } else {
            f64::NAN
        }
    } else {
        let deflated = |z: f64| indifference_residual(params, z) / (1.0 - z);
        bisect(deflated, 0.5, hi, 1e-15).unwrap_or(f64::NAN)
    };
    if !((closed - root).abs() <= HAT_Z_TOL) {
        return Err(GameError::HatZMismatch { closed, root });
    }
    Ok((1.0 - closed, closed))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LocationEquilibrium {
    MixedPair {
        g1: LocationStrategy,
        g2: LocationStrategy,
        payoff: [f64; 2],
    },
    PurePair {
        z1: f64,
        z2: f64,
        payoff: [f64; 2],
    },
}

impl LocationEquilibrium {
    pub fn payoff(&self) -> [f64; 2] {
        match self {
            LocationEquilibrium::MixedPair { payoff, .. }
            | LocationEquilibrium::PurePair { payoff, .. } => *payoff,
        }
    }

    /// Both firms' strategies; pure pairs become unit atoms.
    pub fn strategies(&self, x: f64) -> [LocationStrategy; 2] {
        match self {
            LocationEquilibrium::MixedPair { g1, g2, .. } => [g1.clone(), g2.clone()],
            LocationEquilibrium::PurePair { z1, z2, .. } => {
                [LocationStrategy::pure(x, *z1), LocationStrategy::pure(x, *z2)]
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        match self {
            LocationEquilibrium::MixedPair { .. } => true,
            LocationEquilibrium::PurePair { z1, z2, .. } => z1 + z2 == 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeOutcome {
    pub params: MarketParams,
    pub regime: LocationRegime,
    /// The symmetric equilibrium comes first.
    pub equilibria: Vec<LocationEquilibrium>,
    /// Payoff of the symmetric equilibrium.
    pub payoff: [f64; 2],
    pub hat_z: Option<(f64, f64)>,
}

/// Subgame-perfect outcomes of the location game.
pub fn solve_spe(params: &MarketParams) -> Result<SpeOutcome> {
    let x = params.x();
    let regime = params.location_regime();
    let mut hat = None;
    let mut equilibria = Vec::with_capacity(3);
    match regime {
        LocationRegime::PureSeparation => {
            equilibria.push(LocationEquilibrium::PurePair {
                z1: 0.0,
                z2: 1.0,
                payoff: [1.0, 1.0],
            });
        }
        LocationRegime::FullMix => {
            let [g1, g2] = full_mix_strategies(x);
            equilibria.push(LocationEquilibrium::MixedPair { g1, g2, payoff: [1.0, 1.0] });
        }
        LocationRegime::CensoredMix => {
            let (h1, h2) = hat_z(params)?;
            hat = Some((h1, h2));
            let [g1, g2] = censored_strategies(x, h1, h2);
            equilibria.push(LocationEquilibrium::MixedPair { g1, g2, payoff: [1.0, 1.0] });
        }
    }
    if regime != LocationRegime::PureSeparation {
        for (z1, z2) in [(0.0, 0.5), (0.5, 1.0)] {
            let pair = LocationPair::new(z1, z2)?;
            equilibria.push(LocationEquilibrium::PurePair {
                z1,
                z2,
                payoff: location_payoff(params, &pair),
            });
        }
    }
    Ok(SpeOutcome {
        params: *params,
        regime,
        equilibria,
        payoff: [1.0, 1.0],
        hat_z: hat,
    })
}

fn pair_for(firm: Firm, own: f64, other: f64) -> LocationPair {
    let (z1, z2) = match firm {
        Firm::One => (own, other),
        Firm::Two => (other, own),
    };
    LocationPair::new(z1, z2).expect("locations inside their halves")
}

/// Expected location payoff of `firm` at `z` against the opponent's mixed
/// location strategy: atoms are summed exactly and the continuous part is
/// integrated with breakpoints at the payoff kinks.
pub fn expected_location_payoff(
    params: &MarketParams,
    firm: Firm,
    z: f64,
    opponent: &LocationStrategy,
) -> f64 {
    let edge = match firm {
        Firm::One => z,
        Firm::Two => 1.0 - z,
    };
    if edge == 0.0 {
        // At its own edge a firm never faces a nearer rival on its side.
        return 1.0;
    }
    let payoff = |other: f64| location_payoff(params, &pair_for(firm, z, other))[firm.index()];
    let atoms: f64 = opponent.atoms().map(|(at, m)| m * payoff(at)).sum();

    let mut breaks = vec![1.0 - z];
    if let Some(zb) = far_threshold(params) {
        breaks.extend([zb, 1.0 - zb]);
    }
    let cont: f64 = opponent
        .increasing()
        .into_iter()
        .map(|(lo, hi)| {
            integrate_split(|t| payoff(t) * opponent.density(t), lo, hi, &breaks, QUAD_TOL)
        })
        .sum();
    atoms + cont
}

/// `(z, expected payoff)` at `grid_n` evenly spaced points of `range`, which
/// defaults to the firm's half of the line.
pub fn deviation_profile(
    params: &MarketParams,
    firm: Firm,
    opponent: &LocationStrategy,
    grid_n: usize,
    range: Option<(f64, f64)>,
) -> Vec<(f64, f64)> {
    let (a, b) = range.unwrap_or(match firm {
        Firm::One => (0.0, 0.5),
        Firm::Two => (0.5, 1.0),
    });
    let n = grid_n.max(2);
    (0..n)
        .map(|i| {
            let z = (a * (n - 1 - i) as f64 + b * i as f64) / (n - 1) as f64;
            (z, expected_location_payoff(params, firm, z, opponent))
        })
        .collect()
}
