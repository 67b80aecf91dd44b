//! Second-stage price competition for a fixed location pair.
//!
//! Mixed strategies are stored symbolically as an ordered list of pieces:
//! rational segments `F(p) = 1 - (K - (p+T)) / ((p+T)·x)`, flat spans and
//! point masses. Every evaluation and inverse is closed form.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};
use crate::model::{
    classify_price_regime, Firm, LocationPair, MarketParams, PriceClassification, PriceRegime,
};

/// Opponent atoms within this distance of the mapped price count as a tie.
///
/// The two sides of a tie are computed along different floating-point paths
/// (`p + c_own - c_opp` versus the atom location), so exact equality is too
/// strict here.
pub const TIE_TOL: f64 = 1e-12;

/// Tolerance on `z1 + z2 = 1` for the symmetric-pair strategies.
pub const DIAGONAL_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PricePiece {
    /// `F(p) = 1 - (k - (p+shift)) / ((p+shift)·x)` on `[lo, hi]`.
    Rational { lo: f64, hi: f64, k: f64, shift: f64 },
    Flat { lo: f64, hi: f64, level: f64 },
    Atom { at: f64, mass: f64 },
}

impl PricePiece {
    fn start(&self) -> f64 {
        match *self {
            PricePiece::Rational { lo, .. } | PricePiece::Flat { lo, .. } => lo,
            PricePiece::Atom { at, .. } => at,
        }
    }

    fn end(&self) -> f64 {
        match *self {
            PricePiece::Rational { hi, .. } | PricePiece::Flat { hi, .. } => hi,
            PricePiece::Atom { at, .. } => at,
        }
    }
}

fn rational_cdf(x: f64, k: f64, shift: f64, p: f64) -> f64 {
    let q = p + shift;
    1.0 - (k - q) / (q * x)
}

/// A price distribution made of rational segments, flats and atoms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedPriceStrategy {
    pub x: f64,
    pub pieces: Vec<PricePiece>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SupportSummary {
    pub increasing: Vec<(f64, f64)>,
    pub flats: Vec<(f64, f64)>,
    pub atoms: Vec<(f64, f64)>,
}

impl SupportSummary {
    /// Total atom mass plus total continuous increase.
    pub fn total_mass(&self, strategy: &MixedPriceStrategy) -> f64 {
        let atoms: f64 = self.atoms.iter().map(|a| a.1).sum();
        let cont: f64 = strategy
            .pieces
            .iter()
            .map(|pc| match *pc {
                PricePiece::Rational { lo, hi, k, shift } => {
                    rational_cdf(strategy.x, k, shift, hi) - rational_cdf(strategy.x, k, shift, lo)
                }
                _ => 0.0,
            })
            .sum();
        atoms + cont
    }
}

impl MixedPriceStrategy {
    pub fn new(x: f64, pieces: Vec<PricePiece>) -> Self {
        MixedPriceStrategy { x, pieces }
    }

    pub fn support_lo(&self) -> f64 {
        self.pieces.first().map_or(0.0, PricePiece::start)
    }

    pub fn support_hi(&self) -> f64 {
        self.pieces.last().map_or(0.0, PricePiece::end)
    }

    /// Right-continuous CDF, `Pr[P <= p]`.
    pub fn cdf(&self, p: f64) -> f64 {
        self.cdf_impl(p, false)
    }

    /// Left limit of the CDF, `Pr[P < p]`.
    pub fn cdf_left(&self, p: f64) -> f64 {
        self.cdf_impl(p, true)
    }

    fn cdf_impl(&self, p: f64, left: bool) -> f64 {
        let before = |a: f64| if left { p <= a } else { p < a };
        let mut level = 0.0;
        for piece in &self.pieces {
            match *piece {
                PricePiece::Rational { lo, hi, k, shift } => {
                    if p <= lo {
                        return if p < lo { level } else { rational_cdf(self.x, k, shift, lo) };
                    }
                    if p < hi {
                        return rational_cdf(self.x, k, shift, p);
                    }
                    level = rational_cdf(self.x, k, shift, hi);
                }
                PricePiece::Flat { lo, hi, level: l } => {
                    if p < lo {
                        return level;
                    }
                    level = l;
                    if p < hi {
                        return level;
                    }
                }
                PricePiece::Atom { at, mass } => {
                    if before(at) {
                        return level;
                    }
                    level += mass;
                }
            }
        }
        level
    }

    /// Smallest `p` with `cdf(p) >= u`; `u = 0` maps to the support's lower end.
    pub fn quantile(&self, u: f64) -> f64 {
        let mut level = 0.0;
        for piece in &self.pieces {
            match *piece {
                PricePiece::Rational { lo, hi, k, shift } => {
                    let top = rational_cdf(self.x, k, shift, hi);
                    if u <= top {
                        let p = k / (1.0 + self.x * (1.0 - u)) - shift;
                        return p.clamp(lo, hi);
                    }
                    level = top;
                }
                PricePiece::Flat { level: l, .. } => level = l,
                PricePiece::Atom { at, mass } => {
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

    /// Density of the continuous part (zero on flats and outside the support).
    pub fn density(&self, p: f64) -> f64 {
        self.pieces
            .iter()
            .find_map(|pc| match *pc {
                PricePiece::Rational { lo, hi, k, shift } if p >= lo && p < hi => {
                    let q = p + shift;
                    Some(k / (q * q * self.x))
                }
                _ => None,
            })
            .unwrap_or(0.0)
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.pieces.iter().filter_map(|pc| match *pc {
            PricePiece::Atom { at, mass } => Some((at, mass)),
            _ => None,
        })
    }

    pub fn support(&self) -> SupportSummary {
        let mut s = SupportSummary::default();
        for piece in &self.pieces {
            match *piece {
                PricePiece::Rational { lo, hi, .. } => s.increasing.push((lo, hi)),
                PricePiece::Flat { lo, hi, .. } => s.flats.push((lo, hi)),
                PricePiece::Atom { at, mass } => s.atoms.push((at, mass)),
            }
        }
        s
    }

    /// Mean price. On a rational segment `∫ p dF = (K/x)·[ln(p+T) + T/(p+T)]`.
    pub fn mean(&self) -> f64 {
        self.pieces
            .iter()
            .map(|pc| match *pc {
                PricePiece::Rational { lo, hi, k, shift } => {
                    let anti = |p: f64| {
                        let q = p + shift;
                        q.ln() + shift / q
                    };
                    k / self.x * (anti(hi) - anti(lo))
                }
                PricePiece::Atom { at, mass } => at * mass,
                PricePiece::Flat { .. } => 0.0,
            })
            .sum()
    }

    /// Structural defects: pieces must tile the support end to end, the CDF
    /// must be continuous across rational and flat joins, and the total mass
    /// must be one. Empty for a valid distribution.
    pub fn defects(&self, tol: f64) -> Vec<String> {
        let mut out = Vec::new();
        if self.pieces.is_empty() {
            out.push("no pieces".to_string());
            return out;
        }
        if !(self.x >= 1.0) {
            out.push(format!("x = {} below 1", self.x));
        }
        let mut level = 0.0;
        let mut cursor = 0.0;
        for (i, piece) in self.pieces.iter().enumerate() {
            if i > 0 && (piece.start() - cursor).abs() > tol {
                out.push(format!("piece {i} starts at {} but the previous one ends at {cursor}", piece.start()));
            }
            match *piece {
                PricePiece::Rational { lo, hi, k, shift } => {
                    if !(lo < hi) {
                        out.push(format!("piece {i}: empty interval [{lo}, {hi}]"));
                    }
                    if !(k > 0.0 && lo + shift > 0.0) {
                        out.push(format!("piece {i}: nonpositive density"));
                    }
                    let start = rational_cdf(self.x, k, shift, lo);
                    if (start - level).abs() > tol {
                        out.push(format!("piece {i}: jumps from {level} to {start} at {lo}"));
                    }
                    level = rational_cdf(self.x, k, shift, hi);
                }
                PricePiece::Flat { lo, hi, level: l } => {
                    if !(lo < hi) {
                        out.push(format!("piece {i}: empty flat [{lo}, {hi}]"));
                    }
                    if (l - level).abs() > tol {
                        out.push(format!("piece {i}: flat at {l} but CDF is {level}"));
                    }
                    level = l;
                }
                PricePiece::Atom { at, mass } => {
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
        if self.support_lo() < 0.0 {
            out.push("negative prices in support".to_string());
        }
        out
    }
}

/// A firm's price-stage strategy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum PriceStrategy {
    Pure { price: f64 },
    Mixed(MixedPriceStrategy),
}

impl PriceStrategy {
    pub fn cdf(&self, p: f64) -> f64 {
        match self {
            PriceStrategy::Pure { price } => f64::from(u8::from(p >= *price)),
            PriceStrategy::Mixed(m) => m.cdf(p),
        }
    }

    pub fn cdf_left(&self, p: f64) -> f64 {
        match self {
            PriceStrategy::Pure { price } => f64::from(u8::from(p > *price)),
            PriceStrategy::Mixed(m) => m.cdf_left(p),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            PriceStrategy::Pure { price } => *price,
            PriceStrategy::Mixed(m) => m.quantile(u),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            PriceStrategy::Pure { price } => *price,
            PriceStrategy::Mixed(m) => m.sample(rng),
        }
    }

    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match self {
            PriceStrategy::Pure { price } => vec![(*price, 1.0)],
            PriceStrategy::Mixed(m) => m.atoms().collect(),
        }
    }

    pub fn support(&self) -> SupportSummary {
        match self {
            PriceStrategy::Pure { price } => SupportSummary {
                atoms: vec![(*price, 1.0)],
                ..Default::default()
            },
            PriceStrategy::Mixed(m) => m.support(),
        }
    }

    pub fn support_lo(&self) -> f64 {
        match self {
            PriceStrategy::Pure { price } => *price,
            PriceStrategy::Mixed(m) => m.support_lo(),
        }
    }

    pub fn support_hi(&self) -> f64 {
        match self {
            PriceStrategy::Pure { price } => *price,
            PriceStrategy::Mixed(m) => m.support_hi(),
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            PriceStrategy::Pure { price } => *price,
            PriceStrategy::Mixed(m) => m.mean(),
        }
    }

    pub fn density(&self, p: f64) -> f64 {
        match self {
            PriceStrategy::Pure { .. } => 0.0,
            PriceStrategy::Mixed(m) => m.density(p),
        }
    }

    /// Continuous pieces `(lo, hi)` of the support.
    pub fn increasing(&self) -> Vec<(f64, f64)> {
        self.support().increasing
    }

    pub fn defects(&self, tol: f64) -> Vec<String> {
        match self {
            PriceStrategy::Pure { price } if *price >= 0.0 => Vec::new(),
            PriceStrategy::Pure { price } => vec![format!("negative price {price}")],
            PriceStrategy::Mixed(m) => m.defects(tol),
        }
    }

    /// Probability mass of atoms within `tol` of `q`.
    fn atom_mass_near(&self, q: f64, tol: f64) -> (f64, f64) {
        // (mass within the window, mass strictly above q inside the window)
        let mut near = 0.0;
        let mut above = 0.0;
        for (at, mass) in self.atoms() {
            if (at - q).abs() <= tol {
                near += mass;
                if at > q {
                    above += mass;
                }
            }
        }
        (near, above)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    Asymmetric,
    SymmetricPair,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceEquilibrium {
    pub locations: LocationPair,
    pub classification: PriceClassification,
    pub profits: [f64; 2],
    pub strategies: [PriceStrategy; 2],
    /// Only set for near-near regimes.
    pub variant: Option<Variant>,
}

impl PriceEquilibrium {
    pub fn regime(&self) -> PriceRegime {
        self.classification.regime
    }

    pub fn strategy(&self, firm: Firm) -> &PriceStrategy {
        &self.strategies[firm.index()]
    }

    /// The same equilibrium seen from the mirrored instance.
    pub fn reflect(&self) -> PriceEquilibrium {
        let [s1, s2] = self.strategies.clone();
        let c = self.classification;
        PriceEquilibrium {
            locations: self.locations.reflect(),
            classification: PriceClassification {
                regime: c.regime.mirror(),
                boundary_flag: c.boundary_flag,
                far_margin: [c.far_margin[1], c.far_margin[0]],
            },
            profits: [self.profits[1], self.profits[0]],
            strategies: [s2, s1],
            variant: self.variant,
        }
    }
}

/// Equilibrium profit vector of the price subgame (canonical orientation).
pub fn equilibrium_profits(params: &MarketParams, loc: &LocationPair) -> Result<[f64; 2]> {
    require_canonical(loc)?;
    Ok(equilibrium_profits_any(params, loc))
}

/// Rejects `z1 + z2 > 1`. Internally the orientation is decided on edge
/// distances, which may differ from the sum test by one rounding on the
/// diagonal; such pairs are accepted and reflected silently.
fn require_canonical(loc: &LocationPair) -> Result<()> {
    let sum = loc.z1() + loc.z2();
    if sum > 1.0 {
        return Err(GameError::NotCanonical { sum });
    }
    Ok(())
}

fn canonical_profits(params: &MarketParams, loc: &LocationPair, regime: PriceRegime) -> [f64; 2] {
    let d1 = loc.edge(Firm::One);
    let d2 = loc.edge(Firm::Two);
    let pi1 = params.fan_only_profit(d1);
    match regime {
        PriceRegime::FarFar => [pi1, params.fan_only_profit(d2)],
        PriceRegime::FarNear => [pi1, params.serve_both_profit(d2)],
        PriceRegime::NearNearA | PriceRegime::NearNearB => {
            [pi1, pi1 + loc.transport_gap(Firm::One) * (1.0 + params.x())]
        }
        PriceRegime::NearFar => unreachable!("near-far does not occur when z1 + z2 <= 1"),
    }
}

/// Equilibrium profits for any orientation, via reflection.
pub fn equilibrium_profits_any(params: &MarketParams, loc: &LocationPair) -> [f64; 2] {
    let (c, reflected) = loc.canonical();
    let pr = canonical_profits(params, &c, classify_price_regime(params, &c).regime);
    if reflected {
        [pr[1], pr[0]]
    } else {
        pr
    }
}

/// Constructs the price-subgame equilibrium. Non-canonical instances are
/// solved in mirrored form and reflected back.
pub fn solve(params: &MarketParams, loc: &LocationPair, variant: Variant) -> Result<PriceEquilibrium> {
    let (canon, reflected) = loc.canonical();
    let eq = solve_canonical(params, &canon, variant)?;
    Ok(if reflected { eq.reflect() } else { eq })
}

fn solve_canonical(
    params: &MarketParams,
    loc: &LocationPair,
    variant: Variant,
) -> Result<PriceEquilibrium> {
    let classification = classify_price_regime(params, loc);
    let regime = classification.regime;
    let profits = canonical_profits(params, loc, regime);
    let y = params.y();
    let d = [loc.edge(Firm::One), loc.edge(Firm::Two)];
    let c = [loc.center_cost(Firm::One), loc.center_cost(Firm::Two)];

    let (strategies, variant) = match regime {
        PriceRegime::FarFar => (
            [
                PriceStrategy::Pure { price: 1.0 - d[0] * d[0] },
                PriceStrategy::Pure { price: 1.0 - d[1] * d[1] },
            ],
            None,
        ),
        PriceRegime::FarNear => (
            [
                PriceStrategy::Pure { price: 1.0 - d[0] * d[0] },
                PriceStrategy::Pure { price: y - c[1] },
            ],
            None,
        ),
        PriceRegime::NearFar => unreachable!("near-far does not occur when z1 + z2 <= 1"),
        PriceRegime::NearNearA | PriceRegime::NearNearB => {
            let sum = loc.z1() + loc.z2();
            match variant {
                Variant::Asymmetric => (asymmetric_mixed(params, loc, regime, profits), Some(variant)),
                Variant::SymmetricPair if (sum - 1.0).abs() <= DIAGONAL_TOL => {
                    (symmetric_mixed(params, loc, profits), Some(variant))
                }
                Variant::SymmetricPair => {
                    return Err(GameError::VariantUnavailable { sum, regime });
                }
            }
        }
    };
    Ok(PriceEquilibrium {
        locations: *loc,
        classification,
        profits,
        strategies,
        variant,
    })
}

fn push_tail(pieces: &mut Vec<PricePiece>, from: f64, level: f64, atom_at: f64, mass: f64) {
    if atom_at > from {
        pieces.push(PricePiece::Flat {
            lo: from,
            hi: atom_at,
            level,
        });
    }
    if mass > 0.0 {
        pieces.push(PricePiece::Atom { at: atom_at, mass });
    }
}

fn rational_then_tail(
    x: f64,
    lo: f64,
    hi: f64,
    k: f64,
    shift: f64,
    atom_at: f64,
) -> MixedPriceStrategy {
    let mut pieces = Vec::with_capacity(3);
    if hi > lo {
        pieces.push(PricePiece::Rational { lo, hi, k, shift });
    }
    let q = hi + shift;
    let tail = (k - q) / (q * x);
    let level = rational_cdf(x, k, shift, hi);
    push_tail(&mut pieces, hi, level, atom_at, tail);
    MixedPriceStrategy::new(x, pieces)
}

fn asymmetric_mixed(
    params: &MarketParams,
    loc: &LocationPair,
    regime: PriceRegime,
    profits: [f64; 2],
) -> [PriceStrategy; 2] {
    let (x, y) = (params.x(), params.y());
    let [pi1, pi2] = profits;
    let d2 = loc.edge(Firm::Two);
    let t1 = loc.transport_gap(Firm::One);
    let lo1 = pi1 / (1.0 + x);
    let lo2 = lo1 + t1;
    // Firm 2's continuous part stops at the switchers' reservation (A) or at
    // its fans' reservation (B); firm 1's stops at the mapped point.
    let end2 = (y - loc.center_cost(Firm::Two)).min(1.0 - d2 * d2);
    let end1 = match regime {
        PriceRegime::NearNearA => y - loc.center_cost(Firm::One),
        _ => end2 - t1,
    };
    let f1 = rational_then_tail(x, lo1, end1, pi2, t1, pi1);
    let f2 = rational_then_tail(x, lo2, end2, pi1, -t1, end2);
    [PriceStrategy::Mixed(f1), PriceStrategy::Mixed(f2)]
}

fn symmetric_mixed(params: &MarketParams, loc: &LocationPair, profits: [f64; 2]) -> [PriceStrategy; 2] {
    let (x, y) = (params.x(), params.y());
    Firm::BOTH.map(|firm| {
        let own = profits[firm.index()];
        let other = profits[firm.other().index()];
        let fan_cap = 1.0 - loc.fan_cost(firm);
        let lo = own / (1.0 + x);
        let hi = (y - loc.center_cost(firm)).min(other).min(fan_cap);
        PriceStrategy::Mixed(rational_then_tail(x, lo, hi, other, 0.0, fan_cap))
    })
}

/// Expected profit of `firm` charging `p` against the opponent's strategy
/// (canonical orientation). Ties for the switchers split them equally.
pub fn expected_profit_vs_mixed(
    params: &MarketParams,
    loc: &LocationPair,
    firm: Firm,
    p: f64,
    opponent: &PriceStrategy,
) -> Result<f64> {
    require_canonical(loc)?;
    Ok(expected_profit_any(params, loc, firm, p, opponent))
}

/// Same as [`expected_profit_vs_mixed`] without the orientation check; the
/// formula itself is orientation-free.
pub fn expected_profit_any(
    params: &MarketParams,
    loc: &LocationPair,
    firm: Firm,
    p: f64,
    opponent: &PriceStrategy,
) -> f64 {
    let fans = if p <= 1.0 - loc.fan_cost(firm) { p } else { 0.0 };
    if !(p <= params.y() - loc.center_cost(firm)) {
        return fans;
    }
    // The opponent is undercut when its price exceeds q.
    let q = p + loc.transport_gap(firm);
    let (tie, tie_above) = opponent.atom_mass_near(q, TIE_TOL);
    let win = 1.0 - opponent.cdf(q) - tie_above;
    fans + p * params.x() * (win + 0.5 * tie)
}
