//! Primitives of the economy: parameters, locations, prices, consumer
//! utilities, demand allocation, realized profits and regime thresholds.
//!
//! Three consumer groups sit on the unit line: firm 1's fans `C1` at 0,
//! firm 2's fans `C2` at 1 (unit mass each, reservation value 1) and the
//! informed switchers `C3` at 1/2 (mass `x`, reservation value `y`).
//! Transport cost is the squared distance to the firm.
//!
//! Locations are stored as each firm's distance from its own market edge,
//! so that firm 1 at `z1` and firm 2 at `z2` become `d1 = z1`, `d2 = 1 - z2`.
//! Every firm-level formula is written once in terms of that distance, which
//! makes reflection about 1/2 an exact swap.

use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

/// Relative tolerance used when classifying regimes.
pub const CLASSIFY_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Firm {
    One,
    Two,
}

impl Firm {
    pub const BOTH: [Firm; 2] = [Firm::One, Firm::Two];

    pub fn other(self) -> Firm {
        match self {
            Firm::One => Firm::Two,
            Firm::Two => Firm::One,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Firm::One => 0,
            Firm::Two => 1,
        }
    }
}

/// Validated market parameters: switcher mass `x` and switcher reservation
/// value `y`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct MarketParams {
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct RawParams {
    x: f64,
    y: f64,
}

impl TryFrom<RawParams> for MarketParams {
    type Error = GameError;
    fn try_from(raw: RawParams) -> Result<Self> {
        validate_params(raw.x, raw.y)
    }
}

/// Checks `x >= 1`, `y > 0` and `y·x < 3/4·(1+x)`, in that order.
pub fn validate_params(x: f64, y: f64) -> Result<MarketParams> {
    if !(x >= 1.0) || !x.is_finite() {
        return Err(GameError::ViolatesDensityFloor { x });
    }
    if !(y > 0.0) || !y.is_finite() {
        return Err(GameError::NonpositiveReservation { y });
    }
    let lhs = y * x;
    let rhs = 0.75 * (1.0 + x);
    if !(lhs < rhs) {
        return Err(GameError::ViolatesSalesCondition { lhs, rhs });
    }
    Ok(MarketParams { x, y })
}

impl MarketParams {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        validate_params(x, y)
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// Profit a firm at edge distance `d` earns by selling to its fans only.
    pub fn fan_only_profit(&self, d: f64) -> f64 {
        1.0 - d * d
    }

    /// Profit a firm at edge distance `d` earns by pricing at the switchers'
    /// reservation and selling to both its fans and the switchers.
    pub fn serve_both_profit(&self, d: f64) -> f64 {
        let c = 0.5 - d;
        (self.y - c * c) * (1.0 + self.x)
    }

    pub fn location_regime(&self) -> LocationRegime {
        classify_location_regime(self)
    }
}

/// A location pair with `0 <= z1 <= 1/2 <= z2 <= 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "RawLocations", try_from = "RawLocations")]
pub struct LocationPair {
    edge: [f64; 2],
}

#[derive(Serialize, Deserialize)]
struct RawLocations {
    z1: f64,
    z2: f64,
}

impl From<LocationPair> for RawLocations {
    fn from(l: LocationPair) -> Self {
        RawLocations { z1: l.z1(), z2: l.z2() }
    }
}

impl TryFrom<RawLocations> for LocationPair {
    type Error = GameError;
    fn try_from(raw: RawLocations) -> Result<Self> {
        LocationPair::new(raw.z1, raw.z2)
    }
}

impl LocationPair {
    pub fn new(z1: f64, z2: f64) -> Result<Self> {
        let ok = (0.0..=0.5).contains(&z1) && (0.5..=1.0).contains(&z2);
        if !ok {
            return Err(GameError::InvalidLocation { z1, z2 });
        }
        Ok(LocationPair {
            edge: [z1, 1.0 - z2],
        })
    }

    /// Builds a pair directly from edge distances `d1 = z1`, `d2 = 1 - z2`.
    pub fn from_edges(d1: f64, d2: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&d1) || !(0.0..=0.5).contains(&d2) {
            return Err(GameError::InvalidLocation { z1: d1, z2: 1.0 - d2 });
        }
        Ok(LocationPair { edge: [d1, d2] })
    }

    pub fn z1(&self) -> f64 {
        self.edge[0]
    }

    pub fn z2(&self) -> f64 {
        1.0 - self.edge[1]
    }

    pub fn location(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.z1(),
            Firm::Two => self.z2(),
        }
    }

    /// Distance from the firm to its own fans.
    pub fn edge(&self, firm: Firm) -> f64 {
        self.edge[firm.index()]
    }

    pub fn fan_cost(&self, firm: Firm) -> f64 {
        let d = self.edge(firm);
        d * d
    }

    /// Transport cost the switchers at 1/2 pay to reach the firm.
    pub fn center_cost(&self, firm: Firm) -> f64 {
        let c = 0.5 - self.edge(firm);
        c * c
    }

    /// `T_i = (1/2 - z_i)^2 - (1/2 - z_j)^2`.
    pub fn transport_gap(&self, firm: Firm) -> f64 {
        self.center_cost(firm) - self.center_cost(firm.other())
    }

    /// `z1 + z2 <= 1`, i.e. firm 2 is at least as close to 1/2 as firm 1.
    pub fn is_canonical(&self) -> bool {
        self.edge[0] <= self.edge[1]
    }

    pub fn is_symmetric(&self) -> bool {
        self.edge[0] == self.edge[1]
    }

    /// Mirror image about 1/2 with firm roles swapped.
    pub fn reflect(&self) -> LocationPair {
        LocationPair {
            edge: [self.edge[1], self.edge[0]],
        }
    }

    /// Canonical representative and whether a reflection was applied.
    pub fn canonical(&self) -> (LocationPair, bool) {
        if self.is_canonical() {
            (*self, false)
        } else {
            (self.reflect(), true)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PricePair {
    pub p1: f64,
    pub p2: f64,
}

impl PricePair {
    pub fn new(p1: f64, p2: f64) -> Result<Self> {
        if !(p1 >= 0.0 && p2 >= 0.0) {
            return Err(GameError::NegativePrice { p1, p2 });
        }
        Ok(PricePair { p1, p2 })
    }

    pub fn price(&self, firm: Firm) -> f64 {
        match firm {
            Firm::One => self.p1,
            Firm::Two => self.p2,
        }
    }

    pub fn swapped(&self) -> PricePair {
        PricePair {
            p1: self.p2,
            p2: self.p1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Utilities {
    pub c1: f64,
    pub c2: f64,
    /// Switchers' utility from buying at firm 1 and at firm 2.
    pub c3: [f64; 2],
}

pub fn consumer_utilities(
    params: &MarketParams,
    loc: &LocationPair,
    prices: &PricePair,
) -> Utilities {
    Utilities {
        c1: 1.0 - (prices.p1 + loc.fan_cost(Firm::One)),
        c2: 1.0 - (prices.p2 + loc.fan_cost(Firm::Two)),
        c3: [
            params.y() - effective_price(loc, prices, Firm::One),
            params.y() - effective_price(loc, prices, Firm::Two),
        ],
    }
}

/// Price plus the switchers' transport cost to the firm.
pub fn effective_price(loc: &LocationPair, prices: &PricePair, firm: Firm) -> f64 {
    prices.price(firm) + loc.center_cost(firm)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Consumer {
    C1,
    C2,
    C3,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum C3Purchase {
    Firm1,
    Firm2,
    Split,
    Nothing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DemandAllocation {
    pub c1_buys: bool,
    pub c2_buys: bool,
    pub c3: C3Purchase,
}

impl DemandAllocation {
    pub fn buyers(&self, firm: Firm) -> Vec<Consumer> {
        let mut out = Vec::with_capacity(2);
        match firm {
            Firm::One if self.c1_buys => out.push(Consumer::C1),
            Firm::Two if self.c2_buys => out.push(Consumer::C2),
            _ => {}
        }
        if self.c3_share(firm) > 0.0 {
            out.push(Consumer::C3);
        }
        out
    }

    /// Fraction of the switcher mass going to firm 1.
    pub fn c3_split(&self) -> f64 {
        self.c3_share(Firm::One)
    }

    pub fn c3_share(&self, firm: Firm) -> f64 {
        match (self.c3, firm) {
            (C3Purchase::Split, _) => 0.5,
            (C3Purchase::Firm1, Firm::One) | (C3Purchase::Firm2, Firm::Two) => 1.0,
            _ => 0.0,
        }
    }

    pub fn fan_buys(&self, firm: Firm) -> bool {
        match firm {
            Firm::One => self.c1_buys,
            Firm::Two => self.c2_buys,
        }
    }
}

pub fn demand(params: &MarketParams, loc: &LocationPair, prices: &PricePair) -> DemandAllocation {
    let fan = |firm: Firm| prices.price(firm) <= 1.0 - loc.fan_cost(firm);
    // Affordability is tested in price space, `p_i <= y - c_i`, so that a
    // price set exactly at the switchers' reservation is accepted.
    let affordable = |firm: Firm| prices.price(firm) <= params.y() - loc.center_cost(firm);
    let e1 = effective_price(loc, prices, Firm::One);
    let e2 = effective_price(loc, prices, Firm::Two);
    let c3 = match (affordable(Firm::One), affordable(Firm::Two)) {
        (false, false) => C3Purchase::Nothing,
        (true, false) => C3Purchase::Firm1,
        (false, true) => C3Purchase::Firm2,
        (true, true) if e1 < e2 => C3Purchase::Firm1,
        (true, true) if e2 < e1 => C3Purchase::Firm2,
        (true, true) => C3Purchase::Split,
    };
    DemandAllocation {
        c1_buys: fan(Firm::One),
        c2_buys: fan(Firm::Two),
        c3,
    }
}

/// Realized profits `(π1, π2)` at a price pair; production is costless.
pub fn profits(params: &MarketParams, loc: &LocationPair, prices: &PricePair) -> [f64; 2] {
    let alloc = demand(params, loc, prices);
    Firm::BOTH.map(|firm| {
        let p = prices.price(firm);
        let fans = if alloc.fan_buys(firm) { p } else { 0.0 };
        fans + p * params.x() * alloc.c3_share(firm)
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriceRegime {
    FarFar,
    FarNear,
    NearFar,
    NearNearA,
    NearNearB,
}

impl PriceRegime {
    /// Regime of the reflected instance.
    pub fn mirror(self) -> PriceRegime {
        match self {
            PriceRegime::FarNear => PriceRegime::NearFar,
            PriceRegime::NearFar => PriceRegime::FarNear,
            other => other,
        }
    }

    pub fn is_near_near(self) -> bool {
        matches!(self, PriceRegime::NearNearA | PriceRegime::NearNearB)
    }
}

/// Result of [`classify_price_regime`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceClassification {
    pub regime: PriceRegime,
    /// Set when some defining inequality holds only within tolerance.
    pub boundary_flag: bool,
    /// Fan-only minus serve-both profit for each firm (>= 0 means far).
    pub far_margin: [f64; 2],
}

fn within_tol(a: f64, b: f64) -> bool {
    (a - b).abs() <= CLASSIFY_TOL * a.abs().max(b.abs()).max(1.0)
}

pub fn classify_price_regime(params: &MarketParams, loc: &LocationPair) -> PriceClassification {
    let mut boundary = false;
    let mut far = [false; 2];
    let mut far_margin = [0.0; 2];
    for firm in Firm::BOTH {
        let d = loc.edge(firm);
        let fan = params.fan_only_profit(d);
        let both = params.serve_both_profit(d);
        let tied = within_tol(fan, both);
        boundary |= tied;
        far[firm.index()] = tied || fan >= both;
        far_margin[firm.index()] = fan - both;
    }
    // The margin falls as a firm moves inward, so the inner firm is near
    // whenever the outer one is. Enforced explicitly against rounding.
    let (outer, inner) = if loc.edge[0] <= loc.edge[1] { (0, 1) } else { (1, 0) };
    if !far[outer] {
        far[inner] = false;
    }
    let regime = match far {
        [true, true] => PriceRegime::FarFar,
        [true, false] => PriceRegime::FarNear,
        [false, true] => PriceRegime::NearFar,
        [false, false] => {
            // A/B is decided on the firm nearer to 1/2 (firm 2 once canonical).
            let d = loc.edge[0].max(loc.edge[1]);
            let c = 0.5 - d;
            let reservation_price = params.y() - c * c;
            let fan_cap = 1.0 - d * d;
            let tied = within_tol(reservation_price, fan_cap);
            boundary |= tied;
            if !tied && reservation_price < fan_cap {
                PriceRegime::NearNearA
            } else {
                PriceRegime::NearNearB
            }
        }
    };
    PriceClassification {
        regime,
        boundary_flag: boundary,
        far_margin,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LocationRegime {
    PureSeparation,
    CensoredMix,
    FullMix,
}

pub fn classify_location_regime(params: &MarketParams) -> LocationRegime {
    let s = 1.0 + params.x();
    if params.y() * s < 1.0 {
        LocationRegime::PureSeparation
    } else if (params.y() - 0.25) * s > 1.0 {
        LocationRegime::FullMix
    } else {
        LocationRegime::CensoredMix
    }
}

/// Edge distance `z̄1` at which fan-only and serve-both profits coincide.
///
/// `None` when `(y - 1/4)(1+x) > 1`: then every location is near. The value
/// exceeds 1/2 when every location is far; if the defining quadratic has no
/// real root at all the vertex `1/2 + 1/(2x)` is returned, which keeps that
/// reading.
pub fn far_threshold(params: &MarketParams) -> Option<f64> {
    let (x, y) = (params.x(), params.y());
    if (y - 0.25) * (1.0 + x) > 1.0 {
        return None;
    }
    let disc = (x - 1.0).powi(2) + 4.0 * x * (y - 0.25) * (1.0 + x);
    Some(0.5 - (disc.max(0.0).sqrt() - 1.0) / (2.0 * x))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Firm 1's far/near boundary (a location).
    pub z_bar1: Option<f64>,
    /// Firm 2's far/near boundary, `1 - z̄1`.
    pub z_bar2: Option<f64>,
    pub t1: f64,
    pub t2: f64,
}

pub fn thresholds(params: &MarketParams, loc: &LocationPair) -> Thresholds {
    let z_bar1 = far_threshold(params);
    Thresholds {
        z_bar1,
        z_bar2: z_bar1.map(|z| 1.0 - z),
        t1: loc.transport_gap(Firm::One),
        t2: loc.transport_gap(Firm::Two),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(x: f64, y: f64) -> MarketParams {
        MarketParams::new(x, y).unwrap()
    }

    fn loc(z1: f64, z2: f64) -> LocationPair {
        LocationPair::new(z1, z2).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn validate_params_examples() {
        assert!(validate_params(1.0, 0.6).is_ok());
        assert!(matches!(
            validate_params(1.0, 1.6),
            Err(GameError::ViolatesSalesCondition { .. })
        ));
        // 3·0.74 = 2.22 < 0.75·4 = 3
        assert!(validate_params(3.0, 0.74).is_ok());
        assert!(matches!(
            validate_params(3.0, 1.1),
            Err(GameError::ViolatesSalesCondition { .. })
        ));
        assert!(matches!(
            validate_params(0.5, 0.2),
            Err(GameError::ViolatesDensityFloor { .. })
        ));
        assert!(matches!(
            validate_params(2.0, 0.0),
            Err(GameError::NonpositiveReservation { .. })
        ));
        assert!(validate_params(f64::NAN, 0.5).is_err());
        // boundary of the sales condition is excluded
        assert!(validate_params(1.0, 1.5).is_err());
    }

    #[test]
    fn error_message_names_the_inequality() {
        let msg = validate_params(1.0, 1.6).unwrap_err().to_string();
        assert!(msg.contains("y·x < 3/4·(1+x) violated"), "{msg}");
    }

    #[test]
    fn location_pair_bounds() {
        assert!(LocationPair::new(0.6, 0.7).is_err());
        assert!(LocationPair::new(0.2, 0.4).is_err());
        assert!(LocationPair::new(-0.1, 0.7).is_err());
        assert!(LocationPair::new(0.0, 1.0).is_ok());
        assert!(LocationPair::new(0.5, 0.5).is_ok());
    }

    #[test]
    fn utilities_examples() {
        let p = params(1.0, 0.6);
        let u = consumer_utilities(&p, &loc(0.4, 0.5), &PricePair::new(0.5, 0.5).unwrap());
        assert!(close(u.c1, 0.34, 1e-15));
        assert!(close(u.c2, 0.25, 1e-15));
        assert!(close(u.c3[0], 0.09, 1e-15));
        assert!(close(u.c3[1], 0.10, 1e-15));

        let u = consumer_utilities(&p, &loc(0.0, 1.0), &PricePair::new(1.0, 1.0).unwrap());
        assert_eq!(u.c1, 0.0);
        assert_eq!(u.c2, 0.0);

        let u = consumer_utilities(&p, &loc(0.5, 0.5), &PricePair::new(0.6, 0.6).unwrap());
        assert_eq!(u.c3, [0.0, 0.0]);
    }

    #[test]
    fn demand_examples() {
        let p = params(1.0, 0.6);
        // effective prices 0.51 vs 0.50
        let a = demand(&p, &loc(0.4, 0.5), &PricePair::new(0.5, 0.5).unwrap());
        assert_eq!(a.buyers(Firm::One), vec![Consumer::C1]);
        assert_eq!(a.buyers(Firm::Two), vec![Consumer::C2, Consumer::C3]);

        let a = demand(&p, &loc(0.5, 0.5), &PricePair::new(0.5, 0.5).unwrap());
        assert_eq!(a.c3_split(), 0.5);

        let a = demand(&p, &loc(0.5, 0.5), &PricePair::new(0.7, 0.7).unwrap());
        assert_eq!(a.c3, C3Purchase::Nothing);
        assert_eq!(a.c3_split(), 0.0);
    }

    #[test]
    fn fan_purchase_is_weakly_inclusive() {
        let p = params(1.0, 0.6);
        let l = loc(0.3, 0.7);
        let at_cap = PricePair::new(1.0 - 0.09, 1.0 - (1.0 - 0.7) * (1.0 - 0.7)).unwrap();
        let a = demand(&p, &l, &at_cap);
        assert!(a.c1_buys && a.c2_buys);
    }

    #[test]
    fn profit_examples() {
        let p = params(1.0, 0.6);
        let pr = profits(&p, &loc(0.4, 0.5), &PricePair::new(0.5, 0.5).unwrap());
        assert!(close(pr[0], 0.5, 1e-15) && close(pr[1], 1.0, 1e-15));

        let pr = profits(&p, &loc(0.5, 0.5), &PricePair::new(0.5, 0.5).unwrap());
        assert_eq!(pr, [0.75, 0.75]);

        let pr = profits(&p, &loc(0.0, 1.0), &PricePair::new(1.2, 1.2).unwrap());
        assert_eq!(pr, [0.0, 0.0]);
    }

    #[test]
    fn classify_examples() {
        let c = classify_price_regime(&params(1.0, 0.6), &loc(0.1, 0.9));
        assert_eq!(c.regime, PriceRegime::FarFar);
        assert!(!c.boundary_flag);

        let c = classify_price_regime(&params(1.0, 0.6), &loc(0.4, 0.5));
        assert_eq!(c.regime, PriceRegime::NearNearA);

        let c = classify_price_regime(&params(1.0, 0.8), &loc(0.45, 0.5));
        assert_eq!(c.regime, PriceRegime::NearNearB);

        let c = classify_price_regime(&params(1.0, 0.6), &loc(0.1, 0.5));
        assert_eq!(c.regime, PriceRegime::FarNear);
        let c = classify_price_regime(&params(1.0, 0.6), &loc(0.5, 0.9));
        assert_eq!(c.regime, PriceRegime::NearFar);
    }

    #[test]
    fn classify_at_threshold_is_far_and_flagged() {
        let p = params(1.0, 0.6);
        let zb = far_threshold(&p).unwrap();
        let c = classify_price_regime(&p, &loc(zb, 0.9));
        assert_eq!(c.regime, PriceRegime::FarFar);
        assert!(c.boundary_flag);
    }

    #[test]
    fn thresholds_examples() {
        let p = params(1.0, 0.6);
        let t = thresholds(&p, &loc(0.4, 0.5));
        let zb = t.z_bar1.unwrap();
        assert!(close(zb, 0.5 - (2.8f64.sqrt() - 1.0) / 2.0, 1e-15));
        assert!(close(zb, 0.16334, 1e-5));
        let resid = (0.6 - (0.5 - zb).powi(2)) * 2.0 - (1.0 - zb * zb);
        assert!(resid.abs() <= 1e-12);
        assert!(close(t.t1, 0.01, 1e-15));
        assert!(close(t.t2, -0.01, 1e-15));

        assert!(far_threshold(&params(1.0, 0.8)).is_none());
    }

    #[test]
    fn location_regime_bands() {
        assert_eq!(classify_location_regime(&params(1.0, 0.4)), LocationRegime::PureSeparation);
        assert_eq!(classify_location_regime(&params(1.0, 0.5)), LocationRegime::CensoredMix);
        assert_eq!(classify_location_regime(&params(1.0, 0.75)), LocationRegime::CensoredMix);
        assert_eq!(classify_location_regime(&params(1.0, 0.8)), LocationRegime::FullMix);
    }

    #[test]
    fn reflect_examples() {
        let l = loc(0.4, 0.7);
        let r = l.reflect();
        assert!(close(r.z1(), 0.3, 1e-15));
        assert!(close(r.z2(), 0.6, 1e-15));
        assert_eq!(r.reflect(), l);
        let s = loc(0.3, 0.7);
        assert!(close(s.reflect().z1(), 0.3, 1e-15));

        let p = params(1.0, 0.6);
        let prices = PricePair::new(0.45, 0.52).unwrap();
        let a = profits(&p, &l, &prices);
        let b = profits(&p, &r, &prices.swapped());
        assert_eq!(a, [b[1], b[0]]);
    }

    mod proptests {
        use super::*;
        use proptest::prelude::*;

        fn arb_params() -> impl Strategy<Value = MarketParams> {
            (1.0f64..6.0, 0.01f64..1.0).prop_filter_map("valid", |(x, f)| {
                let ymax = 0.75 * (1.0 + x) / x;
                MarketParams::new(x, f * ymax).ok()
            })
        }

        fn arb_loc() -> impl Strategy<Value = LocationPair> {
            (0.0f64..=0.5, 0.5f64..=1.0).prop_map(|(a, b)| LocationPair::new(a, b).unwrap())
        }

        proptest! {
            #[test]
            fn reflect_is_involutive(l in arb_loc()) {
                prop_assert_eq!(l.reflect().reflect(), l);
            }

            #[test]
            fn classification_mirrors(p in arb_params(), l in arb_loc()) {
                let a = classify_price_regime(&p, &l);
                let b = classify_price_regime(&p, &l.reflect());
                prop_assert_eq!(b.regime, a.regime.mirror());
            }

            #[test]
            fn near_far_unreachable_when_canonical(p in arb_params(), l in arb_loc()) {
                let (c, _) = l.canonical();
                prop_assert_ne!(classify_price_regime(&p, &c).regime, PriceRegime::NearFar);
            }

            #[test]
            fn threshold_identities(p in arb_params()) {
                let (x, y) = (p.x(), p.y());
                let absent = (y - 0.25) * (1.0 + x) > 1.0;
                let zb = far_threshold(&p);
                prop_assert_eq!(zb.is_none(), absent);
                if let Some(z1) = zb {
                    prop_assert!(y <= 0.75);
                    let z2 = 1.0 - z1;
                    prop_assert_eq!(z1 + z2, 1.0);
                    let disc = (x - 1.0).powi(2) + 4.0 * x * (y - 0.25) * (1.0 + x);
                    if disc >= 0.0 {
                        let resid = p.serve_both_profit(z1) - p.fan_only_profit(z1);
                        prop_assert!(resid.abs() <= 1e-12, "resid {}", resid);
                    }
                }
            }

            #[test]
            fn transport_gap_sign(l in arb_loc()) {
                let t1 = l.transport_gap(Firm::One);
                if l.z1() + l.z2() <= 1.0 {
                    prop_assert!(t1 >= -1e-15);
                } else {
                    prop_assert!(t1 <= 1e-15);
                }
            }

            #[test]
            fn tie_only_on_equal_effective_prices(p in arb_params(), l in arb_loc(), p1 in 0.0f64..1.2, p2 in 0.0f64..1.2) {
                let prices = PricePair::new(p1, p2).unwrap();
                let a = demand(&p, &l, &prices);
                if a.c3 == C3Purchase::Split {
                    prop_assert_eq!(effective_price(&l, &prices, Firm::One), effective_price(&l, &prices, Firm::Two));
                }
            }
        }
    }
}
