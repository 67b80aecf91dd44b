//! Deviation scans certifying ε-equilibrium.
//!
//! For each firm the scan evaluates the exact expected profit at a uniform
//! grid plus every point where the profit can jump or kink: own support
//! endpoints, opponent atoms mapped through the transport gap, and the two
//! reservation prices, each with a small neighbourhood. Separately, the
//! firm's own equilibrium payoff is integrated against its strategy, so a
//! strategy that merely fails to reach `π*` is caught as a shortfall.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::location::{expected_location_payoff, LocationEquilibrium, LocationStrategy};
use crate::model::{far_threshold, Firm, LocationPair, MarketParams};
use crate::price::{
    equilibrium_profits_any, expected_profit_any, PriceEquilibrium, PricePiece, PriceStrategy,
};
use crate::quadrature::integrate_split;

/// Offset used to probe either side of a discontinuity.
pub const PROBE: f64 = 1e-10;

/// Structural tolerance for CDF validity checks.
pub const CDF_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub instance: String,
    /// Best grid deviation minus the equilibrium payoff, per firm.
    pub max_gain: [f64; 2],
    pub argmax: [f64; 2],
    /// Equilibrium payoff minus the payoff the firm's own strategy earns.
    pub shortfall: [f64; 2],
    pub grid_n: usize,
    pub eps: f64,
    pub defects: Vec<String>,
    pub warning: Option<String>,
    pub pass: bool,
}

impl VerificationReport {
    fn finish(mut self) -> Self {
        let ok = |v: f64| v.is_finite() && v <= self.eps;
        self.pass = self.max_gain.iter().all(|&g| ok(g))
            && self.shortfall.iter().all(|&s| ok(s.abs()))
            && self.defects.is_empty();
        self
    }
}

/// Upper end of the price scan, `1 + ` the largest transport cost involved.
pub fn price_scan_top(loc: &LocationPair) -> f64 {
    let t = Firm::BOTH
        .iter()
        .flat_map(|&f| [loc.fan_cost(f), loc.center_cost(f)])
        .fold(0.0, f64::max);
    1.0 + t
}

/// Default budget `10 · range / grid_n`.
pub fn default_price_eps(loc: &LocationPair, grid_n: usize) -> f64 {
    10.0 * price_scan_top(loc) / grid_n as f64
}

fn grid(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |i| (a * (n - 1 - i) as f64 + b * i as f64) / (n - 1) as f64)
}

fn breakpoints(s: &PriceStrategy) -> Vec<f64> {
    match s {
        PriceStrategy::Pure { price } => vec![*price],
        PriceStrategy::Mixed(m) => m
            .pieces
            .iter()
            .flat_map(|pc| match *pc {
                PricePiece::Rational { lo, hi, .. } | PricePiece::Flat { lo, hi, .. } => vec![lo, hi],
                PricePiece::Atom { at, .. } => vec![at],
            })
            .collect(),
    }
}

fn price_candidates(
    params: &MarketParams,
    loc: &LocationPair,
    firm: Firm,
    own: &PriceStrategy,
    opp: &PriceStrategy,
    grid_n: usize,
) -> Vec<f64> {
    let top = price_scan_top(loc);
    let gap = loc.transport_gap(firm);
    let mut special: Vec<f64> = breakpoints(own);
    special.extend(breakpoints(opp).into_iter().map(|a| a - gap));
    special.push(1.0 - loc.fan_cost(firm));
    special.push(params.y() - loc.center_cost(firm));
    let mut out: Vec<f64> = grid(0.0, top, grid_n).collect();
    for s in special {
        out.extend([s - PROBE, s, s + PROBE]);
    }
    out.retain(|p| *p >= 0.0 && p.is_finite());
    out
}

/// Exhaustive argmax of `values` with ties broken towards the first entry.
fn argmax(points: &[f64], values: &[f64]) -> (f64, f64) {
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for (&p, &v) in points.iter().zip(values) {
        if v > best.1 || (v == best.1 && p < best.0) {
            best = (p, v);
        }
    }
    best
}

/// Integral of the firm's expected profit against its own strategy.
fn own_payoff(
    params: &MarketParams,
    loc: &LocationPair,
    firm: Firm,
    own: &PriceStrategy,
    opp: &PriceStrategy,
) -> f64 {
    let e = |p: f64| expected_profit_any(params, loc, firm, p, opp);
    match own {
        PriceStrategy::Pure { price } => e(*price),
        PriceStrategy::Mixed(m) => {
            let gap = loc.transport_gap(firm);
            let mut breaks: Vec<f64> = breakpoints(opp).into_iter().map(|a| a - gap).collect();
            breaks.push(1.0 - loc.fan_cost(firm));
            breaks.push(params.y() - loc.center_cost(firm));
            let atoms: f64 = m.atoms().map(|(a, w)| w * e(a)).sum();
            let cont: f64 = m
                .support()
                .increasing
                .into_iter()
                .map(|(lo, hi)| integrate_split(|p| e(p) * m.density(p), lo, hi, &breaks, 1e-11))
                .sum();
            atoms + cont
        }
    }
}

/// Scans both firms' deviations from a price equilibrium.
///
/// `eps = None` selects [`default_price_eps`].
pub fn verify_price_equilibrium(
    params: &MarketParams,
    loc: &LocationPair,
    eq: &PriceEquilibrium,
    grid_n: usize,
    eps: Option<f64>,
) -> VerificationReport {
    let eps = eps.unwrap_or_else(|| default_price_eps(loc, grid_n));
    let target = equilibrium_profits_any(params, loc);
    let mut defects = Vec::new();
    for firm in Firm::BOTH {
        let i = firm.index();
        for d in eq.strategies[i].defects(CDF_TOL) {
            defects.push(format!("firm {}: {d}", i + 1));
        }
        if (eq.profits[i] - target[i]).abs() > 1e-12 {
            defects.push(format!(
                "firm {}: reported profit {} differs from {}",
                i + 1,
                eq.profits[i],
                target[i]
            ));
        }
    }

    let mut max_gain = [0.0; 2];
    let mut arg = [0.0; 2];
    let mut shortfall = [0.0; 2];
    for firm in Firm::BOTH {
        let i = firm.index();
        let own = &eq.strategies[i];
        let opp = &eq.strategies[1 - i];
        let points = price_candidates(params, loc, firm, own, opp, grid_n);
        let values: Vec<f64> = points
            .par_iter()
            .map(|&p| expected_profit_any(params, loc, firm, p, opp))
            .collect();
        let (p, v) = argmax(&points, &values);
        max_gain[i] = v - target[i];
        arg[i] = p;
        shortfall[i] = target[i] - own_payoff(params, loc, firm, own, opp);
    }

    VerificationReport {
        instance: format!(
            "price subgame x={} y={} z1={} z2={} regime={:?}",
            params.x(),
            params.y(),
            loc.z1(),
            loc.z2(),
            eq.regime()
        ),
        max_gain,
        argmax: arg,
        shortfall,
        grid_n,
        eps,
        defects,
        warning: eq
            .classification
            .boundary_flag
            .then(|| "instance lies on a regime boundary; equilibria may be multiple".to_string()),
        pass: false,
    }
    .finish()
}

/// Best grid response of `firm` to the opponent's price strategy on
/// `range` (default `[0, 1 + max transport]`); ties go to the lowest price.
pub fn discretized_best_response(
    params: &MarketParams,
    loc: &LocationPair,
    firm: Firm,
    opponent: &PriceStrategy,
    grid_n: usize,
    range: Option<(f64, f64)>,
) -> (f64, f64) {
    let (a, b) = range.unwrap_or((0.0, price_scan_top(loc)));
    let points: Vec<f64> = grid(a, b, grid_n).collect();
    let values: Vec<f64> = points
        .par_iter()
        .map(|&p| expected_profit_any(params, loc, firm, p, opponent))
        .collect();
    argmax(&points, &values)
}

/// Copies of `eq` with one numeric strategy field scaled by `factor`,
/// labelled by the field they touch. Fields equal to zero are skipped
/// since scaling leaves them unchanged.
pub fn perturbations(eq: &PriceEquilibrium, factor: f64) -> Vec<(String, PriceEquilibrium)> {
    let mut out = Vec::new();
    for i in 0..2 {
        let n_fields = match &eq.strategies[i] {
            PriceStrategy::Pure { .. } => 1,
            PriceStrategy::Mixed(m) => m.pieces.len() * 4 + 1,
        };
        for f in 0..n_fields {
            let mut copy = eq.clone();
            let label = match &mut copy.strategies[i] {
                PriceStrategy::Pure { price } => scale(price, factor, "price"),
                PriceStrategy::Mixed(m) if f == n_fields - 1 => scale(&mut m.x, factor, "x"),
                PriceStrategy::Mixed(m) => {
                    let (k, field) = (f / 4, f % 4);
                    match &mut m.pieces[k] {
                        PricePiece::Rational { lo, hi, k: kk, shift } => {
                            let fields = [("lo", lo), ("hi", hi), ("k", kk), ("shift", shift)];
                            let (name, v) = fields.into_iter().nth(field).unwrap();
                            scale(v, factor, name).map(|s| format!("piece {k} rational.{s}"))
                        }
                        PricePiece::Flat { lo, hi, level } => match field {
                            0 => scale(lo, factor, "lo"),
                            1 => scale(hi, factor, "hi"),
                            2 => scale(level, factor, "level"),
                            _ => None,
                        }
                        .map(|s| format!("piece {k} flat.{s}")),
                        PricePiece::Atom { at, mass } => match field {
                            0 => scale(at, factor, "at"),
                            1 => scale(mass, factor, "mass"),
                            _ => None,
                        }
                        .map(|s| format!("piece {k} atom.{s}")),
                    }
                }
            };
            if let Some(l) = label {
                out.push((format!("firm {} {l} x{factor}", i + 1), copy));
            }
        }
    }
    out
}

fn scale(v: &mut f64, factor: f64, name: &str) -> Option<String> {
    if *v == 0.0 {
        return None;
    }
    *v *= factor;
    Some(name.to_string())
}

/// Moves firm `i`'s top atom by `factor` together with the end of the flat
/// span before it, keeping the CDF valid.
pub fn shift_top_atom(eq: &PriceEquilibrium, firm: Firm, factor: f64) -> Option<PriceEquilibrium> {
    let mut copy = eq.clone();
    let PriceStrategy::Mixed(m) = &mut copy.strategies[firm.index()] else {
        return None;
    };
    let n = m.pieces.len();
    let PricePiece::Atom { at, .. } = &mut m.pieces[n - 1] else {
        return None;
    };
    let old = *at;
    *at *= factor;
    let new = *at;
    if n >= 2 {
        if let PricePiece::Flat { hi, .. } = &mut m.pieces[n - 2] {
            *hi = new;
            if let PricePiece::Flat { lo, .. } = m.pieces[n - 2] {
                if new <= lo {
                    return None;
                }
            }
        } else if new < old {
            return None;
        } else {
            let lo = old;
            let level = m.cdf_left(old);
            m.pieces.insert(n - 1, PricePiece::Flat { lo, hi: new, level });
        }
    }
    Some(copy)
}

fn location_candidates(params: &MarketParams, firm: Firm, opp: &LocationStrategy, grid_n: usize) -> Vec<f64> {
    let (a, b) = match firm {
        Firm::One => (0.0, 0.5),
        Firm::Two => (0.5, 1.0),
    };
    let mut out: Vec<f64> = grid(a, b, grid_n).collect();
    let mirror = |z: f64| match firm {
        Firm::One => z,
        Firm::Two => 1.0 - z,
    };
    let mut special = vec![0.0, 0.5];
    if let Some(zb) = far_threshold(params) {
        special.push(zb);
    }
    if let Some((h1, _)) = crate::location::hat_z(params).ok() {
        special.push(h1);
    }
    let mut extra: Vec<f64> = special.into_iter().map(mirror).collect();
    // the diagonal z1 + z2 = 1 against every opponent atom and piece end
    for (at, _) in opp.atoms() {
        extra.push(1.0 - at);
    }
    for (lo, hi) in opp.increasing() {
        extra.extend([1.0 - lo, 1.0 - hi]);
    }
    for s in extra {
        out.extend([s - PROBE, s, s + PROBE]);
    }
    out.retain(|z| *z >= a && *z <= b);
    out
}

/// Scans both firms' location deviations from one location equilibrium.
pub fn verify_location_equilibrium(
    params: &MarketParams,
    eq: &LocationEquilibrium,
    grid_n: usize,
    eps: f64,
) -> VerificationReport {
    let x = params.x();
    let strategies = eq.strategies(x);
    let payoff = eq.payoff();
    let mut defects = Vec::new();
    for firm in Firm::BOTH {
        let s = &strategies[firm.index()];
        for d in s.defects(CDF_TOL) {
            defects.push(format!("firm {}: {d}", firm.index() + 1));
        }
        if !s.within_half(firm) {
            defects.push(format!("firm {}: support leaves its half", firm.index() + 1));
        }
    }

    let mut max_gain = [0.0; 2];
    let mut arg = [0.0; 2];
    let mut shortfall = [0.0; 2];
    for firm in Firm::BOTH {
        let i = firm.index();
        let own = &strategies[i];
        let opp = &strategies[1 - i];
        let points = location_candidates(params, firm, opp, grid_n);
        let value = |z: f64| expected_location_payoff(params, firm, z, opp);
        let values: Vec<f64> = points.par_iter().map(|&z| value(z)).collect();
        let (z, v) = argmax(&points, &values);
        max_gain[i] = v - payoff[i];
        arg[i] = z;

        let atoms: f64 = own.atoms().map(|(a, w)| w * value(a)).sum();
        let cont: f64 = own
            .increasing()
            .into_iter()
            .map(|(lo, hi)| {
                let breaks: Vec<f64> = opp.increasing().iter().flat_map(|r| [1.0 - r.0, 1.0 - r.1]).collect();
                integrate_split(|z| value(z) * own.density(z), lo, hi, &breaks, 1e-10)
            })
            .sum();
        shortfall[i] = payoff[i] - (atoms + cont);
    }

    let label = match eq {
        LocationEquilibrium::MixedPair { .. } => "mixed pair".to_string(),
        LocationEquilibrium::PurePair { z1, z2, .. } => format!("pure pair ({z1}, {z2})"),
    };
    VerificationReport {
        instance: format!("location game x={} y={} {label}", params.x(), params.y()),
        max_gain,
        argmax: arg,
        shortfall,
        grid_n,
        eps,
        defects,
        warning: None,
        pass: false,
    }
    .finish()
}
