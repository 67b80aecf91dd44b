//! JSON and CSV documents emitted by the subcommands.

use serde::{Deserialize, Serialize};

use salesgame::location::{LocationEquilibrium, LocationPiece, SpeOutcome};
use salesgame::model::{far_threshold, thresholds, PriceClassification};
use salesgame::price::{PriceEquilibrium, PricePiece, PriceStrategy};
use crate::csv_table;
use salesgame::{classify_price_regime, LocationPair, LocationRegime, MarketParams, PriceRegime};

#[derive(Serialize)]
pub struct PriceRegimeDoc {
    pub z1: f64,
    pub z2: f64,
    #[serde(flatten)]
    pub classification: PriceClassification,
    pub t1: f64,
    pub t2: f64,
}

#[derive(Serialize)]
pub struct ClassifyDoc {
    pub x: f64,
    pub y: f64,
    pub location_regime: LocationRegime,
    pub z_bar1: Option<f64>,
    pub z_bar2: Option<f64>,
    pub hat_z: Option<(f64, f64)>,
    pub price: Option<PriceRegimeDoc>,
}

impl ClassifyDoc {
    pub fn new(params: &MarketParams, loc: Option<&LocationPair>) -> ClassifyDoc {
        let z_bar1 = far_threshold(params);
        ClassifyDoc {
            x: params.x(),
            y: params.y(),
            location_regime: params.location_regime(),
            z_bar1,
            z_bar2: z_bar1.map(|z| 1.0 - z),
            hat_z: salesgame::location::hat_z(params).ok(),
            price: loc.map(|l| {
                let t = thresholds(params, l);
                PriceRegimeDoc {
                    z1: l.z1(),
                    z2: l.z2(),
                    classification: classify_price_regime(params, l),
                    t1: t.t1,
                    t2: t.t2,
                }
            }),
        }
    }
}

/// A solved price subgame. This is also the `--strategy-in` format.
#[derive(Serialize, Deserialize)]
pub struct PriceDoc {
    pub regime: PriceRegime,
    pub profits: [f64; 2],
    pub params: MarketParams,
    pub equilibrium: PriceEquilibrium,
}

impl PriceDoc {
    pub fn new(params: MarketParams, equilibrium: PriceEquilibrium) -> PriceDoc {
        PriceDoc {
            regime: equilibrium.regime(),
            profits: equilibrium.profits,
            params,
            equilibrium,
        }
    }
}

#[derive(Serialize)]
pub struct SpeDoc {
    pub params: MarketParams,
    pub regime: LocationRegime,
    pub payoff: [f64; 2],
    pub z_bar1: Option<f64>,
    pub hat_z: Option<(f64, f64)>,
    pub equilibria: Vec<LocationEquilibrium>,
}

impl SpeDoc {
    pub fn new(params: &MarketParams, spe: SpeOutcome) -> SpeDoc {
        SpeDoc {
            params: *params,
            regime: spe.regime,
            payoff: spe.payoff,
            z_bar1: far_threshold(params),
            hat_z: spe.hat_z,
            equilibria: spe.equilibria,
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn price_csv(eq: &PriceEquilibrium) -> String {
    let mut rows = Vec::new();
    for (i, s) in eq.strategies.iter().enumerate() {
        let pieces = match s {
            PriceStrategy::Pure { price } => vec![PricePiece::Atom { at: *price, mass: 1.0 }],
            PriceStrategy::Mixed(m) => m.pieces.clone(),
        };
        for pc in pieces {
            let (kind, lo, hi, k, shift, level, at, mass) = match pc {
                PricePiece::Rational { lo, hi, k, shift } => {
                    ("rational", Some(lo), Some(hi), Some(k), Some(shift), None, None, None)
                }
                PricePiece::Flat { lo, hi, level } => ("flat", Some(lo), Some(hi), None, None, Some(level), None, None),
                PricePiece::Atom { at, mass } => ("atom", None, None, None, None, None, Some(at), Some(mass)),
            };
            rows.push(vec![
                (i + 1).to_string(),
                kind.to_string(),
                cell(lo),
                cell(hi),
                cell(k),
                cell(shift),
                cell(level),
                cell(at),
                cell(mass),
            ]);
        }
    }
    csv_table(&["firm", "kind", "lo", "hi", "k", "shift", "level", "at", "mass"], rows)
}

pub fn spe_csv(spe: &SpeOutcome) -> String {
    let mut rows = Vec::new();
    for (e, eq) in spe.equilibria.iter().enumerate() {
        let payoff = eq.payoff();
        for (i, s) in eq.strategies(spe.params.x()).iter().enumerate() {
            for pc in &s.pieces {
                let (kind, lo, hi, level, at, mass) = match *pc {
                    LocationPiece::G1 { lo, hi } => ("g1", Some(lo), Some(hi), None, None, None),
                    LocationPiece::G2 { lo, hi } => ("g2", Some(lo), Some(hi), None, None, None),
                    LocationPiece::Flat { lo, hi, level } => ("flat", Some(lo), Some(hi), Some(level), None, None),
                    LocationPiece::Atom { at, mass } => ("atom", None, None, None, Some(at), Some(mass)),
                };
                rows.push(vec![
                    e.to_string(),
                    (i + 1).to_string(),
                    kind.to_string(),
                    cell(lo),
                    cell(hi),
                    cell(level),
                    cell(at),
                    cell(mass),
                    payoff[i].to_string(),
                ]);
            }
        }
    }
    csv_table(&["equilibrium", "firm", "kind", "lo", "hi", "level", "at", "mass", "payoff"], rows)
}
