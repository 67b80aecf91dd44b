//! Monte Carlo simulation of the two-stage game.
//!
//! Draws are split into fixed-size chunks; chunk `k` uses a ChaCha8 stream
//! seeded with the run seed and stream id `k`. Chunks run in parallel and
//! are merged in index order, so results do not depend on the worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::location::SpeOutcome;
use crate::model::{
    consumer_utilities, demand, profits, C3Purchase, Firm, LocationPair, MarketParams, PricePair,
};
use crate::price::{solve, PriceEquilibrium, Variant};

pub const CHUNK: usize = 4096;
pub const HIST_BINS: usize = 50;

/// Running mean and sum of squared deviations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1.0;
        let delta = v - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (v - self.mean);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.n == 0.0 {
            return other;
        }
        if other.n == 0.0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Moments {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }

    /// Standard error of the mean, sample std / √n.
    fn se(&self) -> f64 {
        if self.n < 2.0 {
            return 0.0;
        }
        (self.m2 / (self.n - 1.0)).sqrt() / self.n.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    /// Normalised so that `Σ density · width = 1`.
    pub density: Vec<f64>,
}

impl Histogram {
    fn from_counts(lo: f64, hi: f64, counts: &[u64]) -> Histogram {
        let total: u64 = counts.iter().sum();
        let width = (hi - lo) / counts.len() as f64;
        let density = counts
            .iter()
            .map(|&c| if total == 0 { 0.0 } else { c as f64 / (total as f64 * width) })
            .collect();
        Histogram { lo, hi, density }
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.density.len() as f64
    }

    pub fn total(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

fn bin(lo: f64, hi: f64, v: f64) -> usize {
    let k = ((v - lo) / (hi - lo) * HIST_BINS as f64).floor();
    (k.max(0.0) as usize).min(HIST_BINS - 1)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationStats {
    pub samples: usize,
    pub seed: u64,
    pub mean_profit: [f64; 2],
    pub se_profit: [f64; 2],
    pub mean_price: [f64; 2],
    pub price_hist: [Histogram; 2],
    pub location_hist: [Histogram; 2],
    /// Frequency of `z1 = 0` and of `z2 = 1`, with standard errors.
    pub edge_atom_freq: [f64; 2],
    pub edge_atom_se: [f64; 2],
    pub c3_purchase_fraction: f64,
    /// Fraction of location draws with `z1 + z2 > 1`.
    pub crossed_fraction: f64,
    pub mean_consumer_surplus: f64,
}

#[derive(Clone, Debug, Default)]
struct Acc {
    profit: [Moments; 2],
    price: [Moments; 2],
    surplus: Moments,
    price_counts: [Vec<u64>; 2],
    loc_counts: [Vec<u64>; 2],
    edge: [u64; 2],
    c3: u64,
    crossed: u64,
    n: u64,
}

impl Acc {
    fn new() -> Acc {
        Acc {
            price_counts: [vec![0; HIST_BINS], vec![0; HIST_BINS]],
            loc_counts: [vec![0; HIST_BINS], vec![0; HIST_BINS]],
            ..Default::default()
        }
    }

    fn merge(mut self, o: Acc) -> Acc {
        for i in 0..2 {
            self.profit[i] = self.profit[i].merge(o.profit[i]);
            self.price[i] = self.price[i].merge(o.price[i]);
            for (a, b) in self.price_counts[i].iter_mut().zip(&o.price_counts[i]) {
                *a += b;
            }
            for (a, b) in self.loc_counts[i].iter_mut().zip(&o.loc_counts[i]) {
                *a += b;
            }
            self.edge[i] += o.edge[i];
        }
        self.surplus = self.surplus.merge(o.surplus);
        self.c3 += o.c3;
        self.crossed += o.crossed;
        self.n += o.n;
        self
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(CHUNK))
        .map(|k| (k, CHUNK.min(n - k * CHUNK)))
        .collect()
}

fn price_top(params: &MarketParams) -> f64 {
    params.y().max(1.0)
}

fn surplus(params: &MarketParams, loc: &LocationPair, prices: &PricePair) -> f64 {
    let u = consumer_utilities(params, loc, prices);
    let a = demand(params, loc, prices);
    let mut s = 0.0;
    if a.c1_buys {
        s += u.c1;
    }
    if a.c2_buys {
        s += u.c2;
    }
    s += params.x() * (a.c3_share(Firm::One) * u.c3[0] + a.c3_share(Firm::Two) * u.c3[1]);
    s
}

/// Simulates `n` two-stage plays of the first reported equilibrium.
pub fn simulate(params: &MarketParams, spe: &SpeOutcome, n: usize, seed: u64) -> SimulationStats {
    let [g1, g2] = spe.equilibria[0].strategies(params.x());
    let top = price_top(params);
    let acc = chunk_ranges(n)
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = chunk_rng(seed, k);
            let mut acc = Acc::new();
            for _ in 0..len {
                let z1 = g1.sample(&mut rng);
                let z2 = g2.sample(&mut rng);
                let loc = LocationPair::new(z1, z2).expect("samples lie in their halves");
                let eq = solve(params, &loc, Variant::Asymmetric).expect("valid instance");
                let p1 = eq.strategies[0].sample(&mut rng);
                let p2 = eq.strategies[1].sample(&mut rng);
                let prices = PricePair::new(p1, p2).expect("nonnegative prices");
                let pr = profits(params, &loc, &prices);
                for i in 0..2 {
                    acc.profit[i].push(pr[i]);
                    acc.price[i].push([p1, p2][i]);
                    acc.price_counts[i][bin(0.0, top, [p1, p2][i])] += 1;
                }
                acc.loc_counts[0][bin(0.0, 0.5, z1)] += 1;
                acc.loc_counts[1][bin(0.5, 1.0, z2)] += 1;
                acc.edge[0] += u64::from(z1 == 0.0);
                acc.edge[1] += u64::from(z2 == 1.0);
                acc.c3 += u64::from(demand(params, &loc, &prices).c3 != C3Purchase::Nothing);
                acc.crossed += u64::from(z1 + z2 > 1.0);
                acc.surplus.push(surplus(params, &loc, &prices));
                acc.n += 1;
            }
            acc
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(Acc::new(), Acc::merge);

    let nf = acc.n.max(1) as f64;
    let freq = acc.edge.map(|c| c as f64 / nf);
    SimulationStats {
        samples: n,
        seed,
        mean_profit: acc.profit.map(|m| m.mean),
        se_profit: acc.profit.map(|m| m.se()),
        mean_price: acc.price.map(|m| m.mean),
        price_hist: [
            Histogram::from_counts(0.0, top, &acc.price_counts[0]),
            Histogram::from_counts(0.0, top, &acc.price_counts[1]),
        ],
        location_hist: [
            Histogram::from_counts(0.0, 0.5, &acc.loc_counts[0]),
            Histogram::from_counts(0.5, 1.0, &acc.loc_counts[1]),
        ],
        edge_atom_freq: freq,
        edge_atom_se: freq.map(|f| (f * (1.0 - f) / nf).sqrt()),
        c3_purchase_fraction: acc.c3 as f64 / nf,
        crossed_fraction: acc.crossed as f64 / nf,
        mean_consumer_surplus: acc.surplus.mean,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceSampleStats {
    pub samples: usize,
    pub seed: u64,
    pub mean_price: [f64; 2],
    pub se_price: [f64; 2],
    pub mean_profit: [f64; 2],
    pub se_profit: [f64; 2],
}

/// Simulates `n` independent price draws from a fixed price equilibrium.
pub fn simulate_prices(
    params: &MarketParams,
    eq: &PriceEquilibrium,
    n: usize,
    seed: u64,
) -> PriceSampleStats {
    let loc = eq.locations;
    let acc = chunk_ranges(n)
        .into_par_iter()
        .map(|(k, len)| {
            let mut rng = chunk_rng(seed, k);
            let mut price = [Moments::default(); 2];
            let mut profit = [Moments::default(); 2];
            for _ in 0..len {
                let p = [eq.strategies[0].sample(&mut rng), eq.strategies[1].sample(&mut rng)];
                let pr = profits(params, &loc, &PricePair { p1: p[0], p2: p[1] });
                for i in 0..2 {
                    price[i].push(p[i]);
                    profit[i].push(pr[i]);
                }
            }
            (price, profit)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold([[Moments::default(); 2]; 2], |[pa, fa], (pb, fb)| {
            [
                [pa[0].merge(pb[0]), pa[1].merge(pb[1])],
                [fa[0].merge(fb[0]), fa[1].merge(fb[1])],
            ]
        });
    let [price, profit] = acc;
    PriceSampleStats {
        samples: n,
        seed,
        mean_price: price.map(|m| m.mean),
        se_price: price.map(|m| m.se()),
        mean_profit: profit.map(|m| m.mean),
        se_profit: profit.map(|m| m.se()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::location::solve_spe;
    use crate::model::validate_params;

    #[test]
    fn pure_separation_has_no_variance() {
        let p = validate_params(1.0, 0.4).unwrap();
        let spe = solve_spe(&p).unwrap();
        let s = simulate(&p, &spe, 10_000, 3);
        assert_eq!(s.mean_profit, [1.0, 1.0]);
        assert_eq!(s.se_profit, [0.0, 0.0]);
        assert_eq!(s.edge_atom_freq, [1.0, 1.0]);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let p = validate_params(1.0, 0.8).unwrap();
        let spe = solve_spe(&p).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(&p, &spe, 20_000, 11))
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn histograms_integrate_to_one() {
        let p = validate_params(1.0, 0.6).unwrap();
        let spe = solve_spe(&p).unwrap();
        let s = simulate(&p, &spe, 20_000, 5);
        for h in s.price_hist.iter().chain(&s.location_hist) {
            assert!((h.total() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn moments_merge_matches_sequential() {
        let data: Vec<f64> = (0..1000).map(|i| (f64::from(i) * 0.37).sin()).collect();
        let mut seq = Moments::default();
        data.iter().for_each(|&v| seq.push(v));
        let (a, b) = data.split_at(377);
        let mut ma = Moments::default();
        a.iter().for_each(|&v| ma.push(v));
        let mut mb = Moments::default();
        b.iter().for_each(|&v| mb.push(v));
        let merged = ma.merge(mb);
        assert!((merged.mean - seq.mean).abs() <= 1e-14);
        assert!((merged.m2 - seq.m2).abs() <= 1e-10);
    }
}
