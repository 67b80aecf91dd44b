//! Phase-diagram sweeps over an (x, y) grid.

use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use rayon::prelude::*;

use salesgame::location::{hat_z, solve_spe, LocationEquilibrium};
use salesgame::model::far_threshold;
use salesgame::oracle::{simulate, verify_location_equilibrium};
use salesgame::MarketParams;

use crate::{bad_input, csv_table, emit, Outcome};

const HEADER: [&str; 13] = [
    "x",
    "y",
    "valid",
    "location_regime",
    "z_bar1",
    "hat_z2",
    "payoff1",
    "payoff2",
    "atom_mass_0",
    "atom_mass_1",
    "verify_pass",
    "seed",
    "note",
];

/// `a:b:n`, n evenly spaced points from a to b inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Range {
    lo: f64,
    hi: f64,
    steps: usize,
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Range, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("expected a:b:n, got {s:?}"));
        };
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad start {lo:?}"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad end {hi:?}"))?;
        let steps: usize = steps.trim().parse().map_err(|_| format!("bad step count {steps:?}"))?;
        if !lo.is_finite() || !hi.is_finite() || lo > hi {
            return Err(format!("range {s:?} needs finite a <= b"));
        }
        if steps == 0 || (steps == 1 && lo != hi) {
            return Err(format!("range {s:?}: one step needs a == b, zero steps is empty"));
        }
        Ok(Range { lo, hi, steps })
    }
}

impl Range {
    fn points(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.lo];
        }
        // Snapped to 12 decimals so decimal grids print as typed.
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                let v = self.lo + (self.hi - self.lo) * i as f64 / last;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Classify,
    Solve,
    Verify,
    Simulate,
}

#[derive(Args)]
pub struct SweepArgs {
    #[arg(long = "x-range", value_name = "A:B:N", value_parser = parse_range)]
    x_range: Option<Range>,
    #[arg(long = "y-range", value_name = "C:D:M", value_parser = parse_range)]
    y_range: Option<Range>,
    #[arg(long, value_enum, default_value_t = Task::Classify)]
    task: Task,
    /// Grid for the location oracle under `--task verify`.
    #[arg(long, default_value_t = 1001)]
    grid: usize,
    #[arg(long)]
    eps: Option<f64>,
    /// Base seed; cell k (row-major) simulates with seed + k.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_range(s: &str) -> Result<Range, String> {
    s.parse()
}

#[derive(Default)]
struct Row {
    x: f64,
    y: f64,
    valid: bool,
    regime: String,
    z_bar1: Option<f64>,
    hat_z2: Option<f64>,
    payoff: Option<[f64; 2]>,
    atoms: Option<[f64; 2]>,
    verify_pass: Option<bool>,
    seed: Option<u64>,
    note: String,
}

fn num(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

impl Row {
    fn render(&self) -> Vec<String> {
        let pair = |p: Option<[f64; 2]>, i: usize| num(p.map(|p| p[i]));
        let fields = [
            self.x.to_string(),
            self.y.to_string(),
            self.valid.to_string(),
            self.regime.clone(),
            num(self.z_bar1),
            num(self.hat_z2),
            pair(self.payoff, 0),
            pair(self.payoff, 1),
            pair(self.atoms, 0),
            pair(self.atoms, 1),
            self.verify_pass.map(|b| b.to_string()).unwrap_or_default(),
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            self.note.clone(),
        ];
        fields.into()
    }
}

/// Edge atoms of the symmetric equilibrium: firm 1 at 0, firm 2 at 1.
fn edge_atoms(eq: &LocationEquilibrium, x: f64) -> [f64; 2] {
    let [g1, g2] = eq.strategies(x);
    [g1.atom_mass_at(0.0), g2.atom_mass_at(1.0)]
}

fn cell(x: f64, y: f64, index: u64, args: &SweepArgs) -> Row {
    let mut row = Row { x, y, ..Row::default() };
    let params = match MarketParams::new(x, y) {
        Ok(p) => p,
        Err(e) => {
            row.note = format!("skipped: {e}");
            return row;
        }
    };
    row.valid = true;
    row.regime = format!("{:?}", params.location_regime());
    row.z_bar1 = far_threshold(&params);
    row.hat_z2 = hat_z(&params).ok().map(|h| h.1);
    if args.task == Task::Classify {
        return row;
    }
    let spe = match solve_spe(&params) {
        Ok(s) => s,
        Err(e) => {
            row.note = format!("solve failed: {e}");
            return row;
        }
    };
    row.payoff = Some(spe.payoff);
    row.atoms = Some(edge_atoms(&spe.equilibria[0], x));
    match args.task {
        Task::Classify | Task::Solve => {}
        Task::Verify => {
            let eps = args.eps.unwrap_or(1e-6);
            let pass = spe
                .equilibria
                .iter()
                .all(|eq| verify_location_equilibrium(&params, eq, args.grid, eps).pass);
            row.verify_pass = Some(pass);
        }
        Task::Simulate => {
            let seed = args.seed.wrapping_add(index);
            let stats = simulate(&params, &spe, args.samples, seed);
            row.payoff = Some(stats.mean_profit);
            row.atoms = Some(stats.edge_atom_freq);
            row.seed = Some(seed);
            row.note = "payoffs and atoms are sample estimates".into();
        }
    }
    row
}

pub fn run(args: &SweepArgs) -> Outcome {
    let (Some(xr), Some(yr)) = (args.x_range, args.y_range) else {
        return Err(bad_input("--x-range and --y-range are required"));
    };
    if args.task == Task::Verify && args.grid < 2 {
        return Err(bad_input("--grid must be at least 2"));
    }
    if args.task == Task::Simulate && args.samples == 0 {
        return Err(bad_input("--samples must be at least 1"));
    }
    let cells: Vec<(f64, f64)> = xr
        .points()
        .into_iter()
        .flat_map(|x| yr.points().into_iter().map(move |y| (x, y)))
        .collect();
    // Indexed parallel collect keeps row-major order whatever the schedule.
    let rows: Vec<Vec<String>> = cells
        .par_iter()
        .enumerate()
        .map(|(k, &(x, y))| cell(x, y, k as u64, args).render())
        .collect();
    emit(&args.out, &csv_table(&HEADER, rows))?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_parse_and_reject() {
        let r: Range = "0.3:0.9:7".parse().unwrap();
        assert_eq!(r.points().len(), 7);
        assert_eq!(r.points()[0], 0.3);
        assert_eq!(r.points()[6], 0.9);
        assert_eq!("1:1:1".parse::<Range>().unwrap().points(), vec![1.0]);
        for bad in ["1:2", "1:2:0", "2:1:3", "a:1:2", "1:2:1", "1:nan:3", "1:2:3:4"] {
            assert!(bad.parse::<Range>().is_err(), "{bad}");
        }
    }

    #[test]
    fn invalid_cell_carries_reason() {
        let args = SweepArgs {
            x_range: None,
            y_range: None,
            task: Task::Solve,
            grid: 11,
            eps: None,
            seed: 0,
            samples: 1,
            out: None,
        };
        let row = cell(3.0, 1.1, 0, &args);
        assert!(!row.valid);
        assert!(row.note.starts_with("skipped"));
        assert!(row.payoff.is_none());
    }

    #[test]
    fn censored_cell_values() {
        let args = SweepArgs {
            x_range: None,
            y_range: None,
            task: Task::Solve,
            grid: 11,
            eps: None,
            seed: 0,
            samples: 1,
            out: None,
        };
        let row = cell(1.0, 0.6, 0, &args);
        assert!((row.hat_z2.unwrap() - 0.7).abs() < 1e-9);
        let atoms = row.atoms.unwrap();
        assert!((atoms[1] - 3.0 / 7.0).abs() < 1e-9);
        assert!((atoms[0] - 3.0 / 7.0).abs() < 1e-9);
    }
}
