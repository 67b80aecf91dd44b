use std::fs;
use std::process::{Command, Output};

use salesgame::location::{solve_spe, LocationEquilibrium};
use salesgame::price::{solve, PriceEquilibrium, Variant};
use salesgame::{LocationPair, MarketParams};
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_salesgame"))
        .args(args)
        .env_remove("SALESGAME_THREADS")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn close(v: &Value, want: f64) -> bool {
    (v.as_f64().unwrap() - want).abs() < 1e-12
}

#[test]
fn solve_price_subgame() {
    let o = run(&["solve", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.5"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["regime"], "NearNearA");
    assert!(close(&v["profits"][0], 0.84));
    assert!(close(&v["profits"][1], 0.86));
}

#[test]
fn solve_location_stage_pure() {
    let o = run(&["solve", "--x", "1", "--y", "0.4"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["regime"], "PureSeparation");
    let eqs = v["equilibria"].as_array().unwrap();
    assert_eq!(eqs.len(), 1);
    assert_eq!(eqs[0]["type"], "pure_pair");
    assert!(close(&eqs[0]["z1"], 0.0) && close(&eqs[0]["z2"], 1.0));
    assert!(close(&v["payoff"][0], 1.0) && close(&v["payoff"][1], 1.0));
}

#[test]
fn invalid_parameters_exit_two_naming_the_inequality() {
    let o = run(&["solve", "--x", "1", "--y", "1.6"]);
    assert_eq!(code(&o), 2);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("y·x < 3/4·(1+x) violated"), "{err}");
    assert!(o.stdout.is_empty());

    for args in [
        &["solve", "--x", "1"][..],
        &["solve", "--x", "1", "--y", "0.6", "--z1", "0.4"],
        &["solve", "--x", "1", "--y", "0.6", "--z1", "0.7", "--z2", "0.5"],
        &["sweep", "--x-range", "1:2", "--y-range", "0:1:2"],
        &["sweep", "--x-range", "2:1:3", "--y-range", "0:1:2"],
    ] {
        assert_eq!(code(&run(args)), 2, "{args:?}");
    }
}

#[test]
fn unavailable_variant_exits_three() {
    let o = run(&["solve", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.5", "--variant", "symmetric"]);
    assert_eq!(code(&o), 3);
    let o = run(&["solve", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.6", "--variant", "symmetric"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn verify_examples_pass() {
    let o = run(&["verify", "--x", "1", "--y", "0.8", "--grid", "2001", "--eps", "1e-3"]);
    assert_eq!(code(&o), 0);
    let reports = json(&o);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports.len(), 3);
    for r in reports {
        assert_eq!(r["pass"], true);
        assert!(r["max_gain"][0].as_f64().unwrap() <= 1e-3);
    }

    let o = run(&["verify", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.5", "--grid", "4001", "--eps", "2e-3"]);
    assert_eq!(code(&o), 0);
    assert_eq!(json(&o)["pass"], true);
}

#[test]
fn strategy_file_round_trips_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.json");
    let p = path.to_str().unwrap();
    let o = run(&["solve", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.5", "--out", p]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());

    let params = MarketParams::new(1.0, 0.6).unwrap();
    let loc = LocationPair::new(0.4, 0.5).unwrap();
    let original = solve(&params, &loc, Variant::Asymmetric).unwrap();
    let doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let loaded: PriceEquilibrium = serde_json::from_value(doc["equilibrium"].clone()).unwrap();
    assert_eq!(loaded, original);
    for s in 0..2 {
        let (a, b) = (&original.strategies[s], &loaded.strategies[s]);
        for i in 0..1000 {
            let p = -0.1 + 1.2 * i as f64 / 999.0;
            assert!((a.cdf(p) - b.cdf(p)).abs() <= 1e-15);
        }
    }

    let o = run(&["verify", "--strategy-in", p]);
    assert_eq!(code(&o), 0);
}

#[test]
fn location_document_round_trips_exactly() {
    let o = run(&["solve", "--x", "1", "--y", "0.6"]);
    let v = json(&o);
    let loaded: Vec<LocationEquilibrium> = serde_json::from_value(v["equilibria"].clone()).unwrap();
    let params = MarketParams::new(1.0, 0.6).unwrap();
    let original = solve_spe(&params).unwrap().equilibria;
    assert_eq!(loaded, original);
    for (a, b) in original.iter().zip(&loaded) {
        let (sa, sb) = (a.strategies(1.0), b.strategies(1.0));
        for f in 0..2 {
            for i in 0..1000 {
                let z = i as f64 / 999.0;
                assert!((sa[f].cdf(z) - sb[f].cdf(z)).abs() <= 1e-15);
            }
        }
    }
}

#[test]
fn corrupted_strategy_file_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.json");
    let p = path.to_str().unwrap();
    run(&["solve", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.5", "--out", p]);
    let mut doc: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    let pieces = doc["equilibrium"]["strategies"][0]["pieces"].as_array_mut().unwrap();
    let atom = pieces.iter_mut().find(|pc| pc["kind"] == "atom").expect("firm 1 has an atom");
    atom["mass"] = Value::from(atom["mass"].as_f64().unwrap() * 0.5);
    fs::write(&path, serde_json::to_string(&doc).unwrap()).unwrap();

    let o = run(&["verify", "--strategy-in", p]);
    assert_eq!(code(&o), 1);
    let report = json(&o);
    assert_eq!(report["pass"], false);
    assert!(!report["defects"].as_array().unwrap().is_empty());
}

#[test]
fn unreadable_strategy_file_is_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.json");
    fs::write(&path, "{not json").unwrap();
    assert_eq!(code(&run(&["verify", "--strategy-in", path.to_str().unwrap()])), 2);
    let missing = dir.path().join("absent.json");
    assert_eq!(code(&run(&["verify", "--strategy-in", missing.to_str().unwrap()])), 2);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let sim = dir.path().join(format!("sim{k}.json"));
        let sweep = dir.path().join(format!("sweep{k}.csv"));
        let o = run(&[
            "--threads", threads, "simulate", "--x", "1", "--y", "0.6", "--samples", "20000", "--seed", "9", "--out",
            sim.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        let o = run(&[
            "--threads", threads, "sweep", "--x-range", "0.5:2:4", "--y-range", "0.4:1:4", "--task", "simulate",
            "--samples", "2000", "--seed", "3", "--out", sweep.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0);
        files.push((fs::read(sim).unwrap(), fs::read(sweep).unwrap()));
    }
    assert!(files.windows(2).all(|w| w[0] == w[1]));
}

fn sweep_rows(args: &[&str]) -> Vec<csv::StringRecord> {
    let o = run(args);
    assert_eq!(code(&o), 0);
    let mut r = csv::Reader::from_reader(&o.stdout[..]);
    let header = r.headers().unwrap().clone();
    assert_eq!(
        header.iter().collect::<Vec<_>>(),
        [
            "x", "y", "valid", "location_regime", "z_bar1", "hat_z2", "payoff1", "payoff2", "atom_mass_0",
            "atom_mass_1", "verify_pass", "seed", "note"
        ]
    );
    r.records().map(|rec| rec.unwrap()).collect()
}

#[test]
fn sweep_regime_map_at_unit_mass() {
    let rows = sweep_rows(&["sweep", "--x-range", "1:1:1", "--y-range", "0.3:0.9:7", "--task", "classify"]);
    let got: Vec<(&str, &str)> = rows.iter().map(|r| (&r[1], &r[3])).collect();
    assert_eq!(
        got,
        [
            ("0.3", "PureSeparation"),
            ("0.4", "PureSeparation"),
            ("0.5", "CensoredMix"),
            ("0.6", "CensoredMix"),
            ("0.7", "CensoredMix"),
            ("0.8", "FullMix"),
            ("0.9", "FullMix"),
        ]
    );
}

#[test]
fn sweep_cell_values_and_skips() {
    let rows = sweep_rows(&["sweep", "--x-range", "1:3:2", "--y-range", "0.6:1.1:2", "--task", "solve"]);
    let keys: Vec<(&str, &str)> = rows.iter().map(|r| (&r[0], &r[1])).collect();
    assert_eq!(keys, [("1", "0.6"), ("1", "1.1"), ("3", "0.6"), ("3", "1.1")]);

    let c = &rows[0];
    assert_eq!(&c[2], "true");
    assert!((c[5].parse::<f64>().unwrap() - 0.7).abs() < 1e-12);
    assert!((c[9].parse::<f64>().unwrap() - 3.0 / 7.0).abs() < 1e-6);

    let bad = &rows[3];
    assert_eq!(&bad[2], "false");
    assert!(bad[12].contains("y·x < 3/4·(1+x)"), "{}", &bad[12]);
    assert!(bad[6].is_empty());
}

#[test]
fn sweep_verify_never_passes_with_gain_above_eps() {
    let rows = sweep_rows(&["sweep", "--x-range", "1:1:1", "--y-range", "0.4:0.9:3", "--task", "verify", "--grid", "401"]);
    for r in &rows {
        assert_eq!(&r[10], "true", "{r:?}");
    }
    // With a budget far below the scan resolution, any reported gain above
    // it must come with pass = false.
    let o = run(&["verify", "--x", "1", "--y", "0.6", "--grid", "401", "--eps", "1e-6"]);
    let reports = json(&o);
    for r in reports.as_array().unwrap() {
        let gain = r["max_gain"].as_array().unwrap().iter().map(|g| g.as_f64().unwrap()).fold(f64::MIN, f64::max);
        if gain > 1e-6 {
            assert_eq!(r["pass"], false);
        }
    }
}

#[test]
fn classify_reports_thresholds() {
    let o = run(&["classify", "--x", "1", "--y", "0.6", "--z1", "0.4", "--z2", "0.5"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["location_regime"], "CensoredMix");
    assert_eq!(v["price"]["regime"], "NearNearA");
    assert!(close(&v["hat_z"][1], 0.7));
}
