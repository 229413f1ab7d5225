use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dopewall"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("dopewall-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn oracle_suite_exits_zero() {
    let o = run_in(&std::env::temp_dir(), &["verify", "--suite", "oracle"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("AC1 PASS") && out.contains("AC3 PASS"), "{out}");
}

fn tw_value(order: &str) -> f64 {
    let o = run_in(&std::env::temp_dir(), &["limits", "tw", "--s", "0", "--order", order]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let row = out.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[2], order);
    fields[1].parse().unwrap()
}

#[test]
fn tracy_widom_orders_agree() {
    let (a, b) = (tw_value("40"), tw_value("80"));
    assert!((a - b).abs() < 1e-8, "{a} vs {b}");
    assert!((a - 0.969_372_828_355).abs() < 1e-9);
}

#[test]
fn minimal_tiling_svg_is_deterministic() {
    let (d1, d2) = (scratch("tile1"), scratch("tile2"));
    for d in [&d1, &d2] {
        assert_eq!(code(&run_in(d, &["halfhex", "tile", "--k", "1", "--R", "1", "--sweeps", "0"])), 0);
    }
    let a = std::fs::read(d1.join("tiling.svg")).unwrap();
    assert_eq!(a, std::fs::read(d2.join("tiling.svg")).unwrap());
    assert!(String::from_utf8(a).unwrap().starts_with("<svg"));
    assert!(d1.join("tiling.svg.manifest.json").exists());
}

#[test]
fn usage_errors_exit_64() {
    let d = std::env::temp_dir();
    assert_eq!(code(&run_in(&d, &["halfhex", "tile", "--k", "1", "--R", "1", "--bogus"])), 64);
    assert_eq!(code(&run_in(&d, &["-h"])), 64);
    assert_eq!(code(&run_in(&d, &["frobnicate"])), 64);
    assert_eq!(code(&run_in(&d, &["sample", "--family", "uniform", "--N", "5", "--k", "2", "--count", "3", "--output", "x.csv"])), 64);
    assert_eq!(code(&run_in(&d, &["halfhex", "tile", "--k", "2", "--R", "2", "--sweeps", "3"])), 64);
    assert_eq!(code(&run_in(&d, &["--help"])), 0);
}

#[test]
fn validation_failures_exit_2() {
    let d = scratch("validation");
    let o = run_in(&d, &["kernel", "--family", "uniform", "--N", "4", "--k", "9", "--output", "k.csv"]);
    assert_eq!(code(&o), 2);
    std::fs::write(d.join("w.csv"), "node,log_weight\n0,0\n0,1\n").unwrap();
    let o = run_in(&d, &["kernel", "--family", "table", "--weights", "w.csv", "--k", "1", "--output", "k.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn solver_budget_exhaustion_exits_3() {
    let d = scratch("eq3");
    let o = run_in(&d, &["equilibrium", "--N", "100", "--A", "1", "--c", "0.5", "--gridsize", "64", "--max-iterations", "1", "--output", "eq.json"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn equilibrium_file_has_the_documented_fields() {
    let d = scratch("eq");
    let o = run_in(&d, &["equilibrium", "--N", "200", "--A", "1", "--c", "0.5", "--gridsize", "128", "--output", "eq.json"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("band"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("eq.json")).unwrap()).unwrap();
    for key in ["grid", "density", "regions", "l_c", "residuals"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["grid"].as_array().unwrap().len(), 128);
}

#[test]
fn replay_reproduces_hashes() {
    let d = scratch("replay");
    let args = ["kernel", "--family", "hahn", "--mode", "wall", "--N", "12", "--k", "4", "--A", "1", "--output", "k.csv", "--window", "0..5", "--counts-output", "c.json"];
    assert_eq!(code(&run_in(&d, &args)), 0);
    assert_eq!(code(&run_in(&d, &["sample", "--family", "uniform", "--N", "9", "--k", "4", "--count", "50", "--seed", "7", "--output", "s.csv"])), 0);
    for m in ["k.csv.manifest.json", "s.csv.manifest.json"] {
        let before = std::fs::read(d.join(m)).unwrap();
        let o = run_in(&d, &["replay", "--from", m]);
        assert_eq!(code(&o), 0, "{}", stdout(&o));
        assert_eq!(before, std::fs::read(d.join(m)).unwrap());
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("k.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "kernel");
    assert_eq!(m["outputs"].as_array().unwrap().len(), 3);

    // A manifest whose hash no longer matches is reported as a failure.
    let text = std::fs::read_to_string(d.join("s.csv.manifest.json")).unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["outputs"][0]["sha256"] = "00".into();
    std::fs::write(d.join("bad.json"), serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(code(&run_in(&d, &["replay", "--from", "bad.json"])), 3);
}

#[test]
fn samples_do_not_depend_on_jobs() {
    let d = scratch("jobs");
    let base = ["sample", "--family", "hahn", "--mode", "wall", "--N", "30", "--k", "10", "--A", "1", "--count", "200", "--seed", "3"];
    let mut one = base.to_vec();
    one.extend(["--output", "a.csv", "--jobs", "1"]);
    let mut four = base.to_vec();
    four.extend(["--output", "b.csv", "--jobs", "4"]);
    assert_eq!(code(&run_in(&d, &one)), 0);
    assert_eq!(code(&run_in(&d, &four)), 0);
    assert_eq!(std::fs::read(d.join("a.csv")).unwrap(), std::fs::read(d.join("b.csv")).unwrap());
    let rows = std::fs::read_to_string(d.join("a.csv")).unwrap();
    assert_eq!(rows.lines().count(), 200);
    assert!(rows.lines().all(|l| l.split(',').count() == 10));
}

#[test]
fn weight_table_gives_the_same_kernel() {
    let d = scratch("table");
    // Hahn P = Q = 3 on 6 equispaced nodes of [-1/2, 1/2].
    let lg = |x: f64| -> f64 { (1..x as u64).map(|i| (i as f64).ln()).sum() };
    let binom = |a: f64, b: f64| lg(a + 1.0) - lg(b + 1.0) - lg(a - b + 1.0);
    let mut table = String::from("node,log_weight\n");
    for n in 0..6 {
        let x = (2 * n + 1 - 6) as f64 / 12.0;
        let lw = binom(2.0 + n as f64, n as f64) + binom(2.0 + (5 - n) as f64, (5 - n) as f64);
        table.push_str(&format!("{x},{lw}\n"));
    }
    std::fs::write(d.join("w.csv"), table).unwrap();
    assert_eq!(code(&run_in(&d, &["kernel", "--family", "table", "--weights", "w.csv", "--k", "2", "--output", "t.csv"])), 0);
    assert_eq!(code(&run_in(&d, &["kernel", "--family", "hahn", "--N", "6", "--p", "3", "--k", "2", "--output", "h.csv"])), 0);
    let read = |f: &str| -> Vec<f64> {
        std::fs::read_to_string(d.join(f)).unwrap().lines().skip(1).flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<f64>().unwrap()).collect::<Vec<_>>()).collect()
    };
    let (t, h) = (read("t.csv"), read("h.csv"));
    assert_eq!(t.len(), 36);
    assert!(t.iter().zip(&h).all(|(a, b)| (a - b).abs() < 1e-12));
}

#[test]
fn halfhex_line_profile_and_render() {
    let d = scratch("hex");
    assert_eq!(code(&run_in(&d, &["halfhex", "line", "--k", "4", "--R", "8", "--m", "8", "--count", "20", "--seed", "1", "--output", "line.csv"])), 0);
    let rows = std::fs::read_to_string(d.join("line.csv")).unwrap();
    assert_eq!(rows.lines().count(), 20);
    assert!(rows.lines().all(|l| l.split(',').count() == 4));

    let o = run_in(&d, &["halfhex", "profile", "--k", "4", "--R", "8", "--m", "8", "--count", "200", "--seed", "1", "--output", "p.csv", "--summary", "p.json"]);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(d.join("p.csv")).unwrap().starts_with("ordinate,frequency,prediction\n"));

    assert_eq!(code(&run_in(&d, &["halfhex", "tile", "--k", "3", "--R", "4", "--sweeps", "20", "--seed", "5", "--output", "t.svg", "--state", "t.json"])), 0);
    assert_eq!(code(&run_in(&d, &["halfhex", "render", "--state", "t.json", "--output", "r.svg"])), 0);
    assert_eq!(std::fs::read(d.join("t.svg")).unwrap(), std::fs::read(d.join("r.svg")).unwrap());
    let state = std::fs::read_to_string(d.join("t.json")).unwrap();
    assert!(state.contains("\"R\": 4"));
}

#[test]
fn limit_laws_from_the_command_line() {
    let d = scratch("limits");
    let o = run_in(&d, &["limits", "wall", "--from", "0", "--to", "3", "--step", "0.5", "--delta0", "1.5", "--output", "w.csv"]);
    assert_eq!(code(&o), 0);
    let rows: Vec<f64> = std::fs::read_to_string(d.join("w.csv")).unwrap().lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows[0], 1.0);
    assert!(rows.windows(2).all(|w| w[1] <= w[0]));
    let o = run_in(&d, &["limits", "kernel", "--kernel", "sine", "--xi", "0", "--eta", "0"]);
    assert_eq!(stdout(&o).trim().parse::<f64>().unwrap(), 1.0);
    assert_eq!(code(&run_in(&d, &["limits", "tw", "--s", "0", "--from", "1"])), 64);
}

#[test]
fn line_samples_are_the_library_draws() {
    let d = scratch("linedraws");
    assert_eq!(code(&run_in(&d, &["halfhex", "line", "--k", "3", "--R", "5", "--m", "4", "--count", "30", "--seed", "9", "--output", "l.csv"])), 0);
    let h = dopewall::halfhex::HexSpec::new(3, 5).unwrap();
    let want = dopewall::halfhex::sample_line(h, 4, 30, 9).unwrap();
    let got = std::fs::read_to_string(d.join("l.csv")).unwrap();
    for (row, c) in got.lines().zip(&want) {
        let vals: Vec<f64> = row.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(vals, c.values());
        assert!(vals.iter().all(|v| *v > 0.0));
    }
}
