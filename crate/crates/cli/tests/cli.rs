use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repsindy(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repsindy")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

const RPS: &str = "seed = 7\n[game]\nid = \"rps\"\n";

#[test]
fn simulate_writes_one_file_per_trajectory() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &format!("{RPS}[trajectories]\ncount = 3\n"));
    let out = repsindy(tmp.path(), &["simulate", "--config", "c.toml", "sim"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for k in 0..3 {
        let text = fs::read_to_string(tmp.path().join(format!("sim/trajectory_{k:03}.csv"))).unwrap();
        // header plus t = 0, 0.01, ..., 10
        assert_eq!(text.lines().count(), 1002);
        assert!(text.starts_with("t,x1,x2,x3,dx1,dx2,dx3\n"));
    }
    assert!(!tmp.path().join("sim/trajectory_003.csv").exists());
    assert!(tmp.path().join("sim/manifest.json").exists());
}

#[test]
fn step_larger_than_horizon_is_invalid() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &format!("{RPS}[trajectories]\nt_end = 0.5\nh = 1.0\n"));
    let out = repsindy(tmp.path(), &["simulate", "--config", "c.toml", "sim"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn unwritable_output_is_an_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "blocker", "");
    let out = repsindy(tmp.path(), &["simulate", "--game", "rps", "blocker/sim"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn missing_config_is_an_io_failure() {
    let tmp = tempfile::tempdir().unwrap();
    let out = repsindy(tmp.path(), &["simulate", "--config", "absent.toml", "sim"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unknown_game_and_bad_usage_are_invalid_input() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&repsindy(tmp.path(), &["simulate", "--game", "chicken", "sim"])), 1);
    assert_eq!(code(&repsindy(tmp.path(), &["simulate"])), 1);
    assert_eq!(code(&repsindy(tmp.path(), &["frobnicate"])), 1);
    assert_eq!(code(&repsindy(tmp.path(), &["--help"])), 0);
}

#[test]
fn malformed_csv_names_file_and_line() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.csv", "t,x1,x2,x3\n0,0.2,0.3,0.5\n0.01,0.2,oops,0.5\n");
    let out = repsindy(tmp.path(), &["identify", "--game", "rps", "m.json", "bad.csv"]);
    assert_eq!(code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("bad.csv") && err.contains('3'), "{err}");
    write(tmp.path(), "empty.csv", "");
    assert_eq!(code(&repsindy(tmp.path(), &["identify", "--game", "rps", "m.json", "empty.csv"])), 1);
    assert!(!tmp.path().join("m.json").exists());
}

#[test]
fn states_only_csv_without_game_needs_finite_differences() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&repsindy(tmp.path(), &["simulate", "--game", "rps", "sim"])), 0);
    let full = fs::read_to_string(tmp.path().join("sim/trajectory_000.csv")).unwrap();
    let states: String = full.lines().map(|l| l.split(',').take(4).collect::<Vec<_>>().join(",") + "\n").collect();
    write(tmp.path(), "s.csv", &states);
    assert_eq!(code(&repsindy(tmp.path(), &["identify", "m.json", "s.csv"])), 1);
    write(tmp.path(), "fd.toml", "[trajectories]\nderivatives = \"finite_difference\"\n");
    let out = repsindy(tmp.path(), &["identify", "--config", "fd.toml", "m.json", "s.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
}

#[test]
fn library_too_small_for_the_game_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &format!("{RPS}[library]\ndegree = 1\n"));
    assert_eq!(code(&repsindy(tmp.path(), &["simulate", "--config", "c.toml", "sim"])), 0);
    let out = repsindy(tmp.path(), &["identify", "--config", "c.toml", "m.json", "sim/trajectory_000.csv"]);
    let out = if code(&out) == 0 { repsindy(tmp.path(), &["evaluate", "m.json", "r.json"]) } else { out };
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    assert!(stderr(&out).contains("degree"), "{}", stderr(&out));
}

#[test]
fn empty_sweep_grid_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "c.toml", &format!("{RPS}[sweep]\nbudgets = []\n"));
    let out = repsindy(tmp.path(), &["sweep", "--config", "c.toml", "t.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("empty"));
}

#[test]
fn plot_needs_three_strategies() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "two.csv", "t,x1,x2\n0,0.5,0.5\n0.1,0.6,0.4\n");
    assert_eq!(code(&repsindy(tmp.path(), &["plot", "two.csv", "p.svg"])), 1);
    write(tmp.path(), "three.csv", "t,x1,x2,x3\n0,0.2,0.3,0.5\n0.1,0.25,0.3,0.45\n");
    assert_eq!(code(&repsindy(tmp.path(), &["plot", "three.csv", "p.svg"])), 0);
    assert!(fs::read_to_string(tmp.path().join("p.svg")).unwrap().contains("<polyline"));
}

#[test]
fn one_cell_sweep_equals_identify_then_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let cell = "seed = 9\n[game]\nid = \"rps\"\n[trajectories]\ncount = 2\nt_end = 5.0\n";
    write(tmp.path(), "cell.toml", cell);
    write(tmp.path(), "grid.toml", &format!("{cell}[sweep]\nbudgets = [[2, 501]]\n"));
    assert_eq!(code(&repsindy(tmp.path(), &["sweep", "--config", "grid.toml", "t.csv"])), 0);
    assert_eq!(code(&repsindy(tmp.path(), &["simulate", "--config", "cell.toml", "sim"])), 0);
    let out = repsindy(
        tmp.path(),
        &["identify", "--config", "cell.toml", "m.json", "sim/trajectory_000.csv", "sim/trajectory_001.csv"],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(code(&repsindy(tmp.path(), &["evaluate", "m.json", "r.json"])), 0);

    let table = fs::read_to_string(tmp.path().join("t.csv")).unwrap();
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert!(lines.next().is_none());
    let field = |name: &str| row[header.iter().position(|h| *h == name).unwrap()].parse::<f64>().unwrap();
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("r.json")).unwrap()).unwrap();
    for key in ["support_f1", "coeff_max_abs_error", "coeff_rms_error", "forecast_rmse"] {
        assert_eq!(field(key), report[key].as_f64().unwrap(), "{key}");
    }
}

#[test]
fn seed_override_changes_the_data() {
    let tmp = tempfile::tempdir().unwrap();
    for (dir, seed) in [("a", "1"), ("b", "1"), ("c", "2")] {
        assert_eq!(code(&repsindy(tmp.path(), &["simulate", "--game", "rps", "--seed", seed, dir])), 0);
    }
    let read = |d: &str| fs::read(tmp.path().join(d).join("trajectory_000.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}
