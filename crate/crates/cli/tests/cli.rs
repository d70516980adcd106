use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ttp_core::dataset::{Dataset, Split};
use ttp_core::instance::{bundled_line, Instance, TimingParams, TrainKind, TrainSpec, PASSENGER_SPEED};

fn ttp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ttp"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

/// Generates one 4-train instance and solves it into `dir/solve`.
fn gen_and_solve(dir: &Path) -> PathBuf {
    let inst_dir = dir.join("inst");
    let o = ttp(&["gen", "-n", "4", "--seed", "3", "--window", "120", "--out", s(&inst_dir)]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let inst = inst_dir.join("instance_00003.json");
    let o = ttp(&[
        "solve", "--instance", s(&inst), "--cb", "300", "--variant", "max2", "--seed", "5", "--out",
        s(&dir.join("solve")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    inst
}

#[test]
fn solver_output_validates() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_and_solve(dir.path());
    let out = dir.path().join("solve");
    for tt in ["timetable.csv", "timetable.json"] {
        let o = ttp(&["validate", "--instance", s(&inst), "--timetable", s(&out.join(tt))]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!(stdout(&o).starts_with("0 violation(s)"));
    }
}

#[test]
fn run_manifest_lists_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    gen_and_solve(dir.path());
    let out = dir.path().join("solve");
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run-solve.json")).unwrap()).unwrap();
    assert_eq!(m["command"], "solve");
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["variant"], "max2");
    assert_eq!(m["config"]["cb"], 300);
    assert_eq!(m["config_digest"].as_str().unwrap().len(), 64);
    let listed: Vec<PathBuf> = m["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| PathBuf::from(v.as_str().unwrap()))
        .collect();
    let mut on_disk: Vec<PathBuf> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "run-solve.json")
        .collect();
    on_disk.sort();
    let mut listed_sorted = listed.clone();
    listed_sorted.sort();
    assert_eq!(listed_sorted, on_disk);
}

#[test]
fn solve_is_reproducible_from_its_manifest() {
    let dir = tempfile::tempdir().unwrap();
    gen_and_solve(dir.path());
    let out = dir.path().join("solve");
    let m: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run-solve.json")).unwrap()).unwrap();
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, m["config"].to_string()).unwrap();
    let again = dir.path().join("again");
    let inst = dir.path().join("inst/instance_00003.json");
    let o = ttp(&["solve", "--instance", s(&inst), "--config", s(&cfg_path), "--out", s(&again)]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["timetable.csv", "summary.json"] {
        assert_eq!(
            std::fs::read(out.join(f)).unwrap(),
            std::fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn forged_overlap_fails_validation() {
    let dir = tempfile::tempdir().unwrap();
    let inst_path = gen_and_solve(dir.path());
    let tt_path = dir.path().join("solve/timetable.json");
    let mut tt: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&tt_path).unwrap()).unwrap();

    // Copy one train's stop onto another train stopping at the same station.
    let trains = tt["trains"].as_array().unwrap().clone();
    let mut forged = false;
    'outer: for (i, a) in trains.iter().enumerate() {
        for (j, b) in trains.iter().enumerate().skip(i + 1) {
            for sa in a["stops"].as_array().unwrap() {
                for (k, sb) in b["stops"].as_array().unwrap().iter().enumerate() {
                    if sa["station"] == sb["station"] {
                        tt["trains"][j]["stops"][k] = sa.clone();
                        forged = true;
                        break 'outer;
                    }
                }
            }
        }
    }
    assert!(forged, "instance has two trains sharing a station");
    let bad = dir.path().join("forged.json");
    std::fs::write(&bad, tt.to_string()).unwrap();
    let o = ttp(&["validate", "--instance", s(&inst_path), "--timetable", s(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[track-overlap]"), "{}", stdout(&o));
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = ttp(&["validate", "--instance", "missing.json", "--timetable", "missing.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
    assert_eq!(ttp(&["solve", "--bogus"]).status.code(), Some(2));
    assert_eq!(ttp(&[]).status.code(), Some(2));
    let inst = gen_and_solve(dir.path());
    let o = ttp(&["solve", "--instance", s(&inst), "--cb", "0", "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
    let o = ttp(&["solve", "--instance", s(&inst), "--variant", "uct3", "--out", s(&dir.path().join("x"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn infeasible_run_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // Two trains leaving the same station in the same minute cannot both start.
    let t = |id| TrainSpec {
        id,
        origin: 0,
        destination: 3,
        first_departure: 10,
        speed: PASSENGER_SPEED,
        kind: TrainKind::Passenger,
    };
    let inst = Instance::new(bundled_line(), vec![t(1), t(2)], TimingParams::default()).unwrap();
    let path = dir.path().join("clash.json");
    inst.save(&path).unwrap();
    let out = dir.path().join("out");
    let o = ttp(&["solve", "--instance", s(&path), "--cb", "10", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(!out.join("timetable.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["feasible"], false);
}

#[test]
fn infer_check_passes_on_fixture_and_fails_on_tampered_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let parity = fixtures().join("vaf_small_parity.json");
    let o = ttp(&["infer-check", "--parity", s(&parity), "--random", "4", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS: 10/10"));
    assert!(dir.path().join("parity_report.json").exists());

    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&parity).unwrap()).unwrap();
    let v = doc["vectors"][2]["output"].as_f64().unwrap();
    doc["vectors"][2]["output"] = (v + 1e-3).into();
    let tampered = fixtures_copy(dir.path(), &doc);
    let o = ttp(&["infer-check", "--parity", s(&tampered)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL: 9/10"));
}

/// Writes a parity document next to a copy of the small weights.
fn fixtures_copy(dir: &Path, doc: &serde_json::Value) -> PathBuf {
    std::fs::copy(fixtures().join("vaf_small.vaf1"), dir.join("vaf_small.vaf1")).unwrap();
    let p = dir.join("tampered.json");
    std::fs::write(&p, doc.to_string()).unwrap();
    p
}

#[test]
fn plot_writes_csv_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let inst = gen_and_solve(dir.path());
    let out = dir.path().join("plot");
    let o = ttp(&[
        "plot", "--instance", s(&inst), "--timetable", s(&dir.path().join("solve/timetable.csv")), "--out", s(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let svg = std::fs::read_to_string(out.join("diagram.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
    let csv = std::fs::read_to_string(out.join("polylines.csv")).unwrap();
    assert!(csv.starts_with("train,time_min,mileage_m\n"));
    assert!(csv.lines().count() > 8);
}

#[test]
fn collect_fills_a_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let inst_dir = dir.path().join("inst");
    let o = ttp(&["gen", "-n", "2", "--seed", "0", "--count", "5", "--window", "60", "--out", s(&inst_dir)]);
    assert_eq!(o.status.code(), Some(0));
    let ds_dir = dir.path().join("ds");
    let glob = format!("{}/instance_*.json", s(&inst_dir));
    let o = ttp(&[
        "collect", "--instances", &glob, "--cb", "30", "--dataset", s(&ds_dir), "--full-cols", "120",
        "--local-cols", "15", "--out", s(&dir.path().join("out")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{o:?}");
    let ds = Dataset::open(&ds_dir).unwrap();
    assert_eq!(ds.manifest().instances.len(), 5);
    assert!(ds.manifest().samples(Split::Test) > 0);
    let r = ds.reader(Split::Train).unwrap();
    assert_eq!(r.corrupt_chunks(), 0);
    assert_eq!(r.len(), ds.manifest().samples(Split::Train));
    let b = r.batches(8, 1).unwrap().next().unwrap().unwrap();
    assert_eq!(b.full.len(), b.len * 3 * 43 * 120);
    let rows: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("out/collect.json")).unwrap()).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 5);

    let o = ttp(&["collect", "--instances", &format!("{}/none_*.json", s(&inst_dir)), "--dataset", s(&ds_dir), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
}
