//! The fuzz corpus seeds must exercise the success paths of every decoder.

use std::path::{Path, PathBuf};

use ttp_core::dataset::{chunk, Manifest};
use ttp_core::instance::{bundled_line, generate_random_instance};
use ttp_core::vaf::parity::ParityFile;
use ttp_core::vaf::Network;
use ttp_core::{validate_timetable, Instance, PlannerConfig, Timetable};

fn seeds(target: &str) -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap()
}

#[test]
fn instance_seeds_parse() {
    for p in seeds("instance_json") {
        Instance::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn planner_config_seeds_parse() {
    for p in seeds("planner_config") {
        PlannerConfig::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn parity_seeds_parse() {
    for p in seeds("parity_json") {
        ParityFile::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn vaf1_seeds() {
    let mut full = 0;
    for p in seeds("vaf1") {
        let bytes = std::fs::read(&p).unwrap();
        // Truncated prefixes are there to reach the payload checks.
        if let Ok(net) = Network::from_bytes(&bytes) {
            assert_eq!(net.to_bytes(), bytes);
            full += 1;
        }
    }
    assert!(full > 0);
}

#[test]
fn chunk_seeds_decode() {
    for p in seeds("dataset_chunk") {
        let (header, samples) = chunk::decode(&std::fs::read(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        assert_eq!(samples.len(), header.count);
    }
}

#[test]
fn manifest_seeds_parse() {
    for p in seeds("dataset_manifest") {
        Manifest::from_json(&text(&p)).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn timetable_seeds_validate_clean() {
    let inst = generate_random_instance(&bundled_line(), 3, 1, 120).unwrap();
    for p in seeds("timetable") {
        let t = text(&p);
        let tt: Timetable = if p.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&t).unwrap()
        } else {
            Timetable::from_csv(&t, &inst).unwrap()
        };
        assert!(validate_timetable(&inst, &tt).is_feasible(), "{}", p.display());
    }
}
