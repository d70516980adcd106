#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use ttp_core::instance::{bundled_line, generate_random_instance};
use ttp_core::{validate_timetable, Instance, Timetable};

fn instance() -> &'static Instance {
    static INST: OnceLock<Instance> = OnceLock::new();
    INST.get_or_init(|| generate_random_instance(&bundled_line(), 3, 1, 120).expect("instance"))
}

// CSV or JSON timetables, then the checker on whatever parses.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let inst = instance();
    if let Ok(tt) = Timetable::from_csv(text, inst) {
        let _ = validate_timetable(inst, &tt);
    }
    if let Ok(tt) = serde_json::from_str::<Timetable>(text) {
        let _ = validate_timetable(inst, &tt);
    }
});
