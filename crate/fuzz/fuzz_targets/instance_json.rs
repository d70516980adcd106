#![no_main]

use libfuzzer_sys::fuzz_target;
use ttp_core::{Instance, Simulator};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = Instance::from_json(text) {
        // A validated instance must build a simulator and round-trip.
        let again = Instance::from_json(&inst.to_json()).expect("round trip");
        assert_eq!(again, inst);
        if inst.decision_count() <= 64 {
            let sim = Simulator::new(inst);
            let _ = sim.init_state();
        }
    }
});
