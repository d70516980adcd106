#![no_main]

use libfuzzer_sys::fuzz_target;
use ttp_core::PlannerConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PlannerConfig::from_json(text) {
        let text = serde_json::to_string(&cfg).expect("serializes");
        assert_eq!(PlannerConfig::from_json(&text).expect("round trip"), cfg);
    }
});
