#![no_main]

use libfuzzer_sys::fuzz_target;
use ttp_core::vaf::Network;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = Network::from_bytes(data) {
        assert_eq!(net.to_bytes(), data);
    }
});
