#![no_main]

use libfuzzer_sys::fuzz_target;
use ttp_core::dataset::chunk;

fuzz_target!(|data: &[u8]| {
    if let Ok((header, samples)) = chunk::decode(data) {
        assert_eq!(samples.len(), header.count);
    }
});
