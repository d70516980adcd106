#![no_main]

use libfuzzer_sys::fuzz_target;
use ttp_core::vaf::parity::ParityFile;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ParityFile::from_json(text);
    }
});
