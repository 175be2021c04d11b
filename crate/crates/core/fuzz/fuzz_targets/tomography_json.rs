#![no_main]

use libfuzzer_sys::fuzz_target;
use oamem::tomography::{frequencies, reconstruct_process, tomography_from_json};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(counts) = tomography_from_json(text) {
        if let Ok(freqs) = frequencies(&counts) {
            let _ = reconstruct_process(&freqs);
        }
    }
});
