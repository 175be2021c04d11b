#![no_main]

use libfuzzer_sys::fuzz_target;
use oamem::tomography::ProcessMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(chi) = ProcessMatrix::from_json(text) {
        let _ = chi.tp_residual();
    }
});
