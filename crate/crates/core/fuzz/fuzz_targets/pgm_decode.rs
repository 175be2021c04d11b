#![no_main]

use libfuzzer_sys::fuzz_target;
use oamem::pgm;

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = pgm::decode(data) {
        assert_eq!(img.samples.len(), img.width * img.height);
        assert!(img.samples.iter().all(|s| *s <= img.maxval));
    }
});
