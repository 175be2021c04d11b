#![no_main]

use libfuzzer_sys::fuzz_target;
use oamem::timetag::TimeTagStream;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(stream) = TimeTagStream::from_csv(text) {
        assert!(stream.is_sorted());
        let again = TimeTagStream::from_csv(&stream.to_csv()).expect("own CSV parses");
        assert_eq!(again.tags(), stream.tags());
    }
});
