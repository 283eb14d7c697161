#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevb::io::read_labels;

fuzz_target!(|data: &[u8]| {
    if let Ok(y) = read_labels(data, false) {
        assert!(!y.is_empty());
        assert!(y.iter().all(|&v| v <= 1));
    }
});
