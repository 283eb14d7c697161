#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevb::io::read_vector;

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = read_vector(data, false) {
        assert!(v.iter().all(|x| x.is_finite()));
    }
});
