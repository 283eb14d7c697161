#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevb::io::read_matrix;

fuzz_target!(|data: &[u8]| {
    for header in [false, true] {
        if let Ok(m) = read_matrix(data, header) {
            assert!(m.nrows() > 0);
            assert!(m.iter().all(|v| v.is_finite()));
        }
    }
});
