#![no_main]

use libfuzzer_sys::fuzz_target;
use sparsevb::io::parse_diagnose_config;

// Accepted configs must survive a serialize/parse round trip unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_diagnose_config(text) {
        let again = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_diagnose_config(&again).unwrap(), cfg);
    }
});
