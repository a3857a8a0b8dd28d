#![no_main]

use libfuzzer_sys::fuzz_target;
use openrates::real::{parse_real, Real};

fuzz_target!(|data: &str| {
    if let Ok(x) = parse_real(data) {
        // Canonical form re-parses to the same value when it fits the length limit.
        let text = Real(x.clone()).to_string();
        if let Ok(y) = parse_real(&text) {
            assert_eq!(x, y);
        }
    }
});
