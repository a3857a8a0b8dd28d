#![no_main]

use libfuzzer_sys::fuzz_target;
use openrates::maps::parse_map;

fuzz_target!(|data: &str| {
    if let Ok(map) = parse_map(data) {
        for i in 0..=16 {
            let y = map.eval(i as f64 / 16.0);
            assert!((0.0..=1.0).contains(&y));
        }
    }
});
