#![no_main]

use libfuzzer_sys::fuzz_target;
use openrates_cli::config::{parse, EvlConfig, HittingConfig, SftConfig, SweepConfig};

fuzz_target!(|data: &str| {
    if let Ok(c) = parse::<SweepConfig>(data) {
        let _ = c.validate();
    }
    if let Ok(c) = parse::<HittingConfig>(data) {
        let _ = c.validate();
    }
    if let Ok(c) = parse::<EvlConfig>(data) {
        let _ = c.validate();
    }
    if let Ok(c) = parse::<SftConfig>(data) {
        let _ = c.validate();
    }
});
