#![no_main]

use libfuzzer_sys::fuzz_target;
use openrates::sft::parse_sft;

fuzz_target!(|data: &str| {
    let _ = parse_sft(data);
});
