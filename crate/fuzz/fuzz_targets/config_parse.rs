#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    let _ = prnn_abc::config::parse_scenario(data);
});
