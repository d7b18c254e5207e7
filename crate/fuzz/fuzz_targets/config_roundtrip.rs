#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_abc::config::{parse_scenario, to_toml};

fuzz_target!(|data: &str| {
    let Ok(scenario) = parse_scenario(data) else {
        return;
    };
    // Anything that parses must serialise and parse back to the same scenario.
    let text = to_toml(&scenario).expect("valid scenario serialises");
    let back = parse_scenario(&text).expect("serialised scenario parses");
    assert_eq!(back, scenario);
});
