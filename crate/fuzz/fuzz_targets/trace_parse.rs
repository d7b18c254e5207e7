#![no_main]

use libfuzzer_sys::fuzz_target;
use prnn_abc::trace::{read_trace, validate_trace};

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = read_trace(data) {
        let _ = validate_trace(&trace, None, 1e-12);
    }
});
