#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(grid) = prnn_abc::grid::parse_grid(data) {
        let expected = grid
            .axes
            .iter()
            .try_fold(1usize, |acc, (_, v)| acc.checked_mul(v.len()));
        // Keep the expansion within fuzzer memory limits.
        if let Some(n) = expected.filter(|&n| n <= 100_000) {
            assert_eq!(grid.cells().len(), n);
        }
    }
});
