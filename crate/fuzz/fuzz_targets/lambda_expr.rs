#![no_main]
use libfuzzer_sys::fuzz_target;
use twostage::bench::fr::{parse_expr, parse_lambda};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_expr(text);
    if let Ok(l) = parse_lambda(text) {
        assert!((0.0..=1.0).contains(&l));
    }
});
