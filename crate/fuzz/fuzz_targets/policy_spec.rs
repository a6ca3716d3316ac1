#![no_main]
use libfuzzer_sys::fuzz_target;
use twostage::policies::PolicySpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<PolicySpec>() {
        let shown = spec.to_string();
        let back: PolicySpec = shown.parse().expect("display output parses");
        assert_eq!(back, spec, "{shown}");
    }
});
