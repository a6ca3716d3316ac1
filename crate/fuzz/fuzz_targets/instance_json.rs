#![no_main]
use libfuzzer_sys::fuzz_target;
use twostage::TwoStageInstance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = TwoStageInstance::from_json(text) {
        // Anything that loads must survive a save/load round trip unchanged.
        let again = TwoStageInstance::from_json(&inst.to_json()).expect("round trip");
        assert_eq!(inst.to_json(), again.to_json());
    }
});
