#![no_main]
use combmetro::metrology_zoo::ChannelSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<ChannelSpec>(data) else {
        return;
    };
    // A built channel must be trace preserving along with its derivative.
    if let Ok(ch) = spec.build() {
        assert!(ch.tp_defect() < 1e-8 && ch.dtp_defect() < 1e-8);
    }
});
