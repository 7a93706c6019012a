#![no_main]
use combmetro::sdp_engine::SdpProblem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else {
        return;
    };
    // Accepted dumps reserialize to an equivalent problem.
    if let Ok(p) = SdpProblem::from_json(s) {
        let again = SdpProblem::from_json(&p.to_json()).expect("reparse");
        assert_eq!(again.to_json(), p.to_json());
    }
});
