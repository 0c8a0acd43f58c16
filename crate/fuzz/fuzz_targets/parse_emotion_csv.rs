#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = mfgcn::features::parse_emotion_csv(text) {
        assert_eq!(t.cols(), mfgcn::features::EMOTIONS.len());
    }
});
