#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(audio) = mfgcn::features::decode_wav(data) {
        assert!(audio.samples.iter().all(|s| s.is_finite()));
    }
});
