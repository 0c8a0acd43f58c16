#![no_main]

use libfuzzer_sys::fuzz_target;
use mfgcn::model::checkpoint::Checkpoint;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = Checkpoint::parse_model(text);
});
