#![no_main]

use libfuzzer_sys::fuzz_target;
use mfgcn::io::DatasetManifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(m) = DatasetManifest::parse(text) {
        let back = DatasetManifest::parse(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }
});
