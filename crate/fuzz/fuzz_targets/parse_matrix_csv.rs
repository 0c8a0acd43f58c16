#![no_main]

use libfuzzer_sys::fuzz_target;
use mfgcn::io::{matrix_csv_string, parse_matrix_csv};
use mfgcn::Tensor;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(m) = parse_matrix_csv(text) else { return };
    assert!(m.rows.iter().all(|r| r.len() == m.header.len()));
    // anything accepted must survive a write/parse round trip
    let Ok(t) = Tensor::from_rows(&m.rows) else { return };
    let back = parse_matrix_csv(&matrix_csv_string(&m.header, &t).unwrap()).unwrap();
    assert_eq!(back.header, m.header);
    assert_eq!(back.rows.len(), m.rows.len());
});
