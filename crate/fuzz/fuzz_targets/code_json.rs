#![no_main]

use equivocode::codebook::{is_mds, GeneratorMatrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(gm) = GeneratorMatrix::from_json(s) {
        let back = GeneratorMatrix::from_json(&gm.to_json()).expect("round trip");
        assert_eq!(back, gm);
        if gm.n() <= 8 && gm.k() <= 4 {
            is_mds(&gm);
        }
    }
});
