#![no_main]

use equivocode::codebook::{generate_mds, CodeKind};
use equivocode::decoder::{decode, DecodeMode, DecodeOptions};
use equivocode::field::Field;
use equivocode::system::{SystemConfig, Transcript};
use libfuzzer_sys::fuzz_target;

// Header bytes pick a small configuration; the rest is transcript JSON.
fuzz_target!(|data: &[u8]| {
    if data.len() < 4 {
        return;
    }
    let k = 2 + (data[0] % 3) as usize;
    let beta = 1 + (data[1] as usize % (k - 1));
    let v = 1 + (data[2] % 3) as usize;
    let n = k + 2 * beta * (v - 1) + (data[3] % 2) as usize;
    let mode = if data[3] & 0x80 != 0 { DecodeMode::Strict } else { DecodeMode::Fast };
    let Ok(s) = std::str::from_utf8(&data[4..]) else { return };
    let Ok(tr) = serde_json::from_str::<Transcript>(s) else { return };
    let f = Field::default();
    let Ok(cfg) = SystemConfig::new(n, k, beta, v, f) else { return };
    let gm = generate_mds(CodeKind::Random, &f, n, k, 0).expect("small random codes are MDS");
    if let Ok(res) = decode(&gm, &tr, &cfg, DecodeOptions { mode, budget: 200_000 }) {
        assert_eq!(res.estimates.len(), k);
        assert!(res.feasible_count <= res.scenarios);
    }
});
