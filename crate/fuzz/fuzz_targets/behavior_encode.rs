#![no_main]

use equivocode::codebook::{gen_random_linear, GeneratorMatrix};
use equivocode::field::Field;
use equivocode::system::{encode_transcript, SourceBehavior, SystemConfig};
use libfuzzer_sys::fuzz_target;

fn code(n: usize, k: usize) -> Option<GeneratorMatrix> {
    gen_random_linear(&Field::default(), n, k, 0).ok()
}

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(b) = serde_json::from_str::<SourceBehavior>(s) else { return };
    let (n, k) = (b.n(), b.k());
    if n == 0 || k == 0 || n > 32 || k > n {
        return;
    }
    let Some(gm) = code(n, k) else { return };
    let nodes: Vec<usize> = (0..n).collect();
    let _ = encode_transcript(&gm, &b, &nodes);
    if k >= 2 {
        if let Ok(cfg) = SystemConfig::new(n, k, 1, 2, *gm.field()) {
            let _ = b.validate(&cfg);
        }
    }
});
