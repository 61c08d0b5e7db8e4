#![no_main]

use equivocode::adversary::{verify_attack, AttackInstance};
use equivocode::codebook::{generate_mds, CodeKind};
use equivocode::field::Field;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    let Ok(attack) = serde_json::from_str::<AttackInstance>(s) else { return };
    let (n, k) = (attack.setup1.n(), attack.setup1.k());
    if n == 0 || k == 0 || n > 32 || k > n {
        return;
    }
    if let Ok(gm) = generate_mds(CodeKind::Random, &Field::default(), n, k, 0) {
        verify_attack(&gm, &attack);
    }
});
