#![no_main]

use equivocode::experiments::ExperimentSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = ExperimentSpec::from_json(s) {
        let rows = spec.plan().expect("from_json already planned");
        assert!(rows.iter().all(|r| r.t >= 1 && r.t <= r.cfg.n));
    }
});
