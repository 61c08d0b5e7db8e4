use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_equivocode"))
}

fn ok(out: Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_code_is_deterministic_and_valid() {
    let a = ok(run(&["gen-code", "--n", "6", "--k", "3", "--seed", "9"]));
    let b = ok(run(&["gen-code", "--n", "6", "--k", "3", "--seed", "9"]));
    assert_eq!(a, b);
    let gm = equivocode::GeneratorMatrix::from_json(&a).unwrap();
    assert!(equivocode::is_mds(&gm));
    let rs = ok(run(&["gen-code", "--n", "6", "--k", "3", "--kind", "reed_solomon", "--prime", "65537"]));
    assert!(rs.contains("\"p\": 65537"));
}

#[test]
fn bad_prime_is_reported() {
    let out = run(&["gen-code", "--n", "6", "--k", "3", "--prime", "101"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("101"));
}

#[test]
fn attack_encode_decode_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.json");
    let attack = dir.path().join("attack.json");
    ok(run(&["gen-code", "--n", "9", "--k", "3", "--seed", "2", "--out", path(&code)]));
    ok(run(&[
        "attack", "--code", path(&code), "--beta", "1", "--versions", "2", "--seed", "5", "--out", path(&attack),
    ]));
    let a: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&attack).unwrap()).unwrap();
    let nodes: Vec<String> = a["T"].as_array().unwrap().iter().map(|x| x.to_string()).collect();
    assert_eq!(nodes.len(), 4);

    for setup in ["setup1", "setup2"] {
        let b = dir.path().join(format!("{setup}.json"));
        std::fs::write(&b, a[setup].to_string()).unwrap();
    }
    let transcripts: Vec<String> = ["setup1", "setup2"]
        .iter()
        .map(|s| {
            let b = dir.path().join(format!("{s}.json"));
            ok(run(&["encode", "--code", path(&code), "--behavior", path(&b), "--nodes", &nodes.join(",")]))
        })
        .collect();
    assert_eq!(transcripts[0], transcripts[1]);

    let tr = dir.path().join("tr.json");
    std::fs::write(&tr, &transcripts[0]).unwrap();
    let decoded = ok(run(&[
        "decode", "--code", path(&code), "--transcript", path(&tr), "--beta", "1", "--versions", "2", "--mode", "strict",
    ]));
    let d: serde_json::Value = serde_json::from_str(&decoded).unwrap();
    assert!(d["ambiguity"].is_object());

    let fast = ok(run(&["decode", "--code", path(&code), "--transcript", path(&tr), "--beta", "1", "--versions", "2"]));
    let f: serde_json::Value = serde_json::from_str(&fast).unwrap();
    assert!(f.get("ambiguity").is_none());
}

#[test]
fn decode_rejects_small_budget() {
    let dir = tempfile::tempdir().unwrap();
    let code = dir.path().join("code.json");
    ok(run(&["gen-code", "--n", "5", "--k", "2", "--out", path(&code)]));
    let tr = dir.path().join("tr.json");
    std::fs::write(&tr, r#"{"node_set":[0,1,2],"values":[1,2,3]}"#).unwrap();
    let out = run(&[
        "decode", "--code", path(&code), "--transcript", path(&tr), "--beta", "1", "--versions", "2", "--budget", "3",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("budget"));
}

#[test]
fn sweep_from_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"experiment":"converse","cells":[{"N":9,"K":3,"beta":1,"v":2}],"t":{"relative":[-1,0]},
            "kinds":["random"],"trials":4,"master_seed":1}"#,
    )
    .unwrap();
    let out = dir.path().join("r.csv");
    ok(run(&["sweep", path(&spec), "--out", path(&out)]));
    let csv = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,K,beta,v,kind,t,trials,honest_correct,ambiguous,undetermined,failures,wall_ms");
    assert_eq!(lines[1], "9,3,1,2,random,4,4,0,4,0,0,0");
    assert_eq!(lines[2], "9,3,1,2,random,5,4,4,0,0,0,0");

    let json = ok(run(&["sweep", path(&spec), "--format", "json", "--seed", "1"]));
    let doc: equivocode::experiments::ResultsDocument = serde_json::from_str(&json).unwrap();
    assert_eq!(doc.results.len(), 2);
    assert_eq!(doc.master_seed, Some(1));
}

#[test]
fn sweep_needs_a_spec() {
    assert!(!run(&["sweep"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("bad.json");
    std::fs::write(&spec, r#"{"experiment":"converse"}"#).unwrap();
    assert!(!run(&["sweep", path(&spec)]).status.success());
}

#[test]
fn csv_only_for_sweep() {
    assert!(!run(&["gen-code", "--n", "4", "--k", "2", "--format", "csv"]).status.success());
}
