use equivocode::adversary::{converse_attack, verify_attack};
use equivocode::codebook::{generate_mds, CodeKind};
use equivocode::decoder::{decode, feasible_scenarios, verify_against_truth, DecodeOptions, DEFAULT_BUDGET};
use equivocode::experiments::observed_nodes;
use equivocode::field::Field;
use equivocode::system::{encode_transcript, random_trial_behavior, SystemConfig};
use proptest::prelude::*;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn kind_strategy() -> impl Strategy<Value = CodeKind> {
    prop_oneof![Just(CodeKind::Random), Just(CodeKind::Systematic), Just(CodeKind::ReedSolomon)]
}

/// `(K, beta, v)` with a scenario count small enough for exhaustive decoding.
fn small_cell() -> impl Strategy<Value = (usize, usize, usize)> {
    prop_oneof![Just((2, 1, 1)), Just((2, 1, 2)), Just((3, 1, 2)), Just((3, 2, 1)), Just((3, 1, 3)), Just((4, 1, 2))]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn every_feasible_scenario_reproduces_the_transcript(
        (k, beta, v) in small_cell(),
        extra in 0usize..3,
        kind in kind_strategy(),
        seed in any::<u64>(),
    ) {
        let f = Field::default();
        let n = k + 2 * beta * (v - 1) + extra;
        let cfg = SystemConfig::new(n, k, beta, v, f).unwrap();
        let gm = generate_mds(kind, &f, n, k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = cfg.t_star().min(5);
        let mut nodes = sample(&mut rng, n, t).into_vec();
        nodes.sort_unstable();
        let behavior = random_trial_behavior(&cfg, seed ^ 1);
        let tr = encode_transcript(&gm, &behavior, &nodes).unwrap();
        let (sols, _) = feasible_scenarios(&gm, &tr, &cfg, DEFAULT_BUDGET).unwrap();
        prop_assert!(!sols.is_empty());
        for s in &sols {
            let b = s.to_behavior(&nodes, n);
            prop_assert!(b.validate(&cfg).is_ok());
            prop_assert_eq!(&encode_transcript(&gm, &b, &nodes).unwrap(), &tr);
        }
    }

    #[test]
    fn threshold_decoding_recovers_honest_sources(
        (k, beta, v) in small_cell(),
        kind in kind_strategy(),
        seed in any::<u64>(),
    ) {
        let f = Field::default();
        let n = k + 2 * beta * (v - 1) + 1;
        let cfg = SystemConfig::new(n, k, beta, v, f).unwrap();
        let gm = generate_mds(kind, &f, n, k, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut nodes = sample(&mut rng, n, cfg.t_star()).into_vec();
        nodes.sort_unstable();
        let behavior = random_trial_behavior(&cfg, seed ^ 2);
        let tr = encode_transcript(&gm, &behavior, &nodes).unwrap();
        let res = decode(&gm, &tr, &cfg, DecodeOptions::strict()).unwrap();
        let report = verify_against_truth(&res, &behavior);
        prop_assert!(report.all_correct(), "{:?}", report);
        prop_assert!(report.ambiguous_honest.is_empty());
    }

    #[test]
    fn attack_is_sharp(
        (k, beta, v) in small_cell(),
        extra in 0usize..3,
        kind in kind_strategy(),
        seed in any::<u64>(),
    ) {
        let f = Field::default();
        let n = k + 2 * beta * (v - 1) + extra;
        let cfg = SystemConfig::new(n, k, beta, v, f).unwrap();
        let gm = generate_mds(kind, &f, n, k, seed).unwrap();
        let attack = converse_attack(&gm, &cfg, seed).unwrap();
        prop_assert!(verify_attack(&gm, &attack));
        prop_assert_eq!(attack.node_set.len(), cfg.t_star() - 1);

        let below = encode_transcript(&gm, &attack.setup1, &attack.node_set).unwrap();
        let res = decode(&gm, &below, &cfg, DecodeOptions::strict()).unwrap();
        prop_assert!(!verify_against_truth(&res, &attack.setup1).ambiguous_honest.is_empty());

        let at = observed_nodes(&attack.node_set, n, cfg.t_star());
        let tr = encode_transcript(&gm, &attack.setup1, &at).unwrap();
        let res = decode(&gm, &tr, &cfg, DecodeOptions::strict()).unwrap();
        let report = verify_against_truth(&res, &attack.setup1);
        prop_assert!(report.all_correct(), "{:?}", report);
        prop_assert!(report.ambiguous_honest.is_empty());
    }
}

#[test]
fn second_regime_attack_uses_every_encoder_but_one() {
    let f = Field::default();
    // t* = N = 6 < K + 2 beta (v - 1) = 8
    let cfg = SystemConfig::new(6, 4, 2, 2, f).unwrap();
    let gm = generate_mds(CodeKind::Random, &f, 6, 4, 3).unwrap();
    let attack = converse_attack(&gm, &cfg, 1).unwrap();
    assert_eq!(attack.node_set.len(), 5);
    let sizes: Vec<usize> = attack.groups.iter().map(Vec::len).collect();
    assert_eq!(sizes, vec![3, 2]);
    assert!(verify_attack(&gm, &attack));
}
