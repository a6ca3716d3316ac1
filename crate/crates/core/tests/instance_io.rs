use proptest::prelude::*;
use twostage::instance::{gen_random, load, save, PiSpec, RandomSpec, WeightSpec};
use twostage::TwoStageInstance;

fn spec(n1: usize, n2: usize, ns: usize, p: f64, edge_weights: bool) -> RandomSpec {
    RandomSpec {
        n1,
        n2,
        ns,
        edge_prob: p,
        weights: WeightSpec::Uniform { lo: 0.0, hi: 3.0 },
        pi: PiSpec::Uniform { lo: 0.0, hi: 1.0 },
        edge_weights: edge_weights.then_some(WeightSpec::Uniform { lo: 0.5, hi: 2.0 }),
    }
}

#[test]
fn save_then_load_gives_the_same_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let inst = gen_random(&spec(5, 7, 6, 0.4, true), 11).unwrap();
    save(&inst, &path).unwrap();
    let back = load(&path).unwrap();
    assert_eq!(inst.to_json(), back.to_json());
    assert_eq!(inst.edges().len(), back.edges().len());
}

#[test]
fn loading_a_missing_file_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load(dir.path().join("absent.json")).unwrap_err();
    assert!(matches!(err, twostage::Error::Io(_)), "{err:?}");
}

#[test]
fn same_seed_same_instance() {
    let a = gen_random(&spec(4, 4, 4, 0.5, false), 3).unwrap();
    let b = gen_random(&spec(4, 4, 4, 0.5, false), 3).unwrap();
    let c = gen_random(&spec(4, 4, 4, 0.5, false), 4).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(a.to_json(), c.to_json());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn json_round_trip(n1 in 0usize..6, n2 in 0usize..6, ns in 0usize..6, p in 0.0f64..1.0,
                       ew in any::<bool>(), seed in any::<u64>()) {
        let inst = gen_random(&spec(n1, n2, ns, p, ew), seed).unwrap();
        let back = TwoStageInstance::from_json(&inst.to_json()).unwrap();
        prop_assert_eq!(inst.to_json(), back.to_json());
        prop_assert_eq!(inst.num_demands(), n1 + n2);
        prop_assert_eq!(inst.num_supplies(), ns);
    }
}
