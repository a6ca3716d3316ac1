//! Runs the parser checks from the fuzz targets over the checked-in seeds.

use std::fs;
use std::path::PathBuf;

use twostage::bench::fr::{parse_expr, parse_lambda};
use twostage::bench::ExperimentConfig;
use twostage::policies::PolicySpec;
use twostage::TwoStageInstance;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn instance_seeds_load_and_round_trip() {
    for (path, text) in seeds("instance_json") {
        let inst = TwoStageInstance::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = TwoStageInstance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst.to_json(), again.to_json(), "{}", path.display());
    }
}

#[test]
fn policy_seeds_parse_and_display_round_trips() {
    for (path, text) in seeds("policy_spec") {
        let spec: PolicySpec = text.parse().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let back: PolicySpec = spec.to_string().parse().unwrap();
        assert_eq!(back, spec);
    }
}

#[test]
fn experiment_seeds_parse() {
    for (path, text) in seeds("experiment_config") {
        let config = ExperimentConfig::from_json(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(config.compare_config().trials, config.trials);
    }
}

#[test]
fn lambda_seeds_evaluate_inside_the_unit_interval() {
    for (path, text) in seeds("lambda_expr") {
        let v = parse_expr(&text).unwrap();
        assert_eq!(parse_lambda(&text).unwrap(), v, "{}", path.display());
    }
}

#[test]
fn hostile_inputs_are_rejected_without_panicking() {
    let deep = format!("{}1{}", "(".repeat(10_000), ")".repeat(10_000));
    assert!(parse_expr(&deep).is_err());
    assert!(parse_expr("").is_err());
    assert!(parse_lambda("1/0").is_err());
    assert!("hg:lambda=((".parse::<PolicySpec>().is_err());
    assert!(TwoStageInstance::from_json("{\"demands\":").is_err());
    assert!(ExperimentConfig::from_json("{\"policies\":[\"nope\"],\"trials\":1,\"seed\":1}").is_err());
}
