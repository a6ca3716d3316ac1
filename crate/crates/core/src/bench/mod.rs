//! Benchmarks and the Monte Carlo comparison harness.
//!
//! `OPT_offline` sees the realized second stage before matching anything;
//! `OPT_online` is the best policy that commits to a first-stage matching
//! first, computed by enumerating dual bases. Trial `t` of every policy and of
//! the offline estimate draws its realization from the same stream, so
//! comparisons use common random numbers.

pub mod fr;
mod report;
pub mod robustness;

pub use report::{
    format_sig, round_json, round_sig, BenchValue, CompareConfig, ExperimentConfig, PolicySummary,
    RatioRow, SimReport, CSV_HEADER,
};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::instance::{for_each_realization, sample_realization, Realization, Stage, TwoStageInstance};
use crate::matching::max_value_matching;
use crate::policies::{PolicySpec, PreparedPolicy};
use crate::pricing::{offline_mp_value, opt_offline_mp_exact};
use crate::rng::{mean_stderr, trial_stream, Purpose};
use crate::submodular::{complement_weight, enumerate_dual_bases, exact_fw};

/// Random second-stage demands enumerated by [`opt_offline_exact`].
pub const EXACT_OFFLINE_LIMIT: usize = 20;
pub const ONLINE_SUPPLY_LIMIT: usize = 12;
pub const ONLINE_DEMAND_LIMIT: usize = 16;

/// SHA-256 of the instance's canonical JSON, hex encoded.
pub fn instance_digest(inst: &TwoStageInstance) -> String {
    hex::encode(Sha256::digest(inst.to_json().as_bytes()))
}

/// Offline optimum on one realization: maximum-value matching of all present
/// demand, or the market-efficiency optimum on pricing instances.
pub fn offline_value(inst: &TwoStageInstance, r: &Realization) -> f64 {
    if inst.is_pricing() {
        return offline_mp_value(inst, r);
    }
    let mut present = inst.first_stage_mask();
    for &i in inst.second_stage() {
        present[i] = r.is_available(i);
    }
    max_value_matching(inst, &present, &inst.all_supplies_mask()).1
}

/// Offline values of trials `0..n` (same realization streams as policies).
pub fn offline_values(inst: &TwoStageInstance, n: usize, seed: u64) -> Vec<f64> {
    (0..n as u64)
        .into_par_iter()
        .map(|t| {
            let r = sample_realization(inst, &mut trial_stream(seed, t, Purpose::Realization));
            offline_value(inst, &r)
        })
        .collect()
}

/// Monte Carlo estimate of `OPT_offline` (market efficiency on pricing instances).
pub fn opt_offline_estimate(inst: &TwoStageInstance, n_samples: usize, seed: u64) -> (f64, f64) {
    mean_stderr(&offline_values(inst, n_samples.max(1), seed))
}

/// `OPT_offline` by enumerating second-stage outcomes (value outcomes on
/// pricing instances with finite-support valuations).
pub fn opt_offline_exact(inst: &TwoStageInstance) -> Result<f64> {
    if inst.is_pricing() {
        return opt_offline_mp_exact(inst);
    }
    let relevant: Vec<bool> = inst
        .demands()
        .iter()
        .map(|d| d.stage == Stage::Second)
        .collect();
    let mut total = 0.0;
    for_each_realization(inst, &relevant, EXACT_OFFLINE_LIMIT, |p, avail| {
        total += p * offline_value(inst, &Realization::from_mask(avail.to_vec()));
    })?;
    Ok(total)
}

/// `OPT_online = max_T Σ_{j∉T} w_j + f^w(T)` over dual bases `T`.
pub fn opt_online_exact(inst: &TwoStageInstance) -> Result<f64> {
    if inst.is_pricing() || inst.is_edge_weighted() {
        return Err(Error::config(
            "the online optimum is only available for supply-weighted matching instances",
        ));
    }
    Error::size_guard("supplies", inst.num_supplies(), ONLINE_SUPPLY_LIMIT)?;
    Error::size_guard("second-stage demands", inst.second_stage().len(), ONLINE_DEMAND_LIMIT)?;
    let ns = inst.num_supplies();
    let mut best = f64::NEG_INFINITY;
    for base in enumerate_dual_bases(inst)? {
        let t = base.mask(ns);
        best = best.max(complement_weight(inst, &t) + exact_fw(inst, &t)?);
    }
    Ok(best)
}

/// Whether [`opt_online_exact`] accepts the instance.
pub fn online_guards_pass(inst: &TwoStageInstance) -> bool {
    !inst.is_pricing()
        && !inst.is_edge_weighted()
        && inst.num_supplies() <= ONLINE_SUPPLY_LIMIT
        && inst.second_stage().len() <= ONLINE_DEMAND_LIMIT
}

/// Ratio of means with a normal 95% band. With paired samples the band uses
/// the delta method on `x − r·y`; against an exact benchmark only `x` varies.
pub fn ratio_band(x: &[f64], bench: &BenchValue, paired: Option<&[f64]>) -> (f64, f64, f64) {
    let (mx, sx) = mean_stderr(x);
    if bench.mean == 0.0 {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let r = mx / bench.mean;
    let se = match paired {
        Some(y) if y.len() == x.len() => {
            let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - r * b).collect();
            mean_stderr(&d).1 / bench.mean.abs()
        }
        _ => {
            let rel = (sx / mx).powi(2) + (bench.stderr / bench.mean).powi(2);
            if mx == 0.0 {
                sx / bench.mean.abs()
            } else {
                r.abs() * rel.sqrt()
            }
        }
    };
    (r, r - 1.96 * se, r + 1.96 * se)
}

/// Runs every policy for `config.trials` trials on common realizations and
/// compares against the available benchmarks.
pub fn compare(inst: &TwoStageInstance, policies: &[PolicySpec], config: &CompareConfig) -> Result<SimReport> {
    if config.trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let seed = config.seed;
    let mut summaries = Vec::new();
    let mut samples = Vec::new();
    for spec in policies {
        let prepared = PreparedPolicy::new(*spec, inst, seed)?;
        let values = prepared.values(config.trials);
        let (mean, stderr) = mean_stderr(&values);
        summaries.push(PolicySummary {
            policy: spec.to_string(),
            trials: config.trials,
            mean,
            stderr,
            note: prepared.note().map(str::to_string),
        });
        samples.push(values);
    }

    let exact_offline = if config.exact_benchmarks {
        opt_offline_exact(inst).ok()
    } else {
        None
    };
    let (opt_offline, offline_samples) = match exact_offline {
        Some(v) => (BenchValue::exact(v), None),
        None => {
            let v = offline_values(inst, config.trials, seed);
            let (mean, stderr) = mean_stderr(&v);
            (
                BenchValue {
                    mean,
                    stderr,
                    exact: false,
                },
                Some(v),
            )
        }
    };
    let opt_online = if config.exact_benchmarks && online_guards_pass(inst) {
        Some(opt_online_exact(inst)?)
    } else {
        None
    };

    let mut rows = Vec::new();
    for (summary, values) in summaries.iter().zip(&samples) {
        let mut benches = vec![("opt_offline", opt_offline, offline_samples.as_deref())];
        if let Some(v) = opt_online {
            benches.push(("opt_online", BenchValue::exact(v), None));
        }
        for (name, bench, paired) in benches {
            let (ratio, lo, hi) = ratio_band(values, &bench, paired);
            rows.push(RatioRow {
                policy: summary.policy.clone(),
                trials: summary.trials,
                mean: summary.mean,
                stderr: summary.stderr,
                benchmark: name.to_string(),
                bench_mean: bench.mean,
                bench_stderr: bench.stderr,
                ratio,
                ratio_lo95: lo,
                ratio_hi95: hi,
            });
        }
    }
    Ok(SimReport {
        instance_digest: instance_digest(inst),
        seed,
        trials: config.trials,
        config: config.clone(),
        policies: summaries,
        opt_offline,
        opt_online,
        rows,
    })
}
