//! Robustness of the balance policy to a weaker second stage.
//!
//! With a `β`-approximate second stage and first-stage share
//! `γ ≤ |M₁*|/|M*|` (maximum first-stage matching over maximum overall
//! matching, per realization), the balance policy keeps `γ + β(1−γ)²` of the
//! offline optimum on unweighted instances; with an exact second stage it
//! also keeps `min_j (1 − y_j + y_j²)` on any supply-weighted instance.

use serde::{Deserialize, Serialize};

use super::{offline_values, opt_offline_exact, ratio_band, BenchValue};
use crate::balance::{solve_balance, ConvexG, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::error::{Error, Result};
use crate::instance::{for_each_realization, sample_realization, Stage, TwoStageInstance};
use crate::matching::max_card_matching;
use crate::policies::{is_unweighted, PolicyKind, PolicySpec, PreparedPolicy, SecondStage};
use crate::rng::{mean_stderr, trial_stream, Purpose};

/// Random second-stage demands for which `γ̂` and the ratio are enumerated exactly.
pub const EXACT_ROBUSTNESS_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobustnessConfig {
    /// Approximation factor of the second stage.
    pub beta: f64,
    /// Lower bound on the first-stage share of the maximum matching.
    pub gamma: f64,
}

impl RobustnessConfig {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) || !(0.0..=1.0).contains(&gamma) {
            return Err(Error::Domain(format!("beta {beta} and gamma {gamma} must lie in [0, 1]")));
        }
        Ok(RobustnessConfig { beta, gamma })
    }

    /// Guaranteed ratio when the share is only known to be at least `gamma`:
    /// `min_{γ' ∈ [γ, 1]} γ' + β(1−γ')²`.
    pub fn bound(&self) -> f64 {
        let RobustnessConfig { beta, gamma } = *self;
        let f = |g: f64| g + beta * (1.0 - g) * (1.0 - g);
        if beta > 0.0 {
            let stationary = 1.0 - 1.0 / (2.0 * beta);
            if stationary > gamma {
                return f(stationary);
            }
        }
        f(gamma)
    }
}

pub fn beta_of(second: SecondStage) -> f64 {
    match second {
        SecondStage::Exact => 1.0,
        SecondStage::GreedyMaximal => 0.5,
    }
}

fn share(inst: &TwoStageInstance, available: &[bool], first: usize) -> Option<f64> {
    let mut present = inst.first_stage_mask();
    for &i in inst.second_stage() {
        present[i] = available[i];
    }
    let all = max_card_matching(inst, &present, &inst.all_supplies_mask()).len();
    (all > 0).then(|| first as f64 / all as f64)
}

/// `min |M₁*|/|M*|` over realizations with positive probability (exact), or
/// over `trials` sampled realizations when there are too many. Returns the
/// share and whether it is exact.
pub fn gamma_hat(inst: &TwoStageInstance, trials: usize, seed: u64) -> (f64, bool) {
    let first = max_card_matching(inst, &inst.first_stage_mask(), &inst.all_supplies_mask()).len();
    let relevant: Vec<bool> = inst
        .demands()
        .iter()
        .map(|d| d.stage == Stage::Second)
        .collect();
    let mut g = 1.0f64;
    let exact = for_each_realization(inst, &relevant, EXACT_ROBUSTNESS_LIMIT, |p, avail| {
        if p > 0.0 {
            if let Some(s) = share(inst, avail, first) {
                g = g.min(s);
            }
        }
    });
    if exact.is_ok() {
        return (g, true);
    }
    let mut g = 1.0f64;
    for t in 0..trials.max(1) as u64 {
        let r = sample_realization(inst, &mut trial_stream(seed, t, Purpose::Realization));
        if let Some(s) = share(inst, &r.available, first) {
            g = g.min(s);
        }
    }
    (g, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub beta: f64,
    pub trials: usize,
    pub seed: u64,
    /// `None` on weighted instances, where the share bound does not apply.
    pub gamma_hat: Option<f64>,
    pub gamma_exact: bool,
    pub gamma_bound: Option<f64>,
    /// `None` unless the second stage is exact.
    pub refined_bound: Option<f64>,
    pub policy_mean: f64,
    pub policy_stderr: f64,
    pub offline: BenchValue,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// Ratio of exact expectations when both could be enumerated.
    pub exact_ratio: Option<f64>,
    pub passes_gamma: Option<bool>,
    pub passes_refined: Option<bool>,
}

impl RobustnessReport {
    pub fn passed(&self) -> bool {
        self.passes_gamma != Some(false) && self.passes_refined != Some(false)
    }
}

/// Runs the balance policy with the given second stage and checks both bounds,
/// allowing three standard errors (or `1e-9` when the ratio is exact).
pub fn robustness_check(
    inst: &TwoStageInstance,
    second: SecondStage,
    trials: usize,
    seed: u64,
) -> Result<RobustnessReport> {
    if inst.is_pricing() || inst.is_edge_weighted() {
        return Err(Error::config("robustness checks need a supply-weighted matching instance"));
    }
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let beta = beta_of(second);
    let spec = PolicySpec::new(PolicyKind::Wbu {
        g: ConvexG::Quadratic,
    })
    .with_second_stage(second);
    let policy = PreparedPolicy::new(spec, inst, seed)?;
    let values = policy.values(trials);
    let (policy_mean, policy_stderr) = mean_stderr(&values);

    let small = {
        let random = inst
            .second_stage()
            .iter()
            .filter(|&&i| {
                let p = inst.demands()[i].availability;
                p > 0.0 && p < 1.0
            })
            .count();
        random <= EXACT_ROBUSTNESS_LIMIT
    };
    let exact_off = if small { opt_offline_exact(inst).ok() } else { None };
    let (offline, paired) = match exact_off {
        Some(v) => (BenchValue::exact(v), None),
        None => {
            let v = offline_values(inst, trials, seed);
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
    let (ratio, lo, _) = ratio_band(&values, &offline, paired.as_deref());
    let ratio_stderr = if ratio.is_nan() { 0.0 } else { (ratio - lo) / 1.96 };
    let exact_ratio = match exact_off {
        Some(off) if off > 0.0 => policy.exact_value().ok().map(|v| v / off),
        Some(_) => Some(1.0),
        None => None,
    };
    let (observed, slack) = match exact_ratio {
        Some(r) => (r, 1e-9),
        None if ratio.is_nan() => (1.0, 0.0),
        None => (ratio, 3.0 * ratio_stderr + 1e-12),
    };

    let (gamma_hat, gamma_exact, gamma_bound) = if is_unweighted(inst) {
        let (g, exact) = gamma_hat(inst, trials, seed);
        (Some(g), exact, Some(RobustnessConfig { beta, gamma: g }.bound()))
    } else {
        (None, false, None)
    };
    let refined_bound = (second == SecondStage::Exact).then(|| {
        solve_balance(inst, ConvexG::Quadratic, DEFAULT_TOL, DEFAULT_MAX_ITER).refined_bound(inst)
    });
    Ok(RobustnessReport {
        beta,
        trials,
        seed,
        gamma_hat,
        gamma_exact,
        gamma_bound,
        refined_bound,
        policy_mean,
        policy_stderr,
        offline,
        ratio,
        ratio_stderr,
        exact_ratio,
        passes_gamma: gamma_bound.map(|b| observed >= b - slack),
        passes_refined: refined_bound.map(|b| observed >= b - slack),
    })
}
