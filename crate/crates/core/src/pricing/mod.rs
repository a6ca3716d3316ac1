//! Joint matching and pricing: valuations, the ex-ante relaxation, the
//! simulate-and-discard policy, and single-stage pricing.
//!
//! Market efficiency counts matched supply weights, the value `E[v | v ≥ p]`
//! of matched first-stage demand (which accepted price `p` earlier), and the
//! realized value of matched second-stage demand.

mod ear;
mod ocrs;
pub mod valuation;

pub use ear::{solve_ear, EarSolution, DEFAULT_EAR_MAX_ITER, DEFAULT_EAR_TOL};
pub use ocrs::{
    ocrs_first_stage, ocrs_full_variant, ocrs_run, ocrs_two_stage, single_stage_exact, single_stage_price_and_match,
    single_stage_run, OcrsFrequencies, OcrsRun, SINGLE_STAGE_EXACT_LIMIT,
};

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{
    sample_realization, Offer, Realization, RealizationModel, Stage, TwoStageInstance,
};
use crate::matching::{max_vertex_weight_matching, Matching};
use crate::rng::mean_stderr;

/// Largest number of value outcomes enumerated by [`opt_offline_mp_exact`].
pub const EXACT_MP_LIMIT: usize = 1 << 20;

/// Pricing operations model arrival uncertainty through the valuation alone:
/// they need independent arrivals with `π = 1` on every valued demand.
pub(crate) fn ensure_pricing(inst: &TwoStageInstance) -> Result<()> {
    if !inst.is_pricing() {
        return Err(Error::config("not a pricing instance: second-stage demand carries no valuations"));
    }
    if !matches!(inst.realization_model(), RealizationModel::Independent) {
        return Err(Error::config("pricing policies need independent arrivals"));
    }
    if let Some(&i) = inst
        .second_stage()
        .iter()
        .find(|&&i| inst.demands()[i].availability != 1.0)
    {
        return Err(Error::config(format!(
            "pricing policies need pi = 1 on second-stage demand {} (model absence in the valuation)",
            inst.demands()[i].id
        )));
    }
    Ok(())
}

/// Value of a two-stage outcome: supply weights of all matched supplies, plus
/// `E[v | v ≥ p]` of matched first-stage demand, plus realized values of
/// matched second-stage demand.
pub fn market_efficiency(
    inst: &TwoStageInstance,
    first: &Matching,
    realization: &Realization,
    second: &Matching,
) -> f64 {
    let mut total = 0.0;
    for m in [first, second] {
        for &e in m.edges() {
            let edge = inst.edges()[e];
            total += inst.supply_weight(edge.supply);
            total += match inst.demands()[edge.demand].stage {
                Stage::First => inst.first_stage_value(edge.demand),
                Stage::Second => realization.value(edge.demand),
            };
        }
    }
    total
}

/// Second stage under fixed posted prices: accepters (value at least the
/// price) are matched to the supplies left by `first` by maximum vertex-weighted
/// matching with weights `E[v | v ≥ p_i]` and `w_j`.
pub fn fixed_price_second_stage(
    inst: &TwoStageInstance,
    first: &Matching,
    prices: &[Option<f64>],
    realization: &Realization,
) -> Matching {
    let nd = inst.num_demands();
    let mut accept = vec![false; nd];
    let mut dw = vec![0.0; nd];
    for &i in inst.second_stage() {
        let p = prices[i].unwrap_or(0.0);
        accept[i] = realization.accepts(i, Offer::at_price(p));
        if let Some(v) = &inst.demands()[i].valuation {
            dw[i] = v.cond_mean_above(p);
        }
    }
    let free: Vec<bool> = first.matched_supplies(inst).iter().map(|&m| !m).collect();
    max_vertex_weight_matching(inst, &accept, &free, &dw, &inst.supply_weights()).0
}

/// Mean market efficiency of a fixed-price policy with first-stage matching
/// `first`, over `n` sampled realizations.
pub fn fixed_price_estimate<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    first: &Matching,
    prices: &[Option<f64>],
    n: usize,
    rng: &mut R,
) -> (f64, f64) {
    let values: Vec<f64> = (0..n)
        .map(|_| {
            let r = sample_realization(inst, rng);
            let second = fixed_price_second_stage(inst, first, prices, &r);
            market_efficiency(inst, first, &r, &second)
        })
        .collect();
    mean_stderr(&values)
}

/// Offline optimum for market efficiency on one realization.
pub fn offline_mp_value(inst: &TwoStageInstance, r: &Realization) -> f64 {
    let nd = inst.num_demands();
    let mut present = inst.first_stage_mask();
    let mut dw = vec![0.0; nd];
    for &i in inst.first_stage() {
        dw[i] = inst.first_stage_value(i);
    }
    for &i in inst.second_stage() {
        present[i] = r.is_available(i);
        dw[i] = r.value(i);
    }
    max_vertex_weight_matching(inst, &present, &inst.all_supplies_mask(), &dw, &inst.supply_weights()).1
}

/// Monte Carlo estimate of the offline optimum for market efficiency.
pub fn opt_offline_mp_estimate<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    n_samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    ensure_pricing(inst)?;
    let values: Vec<f64> = (0..n_samples.max(1))
        .map(|_| offline_mp_value(inst, &sample_realization(inst, rng)))
        .collect();
    Ok(mean_stderr(&values))
}

/// Exact offline optimum when every second-stage valuation has finite support.
pub fn opt_offline_mp_exact(inst: &TwoStageInstance) -> Result<f64> {
    ensure_pricing(inst)?;
    let second = inst.second_stage();
    let mut supports = Vec::with_capacity(second.len());
    let mut count: usize = 1;
    for &i in second {
        let atoms = inst.demands()[i]
            .valuation
            .as_ref()
            .and_then(|v| v.atoms())
            .ok_or_else(|| Error::config("exact offline optimum needs finite-support valuations"))?;
        count = count.saturating_mul(atoms.len());
        supports.push(atoms);
    }
    Error::size_guard("value outcomes", count, EXACT_MP_LIMIT)?;
    let nd = inst.num_demands();
    let mut r = Realization {
        available: vec![false; nd],
        values: Some(vec![0.0; nd]),
        ranks: None,
    };
    for &i in second {
        r.available[i] = true;
    }
    let mut idx = vec![0usize; second.len()];
    let mut total = 0.0;
    loop {
        let mut p = 1.0;
        for (k, &i) in second.iter().enumerate() {
            let (v, q) = supports[k][idx[k]];
            r.values.as_mut().expect("values")[i] = v;
            p *= q;
        }
        if p > 0.0 {
            total += p * offline_mp_value(inst, &r);
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(total);
            }
            idx[k] += 1;
            if idx[k] < supports[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::gen_pricing_tight;
    use crate::pricing::valuation::Valuation;
    use crate::rng::seeded;

    fn example() -> TwoStageInstance {
        TwoStageInstance::builder()
            .supply(0, 0.0)
            .second_valued(1, Valuation::Uniform { a: 0.0, b: 1.0 })
            .second_valued(2, Valuation::Uniform { a: 0.0, b: 2.0 })
            .edge(1, 0)
            .edge(2, 0)
            .build()
            .unwrap()
    }

    #[test]
    fn posted_prices_on_the_two_buyer_example() {
        let inst = example();
        let mut rng = seeded(17);
        let none = Matching::empty();
        let (zero, se0) = fixed_price_estimate(&inst, &none, &[Some(0.0), Some(0.0)], 40_000, &mut rng);
        assert!((zero - 1.0).abs() < 4.0 * se0 + 1e-3, "{zero} ± {se0}");
        let (half, se1) = fixed_price_estimate(&inst, &none, &[Some(0.0), Some(0.5)], 40_000, &mut rng);
        assert!((half - 17.0 / 16.0).abs() < 4.0 * se1 + 1e-3, "{half} ± {se1}");
    }

    #[test]
    fn tight_instance_offline_value() {
        for eps in [0.5, 0.1, 0.05] {
            let inst = gen_pricing_tight(eps).unwrap();
            let exact = opt_offline_mp_exact(&inst).unwrap();
            assert!((exact - (2.0 - eps)).abs() < 1e-12);
            let mut rng = seeded(3);
            let (m, se) = opt_offline_mp_estimate(&inst, 20_000, &mut rng).unwrap();
            assert!((m - exact).abs() < 4.0 * se);
        }
    }

    #[test]
    fn empty_matchings_are_worth_nothing() {
        let inst = example();
        let r = sample_realization(&inst, &mut seeded(1));
        assert_eq!(market_efficiency(&inst, &Matching::empty(), &r, &Matching::empty()), 0.0);
    }

    #[test]
    fn zero_valuations_leave_supply_weights() {
        let inst = TwoStageInstance::builder()
            .supply(0, 1.5)
            .supply(1, 0.5)
            .second_valued(0, Valuation::Point { v: 0.0 })
            .second_valued(1, Valuation::Point { v: 0.0 })
            .edge(0, 0)
            .edge(0, 1)
            .edge(1, 0)
            .build()
            .unwrap();
        assert_eq!(opt_offline_mp_exact(&inst).unwrap(), 2.0);
    }

    #[test]
    fn non_pricing_instances_are_rejected() {
        let inst = crate::instance::gen_worst_case(1);
        assert!(matches!(opt_offline_mp_exact(&inst), Err(Error::Config(_))));
    }
}
