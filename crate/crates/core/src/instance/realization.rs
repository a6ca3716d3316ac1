use rand::Rng;

use super::{RealizationModel, TwoStageInstance};
use crate::error::{Error, Result};

/// One draw of the second stage.
///
/// Masks are indexed by demand index; only second-stage demands can be set.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub available: Vec<bool>,
    /// Realized values of second-stage demands (pricing instances only).
    pub values: Option<Vec<f64>>,
    /// Quantile ranks `u_i ~ U(0,1)` behind `values`; `values[i] = threshold_i(u_i)`.
    pub ranks: Option<Vec<f64>>,
}

/// A price posted to one second-stage demand.
///
/// When the price was derived from a target acceptance probability `quantile`,
/// acceptance is decided on the buyer's rank so that it happens with exactly
/// that probability even when the valuation has atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Offer {
    pub price: f64,
    pub quantile: Option<f64>,
}

impl Offer {
    pub fn at_price(price: f64) -> Self {
        Offer {
            price,
            quantile: None,
        }
    }
}

impl Realization {
    /// The realization in which every second-stage demand in `mask` shows up.
    pub fn from_mask(available: Vec<bool>) -> Self {
        Realization {
            available,
            values: None,
            ranks: None,
        }
    }

    pub fn is_available(&self, i: usize) -> bool {
        self.available[i]
    }

    pub fn available_indices(&self) -> Vec<usize> {
        (0..self.available.len())
            .filter(|&i| self.available[i])
            .collect()
    }

    pub fn available_ids(&self, inst: &TwoStageInstance) -> Vec<u32> {
        self.available_indices()
            .into_iter()
            .map(|i| inst.demands()[i].id)
            .collect()
    }

    pub fn value(&self, i: usize) -> f64 {
        self.values.as_ref().map_or(0.0, |v| v[i])
    }

    /// Whether available demand `i` takes `offer`. Demand without a drawn value
    /// always accepts.
    pub fn accepts(&self, i: usize, offer: Offer) -> bool {
        if !self.available[i] {
            return false;
        }
        match (&self.ranks, offer.quantile) {
            (Some(r), Some(q)) => r[i] < q,
            _ => match &self.values {
                Some(v) => v[i] >= offer.price,
                None => true,
            },
        }
    }
}

/// Draws `D̃₂` (and values for pricing instances).
///
/// Draw order is fixed: arrival coins (or the scenario pick) first, then one
/// rank per second-stage demand in index order.
pub fn sample_realization<R: Rng + ?Sized>(inst: &TwoStageInstance, rng: &mut R) -> Realization {
    let n = inst.num_demands();
    let mut available = vec![false; n];
    match inst.realization_model() {
        RealizationModel::Independent => {
            for &i in inst.second_stage() {
                let u: f64 = rng.random();
                available[i] = u < inst.demands()[i].availability;
            }
        }
        RealizationModel::ScenarioList(list) => {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut chosen = list.len() - 1;
            for (k, s) in list.iter().enumerate() {
                acc += s.probability;
                if u < acc {
                    chosen = k;
                    break;
                }
            }
            for &i in &list[chosen].available {
                available[i] = true;
            }
        }
    }
    if !inst.is_pricing() {
        return Realization::from_mask(available);
    }
    let mut ranks = vec![1.0; n];
    let mut values = vec![0.0; n];
    for &i in inst.second_stage() {
        let u: f64 = rng.random();
        ranks[i] = u;
        if let Some(v) = &inst.demands()[i].valuation {
            values[i] = v.value_at_rank(u);
        }
    }
    Realization {
        available,
        values: Some(values),
        ranks: Some(ranks),
    }
}

/// Calls `f(probability, available)` for every second-stage outcome.
///
/// Under independent arrivals only demands flagged in `relevant` are branched
/// on (demands with `π = 1` are always present, all others absent), so the
/// callback must not depend on the unflagged ones. At most `2^limit` outcomes
/// are visited; larger enumerations fail with a size error. Scenario lists are
/// visited as given.
pub fn for_each_realization(
    inst: &TwoStageInstance,
    relevant: &[bool],
    limit: usize,
    mut f: impl FnMut(f64, &[bool]),
) -> Result<()> {
    let n = inst.num_demands();
    match inst.realization_model() {
        RealizationModel::ScenarioList(list) => {
            let mut mask = vec![false; n];
            for s in list {
                mask.iter_mut().for_each(|m| *m = false);
                for &i in &s.available {
                    mask[i] = true;
                }
                f(s.probability, &mask);
            }
            Ok(())
        }
        RealizationModel::Independent => {
            let mut base = vec![false; n];
            let mut branch = Vec::new();
            for &i in inst.second_stage() {
                let pi = inst.demands()[i].availability;
                if !relevant[i] || pi <= 0.0 {
                    continue;
                }
                if pi >= 1.0 {
                    base[i] = true;
                } else {
                    branch.push(i);
                }
            }
            Error::size_guard("random second-stage demands", branch.len(), limit.min(40))?;
            let mut mask = base.clone();
            for bits in 0u64..(1u64 << branch.len()) {
                let mut p = 1.0;
                for (k, &i) in branch.iter().enumerate() {
                    let on = bits >> k & 1 == 1;
                    mask[i] = on;
                    let pi = inst.demands()[i].availability;
                    p *= if on { pi } else { 1.0 - pi };
                }
                f(p, &mask);
            }
            Ok(())
        }
    }
}
