//! Two-stage instance model.
//!
//! Vertices carry caller-chosen integer ids; internally everything is indexed by
//! position, with demands and supplies sorted by id so that index order and id
//! order agree.

mod generate;
mod io;
mod realization;

pub use generate::{
    gen_edge_weighted_tight, gen_geo, gen_pricing_tight, gen_random, gen_worst_case, GeoSpec,
    PiSpec, RandomSpec, WeightMode, WeightSpec,
};
pub use io::{load, parse_json, save, InstanceFile};
pub use realization::{for_each_realization, sample_realization, Offer, Realization};

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pricing::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemandVertex {
    pub id: u32,
    pub stage: Stage,
    /// Probability of being present in the second stage; 1 for first-stage demand.
    pub availability: f64,
    pub valuation: Option<Valuation>,
    /// Price already accepted by a first-stage demand in pricing instances.
    pub posted_price: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupplyVertex {
    pub id: u32,
    pub weight: f64,
}

/// An edge between demand index `demand` and supply index `supply`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub demand: usize,
    pub supply: usize,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub probability: f64,
    /// Demand indices of the second-stage vertices present in this scenario.
    pub available: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RealizationModel {
    Independent,
    ScenarioList(Vec<Scenario>),
}

/// What a matched edge is worth in the supply-efficiency problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueModel {
    SupplyWeighted,
    EdgeWeighted,
}

/// An immutable, validated two-stage instance.
#[derive(Debug, Clone)]
pub struct TwoStageInstance {
    demands: Vec<DemandVertex>,
    supplies: Vec<SupplyVertex>,
    edges: Vec<Edge>,
    edge_weighted: bool,
    realization: RealizationModel,
    demand_adj: Vec<Vec<(usize, usize)>>,
    supply_adj: Vec<Vec<(usize, usize)>>,
    first: Vec<usize>,
    second: Vec<usize>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl PartialEq for TwoStageInstance {
    fn eq(&self, other: &Self) -> bool {
        self.demands == other.demands
            && self.supplies == other.supplies
            && self.edges == other.edges
            && self.realization == other.realization
    }
}

/// Edge given by vertex ids, with an optional edge weight.
pub type IdEdge = (u32, u32, Option<f64>);

impl TwoStageInstance {
    /// Validates and indexes an instance given in id space.
    ///
    /// `scenarios` are `(probability, second-stage demand ids)`; `None` means
    /// independent arrivals.
    pub fn new(
        mut demands: Vec<DemandVertex>,
        mut supplies: Vec<SupplyVertex>,
        id_edges: Vec<IdEdge>,
        scenarios: Option<Vec<(f64, Vec<u32>)>>,
    ) -> Result<Self> {
        demands.sort_by_key(|d| d.id);
        supplies.sort_by_key(|s| s.id);
        for w in demands.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::validation(format!("duplicate demand id {}", w[0].id)));
            }
        }
        for w in supplies.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::validation(format!("duplicate supply id {}", w[0].id)));
            }
        }
        let demand_pos: HashMap<u32, usize> =
            demands.iter().enumerate().map(|(k, d)| (d.id, k)).collect();
        let supply_pos: HashMap<u32, usize> =
            supplies.iter().enumerate().map(|(k, s)| (s.id, k)).collect();

        for d in demands.iter_mut() {
            if !(0.0..=1.0).contains(&d.availability) {
                return Err(Error::validation(format!(
                    "demand {}: availability {} outside [0, 1]",
                    d.id, d.availability
                )));
            }
            if d.stage == Stage::First && d.availability != 1.0 {
                return Err(Error::validation(format!(
                    "demand {}: first-stage availability must be 1, got {}",
                    d.id, d.availability
                )));
            }
            if let Some(v) = d.valuation.as_mut() {
                v.validate()?;
                v.normalize();
            }
            if let Some(p) = d.posted_price {
                if !(p.is_finite() && p >= 0.0) {
                    return Err(Error::validation(format!("demand {}: invalid price {p}", d.id)));
                }
            }
        }
        let priced = demands
            .iter()
            .filter(|d| d.stage == Stage::Second)
            .any(|d| d.valuation.is_some());
        if priced {
            if let Some(d) = demands
                .iter()
                .find(|d| d.stage == Stage::Second && d.valuation.is_none())
            {
                return Err(Error::validation(format!(
                    "demand {}: pricing instances need a valuation on every second-stage demand",
                    d.id
                )));
            }
        }
        for s in &supplies {
            if !(s.weight.is_finite() && s.weight >= 0.0) {
                return Err(Error::validation(format!(
                    "supply {}: weight {} must be finite and non-negative",
                    s.id, s.weight
                )));
            }
        }

        let weighted_count = id_edges.iter().filter(|e| e.2.is_some()).count();
        if weighted_count != 0 && weighted_count != id_edges.len() {
            return Err(Error::validation(
                "either every edge carries a weight or none does",
            ));
        }
        let edge_weighted = weighted_count > 0;
        let mut edges = Vec::with_capacity(id_edges.len());
        let mut edge_index = HashMap::with_capacity(id_edges.len());
        for (d, s, w) in id_edges {
            let di = *demand_pos
                .get(&d)
                .ok_or_else(|| Error::validation(format!("edge ({d}, {s}): unknown demand id {d}")))?;
            let si = *supply_pos
                .get(&s)
                .ok_or_else(|| Error::validation(format!("edge ({d}, {s}): unknown supply id {s}")))?;
            if let Some(w) = w {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::validation(format!("edge ({d}, {s}): invalid weight {w}")));
                }
            }
            if edge_index.insert((di, si), edges.len()).is_some() {
                return Err(Error::validation(format!("duplicate edge ({d}, {s})")));
            }
            edges.push(Edge {
                demand: di,
                supply: si,
                weight: w,
            });
        }
        // Canonical edge order: by (demand, supply) index.
        edges.sort_by_key(|e| (e.demand, e.supply));
        edge_index.clear();
        for (k, e) in edges.iter().enumerate() {
            edge_index.insert((e.demand, e.supply), k);
        }

        let realization = match scenarios {
            None => RealizationModel::Independent,
            Some(list) => {
                if list.is_empty() {
                    return Err(Error::validation("scenario list is empty"));
                }
                let mut total = 0.0;
                let mut out = Vec::with_capacity(list.len());
                for (k, (p, ids)) in list.into_iter().enumerate() {
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(Error::validation(format!("scenario {k}: invalid probability {p}")));
                    }
                    total += p;
                    let mut idx = Vec::with_capacity(ids.len());
                    let mut seen = HashSet::new();
                    for id in ids {
                        let di = *demand_pos.get(&id).ok_or_else(|| {
                            Error::validation(format!("scenario {k}: unknown demand id {id}"))
                        })?;
                        if demands[di].stage != Stage::Second {
                            return Err(Error::validation(format!(
                                "scenario {k}: demand {id} is not a second-stage demand"
                            )));
                        }
                        if seen.insert(di) {
                            idx.push(di);
                        }
                    }
                    idx.sort_unstable();
                    out.push(Scenario {
                        probability: p,
                        available: idx,
                    });
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::validation(format!(
                        "scenario probabilities sum to {total}, expected 1"
                    )));
                }
                RealizationModel::ScenarioList(out)
            }
        };

        let mut demand_adj = vec![Vec::new(); demands.len()];
        let mut supply_adj = vec![Vec::new(); supplies.len()];
        for (k, e) in edges.iter().enumerate() {
            demand_adj[e.demand].push((e.supply, k));
            supply_adj[e.supply].push((e.demand, k));
        }
        let first = (0..demands.len())
            .filter(|&i| demands[i].stage == Stage::First)
            .collect();
        let second = (0..demands.len())
            .filter(|&i| demands[i].stage == Stage::Second)
            .collect();

        Ok(TwoStageInstance {
            demands,
            supplies,
            edges,
            edge_weighted,
            realization,
            demand_adj,
            supply_adj,
            first,
            second,
            edge_index,
        })
    }

    pub fn builder() -> InstanceBuilder {
        InstanceBuilder::default()
    }

    pub fn demands(&self) -> &[DemandVertex] {
        &self.demands
    }

    pub fn supplies(&self) -> &[SupplyVertex] {
        &self.supplies
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn num_demands(&self) -> usize {
        self.demands.len()
    }

    pub fn num_supplies(&self) -> usize {
        self.supplies.len()
    }

    /// Indices of first-stage demands, ascending.
    pub fn first_stage(&self) -> &[usize] {
        &self.first
    }

    /// Indices of second-stage demands, ascending.
    pub fn second_stage(&self) -> &[usize] {
        &self.second
    }

    /// `(supply, edge)` pairs incident to demand `i`.
    pub fn demand_adj(&self, i: usize) -> &[(usize, usize)] {
        &self.demand_adj[i]
    }

    /// `(demand, edge)` pairs incident to supply `j`.
    pub fn supply_adj(&self, j: usize) -> &[(usize, usize)] {
        &self.supply_adj[j]
    }

    pub fn edge_between(&self, demand: usize, supply: usize) -> Option<usize> {
        self.edge_index.get(&(demand, supply)).copied()
    }

    pub fn realization_model(&self) -> &RealizationModel {
        &self.realization
    }

    pub fn is_edge_weighted(&self) -> bool {
        self.edge_weighted
    }

    /// True when second-stage demand carries valuations.
    pub fn is_pricing(&self) -> bool {
        self.second
            .iter()
            .any(|&i| self.demands[i].valuation.is_some())
    }

    pub fn value_model(&self) -> ValueModel {
        if self.edge_weighted {
            ValueModel::EdgeWeighted
        } else {
            ValueModel::SupplyWeighted
        }
    }

    pub fn supply_weight(&self, j: usize) -> f64 {
        self.supplies[j].weight
    }

    pub fn supply_weights(&self) -> Vec<f64> {
        self.supplies.iter().map(|s| s.weight).collect()
    }

    pub fn total_supply_weight(&self) -> f64 {
        self.supplies.iter().map(|s| s.weight).sum()
    }

    /// Edge weight, or 0 when the instance is not edge-weighted.
    pub fn edge_weight(&self, e: usize) -> f64 {
        self.edges[e].weight.unwrap_or(0.0)
    }

    /// Value contributed by matching edge `e` under the instance's value model.
    pub fn edge_value(&self, e: usize) -> f64 {
        match self.value_model() {
            ValueModel::SupplyWeighted => self.supplies[self.edges[e].supply].weight,
            ValueModel::EdgeWeighted => self.edge_weight(e),
        }
    }

    /// Expected value `E[v | v >= p]` a matched first-stage demand brings in a
    /// pricing instance; zero without a valuation.
    pub fn first_stage_value(&self, i: usize) -> f64 {
        let d = &self.demands[i];
        match &d.valuation {
            Some(v) => v.cond_mean_above(d.posted_price.unwrap_or(0.0)),
            None => 0.0,
        }
    }

    /// Demand mask with exactly the first-stage demands set.
    pub fn first_stage_mask(&self) -> Vec<bool> {
        let mut m = vec![false; self.demands.len()];
        for &i in &self.first {
            m[i] = true;
        }
        m
    }

    pub fn all_supplies_mask(&self) -> Vec<bool> {
        vec![true; self.supplies.len()]
    }
}

/// Convenience builder used by generators and tests.
#[derive(Debug, Default, Clone)]
pub struct InstanceBuilder {
    demands: Vec<DemandVertex>,
    supplies: Vec<SupplyVertex>,
    edges: Vec<IdEdge>,
    scenarios: Option<Vec<(f64, Vec<u32>)>>,
}

impl InstanceBuilder {
    pub fn first(mut self, id: u32) -> Self {
        self.demands.push(DemandVertex {
            id,
            stage: Stage::First,
            availability: 1.0,
            valuation: None,
            posted_price: None,
        });
        self
    }

    /// First-stage demand that has accepted `price` under valuation `valuation`.
    pub fn first_priced(mut self, id: u32, valuation: Valuation, price: f64) -> Self {
        self.demands.push(DemandVertex {
            id,
            stage: Stage::First,
            availability: 1.0,
            valuation: Some(valuation),
            posted_price: Some(price),
        });
        self
    }

    pub fn second(mut self, id: u32, pi: f64) -> Self {
        self.demands.push(DemandVertex {
            id,
            stage: Stage::Second,
            availability: pi,
            valuation: None,
            posted_price: None,
        });
        self
    }

    pub fn second_valued(mut self, id: u32, valuation: Valuation) -> Self {
        self.demands.push(DemandVertex {
            id,
            stage: Stage::Second,
            availability: 1.0,
            valuation: Some(valuation),
            posted_price: None,
        });
        self
    }

    pub fn supply(mut self, id: u32, weight: f64) -> Self {
        self.supplies.push(SupplyVertex { id, weight });
        self
    }

    pub fn edge(mut self, demand: u32, supply: u32) -> Self {
        self.edges.push((demand, supply, None));
        self
    }

    pub fn weighted_edge(mut self, demand: u32, supply: u32, w: f64) -> Self {
        self.edges.push((demand, supply, Some(w)));
        self
    }

    pub fn scenario(mut self, probability: f64, available: Vec<u32>) -> Self {
        self.scenarios
            .get_or_insert_with(Vec::new)
            .push((probability, available));
        self
    }

    pub fn build(self) -> Result<TwoStageInstance> {
        TwoStageInstance::new(self.demands, self.supplies, self.edges, self.scenarios)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_dangling_and_duplicate_edges() {
        let r = TwoStageInstance::builder().first(0).supply(0, 1.0).edge(0, 5).build();
        assert!(matches!(r, Err(Error::Validation(_))));
        let r = TwoStageInstance::builder()
            .first(0)
            .supply(0, 1.0)
            .edge(0, 0)
            .edge(0, 0)
            .build();
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_bad_probabilities() {
        let r = TwoStageInstance::builder().second(0, 1.5).supply(0, 1.0).build();
        assert!(matches!(r, Err(Error::Validation(_))));
        let r = TwoStageInstance::builder()
            .second(0, 0.5)
            .supply(0, 1.0)
            .scenario(0.5, vec![0])
            .scenario(0.4, vec![])
            .build();
        assert!(matches!(r, Err(Error::Validation(_))));
        let r = TwoStageInstance::builder()
            .first(0)
            .supply(0, 1.0)
            .scenario(1.0, vec![0])
            .build();
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn rejects_mixed_edge_weights() {
        let r = TwoStageInstance::builder()
            .first(0)
            .first(1)
            .supply(0, 1.0)
            .edge(0, 0)
            .weighted_edge(1, 0, 2.0)
            .build();
        assert!(matches!(r, Err(Error::Validation(_))));
    }

    #[test]
    fn indices_follow_id_order() {
        let inst = TwoStageInstance::builder()
            .second(9, 0.5)
            .first(3)
            .supply(7, 2.0)
            .supply(1, 1.0)
            .edge(3, 7)
            .edge(9, 1)
            .build()
            .unwrap();
        assert_eq!(inst.demands()[0].id, 3);
        assert_eq!(inst.supplies()[0].id, 1);
        assert_eq!(inst.first_stage(), &[0]);
        assert_eq!(inst.second_stage(), &[1]);
        assert_eq!(inst.edge_between(0, 1), Some(0));
        assert_eq!(inst.edge_value(0), 2.0);
    }
}
