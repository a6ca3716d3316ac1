//! Matching kernels on a [`TwoStageInstance`] and rounding of fractional matchings.
//!
//! Vertex subsets are passed as boolean masks indexed by demand / supply index.
//! Matchings are stored as sorted lists of instance edge indices.

mod bvn;
mod hopcroft_karp;
mod hungarian;

pub use bvn::{bvn_decompose, sample_matching, DEFAULT_BVN_TOL};
pub use hopcroft_karp::hopcroft_karp;
pub use hungarian::max_weight_assignment;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::TwoStageInstance;

/// An integral matching, as sorted instance edge indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Matching {
    edges: Vec<usize>,
}

impl Matching {
    pub fn new(mut edges: Vec<usize>) -> Self {
        edges.sort_unstable();
        edges.dedup();
        Matching { edges }
    }

    pub fn empty() -> Self {
        Matching::default()
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, e: usize) -> bool {
        self.edges.binary_search(&e).is_ok()
    }

    /// Vertex-disjointness and edge existence.
    pub fn is_valid(&self, inst: &TwoStageInstance) -> bool {
        let mut d = vec![false; inst.num_demands()];
        let mut s = vec![false; inst.num_supplies()];
        for &e in &self.edges {
            let Some(edge) = inst.edges().get(e) else {
                return false;
            };
            if d[edge.demand] || s[edge.supply] {
                return false;
            }
            d[edge.demand] = true;
            s[edge.supply] = true;
        }
        true
    }

    pub fn matched_supplies(&self, inst: &TwoStageInstance) -> Vec<bool> {
        let mut s = vec![false; inst.num_supplies()];
        for &e in &self.edges {
            s[inst.edges()[e].supply] = true;
        }
        s
    }

    pub fn matched_demands(&self, inst: &TwoStageInstance) -> Vec<bool> {
        let mut d = vec![false; inst.num_demands()];
        for &e in &self.edges {
            d[inst.edges()[e].demand] = true;
        }
        d
    }

    /// Total weight of the matched supplies.
    pub fn supply_weight(&self, inst: &TwoStageInstance) -> f64 {
        self.edges
            .iter()
            .map(|&e| inst.supply_weight(inst.edges()[e].supply))
            .sum()
    }

    /// Value under the instance's value model (supply or edge weights).
    pub fn value(&self, inst: &TwoStageInstance) -> f64 {
        self.edges.iter().map(|&e| inst.edge_value(e)).sum()
    }

    /// `(demand id, supply id)` pairs.
    pub fn pairs(&self, inst: &TwoStageInstance) -> Vec<(u32, u32)> {
        self.edges
            .iter()
            .map(|&e| {
                let edge = inst.edges()[e];
                (inst.demands()[edge.demand].id, inst.supplies()[edge.supply].id)
            })
            .collect()
    }

    /// Indicator vector over instance edges.
    pub fn indicator(&self, num_edges: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_edges];
        for &e in &self.edges {
            x[e] = 1.0;
        }
        x
    }
}

/// Tolerance on the degree constraints of a fractional matching.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Fractional matching: one value per instance edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionalMatching {
    pub x: Vec<f64>,
}

impl FractionalMatching {
    pub fn zeros(inst: &TwoStageInstance) -> Self {
        FractionalMatching {
            x: vec![0.0; inst.edges().len()],
        }
    }

    pub fn from_matching(inst: &TwoStageInstance, m: &Matching) -> Self {
        FractionalMatching {
            x: m.indicator(inst.edges().len()),
        }
    }

    pub fn demand_sums(&self, inst: &TwoStageInstance) -> Vec<f64> {
        let mut r = vec![0.0; inst.num_demands()];
        for (e, edge) in inst.edges().iter().enumerate() {
            r[edge.demand] += self.x[e];
        }
        r
    }

    pub fn supply_sums(&self, inst: &TwoStageInstance) -> Vec<f64> {
        let mut c = vec![0.0; inst.num_supplies()];
        for (e, edge) in inst.edges().iter().enumerate() {
            c[edge.supply] += self.x[e];
        }
        c
    }

    /// Checks entry bounds and degree constraints within `tol`.
    pub fn check(&self, inst: &TwoStageInstance, tol: f64) -> Result<()> {
        if self.x.len() != inst.edges().len() {
            return Err(Error::validation(format!(
                "fractional matching has {} entries for {} edges",
                self.x.len(),
                inst.edges().len()
            )));
        }
        if let Some((e, v)) = self
            .x
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= -tol && **v <= 1.0 + tol))
        {
            return Err(Error::validation(format!("edge {e}: value {v} outside [0, 1]")));
        }
        for (i, s) in self.demand_sums(inst).iter().enumerate() {
            if *s > 1.0 + tol {
                return Err(Error::validation(format!(
                    "demand {}: fractional degree {s} exceeds 1",
                    inst.demands()[i].id
                )));
            }
        }
        for (j, s) in self.supply_sums(inst).iter().enumerate() {
            if *s > 1.0 + tol {
                return Err(Error::validation(format!(
                    "supply {}: fractional degree {s} exceeds 1",
                    inst.supplies()[j].id
                )));
            }
        }
        Ok(())
    }
}

/// Convex combination of integral matchings.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingDistribution {
    pub atoms: Vec<(f64, Matching)>,
}

impl MatchingDistribution {
    pub fn point(m: Matching) -> Self {
        MatchingDistribution {
            atoms: vec![(1.0, m)],
        }
    }

    pub fn total_probability(&self) -> f64 {
        self.atoms.iter().map(|a| a.0).sum()
    }

    /// Per-edge marginals `Σ_k λ_k 1[e ∈ M_k]`.
    pub fn marginals(&self, num_edges: usize) -> Vec<f64> {
        let mut x = vec![0.0; num_edges];
        for (p, m) in &self.atoms {
            for &e in m.edges() {
                x[e] += p;
            }
        }
        x
    }

    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random::<f64>() * self.total_probability();
        let mut acc = 0.0;
        for (k, (p, _)) in self.atoms.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.atoms.len() - 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &Matching {
        &self.atoms[self.sample_index(rng)].1
    }
}

/// Edges of the subgraph induced by the masks, as `(demand, supply, edge)`.
fn induced_edges<'a>(
    inst: &'a TwoStageInstance,
    demands: &'a [bool],
    supplies: &'a [bool],
) -> impl Iterator<Item = (usize, usize, usize)> + 'a {
    inst.edges()
        .iter()
        .enumerate()
        .filter(move |(_, e)| demands[e.demand] && supplies[e.supply])
        .map(|(k, e)| (e.demand, e.supply, k))
}

/// Maximum-cardinality matching in `G[demands, supplies]`.
pub fn max_card_matching(inst: &TwoStageInstance, demands: &[bool], supplies: &[bool]) -> Matching {
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); inst.num_demands()];
    let mut adj_edge: Vec<Vec<usize>> = vec![Vec::new(); inst.num_demands()];
    for (d, s, e) in induced_edges(inst, demands, supplies) {
        adj[d].push(s);
        adj_edge[d].push(e);
    }
    let m = hopcroft_karp(inst.num_supplies(), &adj);
    let edges = m
        .iter()
        .enumerate()
        .filter_map(|(d, s)| {
            s.map(|s| {
                let k = adj[d].iter().position(|&x| x == s).expect("matched neighbour");
                adj_edge[d][k]
            })
        })
        .collect();
    Matching::new(edges)
}

/// Maximum supply-weighted matching in `G[demands, supplies]`.
pub fn max_supply_weight_matching(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
) -> (Matching, f64) {
    let w = inst.supply_weights();
    let m = max_supply_weight_matching_with(inst, demands, supplies, &w);
    let value = m.supply_weight(inst);
    (m, value)
}

/// Maximum matching by total weight of matched supplies under caller-given
/// supply weights; supplies with non-positive weight are left out.
///
/// Sets of matchable supplies form a transversal matroid, so adding supplies in
/// order of decreasing weight whenever an augmenting path exists is exact.
pub fn max_supply_weight_matching_with(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
    weights: &[f64],
) -> Matching {
    let mut order: Vec<usize> = (0..inst.num_supplies())
        .filter(|&j| supplies[j] && weights[j] > 0.0)
        .collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut supply_of: Vec<Option<(usize, usize)>> = vec![None; inst.num_demands()];
    let mut seen = vec![usize::MAX; inst.num_demands()];

    // Augments from supply `j`; `stamp` marks demands visited in this search.
    fn augment(
        inst: &TwoStageInstance,
        demands: &[bool],
        j: usize,
        stamp: usize,
        seen: &mut [usize],
        supply_of: &mut [Option<(usize, usize)>],
    ) -> bool {
        for &(i, e) in inst.supply_adj(j) {
            if !demands[i] || seen[i] == stamp {
                continue;
            }
            seen[i] = stamp;
            let free = match supply_of[i] {
                None => true,
                Some((j2, _)) => augment(inst, demands, j2, stamp, seen, supply_of),
            };
            if free {
                supply_of[i] = Some((j, e));
                return true;
            }
        }
        false
    }

    for (stamp, &j) in order.iter().enumerate() {
        augment(inst, demands, j, stamp, &mut seen, &mut supply_of);
    }
    Matching::new(supply_of.iter().flatten().map(|&(_, e)| e).collect())
}

/// Maximum-weight matching in `G[demands, supplies]` for arbitrary per-edge
/// weights; edges with non-positive weight are never used.
pub fn max_weight_matching_by(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
    weight: impl Fn(usize) -> f64,
) -> (Matching, f64) {
    let mut rows: Vec<usize> = Vec::new();
    let mut row_of = vec![usize::MAX; inst.num_demands()];
    let mut cols: Vec<usize> = Vec::new();
    let mut col_of = vec![usize::MAX; inst.num_supplies()];
    let mut cand: Vec<(usize, usize, usize, f64)> = Vec::new();
    for (d, s, e) in induced_edges(inst, demands, supplies) {
        let w = weight(e);
        if w.is_nan() || w <= 0.0 {
            continue;
        }
        if row_of[d] == usize::MAX {
            row_of[d] = rows.len();
            rows.push(d);
        }
        if col_of[s] == usize::MAX {
            col_of[s] = cols.len();
            cols.push(s);
        }
        cand.push((row_of[d], col_of[s], e, w));
    }
    if cand.is_empty() {
        return (Matching::empty(), 0.0);
    }
    // Transpose if needed so that rows <= columns.
    let transpose = rows.len() > cols.len();
    let (n, m) = if transpose {
        (cols.len(), rows.len())
    } else {
        (rows.len(), cols.len())
    };
    let mut w = vec![0.0; n * m];
    let mut edge_at = vec![usize::MAX; n * m];
    for &(r, c, e, wt) in &cand {
        let (a, b) = if transpose { (c, r) } else { (r, c) };
        w[a * m + b] = wt;
        edge_at[a * m + b] = e;
    }
    let assign = max_weight_assignment(n, m, &w);
    let mut edges = Vec::new();
    let mut value = 0.0;
    for (a, &b) in assign.iter().enumerate() {
        let e = edge_at[a * m + b];
        if e != usize::MAX {
            edges.push(e);
            value += w[a * m + b];
        }
    }
    (Matching::new(edges), value)
}

/// Maximum vertex-weighted matching: edge `(i, j)` is worth
/// `demand_weights[i] + supply_weights[j]`.
pub fn max_vertex_weight_matching(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
    demand_weights: &[f64],
    supply_weights: &[f64],
) -> (Matching, f64) {
    max_weight_matching_by(inst, demands, supplies, |e| {
        let edge = inst.edges()[e];
        demand_weights[edge.demand] + supply_weights[edge.supply]
    })
}

/// Maximum edge-weighted matching; requires an edge-weighted instance.
pub fn max_edge_weight_matching(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
) -> Result<(Matching, f64)> {
    if !inst.is_edge_weighted() {
        return Err(Error::config("instance carries no edge weights"));
    }
    Ok(max_weight_matching_by(inst, demands, supplies, |e| inst.edge_weight(e)))
}

/// Maximum matching under the instance's value model.
pub fn max_value_matching(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
) -> (Matching, f64) {
    if inst.is_edge_weighted() {
        max_weight_matching_by(inst, demands, supplies, |e| inst.edge_weight(e))
    } else {
        max_supply_weight_matching(inst, demands, supplies)
    }
}

/// Greedy maximal matching by decreasing edge value, ties by edge index.
/// At least half the maximum value.
pub fn greedy_matching(
    inst: &TwoStageInstance,
    demands: &[bool],
    supplies: &[bool],
) -> (Matching, f64) {
    let mut cand: Vec<(usize, f64)> = induced_edges(inst, demands, supplies)
        .map(|(_, _, e)| (e, inst.edge_value(e)))
        .filter(|&(_, v)| v > 0.0)
        .collect();
    cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut dused = vec![false; inst.num_demands()];
    let mut sused = vec![false; inst.num_supplies()];
    let mut edges = Vec::new();
    let mut value = 0.0;
    for (e, v) in cand {
        let edge = inst.edges()[e];
        if !dused[edge.demand] && !sused[edge.supply] {
            dused[edge.demand] = true;
            sused[edge.supply] = true;
            edges.push(e);
            value += v;
        }
    }
    (Matching::new(edges), value)
}
