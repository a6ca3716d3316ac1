//! The expected weighted rank `f^w(T) = E[max supply-weighted matching(D̃₂, T)]`,
//! the dual transversal matroid of `G[D₁, S]`, and single-swap local search for
//! `max_T f^w(T) + Σ_{j∉T} w_j` over its bases.

use rand::Rng;

use crate::error::{Error, Result};
use crate::instance::{for_each_realization, sample_realization, TwoStageInstance};
use crate::matching::{max_card_matching, max_supply_weight_matching, Matching};
use crate::rng::mean_stderr;

pub const DEFAULT_ORACLE_SAMPLES: usize = 200;
pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_MAX_PASSES: usize = 100;
pub const LIMIT_MAX_PASSES: usize = 5;
/// Largest `|D₂|` accepted by [`exact_fw`].
pub const EXACT_FW_LIMIT: usize = 20;
/// Largest `|S|` accepted by [`enumerate_dual_bases`].
pub const DUAL_BASES_LIMIT: usize = 20;

/// Monte Carlo estimator of `f^w` over a fixed set of sampled realizations,
/// shared by all queries so that comparisons use common random numbers.
#[derive(Debug, Clone)]
pub struct RankOracle<'a> {
    inst: &'a TwoStageInstance,
    samples: Vec<Vec<bool>>,
}

impl<'a> RankOracle<'a> {
    pub fn new<R: Rng + ?Sized>(inst: &'a TwoStageInstance, n_samples: usize, rng: &mut R) -> Self {
        let samples = (0..n_samples.max(1))
            .map(|_| sample_realization(inst, rng).available)
            .collect();
        RankOracle { inst, samples }
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len()
    }

    /// Sample mean and standard error of the rank of supply set `t` (a mask).
    pub fn estimate(&self, t: &[bool]) -> (f64, f64) {
        if !t.iter().any(|&b| b) {
            return (0.0, 0.0);
        }
        let values: Vec<f64> = self
            .samples
            .iter()
            .map(|avail| max_supply_weight_matching(self.inst, avail, t).1)
            .collect();
        mean_stderr(&values)
    }
}

pub fn estimate_fw(oracle: &RankOracle<'_>, t: &[bool]) -> (f64, f64) {
    oracle.estimate(t)
}

/// Exact `f^w(T)` by enumerating second-stage outcomes.
pub fn exact_fw(inst: &TwoStageInstance, t: &[bool]) -> Result<f64> {
    if !t.iter().any(|&b| b) {
        return Ok(0.0);
    }
    let mut relevant = vec![false; inst.num_demands()];
    for &i in inst.second_stage() {
        relevant[i] = inst.demand_adj(i).iter().any(|&(j, _)| t[j]);
    }
    let mut total = 0.0;
    for_each_realization(inst, &relevant, EXACT_FW_LIMIT, |p, avail| {
        total += p * max_supply_weight_matching(inst, avail, t).1;
    })?;
    Ok(total)
}

/// A base of the dual transversal matroid: a supply set whose complement is
/// covered by some maximum matching of `G[D₁, S]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DualBase {
    pub supplies: Vec<usize>,
}

impl DualBase {
    pub fn from_mask(mask: &[bool]) -> Self {
        DualBase {
            supplies: (0..mask.len()).filter(|&j| mask[j]).collect(),
        }
    }

    pub fn mask(&self, ns: usize) -> Vec<bool> {
        let mut m = vec![false; ns];
        for &j in &self.supplies {
            m[j] = true;
        }
        m
    }
}

fn first_stage_rank(inst: &TwoStageInstance, supplies: &[bool]) -> usize {
    max_card_matching(inst, &inst.first_stage_mask(), supplies).len()
}

/// `|S| − ν(G[D₁, S])`, the size of every dual base.
pub fn corank(inst: &TwoStageInstance) -> usize {
    inst.num_supplies() - first_stage_rank(inst, &inst.all_supplies_mask())
}

/// `T` is dual-independent iff removing it keeps the first-stage matching number.
pub fn is_dual_independent(inst: &TwoStageInstance, t: &[bool]) -> bool {
    let rest: Vec<bool> = t.iter().map(|&b| !b).collect();
    first_stage_rank(inst, &rest) == first_stage_rank(inst, &inst.all_supplies_mask())
}

pub fn is_dual_base(inst: &TwoStageInstance, t: &[bool]) -> bool {
    t.iter().filter(|&&b| b).count() == corank(inst) && is_dual_independent(inst, t)
}

/// All dual bases, in lexicographic order of their sorted supply lists.
pub fn enumerate_dual_bases(inst: &TwoStageInstance) -> Result<Vec<DualBase>> {
    let ns = inst.num_supplies();
    Error::size_guard("supplies", ns, DUAL_BASES_LIMIT)?;
    let k = corank(inst);
    let full = first_stage_rank(inst, &inst.all_supplies_mask());
    let mut out = Vec::new();
    let mut pick: Vec<usize> = (0..k).collect();
    loop {
        let mut rest = vec![true; ns];
        for &j in &pick {
            rest[j] = false;
        }
        if first_stage_rank(inst, &rest) == full {
            out.push(DualBase {
                supplies: pick.clone(),
            });
        }
        // Next k-combination of 0..ns.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if pick[i] < ns - k + i {
                pick[i] += 1;
                for t in i + 1..k {
                    pick[t] = pick[t - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `Σ_{j∉T} w_j`.
pub fn complement_weight(inst: &TwoStageInstance, t: &[bool]) -> f64 {
    (0..inst.num_supplies())
        .filter(|&j| !t[j])
        .map(|j| inst.supply_weight(j))
        .sum()
}

/// Result of [`local_search_base`], with the sampled objective of the final base.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSearchOutcome {
    pub base: DualBase,
    pub objective: f64,
    pub stderr: f64,
    pub passes: usize,
    pub swaps: usize,
}

/// Single-swap local search on `f̂^w(T) + Σ_{j∉T} w_j` over dual bases.
///
/// Starts from the complement of a maximum matching of `G[D₁, S]`. A pass
/// scans every swap `T − j + j'` in index order and takes each one that stays a
/// base and improves the sampled objective by more than `epsilon · Σ_j w_j`.
/// Stops after a pass without swaps or after `max_passes` passes.
pub fn local_search_base(
    inst: &TwoStageInstance,
    epsilon: f64,
    oracle: &RankOracle<'_>,
    max_passes: usize,
) -> LocalSearchOutcome {
    let ns = inst.num_supplies();
    let start = max_card_matching(inst, &inst.first_stage_mask(), &inst.all_supplies_mask());
    let matched = start.matched_supplies(inst);
    let mut t: Vec<bool> = matched.iter().map(|&b| !b).collect();
    let threshold = epsilon * inst.total_supply_weight();
    let full = start.len();
    let objective = |t: &[bool]| {
        let (f, se) = oracle.estimate(t);
        (f + complement_weight(inst, t), se)
    };
    let (mut best, mut best_se) = objective(&t);
    let mut passes = 0;
    let mut swaps = 0;
    while passes < max_passes {
        passes += 1;
        let mut improved = false;
        for out in 0..ns {
            if !t[out] {
                continue;
            }
            for inn in 0..ns {
                if t[inn] || !t[out] {
                    continue;
                }
                t[out] = false;
                t[inn] = true;
                let rest: Vec<bool> = t.iter().map(|&b| !b).collect();
                let mut accepted = false;
                if first_stage_rank(inst, &rest) == full {
                    let (v, se) = objective(&t);
                    if v > best + threshold {
                        best = v;
                        best_se = se;
                        accepted = true;
                    }
                }
                if accepted {
                    improved = true;
                    swaps += 1;
                    break;
                }
                t[out] = true;
                t[inn] = false;
            }
        }
        if !improved {
            break;
        }
    }
    LocalSearchOutcome {
        base: DualBase::from_mask(&t),
        objective: best,
        stderr: best_se,
        passes,
        swaps,
    }
}

/// A maximum matching of `G[D₁, S∖T]` that covers every supply outside `T`.
pub fn first_stage_from_base(inst: &TwoStageInstance, base: &DualBase) -> Result<Matching> {
    let t = base.mask(inst.num_supplies());
    let rest: Vec<bool> = t.iter().map(|&b| !b).collect();
    let m = max_card_matching(inst, &inst.first_stage_mask(), &rest);
    let need = rest.iter().filter(|&&b| b).count();
    if m.len() != need {
        return Err(Error::validation(format!(
            "supply set {:?} is not a dual base: only {} of {} complementary supplies can be matched",
            base.supplies,
            m.len(),
            need
        )));
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_random, PiSpec, RandomSpec, WeightSpec};
    use crate::rng::seeded;

    fn k12_with_second(pi: f64) -> TwoStageInstance {
        TwoStageInstance::builder()
            .first(0)
            .second(1, pi)
            .supply(0, 1.0)
            .supply(1, 1.0)
            .edge(0, 0)
            .edge(0, 1)
            .edge(1, 1)
            .build()
            .unwrap()
    }

    fn tiny(seed: u64, ns: usize) -> TwoStageInstance {
        gen_random(
            &RandomSpec {
                n1: 3,
                n2: 3,
                ns,
                edge_prob: 0.5,
                weights: WeightSpec::Uniform { lo: 0.2, hi: 2.0 },
                pi: PiSpec::Uniform { lo: 0.1, hi: 0.9 },
                edge_weights: None,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn rank_of_empty_set_and_single_edge() {
        let inst = TwoStageInstance::builder()
            .second(0, 0.3)
            .supply(0, 2.0)
            .edge(0, 0)
            .build()
            .unwrap();
        let mut rng = seeded(1);
        let oracle = RankOracle::new(&inst, 50, &mut rng);
        assert_eq!(estimate_fw(&oracle, &[false]), (0.0, 0.0));
        assert_eq!(exact_fw(&inst, &[false]).unwrap(), 0.0);
        assert!((exact_fw(&inst, &[true]).unwrap() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn estimate_agrees_with_enumeration() {
        let inst = tiny(3, 4);
        let t = vec![true, true, false, true];
        let mut rng = seeded(2);
        let oracle = RankOracle::new(&inst, 4000, &mut rng);
        let (m, se) = oracle.estimate(&t);
        let exact = exact_fw(&inst, &t).unwrap();
        assert!((m - exact).abs() <= 3.0 * se + 1e-12, "{m} ± {se} vs {exact}");
    }

    #[test]
    fn sure_arrivals_reduce_to_a_matching() {
        let inst = TwoStageInstance::builder()
            .second(0, 1.0)
            .second(1, 1.0)
            .supply(0, 1.0)
            .supply(1, 3.0)
            .edge(0, 0)
            .edge(1, 1)
            .edge(0, 1)
            .build()
            .unwrap();
        assert_eq!(exact_fw(&inst, &[true, true]).unwrap(), 4.0);
    }

    #[test]
    fn dual_bases_of_small_graphs() {
        let perfect = TwoStageInstance::builder()
            .first(0)
            .first(1)
            .supply(0, 1.0)
            .supply(1, 1.0)
            .edge(0, 0)
            .edge(0, 1)
            .edge(1, 0)
            .edge(1, 1)
            .build()
            .unwrap();
        assert_eq!(enumerate_dual_bases(&perfect).unwrap(), vec![DualBase { supplies: vec![] }]);
        let star = k12_with_second(1.0);
        let bases = enumerate_dual_bases(&star).unwrap();
        assert_eq!(bases, vec![DualBase { supplies: vec![0] }, DualBase { supplies: vec![1] }]);
    }

    #[test]
    fn dual_bases_match_definition() {
        for seed in 0..10 {
            let inst = tiny(seed, 6);
            let bases = enumerate_dual_bases(&inst).unwrap();
            // Definition level: T is a base iff some maximum matching of G[D₁,S]
            // covers exactly S∖T. Enumerate all matchings by brute force.
            let full = max_card_matching(&inst, &inst.first_stage_mask(), &inst.all_supplies_mask()).len();
            let mut covered: std::collections::BTreeSet<Vec<usize>> = Default::default();
            let first: Vec<usize> = inst.first_stage().to_vec();
            fn rec(
                inst: &TwoStageInstance,
                first: &[usize],
                k: usize,
                used: &mut Vec<bool>,
                count: usize,
                full: usize,
                out: &mut std::collections::BTreeSet<Vec<usize>>,
            ) {
                if k == first.len() {
                    if count == full {
                        out.insert((0..used.len()).filter(|&j| !used[j]).collect());
                    }
                    return;
                }
                rec(inst, first, k + 1, used, count, full, out);
                for &(j, _) in inst.demand_adj(first[k]) {
                    if !used[j] {
                        used[j] = true;
                        rec(inst, first, k + 1, used, count + 1, full, out);
                        used[j] = false;
                    }
                }
            }
            rec(&inst, &first, 0, &mut vec![false; 6], 0, full, &mut covered);
            let got: std::collections::BTreeSet<Vec<usize>> =
                bases.iter().map(|b| b.supplies.clone()).collect();
            assert_eq!(got, covered, "seed {seed}");
            for b in &bases {
                let m = first_stage_from_base(&inst, b).unwrap();
                let matched = m.matched_supplies(&inst);
                assert!((0..6).all(|j| matched[j] != b.supplies.contains(&j)));
            }
        }
    }

    #[test]
    fn local_search_prefers_the_served_supply() {
        let inst = k12_with_second(1.0);
        let mut rng = seeded(3);
        let oracle = RankOracle::new(&inst, 10, &mut rng);
        let out = local_search_base(&inst, DEFAULT_EPSILON, &oracle, DEFAULT_MAX_PASSES);
        assert_eq!(out.base.supplies, vec![1]);
        assert!((out.objective - 2.0).abs() < 1e-12);
        let m = first_stage_from_base(&inst, &out.base).unwrap();
        assert_eq!(m.pairs(&inst), vec![(0, 0)]);
        assert!(first_stage_from_base(&inst, &DualBase { supplies: vec![] }).is_err());
    }

    #[test]
    fn modular_rank_reaches_the_optimum() {
        // Each supply has a private second-stage demand: f^w is modular.
        let mut b = TwoStageInstance::builder();
        let pis = [0.9, 0.2, 0.6, 0.4];
        let ws = [1.0, 2.0, 0.5, 1.5];
        for j in 0..4u32 {
            b = b.supply(j, ws[j as usize]).second(10 + j, pis[j as usize]).edge(10 + j, j);
        }
        for i in 0..2u32 {
            b = b.first(i);
            for j in 0..4u32 {
                b = b.edge(i, j);
            }
        }
        let inst = b.build().unwrap();
        let mut rng = seeded(4);
        let oracle = RankOracle::new(&inst, 2000, &mut rng);
        let out = local_search_base(&inst, DEFAULT_EPSILON, &oracle, DEFAULT_MAX_PASSES);
        let best = enumerate_dual_bases(&inst)
            .unwrap()
            .into_iter()
            .map(|b| {
                let m = b.mask(4);
                exact_fw(&inst, &m).unwrap() + complement_weight(&inst, &m)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let mask = out.base.mask(4);
        let got = exact_fw(&inst, &mask).unwrap() + complement_weight(&inst, &mask);
        assert!((got - best).abs() < 1e-12, "{got} vs {best}");
    }

    #[test]
    fn rank_is_monotone_and_submodular() {
        for seed in 0..5 {
            let inst = tiny(seed, 5);
            let f: Vec<f64> = (0..32u32)
                .map(|s| {
                    let m: Vec<bool> = (0..5).map(|j| s >> j & 1 == 1).collect();
                    exact_fw(&inst, &m).unwrap()
                })
                .collect();
            for a in 0..32usize {
                for b in 0..32usize {
                    if a & b != a {
                        continue;
                    }
                    for j in 0..5 {
                        if b >> j & 1 == 1 {
                            continue;
                        }
                        let ga = f[a | 1 << j] - f[a];
                        let gb = f[b | 1 << j] - f[b];
                        assert!(ga >= -1e-12);
                        assert!(ga >= gb - 1e-12);
                    }
                }
            }
        }
    }
}
