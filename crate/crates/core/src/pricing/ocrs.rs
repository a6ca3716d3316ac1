//! Simulate-and-discard rounding of the ex-ante relaxation, and single-stage
//! pricing.

use rand::Rng;

use super::{ensure_pricing, market_efficiency, solve_ear, EarSolution};
use super::{DEFAULT_EAR_MAX_ITER, DEFAULT_EAR_TOL};
use crate::error::{Error, Result};
use crate::instance::{sample_realization, Offer, Realization, TwoStageInstance};
use crate::matching::{max_vertex_weight_matching, Matching};

/// Largest number of acceptance patterns enumerated by [`single_stage_exact`].
pub const SINGLE_STAGE_EXACT_LIMIT: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct OcrsRun {
    pub first: Matching,
    /// Posted price per demand index (`Some` on second-stage demand).
    pub prices: Vec<Option<f64>>,
    pub realization: Realization,
    pub second: Matching,
    pub value: f64,
}

/// Picks an edge of demand `i` with probability `x_e / scale`, or `None` with
/// the leftover mass.
fn pick_edge<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    i: usize,
    scale: f64,
    rng: &mut R,
) -> Option<(usize, usize)> {
    let u: f64 = rng.random::<f64>() * scale;
    let mut acc = 0.0;
    for &(j, e) in inst.demand_adj(i) {
        acc += ear.x.x[e];
        if u < acc {
            return Some((j, e));
        }
    }
    None
}

/// One discard step for demand `i`: proposes `j†`, keeps it with probability
/// `1/(2 − θ_{j†})` when still free, then adds `x_ij` to every `θ_j`.
fn discard_step<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    i: usize,
    proposal: Option<(usize, usize)>,
    theta: &mut [f64],
    taken: &mut [bool],
    rng: &mut R,
) -> Option<usize> {
    let mut chosen = None;
    if let Some((j, e)) = proposal {
        let keep = 1.0 / (2.0 - theta[j].min(1.0));
        if !taken[j] && rng.random::<f64>() < keep {
            taken[j] = true;
            chosen = Some(e);
        }
    }
    for &(j, e) in inst.demand_adj(i) {
        theta[j] += ear.x.x[e];
    }
    chosen
}

/// First stage of the rounding: demands in ascending id order.
pub fn ocrs_first_stage<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    rng: &mut R,
) -> Matching {
    let mut theta = vec![0.0; inst.num_supplies()];
    let mut taken = vec![false; inst.num_supplies()];
    let mut edges = Vec::new();
    for &i in inst.first_stage() {
        let proposal = pick_edge(inst, ear, i, 1.0, rng);
        if let Some(e) = discard_step(inst, ear, i, proposal, &mut theta, &mut taken, rng) {
            edges.push(e);
        }
    }
    Matching::new(edges)
}

fn offer(ear: &EarSolution, i: usize) -> Offer {
    Offer {
        price: ear.prices[i].unwrap_or(0.0),
        quantile: Some(ear.y_demand[i]),
    }
}

/// Matches buyers accepting the posted prices to `free` supplies by maximum
/// vertex-weighted matching (accepted buyer value `E[v | accepted]`, supply `w_j`).
fn match_accepters(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    realization: &Realization,
    free: &[bool],
) -> Matching {
    let nd = inst.num_demands();
    let mut accept = vec![false; nd];
    let mut dw = vec![0.0; nd];
    for &i in inst.second_stage() {
        accept[i] = realization.accepts(i, offer(ear, i));
        dw[i] = ear.accepted_value(inst, i);
    }
    max_vertex_weight_matching(inst, &accept, free, &dw, &inst.supply_weights()).0
}

/// Runs the two-stage policy against a given realization.
pub fn ocrs_run<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    realization: Realization,
    rng: &mut R,
) -> OcrsRun {
    let first = ocrs_first_stage(inst, ear, rng);
    let free: Vec<bool> = first.matched_supplies(inst).iter().map(|&m| !m).collect();
    let second = match_accepters(inst, ear, &realization, &free);
    let value = market_efficiency(inst, &first, &realization, &second);
    OcrsRun {
        first,
        prices: ear.prices.clone(),
        realization,
        second,
        value,
    }
}

/// Samples a realization and runs the two-stage policy on it.
pub fn ocrs_two_stage<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    rng: &mut R,
) -> OcrsRun {
    let realization = sample_realization(inst, rng);
    ocrs_run(inst, ear, realization, rng)
}

/// Monte Carlo statistics of the variant that keeps discarding through the
/// second stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OcrsFrequencies {
    pub runs: usize,
    /// Match frequency per edge index.
    pub edge: Vec<f64>,
    /// Processing order (demand indices): first stage, then second stage.
    pub order: Vec<usize>,
    /// `unmatched[k][j]`: frequency of supply `j` being free after the first
    /// `k` demands of `order` were processed (`k = 0..=order.len()`).
    pub unmatched: Vec<Vec<f64>>,
    /// `θ_j` after each prefix (deterministic).
    pub theta: Vec<Vec<f64>>,
}

/// Runs the full-discarding variant `runs` times. A second-stage buyer takes
/// part only if it accepts its price; it then proposes `j†` with probability
/// `x_ij / y_i`.
pub fn ocrs_full_variant<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    runs: usize,
    rng: &mut R,
) -> OcrsFrequencies {
    let ns = inst.num_supplies();
    let order: Vec<usize> = inst
        .first_stage()
        .iter()
        .chain(inst.second_stage())
        .copied()
        .collect();
    let mut edge = vec![0.0; inst.edges().len()];
    let mut unmatched = vec![vec![0.0; ns]; order.len() + 1];
    let mut theta_hist = Vec::with_capacity(order.len() + 1);
    for r in 0..runs {
        let realization = sample_realization(inst, rng);
        let mut theta = vec![0.0; ns];
        let mut taken = vec![false; ns];
        if r == 0 {
            theta_hist.push(theta.clone());
        }
        for (k, &i) in order.iter().enumerate() {
            for j in 0..ns {
                unmatched[k][j] += f64::from(u8::from(!taken[j]));
            }
            let proposal = if inst.demands()[i].stage == crate::instance::Stage::First {
                pick_edge(inst, ear, i, 1.0, rng)
            } else if realization.accepts(i, offer(ear, i)) && ear.y_demand[i] > 0.0 {
                pick_edge(inst, ear, i, ear.y_demand[i], rng)
            } else {
                None
            };
            if let Some(e) = discard_step(inst, ear, i, proposal, &mut theta, &mut taken, rng) {
                edge[e] += 1.0;
            }
            if r == 0 {
                theta_hist.push(theta.clone());
            }
        }
        for j in 0..ns {
            unmatched[order.len()][j] += f64::from(u8::from(!taken[j]));
        }
    }
    let n = runs.max(1) as f64;
    edge.iter_mut().for_each(|f| *f /= n);
    unmatched.iter_mut().flatten().for_each(|f| *f /= n);
    OcrsFrequencies {
        runs,
        edge,
        order,
        unmatched,
        theta: theta_hist,
    }
}

fn ensure_single_stage(inst: &TwoStageInstance) -> Result<()> {
    ensure_pricing(inst)?;
    if !inst.first_stage().is_empty() {
        return Err(Error::config("single-stage pricing needs an empty first stage"));
    }
    if inst.supplies().iter().any(|s| s.weight != 0.0) {
        return Err(Error::config("single-stage pricing needs zero supply weights"));
    }
    Ok(())
}

/// Realized demand efficiency of single-stage pricing on `realization`.
pub fn single_stage_run(
    inst: &TwoStageInstance,
    ear: &EarSolution,
    realization: &Realization,
) -> Result<f64> {
    ensure_single_stage(inst)?;
    let m = match_accepters(inst, ear, realization, &inst.all_supplies_mask());
    Ok(m.edges()
        .iter()
        .map(|&e| realization.value(inst.edges()[e].demand))
        .sum())
}

/// Solves the relaxation, posts its prices and matches one sampled set of
/// accepters.
pub fn single_stage_price_and_match<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    rng: &mut R,
) -> Result<f64> {
    ensure_single_stage(inst)?;
    let ear = solve_ear(inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER)?;
    single_stage_run(inst, &ear, &sample_realization(inst, rng))
}

/// Exact expected efficiency of single-stage pricing, by enumerating which
/// buyers accept (buyer `i` accepts with probability `y_i`).
pub fn single_stage_exact(inst: &TwoStageInstance, ear: &EarSolution) -> Result<f64> {
    ensure_single_stage(inst)?;
    let second = inst.second_stage();
    Error::size_guard("second-stage demands", second.len(), SINGLE_STAGE_EXACT_LIMIT)?;
    let nd = inst.num_demands();
    let dw: Vec<f64> = (0..nd).map(|i| ear.accepted_value(inst, i)).collect();
    let sw = inst.supply_weights();
    let all = inst.all_supplies_mask();
    let mut total = 0.0;
    for pattern in 0u64..(1 << second.len()) {
        let mut accept = vec![false; nd];
        let mut p = 1.0;
        for (k, &i) in second.iter().enumerate() {
            let y = ear.y_demand[i].clamp(0.0, 1.0);
            if pattern >> k & 1 == 1 {
                accept[i] = true;
                p *= y;
            } else {
                p *= 1.0 - y;
            }
        }
        if p > 0.0 {
            total += p * max_vertex_weight_matching(inst, &accept, &all, &dw, &sw).1;
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::FractionalMatching;
    use crate::pricing::valuation::Valuation;
    use crate::rng::seeded;

    fn solved(inst: &TwoStageInstance) -> EarSolution {
        solve_ear(inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap()
    }

    fn one_edge() -> (TwoStageInstance, EarSolution) {
        let inst = TwoStageInstance::builder()
            .supply(0, 1.0)
            .first_priced(0, Valuation::Uniform { a: 0.0, b: 1.0 }, 0.0)
            .second_valued(1, Valuation::Point { v: 0.0 })
            .edge(0, 0)
            .build()
            .unwrap();
        let ear = solved(&inst);
        (inst, ear)
    }

    #[test]
    fn full_weight_edge_is_matched_half_the_time() {
        let (inst, ear) = one_edge();
        assert!((ear.x.x[0] - 1.0).abs() < 1e-9);
        let mut rng = seeded(5);
        let n = 50_000;
        let hits = (0..n)
            .filter(|_| !ocrs_first_stage(&inst, &ear, &mut rng).is_empty())
            .count() as f64
            / n as f64;
        assert!((hits - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt(), "{hits}");
        let f = ocrs_full_variant(&inst, &ear, n, &mut rng);
        assert!((f.edge[0] - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn zero_value_second_stage_counts_first_stage_only() {
        let (inst, ear) = one_edge();
        let mut rng = seeded(9);
        for _ in 0..200 {
            let run = ocrs_two_stage(&inst, &ear, &mut rng);
            let expect = if run.first.is_empty() { 0.0 } else { 1.5 };
            assert_eq!(run.value, expect);
            assert!(run.second.is_empty() || run.first.is_empty());
        }
    }

    #[test]
    fn zero_relaxation_matches_nothing() {
        let (inst, mut ear) = one_edge();
        ear.x = FractionalMatching::zeros(&inst);
        ear.y_demand = vec![0.0; inst.num_demands()];
        let mut rng = seeded(2);
        let f = ocrs_full_variant(&inst, &ear, 1000, &mut rng);
        assert_eq!(f.edge, vec![0.0]);
    }

    #[test]
    fn single_stage_singleton_equals_relaxation() {
        let inst = TwoStageInstance::builder()
            .supply(0, 0.0)
            .second_valued(0, Valuation::Uniform { a: 0.0, b: 1.0 })
            .edge(0, 0)
            .build()
            .unwrap();
        let ear = solved(&inst);
        assert!((single_stage_exact(&inst, &ear).unwrap() - 0.5).abs() < 1e-9);
        let mut rng = seeded(4);
        let n = 20_000;
        let vals: Vec<f64> = (0..n)
            .map(|_| single_stage_run(&inst, &ear, &sample_realization(&inst, &mut rng)).unwrap())
            .collect();
        let (m, se) = crate::rng::mean_stderr(&vals);
        assert!((m - 0.5).abs() < 4.0 * se);
    }

    #[test]
    fn single_stage_rejects_first_stage_demand() {
        let (inst, _) = one_edge();
        assert!(matches!(
            single_stage_price_and_match(&inst, &mut seeded(0)),
            Err(Error::Config(_))
        ));
    }
}
