//! Decomposition of a fractional matching into a lottery over integral matchings.

use std::collections::HashMap;

use rand::Rng;

use super::{hopcroft_karp, FractionalMatching, Matching, MatchingDistribution, FEASIBILITY_TOL};
use crate::error::{Error, Result};
use crate::instance::TwoStageInstance;

pub const DEFAULT_BVN_TOL: f64 = 1e-9;

/// Writes `x` as `Σ_k λ_k 1[M_k]`, with an empty-matching atom carrying any
/// mass left over when `x` is not perfect.
///
/// Each round works at the current residual scale `t` (the largest residual
/// degree). A perfect matching of the padded matrix
/// `[[X, diag(t − r)], [diag(t − c), Xᵀ]]` restricted to `X` is a matching that
/// covers every vertex whose residual degree equals `t`; it is peeled off with
/// the largest weight that keeps all degrees at most `t`. Every round zeroes an
/// entry or makes a vertex tight, so there are at most `|E| + |V|` rounds.
pub fn bvn_decompose(
    inst: &TwoStageInstance,
    frac: &FractionalMatching,
    tol: f64,
) -> Result<MatchingDistribution> {
    frac.check(inst, tol.max(FEASIBILITY_TOL))?;
    let edges = inst.edges();
    let mut x: Vec<f64> = frac
        .x
        .iter()
        .map(|&v| if v < tol { 0.0 } else { v.min(1.0) })
        .collect();
    let nd = inst.num_demands();
    let ns = inst.num_supplies();
    let mut atoms: Vec<(f64, Matching)> = Vec::new();
    let mut index: HashMap<Matching, usize> = HashMap::new();
    let mut total = 0.0;

    loop {
        let mut r = vec![0.0; nd];
        let mut c = vec![0.0; ns];
        let support: Vec<usize> = (0..x.len()).filter(|&e| x[e] > 0.0).collect();
        if support.is_empty() {
            break;
        }
        for &e in &support {
            r[edges[e].demand] += x[e];
            c[edges[e].supply] += x[e];
        }
        let t = r.iter().chain(c.iter()).cloned().fold(0.0, f64::max);
        if t <= tol {
            break;
        }
        // Left: rows 0..nd, column copies nd..nd+ns. Right: columns 0..ns, row copies ns..ns+nd.
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nd + ns];
        let mut edge_of: HashMap<(usize, usize), usize> = HashMap::new();
        for &e in &support {
            let (i, j) = (edges[e].demand, edges[e].supply);
            adj[i].push(j);
            edge_of.insert((i, j), e);
            adj[nd + j].push(ns + i);
        }
        let tight_r: Vec<bool> = r.iter().map(|&v| v >= t - tol).collect();
        let tight_c: Vec<bool> = c.iter().map(|&v| v >= t - tol).collect();
        for i in 0..nd {
            if !tight_r[i] {
                adj[i].push(ns + i);
            }
        }
        for j in 0..ns {
            if !tight_c[j] {
                adj[nd + j].push(j);
            }
        }
        let m = hopcroft_karp(ns + nd, &adj);
        if m.iter().any(|v| v.is_none()) {
            return Err(Error::validation(
                "fractional matching could not be decomposed (numerically infeasible input)",
            ));
        }
        let mut atom = Vec::new();
        let mut covered_r = vec![false; nd];
        let mut covered_c = vec![false; ns];
        for i in 0..nd {
            let v = m[i].expect("perfect");
            if v < ns {
                atom.push(edge_of[&(i, v)]);
                covered_r[i] = true;
                covered_c[v] = true;
            }
        }
        let mut delta = atom.iter().map(|&e| x[e]).fold(f64::INFINITY, f64::min);
        for i in 0..nd {
            if !covered_r[i] {
                delta = delta.min(t - r[i]);
            }
        }
        for j in 0..ns {
            if !covered_c[j] {
                delta = delta.min(t - c[j]);
            }
        }
        if delta.is_nan() || delta <= 0.0 || atom.is_empty() {
            return Err(Error::validation("fractional matching decomposition stalled"));
        }
        for &e in &atom {
            x[e] -= delta;
            if x[e] < tol {
                x[e] = 0.0;
            }
        }
        total += delta;
        let matching = Matching::new(atom);
        match index.get(&matching) {
            Some(&k) => atoms[k].0 += delta,
            None => {
                index.insert(matching.clone(), atoms.len());
                atoms.push((delta, matching));
            }
        }
    }
    if total > 1.0 {
        for a in atoms.iter_mut() {
            a.0 /= total;
        }
    } else if 1.0 - total > 0.0 {
        let rest = 1.0 - total;
        match index.get(&Matching::empty()) {
            Some(&k) => atoms[k].0 += rest,
            None => atoms.push((rest, Matching::empty())),
        }
    }
    Ok(MatchingDistribution { atoms })
}

/// Draws one integral matching with `P[e ∈ M] = x_e`.
pub fn sample_matching<R: Rng + ?Sized>(
    inst: &TwoStageInstance,
    frac: &FractionalMatching,
    rng: &mut R,
) -> Result<Matching> {
    let dist = bvn_decompose(inst, frac, DEFAULT_BVN_TOL)?;
    Ok(dist.sample(rng).clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{gen_random, PiSpec, RandomSpec, WeightSpec};
    use crate::matching::max_card_matching;
    use crate::rng::seeded;
    use proptest::prelude::*;

    fn star() -> TwoStageInstance {
        TwoStageInstance::builder()
            .first(1)
            .supply(0, 1.0)
            .supply(1, 1.0)
            .edge(1, 0)
            .edge(1, 1)
            .build()
            .unwrap()
    }

    #[test]
    fn integral_input_is_a_single_atom() {
        let inst = star();
        let frac = FractionalMatching { x: vec![1.0, 0.0] };
        let d = bvn_decompose(&inst, &frac, 1e-9).unwrap();
        assert_eq!(d.atoms.len(), 1);
        assert_eq!(d.atoms[0].0, 1.0);
        assert_eq!(d.atoms[0].1.edges(), &[0]);
    }

    #[test]
    fn half_half_split() {
        let inst = star();
        let frac = FractionalMatching { x: vec![0.5, 0.5] };
        let d = bvn_decompose(&inst, &frac, 1e-9).unwrap();
        assert_eq!(d.atoms.len(), 2);
        assert!(d.atoms.iter().all(|a| (a.0 - 0.5).abs() < 1e-15));
        let mut rng = seeded(5);
        let n = 20_000;
        let hits = (0..n)
            .filter(|_| sample_matching(&inst, &frac, &mut rng).unwrap().contains(0))
            .count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.011);
    }

    #[test]
    fn leftover_mass_goes_to_the_empty_matching() {
        let inst = star();
        let frac = FractionalMatching { x: vec![0.25, 0.25] };
        let d = bvn_decompose(&inst, &frac, 1e-9).unwrap();
        let empty = d.atoms.iter().find(|a| a.1.is_empty()).unwrap();
        assert!((empty.0 - 0.5).abs() < 1e-12);
        assert!((d.total_probability() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_input_is_rejected() {
        let inst = star();
        let frac = FractionalMatching { x: vec![0.7, 0.7] };
        assert!(matches!(bvn_decompose(&inst, &frac, 1e-9), Err(Error::Validation(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Mixtures of random integral matchings reconstruct exactly.
        #[test]
        fn reconstruction(seed in 0u64..10_000, k in 1usize..6, n in 2usize..7) {
            let inst = gen_random(&RandomSpec {
                n1: n, n2: 0, ns: n, edge_prob: 0.6,
                weights: WeightSpec::Unit, pi: PiSpec::Const { value: 1.0 }, edge_weights: None,
            }, seed).unwrap();
            let mut rng = seeded(seed);
            let mut x = vec![0.0; inst.edges().len()];
            let mut weights: Vec<f64> = (0..k).map(|_| rand::Rng::random::<f64>(&mut rng) + 0.05).collect();
            let s: f64 = weights.iter().sum::<f64>() * if seed % 2 == 0 { 1.0 } else { 1.3 };
            weights.iter_mut().for_each(|w| *w /= s);
            for w in &weights {
                let mut dmask = vec![true; inst.num_demands()];
                for d in dmask.iter_mut() { *d = rand::Rng::random::<f64>(&mut rng) < 0.8; }
                let m = max_card_matching(&inst, &dmask, &vec![true; inst.num_supplies()]);
                for &e in m.edges() { x[e] += w; }
            }
            let frac = FractionalMatching { x: x.clone() };
            let d = bvn_decompose(&inst, &frac, 1e-9).unwrap();
            prop_assert!((d.total_probability() - 1.0).abs() < 1e-9);
            prop_assert!(d.atoms.len() <= inst.edges().len() + inst.num_demands() + inst.num_supplies() + 1);
            prop_assert!(d.atoms.iter().all(|a| a.0 > 0.0 && a.1.is_valid(&inst)));
            let back = d.marginals(x.len());
            for (a, b) in back.iter().zip(&x) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }
    }
}
