//! Blended pairwise conditional gradient over the bipartite matching polytope.
//!
//! Iterates are kept as explicit convex combinations of integral matchings.
//! Objectives depend on the vertex coverage vector `v` (demands first, then
//! supplies), so an atom is summarized by the vertices it covers.

use std::collections::HashMap;

use crate::instance::TwoStageInstance;
use crate::matching::{Matching, MatchingDistribution};

/// A convex objective (to be minimized) of the vertex coverage vector.
pub(crate) trait CoverageObjective {
    fn gradient(&self, v: &[f64], out: &mut [f64]);
    /// Minimizer of `γ ↦ value(v + γ d)` over `[0, gmax]`.
    fn line_search(&self, v: &[f64], d: &[f64], gmax: f64) -> f64;
    /// A matching minimizing `Σ_{vertex covered} grad`.
    fn lmo(&self, grad: &[f64]) -> Matching;
    /// A possibly smaller valid gap at `v`, for objectives with kinks where the
    /// reported gradient is only one of several subgradients.
    fn certify(&self, _v: &[f64], gap: f64) -> f64 {
        gap
    }
}

/// How often (in iterations) a stalled gap is re-certified.
const CERTIFY_EVERY: usize = 200;

pub(crate) struct CgOutcome {
    pub atoms: Vec<(f64, Matching)>,
    pub coverage: Vec<f64>,
    pub gap: f64,
    pub iterations: usize,
    pub converged: bool,
}

struct Atom {
    weight: f64,
    matching: Matching,
    vertices: Vec<usize>,
}

fn covered(inst: &TwoStageInstance, m: &Matching) -> Vec<usize> {
    let nd = inst.num_demands();
    let mut out = Vec::with_capacity(2 * m.len());
    for &e in m.edges() {
        let edge = inst.edges()[e];
        out.push(edge.demand);
        out.push(nd + edge.supply);
    }
    out
}

fn score(grad: &[f64], vertices: &[usize]) -> f64 {
    vertices.iter().map(|&k| grad[k]).sum()
}

pub(crate) fn minimize<O: CoverageObjective>(
    inst: &TwoStageInstance,
    obj: &O,
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    minimize_from(inst, obj, &[(1.0, Matching::empty())], tol, max_iter)
}

/// As [`minimize`], starting from the convex combination `start`.
pub(crate) fn minimize_from<O: CoverageObjective>(
    inst: &TwoStageInstance,
    obj: &O,
    start: &[(f64, Matching)],
    tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = inst.num_demands() + inst.num_supplies();
    let mut atoms: Vec<Atom> = Vec::new();
    let mut index: HashMap<Matching, usize> = HashMap::new();
    for (w, m) in start.iter().filter(|(w, _)| *w > 0.0) {
        match index.get(m) {
            Some(&k) => atoms[k].weight += w,
            None => {
                index.insert(m.clone(), atoms.len());
                atoms.push(Atom {
                    weight: *w,
                    matching: m.clone(),
                    vertices: covered(inst, m),
                });
            }
        }
    }
    if atoms.is_empty() {
        index.insert(Matching::empty(), 0);
        atoms.push(Atom {
            weight: 1.0,
            matching: Matching::empty(),
            vertices: Vec::new(),
        });
    }
    let mut v = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let mut stalled = 0usize;

    while iterations < max_iter {
        iterations += 1;
        v.iter_mut().for_each(|x| *x = 0.0);
        for a in &atoms {
            for &k in &a.vertices {
                v[k] += a.weight;
            }
        }
        obj.gradient(&v, &mut grad);
        let fw = obj.lmo(&grad);
        let fw_vertices = covered(inst, &fw);
        let gv: f64 = v.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let fw_score = score(&grad, &fw_vertices);
        gap = (gv - fw_score).max(0.0);
        if gap > tol && iterations % CERTIFY_EVERY == 0 {
            gap = gap.min(obj.certify(&v, gap));
        }
        if gap <= tol {
            converged = true;
            break;
        }
        let scores: Vec<f64> = atoms.iter().map(|a| score(&grad, &a.vertices)).collect();
        let away = (0..atoms.len())
            .max_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .expect("active set is never empty");
        let local = (0..atoms.len())
            .min_by(|&a, &b| scores[a].total_cmp(&scores[b]))
            .expect("active set is never empty");
        let local_gap = scores[away] - scores[local];

        d.iter_mut().for_each(|x| *x = 0.0);
        let mut step = 0.0;
        if local_gap >= gap && away != local {
            // Move mass from the worst active atom to the best active atom.
            for &k in &atoms[local].vertices {
                d[k] += 1.0;
            }
            for &k in &atoms[away].vertices {
                d[k] -= 1.0;
            }
            let gmax = atoms[away].weight;
            let gamma = obj.line_search(&v, &d, gmax);
            step = gamma;
            if gamma >= gmax {
                atoms[local].weight += atoms[away].weight;
                atoms[away].weight = 0.0;
            } else {
                atoms[local].weight += gamma;
                atoms[away].weight -= gamma;
            }
        }
        if step <= 0.0 {
            // Plain Frank-Wolfe step towards the oracle matching; also the
            // fallback when a pairwise step cannot make progress at a kink.
            for (k, x) in v.iter().enumerate() {
                d[k] = -x;
            }
            for &k in &fw_vertices {
                d[k] += 1.0;
            }
            let gamma = obj.line_search(&v, &d, 1.0);
            step = gamma;
            if gamma > 0.0 {
                for a in atoms.iter_mut() {
                    a.weight *= 1.0 - gamma;
                }
                match index.get(&fw) {
                    Some(&k) => atoms[k].weight += gamma,
                    None => {
                        index.insert(fw.clone(), atoms.len());
                        atoms.push(Atom {
                            weight: gamma,
                            matching: fw,
                            vertices: fw_vertices,
                        });
                    }
                }
            }
        }
        if step <= 0.0 {
            stalled += 1;
            if stalled > 50 {
                break;
            }
        } else {
            stalled = 0;
        }
        if atoms.iter().any(|a| a.weight <= 0.0) {
            atoms.retain(|a| a.weight > 0.0);
            index.clear();
            for (k, a) in atoms.iter().enumerate() {
                index.insert(a.matching.clone(), k);
            }
        }
    }

    let total: f64 = atoms.iter().map(|a| a.weight).sum();
    let atoms: Vec<(f64, Matching)> = atoms
        .into_iter()
        .map(|a| (a.weight / total, a.matching))
        .collect();
    let mut coverage = vec![0.0; n];
    for (w, m) in &atoms {
        for k in covered(inst, m) {
            coverage[k] += w;
        }
    }
    if !converged {
        gap = gap.min(obj.certify(&coverage, gap));
        converged = gap <= tol;
    }
    CgOutcome {
        atoms,
        coverage,
        gap,
        iterations,
        converged,
    }
}

impl CgOutcome {
    pub fn distribution(&self) -> MatchingDistribution {
        MatchingDistribution {
            atoms: self.atoms.clone(),
        }
    }

    /// Per-edge marginals of the final combination.
    pub fn edge_values(&self, num_edges: usize) -> Vec<f64> {
        self.distribution().marginals(num_edges)
    }
}

/// Safeguarded Newton iteration for the root of an increasing `φ'` on `[0, gmax]`.
pub(crate) fn newton_bisect(
    gmax: f64,
    dphi: impl Fn(f64) -> f64,
    ddphi: impl Fn(f64) -> f64,
) -> f64 {
    if dphi(0.0) >= 0.0 {
        return 0.0;
    }
    if dphi(gmax) <= 0.0 {
        return gmax;
    }
    let (mut lo, mut hi) = (0.0, gmax);
    let mut g = 0.5 * gmax;
    for _ in 0..200 {
        let f = dphi(g);
        if f > 0.0 {
            hi = g;
        } else {
            lo = g;
        }
        let h = ddphi(g);
        let mut next = if h > 0.0 { g - f / h } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - g).abs() <= 1e-17 * gmax.max(1.0) || hi - lo <= 1e-16 * gmax {
            return next;
        }
        g = next;
    }
    g
}
