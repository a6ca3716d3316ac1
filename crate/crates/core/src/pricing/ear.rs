//! The ex-ante relaxation
//!
//! ```text
//! maximize  Σ_{i∈D₁} ŵ_i y_i + Σ_{i∈D₂} ∫₀^{y_i} T_i(q) dq + Σ_j w_j y_j
//! ```
//!
//! over the matching polytope of the whole graph, solved by conditional gradient.

use serde::{Deserialize, Serialize};

use super::valuation::Q_MIN;
use super::ensure_pricing;
use crate::condgrad::{self, CoverageObjective};
use crate::error::Result;
use crate::instance::{Stage, TwoStageInstance};
use crate::matching::{max_weight_matching_by, FractionalMatching, Matching};

pub const DEFAULT_EAR_TOL: f64 = 1e-9;
pub const DEFAULT_EAR_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarSolution {
    pub x: FractionalMatching,
    /// Marginal per demand index.
    pub y_demand: Vec<f64>,
    /// Marginal per supply index.
    pub y_supply: Vec<f64>,
    /// Posted price per demand index, `Some` for second-stage demand:
    /// `T_i(max(y_i, q_min))`.
    pub prices: Vec<Option<f64>>,
    pub objective: f64,
    pub solver_gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl EarSolution {
    /// Expected value of an accepting buyer at demand `i`, `∫₀^{y} T / y`.
    pub fn accepted_value(&self, inst: &TwoStageInstance, i: usize) -> f64 {
        match &inst.demands()[i].valuation {
            Some(v) => v.mean_at_quantile(self.y_demand[i]),
            None => 0.0,
        }
    }
}

struct EarObjective<'a> {
    inst: &'a TwoStageInstance,
    /// Linear coefficient for first-stage demand and supplies (by coverage index).
    linear: Vec<f64>,
    nd: usize,
    /// Width of the window the thresholds are averaged over; 0 for the exact objective.
    delta: f64,
}

/// Smoothing windows, widest first, before the exact objective takes over.
const SMOOTHING: [f64; 6] = [1e-2, 1e-4, 1e-6, 1e-8, 1e-10, 1e-12];
const SMOOTHING_ITER: usize = 500;

impl EarObjective<'_> {
    fn slope(&self, k: usize, y: f64) -> f64 {
        if k < self.nd && self.inst.demands()[k].stage == Stage::Second {
            match &self.inst.demands()[k].valuation {
                Some(v) if self.delta > 0.0 => v.smoothed_threshold(y, 0.5 * self.delta),
                Some(v) => v.threshold_clamped(y.max(Q_MIN)),
                None => 0.0,
            }
        } else {
            self.linear[k]
        }
    }

    fn value(&self, v: &[f64]) -> f64 {
        (0..v.len())
            .map(|k| {
                if k < self.nd && self.inst.demands()[k].stage == Stage::Second {
                    self.inst.demands()[k]
                        .valuation
                        .as_ref()
                        .map_or(0.0, |val| val.integral_threshold(v[k]))
                } else {
                    self.linear[k] * v[k]
                }
            })
            .sum()
    }
}

impl CoverageObjective for EarObjective<'_> {
    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        for k in 0..v.len() {
            out[k] = -self.slope(k, v[k]);
        }
    }

    fn line_search(&self, v: &[f64], d: &[f64], gmax: f64) -> f64 {
        let idx: Vec<usize> = (0..d.len()).filter(|&k| d[k] != 0.0).collect();
        // Derivative of the (maximized) objective along d; non-increasing in γ.
        let slope = |g: f64| -> f64 {
            idx.iter()
                .map(|&k| self.slope(k, (v[k] + g * d[k]).clamp(0.0, 1.0)) * d[k])
                .sum()
        };
        let f = |g: f64| {
            let w: Vec<f64> = v.iter().zip(d).map(|(a, b)| a + g * b).collect();
            self.value(&w)
        };
        if slope(0.0) <= 0.0 {
            return 0.0;
        }
        let smooth = self.delta > 0.0;
        let step = if slope(gmax) >= 0.0 {
            gmax
        } else {
            let (mut lo, mut hi) = (0.0, gmax);
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // Settle on the better endpoint of the bracket (slopes may jump).
            if smooth || f(hi) >= f(lo) {
                hi
            } else {
                lo
            }
        };
        // At a kink the slope at 0 can promise an ascent that is not there.
        if smooth || f(step) > f(0.0) {
            step
        } else {
            0.0
        }
    }

    /// At a kink of `∫T` the slope may be anything between the right and left
    /// limits of `T`; searches that box for the supergradient with the smallest
    /// gap (projected subgradient steps on a convex piecewise-linear function).
    fn certify(&self, v: &[f64], gap: f64) -> f64 {
        const KINK: f64 = 1e-9;
        if self.delta > 0.0 {
            return gap;
        }
        let n = v.len();
        let mut g: Vec<f64> = (0..n).map(|k| self.slope(k, v[k])).collect();
        let mut lo = g.clone();
        let mut hi = g.clone();
        let mut kinks = Vec::new();
        for k in 0..self.nd {
            let d = &self.inst.demands()[k];
            if let (Stage::Second, Some(val)) = (d.stage, &d.valuation) {
                let left = val.threshold_clamped((v[k] - KINK).max(Q_MIN));
                let right = val.threshold_clamped((v[k] + KINK).min(1.0));
                if left > right {
                    lo[k] = right;
                    hi[k] = left;
                    kinks.push(k);
                }
            }
        }
        if kinks.is_empty() {
            return gap;
        }
        let eval = |g: &[f64]| -> (f64, Vec<f64>) {
            let m = self.lmo(&g.iter().map(|x| -x).collect::<Vec<_>>());
            let mut s = vec![0.0; n];
            for &e in m.edges() {
                let edge = self.inst.edges()[e];
                s[edge.demand] = 1.0;
                s[self.nd + edge.supply] = 1.0;
            }
            let val: f64 = (0..n).map(|k| g[k] * (s[k] - v[k])).sum();
            (val.max(0.0), s)
        };
        let (mut best, mut s) = eval(&g);
        let mut best_g = g.clone();
        let mut scale = 1.0;
        for _ in 0..300 {
            let norm2: f64 = kinks.iter().map(|&k| (s[k] - v[k]).powi(2)).sum();
            if best <= 0.0 || norm2 == 0.0 || scale < 1e-12 {
                break;
            }
            let t = scale * best / norm2;
            for &k in &kinks {
                g[k] = (best_g[k] - t * (s[k] - v[k])).clamp(lo[k], hi[k]);
            }
            let (val, s_new) = eval(&g);
            if val < best {
                best = val;
                best_g.copy_from_slice(&g);
                s = s_new;
            } else {
                scale *= 0.5;
            }
        }
        best.min(gap)
    }

    fn lmo(&self, grad: &[f64]) -> Matching {
        let nd = self.nd;
        let all_d = vec![true; nd];
        let all_s = self.inst.all_supplies_mask();
        max_weight_matching_by(self.inst, &all_d, &all_s, |e| {
            let edge = self.inst.edges()[e];
            -grad[edge.demand] - grad[nd + edge.supply]
        })
        .0
    }
}

/// Solves the ex-ante relaxation of a pricing instance.
pub fn solve_ear(inst: &TwoStageInstance, tol: f64, max_iter: usize) -> Result<EarSolution> {
    ensure_pricing(inst)?;
    let nd = inst.num_demands();
    let mut linear = vec![0.0; nd + inst.num_supplies()];
    for &i in inst.first_stage() {
        linear[i] = inst.first_stage_value(i);
    }
    for j in 0..inst.num_supplies() {
        linear[nd + j] = inst.supply_weight(j);
    }
    let mut obj = EarObjective {
        inst,
        linear,
        nd,
        delta: 0.0,
    };
    // Atoms in the valuations put kinks into the objective, where a single
    // supergradient can leave the solver stuck; solve a sequence of smoothed
    // problems first and finish on the exact one.
    let has_atoms = inst.second_stage().iter().any(|&i| {
        inst.demands()[i]
            .valuation
            .as_ref()
            .is_some_and(|v| v.has_atoms())
    });
    let mut start = vec![(1.0, Matching::empty())];
    let mut used = 0;
    if has_atoms {
        for delta in SMOOTHING {
            obj.delta = delta;
            let stage = condgrad::minimize_from(inst, &obj, &start, tol, SMOOTHING_ITER.min(max_iter));
            used += stage.iterations;
            start = stage.atoms;
        }
        obj.delta = 0.0;
    }
    let mut out = condgrad::minimize_from(inst, &obj, &start, tol, max_iter.saturating_sub(used).max(1));
    out.iterations += used;
    let y_demand: Vec<f64> = out.coverage[..nd].to_vec();
    let y_supply: Vec<f64> = out.coverage[nd..].to_vec();
    let prices = (0..nd)
        .map(|i| {
            let d = &inst.demands()[i];
            match (d.stage, &d.valuation) {
                (Stage::Second, Some(v)) => Some(v.threshold_clamped(y_demand[i])),
                _ => None,
            }
        })
        .collect();
    Ok(EarSolution {
        x: FractionalMatching {
            x: out.edge_values(inst.edges().len()),
        },
        objective: obj.value(&out.coverage),
        y_demand,
        y_supply,
        prices,
        solver_gap: out.gap,
        converged: out.converged,
        iterations: out.iterations,
    })
}
