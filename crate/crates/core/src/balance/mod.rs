//! The balanced-utilization program
//!
//! ```text
//! minimize   Σ_j (1/w_j) g(w_j (1 − y_j)),   y_j = Σ_i x_ij
//! subject to x in the matching polytope of G[D₁, S]
//! ```
//!
//! solved by conditional gradient, and the level structure of its optimum.

mod decomposition;

pub use decomposition::{
    check_g_invariance, decompose, verify_decomposition, Decomposition, Level, PropertyCheck,
    VerificationReport, DEFAULT_GROUP_TOL,
};

use serde::{Deserialize, Serialize};

use crate::condgrad::{self, newton_bisect, CoverageObjective};
use crate::instance::TwoStageInstance;
use crate::matching::{max_supply_weight_matching_with, FractionalMatching, Matching};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexG {
    /// `g(x) = x² / 2`
    Quadratic,
    /// `g(x) = eˣ`
    Exponential,
}

impl ConvexG {
    pub fn value(self, x: f64) -> f64 {
        match self {
            ConvexG::Quadratic => 0.5 * x * x,
            ConvexG::Exponential => x.exp(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ConvexG::Quadratic => x,
            ConvexG::Exponential => x.exp(),
        }
    }
}

impl std::str::FromStr for ConvexG {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "quad" | "quadratic" => Ok(ConvexG::Quadratic),
            "exp" | "exponential" => Ok(ConvexG::Exponential),
            _ => Err(crate::Error::config(format!("unknown g `{s}` (expected quad or exp)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceSolution {
    /// Values on all instance edges; zero off the first stage.
    pub x: FractionalMatching,
    /// Utilization `y_j` per supply index.
    pub y: Vec<f64>,
    /// `r_j = w_j (1 − y_j)` per supply index.
    pub residual: Vec<f64>,
    pub objective: f64,
    pub solver_gap: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl BalanceSolution {
    /// `min_j (1 − y_j + y_j²)` over positive-weight supplies, 1 when there are none.
    pub fn refined_bound(&self, inst: &TwoStageInstance) -> f64 {
        (0..self.y.len())
            .filter(|&j| inst.supply_weight(j) > 0.0)
            .map(|j| {
                let y = self.y[j].clamp(0.0, 1.0);
                1.0 - y + y * y
            })
            .fold(1.0, f64::min)
    }
}

struct BalanceObjective<'a> {
    inst: &'a TwoStageInstance,
    g: ConvexG,
    nd: usize,
    weights: Vec<f64>,
    first: Vec<bool>,
    active: Vec<bool>,
    /// Exponential objectives are evaluated as `e^{r − shift}` to stay finite.
    shift: f64,
}

impl BalanceObjective<'_> {
    fn residual(&self, v: &[f64], j: usize) -> f64 {
        self.weights[j] * (1.0 - v[self.nd + j])
    }

    fn gprime(&self, r: f64) -> f64 {
        match self.g {
            ConvexG::Quadratic => r,
            ConvexG::Exponential => (r - self.shift).exp(),
        }
    }
}

impl CoverageObjective for BalanceObjective<'_> {
    fn gradient(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..self.weights.len() {
            if self.active[j] {
                out[self.nd + j] = -self.gprime(self.residual(v, j));
            }
        }
    }

    fn line_search(&self, v: &[f64], d: &[f64], gmax: f64) -> f64 {
        let nd = self.nd;
        match self.g {
            ConvexG::Quadratic => {
                let mut num = 0.0;
                let mut den = 0.0;
                for j in 0..self.weights.len() {
                    if self.active[j] && d[nd + j] != 0.0 {
                        num += self.residual(v, j) * d[nd + j];
                        den += self.weights[j] * d[nd + j] * d[nd + j];
                    }
                }
                if den <= 0.0 {
                    return if num > 0.0 { gmax } else { 0.0 };
                }
                (num / den).clamp(0.0, gmax)
            }
            ConvexG::Exponential => {
                let idx: Vec<usize> = (0..self.weights.len())
                    .filter(|&j| self.active[j] && d[nd + j] != 0.0)
                    .collect();
                let dphi = |g: f64| -> f64 {
                    idx.iter()
                        .map(|&j| {
                            let r = self.weights[j] * (1.0 - v[nd + j] - g * d[nd + j]);
                            -d[nd + j] * (r - self.shift).exp()
                        })
                        .sum()
                };
                let ddphi = |g: f64| -> f64 {
                    idx.iter()
                        .map(|&j| {
                            let r = self.weights[j] * (1.0 - v[nd + j] - g * d[nd + j]);
                            self.weights[j] * d[nd + j] * d[nd + j] * (r - self.shift).exp()
                        })
                        .sum()
                };
                newton_bisect(gmax, dphi, ddphi)
            }
        }
    }

    fn lmo(&self, grad: &[f64]) -> Matching {
        let w: Vec<f64> = (0..self.weights.len()).map(|j| -grad[self.nd + j]).collect();
        max_supply_weight_matching_with(self.inst, &self.first, &self.active, &w)
    }
}

/// Solves the balanced-utilization program on `G[D₁, S]`.
///
/// Zero-weight supplies are left out of the program and stay unused. The
/// returned solution is the last iterate; `converged` tells whether the
/// Frank-Wolfe gap reached `tol` within `max_iter` iterations.
pub fn solve_balance(
    inst: &TwoStageInstance,
    g: ConvexG,
    tol: f64,
    max_iter: usize,
) -> BalanceSolution {
    let weights = inst.supply_weights();
    let active: Vec<bool> = weights.iter().map(|&w| w > 0.0).collect();
    let max_w = weights.iter().cloned().fold(0.0, f64::max);
    let obj = BalanceObjective {
        inst,
        g,
        nd: inst.num_demands(),
        weights: weights.clone(),
        first: inst.first_stage_mask(),
        active: active.clone(),
        shift: if g == ConvexG::Exponential { (max_w - 50.0).max(0.0) } else { 0.0 },
    };
    let out = condgrad::minimize(inst, &obj, tol, max_iter);
    let nd = inst.num_demands();
    let y: Vec<f64> = (0..weights.len()).map(|j| out.coverage[nd + j]).collect();
    let residual: Vec<f64> = (0..weights.len())
        .map(|j| weights[j] * (1.0 - y[j]))
        .collect();
    let objective = (0..weights.len())
        .filter(|&j| active[j])
        .map(|j| g.value(residual[j]) / weights[j])
        .sum();
    let scale = if g == ConvexG::Exponential { obj.shift.exp() } else { 1.0 };
    BalanceSolution {
        x: FractionalMatching {
            x: out.edge_values(inst.edges().len()),
        },
        y,
        residual,
        objective,
        solver_gap: out.gap * scale,
        converged: out.converged,
        iterations: out.iterations,
    }
}
