//! Level structure of a balanced-utilization optimum.
//!
//! Saturated supplies and the demand that fills them form level 0. The rest of
//! the support graph splits into levels of equal residual `c`, with demand in a
//! level fully matched and no edge from a lower level to a higher one.

use serde::{Deserialize, Serialize};

use super::{solve_balance, BalanceSolution, ConvexG, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::instance::TwoStageInstance;

pub const DEFAULT_GROUP_TOL: f64 = 1e-5;

/// Edges carrying less than this are treated as outside the support.
const SUPPORT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub c: f64,
    pub demands: Vec<usize>,
    pub supplies: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub level0_demands: Vec<usize>,
    pub level0_supplies: Vec<usize>,
    /// Sorted by increasing `c`. Zero-weight supplies, if any, form a first
    /// level with `c = 0` and no demand.
    pub levels: Vec<Level>,
}

/// Closed-form level constant `(|S| − |D|) / Σ_{j∈S} 1/w_j`.
pub fn closed_form_c(inst: &TwoStageInstance, level: &Level) -> f64 {
    let inv: f64 = level.supplies.iter().map(|&j| 1.0 / inst.supply_weight(j)).sum();
    (level.supplies.len() as f64 - level.demands.len() as f64) / inv
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, a: usize) -> usize {
        let mut r = a;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut a = a;
        while self.0[a] != r {
            let next = self.0[a];
            self.0[a] = r;
            a = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

pub fn decompose(inst: &TwoStageInstance, sol: &BalanceSolution, group_tol: f64) -> Decomposition {
    let nd = inst.num_demands();
    let ns = inst.num_supplies();
    let support: Vec<usize> = (0..inst.edges().len())
        .filter(|&e| sol.x.x[e] > SUPPORT_TOL)
        .collect();
    let zero: Vec<usize> = (0..ns).filter(|&j| inst.supply_weight(j) <= 0.0).collect();
    let s0: Vec<bool> = (0..ns)
        .map(|j| inst.supply_weight(j) > 0.0 && sol.y[j] >= 1.0 - group_tol)
        .collect();
    let mut d0 = vec![false; nd];
    for &e in &support {
        let edge = inst.edges()[e];
        if s0[edge.supply] {
            d0[edge.demand] = true;
        }
    }

    // Union-find over demands 0..nd and supplies nd..nd+ns.
    let mut uf = UnionFind((0..nd + ns).collect());
    let mut touched = vec![false; nd];
    for &e in &support {
        let edge = inst.edges()[e];
        if d0[edge.demand] || s0[edge.supply] || inst.supply_weight(edge.supply) <= 0.0 {
            continue;
        }
        touched[edge.demand] = true;
        uf.union(edge.demand, nd + edge.supply);
    }
    let mut comps: std::collections::BTreeMap<usize, (Vec<usize>, Vec<usize>)> = Default::default();
    for (j, &zero) in s0.iter().enumerate().take(ns) {
        if inst.supply_weight(j) > 0.0 && !zero {
            comps.entry(uf.find(nd + j)).or_default().1.push(j);
        }
    }
    for (i, &t) in touched.iter().enumerate().take(nd) {
        if t {
            comps.entry(uf.find(i)).or_default().0.push(i);
        }
    }
    let mut raw: Vec<Level> = comps
        .into_values()
        .map(|(demands, supplies)| {
            let c = supplies.iter().map(|&j| sol.residual[j]).sum::<f64>() / supplies.len() as f64;
            Level { c, demands, supplies }
        })
        .collect();
    raw.sort_by(|a, b| a.c.total_cmp(&b.c));

    let mut levels: Vec<Level> = Vec::new();
    if !zero.is_empty() {
        levels.push(Level {
            c: 0.0,
            demands: Vec::new(),
            supplies: zero,
        });
    }
    let mut anchor = f64::NEG_INFINITY;
    let first_merge = levels.len();
    for lvl in raw {
        // The zero-weight level never absorbs a component.
        if levels.len() > first_merge && lvl.c - anchor <= group_tol {
            let last = levels.last_mut().expect("non-empty");
            last.demands.extend(lvl.demands);
            last.supplies.extend(lvl.supplies);
        } else {
            anchor = lvl.c;
            levels.push(lvl);
        }
    }
    for lvl in levels.iter_mut().skip(first_merge) {
        lvl.demands.sort_unstable();
        lvl.supplies.sort_unstable();
        lvl.c = lvl.supplies.iter().map(|&j| sol.residual[j]).sum::<f64>() / lvl.supplies.len() as f64;
    }
    Decomposition {
        level0_demands: (0..nd).filter(|&i| d0[i]).collect(),
        level0_supplies: (0..ns).filter(|&j| s0[j]).collect(),
        levels,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub passed: bool,
    /// Largest violation found (0 when none).
    pub worst: f64,
}

impl PropertyCheck {
    fn from_worst(worst: f64, tol: f64) -> Self {
        PropertyCheck {
            passed: worst <= tol,
            worst,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub uniformity: PropertyCheck,
    pub monotonicity: PropertyCheck,
    pub saturation: PropertyCheck,
    /// Largest `|c − (|S| − |D|)/Σ 1/w|` over positive-`c` levels.
    pub closed_form: PropertyCheck,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.uniformity.passed && self.monotonicity.passed && self.saturation.passed
    }
}

pub fn verify_decomposition(
    inst: &TwoStageInstance,
    sol: &BalanceSolution,
    dec: &Decomposition,
    tol: f64,
) -> VerificationReport {
    let nd = inst.num_demands();
    let ns = inst.num_supplies();
    let mut uniform = 0.0f64;
    let mut closed = 0.0f64;
    for lvl in &dec.levels {
        let (lo, hi) = lvl
            .supplies
            .iter()
            .map(|&j| sol.residual[j])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r), b.max(r)));
        if hi >= lo {
            uniform = uniform.max(hi - lo);
        }
        if !lvl.demands.is_empty() || lvl.supplies.iter().all(|&j| inst.supply_weight(j) > 0.0) {
            closed = closed.max((lvl.c - closed_form_c(inst, lvl)).abs());
        }
    }

    // Level constant per vertex; level 0 has c = 0.
    let mut c_demand: Vec<Option<f64>> = vec![None; nd];
    let mut c_supply: Vec<Option<f64>> = vec![None; ns];
    for &i in &dec.level0_demands {
        c_demand[i] = Some(0.0);
    }
    for &j in &dec.level0_supplies {
        c_supply[j] = Some(0.0);
    }
    for lvl in &dec.levels {
        for &i in &lvl.demands {
            c_demand[i] = Some(lvl.c);
        }
        for &j in &lvl.supplies {
            c_supply[j] = Some(lvl.c);
        }
    }
    let load = sol.x.demand_sums(inst);
    let mut mono = 0.0f64;
    let mut sat = 0.0f64;
    for edge in inst.edges() {
        if inst.demands()[edge.demand].stage != crate::instance::Stage::First {
            continue;
        }
        let Some(cs) = c_supply[edge.supply] else { continue };
        match c_demand[edge.demand] {
            Some(cd) => mono = mono.max(cs - cd),
            // Demand outside every level must not see a supply with positive residual.
            None if cs > tol => sat = sat.max(1.0 - load[edge.demand]),
            None => {}
        }
    }
    for lvl in &dec.levels {
        for &i in &lvl.demands {
            sat = sat.max(1.0 - load[i]);
        }
    }
    VerificationReport {
        uniformity: PropertyCheck::from_worst(uniform, tol),
        monotonicity: PropertyCheck::from_worst(mono.max(0.0), tol),
        saturation: PropertyCheck::from_worst(sat.max(0.0), tol),
        closed_form: PropertyCheck::from_worst(closed, tol),
    }
}

/// `‖y_quad − y_exp‖∞` between the quadratic and exponential solutions.
pub fn check_g_invariance(inst: &TwoStageInstance, tol: f64) -> f64 {
    let gap = (tol / 10.0).min(DEFAULT_TOL);
    let q = solve_balance(inst, ConvexG::Quadratic, gap, DEFAULT_MAX_ITER);
    let e = solve_balance(inst, ConvexG::Exponential, gap, DEFAULT_MAX_ITER);
    q.y.iter()
        .zip(&e.y)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
