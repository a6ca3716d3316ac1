//! The factor-revealing program behind the hedge policy's guarantee against
//! the online optimum:
//!
//! ```text
//! min  1 − [λ((1−k)c − (1−s−k)w̃) + (1−λ)k·w̄/e] / (s + k·w̄)
//! c = (1−s) / (s + k/w̄ + (1−s−k)/w̃)
//! s, k ∈ [0,1], s + k ≤ 1, w̃ ≤ 1 ≤ w̄, (1−s−k)·w̃ ≥ (1−s−k)·c
//! ```

use std::f64::consts::E;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_GRID: usize = 2000;
pub const DEFAULT_REFINE_TOL: f64 = 1e-10;

/// Points with `s + k·w̄` below this are excluded (the objective is `0/0` there).
const MIN_DENOMINATOR: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrPoint {
    pub s: f64,
    pub k: f64,
    pub w_bar: f64,
    pub w_tilde: f64,
    pub lambda: f64,
}

impl FrPoint {
    pub fn c(&self) -> f64 {
        let b = 1.0 - self.s - self.k;
        let slack = if b > 0.0 { b / self.w_tilde } else { 0.0 };
        (1.0 - self.s) / (self.s + self.k / self.w_bar + slack)
    }

    pub fn check(&self) -> Result<()> {
        let FrPoint { s, k, w_bar, w_tilde, lambda } = *self;
        let ok = (0.0..=1.0).contains(&s)
            && (0.0..=1.0).contains(&k)
            && s + k <= 1.0 + FEAS_TOL
            && w_tilde > 0.0
            && w_tilde <= 1.0
            && w_bar >= 1.0
            && (0.0..=1.0).contains(&lambda)
            && s + k * w_bar >= MIN_DENOMINATOR;
        if !ok {
            return Err(Error::Domain(format!("point outside the program's domain: {self:?}")));
        }
        let b = 1.0 - s - k;
        if b > FEAS_TOL && k * (1.0 - w_tilde / w_bar) > s * w_tilde + FEAS_TOL {
            return Err(Error::Domain(format!("point violates w̃ ≥ c: {self:?}")));
        }
        Ok(())
    }
}

fn objective(lambda: f64, s: f64, k: f64, u: f64, wt: f64) -> f64 {
    let w_bar = 1.0 / u;
    let b = (1.0 - s - k).max(0.0);
    let denom_c = s + k * u + if b > 0.0 { b / wt } else { 0.0 };
    let c = (1.0 - s) / denom_c;
    let num = lambda * ((1.0 - k) * c - b * wt) + (1.0 - lambda) * k * w_bar / E;
    1.0 - num / (s + k * w_bar)
}

/// Objective value at a feasible point.
pub fn fr_value(point: &FrPoint) -> Result<f64> {
    point.check()?;
    Ok(objective(point.lambda, point.s, point.k, 1.0 / point.w_bar, point.w_tilde))
}

/// Which slice of the program is searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrCase {
    /// `w̄ = w̃ = 1`.
    Unweighted,
    /// Weighted with `s + k = 1` (`w̃` drops out).
    Tight,
    /// Weighted with `s + k < 1`.
    Slack,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrSolution {
    pub value: f64,
    pub point: FrPoint,
    pub case: FrCase,
}

/// Search coordinates: `(s, k, u = 1/w̄)`; `w̃` is optimized inside.
type Coords = [f64; 3];

fn feasible(case: FrCase, x: &Coords) -> bool {
    let [s, k, u] = *x;
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&k) || !(u > 0.0 && u <= 1.0) {
        return false;
    }
    match case {
        FrCase::Unweighted => s + k <= 1.0 && s + k >= MIN_DENOMINATOR,
        FrCase::Tight => s + k * (1.0 / u) >= MIN_DENOMINATOR,
        FrCase::Slack => s + k < 1.0 && s + k / u >= MIN_DENOMINATOR && k <= s + k * u,
    }
}

/// `w̃` minimizing the objective for fixed `(s, k, u)`, by golden section on
/// `[k/(s+ku), 1]` (the objective is convex in `w̃`).
fn best_w_tilde(lambda: f64, s: f64, k: f64, u: f64) -> (f64, f64) {
    let lo = if k > 0.0 { (k / (s + k * u)).min(1.0) } else { 0.0 };
    let lo = lo.max(1e-12);
    let f = |wt: f64| objective(lambda, s, k, u, wt);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, 1.0);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > 1e-12 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2);
        }
    }
    let mut best = (f(lo), lo);
    for wt in [a, b, 1.0] {
        let v = f(wt);
        if v < best.0 {
            best = (v, wt);
        }
    }
    (best.0, best.1)
}

fn eval(lambda: f64, case: FrCase, x: &Coords) -> Option<(f64, f64)> {
    if !feasible(case, x) {
        return None;
    }
    let [s, k, u] = *x;
    let (v, wt) = match case {
        FrCase::Unweighted | FrCase::Tight => (objective(lambda, s, k, u, 1.0), 1.0),
        FrCase::Slack => best_w_tilde(lambda, s, k, u),
    };
    v.is_finite().then_some((v, wt))
}

/// Maps free search coordinates to program coordinates for each case.
fn embed(case: FrCase, free: &[f64]) -> Coords {
    match case {
        FrCase::Unweighted => [free[0], free[1], 1.0],
        FrCase::Tight => [free[0], 1.0 - free[0], free[1]],
        FrCase::Slack => [free[0], free[1], free[2]],
    }
}

fn grid_search(lambda: f64, case: FrCase, grid: usize) -> Option<(f64, Vec<f64>)> {
    let dims = if case == FrCase::Slack { 3 } else { 2 };
    let n = if dims == 3 {
        ((grid as f64).powf(2.0 / 3.0).ceil() as usize).max(4)
    } else {
        grid.max(4)
    };
    let axis = |i: usize, d: usize| -> f64 {
        // u = 1/w̄ lives in (0, 1]; all other coordinates in [0, 1].
        let is_u = (case == FrCase::Tight && d == 1) || (case == FrCase::Slack && d == 2);
        if is_u {
            (i + 1) as f64 / (n + 1) as f64
        } else {
            i as f64 / n as f64
        }
    };
    (0..=n)
        .into_par_iter()
        .filter_map(|i| {
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut consider = |free: Vec<f64>| {
                if let Some((v, _)) = eval(lambda, case, &embed(case, &free)) {
                    if best.as_ref().is_none_or(|b| v < b.0) {
                        best = Some((v, free));
                    }
                }
            };
            for j in 0..=n {
                if dims == 2 {
                    consider(vec![axis(i, 0), axis(j, 1)]);
                } else {
                    for l in 0..=n {
                        consider(vec![axis(i, 0), axis(j, 1), axis(l, 2)]);
                    }
                }
            }
            best
        })
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// Pattern search from `start` with step halving down to `tol`. Besides the
/// axes it tries the diagonals, so it can slide along `s + k = 1`.
fn refine(lambda: f64, case: FrCase, start: Vec<f64>, step: f64, tol: f64) -> (f64, Vec<f64>) {
    let n = start.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for a in 0..n {
        let mut d = vec![0.0; n];
        d[a] = 1.0;
        dirs.push(d);
        for b in a + 1..n {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[a] = 1.0;
                d[b] = sign;
                dirs.push(d);
            }
        }
    }
    let mut x = start;
    let mut best = eval(lambda, case, &embed(case, &x)).map_or(f64::INFINITY, |r| r.0);
    let mut h = step;
    while h >= tol {
        let mut moved = false;
        for d in &dirs {
            for dir in [1.0, -1.0] {
                let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + dir * h * b).collect();
                if let Some((v, _)) = eval(lambda, case, &embed(case, &y)) {
                    if v < best {
                        best = v;
                        x = y;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            h /= 2.0;
        }
    }
    (best, x)
}

/// Minimizes one case of the program: dense grid (`grid` points per axis for
/// two free coordinates, `grid^(2/3)` for three), then compass refinement.
pub fn fr_solve_case(lambda: f64, case: FrCase, grid: usize, refine_tol: f64) -> Option<FrSolution> {
    let (_, start) = grid_search(lambda, case, grid)?;
    let step = 1.0 / grid.max(4) as f64;
    let (_, free) = refine(lambda, case, start, step, refine_tol.max(1e-15));
    let coords = embed(case, &free);
    let (value, w_tilde) = eval(lambda, case, &coords)?;
    Some(FrSolution {
        value,
        point: FrPoint {
            s: coords[0],
            k: coords[1],
            w_bar: 1.0 / coords[2],
            w_tilde,
            lambda,
        },
        case,
    })
}

/// Minimum of the program: the unweighted slice, or the better of the two
/// weighted cases.
pub fn fr_solve(lambda: f64, weighted: bool, grid: usize, refine_tol: f64) -> Result<FrSolution> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda {lambda} outside [0, 1]")));
    }
    let cases: &[FrCase] = if weighted {
        &[FrCase::Tight, FrCase::Slack]
    } else {
        &[FrCase::Unweighted]
    };
    cases
        .iter()
        .filter_map(|&c| fr_solve_case(lambda, c, grid, refine_tol))
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .ok_or_else(|| Error::Domain("no feasible point found".into()))
}

/// Parses a mixing weight such as `0.7`, `1/(e-1)` or `1/e`: decimal numbers,
/// the constant `e`, `+ - * /`, parentheses and unary minus. The value must lie
/// in `[0, 1]`.
pub fn parse_lambda(text: &str) -> Result<f64> {
    let v = parse_expr(text)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("lambda `{text}` = {v} outside [0, 1]")));
    }
    Ok(v)
}

/// Evaluates the arithmetic grammar accepted by [`parse_lambda`] without the
/// range check.
pub fn parse_expr(text: &str) -> Result<f64> {
    let tokens: Vec<char> = text
        .chars()
        .map(|c| if c == '−' { '-' } else { c })
        .filter(|c| !c.is_whitespace())
        .collect();
    let mut p = ExprParser { t: &tokens, pos: 0, depth: 0 };
    let v = p.sum()?;
    if p.pos != tokens.len() {
        return Err(p.error("unexpected trailing input"));
    }
    if !v.is_finite() {
        return Err(Error::Domain(format!("expression `{text}` is not finite")));
    }
    Ok(v)
}

struct ExprParser<'a> {
    t: &'a [char],
    pos: usize,
    depth: usize,
}

impl ExprParser<'_> {
    fn error(&self, msg: &str) -> Error {
        Error::Parse {
            field: "lambda".into(),
            message: format!("{msg} at position {}", self.pos),
        }
    }

    fn peek(&self) -> Option<char> {
        self.t.get(self.pos).copied()
    }

    fn sum(&mut self) -> Result<f64> {
        let mut v = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            let r = self.product()?;
            v = if op == '+' { v + r } else { v - r };
        }
        Ok(v)
    }

    fn product(&mut self) -> Result<f64> {
        let mut v = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            let r = self.unary()?;
            v = if op == '*' { v * r } else { v / r };
        }
        Ok(v)
    }

    fn unary(&mut self) -> Result<f64> {
        if self.peek() == Some('-') {
            self.pos += 1;
            return Ok(-self.unary()?);
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<f64> {
        match self.peek() {
            Some('(') => {
                self.depth += 1;
                if self.depth > 64 {
                    return Err(self.error("nesting too deep"));
                }
                self.pos += 1;
                let v = self.sum()?;
                if self.peek() != Some(')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                self.depth -= 1;
                Ok(v)
            }
            Some('e') => {
                self.pos += 1;
                Ok(E)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                let start = self.pos;
                while self
                    .peek()
                    .is_some_and(|c| c.is_ascii_digit() || c == '.')
                {
                    self.pos += 1;
                }
                let s: String = self.t[start..self.pos].iter().collect();
                s.parse::<f64>().map_err(|_| self.error("malformed number"))
            }
            _ => Err(self.error("expected a number, `e` or `(`")),
        }
    }
}
