//! Valuation distributions and their quantile-space helpers.
//!
//! All helpers are expressed through the threshold function
//! `threshold(q) = max { t : P(v >= t) >= q }`, i.e. the highest price that is
//! still accepted with probability at least `q`. A demand vertex whose quantile
//! rank `u ~ U(0, 1)` is at most `y` is exactly the event "accepts the threshold
//! price for acceptance probability `y`", which keeps the acceptance probability
//! equal to `y` for atoms too (ties at an atom are broken by the rank).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest quantile used when a threshold has to be finite (unbounded supports).
pub const Q_MIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Valuation {
    Uniform { a: f64, b: f64 },
    Exponential { rate: f64 },
    Point { v: f64 },
    /// Value `hi` with probability `p`, zero otherwise.
    TwoPoint { hi: f64, p: f64 },
    /// Uniform over the listed samples; kept sorted ascending after [`Valuation::normalize`].
    Empirical { samples: Vec<f64> },
}

fn finite_nonneg(x: f64) -> bool {
    x.is_finite() && x >= 0.0
}

impl Valuation {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Valuation::Uniform { a, b } => finite_nonneg(*a) && b.is_finite() && b >= a,
            Valuation::Exponential { rate } => rate.is_finite() && *rate > 0.0,
            Valuation::Point { v } => finite_nonneg(*v),
            Valuation::TwoPoint { hi, p } => finite_nonneg(*hi) && (0.0..=1.0).contains(p),
            Valuation::Empirical { samples } => {
                !samples.is_empty() && samples.iter().all(|s| finite_nonneg(*s))
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::validation(format!("invalid valuation parameters: {self:?}")))
        }
    }

    /// Sorts empirical samples; a no-op for the parametric kinds.
    pub fn normalize(&mut self) {
        if let Valuation::Empirical { samples } = self {
            samples.sort_by(f64::total_cmp);
        }
    }

    /// `P(v <= t)`.
    pub fn cdf(&self, t: f64) -> f64 {
        match *self {
            Valuation::Uniform { a, b } => {
                if t < a {
                    0.0
                } else if t >= b {
                    1.0
                } else {
                    (t - a) / (b - a)
                }
            }
            Valuation::Exponential { rate } => {
                if t <= 0.0 {
                    0.0
                } else {
                    1.0 - (-rate * t).exp()
                }
            }
            Valuation::Point { v } => f64::from(u8::from(t >= v)),
            Valuation::TwoPoint { hi, p } => {
                if t < 0.0 {
                    0.0
                } else if t < hi {
                    1.0 - p
                } else {
                    1.0
                }
            }
            Valuation::Empirical { ref samples } => {
                samples.partition_point(|s| *s <= t) as f64 / samples.len() as f64
            }
        }
    }

    /// `P(v >= t)`: the probability that price `t` is accepted.
    pub fn survival(&self, t: f64) -> f64 {
        match *self {
            Valuation::Uniform { a, b } => {
                if t <= a {
                    1.0
                } else if t > b {
                    0.0
                } else {
                    (b - t) / (b - a)
                }
            }
            Valuation::Exponential { rate } => {
                if t <= 0.0 {
                    1.0
                } else {
                    (-rate * t).exp()
                }
            }
            Valuation::Point { v } => f64::from(u8::from(t <= v)),
            Valuation::TwoPoint { hi, p } => {
                if t <= 0.0 {
                    1.0
                } else if t <= hi {
                    p
                } else {
                    0.0
                }
            }
            Valuation::Empirical { ref samples } => {
                let below = samples.partition_point(|s| *s < t);
                (samples.len() - below) as f64 / samples.len() as f64
            }
        }
    }

    /// Largest price accepted with probability at least `q`.
    ///
    /// Unbounded at `q = 0` for the exponential kind.
    pub fn threshold(&self, q: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::Domain(format!("quantile {q} outside [0, 1]")));
        }
        Ok(self.threshold_unchecked(q))
    }

    /// Threshold with `q` clamped below at [`Q_MIN`], always finite.
    pub fn threshold_clamped(&self, q: f64) -> f64 {
        self.threshold_unchecked(q.clamp(Q_MIN, 1.0))
    }

    fn threshold_unchecked(&self, q: f64) -> f64 {
        match *self {
            Valuation::Uniform { a, b } => b - q * (b - a),
            Valuation::Exponential { rate } => {
                if q <= 0.0 {
                    f64::INFINITY
                } else {
                    -q.ln() / rate
                }
            }
            Valuation::Point { v } => v,
            Valuation::TwoPoint { hi, p } => {
                if q <= p {
                    hi
                } else {
                    0.0
                }
            }
            Valuation::Empirical { ref samples } => {
                let n = samples.len();
                let k = ((q * n as f64 - 1e-12).ceil() as usize).clamp(1, n);
                samples[n - k]
            }
        }
    }

    /// Mean of `T` over `[q − h, q + h]`, with `T` held constant outside
    /// `[0, 1]`. Only the atomic distributions are averaged; for the others
    /// this is `threshold_clamped(q)`.
    pub fn smoothed_threshold(&self, q: f64, h: f64) -> f64 {
        match *self {
            Valuation::TwoPoint { hi, p } => hi * ((p - (q - h)) / (2.0 * h)).clamp(0.0, 1.0),
            Valuation::Empirical { ref samples } => {
                let n = samples.len();
                let (lo, up) = (q - h, q + h);
                let mut acc = 0.0;
                if lo < 0.0 {
                    acc += (up.min(0.0) - lo) * samples[n - 1];
                }
                if up > 1.0 {
                    acc += (up - lo.max(1.0)) * samples[0];
                }
                let step = 1.0 / n as f64;
                let first = ((lo.max(0.0) / step).floor() as usize).min(n - 1);
                for k in first..n {
                    let (a, b) = (k as f64 * step, (k + 1) as f64 * step);
                    if a >= up {
                        break;
                    }
                    let overlap = b.min(up) - a.max(lo);
                    if overlap > 0.0 {
                        acc += overlap * samples[n - 1 - k];
                    }
                }
                acc / (2.0 * h)
            }
            _ => self.threshold_clamped(q),
        }
    }

    /// `E[v | v >= p]`; beyond the top of the support it returns `p`.
    pub fn cond_mean_above(&self, p: f64) -> f64 {
        match *self {
            Valuation::Uniform { a, b } => {
                if p > b {
                    p
                } else {
                    (p.max(a) + b) / 2.0
                }
            }
            Valuation::Exponential { rate } => p.max(0.0) + 1.0 / rate,
            Valuation::Point { v } => {
                if p <= v {
                    v
                } else {
                    p
                }
            }
            Valuation::TwoPoint { hi, p: prob } => {
                if p <= 0.0 {
                    hi * prob
                } else if p <= hi {
                    hi
                } else {
                    p
                }
            }
            Valuation::Empirical { ref samples } => {
                let from = samples.partition_point(|s| *s < p);
                let tail = &samples[from..];
                if tail.is_empty() {
                    p
                } else {
                    tail.iter().sum::<f64>() / tail.len() as f64
                }
            }
        }
    }

    /// Whether the distribution has an atom that is not its only support
    /// point, so that `T` jumps inside `(0, 1)`.
    pub fn has_atoms(&self) -> bool {
        match self {
            Valuation::TwoPoint { p, .. } => *p > 0.0 && *p < 1.0,
            Valuation::Empirical { samples } => samples.windows(2).any(|w| w[0] != w[1]),
            _ => false,
        }
    }

    /// `∫_0^y threshold(q) dq`, concave in `y`.
    pub fn integral_threshold(&self, y: f64) -> f64 {
        let y = y.clamp(0.0, 1.0);
        match *self {
            Valuation::Uniform { a, b } => b * y - (b - a) * y * y / 2.0,
            Valuation::Exponential { rate } => {
                if y <= 0.0 {
                    0.0
                } else {
                    (y - y * y.ln()) / rate
                }
            }
            Valuation::Point { v } => v * y,
            Valuation::TwoPoint { hi, p } => hi * y.min(p),
            Valuation::Empirical { ref samples } => {
                let n = samples.len();
                let step = 1.0 / n as f64;
                let mut acc = 0.0;
                for k in 1..=n {
                    let lo = (k - 1) as f64 * step;
                    if lo >= y {
                        break;
                    }
                    let hi = (k as f64 * step).min(y);
                    acc += samples[n - k] * (hi - lo);
                }
                acc
            }
        }
    }

    /// Expected value of a buyer accepted at quantile level `y`, i.e.
    /// `integral_threshold(y) / y`; equals `cond_mean_above(threshold(y))` for
    /// continuous kinds.
    pub fn mean_at_quantile(&self, y: f64) -> f64 {
        if y <= Q_MIN {
            self.threshold_clamped(Q_MIN)
        } else {
            self.integral_threshold(y) / y
        }
    }

    /// Value of a buyer whose quantile rank is `u` (higher value for smaller `u`).
    /// With `u ~ U(0, 1)` this is a draw from the distribution.
    pub fn value_at_rank(&self, u: f64) -> f64 {
        self.threshold_unchecked(u.clamp(f64::MIN_POSITIVE, 1.0))
    }

    pub fn mean(&self) -> f64 {
        self.integral_threshold(1.0)
    }

    /// Finite support as `(value, probability)` pairs, or `None` for continuous kinds.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match *self {
            Valuation::Uniform { a, b } if a == b => Some(vec![(a, 1.0)]),
            Valuation::Uniform { .. } | Valuation::Exponential { .. } => None,
            Valuation::Point { v } => Some(vec![(v, 1.0)]),
            Valuation::TwoPoint { hi, p } => Some(vec![(hi, p), (0.0, 1.0 - p)]),
            Valuation::Empirical { ref samples } => {
                let n = samples.len() as f64;
                let mut out: Vec<(f64, f64)> = Vec::new();
                for s in samples {
                    match out.last_mut() {
                        Some((v, p)) if *v == *s => *p += 1.0 / n,
                        _ => out.push((*s, 1.0 / n)),
                    }
                }
                Some(out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn uniform_closed_forms() {
        let u = Valuation::Uniform { a: 0.0, b: 1.0 };
        assert!(close(u.threshold(0.5).unwrap(), 0.5));
        assert!(close(u.cond_mean_above(0.5), 0.75));
        let u2 = Valuation::Uniform { a: 0.0, b: 2.0 };
        assert!(close(u2.survival(0.5), 0.75));
        assert!(close(u2.cond_mean_above(0.5), 1.25));
    }

    #[test]
    fn exponential_is_memoryless() {
        let e = Valuation::Exponential { rate: 1.0 };
        for p in [0.0, 0.3, 1.0, 4.5] {
            assert!(close(e.cond_mean_above(p), p + 1.0));
        }
        assert!(e.threshold(0.0).unwrap().is_infinite());
        assert!(e.threshold_clamped(0.0).is_finite());
    }

    #[test]
    fn quantile_out_of_range_is_domain_error() {
        let u = Valuation::Uniform { a: 0.0, b: 1.0 };
        assert!(matches!(u.threshold(1.5), Err(Error::Domain(_))));
        assert!(matches!(u.threshold(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn two_point_threshold_and_integral() {
        let v = Valuation::TwoPoint { hi: 20.0, p: 0.05 };
        assert_eq!(v.threshold(0.05).unwrap(), 20.0);
        assert_eq!(v.threshold(0.5).unwrap(), 0.0);
        assert!(close(v.integral_threshold(1.0), 1.0));
        assert!(close(v.integral_threshold(0.02), 0.4));
        assert!(close(v.mean_at_quantile(0.02), 20.0));
    }

    #[test]
    fn empirical_step_quantile_prefers_larger_price() {
        let mut v = Valuation::Empirical {
            samples: vec![3.0, 1.0, 2.0, 4.0],
        };
        v.normalize();
        assert_eq!(v.threshold(0.0).unwrap(), 4.0);
        assert_eq!(v.threshold(0.25).unwrap(), 4.0);
        assert_eq!(v.threshold(0.26).unwrap(), 3.0);
        assert_eq!(v.threshold(1.0).unwrap(), 1.0);
        assert!(close(v.survival(3.0), 0.5));
        assert!(close(v.cond_mean_above(2.5), 3.5));
        assert!(close(v.integral_threshold(1.0), 2.5));
        assert!(close(v.integral_threshold(0.375), 0.25 * 4.0 + 0.125 * 3.0));
    }

    fn kinds() -> Vec<Valuation> {
        let mut emp = Valuation::Empirical {
            samples: vec![0.5, 2.0, 2.0, 7.0, 1.0],
        };
        emp.normalize();
        vec![
            Valuation::Uniform { a: 0.5, b: 3.0 },
            Valuation::Exponential { rate: 2.0 },
            Valuation::Point { v: 1.5 },
            Valuation::TwoPoint { hi: 4.0, p: 0.3 },
            emp,
        ]
    }

    #[test]
    fn integral_is_concave_and_threshold_monotone() {
        for v in kinds() {
            let ys: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
            for w in ys.windows(3) {
                let (a, b, c) = (w[0], w[1], w[2]);
                let chord = v.integral_threshold(a)
                    + (v.integral_threshold(c) - v.integral_threshold(a)) * (b - a) / (c - a);
                assert!(v.integral_threshold(b) >= chord - 1e-10, "{v:?} at {b}");
            }
            for w in ys.windows(2) {
                assert!(v.threshold_clamped(w[0]) >= v.threshold_clamped(w[1]));
            }
        }
    }

    #[test]
    fn integral_matches_cond_mean_for_continuous_kinds() {
        for v in [
            Valuation::Uniform { a: 0.5, b: 3.0 },
            Valuation::Exponential { rate: 2.0 },
        ] {
            for y in [0.1, 0.4, 0.9] {
                let t = v.threshold(y).unwrap();
                assert!((v.cond_mean_above(t) * y - v.integral_threshold(y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rank_transform_reproduces_survival() {
        // P(value_at_rank(U) >= t) must equal survival(t); check on a fine rank grid.
        for v in kinds() {
            let n = 20_000;
            for t in [0.0, 0.7, 1.5, 2.0, 3.9] {
                let hits = (0..n)
                    .filter(|k| v.value_at_rank((*k as f64 + 0.5) / n as f64) >= t)
                    .count();
                assert!((hits as f64 / n as f64 - v.survival(t)).abs() < 1e-3, "{v:?} t={t}");
            }
        }
    }

    #[test]
    fn serde_tags_match_schema() {
        let v: Valuation = serde_json::from_str(r#"{"kind":"two_point","hi":2.0,"p":0.5}"#).unwrap();
        assert_eq!(v, Valuation::TwoPoint { hi: 2.0, p: 0.5 });
        let s = serde_json::to_string(&Valuation::Exponential { rate: 1.0 }).unwrap();
        assert_eq!(s, r#"{"kind":"exponential","rate":1.0}"#);
    }

    #[test]
    fn smoothed_threshold_averages_across_jumps() {
        let tp = Valuation::TwoPoint { hi: 2.0, p: 0.5 };
        assert!(close(tp.smoothed_threshold(0.5, 0.01), 1.0));
        assert!(close(tp.smoothed_threshold(0.3, 0.01), 2.0));
        assert!(close(tp.smoothed_threshold(0.505, 0.01), 0.5));
        let emp = Valuation::Empirical {
            samples: vec![1.0, 2.0, 4.0, 8.0],
        };
        // Quantile pieces of width 1/4: T = 8, 4, 2, 1.
        assert!(close(emp.smoothed_threshold(0.1, 0.05), 8.0));
        assert!(close(emp.smoothed_threshold(0.25, 0.05), 6.0));
        assert!(close(emp.smoothed_threshold(0.0, 0.05), 8.0));
        assert!(close(emp.smoothed_threshold(1.0, 0.05), 1.0));
        let u = Valuation::Uniform { a: 0.0, b: 1.0 };
        assert!(close(u.smoothed_threshold(0.3, 0.1), u.threshold_clamped(0.3)));
    }
}
