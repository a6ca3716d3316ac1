//! Instance generators. Every generator is a pure function of its arguments.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DemandVertex, IdEdge, Stage, SupplyVertex, TwoStageInstance};
use crate::error::{Error, Result};
use crate::pricing::valuation::Valuation;
use crate::rng::seeded;

/// Distribution of supply (or edge) weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightSpec {
    Unit,
    Const { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl WeightSpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            WeightSpec::Unit => true,
            WeightSpec::Const { value } => value.is_finite() && value >= 0.0,
            WeightSpec::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid weight spec {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            WeightSpec::Unit => 1.0,
            WeightSpec::Const { value } => value,
            WeightSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Parses `unit`, `const:<w>` or `uniform:<lo>:<hi>`.
impl FromStr for WeightSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::config(format!("bad number `{t}` in weight spec `{s}`")))
        };
        let spec = match parts.as_slice() {
            ["unit"] => WeightSpec::Unit,
            ["const", v] => WeightSpec::Const { value: num(v)? },
            ["uniform", lo, hi] => WeightSpec::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            _ => return Err(Error::config(format!("unknown weight spec `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Distribution of second-stage arrival probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PiSpec {
    Const { value: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl PiSpec {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            PiSpec::Const { value } => (0.0..=1.0).contains(&value),
            PiSpec::Uniform { lo, hi } => 0.0 <= lo && lo <= hi && hi <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid arrival-probability spec {self:?}")))
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            PiSpec::Const { value } => value,
            PiSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Parses `<p>`, `const:<p>` or `uniform:<lo>:<hi>`.
impl FromStr for PiSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| Error::config(format!("bad number `{t}` in probability spec `{s}`")))
        };
        let spec = match parts.as_slice() {
            [v] => PiSpec::Const { value: num(v)? },
            ["const", v] => PiSpec::Const { value: num(v)? },
            ["uniform", lo, hi] => PiSpec::Uniform {
                lo: num(lo)?,
                hi: num(hi)?,
            },
            _ => return Err(Error::config(format!("unknown probability spec `{s}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub n1: usize,
    pub n2: usize,
    pub ns: usize,
    pub edge_prob: f64,
    pub weights: WeightSpec,
    pub pi: PiSpec,
    /// When set, every edge carries a weight drawn from this spec.
    #[serde(default)]
    pub edge_weights: Option<WeightSpec>,
}

fn demand(id: u32, stage: Stage, pi: f64) -> DemandVertex {
    DemandVertex {
        id,
        stage,
        availability: pi,
        valuation: None,
        posted_price: None,
    }
}

/// Random bipartite instance: first-stage ids `0..n1`, second-stage ids
/// `n1..n1+n2`, supply ids `0..ns`; each demand–supply pair is an edge
/// independently with probability `edge_prob`.
pub fn gen_random(spec: &RandomSpec, seed: u64) -> Result<TwoStageInstance> {
    if !(0.0..=1.0).contains(&spec.edge_prob) {
        return Err(Error::config(format!("edge_prob {} outside [0, 1]", spec.edge_prob)));
    }
    spec.weights.validate()?;
    spec.pi.validate()?;
    if let Some(w) = &spec.edge_weights {
        w.validate()?;
    }
    let mut rng = seeded(seed);
    let supplies: Vec<SupplyVertex> = (0..spec.ns)
        .map(|j| SupplyVertex {
            id: j as u32,
            weight: spec.weights.draw(&mut rng),
        })
        .collect();
    let mut demands: Vec<DemandVertex> = (0..spec.n1)
        .map(|i| demand(i as u32, Stage::First, 1.0))
        .collect();
    for k in 0..spec.n2 {
        let pi = spec.pi.draw(&mut rng);
        demands.push(demand((spec.n1 + k) as u32, Stage::Second, pi));
    }
    let mut edges: Vec<IdEdge> = Vec::new();
    for d in &demands {
        for s in &supplies {
            if rng.random::<f64>() < spec.edge_prob {
                let w = spec.edge_weights.map(|ws| ws.draw(&mut rng));
                edges.push((d.id, s.id, w));
            }
        }
    }
    TwoStageInstance::new(demands, supplies, edges, None)
}

/// The lower-bound family: `n` first-stage demands complete to `2n` unit
/// supplies, and `2n` second-stage demands each with a private supply, `π = 1/2`.
pub fn gen_worst_case(n: usize) -> TwoStageInstance {
    assert!(n >= 1, "gen_worst_case needs n >= 1");
    let mut b = TwoStageInstance::builder();
    for j in 0..2 * n {
        b = b.supply(j as u32, 1.0);
    }
    for i in 0..n {
        b = b.first(i as u32);
        for j in 0..2 * n {
            b = b.edge(i as u32, j as u32);
        }
    }
    for k in 0..2 * n {
        let id = (n + k) as u32;
        b = b.second(id, 0.5).edge(id, k as u32);
    }
    b.build().expect("worst-case instance is valid")
}

/// Pricing instance on which no policy beats 1 while the offline optimum is `2 − ε`.
pub fn gen_pricing_tight(epsilon: f64) -> Result<TwoStageInstance> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("epsilon {epsilon} outside (0, 1)")));
    }
    TwoStageInstance::builder()
        .supply(0, 0.0)
        .first_priced(0, Valuation::Point { v: 1.0 }, 1.0)
        .second_valued(
            1,
            Valuation::TwoPoint {
                hi: 1.0 / epsilon,
                p: epsilon,
            },
        )
        .edge(0, 0)
        .edge(1, 0)
        .build()
}

/// Edge-weighted analogue: one supply, a sure first-stage edge of weight 1 and
/// a second-stage edge of weight `1/ε` that shows up with probability `ε`.
pub fn gen_edge_weighted_tight(epsilon: f64) -> Result<TwoStageInstance> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::config(format!("epsilon {epsilon} outside (0, 1)")));
    }
    TwoStageInstance::builder()
        .supply(0, 0.0)
        .first(0)
        .second(1, epsilon)
        .weighted_edge(0, 0, 1.0)
        .weighted_edge(1, 0, 1.0 / epsilon)
        .build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Unit,
    /// `w_j = 1 + F̂(idle_j)` with `F̂` the empirical CDF of synthetic idle times.
    IdleQuantile,
}

impl FromStr for WeightMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(WeightMode::Unit),
            "idle-quantile" | "idle_quantile" => Ok(WeightMode::IdleQuantile),
            _ => Err(Error::config(format!("unknown weight mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeoSpec {
    pub riders1: usize,
    pub riders2: usize,
    pub drivers: usize,
    /// Match radius, in the units of `side`.
    pub radius: f64,
    pub weight_mode: WeightMode,
    /// Side of the square service region (the unit square by default).
    pub side: f64,
    /// Arrival probability of a second-stage rider.
    pub pi: f64,
    /// When set, the second stage is a uniformly chosen day out of this many,
    /// each day's riders drawn once with probability `pi`.
    pub days: Option<usize>,
}

impl GeoSpec {
    pub fn new(riders1: usize, riders2: usize, drivers: usize, radius: f64, weight_mode: WeightMode) -> Self {
        GeoSpec {
            riders1,
            riders2,
            drivers,
            radius,
            weight_mode,
            side: 1.0,
            pi: 0.5,
            days: None,
        }
    }
}

/// Mean of the synthetic idle-time distribution, in seconds.
const MEAN_IDLE: f64 = 300.0;

/// Synthetic ride-hailing snapshot: riders and drivers placed uniformly in a
/// square, an edge whenever the distance is below `radius`.
pub fn gen_geo(spec: &GeoSpec, seed: u64) -> Result<TwoStageInstance> {
    if !(spec.radius > 0.0 && spec.radius.is_finite()) {
        return Err(Error::config(format!("radius {} must be positive", spec.radius)));
    }
    if !(spec.side > 0.0 && spec.side.is_finite()) {
        return Err(Error::config(format!("side {} must be positive", spec.side)));
    }
    if !(0.0..=1.0).contains(&spec.pi) {
        return Err(Error::config(format!("pi {} outside [0, 1]", spec.pi)));
    }
    if spec.days == Some(0) {
        return Err(Error::config("days must be at least 1"));
    }
    let mut rng = seeded(seed);
    let point = |rng: &mut crate::rng::StdRng| {
        (rng.random::<f64>() * spec.side, rng.random::<f64>() * spec.side)
    };
    let drivers: Vec<(f64, f64)> = (0..spec.drivers).map(|_| point(&mut rng)).collect();
    let riders: Vec<(f64, f64)> = (0..spec.riders1 + spec.riders2)
        .map(|_| point(&mut rng))
        .collect();

    let weights: Vec<f64> = match spec.weight_mode {
        WeightMode::Unit => vec![1.0; spec.drivers],
        WeightMode::IdleQuantile => {
            let idle: Vec<f64> = (0..spec.drivers)
                .map(|_| -MEAN_IDLE * (1.0 - rng.random::<f64>()).ln())
                .collect();
            let mut sorted = idle.clone();
            sorted.sort_by(f64::total_cmp);
            let n = spec.drivers as f64;
            idle.iter()
                .map(|t| 1.0 + sorted.partition_point(|s| s <= t) as f64 / n)
                .collect()
        }
    };

    let supplies: Vec<SupplyVertex> = weights
        .iter()
        .enumerate()
        .map(|(j, &w)| SupplyVertex { id: j as u32, weight: w })
        .collect();
    let mut demands = Vec::with_capacity(riders.len());
    for i in 0..riders.len() {
        if i < spec.riders1 {
            demands.push(demand(i as u32, Stage::First, 1.0));
        } else {
            demands.push(demand(i as u32, Stage::Second, spec.pi));
        }
    }
    let r2 = spec.radius * spec.radius;
    let mut edges: Vec<IdEdge> = Vec::new();
    for (i, p) in riders.iter().enumerate() {
        for (j, q) in drivers.iter().enumerate() {
            let (dx, dy) = (p.0 - q.0, p.1 - q.1);
            if dx * dx + dy * dy < r2 {
                edges.push((i as u32, j as u32, None));
            }
        }
    }
    let scenarios = spec.days.map(|days| {
        (0..days)
            .map(|_| {
                let present = (spec.riders1..riders.len())
                    .filter(|_| rng.random::<f64>() < spec.pi)
                    .map(|i| i as u32)
                    .collect();
                (1.0 / days as f64, present)
            })
            .collect()
    });
    TwoStageInstance::new(demands, supplies, edges, scenarios)
}
