//! The policy roster behind one interface.
//!
//! A [`PolicySpec`] names a policy and its second-stage rule; preparing it on
//! an instance does all realization-independent work once (balance solve,
//! local search, relaxation, pilot simulations), after which each trial draws
//! its own realization and coins from per-trial streams.
//!
//! Textual form: `kind[:key=value,...][@exact|@greedy]`, e.g. `wbu`,
//! `sm-limit:eps=0.001`, `hg:lambda=1/(e-1),mode=randomize`, `edge-discard@greedy`.

use std::f64::consts::E;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balance::{solve_balance, ConvexG, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::bench::fr::parse_lambda;
use crate::error::{Error, Result};
use crate::instance::{for_each_realization, sample_realization, Realization, Stage, TwoStageInstance};
use crate::matching::{
    bvn_decompose, greedy_matching, max_value_matching, Matching, MatchingDistribution,
    DEFAULT_BVN_TOL,
};
use crate::pricing::{ensure_pricing, ocrs_run, solve_ear, EarSolution, DEFAULT_EAR_MAX_ITER, DEFAULT_EAR_TOL};
use crate::rng::{mean_stderr, trial_stream, Purpose, StdRng};
use crate::submodular::{
    first_stage_from_base, local_search_base, RankOracle, DEFAULT_EPSILON, DEFAULT_MAX_PASSES,
    DEFAULT_ORACLE_SAMPLES, LIMIT_MAX_PASSES,
};

pub const DEFAULT_PICK_TRIALS: usize = 200;
pub const WEIGHTED_LAMBDA: f64 = 0.7;
/// Largest number of random second-stage demands (and of discard coins)
/// enumerated by [`PreparedPolicy::exact_value`].
pub const EXACT_POLICY_LIMIT: usize = 20;

/// Hedge weight for unweighted instances, `1/(e−1)`.
pub fn unweighted_lambda() -> f64 {
    1.0 / (E - 1.0)
}

/// Hedge weight used when a spec leaves λ open: `1/(e−1)` if all supply
/// weights coincide (and edges carry no weights), 0.7 otherwise.
pub fn canonical_lambda(inst: &TwoStageInstance) -> f64 {
    if is_unweighted(inst) {
        unweighted_lambda()
    } else {
        WEIGHTED_LAMBDA
    }
}

/// Whether the instance is unweighted up to scaling.
pub fn is_unweighted(inst: &TwoStageInstance) -> bool {
    if inst.is_edge_weighted() {
        return false;
    }
    let mut w = inst.supplies().iter().map(|s| s.weight).filter(|&w| w > 0.0);
    match w.next() {
        Some(first) => w.all(|x| x == first),
        None => true,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmParams {
    pub epsilon: f64,
    pub samples: usize,
    pub max_passes: usize,
}

impl Default for SmParams {
    fn default() -> Self {
        SmParams {
            epsilon: DEFAULT_EPSILON,
            samples: DEFAULT_ORACLE_SAMPLES,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

impl SmParams {
    fn limited() -> Self {
        SmParams {
            max_passes: LIMIT_MAX_PASSES,
            ..SmParams::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HedgeMode {
    /// Flip a λ-coin between the balance and submodular first stages.
    Randomize,
    /// Simulate both first stages and commit to the better one.
    PickBetter { trials: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    Wbu { g: ConvexG },
    Gr,
    Sm(SmParams),
    SmLimit(SmParams),
    Hg {
        lambda: Option<f64>,
        mode: HedgeMode,
        sm: SmParams,
    },
    EdgeDiscard,
    OcrsPricing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SecondStage {
    /// Maximum-value matching on the residual graph.
    #[default]
    Exact,
    /// Greedy maximal matching by descending value.
    GreedyMaximal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub second_stage: SecondStage,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind) -> Self {
        PolicySpec {
            kind,
            second_stage: SecondStage::Exact,
        }
    }

    pub fn with_second_stage(mut self, second_stage: SecondStage) -> Self {
        self.second_stage = second_stage;
        self
    }

    pub fn wbu() -> Self {
        Self::new(PolicyKind::Wbu {
            g: ConvexG::Quadratic,
        })
    }

    pub fn gr() -> Self {
        Self::new(PolicyKind::Gr)
    }

    pub fn sm() -> Self {
        Self::new(PolicyKind::Sm(SmParams::default()))
    }

    pub fn hg_randomize(lambda: Option<f64>) -> Self {
        Self::new(PolicyKind::Hg {
            lambda,
            mode: HedgeMode::Randomize,
            sm: SmParams::default(),
        })
    }

    pub fn hg_pick_better() -> Self {
        Self::new(PolicyKind::Hg {
            lambda: None,
            mode: HedgeMode::PickBetter {
                trials: DEFAULT_PICK_TRIALS,
            },
            sm: SmParams::default(),
        })
    }

    pub fn edge_discard() -> Self {
        Self::new(PolicyKind::EdgeDiscard)
    }

    pub fn ocrs() -> Self {
        Self::new(PolicyKind::OcrsPricing)
    }

    fn validate(&self) -> Result<()> {
        let sm_ok = |p: &SmParams| p.epsilon > 0.0 && p.samples >= 1 && p.max_passes >= 1;
        match &self.kind {
            PolicyKind::Sm(p) | PolicyKind::SmLimit(p) if !sm_ok(p) => Err(Error::config(
                "local search needs eps > 0, samples ≥ 1 and passes ≥ 1",
            )),
            PolicyKind::Hg { lambda, mode, sm } => {
                if let Some(l) = lambda {
                    if !(0.0..=1.0).contains(l) {
                        return Err(Error::config(format!("lambda {l} outside [0, 1]")));
                    }
                }
                if let HedgeMode::PickBetter { trials: 0 } = mode {
                    return Err(Error::config("pick-better needs at least one pilot trial"));
                }
                if !sm_ok(sm) {
                    return Err(Error::config(
                        "local search needs eps > 0, samples ≥ 1 and passes ≥ 1",
                    ));
                }
                Ok(())
            }
            PolicyKind::OcrsPricing if self.second_stage != SecondStage::Exact => Err(
                Error::config("ocrs fixes its own second stage; drop the @greedy suffix"),
            ),
            _ => Ok(()),
        }
    }
}

fn write_sm(out: &mut Vec<String>, p: &SmParams, default: &SmParams) {
    if p.epsilon != default.epsilon {
        out.push(format!("eps={}", p.epsilon));
    }
    if p.samples != default.samples {
        out.push(format!("samples={}", p.samples));
    }
    if p.max_passes != default.max_passes {
        out.push(format!("passes={}", p.max_passes));
    }
}

impl fmt::Display for PolicySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut params = Vec::new();
        let name = match &self.kind {
            PolicyKind::Wbu { g } => {
                if *g == ConvexG::Exponential {
                    params.push("g=exp".to_string());
                }
                "wbu"
            }
            PolicyKind::Gr => "gr",
            PolicyKind::Sm(p) => {
                write_sm(&mut params, p, &SmParams::default());
                "sm"
            }
            PolicyKind::SmLimit(p) => {
                write_sm(&mut params, p, &SmParams::limited());
                "sm-limit"
            }
            PolicyKind::Hg { lambda, mode, sm } => {
                if let Some(l) = lambda {
                    params.push(format!("lambda={l}"));
                }
                match mode {
                    HedgeMode::Randomize => params.push("mode=randomize".into()),
                    HedgeMode::PickBetter { trials } => {
                        params.push("mode=pick-better".into());
                        if *trials != DEFAULT_PICK_TRIALS {
                            params.push(format!("trials={trials}"));
                        }
                    }
                }
                write_sm(&mut params, sm, &SmParams::default());
                "hg"
            }
            PolicyKind::EdgeDiscard => "edge-discard",
            PolicyKind::OcrsPricing => "ocrs",
        };
        f.write_str(name)?;
        if !params.is_empty() {
            write!(f, ":{}", params.join(","))?;
        }
        if self.second_stage == SecondStage::GreedyMaximal {
            f.write_str("@greedy")?;
        }
        Ok(())
    }
}

fn spec_error(message: impl Into<String>) -> Error {
    Error::Parse {
        field: "policy".into(),
        message: message.into(),
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| spec_error(format!("invalid value `{value}` for `{key}`")))
}

fn set_sm(p: &mut SmParams, key: &str, value: &str) -> Result<bool> {
    match key {
        "eps" | "epsilon" => p.epsilon = parse_num(key, value)?,
        "samples" => p.samples = parse_num(key, value)?,
        "passes" => p.max_passes = parse_num(key, value)?,
        _ => return Ok(false),
    }
    Ok(true)
}

impl FromStr for PolicySpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let text = text.trim();
        let (body, second_stage) = match text.rsplit_once('@') {
            Some((b, "exact")) => (b, SecondStage::Exact),
            Some((b, "greedy")) => (b, SecondStage::GreedyMaximal),
            Some((_, other)) => {
                return Err(spec_error(format!(
                    "unknown second stage `{other}` (expected exact or greedy)"
                )))
            }
            None => (text, SecondStage::Exact),
        };
        let (name, rest) = body.split_once(':').unwrap_or((body, ""));
        let mut pairs = Vec::new();
        if !rest.is_empty() {
            for item in rest.split(',') {
                let (k, v) = item
                    .split_once('=')
                    .ok_or_else(|| spec_error(format!("expected key=value, got `{item}`")))?;
                pairs.push((k.trim(), v.trim()));
            }
        }
        let unknown = |k: &str| spec_error(format!("unknown parameter `{k}` for `{name}`"));
        let kind = match name {
            "wbu" => {
                let mut g = ConvexG::Quadratic;
                for (k, v) in pairs {
                    match k {
                        "g" => g = v.parse().map_err(|_| spec_error(format!("unknown g `{v}`")))?,
                        _ => return Err(unknown(k)),
                    }
                }
                PolicyKind::Wbu { g }
            }
            "sm" | "sm-limit" => {
                let mut p = if name == "sm" {
                    SmParams::default()
                } else {
                    SmParams::limited()
                };
                for (k, v) in pairs {
                    if !set_sm(&mut p, k, v)? {
                        return Err(unknown(k));
                    }
                }
                if name == "sm" {
                    PolicyKind::Sm(p)
                } else {
                    PolicyKind::SmLimit(p)
                }
            }
            "hg" => {
                let mut lambda = None;
                let mut pick = false;
                let mut trials = DEFAULT_PICK_TRIALS;
                let mut sm = SmParams::default();
                for (k, v) in pairs {
                    match k {
                        "lambda" => {
                            lambda = Some(parse_lambda(v).map_err(|e| spec_error(e.to_string()))?)
                        }
                        "mode" => {
                            pick = match v {
                                "randomize" => false,
                                "pick-better" => true,
                                _ => return Err(spec_error(format!("unknown hedge mode `{v}`"))),
                            }
                        }
                        "trials" => trials = parse_num(k, v)?,
                        _ => {
                            if !set_sm(&mut sm, k, v)? {
                                return Err(unknown(k));
                            }
                        }
                    }
                }
                let mode = if pick {
                    HedgeMode::PickBetter { trials }
                } else {
                    HedgeMode::Randomize
                };
                PolicyKind::Hg { lambda, mode, sm }
            }
            "gr" | "edge-discard" | "ocrs" => {
                if let Some((k, _)) = pairs.first() {
                    return Err(unknown(k));
                }
                match name {
                    "gr" => PolicyKind::Gr,
                    "edge-discard" => PolicyKind::EdgeDiscard,
                    _ => PolicyKind::OcrsPricing,
                }
            }
            _ => return Err(spec_error(format!("unknown policy `{name}`"))),
        };
        let spec = PolicySpec { kind, second_stage };
        spec.validate().map_err(|e| spec_error(e.to_string()))?;
        Ok(spec)
    }
}

impl TryFrom<String> for PolicySpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PolicySpec> for String {
    fn from(p: PolicySpec) -> String {
        p.to_string()
    }
}

/// One run of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyRun {
    pub first_stage: Matching,
    pub realization: Realization,
    pub second_stage: Matching,
    /// Posted prices per demand index (pricing policies only).
    pub prices: Option<Vec<Option<f64>>>,
    /// Supply efficiency (value under the instance's value model), or market
    /// efficiency on pricing instances.
    pub value: f64,
}

impl PolicyRun {
    /// First stage inside `G[D₁, S]`, second stage inside the available
    /// second-stage demand and the supplies left over.
    pub fn is_feasible(&self, inst: &TwoStageInstance) -> bool {
        if !self.first_stage.is_valid(inst) || !self.second_stage.is_valid(inst) {
            return false;
        }
        let first_ok = self
            .first_stage
            .edges()
            .iter()
            .all(|&e| inst.demands()[inst.edges()[e].demand].stage == Stage::First);
        let used = self.first_stage.matched_supplies(inst);
        let second_ok = self.second_stage.edges().iter().all(|&e| {
            let edge = inst.edges()[e];
            inst.demands()[edge.demand].stage == Stage::Second
                && self.realization.is_available(edge.demand)
                && !used[edge.supply]
        });
        first_ok && second_ok
    }
}

#[derive(Debug, Clone)]
enum Plan {
    Random(MatchingDistribution),
    Fixed(Matching),
    Hedge {
        lambda: f64,
        wbu: MatchingDistribution,
        sm: Matching,
    },
    Discard(Matching),
    Ocrs(Box<EarSolution>),
}

/// A policy with its realization-independent work done.
#[derive(Debug, Clone)]
pub struct PreparedPolicy<'a> {
    spec: PolicySpec,
    inst: &'a TwoStageInstance,
    seed: u64,
    plan: Plan,
    note: Option<String>,
}

fn check_compatible(spec: &PolicySpec, inst: &TwoStageInstance) -> Result<()> {
    match spec.kind {
        PolicyKind::OcrsPricing => ensure_pricing(inst),
        _ if inst.is_pricing() => Err(Error::config(format!(
            "policy `{spec}` does not post prices; use ocrs on pricing instances"
        ))),
        PolicyKind::EdgeDiscard if !inst.is_edge_weighted() => Err(Error::config(
            "edge-discard needs an instance with edge weights",
        )),
        _ => Ok(()),
    }
}

fn balance_distribution(inst: &TwoStageInstance, g: ConvexG) -> Result<MatchingDistribution> {
    let sol = solve_balance(inst, g, DEFAULT_TOL, DEFAULT_MAX_ITER);
    bvn_decompose(inst, &sol.x, DEFAULT_BVN_TOL)
}

fn submodular_matching(inst: &TwoStageInstance, p: &SmParams, rng: &mut StdRng) -> Result<Matching> {
    let oracle = RankOracle::new(inst, p.samples, rng);
    let out = local_search_base(inst, p.epsilon, &oracle, p.max_passes);
    first_stage_from_base(inst, &out.base)
}

fn second_stage(
    inst: &TwoStageInstance,
    rule: SecondStage,
    first: &Matching,
    realization: &Realization,
) -> Matching {
    let free: Vec<bool> = first.matched_supplies(inst).iter().map(|&m| !m).collect();
    match rule {
        SecondStage::Exact => max_value_matching(inst, &realization.available, &free).0,
        SecondStage::GreedyMaximal => greedy_matching(inst, &realization.available, &free).0,
    }
}

impl<'a> PreparedPolicy<'a> {
    /// Plans `spec` on `inst`. All planning randomness comes from `seed`.
    pub fn new(spec: PolicySpec, inst: &'a TwoStageInstance, seed: u64) -> Result<Self> {
        spec.validate()?;
        check_compatible(&spec, inst)?;
        let mut rng = trial_stream(seed, 0, Purpose::Planning);
        let mut note = None;
        let all_d1 = inst.first_stage_mask();
        let all_s = inst.all_supplies_mask();
        let plan = match spec.kind {
            PolicyKind::Wbu { g } => Plan::Random(balance_distribution(inst, g)?),
            PolicyKind::Gr => Plan::Fixed(max_value_matching(inst, &all_d1, &all_s).0),
            PolicyKind::Sm(p) | PolicyKind::SmLimit(p) => {
                Plan::Fixed(submodular_matching(inst, &p, &mut rng)?)
            }
            PolicyKind::Hg { lambda, mode, sm } => {
                let wbu = balance_distribution(inst, ConvexG::Quadratic)?;
                let sm = submodular_matching(inst, &sm, &mut rng)?;
                match mode {
                    HedgeMode::Randomize => Plan::Hedge {
                        lambda: lambda.unwrap_or_else(|| canonical_lambda(inst)),
                        wbu,
                        sm,
                    },
                    HedgeMode::PickBetter { trials } => {
                        let pilot_seed: u64 = rng.random();
                        let a = Plan::Random(wbu);
                        let b = Plan::Fixed(sm);
                        let (mut va, mut vb) = (0.0, 0.0);
                        for t in 0..trials as u64 {
                            let r = sample_realization(
                                inst,
                                &mut trial_stream(pilot_seed, t, Purpose::Realization),
                            );
                            let mut pr = trial_stream(pilot_seed, t, Purpose::Policy);
                            let mut mr = trial_stream(pilot_seed, t, Purpose::Mixture);
                            va += run_plan(inst, &spec, &a, r.clone(), &mut pr, &mut mr).value;
                            let mut pr = trial_stream(pilot_seed, t, Purpose::Policy);
                            vb += run_plan(inst, &spec, &b, r, &mut pr, &mut mr).value;
                        }
                        let n = trials as f64;
                        note = Some(format!(
                            "pick-better: wbu {:.9} vs sm {:.9} over {trials} pilot trials, chose {}",
                            va / n,
                            vb / n,
                            if va >= vb { "wbu" } else { "sm" }
                        ));
                        if va >= vb {
                            a
                        } else {
                            b
                        }
                    }
                }
            }
            PolicyKind::EdgeDiscard => Plan::Discard(max_value_matching(inst, &all_d1, &all_s).0),
            PolicyKind::OcrsPricing => {
                let ear = solve_ear(inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER)?;
                Plan::Ocrs(Box::new(ear))
            }
        };
        Ok(PreparedPolicy {
            spec,
            inst,
            seed,
            plan,
            note,
        })
    }

    pub fn spec(&self) -> &PolicySpec {
        &self.spec
    }

    /// Planning remarks worth reporting (e.g. which candidate pick-better chose).
    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    /// Runs against a given realization with explicit coin streams.
    pub fn run_with<R: Rng + ?Sized, M: Rng + ?Sized>(
        &self,
        realization: Realization,
        policy_rng: &mut R,
        mixture_rng: &mut M,
    ) -> PolicyRun {
        run_plan(self.inst, &self.spec, &self.plan, realization, policy_rng, mixture_rng)
    }

    /// Trial `t`: realization, policy coins and mixture coins come from the
    /// trial's streams, so different policies see the same realizations.
    pub fn run_trial(&self, trial: u64) -> PolicyRun {
        let r = sample_realization(
            self.inst,
            &mut trial_stream(self.seed, trial, Purpose::Realization),
        );
        self.run_with(
            r,
            &mut trial_stream(self.seed, trial, Purpose::Policy),
            &mut trial_stream(self.seed, trial, Purpose::Mixture),
        )
    }

    /// Values of trials `0..trials`, computed in parallel.
    pub fn values(&self, trials: usize) -> Vec<f64> {
        (0..trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial(t).value)
            .collect()
    }

    /// First-stage matchings with their probabilities.
    fn first_stage_law(&self) -> Result<Vec<(f64, Matching)>> {
        Ok(match &self.plan {
            Plan::Random(d) => d.atoms.clone(),
            Plan::Fixed(m) => vec![(1.0, m.clone())],
            Plan::Hedge { lambda, wbu, sm } => {
                let mut out: Vec<(f64, Matching)> =
                    wbu.atoms.iter().map(|(p, m)| (lambda * p, m.clone())).collect();
                out.push((1.0 - lambda, sm.clone()));
                out
            }
            Plan::Discard(m) => {
                let edges = m.edges();
                Error::size_guard("discard coins", edges.len(), EXACT_POLICY_LIMIT)?;
                let p = 0.5f64.powi(edges.len() as i32);
                (0u64..1 << edges.len())
                    .map(|bits| {
                        let kept = (0..edges.len())
                            .filter(|&k| bits >> k & 1 == 1)
                            .map(|k| edges[k])
                            .collect();
                        (p, Matching::new(kept))
                    })
                    .collect()
            }
            Plan::Ocrs(_) => {
                return Err(Error::config("no exact evaluation for the pricing policy"));
            }
        })
    }

    /// Exact expected value by enumerating first-stage outcomes and
    /// second-stage realizations (matching instances only).
    pub fn exact_value(&self) -> Result<f64> {
        let law = self.first_stage_law()?;
        let inst = self.inst;
        let relevant: Vec<bool> = (0..inst.num_demands())
            .map(|i| inst.demands()[i].stage == Stage::Second)
            .collect();
        let mut total = 0.0;
        for (p, m) in law.iter().filter(|(p, _)| *p > 0.0) {
            let base = m.value(inst);
            let mut exp = 0.0;
            for_each_realization(inst, &relevant, EXACT_POLICY_LIMIT, |q, avail| {
                let r = Realization::from_mask(avail.to_vec());
                exp += q * second_stage(inst, self.spec.second_stage, m, &r).value(inst);
            })?;
            total += p * (base + exp);
        }
        Ok(total)
    }
}

fn run_plan<R: Rng + ?Sized, M: Rng + ?Sized>(
    inst: &TwoStageInstance,
    spec: &PolicySpec,
    plan: &Plan,
    realization: Realization,
    policy_rng: &mut R,
    mixture_rng: &mut M,
) -> PolicyRun {
    let first = match plan {
        Plan::Random(d) => d.sample(policy_rng).clone(),
        Plan::Fixed(m) => m.clone(),
        Plan::Hedge { lambda, wbu, sm } => {
            if mixture_rng.random::<f64>() < *lambda {
                wbu.sample(policy_rng).clone()
            } else {
                sm.clone()
            }
        }
        Plan::Discard(m) => Matching::new(
            m.edges()
                .iter()
                .copied()
                .filter(|_| policy_rng.random::<f64>() >= 0.5)
                .collect(),
        ),
        Plan::Ocrs(ear) => {
            let run = ocrs_run(inst, ear, realization, policy_rng);
            return PolicyRun {
                first_stage: run.first,
                realization: run.realization,
                second_stage: run.second,
                prices: Some(run.prices),
                value: run.value,
            };
        }
    };
    let second = second_stage(inst, spec.second_stage, &first, &realization);
    let value = first.value(inst) + second.value(inst);
    PolicyRun {
        first_stage: first,
        realization,
        second_stage: second,
        prices: None,
        value,
    }
}

/// Plans `spec` with a seed drawn from `rng` and runs it once.
pub fn run_policy<R: Rng + ?Sized>(
    spec: &PolicySpec,
    inst: &TwoStageInstance,
    rng: &mut R,
) -> Result<PolicyRun> {
    let seed: u64 = rng.random();
    Ok(PreparedPolicy::new(*spec, inst, seed)?.run_trial(0))
}

/// Mean and standard error over `trials` independently seeded runs;
/// deterministic given `seed`.
pub fn expected_value(
    spec: &PolicySpec,
    inst: &TwoStageInstance,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::config("trials must be at least 1"));
    }
    let prepared = PreparedPolicy::new(*spec, inst, seed)?;
    Ok(mean_stderr(&prepared.values(trials)))
}
