//! `twostage`: generate instances, solve the balance program, simulate and
//! benchmark policies, evaluate the factor-revealing program, and price.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use twostage::balance::{
    decompose, solve_balance, verify_decomposition, ConvexG, DEFAULT_GROUP_TOL, DEFAULT_MAX_ITER,
    DEFAULT_TOL,
};
use twostage::bench::fr::{fr_solve, parse_lambda, DEFAULT_GRID, DEFAULT_REFINE_TOL};
use twostage::bench::robustness::robustness_check;
use twostage::bench::{compare, format_sig, instance_digest, round_json, CompareConfig, ExperimentConfig};
use twostage::instance::{
    gen_edge_weighted_tight, gen_geo, gen_pricing_tight, gen_random, gen_worst_case, GeoSpec,
    PiSpec, RandomSpec, WeightMode, WeightSpec,
};
use twostage::policies::{PolicySpec, PreparedPolicy, SecondStage};
use twostage::pricing::{ocrs_two_stage, opt_offline_mp_estimate, opt_offline_mp_exact, solve_ear};
use twostage::pricing::{DEFAULT_EAR_MAX_ITER, DEFAULT_EAR_TOL};
use twostage::rng::{seeded, trial_stream, Purpose};
use twostage::{Error, Matching, Realization, TwoStageInstance};

const EXIT_USAGE: u8 = 2;
const EXIT_VALIDATION: u8 = 3;
const EXIT_NOT_CONVERGED: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "twostage", version, about = "Two-stage stochastic matching toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an instance file.
    Gen {
        #[command(subcommand)]
        family: GenFamily,
    },
    /// Solve the balanced-utilization program and decompose its solution.
    SolveBalance(SolveBalanceArgs),
    /// Run one trial of a policy.
    Simulate(SimulateArgs),
    /// Compare policies against the offline and online optima.
    Bench(BenchArgs),
    /// Minimize the factor-revealing program for a hedge weight.
    Fr(FrArgs),
    /// Solve the ex-ante relaxation of a pricing instance and run the pricing policy.
    Price(PriceArgs),
    /// Check the balance policy's robustness bounds.
    Robustness(RobustnessArgs),
}

#[derive(Args)]
struct OutArg {
    /// Output file (standard output if omitted).
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenFamily {
    /// Path-like worst case for the balance policy.
    WorstCase {
        #[arg(long, value_parser = clap::value_parser!(u32).range(1..=100_000))]
        n: u32,
        #[command(flatten)]
        out: OutArg,
    },
    /// Erdős–Rényi style random instance.
    Random {
        #[arg(long)]
        n1: usize,
        #[arg(long)]
        n2: usize,
        #[arg(long)]
        ns: usize,
        #[arg(long)]
        edge_prob: f64,
        /// unit | const:W | uniform:LO:HI
        #[arg(long, default_value = "unit")]
        weights: String,
        /// P | const:P | uniform:LO:HI
        #[arg(long, default_value = "0.5")]
        pi: String,
        /// Draw a weight for every edge (same grammar as --weights).
        #[arg(long)]
        edge_weights: Option<String>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Synthetic ride-hailing instance on a square city.
    Geo {
        #[arg(long)]
        riders1: usize,
        #[arg(long)]
        riders2: usize,
        #[arg(long)]
        drivers: usize,
        #[arg(long)]
        radius: f64,
        /// unit | idle-quantile
        #[arg(long, default_value = "unit")]
        weight_mode: String,
        #[arg(long)]
        side: Option<f64>,
        #[arg(long)]
        pi: Option<f64>,
        /// Build a scenario list with one scenario per simulated day.
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Tight instance for market efficiency.
    PricingTight {
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutArg,
    },
    /// Tight instance for edge-weighted matching.
    EdgeTight {
        #[arg(long)]
        eps: f64,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Args)]
struct SolveBalanceArgs {
    instance: PathBuf,
    #[arg(long, default_value = "quad")]
    g: String,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct SimulateArgs {
    instance: PathBuf,
    #[arg(long)]
    policy: String,
    #[arg(long)]
    seed: u64,
    /// Trial index within the seed's streams.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Args)]
struct BenchArgs {
    /// Instance file (may instead come from --config).
    instance: Option<PathBuf>,
    /// Policy spec; repeat for several policies.
    #[arg(long = "policy")]
    policies: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON experiment config (policies, trials, seed, ...); flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
    /// Estimate benchmarks by Monte Carlo even when enumeration is possible.
    #[arg(long)]
    no_exact: bool,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct FrArgs {
    /// A number or an expression such as 1/(e-1).
    #[arg(long)]
    lambda: String,
    #[arg(long, conflicts_with = "weighted")]
    unweighted: bool,
    #[arg(long)]
    weighted: bool,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    #[arg(long, default_value_t = DEFAULT_REFINE_TOL)]
    refine_tol: f64,
    /// Print the result as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PriceArgs {
    instance: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Monte Carlo samples for the offline optimum (used without finite supports).
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_EAR_TOL)]
    tol: f64,
    #[arg(long, default_value_t = DEFAULT_EAR_MAX_ITER)]
    max_iter: usize,
    #[command(flatten)]
    out: OutArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum SecondArg {
    Exact,
    Greedy,
}

#[derive(Args)]
struct RobustnessArgs {
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "exact")]
    second: SecondArg,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    out: OutArg,
}

enum Failure {
    Usage(String),
    Lib(Error),
    NotConverged(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let line = text.lines().next().unwrap_or("usage error").trim_start_matches("error: ");
            eprintln!("twostage: {line}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("twostage: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("twostage: {msg}");
            ExitCode::from(EXIT_NOT_CONVERGED)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("twostage: {}", e.to_string().replace('\n', " "));
            match e {
                Error::Io(_) => ExitCode::from(EXIT_IO),
                _ => ExitCode::from(EXIT_VALIDATION),
            }
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Gen { family } => gen(family),
        Command::SolveBalance(a) => solve_balance_cmd(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::Fr(a) => fr(a),
        Command::Price(a) => price(a),
        Command::Robustness(a) => robustness(a),
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> CliResult<()> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Lib(e.into())),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Lib(e.into())),
                _ => Ok(()),
            }
        }
    }
}

fn emit_json(out: &Option<PathBuf>, v: Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("json values serialize");
    s.push('\n');
    emit(out, &s)
}

fn load(path: &Path) -> CliResult<TwoStageInstance> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Lib(e.into()))?;
    Ok(TwoStageInstance::from_json(&text)?)
}

fn set_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn gen(family: GenFamily) -> CliResult<()> {
    let (inst, out) = match family {
        GenFamily::WorstCase { n, out } => (gen_worst_case(n as usize), out),
        GenFamily::Random {
            n1,
            n2,
            ns,
            edge_prob,
            weights,
            pi,
            edge_weights,
            seed,
            out,
        } => {
            let spec = RandomSpec {
                n1,
                n2,
                ns,
                edge_prob,
                weights: weights.parse::<WeightSpec>()?,
                pi: pi.parse::<PiSpec>()?,
                edge_weights: edge_weights.map(|w| w.parse::<WeightSpec>()).transpose()?,
            };
            (gen_random(&spec, seed)?, out)
        }
        GenFamily::Geo {
            riders1,
            riders2,
            drivers,
            radius,
            weight_mode,
            side,
            pi,
            days,
            seed,
            out,
        } => {
            let mut spec = GeoSpec::new(riders1, riders2, drivers, radius, weight_mode.parse::<WeightMode>()?);
            if let Some(s) = side {
                spec.side = s;
            }
            if let Some(p) = pi {
                spec.pi = p;
            }
            spec.days = days;
            (gen_geo(&spec, seed)?, out)
        }
        GenFamily::PricingTight { eps, out } => (gen_pricing_tight(eps)?, out),
        GenFamily::EdgeTight { eps, out } => (gen_edge_weighted_tight(eps)?, out),
    };
    emit(&out.output, &inst.to_json())
}

fn ids_map(inst: &TwoStageInstance, values: &[f64], supplies: bool) -> BTreeMap<u32, f64> {
    values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let id = if supplies {
                inst.supplies()[k].id
            } else {
                inst.demands()[k].id
            };
            (id, v)
        })
        .collect()
}

fn edge_values(inst: &TwoStageInstance, x: &[f64]) -> Vec<Value> {
    inst.edges()
        .iter()
        .zip(x)
        .filter(|(_, &v)| v > 0.0)
        .map(|(e, &v)| {
            json!({
                "demand": inst.demands()[e.demand].id,
                "supply": inst.supplies()[e.supply].id,
                "x": v,
            })
        })
        .collect()
}

fn solve_balance_cmd(a: SolveBalanceArgs) -> CliResult<()> {
    let g: ConvexG = a.g.parse()?;
    let inst = load(&a.instance)?;
    let sol = solve_balance(&inst, g, a.tol, a.max_iter);
    let dec = decompose(&inst, &sol, DEFAULT_GROUP_TOL);
    let check = verify_decomposition(&inst, &sol, &dec, 1e-6);
    let demand_ids = |v: &[usize]| v.iter().map(|&i| inst.demands()[i].id).collect::<Vec<_>>();
    let supply_ids = |v: &[usize]| v.iter().map(|&j| inst.supplies()[j].id).collect::<Vec<_>>();
    let levels: Vec<Value> = dec
        .levels
        .iter()
        .map(|l| json!({"c": l.c, "demands": demand_ids(&l.demands), "supplies": supply_ids(&l.supplies)}))
        .collect();
    let out = json!({
        "instance_digest": instance_digest(&inst),
        "g": g,
        "converged": sol.converged,
        "solver_gap": sol.solver_gap,
        "iterations": sol.iterations,
        "objective": sol.objective,
        "utilization": ids_map(&inst, &sol.y, true),
        "residual": ids_map(&inst, &sol.residual, true),
        "refined_bound": sol.refined_bound(&inst),
        "x": edge_values(&inst, &sol.x.x),
        "decomposition": {
            "level0_demands": demand_ids(&dec.level0_demands),
            "level0_supplies": supply_ids(&dec.level0_supplies),
            "levels": levels,
        },
        "verification": check,
    });
    emit_json(&a.out.output, out)?;
    if !sol.converged {
        return Err(Failure::NotConverged(format!(
            "balance solver stopped after {} iterations with gap {:e}",
            sol.iterations, sol.solver_gap
        )));
    }
    Ok(())
}

fn pairs(inst: &TwoStageInstance, m: &Matching) -> Vec<[u32; 2]> {
    m.pairs(inst).into_iter().map(|(d, s)| [d, s]).collect()
}

fn realization_json(inst: &TwoStageInstance, r: &Realization) -> Value {
    let mut v = json!({ "available": r.available_ids(inst) });
    if let Some(values) = &r.values {
        let map: BTreeMap<u32, f64> = r
            .available_indices()
            .into_iter()
            .map(|i| (inst.demands()[i].id, values[i]))
            .collect();
        v["values"] = json!(map);
    }
    v
}

fn prices_json(inst: &TwoStageInstance, prices: &[Option<f64>]) -> BTreeMap<u32, f64> {
    prices
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.map(|p| (inst.demands()[i].id, p)))
        .collect()
}

fn parse_policy(text: &str) -> CliResult<PolicySpec> {
    Ok(text.parse::<PolicySpec>()?)
}

fn simulate(a: SimulateArgs) -> CliResult<()> {
    set_threads(a.threads)?;
    let spec = parse_policy(&a.policy)?;
    let inst = load(&a.instance)?;
    let prepared = PreparedPolicy::new(spec, &inst, a.seed)?;
    let run = prepared.run_trial(a.trial);
    let mut out = json!({
        "instance_digest": instance_digest(&inst),
        "policy": spec.to_string(),
        "seed": a.seed,
        "trial": a.trial,
        "first_stage": pairs(&inst, &run.first_stage),
        "realization": realization_json(&inst, &run.realization),
        "second_stage": pairs(&inst, &run.second_stage),
        "value": run.value,
    });
    if let Some(p) = &run.prices {
        out["prices"] = json!(prices_json(&inst, p));
    }
    if let Some(note) = prepared.note() {
        out["note"] = json!(note);
    }
    emit_json(&a.out.output, out)
}

fn bench(a: BenchArgs) -> CliResult<()> {
    let cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Lib(e.into()))?;
            Some(ExperimentConfig::from_json(&text)?)
        }
        None => None,
    };
    let instance = a
        .instance
        .clone()
        .or_else(|| cfg.as_ref().and_then(|c| c.instance.clone().map(PathBuf::from)))
        .ok_or_else(|| Failure::Usage("bench needs an instance file".into()))?;
    let seed = a
        .seed
        .or(cfg.as_ref().map(|c| c.seed))
        .ok_or_else(|| Failure::Usage("bench needs --seed (or a config with a seed)".into()))?;
    let trials = a.trials.or(cfg.as_ref().map(|c| c.trials)).unwrap_or(10_000);
    let mut policies = a
        .policies
        .iter()
        .map(|p| parse_policy(p))
        .collect::<CliResult<Vec<_>>>()?;
    if policies.is_empty() {
        if let Some(c) = &cfg {
            policies = c.policies.clone();
        }
    }
    if policies.is_empty() {
        return Err(Failure::Usage("bench needs at least one --policy".into()));
    }
    set_threads(a.threads.or(cfg.as_ref().and_then(|c| c.threads)))?;
    let exact = !a.no_exact && cfg.as_ref().is_none_or(|c| c.exact_benchmarks);
    let config = CompareConfig {
        trials,
        seed,
        exact_benchmarks: exact,
    };
    let inst = load(&instance)?;
    let report = compare(&inst, &policies, &config)?;
    if let Some(p) = &a.json {
        emit(&Some(p.clone()), &report.to_json())?;
    }
    if let Some(p) = &a.csv {
        emit(&Some(p.clone()), &report.to_csv())?;
    }
    if a.json.is_none() && a.csv.is_none() {
        emit(&None, &report.to_csv())?;
    }
    Ok(())
}

fn fr(a: FrArgs) -> CliResult<()> {
    if !a.unweighted && !a.weighted {
        return Err(Failure::Usage("fr needs --unweighted or --weighted".into()));
    }
    let lambda = parse_lambda(&a.lambda)?;
    let sol = fr_solve(lambda, a.weighted, a.grid, a.refine_tol)?;
    if a.json {
        return emit_json(&None, serde_json::to_value(sol).expect("fr solution serializes"));
    }
    let p = sol.point;
    let text = format!(
        "{}\ns={} k={} w_bar={} w_tilde={} c={} lambda={}\n",
        format_sig(sol.value),
        format_sig(p.s),
        format_sig(p.k),
        format_sig(p.w_bar),
        format_sig(p.w_tilde),
        format_sig(p.c()),
        format_sig(p.lambda)
    );
    emit(&None, &text)
}

fn price(a: PriceArgs) -> CliResult<()> {
    let inst = load(&a.instance)?;
    let ear = solve_ear(&inst, a.tol, a.max_iter)?;
    let mut rng = trial_stream(a.seed, 0, Purpose::Policy);
    let run = ocrs_two_stage(&inst, &ear, &mut rng);
    let offline = match opt_offline_mp_exact(&inst) {
        Ok(v) => json!({"mean": v, "stderr": 0.0, "exact": true}),
        Err(_) => {
            let (m, se) = opt_offline_mp_estimate(&inst, a.samples, &mut seeded(a.seed))?;
            json!({"mean": m, "stderr": se, "exact": false})
        }
    };
    let out = json!({
        "instance_digest": instance_digest(&inst),
        "seed": a.seed,
        "ear": {
            "objective": ear.objective,
            "solver_gap": ear.solver_gap,
            "converged": ear.converged,
            "iterations": ear.iterations,
            "y_demand": ids_map(&inst, &ear.y_demand, false),
            "y_supply": ids_map(&inst, &ear.y_supply, true),
            "prices": prices_json(&inst, &ear.prices),
            "x": edge_values(&inst, &ear.x.x),
        },
        "run": {
            "first_stage": pairs(&inst, &run.first),
            "realization": realization_json(&inst, &run.realization),
            "second_stage": pairs(&inst, &run.second),
            "value": run.value,
        },
        "opt_offline_mp": offline,
    });
    emit_json(&a.out.output, out)?;
    if !ear.converged {
        return Err(Failure::NotConverged(format!(
            "relaxation solver stopped after {} iterations with gap {:e}",
            ear.iterations, ear.solver_gap
        )));
    }
    Ok(())
}

fn robustness(a: RobustnessArgs) -> CliResult<()> {
    let inst = load(&a.instance)?;
    let second = match a.second {
        SecondArg::Exact => SecondStage::Exact,
        SecondArg::Greedy => SecondStage::GreedyMaximal,
    };
    let report = robustness_check(&inst, second, a.trials, a.seed)?;
    emit_json(&a.out.output, serde_json::to_value(report).expect("report serializes"))
}
