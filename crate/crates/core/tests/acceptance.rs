//! Acceptance suite. Runs every criterion in sequence and prints one
//! PASS/FAIL line per criterion; exits non-zero if any criterion fails.

use std::f64::consts::E;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use twostage::balance::{
    check_g_invariance, decompose, solve_balance, verify_decomposition, ConvexG,
    DEFAULT_GROUP_TOL, DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use twostage::bench::fr::{fr_solve, parse_lambda, DEFAULT_GRID, DEFAULT_REFINE_TOL};
use twostage::bench::robustness::robustness_check;
use twostage::bench::{compare, online_guards_pass, opt_offline_exact, opt_online_exact, CompareConfig};
use twostage::instance::{
    gen_edge_weighted_tight, gen_pricing_tight, gen_random, gen_worst_case, PiSpec, RandomSpec, WeightSpec,
};
use twostage::policies::{is_unweighted, unweighted_lambda, PolicySpec, PreparedPolicy, SecondStage};
use twostage::pricing::{
    fixed_price_estimate, ocrs_full_variant, opt_offline_mp_exact, single_stage_exact, solve_ear,
    DEFAULT_EAR_MAX_ITER, DEFAULT_EAR_TOL,
};
use twostage::rng::seeded;
use twostage::submodular::{
    complement_weight, enumerate_dual_bases, exact_fw, local_search_base, RankOracle, DEFAULT_EPSILON,
    DEFAULT_ORACLE_SAMPLES, DEFAULT_MAX_PASSES,
};
use twostage::{Matching, TwoStageInstance, Valuation};

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        passed,
        detail: detail.into(),
    }
}

type Criterion = (u32, &'static str, u64, fn() -> Verdict);

const CRITERIA: &[Criterion] = &[
    (1, "fr_constants", 30, fr_constants),
    (2, "worst_case_ratio", 120, worst_case_ratio),
    (3, "decomposition_suite", 120, decomposition_suite),
    (4, "g_invariance", 60, g_invariance),
    (5, "rounding_fidelity", 60, rounding_fidelity),
    (6, "benchmark_dominance", 600, benchmark_dominance),
    (7, "submodular_guarantee", 300, submodular_guarantee),
    (8, "ocrs_invariants", 120, ocrs_invariants),
    (9, "pricing_constants", 120, pricing_constants),
    (10, "single_stage_pricing", 120, single_stage_pricing),
    (11, "edge_weighted", 180, edge_weighted),
    (12, "robustness", 300, robustness),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for &(n, name, limit, f) in CRITERIA {
        if !filters.is_empty() && !filters.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let mut v = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                verdict(false, format!("panicked: {msg}"))
            }
        };
        let elapsed = start.elapsed();
        if elapsed > Duration::from_secs(limit) {
            v.passed = false;
            v.detail = format!("{} (over the {limit} s budget)", v.detail);
        }
        if !v.passed {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {name:<22} {} {:>7.2}s  {}",
            if v.passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail
        );
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}

fn tiny_spec(rng: &mut impl Rng, unit: bool, edge_weights: Option<WeightSpec>) -> RandomSpec {
    RandomSpec {
        n1: rng.random_range(1..=4),
        n2: rng.random_range(1..=6),
        ns: rng.random_range(1..=6),
        edge_prob: rng.random_range(0.3..0.8),
        weights: if unit {
            WeightSpec::Unit
        } else {
            WeightSpec::Uniform { lo: 0.2, hi: 2.0 }
        },
        pi: PiSpec::Uniform { lo: 0.1, hi: 0.9 },
        edge_weights,
    }
}

fn tiny_instance(seed: u64, unit: bool) -> TwoStageInstance {
    let mut rng = seeded(seed);
    let spec = tiny_spec(&mut rng, unit, None);
    gen_random(&spec, seed).unwrap()
}

fn z(observed: f64, expected: f64, n: usize) -> f64 {
    let p = expected.clamp(0.0, 1.0);
    let sigma = (p * (1.0 - p) / n as f64).sqrt();
    if sigma == 0.0 {
        if (observed - expected).abs() < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (observed - expected) / sigma
    }
}

fn fr_constants() -> Verdict {
    let lambda = parse_lambda("1/(e-1)").unwrap();
    let unweighted = fr_solve(lambda, false, DEFAULT_GRID, DEFAULT_REFINE_TOL).unwrap();
    let target = 1.0 - 1.0 / E + 1.0 / (E * E);
    let weighted = fr_solve(0.7, true, DEFAULT_GRID, DEFAULT_REFINE_TOL).unwrap();
    let ok = (unweighted.value - target).abs() <= 1e-6 && (weighted.value - 0.7613).abs() <= 5e-4;
    verdict(
        ok,
        format!(
            "unweighted {:.9} (target {target:.9}), weighted {:.9} (target 0.7613)",
            unweighted.value, weighted.value
        ),
    )
}

fn worst_case_ratio() -> Verdict {
    let big = gen_worst_case(50);
    let report = compare(&big, &[PolicySpec::wbu()], &CompareConfig::new(10_000, 2024)).unwrap();
    let big_ratio = report
        .rows
        .iter()
        .find(|r| r.benchmark == "opt_offline")
        .unwrap()
        .ratio;
    let small = gen_worst_case(1);
    let report = compare(&small, &[PolicySpec::wbu()], &CompareConfig::new(100_000, 7)).unwrap();
    let small_ratio = report
        .rows
        .iter()
        .find(|r| r.benchmark == "opt_offline")
        .unwrap()
        .ratio;
    let policy = PreparedPolicy::new(PolicySpec::wbu(), &small, 7).unwrap();
    let exact = policy.exact_value().unwrap() / opt_offline_exact(&small).unwrap();
    let ok = (0.74..=0.78).contains(&big_ratio)
        && (small_ratio - 6.0 / 7.0).abs() <= 0.01
        && (exact - 6.0 / 7.0).abs() <= 1e-9;
    verdict(
        ok,
        format!("n=50 ratio {big_ratio:.5}; n=1 ratio {small_ratio:.5} (MC), {exact:.9} (exact)"),
    )
}

fn decomposition_suite() -> Verdict {
    let mut worst = [0.0f64; 4];
    let mut failures = 0;
    for seed in 0..100u64 {
        let mut rng = seeded(1000 + seed);
        let spec = RandomSpec {
            n1: rng.random_range(1..=30),
            n2: rng.random_range(0..=5),
            ns: rng.random_range(1..=30),
            edge_prob: rng.random_range(0.05..0.5),
            weights: if seed % 2 == 0 {
                WeightSpec::Unit
            } else {
                WeightSpec::Uniform { lo: 0.1, hi: 5.0 }
            },
            pi: PiSpec::Const { value: 0.5 },
            edge_weights: None,
        };
        let inst = gen_random(&spec, 1000 + seed).unwrap();
        let sol = solve_balance(&inst, ConvexG::Quadratic, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let dec = decompose(&inst, &sol, DEFAULT_GROUP_TOL);
        let rep = verify_decomposition(&inst, &sol, &dec, 1e-6);
        let closed = rep.closed_form.worst;
        let vals = [rep.uniformity.worst, rep.monotonicity.worst, rep.saturation.worst, closed];
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(v);
        }
        if !rep.all_passed() || closed > 1e-5 {
            failures += 1;
        }
    }
    verdict(
        failures == 0,
        format!(
            "{failures} failing instances; worst uniformity {:.2e}, monotonicity {:.2e}, saturation {:.2e}, closed form {:.2e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn g_invariance() -> Verdict {
    let mut worst = 0.0f64;
    for seed in 0..10u64 {
        let spec = RandomSpec {
            n1: 8,
            n2: 0,
            ns: 8,
            edge_prob: 0.35,
            weights: WeightSpec::Uniform { lo: 0.2, hi: 3.0 },
            pi: PiSpec::Const { value: 0.5 },
            edge_weights: None,
        };
        let inst = gen_random(&spec, 2000 + seed).unwrap();
        worst = worst.max(check_g_invariance(&inst, 1e-4));
    }
    verdict(worst <= 1e-4, format!("largest L-inf gap {worst:.2e}"))
}

fn rounding_fidelity() -> Verdict {
    const DRAWS: usize = 50_000;
    let mut worst_z = 0.0f64;
    let mut checked = 0;
    for seed in 0..5u64 {
        let spec = RandomSpec {
            n1: 5,
            n2: 2,
            ns: 5,
            edge_prob: 0.45,
            weights: WeightSpec::Uniform { lo: 0.3, hi: 2.0 },
            pi: PiSpec::Const { value: 0.5 },
            edge_weights: None,
        };
        let inst = gen_random(&spec, 3000 + seed).unwrap();
        let sol = solve_balance(&inst, ConvexG::Quadratic, DEFAULT_TOL, DEFAULT_MAX_ITER);
        let policy = PreparedPolicy::new(PolicySpec::wbu(), &inst, seed).unwrap();
        let mut counts = vec![0usize; inst.edges().len()];
        for t in 0..DRAWS as u64 {
            for &e in policy.run_trial(t).first_stage.edges() {
                counts[e] += 1;
            }
        }
        for (e, &count) in counts.iter().enumerate() {
            if inst.demands()[inst.edges()[e].demand].stage != twostage::Stage::First {
                continue;
            }
            checked += 1;
            let freq = count as f64 / DRAWS as f64;
            worst_z = worst_z.max(z(freq, sol.x.x[e], DRAWS).abs());
        }
    }
    verdict(worst_z <= 3.0, format!("{checked} edges, largest |z| {worst_z:.2}"))
}

fn benchmark_dominance() -> Verdict {
    let hg = PolicySpec::hg_randomize(Some(unweighted_lambda()));
    let (mut used, mut unweighted) = (0, 0);
    let mut issues = Vec::new();
    let (mut min_wbu, mut min_hg) = (f64::INFINITY, f64::INFINITY);
    let mut seed = 0u64;
    while used < 200 {
        seed += 1;
        let inst = tiny_instance(4000 + seed, seed.is_multiple_of(2));
        if !online_guards_pass(&inst) {
            continue;
        }
        used += 1;
        let offline = opt_offline_exact(&inst).unwrap();
        let online = opt_online_exact(&inst).unwrap();
        if online > offline + 1e-9 {
            issues.push(format!("seed {seed}: online {online} > offline {offline}"));
        }
        let wbu = PreparedPolicy::new(PolicySpec::wbu(), &inst, seed).unwrap().exact_value().unwrap();
        if offline > 0.0 {
            min_wbu = min_wbu.min(wbu / offline);
        }
        if wbu < 0.75 * offline - 1e-9 {
            issues.push(format!("seed {seed}: wbu {wbu} < 0.75 offline {offline}"));
        }
        if is_unweighted(&inst) {
            unweighted += 1;
            let v = PreparedPolicy::new(hg, &inst, seed).unwrap().exact_value().unwrap();
            if online > 0.0 {
                min_hg = min_hg.min(v / online);
            }
            if v < 0.767 * online - 1e-9 {
                issues.push(format!("seed {seed}: hg {v} < 0.767 online {online}"));
            }
        }
    }
    verdict(
        issues.is_empty(),
        format!(
            "{used} instances ({unweighted} unweighted), min wbu/offline {min_wbu:.4}, min hg/online {min_hg:.4}{}",
            issues.first().map(|s| format!("; {s}")).unwrap_or_default()
        ),
    )
}

fn submodular_guarantee() -> Verdict {
    let factor = 1.0 - 1.0 / E - DEFAULT_EPSILON;
    let mut failures = 0;
    let mut min_slack = f64::INFINITY;
    for k in 0..50u64 {
        let inst = tiny_instance(5000 + k, k % 3 == 0);
        let bases = enumerate_dual_bases(&inst).unwrap();
        let ns = inst.num_supplies();
        let (mut f_star, mut c_star, mut best) = (0.0, 0.0, f64::NEG_INFINITY);
        for b in &bases {
            let t = b.mask(ns);
            let f = exact_fw(&inst, &t).unwrap();
            let c = complement_weight(&inst, &t);
            if f + c > best {
                best = f + c;
                f_star = f;
                c_star = c;
            }
        }
        let mut rng = seeded(k);
        let oracle = RankOracle::new(&inst, DEFAULT_ORACLE_SAMPLES, &mut rng);
        let out = local_search_base(&inst, DEFAULT_EPSILON, &oracle, DEFAULT_MAX_PASSES);
        let slack = out.objective + 3.0 * out.stderr - (factor * f_star + c_star);
        min_slack = min_slack.min(slack);
        if slack < 0.0 {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures} failures, smallest slack {min_slack:.4}"))
}

fn random_pricing_instance(seed: u64) -> TwoStageInstance {
    let mut rng = seeded(seed);
    let ns = rng.random_range(2..=3u32);
    let n1 = rng.random_range(1..=2u32);
    let n2 = rng.random_range(2..=3u32);
    let mut b = TwoStageInstance::builder();
    for j in 0..ns {
        b = b.supply(j, rng.random_range(0.0..1.0));
    }
    for i in 0..n1 + n2 {
        let val = match rng.random_range(0..3) {
            0 => Valuation::Uniform {
                a: 0.0,
                b: rng.random_range(0.5..2.0),
            },
            1 => Valuation::Exponential {
                rate: rng.random_range(0.5..2.0),
            },
            _ => Valuation::TwoPoint {
                hi: rng.random_range(0.5..3.0),
                p: rng.random_range(0.2..0.8),
            },
        };
        b = if i < n1 {
            b.first_priced(i, val, rng.random_range(0.0..0.5))
        } else {
            b.second_valued(i, val)
        };
        let mut any = false;
        for j in 0..ns {
            if rng.random_bool(0.6) {
                b = b.edge(i, j);
                any = true;
            }
        }
        if !any {
            b = b.edge(i, rng.random_range(0..ns));
        }
    }
    b.build().unwrap()
}

fn ocrs_invariants() -> Verdict {
    const RUNS: usize = 50_000;
    let (mut worst_supply, mut worst_edge) = (0.0f64, 0.0f64);
    let mut checks = 0;
    for k in 0..5u64 {
        let inst = random_pricing_instance(6000 + k);
        let ear = solve_ear(&inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap();
        let freq = ocrs_full_variant(&inst, &ear, RUNS, &mut seeded(k));
        let last = freq.order.len();
        for j in 0..inst.num_supplies() {
            checks += 1;
            let expected = 1.0 - freq.theta[last][j] / 2.0;
            worst_supply = worst_supply.max(z(freq.unmatched[last][j], expected, RUNS).abs());
        }
        for e in 0..inst.edges().len() {
            checks += 1;
            let half = ear.x.x[e] / 2.0;
            worst_edge = worst_edge.max(-z(freq.edge[e], half, RUNS));
        }
    }
    verdict(
        worst_supply <= 3.0 && worst_edge <= 3.0,
        format!("{checks} checks, largest supply |z| {worst_supply:.2}, largest edge shortfall z {worst_edge:.2}"),
    )
}

fn pricing_constants() -> Verdict {
    let example = TwoStageInstance::builder()
        .supply(0, 0.0)
        .second_valued(1, Valuation::Uniform { a: 0.0, b: 1.0 })
        .second_valued(2, Valuation::Uniform { a: 0.0, b: 2.0 })
        .edge(1, 0)
        .edge(2, 0)
        .build()
        .unwrap();
    let none = Matching::empty();
    let (zero, _) = fixed_price_estimate(&example, &none, &[Some(0.0), Some(0.0)], 100_000, &mut seeded(51));
    let (half, _) = fixed_price_estimate(&example, &none, &[Some(0.0), Some(0.5)], 100_000, &mut seeded(52));
    let ear = solve_ear(&example, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap();
    let tight = gen_pricing_tight(0.05).unwrap();
    let ocrs = PreparedPolicy::new(PolicySpec::ocrs(), &tight, 9).unwrap();
    let values = ocrs.values(100_000);
    let alg = values.iter().sum::<f64>() / values.len() as f64;
    let mp = opt_offline_mp_exact(&tight).unwrap();
    let ok = (zero - 1.0).abs() <= 0.005
        && (half - 17.0 / 16.0).abs() <= 0.005
        && (ear.objective - 7.0 / 6.0).abs() <= 1e-4
        && alg <= 1.02
        && (mp - 1.95).abs() <= 1e-12;
    verdict(
        ok,
        format!(
            "zero price {zero:.4}, p2=1/2 {half:.4}, relaxation {:.6}, tight alg {alg:.4} vs offline {mp:.6}",
            ear.objective
        ),
    )
}

fn single_stage_pricing() -> Verdict {
    let factor = 1.0 - 1.0 / E;
    let mut failures = 0;
    let mut min_ratio = f64::INFINITY;
    for k in 0..50u64 {
        let mut rng = seeded(7000 + k);
        let ns = rng.random_range(1..=3u32);
        let nd = rng.random_range(1..=4u32);
        let mut b = TwoStageInstance::builder();
        for j in 0..ns {
            b = b.supply(j, 0.0);
        }
        for i in 0..nd {
            b = b.second_valued(
                i,
                Valuation::TwoPoint {
                    hi: rng.random_range(0.5..3.0),
                    p: rng.random_range(0.1..0.9),
                },
            );
            let mut any = false;
            for j in 0..ns {
                if rng.random_bool(0.5) {
                    b = b.edge(i, j);
                    any = true;
                }
            }
            if !any {
                b = b.edge(i, rng.random_range(0..ns));
            }
        }
        let inst = b.build().unwrap();
        let ear = solve_ear(&inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap();
        let value = single_stage_exact(&inst, &ear).unwrap();
        if ear.objective > 0.0 {
            min_ratio = min_ratio.min(value / ear.objective);
        }
        if value < factor * ear.objective - 1e-6 {
            failures += 1;
        }
    }
    verdict(failures == 0, format!("{failures} failures, smallest ratio to relaxation {min_ratio:.4}"))
}

fn edge_weighted() -> Verdict {
    let mut failures = 0;
    let mut min_ratio = f64::INFINITY;
    for k in 0..50u64 {
        let mut rng = seeded(8000 + k);
        let spec = tiny_spec(&mut rng, true, Some(WeightSpec::Uniform { lo: 0.1, hi: 3.0 }));
        let inst = gen_random(&spec, 8000 + k).unwrap();
        let offline = opt_offline_exact(&inst).unwrap();
        let v = PreparedPolicy::new(PolicySpec::edge_discard(), &inst, k)
            .unwrap()
            .exact_value()
            .unwrap();
        if offline > 0.0 {
            min_ratio = min_ratio.min(v / offline);
        }
        if v < 0.5 * offline - 1e-9 {
            failures += 1;
        }
    }
    let tight = gen_edge_weighted_tight(0.05).unwrap();
    let offline = opt_offline_exact(&tight).unwrap();
    let roster = [
        "wbu", "wbu:g=exp", "gr", "sm", "sm-limit", "hg", "hg:mode=pick-better", "edge-discard", "wbu@greedy",
        "gr@greedy", "edge-discard@greedy",
    ];
    let mut best = 0.0f64;
    for text in roster {
        let spec: PolicySpec = text.parse().unwrap();
        let v = PreparedPolicy::new(spec, &tight, 11).unwrap().exact_value().unwrap();
        best = best.max(v);
    }
    let ok = failures == 0 && best <= 1.02 && (offline - 1.95).abs() <= 1e-12;
    verdict(
        ok,
        format!(
            "{failures} failures, smallest edge-discard/offline {min_ratio:.4}; tight best policy {best:.4} vs offline {offline:.4}"
        ),
    )
}

fn robustness() -> Verdict {
    let mut failures = Vec::new();
    let mut count = 0;
    for k in 0..50u64 {
        let inst = tiny_instance(9000 + k, true);
        for second in [SecondStage::Exact, SecondStage::GreedyMaximal] {
            count += 1;
            let rep = robustness_check(&inst, second, 5_000, k).unwrap();
            if !rep.passed() {
                failures.push(format!("unweighted {k} beta {}", rep.beta));
            }
        }
    }
    for k in 0..50u64 {
        let inst = tiny_instance(9500 + k, false);
        count += 1;
        let rep = robustness_check(&inst, SecondStage::Exact, 5_000, k).unwrap();
        if !rep.passed() {
            failures.push(format!("weighted {k}"));
        }
    }
    verdict(
        failures.is_empty(),
        format!(
            "{count} checks, {} failures{}",
            failures.len(),
            failures.first().map(|s| format!(" (first: {s})")).unwrap_or_default()
        ),
    )
}
