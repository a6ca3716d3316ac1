use rand::Rng;
use twostage::policies::{PolicySpec, PreparedPolicy};
use twostage::pricing::{opt_offline_mp_exact, solve_ear, DEFAULT_EAR_MAX_ITER, DEFAULT_EAR_TOL};
use twostage::rng::{mean_stderr, seeded};
use twostage::{TwoStageInstance, Valuation};

/// Small instances whose valuations all have finite support.
fn atom_instance(seed: u64) -> TwoStageInstance {
    let mut rng = seeded(seed);
    let ns = rng.random_range(1..=3u32);
    let n1 = rng.random_range(0..=2u32);
    let n2 = rng.random_range(1..=3u32);
    let mut b = TwoStageInstance::builder();
    for j in 0..ns {
        b = b.supply(j, rng.random_range(0.0..1.0));
    }
    for i in 0..n1 + n2 {
        let val = Valuation::TwoPoint {
            hi: rng.random_range(0.5..4.0),
            p: rng.random_range(0.1..0.9),
        };
        b = if i < n1 {
            b.first_priced(i, val, 0.0)
        } else {
            b.second_valued(i, val)
        };
        for j in 0..ns {
            if rng.random_bool(0.6) {
                b = b.edge(i, j);
            }
        }
    }
    b.build().unwrap()
}

#[test]
fn relaxation_bounds_the_offline_optimum() {
    for seed in 0..30 {
        let inst = atom_instance(seed);
        let ear = solve_ear(&inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap();
        let mp = opt_offline_mp_exact(&inst).unwrap();
        assert!(ear.objective >= mp - 1e-6, "seed {seed}: relaxation {} < offline {mp}", ear.objective);
    }
}

#[test]
fn pricing_policy_keeps_half_the_relaxation() {
    for seed in 0..10 {
        let inst = atom_instance(100 + seed);
        let ear = solve_ear(&inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap();
        let policy = PreparedPolicy::new(PolicySpec::ocrs(), &inst, seed).unwrap();
        let (mean, se) = mean_stderr(&policy.values(20_000));
        assert!(
            mean >= 0.5 * ear.objective - 4.0 * se - 1e-9,
            "seed {seed}: {mean} ± {se} vs relaxation {}",
            ear.objective
        );
    }
}

#[test]
fn prices_respect_the_marginals() {
    for seed in 0..10 {
        let inst = atom_instance(200 + seed);
        let ear = solve_ear(&inst, DEFAULT_EAR_TOL, DEFAULT_EAR_MAX_ITER).unwrap();
        for &i in inst.second_stage() {
            let price = ear.prices[i].expect("second-stage demand gets a price");
            assert!(price >= 0.0);
            assert!(ear.y_demand[i] <= 1.0 + 1e-9);
        }
        for &i in inst.first_stage() {
            assert!(ear.prices[i].is_none());
        }
        for &y in &ear.y_supply {
            assert!((-1e-9..=1.0 + 1e-9).contains(&y));
        }
    }
}
