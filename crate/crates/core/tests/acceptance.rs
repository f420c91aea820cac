//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits non-zero if any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use detpac::harness::{run_trials, summarize, ExperimentConfig};
use detpac::instances::{
    bandit, chain, cover_elimination, hard_instance, random_layered, random_tree, theorem1_lower_bound,
    tree_lower_bound,
};
use detpac::learner::{run_eprl, sample_reward, RunConfig};
use detpac::sampling::coverage_function;
use detpac::{min_flow, DemandFn, DeterministicMdp, LearnerState, Policy, RewardKind, Sampler, SamplingRule};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const FLOW_TOL: f64 = 1e-9;
const GAP_ZERO: f64 = 1e-9;
const DUALITY_BUDGET: Duration = Duration::from_secs(10);
const PAC_BUDGET: Duration = Duration::from_secs(120);
const PAC_TRIALS: usize = 500;
const PAC_DELTA: f64 = 0.1;
const SCALING_TRIALS: usize = 100;
const MASTER_SEED: u64 = 20_240_601;

/// Outcome of one criterion.
struct Verdict {
    ok: bool,
    detail: String,
}

impl Verdict {
    fn new(ok: bool, detail: impl Into<String>) -> Self {
        Verdict { ok, detail: detail.into() }
    }
}

/// One benchmarked (instance, rule, ε, δ) configuration and its mean stopping time.
struct Benchmarked {
    name: String,
    mdp: DeterministicMdp,
    rule: SamplingRule,
    eps: f64,
    delta: f64,
    mean_tau: f64,
}

fn pac_threshold() -> f64 {
    PAC_DELTA + 3.0 * (PAC_DELTA / PAC_TRIALS as f64).sqrt()
}

fn random_demand(mdp: &DeterministicMdp, rng: &mut ChaCha8Rng, integral: bool) -> Vec<f64> {
    (0..mdp.num_arcs())
        .map(|_| {
            if integral {
                rng.random_range(0..=3) as f64
            } else if rng.random_bool(0.3) {
                0.0
            } else {
                rng.random_range(0.0..3.0)
            }
        })
        .collect()
}

/// Random layered instance with at most 12 nodes (source and sink included).
fn small_dag(rng: &mut ChaCha8Rng) -> DeterministicMdp {
    loop {
        let states = rng.random_range(1..=3);
        let actions = rng.random_range(1..=3);
        let horizon = rng.random_range(1..=5);
        let mdp = random_layered(states, actions, horizon, 0.8, rng.random()).unwrap();
        if mdp.num_nodes() <= 12 {
            return mdp;
        }
    }
}

fn phi(mdp: &DeterministicMdp, values: Vec<f64>) -> f64 {
    min_flow(mdp, &DemandFn::new(mdp, values).unwrap()).0.value()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 1);
    let mut mismatches = 0;
    for _ in 0..200 {
        let mdp = small_dag(&mut rng);
        let demand = random_demand(&mdp, &mut rng, true);
        let flow = phi(&mdp, demand.clone());
        if flow != common::max_cut(&mdp, &demand) {
            mismatches += 1;
        }
    }
    let elapsed = start.elapsed();
    Verdict::new(
        mismatches == 0 && elapsed < DUALITY_BUDGET,
        format!("200 DAGs, {mismatches} mismatches, {:.2}s", elapsed.as_secs_f64()),
    )
}

fn criterion_2() -> Verdict {
    let mut ok = true;
    let mut detail = Vec::new();
    for m in [2, 3, 5] {
        let (with, bar) = cover_elimination(m, true).unwrap();
        let bar = bar.unwrap();
        let mut demand = vec![1.0; with.num_arcs()];
        demand[bar] = 0.0;
        let a = phi(&with, demand);
        let (without, _) = cover_elimination(m, false).unwrap();
        let b = phi(&without, vec![1.0; without.num_arcs()]);
        ok &= a == (m + 1) as f64 && b == (2 * m) as f64;
        detail.push(format!("m={m}: {a}/{b}"));
    }
    Verdict::new(ok, detail.join(", "))
}

fn criterion_3() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 3);
    let (mut mono, mut bounds, mut sum) = (0, 0, 0);
    for _ in 0..100 {
        let mdp = small_dag(&mut rng);
        let c1 = random_demand(&mdp, &mut rng, false);
        let c2 = random_demand(&mdp, &mut rng, false);

        let upper: Vec<f64> = c1.iter().map(|&c| c + rng.random_range(0.0..1.0)).collect();
        if phi(&mdp, c1.clone()) > phi(&mdp, upper) + FLOW_TOL {
            mono += 1;
        }

        let d = DemandFn::new(&mdp, c2.clone()).unwrap();
        let p = min_flow(&mdp, &d).0.value();
        if d.max_stage_sum(&mdp) > p + FLOW_TOL || p > d.total() + FLOW_TOL {
            bounds += 1;
        }

        for alpha in [0.5, 1.0, 2.0] {
            let combined: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| alpha * a + b).collect();
            let scaled: Vec<f64> = c1.iter().map(|a| alpha * a).collect();
            let lhs = phi(&mdp, combined);
            let p1 = phi(&mdp, c1.clone());
            let p2 = phi(&mdp, c2.clone());
            if lhs > alpha * p1 + p2 + FLOW_TOL || (phi(&mdp, scaled) - alpha * p1).abs() > FLOW_TOL {
                sum += 1;
            }
        }
    }
    Verdict::new(
        mono + bounds + sum == 0,
        format!("violations: monotonicity {mono}, bounds {bounds}, sum {sum}"),
    )
}

/// Random 4-stage instance with a unique optimal trajectory and gaps that are not tiny.
fn pac_mdp() -> DeterministicMdp {
    (0..)
        .map(|seed| random_layered(2, 2, 4, 1.0, seed).unwrap())
        .find(|mdp| {
            let gaps = mdp.compute_gaps();
            gaps.unique_optimal_trajectory() && gaps.min_return_gap() >= 0.2
        })
        .unwrap()
}

struct PacOutcome {
    verdicts: [Verdict; 4],
    bench: Vec<Benchmarked>,
}

/// Criteria 4–7 share the same 500-trial batches.
fn criteria_4_to_7() -> PacOutcome {
    let instances = [
        ("bandit", bandit(&[0.9, 0.1], RewardKind::Bernoulli).unwrap(), 0.05),
        ("layered4", pac_mdp(), 0.1),
    ];
    let threshold = pac_threshold();
    let (mut c4, mut c5, mut c6, mut c7) = (true, true, true, true);
    let (mut d4, mut d5) = (Vec::new(), Vec::new());
    let (mut zero_gap_elims, mut cover_violations, mut logged_periods) = (0usize, 0usize, 0usize);
    let mut bench = Vec::new();

    for (name, mdp, eps) in &instances {
        let gaps = common::return_gaps(mdp);
        let log_h = (mdp.horizon() as f64).ln() + 1.0;
        for rule in SamplingRule::ALL {
            let cfg = ExperimentConfig::new(rule, *eps, PAC_DELTA, PAC_TRIALS, MASTER_SEED);
            let start = Instant::now();
            let trials = run_trials(mdp, &cfg).unwrap();
            let elapsed = start.elapsed();
            let summary = summarize(&cfg, &trials);

            c4 &= summary.failure_rate <= threshold && elapsed < PAC_BUDGET;
            c5 &= summary.good_event_rate >= 1.0 - threshold;
            d4.push(format!("{name}/{rule} {:.3} in {:.1}s", summary.failure_rate, elapsed.as_secs_f64()));
            d5.push(format!("{name}/{rule} {:.3}", summary.good_event_rate));

            for t in trials.iter().filter(|t| t.result.good_event) {
                zero_gap_elims += (0..mdp.num_arcs())
                    .filter(|&a| gaps[a].abs() <= GAP_ZERO && t.result.elim_episode[a].is_some())
                    .count();
            }
            if rule != SamplingRule::MaxDiameter {
                for p in trials.iter().flat_map(|t| &t.result.periods) {
                    logged_periods += 1;
                    let phi = p.phi_star.unwrap_or(f64::NAN);
                    let limit = match rule {
                        SamplingRule::MaxCoverage => 2.0 * phi,
                        _ => 2.0 * phi * log_h,
                    };
                    if p.min_active_count + 1 < p.k || !(p.d as f64 <= limit + FLOW_TOL) {
                        cover_violations += 1;
                    }
                }
            }
            bench.push(Benchmarked {
                name: name.to_string(),
                mdp: mdp.clone(),
                rule,
                eps: *eps,
                delta: PAC_DELTA,
                mean_tau: summary.mean_tau,
            });
        }
    }
    c6 &= zero_gap_elims == 0;
    c7 &= cover_violations == 0 && logged_periods > 0;
    PacOutcome {
        verdicts: [
            Verdict::new(c4, format!("threshold {threshold:.4}; {}", d4.join(", "))),
            Verdict::new(c5, format!("threshold {:.4}; {}", 1.0 - threshold, d5.join(", "))),
            Verdict::new(c6, format!("{zero_gap_elims} zero-gap arcs eliminated")),
            Verdict::new(c7, format!("{cover_violations} violations over {logged_periods} periods")),
        ],
        bench,
    }
}

fn median_tau(mdp: &DeterministicMdp, rule: SamplingRule, eps: f64, delta: f64, bench: &mut Vec<Benchmarked>, name: &str) -> f64 {
    let cfg = RunConfig::new(rule, eps, delta);
    let mut taus: Vec<u64> = (0..SCALING_TRIALS as u64)
        .map(|i| {
            let seed = detpac::harness::trial_seed(MASTER_SEED, i);
            run_eprl(mdp, &cfg, seed).unwrap().tau
        })
        .collect();
    taus.sort_unstable();
    bench.push(Benchmarked {
        name: name.to_string(),
        mdp: mdp.clone(),
        rule,
        eps,
        delta,
        mean_tau: taus.iter().sum::<u64>() as f64 / taus.len() as f64,
    });
    detpac::harness::median(&taus)
}

fn criterion_8(bench: &mut Vec<Benchmarked>) -> Verdict {
    let mdp = chain(3, &[0.8, 0.5], RewardKind::Bernoulli).unwrap();
    let gaps = mdp.compute_gaps();
    if !gaps.unique_optimal_trajectory() || (gaps.min_return_gap() - 0.3).abs() > GAP_ZERO {
        return Verdict::new(false, "chain instance does not have the expected gaps");
    }
    let mut ok = true;
    let mut detail = Vec::new();
    for rule in SamplingRule::ALL {
        let small = median_tau(&mdp, rule, 1e-3, PAC_DELTA, bench, "chain");
        let large = median_tau(&mdp, rule, 1e-1, PAC_DELTA, bench, "chain");
        let ratio = small / large;
        ok &= ratio <= 2.0 && ratio >= 0.5;
        detail.push(format!("{rule} {small}/{large}"));
    }
    Verdict::new(ok, detail.join(", "))
}

fn criterion_9(bench: &mut Vec<Benchmarked>) -> Verdict {
    let mdp = hard_instance(8, 2, 9).unwrap();
    let fine = median_tau(&mdp, SamplingRule::MaxDiameter, 0.2, PAC_DELTA, bench, "hard");
    let coarse = median_tau(&mdp, SamplingRule::MaxDiameter, 0.4, PAC_DELTA, bench, "hard");
    let ratio = fine / coarse;
    Verdict::new((2.0..=8.0).contains(&ratio), format!("{fine} / {coarse} = {ratio:.3}"))
}

fn criterion_10(bench: &[Benchmarked]) -> Verdict {
    let mut ok = !bench.is_empty();
    let mut worst = f64::INFINITY;
    let mut detail = String::new();
    for b in bench {
        let report = theorem1_lower_bound(&b.mdp, b.eps, b.delta, 0.25).unwrap();
        ok &= report.sandwich_holds() && report.phi_star <= b.mean_tau;
        let slack = b.mean_tau / report.phi_star;
        if slack < worst {
            worst = slack;
            detail = format!(
                "tightest: {}/{} eps={} bound {:.1} vs mean tau {:.1}",
                b.name, b.rule, b.eps, report.phi_star, b.mean_tau
            );
        }
    }
    Verdict::new(ok, format!("{} configurations; {detail}", bench.len()))
}

/// Plays a fresh adaptive run and returns the policies of period 1 together with the
/// period snapshot.
fn adaptive_first_period(mdp: &DeterministicMdp, seed: u64) -> (detpac::PeriodSnapshot, Vec<Policy>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = LearnerState::new(mdp, 0.1, 0.1).unwrap();
    let mut sampler = Sampler::new(SamplingRule::AdaptiveMaxCoverage, mdp);
    let mut played = Vec::new();
    let mut snapshot = None;
    loop {
        let traj = sampler.next_trajectory(&state, mdp);
        if sampler.current_period() != 1 {
            break;
        }
        snapshot.get_or_insert_with(|| sampler.snapshot().unwrap().clone());
        played.push(common::policy_along(mdp, &traj));
        let rewards: Vec<f64> = traj.iter().map(|&a| sample_reward(mdp, a, &mut rng)).collect();
        state.update_statistics(&traj, &rewards);
        state.eliminate(mdp);
        if state.check_stopping(mdp).is_some() {
            break;
        }
    }
    (snapshot.unwrap(), played)
}

fn criterion_11() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(MASTER_SEED ^ 11);
    let (mut mono, mut submod, mut triples) = (0, 0, 0);
    while triples < 1000 {
        let mdp = random_layered(3, 2, 3, 0.8, rng.random()).unwrap();
        let paths = common::all_paths(&mdp, None);
        if paths.len() < 3 {
            continue;
        }
        // random history so the period demand is a proper subset of the arcs
        let mut state = LearnerState::new(&mdp, 0.1, 0.1).unwrap();
        for _ in 0..rng.random_range(0..2 * paths.len()) {
            let p = paths.choose(&mut rng).unwrap();
            let r: Vec<f64> = p.iter().map(|_| rng.random()).collect();
            state.update_statistics(p, &r);
        }
        let k = state.period_target().unwrap();
        let snap = detpac::PeriodSnapshot::capture(&state, k, state.episode() + 1);
        let policies: Vec<Policy> = paths.iter().map(|p| common::policy_along(&mdp, p)).collect();
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..policies.len()).collect();
            order.shuffle(&mut rng);
            let extra = order[0];
            let big_len = rng.random_range(0..order.len());
            let small_len = rng.random_range(0..=big_len);
            let big: Vec<Policy> = order[1..=big_len].iter().map(|&i| policies[i].clone()).collect();
            let small = &big[..small_len];
            let with = |set: &[Policy]| {
                let mut v = set.to_vec();
                v.push(policies[extra].clone());
                coverage_function(&snap, &mdp, &v) as i64
            };
            let cs = coverage_function(&snap, &mdp, small) as i64;
            let cb = coverage_function(&snap, &mdp, &big) as i64;
            if cs > cb {
                mono += 1;
            }
            if with(small) - cs < with(&big) - cb {
                submod += 1;
            }
            triples += 1;
        }
    }

    let mut greedy = 0;
    let mut instances = 0;
    let mut seed = 0u64;
    while instances < 20 {
        seed += 1;
        let mdp = random_layered(3, 2, 3, 0.8, seed).unwrap();
        let (snap, played) = adaptive_first_period(&mdp, seed);
        let v = min_flow(&mdp, &snap.demand()).0.value();
        let nk = snap.n_k() as f64;
        for i in 1..=played.len() {
            let bound = (1.0 - (-(((i + 1) / 2) as f64) / v).exp()) * nk;
            if (coverage_function(&snap, &mdp, &played[..i]) as f64) < bound - FLOW_TOL {
                greedy += 1;
            }
        }
        instances += 1;
    }
    Verdict::new(
        mono + submod + greedy == 0 && triples >= 1000,
        format!("{triples} triples: monotonicity {mono}, submodularity {submod}; greedy violations {greedy} on {instances} instances"),
    )
}

fn criterion_12() -> Verdict {
    let (mut violations, mut bound_fails, mut periods) = (0, 0, 0);
    for seed in 0..20u64 {
        let mdp = random_tree(2, 3, seed).unwrap();
        for rule in [SamplingRule::MaxCoverage, SamplingRule::AdaptiveMaxCoverage] {
            let cfg = RunConfig::new(rule, 0.2, PAC_DELTA);
            let result = run_eprl(&mdp, &cfg, detpac::harness::trial_seed(MASTER_SEED, seed)).unwrap();
            for p in result.periods.iter().filter(|p| p.n_k > 0) {
                periods += 1;
                if p.d > 2 * p.active_final_arcs as u64 {
                    violations += 1;
                }
            }
        }
        let tree = tree_lower_bound(&mdp, 0.2, PAC_DELTA).unwrap();
        let report = theorem1_lower_bound(&mdp, 0.2, PAC_DELTA, 1.0).unwrap();
        if tree + FLOW_TOL < report.stage_max {
            bound_fails += 1;
        }
    }
    Verdict::new(
        violations == 0 && bound_fails == 0,
        format!("{violations} duration violations over {periods} periods, {bound_fails} bound failures"),
    )
}

fn main() {
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    let mut report = |id: usize, v: Verdict| {
        println!("criterion {id:>2}: {} ({})", if v.ok { "PASS" } else { "FAIL" }, v.detail);
        results.push((id, v));
    };
    report(1, criterion_1());
    report(2, criterion_2());
    report(3, criterion_3());
    let pac = criteria_4_to_7();
    let mut bench = pac.bench;
    for (i, v) in pac.verdicts.into_iter().enumerate() {
        report(4 + i, v);
    }
    report(8, criterion_8(&mut bench));
    report(9, criterion_9(&mut bench));
    report(10, criterion_10(&bench));
    report(11, criterion_11());
    report(12, criterion_12());

    let failed: Vec<usize> = results.iter().filter(|(_, v)| !v.ok).map(|(i, _)| *i).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
