//! Acceptance suite. Runs every check, prints one PASS/FAIL line each and
//! exits non-zero if any check fails.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use gossip_sbm::bench::{config_fig2, config_fig3, config_karate, run_records, Algorithm};
use gossip_sbm::gossip::update_running_average;
use gossip_sbm::oracle::{expected_final_opinions, expected_update_matrices};
use gossip_sbm::sbm::{sample_sbm_s, two_block_opinions, Edge, SampledGraph, SbmSParams};
use gossip_sbm::{accuracy, kmeans_1d_two, CommunityStructure, GossipState, InteractionDistribution};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// 1. optimal 1-D 2-means against exhaustive search

/// Exact cost of a labelling of integer data as a fraction `num / den`.
fn exact_cost(values: &[i64], labels: &[u8]) -> (i128, i128) {
    let mut k = [0i128; 2];
    let mut s = [0i128; 2];
    let mut q = 0i128;
    for (&v, &l) in values.iter().zip(labels) {
        let c = usize::from(l - 1);
        k[c] += 1;
        s[c] += v as i128;
        q += (v as i128) * (v as i128);
    }
    // q - s1^2/k1 - s2^2/k2 over a common denominator
    let (k1, k2) = (k[0].max(1), k[1].max(1));
    (q * k1 * k2 - s[0] * s[0] * k2 - s[1] * s[1] * k1, k1 * k2)
}

fn less(a: (i128, i128), b: (i128, i128)) -> bool {
    a.0 * b.1 < b.0 * a.1
}

/// Two-pass cost of a labelling, each cluster summed in index order.
fn float_cost(values: &[f64], labels: &[u8]) -> f64 {
    let mut total = 0.0;
    for label in [1u8, 2] {
        let members: Vec<f64> = values.iter().zip(labels).filter(|(_, &l)| l == label).map(|(&v, _)| v).collect();
        if members.is_empty() {
            continue;
        }
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        total += members.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    }
    total
}

fn masks(m: usize) -> impl Iterator<Item = Vec<u8>> {
    let count: u32 = if m == 1 { 1 } else { (1 << m) - 1 };
    (1..=count).map(move |mask| (0..m).map(|i| if mask >> i & 1 == 1 { 1 } else { 2 }).collect())
}

fn kmeans_matches_exhaustive_search() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut mismatches = Vec::new();
    let mut worst_reported = 0.0f64;
    for case in 0..1000 {
        let m = rng.random_range(1..=12usize);
        if case % 2 == 0 {
            // small integers: many ties, exact rational comparison
            let values: Vec<i64> = (0..m).map(|_| rng.random_range(-6..=6)).collect();
            let as_f64: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            let found = kmeans_1d_two(&as_f64).unwrap();
            let mine = exact_cost(&values, found.labels.labels());
            let best = masks(m).map(|l| exact_cost(&values, &l)).fold(mine, |b, c| if less(c, b) { c } else { b });
            if less(best, mine) {
                mismatches.push(format!("{values:?}"));
            }
            let best_f = best.0 as f64 / best.1 as f64;
            worst_reported = worst_reported.max((found.cost - best_f).abs() / best_f.max(1.0));
        } else {
            let values: Vec<f64> = (0..m).map(|_| rng.random_range(-10.0..10.0)).collect();
            let found = kmeans_1d_two(&values).unwrap();
            let best = masks(m).map(|l| float_cost(&values, &l)).fold(f64::INFINITY, f64::min);
            if float_cost(&values, found.labels.labels()) != best {
                mismatches.push(format!("{values:?}"));
            }
            worst_reported = worst_reported.max((found.cost - best).abs() / best.max(1.0));
        }
    }
    let pass = mismatches.is_empty() && worst_reported < 1e-12;
    outcome(
        pass,
        format!(
            "1000 vectors, {} non-optimal partitions, reported cost off by at most {worst_reported:.1e}{}",
            mismatches.len(),
            mismatches.first().map(|v| format!(" (first: {v})")).unwrap_or_default()
        ),
    )
}

// ---------------------------------------------------------------------------
// 2. accuracy metric

fn accuracy_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut failures = 0;
    for _ in 0..10_000 {
        let m = rng.random_range(1..=40usize);
        let draw = |rng: &mut ChaCha8Rng| {
            CommunityStructure::new((0..m).map(|_| rng.random_range(1..=2u8)).collect()).unwrap()
        };
        let truth = draw(&mut rng);
        let est = draw(&mut rng);
        let a = accuracy(&truth, &est).unwrap();
        let agree = truth.labels().iter().zip(est.labels()).filter(|(x, y)| x == y).count();
        let expected = agree.max(m - agree) as f64 / m as f64;
        let ok = a == expected
            && a == accuracy(&truth, &est.swapped()).unwrap()
            && a == accuracy(&truth.swapped(), &est).unwrap()
            && a == accuracy(&est, &truth).unwrap()
            && accuracy(&truth, &truth).unwrap() == 1.0
            && accuracy(&truth, &truth.swapped()).unwrap() == 1.0
            && (0.5..=1.0).contains(&a);
        failures += usize::from(!ok);
    }
    outcome(failures == 0, format!("10000 label pairs, {failures} violations"))
}

// ---------------------------------------------------------------------------
// 3. gossip invariants over a long trajectory

fn fifty_agent_graph(seed: u64) -> (SampledGraph, Vec<f64>) {
    let p = SbmSParams::two_block(45, 5, 0.3, 0.05, 0.2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g = sample_sbm_s(&p, &mut rng).unwrap();
        if g.alpha() > 0 {
            return (g, two_block_opinions(5));
        }
    }
}

fn gossip_invariants() -> Outcome {
    let (graph, _) = fifty_agent_graph(3);
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    let x0: Vec<f64> = (0..45).map(|_| rng.random_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
    let lo = x0.iter().chain(&z).copied().fold(f64::INFINITY, f64::min);
    let hi = x0.iter().chain(&z).copied().fold(f64::NEG_INFINITY, f64::max);
    let dist = InteractionDistribution::new(&graph).unwrap();
    let mut state = GossipState::new(x0.clone(), z).unwrap();

    let steps = 1_000_000u64;
    let mut hull_violations = 0u64;
    let mut worst_sum = 0.0f64;
    let mut worst_avg = 0.0f64;
    let mut worst_recursion = 0.0f64;
    let mut direct = x0.clone();
    let mut recursion = x0;
    for t in 1..=steps {
        let before = state.opinions().to_vec();
        let Edge(i, j) = state.step(&dist, &mut rng);
        let x = state.opinions();
        if j < 45 {
            worst_sum = worst_sum.max(((x[i] + x[j]) - (before[i] + before[j])).abs());
        }
        hull_violations += x.iter().filter(|&&v| v < lo || v > hi).count() as u64;
        for (d, &v) in direct.iter_mut().zip(x) {
            *d += v;
        }
        recursion = update_running_average(&recursion, x, t).unwrap();
        if t % 1000 == 0 {
            let s = state.running_average();
            for k in 0..45 {
                let mean = direct[k] / (t + 1) as f64;
                worst_avg = worst_avg.max((s[k] - mean).abs());
                worst_recursion = worst_recursion.max((recursion[k] - mean).abs());
            }
        }
    }
    let pass = hull_violations == 0 && worst_sum <= 1e-9 && worst_avg <= 1e-9 && worst_recursion <= 1e-9;
    outcome(
        pass,
        format!(
            "1e6 steps on 45+5 agents: hull violations {hull_violations}, pair-sum drift {worst_sum:.1e}, \
             running average vs direct mean {worst_avg:.1e}, recursion vs direct mean {worst_recursion:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 4. expected dynamics

fn expected_dynamics() -> Outcome {
    // r1-r2, r1-s1 (+1), r2-s2 (-1)
    let g = SampledGraph::from_edges(2, 2, [Edge(0, 1), Edge(0, 2), Edge(1, 3)]).unwrap();
    let d = expected_update_matrices(&g).unwrap();
    let x = expected_final_opinions(&d, &[1.0, -1.0]).unwrap();
    let hand = (x[0] - 1.0 / 3.0).abs().max((x[1] + 1.0 / 3.0).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_row = 0.0f64;
    for _ in 0..100 {
        let n_r = rng.random_range(2..60usize);
        let n_s = rng.random_range(0..8usize);
        let p = SbmSParams::two_block(n_r, n_s, rng.random(), rng.random(), rng.random()).unwrap();
        let g = sample_sbm_s(&p, &mut rng).unwrap();
        if g.alpha() == 0 {
            continue;
        }
        for s in expected_update_matrices(&g).unwrap().row_sums() {
            worst_row = worst_row.max((s - 1.0).abs());
        }
    }

    let (graph, _) = fifty_agent_graph(5);
    let d = expected_update_matrices(&graph).unwrap();
    let dist = InteractionDistribution::new(&graph).unwrap();
    let n_r = graph.n_regular();
    let steps = 100_000;
    // Sum of realised Q(t): identity plus per-edge corrections
    let mut sum = vec![0.0f64; n_r * n_r];
    let mut corrections = vec![0.0f64; n_r * n_r];
    for _ in 0..steps {
        let Edge(i, j) = dist.sample(&mut rng);
        if j < n_r {
            corrections[i * n_r + i] -= 0.5;
            corrections[j * n_r + j] -= 0.5;
            corrections[i * n_r + j] += 0.5;
            corrections[j * n_r + i] += 0.5;
        } else if i < n_r {
            corrections[i * n_r + i] -= 0.5;
        }
    }
    for i in 0..n_r {
        sum[i * n_r + i] = steps as f64;
    }
    let mut worst_mc = 0.0f64;
    for i in 0..n_r {
        for j in 0..n_r {
            let mean = (sum[i * n_r + j] + corrections[i * n_r + j]) / steps as f64;
            worst_mc = worst_mc.max((mean - d.eq[(i, j)]).abs());
        }
    }
    let pass = hand <= 1e-12 && worst_row <= 1e-12 && worst_mc <= 0.01;
    outcome(
        pass,
        format!("2x2 case off by {hand:.1e}, row sums off by {worst_row:.1e}, MC mean of Q off by {worst_mc:.4}"),
    )
}

// ---------------------------------------------------------------------------
// 5. time average against expected final opinions

fn steady_state_consistency() -> Outcome {
    let config = config_fig3();
    let r = config.resolve(30).unwrap();
    let params = r.params().unwrap();
    let z = two_block_opinions(r.n_s);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (graph, target) = loop {
        let g = sample_sbm_s(&params, &mut rng).unwrap();
        if g.alpha() == 0 {
            continue;
        }
        if let Ok(x) = expected_final_opinions(&expected_update_matrices(&g).unwrap(), &z) {
            break (g, x);
        }
    };
    let dist = InteractionDistribution::new(&graph).unwrap();
    let runs = 200;
    let horizon = 100_000;
    let n_r = r.n_r;
    let mut sum = vec![0.0; n_r];
    let mut sum_sq = vec![0.0; n_r];
    for k in 0..runs {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + k);
        let x0: Vec<f64> = (0..n_r).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut state = GossipState::new(x0, z.clone()).unwrap();
        for _ in 0..horizon {
            state.step(&dist, &mut rng);
        }
        for (i, s) in state.running_average().into_iter().enumerate() {
            sum[i] += s;
            sum_sq[i] += s * s;
        }
    }
    let mut worst = 0.0f64;
    for i in 0..n_r {
        let mean = sum[i] / runs as f64;
        let var = (sum_sq[i] - runs as f64 * mean * mean) / (runs - 1) as f64;
        let se = (var.max(0.0) / runs as f64).sqrt();
        worst = worst.max((mean - target[i]).abs() / se);
    }
    outcome(
        worst <= 5.0,
        format!("n = 30, 200 runs of T = 1e5: largest deviation {worst:.2} standard errors"),
    )
}

// ---------------------------------------------------------------------------
// 6-8. Monte-Carlo sweeps

fn mean_accuracy(records: &[gossip_sbm::bench::RunRecord], n: usize, algorithm: Algorithm) -> f64 {
    let acc: Vec<f64> = records
        .iter()
        .filter(|r| r.n == n && r.algorithm == algorithm)
        .map(|r| r.accuracy.unwrap_or(0.5))
        .collect();
    acc.iter().sum::<f64>() / acc.len() as f64
}

fn transient_trend() -> Outcome {
    let sizes = [100, 300, 1000, 2000];
    let config = config_fig2(false).with_n_values(&sizes).with_runs(10, 10);
    let result = run_records(&config, workers()).unwrap();
    let means: Vec<f64> = sizes.iter().map(|&n| mean_accuracy(&result.records, n, Algorithm::Alg1)).collect();
    let monotone = means.windows(2).all(|w| w[1] >= w[0]);
    let pass = monotone && means[3] >= 0.9;
    let shown: Vec<String> = sizes.iter().zip(&means).map(|(n, m)| format!("{n}: {m:.4}")).collect();
    outcome(pass, format!("mean accuracy {}", shown.join(", ")))
}

fn time_average_recovery() -> Outcome {
    let sizes = [100, 300, 1000];
    let config = config_fig3().with_n_values(&sizes).with_runs(10, 10);
    let result = run_records(&config, workers()).unwrap();
    let exact = |n: usize| {
        let rs: Vec<_> = result.records.iter().filter(|r| r.n == n).collect();
        rs.iter().filter(|r| r.accuracy == Some(1.0)).count() as f64 / rs.len() as f64
    };
    let shown: Vec<String> = sizes.iter().map(|&n| format!("{n}: {:.2}", exact(n))).collect();
    outcome(exact(1000) >= 0.9, format!("P(accuracy = 1) {}", shown.join(", ")))
}

fn karate_curves() -> Outcome {
    let config = config_karate();
    let horizon = config.curve.as_ref().unwrap().horizon;
    let result = run_records(&config, workers()).unwrap();
    let window_mean = |algorithm: Algorithm, from: u64, to: u64| {
        let pts: Vec<f64> = result
            .curves
            .iter()
            .filter(|p| p.algorithm == algorithm && p.t >= from && p.t <= to)
            .map(|p| p.mean_accuracy)
            .collect();
        pts.iter().sum::<f64>() / pts.len() as f64
    };
    let early = window_mean(Algorithm::Alg1, 50, 200);
    let tail_from = horizon - horizon / 10 + 1;
    let late1 = window_mean(Algorithm::Alg1, tail_from, horizon);
    let late2 = window_mean(Algorithm::Alg2, tail_from, horizon);
    outcome(
        early > 0.8 && late2 > late1,
        format!(
            "400 runs of {horizon} steps: alg1 on steps 50-200 {early:.4}; steps {tail_from}-{horizon} alg2 {late2:.4} vs alg1 {late1:.4}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 9. determinism of the command-line experiment

fn run_cli(dir: &Path, extra: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_gossip-sbm"))
        .args(["experiment", "fig3", "--seed", "42", "--out"])
        .arg(dir)
        .args(extra)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(String::from_utf8_lossy(&out.stderr).into_owned());
    }
    fs::read_to_string(dir.join("runs.csv")).map_err(|e| e.to_string())
}

fn sorted_lines(csv: &str) -> Vec<&str> {
    let mut lines: Vec<&str> = csv.lines().collect();
    lines.sort_unstable();
    lines
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs = (|| -> Result<_, String> {
        let a = run_cli(&tmp.path().join("a"), &[])?;
        let b = run_cli(&tmp.path().join("b"), &[])?;
        let p1 = run_cli(&tmp.path().join("p1"), &["--parallelism", "1"])?;
        let p8 = run_cli(&tmp.path().join("p8"), &["--parallelism", "8"])?;
        Ok((a, b, p1, p8))
    })();
    match runs {
        Err(e) => outcome(false, format!("command failed: {e}")),
        Ok((a, b, p1, p8)) => {
            let same = a == b;
            let same_sorted = sorted_lines(&p1) == sorted_lines(&p8);
            outcome(
                same && same_sorted && a.lines().count() > 1,
                format!(
                    "{} rows; repeated run identical: {same}; parallelism 1 vs 8 identical after sorting: {same_sorted}",
                    a.lines().count() - 1
                ),
            )
        }
    }
}

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() {
    type Check = fn() -> Outcome;
    let secs = |s| Some(Duration::from_secs(s));
    let checks: [(&str, Check, Option<Duration>); 9] = [
        ("k-means equals exhaustive minimum", kmeans_matches_exhaustive_search, secs(10)),
        ("accuracy metric properties", accuracy_properties, None),
        ("gossip invariants", gossip_invariants, None),
        ("expected dynamics", expected_dynamics, None),
        ("time average matches expected final opinions", steady_state_consistency, secs(120)),
        ("Algorithm 1 accuracy grows with n", transient_trend, secs(600)),
        ("Algorithm 2 recovers every label", time_average_recovery, secs(600)),
        ("karate club curves", karate_curves, secs(300)),
        ("experiment output is deterministic", determinism, None),
    ];
    let mut failed = 0;
    for (k, (name, check, limit)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let pass = result.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "acceptance {}: {} {name}: {} [{:.1} s{}]",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            result.detail,
            elapsed.as_secs_f64(),
            limit.map(|l| format!(", limit {} s", l.as_secs())).unwrap_or_default()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
}
