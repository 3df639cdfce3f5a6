//! Acceptance suite: one PASS/FAIL line per criterion, with the measured
//! quantities underneath. Exits nonzero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use aoi_core::channel::{
    age_stationary_pmf, expected_age, simulate_frame, simulate_frame_with, Access,
};
use aoi_core::game::{
    best_response, best_response_map, best_response_residual, contraction_bound, solve_ne,
    solve_ne_from, utility, utility_gradient,
};
use aoi_core::harness::config::{default_config_text, parse_config, ScenarioKind};
use aoi_core::harness::run_scenario;
use aoi_core::learning::{run_learning, Mode};
use aoi_core::model::{b_factor, derive_params, success_probability};
use aoi_core::rr::{nominal_age, simulate_rr};
use aoi_core::stream::FrameStreams;
use aoi_core::welfare::{
    externality, optimize_system, price_of_anarchy, system_gradient, system_utility,
    SWEEP_TOLERANCE,
};
use aoi_core::{GameConfig, Trajectory};

struct Line {
    passed: bool,
    text: String,
}

#[derive(Default)]
struct Criterion {
    lines: Vec<Line>,
}

impl Criterion {
    fn check(&mut self, passed: bool, text: impl Into<String>) {
        self.lines.push(Line {
            passed,
            text: text.into(),
        });
    }

    fn within(&mut self, what: &str, value: f64, target: f64, tol: f64) {
        let err = (value - target).abs();
        self.check(
            err <= tol,
            format!("{what}: {value:.6} vs {target:.6}, |diff| {err:.3e} <= {tol:.3e}"),
        );
    }

    fn runtime(&mut self, started: Instant, limit: Duration) {
        let took = started.elapsed();
        self.check(took < limit, format!("runtime {took:.2?} < {limit:?}"));
    }

    fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.passed)
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn homogeneous(n: usize) -> GameConfig {
    GameConfig::homogeneous(n, 1.0, 0.05).expect("valid parameters")
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Five-point central difference.
fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (-f(x + 2.0 * h) + 8.0 * f(x + h) - 8.0 * f(x - h) + f(x - 2.0 * h)) / (12.0 * h)
}

fn frame_statistics() -> Criterion {
    let mut c = Criterion::default();
    let started = Instant::now();
    let config = homogeneous(2);
    let profile = [0.4, 0.4];
    let obs = simulate_frame(
        &profile,
        &config.nodes,
        100_000,
        FrameStreams::new(config.seed, 1),
    )
    .expect("valid frame");
    c.runtime(started, Duration::from_secs(1));
    let target_age = expected_age(&profile, 0).unwrap();
    c.within("closed-form age", target_age, 3.1667, 1e-4);
    for (node, o) in obs.iter().enumerate() {
        c.within(&format!("node {node} average cost"), o.avg_cost, 0.4, 0.01);
        c.within(
            &format!("node {node} average age"),
            o.avg_age,
            target_age,
            0.02 * target_age,
        );
    }
    c
}

fn stationary_age_law() -> Criterion {
    let mut c = Criterion::default();
    let started = Instant::now();
    let config = homogeneous(1);
    let mut counts: Vec<u64> = Vec::new();
    simulate_frame_with(
        &[0.3],
        &config.nodes,
        1_000_000,
        Access::Contention,
        FrameStreams::new(config.seed, 1),
        |_, ages| {
            let k = ages.ages()[0] as usize;
            if k >= counts.len() {
                counts.resize(k + 1, 0);
            }
            counts[k] += 1;
        },
    )
    .expect("valid frame");
    c.runtime(started, Duration::from_secs(5));
    let nu = success_probability(&[0.3], 0).unwrap();
    let total: u64 = counts.iter().sum();
    let mut covered = 0.0;
    let mut tv = 0.0;
    for (k, &count) in counts.iter().enumerate() {
        let pmf = age_stationary_pmf(nu, k as u64);
        covered += pmf;
        tv += (count as f64 / total as f64 - pmf).abs();
    }
    tv = 0.5 * (tv + (1.0 - covered));
    c.check(
        tv <= 0.01,
        format!(
            "total variation {tv:.3e} <= 1e-2 over {} age values",
            counts.len()
        ),
    );
    c
}

fn gradients() -> Criterion {
    let mut c = Criterion::default();
    let mut r = rng(3);
    let mut worst_own: f64 = 0.0;
    for _ in 0..100 {
        let params = derive_params(r.gen_range(0.1..10.0), r.gen_range(0.01..0.45)).unwrap();
        let others: Vec<f64> = (0..r.gen_range(0..8))
            .map(|_| r.gen_range(params.p_min..0.99))
            .collect();
        let mut profile = vec![0.0];
        profile.extend(&others);
        let b = b_factor(&profile, 0, params.rho2).unwrap();
        let p = r.gen_range(params.p_min..0.99);
        let analytic = utility_gradient(p, params.alpha, b);
        let numeric = derivative(|x| utility(x, params.alpha, b), p, 1e-3);
        worst_own = worst_own.max((analytic - numeric).abs() / analytic.abs());
    }
    c.check(
        worst_own <= 1e-6,
        format!("node utility: worst relative error {worst_own:.3e} <= 1e-6"),
    );

    let mut worst_sys: f64 = 0.0;
    for _ in 0..100 {
        let n = r.gen_range(1..=8);
        let config =
            GameConfig::homogeneous(n, r.gen_range(0.1..10.0), r.gen_range(0.01..0.45)).unwrap();
        let p_min = config.nodes[0].p_min;
        let profile: Vec<f64> = (0..n).map(|_| r.gen_range(p_min..0.99)).collect();
        let j = r.gen_range(0..n);
        let analytic = system_gradient(&profile, j, &config.nodes).unwrap();
        let numeric = derivative(
            |x| {
                let mut q = profile.clone();
                q[j] = x;
                system_utility(&q, &config.nodes).unwrap()
            },
            profile[j],
            1e-3,
        );
        worst_sys = worst_sys.max((analytic - numeric).abs() / analytic.abs());
    }
    c.check(
        worst_sys <= 1e-6,
        format!("social utility: worst relative error {worst_sys:.3e} <= 1e-6"),
    );
    c
}

fn best_response_bounds() -> Criterion {
    let mut c = Criterion::default();
    let mut r = rng(4);
    let (mut outside, mut worst_residual) = (0, 0.0f64);
    for _ in 0..200 {
        let params = derive_params(r.gen_range(0.1..10.0), r.gen_range(0.001..0.499)).unwrap();
        let others: Vec<f64> = (0..r.gen_range(0..30))
            .map(|_| r.gen_range(params.p_min..1.0))
            .collect();
        let br = best_response(&others, &params).unwrap();
        if !(br >= (-params.alpha).exp() / 2.0 && br < 1.0) {
            outside += 1;
        }
        let mut profile = vec![br];
        profile.extend(&others);
        worst_residual = worst_residual.max(best_response_residual(&profile, 0, &params));
    }
    c.check(
        outside == 0,
        format!("{outside} of 200 best responses outside [e^(-alpha)/2, 1)"),
    );
    c.check(
        worst_residual <= 1e-10,
        format!("worst first-order residual {worst_residual:.3e} <= 1e-10"),
    );
    c
}

fn contraction() -> Criterion {
    let mut c = Criterion::default();
    let mut worst_bound: (f64, usize) = (0.0, 0);
    for n in 1..=200 {
        let config = homogeneous(n);
        let bound = contraction_bound(n, &config.nodes, 0.05);
        if bound > worst_bound.0 {
            worst_bound = (bound, n);
        }
    }
    c.check(
        worst_bound.0 < 1.0,
        format!(
            "largest bound over N = 1..200 is {:.6} at N = {}",
            worst_bound.0, worst_bound.1
        ),
    );

    let mut r = rng(5);
    let (mut worst_gap, mut worst_excess) = (0.0f64, f64::NEG_INFINITY);
    for n in [2, 3, 5, 10, 20, 50, 100, 200] {
        let config = homogeneous(n);
        let bound = contraction_bound(n, &config.nodes, 0.05);
        let p_min = config.nodes[0].p_min;
        let mut ends = Vec::new();
        for _ in 0..2 {
            let start: Vec<f64> = (0..n).map(|_| r.gen_range(p_min..1.0)).collect();
            ends.push(
                solve_ne_from(&config.nodes, 0.05, &start, 1e-13)
                    .unwrap()
                    .probabilities,
            );

            let mut x = start;
            let mut y = best_response_map(&x, &config.nodes).unwrap().into_inner();
            for _ in 0..200 {
                let z = best_response_map(&y, &config.nodes).unwrap().into_inner();
                let (num, den) = (sup(&z, &y), sup(&y, &x));
                if den < 1e-9 {
                    break;
                }
                worst_excess = worst_excess.max(num / den - bound);
                (x, y) = (y, z);
            }
        }
        worst_gap = worst_gap.max(ends[0].sup_distance(&ends[1]));
    }
    c.check(
        worst_gap <= 1e-9,
        format!("two random starts agree within {worst_gap:.3e} <= 1e-9"),
    );
    c.check(
        worst_excess <= 1e-6,
        format!("measured step ratio exceeds bound by at most {worst_excess:.3e} <= 1e-6"),
    );
    c
}

fn end_to_end() -> Criterion {
    let mut c = Criterion::default();
    let started = Instant::now();
    let config = homogeneous(10);
    let ne = solve_ne(&config, 1e-13).unwrap().probabilities;
    let stochastic = run_learning(&config, 200, Mode::Stochastic).unwrap();
    let expected = run_learning(&config, 200, Mode::Expected).unwrap();
    c.runtime(started, Duration::from_secs(60));
    let ds = stochastic.final_probabilities.sup_distance(&ne);
    let de = expected.final_probabilities.sup_distance(&ne);
    c.check(
        ds <= 0.02,
        format!("stochastic endpoint distance {ds:.3e} <= 2e-2"),
    );
    c.check(
        de <= 1e-6,
        format!("expected endpoint distance {de:.3e} <= 1e-6"),
    );
    c
}

fn churn() -> Criterion {
    let mut c = Criterion::default();
    let exp = parse_config(&default_config_text(ScenarioKind::Churn)).unwrap();
    let traj: Trajectory = run_learning(&exp.game, 120, Mode::Stochastic).unwrap();
    for (event, n) in [(20usize, 10usize), (80, 3)] {
        let ne = solve_ne(&homogeneous(n), 1e-13).unwrap().probabilities;
        let frame = event + 40;
        let profile = traj.profile_at(frame).unwrap();
        let d = profile.sup_distance(&ne);
        c.check(
            profile.len() == n && d <= 0.03,
            format!(
                "change at frame {event}: roster {}, distance at frame {frame} {d:.3e} <= 3e-2",
                profile.len()
            ),
        );
    }
    c
}

fn poa_shape() -> Criterion {
    let mut c = Criterion::default();
    let mut poa = Vec::new();
    let mut ext = Vec::new();
    for n in 1..=25 {
        let w = price_of_anarchy(&homogeneous(n)).unwrap();
        ext.push(externality(&w.p_ne, 0, &homogeneous(n).nodes).unwrap());
        poa.push(w.poa);
    }
    c.within("price of anarchy at N = 1", poa[0], 1.0, 1e-9);
    let min = poa.iter().copied().fold(f64::INFINITY, f64::min);
    c.check(min >= 1.0 - 1e-9, format!("minimum {min:.12} >= 1 - 1e-9"));
    let peak = (0..poa.len()).fold(0, |b, i| if poa[i] > poa[b] { i } else { b });
    let unimodal = poa[..=peak].windows(2).all(|w| w[1] >= w[0])
        && poa[peak..].windows(2).all(|w| w[1] <= w[0]);
    c.check(
        unimodal,
        format!("unimodal with peak {:.9} at N = {}", poa[peak], peak + 1),
    );
    let last = poa[poa.len() - 1];
    c.check(
        (last - 1.0).abs() < (poa[peak] - 1.0).abs(),
        format!("final value {last:.12} closer to 1 than the peak"),
    );
    let positive = ext[1..].iter().all(|&e| e > 0.0);
    c.check(positive, "externality at equilibrium positive for N >= 2");
    let decreasing = ext[peak..].windows(2).all(|w| w[1] < w[0]);
    c.check(
        decreasing,
        format!(
            "externality decreasing past N = {} ({:.4e} to {:.4e})",
            peak + 1,
            ext[peak],
            ext[24]
        ),
    );
    c
}

fn welfare_grid() -> Criterion {
    let mut c = Criterion::default();
    let config = homogeneous(2);
    let p_min = config.nodes[0].p_min;
    let cells = 400;
    let step = (1.0 - p_min) / (cells - 1) as f64;
    let mut best = (f64::NEG_INFINITY, [0.0; 2]);
    for i in 0..cells {
        for j in 0..cells {
            let q = [p_min + i as f64 * step, p_min + j as f64 * step];
            let u = system_utility(&q, &config.nodes).unwrap();
            if u > best.0 {
                best = (u, q);
            }
        }
    }
    let opt = optimize_system(&config, SWEEP_TOLERANCE).unwrap();
    let u_opt = system_utility(&opt, &config.nodes).unwrap();
    let d = opt.sup_distance(&best.1);
    c.check(
        d <= step,
        format!(
            "optimum {:?} within {d:.3e} of grid argmax, cell {step:.3e}",
            opt.as_slice()
        ),
    );
    c.check(
        u_opt >= best.0 - 1e-8,
        format!(
            "U_sys at optimum {u_opt:.12} >= grid maximum {:.12} - 1e-8",
            best.0
        ),
    );
    c
}

fn round_robin() -> Criterion {
    let mut c = Criterion::default();
    for n in [5usize, 10, 20] {
        let config = homogeneous(n);
        let rr = simulate_rr(&config, 200).unwrap();
        let collisions: u64 = rr.records.iter().map(|r| r.collision_slots).sum();
        c.check(
            collisions == 0,
            format!("N = {n}: {collisions} collision slots"),
        );
        let p_rr = rr.final_probabilities.iter().sum::<f64>() / n as f64;
        let p_ne = solve_ne(&config, 1e-13).unwrap().probabilities[0];
        c.check(
            p_rr > p_ne,
            format!("N = {n}: round-robin p {p_rr:.4} > equilibrium p {p_ne:.4}"),
        );
        if n == 20 {
            let tail = &rr.records[180..];
            let age = tail
                .iter()
                .flat_map(|r| r.observations.iter().map(|o| o.avg_age))
                .sum::<f64>()
                / (tail.len() * n) as f64;
            let nominal = nominal_age(n, p_rr);
            c.within(
                "N = 20: converged age vs N E[s_a] / 2",
                age,
                nominal,
                0.05 * nominal,
            );
        }
    }
    c
}

fn determinism() -> Criterion {
    let mut c = Criterion::default();
    let root = tempfile::tempdir().unwrap();
    for kind in ScenarioKind::ALL {
        let mut exp = parse_config(&default_config_text(kind)).unwrap();
        if kind.is_sweep() {
            exp.scenario.n_max = 6;
            exp.scenario.frames = 50;
            exp.scenario.replicates = 2;
        }
        let dirs = [
            root.path().join(format!("{kind}-a")),
            root.path().join(format!("{kind}-b")),
        ];
        let reports: Vec<_> = dirs
            .iter()
            .map(|d| run_scenario(&exp, d).unwrap())
            .collect();
        let identical = reports[0].tables.iter().all(|t| {
            let file = t.file_name();
            read(&dirs[0], &file) == read(&dirs[1], &file)
        }) && read(&dirs[0], "manifest.json") == read(&dirs[1], "manifest.json");
        c.check(
            identical,
            format!("{kind}: tables and manifest byte-identical"),
        );
    }
    c
}

fn read(dir: &Path, file: &str) -> Vec<u8> {
    fs::read(dir.join(file)).unwrap_or_default()
}

type Check = (&'static str, fn() -> Criterion);

fn main() -> ExitCode {
    let criteria: [Check; 11] = [
        ("frame statistics match closed forms", frame_statistics),
        ("stationary age law", stationary_age_law),
        ("gradients match finite differences", gradients),
        ("best-response bounds and residual", best_response_bounds),
        ("best-response contraction", contraction),
        ("learning reaches equilibrium", end_to_end),
        ("reconvergence under churn", churn),
        ("price of anarchy shape", poa_shape),
        ("social optimum against grid search", welfare_grid),
        ("round-robin properties", round_robin),
        ("deterministic scenario outputs", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let c = run();
        let status = if c.passed() { "PASS" } else { "FAIL" };
        println!("{status} criterion {}: {name}", i + 1);
        for line in &c.lines {
            println!(
                "    [{}] {}",
                if line.passed { "ok" } else { "fail" },
                line.text
            );
        }
        if !c.passed() {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
