//! Scenario execution: tables, cross-checks and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::{Experiment, ScenarioKind};
use crate::channel::{expected_age, expected_cost};
use crate::error::{Error, Result};
use crate::game::{best_response, solve_ne_roster};
use crate::learning::{run_learning, Mode};
use crate::model::{FrameRecord, NodeParams, Trajectory};
use crate::rr::simulate_rr;
use crate::stream::mix;
use crate::welfare::{externality, price_of_anarchy};

/// Largest endpoint distance from the equilibrium accepted for stochastic runs.
pub const STOCHASTIC_TOLERANCE: f64 = 0.02;
/// Largest endpoint distance from the equilibrium accepted for expected runs.
pub const EXPECTED_TOLERANCE: f64 = 1e-4;
/// Largest distance from the new equilibrium 40 frames after a roster change.
pub const CHURN_TOLERANCE: f64 = 0.03;
pub const CHURN_SETTLE_FRAMES: usize = 40;
/// Slack below 1 tolerated for a price of anarchy.
pub const POA_SLACK: f64 = 1e-9;
const NE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

/// A table of already formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &str, header: &[&'static str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    /// Column `name` parsed back to numbers.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| *h == name)?;
        self.rows.iter().map(|r| r[i].parse().ok()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub scenario: ScenarioKind,
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Serialize)]
pub struct TableEntry {
    pub file: String,
    pub rows: usize,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: ScenarioKind,
    pub seed: u64,
    pub mode: Mode,
    pub config_sha256: String,
    pub config: &'a Experiment,
    pub tables: Vec<TableEntry>,
    pub checks: &'a [Check],
    pub passed: bool,
}

fn num(x: f64) -> String {
    format!("{x}")
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn sha256(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = xs
        .into_iter()
        .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

/// Mean and standard error of the mean.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = mean(xs.iter().copied());
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

fn best_responses(profile: &[f64], roster: &[NodeParams]) -> Result<Vec<f64>> {
    (0..profile.len())
        .map(|node| {
            let others: Vec<f64> = profile
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != node)
                .map(|(_, &p)| p)
                .collect();
            best_response(&others, &roster[node])
        })
        .collect()
}

fn mode_tolerance(mode: Mode) -> f64 {
    match mode {
        Mode::Stochastic => STOCHASTIC_TOLERANCE,
        Mode::Expected => EXPECTED_TOLERANCE,
    }
}

/// Roster in force at every frame of a run, in order.
fn rosters(exp: &Experiment, traj: &Trajectory) -> Vec<Vec<NodeParams>> {
    let mut roster = exp.game.nodes.clone();
    let mut events = exp.game.churn_events.clone();
    events.sort_by_key(|e| e.frame);
    let mut next = 0;
    traj.records
        .iter()
        .map(|r| {
            while next < events.len() && events[next].frame == r.frame {
                match &events[next].change {
                    crate::model::RosterChange::Join(nodes) => roster.extend_from_slice(nodes),
                    crate::model::RosterChange::Leave(k) => {
                        roster.truncate(roster.len().saturating_sub(*k))
                    }
                }
                next += 1;
            }
            roster.clone()
        })
        .collect()
}

fn trajectory_table(
    name: &str,
    traj: &Trajectory,
    rosters: &[Vec<NodeParams>],
    with_roster_size: bool,
) -> Result<Table> {
    let header: &[&'static str] = if with_roster_size {
        &[
            "frame",
            "node",
            "roster_size",
            "p_learning",
            "p_best_response",
        ]
    } else {
        &["frame", "node", "p_learning", "p_best_response"]
    };
    let mut table = Table::new(name, header);
    let last_roster = rosters.last().cloned().unwrap_or_default();
    let frames = traj
        .records
        .iter()
        .zip(rosters)
        .map(|(r, roster)| (r.frame, r.probabilities.as_slice(), roster.as_slice()))
        .chain(std::iter::once((
            traj.frames() + 1,
            traj.final_probabilities.as_slice(),
            last_roster.as_slice(),
        )));
    for (frame, profile, roster) in frames {
        let br = best_responses(profile, roster)?;
        for (node, (&p, b)) in profile.iter().zip(br).enumerate() {
            let mut row = vec![frame.to_string(), node.to_string()];
            if with_roster_size {
                row.push(profile.len().to_string());
            }
            row.extend([num(p), num(b)]);
            table.push(row);
        }
    }
    Ok(table)
}

fn endpoint_check(exp: &Experiment, mode: Mode) -> Result<Check> {
    let traj = run_learning(&exp.game, exp.scenario.frames, mode)?;
    let ne = solve_ne_roster(&exp.game.nodes, exp.game.p_global_min, NE_TOLERANCE)?;
    let dist = traj.final_probabilities.sup_distance(&ne.probabilities);
    let tol = mode_tolerance(mode);
    Ok(Check::new(
        format!("{mode} endpoint within {tol:e} of equilibrium"),
        dist <= tol,
        format!(
            "sup distance {dist:.3e} after {} frames",
            exp.scenario.frames
        ),
    ))
}

fn run_convergence(exp: &Experiment) -> Result<Report> {
    let mode = exp.scenario.mode;
    let traj = run_learning(&exp.game, exp.scenario.frames, mode)?;
    let rosters = vec![exp.game.nodes.clone(); traj.frames()];
    let table = trajectory_table("convergence", &traj, &rosters, false)?;
    let checks = vec![
        endpoint_check(exp, Mode::Stochastic)?,
        endpoint_check(exp, Mode::Expected)?,
    ];
    Ok(Report {
        scenario: ScenarioKind::Convergence,
        tables: vec![table],
        checks,
    })
}

fn run_churn(exp: &Experiment) -> Result<Report> {
    let mode = exp.scenario.mode;
    let frames = exp.scenario.frames;
    let traj = run_learning(&exp.game, frames, mode)?;
    let rosters = rosters(exp, &traj);
    let table = trajectory_table("churn", &traj, &rosters, true)?;
    let tol = mode_tolerance(mode).max(CHURN_TOLERANCE);
    let pg = exp.game.p_global_min;
    let mut checks = Vec::new();

    let mut event_frames: Vec<usize> = exp.game.churn_events.iter().map(|e| e.frame).collect();
    event_frames.sort_unstable();
    event_frames.dedup();
    if exp.game.reinit_kappa_on_churn {
        for (i, &f) in event_frames.iter().enumerate() {
            let target = f + CHURN_SETTLE_FRAMES;
            let interrupted = event_frames.get(i + 1).is_some_and(|&g| g <= target);
            if interrupted || target > frames + 1 || f > frames {
                continue;
            }
            let roster = &rosters[f - 1];
            let ne = solve_ne_roster(roster, pg, NE_TOLERANCE)?;
            let profile = traj.profile_at(target).expect("target within run");
            let dist = profile.sup_distance(&ne.probabilities);
            checks.push(Check::new(
                format!("reconverged {CHURN_SETTLE_FRAMES} frames after change at frame {f}"),
                dist <= tol,
                format!("roster {}, sup distance {dist:.3e}", roster.len()),
            ));
        }
    }
    let last = rosters.last().expect("at least one frame");
    let ne = solve_ne_roster(last, pg, NE_TOLERANCE)?;
    let dist = traj.final_probabilities.sup_distance(&ne.probabilities);
    checks.push(Check::new(
        "final profile near equilibrium of final roster",
        dist <= tol,
        format!("roster {}, sup distance {dist:.3e}", last.len()),
    ));
    Ok(Report {
        scenario: ScenarioKind::Churn,
        tables: vec![table],
        checks,
    })
}

/// Mean per-node `avg_age` over the last tenth of the run.
fn tail_age(records: &[FrameRecord]) -> f64 {
    let window = (records.len() / 10).max(1);
    mean(
        records[records.len() - window..]
            .iter()
            .flat_map(|r| r.observations.iter().map(|o| o.avg_age)),
    )
}

struct Replicate {
    p_learning: f64,
    age_learning: f64,
    p_rr: f64,
    age_rr: f64,
    rr_collisions: u64,
}

struct SweepPoint {
    n: usize,
    p_ne: f64,
    age_ne: f64,
    replicates: Vec<Replicate>,
}

fn sweep_replicate(exp: &Experiment, n: usize, replicate: usize) -> Result<Replicate> {
    let seed = mix(&[exp.game.seed, n as u64, replicate as u64]);
    let game = exp.game_with_nodes(n).with_seed(seed);
    let frames = exp.scenario.frames;
    let learning = run_learning(&game, frames, exp.scenario.mode)?;
    let age_learning = match exp.scenario.mode {
        Mode::Stochastic => tail_age(&learning.records),
        Mode::Expected => mean(
            (0..n)
                .map(|node| expected_age(&learning.final_probabilities, node))
                .collect::<Result<Vec<_>>>()?,
        ),
    };
    let rr = simulate_rr(&game, frames)?;
    Ok(Replicate {
        p_learning: mean(learning.final_probabilities.iter().copied()),
        age_learning,
        p_rr: mean(rr.final_probabilities.iter().copied()),
        age_rr: tail_age(&rr.records),
        rr_collisions: rr.records.iter().map(|r| r.collision_slots).sum(),
    })
}

fn sweep_points(exp: &Experiment) -> Result<Vec<SweepPoint>> {
    let jobs: Vec<(usize, usize)> = exp
        .scenario
        .n_range()
        .flat_map(|n| (0..exp.scenario.replicates).map(move |r| (n, r)))
        .collect();
    let mut runs = jobs
        .par_iter()
        .map(|&(n, r)| sweep_replicate(exp, n, r))
        .collect::<Result<Vec<_>>>()?
        .into_iter();
    exp.scenario
        .n_range()
        .map(|n| {
            let ne = solve_ne_roster(
                &vec![exp.default_params(); n],
                exp.game.p_global_min,
                NE_TOLERANCE,
            )?;
            Ok(SweepPoint {
                n,
                p_ne: ne.probabilities[0],
                age_ne: expected_age(&ne.probabilities, 0)?,
                replicates: runs.by_ref().take(exp.scenario.replicates).collect(),
            })
        })
        .collect()
}

fn sweep_checks(exp: &Experiment, points: &[SweepPoint]) -> Vec<Check> {
    let tol = mode_tolerance(exp.scenario.mode);
    let worst = points
        .iter()
        .flat_map(|pt| {
            pt.replicates
                .iter()
                .map(move |r| (r.p_learning - pt.p_ne).abs())
        })
        .fold(0.0, f64::max);
    let collisions: u64 = points
        .iter()
        .flat_map(|pt| pt.replicates.iter().map(|r| r.rr_collisions))
        .sum();
    let rr_above: Vec<usize> = points
        .iter()
        .filter(|pt| pt.n >= 2)
        .filter(|pt| mean(pt.replicates.iter().map(|r| r.p_rr)) <= pt.p_ne)
        .map(|pt| pt.n)
        .collect();
    vec![
        Check::new(
            format!("learned probability within {tol:e} of equilibrium"),
            worst <= tol,
            format!("worst node-mean distance {worst:.3e}"),
        ),
        Check::new(
            "round-robin channel free of collisions",
            collisions == 0,
            format!("{collisions} collision slots"),
        ),
        Check::new(
            "round-robin probability above equilibrium for N >= 2",
            rr_above.is_empty(),
            if rr_above.is_empty() {
                "holds at every N".to_string()
            } else {
                format!("violated at N = {rr_above:?}")
            },
        ),
    ]
}

fn run_sweep_prob(exp: &Experiment) -> Result<Report> {
    let points = sweep_points(exp)?;
    let mut table = Table::new(
        "sweep_prob_vs_n",
        &[
            "n",
            "p_learning",
            "p_learning_se",
            "p_rr",
            "p_rr_se",
            "p_ne",
        ],
    );
    for pt in &points {
        let (pl, pl_se) = mean_se(
            &pt.replicates
                .iter()
                .map(|r| r.p_learning)
                .collect::<Vec<_>>(),
        );
        let (pr, pr_se) = mean_se(&pt.replicates.iter().map(|r| r.p_rr).collect::<Vec<_>>());
        table.push(vec![
            pt.n.to_string(),
            num(pl),
            num(pl_se),
            num(pr),
            num(pr_se),
            num(pt.p_ne),
        ]);
    }
    Ok(Report {
        scenario: ScenarioKind::SweepProbVsN,
        tables: vec![table],
        checks: sweep_checks(exp, &points),
    })
}

fn run_sweep_age(exp: &Experiment) -> Result<Report> {
    let points = sweep_points(exp)?;
    let mut table = Table::new(
        "sweep_age_vs_n",
        &[
            "n",
            "age_learning",
            "age_learning_se",
            "age_rr",
            "age_rr_se",
            "age_ne",
            "age_rr_nominal",
        ],
    );
    for pt in &points {
        let (al, al_se) = mean_se(
            &pt.replicates
                .iter()
                .map(|r| r.age_learning)
                .collect::<Vec<_>>(),
        );
        let (ar, ar_se) = mean_se(&pt.replicates.iter().map(|r| r.age_rr).collect::<Vec<_>>());
        let p_rr = mean(pt.replicates.iter().map(|r| r.p_rr));
        table.push(vec![
            pt.n.to_string(),
            num(al),
            num(al_se),
            num(ar),
            num(ar_se),
            num(pt.age_ne),
            num(crate::rr::nominal_age(pt.n, p_rr)),
        ]);
    }
    Ok(Report {
        scenario: ScenarioKind::SweepAgeVsN,
        tables: vec![table],
        checks: sweep_checks(exp, &points),
    })
}

fn run_sweep_poa(exp: &Experiment) -> Result<Report> {
    let ns: Vec<usize> = exp.scenario.n_range().collect();
    let results = ns
        .par_iter()
        .map(|&n| {
            let game = exp.game_with_nodes(n);
            let w = price_of_anarchy(&game)?;
            let ext = externality(&w.p_ne, 0, &game.nodes)?;
            Ok((w, ext))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = Table::new(
        "sweep_poa_vs_n",
        &[
            "n",
            "u_ne",
            "u_opt",
            "poa",
            "p_ne",
            "p_opt_mean",
            "externality",
        ],
    );
    for (&n, (w, ext)) in ns.iter().zip(&results) {
        table.push(vec![
            n.to_string(),
            num(w.u_ne),
            num(w.u_opt),
            num(w.poa),
            num(w.p_ne[0]),
            num(mean(w.p_opt.iter().copied())),
            num(*ext),
        ]);
    }

    let poa: Vec<f64> = results.iter().map(|(w, _)| w.poa).collect();
    let min = poa.iter().copied().fold(f64::INFINITY, f64::min);
    let peak = poa
        .iter()
        .enumerate()
        .fold(0, |best, (i, &x)| if x > poa[best] { i } else { best });
    let unimodal = poa[..=peak].windows(2).all(|w| w[1] >= w[0] - POA_SLACK)
        && poa[peak..].windows(2).all(|w| w[1] <= w[0] + POA_SLACK);
    let mut checks = vec![
        Check::new(
            "price of anarchy at least 1",
            min >= 1.0 - POA_SLACK,
            format!("minimum {min:.12}"),
        ),
        Check::new(
            "price of anarchy rises then falls in N",
            unimodal,
            format!("peak {:.9} at N = {}", poa[peak], ns[peak]),
        ),
    ];
    if let Some(i) = ns.iter().position(|&n| n == 1) {
        checks.push(Check::new(
            "price of anarchy is 1 for a single node",
            (poa[i] - 1.0).abs() <= POA_SLACK,
            format!("{:.12}", poa[i]),
        ));
    }
    Ok(Report {
        scenario: ScenarioKind::SweepPoaVsN,
        tables: vec![table],
        checks,
    })
}

fn run_rr_compare(exp: &Experiment) -> Result<Report> {
    let frames = exp.scenario.frames;
    let game = &exp.game;
    let n = game.nodes.len();
    let learning = run_learning(game, frames, exp.scenario.mode)?;
    let rr = simulate_rr(game, frames)?;
    let mut table = Table::new(
        "rr_compare",
        &[
            "frame",
            "node",
            "p_learning",
            "p_rr",
            "cost_learning",
            "cost_rr",
            "age_learning",
            "age_rr",
        ],
    );
    for (l, r) in learning.records.iter().zip(&rr.records) {
        for node in 0..n {
            let (cost_l, age_l) = match l.observations.get(node) {
                Some(o) => (o.avg_cost, o.avg_age),
                None => (
                    expected_cost(
                        l.probabilities[node],
                        game.nodes[node].cost_per_transmission,
                    ),
                    expected_age(&l.probabilities, node)?,
                ),
            };
            let o = &r.observations[node];
            table.push(vec![
                l.frame.to_string(),
                node.to_string(),
                num(l.probabilities[node]),
                num(r.probabilities[node]),
                num(cost_l),
                num(o.avg_cost),
                num(age_l),
                num(o.avg_age),
            ]);
        }
    }

    let collisions: u64 = rr.records.iter().map(|r| r.collision_slots).sum();
    let ne = solve_ne_roster(&game.nodes, game.p_global_min, NE_TOLERANCE)?;
    let p_rr = mean(rr.final_probabilities.iter().copied());
    let p_ne = mean(ne.probabilities.iter().copied());
    let mut checks = vec![Check::new(
        "round-robin channel free of collisions",
        collisions == 0,
        format!("{collisions} collision slots"),
    )];
    if n >= 2 {
        checks.push(Check::new(
            "round-robin probability above equilibrium",
            p_rr > p_ne,
            format!("p_rr {p_rr:.6}, p_ne {p_ne:.6}"),
        ));
    }
    Ok(Report {
        scenario: ScenarioKind::RrCompare,
        tables: vec![table],
        checks,
    })
}

/// Runs the scenario described by `exp` without touching the filesystem.
pub fn run_experiment(exp: &Experiment) -> Result<Report> {
    let kind = exp.scenario.kind;
    let report = match kind {
        ScenarioKind::Convergence => run_convergence(exp),
        ScenarioKind::Churn => run_churn(exp),
        ScenarioKind::SweepProbVsN => run_sweep_prob(exp),
        ScenarioKind::SweepAgeVsN => run_sweep_age(exp),
        ScenarioKind::SweepPoaVsN => run_sweep_poa(exp),
        ScenarioKind::RrCompare => run_rr_compare(exp),
    };
    report.map_err(|e| Error::Scenario {
        scenario: kind.to_string(),
        source: Box::new(e),
    })
}

fn io(context: String) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { context, source }
}

fn write_table(table: &Table, path: &Path) -> Result<Vec<u8>> {
    let wrap = |source| Error::Table {
        path: path.display().to_string(),
        source,
    };
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&table.header).map_err(wrap)?;
    for row in &table.rows {
        writer.write_record(row).map_err(wrap)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| wrap(csv::Error::from(e.into_error())))?;
    fs::write(path, &bytes).map_err(io(format!("writing {}", path.display())))?;
    Ok(bytes)
}

/// Writes every table of `report` plus `manifest.json` into `out_dir` and
/// returns the manifest path.
pub fn write_report(exp: &Experiment, report: &Report, out_dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(out_dir).map_err(io(format!("creating {}", out_dir.display())))?;
    let mut tables = Vec::new();
    for table in &report.tables {
        let file = table.file_name();
        let bytes = write_table(table, &out_dir.join(&file))?;
        tables.push(TableEntry {
            file,
            rows: table.rows.len(),
            sha256: sha256(&bytes),
        });
    }
    let canonical = serde_json::to_vec(exp).expect("configuration serializes");
    let manifest = Manifest {
        tool: "aoi-lab",
        version: env!("CARGO_PKG_VERSION"),
        scenario: report.scenario,
        seed: exp.game.seed,
        mode: exp.scenario.mode,
        config_sha256: sha256(&canonical),
        config: exp,
        tables,
        checks: &report.checks,
        passed: report.passed(),
    };
    let path = out_dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io(format!("writing {}", path.display())))?;
    Ok(path)
}

/// Runs a scenario and writes its outputs.
pub fn run_scenario(exp: &Experiment, out_dir: &Path) -> Result<Report> {
    let report = run_experiment(exp)?;
    write_report(exp, &report, out_dir)?;
    Ok(report)
}
