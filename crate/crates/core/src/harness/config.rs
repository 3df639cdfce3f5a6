//! Experiment configuration text.
//!
//! The format is TOML. Every key is optional except `scenario.kind`:
//!
//! ```toml
//! seed = 1                  # u64
//! frame_length = 10000      # slots per frame
//! p_global_min = 0.05       # in (0, 0.5)
//! kappa = "reciprocal"      # or a constant in (0, 1], or a table [1.0, 0.5, ...]
//! kappa_reinit_period = 500 # restart the learning-rate clock every k frames
//! reinit_kappa = false      # restart the clock at every roster change
//! mode = "stochastic"       # or "expected"
//!
//! [scenario]
//! kind = "convergence"      # churn | sweep_prob_vs_n | sweep_age_vs_n | sweep_poa_vs_n | rr_compare
//! n = 10                    # initial roster size
//! frames = 200
//! replicates = 5            # seeds per sweep point
//! n_min = 1                 # sweep range, inclusive
//! n_max = 25
//!
//! [nodes]
//! cost = 1.0                # cost per transmission for every node
//! costs = [1.0, 2.0, 1.0]   # or one cost per initial node
//!
//! [[churn]]
//! frame = 20
//! join = 7                  # or: leave = 7
//! ```

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::learning::{Mode, Schedule, ScheduleKind};
use crate::model::{derive_params, ChurnEvent, GameConfig, NodeParams, RosterChange};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_FRAME_LENGTH: usize = 10_000;
pub const DEFAULT_P_GLOBAL_MIN: f64 = 0.05;
pub const DEFAULT_COST: f64 = 1.0;
pub const DEFAULT_REPLICATES: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// Dotted key path, when the problem is tied to one field.
    pub field: Option<String>,
    /// 1-based line in the configuration text, when known.
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: Some(field.into()),
            line: None,
            message: message.into(),
        }
    }
}

impl std::error::Error for ConfigError {}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Convergence,
    Churn,
    SweepProbVsN,
    SweepAgeVsN,
    SweepPoaVsN,
    RrCompare,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Convergence,
        ScenarioKind::Churn,
        ScenarioKind::SweepProbVsN,
        ScenarioKind::SweepAgeVsN,
        ScenarioKind::SweepPoaVsN,
        ScenarioKind::RrCompare,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Convergence => "convergence",
            ScenarioKind::Churn => "churn",
            ScenarioKind::SweepProbVsN => "sweep_prob_vs_n",
            ScenarioKind::SweepAgeVsN => "sweep_age_vs_n",
            ScenarioKind::SweepPoaVsN => "sweep_poa_vs_n",
            ScenarioKind::RrCompare => "rr_compare",
        }
    }

    pub fn is_sweep(self) -> bool {
        matches!(
            self,
            ScenarioKind::SweepProbVsN | ScenarioKind::SweepAgeVsN | ScenarioKind::SweepPoaVsN
        )
    }

    fn default_frames(self) -> usize {
        match self {
            ScenarioKind::Churn => 120,
            _ => 200,
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let wanted = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|k| k.name() == wanted)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown scenario `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Initial roster size.
    pub n: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub frames: usize,
    pub replicates: usize,
    pub mode: Mode,
}

impl Scenario {
    pub fn n_range(&self) -> RangeInclusive<usize> {
        self.n_min..=self.n_max
    }
}

/// A parsed configuration: the game, the scenario and the uniform node cost
/// used whenever nodes are created outside the initial roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub game: GameConfig,
    pub scenario: Scenario,
    pub node_cost: f64,
}

impl Experiment {
    /// Game with `n` identical nodes, sharing every other setting.
    pub fn game_with_nodes(&self, n: usize) -> GameConfig {
        let params = self.default_params();
        GameConfig {
            nodes: vec![params; n],
            churn_events: Vec::new(),
            initial_probabilities: None,
            ..self.game.clone()
        }
    }

    pub fn default_params(&self) -> NodeParams {
        derive_params(self.node_cost, self.game.p_global_min).expect("validated during parsing")
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawKappa {
    Name(String),
    Constant(f64),
    Table(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    frame_length: Option<i64>,
    p_global_min: Option<f64>,
    kappa: Option<RawKappa>,
    kappa_reinit_period: Option<i64>,
    reinit_kappa: Option<bool>,
    mode: Option<String>,
    scenario: Option<RawScenario>,
    nodes: Option<RawNodes>,
    #[serde(default)]
    churn: Vec<RawChurn>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: Option<String>,
    n: Option<i64>,
    frames: Option<i64>,
    replicates: Option<i64>,
    n_min: Option<i64>,
    n_max: Option<i64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodes {
    cost: Option<f64>,
    costs: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChurn {
    frame: i64,
    join: Option<i64>,
    leave: Option<i64>,
}

fn positive_int(field: &str, value: Option<i64>, default: usize) -> Result<usize, ConfigError> {
    match value {
        None => Ok(default),
        Some(v) if v >= 1 => Ok(v as usize),
        Some(v) => Err(ConfigError::field(
            field,
            format!("must be a positive integer, got {v}"),
        )),
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses and validates configuration text.
pub fn parse_config(text: &str) -> Result<Experiment, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError {
        field: None,
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })?;

    let scenario_raw = raw
        .scenario
        .ok_or_else(|| ConfigError::field("scenario", "missing [scenario] block"))?;
    let kind: ScenarioKind = scenario_raw
        .kind
        .as_deref()
        .ok_or_else(|| ConfigError::field("scenario.kind", "missing scenario kind"))?
        .parse()
        .map_err(|e: String| ConfigError::field("scenario.kind", e))?;

    let p_global_min = raw.p_global_min.unwrap_or(DEFAULT_P_GLOBAL_MIN);
    if !(p_global_min > 0.0 && p_global_min < 0.5) {
        return Err(ConfigError::field(
            "p_global_min",
            format!("must lie in (0, 0.5), got {p_global_min}"),
        ));
    }

    let nodes = raw.nodes.unwrap_or(RawNodes {
        cost: None,
        costs: None,
    });
    let node_cost = nodes.cost.unwrap_or(DEFAULT_COST);
    if !(node_cost.is_finite() && node_cost > 0.0) {
        return Err(ConfigError::field(
            "nodes.cost",
            format!("must be positive, got {node_cost}"),
        ));
    }
    let default_n = match kind {
        ScenarioKind::Churn => 3,
        _ => 10,
    };
    let costs = match (nodes.costs, scenario_raw.n) {
        (Some(costs), Some(n)) if costs.len() as i64 != n => {
            return Err(ConfigError::field(
                "nodes.costs",
                format!("has {} entries but scenario.n = {n}", costs.len()),
            ))
        }
        (Some(costs), _) if costs.is_empty() => {
            return Err(ConfigError::field("nodes.costs", "must not be empty"))
        }
        (Some(costs), _) => costs,
        (None, n) => vec![node_cost; positive_int("scenario.n", n, default_n)?],
    };
    let roster = costs
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            derive_params(c, p_global_min)
                .map_err(|e| ConfigError::field(format!("nodes.costs[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let default_params = derive_params(node_cost, p_global_min)
        .map_err(|e| ConfigError::field("nodes.cost", e.to_string()))?;

    let schedule_kind = match raw.kappa {
        None => ScheduleKind::Reciprocal,
        Some(RawKappa::Name(name)) if name == "reciprocal" => ScheduleKind::Reciprocal,
        Some(RawKappa::Name(name)) => {
            return Err(ConfigError::field(
                "kappa",
                format!("unknown schedule `{name}` (use \"reciprocal\", a number or a list)"),
            ))
        }
        Some(RawKappa::Constant(k)) => ScheduleKind::Constant(k),
        Some(RawKappa::Table(t)) => ScheduleKind::Table(t),
    };
    let schedule = Schedule {
        kind: schedule_kind,
        reinit_period: raw
            .kappa_reinit_period
            .map(|_| positive_int("kappa_reinit_period", raw.kappa_reinit_period, 1))
            .transpose()?,
    };
    schedule
        .validate()
        .map_err(|e| ConfigError::field("kappa", e.to_string()))?;

    let mode = match raw.mode.as_deref() {
        None => Mode::Stochastic,
        Some(m) => m
            .parse()
            .map_err(|e: String| ConfigError::field("mode", e))?,
    };

    let churn_events = raw
        .churn
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let field = |k: &str| format!("churn[{i}].{k}");
            let frame = positive_int(&field("frame"), Some(c.frame), 1)?;
            let change = match (c.join, c.leave) {
                (Some(j), None) => {
                    RosterChange::Join(vec![
                        default_params;
                        positive_int(&field("join"), Some(j), 1)?
                    ])
                }
                (None, Some(l)) => RosterChange::Leave(positive_int(&field("leave"), Some(l), 1)?),
                _ => {
                    return Err(ConfigError::field(
                        format!("churn[{i}]"),
                        "exactly one of `join` or `leave` is required",
                    ))
                }
            };
            Ok(ChurnEvent { frame, change })
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;

    let frames = positive_int(
        "scenario.frames",
        scenario_raw.frames,
        kind.default_frames(),
    )?;
    let replicates = positive_int(
        "scenario.replicates",
        scenario_raw.replicates,
        DEFAULT_REPLICATES,
    )?;
    let n_min = positive_int("scenario.n_min", scenario_raw.n_min, 1)?;
    let n_max = positive_int("scenario.n_max", scenario_raw.n_max, 25)?;
    if n_min > n_max {
        return Err(ConfigError::field(
            "scenario.n_min",
            format!("sweep range is empty ({n_min} > {n_max})"),
        ));
    }
    match kind {
        ScenarioKind::Churn if churn_events.is_empty() => {
            return Err(ConfigError::field(
                "churn",
                "churn scenario needs at least one [[churn]] event",
            ))
        }
        ScenarioKind::RrCompare if !churn_events.is_empty() => {
            return Err(ConfigError::field(
                "churn",
                "round-robin comparison needs a fixed roster",
            ))
        }
        _ => {}
    }

    let game = GameConfig {
        nodes: roster,
        frame_length: positive_int("frame_length", raw.frame_length, DEFAULT_FRAME_LENGTH)?,
        schedule,
        seed: raw.seed.unwrap_or(DEFAULT_SEED),
        churn_events,
        reinit_kappa_on_churn: raw.reinit_kappa.unwrap_or(false),
        p_global_min,
        initial_probabilities: None,
    };
    game.validate()
        .map_err(|e| ConfigError::field("churn", e.to_string()))?;

    Ok(Experiment {
        scenario: Scenario {
            kind,
            n: game.nodes.len(),
            n_min,
            n_max,
            frames,
            replicates,
            mode,
        },
        game,
        node_cost,
    })
}

/// Configuration text used when a scenario is requested without a file.
pub fn default_config_text(kind: ScenarioKind) -> String {
    match kind {
        ScenarioKind::Churn => "reinit_kappa = true\n\n[scenario]\nkind = \"churn\"\nn = 3\n\n\
             [[churn]]\nframe = 20\njoin = 7\n\n[[churn]]\nframe = 80\nleave = 7\n"
            .to_string(),
        other => format!("[scenario]\nkind = \"{}\"\n", other.name()),
    }
}
