//! Scenario files: TOML restricted to scalars and arrays under dotted keys.
//!
//! ```toml
//! kind = "qd-social"
//! seed = 7
//! model.transition = [[1.0, 0.0], [0.05, 0.95]]
//! detection.delay = 1.05
//! ```
//!
//! Parsing collects every problem it can find before giving up. States,
//! observations, actions and graph nodes are numbered from 1 in these files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use socsense_core::detection::{DetectionCosts, PrivacyCosts, SolverSettings, ValueInit};
use socsense_core::game::{GameSettings, GameSpec};
use socsense_core::incest::{parse_edge_list, FusionMode, InformationFlowGraph};
use socsense_core::{ActionRule, Matrix, ModelParams};
use toml::Value;

use crate::error::{CliError, ConfigIssue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    SocialLearning,
    Reputation,
    QdClassic,
    QdSocial,
    Privacy,
    Game,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::SocialLearning,
        ScenarioKind::Reputation,
        ScenarioKind::QdClassic,
        ScenarioKind::QdSocial,
        ScenarioKind::Privacy,
        ScenarioKind::Game,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::SocialLearning => "social-learning",
            ScenarioKind::Reputation => "reputation",
            ScenarioKind::QdClassic => "qd-classic",
            ScenarioKind::QdSocial => "qd-social",
            ScenarioKind::Privacy => "privacy",
            ScenarioKind::Game => "game",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = ScenarioKind::ALL.iter().map(|k| k.as_str()).collect();
                format!(
                    "unknown scenario kind `{s}` (expected one of {})",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    pub runs: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    SocialLearning {
        params: ModelParams,
        horizon: usize,
    },
    Reputation {
        params: ModelParams,
        graph: InformationFlowGraph,
        mode: FusionMode,
        /// 0-based, one per node; sampled from the model when absent.
        observations: Option<Vec<usize>>,
        oracle: bool,
    },
    Detection {
        params: ModelParams,
        costs: DetectionCosts,
        solver: SolverSettings,
        simulation: Option<SimulationConfig>,
    },
    Privacy {
        params: ModelParams,
        costs: PrivacyCosts,
        discount: f64,
        /// 0-based.
        target_state: usize,
        solver: SolverSettings,
        rollouts: usize,
        horizon: usize,
    },
    Game {
        game: GameSpec,
        settings: GameSettings,
        replicas: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub scenario: Scenario,
    /// The file as written, echoed into the run manifest.
    pub source: String,
}

pub fn parse_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ConfigRead {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_config_str(&text, base)
}

/// Parses a scenario; relative file references resolve against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig, CliError> {
    let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Parse {
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    let mut fields = Fields::new(&table);
    let kind = match fields.take("kind") {
        None => {
            return Err(CliError::Parse {
                line: None,
                message: "missing `kind`".into(),
            })
        }
        Some(Value::String(s)) => s
            .parse::<ScenarioKind>()
            .map_err(|message| CliError::Parse {
                line: key_line(text, "kind"),
                message,
            })?,
        Some(_) => {
            return Err(CliError::Parse {
                line: key_line(text, "kind"),
                message: "`kind` must be a string".into(),
            })
        }
    };
    let seed = fields.opt_u64("seed").unwrap_or(0);
    let out = fields.opt_string("out").map(PathBuf::from);
    let scenario = match kind {
        ScenarioKind::SocialLearning => {
            let params = fields.model(None);
            let horizon = fields.positive("social.horizon");
            fields.finish()?;
            Scenario::SocialLearning {
                params: params.expect("checked"),
                horizon: horizon.expect("checked"),
            }
        }
        ScenarioKind::Reputation => reputation(&mut fields, base_dir)?,
        ScenarioKind::QdClassic | ScenarioKind::QdSocial => detection(&mut fields)?,
        ScenarioKind::Privacy => privacy(&mut fields)?,
        ScenarioKind::Game => game(&mut fields, seed)?,
    };
    Ok(ScenarioConfig {
        kind,
        seed,
        out,
        scenario,
        source: text.to_string(),
    })
}

fn reputation(fields: &mut Fields, base_dir: &Path) -> Result<Scenario, CliError> {
    let params = fields.model(None);
    if let Some(p) = &params {
        if !p.transition().is_identity() {
            fields.issue(
                "model.transition",
                "reputation runs need the identity transition matrix",
            );
        }
        if !p.strictly_positive_likelihood() {
            fields.issue(
                "model.observation",
                "reputation runs need strictly positive likelihoods",
            );
        }
    }
    let graph = fields.string("graph.file").and_then(|file| {
        let path = base_dir.join(&file);
        match std::fs::read_to_string(&path) {
            Err(e) => {
                fields.issue("graph.file", format!("cannot read {}: {e}", path.display()));
                None
            }
            Ok(text) => match parse_edge_list(&text) {
                Ok(g) => Some(g),
                Err(e) => {
                    fields.issue("graph.file", format!("{}: {e}", path.display()));
                    None
                }
            },
        }
    });
    let mode = match fields.opt_string("reputation.mode").as_deref() {
        None | Some("fair") => Some(FusionMode::Fair),
        Some("naive") => Some(FusionMode::Naive),
        Some(other) => {
            fields.issue(
                "reputation.mode",
                format!("expected `fair` or `naive`, got `{other}`"),
            );
            None
        }
    };
    let observations = fields.opt_index_vec("reputation.observations");
    if let (Some(obs), Some(g), Some(p)) = (&observations, &graph, &params) {
        if obs.len() != g.node_count() {
            fields.issue(
                "reputation.observations",
                format!("{} entries for {} nodes", obs.len(), g.node_count()),
            );
        }
        if obs.iter().any(|&y| y >= p.obs_count()) {
            fields.issue("reputation.observations", "observation outside 1..=Y");
        }
    }
    let oracle = fields.opt_bool("reputation.oracle").unwrap_or(false);
    fields.finish()?;
    Ok(Scenario::Reputation {
        params: params.expect("checked"),
        graph: graph.expect("checked"),
        mode: mode.expect("checked"),
        observations,
        oracle,
    })
}

fn detection(fields: &mut Fields) -> Result<Scenario, CliError> {
    let params = fields.model(None);
    if let Some(p) = &params {
        check_two_states(fields, p);
        if p.state_count() == 2 && p.transition().row(0) != [1.0, 0.0] {
            fields.issue(
                "model.transition",
                "row 1 must be (1, 0): the first state is absorbing",
            );
        }
        if !p.strictly_positive_likelihood() {
            fields.issue("model.observation", "likelihoods must be strictly positive");
        }
    }
    let delay = fields.f64("detection.delay");
    let false_alarm = fields.f64("detection.false_alarm");
    let costs = match (delay, false_alarm) {
        (Some(d), Some(f)) => match DetectionCosts::new(d, f) {
            Ok(c) => Some(c),
            Err(e) => {
                fields.issue("detection", e.to_string());
                None
            }
        },
        _ => None,
    };
    let solver = fields.solver();
    let simulation = fields.simulation();
    fields.finish()?;
    Ok(Scenario::Detection {
        params: params.expect("checked"),
        costs: costs.expect("checked"),
        solver,
        simulation,
    })
}

fn privacy(fields: &mut Fields) -> Result<Scenario, CliError> {
    let herd = fields.matrix("privacy.herd");
    let params = fields.model(herd.clone());
    let reveal = fields.vector("privacy.reveal");
    let discount = fields.f64("privacy.discount");
    if let Some(rho) = discount {
        if !(0.0..1.0).contains(&rho) {
            fields.issue("privacy.discount", format!("must lie in [0, 1), got {rho}"));
        }
    }
    let target = fields.index("privacy.target_state");
    if let Some(p) = &params {
        check_two_states(fields, p);
        if !p.transition().is_identity() {
            fields.issue(
                "model.transition",
                "privacy stopping needs the identity transition matrix",
            );
        }
        if target.is_some_and(|t| t >= p.state_count()) {
            fields.issue("privacy.target_state", "outside 1..=X");
        }
        if reveal.as_ref().is_some_and(|r| r.len() != p.state_count()) {
            fields.issue("privacy.reveal", "needs one cost per state");
        }
        if herd.as_ref().is_some_and(|h| h.rows() != p.state_count()) {
            fields.issue("privacy.herd", "needs one row per state");
        }
    }
    let solver = fields.solver();
    let rollouts = fields.opt_usize("privacy.rollouts").unwrap_or(100);
    let horizon = fields.opt_usize("privacy.horizon").unwrap_or(100);
    fields.finish()?;
    Ok(Scenario::Privacy {
        params: params.expect("checked"),
        costs: PrivacyCosts {
            reveal: reveal.expect("checked"),
            herd: herd.expect("checked"),
        },
        discount: discount.expect("checked"),
        target_state: target.expect("checked"),
        solver,
        rollouts,
        horizon,
    })
}

fn game(fields: &mut Fields, seed: u64) -> Result<Scenario, CliError> {
    let preset = fields.opt_string("game.preset");
    let spec = match preset.as_deref() {
        Some("coordination") => Some(GameSpec::coordination()),
        Some("anti-coordination") => Some(GameSpec::anti_coordination()),
        Some("congestion") => {
            let players = fields.opt_usize("game.players").unwrap_or(3);
            let resources = fields.opt_usize("game.resources").unwrap_or(2);
            if players == 0 || resources == 0 {
                fields.issue(
                    "game",
                    "congestion needs at least one player and one resource",
                );
                None
            } else {
                Some(GameSpec::congestion(players, resources))
            }
        }
        Some(other) => {
            fields.issue("game.preset", format!("unknown preset `{other}`"));
            None
        }
        None => {
            let actions = fields.usize_vec("game.actions");
            let utilities = fields.matrix_rows("game.utilities");
            match (actions, utilities) {
                (Some(a), Some(u)) => match GameSpec::new(a, u) {
                    Ok(g) => Some(g),
                    Err(e) => {
                        fields.issue("game.utilities", e.to_string());
                        None
                    }
                },
                _ => None,
            }
        }
    };
    let steps = fields.positive("game.steps");
    let replicas = fields.opt_usize("game.replicas").unwrap_or(1);
    if replicas == 0 {
        fields.issue("game.replicas", "must be at least 1");
    }
    let checkpoints = fields
        .opt_usize_vec("game.checkpoints")
        .map(|v| v.into_iter().map(|c| c as u64).collect::<Vec<u64>>());
    if let (Some(c), Some(n)) = (&checkpoints, steps) {
        if c.iter().any(|&k| k == 0 || k > n as u64) {
            fields.issue(
                "game.checkpoints",
                format!("checkpoints must lie in 1..={n}"),
            );
        }
    }
    let normalizers = fields.opt_vector("game.normalizers");
    if let (Some(c), Some(g)) = (&normalizers, &spec) {
        if c.len() != g.player_count() {
            fields.issue("game.normalizers", "needs one value per player");
        }
        if c.iter().any(|&x| !(x > 0.0)) {
            fields.issue("game.normalizers", "must be positive");
        }
    }
    fields.finish()?;
    let steps = steps.expect("checked") as u64;
    Ok(Scenario::Game {
        game: spec.expect("checked"),
        settings: GameSettings {
            steps,
            seed,
            normalizers,
            checkpoints: checkpoints.unwrap_or_else(|| vec![steps]),
            record_trace: false,
        },
        replicas,
    })
}

fn check_two_states(fields: &mut Fields, p: &ModelParams) {
    if p.state_count() != 2 {
        fields.issue("model", format!("needs 2 states, got {}", p.state_count()));
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            l.trim_start()
                .strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
        })
        .map(|i| i + 1)
}

/// Dotted-key view of the parsed table that remembers which keys were read.
struct Fields {
    values: BTreeMap<String, Value>,
    used: BTreeSet<String>,
    issues: Vec<ConfigIssue>,
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl Fields {
    fn new(table: &toml::Table) -> Self {
        let mut values = BTreeMap::new();
        flatten("", table, &mut values);
        Fields {
            values,
            used: BTreeSet::new(),
            issues: Vec::new(),
        }
    }

    fn issue(&mut self, field: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn take(&mut self, key: &str) -> Option<Value> {
        let v = self.values.get(key).cloned();
        if v.is_some() {
            self.used.insert(key.to_string());
        }
        v
    }

    fn required<T>(
        &mut self,
        key: &str,
        what: &str,
        conv: impl Fn(&Value) -> Option<T>,
    ) -> Option<T> {
        match self.take(key) {
            None => {
                self.issue(key, "missing");
                None
            }
            Some(v) => conv(&v).or_else(|| {
                self.issue(key, format!("expected {what}"));
                None
            }),
        }
    }

    fn optional<T>(
        &mut self,
        key: &str,
        what: &str,
        conv: impl Fn(&Value) -> Option<T>,
    ) -> Option<T> {
        let v = self.take(key)?;
        conv(&v).or_else(|| {
            self.issue(key, format!("expected {what}"));
            None
        })
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        self.required(key, "a number", as_f64)
    }

    fn opt_u64(&mut self, key: &str) -> Option<u64> {
        self.optional(key, "a nonnegative integer", |v| {
            v.as_integer().and_then(|i| u64::try_from(i).ok())
        })
    }

    fn opt_usize(&mut self, key: &str) -> Option<usize> {
        self.optional(key, "a nonnegative integer", to_usize)
    }

    fn positive(&mut self, key: &str) -> Option<usize> {
        self.required(key, "a positive integer", |v| {
            to_usize(v).filter(|&n| n > 0)
        })
    }

    /// 1-based index in the file, 0-based in the result.
    fn index(&mut self, key: &str) -> Option<usize> {
        self.required(key, "an index starting at 1", |v| {
            to_usize(v).filter(|&n| n > 0).map(|n| n - 1)
        })
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.required(key, "a string", |v| v.as_str().map(str::to_string))
    }

    fn opt_string(&mut self, key: &str) -> Option<String> {
        self.optional(key, "a string", |v| v.as_str().map(str::to_string))
    }

    fn opt_bool(&mut self, key: &str) -> Option<bool> {
        self.optional(key, "true or false", Value::as_bool)
    }

    fn vector(&mut self, key: &str) -> Option<Vec<f64>> {
        self.required(key, "an array of numbers", to_vec)
    }

    fn opt_vector(&mut self, key: &str) -> Option<Vec<f64>> {
        self.optional(key, "an array of numbers", to_vec)
    }

    fn usize_vec(&mut self, key: &str) -> Option<Vec<usize>> {
        self.required(key, "an array of nonnegative integers", to_usize_vec)
    }

    fn opt_usize_vec(&mut self, key: &str) -> Option<Vec<usize>> {
        self.optional(key, "an array of nonnegative integers", to_usize_vec)
    }

    fn opt_index_vec(&mut self, key: &str) -> Option<Vec<usize>> {
        self.optional(key, "an array of indices starting at 1", |v| {
            to_usize_vec(v)
                .filter(|xs| xs.iter().all(|&x| x > 0))
                .map(|xs| xs.iter().map(|x| x - 1).collect())
        })
    }

    fn matrix_rows(&mut self, key: &str) -> Option<Vec<Vec<f64>>> {
        self.required(key, "an array of arrays of numbers", |v| {
            v.as_array()?.iter().map(to_vec).collect()
        })
    }

    fn matrix(&mut self, key: &str) -> Option<Matrix> {
        let rows = self.matrix_rows(key)?;
        match Matrix::from_rows(&rows) {
            Ok(m) => Some(m),
            Err(e) => {
                self.issue(key, e.to_string());
                None
            }
        }
    }

    /// `model.*`; `default_costs` stands in for a missing `model.costs`.
    fn model(&mut self, default_costs: Option<Matrix>) -> Option<ModelParams> {
        let transition = self.matrix("model.transition");
        let observation = self.matrix("model.observation");
        let costs = if self.values.contains_key("model.costs") || default_costs.is_none() {
            self.matrix("model.costs")
        } else {
            default_costs
        };
        let prior = self.vector("model.prior");
        let rule = match self.opt_string("model.action_rule").as_deref() {
            None | Some("myopic") => Some(ActionRule::Myopic),
            Some("reveal") => Some(ActionRule::RevealObservation),
            Some(other) => {
                self.issue(
                    "model.action_rule",
                    format!("expected `myopic` or `reveal`, got `{other}`"),
                );
                None
            }
        };
        match ModelParams::with_rule(transition?, observation?, costs?, prior?, rule?) {
            Ok(p) => Some(p),
            Err(e) => {
                for issue in e.issues() {
                    self.issue("model", issue.to_string());
                }
                None
            }
        }
    }

    fn solver(&mut self) -> SolverSettings {
        let defaults = SolverSettings::default();
        let grid_size = self
            .opt_usize("solver.grid_size")
            .unwrap_or(defaults.grid_size);
        if grid_size < 2 {
            self.issue("solver.grid_size", "needs at least 2 points");
        }
        let tol = self
            .optional("solver.tol", "a number", as_f64)
            .unwrap_or(defaults.tol);
        if !(tol >= 0.0) {
            self.issue("solver.tol", "must be nonnegative");
        }
        let init = match self.opt_string("solver.init").as_deref() {
            None | Some("zero") => ValueInit::Zero,
            Some("stop_cost") => ValueInit::StopCost,
            Some(other) => {
                self.issue(
                    "solver.init",
                    format!("expected `zero` or `stop_cost`, got `{other}`"),
                );
                ValueInit::Zero
            }
        };
        SolverSettings {
            grid_size,
            max_iters: self
                .opt_usize("solver.max_iters")
                .unwrap_or(defaults.max_iters),
            tol,
            init,
        }
    }

    fn simulation(&mut self) -> Option<SimulationConfig> {
        let runs = self.opt_usize("simulation.runs");
        let horizon = self.opt_usize("simulation.horizon");
        match (runs, horizon) {
            (None, None) => None,
            (Some(r), Some(h)) if r > 0 => Some(SimulationConfig {
                runs: r,
                horizon: h,
            }),
            (Some(_), Some(_)) => {
                self.issue("simulation.runs", "must be at least 1");
                None
            }
            _ => {
                self.issue("simulation", "set both `runs` and `horizon`");
                None
            }
        }
    }

    /// Flags unread keys, then fails if anything went wrong.
    fn finish(&mut self) -> Result<(), CliError> {
        let unknown: Vec<String> = self
            .values
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect();
        for key in unknown {
            self.issue(&key, "unknown key");
        }
        if self.issues.is_empty() {
            Ok(())
        } else {
            Err(CliError::Validation(std::mem::take(&mut self.issues)))
        }
    }
}

fn to_usize(v: &Value) -> Option<usize> {
    v.as_integer().and_then(|i| usize::try_from(i).ok())
}

fn to_vec(v: &Value) -> Option<Vec<f64>> {
    v.as_array()?.iter().map(as_f64).collect()
}

fn to_usize_vec(v: &Value) -> Option<Vec<usize>> {
    v.as_array()?.iter().map(to_usize).collect()
}
