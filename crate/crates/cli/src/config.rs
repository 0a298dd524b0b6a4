use std::f64::consts::PI;
use std::path::Path;

use nlskdv::dynamics::Mode;
use nlskdv::operators::Dealias;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::failure::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Stabilize,
    Control,
    Transfer,
    Diagnose,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Stabilize => "stabilize",
            Command::Control => "control",
            Command::Transfer => "transfer",
            Command::Diagnose => "diagnose",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub command: Option<Command>,
    pub n: usize,
    pub dt: f64,
    /// Final time of `simulate` and `stabilize`.
    pub t: f64,
    pub seed: u64,
    pub record_every: usize,
    pub params: ParamsConfig,
    pub initial: StateConfig,
    pub target: StateConfig,
    pub simulate: SimulateConfig,
    pub stabilize: StabilizeConfig,
    pub control: ControlConfig,
    pub transfer: TransferSection,
    pub diagnose: DiagnoseConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            command: None,
            n: 64,
            dt: 1e-3,
            t: 20.0,
            seed: 1,
            record_every: 10,
            params: ParamsConfig::default(),
            initial: StateConfig::default(),
            target: StateConfig {
                kind: StateKind::Zero,
                ..StateConfig::default()
            },
            simulate: SimulateConfig::default(),
            stabilize: StabilizeConfig::default(),
            control: ControlConfig::default(),
            transfer: TransferSection::default(),
            diagnose: DiagnoseConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    pub beta: f64,
    pub mu: f64,
    /// Center of the control arc.
    pub center: f64,
    /// Full width of the control arc.
    pub width: f64,
    pub eta: f64,
    /// Peak of `a²`; defaults to `2η`.
    pub damping_peak: Option<f64>,
    pub eps: f64,
    pub dealias: Dealias,
    pub coupling: bool,
    pub kdv_quadratic: bool,
}

impl Default for ParamsConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            mu: 0.0,
            center: PI,
            width: PI,
            eta: 0.5,
            damping_peak: None,
            eps: 0.1,
            dealias: Dealias::TwoThirds,
            coupling: true,
            kdv_quadratic: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateKind {
    Random,
    Zero,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    pub kind: StateKind,
    /// `‖(u, v − [v])‖` of random data.
    pub norm: f64,
    pub max_mode: i64,
    pub v_mean: f64,
    /// Overrides the scenario seed for this state.
    pub seed: Option<u64>,
}

impl Default for StateConfig {
    fn default() -> Self {
        Self {
            kind: StateKind::Random,
            norm: 1.0,
            max_mode: 3,
            v_mean: 0.25,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub mode: Mode,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { mode: Mode::ClosedLoop }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilizeConfig {
    /// Start of the log-linear fit window (the window ends at `t`).
    pub fit_start: f64,
}

impl Default for StabilizeConfig {
    fn default() -> Self {
        Self { fit_start: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlKind {
    Linear,
    Local,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub kind: ControlKind,
    pub horizon: f64,
    pub tol: f64,
    pub max_iterations: usize,
    /// Size bound on the data for local control.
    pub delta: f64,
    pub local_iterations: usize,
    /// Write only `t,f_l2,h_l2` to `controls.csv`.
    pub compact_csv: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            kind: ControlKind::Linear,
            horizon: 1.0,
            tol: 1e-11,
            max_iterations: 500,
            delta: 0.05,
            local_iterations: 20,
            compact_csv: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferSection {
    pub horizon: f64,
    pub delta: f64,
    pub max_phase_time: f64,
    pub local_iterations: usize,
    pub tol: f64,
}

impl Default for TransferSection {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            delta: 0.02,
            max_phase_time: 200.0,
            local_iterations: 20,
            tol: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub symbol: bool,
    pub estimates: bool,
    pub nmax: i64,
    pub tau_per_side: usize,
    /// Grid of the random ensembles; `n` here is independent of the scenario grid.
    pub n: usize,
    pub time_samples: usize,
    pub half_span: f64,
    pub samples: usize,
    pub k: f64,
    pub s: f64,
    pub windows: Vec<f64>,
    pub b: f64,
    pub b_prime: f64,
    pub localization_window: f64,
    /// Rerun the suite on a grid refined by two and report the sup factors.
    pub refine: bool,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        Self {
            symbol: true,
            estimates: true,
            nmax: 512,
            tau_per_side: 250,
            n: 32,
            time_samples: 64,
            half_span: 2.0,
            samples: 100,
            k: 0.0,
            s: 0.0,
            windows: vec![0.5, 0.25, 0.125],
            b: 0.4,
            b_prime: 0.2,
            localization_window: 0.5,
            refine: false,
        }
    }
}

/// Parses a config file: JSON for `.json`, TOML otherwise.
pub fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    parse(&text, is_json).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

pub fn parse(text: &str, json: bool) -> Result<ScenarioConfig, String> {
    if json {
        serde_json::from_str(text).map_err(|e| e.to_string())
    } else {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Parses the right-hand side of `key=value` as a TOML value, falling back to a string.
pub fn parse_value(raw: &str) -> Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => serde_json::to_value(t.remove("v").expect("key present")).unwrap_or(Value::Null),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets a dotted `path` inside `root`; intermediate tables must exist.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), Failure> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, key) in parts.iter().enumerate() {
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Failure::Validation(format!("`{}` is not a table", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            if !obj.contains_key(*key) {
                return Err(Failure::Validation(format!("unknown field `{path}`")));
            }
            obj.insert(key.to_string(), value);
            return Ok(());
        }
        cur = obj
            .get_mut(*key)
            .ok_or_else(|| Failure::Validation(format!("unknown field `{path}`")))?;
    }
    unreachable!("split yields at least one part")
}

pub fn get_path<'a>(root: &'a Value, path: &str) -> Option<&'a Value> {
    path.split('.').try_fold(root, |v, k| v.get(k))
}

/// Applies `key=value` overrides.
pub fn apply_overrides(cfg: &ScenarioConfig, sets: &[String]) -> Result<ScenarioConfig, Failure> {
    if sets.is_empty() {
        return Ok(cfg.clone());
    }
    let mut tree = serde_json::to_value(cfg).expect("config serializes");
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Failure::Validation(format!("override `{s}` is not key=value")))?;
        set_path(&mut tree, k.trim(), parse_value(v.trim()))?;
    }
    from_tree(tree)
}

pub fn from_tree(tree: Value) -> Result<ScenarioConfig, Failure> {
    serde_json::from_value(tree).map_err(|e| Failure::Validation(e.to_string()))
}

fn positive(name: &str, x: f64) -> Result<(), Failure> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Failure::Validation(format!("`{name}` must be positive and finite, got {x}")))
    }
}

impl ScenarioConfig {
    /// Scalar checks that do not need the library; the rest happens when the
    /// scenario objects are built.
    pub fn validate(&self) -> Result<(), Failure> {
        positive("dt", self.dt)?;
        positive("t", self.t)?;
        if self.record_every == 0 {
            return Err(Failure::Validation("`record_every` must be at least 1".into()));
        }
        for (name, s) in [("initial", &self.initial), ("target", &self.target)] {
            if !(s.norm.is_finite() && s.norm >= 0.0) {
                return Err(Failure::Validation(format!("`{name}.norm` must be non-negative")));
            }
            if s.max_mode < 1 {
                return Err(Failure::Validation(format!("`{name}.max_mode` must be at least 1")));
            }
            if !s.v_mean.is_finite() {
                return Err(Failure::Validation(format!("`{name}.v_mean` must be finite")));
            }
        }
        let fs = self.stabilize.fit_start;
        if self.command == Some(Command::Stabilize) && !(fs >= 0.0 && fs < self.t) {
            return Err(Failure::Validation(format!("`stabilize.fit_start` must lie in [0, t), got {fs}")));
        }
        positive("control.horizon", self.control.horizon)?;
        positive("control.tol", self.control.tol)?;
        positive("control.delta", self.control.delta)?;
        positive("transfer.horizon", self.transfer.horizon)?;
        positive("transfer.delta", self.transfer.delta)?;
        positive("transfer.max_phase_time", self.transfer.max_phase_time)?;
        positive("transfer.tol", self.transfer.tol)?;
        positive("diagnose.half_span", self.diagnose.half_span)?;
        if self.diagnose.samples == 0 {
            return Err(Failure::Validation("`diagnose.samples` must be at least 1".into()));
        }
        Ok(())
    }
}
