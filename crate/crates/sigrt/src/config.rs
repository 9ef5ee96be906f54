//! Scenario configuration: defaults, then a flat `key=value` file, then
//! `SIGRT_*` environment variables, then command-line overrides.

use std::fmt;
use std::path::{Path, PathBuf};

use sigrt_core::explorer::Mode;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{origin} line {line}: expected key=value")]
    Syntax { origin: String, line: usize },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: bad value `{value}` for {key}")]
    BadValue { origin: String, key: String, value: String },
    #[error("{key} = {value} is outside {lo}..={hi}")]
    OutOfBounds { key: &'static str, value: u64, lo: u64, hi: u64 },
    #[error("scenario script needs `script=<path>`")]
    MissingScript,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScenarioKind {
    Trader,
    Seats,
    Elevator,
    Pipeline,
    Script(PathBuf),
}

impl ScenarioKind {
    pub const NAMES: [&'static str; 5] = ["trader", "seats", "elevator", "pipeline", "script"];

    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::Trader => "trader",
            ScenarioKind::Seats => "seats",
            ScenarioKind::Elevator => "elevator",
            ScenarioKind::Pipeline => "pipeline",
            ScenarioKind::Script(_) => "script",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioKind::Script(p) => write!(f, "script({})", p.display()),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub scenario: ScenarioKind,
    pub stores: usize,
    pub products: usize,
    pub transactions: usize,
    pub racers: usize,
    pub cursors: usize,
    pub entries: usize,
    pub seed: u64,
    pub enforcement: bool,
    pub out: PathBuf,
    pub workers: usize,
    pub budget: u64,
    /// Exploration mode for script scenarios.
    pub mode: Mode,
}

impl Config {
    pub fn new(scenario: ScenarioKind) -> Self {
        Config {
            scenario,
            stores: 2,
            products: 2,
            transactions: 3,
            racers: 2,
            cursors: 3,
            entries: 4,
            seed: 0,
            enforcement: true,
            out: PathBuf::from("out"),
            workers: 2,
            budget: 100_000,
            mode: Mode::Exhaustive,
        }
    }

    /// Applies one setting. `origin` names the source in errors.
    pub fn set(&mut self, origin: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue { origin: origin.to_string(), key: key.to_string(), value: value.to_string() };
        let num = || value.parse::<u64>().map_err(|_| bad());
        match key {
            "scenario" => {
                self.scenario = match value {
                    "trader" => ScenarioKind::Trader,
                    "seats" => ScenarioKind::Seats,
                    "elevator" => ScenarioKind::Elevator,
                    "pipeline" => ScenarioKind::Pipeline,
                    "script" => match &self.scenario {
                        ScenarioKind::Script(p) => ScenarioKind::Script(p.clone()),
                        _ => ScenarioKind::Script(PathBuf::new()),
                    },
                    _ => return Err(bad()),
                }
            }
            "script" => self.scenario = ScenarioKind::Script(PathBuf::from(value)),
            "stores" => self.stores = num()? as usize,
            "products" => self.products = num()? as usize,
            "transactions" => self.transactions = num()? as usize,
            "racers" => self.racers = num()? as usize,
            "cursors" => self.cursors = num()? as usize,
            "entries" => self.entries = num()? as usize,
            "seed" => self.seed = num()?,
            "workers" => self.workers = num()? as usize,
            "budget" => self.budget = num()?,
            "enforcement" => {
                self.enforcement = match value {
                    "on" | "true" | "1" => true,
                    "off" | "false" | "0" => false,
                    _ => return Err(bad()),
                }
            }
            "out" => self.out = PathBuf::from(value),
            "mode" => self.mode = value.parse().map_err(|_| bad())?,
            _ => return Err(ConfigError::UnknownKey { origin: origin.to_string(), key: key.to_string() }),
        }
        Ok(())
    }

    /// Reads `key=value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, origin: &str, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { origin: origin.to_string(), line: i + 1 })?;
            self.set(origin, k.trim(), v.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        self.apply_text(&path.display().to_string(), &text)
    }

    /// Applies `SIGRT_<KEY>` variables; other names are ignored.
    pub fn apply_env(&mut self, vars: impl IntoIterator<Item = (String, String)>) -> Result<(), ConfigError> {
        let mut vars: Vec<(String, String)> = vars
            .into_iter()
            .filter_map(|(k, v)| Some((k.strip_prefix("SIGRT_")?.to_ascii_lowercase(), v)))
            .collect();
        vars.sort();
        for (k, v) in vars {
            self.set("environment", &k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |key: &'static str, value: u64, lo: u64, hi: u64| {
            if (lo..=hi).contains(&value) {
                Ok(())
            } else {
                Err(ConfigError::OutOfBounds { key, value, lo, hi })
            }
        };
        check("stores", self.stores as u64, 1, 16)?;
        check("products", self.products as u64, 0, 16)?;
        check("transactions", self.transactions as u64, 0, 32)?;
        check("racers", self.racers as u64, 1, 3)?;
        check("cursors", self.cursors as u64, 1, 4)?;
        check("entries", self.entries as u64, 1, 6)?;
        check("workers", self.workers as u64, 1, 16)?;
        check("budget", self.budget, 1, 10_000_000)?;
        if let ScenarioKind::Script(p) = &self.scenario {
            if p.as_os_str().is_empty() {
                return Err(ConfigError::MissingScript);
            }
        }
        Ok(())
    }

    /// Canonical `key=value` rendering, written next to the artifacts.
    pub fn to_text(&self) -> String {
        let mode = match self.mode {
            Mode::Exhaustive => "exhaustive".to_string(),
            Mode::Sampled { n, .. } => format!("sampled:{n}"),
        };
        let mut out = format!("scenario={}\n", self.scenario.name());
        if let ScenarioKind::Script(p) = &self.scenario {
            out.push_str(&format!("script={}\n", p.display()));
        }
        out.push_str(&format!(
            "stores={}\nproducts={}\ntransactions={}\nracers={}\ncursors={}\nentries={}\nseed={}\nenforcement={}\nworkers={}\nbudget={}\nmode={}\n",
            self.stores,
            self.products,
            self.transactions,
            self.racers,
            self.cursors,
            self.entries,
            self.seed,
            if self.enforcement { "on" } else { "off" },
            self.workers,
            self.budget,
            mode,
        ));
        out
    }
}
