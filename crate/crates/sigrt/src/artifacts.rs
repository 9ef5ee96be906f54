//! Artifact files written after a run, and the summary read back from them.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::config::Config;
use crate::scenarios::{dump_outcomes, ScenarioRun};

pub const CONFIG: &str = "config.txt";
pub const LISTS: &str = "lists.txt";
pub const GRAPH: &str = "graph.dot";
pub const TRACE: &str = "trace.tsv";
pub const CLAIMS: &str = "claims.tsv";
pub const SCHEDULER: &str = "scheduler.tsv";
pub const AUDIT: &str = "audit.txt";
pub const OUTCOMES: &str = "outcomes.txt";
pub const NOTATION: &str = "notation.txt";
pub const VALIDATION: &str = "validation.txt";
pub const CHECKS: &str = "checks.txt";

/// Files every run writes; `inspect` refuses a directory missing any.
pub const REQUIRED: [&str; 7] = [CONFIG, LISTS, GRAPH, TRACE, CLAIMS, AUDIT, CHECKS];

/// Name and contents of every artifact of `run`, in a fixed order.
pub fn render(config: &Config, run: &ScenarioRun) -> Vec<(&'static str, String)> {
    let rt = &run.rt;
    let mut files = vec![
        (CONFIG, config.to_text()),
        (LISTS, rt.dump_all_lists()),
        (GRAPH, rt.description().export_dot()),
        (TRACE, rt.description().trace_text()),
        (CLAIMS, rt.claims().trace_text()),
        (AUDIT, rt.audit().map_or_else(|e| format!("error {e}\n"), |a| a.to_string())),
    ];
    if let Some(r) = &run.report {
        files.push((SCHEDULER, r.to_string()));
    }
    if !run.outcomes.is_empty() {
        let mut text = String::new();
        for (label, outs) in &run.outcomes {
            text.push_str(&format!("# {label} {}\n", outs.len()));
            text.push_str(&dump_outcomes(outs));
        }
        files.push((OUTCOMES, text));
    }
    if let Some((text, n)) = &run.notation {
        files.push((NOTATION, text.clone()));
        let mut v: String = n.validate(rt).iter().map(|v| format!("{v}\n")).collect();
        if v.is_empty() {
            v = "member\n".to_string();
        }
        files.push((VALIDATION, v));
    }
    let checks = run
        .checks
        .iter()
        .map(|c| format!("{} {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))
        .collect();
    files.push((CHECKS, checks));
    files
}

pub fn write(dir: &Path, config: &Config, run: &ScenarioRun) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = vec![];
    for (name, text) in render(config, run) {
        let p = dir.join(name);
        fs::write(&p, text)?;
        out.push(p);
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum InspectError {
    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),
    #[error("cannot read {path}")]
    Io { path: PathBuf, source: io::Error },
    #[error("malformed {0}")]
    Malformed(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    pub scenario: String,
    pub facts_total: usize,
    pub facts_live: usize,
    pub facts_reclaimed: usize,
    pub divergences: usize,
    pub gates: usize,
    pub mutations: usize,
    pub claim_events: usize,
    pub invocations: usize,
    pub interleavings: usize,
    pub anomalous: usize,
    pub checks_failed: Vec<String>,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "scenario {}", self.scenario)?;
        writeln!(f, "facts {} live {} reclaimed {}", self.facts_total, self.facts_live, self.facts_reclaimed)?;
        writeln!(f, "divergences {}", self.divergences)?;
        writeln!(f, "gates {}", self.gates)?;
        writeln!(f, "mutations {}", self.mutations)?;
        writeln!(f, "claim events {}", self.claim_events)?;
        writeln!(f, "invocations {}", self.invocations)?;
        writeln!(f, "interleavings {} anomalous {}", self.interleavings, self.anomalous)?;
        if self.checks_failed.is_empty() {
            writeln!(f, "checks ok")
        } else {
            writeln!(f, "checks failed {}", self.checks_failed.join(" "))
        }
    }
}

fn read(dir: &Path, name: &str) -> Result<Option<String>, InspectError> {
    let path = dir.join(name);
    match fs::read_to_string(&path) {
        Ok(t) => Ok(Some(t)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(source) => Err(InspectError::Io { path, source }),
    }
}

fn required(dir: &Path, name: &str) -> Result<String, InspectError> {
    read(dir, name)?.ok_or_else(|| InspectError::MissingArtifact(dir.join(name)))
}

pub fn inspect(dir: &Path) -> Result<Summary, InspectError> {
    if !dir.is_dir() {
        return Err(InspectError::MissingArtifact(dir.to_path_buf()));
    }
    let mut s = Summary::default();
    for name in REQUIRED {
        required(dir, name)?;
    }
    s.scenario = required(dir, CONFIG)?
        .lines()
        .find_map(|l| l.strip_prefix("scenario=").map(str::to_string))
        .ok_or_else(|| InspectError::Malformed(dir.join(CONFIG)))?;
    let audit = required(dir, AUDIT)?;
    for line in audit.lines() {
        let mut w = line.split_whitespace();
        let (Some(k), Some(v)) = (w.next(), w.next()) else { continue };
        let slot = match k {
            "facts_total" => &mut s.facts_total,
            "facts_live" => &mut s.facts_live,
            "facts_reclaimed" => &mut s.facts_reclaimed,
            "divergences" => &mut s.divergences,
            _ => continue,
        };
        *slot = v.parse().map_err(|_| InspectError::Malformed(dir.join(AUDIT)))?;
    }
    s.gates = required(dir, GRAPH)?.lines().filter(|l| l.contains("xlabel=")).count();
    s.mutations = required(dir, TRACE)?.lines().count();
    s.claim_events = required(dir, CLAIMS)?.lines().count();
    s.invocations = read(dir, SCHEDULER)?.map_or(0, |t| t.lines().count().saturating_sub(1));
    if let Some(t) = read(dir, OUTCOMES)? {
        for line in t.lines().filter(|l| !l.starts_with('#')) {
            s.interleavings += 1;
            if line.rsplit(", ").next() != Some("-") {
                s.anomalous += 1;
            }
        }
    }
    s.checks_failed = required(dir, CHECKS)?
        .lines()
        .filter_map(|l| l.strip_prefix("FAIL "))
        .map(|l| l.split(':').next().unwrap_or(l).to_string())
        .collect();
    Ok(s)
}
