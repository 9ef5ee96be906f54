//! Bundled scenarios and the invariant checks run over each.

use std::fmt::Write as _;

use sigrt_core::explorer::{self, bundled, explore, explore_with, Anomaly, ExploreError, Mode, Outcome, Script, World};
use sigrt_core::fact_graph::OrderCheck;
use sigrt_core::notation::{declare_notation, Notation};
use sigrt_core::scheduler::{Cause, RunReport};
use sigrt_core::{Enforcement, Runtime};

use crate::config::{Config, ScenarioKind};
use crate::trader;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        let mut detail = detail.into();
        if detail.is_empty() {
            detail = "ok".to_string();
        }
        Check { name: name.to_string(), passed, detail }
    }
}

/// Everything a scenario produced. `rt` is the representative run whose
/// structure is exported.
pub struct ScenarioRun {
    pub rt: Runtime,
    pub notation: Option<(String, Notation)>,
    pub report: Option<RunReport>,
    pub outcomes: Vec<(String, Vec<Outcome>)>,
    pub checks: Vec<Check>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read script {path}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Explore(#[from] ExploreError),
}

pub const SEATS_NOTATION: &str = "\
signal seats
list seat under seats
entry seat field state:text by:text
";

pub const ELEVATOR_NOTATION: &str = "\
signal S
list elevator under S
entry elevator field status:text phase:int
list floor under S
entry floor field status:text phase:int
list consistent under S
entry consistent field elevator:int floor:int
";

pub const PIPELINE_NOTATION: &str = "\
signal pipeline
list P under pipeline
entry P field v:int
";

pub fn enforcement(config: &Config) -> Enforcement {
    if config.enforcement {
        Enforcement::on()
    } else {
        Enforcement::off()
    }
}

/// `racers` actors each claiming, reading, checking and appending.
pub fn seats_script(racers: usize) -> String {
    let mut s = String::from("signal seats\nlist seat window 4\nentry seat state=free by=none\n");
    for r in 1..=racers {
        for op in [
            "claim seat".to_string(),
            "read seat".to_string(),
            "guard state!=reserved".to_string(),
            format!("append seat state=reserved by=r{r}"),
            "release seat".to_string(),
        ] {
            let _ = writeln!(s, "actor r{r}: {op}");
        }
    }
    s
}

/// `cursors` consumers each taking all `entries` entries.
pub fn pipeline_script(cursors: usize, entries: usize) -> String {
    let mut s = String::from("signal pipeline\nlist P\n");
    for c in 1..=cursors {
        let _ = writeln!(s, "cursor c{c} P");
    }
    for v in 1..=entries {
        let _ = writeln!(s, "entry P v={v}");
    }
    for c in 1..=cursors {
        for _ in 0..entries {
            let _ = writeln!(s, "actor p{c}: take c{c}");
        }
    }
    s
}

/// One seeded walk, returning the finished world.
pub fn representative(script: &Script, seed: u64, e: Enforcement) -> Result<World, ExploreError> {
    let mut last = None;
    explore_with(script, Mode::Sampled { n: 1, seed }, e, &mut |w| {
        if w.is_done() {
            last = Some(w.clone());
        }
    })?;
    match last {
        Some(w) => Ok(w),
        // no actor points at all
        None => World::new(script, e),
    }
}

/// Audit, order consistency, hierarchy and notation membership of `rt`.
pub fn structural_checks(rt: &Runtime, notation: Option<&Notation>) -> Vec<Check> {
    let mut out = vec![];
    out.push(match rt.audit() {
        Ok(a) => Check::new("audit_clean", a.is_clean(), format!("{} divergences", a.divergences.len())),
        Err(e) => Check::new("audit_clean", false, e.to_string()),
    });
    out.push(match rt.description().check_order_consistency() {
        OrderCheck::Ok => Check::new("order_consistent", true, "ok"),
        OrderCheck::Violation { pair, .. } => {
            Check::new("order_consistent", false, format!("{} and {} disagree", pair.0, pair.1))
        }
    });
    out.push(match rt.check_hierarchy() {
        Ok(()) => Check::new("hierarchy", true, "ok"),
        Err(e) => Check::new("hierarchy", false, e),
    });
    if let Some(n) = notation {
        let v = n.validate(rt);
        let detail = v.first().map_or("member".to_string(), |v| v.to_string());
        out.push(Check::new("notation_member", v.is_empty(), detail));
    }
    out
}

fn count(outs: &[Outcome], a: Anomaly) -> usize {
    outs.iter().filter(|o| o.anomalies.contains(&a)).count()
}

fn notation(text: &str) -> Option<(String, Notation)> {
    Some((text.to_string(), declare_notation(text).expect("bundled notation parses")))
}

pub fn run_scenario(config: &Config) -> Result<ScenarioRun, ScenarioError> {
    let e = enforcement(config);
    match &config.scenario {
        ScenarioKind::Trader => Ok(run_trader(config, e)),
        ScenarioKind::Seats => run_seats(config, e),
        ScenarioKind::Elevator => run_elevator(config, e),
        ScenarioKind::Pipeline => run_pipeline(config, e),
        ScenarioKind::Script(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
            run_script(config, &Script::parse(&text)?, e)
        }
    }
}

fn run_trader(config: &Config, e: Enforcement) -> ScenarioRun {
    let run = trader::run(config, e);
    let notation = notation(trader::NOTATION);
    let mut checks = structural_checks(&run.rt, notation.as_ref().map(|n| &n.1));
    let r = &run.report;
    let errors: Vec<String> = r.failures().map(|c| format!("{} {}", c.procedure, c.error.as_deref().unwrap_or(""))).collect();
    checks.push(Check::new(
        "scheduler_clean",
        errors.is_empty() && !r.exhausted,
        if r.exhausted { "budget exhausted".to_string() } else { errors.join("; ") },
    ));
    let want = trader::expected_invocations(config.stores, config.products, config.transactions);
    checks.push(Check::new(
        "invocation_count",
        r.completed.len() == want,
        format!("{} of {want}", r.completed.len()),
    ));
    let triggered = r
        .completed
        .iter()
        .filter(|c| matches!(c.cause, Cause::Entry(l, _) if l == run.store_list))
        .count();
    checks.push(Check::new("triggered_count", triggered == config.stores, format!("{triggered} of {}", config.stores)));
    // only the store still in the latest slot may survive its closure
    let latest = run.rt.list(run.store_list).ok().and_then(|l| l.history().last().copied());
    let leaked: Vec<String> = run
        .store_entries
        .iter()
        .filter(|f| Some(**f) != latest && !run.rt.reclaim_table().is_reclaimed(**f))
        .map(|f| f.to_string())
        .collect();
    checks.push(Check::new("closed_stores_reclaimed", leaked.is_empty(), leaked.join(" ")));
    ScenarioRun { rt: run.rt, notation, report: Some(run.report), outcomes: vec![], checks }
}

fn run_seats(config: &Config, e: Enforcement) -> Result<ScenarioRun, ScenarioError> {
    let script = Script::parse(&seats_script(config.racers))?;
    let outs = explore(&script, Mode::Exhaustive, e)?;
    let wrong = outs.iter().filter(|o| o.writes.values().sum::<u32>() != 1).count();
    let rep = representative(&script, config.seed, e)?;
    let notation = notation(SEATS_NOTATION);
    let mut checks = structural_checks(&rep.rt, notation.as_ref().map(|n| &n.1));
    checks.push(Check::new(
        "single_reservation",
        wrong == 0,
        format!("{wrong} of {} interleavings reserve other than once", outs.len()),
    ));
    checks.push(anomaly_free(&outs));
    Ok(ScenarioRun { rt: rep.rt, notation, report: None, outcomes: vec![("seats".into(), outs)], checks })
}

fn anomaly_free(outs: &[Outcome]) -> Check {
    let bad = outs.iter().filter(|o| !o.is_clean()).count();
    Check::new("no_anomalies", bad == 0, format!("{bad} of {} interleavings anomalous", outs.len()))
}

fn run_elevator(config: &Config, e: Enforcement) -> Result<ScenarioRun, ScenarioError> {
    let group = bundled("elevator_group").expect("bundled");
    let direct = bundled("elevator_direct").expect("bundled");
    let group_outs = explore(&group, Mode::Exhaustive, e)?;
    let direct_outs = explore(&direct, Mode::Exhaustive, e)?;
    let rep = representative(&group, config.seed, e)?;
    let notation = notation(ELEVATOR_NOTATION);
    let mut checks = structural_checks(&rep.rt, notation.as_ref().map(|n| &n.1));
    let bad = count(&group_outs, Anomaly::Contradiction);
    checks.push(Check::new(
        "group_reads_consistent",
        bad == 0,
        format!("{bad} of {} interleavings read a violating tuple", group_outs.len()),
    ));
    Ok(ScenarioRun {
        rt: rep.rt,
        notation,
        report: None,
        outcomes: vec![("elevator_group".into(), group_outs), ("elevator_direct".into(), direct_outs)],
        checks,
    })
}

/// History indices each cursor has handed out and whether its actor is done.
fn cursor_positions(w: &World) -> Vec<(usize, bool)> {
    w.names
        .cursors
        .iter()
        .map(|(name, c)| {
            let next = w.rt.reclaim_table().cursor(*c).map_or(0, |c| c.next);
            let actor = format!("p{}", &name[1..]);
            let done = w.actors.iter().find(|a| a.name == actor).is_none_or(|a| a.finished());
            (next, done)
        })
        .collect()
}

/// Entries a pipeline world should have reclaimed: every cursor is past the
/// entry, no consumer still pins it as its current item, and it has left the
/// latest slot.
pub fn pipeline_expected_reclaimed(w: &World) -> Vec<bool> {
    let list = w.names.lists["P"];
    let history = w.rt.list(list).map(|l| l.history().to_vec()).unwrap_or_default();
    let cursors = cursor_positions(w);
    (0..history.len())
        .map(|k| {
            k + 1 < history.len()
                && cursors.iter().all(|&(next, done)| next > k && (done || next - 1 != k))
        })
        .collect()
}

fn run_pipeline(config: &Config, e: Enforcement) -> Result<ScenarioRun, ScenarioError> {
    let script = Script::parse(&pipeline_script(config.cursors, config.entries))?;
    let mut steps = 0u64;
    let mut divergent = 0u64;
    let mut inexact: Option<String> = None;
    let outs = explore_with(&script, Mode::Exhaustive, e, &mut |w| {
        steps += 1;
        if !w.rt.audit().is_ok_and(|a| a.is_clean()) {
            divergent += 1;
        }
        if inexact.is_none() {
            let list = w.names.lists["P"];
            let history = w.rt.list(list).map(|l| l.history().to_vec()).unwrap_or_default();
            let want = pipeline_expected_reclaimed(w);
            for (k, f) in history.iter().enumerate() {
                if w.rt.reclaim_table().is_reclaimed(*f) != want[k] {
                    let sched: Vec<String> = w.schedule.iter().map(|(a, p)| format!("{}.{p}", w.actors[*a].name)).collect();
                    inexact = Some(format!("entry {k} after `{}`", sched.join(" ")));
                    break;
                }
            }
        }
    })?;
    let rep = representative(&script, config.seed, e)?;
    let notation = notation(PIPELINE_NOTATION);
    let mut checks = structural_checks(&rep.rt, notation.as_ref().map(|n| &n.1));
    checks.push(Check::new("audit_every_step", divergent == 0, format!("{divergent} of {steps} steps divergent")));
    checks.push(Check::new(
        "reclaim_exact",
        inexact.is_none(),
        inexact.unwrap_or_else(|| format!("{steps} steps")),
    ));
    checks.push(anomaly_free(&outs));
    Ok(ScenarioRun { rt: rep.rt, notation, report: None, outcomes: vec![("pipeline".into(), outs)], checks })
}

fn run_script(config: &Config, script: &Script, e: Enforcement) -> Result<ScenarioRun, ScenarioError> {
    let mode = match config.mode {
        Mode::Sampled { n, .. } => Mode::Sampled { n, seed: config.seed },
        m => m,
    };
    let outs = explore(script, mode, e)?;
    let rep = representative(script, config.seed, e)?;
    let mut checks = structural_checks(&rep.rt, None);
    checks.push(anomaly_free(&outs));
    Ok(ScenarioRun { rt: rep.rt, notation: None, report: None, outcomes: vec![("script".into(), outs)], checks })
}

/// Bundled script name or script file path.
pub fn load_script(name_or_path: &str) -> Result<Script, ScenarioError> {
    if let Some(s) = bundled(name_or_path) {
        return Ok(s);
    }
    let text = std::fs::read_to_string(name_or_path)
        .map_err(|source| ScenarioError::Io { path: name_or_path.to_string(), source })?;
    Ok(Script::parse(&text)?)
}

pub use explorer::dump_outcomes;
