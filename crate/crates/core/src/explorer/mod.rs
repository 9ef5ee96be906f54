//! Deterministic interleaving of small multi-actor scripts.
//!
//! Every actor's ops expand into schedule points (see [`script`]). The
//! explorer runs either every interleaving of those points, depth first on
//! cloned worlds, or a seeded sample of them. A point whose claim queues
//! blocks its actor until the grant arrives, so with contended claims fewer
//! schedules exist than the multinomial bound.
//!
//! Detectors flag overwritten tips (mutilation, and contradiction when the
//! payload changed), reads whose tuple violates its group predicate
//! (contradiction), derived lists out of source order, reclaimed facts still
//! reachable from a root, and averted or actual deadlocks.

pub mod script;
pub mod scripts;
pub mod world;

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};

use crate::model::Payload;
use crate::notation;
use crate::runtime::Enforcement;

pub use script::Script;
pub use world::World;

/// Exhaustive exploration refuses scripts with more interleavings than this.
pub const MAX_INTERLEAVINGS: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error("script line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("script setup failed: {0}")]
    Setup(String),
    #[error("{0} interleavings exceed the exhaustive bound")]
    StateSpaceTooLarge(u128),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Anomaly {
    Contradiction,
    Mutilation,
    OrderDestroyed,
    PrematureReclaim,
    Deadlock,
}

impl Anomaly {
    pub fn as_str(self) -> &'static str {
        match self {
            Anomaly::Contradiction => "contradiction",
            Anomaly::Mutilation => "mutilation",
            Anomaly::OrderDestroyed => "order_destroyed",
            Anomaly::PrematureReclaim => "premature_reclaim",
            Anomaly::Deadlock => "deadlock",
        }
    }
}

impl fmt::Display for Anomaly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exhaustive,
    Sampled { n: usize, seed: u64 },
}

impl core::str::FromStr for Mode {
    type Err = String;

    /// `exhaustive` or `sampled:N` (seed supplied separately, default 0).
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "exhaustive" {
            return Ok(Mode::Exhaustive);
        }
        s.strip_prefix("sampled:")
            .and_then(|n| n.parse().ok())
            .map(|n| Mode::Sampled { n, seed: 0 })
            .ok_or_else(|| format!("bad mode `{s}`"))
    }
}

/// Schedule as `actor.point` steps, e.g. `a.0 b.0 a.1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Schedule(pub Vec<(String, usize)>);

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, p)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{a}.{p}")?;
        }
        Ok(())
    }
}

impl core::str::FromStr for Schedule {
    type Err = ExploreError;

    fn from_str(s: &str) -> Result<Self, ExploreError> {
        s.split_whitespace()
            .map(|step| {
                let (a, p) = step
                    .rsplit_once('.')
                    .ok_or_else(|| ExploreError::InvalidSchedule(format!("bad step `{step}`")))?;
                let p = p
                    .parse()
                    .map_err(|_| ExploreError::InvalidSchedule(format!("bad step `{step}`")))?;
                Ok((a.to_string(), p))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Schedule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub schedule: Schedule,
    pub final_digest: String,
    pub anomalies: BTreeSet<Anomaly>,
    /// Successful appends per actor.
    pub writes: BTreeMap<String, u32>,
    /// Source indices in derived-list order, per derivation name.
    pub derived: BTreeMap<String, Vec<u64>>,
    /// Resident entry payloads per list name.
    pub lists: BTreeMap<String, Vec<Payload>>,
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn schedule_digest(&self) -> String {
        hex::encode(Sha256::digest(self.schedule.to_string().as_bytes()))
    }

    pub fn is_clean(&self) -> bool {
        self.anomalies.is_empty()
    }

    /// `schedule-digest, final-digest, anomalies`
    pub fn dump_line(&self) -> String {
        let anomalies: Vec<&str> = self.anomalies.iter().map(|a| a.as_str()).collect();
        let anomalies = if anomalies.is_empty() { "-".to_string() } else { anomalies.join("|") };
        format!("{}, {}, {}", self.schedule_digest(), self.final_digest, anomalies)
    }
}

pub fn dump_outcomes(outcomes: &[Outcome]) -> String {
    let mut out = String::new();
    for o in outcomes {
        let _ = writeln!(out, "{}", o.dump_line());
    }
    out
}

/// Product of binomials: the number of interleavings of sequences with the
/// given lengths. `None` on overflow.
pub fn multinomial(counts: &[usize]) -> Option<u128> {
    let mut total: u128 = 1;
    let mut n: u128 = 0;
    for &c in counts {
        for k in 1..=c as u128 {
            n += 1;
            // total * n / k stays integral at every step
            total = total.checked_mul(n)? / k;
        }
    }
    Some(total)
}

fn finish(mut w: World) -> Outcome {
    w.final_detectors();
    let names = &w.names;
    let schedule = Schedule(
        w.schedule
            .iter()
            .map(|(a, p)| (w.actors[*a].name.clone(), *p))
            .collect(),
    );
    let derived = names
        .derivations
        .iter()
        .map(|(n, d)| (n.clone(), w.rt.derivation(*d).unwrap().recorded.clone()))
        .collect();
    let lists = names
        .lists
        .iter()
        .map(|(n, l)| {
            let entries = w
                .rt
                .entries(*l)
                .unwrap_or_default()
                .into_iter()
                .map(|f| w.rt.description().fact_record(f).unwrap().payload.clone())
                .collect();
            (n.clone(), entries)
        })
        .collect();
    Outcome {
        schedule,
        final_digest: notation::digest(&w.rt),
        anomalies: w.anomalies.clone(),
        writes: w.writes.clone(),
        derived,
        lists,
        failures: w.failures.clone(),
    }
}

/// Runs `script` under every interleaving or a seeded sample of them.
pub fn explore(script: &Script, mode: Mode, enforcement: Enforcement) -> Result<Vec<Outcome>, ExploreError> {
    explore_with(script, mode, enforcement, &mut |_| {})
}

/// Like [`explore`], calling `observe` after every executed step.
pub fn explore_with(
    script: &Script,
    mode: Mode,
    enforcement: Enforcement,
    observe: &mut dyn FnMut(&World),
) -> Result<Vec<Outcome>, ExploreError> {
    let start = World::new(script, enforcement)?;
    let mut out = Vec::new();
    match mode {
        Mode::Exhaustive => {
            let bound = multinomial(&start.point_counts()).unwrap_or(u128::MAX);
            if bound > MAX_INTERLEAVINGS {
                return Err(ExploreError::StateSpaceTooLarge(bound));
            }
            dfs(start, observe, &mut out);
        }
        Mode::Sampled { n, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..n {
                let mut w = start.clone();
                while !w.is_done() {
                    let enabled = w.enabled();
                    let pick = enabled[(rng.next_u64() % enabled.len() as u64) as usize];
                    w.step(pick);
                    observe(&w);
                }
                out.push(finish(w));
            }
        }
    }
    Ok(out)
}

fn dfs(w: World, observe: &mut dyn FnMut(&World), out: &mut Vec<Outcome>) {
    let enabled = w.enabled();
    if w.is_done() || enabled.is_empty() {
        out.push(finish(w));
        return;
    }
    let last = enabled.len() - 1;
    let mut w = Some(w);
    for (k, i) in enabled.into_iter().enumerate() {
        let mut next = if k == last { w.take().unwrap() } else { w.as_ref().unwrap().clone() };
        next.step(i);
        observe(&next);
        dfs(next, observe, out);
    }
}

/// Re-executes one schedule. Each step must name an enabled actor at its
/// current point.
pub fn replay(script: &Script, schedule: &Schedule, enforcement: Enforcement) -> Result<Outcome, ExploreError> {
    let mut w = World::new(script, enforcement)?;
    for (n, (name, point)) in schedule.0.iter().enumerate() {
        let i = w
            .actors
            .iter()
            .position(|a| &a.name == name)
            .ok_or_else(|| ExploreError::InvalidSchedule(format!("step {n}: unknown actor {name}")))?;
        if w.actors[i].pc != *point || !w.enabled().contains(&i) {
            return Err(ExploreError::InvalidSchedule(format!(
                "step {n}: {name}.{point} is not enabled"
            )));
        }
        w.step(i);
    }
    if !w.is_done() {
        return Err(ExploreError::InvalidSchedule("schedule ends before every actor".to_string()));
    }
    Ok(finish(w))
}

/// Parsed bundled script by name.
pub fn bundled(name: &str) -> Option<Script> {
    scripts::ALL
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| Script::parse(text).expect("bundled scripts parse"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn multinomial_values() {
        assert_eq!(multinomial(&[1, 1]), Some(2));
        assert_eq!(multinomial(&[4, 4]), Some(70));
        assert_eq!(multinomial(&[4, 4, 4]), Some(34650));
        assert_eq!(multinomial(&[5, 5, 5]), Some(756756));
        assert_eq!(multinomial(&[]), Some(1));
    }

    #[test]
    fn schedule_round_trip() {
        let s: Schedule = "a.0 b.0 a.1".parse().unwrap();
        assert_eq!(s.0, vec![("a".into(), 0), ("b".into(), 0), ("a".into(), 1)]);
        assert_eq!(s.to_string(), "a.0 b.0 a.1");
        assert!("a0".parse::<Schedule>().is_err());
    }

    #[test]
    fn too_large() {
        let mut text = String::from("list L window 64\n");
        for a in ["x", "y", "z"] {
            for _ in 0..6 {
                let _ = writeln!(text, "actor {a}: append L v=1");
            }
        }
        let s = Script::parse(&text).unwrap();
        assert!(matches!(
            explore(&s, Mode::Exhaustive, Enforcement::on()),
            Err(ExploreError::StateSpaceTooLarge(17153136))
        ));
    }

    #[test]
    fn micro_script() {
        let s = bundled("micro").unwrap();
        let on = explore(&s, Mode::Exhaustive, Enforcement::on()).unwrap();
        assert!(on.iter().all(|o| o.is_clean()));
        assert!(on.iter().all(|o| o.writes.values().sum::<u32>() == 1));
        let off = explore(&s, Mode::Exhaustive, Enforcement::off()).unwrap();
        assert_eq!(off.len(), 6);
        assert!(off.iter().any(|o| o.anomalies.contains(&Anomaly::Mutilation)));
    }

    #[test]
    fn replay_matches_and_rejects() {
        let s = bundled("seats").unwrap();
        let outs = explore(&s, Mode::Exhaustive, Enforcement::on()).unwrap();
        for o in outs.iter().take(5) {
            let r = replay(&s, &o.schedule, Enforcement::on()).unwrap();
            assert_eq!(&r, o);
        }
        let bad: Schedule = "r2.1".parse().unwrap();
        assert!(matches!(replay(&s, &bad, Enforcement::on()), Err(ExploreError::InvalidSchedule(_))));
    }
}
