//! One interleaving in progress: the runtime plus every actor's position.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::claims::{ClaimRequest, ClaimToken, Transfer};
use crate::error::Error;
use crate::lists::{Consistency, Relevance, Taken};
use crate::model::{ActorId, ClassPair, FactId, GateId, ListId, Payload};
use crate::reclaim::{CursorId, PinId};
use crate::runtime::{Enforcement, Runtime};

use super::script::{Cond, Op, Script, Setup};
use super::{Anomaly, ExploreError};

/// A single schedule point.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Point {
    Claim(ListId),
    Release(ListId),
    Read(ListId),
    Guard(Cond),
    Append(ListId, Payload),
    ClaimRead(ListId),
    GuardAppendRelease(ListId, Cond, Payload),
    Commit(u32),
    ReadGroup(u32),
    ReadMember { group: u32, member: usize },
    TransferFirst(ListId),
    TransferResolve(Vec<ListId>),
    TransferSecond,
    TransferReleaseFirst,
    TransferAction(Payload),
    Take(u32),
    Put(u32),
    Advance(CursorId),
    PinLatest(ListId),
    Unpin(ListId),
}

impl Point {
    /// Whether the point needs a claim that may queue.
    fn claims(&self) -> Option<ListId> {
        match self {
            Point::Claim(l) | Point::ClaimRead(l) | Point::TransferFirst(l) => Some(*l),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ActorState {
    pub name: String,
    pub id: ActorId,
    pub points: Vec<Point>,
    pub pc: usize,
    tokens: BTreeMap<ListId, ClaimToken>,
    waiting: Option<ListId>,
    skipping: bool,
    /// Last read of each list: the entry seen and the tip gate at that time.
    observed: BTreeMap<ListId, (Option<FactId>, GateId)>,
    last_read: Option<Payload>,
    pins: BTreeMap<ListId, Vec<PinId>>,
    cursor_pins: BTreeMap<CursorId, PinId>,
    taken: BTreeMap<u32, Taken>,
    direct: Vec<(ListId, FactId)>,
    transfer: Option<Transfer>,
    pub aborted: bool,
}

impl ActorState {
    pub fn finished(&self) -> bool {
        self.pc >= self.points.len()
    }
}

/// Names resolved by setup.
#[derive(Debug, Clone, Default)]
pub struct Names {
    pub lists: BTreeMap<String, ListId>,
    pub groups: BTreeMap<String, u32>,
    pub derivations: BTreeMap<String, u32>,
    pub cursors: BTreeMap<String, CursorId>,
}

impl Names {
    pub fn list_name(&self, id: ListId) -> &str {
        self.lists.iter().find(|(_, l)| **l == id).map_or("?", |(n, _)| n.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct World {
    pub rt: Runtime,
    pub actors: Vec<ActorState>,
    pub names: Names,
    /// `(actor index, point index)` per executed step.
    pub schedule: Vec<(usize, usize)>,
    pub anomalies: BTreeSet<Anomaly>,
    /// Successful appends per actor name.
    pub writes: BTreeMap<String, u32>,
    /// Failed operations as `actor: error`.
    pub failures: Vec<String>,
    pub stuck: bool,
    check_reclaim: bool,
}

fn lookup<T: Copy>(map: &BTreeMap<String, T>, name: &str, what: &str) -> Result<T, ExploreError> {
    map.get(name)
        .copied()
        .ok_or_else(|| ExploreError::Setup(alloc::format!("unknown {what} `{name}`")))
}

impl World {
    /// Runs the setup part of `script` and expands every actor's ops.
    pub fn new(script: &Script, enforcement: Enforcement) -> Result<World, ExploreError> {
        let signal = script.setup.iter().find_map(|s| match s {
            Setup::Signal(g) => Some(ClassPair::generic_only(g.clone())),
            _ => None,
        });
        let mut rt = Runtime::with_signal(signal.unwrap_or_else(|| ClassPair::new("S", "start")), enforcement);
        let setup_actor = rt.new_actor();
        let mut names = Names::default();
        let fail = |e: Error| ExploreError::Setup(e.to_string());
        for s in &script.setup {
            match s {
                Setup::Signal(_) => {}
                Setup::List { name, window } => {
                    let l = rt
                        .create_list_windowed(ClassPair::generic_only(name.clone()), None, &[], *window)
                        .map_err(fail)?;
                    names.lists.insert(name.clone(), l);
                }
                Setup::Entry { list, payload } => {
                    let l = lookup(&names.lists, list, "list")?;
                    let t = rt.try_claim(l, setup_actor).map_err(fail)?.ok_or(ExploreError::Setup("busy".into()))?;
                    rt.append_entry(l, payload.clone(), &t).map_err(fail)?;
                    rt.release(&t, setup_actor).map_err(fail)?;
                }
                Setup::Group { name, members, field } => {
                    let gl = rt
                        .create_list(ClassPair::generic_only(name.clone()), None, &[])
                        .map_err(fail)?;
                    names.lists.insert(name.clone(), gl);
                    let ms = members
                        .iter()
                        .map(|m| lookup(&names.lists, m, "list"))
                        .collect::<Result<Vec<_>, _>>()?;
                    let g = rt.create_group(gl, &ms, Consistency::EqualField(field.clone())).map_err(fail)?;
                    names.groups.insert(name.clone(), g);
                }
                Setup::Universe { first, seconds } => {
                    let f = lookup(&names.lists, first, "list")?;
                    let ss = seconds
                        .iter()
                        .map(|m| lookup(&names.lists, m, "list"))
                        .collect::<Result<Vec<_>, _>>()?;
                    rt.register_universe(f, ss).map_err(fail)?;
                }
                Setup::Derivation { name, source, target } => {
                    let s = lookup(&names.lists, source, "list")?;
                    let t = lookup(&names.lists, target, "list")?;
                    let d = rt.register_derivation(s, t, Relevance::All, setup_actor).map_err(fail)?;
                    names.derivations.insert(name.clone(), d);
                }
                Setup::Cursor { name, list } => {
                    let l = lookup(&names.lists, list, "list")?;
                    let c = rt.register_cursor(l, setup_actor).map_err(fail)?;
                    names.cursors.insert(name.clone(), c);
                }
                Setup::Commit(group) => {
                    let g = lookup(&names.groups, group, "group")?;
                    commit(&mut rt, g, setup_actor).map_err(fail)?;
                }
            }
        }
        let mut actors = Vec::new();
        for a in &script.actors {
            let mut points = Vec::new();
            for op in &a.ops {
                expand(op, &names, &rt, &mut points)?;
            }
            actors.push(ActorState {
                name: a.name.clone(),
                id: rt.new_actor(),
                points,
                pc: 0,
                tokens: BTreeMap::new(),
                waiting: None,
                skipping: false,
                observed: BTreeMap::new(),
                last_read: None,
                pins: BTreeMap::new(),
                cursor_pins: BTreeMap::new(),
                taken: BTreeMap::new(),
                direct: Vec::new(),
                transfer: None,
                aborted: false,
            });
        }
        Ok(World {
            rt,
            actors,
            names,
            schedule: Vec::new(),
            anomalies: BTreeSet::new(),
            writes: BTreeMap::new(),
            failures: Vec::new(),
            stuck: false,
            check_reclaim: true,
        })
    }

    /// Turns the per-step premature-reclaim check off (it walks the whole
    /// description every step).
    pub fn set_reclaim_check(&mut self, on: bool) {
        self.check_reclaim = on;
    }

    pub fn point_counts(&self) -> Vec<usize> {
        self.actors.iter().map(|a| a.points.len()).collect()
    }

    pub fn is_done(&self) -> bool {
        self.stuck || self.actors.iter().all(ActorState::finished)
    }

    fn list_free(&self, list: ListId, actor: ActorId) -> bool {
        !self.rt.enforcement.mutual_exclusion
            || self.rt.claims.holders(list).iter().all(|h| *h == actor) && !self.rt.claims.is_waiting_any(list)
    }

    /// Actors that can take the next step.
    pub fn enabled(&self) -> Vec<usize> {
        (0..self.actors.len()).filter(|&i| self.is_enabled(i)).collect()
    }

    fn is_enabled(&self, i: usize) -> bool {
        let a = &self.actors[i];
        if a.finished() || self.stuck {
            return false;
        }
        if let Some(l) = a.waiting {
            return self.rt.claims.has_grant(l, a.id);
        }
        if a.skipping {
            return true;
        }
        match &a.points[a.pc] {
            Point::Append(l, _) if !a.tokens.contains_key(l) => self.list_free(*l, a.id),
            Point::Commit(g) => {
                let gl = self.rt.group(*g).map(|g| g.group_list).unwrap();
                self.list_free(gl, a.id)
            }
            Point::Put(d) => {
                let Some(t) = a.taken.get(d) else { return true };
                let der = self.rt.derivation(*d).unwrap();
                let ordered = !self.rt.enforcement.order_preservation
                    || self.rt.derivation_expected(*d).unwrap() == Some(t.index);
                ordered && self.list_free(der.target, a.id)
            }
            _ => true,
        }
    }

    /// Executes the next point of actor `i`. The caller guarantees `i` is
    /// enabled.
    pub fn step(&mut self, i: usize) {
        let pc = self.actors[i].pc;
        self.schedule.push((i, pc));
        let blocked = if self.actors[i].skipping {
            if matches!(self.actors[i].points[pc], Point::Release(_)) {
                self.actors[i].skipping = false;
                self.exec(i)
            } else {
                Ok(false)
            }
        } else {
            self.exec(i)
        };
        match blocked {
            Ok(true) => {}
            Ok(false) => self.actors[i].pc += 1,
            Err(Error::DeadlockAverted { .. }) => {
                self.anomalies.insert(Anomaly::Deadlock);
                self.abort(i);
            }
            Err(e) => {
                let name = self.actors[i].name.clone();
                self.failures.push(alloc::format!("{name}: {e}"));
                self.actors[i].pc += 1;
            }
        }
        if self.actors[i].finished() {
            self.cleanup(i);
        }
        if self.check_reclaim {
            let live = self.rt.mark_live();
            if live.iter().any(|f| self.rt.reclaim.is_reclaimed(*f)) {
                self.anomalies.insert(Anomaly::PrematureReclaim);
            }
        }
        if !self.is_done() && self.enabled().is_empty() {
            self.stuck = true;
            self.anomalies.insert(Anomaly::Deadlock);
        }
    }

    fn abort(&mut self, i: usize) {
        let a = &mut self.actors[i];
        a.aborted = true;
        a.pc = a.points.len();
        if let Some(mut t) = a.transfer.take() {
            self.rt.transfer_abort(&mut t);
        }
        if let Some(l) = a.waiting.take() {
            self.rt.cancel_claim(l, a.id);
        }
    }

    fn cleanup(&mut self, i: usize) {
        let a = &mut self.actors[i];
        for (_, t) in core::mem::take(&mut a.tokens) {
            let _ = self.rt.release(&t, a.id);
        }
        if let Some(mut t) = a.transfer.take() {
            self.rt.transfer_abort(&mut t);
        }
        a.pins.clear();
        a.cursor_pins.clear();
        a.taken.clear();
        self.rt.unpin_all(a.id);
    }

    /// Claims `list` for actor `i`, collecting a grant if one is waiting.
    /// Returns false when the claim queued.
    fn acquire(&mut self, i: usize, list: ListId) -> Result<bool, Error> {
        let a = &mut self.actors[i];
        if a.tokens.contains_key(&list) {
            return Ok(true);
        }
        if a.waiting == Some(list) {
            let t = self.rt.take_grant(list, a.id).expect("enabled only with a grant");
            a.waiting = None;
            a.tokens.insert(list, t);
            return Ok(true);
        }
        match self.rt.claim(list, a.id)? {
            ClaimRequest::Acquired(t) => {
                a.tokens.insert(list, t);
                Ok(true)
            }
            ClaimRequest::Queued => {
                a.waiting = Some(list);
                Ok(false)
            }
        }
    }

    fn release(&mut self, i: usize, list: ListId) -> Result<(), Error> {
        let a = &mut self.actors[i];
        if let Some(t) = a.tokens.remove(&list) {
            self.rt.release(&t, a.id)?;
        }
        Ok(())
    }

    fn read(&mut self, i: usize, list: ListId) -> Result<(), Error> {
        let actor = self.actors[i].id;
        let tip = self.rt.list(list)?.tip_gate();
        let seen = match self.rt.latest_entry(list, actor) {
            Ok(p) => {
                self.actors[i].pins.entry(list).or_default().push(p.pin);
                Some(p.fact)
            }
            Err(Error::EmptyList(_)) => None,
            Err(e) => return Err(e),
        };
        let payload = seen.map(|f| self.rt.graph.fact_record(f).unwrap().payload.clone());
        let a = &mut self.actors[i];
        a.observed.insert(list, (seen, tip));
        a.last_read = payload;
        Ok(())
    }

    fn append(&mut self, i: usize, list: ListId, payload: Payload) -> Result<(), Error> {
        let implicit = !self.actors[i].tokens.contains_key(&list);
        if implicit && !self.acquire(i, list)? {
            unreachable!("implicit claims only run when the list is free");
        }
        let a = &self.actors[i];
        let token = a.tokens[&list].clone();
        let r = match a.observed.get(&list) {
            Some((_, tip)) => self.rt.append_at_tip(list, *tip, payload, &token),
            None => self.rt.append_entry(list, payload, &token),
        };
        if r.is_ok() {
            *self.writes.entry(self.actors[i].name.clone()).or_default() += 1;
            self.actors[i].observed.remove(&list);
        }
        if implicit {
            self.release(i, list)?;
        }
        r.map(|_| ())
    }

    /// Returns Ok(true) when the actor blocked on a claim.
    fn exec(&mut self, i: usize) -> Result<bool, Error> {
        let point = self.actors[i].points[self.actors[i].pc].clone();
        let actor = self.actors[i].id;
        if let Some(l) = point.claims() {
            if matches!(point, Point::TransferFirst(_)) {
                let a = &mut self.actors[i];
                if a.transfer.is_none() {
                    a.transfer = Some(self.rt.transfer_begin(l, actor)?);
                }
                let mut t = a.transfer.take().unwrap();
                let r = self.rt.transfer_claim_first(&mut t);
                let a = &mut self.actors[i];
                a.transfer = Some(t);
                let held = r?;
                a.waiting = if held { None } else { Some(l) };
                return Ok(!held);
            }
            if !self.acquire(i, l)? {
                return Ok(true);
            }
        }
        match point {
            Point::Claim(_) => {}
            Point::Release(l) => self.release(i, l)?,
            Point::Read(l) | Point::ClaimRead(l) => self.read(i, l)?,
            Point::Guard(c) => {
                if !c.holds(self.actors[i].last_read.as_ref()) {
                    self.actors[i].skipping = true;
                }
            }
            Point::Append(l, p) => self.append(i, l, p)?,
            Point::GuardAppendRelease(l, c, p) => {
                let r = if c.holds(self.actors[i].last_read.as_ref()) {
                    self.append(i, l, p)
                } else {
                    Ok(())
                };
                self.release(i, l)?;
                r?;
            }
            Point::Commit(g) => {
                let gl = self.rt.group(g)?.group_list;
                self.acquire(i, gl)?;
                let r = commit_with(&mut self.rt, g, &self.actors[i].tokens[&gl].clone());
                self.release(i, gl)?;
                r?;
            }
            Point::ReadGroup(g) => {
                let read = self.rt.read_consistent(g, actor)?;
                if !self.rt.group_consistent(g, &read.entries).unwrap_or(false) {
                    self.anomalies.insert(Anomaly::Contradiction);
                }
                for p in read.pins {
                    self.rt.unpin(p)?;
                }
            }
            Point::ReadMember { group, member } => {
                let members = self.rt.group(group)?.members.clone();
                let l = members[member];
                let p = self.rt.latest_entry(l, actor)?;
                self.actors[i].pins.entry(l).or_default().push(p.pin);
                self.actors[i].direct.push((l, p.fact));
                if member + 1 == members.len() {
                    let tuple: BTreeMap<ListId, FactId> = core::mem::take(&mut self.actors[i].direct).into_iter().collect();
                    if !self.rt.group_consistent(group, &tuple).unwrap_or(false) {
                        self.anomalies.insert(Anomaly::Contradiction);
                    }
                    for l in members {
                        for p in self.actors[i].pins.remove(&l).unwrap_or_default() {
                            self.rt.unpin(p)?;
                        }
                    }
                }
            }
            Point::TransferFirst(_) => unreachable!(),
            Point::TransferResolve(targets) => {
                let mut t = self.actors[i].transfer.take().ok_or(Error::TransferPhase)?;
                let r = self.rt.transfer_resolve(&mut t, |_, _| targets);
                self.actors[i].transfer = Some(t);
                r?;
            }
            Point::TransferSecond => {
                let mut t = self.actors[i].transfer.take().ok_or(Error::TransferPhase)?;
                let before = t.seconds().len();
                let next = t.targets().map(|ts| ts[before.min(ts.len().saturating_sub(1))]);
                let r = self.rt.transfer_claim_next_second(&mut t);
                let got = t.seconds().len() > before || t.targets().is_some_and(|ts| ts.is_empty());
                self.actors[i].transfer = Some(t);
                r?;
                if !got {
                    self.actors[i].waiting = next;
                    return Ok(true);
                }
                self.actors[i].waiting = None;
            }
            Point::TransferReleaseFirst => {
                let mut t = self.actors[i].transfer.take().ok_or(Error::TransferPhase)?;
                let r = self.rt.transfer_release_first(&mut t);
                self.actors[i].transfer = Some(t);
                r?;
            }
            Point::TransferAction(payload) => {
                let mut t = self.actors[i].transfer.take().ok_or(Error::TransferPhase)?;
                let r = self.rt.transfer_complete(&mut t, |rt, _, seconds| {
                    for tok in seconds {
                        rt.append_entry(tok.list, payload.clone(), tok)?;
                    }
                    Ok(())
                });
                if r.is_ok() {
                    *self.writes.entry(self.actors[i].name.clone()).or_default() += 1;
                }
                r?;
            }
            Point::Take(d) => {
                if let Some(t) = self.rt.derivation_take(d, actor)? {
                    self.actors[i].taken.insert(d, t);
                }
            }
            Point::Put(d) => {
                let Some(t) = self.actors[i].taken.remove(&d) else {
                    return Ok(false);
                };
                let target = self.rt.derivation(d)?.target;
                self.acquire(i, target)?;
                let token = self.actors[i].tokens[&target].clone();
                let payload = self.rt.graph.fact_record(t.entry).unwrap().payload.clone();
                let r = self.rt.derivation_put(d, t.index, payload, &token);
                self.release(i, target)?;
                self.rt.unpin(t.pin)?;
                r?;
            }
            Point::Advance(c) => {
                let f = self.rt.advance(c)?;
                let pin = self.rt.pin(f, actor)?;
                if let Some(old) = self.actors[i].cursor_pins.insert(c, pin) {
                    self.rt.unpin(old)?;
                }
            }
            Point::PinLatest(l) => {
                let p = self.rt.latest_entry(l, actor)?;
                self.actors[i].pins.entry(l).or_default().push(p.pin);
            }
            Point::Unpin(l) => {
                for p in self.actors[i].pins.remove(&l).unwrap_or_default() {
                    self.rt.unpin(p)?;
                }
            }
        }
        Ok(false)
    }

    /// Whole-run anomalies that are judged on the final state.
    pub(crate) fn final_detectors(&mut self) {
        for o in self.rt.description().overwrites() {
            self.anomalies.insert(Anomaly::Mutilation);
            if o.previous != o.written {
                self.anomalies.insert(Anomaly::Contradiction);
            }
        }
        for d in self.rt.lists().derivations() {
            if d.recorded.windows(2).any(|w| w[0] > w[1]) {
                self.anomalies.insert(Anomaly::OrderDestroyed);
            }
        }
    }
}

fn commit_with(rt: &mut Runtime, g: u32, token: &ClaimToken) -> Result<FactId, Error> {
    let members = rt.group(g)?.members.clone();
    let mut tuple = BTreeMap::new();
    for m in members {
        let latest = rt.list(m)?.latest.ok_or(Error::EmptyList(m))?;
        tuple.insert(m, latest);
    }
    rt.group_commit(g, &tuple, token)
}

fn commit(rt: &mut Runtime, g: u32, actor: ActorId) -> Result<FactId, Error> {
    let gl = rt.group(g)?.group_list;
    let t = rt.try_claim(gl, actor)?.ok_or(Error::Busy(gl))?;
    let r = commit_with(rt, g, &t);
    rt.release(&t, actor)?;
    r
}

fn expand(op: &Op, names: &Names, rt: &Runtime, out: &mut Vec<Point>) -> Result<(), ExploreError> {
    let list = |n: &str| lookup(&names.lists, n, "list");
    match op {
        Op::Claim(l) => out.push(Point::Claim(list(l)?)),
        Op::Release(l) => out.push(Point::Release(list(l)?)),
        Op::Read(l) => out.push(Point::Read(list(l)?)),
        Op::Guard(c) => out.push(Point::Guard(c.clone())),
        Op::Append(l, p) => out.push(Point::Append(list(l)?, p.clone())),
        Op::CondAppend(l, c, p) => {
            let l = list(l)?;
            out.push(Point::ClaimRead(l));
            out.push(Point::GuardAppendRelease(l, c.clone(), p.clone()));
        }
        Op::Commit(g) => out.push(Point::Commit(lookup(&names.groups, g, "group")?)),
        Op::ReadGroup(g) => out.push(Point::ReadGroup(lookup(&names.groups, g, "group")?)),
        Op::ReadDirect(g) => {
            let group = lookup(&names.groups, g, "group")?;
            let n = rt.group(group).map_err(|e| ExploreError::Setup(e.to_string()))?.members.len();
            for member in 0..n {
                out.push(Point::ReadMember { group, member });
            }
        }
        Op::Transfer { first, seconds, payload } => {
            let ss = seconds.iter().map(|s| list(s)).collect::<Result<BTreeSet<_>, _>>()?;
            let ordered = seconds.iter().map(|s| list(s)).collect::<Result<Vec<_>, _>>()?;
            out.push(Point::TransferFirst(list(first)?));
            out.push(Point::TransferResolve(ordered));
            for _ in 0..ss.len() {
                out.push(Point::TransferSecond);
            }
            out.push(Point::TransferReleaseFirst);
            out.push(Point::TransferAction(payload.clone()));
        }
        Op::Derive(d) => {
            let d = lookup(&names.derivations, d, "derivation")?;
            out.push(Point::Take(d));
            out.push(Point::Put(d));
        }
        Op::Take(c) => out.push(Point::Advance(lookup(&names.cursors, c, "cursor")?)),
        Op::PinLatest(l) => out.push(Point::PinLatest(list(l)?)),
        Op::Unpin(l) => out.push(Point::Unpin(list(l)?)),
    }
    Ok(())
}
