//! Reclamation by connection and user counts.
//!
//! Each fact counts its access connections (gates owned by live facts, latest
//! slots, cursor shares, cross references) and its users (pins held by
//! readers, an in-progress signal lifecycle). A fact with both counts at zero
//! is reclaimed at once, and reclaiming it drops every connection it held, so
//! reclamation cascades down through whatever only it kept alive.
//!
//! The audit recomputes liveness by marking from the roots and compares the
//! result, fact by fact, with what the counts say.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use crate::error::{Error, Result};
use crate::model::{ActorId, FactId, ListId};
use crate::runtime::Runtime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PinId(pub u64);

impl fmt::Display for PinId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CursorId(pub u32);

/// Holder of a cross reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Source {
    Fact(FactId),
    List(ListId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Lifecycle {
    #[default]
    NotStarted,
    Started,
    Ended,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReclaimCount {
    pub connections: u32,
    pub users: u32,
    pub reclaimed: bool,
    pub lifecycle: Lifecycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RetainReason {
    Root,
    Connections(u32),
    Users(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReclaimStatus {
    Retained(RetainReason),
    Reclaimed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct CrossRef {
    from: Source,
    to: FactId,
    live: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cursor {
    pub list: ListId,
    pub actor: ActorId,
    /// History index of the next entry to hand out.
    pub next: usize,
    pub closed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ReclaimTable {
    counts: Vec<ReclaimCount>,
    pins: BTreeMap<PinId, (FactId, ActorId)>,
    next_pin: u64,
    refs: Vec<CrossRef>,
    cursors: Vec<Cursor>,
}

impl ReclaimTable {
    pub fn new() -> Self {
        ReclaimTable {
            counts: vec![ReclaimCount::default()],
            ..Default::default()
        }
    }

    pub(crate) fn on_new_fact(&mut self, fact: FactId, connections: u32) {
        let i = fact.index();
        if self.counts.len() <= i {
            self.counts.resize(i + 1, ReclaimCount::default());
        }
        self.counts[i].connections = connections;
    }

    pub fn count(&self, fact: FactId) -> Option<&ReclaimCount> {
        self.counts.get(fact.index())
    }

    pub fn is_reclaimed(&self, fact: FactId) -> bool {
        self.counts.get(fact.index()).is_some_and(|c| c.reclaimed)
    }

    pub fn reclaimed_count(&self) -> usize {
        self.counts.iter().filter(|c| c.reclaimed).count()
    }

    pub fn pin_count(&self) -> usize {
        self.pins.len()
    }

    pub fn pins(&self) -> impl Iterator<Item = (PinId, FactId, ActorId)> + '_ {
        self.pins.iter().map(|(p, (f, a))| (*p, *f, *a))
    }

    pub fn cursor(&self, id: CursorId) -> Option<&Cursor> {
        self.cursors.get(id.0 as usize)
    }

    fn cursor_mut(&mut self, id: CursorId) -> Result<&mut Cursor> {
        self.cursors.get_mut(id.0 as usize).ok_or(Error::UnknownCursor(id.0))
    }

    /// Overwrites the stored counts of `fact`. Only for exercising the audit.
    #[doc(hidden)]
    pub fn raw_set_count(&mut self, fact: FactId, connections: u32, users: u32) {
        let c = &mut self.counts[fact.index()];
        c.connections = connections;
        c.users = users;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    /// Reclaimed although still reachable from a root.
    Premature,
    /// Resident although nothing reaches it.
    Leaked,
    /// Resident and reachable, but the stored counts are wrong.
    Miscounted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub fact: FactId,
    pub kind: DivergenceKind,
    pub counted: (u32, u32),
    pub expected: (u32, u32),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditReport {
    pub facts_total: usize,
    pub facts_live: usize,
    pub facts_reclaimed: usize,
    pub divergences: Vec<Divergence>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.divergences.is_empty()
    }
}

impl fmt::Display for AuditReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "facts_total {}", self.facts_total)?;
        writeln!(f, "facts_live {}", self.facts_live)?;
        writeln!(f, "facts_reclaimed {}", self.facts_reclaimed)?;
        writeln!(f, "divergences {}", self.divergences.len())?;
        for d in &self.divergences {
            let kind = match d.kind {
                DivergenceKind::Premature => "premature",
                DivergenceKind::Leaked => "leaked",
                DivergenceKind::Miscounted => "miscounted",
            };
            writeln!(
                f,
                "{} {} counted {}/{} expected {}/{}",
                d.fact, kind, d.counted.0, d.counted.1, d.expected.0, d.expected.1
            )?;
        }
        Ok(())
    }
}

impl Runtime {
    /// Overwrites the stored counts of `fact`. Only for exercising the audit.
    #[doc(hidden)]
    pub fn raw_set_count(&mut self, fact: FactId, connections: u32, users: u32) {
        self.reclaim.raw_set_count(fact, connections, users);
    }

    /// Pins `fact` for `actor`, keeping it resident until unpinned.
    pub fn pin(&mut self, fact: FactId, actor: ActorId) -> Result<PinId> {
        self.graph.fact_record(fact).ok_or(Error::UnknownFact(fact))?;
        let c = &mut self.reclaim.counts[fact.index()];
        if c.reclaimed {
            return Err(Error::AlreadyReclaimed(fact));
        }
        c.users += 1;
        let id = PinId(self.reclaim.next_pin);
        self.reclaim.next_pin += 1;
        self.reclaim.pins.insert(id, (fact, actor));
        Ok(id)
    }

    pub fn unpin(&mut self, pin: PinId) -> Result<()> {
        let (fact, _) = self.reclaim.pins.remove(&pin).ok_or(Error::UnknownPin(pin.0))?;
        self.reclaim.counts[fact.index()].users -= 1;
        self.collect(fact);
        Ok(())
    }

    /// Releases every pin `actor` holds.
    pub fn unpin_all(&mut self, actor: ActorId) {
        let mine: Vec<PinId> = self
            .reclaim
            .pins
            .iter()
            .filter(|(_, (_, a))| *a == actor)
            .map(|(p, _)| *p)
            .collect();
        for p in mine {
            let _ = self.unpin(p);
        }
    }

    /// Records a cross reference from `from` to `to`; it counts as one
    /// connection until its holder is reclaimed.
    pub fn add_connection(&mut self, from: Source, to: FactId) -> Result<()> {
        if self.reclaim.is_reclaimed(to) {
            return Err(Error::AlreadyReclaimed(to));
        }
        self.graph.fact_record(to).ok_or(Error::UnknownFact(to))?;
        match from {
            Source::Fact(f) => {
                self.graph.fact(f)?;
            }
            Source::List(l) => {
                self.lists.get(l)?;
            }
        }
        self.reclaim.refs.push(CrossRef { from, to, live: true });
        self.reclaim.counts[to.index()].connections += 1;
        Ok(())
    }

    /// Drops one cross reference from `from` to `to`.
    pub fn drop_connection(&mut self, from: Source, to: FactId) -> Result<()> {
        let r = self
            .reclaim
            .refs
            .iter_mut()
            .find(|r| r.live && r.from == from && r.to == to)
            .ok_or(Error::UnknownFact(to))?;
        r.live = false;
        self.drop_count(to);
        Ok(())
    }

    pub(crate) fn drop_count(&mut self, fact: FactId) {
        let c = &mut self.reclaim.counts[fact.index()];
        c.connections = c.connections.saturating_sub(1);
        self.collect(fact);
    }

    /// Moves `fact` through its signal lifecycle. A started signal counts as
    /// a user; ending it closes the lists under it to new readers.
    pub fn signal_lifecycle(&mut self, fact: FactId, to: Lifecycle) -> Result<()> {
        self.graph.fact(fact)?;
        let c = &mut self.reclaim.counts[fact.index()];
        match (c.lifecycle, to) {
            (Lifecycle::NotStarted, Lifecycle::Started) => {
                c.lifecycle = Lifecycle::Started;
                c.users += 1;
            }
            (Lifecycle::Started, Lifecycle::Ended) => {
                c.lifecycle = Lifecycle::Ended;
                c.users -= 1;
                let children: Vec<ListId> = self.lists.lists_under(fact).to_vec();
                for l in children {
                    self.lists.get_mut(l)?.closed_to_readers = true;
                }
                self.collect(fact);
            }
            _ => return Err(Error::LifecycleOrder(fact)),
        }
        Ok(())
    }

    /// Registers a cursor on `list`. Each cursor holds a share of every entry
    /// it has not yet passed, so cursors must exist before the first append.
    pub fn register_cursor(&mut self, list: ListId, actor: ActorId) -> Result<CursorId> {
        let l = self.lists.get(list)?;
        if l.entry_count > 0 {
            return Err(Error::LateCursor(list));
        }
        let id = CursorId(self.reclaim.cursors.len() as u32);
        self.reclaim.cursors.push(Cursor { list, actor, next: 0, closed: false });
        self.lists.get_mut(list)?.cursors.push(id);
        Ok(id)
    }

    /// Moves the cursor to the next entry, following the tip gate of the
    /// entry it stands on, and drops its share of the entry it leaves.
    pub fn advance(&mut self, cursor: CursorId) -> Result<FactId> {
        let c = self.reclaim.cursor_mut(cursor)?.clone();
        if c.closed {
            return Err(Error::NoNextEntry);
        }
        let l = self.lists.get(c.list)?;
        if l.orphaned {
            return Err(Error::SignalEnded(c.list));
        }
        let next = *l.history().get(c.next).ok_or(Error::NoNextEntry)?;
        if c.next > 0 {
            let prev = l.history()[c.next - 1];
            self.reclaim.cursor_mut(cursor)?.next += 1;
            self.drop_count(prev);
        } else {
            self.reclaim.cursor_mut(cursor)?.next += 1;
        }
        Ok(next)
    }

    /// Retires a cursor, dropping its shares of every entry it still holds.
    pub fn close_cursor(&mut self, cursor: CursorId) -> Result<()> {
        let c = self.reclaim.cursor_mut(cursor)?;
        if c.closed {
            return Ok(());
        }
        c.closed = true;
        let (list, from) = (c.list, c.next.saturating_sub(1));
        let held: Vec<FactId> = self.lists.get(list)?.history()[from..].to_vec();
        for f in held {
            self.drop_count(f);
        }
        Ok(())
    }

    pub fn reclaim_check(&self, fact: FactId) -> Result<ReclaimStatus> {
        self.graph.fact_record(fact).ok_or(Error::UnknownFact(fact))?;
        let c = &self.reclaim.counts[fact.index()];
        Ok(if c.reclaimed {
            ReclaimStatus::Reclaimed
        } else if fact == FactId::ROOT {
            ReclaimStatus::Retained(RetainReason::Root)
        } else if c.connections > 0 {
            ReclaimStatus::Retained(RetainReason::Connections(c.connections))
        } else {
            ReclaimStatus::Retained(RetainReason::Users(c.users))
        })
    }

    /// Reclaims `fact` if nothing holds it, then cascades.
    fn collect(&mut self, fact: FactId) {
        let mut work = vec![fact];
        while let Some(f) = work.pop() {
            let c = self.reclaim.counts[f.index()];
            if f == FactId::ROOT || c.reclaimed || c.connections > 0 || c.users > 0 {
                continue;
            }
            self.reclaim.counts[f.index()].reclaimed = true;
            self.graph.set_reclaimed(f);
            let record = self.graph.fact_record(f).unwrap();
            for &g in &record.child_gates {
                let gate = &self.graph.gates()[g.index()];
                if let (false, Some(to)) = (gate.chain, gate.gated) {
                    let cc = &mut self.reclaim.counts[to.index()];
                    cc.connections = cc.connections.saturating_sub(1);
                    work.push(to);
                }
            }
            for r in self.reclaim.refs.iter_mut() {
                if r.live && r.from == Source::Fact(f) {
                    r.live = false;
                    let cc = &mut self.reclaim.counts[r.to.index()];
                    cc.connections = cc.connections.saturating_sub(1);
                    work.push(r.to);
                }
            }
            let children: Vec<ListId> = self.lists.lists_under(f).to_vec();
            for l in children {
                work.extend(self.orphan_list(l));
            }
        }
    }

    /// Detaches a list whose parent is gone: its latest slot, cursors and
    /// references stop holding anything. Returns the facts whose counts
    /// dropped.
    fn orphan_list(&mut self, list: ListId) -> Vec<FactId> {
        let mut dropped = Vec::new();
        let l = self.lists.get_mut(list).unwrap();
        if l.orphaned {
            return dropped;
        }
        l.orphaned = true;
        l.closed_to_readers = true;
        dropped.extend(l.window_entries.drain(..));
        let cursors = l.cursors.clone();
        let history = l.history().to_vec();
        for c in cursors {
            let cur = &mut self.reclaim.cursors[c.0 as usize];
            if cur.closed {
                continue;
            }
            cur.closed = true;
            let from = cur.next.saturating_sub(1);
            dropped.extend(history[from..].iter().copied());
        }
        for r in self.reclaim.refs.iter_mut() {
            if r.live && r.from == Source::List(list) {
                r.live = false;
                dropped.push(r.to);
            }
        }
        for f in &dropped {
            let cc = &mut self.reclaim.counts[f.index()];
            cc.connections = cc.connections.saturating_sub(1);
        }
        dropped
    }

    /// Facts reachable from the roots: the root fact, pinned facts, started
    /// signals, latest-slot windows and unpassed cursor entries of attached
    /// lists, and whatever live facts reach through gates and references.
    pub fn mark_live(&self) -> BTreeSet<FactId> {
        self.expected_counts().0
    }

    fn expected_counts(&self) -> (BTreeSet<FactId>, BTreeMap<FactId, (u32, u32)>) {
        let mut expected: BTreeMap<FactId, (u32, u32)> = BTreeMap::new();
        let mut marked = BTreeSet::new();
        let mut work = vec![FactId::ROOT];
        for (f, _) in self.reclaim.pins.values() {
            expected.entry(*f).or_default().1 += 1;
            work.push(*f);
        }
        for (i, c) in self.reclaim.counts.iter().enumerate() {
            if c.lifecycle == Lifecycle::Started {
                expected.entry(FactId(i as u32)).or_default().1 += 1;
                work.push(FactId(i as u32));
            }
        }
        while let Some(f) = work.pop() {
            if !marked.insert(f) {
                continue;
            }
            let Some(record) = self.graph.fact_record(f) else {
                continue;
            };
            let mut held: Vec<FactId> = Vec::new();
            for &g in &record.child_gates {
                let gate = &self.graph.gates()[g.index()];
                if let (false, Some(to)) = (gate.chain, gate.gated) {
                    held.push(to);
                }
            }
            for r in &self.reclaim.refs {
                if r.from == Source::Fact(f) {
                    held.push(r.to);
                }
            }
            for &l in self.lists.lists_under(f) {
                held.extend(self.list_holds(l));
            }
            for to in held {
                expected.entry(to).or_default().0 += 1;
                work.push(to);
            }
        }
        (marked, expected)
    }

    fn list_holds(&self, list: ListId) -> Vec<FactId> {
        let l = self.lists.get(list).unwrap();
        let mut held: Vec<FactId> = l.window_entries.iter().copied().collect();
        for c in &l.cursors {
            let cur = &self.reclaim.cursors[c.0 as usize];
            if !cur.closed {
                held.extend(l.history()[cur.next.saturating_sub(1)..].iter().copied());
            }
        }
        for r in &self.reclaim.refs {
            if r.from == Source::List(list) {
                held.push(r.to);
            }
        }
        held
    }

    /// Compares the counts against a mark from the roots. Needs quiescence:
    /// no live claims.
    pub fn audit(&self) -> Result<AuditReport> {
        let live_claims = self.claims.live_count();
        if live_claims > 0 {
            return Err(Error::NotQuiescent(live_claims));
        }
        let (marked, expected) = self.expected_counts();
        let mut report = AuditReport {
            facts_total: self.graph.fact_count(),
            facts_live: 0,
            facts_reclaimed: 0,
            divergences: Vec::new(),
        };
        for (i, c) in self.reclaim.counts.iter().enumerate() {
            let f = FactId(i as u32);
            if c.reclaimed {
                report.facts_reclaimed += 1;
            } else {
                report.facts_live += 1;
            }
            let exp = if marked.contains(&f) {
                expected.get(&f).copied().unwrap_or_default()
            } else {
                (0, 0)
            };
            let counted = (c.connections, c.users);
            let kind = match (c.reclaimed, marked.contains(&f)) {
                (true, true) => Some(DivergenceKind::Premature),
                (false, false) => Some(DivergenceKind::Leaked),
                (false, true) if counted != exp => Some(DivergenceKind::Miscounted),
                _ => None,
            };
            if let Some(kind) = kind {
                report.divergences.push(Divergence { fact: f, kind, counted, expected: exp });
            }
        }
        Ok(report)
    }

    /// Per-fact `fact connections users state` lines for resident facts.
    pub fn counts_text(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.reclaim.counts.iter().enumerate() {
            let state = if c.reclaimed { "reclaimed" } else { "live" };
            let _ = writeln!(out, "f{}\t{}\t{}\t{}", i, c.connections, c.users, state);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::claims::{ClaimRequest, ClaimToken};
    use crate::model::{ClassPair, Payload};

    fn cls(g: &str) -> ClassPair {
        ClassPair::generic_only(g)
    }

    fn claim(rt: &mut Runtime, l: ListId, a: ActorId) -> ClaimToken {
        match rt.claim(l, a).unwrap() {
            ClaimRequest::Acquired(t) => t,
            ClaimRequest::Queued => panic!(),
        }
    }

    #[test]
    fn superseded_entry_reclaimed_after_unpin() {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let l = rt.create_list(cls("x"), None, &[]).unwrap();
        let t = claim(&mut rt, l, a);
        let e1 = rt.append_entry(l, Payload::new(), &t).unwrap();
        let p = rt.pin(e1, a).unwrap();
        let e2 = rt.append_entry(l, Payload::new(), &t).unwrap();
        assert_eq!(rt.reclaim_check(e1), Ok(ReclaimStatus::Retained(RetainReason::Users(1))));
        rt.unpin(p).unwrap();
        assert_eq!(rt.reclaim_check(e1), Ok(ReclaimStatus::Reclaimed));
        assert_eq!(rt.pin(e1, a), Err(Error::AlreadyReclaimed(e1)));
        assert_eq!(
            rt.reclaim_check(e2),
            Ok(ReclaimStatus::Retained(RetainReason::Connections(1)))
        );
        assert_eq!(rt.unpin(p), Err(Error::UnknownPin(p.0)));
        assert_eq!(rt.reclaim_check(FactId::ROOT), Ok(ReclaimStatus::Retained(RetainReason::Root)));
        rt.release(&t, a).unwrap();
        assert!(rt.audit().unwrap().is_clean());
    }

    #[test]
    fn cascade_through_child_lists() {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let stores = rt.create_list(cls("store"), None, &[]).unwrap();
        let t = claim(&mut rt, stores, a);
        let s1 = rt.append_entry(stores, Payload::new(), &t).unwrap();
        let products = rt.create_list(cls("product"), Some(s1), core::slice::from_ref(&t)).unwrap();
        let tp = claim(&mut rt, products, a);
        let p1 = rt.append_entry(products, Payload::new(), &tp).unwrap();
        let detail = rt.add_gate(p1, cls("detail"), core::slice::from_ref(&tp)).unwrap();
        let d = rt.extend(&[detail], cls("detail"), Payload::new(), core::slice::from_ref(&tp)).unwrap();
        rt.append_entry(stores, Payload::new(), &t).unwrap();
        for f in [s1, p1, d] {
            assert!(rt.reclaim_table().is_reclaimed(f), "{f}");
        }
        assert!(rt.list(products).unwrap().is_orphaned());
        rt.release(&t, a).unwrap();
        rt.release(&tp, a).unwrap();
        assert!(rt.audit().unwrap().is_clean());
    }

    #[test]
    fn lifecycle_order_and_closing() {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let l = rt.create_list(cls("x"), None, &[]).unwrap();
        let t = claim(&mut rt, l, a);
        let e = rt.append_entry(l, Payload::new(), &t).unwrap();
        let child = rt.create_list(cls("y"), Some(e), core::slice::from_ref(&t)).unwrap();
        assert_eq!(rt.signal_lifecycle(e, Lifecycle::Ended), Err(Error::LifecycleOrder(e)));
        rt.signal_lifecycle(e, Lifecycle::Started).unwrap();
        rt.append_entry(l, Payload::new(), &t).unwrap();
        assert!(!rt.reclaim_table().is_reclaimed(e));
        let tc = claim(&mut rt, child, a);
        rt.append_entry(child, Payload::new(), &tc).unwrap();
        rt.latest_entry(child, a).map(|p| rt.unpin(p.pin)).unwrap().unwrap();
        rt.signal_lifecycle(e, Lifecycle::Ended).unwrap();
        assert!(rt.reclaim_table().is_reclaimed(e));
        assert_eq!(rt.latest_entry(child, a), Err(Error::SignalEnded(child)));
        assert_eq!(rt.signal_lifecycle(e, Lifecycle::Started), Err(Error::UnknownFact(e)));
    }

    #[test]
    fn cursors_hold_until_passed() {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let l = rt.create_list(cls("x"), None, &[]).unwrap();
        let c1 = rt.register_cursor(l, a).unwrap();
        let c2 = rt.register_cursor(l, a).unwrap();
        let t = claim(&mut rt, l, a);
        let e: Vec<FactId> = (0..3).map(|_| rt.append_entry(l, Payload::new(), &t).unwrap()).collect();
        assert_eq!(rt.register_cursor(l, a), Err(Error::LateCursor(l)));
        assert_eq!(rt.advance(c1), Ok(e[0]));
        assert_eq!(rt.advance(c1), Ok(e[1]));
        assert!(!rt.reclaim_table().is_reclaimed(e[0]));
        assert_eq!(rt.advance(c2), Ok(e[0]));
        assert_eq!(rt.advance(c2), Ok(e[1]));
        assert!(rt.reclaim_table().is_reclaimed(e[0]));
        assert!(!rt.reclaim_table().is_reclaimed(e[1]));
        rt.advance(c1).unwrap();
        rt.advance(c2).unwrap();
        assert!(rt.reclaim_table().is_reclaimed(e[1]));
        assert_eq!(rt.advance(c1), Err(Error::NoNextEntry));
        assert_eq!(rt.advance(CursorId(9)), Err(Error::UnknownCursor(9)));
        rt.release(&t, a).unwrap();
        assert!(rt.audit().unwrap().is_clean());
    }

    #[test]
    fn close_cursor_drops_shares() {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let l = rt.create_list(cls("x"), None, &[]).unwrap();
        let c = rt.register_cursor(l, a).unwrap();
        let t = claim(&mut rt, l, a);
        let e: Vec<FactId> = (0..3).map(|_| rt.append_entry(l, Payload::new(), &t).unwrap()).collect();
        rt.advance(c).unwrap();
        rt.close_cursor(c).unwrap();
        assert!(rt.reclaim_table().is_reclaimed(e[0]));
        assert!(rt.reclaim_table().is_reclaimed(e[1]));
        assert!(!rt.reclaim_table().is_reclaimed(e[2]));
        rt.release(&t, a).unwrap();
        assert!(rt.audit().unwrap().is_clean());
    }

    #[test]
    fn audit_needs_quiescence_and_flags_corruption() {
        let mut rt = Runtime::new();
        let a = rt.new_actor();
        let l = rt.create_list(cls("x"), None, &[]).unwrap();
        let t = claim(&mut rt, l, a);
        let e = rt.append_entry(l, Payload::new(), &t).unwrap();
        assert_eq!(rt.audit(), Err(Error::NotQuiescent(1)));
        rt.release(&t, a).unwrap();
        rt.reclaim.raw_set_count(e, 3, 0);
        let report = rt.audit().unwrap();
        assert_eq!(report.divergences.len(), 1);
        assert_eq!(report.divergences[0].kind, DivergenceKind::Miscounted);
        let text = alloc::format!("{report}");
        assert!(text.starts_with("facts_total 2\nfacts_live 2\nfacts_reclaimed 0\ndivergences 1\n"));
    }
}
