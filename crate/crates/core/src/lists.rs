//! Signal lists: time-ordered entries reached through a fixed latest slot.
//!
//! Each list is a chain in the description. Its head gate lives in the parent
//! fact (the root fact for top-level lists); every entry carries a tip gate
//! that will gate the next entry. Readers never walk the chain: the latest
//! slot names the newest entry directly and predecessor links lead back.
//!
//! The slot is an access connection for the newest `window` entries (one by
//! default). Entries pushed out of the window lose that connection and are
//! reclaimed once nothing else holds them.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::claims::ClaimToken;
use crate::error::{Error, Result};
use crate::fact_graph::{Fact, TipAuthority};
use crate::model::{ActorId, ClassPair, FactId, GateId, ListId, Payload, Scalar};
use crate::reclaim::{CursorId, PinId, Source};
use crate::runtime::Runtime;

#[derive(Debug, Clone)]
pub struct SignalList {
    pub id: ListId,
    pub entry_class: ClassPair,
    /// Parent fact and the head gate inside it.
    pub parent: Option<(FactId, GateId)>,
    pub latest: Option<FactId>,
    pub entry_count: u64,
    pub window: usize,
    tip: GateId,
    history: Vec<FactId>,
    pub(crate) window_entries: VecDeque<FactId>,
    pub(crate) closed_to_readers: bool,
    pub(crate) orphaned: bool,
    pub(crate) scheduling: bool,
    pub(crate) cursors: Vec<CursorId>,
}

impl SignalList {
    /// Every entry ever appended, oldest first, including reclaimed ones.
    pub fn history(&self) -> &[FactId] {
        &self.history
    }

    pub fn tip_gate(&self) -> GateId {
        self.tip
    }

    pub fn is_orphaned(&self) -> bool {
        self.orphaned
    }

    /// Owner of the latest-slot connections.
    pub fn owner(&self) -> FactId {
        self.parent.map_or(FactId::ROOT, |(f, _)| f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntryMeta {
    pub list: ListId,
    pub index: u64,
    pub predecessor: Option<FactId>,
    pub tip: GateId,
    pub annotations: BTreeSet<ClassPair>,
    pub bypassed: bool,
    pub child_lists: Vec<ListId>,
    /// Index of the source entry this one was derived from.
    pub source_index: Option<u64>,
}

pub type TuplePredicate = Arc<dyn Fn(&[(ListId, &Fact)]) -> bool + Send + Sync>;

/// Predicate over the tuple named by a group entry.
#[derive(Clone)]
pub enum Consistency {
    /// All member entries carry equal values of this field.
    EqualField(String),
    Custom(TuplePredicate),
}

impl Consistency {
    pub fn holds(&self, tuple: &[(ListId, &Fact)]) -> bool {
        match self {
            Consistency::EqualField(name) => {
                let mut values = tuple.iter().map(|(_, f)| f.payload.get(name));
                match values.next() {
                    None => true,
                    Some(first) => first.is_some() && values.all(|v| v == first),
                }
            }
            Consistency::Custom(f) => f(tuple),
        }
    }
}

impl core::fmt::Debug for Consistency {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Consistency::EqualField(n) => write!(f, "EqualField({n})"),
            Consistency::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ConsistencyGroup {
    pub id: u32,
    pub group_list: ListId,
    pub members: Vec<ListId>,
    pub predicate: Consistency,
    field_names: Vec<String>,
}

/// Which source entries a derivation must use.
#[derive(Clone)]
pub enum Relevance {
    All,
    FieldEquals(String, Scalar),
    Custom(Arc<dyn Fn(&Fact) -> bool + Send + Sync>),
}

impl Relevance {
    pub fn admits(&self, fact: &Fact) -> bool {
        match self {
            Relevance::All => true,
            Relevance::FieldEquals(n, v) => fact.payload.get(n) == Some(v),
            Relevance::Custom(f) => f(fact),
        }
    }
}

impl core::fmt::Debug for Relevance {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Relevance::All => f.write_str("All"),
            Relevance::FieldEquals(n, v) => write!(f, "FieldEquals({n}, {v})"),
            Relevance::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Derivation {
    pub id: u32,
    pub source: ListId,
    pub target: ListId,
    pub relevance: Relevance,
    pub cursor: CursorId,
    /// Taken but not yet appended source indices, in take order.
    outstanding: VecDeque<u64>,
    /// Source indices in the order they were appended to the target.
    pub recorded: Vec<u64>,
    /// Every relevant source index taken so far.
    pub taken: Vec<u64>,
}

/// A source entry handed to a derivation worker, pinned until put.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Taken {
    pub index: u64,
    pub entry: FactId,
    pub pin: PinId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pinned {
    pub fact: FactId,
    pub pin: PinId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondOutcome {
    Appended(FactId),
    Refused(Option<FactId>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistentRead {
    pub group_entry: FactId,
    pub entries: BTreeMap<ListId, FactId>,
    pub pins: Vec<PinId>,
}

#[derive(Debug, Clone, Default)]
pub struct ListRegistry {
    lists: Vec<SignalList>,
    entries: BTreeMap<FactId, EntryMeta>,
    pub(crate) child_lists: BTreeMap<FactId, Vec<ListId>>,
    groups: Vec<ConsistencyGroup>,
    derivations: Vec<Derivation>,
    pub(crate) universes: BTreeMap<ListId, BTreeSet<ListId>>,
}

impl ListRegistry {
    pub fn len(&self) -> usize {
        self.lists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lists.is_empty()
    }

    pub fn get(&self, id: ListId) -> Result<&SignalList> {
        self.lists.get(id.index()).ok_or(Error::UnknownList(id))
    }

    pub(crate) fn get_mut(&mut self, id: ListId) -> Result<&mut SignalList> {
        self.lists.get_mut(id.index()).ok_or(Error::UnknownList(id))
    }

    pub fn all(&self) -> &[SignalList] {
        &self.lists
    }

    pub fn entry(&self, fact: FactId) -> Option<&EntryMeta> {
        self.entries.get(&fact)
    }

    pub fn lists_under(&self, fact: FactId) -> &[ListId] {
        self.child_lists.get(&fact).map_or(&[], Vec::as_slice)
    }

    pub fn groups(&self) -> &[ConsistencyGroup] {
        &self.groups
    }

    pub fn derivations(&self) -> &[Derivation] {
        &self.derivations
    }
}

impl Runtime {
    pub fn lists(&self) -> &ListRegistry {
        &self.lists
    }

    pub fn list(&self, id: ListId) -> Result<&SignalList> {
        self.lists.get(id)
    }

    pub fn create_list(
        &mut self,
        entry_class: ClassPair,
        parent: Option<FactId>,
        tokens: &[ClaimToken],
    ) -> Result<ListId> {
        self.create_list_windowed(entry_class, parent, tokens, 1)
    }

    /// Like [`Runtime::create_list`], with the latest slot holding the newest
    /// `window` entries.
    pub fn create_list_windowed(
        &mut self,
        entry_class: ClassPair,
        parent: Option<FactId>,
        tokens: &[ClaimToken],
        window: usize,
    ) -> Result<ListId> {
        let owner = parent.unwrap_or(FactId::ROOT);
        let domain = self.graph.fact(owner)?.domain;
        self.authority(tokens).permits(domain)?;
        let id = ListId(self.lists.lists.len() as u32);
        let head = self.graph.add_gate_raw(owner, entry_class.clone(), true);
        self.lists.lists.push(SignalList {
            id,
            entry_class,
            parent: parent.map(|f| (f, head)),
            latest: None,
            entry_count: 0,
            window: window.max(1),
            tip: head,
            history: Vec::new(),
            window_entries: VecDeque::new(),
            closed_to_readers: false,
            orphaned: false,
            scheduling: false,
            cursors: Vec::new(),
        });
        self.lists.child_lists.entry(owner).or_default().push(id);
        if let Some(meta) = self.lists.entries.get_mut(&owner) {
            meta.child_lists.push(id);
        }
        self.claims.register_list(id);
        Ok(id)
    }

    pub(crate) fn set_scheduling(&mut self, list: ListId) -> Result<()> {
        self.lists.get_mut(list)?.scheduling = true;
        Ok(())
    }

    fn check_append(&self, list: ListId, token: &ClaimToken) -> Result<()> {
        let l = self.lists.get(list)?;
        self.claims.check(token, list)?;
        if l.orphaned {
            return Err(Error::UnknownFact(l.owner()));
        }
        Ok(())
    }

    pub fn append_entry(
        &mut self,
        list: ListId,
        payload: Payload,
        token: &ClaimToken,
    ) -> Result<FactId> {
        self.check_append(list, token)?;
        let tip = self.lists.get(list)?.tip;
        self.append_at(list, tip, payload, None)
    }

    /// Appends through `tip`, which may be a tip observed by an earlier read.
    /// With guarded writes a stale tip fails; unguarded, it overwrites the
    /// entry already gated there.
    pub fn append_at_tip(
        &mut self,
        list: ListId,
        tip: GateId,
        payload: Payload,
        token: &ClaimToken,
    ) -> Result<FactId> {
        self.check_append(list, token)?;
        self.append_at(list, tip, payload, None)
    }

    fn append_at(
        &mut self,
        list: ListId,
        tip: GateId,
        payload: Payload,
        source_index: Option<u64>,
    ) -> Result<FactId> {
        let class = self.lists.get(list)?.entry_class.clone();
        let before = self.graph.fact_count();
        let fact = self.graph.extend_raw(&[tip], class.clone(), payload, Some(list))?;
        if self.graph.fact_count() == before {
            // overwrite of an existing entry
            return Ok(fact);
        }
        let new_tip = self.graph.add_gate_raw(fact, class, true);
        let l = self.lists.get_mut(list)?;
        let predecessor = l.latest;
        let index = l.history.len() as u64;
        l.history.push(fact);
        l.latest = Some(fact);
        l.tip = new_tip;
        l.entry_count += 1;
        l.window_entries.push_back(fact);
        let evicted = if l.window_entries.len() > l.window {
            l.window_entries.pop_front()
        } else {
            None
        };
        let shares = l.cursors.len() as u32;
        let scheduling = l.scheduling;
        self.lists.entries.insert(
            fact,
            EntryMeta {
                list,
                index,
                predecessor,
                tip: new_tip,
                annotations: BTreeSet::new(),
                bypassed: false,
                child_lists: Vec::new(),
                source_index,
            },
        );
        self.reclaim.on_new_fact(fact, 1 + shares);
        if let Some(old) = evicted {
            self.drop_count(old);
        }
        if scheduling {
            self.triggers.push((list, fact));
        }
        Ok(fact)
    }

    /// Latest entry in constant time, pinned for `actor`.
    pub fn latest_entry(&mut self, list: ListId, actor: ActorId) -> Result<Pinned> {
        self.graph.touch();
        let l = self.lists.get(list)?;
        if l.closed_to_readers || l.orphaned {
            return Err(Error::SignalEnded(list));
        }
        self.graph.touch();
        let fact = l.latest.ok_or(Error::EmptyList(list))?;
        let pin = self.pin(fact, actor)?;
        Ok(Pinned { fact, pin })
    }

    /// Up to `k` newest non-bypassed entries, newest first, each pinned.
    /// The walk stops at the first reclaimed predecessor.
    pub fn latest_k(&mut self, list: ListId, k: usize, actor: ActorId) -> Result<Vec<Pinned>> {
        let l = self.lists.get(list)?;
        if l.closed_to_readers || l.orphaned {
            return Err(Error::SignalEnded(list));
        }
        let mut cur = Some(l.latest.ok_or(Error::EmptyList(list))?);
        let mut picked = Vec::new();
        while let Some(f) = cur {
            if picked.len() >= k || self.reclaim.is_reclaimed(f) {
                break;
            }
            let meta = &self.lists.entries[&f];
            if !meta.bypassed {
                picked.push(f);
            }
            cur = meta.predecessor;
        }
        let mut out = Vec::with_capacity(picked.len());
        for f in picked {
            out.push(Pinned { fact: f, pin: self.pin(f, actor)? });
        }
        Ok(out)
    }

    fn entry_of(&self, list: ListId, entry: FactId) -> Result<()> {
        self.lists.get(list)?;
        match self.lists.entries.get(&entry) {
            Some(m) if m.list == list && !self.reclaim.is_reclaimed(entry) => Ok(()),
            _ => Err(Error::UnknownEntry(list, entry)),
        }
    }

    pub fn annotate(
        &mut self,
        list: ListId,
        entry: FactId,
        marker: ClassPair,
        token: &ClaimToken,
    ) -> Result<()> {
        self.claims.check(token, list)?;
        self.entry_of(list, entry)?;
        self.lists.entries.get_mut(&entry).unwrap().annotations.insert(marker);
        Ok(())
    }

    pub fn bypass(&mut self, list: ListId, entry: FactId, token: &ClaimToken) -> Result<()> {
        self.claims.check(token, list)?;
        self.entry_of(list, entry)?;
        self.lists.entries.get_mut(&entry).unwrap().bypassed = true;
        Ok(())
    }

    /// Resident, non-bypassed entries in append order.
    pub fn entries(&self, list: ListId) -> Result<Vec<FactId>> {
        let l = self.lists.get(list)?;
        Ok(l.history
            .iter()
            .copied()
            .filter(|f| !self.reclaim.is_reclaimed(*f) && !self.lists.entries[f].bypassed)
            .collect())
    }

    pub fn entry_meta(&self, entry: FactId) -> Option<&EntryMeta> {
        self.lists.entries.get(&entry)
    }

    /// Evaluates `guard` on the latest entry while holding the claim and
    /// appends only if it passes. An empty list presents `None`.
    pub fn conditional_append(
        &mut self,
        list: ListId,
        payload: Payload,
        guard: impl FnOnce(Option<&Fact>) -> bool,
        token: &ClaimToken,
    ) -> Result<CondOutcome> {
        self.check_append(list, token)?;
        let latest = self.lists.get(list)?.latest;
        let fact = match latest {
            Some(f) => Some(self.graph.fact(f)?),
            None => None,
        };
        if !guard(fact) {
            return Ok(CondOutcome::Refused(latest));
        }
        self.append_entry(list, payload, token).map(CondOutcome::Appended)
    }

    /// `header` then one `idx, fact_id, set_time, bypassed, payload` line per
    /// resident entry.
    pub fn dump_list(&self, list: ListId) -> Result<String> {
        let l = self.lists.get(list)?;
        let mut out = format!(
            "list {} class {} entries {}\n",
            l.id,
            l.entry_class.generic(),
            l.entry_count
        );
        for f in &l.history {
            if self.reclaim.is_reclaimed(*f) {
                continue;
            }
            let fact = self.graph.fact_record(*f).unwrap();
            let meta = &self.lists.entries[f];
            let _ = writeln!(
                out,
                "{}, {}, {}, {}, {}",
                meta.index, f, fact.set_time, meta.bypassed, fact.payload
            );
        }
        Ok(out)
    }

    pub fn dump_all_lists(&self) -> String {
        let mut out = String::new();
        for l in &self.lists.lists {
            out.push_str(&self.dump_list(l.id).unwrap());
        }
        out
    }

    // ---- consistency groups ----

    /// Groups `members` under `group_list`. Group entries name one member
    /// entry per list in fields named after each member's entry class.
    pub fn create_group(
        &mut self,
        group_list: ListId,
        members: &[ListId],
        predicate: Consistency,
    ) -> Result<u32> {
        self.lists.get(group_list)?;
        let mut field_names = Vec::new();
        for m in members {
            let name = String::from(self.lists.get(*m)?.entry_class.generic());
            if field_names.contains(&name) {
                return Err(Error::InconsistentTuple);
            }
            field_names.push(name);
        }
        let id = self.lists.groups.len() as u32;
        self.lists.groups.push(ConsistencyGroup {
            id,
            group_list,
            members: members.to_vec(),
            predicate,
            field_names,
        });
        Ok(id)
    }

    pub fn group(&self, id: u32) -> Result<&ConsistencyGroup> {
        self.lists.groups.get(id as usize).ok_or(Error::UnknownGroup(id))
    }

    /// Whether the named tuple satisfies the group predicate.
    pub fn group_consistent(&self, group: u32, tuple: &BTreeMap<ListId, FactId>) -> Result<bool> {
        let g = self.group(group)?;
        let mut facts = Vec::new();
        for m in &g.members {
            let f = *tuple.get(m).ok_or(Error::InconsistentTuple)?;
            self.entry_of(*m, f)?;
            facts.push((*m, self.graph.fact(f)?));
        }
        if tuple.len() != g.members.len() {
            return Err(Error::InconsistentTuple);
        }
        Ok(g.predicate.holds(&facts))
    }

    pub fn group_commit(
        &mut self,
        group: u32,
        member_entries: &BTreeMap<ListId, FactId>,
        token: &ClaimToken,
    ) -> Result<FactId> {
        let g = self.group(group)?.clone();
        self.check_append(g.group_list, token)?;
        if !self.group_consistent(group, member_entries)? {
            return Err(Error::InconsistentTuple);
        }
        let mut payload = Payload::new();
        for (m, name) in g.members.iter().zip(&g.field_names) {
            payload.insert(name.clone(), Scalar::Int(i64::from(member_entries[m].0)));
        }
        let entry = self.append_entry(g.group_list, payload, token)?;
        for m in &g.members {
            self.add_connection(Source::Fact(entry), member_entries[m])?;
        }
        Ok(entry)
    }

    /// Tuple named by the group's latest entry; every named entry and the
    /// group entry are pinned for `actor`.
    pub fn read_consistent(&mut self, group: u32, actor: ActorId) -> Result<ConsistentRead> {
        let g = self.group(group)?.clone();
        let head = self.latest_entry(g.group_list, actor)?;
        let payload = self.graph.fact(head.fact)?.payload.clone();
        let mut read = ConsistentRead {
            group_entry: head.fact,
            entries: BTreeMap::new(),
            pins: alloc::vec![head.pin],
        };
        for (m, name) in g.members.iter().zip(&g.field_names) {
            let id = payload
                .get(name)
                .and_then(Scalar::as_int)
                .ok_or(Error::InconsistentTuple)?;
            let fact = FactId(id as u32);
            read.pins.push(self.pin(fact, actor)?);
            read.entries.insert(*m, fact);
        }
        Ok(read)
    }

    // ---- derivation ----

    /// Registers an order-preserving derivation from `source` into `target`.
    /// Its cursor counts against source entries, so it must exist before the
    /// source's first append.
    pub fn register_derivation(
        &mut self,
        source: ListId,
        target: ListId,
        relevance: Relevance,
        actor: ActorId,
    ) -> Result<u32> {
        self.lists.get(target)?;
        let cursor = self.register_cursor(source, actor)?;
        let id = self.lists.derivations.len() as u32;
        self.lists.derivations.push(Derivation {
            id,
            source,
            target,
            relevance,
            cursor,
            outstanding: VecDeque::new(),
            recorded: Vec::new(),
            taken: Vec::new(),
        });
        Ok(id)
    }

    pub fn derivation(&self, id: u32) -> Result<&Derivation> {
        self.lists.derivations.get(id as usize).ok_or(Error::UnknownDerivation(id))
    }

    /// Next relevant source entry, pinned for `actor`, or `None` at the tip.
    pub fn derivation_take(&mut self, id: u32, actor: ActorId) -> Result<Option<Taken>> {
        let (cursor, relevance) = {
            let d = self.derivation(id)?;
            (d.cursor, d.relevance.clone())
        };
        loop {
            let entry = match self.advance(cursor) {
                Ok(e) => e,
                Err(Error::NoNextEntry) => return Ok(None),
                Err(e) => return Err(e),
            };
            let fact = self.graph.fact(entry)?;
            if relevance.admits(fact) {
                let index = self.lists.entries[&entry].index;
                let pin = self.pin(entry, actor)?;
                let d = &mut self.lists.derivations[id as usize];
                d.outstanding.push_back(index);
                d.taken.push(index);
                return Ok(Some(Taken { index, entry, pin }));
            }
        }
    }

    /// Source index the next derived append must carry, if any is
    /// outstanding.
    pub fn derivation_expected(&self, id: u32) -> Result<Option<u64>> {
        Ok(self.derivation(id)?.outstanding.front().copied())
    }

    /// Appends the entry derived from source `index`. With order
    /// preservation on, anything but the oldest outstanding index fails
    /// before the append.
    pub fn derivation_put(
        &mut self,
        id: u32,
        index: u64,
        payload: Payload,
        token: &ClaimToken,
    ) -> Result<FactId> {
        let d = self.derivation(id)?;
        let target = d.target;
        if !d.outstanding.contains(&index) {
            return Err(Error::OrderDestroyed {
                expected: d.outstanding.front().copied().unwrap_or(index),
                got: index,
            });
        }
        if self.enforcement.order_preservation {
            let expected = d.outstanding.front().copied().unwrap();
            if expected != index {
                return Err(Error::OrderDestroyed { expected, got: index });
            }
        }
        self.check_append(target, token)?;
        let tip = self.lists.get(target)?.tip;
        let fact = self.append_at(target, tip, payload, Some(index))?;
        let d = &mut self.lists.derivations[id as usize];
        d.outstanding.retain(|i| *i != index);
        d.recorded.push(index);
        Ok(fact)
    }

    /// Drains the derivation sequentially, appending `f(entry)` for every
    /// remaining relevant source entry.
    pub fn derive_list(
        &mut self,
        id: u32,
        f: impl Fn(&Payload) -> Payload,
        token: &ClaimToken,
    ) -> Result<Vec<FactId>> {
        let mut out = Vec::new();
        while let Some(t) = self.derivation_take(id, token.holder)? {
            let derived = f(&self.graph.fact(t.entry)?.payload);
            out.push(self.derivation_put(id, t.index, derived, token)?);
            self.unpin(t.pin)?;
        }
        Ok(out)
    }

    /// Structural check of the list hierarchy: every child list's parent is
    /// resident (or the list is orphaned), records the child, and holds the
    /// head gate.
    pub fn check_hierarchy(&self) -> Result<(), String> {
        for l in &self.lists.lists {
            let owner = l.owner();
            let Some(fact) = self.graph.fact_record(owner) else {
                return Err(format!("{}: parent {} missing", l.id, owner));
            };
            if fact.reclaimed {
                if !l.orphaned {
                    return Err(format!("{}: parent {} reclaimed but list live", l.id, owner));
                }
                continue;
            }
            if !self.lists.lists_under(owner).contains(&l.id) {
                return Err(format!("{}: parent {} does not record it", l.id, owner));
            }
            if let Some((_, head)) = l.parent {
                if !fact.child_gates.contains(&head) {
                    return Err(format!("{}: head gate {} not in parent", l.id, head));
                }
                if let Some(meta) = self.lists.entries.get(&owner) {
                    if !meta.child_lists.contains(&l.id) {
                        return Err(format!("{}: parent entry lacks child record", l.id));
                    }
                }
            }
            if let Some(latest) = l.latest {
                if l.history.last() != Some(&latest) {
                    return Err(format!("{}: latest slot is not the newest entry", l.id));
                }
            }
        }
        Ok(())
    }
}
