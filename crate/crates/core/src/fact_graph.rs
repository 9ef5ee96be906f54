//! The append-only description structure.
//!
//! A description is rooted at gate `S` (true at tick 0) which gates the root
//! fact. Every other gate is created false inside some fact and becomes true
//! exactly once, at which point it gates exactly one new fact. Several false
//! gates may be set together so that one fact is reachable through each of
//! them (recombination); they then share a single set time.
//!
//! Gates in a list chain (list head gates and entry tip gates) are marked as
//! `chain` gates: they order entries in time but are not counted as access
//! connections, since readers reach entries through the list's latest slot.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ClassPair, FactId, GateId, ListId, Payload};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    pub id: GateId,
    pub class: ClassPair,
    /// Fact containing this gate; `None` only for `S`.
    pub owner: Option<FactId>,
    pub set_time: Option<u64>,
    pub gated: Option<FactId>,
    pub chain: bool,
}

impl Gate {
    pub fn is_true(&self) -> bool {
        self.set_time.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fact {
    pub id: FactId,
    pub class: ClassPair,
    pub payload: Payload,
    pub child_gates: Vec<GateId>,
    pub gating_gates: Vec<GateId>,
    /// List whose claim governs mutation of this fact.
    pub domain: Option<ListId>,
    pub set_time: u64,
    pub reclaimed: bool,
}

/// Decides whether the caller may mutate facts in a claim domain.
pub trait TipAuthority {
    fn permits(&self, domain: Option<ListId>) -> Result<()>;
}

/// Authority for building structure outside any claim discipline.
#[derive(Debug, Clone, Copy, Default)]
pub struct Unrestricted;

impl TipAuthority for Unrestricted {
    fn permits(&self, _domain: Option<ListId>) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceOp {
    AddGate,
    Extend,
    Overwrite,
}

impl TraceOp {
    fn as_str(self) -> &'static str {
        match self {
            TraceOp::AddGate => "add_gate",
            TraceOp::Extend => "extend",
            TraceOp::Overwrite => "overwrite",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub tick: u64,
    pub op: TraceOp,
    pub gates: Vec<GateId>,
    pub fact: Option<FactId>,
    pub class: ClassPair,
}

/// A write through a gate that was already true. Only possible when the
/// description is unguarded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Overwrite {
    pub tick: u64,
    pub gate: GateId,
    pub fact: FactId,
    pub previous: Payload,
    pub written: Payload,
}

/// Gate visit times for a sampled read. A gate is observed true when its set
/// time is no later than its visit time; unlisted gates are observed as they
/// are now.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VisitSchedule {
    pub visits: BTreeMap<GateId, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReadPolicy {
    Snapshot,
    Sampled(VisitSchedule),
}

/// A downward-closed part of the structure as seen by one read.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Value {
    pub facts: BTreeSet<FactId>,
    /// Gates observed false.
    pub open_gates: BTreeSet<GateId>,
}

impl Value {
    pub fn contains(&self, fact: FactId) -> bool {
        self.facts.contains(&fact)
    }

    /// Facts with no child gates, or whose child gates were all seen false.
    pub fn extremities(&self, desc: &Description) -> Vec<FactId> {
        self.facts
            .iter()
            .copied()
            .filter(|f| {
                desc.facts[f.index()]
                    .child_gates
                    .iter()
                    .all(|g| self.open_gates.contains(g) || desc.gates[g.index()].gated.is_none())
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Path {
    pub gates: Vec<GateId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderCheck {
    Ok,
    Violation {
        pair: (GateId, GateId),
        paths: (Path, Path),
    },
}

impl OrderCheck {
    pub fn is_ok(&self) -> bool {
        matches!(self, OrderCheck::Ok)
    }
}

/// Cap on simple paths walked when checking a cyclic (corrupted) structure.
const CYCLIC_PATH_CAP: usize = 200_000;

#[derive(Debug, Clone)]
pub struct Description {
    gates: Vec<Gate>,
    facts: Vec<Fact>,
    clock: u64,
    guarded: bool,
    trace: Vec<TraceRecord>,
    overwrites: Vec<Overwrite>,
    accesses: Cell<u64>,
}

impl Default for Description {
    fn default() -> Self {
        Self::new()
    }
}

impl Description {
    pub fn new() -> Self {
        Self::with_root_class(ClassPair::new("S", "start"))
    }

    /// Fresh description whose root fact carries `class`.
    pub fn with_root_class(class: ClassPair) -> Self {
        let root_gate = Gate {
            id: GateId::ROOT,
            class: ClassPair::new("S", "start"),
            owner: None,
            set_time: Some(0),
            gated: Some(FactId::ROOT),
            chain: false,
        };
        let root_fact = Fact {
            id: FactId::ROOT,
            class,
            payload: Payload::new(),
            child_gates: Vec::new(),
            gating_gates: vec![GateId::ROOT],
            domain: None,
            set_time: 0,
            reclaimed: false,
        };
        Description {
            gates: vec![root_gate],
            facts: vec![root_fact],
            clock: 0,
            guarded: true,
            trace: Vec::new(),
            overwrites: Vec::new(),
            accesses: Cell::new(0),
        }
    }

    /// Current logical time (tick of the latest extend).
    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn is_guarded(&self) -> bool {
        self.guarded
    }

    /// When unguarded, writes through an already-true gate overwrite the
    /// gated fact in place instead of failing. Harness use only.
    pub fn set_guarded(&mut self, guarded: bool) {
        self.guarded = guarded;
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    pub fn fact_count(&self) -> usize {
        self.facts.len()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// All facts ever created, including reclaimed ones.
    pub fn facts(&self) -> &[Fact] {
        &self.facts
    }

    pub fn gate(&self, id: GateId) -> Result<&Gate> {
        self.gates.get(id.index()).ok_or(Error::UnknownGate(id))
    }

    /// Resident fact lookup; reclaimed facts are unknown.
    pub fn fact(&self, id: FactId) -> Result<&Fact> {
        self.touch();
        match self.facts.get(id.index()) {
            Some(f) if !f.reclaimed => Ok(f),
            _ => Err(Error::UnknownFact(id)),
        }
    }

    /// Lookup that also returns reclaimed facts.
    pub fn fact_record(&self, id: FactId) -> Option<&Fact> {
        self.facts.get(id.index())
    }

    pub fn trace(&self) -> &[TraceRecord] {
        &self.trace
    }

    pub fn overwrites(&self) -> &[Overwrite] {
        &self.overwrites
    }

    /// Number of registry accesses made by lookups so far.
    pub fn access_count(&self) -> u64 {
        self.accesses.get()
    }

    pub(crate) fn touch(&self) {
        self.accesses.set(self.accesses.get() + 1);
    }

    pub fn add_gate(
        &mut self,
        auth: &impl TipAuthority,
        fact: FactId,
        class: ClassPair,
    ) -> Result<GateId> {
        let domain = self.fact(fact)?.domain;
        auth.permits(domain)?;
        Ok(self.add_gate_raw(fact, class, false))
    }

    pub(crate) fn add_gate_raw(&mut self, fact: FactId, class: ClassPair, chain: bool) -> GateId {
        let id = GateId(self.gates.len() as u32);
        self.gates.push(Gate {
            id,
            class: class.clone(),
            owner: Some(fact),
            set_time: None,
            gated: None,
            chain,
        });
        self.facts[fact.index()].child_gates.push(id);
        self.trace.push(TraceRecord {
            tick: self.clock,
            op: TraceOp::AddGate,
            gates: vec![id],
            fact: Some(fact),
            class,
        });
        id
    }

    /// Sets every gate in `gates` true at one new tick, all gating one new
    /// fact. The new fact joins the claim domain of the first gate's owner.
    pub fn extend(
        &mut self,
        auth: &impl TipAuthority,
        gates: &[GateId],
        class: ClassPair,
        payload: Payload,
    ) -> Result<FactId> {
        let first = *gates.first().ok_or(Error::NoGates)?;
        for &g in gates {
            let owner = self.gate(g)?.owner.ok_or(Error::GateAlreadyTrue(g))?;
            let domain = self.fact(owner)?.domain;
            auth.permits(domain)?;
        }
        let domain = self.facts[self.gates[first.index()].owner.unwrap().index()].domain;
        self.extend_raw(gates, class, payload, domain)
    }

    pub(crate) fn extend_raw(
        &mut self,
        gates: &[GateId],
        class: ClassPair,
        payload: Payload,
        domain: Option<ListId>,
    ) -> Result<FactId> {
        let mut set: Vec<GateId> = Vec::with_capacity(gates.len());
        for &g in gates {
            let gate = self.gate(g)?;
            if let Some(owner) = gate.owner {
                if self.facts[owner.index()].reclaimed {
                    return Err(Error::UnknownFact(owner));
                }
            }
            if !set.contains(&g) {
                set.push(g);
            }
        }
        if set.is_empty() {
            return Err(Error::NoGates);
        }
        if let Some(&g) = set.iter().find(|g| self.gates[g.index()].is_true()) {
            if self.guarded || set.len() > 1 {
                return Err(Error::GateAlreadyTrue(g));
            }
            return Ok(self.overwrite(g, class, payload));
        }
        for (i, &a) in set.iter().enumerate() {
            for &b in &set[i + 1..] {
                if self.is_ancestor(a, b) || self.is_ancestor(b, a) {
                    return Err(Error::OrderViolation(a, b));
                }
            }
        }

        self.clock += 1;
        let id = FactId(self.facts.len() as u32);
        for &g in &set {
            let gate = &mut self.gates[g.index()];
            gate.set_time = Some(self.clock);
            gate.gated = Some(id);
        }
        self.facts.push(Fact {
            id,
            class: class.clone(),
            payload,
            child_gates: Vec::new(),
            gating_gates: set.clone(),
            domain,
            set_time: self.clock,
            reclaimed: false,
        });
        self.trace.push(TraceRecord {
            tick: self.clock,
            op: TraceOp::Extend,
            gates: set,
            fact: Some(id),
            class,
        });
        Ok(id)
    }

    fn overwrite(&mut self, gate: GateId, class: ClassPair, payload: Payload) -> FactId {
        self.clock += 1;
        let fact = self.gates[gate.index()].gated.expect("true gate gates a fact");
        let previous = core::mem::replace(&mut self.facts[fact.index()].payload, payload.clone());
        self.facts[fact.index()].class = class.clone();
        self.overwrites.push(Overwrite {
            tick: self.clock,
            gate,
            fact,
            previous,
            written: payload,
        });
        self.trace.push(TraceRecord {
            tick: self.clock,
            op: TraceOp::Overwrite,
            gates: vec![gate],
            fact: Some(fact),
            class,
        });
        fact
    }

    /// True when `a` lies on some path from `S` to `b` (strictly before it).
    pub fn is_ancestor(&self, a: GateId, b: GateId) -> bool {
        let mut stack = vec![b];
        let mut seen = BTreeSet::new();
        while let Some(g) = stack.pop() {
            let Some(owner) = self.gates[g.index()].owner else {
                continue;
            };
            for &up in &self.facts[owner.index()].gating_gates {
                if up == a {
                    return true;
                }
                if seen.insert(up) {
                    stack.push(up);
                }
            }
        }
        false
    }

    pub(crate) fn set_reclaimed(&mut self, fact: FactId) {
        self.facts[fact.index()].reclaimed = true;
    }

    fn successors(&self, g: GateId) -> &[GateId] {
        match self.gates[g.index()].gated {
            Some(f) => &self.facts[f.index()].child_gates,
            None => &[],
        }
    }

    pub fn read_value(&self, policy: &ReadPolicy) -> Value {
        let observed = |g: &Gate| match (policy, g.set_time) {
            (_, None) => false,
            (ReadPolicy::Snapshot, Some(_)) => true,
            (ReadPolicy::Sampled(s), Some(t)) => s.visits.get(&g.id).is_none_or(|&v| t <= v),
        };
        let mut value = Value::default();
        let mut stack = vec![GateId::ROOT];
        while let Some(g) = stack.pop() {
            let gate = &self.gates[g.index()];
            if !observed(gate) {
                value.open_gates.insert(g);
                continue;
            }
            let fact = gate.gated.expect("observed gate is true");
            if self.facts[fact.index()].reclaimed || !value.facts.insert(fact) {
                continue;
            }
            stack.extend(self.facts[fact.index()].child_gates.iter().rev());
        }
        value
    }

    /// Every maximal path from `S`.
    pub fn enumerate_paths(&self, limit: usize) -> Result<Vec<Path>> {
        let mut out = Vec::new();
        let mut exceeded = false;
        let mut current = vec![GateId::ROOT];
        self.walk_paths(&mut current, &mut |p| {
            if out.len() == limit {
                exceeded = true;
                return false;
            }
            out.push(Path { gates: p.to_vec() });
            true
        });
        if exceeded {
            return Err(Error::LimitExceeded(limit));
        }
        Ok(out)
    }

    /// Depth-first walk over simple maximal paths. `visit` returns false to
    /// stop the walk.
    fn walk_paths(&self, current: &mut Vec<GateId>, visit: &mut dyn FnMut(&[GateId]) -> bool) -> bool {
        let last = *current.last().unwrap();
        let next: Vec<GateId> = self
            .successors(last)
            .iter()
            .copied()
            .filter(|g| !current.contains(g))
            .collect();
        if next.is_empty() {
            return visit(current);
        }
        for g in next {
            current.push(g);
            let go_on = self.walk_paths(current, visit);
            current.pop();
            if !go_on {
                return false;
            }
        }
        true
    }

    /// Relative order of any two gates is the same on every path holding
    /// both. On an acyclic structure this always holds; only corrupted
    /// structures need the path walk.
    pub fn check_order_consistency(&self) -> OrderCheck {
        if !self.has_cycle() {
            return OrderCheck::Ok;
        }
        self.check_order_by_paths()
    }

    fn has_cycle(&self) -> bool {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.gates.len()];
        let mut stack: Vec<(GateId, usize)> = vec![(GateId::ROOT, 0)];
        state[0] = 1;
        while let Some(&mut (g, ref mut i)) = stack.last_mut() {
            let succ = self.successors(g);
            if *i < succ.len() {
                let n = succ[*i];
                *i += 1;
                match state[n.index()] {
                    0 => {
                        state[n.index()] = 1;
                        stack.push((n, 0));
                    }
                    1 => return true,
                    _ => {}
                }
            } else {
                state[g.index()] = 2;
                stack.pop();
            }
        }
        false
    }

    fn check_order_by_paths(&self) -> OrderCheck {
        let mut first_seen: BTreeMap<(GateId, GateId), Vec<GateId>> = BTreeMap::new();
        let mut found: Option<OrderCheck> = None;
        let mut walked = 0usize;
        let mut current = vec![GateId::ROOT];
        self.walk_paths(&mut current, &mut |p| {
            walked += 1;
            for (i, &a) in p.iter().enumerate() {
                for &b in &p[i + 1..] {
                    if let Some(w) = first_seen.get(&(b, a)) {
                        let (x, y) = if a < b { (a, b) } else { (b, a) };
                        found = Some(OrderCheck::Violation {
                            pair: (x, y),
                            paths: (Path { gates: w.clone() }, Path { gates: p.to_vec() }),
                        });
                        return false;
                    }
                    first_seen.entry((a, b)).or_insert_with(|| p.to_vec());
                }
            }
            walked < CYCLIC_PATH_CAP
        });
        found.unwrap_or(OrderCheck::Ok)
    }

    /// Graphviz rendering: filled circles are true gates, open circles false
    /// gates, boxes are facts with no child gates.
    pub fn export_dot(&self) -> String {
        let mut out = String::from("digraph description {\n  node [shape=circle, label=\"\"];\n");
        for g in &self.gates {
            let name = if g.id == GateId::ROOT {
                String::from("S")
            } else {
                format!("{} {}", g.id, g.class)
            };
            let style = if g.is_true() {
                "style=filled, fillcolor=black"
            } else {
                "style=solid"
            };
            let _ = writeln!(out, "  {} [{}, xlabel=\"{}\"];", g.id, style, escape(&name));
        }
        for g in &self.gates {
            let Some(f) = g.gated else { continue };
            let fact = &self.facts[f.index()];
            if fact.child_gates.is_empty() {
                let dashed = if fact.reclaimed { ", style=dashed" } else { "" };
                let _ = writeln!(
                    out,
                    "  {} [shape=box, label=\"{} {}\"{}];",
                    f,
                    f,
                    escape(&format!("{}", fact.class)),
                    dashed
                );
                let _ = writeln!(out, "  {} -> {};", g.id, f);
            } else {
                for c in &fact.child_gates {
                    let _ = writeln!(out, "  {} -> {} [label=\"{}\"];", g.id, c, f);
                }
            }
        }
        out.push_str("}\n");
        out
    }

    /// Tab separated mutation trace: `tick, op, gate_ids, fact_id, class`.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for r in &self.trace {
            let gates: Vec<String> = r.gates.iter().map(|g| format!("{g}")).collect();
            let fact = r.fact.map_or(String::from("-"), |f| format!("{f}"));
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.tick,
                r.op.as_str(),
                gates.join(","),
                fact,
                r.class
            );
        }
        out
    }

    /// Redirects `gate` to gate `fact`, bypassing every check. Only for
    /// building corrupted structures in tests.
    #[doc(hidden)]
    pub fn raw_set_gated(&mut self, gate: GateId, fact: FactId) {
        self.clock += 1;
        let g = &mut self.gates[gate.index()];
        g.set_time = Some(self.clock);
        g.gated = Some(fact);
        let f = &mut self.facts[fact.index()];
        if !f.gating_gates.contains(&gate) {
            f.gating_gates.push(gate);
        }
    }

    /// Replaces a payload in place, bypassing immutability. Tests only.
    #[doc(hidden)]
    pub fn raw_set_payload(&mut self, fact: FactId, payload: Payload) {
        self.facts[fact.index()].payload = payload;
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
