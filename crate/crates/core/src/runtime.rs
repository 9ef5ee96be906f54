//! The runtime: one description plus the list registry, claim table and
//! reclamation counts that govern it.

use alloc::vec::Vec;

use crate::claims::{ClaimPolicy, ClaimTable, ClaimToken};
use crate::error::{Error, Result};
use crate::fact_graph::{Description, TipAuthority};
use crate::lists::ListRegistry;
use crate::model::{ActorId, ClassPair, FactId, GateId, ListId, Payload};
use crate::reclaim::ReclaimTable;

/// Which protections are active. Everything is on in normal operation; the
/// switches exist so the harness can reproduce the malfunctions they prevent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Enforcement {
    /// One live claim per list.
    pub mutual_exclusion: bool,
    /// Writes through an already-true gate fail instead of overwriting.
    pub guarded_writes: bool,
    /// Derived appends must follow source order.
    pub order_preservation: bool,
    /// Transfer second lists are claimed in identifier order.
    pub canonical_order: bool,
    /// Queued claims that would close a wait-for cycle are refused.
    pub deadlock_detection: bool,
}

impl Enforcement {
    pub const fn on() -> Self {
        Enforcement {
            mutual_exclusion: true,
            guarded_writes: true,
            order_preservation: true,
            canonical_order: true,
            deadlock_detection: true,
        }
    }

    /// All protections off except deadlock detection, which turns a would-be
    /// hang into a `DeadlockAverted` error.
    pub const fn off() -> Self {
        Enforcement {
            mutual_exclusion: false,
            guarded_writes: false,
            order_preservation: false,
            canonical_order: false,
            deadlock_detection: true,
        }
    }

    pub fn is_on(&self) -> bool {
        *self == Self::on()
    }

    fn claim_policy(&self) -> ClaimPolicy {
        ClaimPolicy {
            mutual_exclusion: self.mutual_exclusion,
            canonical_order: self.canonical_order,
            deadlock_detection: self.deadlock_detection,
        }
    }
}

impl Default for Enforcement {
    fn default() -> Self {
        Self::on()
    }
}

#[derive(Clone)]
pub struct Runtime {
    pub(crate) graph: Description,
    pub(crate) lists: ListRegistry,
    pub(crate) claims: ClaimTable,
    pub(crate) reclaim: ReclaimTable,
    pub(crate) enforcement: Enforcement,
    next_actor: u32,
    pub(crate) triggers: Vec<(ListId, FactId)>,
}

impl core::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("Runtime")
            .field("facts", &self.graph.fact_count())
            .field("gates", &self.graph.gate_count())
            .field("lists", &self.lists.len())
            .field("enforcement", &self.enforcement)
            .finish()
    }
}

impl Default for Runtime {
    fn default() -> Self {
        Self::new()
    }
}

impl Runtime {
    pub fn new() -> Self {
        Self::with_description(Description::new(), Enforcement::on())
    }

    pub fn with_signal(signal: ClassPair, enforcement: Enforcement) -> Self {
        Self::with_description(Description::with_root_class(signal), enforcement)
    }

    pub fn with_description(mut graph: Description, enforcement: Enforcement) -> Self {
        graph.set_guarded(enforcement.guarded_writes);
        Runtime {
            graph,
            lists: ListRegistry::default(),
            claims: ClaimTable::new(enforcement.claim_policy()),
            reclaim: ReclaimTable::new(),
            enforcement,
            next_actor: 0,
            triggers: Vec::new(),
        }
    }

    pub fn description(&self) -> &Description {
        &self.graph
    }

    pub fn enforcement(&self) -> Enforcement {
        self.enforcement
    }

    pub fn claims(&self) -> &ClaimTable {
        &self.claims
    }

    pub fn reclaim_table(&self) -> &ReclaimTable {
        &self.reclaim
    }

    /// Fresh actor identity for claims and pins.
    pub fn new_actor(&mut self) -> ActorId {
        let a = ActorId(self.next_actor);
        self.next_actor += 1;
        a
    }

    /// Adds a false gate to a resident fact. Facts inside a list need a live
    /// claim on that list.
    pub fn add_gate(
        &mut self,
        fact: FactId,
        class: ClassPair,
        tokens: &[ClaimToken],
    ) -> Result<GateId> {
        let auth = TokenAuthority { claims: &self.claims, tokens };
        self.graph.add_gate(&auth, fact, class)
    }

    /// Sets `gates` true to expose a new fact. Each gate is an access
    /// connection to the new fact held by the gate's owner.
    pub fn extend(
        &mut self,
        gates: &[GateId],
        class: ClassPair,
        payload: Payload,
        tokens: &[ClaimToken],
    ) -> Result<FactId> {
        for &g in gates {
            if self.graph.gate(g)?.chain {
                // list chains only grow through append_entry
                return Err(Error::GateAlreadyTrue(g));
            }
        }
        let before = self.graph.fact_count();
        let auth = TokenAuthority { claims: &self.claims, tokens };
        let fact = self.graph.extend(&auth, gates, class, payload)?;
        if self.graph.fact_count() > before {
            let n = self.graph.fact(fact)?.gating_gates.len() as u32;
            self.reclaim.on_new_fact(fact, n);
        }
        Ok(fact)
    }

    pub(crate) fn authority<'a>(&'a self, tokens: &'a [ClaimToken]) -> TokenAuthority<'a> {
        TokenAuthority { claims: &self.claims, tokens }
    }

    /// Entries appended to scheduling lists since the last drain.
    pub fn take_triggers(&mut self) -> Vec<(ListId, FactId)> {
        core::mem::take(&mut self.triggers)
    }
}

/// Authority derived from the claim tokens an actor presents.
pub(crate) struct TokenAuthority<'a> {
    claims: &'a ClaimTable,
    tokens: &'a [ClaimToken],
}

impl TipAuthority for TokenAuthority<'_> {
    fn permits(&self, domain: Option<ListId>) -> Result<()> {
        match domain {
            None => Ok(()),
            Some(list) => self.claims.check_any(self.tokens, list),
        }
    }
}
