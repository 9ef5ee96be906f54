//! Claim tokens: the exclusive right to extend a list's tip.
//!
//! At most one token per list is live while mutual exclusion is enforced.
//! Blocking claims queue in request order and are granted on release. A
//! queued request that would close a cycle in the wait-for graph is refused
//! with [`Error::DeadlockAverted`] instead of waiting.
//!
//! The transfer protocol reads a first list under its claim, resolves the
//! second lists it names, claims every second list, and only then releases
//! the first list.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{ActorId, FactId, ListId, TokenId};
use crate::runtime::Runtime;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClaimToken {
    pub id: TokenId,
    pub list: ListId,
    pub holder: ActorId,
    pub acquired_tick: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClaimPolicy {
    pub mutual_exclusion: bool,
    pub canonical_order: bool,
    pub deadlock_detection: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ClaimRequest {
    Acquired(ClaimToken),
    Queued,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimOp {
    Claim,
    Acquire,
    Release,
    Avert,
}

impl ClaimOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ClaimOp::Claim => "claim",
            ClaimOp::Acquire => "acquire",
            ClaimOp::Release => "release",
            ClaimOp::Avert => "avert",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimEvent {
    pub tick: u64,
    pub actor: ActorId,
    pub op: ClaimOp,
    pub list: ListId,
}

#[derive(Debug, Clone, Default)]
struct ListClaims {
    holders: Vec<TokenId>,
    queue: VecDeque<ActorId>,
}

#[derive(Debug, Clone)]
pub struct ClaimTable {
    policy: ClaimPolicy,
    tick: u64,
    next_token: u64,
    live: BTreeMap<TokenId, ClaimToken>,
    released: BTreeSet<TokenId>,
    lists: BTreeMap<ListId, ListClaims>,
    grants: BTreeMap<(ActorId, ListId), ClaimToken>,
    holding_all: BTreeSet<ActorId>,
    trace: Vec<ClaimEvent>,
}

impl ClaimTable {
    pub fn new(policy: ClaimPolicy) -> Self {
        ClaimTable {
            policy,
            tick: 0,
            next_token: 0,
            live: BTreeMap::new(),
            released: BTreeSet::new(),
            lists: BTreeMap::new(),
            grants: BTreeMap::new(),
            holding_all: BTreeSet::new(),
            trace: Vec::new(),
        }
    }

    pub fn policy(&self) -> ClaimPolicy {
        self.policy
    }

    pub(crate) fn register_list(&mut self, list: ListId) {
        self.lists.entry(list).or_default();
    }

    fn entry(&mut self, list: ListId) -> Result<&mut ListClaims> {
        self.lists.get_mut(&list).ok_or(Error::UnknownList(list))
    }

    fn log(&mut self, actor: ActorId, op: ClaimOp, list: ListId) {
        self.tick += 1;
        self.trace.push(ClaimEvent { tick: self.tick, actor, op, list });
    }

    fn issue(&mut self, list: ListId, actor: ActorId) -> ClaimToken {
        let token = ClaimToken {
            id: TokenId(self.next_token),
            list,
            holder: actor,
            acquired_tick: self.tick + 1,
        };
        self.next_token += 1;
        self.live.insert(token.id, token.clone());
        self.lists.get_mut(&list).unwrap().holders.push(token.id);
        self.log(actor, ClaimOp::Acquire, list);
        token
    }

    fn is_free(&self, list: ListId) -> bool {
        !self.policy.mutual_exclusion || self.lists[&list].holders.is_empty()
    }

    pub fn try_claim(&mut self, list: ListId, actor: ActorId) -> Result<Option<ClaimToken>> {
        self.entry(list)?;
        if self.is_free(list) && self.lists[&list].queue.is_empty() {
            self.log(actor, ClaimOp::Claim, list);
            Ok(Some(self.issue(list, actor)))
        } else {
            Ok(None)
        }
    }

    /// Blocking claim request: acquired at once when free, otherwise queued
    /// behind earlier requests.
    pub fn claim(&mut self, list: ListId, actor: ActorId) -> Result<ClaimRequest> {
        self.entry(list)?;
        if self.is_free(list) && self.lists[&list].queue.is_empty() {
            self.log(actor, ClaimOp::Claim, list);
            return Ok(ClaimRequest::Acquired(self.issue(list, actor)));
        }
        if self.policy.deadlock_detection && self.would_cycle(actor, list) {
            self.log(actor, ClaimOp::Avert, list);
            return Err(Error::DeadlockAverted { actor, list });
        }
        self.log(actor, ClaimOp::Claim, list);
        self.lists.get_mut(&list).unwrap().queue.push_back(actor);
        Ok(ClaimRequest::Queued)
    }

    /// Collects a token granted to a queued request.
    pub fn take_grant(&mut self, list: ListId, actor: ActorId) -> Option<ClaimToken> {
        self.grants.remove(&(actor, list))
    }

    pub fn is_waiting(&self, list: ListId, actor: ActorId) -> bool {
        self.lists
            .get(&list)
            .is_some_and(|l| l.queue.contains(&actor))
    }

    /// Whether any request is queued on `list`.
    pub fn is_waiting_any(&self, list: ListId) -> bool {
        self.lists.get(&list).is_some_and(|l| !l.queue.is_empty())
    }

    pub fn has_grant(&self, list: ListId, actor: ActorId) -> bool {
        self.grants.contains_key(&(actor, list))
    }

    /// Withdraws a queued request, or releases an uncollected grant.
    pub fn cancel(&mut self, list: ListId, actor: ActorId) {
        if let Some(token) = self.grants.remove(&(actor, list)) {
            let _ = self.release(&token, actor);
            return;
        }
        if let Some(l) = self.lists.get_mut(&list) {
            l.queue.retain(|a| *a != actor);
        }
    }

    pub fn release(&mut self, token: &ClaimToken, actor: ActorId) -> Result<()> {
        if self.released.contains(&token.id) {
            return Err(Error::AlreadyReleased(token.id));
        }
        let live = self.live.get(&token.id).ok_or(Error::StaleToken(token.id))?;
        if live.holder != actor {
            return Err(Error::NotHolder(actor, token.id));
        }
        self.live.remove(&token.id);
        self.released.insert(token.id);
        let list = token.list;
        self.lists.get_mut(&list).unwrap().holders.retain(|t| *t != token.id);
        self.log(actor, ClaimOp::Release, list);
        self.hand_off(list);
        Ok(())
    }

    fn hand_off(&mut self, list: ListId) {
        while self.is_free(list) {
            let Some(next) = self.lists.get_mut(&list).unwrap().queue.pop_front() else {
                break;
            };
            let token = self.issue(list, next);
            self.grants.insert((next, list), token);
        }
    }

    pub fn is_live(&self, token: &ClaimToken) -> bool {
        self.live.contains_key(&token.id)
    }

    /// Checks that `token` is live and covers `list`.
    pub fn check(&self, token: &ClaimToken, list: ListId) -> Result<()> {
        if token.list != list {
            return Err(Error::NotClaimed(list));
        }
        if !self.is_live(token) {
            return Err(Error::StaleToken(token.id));
        }
        Ok(())
    }

    pub fn check_any(&self, tokens: &[ClaimToken], list: ListId) -> Result<()> {
        match tokens.iter().find(|t| t.list == list) {
            Some(t) => self.check(t, list),
            None => Err(Error::NotClaimed(list)),
        }
    }

    pub fn live_count(&self) -> usize {
        self.live.len()
    }

    pub fn live_tokens(&self) -> impl Iterator<Item = &ClaimToken> {
        self.live.values()
    }

    pub fn holders(&self, list: ListId) -> Vec<ActorId> {
        self.lists.get(&list).map_or_else(Vec::new, |l| {
            l.holders.iter().map(|t| self.live[t].holder).collect()
        })
    }

    fn would_cycle(&self, actor: ActorId, list: ListId) -> bool {
        // actor would wait for every holder of `list`; a cycle exists if some
        // holder already (transitively) waits for `actor`.
        let mut stack: Vec<ActorId> = self.holders(list);
        let mut seen = BTreeSet::new();
        while let Some(a) = stack.pop() {
            if a == actor {
                return true;
            }
            if !seen.insert(a) {
                continue;
            }
            for (l, claims) in &self.lists {
                if claims.queue.contains(&a) {
                    stack.extend(self.holders(*l));
                }
            }
        }
        false
    }

    pub fn wait_graph(&self) -> WaitGraph {
        let mut g = WaitGraph::default();
        for t in self.live.values() {
            g.holds.push((t.holder, t.list));
        }
        for (l, claims) in &self.lists {
            for a in &claims.queue {
                g.waits.push((*a, *l));
            }
        }
        g.holds.sort();
        g.waits.sort();
        g
    }

    pub(crate) fn set_holding_all(&mut self, actor: ActorId, on: bool) {
        if on {
            self.holding_all.insert(actor);
        } else {
            self.holding_all.remove(&actor);
        }
    }

    /// Whether `actor` is inside the holding-all phase of a transfer.
    pub fn in_holding_all(&self, actor: ActorId) -> bool {
        self.holding_all.contains(&actor)
    }

    pub fn trace(&self) -> &[ClaimEvent] {
        &self.trace
    }

    /// Tab separated `tick, actor, op, list` lines.
    pub fn trace_text(&self) -> String {
        let mut out = String::new();
        for e in &self.trace {
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.tick, e.actor, e.op.as_str(), e.list);
        }
        out
    }

    /// Queues `actor` on `list` without cycle detection, producing wait-for
    /// cycles on purpose. Tests only.
    #[doc(hidden)]
    pub fn raw_enqueue(&mut self, list: ListId, actor: ActorId) {
        if let Some(l) = self.lists.get_mut(&list) {
            l.queue.push_back(actor);
        }
    }
}

/// Snapshot of which actor holds and which awaits each list.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WaitGraph {
    pub holds: Vec<(ActorId, ListId)>,
    pub waits: Vec<(ActorId, ListId)>,
}

impl WaitGraph {
    pub fn is_empty(&self) -> bool {
        self.holds.is_empty() && self.waits.is_empty()
    }

    /// Actor-level edges: waiter -> holder.
    pub fn edges(&self) -> Vec<(ActorId, ActorId)> {
        let mut out = Vec::new();
        for (w, l) in &self.waits {
            for (h, hl) in &self.holds {
                if hl == l && h != w {
                    out.push((*w, *h));
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Actors forming a wait-for cycle, if any.
    pub fn find_cycle(&self) -> Option<Vec<ActorId>> {
        let edges = self.edges();
        let mut adj: BTreeMap<ActorId, Vec<ActorId>> = BTreeMap::new();
        for (a, b) in &edges {
            adj.entry(*a).or_default().push(*b);
        }
        for &start in adj.keys() {
            let mut path = alloc::vec![start];
            let mut seen = BTreeSet::new();
            if let Some(c) = cycle_from(&adj, start, &mut path, &mut seen) {
                return Some(c);
            }
        }
        None
    }
}

fn cycle_from(
    adj: &BTreeMap<ActorId, Vec<ActorId>>,
    node: ActorId,
    path: &mut Vec<ActorId>,
    seen: &mut BTreeSet<ActorId>,
) -> Option<Vec<ActorId>> {
    seen.insert(node);
    for &next in adj.get(&node).map(Vec::as_slice).unwrap_or(&[]) {
        if let Some(pos) = path.iter().position(|a| *a == next) {
            return Some(path[pos..].to_vec());
        }
        if seen.contains(&next) {
            continue;
        }
        path.push(next);
        if let Some(c) = cycle_from(adj, next, path, seen) {
            return Some(c);
        }
        path.pop();
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferPhase {
    ReadingFirst,
    HoldingAll,
    ReleasedFirst,
    Done,
    Aborted,
}

/// State of one first/second list transfer, advanced step by step.
#[derive(Debug, Clone)]
pub struct Transfer {
    pub actor: ActorId,
    pub first: ListId,
    phase: TransferPhase,
    first_token: Option<ClaimToken>,
    message: Option<FactId>,
    targets: Option<Vec<ListId>>,
    seconds: Vec<ClaimToken>,
}

impl Transfer {
    pub fn phase(&self) -> TransferPhase {
        self.phase
    }

    pub fn holds_first(&self) -> bool {
        self.first_token.is_some()
    }

    /// Resolved second lists in claim order.
    pub fn targets(&self) -> Option<&[ListId]> {
        self.targets.as_deref()
    }

    pub fn seconds(&self) -> &[ClaimToken] {
        &self.seconds
    }

    pub fn message(&self) -> Option<FactId> {
        self.message
    }
}

impl Runtime {
    pub fn claim(&mut self, list: ListId, actor: ActorId) -> Result<ClaimRequest> {
        self.lists.get(list)?;
        self.claims.claim(list, actor)
    }

    pub fn try_claim(&mut self, list: ListId, actor: ActorId) -> Result<Option<ClaimToken>> {
        self.lists.get(list)?;
        self.claims.try_claim(list, actor)
    }

    pub fn take_grant(&mut self, list: ListId, actor: ActorId) -> Option<ClaimToken> {
        self.claims.take_grant(list, actor)
    }

    pub fn cancel_claim(&mut self, list: ListId, actor: ActorId) {
        self.claims.cancel(list, actor)
    }

    pub fn release(&mut self, token: &ClaimToken, actor: ActorId) -> Result<()> {
        self.claims.release(token, actor)
    }

    pub fn wait_graph(&self) -> WaitGraph {
        self.claims.wait_graph()
    }

    /// Declares every list a transfer out of `first` may write to.
    pub fn register_universe(
        &mut self,
        first: ListId,
        seconds: impl IntoIterator<Item = ListId>,
    ) -> Result<()> {
        self.lists.get(first)?;
        let mut set = BTreeSet::new();
        for s in seconds {
            self.lists.get(s)?;
            set.insert(s);
        }
        self.lists.universes.insert(first, set);
        Ok(())
    }

    pub fn transfer_begin(&self, first: ListId, actor: ActorId) -> Result<Transfer> {
        self.lists.get(first)?;
        if !self.lists.universes.contains_key(&first) {
            return Err(Error::NoUniverse(first));
        }
        Ok(Transfer {
            actor,
            first,
            phase: TransferPhase::ReadingFirst,
            first_token: None,
            message: None,
            targets: None,
            seconds: Vec::new(),
        })
    }

    fn acquire_step(&mut self, list: ListId, actor: ActorId) -> Result<Option<ClaimToken>> {
        if let Some(t) = self.claims.take_grant(list, actor) {
            return Ok(Some(t));
        }
        if self.claims.is_waiting(list, actor) {
            return Ok(None);
        }
        match self.claims.claim(list, actor)? {
            ClaimRequest::Acquired(t) => Ok(Some(t)),
            ClaimRequest::Queued => Ok(None),
        }
    }

    /// Requests (or collects) the first-list claim. Returns whether it is held.
    pub fn transfer_claim_first(&mut self, t: &mut Transfer) -> Result<bool> {
        if t.phase != TransferPhase::ReadingFirst {
            return Err(Error::TransferPhase);
        }
        if t.first_token.is_none() {
            t.first_token = self.acquire_step(t.first, t.actor)?;
        }
        Ok(t.first_token.is_some())
    }

    /// Reads the first list's latest entry and resolves the second lists.
    /// Unregistered seconds fail here, before any second claim is made.
    pub fn transfer_resolve(
        &mut self,
        t: &mut Transfer,
        resolve: impl FnOnce(&Runtime, Option<FactId>) -> Vec<ListId>,
    ) -> Result<()> {
        if t.phase != TransferPhase::ReadingFirst || t.first_token.is_none() || t.targets.is_some()
        {
            return Err(Error::TransferPhase);
        }
        let message = self.lists.get(t.first)?.latest;
        let mut targets = resolve(self, message);
        let universe = &self.lists.universes[&t.first];
        if let Some(bad) = targets.iter().find(|l| !universe.contains(l)) {
            return Err(Error::UnregisteredSecond(*bad));
        }
        if self.enforcement.canonical_order {
            targets.sort();
        }
        let mut seen = BTreeSet::new();
        targets.retain(|l| seen.insert(*l));
        t.message = message;
        t.targets = Some(targets);
        self.enter_holding_all_if_done(t);
        Ok(())
    }

    fn enter_holding_all_if_done(&mut self, t: &mut Transfer) {
        if t.targets.as_ref().is_some_and(|ts| ts.len() == t.seconds.len()) {
            t.phase = TransferPhase::HoldingAll;
            self.claims.set_holding_all(t.actor, true);
        }
    }

    /// Claims the next unresolved second list. Returns true once every second
    /// list is held (phase becomes holding-all).
    pub fn transfer_claim_next_second(&mut self, t: &mut Transfer) -> Result<bool> {
        if t.phase == TransferPhase::HoldingAll {
            return Ok(true);
        }
        let Some(targets) = t.targets.as_ref() else {
            return Err(Error::TransferPhase);
        };
        if t.phase != TransferPhase::ReadingFirst {
            return Err(Error::TransferPhase);
        }
        let next = targets[t.seconds.len()];
        if let Some(tok) = self.acquire_step(next, t.actor)? {
            t.seconds.push(tok);
        }
        self.enter_holding_all_if_done(t);
        Ok(t.phase == TransferPhase::HoldingAll)
    }

    pub fn transfer_release_first(&mut self, t: &mut Transfer) -> Result<()> {
        if t.phase != TransferPhase::HoldingAll {
            return Err(Error::TransferPhase);
        }
        let tok = t.first_token.take().ok_or(Error::TransferPhase)?;
        self.claims.release(&tok, t.actor)?;
        self.claims.set_holding_all(t.actor, false);
        t.phase = TransferPhase::ReleasedFirst;
        Ok(())
    }

    /// Runs `action` under the second-list claims, then releases them.
    pub fn transfer_complete(
        &mut self,
        t: &mut Transfer,
        action: impl FnOnce(&mut Runtime, Option<FactId>, &[ClaimToken]) -> Result<()>,
    ) -> Result<()> {
        if t.phase != TransferPhase::ReleasedFirst {
            return Err(Error::TransferPhase);
        }
        let seconds = core::mem::take(&mut t.seconds);
        let result = action(self, t.message, &seconds);
        for tok in &seconds {
            self.claims.release(tok, t.actor)?;
        }
        t.phase = TransferPhase::Done;
        result
    }

    /// Drops every claim and queued request the transfer holds.
    pub fn transfer_abort(&mut self, t: &mut Transfer) {
        if let Some(tok) = t.first_token.take() {
            let _ = self.claims.release(&tok, t.actor);
        }
        for tok in core::mem::take(&mut t.seconds) {
            let _ = self.claims.release(&tok, t.actor);
        }
        self.claims.cancel(t.first, t.actor);
        if let Some(targets) = &t.targets {
            for l in targets {
                self.claims.cancel(*l, t.actor);
            }
        }
        self.claims.set_holding_all(t.actor, false);
        t.phase = TransferPhase::Aborted;
    }

    /// Whole transfer in one call. Fails with [`Error::Busy`] if any claim
    /// would have to wait; every claim taken so far is dropped on failure.
    pub fn transfer(
        &mut self,
        first: ListId,
        resolve: impl FnOnce(&Runtime, Option<FactId>) -> Vec<ListId>,
        action: impl FnOnce(&mut Runtime, Option<FactId>, &[ClaimToken]) -> Result<()>,
        actor: ActorId,
    ) -> Result<()> {
        let mut t = self.transfer_begin(first, actor)?;
        let r = self.transfer_drive(&mut t, resolve);
        if let Err(e) = r {
            self.transfer_abort(&mut t);
            return Err(e);
        }
        self.transfer_release_first(&mut t)?;
        self.transfer_complete(&mut t, action)
    }

    fn transfer_drive(
        &mut self,
        t: &mut Transfer,
        resolve: impl FnOnce(&Runtime, Option<FactId>) -> Vec<ListId>,
    ) -> Result<()> {
        if !self.transfer_claim_first(t)? {
            return Err(Error::Busy(t.first));
        }
        self.transfer_resolve(t, resolve)?;
        while t.phase != TransferPhase::HoldingAll {
            let next = t.targets().unwrap()[t.seconds.len()];
            if !self.transfer_claim_next_second(t)? {
                return Err(Error::Busy(next));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(mutex: bool) -> ClaimTable {
        let mut t = ClaimTable::new(ClaimPolicy {
            mutual_exclusion: mutex,
            canonical_order: true,
            deadlock_detection: true,
        });
        for i in 0..4 {
            t.register_list(ListId(i));
        }
        t
    }

    const A: ActorId = ActorId(0);
    const B: ActorId = ActorId(1);
    const C: ActorId = ActorId(2);
    const L1: ListId = ListId(1);
    const L2: ListId = ListId(2);

    #[test]
    fn try_claim_busy_while_held() {
        let mut t = table(true);
        let tok = t.try_claim(L1, A).unwrap().unwrap();
        assert!(t.try_claim(L1, B).unwrap().is_none());
        t.release(&tok, A).unwrap();
        assert!(t.try_claim(L1, B).unwrap().is_some());
    }

    #[test]
    fn release_errors() {
        let mut t = table(true);
        let tok = t.try_claim(L1, A).unwrap().unwrap();
        assert_eq!(t.release(&tok, B), Err(Error::NotHolder(B, tok.id)));
        t.release(&tok, A).unwrap();
        assert_eq!(t.release(&tok, A), Err(Error::AlreadyReleased(tok.id)));
        assert!(!t.is_live(&tok));
    }

    #[test]
    fn unknown_list() {
        let mut t = table(true);
        assert_eq!(t.claim(ListId(99), A), Err(Error::UnknownList(ListId(99))));
    }

    #[test]
    fn queued_claims_granted_fifo() {
        let mut t = table(true);
        let tok = match t.claim(L1, A).unwrap() {
            ClaimRequest::Acquired(tok) => tok,
            ClaimRequest::Queued => unreachable!(),
        };
        assert_eq!(t.claim(L1, C).unwrap(), ClaimRequest::Queued);
        assert_eq!(t.claim(L1, B).unwrap(), ClaimRequest::Queued);
        t.release(&tok, A).unwrap();
        assert!(t.take_grant(L1, B).is_none());
        let c = t.take_grant(L1, C).unwrap();
        t.release(&c, C).unwrap();
        assert!(t.take_grant(L1, B).is_some());
    }

    #[test]
    fn wait_graph_edges() {
        let mut t = table(true);
        assert!(t.wait_graph().is_empty());
        let _a1 = t.try_claim(L1, A).unwrap().unwrap();
        let _b2 = t.try_claim(L2, B).unwrap().unwrap();
        assert_eq!(t.claim(L2, A).unwrap(), ClaimRequest::Queued);
        let g = t.wait_graph();
        assert_eq!(g.holds, alloc::vec![(A, L1), (B, L2)]);
        assert_eq!(g.waits, alloc::vec![(A, L2)]);
        assert_eq!(g.edges(), alloc::vec![(A, B)]);
        assert!(g.find_cycle().is_none());
        // B asking for L1 would close the cycle
        assert_eq!(
            t.claim(L1, B),
            Err(Error::DeadlockAverted { actor: B, list: L1 })
        );
        t.raw_enqueue(L1, B);
        let cycle = t.wait_graph().find_cycle().unwrap();
        assert_eq!(cycle.len(), 2);
    }

    #[test]
    fn no_exclusion_when_disabled() {
        let mut t = table(false);
        let a = t.try_claim(L1, A).unwrap();
        let b = t.try_claim(L1, B).unwrap();
        assert!(a.is_some() && b.is_some());
        assert_eq!(t.live_count(), 2);
    }

    #[test]
    fn trace_lines() {
        let mut t = table(true);
        let tok = t.try_claim(L1, A).unwrap().unwrap();
        t.release(&tok, A).unwrap();
        assert_eq!(
            t.trace_text(),
            "1\ta0\tclaim\tL1\n2\ta0\tacquire\tL1\n3\ta0\trelease\tL1\n"
        );
    }
}
