//! Procedures triggered by list appends and interrupts.
//!
//! A procedure is attached to at most one scheduling list; every append to
//! that list queues one invocation with the new entry as its cause. Bodies
//! run in phases: a body returns [`Progress::Yield`] to give up the worker
//! and is resumed later with the phase counter advanced. Several invocations
//! can be in progress at once, up to the worker count, and the policy picks
//! which one steps next.
//!
//! Interrupts queue ahead of everything else, but they never preempt an
//! invocation whose actor is inside the holding-all window of a transfer.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::{ActorId, FactId, ListId, Scalar};
use crate::runtime::Runtime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SchedError {
    #[error("procedure {0} is already declared")]
    DuplicateName(String),
    #[error("unknown list {0}")]
    UnknownList(ListId),
    #[error("no handler for interrupt tag {0}")]
    UnknownTag(String),
    #[error("unknown procedure {0}")]
    UnknownProcedure(String),
    #[error("invocation {0} is not queued or running")]
    NotRunning(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Yield,
    Complete,
}

pub type Body = Arc<dyn Fn(&mut Runtime, &mut InvocationCtx) -> crate::Result<Progress> + Send + Sync>;

#[derive(Clone)]
pub struct ProcedureDecl {
    pub name: String,
    pub params: Vec<String>,
    pub scheduling: Option<ListId>,
    /// Whether two invocations may be in progress at once.
    pub reentrant: bool,
    pub body: Body,
}

impl ProcedureDecl {
    pub fn new(
        name: impl Into<String>,
        body: impl Fn(&mut Runtime, &mut InvocationCtx) -> crate::Result<Progress>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        ProcedureDecl {
            name: name.into(),
            params: Vec::new(),
            scheduling: None,
            reentrant: true,
            body: Arc::new(body),
        }
    }

    pub fn on_list(mut self, list: ListId) -> Self {
        self.scheduling = Some(list);
        self
    }

    pub fn params(mut self, params: &[&str]) -> Self {
        self.params = params.iter().map(|p| String::from(*p)).collect();
        self
    }

    pub fn non_reentrant(mut self) -> Self {
        self.reentrant = false;
        self
    }
}

impl fmt::Debug for ProcedureDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProcedureDecl")
            .field("name", &self.name)
            .field("params", &self.params)
            .field("scheduling", &self.scheduling)
            .field("reentrant", &self.reentrant)
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Cause {
    Entry(ListId, FactId),
    Interrupt(String),
    Initiated(String),
}

impl fmt::Display for Cause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cause::Entry(l, e) => write!(f, "entry {l} {e}"),
            Cause::Interrupt(t) => write!(f, "interrupt {t}"),
            Cause::Initiated(p) => write!(f, "initiated {p}"),
        }
    }
}

/// What a body sees of its own invocation.
#[derive(Debug)]
pub struct InvocationCtx {
    pub id: u64,
    pub phase: u32,
    pub actor: ActorId,
    pub cause: Cause,
    pub args: Vec<Scalar>,
    initiated: Vec<(String, Vec<Scalar>)>,
}

impl InvocationCtx {
    /// Queues `procedure` once this step finishes.
    pub fn initiate(&mut self, procedure: impl Into<String>, args: Vec<Scalar>) {
        self.initiated.push((procedure.into(), args));
    }

    pub fn entry(&self) -> Option<FactId> {
        match self.cause {
            Cause::Entry(_, e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Policy {
    Fifo,
    Seeded(u64),
}

#[derive(Debug, Clone)]
struct Invocation {
    id: u64,
    proc: usize,
    cause: Cause,
    args: Vec<Scalar>,
    actor: Option<ActorId>,
    phase: u32,
    interrupt: bool,
    tick_queued: u64,
    tick_start: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Completed {
    pub id: u64,
    pub procedure: String,
    pub cause: Cause,
    pub tick_queued: u64,
    pub tick_start: u64,
    pub tick_done: u64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RunReport {
    pub completed: Vec<Completed>,
    pub steps: u64,
    pub exhausted: bool,
    /// Interrupt dispatches deferred because the running actor held all its
    /// transfer lists.
    pub deferred_interrupts: u64,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Completed> {
        self.completed.iter().filter(|c| c.error.is_some())
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "tick_queued\ttick_start\ttick_done\tproc\tcause")?;
        for c in &self.completed {
            write!(
                f,
                "{}\t{}\t{}\t{}\t{}",
                c.tick_queued, c.tick_start, c.tick_done, c.procedure, c.cause
            )?;
            if let Some(e) = &c.error {
                write!(f, "\terror: {e}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct Scheduler {
    procs: Vec<ProcedureDecl>,
    by_name: BTreeMap<String, usize>,
    interrupts: BTreeMap<String, (usize, u8)>,
    queue: VecDeque<Invocation>,
    interrupt_queue: Vec<Invocation>,
    active: Vec<Invocation>,
    workers: usize,
    policy: Policy,
    rng: ChaCha8Rng,
    tick: u64,
    next_id: u64,
    report: RunReport,
}

impl fmt::Debug for Scheduler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scheduler")
            .field("procs", &self.procs.len())
            .field("queued", &self.queue.len())
            .field("active", &self.active.len())
            .field("tick", &self.tick)
            .finish()
    }
}

impl Scheduler {
    pub fn new(workers: usize, policy: Policy) -> Self {
        let seed = match policy {
            Policy::Fifo => 0,
            Policy::Seeded(s) => s,
        };
        Scheduler {
            procs: Vec::new(),
            by_name: BTreeMap::new(),
            interrupts: BTreeMap::new(),
            queue: VecDeque::new(),
            interrupt_queue: Vec::new(),
            active: Vec::new(),
            workers: workers.max(1),
            policy,
            rng: ChaCha8Rng::seed_from_u64(seed),
            tick: 0,
            next_id: 0,
            report: RunReport::default(),
        }
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Declares a procedure; a scheduling list starts queuing invocations on
    /// every later append.
    pub fn declare(&mut self, rt: &mut Runtime, decl: ProcedureDecl) -> Result<(), SchedError> {
        if self.by_name.contains_key(&decl.name) {
            return Err(SchedError::DuplicateName(decl.name));
        }
        if let Some(l) = decl.scheduling {
            rt.set_scheduling(l).map_err(|_| SchedError::UnknownList(l))?;
        }
        self.by_name.insert(decl.name.clone(), self.procs.len());
        self.procs.push(decl);
        Ok(())
    }

    /// Binds interrupt `tag` to a declared procedure. Higher priority
    /// dispatches first.
    pub fn on_interrupt(
        &mut self,
        tag: impl Into<String>,
        procedure: &str,
        priority: u8,
    ) -> Result<(), SchedError> {
        let p = self.lookup(procedure)?;
        self.interrupts.insert(tag.into(), (p, priority));
        Ok(())
    }

    fn lookup(&self, name: &str) -> Result<usize, SchedError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| SchedError::UnknownProcedure(String::from(name)))
    }

    fn enqueue(&mut self, proc: usize, cause: Cause, args: Vec<Scalar>, interrupt: bool) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let inv = Invocation {
            id,
            proc,
            cause,
            args,
            actor: None,
            phase: 0,
            interrupt,
            tick_queued: self.tick,
            tick_start: None,
        };
        if interrupt {
            self.interrupt_queue.push(inv);
        } else {
            self.queue.push_back(inv);
        }
        id
    }

    /// Queues an invocation directly.
    pub fn initiate(&mut self, procedure: &str, args: Vec<Scalar>) -> Result<u64, SchedError> {
        let p = self.lookup(procedure)?;
        Ok(self.enqueue(p, Cause::Initiated(String::from("external")), args, false))
    }

    /// Queues `procedure` on behalf of invocation `from`, which must still
    /// be queued or in progress.
    pub fn initiate_from(
        &mut self,
        from: u64,
        procedure: &str,
        args: Vec<Scalar>,
    ) -> Result<u64, SchedError> {
        let by = self
            .active
            .iter()
            .chain(self.queue.iter())
            .chain(self.interrupt_queue.iter())
            .find(|v| v.id == from)
            .map(|v| self.procs[v.proc].name.clone())
            .ok_or(SchedError::NotRunning(from))?;
        let p = self.lookup(procedure)?;
        Ok(self.enqueue(p, Cause::Initiated(by), args, false))
    }

    /// Invocations waiting to start, after picking up new list appends.
    pub fn queued(&mut self, rt: &mut Runtime) -> usize {
        self.collect_triggers(rt);
        self.queue.len() + self.interrupt_queue.len()
    }

    pub fn raise(&mut self, tag: &str) -> Result<u64, SchedError> {
        let (p, _) = *self
            .interrupts
            .get(tag)
            .ok_or_else(|| SchedError::UnknownTag(String::from(tag)))?;
        Ok(self.enqueue(p, Cause::Interrupt(String::from(tag)), Vec::new(), true))
    }

    /// Removes a queued invocation.
    pub fn cancel(&mut self, id: u64) -> Result<(), SchedError> {
        if let Some(i) = self.queue.iter().position(|v| v.id == id) {
            self.queue.remove(i);
            return Ok(());
        }
        if let Some(i) = self.interrupt_queue.iter().position(|v| v.id == id) {
            self.interrupt_queue.remove(i);
            return Ok(());
        }
        Err(SchedError::NotRunning(id))
    }

    pub fn is_quiescent(&self) -> bool {
        self.queue.is_empty() && self.interrupt_queue.is_empty() && self.active.is_empty()
    }

    fn collect_triggers(&mut self, rt: &mut Runtime) {
        for (list, entry) in rt.take_triggers() {
            let matching: Vec<usize> = (0..self.procs.len())
                .filter(|&p| self.procs[p].scheduling == Some(list))
                .collect();
            for p in matching {
                self.enqueue(p, Cause::Entry(list, entry), Vec::new(), false);
            }
        }
    }

    fn proc_active(&self, proc: usize) -> bool {
        self.active.iter().any(|v| v.proc == proc)
    }

    /// Chooses the next invocation to step, moving it out of its queue.
    fn pick(&mut self, rt: &Runtime) -> Option<Invocation> {
        if !self.interrupt_queue.is_empty() {
            let pinned = self
                .active
                .iter()
                .any(|v| v.actor.is_some_and(|a| rt.claims.in_holding_all(a)));
            if pinned {
                self.report.deferred_interrupts += 1;
            } else {
                let best = (0..self.interrupt_queue.len())
                    .max_by_key(|&i| {
                        let v = &self.interrupt_queue[i];
                        (self.interrupts_priority(v), core::cmp::Reverse(v.id))
                    })
                    .unwrap();
                return Some(self.interrupt_queue.remove(best));
            }
        }
        let mut candidates: Vec<(bool, usize)> = (0..self.active.len()).map(|i| (true, i)).collect();
        if self.active.len() < self.workers {
            // oldest startable queued invocation
            if let Some(i) = self
                .queue
                .iter()
                .position(|v| self.procs[v.proc].reentrant || !self.proc_active(v.proc))
            {
                candidates.push((false, i));
            }
        }
        if candidates.is_empty() {
            return None;
        }
        let choice = match self.policy {
            Policy::Fifo => *candidates
                .iter()
                .min_by_key(|(active, i)| {
                    if *active {
                        self.active[*i].id
                    } else {
                        self.queue[*i].id
                    }
                })
                .unwrap(),
            Policy::Seeded(_) => {
                candidates[(self.rng.next_u64() % candidates.len() as u64) as usize]
            }
        };
        Some(match choice {
            (true, i) => self.active.remove(i),
            (false, i) => self.queue.remove(i).unwrap(),
        })
    }

    fn interrupts_priority(&self, v: &Invocation) -> u8 {
        match &v.cause {
            Cause::Interrupt(t) => self.interrupts.get(t).map_or(0, |p| p.1),
            _ => 0,
        }
    }

    /// Steps one invocation phase. Returns false when nothing can run.
    pub fn step(&mut self, rt: &mut Runtime) -> bool {
        self.collect_triggers(rt);
        let Some(mut inv) = self.pick(rt) else {
            return false;
        };
        self.tick += 1;
        self.report.steps += 1;
        let actor = *inv.actor.get_or_insert_with(|| rt.new_actor());
        inv.tick_start.get_or_insert(self.tick);
        let mut ctx = InvocationCtx {
            id: inv.id,
            phase: inv.phase,
            actor,
            cause: inv.cause.clone(),
            args: inv.args.clone(),
            initiated: Vec::new(),
        };
        let body = self.procs[inv.proc].body.clone();
        let result = body(rt, &mut ctx);
        for (name, args) in ctx.initiated {
            let by = self.procs[inv.proc].name.clone();
            match self.lookup(&name) {
                Ok(p) => {
                    self.enqueue(p, Cause::Initiated(by), args, false);
                }
                Err(e) => self.report.completed.push(Completed {
                    id: inv.id,
                    procedure: name,
                    cause: Cause::Initiated(by),
                    tick_queued: self.tick,
                    tick_start: self.tick,
                    tick_done: self.tick,
                    error: Some(format!("{e}")),
                }),
            }
        }
        match result {
            Ok(Progress::Yield) => {
                inv.phase += 1;
                if inv.interrupt {
                    // an interrupt keeps the worker until it completes
                    self.interrupt_queue.insert(0, inv);
                } else {
                    self.active.push(inv);
                }
            }
            Ok(Progress::Complete) => self.finish(rt, inv, actor, None),
            Err(e) => self.finish(rt, inv, actor, Some(format!("{e}"))),
        }
        self.collect_triggers(rt);
        true
    }

    fn finish(&mut self, rt: &mut Runtime, inv: Invocation, actor: ActorId, error: Option<String>) {
        // anything the body left behind is released with the invocation
        let leftover: Vec<_> = rt.claims.live_tokens().filter(|t| t.holder == actor).cloned().collect();
        for t in leftover {
            let _ = rt.release(&t, actor);
        }
        rt.unpin_all(actor);
        self.report.completed.push(Completed {
            id: inv.id,
            procedure: self.procs[inv.proc].name.clone(),
            cause: inv.cause,
            tick_queued: inv.tick_queued,
            tick_start: inv.tick_start.unwrap_or(self.tick),
            tick_done: self.tick,
            error,
        });
    }

    /// Runs until nothing is queued or active, or `budget` steps have run.
    pub fn run_until_quiescent(&mut self, rt: &mut Runtime, budget: u64) -> RunReport {
        let start = self.report.steps;
        loop {
            if self.report.steps - start >= budget {
                self.collect_triggers(rt);
                self.report.exhausted = !self.is_quiescent();
                break;
            }
            if !self.step(rt) {
                self.report.exhausted = false;
                break;
            }
        }
        self.report.clone()
    }

    pub fn report(&self) -> &RunReport {
        &self.report
    }

    pub fn procedures(&self) -> impl Iterator<Item = &ProcedureDecl> {
        self.procs.iter()
    }

    /// Summary of declared procedures, one per line.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for p in &self.procs {
            let list = p.scheduling.map_or_else(|| String::from("-"), |l| format!("{l}"));
            let _ = writeln!(out, "{}\t{}\t{}", p.name, list, p.params.join(","));
        }
        out
    }
}
