use crate::model::{ActorId, FactId, GateId, ListId, TokenId};

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Errors raised by runtime operations on a description and its lists.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("unknown fact {0}")]
    UnknownFact(FactId),
    #[error("unknown gate {0}")]
    UnknownGate(GateId),
    #[error("gate {0} is already true")]
    GateAlreadyTrue(GateId),
    #[error("extend needs at least one gate")]
    NoGates,
    #[error("no live claim covers list {0}")]
    NotClaimed(ListId),
    #[error("token {0} is no longer live")]
    StaleToken(TokenId),
    #[error("extending would order {0} and {1} inconsistently")]
    OrderViolation(GateId, GateId),
    #[error("more than {0} paths")]
    LimitExceeded(usize),

    #[error("unknown list {0}")]
    UnknownList(ListId),
    #[error("list {0} is empty")]
    EmptyList(ListId),
    #[error("fact {1} is not an entry of list {0}")]
    UnknownEntry(ListId, FactId),
    #[error("derived append of source index {got} while {expected} is outstanding")]
    OrderDestroyed { expected: u64, got: u64 },
    #[error("member entries are not mutually consistent")]
    InconsistentTuple,
    #[error("unknown consistency group {0}")]
    UnknownGroup(u32),
    #[error("unknown derivation {0}")]
    UnknownDerivation(u32),
    #[error("list {0} no longer admits new readers")]
    SignalEnded(ListId),

    #[error("list {0} is claimed by another actor")]
    Busy(ListId),
    #[error("{0} does not hold token {1}")]
    NotHolder(ActorId, TokenId),
    #[error("token {0} was already released")]
    AlreadyReleased(TokenId),
    #[error("list {0} is not in the registered second-list universe")]
    UnregisteredSecond(ListId),
    #[error("claiming {list} for {actor} would close a wait-for cycle")]
    DeadlockAverted { actor: ActorId, list: ListId },
    #[error("transfer is not in a phase that allows this step")]
    TransferPhase,
    #[error("no transfer universe registered for list {0}")]
    NoUniverse(ListId),

    #[error("fact {0} has been reclaimed")]
    AlreadyReclaimed(FactId),
    #[error("unknown pin {0}")]
    UnknownPin(u64),
    #[error("lifecycle event out of order for {0}")]
    LifecycleOrder(FactId),
    #[error("cursor has no next entry")]
    NoNextEntry,
    #[error("unknown cursor {0}")]
    UnknownCursor(u32),
    #[error("cursors must be registered before the first append to list {0}")]
    LateCursor(ListId),
    #[error("audit requires quiescence: {0} live claims")]
    NotQuiescent(usize),
}
