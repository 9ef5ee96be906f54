//! Runtime for an append-only, boolean-gated description structure.
//!
//! A [`Description`] starts from a single root gate `S` which is true from
//! the start of the run and gates an empty root fact. Facts carry child gates
//! that start false; setting a gate true (an *extend*) makes exactly one new
//! fact accessible. On top of that graph the crate layers:
//!
//! * [`lists`]: time-ordered signal lists with a constant-time latest slot,
//!   hierarchy, annotation/bypass, order-preserving derivation and
//!   consistency groups,
//! * [`claims`]: claim tokens giving one writer per list tip, the
//!   first/second list transfer protocol and a wait-for graph,
//! * [`reclaim`]: connection + user counts with cascade reclamation and a
//!   mark-from-roots audit,
//! * [`scheduler`]: procedures triggered by list appends and interrupts,
//! * [`notation`]: schema declaration, validation and canonical digests,
//! * [`explorer`]: exhaustive or sampled interleaving of small scripts with
//!   anomaly detectors.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod claims;
pub mod error;
pub mod explorer;
pub mod fact_graph;
pub mod lists;
pub mod model;
pub mod notation;
pub mod reclaim;
pub mod runtime;
pub mod scheduler;

pub use claims::{ClaimPolicy, ClaimToken, Transfer, TransferPhase, WaitGraph};
pub use error::{Error, Result};
pub use fact_graph::{Description, Fact, Gate, Path, ReadPolicy, Value};
pub use lists::{CondOutcome, Consistency, Relevance, SignalList};
pub use model::{
    ActorId, ClassPair, Decimal, FactId, GateId, ListId, Payload, Scalar, TokenId,
};
pub use runtime::{Enforcement, Runtime};
