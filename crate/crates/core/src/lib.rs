//! Finite runs-and-systems models of multi-agent knowledge.
//!
//! The crate builds small, fully enumerated systems (sets of runs over
//! global states), derives indistinguishability from local-state equality,
//! and evaluates knowledge, common knowledge, and their fixpoints over
//! them. On top of that sit two classic coordination domains, a pair of
//! game-theoretic models, and a scenario runner with deterministic reports:
//!
//! - [`system`] / [`event`]: points, information sets, events as bitsets
//! - [`epistemics`]: K / E / C operators, knowledge depth, nonfaulty CK
//! - [`engine`]: protocols, contexts, exhaustive run enumeration
//! - [`coord`]: the lossy-messenger coordination problem
//! - [`byzantine`]: a t+1-round full-information agreement protocol under
//!   crash, omission, and Byzantine failures
//! - [`games`]: normal-form / extensive-form coherence, partition models,
//!   and an imperfect-recall example
//! - [`scenario`] / [`runner`] / [`report`]: config files, suites, reports

#![forbid(unsafe_code)]

pub mod byzantine;
pub mod claims;
pub mod coord;
pub mod engine;
pub mod epistemics;
pub mod error;
pub mod event;
pub mod games;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod state;
pub mod system;
pub mod value;

pub use error::{Error, Result};
pub use event::Event;
pub use state::{AgentId, GlobalState, LocalState, Point, Run};
pub use system::System;
pub use value::Value;
