//! Checking recorded key-value transaction histories against Read Committed,
//! Read Atomic and Causal Consistency.

pub mod checkers;
pub mod cli;
pub mod consistency;
pub mod generators;
pub mod graph;
pub mod io;
pub mod model;
pub mod oracle;
pub mod render;

pub use checkers::{check, check_with, CheckOptions, IsolationLevel, Verdict, Violation};
pub use consistency::{check_read_consistency, ReadViolation, ReadViolationKind};
pub use io::{parse_history, serialize_history, ParseError, ParseReason};
pub use model::{History, HistoryBuilder, Key, OpId, OpKind, SessionId, TxnId, TxnRef, TxnStatus};
