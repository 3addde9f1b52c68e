//! Text history format.
//!
//! ```text
//! awdit-history v1
//! session 0
//! txn 1 c
//! w x 1
//! r y 3
//! ```
//!
//! Tokens are separated by single spaces; `#` starts a comment line and blank
//! lines are ignored.

use std::fmt;
use std::io::{self, BufRead, Write};

use rustc_hash::FxHashSet;

use crate::model::{BuildErrorKind, History, HistoryBuilder, OpKind, SessionId, TxnRef, TxnStatus};

pub const HEADER: &str = "awdit-history v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ParseReason {
    Syntax,
    DuplicateWrite,
    DuplicateTxnId,
    EmptyTransaction,
}

impl fmt::Display for ParseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseReason::Syntax => "Syntax",
            ParseReason::DuplicateWrite => "DuplicateWrite",
            ParseReason::DuplicateTxnId => "DuplicateTxnId",
            ParseReason::EmptyTransaction => "EmptyTransaction",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {reason}")]
pub struct ParseError {
    /// 1-based.
    pub line: u32,
    pub reason: ParseReason,
}

#[derive(Debug, thiserror::Error)]
pub enum ReadError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub fn parse_history(text: &str) -> Result<History, ParseError> {
    let mut p = Parser::default();
    for (i, line) in text.split('\n').enumerate() {
        p.line(i as u32 + 1, line.as_bytes())?;
    }
    p.finish()
}

pub fn read_history(mut input: impl BufRead) -> Result<History, ReadError> {
    let mut p = Parser::default();
    let mut buf = Vec::new();
    let mut line_no = 0u32;
    loop {
        buf.clear();
        if input.read_until(b'\n', &mut buf)? == 0 {
            break;
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        p.line(line_no, &buf)?;
    }
    Ok(p.finish()?)
}

#[derive(Default)]
struct Parser {
    builder: HistoryBuilder,
    seen_header: bool,
    session_labels: FxHashSet<u64>,
    current_session: Option<SessionId>,
    current_txn: Option<TxnRef>,
}

impl Parser {
    fn line(&mut self, line_no: u32, raw: &[u8]) -> Result<(), ParseError> {
        let syntax = ParseError {
            line: line_no,
            reason: ParseReason::Syntax,
        };
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let Ok(line) = std::str::from_utf8(raw) else {
            return Err(syntax);
        };
        if line.is_empty() || line.starts_with('#') {
            return Ok(());
        }
        if !self.seen_header {
            if line != HEADER {
                return Err(syntax);
            }
            self.seen_header = true;
            return Ok(());
        }

        let mut tokens = line.split(' ');
        let tag = tokens.next().unwrap_or("");
        let a = tokens.next().filter(|t| !t.is_empty()).ok_or(syntax)?;
        let b = tokens.next();
        if tokens.next().is_some() {
            return Err(syntax);
        }

        match tag {
            "session" => {
                let (Ok(label), None) = (a.parse::<u64>(), b) else {
                    return Err(syntax);
                };
                if !self.session_labels.insert(label) {
                    return Err(syntax);
                }
                self.current_session = Some(self.builder.add_session());
                self.current_txn = None;
            }
            "txn" => {
                let Some(session) = self.current_session else {
                    return Err(syntax);
                };
                let Ok(id) = a.parse::<u64>() else {
                    return Err(syntax);
                };
                let status = match b {
                    Some("c") => TxnStatus::Committed,
                    Some("a") => TxnStatus::Aborted,
                    _ => return Err(syntax),
                };
                self.current_txn = Some(self.builder.begin_txn_at(session, id, status, line_no));
            }
            "w" | "r" => {
                let Some(txn) = self.current_txn else {
                    return Err(syntax);
                };
                let Some(Ok(value)) = b.map(str::parse::<u64>) else {
                    return Err(syntax);
                };
                let kind = if tag == "w" { OpKind::Write } else { OpKind::Read };
                self.builder.push_op(txn, kind, a, value, line_no);
            }
            _ => return Err(syntax),
        }
        Ok(())
    }

    fn finish(self) -> Result<History, ParseError> {
        self.builder.build().map_err(|e| ParseError {
            line: e.line,
            reason: match e.kind {
                BuildErrorKind::DuplicateWrite => ParseReason::DuplicateWrite,
                BuildErrorKind::DuplicateTxnId => ParseReason::DuplicateTxnId,
                BuildErrorKind::EmptyTransaction => ParseReason::EmptyTransaction,
            },
        })
    }
}

pub fn write_history(h: &History, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    for (s, txns) in h.sessions().iter().enumerate() {
        writeln!(out, "session {s}")?;
        for t in txns {
            let status = if t.is_committed() { 'c' } else { 'a' };
            writeln!(out, "txn {} {status}", t.id)?;
            for op in &t.ops {
                let tag = if op.is_write() { 'w' } else { 'r' };
                writeln!(out, "{tag} {} {}", h.key_name(op.key), op.value)?;
            }
        }
    }
    Ok(())
}

pub fn serialize_history(h: &History) -> String {
    let mut buf = Vec::new();
    write_history(h, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("keys are valid UTF-8")
}

/// Reads a history from `path`, or from `stdin` when `path` is `-`.
pub fn load(path: &str, stdin: &mut dyn BufRead) -> Result<History, ReadError> {
    if path == "-" {
        read_history(stdin)
    } else {
        let file = std::fs::File::open(path)?;
        read_history(io::BufReader::new(file))
    }
}
