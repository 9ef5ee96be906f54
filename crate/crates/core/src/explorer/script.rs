//! Script text: setup lines followed by `actor <id>: <op> <args...>` lines.
//!
//! Setup directives build the starting runtime:
//!
//! ```text
//! signal <generic>
//! list <name> [window <n>]
//! entry <list> <field>=<value>...
//! group <name> <member>... equal <field>
//! universe <first> <second>...
//! derivation <name> <source> <target>
//! cursor <name> <list>
//! commit <group>
//! ```
//!
//! Actor operations and the schedule points each expands to:
//!
//! | op | points |
//! |---|---|
//! | `claim L`, `release L`, `read L`, `guard f=v` / `guard f!=v` | 1 |
//! | `append L f=v...` | 1 |
//! | `cond_append L <guard> f=v...` | 2 (claim and read, then guard, append and release) |
//! | `commit G`, `read_group G` | 1 |
//! | `read_direct G` | one per member list |
//! | `transfer F S1 S2... f=v...` | 4 + number of second lists |
//! | `derive D` | 2 (take, put) |
//! | `take C`, `pin_latest L`, `unpin L` | 1 |

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::model::{Payload, Scalar};

use super::ExploreError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cond {
    pub field: String,
    pub equal: bool,
    pub value: Scalar,
}

impl Cond {
    fn parse(s: &str) -> Option<Cond> {
        let (field, equal, value) = if let Some((f, v)) = s.split_once("!=") {
            (f, false, v)
        } else {
            let (f, v) = s.split_once('=')?;
            (f, true, v)
        };
        if field.is_empty() {
            return None;
        }
        Some(Cond { field: field.to_string(), equal, value: Scalar::parse(value)? })
    }

    /// Evaluates against an observed payload; an absent entry or field is
    /// unequal to everything.
    pub fn holds(&self, payload: Option<&Payload>) -> bool {
        let found = payload.and_then(|p| p.get(&self.field));
        (found == Some(&self.value)) == self.equal
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Setup {
    Signal(String),
    List { name: String, window: usize },
    Entry { list: String, payload: Payload },
    Group { name: String, members: Vec<String>, field: String },
    Universe { first: String, seconds: Vec<String> },
    Derivation { name: String, source: String, target: String },
    Cursor { name: String, list: String },
    Commit(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Op {
    Claim(String),
    Release(String),
    Read(String),
    Guard(Cond),
    Append(String, Payload),
    CondAppend(String, Cond, Payload),
    Commit(String),
    ReadGroup(String),
    ReadDirect(String),
    Transfer { first: String, seconds: Vec<String>, payload: Payload },
    Derive(String),
    Take(String),
    PinLatest(String),
    Unpin(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorScript {
    pub name: String,
    pub ops: Vec<Op>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Script {
    pub setup: Vec<Setup>,
    pub actors: Vec<ActorScript>,
}

fn payload(words: &[&str], line: usize) -> Result<Payload, ExploreError> {
    Payload::parse_pairs(words.iter().copied()).ok_or_else(|| ExploreError::Parse {
        line,
        msg: "expected field=value pairs".to_string(),
    })
}

impl Script {
    pub fn parse(text: &str) -> Result<Script, ExploreError> {
        let mut script = Script::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap().trim();
            if content.is_empty() {
                continue;
            }
            let err = |msg: &str| ExploreError::Parse { line, msg: msg.to_string() };
            if let Some(rest) = content.strip_prefix("actor ") {
                let (name, op) = rest.split_once(':').ok_or_else(|| err("expected `actor <id>: <op>`"))?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(err("empty actor id"));
                }
                let words: Vec<&str> = op.split_whitespace().collect();
                let op = parse_op(&words, line)?;
                match script.actors.iter_mut().find(|a| a.name == name) {
                    Some(a) => a.ops.push(op),
                    None => script.actors.push(ActorScript { name: name.to_string(), ops: alloc::vec![op] }),
                }
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            let setup = match (words[0], words.len()) {
                ("signal", 2) => Setup::Signal(words[1].to_string()),
                ("list", 2) => Setup::List { name: words[1].to_string(), window: 1 },
                ("list", 4) if words[2] == "window" => Setup::List {
                    name: words[1].to_string(),
                    window: words[3].parse().map_err(|_| err("bad window"))?,
                },
                ("entry", n) if n >= 2 => Setup::Entry {
                    list: words[1].to_string(),
                    payload: payload(&words[2..], line)?,
                },
                ("group", n) if n >= 5 && words[n - 2] == "equal" => Setup::Group {
                    name: words[1].to_string(),
                    members: words[2..n - 2].iter().map(|w| w.to_string()).collect(),
                    field: words[n - 1].to_string(),
                },
                ("universe", n) if n >= 3 => Setup::Universe {
                    first: words[1].to_string(),
                    seconds: words[2..].iter().map(|w| w.to_string()).collect(),
                },
                ("derivation", 4) => Setup::Derivation {
                    name: words[1].to_string(),
                    source: words[2].to_string(),
                    target: words[3].to_string(),
                },
                ("cursor", 3) => Setup::Cursor { name: words[1].to_string(), list: words[2].to_string() },
                ("commit", 2) => Setup::Commit(words[1].to_string()),
                _ => return Err(err("unrecognized setup line")),
            };
            script.setup.push(setup);
        }
        Ok(script)
    }
}

fn parse_op(words: &[&str], line: usize) -> Result<Op, ExploreError> {
    let err = |msg: &str| ExploreError::Parse { line, msg: msg.to_string() };
    let one = |w: &[&str]| -> Result<String, ExploreError> {
        if w.len() == 2 {
            Ok(w[1].to_string())
        } else {
            Err(err("expected one argument"))
        }
    };
    let Some(&head) = words.first() else {
        return Err(err("missing op"));
    };
    Ok(match head {
        "claim" => Op::Claim(one(words)?),
        "release" => Op::Release(one(words)?),
        "read" => Op::Read(one(words)?),
        "guard" => {
            if words.len() != 2 {
                return Err(err("expected one condition"));
            }
            Op::Guard(Cond::parse(words[1]).ok_or_else(|| err("bad condition"))?)
        }
        "append" if words.len() >= 2 => Op::Append(words[1].to_string(), payload(&words[2..], line)?),
        "cond_append" if words.len() >= 3 => Op::CondAppend(
            words[1].to_string(),
            Cond::parse(words[2]).ok_or_else(|| err("bad condition"))?,
            payload(&words[3..], line)?,
        ),
        "commit" => Op::Commit(one(words)?),
        "read_group" => Op::ReadGroup(one(words)?),
        "read_direct" => Op::ReadDirect(one(words)?),
        "transfer" if words.len() >= 3 => {
            let split = words.iter().position(|w| w.contains('=')).unwrap_or(words.len());
            if split < 3 {
                return Err(err("expected `transfer <first> <second>... field=value...`"));
            }
            Op::Transfer {
                first: words[1].to_string(),
                seconds: words[2..split].iter().map(|w| w.to_string()).collect(),
                payload: payload(&words[split..], line)?,
            }
        }
        "derive" => Op::Derive(one(words)?),
        "take" => Op::Take(one(words)?),
        "pin_latest" => Op::PinLatest(one(words)?),
        "unpin" => Op::Unpin(one(words)?),
        _ => return Err(err("unknown op")),
    })
}
