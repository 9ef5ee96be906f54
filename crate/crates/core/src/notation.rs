//! Notations: declared schemas of list, entry and fact classes, validation
//! of a runtime against them, and canonical digests for truth-set records.
//!
//! Notation text is line oriented:
//!
//! ```text
//! signal trader
//! list store under trader
//! entry store field name:text
//! child product
//! list product under store
//! entry product field sku:text price:decimal
//! annotate closed
//! fact closure under store field reason:text
//! ```
//!
//! `child` and `annotate` apply to the most recent `entry` line. A `fact`
//! line declares a fact class reachable through a plain gate of the named
//! entry class.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::{self, Write as _};

use sha2::{Digest, Sha256};

use crate::model::{ClassPair, FactId, ListId, Payload, ScalarKind};
use crate::runtime::Runtime;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NotationError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("containment cycle through {0}")]
    CyclicContainment(String),
    #[error("child class {0} is not contained where declared")]
    DanglingChildClass(String),
    #[error("description is not a member: {0} violations")]
    NotAMember(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntrySchema {
    pub entry_class: String,
    pub fields: BTreeMap<String, ScalarKind>,
    pub child_list_classes: BTreeSet<String>,
    pub allowed_annotations: BTreeSet<String>,
}

impl EntrySchema {
    fn new(class: &str) -> Self {
        EntrySchema {
            entry_class: class.to_string(),
            fields: BTreeMap::new(),
            child_list_classes: BTreeSet::new(),
            allowed_annotations: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactSchema {
    pub class: String,
    pub parent: String,
    pub fields: BTreeMap<String, ScalarKind>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Notation {
    pub notation_id: String,
    pub signal_class: ClassPair,
    pub list_schemas: BTreeMap<String, EntrySchema>,
    /// List class to parent class (the signal or another list class).
    pub containment: BTreeMap<String, String>,
    pub fact_schemas: BTreeMap<String, FactSchema>,
}

fn parse_kind(s: &str) -> Option<ScalarKind> {
    Some(match s {
        "int" => ScalarKind::Int,
        "decimal" => ScalarKind::Decimal,
        "text" => ScalarKind::Text,
        "class" => ScalarKind::Class,
        _ => return None,
    })
}

fn kind_name(k: ScalarKind) -> &'static str {
    match k {
        ScalarKind::Int => "int",
        ScalarKind::Decimal => "decimal",
        ScalarKind::Text => "text",
        ScalarKind::Class => "class",
    }
}

fn parse_fields(
    words: &[&str],
    line: usize,
) -> Result<BTreeMap<String, ScalarKind>, NotationError> {
    let err = |msg: String| NotationError::Parse { line, msg };
    let mut out = BTreeMap::new();
    for w in words {
        let (name, kind) = w.split_once(':').ok_or_else(|| err(format!("bad field `{w}`")))?;
        let kind = parse_kind(kind).ok_or_else(|| err(format!("unknown kind `{kind}`")))?;
        if name.is_empty() || out.insert(name.to_string(), kind).is_some() {
            return Err(err(format!("bad or duplicate field name `{name}`")));
        }
    }
    Ok(out)
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
}

/// Parses and checks notation text.
pub fn declare_notation(text: &str) -> Result<Notation, NotationError> {
    let mut signal: Option<String> = None;
    let mut schemas: BTreeMap<String, EntrySchema> = BTreeMap::new();
    let mut containment: BTreeMap<String, String> = BTreeMap::new();
    let mut facts: BTreeMap<String, FactSchema> = BTreeMap::new();
    let mut current: Option<String> = None;
    let mut explicit_children: Vec<(usize, String, String)> = Vec::new();
    let mut canonical = String::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let words: Vec<&str> = content.split_whitespace().collect();
        let err = |msg: &str| NotationError::Parse { line, msg: msg.to_string() };
        if let Some(bad) = words.iter().skip(1).find(|w| !w.contains(':') && !is_ident(w)) {
            return Err(err(&format!("bad name `{bad}`")));
        }
        match words[0] {
            "signal" => {
                if words.len() != 2 || signal.is_some() {
                    return Err(err("expected a single `signal <generic>`"));
                }
                signal = Some(words[1].to_string());
            }
            "list" => {
                if words.len() != 4 || words[2] != "under" {
                    return Err(err("expected `list <generic> under <parent>`"));
                }
                if containment.insert(words[1].to_string(), words[3].to_string()).is_some() {
                    return Err(err("list class declared twice"));
                }
                schemas
                    .entry(words[1].to_string())
                    .or_insert_with(|| EntrySchema::new(words[1]));
            }
            "entry" => {
                if words.len() < 2 || (words.len() > 2 && words[2] != "field") {
                    return Err(err("expected `entry <generic> field <name>:<kind>...`"));
                }
                let fields = if words.len() > 2 { parse_fields(&words[3..], line)? } else { BTreeMap::new() };
                let s = schemas
                    .entry(words[1].to_string())
                    .or_insert_with(|| EntrySchema::new(words[1]));
                for (name, kind) in fields {
                    if s.fields.insert(name, kind).is_some() {
                        return Err(err("duplicate field name"));
                    }
                }
                current = Some(words[1].to_string());
            }
            "child" | "annotate" => {
                if words.len() != 2 {
                    return Err(err("expected one class name"));
                }
                let Some(cur) = &current else {
                    return Err(err("no preceding `entry` line"));
                };
                let s = schemas.get_mut(cur).unwrap();
                if words[0] == "child" {
                    s.child_list_classes.insert(words[1].to_string());
                    explicit_children.push((line, cur.clone(), words[1].to_string()));
                } else {
                    s.allowed_annotations.insert(words[1].to_string());
                }
            }
            "fact" => {
                if words.len() < 4 || words[2] != "under" || (words.len() > 4 && words[4] != "field")
                {
                    return Err(err("expected `fact <generic> under <entry> field ...`"));
                }
                let fields = if words.len() > 4 { parse_fields(&words[5..], line)? } else { BTreeMap::new() };
                let schema = FactSchema {
                    class: words[1].to_string(),
                    parent: words[3].to_string(),
                    fields,
                };
                if facts.insert(words[1].to_string(), schema).is_some() {
                    return Err(err("fact class declared twice"));
                }
            }
            other => return Err(err(&format!("unknown directive `{other}`"))),
        }
        canonical.push_str(&words.join(" "));
        canonical.push('\n');
    }

    let signal = signal.ok_or(NotationError::Parse { line: 0, msg: "missing `signal` line".into() })?;
    for list in schemas.keys() {
        if !containment.contains_key(list) {
            return Err(NotationError::DanglingChildClass(list.clone()));
        }
    }
    // containment must lead back to the signal without revisiting a class
    for start in containment.keys() {
        let mut seen = BTreeSet::new();
        let mut cur = start.clone();
        while cur != signal {
            if !seen.insert(cur.clone()) {
                return Err(NotationError::CyclicContainment(start.clone()));
            }
            match containment.get(&cur) {
                Some(p) => cur = p.clone(),
                None => return Err(NotationError::DanglingChildClass(start.clone())),
            }
        }
    }
    for (_, parent, child) in &explicit_children {
        if containment.get(child) != Some(parent) {
            return Err(NotationError::DanglingChildClass(child.clone()));
        }
    }
    for (child, parent) in &containment {
        if let Some(s) = schemas.get_mut(parent) {
            s.child_list_classes.insert(child.clone());
        }
    }
    for f in facts.values() {
        if !schemas.contains_key(&f.parent) && !facts.contains_key(&f.parent) && f.parent != signal {
            return Err(NotationError::DanglingChildClass(f.class.clone()));
        }
    }

    let id = hex::encode(Sha256::digest(canonical.as_bytes()));
    Ok(Notation {
        notation_id: String::from(&id[..16]),
        signal_class: ClassPair::generic_only(signal),
        list_schemas: schemas,
        containment,
        fact_schemas: facts,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub expected: String,
    pub found: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: expected {}, found {}", self.path, self.expected, self.found)
    }
}

fn describe_fields(fields: &BTreeMap<String, ScalarKind>) -> String {
    let parts: Vec<String> = fields.iter().map(|(n, k)| format!("{n}:{}", kind_name(*k))).collect();
    format!("{{{}}}", parts.join(" "))
}

fn check_payload(
    path: &str,
    payload: &Payload,
    fields: &BTreeMap<String, ScalarKind>,
    out: &mut Vec<Violation>,
) {
    for (name, value) in payload.fields() {
        match fields.get(name) {
            None => out.push(Violation {
                path: format!("{path}.{name}"),
                expected: format!("fields {}", describe_fields(fields)),
                found: format!("unknown field {name}"),
            }),
            Some(k) if *k != value.kind() => out.push(Violation {
                path: format!("{path}.{name}"),
                expected: kind_name(*k).to_string(),
                found: kind_name(value.kind()).to_string(),
            }),
            _ => {}
        }
    }
    for name in fields.keys() {
        if payload.get(name).is_none() {
            out.push(Violation {
                path: format!("{path}.{name}"),
                expected: format!("field {name}"),
                found: "missing".to_string(),
            });
        }
    }
}

impl Notation {
    pub fn parse(text: &str) -> Result<Self, NotationError> {
        declare_notation(text)
    }

    /// Every violation of this notation in the resident part of `rt`.
    pub fn validate(&self, rt: &Runtime) -> Vec<Violation> {
        let mut out = Vec::new();
        let desc = rt.description();
        let signal = self.signal_class.generic();
        let root = desc.fact_record(FactId::ROOT).unwrap();
        if root.class.generic() != signal {
            out.push(Violation {
                path: "/".to_string(),
                expected: format!("signal {signal}"),
                found: format!("signal {}", root.class.generic()),
            });
        }
        for list in rt.lists().all() {
            if list.is_orphaned() {
                continue;
            }
            let class = list.entry_class.generic();
            let path = format!("{}:{}", list.id, class);
            let Some(schema) = self.list_schemas.get(class) else {
                out.push(Violation {
                    path,
                    expected: "declared list class".to_string(),
                    found: format!("list class {class}"),
                });
                continue;
            };
            let owner = desc.fact_record(list.owner()).unwrap();
            let parent_class = owner.class.generic();
            let expected_parent = &self.containment[class];
            if parent_class != expected_parent {
                out.push(Violation {
                    path: path.clone(),
                    expected: format!("under {expected_parent}"),
                    found: format!("under {parent_class}"),
                });
            }
            for &e in list.history() {
                let Some(fact) = desc.fact_record(e).filter(|f| !f.reclaimed) else {
                    continue;
                };
                let epath = format!("{path}/{e}");
                check_payload(&epath, &fact.payload, &schema.fields, &mut out);
                if fact.class.generic() != class {
                    out.push(Violation {
                        path: epath.clone(),
                        expected: format!("entry class {class}"),
                        found: format!("entry class {}", fact.class.generic()),
                    });
                }
                if let Some(meta) = rt.entry_meta(e) {
                    for a in &meta.annotations {
                        if !schema.allowed_annotations.contains(a.generic()) {
                            out.push(Violation {
                                path: epath.clone(),
                                expected: "allowed annotation".to_string(),
                                found: format!("annotation {}", a.generic()),
                            });
                        }
                    }
                }
            }
        }
        for fact in desc.facts() {
            if fact.reclaimed || fact.id == FactId::ROOT || rt.entry_meta(fact.id).is_some() {
                continue;
            }
            let path = format!("{}:{}", fact.id, fact.class.generic());
            let Some(schema) = self.fact_schemas.get(fact.class.generic()) else {
                out.push(Violation {
                    path,
                    expected: "declared fact class".to_string(),
                    found: format!("fact class {}", fact.class.generic()),
                });
                continue;
            };
            for g in &fact.gating_gates {
                let owner = desc.gates()[g.index()].owner.and_then(|o| desc.fact_record(o));
                if let Some(owner) = owner {
                    if owner.class.generic() != schema.parent {
                        out.push(Violation {
                            path: path.clone(),
                            expected: format!("under {}", schema.parent),
                            found: format!("under {}", owner.class.generic()),
                        });
                    }
                }
            }
            check_payload(&path, &fact.payload, &schema.fields, &mut out);
        }
        out
    }

    pub fn is_member(&self, rt: &Runtime) -> bool {
        self.validate(rt).is_empty()
    }
}

/// Canonical serialization of the resident description: every fact with its
/// class, payload and open gate classes, then its gated facts sorted by class
/// and relative time, then its lists sorted by class with entries in list
/// order. Absolute times and identifiers do not appear.
pub fn canonical_form(rt: &Runtime) -> String {
    enum Item {
        Fact(FactId),
        List(ListId),
        Text(&'static str),
    }
    let desc = rt.description();
    let mut out = String::new();
    let mut stack = vec![Item::Fact(FactId::ROOT)];
    while let Some(item) = stack.pop() {
        match item {
            Item::Text(t) => out.push_str(t),
            Item::List(l) => {
                let list = rt.list(l).unwrap();
                let _ = write!(out, "[{}", list.entry_class);
                stack.push(Item::Text("]"));
                let entries: Vec<FactId> = list
                    .history()
                    .iter()
                    .copied()
                    .filter(|e| !rt.reclaim_table().is_reclaimed(*e))
                    .collect();
                for e in entries.into_iter().rev() {
                    stack.push(Item::Fact(e));
                }
            }
            Item::Fact(f) => {
                let fact = desc.fact_record(f).unwrap();
                let bypassed = rt.entry_meta(f).is_some_and(|m| m.bypassed);
                let _ = write!(out, "({}{}{}", fact.class, fact.payload, if bypassed { "!" } else { "" });
                if let Some(meta) = rt.entry_meta(f) {
                    for a in &meta.annotations {
                        let _ = write!(out, "@{a}");
                    }
                }
                let mut open: Vec<String> = Vec::new();
                let mut gated: Vec<(ClassPair, u64, FactId)> = Vec::new();
                for g in &fact.child_gates {
                    let gate = &desc.gates()[g.index()];
                    if gate.chain {
                        continue;
                    }
                    match gate.gated {
                        None => open.push(gate.class.to_string()),
                        Some(to) => {
                            let t = desc.fact_record(to).unwrap();
                            if !t.reclaimed {
                                gated.push((t.class.clone(), t.set_time, to));
                            }
                        }
                    }
                }
                open.sort();
                for o in open {
                    let _ = write!(out, "?{o}");
                }
                gated.sort();
                let mut lists: Vec<(ClassPair, ListId)> = rt
                    .lists()
                    .lists_under(f)
                    .iter()
                    .map(|l| (rt.list(*l).unwrap().entry_class.clone(), *l))
                    .collect();
                lists.sort();
                stack.push(Item::Text(")"));
                for (_, l) in lists.into_iter().rev() {
                    stack.push(Item::List(l));
                }
                for (_, _, to) in gated.into_iter().rev() {
                    stack.push(Item::Fact(to));
                }
            }
        }
    }
    out
}

/// SHA-256 hex digest of [`canonical_form`].
pub fn digest(rt: &Runtime) -> String {
    hex::encode(Sha256::digest(canonical_form(rt).as_bytes()))
}

/// Observed members of a notation, recorded by digest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TruthSetRecord {
    pub notation_id: String,
    pub observed: BTreeSet<String>,
}

impl TruthSetRecord {
    pub fn new(notation: &Notation) -> Self {
        TruthSetRecord { notation_id: notation.notation_id.clone(), observed: BTreeSet::new() }
    }

    pub fn record_observation(
        &mut self,
        notation: &Notation,
        rt: &Runtime,
    ) -> Result<String, NotationError> {
        let v = notation.validate(rt);
        if !v.is_empty() {
            return Err(NotationError::NotAMember(v.len()));
        }
        let d = digest(rt);
        self.observed.insert(d.clone());
        Ok(d)
    }

    pub fn in_truth_set(&self, rt: &Runtime) -> bool {
        self.observed.contains(&digest(rt))
    }
}

/// Single-step corruptions of a valid description, each of which a correct
/// validator must report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemaMutation {
    UnknownField,
    WrongKind,
    MissingField,
    MisplacedChildList,
    UndeclaredListClass,
    DisallowedAnnotation,
    UndeclaredFact,
}

impl SchemaMutation {
    pub const ALL: [SchemaMutation; 7] = [
        SchemaMutation::UnknownField,
        SchemaMutation::WrongKind,
        SchemaMutation::MissingField,
        SchemaMutation::MisplacedChildList,
        SchemaMutation::UndeclaredListClass,
        SchemaMutation::DisallowedAnnotation,
        SchemaMutation::UndeclaredFact,
    ];

    /// Applies the mutation to a resident entry of `rt`. Returns false when
    /// the description has nothing the mutation can target.
    pub fn apply(self, rt: &mut Runtime, notation: &Notation) -> bool {
        let target = rt.lists().all().iter().filter(|l| !l.is_orphaned()).find_map(|l| {
            l.history()
                .iter()
                .rev()
                .copied()
                .find(|e| !rt.reclaim_table().is_reclaimed(*e))
                .map(|e| (l.id, e))
        });
        let Some((list, entry)) = target else {
            return false;
        };
        let actor = rt.new_actor();
        let payload = rt.description().fact_record(entry).unwrap().payload.clone();
        let class = rt.list(list).unwrap().entry_class.generic().to_string();
        let schema = notation.list_schemas.get(&class);
        match self {
            SchemaMutation::UnknownField => {
                let mut p = payload;
                p.insert("zz_unknown", 1);
                rt.graph.raw_set_payload(entry, p);
            }
            SchemaMutation::WrongKind | SchemaMutation::MissingField => {
                let Some((name, kind)) = schema.and_then(|s| s.fields.iter().next()) else {
                    return false;
                };
                let mut fields: BTreeMap<String, crate::model::Scalar> =
                    payload.fields().map(|(n, v)| (n.to_string(), v.clone())).collect();
                if self == SchemaMutation::MissingField {
                    fields.remove(name);
                } else {
                    let wrong = if *kind == ScalarKind::Text {
                        crate::model::Scalar::Int(0)
                    } else {
                        crate::model::Scalar::Text("x".into())
                    };
                    fields.insert(name.clone(), wrong);
                }
                rt.graph.raw_set_payload(entry, fields.into_iter().collect());
            }
            SchemaMutation::MisplacedChildList => {
                // a declared list class hung under the wrong parent class
                let Some(other) = notation.containment.iter().find(|(_, p)| **p != class) else {
                    return false;
                };
                let Ok(Some(t)) = rt.claims.try_claim(list, actor) else {
                    return false;
                };
                let ok = rt
                    .create_list(ClassPair::generic_only(other.0.clone()), Some(entry), core::slice::from_ref(&t))
                    .is_ok();
                let _ = rt.release(&t, actor);
                return ok;
            }
            SchemaMutation::UndeclaredListClass => {
                return rt.create_list(ClassPair::generic_only("zz_undeclared"), None, &[]).is_ok();
            }
            SchemaMutation::DisallowedAnnotation => {
                let Ok(Some(t)) = rt.claims.try_claim(list, actor) else {
                    return false;
                };
                let ok = rt
                    .annotate(list, entry, ClassPair::generic_only("zz_marker"), &t)
                    .is_ok();
                let _ = rt.release(&t, actor);
                return ok;
            }
            SchemaMutation::UndeclaredFact => {
                let Ok(Some(t)) = rt.claims.try_claim(list, actor) else {
                    return false;
                };
                let cls = ClassPair::generic_only("zz_fact");
                let ok = rt
                    .add_gate(entry, cls.clone(), core::slice::from_ref(&t))
                    .and_then(|g| rt.extend(&[g], cls, Payload::new(), core::slice::from_ref(&t)))
                    .is_ok();
                let _ = rt.release(&t, actor);
                return ok;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TRADER: &str = "\
# stores open, stock products, record transactions
signal trader
list store under trader
entry store field name:text
child product
annotate closed
list product under store
entry product field sku:text price:decimal
list transaction under product
entry transaction field qty:int
fact closure under store field reason:text
";

    #[test]
    fn trader_forest() {
        let n = declare_notation(TRADER).unwrap();
        assert_eq!(n.signal_class.generic(), "trader");
        assert_eq!(n.containment["transaction"], "product");
        assert_eq!(n.containment["product"], "store");
        assert_eq!(n.containment["store"], "trader");
        assert!(n.list_schemas["product"].child_list_classes.contains("transaction"));
        assert_eq!(n.notation_id.len(), 16);
    }

    #[test]
    fn signal_only() {
        let n = declare_notation("signal s\n").unwrap();
        assert!(n.list_schemas.is_empty());
        assert!(n.validate(&Runtime::with_signal(ClassPair::generic_only("s"), Default::default())).is_empty());
    }

    #[test]
    fn cyclic() {
        let text = "signal s\nlist product under store\nlist store under product\n";
        assert!(matches!(declare_notation(text), Err(NotationError::CyclicContainment(_))));
    }

    #[test]
    fn dangling_child() {
        let text = "signal s\nlist a under s\nentry a\nchild b\n";
        assert_eq!(declare_notation(text), Err(NotationError::DanglingChildClass("b".into())));
        let text = "signal s\nlist a under nowhere\n";
        assert!(matches!(declare_notation(text), Err(NotationError::DanglingChildClass(_))));
    }

    #[test]
    fn parse_errors() {
        for bad in [
            "",
            "signal a b\n",
            "signal s\nlist a over s\n",
            "signal s\nlist a under s\nentry a field x:float\n",
            "signal s\nchild a\n",
            "signal s\nfrobnicate\n",
            "signal s\nlist a under s\nentry a field x:int x:text\n",
        ] {
            assert!(matches!(declare_notation(bad), Err(NotationError::Parse { .. })), "{bad:?}");
        }
    }
}
