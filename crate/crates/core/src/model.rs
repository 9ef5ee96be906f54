//! Identifiers, class pairs and payload scalars.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use core::fmt;
use core::str::FromStr;

macro_rules! id_type {
    ($(#[$m:meta])* $name:ident, $inner:ty, $prefix:literal) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub $inner);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

id_type!(
    /// Boolean gate identifier. `GateId(0)` is always the root gate `S`.
    GateId, u32, "g"
);
id_type!(
    /// Fact identifier. `FactId(0)` is the root fact gated by `S`.
    FactId, u32, "f"
);
id_type!(ListId, u32, "L");
id_type!(ActorId, u32, "a");
id_type!(TokenId, u64, "t");

impl GateId {
    pub const ROOT: GateId = GateId(0);
}

impl FactId {
    pub const ROOT: FactId = FactId(0);
}

/// Generic/specific class pair labelling every fact and gate.
///
/// The generic part names the kind of test, the specific part its outcome:
/// `(weight_in_grams, 2)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClassPair {
    generic: String,
    specific: String,
}

impl ClassPair {
    /// Panics if either component is empty; use [`ClassPair::try_new`] for
    /// untrusted input.
    pub fn new(generic: impl Into<String>, specific: impl Into<String>) -> Self {
        Self::try_new(generic, specific).expect("class pair components must be non-empty")
    }

    pub fn try_new(generic: impl Into<String>, specific: impl Into<String>) -> Option<Self> {
        let generic = generic.into();
        let specific = specific.into();
        if generic.is_empty() || specific.is_empty() {
            return None;
        }
        Some(Self { generic, specific })
    }

    /// Class with the wildcard specific part `_`.
    pub fn generic_only(generic: impl Into<String>) -> Self {
        Self::new(generic, "_")
    }

    pub fn generic(&self) -> &str {
        &self.generic
    }

    pub fn specific(&self) -> &str {
        &self.specific
    }
}

impl fmt::Display for ClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.generic, self.specific)
    }
}

/// Fixed-point decimal: `units * 10^-scale`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Decimal {
    pub units: i64,
    pub scale: u8,
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}.", self.units);
        }
        let pow = 10i128.pow(u32::from(self.scale));
        let units = i128::from(self.units);
        let sign = if units < 0 { "-" } else { "" };
        let abs = units.abs();
        write!(
            f,
            "{}{}.{:0width$}",
            sign,
            abs / pow,
            abs % pow,
            width = usize::from(self.scale)
        )
    }
}

impl FromStr for Decimal {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        let (whole, frac) = s.split_once('.').ok_or(())?;
        let negative = whole.starts_with('-');
        let digits_whole = whole.strip_prefix('-').unwrap_or(whole);
        if digits_whole.is_empty() && frac.is_empty() {
            return Err(());
        }
        if !digits_whole.bytes().all(|b| b.is_ascii_digit())
            || !frac.bytes().all(|b| b.is_ascii_digit())
            || frac.len() > 18
        {
            return Err(());
        }
        let mut units: i64 = 0;
        for b in digits_whole.bytes().chain(frac.bytes()) {
            units = units
                .checked_mul(10)
                .and_then(|u| u.checked_add(i64::from(b - b'0')))
                .ok_or(())?;
        }
        Ok(Decimal {
            units: if negative { -units } else { units },
            scale: frac.len() as u8,
        })
    }
}

/// Closed set of payload values.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scalar {
    Int(i64),
    Decimal(Decimal),
    Text(String),
    Class(ClassPair),
}

/// Kind tag of a [`Scalar`], used by notations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ScalarKind {
    Int,
    Decimal,
    Text,
    Class,
}

impl Scalar {
    pub fn kind(&self) -> ScalarKind {
        match self {
            Scalar::Int(_) => ScalarKind::Int,
            Scalar::Decimal(_) => ScalarKind::Decimal,
            Scalar::Text(_) => ScalarKind::Text,
            Scalar::Class(_) => ScalarKind::Class,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Scalar::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Scalar::Text(v) => Some(v),
            _ => None,
        }
    }

    /// Parses the textual forms used by scripts and dumps: `42`, `1.50`,
    /// `"quoted text"`, `(generic,specific)` or a bare word (text).
    pub fn parse(s: &str) -> Option<Scalar> {
        if s.is_empty() {
            return None;
        }
        if let Ok(v) = s.parse::<i64>() {
            return Some(Scalar::Int(v));
        }
        if let Ok(d) = s.parse::<Decimal>() {
            return Some(Scalar::Decimal(d));
        }
        if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
            return Some(Scalar::Text(unescape(inner)?));
        }
        if let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) {
            let (g, sp) = inner.split_once(',')?;
            return ClassPair::try_new(g.trim(), sp.trim()).map(Scalar::Class);
        }
        if s.contains(|c: char| c.is_whitespace() || c == '"') {
            return None;
        }
        Some(Scalar::Text(s.to_string()))
    }
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next()? {
                'n' => out.push('\n'),
                't' => out.push('\t'),
                other => out.push(other),
            }
        } else {
            out.push(c);
        }
    }
    Some(out)
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Int(v) => write!(f, "{v}"),
            Scalar::Decimal(d) => write!(f, "{d}"),
            Scalar::Text(t) => {
                f.write_str("\"")?;
                for c in t.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Scalar::Class(c) => write!(f, "{c}"),
        }
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::Int(v)
    }
}

impl From<&str> for Scalar {
    fn from(v: &str) -> Self {
        Scalar::Text(v.to_string())
    }
}

impl From<ClassPair> for Scalar {
    fn from(v: ClassPair) -> Self {
        Scalar::Class(v)
    }
}

impl From<Decimal> for Scalar {
    fn from(v: Decimal) -> Self {
        Scalar::Decimal(v)
    }
}

/// Ordered field map carried by a fact.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Payload(BTreeMap<String, Scalar>);

impl Payload {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<String>, value: impl Into<Scalar>) -> Self {
        self.0.insert(name.into(), value.into());
        self
    }

    pub fn insert(&mut self, name: impl Into<String>, value: impl Into<Scalar>) {
        self.0.insert(name.into(), value.into());
    }

    pub fn get(&self, name: &str) -> Option<&Scalar> {
        self.0.get(name)
    }

    pub fn fields(&self) -> impl Iterator<Item = (&str, &Scalar)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Parses whitespace separated `name=value` pairs.
    pub fn parse_pairs<'a>(pairs: impl IntoIterator<Item = &'a str>) -> Option<Payload> {
        let mut p = Payload::new();
        for pair in pairs {
            let (k, v) = pair.split_once('=')?;
            if k.is_empty() {
                return None;
            }
            p.insert(k, Scalar::parse(v)?);
        }
        Some(p)
    }
}

/// Canonical text: `{a=1, b="x"}` with fields in name order.
impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str("}")
    }
}

impl<K: Into<String>, V: Into<Scalar>> FromIterator<(K, V)> for Payload {
    fn from_iter<T: IntoIterator<Item = (K, V)>>(iter: T) -> Self {
        Payload(iter.into_iter().map(|(k, v)| (k.into(), v.into())).collect())
    }
}
