//! Identifiers, layer ids, timestamps and version strings.
//!
//! An identifier's namespace records which layer owns the declaration:
//! `gp:<name>`, `parent:<owner>:<name>` or `child:<owner>:<name>`. Provenance
//! is therefore decidable from the identifier alone, which is what the
//! contamination scanner relies on.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

const NAME: &str = r"[A-Za-z0-9_](?:[A-Za-z0-9_.\-]*[A-Za-z0-9_])?";
const OWNER: &str = r"[A-Za-z0-9_\-]+";

static NAME_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("^{NAME}$")).unwrap());
static OWNER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(&format!("^{OWNER}$")).unwrap());
static TEXT_REF_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(r"\b(?:gp:{NAME}|(?:parent|child):{OWNER}:{NAME})")).unwrap()
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Namespace {
    Gp,
    Parent,
    Child,
    /// A bare local name. Only present between decoding and resolution;
    /// the parser qualifies every such reference against its declaring layer.
    Unqualified,
}

impl Namespace {
    pub fn prefix(self) -> &'static str {
        match self {
            Namespace::Gp => "gp",
            Namespace::Parent => "parent",
            Namespace::Child => "child",
            Namespace::Unqualified => "",
        }
    }

    /// The namespace used by declarations of a layer kind.
    pub fn of_kind(kind: LayerKind) -> Namespace {
        match kind {
            LayerKind::Grandparent => Namespace::Gp,
            LayerKind::Parent => Namespace::Parent,
            LayerKind::Child => Namespace::Child,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Grandparent,
    Parent,
    Child,
}

impl LayerKind {
    /// Height in the hierarchy: child 0, parent 1, grandparent 2.
    pub fn level(self) -> u8 {
        match self {
            LayerKind::Child => 0,
            LayerKind::Parent => 1,
            LayerKind::Grandparent => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Grandparent => "grandparent",
            LayerKind::Parent => "parent",
            LayerKind::Child => "child",
        }
    }
}

impl fmt::Display for LayerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, thiserror::Error)]
pub enum IdError {
    #[error("invalid identifier `{0}`")]
    Identifier(String),
    #[error("invalid layer id `{0}`")]
    Layer(String),
    #[error("invalid timestamp `{0}` (expected YYYY-MM-DDTHH:MM:SSZ)")]
    Timestamp(String),
    #[error("invalid version `{0}` (expected <prefix><major>.<minor>, e.g. v1.0)")]
    Version(String),
}

/// Layer ids are plain names (`G`, `P`, `C1`).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LayerId(String);

impl LayerId {
    pub fn new(s: impl Into<String>) -> Result<Self, IdError> {
        let s = s.into();
        if OWNER_RE.is_match(&s) {
            Ok(LayerId(s))
        } else {
            Err(IdError::Layer(s))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LayerId {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LayerId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Identifier {
    pub namespace: Namespace,
    /// Owning layer; empty for `gp` and unqualified names.
    pub owner: String,
    pub local_name: String,
}

impl Identifier {
    pub fn gp(name: &str) -> Self {
        Self::build(Namespace::Gp, "", name)
    }

    pub fn parent(owner: &str, name: &str) -> Self {
        Self::build(Namespace::Parent, owner, name)
    }

    pub fn child(owner: &str, name: &str) -> Self {
        Self::build(Namespace::Child, owner, name)
    }

    fn build(namespace: Namespace, owner: &str, name: &str) -> Self {
        assert!(NAME_RE.is_match(name), "invalid local name `{name}`");
        Identifier { namespace, owner: owner.to_string(), local_name: name.to_string() }
    }

    /// Identifier in the namespace of a layer of the given kind.
    pub fn in_layer(kind: LayerKind, layer: &LayerId, name: &str) -> Self {
        match kind {
            LayerKind::Grandparent => Self::gp(name),
            LayerKind::Parent => Self::parent(layer.as_str(), name),
            LayerKind::Child => Self::child(layer.as_str(), name),
        }
    }

    pub fn is_qualified(&self) -> bool {
        self.namespace != Namespace::Unqualified
    }

    /// Qualify a bare name against its declaring layer. Qualified ids are
    /// returned unchanged.
    pub fn qualified_in(&self, kind: LayerKind, layer: &LayerId) -> Identifier {
        if self.is_qualified() {
            self.clone()
        } else {
            Identifier::in_layer(kind, layer, &self.local_name)
        }
    }

    /// The owning layer, when the namespace names one.
    pub fn owner_layer(&self) -> Option<LayerId> {
        match self.namespace {
            Namespace::Parent | Namespace::Child => Some(LayerId(self.owner.clone())),
            _ => None,
        }
    }
}

impl fmt::Display for Identifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.namespace {
            Namespace::Gp => write!(f, "gp:{}", self.local_name),
            Namespace::Parent | Namespace::Child => {
                write!(f, "{}:{}:{}", self.namespace.prefix(), self.owner, self.local_name)
            }
            Namespace::Unqualified => f.write_str(&self.local_name),
        }
    }
}

impl FromStr for Identifier {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdError::Identifier(s.to_string());
        let parts: Vec<&str> = s.split(':').collect();
        let (namespace, owner, name) = match parts.as_slice() {
            [name] => (Namespace::Unqualified, "", *name),
            ["gp", name] => (Namespace::Gp, "", *name),
            ["parent", owner, name] => (Namespace::Parent, *owner, *name),
            ["child", owner, name] => (Namespace::Child, *owner, *name),
            _ => return Err(bad()),
        };
        let owned = matches!(namespace, Namespace::Parent | Namespace::Child);
        if !NAME_RE.is_match(name) || (owned && !OWNER_RE.is_match(owner)) {
            return Err(bad());
        }
        Ok(Identifier { namespace, owner: owner.to_string(), local_name: name.to_string() })
    }
}

/// Qualified identifier references embedded in free text, with byte ranges.
pub fn text_refs(text: &str) -> Vec<(Identifier, std::ops::Range<usize>)> {
    TEXT_REF_RE
        .find_iter(text)
        .filter_map(|m| m.as_str().parse().ok().map(|id| (id, m.range())))
        .collect()
}

/// Remove every textual occurrence of `id` from `text`. Returns whether
/// anything was removed.
pub fn strip_text_ref(text: &mut String, id: &Identifier) -> bool {
    let hits: Vec<_> = text_refs(text).into_iter().filter(|(r, _)| r == id).collect();
    for (_, range) in hits.iter().rev() {
        text.replace_range(range.clone(), "");
    }
    !hits.is_empty()
}

/// ISO-8601 UTC timestamp at second precision (`2024-01-31T12:00:00Z`).
/// The fixed width makes lexicographic order chronological.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Timestamp(String);

impl Timestamp {
    pub fn new(s: impl Into<String>) -> Result<Self, IdError> {
        let s = s.into();
        match chrono::NaiveDateTime::parse_from_str(&s, "%Y-%m-%dT%H:%M:%SZ") {
            Ok(_) if s.len() == 20 => Ok(Timestamp(s)),
            _ => Err(IdError::Timestamp(s)),
        }
    }

    pub fn now() -> Self {
        Timestamp(chrono::Utc::now().format("%Y-%m-%dT%H:%M:%SZ").to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Timestamp {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Timestamp::new(s)
    }
}

/// `<prefix><major>.<minor>`: `v1.0` for the system, `P1.2` for a parent.
/// Versions with different prefixes are incomparable.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Version {
    pub prefix: String,
    pub major: u32,
    pub minor: u32,
}

impl Version {
    pub fn new(prefix: &str, major: u32, minor: u32) -> Self {
        Version { prefix: prefix.to_string(), major, minor }
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        (self.prefix == other.prefix)
            .then(|| (self.major, self.minor).cmp(&(other.major, other.minor)))
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}.{}", self.prefix, self.major, self.minor)
    }
}

impl FromStr for Version {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdError::Version(s.to_string());
        let split = s.find(|c: char| c.is_ascii_digit()).ok_or_else(bad)?;
        let (prefix, rest) = s.split_at(split);
        if !prefix.chars().all(|c| c.is_ascii_alphabetic()) {
            return Err(bad());
        }
        let (major, minor) = rest.split_once('.').ok_or_else(bad)?;
        let num = |p: &str| -> Result<u32, IdError> {
            if p.is_empty() || !p.chars().all(|c| c.is_ascii_digit()) {
                return Err(bad());
            }
            p.parse().map_err(|_| bad())
        };
        Ok(Version { prefix: prefix.to_string(), major: num(major)?, minor: num(minor)? })
    }
}

macro_rules! string_serde {
    ($($ty:ty),*) => {$(
        impl Serialize for $ty {
            fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                s.parse().map_err(serde::de::Error::custom)
            }
        }
    )*};
}

string_serde!(Identifier, LayerId, Timestamp, Version);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rendered_forms() {
        assert_eq!(Identifier::gp("one_route").to_string(), "gp:one_route");
        assert_eq!(Identifier::parent("P", "A").to_string(), "parent:P:A");
        assert_eq!(Identifier::child("C", "S1").to_string(), "child:C:S1");
        assert_eq!("S1".parse::<Identifier>().unwrap().namespace, Namespace::Unqualified);
    }

    #[test]
    fn rejects_malformed_identifiers() {
        for bad in ["", "gp:", "parent:P", "child::x", "other:P:x", "gp:a:b", "child:C:x.", "a b"] {
            assert!(bad.parse::<Identifier>().is_err(), "{bad}");
        }
    }

    #[test]
    fn qualification_only_touches_bare_names() {
        let c = LayerId::new("C").unwrap();
        let bare: Identifier = "S1".parse().unwrap();
        assert_eq!(bare.qualified_in(LayerKind::Child, &c), Identifier::child("C", "S1"));
        let q = Identifier::parent("P", "A");
        assert_eq!(q.qualified_in(LayerKind::Child, &c), q);
    }

    #[test]
    fn text_refs_ignore_sentence_punctuation() {
        let refs = text_refs("m1 (child:C1:m1) redefines parent:P:A. See gp:one_route, too");
        let ids: Vec<String> = refs.iter().map(|(i, _)| i.to_string()).collect();
        assert_eq!(ids, ["child:C1:m1", "parent:P:A", "gp:one_route"]);
    }

    #[test]
    fn strip_removes_all_occurrences() {
        let mut t = "uses child:C2:x and child:C2:x again, keeps child:C2:y".to_string();
        assert!(strip_text_ref(&mut t, &Identifier::child("C2", "x")));
        assert!(text_refs(&t).iter().all(|(i, _)| i.local_name == "y"));
    }

    #[test]
    fn timestamps_are_strict() {
        assert!(Timestamp::new("2024-03-01T10:00:00Z").is_ok());
        for bad in ["2024-03-01", "2024-03-01T10:00:00", "2024-13-01T10:00:00Z", "2024-03-01T10:00:00.5Z"] {
            assert!(Timestamp::new(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn versions_compare_numerically_within_a_prefix() {
        let v = |s: &str| s.parse::<Version>().unwrap();
        assert!(v("v1.10") > v("v1.9"));
        assert!(v("v2.0") > v("v1.99"));
        assert_eq!(v("P1.0").partial_cmp(&v("v1.0")), None);
        assert!("v1".parse::<Version>().is_err());
        assert!("1.0".parse::<Version>().is_ok());
    }

    proptest! {
        #[test]
        fn identifier_display_parses_back(
            ns in 0..3u8,
            owner in "[A-Za-z0-9_-]{1,6}",
            name in "[A-Za-z0-9_]([A-Za-z0-9_.-]{0,6}[A-Za-z0-9_])?",
        ) {
            let id = match ns {
                0 => Identifier::gp(&name),
                1 => Identifier::parent(&owner, &name),
                _ => Identifier::child(&owner, &name),
            };
            prop_assert_eq!(id.to_string().parse::<Identifier>().unwrap(), id.clone());
            let text = format!("see {id}.");
            prop_assert_eq!(text_refs(&text).into_iter().map(|(i, _)| i).collect::<Vec<_>>(), vec![id]);
        }
    }
}
