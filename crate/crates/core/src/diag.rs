//! Diagnostics with stable codes.
//!
//! Every check in the engine reports through [`Diagnostic`]. Codes are stable
//! strings meant for CI consumption; [`Code::explain`] returns the governing
//! rule text printed by `recap explain`.

use std::fmt;

use serde::{Deserialize, Serialize};

/// How serious a finding is. Ordering puts the most severe first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Upward contamination: lower-layer content reaching a higher layer.
    Critical,
    Error,
    Warning,
}

impl Severity {
    pub fn is_error(self) -> bool {
        matches!(self, Severity::Critical | Severity::Error)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Severity::Critical => "critical",
            Severity::Error => "error",
            Severity::Warning => "warning",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

macro_rules! codes {
    ($( $variant:ident => $text:literal, $sev:ident, $summary:literal, $governs:literal; )*) => {
        /// Stable diagnostic code.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        #[allow(non_camel_case_types)]
        pub enum Code {
            $( $variant, )*
        }

        impl Code {
            pub const ALL: &'static [Code] = &[ $( Code::$variant, )* ];

            pub fn as_str(self) -> &'static str {
                match self { $( Code::$variant => $text, )* }
            }

            pub fn default_severity(self) -> Severity {
                match self { $( Code::$variant => Severity::$sev, )* }
            }

            /// One-line description of what the code means.
            pub fn summary(self) -> &'static str {
                match self { $( Code::$variant => $summary, )* }
            }

            /// The framework rule the code enforces.
            pub fn governs(self) -> &'static str {
                match self { $( Code::$variant => $governs, )* }
            }

            pub fn parse(s: &str) -> Option<Code> {
                match s { $( $text => Some(Code::$variant), )* _ => None }
            }
        }
    };
}

codes! {
    // bundle format
    Syntax => "E_SYNTAX", Error, "the document is malformed or does not match the bundle schema", "bundle format";
    UnresolvedRef => "E_UNRESOLVED_REF", Error, "an identifier reference does not resolve to any declaration", "bundle format: every reference resolves";
    DupId => "E_DUP_ID", Error, "an identifier is declared more than once", "bundle format: identifiers are unique";
    NoGrandparent => "E_NO_GRANDPARENT", Error, "the bundle must declare exactly one grandparent layer", "layer architecture: one grandparent";
    Namespace => "E_NAMESPACE", Error, "an identifier's namespace does not match the layer that declares it", "layer architecture: ownership is explicit";
    UnknownKey => "W_UNKNOWN_KEY", Warning, "unknown top-level key ignored", "bundle format: forward compatibility";
    // layer registry
    UnknownLayer => "E_UNKNOWN_LAYER", Error, "no layer with this id", "layer architecture";
    NotChild => "E_NOT_CHILD", Error, "the layer is not a child layer", "layer architecture: constraints resolve for project modules";
    LayerTree => "E_LAYER_TREE", Error, "layers do not form a grandparent -> parent -> child tree", "layer architecture: three non-interchangeable layers";
    LayerContent => "E_LAYER_CONTENT", Error, "laws belong to the grandparent and abstractions to parents only", "layer architecture: each layer holds its own kind of content";
    Correspondence => "E_CORRESPONDENCE", Error, "a measurement correspondence must map a measurement class to a construct of the same parent", "parent layer: measurement correspondence rules";
    CoreMissing => "E_CORE_MISSING", Error, "a protected grandparent law is missing", "versioning: protected laws are permanent";
    LawRescinded => "E_LAW_RESCINDED", Error, "a grandparent law was removed", "versioning: laws can be expanded but not rescinded";
    LawRewritten => "E_LAW_REWRITTEN", Error, "a grandparent law's text was changed", "versioning: laws can be expanded but not rescinded";
    CoreTouched => "E_CORE_TOUCHED", Error, "a protected grandparent law was altered", "versioning: anti-reification, one-route, construct/measurement separation and downward insulation may not be modified";
    ChangelogIncomplete => "E_CHANGELOG_INCOMPLETE", Error, "a version changelog must state the motivating insight, the boundary affected and the generalizability reasoning", "versioning: transparency of change";
    UpwardContent => "E_UPWARD_CONTENT", Error, "project or domain identifiers appear in grandparent-level content", "contamination: no upward content flow";
    BadVersion => "E_BAD_VERSION", Error, "a version string is malformed", "versioning: v<major>.<minor>";
    VersionOrder => "E_VERSION_ORDER", Error, "the new version must be strictly greater than the old one", "versioning";
    StaleVersion => "E_STALE_VERSION", Error, "the changelog does not start from the current grandparent version", "versioning";
    VersionMismatch => "E_VERSION_MISMATCH", Error, "recap_version differs from the grandparent version", "versioning: the grandparent determines the system version";
    // tiering
    MustSplit => "E_MUST_SPLIT", Error, "a splittable unit with several interpretations must be split before tiering", "ambiguity: split the unit when possible";
    TierMismatch => "E_TIER_MISMATCH", Error, "the declared tier differs from the tier the assessments determine", "tiering algorithm: fixed, non-circumventable sequence";
    NoJustification => "E_NO_JUSTIFICATION", Error, "a tier was declared without justification", "tiering: document justification";
    NotSplittable => "E_NOT_SPLITTABLE", Error, "the unit is not declared splittable", "ambiguity: split the unit when possible";
    NameArity => "E_NAME_ARITY", Error, "split names must be unique and match the number of interpretations", "ambiguity: split the unit when possible";
    SilentRetier => "E_SILENT_RETIER", Error, "a tier changed without a complete re-tiering record", "re-tiering: silent modification is prohibited";
    StaleOldTier => "E_STALE_OLD_TIER", Error, "the re-tiering record's old tier is not the unit's current tier", "re-tiering";
    NoInterpretation => "E_NO_INTERPRETATION", Error, "an evidential unit needs at least one interpretation", "tiering: evidential units";
    AssumptionCovers => "E_ASSUMPTION_COVERS", Error, "a declared assumption must cover at least one dimension", "ambiguity: explicit assumptions";
    UnknownUnit => "E_UNKNOWN_UNIT", Error, "no active unit with this id", "tiering";
    // routing
    SecondRoute => "E_SECOND_ROUTE", Error, "a project may commit to only one route", "one-route principle";
    NoDisconfirming => "E_NO_DISCONFIRMING", Error, "a route needs at least one disconfirming model", "routing: document disconfirming models";
    NoAssumptions => "E_NO_ASSUMPTIONS", Error, "a route needs at least one explicit assumption", "routing: specify assumptions";
    AssumptionIncomplete => "E_ASSUMPTION_INCOMPLETE", Error, "a route assumption needs plausibility, failure modes and consequences", "route assumptions: explicit list";
    AlreadyFrozen => "E_ALREADY_FROZEN", Error, "the route is already frozen", "routing: freeze";
    Incoherent => "E_INCOHERENT", Error, "the route is not coherent with the tiered evidence", "routing: check coherence";
    SilentRevision => "E_SILENT_REVISION", Error, "a frozen route changed without a complete revision record", "routing: revisions require justification and timestamps";
    NotFrozen => "E_NOT_FROZEN", Error, "the route is not frozen; edit it directly instead of revising", "routing";
    CoreOffRoute => "E_CORE_OFF_ROUTE", Error, "a core unit must serve primary inference on the committed route", "routing: core units carry primary inference";
    SupplementPrimary => "E_SUPPLEMENT_PRIMARY", Error, "a supplement unit may not serve primary inference", "Supplement evidence is never promoted into the inferential surface";
    ExcludedAssigned => "E_EXCLUDED_ASSIGNED", Error, "an excluded unit may not hold a role", "excluded units are documented but non-inferential";
    Unassigned => "E_UNASSIGNED", Error, "a supplement unit has no role assignment", "routing: supplement units take a declared role";
    AssumptionUntested => "E_ASSUMPTION_UNTESTED", Error, "a route assumption cites no evidence and is not marked untestable", "routing";
    AssumptionViolated => "E_ASSUMPTION_VIOLATED", Error, "a core unit contradicts a route assumption", "routing: the route must be revised";
    NoCommittedRoute => "E_NO_COMMITTED_ROUTE", Error, "the project has not committed to a route", "one-route principle: the declaration must always be made";
    DupAssignment => "E_DUP_ASSIGNMENT", Error, "a unit may hold only one role assignment", "no study may take multiple routes";
    UnknownProject => "E_UNKNOWN_PROJECT", Error, "no project with this id", "routing";
    UnknownRoute => "E_UNKNOWN_ROUTE", Error, "no route with this id", "routing";
    RouteProject => "E_ROUTE_PROJECT", Error, "a route or assignment crosses project boundaries", "child isolation";
    NotConstruct => "E_NOT_CONSTRUCT", Error, "a route's target must be a construct abstraction", "routing: define the target construct";
    RouteNotFrozen => "W_ROUTE_NOT_FROZEN", Warning, "the committed route has not been frozen", "routing";
    AlternativeUndocumented => "W_ALTERNATIVE_UNDOCUMENTED", Warning, "an exploratory route is not listed among the rejected alternatives", "routing transparency: alternatives considered";
    // contamination
    R1UpwardContent => "R1_upward_content", Critical, "lower-layer content reached a higher layer", "contamination: no upward content flow";
    R2DownwardRewrite => "R2_downward_rewrite", Error, "a lower layer redefines an inherited law or abstraction", "contamination: no downward rewriting of laws";
    R3HorizontalBorrowing => "R3_horizontal_borrowing", Error, "content moved between sibling layers without a boundary contract", "contamination: no horizontal assumption borrowing";
    R4MissingContract => "R4_missing_contract", Error, "a transfer cites a contract that does not authorize it", "contamination: explicit boundary contracts";
    R5MetaEngineInsulation => "R5_meta_engine_insulation", Critical, "insight reached the grandparent without valid abstraction", "contamination: the grandparent only receives validated abstractions";
    DomainTerm => "E_DOMAIN_TERM", Error, "an insight references domain or project identifiers", "contamination: insight independent of measurement, dataset and domain";
    ForeignVocab => "E_FOREIGN_VOCAB", Error, "an insight uses terms outside the receiving layer's vocabulary", "contamination: expressible in the receiving layer's vocabulary";
    RewriteAttempt => "E_REWRITE_ATTEMPT", Error, "an insight edits or deletes existing content", "insight transmission: refine, never rewrite";
    InsightHop => "E_INSIGHT_HOP", Error, "insight must move exactly one layer upward", "insight transmission";
    EffectLayer => "E_EFFECT_LAYER", Error, "the proposed addition does not fit the receiving layer", "insight transmission";
    Undocumented => "E_UNDOCUMENTED", Error, "a contamination event lacks mandatory documentation", "violation documentation is mandatory";
    InsightRejected => "E_INSIGHT_REJECTED", Error, "the extracted insight failed transmission checks", "contamination: insight transmission";
    ActionInapplicable => "E_ACTION_INAPPLICABLE", Error, "the corrective action cannot be applied to this site", "contamination detection: quarantine or reverse";
    UnknownContamination => "E_UNKNOWN_CONTAMINATION", Error, "no unresolved contamination event with this id", "contamination detection";
    UnresolvedContamination => "E_UNRESOLVED_CONTAMINATION", Error, "a flagged contamination event has not been resolved", "enforcement: violations exit the framework";
    ContractIncomplete => "E_CONTRACT_INCOMPLETE", Error, "a boundary contract lacks a required element", "contamination: required contract elements";
    // reporting
    MissingField => "E_MISSING_FIELD", Error, "a unit lacks a mandatory declared output field", "mandatory outputs";
    BiasUndirected => "E_BIAS_UNDIRECTED", Error, "bias considerations must state a direction of effect", "bias and its directional implications";
    NoStudyLog => "E_NO_STUDY_LOG", Error, "the project declares no Study Log content", "Study Log: one row per unit considered";
    NoTierTable => "E_NO_TIER_TABLE", Error, "the project declares no Tier Table content", "Tier Table: alignment backbone";
    RbFindings => "E_RB_FINDINGS", Error, "the Reviewer Block needs two methodological findings", "Reviewer Block: methodological findings";
    RbInsight => "E_RB_INSIGHT", Error, "the Reviewer Block needs a conceptual insight", "Reviewer Block: conceptual insight";
    RbCritique => "E_RB_CRITIQUE", Error, "the Reviewer Block needs an anticipated critique", "Reviewer Block: anticipated critique";
    RbCritiqueUnanchored => "E_RB_CRITIQUE_UNANCHORED", Error, "the critique must reference tiering or routing decisions", "Reviewer Block: anticipated critique";
    RbDisconfirming => "E_RB_DISCONFIRMING", Error, "the Reviewer Block needs a disconfirming model", "Reviewer Block: disconfirming model";
    RbAssumptions => "E_RB_ASSUMPTIONS", Error, "the Reviewer Block must list exactly the committed route's assumptions", "Reviewer Block: route assumptions";
    NoReviewerBlock => "E_NO_REVIEWER_BLOCK", Error, "the project has no Reviewer Block", "mandatory outputs";
    NoAnalyticMemo => "E_NO_ANALYTIC_MEMO", Error, "the project has no Analytic Memo", "mandatory outputs";
    MemoSection => "E_MEMO_SECTION", Error, "an Analytic Memo section is missing or empty", "Analytic Memo: required narrative";
    FormatUnsupported => "E_FORMAT_UNSUPPORTED", Error, "this artifact cannot be rendered in the requested format", "report rendering";
    EmptyStudyLog => "W_EMPTY_STUDY_LOG", Warning, "the project has no evidential units", "Study Log";
    // audit log
    SequenceGap => "E_SEQUENCE_GAP", Error, "event sequence numbers must increase by exactly one", "auditability";
    EventOrder => "E_EVENT_ORDER", Error, "events must be ordered by timestamp", "auditability";
    PayloadSchema => "E_PAYLOAD_SCHEMA", Error, "an event payload is incomplete for its kind", "auditability";
    ReplayDivergence => "E_REPLAY_DIVERGENCE", Error, "replaying the event log does not reproduce the recorded state", "reconstructability of decisions";
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Code {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Code {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Code::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown code `{s}`")))
    }
}

/// Where a finding applies: a document path, a line, or both.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<usize>,
}

impl Location {
    pub fn path(path: impl Into<String>) -> Self {
        Location { path: path.into(), line: None, column: None }
    }

    pub fn line(line: usize, column: usize) -> Self {
        Location { path: String::new(), line: Some(line), column: Some(column) }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.line, self.path.is_empty()) {
            (Some(l), true) => write!(f, "line {l}:{}", self.column.unwrap_or(0)),
            (Some(l), false) => write!(f, "{} (line {l})", self.path),
            (None, false) => f.write_str(&self.path),
            (None, true) => f.write_str("<bundle>"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: Code,
    pub severity: Severity,
    pub location: Location,
    pub message: String,
}

impl Diagnostic {
    pub fn new(code: Code, location: Location, message: impl Into<String>) -> Self {
        Diagnostic { code, severity: code.default_severity(), location, message: message.into() }
    }

    pub fn at(code: Code, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self::new(code, Location::path(path), message)
    }

    pub fn with_severity(mut self, severity: Severity) -> Self {
        self.severity = severity;
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity.is_error()
    }

    /// Sort key: severity, then location, then code.
    pub fn sort_key(&self) -> (Severity, &Location, Code, &str) {
        (self.severity, &self.location, self.code, &self.message)
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.code, self.location, self.message)
    }
}

/// A non-empty batch of diagnostics returned by a rejected operation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{}", render_list(.0))]
pub struct Diagnostics(pub Vec<Diagnostic>);

fn render_list(list: &[Diagnostic]) -> String {
    list.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("\n")
}

impl Diagnostics {
    pub fn single(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }

    pub fn codes(&self) -> Vec<Code> {
        self.0.iter().map(|d| d.code).collect()
    }

    pub fn has(&self, code: Code) -> bool {
        self.0.iter().any(|d| d.code == code)
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Diagnostic> {
        self.0.iter()
    }

    /// `Ok(())` when empty, otherwise `Err(self)`.
    pub fn into_result(self) -> Result<(), Diagnostics> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(self)
        }
    }
}

impl From<Diagnostic> for Diagnostics {
    fn from(d: Diagnostic) -> Self {
        Diagnostics(vec![d])
    }
}

impl From<Vec<Diagnostic>> for Diagnostics {
    fn from(v: Vec<Diagnostic>) -> Self {
        Diagnostics(v)
    }
}

/// Convert an accumulated list into a result.
pub fn check(list: Vec<Diagnostic>) -> Result<(), Diagnostics> {
    Diagnostics(list).into_result()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn code_strings_round_trip_and_are_unique() {
        let mut seen = std::collections::BTreeSet::new();
        for &c in Code::ALL {
            assert_eq!(Code::parse(c.as_str()), Some(c));
            assert!(seen.insert(c.as_str()), "duplicate {}", c.as_str());
        }
    }

    #[test]
    fn severity_orders_most_severe_first() {
        assert!(Severity::Critical < Severity::Error);
        assert!(Severity::Error < Severity::Warning);
        assert!(!Severity::Warning.is_error());
    }
}
