//! Append-only event log stored in the bundle, and replay of the state it
//! implies.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::bundle::ProjectBundle;
use crate::contamination::{ContaminationEvent, ContaminationRule, CorrectiveAction, FlowEvent, InsightEffect, Site};
use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::id::{Identifier, Timestamp, Version};
use crate::layers::{ChangelogEntry, LayerDecl, Law};
use crate::routing::{EvidenceRoleAssignment, Role, RouteRevision, RouteStatus};
use crate::tiering::{EvidentialUnit, ReTierEvent, Rule, Tier};

pub const ENGINE_VERSION: &str = concat!("recap-engine ", env!("CARGO_PKG_VERSION"));

/// Who performs a mutation, and when.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stamp {
    pub actor: String,
    pub timestamp: Timestamp,
}

impl Stamp {
    pub fn new(actor: impl Into<String>, timestamp: Timestamp) -> Self {
        Stamp { actor: actor.into(), timestamp }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeclClass {
    Layer,
    Project,
    Unit,
    Assignment,
    Contract,
    ReviewerBlock,
    Memo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case", deny_unknown_fields)]
pub enum EventPayload {
    TierDeclared { unit: Identifier, tier: Tier, rule: Rule, justification: String },
    Retier { unit: Identifier, record: ReTierEvent },
    RouteDeclared { route: Identifier, project: Identifier, status: RouteStatus, body_digest: String },
    RouteFrozen { route: Identifier, body_digest: String },
    RouteRevised { route: Identifier, revision: RouteRevision },
    FlowRecorded { flow: FlowEvent },
    ContaminationFlagged { contamination: ContaminationEvent },
    ContaminationResolved {
        contamination: ContaminationEvent,
        #[serde(default)]
        appended: Option<InsightEffect>,
        #[serde(default)]
        quarantined: Option<Site>,
    },
    VersionBumped { changelog: ChangelogEntry, laws: Vec<Law> },
    UnitSplit { original: Identifier, parts: Vec<Identifier> },
    DeclarationAdded { site: Site, class: DeclClass, record: serde_json::Value },
    DeclarationQuarantined { site: Site },
}

impl EventPayload {
    pub fn kind(&self) -> &'static str {
        match self {
            EventPayload::TierDeclared { .. } => "tier_declared",
            EventPayload::Retier { .. } => "retier",
            EventPayload::RouteDeclared { .. } => "route_declared",
            EventPayload::RouteFrozen { .. } => "route_frozen",
            EventPayload::RouteRevised { .. } => "route_revised",
            EventPayload::FlowRecorded { .. } => "flow_recorded",
            EventPayload::ContaminationFlagged { .. } => "contamination_flagged",
            EventPayload::ContaminationResolved { .. } => "contamination_resolved",
            EventPayload::VersionBumped { .. } => "version_bumped",
            EventPayload::UnitSplit { .. } => "unit_split",
            EventPayload::DeclarationAdded { .. } => "declaration_added",
            EventPayload::DeclarationQuarantined { .. } => "declaration_quarantined",
        }
    }

    /// Kind-specific checks beyond what the types already enforce.
    fn schema_problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let mut missing = |what: &str, fields: Vec<&'static str>| {
            if !fields.is_empty() {
                out.push(format!("{what} is missing {}", fields.join(", ")));
            }
        };
        match self {
            EventPayload::TierDeclared { justification, .. } if justification.trim().is_empty() => {
                missing("tier declaration", vec!["justification"])
            }
            EventPayload::Retier { record, .. } => missing("retier record", record.missing_fields()),
            EventPayload::RouteRevised { revision, .. } => missing("revision", revision.missing_fields()),
            EventPayload::VersionBumped { changelog, .. } => missing("changelog", changelog.missing_fields()),
            EventPayload::ContaminationResolved { contamination, .. } => {
                let mut m = contamination.missing_documentation();
                if contamination.corrective_action.is_none() {
                    m.push("corrective_action");
                }
                missing("resolution", m)
            }
            EventPayload::UnitSplit { parts, .. } if parts.len() < 2 => missing("split", vec!["parts"]),
            EventPayload::DeclarationAdded { class, record, .. } => {
                let ok = match class {
                    DeclClass::Unit => serde_json::from_value::<EvidentialUnit>(record.clone()).is_ok(),
                    DeclClass::Assignment => serde_json::from_value::<EvidenceRoleAssignment>(record.clone()).is_ok(),
                    DeclClass::Layer => serde_json::from_value::<LayerDecl>(record.clone()).is_ok(),
                    _ => record.is_object(),
                };
                if !ok {
                    out.push(format!("record does not decode as {}", serde_json::to_value(class).expect("serializes")));
                }
            }
            _ => {}
        }
        out
    }
}

/// One entry of the log.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditEvent {
    pub sequence: u64,
    pub timestamp: Timestamp,
    pub actor: String,
    pub engine_version: String,
    pub payload: EventPayload,
    pub affected: Vec<Identifier>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEvent {
    sequence: u64,
    timestamp: Timestamp,
    actor: String,
    engine_version: String,
    kind: String,
    payload: serde_json::Value,
    #[serde(default)]
    affected: Vec<Identifier>,
}

impl Serialize for AuditEvent {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let tagged = serde_json::to_value(&self.payload).map_err(serde::ser::Error::custom)?;
        let payload = tagged.get("payload").cloned().unwrap_or(serde_json::Value::Null);
        RawEvent {
            sequence: self.sequence,
            timestamp: self.timestamp.clone(),
            actor: self.actor.clone(),
            engine_version: self.engine_version.clone(),
            kind: self.payload.kind().to_string(),
            payload,
            affected: self.affected.clone(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for AuditEvent {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawEvent::deserialize(d)?;
        let tagged = serde_json::json!({ "kind": raw.kind, "payload": raw.payload });
        let payload = serde_json::from_value(tagged)
            .map_err(|e| serde::de::Error::custom(format!("{} payload: {e}", raw.kind)))?;
        Ok(AuditEvent {
            sequence: raw.sequence,
            timestamp: raw.timestamp,
            actor: raw.actor,
            engine_version: raw.engine_version,
            payload,
            affected: raw.affected,
        })
    }
}

/// The event that would follow the bundle's current log.
pub fn next_event(bundle: &ProjectBundle, stamp: &Stamp, payload: EventPayload, affected: Vec<Identifier>) -> AuditEvent {
    AuditEvent {
        sequence: bundle.last_sequence() + 1,
        timestamp: stamp.timestamp.clone(),
        actor: stamp.actor.clone(),
        engine_version: ENGINE_VERSION.to_string(),
        payload,
        affected,
    }
}

fn event_diagnostics(prev: Option<&AuditEvent>, e: &AuditEvent, index: usize) -> Vec<Diagnostic> {
    let path = format!("events[{index}]");
    let mut out = Vec::new();
    let expected = prev.map_or(1, |p| p.sequence + 1);
    if e.sequence != expected {
        out.push(Diagnostic::at(Code::SequenceGap, &path, format!("sequence {} where {expected} was expected", e.sequence)));
    }
    if let Some(p) = prev {
        if e.timestamp < p.timestamp {
            out.push(Diagnostic::at(Code::EventOrder, &path, format!("{} precedes the previous event at {}", e.timestamp, p.timestamp)));
        }
    }
    if e.actor.trim().is_empty() {
        out.push(Diagnostic::at(Code::PayloadSchema, &path, "event has no actor"));
    }
    if e.engine_version.trim().is_empty() {
        out.push(Diagnostic::at(Code::PayloadSchema, &path, "event has no engine version"));
    }
    for p in e.payload.schema_problems() {
        out.push(Diagnostic::at(Code::PayloadSchema, &path, format!("{}: {p}", e.payload.kind())));
    }
    out
}

/// Check that `event` may follow `log`. Nothing is modified.
pub fn check_append(log: &[AuditEvent], event: &AuditEvent) -> Result<(), Diagnostics> {
    crate::diag::check(event_diagnostics(log.last(), event, log.len()))
}

/// Check a whole log.
pub fn check_log(log: &[AuditEvent]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for (i, e) in log.iter().enumerate() {
        out.extend(event_diagnostics(i.checked_sub(1).map(|j| &log[j]), e, i));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteState {
    pub project: Identifier,
    pub status: RouteStatus,
    /// The digest recorded at freeze time or by the last revision.
    pub recorded_digest: Option<String>,
    pub frozen: bool,
    pub revisions: usize,
}

/// What the log determines about a bundle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedState {
    pub version: Version,
    pub laws: BTreeSet<Identifier>,
    pub abstractions: BTreeSet<Identifier>,
    /// Unit id to project.
    pub units: BTreeMap<Identifier, Identifier>,
    pub superseded: BTreeSet<Identifier>,
    pub effective_tiers: BTreeMap<Identifier, Tier>,
    pub routes: BTreeMap<Identifier, RouteState>,
    pub flows: BTreeSet<String>,
    pub quarantined: BTreeSet<Site>,
    pub resolved_contaminations: BTreeSet<String>,
    pub assignments: BTreeSet<(Identifier, Identifier, Role)>,
}

impl DerivedState {
    /// Read the state straight off the declarations.
    pub fn of(b: &ProjectBundle) -> Self {
        let mut s = DerivedState {
            version: b.recap_version.clone(),
            laws: BTreeSet::new(),
            abstractions: BTreeSet::new(),
            units: BTreeMap::new(),
            superseded: BTreeSet::new(),
            effective_tiers: BTreeMap::new(),
            routes: BTreeMap::new(),
            flows: BTreeSet::new(),
            quarantined: BTreeSet::new(),
            resolved_contaminations: BTreeSet::new(),
            assignments: BTreeSet::new(),
        };
        for layer in &b.layers {
            s.add_layer(layer);
        }
        for u in &b.units {
            s.add_unit(u);
        }
        for r in &b.routes {
            s.routes.insert(
                r.id.clone(),
                RouteState {
                    project: r.project_ref.clone(),
                    status: r.status,
                    recorded_digest: r.expected_digest().map(str::to_string),
                    frozen: r.is_frozen(),
                    revisions: r.revisions.len(),
                },
            );
            if r.quarantined {
                s.quarantined.insert(Site::Decl(r.id.clone()));
            }
        }
        for f in &b.flows {
            s.flows.insert(f.id.clone());
            if f.quarantined {
                s.quarantined.insert(Site::Flow(f.id.clone()));
            }
        }
        for p in &b.projects {
            for a in &p.assignments {
                s.assignments.insert((a.unit_ref.clone(), a.route_ref.clone(), a.role));
            }
        }
        for e in &b.events {
            if let EventPayload::ContaminationResolved { contamination, .. } = &e.payload {
                s.resolved_contaminations.insert(contamination.id.clone());
            }
        }
        s
    }

    fn add_layer(&mut self, layer: &LayerDecl) {
        for l in &layer.laws {
            self.laws.insert(l.id.clone());
            if l.quarantined {
                self.quarantined.insert(Site::Decl(l.id.clone()));
            }
        }
        for a in &layer.abstractions {
            self.abstractions.insert(a.id.clone());
            if a.quarantined {
                self.quarantined.insert(Site::Decl(a.id.clone()));
            }
        }
    }

    fn add_unit(&mut self, u: &EvidentialUnit) {
        self.units.insert(u.study_id.clone(), u.project_ref.clone());
        if !u.superseded_by.is_empty() {
            self.superseded.insert(u.study_id.clone());
        }
        if let Some(t) = u.effective_tier() {
            self.effective_tiers.insert(u.study_id.clone(), t);
        }
        if u.quarantined {
            self.quarantined.insert(Site::Decl(u.study_id.clone()));
        }
    }

    /// Fold one event into the state.
    pub fn apply(&mut self, e: &AuditEvent) {
        match &e.payload {
            EventPayload::TierDeclared { unit, tier, .. } => {
                self.effective_tiers.insert(unit.clone(), *tier);
            }
            EventPayload::Retier { unit, record } => {
                self.effective_tiers.insert(unit.clone(), record.new_tier);
            }
            EventPayload::RouteDeclared { route, project, status, .. } => {
                let entry = self.routes.entry(route.clone()).or_insert_with(|| RouteState {
                    project: project.clone(),
                    status: *status,
                    recorded_digest: None,
                    frozen: false,
                    revisions: 0,
                });
                entry.status = *status;
            }
            EventPayload::RouteFrozen { route, body_digest } => {
                if let Some(r) = self.routes.get_mut(route) {
                    r.frozen = true;
                    r.recorded_digest = Some(body_digest.clone());
                }
            }
            EventPayload::RouteRevised { route, revision } => {
                if let Some(r) = self.routes.get_mut(route) {
                    r.revisions += 1;
                    r.recorded_digest = Some(revision.body_digest.clone());
                }
            }
            EventPayload::FlowRecorded { flow } => {
                self.flows.insert(flow.id.clone());
            }
            EventPayload::ContaminationFlagged { .. } => {}
            EventPayload::ContaminationResolved { contamination, appended, quarantined } => {
                self.resolved_contaminations.insert(contamination.id.clone());
                match appended {
                    Some(InsightEffect::AppendLaw { id, .. }) => {
                        self.laws.insert(id.clone());
                    }
                    Some(InsightEffect::AppendAbstraction { id, .. }) => {
                        self.abstractions.insert(id.clone());
                    }
                    _ => {}
                }
                match quarantined {
                    Some(site) => {
                        self.quarantined.insert(site.clone());
                    }
                    None if contamination.corrective_action.is_some() => self.apply_reversal(contamination),
                    None => {}
                }
            }
            EventPayload::VersionBumped { changelog, laws } => {
                self.version = changelog.to_version.clone();
                self.laws.retain(|id| id.namespace != crate::id::Namespace::Gp);
                self.laws.extend(laws.iter().map(|l| l.id.clone()));
            }
            EventPayload::UnitSplit { original, parts } => {
                self.superseded.insert(original.clone());
                if let Some(project) = self.units.get(original).cloned() {
                    for p in parts {
                        self.units.insert(p.clone(), project.clone());
                    }
                }
            }
            EventPayload::DeclarationAdded { class, record, .. } => match class {
                DeclClass::Unit => {
                    if let Ok(u) = serde_json::from_value::<EvidentialUnit>(record.clone()) {
                        self.add_unit(&u);
                    }
                }
                DeclClass::Assignment => {
                    if let Ok(a) = serde_json::from_value::<EvidenceRoleAssignment>(record.clone()) {
                        self.assignments.insert((a.unit_ref, a.route_ref, a.role));
                    }
                }
                DeclClass::Layer => {
                    if let Ok(l) = serde_json::from_value::<LayerDecl>(record.clone()) {
                        self.add_layer(&l);
                    }
                }
                _ => {}
            },
            EventPayload::DeclarationQuarantined { site } => {
                self.quarantined.insert(site.clone());
            }
        }
    }

    /// A reversal removes a flow, a shadowing declaration, or references
    /// held by a project.
    fn apply_reversal(&mut self, c: &ContaminationEvent) {
        let reversed = matches!(c.corrective_action, Some(CorrectiveAction::Reversed | CorrectiveAction::InsightExtracted));
        if !reversed {
            return;
        }
        match (&c.site, &c.offending_ref) {
            (Site::Flow(f), None) => {
                self.flows.remove(f);
            }
            (Site::Decl(id), Some(_)) if c.rule_violated == ContaminationRule::R2DownwardRewrite => {
                self.laws.remove(id);
                self.abstractions.remove(id);
            }
            (Site::Decl(id), Some(target)) => {
                let units = &self.units;
                self.assignments
                    .retain(|(u, r, _)| !(units.get(u) == Some(id) && (u == target || r == target)));
            }
            _ => {}
        }
    }
}

/// Apply the events that follow `initial`'s log to its derived state.
pub fn replay(initial: &ProjectBundle, events: &[AuditEvent]) -> DerivedState {
    let mut state = DerivedState::of(initial);
    let start = initial.last_sequence();
    for e in events.iter().filter(|e| e.sequence > start) {
        state.apply(e);
    }
    state
}

/// Compare the live state of `current` with a replay of its log over
/// `initial`.
pub fn verify_replay(initial: &ProjectBundle, current: &ProjectBundle) -> Vec<Diagnostic> {
    let replayed = replay(initial, &current.events);
    let live = DerivedState::of(current);
    let mut out = Vec::new();
    let mut cmp = |field: &str, same: bool| {
        if !same {
            out.push(Diagnostic::at(Code::ReplayDivergence, field, format!("replayed {field} differs from the live bundle")));
        }
    };
    cmp("version", replayed.version == live.version);
    cmp("laws", replayed.laws == live.laws);
    cmp("abstractions", replayed.abstractions == live.abstractions);
    cmp("units", replayed.units == live.units);
    cmp("superseded", replayed.superseded == live.superseded);
    cmp("effective_tiers", replayed.effective_tiers == live.effective_tiers);
    cmp("routes", replayed.routes == live.routes);
    cmp("flows", replayed.flows == live.flows);
    cmp("quarantined", replayed.quarantined == live.quarantined);
    cmp("resolved_contaminations", replayed.resolved_contaminations == live.resolved_contaminations);
    cmp("assignments", replayed.assignments == live.assignments);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stamp(t: &str) -> Stamp {
        Stamp::new("tester", Timestamp::new(t).unwrap())
    }

    fn quarantine_event(b: &ProjectBundle, t: &str) -> AuditEvent {
        next_event(b, &stamp(t), EventPayload::DeclarationQuarantined { site: Site::Flow("f1".into()) }, vec![])
    }

    #[test]
    fn sequence_gap_is_rejected() {
        let b = ProjectBundle::minimal("G");
        let mut e = quarantine_event(&b, "2024-01-01T00:00:00Z");
        e.sequence = 3;
        assert!(check_append(&b.events, &e).unwrap_err().has(Code::SequenceGap));
    }

    #[test]
    fn events_round_trip_through_kind_and_payload() {
        let b = ProjectBundle::minimal("G");
        let e = quarantine_event(&b, "2024-01-01T00:00:00Z");
        let v = serde_json::to_value(&e).unwrap();
        assert_eq!(v["kind"], "declaration_quarantined");
        assert_eq!(v["payload"]["site"], "flow(f1)");
        assert_eq!(serde_json::from_value::<AuditEvent>(v).unwrap(), e);
    }

    #[test]
    fn unknown_kind_fails_to_decode() {
        let v = serde_json::json!({
            "sequence": 1, "timestamp": "2024-01-01T00:00:00Z", "actor": "a",
            "engine_version": "x", "kind": "tier_erased", "payload": {}, "affected": []
        });
        assert!(serde_json::from_value::<AuditEvent>(v).is_err());
    }

    #[test]
    fn empty_log_replays_to_initial_state() {
        let b = ProjectBundle::minimal("G");
        assert_eq!(replay(&b, &[]), DerivedState::of(&b));
        assert!(verify_replay(&b, &b).is_empty());
    }

    #[test]
    fn backwards_timestamp_is_out_of_order() {
        let mut b = ProjectBundle::minimal("G");
        let e = quarantine_event(&b, "2024-01-02T00:00:00Z");
        b.events.push(e);
        let e2 = quarantine_event(&b, "2024-01-01T00:00:00Z");
        assert!(check_append(&b.events, &e2).unwrap_err().has(Code::EventOrder));
    }
}
