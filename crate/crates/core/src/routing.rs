//! One committed route per project, freeze semantics and route/evidence
//! coherence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{self, DeclClass, EventPayload, Stamp};
use crate::bundle::ProjectBundle;
use crate::contamination::Site;
use crate::diag::{self, Code, Diagnostic, Diagnostics};
use crate::id::{Identifier, LayerKind, Timestamp};
use crate::layers::AbstractionKind;
use crate::tiering::{self, Tier};

/// Objectives named in the framework. The registry is open: other tags are
/// accepted as written.
pub const SEEDED_OBJECTIVES: [&str; 7] = [
    "comparative",
    "prognostic",
    "descriptive",
    "stability-mapping",
    "associational",
    "measurement-evaluation",
    "predictive",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteStatus {
    Committed,
    Exploratory,
}

impl RouteStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RouteStatus::Committed => "committed",
            RouteStatus::Exploratory => "exploratory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceVerdict {
    Supports,
    Violates,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssumptionEvidence {
    pub unit_ref: Identifier,
    pub verdict: EvidenceVerdict,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteAssumption {
    pub id: Identifier,
    pub text: String,
    pub plausibility: String,
    pub failure_modes: String,
    pub consequences_for_inference: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub evidence: Vec<AssumptionEvidence>,
    /// The author states that no unit can bear on this assumption.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub untestable: bool,
}

impl RouteAssumption {
    pub fn missing_fields(&self) -> Vec<&'static str> {
        [
            ("text", &self.text),
            ("plausibility", &self.plausibility),
            ("failure_modes", &self.failure_modes),
            ("consequences_for_inference", &self.consequences_for_inference),
        ]
        .into_iter()
        .filter(|(_, v)| v.trim().is_empty())
        .map(|(k, _)| k)
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RejectedAlternative {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route_ref: Option<Identifier>,
    pub sketch: String,
    pub rationale: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRevision {
    pub timestamp: Timestamp,
    pub justification: String,
    pub downstream_implications: String,
    pub change: String,
    /// Digest of the route body after this revision.
    #[serde(default)]
    pub body_digest: String,
}

impl RouteRevision {
    pub fn new(timestamp: Timestamp, justification: &str, downstream_implications: &str, change: &str) -> Self {
        RouteRevision {
            timestamp,
            justification: justification.into(),
            downstream_implications: downstream_implications.into(),
            change: change.into(),
            body_digest: String::new(),
        }
    }

    pub fn missing_fields(&self) -> Vec<&'static str> {
        [
            ("justification", &self.justification),
            ("downstream_implications", &self.downstream_implications),
            ("change", &self.change),
        ]
        .into_iter()
        .filter(|(_, v)| v.trim().is_empty())
        .map(|(k, _)| k)
        .collect()
    }
}

/// The editable content of a route; everything a freeze protects.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteBody {
    pub name: String,
    pub construct_ref: Identifier,
    pub objective: String,
    pub assumptions: Vec<RouteAssumption>,
    pub disconfirming_models: Vec<String>,
    pub rejected_alternatives: Vec<RejectedAlternative>,
}

impl RouteBody {
    /// Hex SHA-256 of the body's JSON encoding.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("route bodies serialize");
        Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Route {
    pub id: Identifier,
    pub project_ref: Identifier,
    #[serde(default)]
    pub name: String,
    pub status: RouteStatus,
    pub construct_ref: Identifier,
    pub objective: String,
    #[serde(default)]
    pub assumptions: Vec<RouteAssumption>,
    #[serde(default)]
    pub disconfirming_models: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rejected_alternatives: Vec<RejectedAlternative>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_at: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub revisions: Vec<RouteRevision>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quarantined: bool,
}

impl Route {
    pub fn new(id: Identifier, project_ref: Identifier, status: RouteStatus, body: RouteBody) -> Self {
        let mut r = Route {
            id,
            project_ref,
            name: String::new(),
            status,
            construct_ref: body.construct_ref.clone(),
            objective: String::new(),
            assumptions: vec![],
            disconfirming_models: vec![],
            rejected_alternatives: vec![],
            frozen_at: None,
            frozen_digest: None,
            revisions: vec![],
            quarantined: false,
        };
        r.set_body(body);
        r
    }

    pub fn is_committed(&self) -> bool {
        self.status == RouteStatus::Committed
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen_at.is_some()
    }

    pub fn body(&self) -> RouteBody {
        RouteBody {
            name: self.name.clone(),
            construct_ref: self.construct_ref.clone(),
            objective: self.objective.clone(),
            assumptions: self.assumptions.clone(),
            disconfirming_models: self.disconfirming_models.clone(),
            rejected_alternatives: self.rejected_alternatives.clone(),
        }
    }

    pub fn set_body(&mut self, b: RouteBody) {
        self.name = b.name;
        self.construct_ref = b.construct_ref;
        self.objective = b.objective;
        self.assumptions = b.assumptions;
        self.disconfirming_models = b.disconfirming_models;
        self.rejected_alternatives = b.rejected_alternatives;
    }

    /// The digest a frozen route's body must still have.
    pub fn expected_digest(&self) -> Option<&str> {
        self.revisions.last().map(|r| r.body_digest.as_str()).or(self.frozen_digest.as_deref())
    }

    fn sketch(&self) -> String {
        if self.name.is_empty() {
            format!("{} route on {}", self.objective, self.construct_ref)
        } else {
            format!("{} ({})", self.name, self.objective)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    PrimaryInference,
    Sensitivity,
    Boundary,
    Contextual,
    MeasurementEvaluation,
}

impl Role {
    pub const ALL: [Role; 5] =
        [Role::PrimaryInference, Role::Sensitivity, Role::Boundary, Role::Contextual, Role::MeasurementEvaluation];

    pub fn as_str(self) -> &'static str {
        match self {
            Role::PrimaryInference => "primary_inference",
            Role::Sensitivity => "sensitivity",
            Role::Boundary => "boundary",
            Role::Contextual => "contextual",
            Role::MeasurementEvaluation => "measurement_evaluation",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Role::PrimaryInference => "Primary inference",
            Role::Sensitivity => "Sensitivity",
            Role::Boundary => "Boundary",
            Role::Contextual => "Contextual",
            Role::MeasurementEvaluation => "Measurement evaluation",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceRoleAssignment {
    pub unit_ref: Identifier,
    pub route_ref: Identifier,
    pub role: Role,
}

/// Tier used for coherence: the declared one, else what the table computes.
pub fn unit_tier(u: &tiering::EvidentialUnit) -> Option<Tier> {
    u.effective_tier().or_else(|| tiering::tier_unit(u).ok().map(|d| d.tier))
}

/// Structural checks on a route body for a route declared in `route`'s layer.
fn body_diagnostics(bundle: &ProjectBundle, route: &Identifier, body: &RouteBody) -> Vec<Diagnostic> {
    let path = route.to_string();
    let mut out = Vec::new();
    if body.disconfirming_models.iter().all(|m| m.trim().is_empty()) {
        out.push(Diagnostic::at(Code::NoDisconfirming, &path, "no disconfirming model documented"));
    }
    if body.assumptions.is_empty() {
        out.push(Diagnostic::at(Code::NoAssumptions, &path, "no assumptions declared"));
    }
    let mut seen = BTreeSet::new();
    for a in &body.assumptions {
        let missing = a.missing_fields();
        if !missing.is_empty() {
            out.push(Diagnostic::at(Code::AssumptionIncomplete, a.id.to_string(), format!("missing {}", missing.join(", "))));
        }
        if !seen.insert(&a.id) {
            out.push(Diagnostic::at(Code::DupId, a.id.to_string(), "assumption declared twice"));
        }
    }
    if body.objective.trim().is_empty() {
        out.push(Diagnostic::at(Code::MissingField, &path, "route objective is empty"));
    }
    let layer = route.owner_layer();
    let construct = layer.as_ref().and_then(|l| {
        bundle
            .ancestry(l)
            .into_iter()
            .filter(|a| a.kind == LayerKind::Parent)
            .find_map(|a| a.abstraction(&body.construct_ref))
    });
    match construct {
        Some(a) if a.kind == AbstractionKind::Construct && !a.quarantined => {}
        _ => out.push(Diagnostic::at(
            Code::NotConstruct,
            &path,
            format!("`{}` is not a construct inherited by this layer", body.construct_ref),
        )),
    }
    out
}

fn project_of<'a>(bundle: &'a ProjectBundle, route: &Route) -> Result<&'a crate::bundle::ProjectDecl, Diagnostics> {
    bundle.project(&route.project_ref).ok_or_else(|| {
        Diagnostic::at(Code::UnknownProject, route.id.to_string(), format!("unknown project `{}`", route.project_ref)).into()
    })
}

/// Declare a route. A committed route must be the project's only one;
/// exploratory routes need a rationale for not being chosen, which is kept
/// among the committed route's rejected alternatives.
pub fn declare_route(bundle: &mut ProjectBundle, route: Route, rationale: &str, stamp: &Stamp) -> Result<(), Diagnostics> {
    let project = project_of(bundle, &route)?;
    let path = route.id.to_string();
    let mut diags = Vec::new();
    if route.id.owner_layer() != project.layer() || route.id.namespace != crate::id::Namespace::Child {
        diags.push(Diagnostic::at(Code::Namespace, &path, format!("route must be declared in the layer of `{}`", project.id)));
    }
    if crate::bundle::refs::declared_ids(bundle).contains_key(&route.id) {
        diags.push(Diagnostic::at(Code::DupId, &path, format!("`{}` is already declared", route.id)));
    }
    if route.is_frozen() || !route.revisions.is_empty() {
        diags.push(Diagnostic::at(Code::AlreadyFrozen, &path, "a route is declared unfrozen"));
    }
    diags.extend(body_diagnostics(bundle, &route.id, &route.body()));
    let committed = bundle.committed_route(&project.id);
    match route.status {
        RouteStatus::Committed => {
            if let Some(c) = committed {
                diags.push(Diagnostic::at(
                    Code::SecondRoute,
                    &path,
                    format!("project `{}` already committed to `{}`", project.id, c.id),
                ));
            }
        }
        RouteStatus::Exploratory => {
            if rationale.trim().is_empty() {
                diags.push(Diagnostic::at(Code::MissingField, &path, "an exploratory route needs a rationale"));
            }
            if committed.is_some_and(|c| c.is_frozen()) {
                diags.push(Diagnostic::at(
                    Code::SilentRevision,
                    &path,
                    "the committed route is frozen; record the alternative through a revision",
                ));
            }
        }
    }
    diag::check(diags)?;

    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::RouteDeclared {
            route: route.id.clone(),
            project: route.project_ref.clone(),
            status: route.status,
            body_digest: route.body().digest(),
        },
        vec![route.id.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    let project_id = route.project_ref.clone();
    let mut route = route;
    match route.status {
        RouteStatus::Committed => {
            let pending = std::mem::take(&mut bundle.project_mut(&project_id).expect("checked").pending_alternatives);
            route.rejected_alternatives.extend(pending);
        }
        RouteStatus::Exploratory => {
            let alt = RejectedAlternative {
                route_ref: Some(route.id.clone()),
                sketch: route.sketch(),
                rationale: rationale.to_string(),
            };
            let committed_id = bundle.committed_route(&project_id).map(|c| c.id.clone());
            match committed_id {
                Some(c) => bundle.route_mut(&c).expect("exists").rejected_alternatives.push(alt),
                None => bundle.project_mut(&project_id).expect("checked").pending_alternatives.push(alt),
            }
        }
    }
    bundle.routes.push(route);
    bundle.events.push(event);
    Ok(())
}

/// Replace the body of an unfrozen route.
pub fn edit_route(bundle: &mut ProjectBundle, route: &Identifier, body: RouteBody, stamp: &Stamp) -> Result<(), Diagnostics> {
    let r = live_route(bundle, route)?;
    if r.is_frozen() {
        return Err(Diagnostic::at(Code::SilentRevision, route.to_string(), "frozen routes change only through revisions").into());
    }
    diag::check(body_diagnostics(bundle, route, &body))?;
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::RouteDeclared {
            route: route.clone(),
            project: r.project_ref.clone(),
            status: r.status,
            body_digest: body.digest(),
        },
        vec![route.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    bundle.route_mut(route).expect("checked").set_body(body);
    bundle.events.push(event);
    Ok(())
}

fn live_route<'a>(bundle: &'a ProjectBundle, id: &Identifier) -> Result<&'a Route, Diagnostics> {
    bundle
        .route(id)
        .filter(|r| !r.quarantined)
        .ok_or_else(|| Diagnostic::at(Code::UnknownRoute, id.to_string(), format!("no route `{id}`")).into())
}

/// Give a tiered unit its single role.
pub fn assign_role(
    bundle: &mut ProjectBundle,
    unit: &Identifier,
    route: &Identifier,
    role: Role,
    stamp: &Stamp,
) -> Result<(), Diagnostics> {
    let path = unit.to_string();
    let u = bundle
        .unit(unit)
        .filter(|u| u.is_active())
        .ok_or_else(|| Diagnostic::at(Code::UnknownUnit, &path, format!("no active unit `{unit}`")))?;
    let tier = u
        .effective_tier()
        .ok_or_else(|| Diagnostic::at(Code::UnknownUnit, &path, "declare the unit's tier before assigning a role"))?;
    let r = live_route(bundle, route)?;
    let project = bundle
        .project(&u.project_ref)
        .ok_or_else(|| Diagnostic::at(Code::UnknownProject, &path, format!("unknown project `{}`", u.project_ref)))?;
    let mut diags = Vec::new();
    if r.project_ref != u.project_ref {
        diags.push(Diagnostic::at(Code::RouteProject, &path, format!("`{route}` belongs to another project")));
    }
    if project.assignment_for(unit).is_some() {
        diags.push(Diagnostic::at(Code::DupAssignment, &path, "unit already holds a role"));
    }
    diags.extend(role_diagnostics(&path, tier, role, r.is_committed()));
    diag::check(diags)?;
    let assignment = EvidenceRoleAssignment { unit_ref: unit.clone(), route_ref: route.clone(), role };
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::DeclarationAdded {
            site: Site::Decl(unit.clone()),
            class: DeclClass::Assignment,
            record: serde_json::to_value(&assignment).expect("serializes"),
        },
        vec![unit.clone(), route.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    let pid = project.id.clone();
    bundle.project_mut(&pid).expect("checked").assignments.push(assignment);
    bundle.events.push(event);
    Ok(())
}

fn role_diagnostics(path: &str, tier: Tier, role: Role, on_committed: bool) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    match tier {
        Tier::Excluded => out.push(Diagnostic::at(Code::ExcludedAssigned, path, "excluded units hold no role")),
        Tier::Supplement if role == Role::PrimaryInference => {
            out.push(Diagnostic::at(Code::SupplementPrimary, path, "supplement units may not carry primary inference"))
        }
        Tier::Core if role != Role::PrimaryInference || !on_committed => out.push(Diagnostic::at(
            Code::CoreOffRoute,
            path,
            "core units carry primary inference on the committed route",
        )),
        _ => {
            if role == Role::PrimaryInference && !on_committed {
                out.push(Diagnostic::at(Code::CoreOffRoute, path, "primary inference happens only on the committed route"));
            }
        }
    }
    out
}

/// Coherence between the committed route and the tiered evidence of a project.
pub fn check_route_coherence(bundle: &ProjectBundle, project: &Identifier) -> Vec<Diagnostic> {
    coherence_with(bundle, project, None)
}

/// Coherence with the committed route's body optionally replaced.
fn coherence_with(bundle: &ProjectBundle, project: &Identifier, body: Option<&RouteBody>) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let Some(p) = bundle.project(project) else {
        out.push(Diagnostic::at(Code::UnknownProject, project.to_string(), format!("unknown project `{project}`")));
        return out;
    };
    let Some(committed) = bundle.committed_route(project) else {
        out.push(Diagnostic::at(Code::NoCommittedRoute, project.to_string(), "no committed route"));
        return out;
    };
    let units: BTreeMap<&Identifier, Tier> = bundle
        .active_units(project)
        .into_iter()
        .filter_map(|u| unit_tier(u).map(|t| (&u.study_id, t)))
        .collect();

    let mut counts: BTreeMap<&Identifier, usize> = BTreeMap::new();
    for a in &p.assignments {
        let Some(u) = bundle.unit(&a.unit_ref) else { continue };
        if !u.is_active() {
            continue;
        }
        let path = a.unit_ref.to_string();
        *counts.entry(&a.unit_ref).or_default() += 1;
        if u.project_ref != *project {
            out.push(Diagnostic::at(Code::RouteProject, &path, format!("unit belongs to `{}`", u.project_ref)));
            continue;
        }
        match bundle.route(&a.route_ref).filter(|r| !r.quarantined) {
            None => out.push(Diagnostic::at(Code::UnknownRoute, &path, format!("no route `{}`", a.route_ref))),
            Some(r) if r.project_ref != *project => {
                out.push(Diagnostic::at(Code::RouteProject, &path, format!("`{}` belongs to another project", r.id)))
            }
            Some(r) => {
                if let Some(&t) = units.get(&a.unit_ref) {
                    out.extend(role_diagnostics(&path, t, a.role, r.is_committed()));
                }
            }
        }
    }
    for (unit, n) in counts {
        if n > 1 {
            out.push(Diagnostic::at(Code::DupAssignment, unit.to_string(), format!("{n} role assignments")));
        }
    }
    for (unit, tier) in &units {
        if p.assignment_for(unit).is_none() {
            let path = unit.to_string();
            match tier {
                Tier::Core => out.push(Diagnostic::at(Code::CoreOffRoute, &path, "core unit has no primary inference assignment")),
                Tier::Supplement => out.push(Diagnostic::at(Code::Unassigned, &path, "supplement unit has no role")),
                Tier::Excluded => {}
            }
        }
    }
    let assumptions = body.map_or(&committed.assumptions, |b| &b.assumptions);
    for a in assumptions {
        let path = a.id.to_string();
        let live: Vec<&AssumptionEvidence> = a.evidence.iter().filter(|e| units.contains_key(&e.unit_ref)).collect();
        if live.is_empty() && !a.untestable {
            out.push(Diagnostic::at(Code::AssumptionUntested, &path, "no unit bears on this assumption"));
        }
        for e in live {
            if e.verdict == EvidenceVerdict::Violates && units.get(&e.unit_ref) == Some(&Tier::Core) {
                out.push(Diagnostic::at(Code::AssumptionViolated, &path, format!("core unit `{}` contradicts it", e.unit_ref)));
            }
        }
    }
    out
}

fn incoherent(route: &Identifier, diags: Vec<Diagnostic>) -> Diagnostics {
    let mut all = vec![Diagnostic::at(Code::Incoherent, route.to_string(), format!("{} coherence finding(s)", diags.len()))];
    all.extend(diags);
    Diagnostics(all)
}

/// Freeze the committed route of a project.
pub fn freeze_route(bundle: &mut ProjectBundle, project: &Identifier, stamp: &Stamp) -> Result<Identifier, Diagnostics> {
    let committed = bundle.committed_route(project).ok_or_else(|| {
        Diagnostic::at(Code::NoCommittedRoute, project.to_string(), format!("`{project}` has no committed route"))
    })?;
    let id = committed.id.clone();
    if committed.is_frozen() {
        return Err(Diagnostic::at(Code::AlreadyFrozen, id.to_string(), "route is already frozen").into());
    }
    let coherence = check_route_coherence(bundle, project);
    if !coherence.is_empty() {
        return Err(incoherent(&id, coherence));
    }
    let digest = committed.body().digest();
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::RouteFrozen { route: id.clone(), body_digest: digest.clone() },
        vec![id.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    let r = bundle.route_mut(&id).expect("checked");
    r.frozen_at = Some(stamp.timestamp.clone());
    r.frozen_digest = Some(digest);
    bundle.events.push(event);
    Ok(id)
}

/// Replace the body of a frozen route under a complete revision record.
pub fn revise_route(
    bundle: &mut ProjectBundle,
    route: &Identifier,
    mut revision: RouteRevision,
    body: RouteBody,
    stamp: &Stamp,
) -> Result<(), Diagnostics> {
    let r = live_route(bundle, route)?;
    let path = route.to_string();
    if !r.is_frozen() {
        return Err(Diagnostic::at(Code::NotFrozen, &path, "route is not frozen; edit it directly").into());
    }
    let mut diags = Vec::new();
    let missing = revision.missing_fields();
    if !missing.is_empty() {
        diags.push(Diagnostic::at(Code::SilentRevision, &path, format!("incomplete revision: {}", missing.join(", "))));
    }
    if r.revisions.last().is_some_and(|l| revision.timestamp < l.timestamp)
        || r.frozen_at.as_ref().is_some_and(|f| &revision.timestamp < f)
    {
        diags.push(Diagnostic::at(Code::EventOrder, &path, "revision predates the route's last change"));
    }
    diags.extend(body_diagnostics(bundle, route, &body));
    diag::check(diags)?;
    if r.is_committed() {
        let coherence = coherence_with(bundle, &r.project_ref, Some(&body));
        if !coherence.is_empty() {
            return Err(incoherent(route, coherence));
        }
    }
    revision.body_digest = body.digest();
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::RouteRevised { route: route.clone(), revision: revision.clone() },
        vec![route.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    let r = bundle.route_mut(route).expect("checked");
    r.set_body(body);
    r.revisions.push(revision);
    bundle.events.push(event);
    Ok(())
}

/// Everything routing-related a compliant project must satisfy: route
/// structure, coherence, freeze integrity and documented alternatives.
pub fn route_compliance(bundle: &ProjectBundle, project: &Identifier) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let committed: Vec<&Route> = bundle.routes_of(project).filter(|r| r.is_committed()).collect();
    if committed.len() > 1 {
        for r in &committed[1..] {
            out.push(Diagnostic::at(Code::SecondRoute, r.id.to_string(), format!("`{project}` has several committed routes")));
        }
    }
    for r in bundle.routes_of(project) {
        let path = r.id.to_string();
        out.extend(body_diagnostics(bundle, &r.id, &r.body()));
        if r.is_frozen() {
            match r.expected_digest() {
                Some(d) if d == r.body().digest() => {}
                _ => out.push(Diagnostic::at(Code::SilentRevision, &path, "frozen route differs from its last recorded body")),
            }
        } else if !r.revisions.is_empty() {
            out.push(Diagnostic::at(Code::SilentRevision, &path, "revisions recorded on an unfrozen route"));
        }
        for (i, rev) in r.revisions.iter().enumerate() {
            let missing = rev.missing_fields();
            if !missing.is_empty() {
                out.push(Diagnostic::at(
                    Code::SilentRevision,
                    format!("{path}.revisions[{i}]"),
                    format!("incomplete revision: {}", missing.join(", ")),
                ));
            }
        }
    }
    if committed.len() == 1 {
        let c = committed[0];
        out.extend(check_route_coherence(bundle, project));
        if !c.is_frozen() {
            out.push(Diagnostic::at(Code::RouteNotFrozen, c.id.to_string(), "committed route is not frozen"));
        }
        for r in bundle.routes_of(project).filter(|r| !r.is_committed()) {
            if !c.rejected_alternatives.iter().any(|a| a.route_ref.as_ref() == Some(&r.id)) {
                out.push(Diagnostic::at(
                    Code::AlternativeUndocumented,
                    r.id.to_string(),
                    format!("not listed among `{}`'s rejected alternatives", c.id),
                ));
            }
        }
    } else if committed.is_empty() {
        out.push(Diagnostic::at(Code::NoCommittedRoute, project.to_string(), "no committed route"));
    }
    out
}
