//! The reference graph of a bundle: every declaration and every identifier
//! reference, structured or embedded in text, with the site that holds it.

use std::collections::BTreeMap;

use crate::bundle::ProjectBundle;
use crate::contamination::Site;
use crate::id::{text_refs, Identifier, LayerId, LayerKind, Namespace};
use crate::layers::AbstractionKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DeclKind {
    Law,
    Abstraction(AbstractionKind),
    Project,
    Unit,
    Route,
    RouteAssumption,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclInfo {
    pub kind: DeclKind,
    /// Layer the declaration lives in.
    pub layer: LayerId,
    pub path: String,
    pub quarantined: bool,
}

/// Every identifier declaration in document order, duplicates included.
pub fn declarations(bundle: &ProjectBundle) -> Vec<(Identifier, DeclInfo)> {
    let mut out = Vec::new();
    let mut push = |id: &Identifier, kind, layer: LayerId, path: String, quarantined| {
        out.push((id.clone(), DeclInfo { kind, layer, path, quarantined }));
    };
    for (li, layer) in bundle.layers.iter().enumerate() {
        for (i, law) in layer.laws.iter().enumerate() {
            push(&law.id, DeclKind::Law, layer.id.clone(), format!("layers[{li}].laws[{i}]"), law.quarantined);
        }
        for (i, a) in layer.abstractions.iter().enumerate() {
            push(&a.id, DeclKind::Abstraction(a.kind), layer.id.clone(), format!("layers[{li}].abstractions[{i}]"), a.quarantined);
        }
    }
    let owner = |id: &Identifier| id.owner_layer().unwrap_or_else(|| LayerId::new("_").expect("valid"));
    for (i, p) in bundle.projects.iter().enumerate() {
        push(&p.id, DeclKind::Project, owner(&p.id), format!("projects[{i}]"), false);
    }
    for (i, u) in bundle.units.iter().enumerate() {
        push(&u.study_id, DeclKind::Unit, owner(&u.study_id), format!("units[{i}]"), u.quarantined);
    }
    for (i, r) in bundle.routes.iter().enumerate() {
        push(&r.id, DeclKind::Route, owner(&r.id), format!("routes[{i}]"), r.quarantined);
        for (j, a) in r.assumptions.iter().enumerate() {
            push(&a.id, DeclKind::RouteAssumption, owner(&r.id), format!("routes[{i}].assumptions[{j}]"), r.quarantined);
        }
    }
    out
}

/// Declarations keyed by identifier; the first declaration wins.
pub fn declared_ids(bundle: &ProjectBundle) -> BTreeMap<Identifier, DeclInfo> {
    let mut map = BTreeMap::new();
    for (id, info) in declarations(bundle) {
        map.entry(id).or_insert(info);
    }
    map
}

/// One identifier reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefSite {
    pub site: Site,
    /// Layer of the referring site; `None` for sites outside any layer.
    pub layer: Option<LayerId>,
    pub path: String,
    pub field: &'static str,
    pub target: Identifier,
    pub textual: bool,
    /// False when the referring declaration is quarantined.
    pub active: bool,
}

struct Collector {
    out: Vec<RefSite>,
    site: Site,
    layer: Option<LayerId>,
    path: String,
    active: bool,
}

impl Collector {
    fn at(&mut self, site: Site, layer: Option<LayerId>, path: String, active: bool) {
        self.site = site;
        self.layer = layer;
        self.path = path;
        self.active = active;
    }

    fn id(&mut self, field: &'static str, id: &Identifier) {
        self.out.push(RefSite {
            site: self.site.clone(),
            layer: self.layer.clone(),
            path: format!("{}.{field}", self.path),
            field,
            target: id.clone(),
            textual: false,
            active: self.active,
        });
    }

    fn text(&mut self, field: &'static str, text: &str) {
        for (id, _) in text_refs(text) {
            self.out.push(RefSite {
                site: self.site.clone(),
                layer: self.layer.clone(),
                path: format!("{}.{field}", self.path),
                field,
                target: id,
                textual: true,
                active: self.active,
            });
        }
    }
}

/// Every reference in the bundle except those inside audit events, which
/// record history and may name declarations that no longer exist.
pub fn references(bundle: &ProjectBundle) -> Vec<RefSite> {
    let mut c = Collector {
        out: Vec::new(),
        site: Site::Layer(LayerId::new("_").expect("valid")),
        layer: None,
        path: String::new(),
        active: true,
    };
    for (li, layer) in bundle.layers.iter().enumerate() {
        for (i, law) in layer.laws.iter().enumerate() {
            c.at(Site::Decl(law.id.clone()), Some(layer.id.clone()), format!("layers[{li}].laws[{i}]"), !law.quarantined);
            c.text("text", &law.text);
        }
        for (i, a) in layer.abstractions.iter().enumerate() {
            c.at(Site::Decl(a.id.clone()), Some(layer.id.clone()), format!("layers[{li}].abstractions[{i}]"), !a.quarantined);
            c.text("definition", &a.definition);
            for (m, k) in &a.correspondence {
                c.id("correspondence", m);
                c.id("correspondence", k);
            }
        }
    }
    for (i, p) in bundle.projects.iter().enumerate() {
        c.at(Site::Decl(p.id.clone()), p.layer(), format!("projects[{i}]"), true);
        c.text("question", &p.question);
        for a in &p.assignments {
            c.id("assignments.unit_ref", &a.unit_ref);
            c.id("assignments.route_ref", &a.route_ref);
        }
        for alt in &p.pending_alternatives {
            if let Some(r) = &alt.route_ref {
                c.id("pending_alternatives.route_ref", r);
            }
            c.text("pending_alternatives.sketch", &alt.sketch);
            c.text("pending_alternatives.rationale", &alt.rationale);
        }
    }
    for (i, u) in bundle.units.iter().enumerate() {
        c.at(Site::Decl(u.study_id.clone()), u.study_id.owner_layer(), format!("units[{i}]"), !u.quarantined);
        c.id("project_ref", &u.project_ref);
        c.text("design_type", &u.design_type);
        c.text("tier_justification", &u.tier_justification);
        for a in &u.explicit_assumptions {
            c.text("explicit_assumptions.text", &a.text);
        }
        for e in &u.retier_events {
            c.text("retier_events.source_of_information", &e.source_of_information);
            c.text("retier_events.justification", &e.justification);
            c.text("retier_events.implications_for_route", &e.implications_for_route);
        }
        for m in &u.measurements {
            c.id("measurements.construct_ref", &m.construct_ref);
            if let Some(k) = &m.class_ref {
                c.id("measurements.class_ref", k);
            }
            c.text("measurements.procedure", &m.procedure);
        }
        if let Some(s) = &u.study_log {
            for b in &s.bias_considerations {
                c.text("study_log.bias_considerations", &b.text);
            }
            c.text("study_log.measurement_definition_issues", &s.measurement_definition_issues);
            c.text("study_log.notes", &s.notes);
        }
        if let Some(t) = &u.tier_table {
            c.text("tier_table.methods_summary", &t.methods_summary);
            c.text("tier_table.strengths", &t.strengths);
            c.text("tier_table.limitations", &t.limitations);
        }
        if let Some(s) = &u.split_from {
            c.id("split_from", s);
        }
        for s in &u.superseded_by {
            c.id("superseded_by", s);
        }
    }
    for (i, r) in bundle.routes.iter().enumerate() {
        c.at(Site::Decl(r.id.clone()), r.id.owner_layer(), format!("routes[{i}]"), !r.quarantined);
        c.id("project_ref", &r.project_ref);
        c.id("construct_ref", &r.construct_ref);
        c.text("name", &r.name);
        for a in &r.assumptions {
            for f in [&a.text, &a.plausibility, &a.failure_modes, &a.consequences_for_inference] {
                c.text("assumptions", f);
            }
            for e in &a.evidence {
                c.id("evidence", &e.unit_ref);
            }
        }
        for d in &r.disconfirming_models {
            c.text("disconfirming_models", d);
        }
        for alt in &r.rejected_alternatives {
            if let Some(x) = &alt.route_ref {
                c.id("rejected_alternatives.route_ref", x);
            }
            c.text("rejected_alternatives.sketch", &alt.sketch);
            c.text("rejected_alternatives.rationale", &alt.rationale);
        }
        for rev in &r.revisions {
            for f in [&rev.justification, &rev.downstream_implications, &rev.change] {
                c.text("revisions", f);
            }
        }
    }
    for (i, f) in bundle.flows.iter().enumerate() {
        c.at(Site::Flow(f.id.clone()), Some(f.source_layer.clone()), format!("flows[{i}]"), !f.quarantined);
        c.text("payload", &f.payload);
        if let Some(e) = &f.effect {
            for id in e.identifiers() {
                c.id("effect", id);
            }
            c.text("effect", e.text());
        }
    }
    for (i, b) in bundle.reviewer_blocks.iter().enumerate() {
        c.at(Site::ReviewerBlock(b.project_ref.clone()), b.project_ref.owner_layer(), format!("reviewer_blocks[{i}]"), true);
        c.id("project_ref", &b.project_ref);
        for f in &b.methodological_findings {
            c.text("methodological_findings", f);
        }
        c.text("conceptual_insight", &b.conceptual_insight);
        c.text("anticipated_critique.text", &b.anticipated_critique.text);
        c.text("anticipated_critique.response", &b.anticipated_critique.response);
        for d in &b.anticipated_critique.referenced_decisions {
            c.id("anticipated_critique.referenced_decisions", d);
        }
        c.text("disconfirming_model", &b.disconfirming_model);
        for a in &b.assumptions_ref {
            c.id("assumptions_ref", a);
        }
    }
    for (i, m) in bundle.memos.iter().enumerate() {
        c.at(Site::Memo(m.project_ref.clone()), m.project_ref.owner_layer(), format!("memos[{i}]"), true);
        c.id("project_ref", &m.project_ref);
        for text in m.sections.values() {
            c.text("sections", text);
        }
    }
    c.out
}

/// The layer that owns an identifier, by namespace.
pub fn owner_of(bundle: &ProjectBundle, id: &Identifier) -> Option<LayerId> {
    match id.namespace {
        Namespace::Gp => bundle.grandparent().map(|g| g.id.clone()),
        Namespace::Parent | Namespace::Child => id.owner_layer(),
        Namespace::Unqualified => None,
    }
}

/// Identifiers in `text` from namespaces below `kind`.
pub fn lower_namespace_refs(text: &str, kind: LayerKind) -> Vec<Identifier> {
    text_refs(text)
        .into_iter()
        .map(|(id, _)| id)
        .filter(|id| match id.namespace {
            Namespace::Child => kind != LayerKind::Child,
            Namespace::Parent => kind == LayerKind::Grandparent,
            _ => false,
        })
        .collect()
}
