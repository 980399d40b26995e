//! The project bundle: one JSON document holding every declaration and the
//! audit log of a governed evidence program.

mod parse;
pub mod refs;

use serde::{Deserialize, Serialize};

use crate::audit::{self, AuditEvent, EventPayload, Stamp};
use crate::contamination::{BoundaryContract, FlowEvent, Site};
use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::id::{Identifier, LayerId, LayerKind, Version};
use crate::layers::LayerDecl;
use crate::reporting::{AnalyticMemo, ReviewerBlock};
use crate::routing::{EvidenceRoleAssignment, RejectedAlternative, Route};
use crate::tiering::EvidentialUnit;

pub use parse::{parse_bundle, serialize_bundle, structural_diagnostics, ParsedBundle, TOP_LEVEL_KEYS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectBundle {
    pub recap_version: Version,
    pub layers: Vec<LayerDecl>,
    #[serde(default)]
    pub projects: Vec<ProjectDecl>,
    #[serde(default)]
    pub units: Vec<EvidentialUnit>,
    #[serde(default)]
    pub routes: Vec<Route>,
    #[serde(default)]
    pub flows: Vec<FlowEvent>,
    #[serde(default)]
    pub contracts: Vec<BoundaryContract>,
    #[serde(default)]
    pub events: Vec<AuditEvent>,
    #[serde(default)]
    pub reviewer_blocks: Vec<ReviewerBlock>,
    #[serde(default)]
    pub memos: Vec<AnalyticMemo>,
}

/// A child-layer project: one inferential question, its role assignments,
/// and the alternatives it considered before committing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectDecl {
    pub id: Identifier,
    #[serde(default)]
    pub question: String,
    #[serde(default)]
    pub assignments: Vec<EvidenceRoleAssignment>,
    /// Exploratory routes considered before a route was committed. Moved into
    /// the committed route's `rejected_alternatives` when it is declared.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pending_alternatives: Vec<RejectedAlternative>,
}

impl ProjectDecl {
    pub fn new(id: Identifier, question: impl Into<String>) -> Self {
        ProjectDecl { id, question: question.into(), assignments: vec![], pending_alternatives: vec![] }
    }

    pub fn layer(&self) -> Option<LayerId> {
        self.id.owner_layer()
    }

    pub fn assignment_for(&self, unit: &Identifier) -> Option<&EvidenceRoleAssignment> {
        self.assignments.iter().find(|a| &a.unit_ref == unit)
    }
}

impl ProjectBundle {
    /// A bundle holding only a grandparent layer seeded with the protected laws.
    pub fn minimal(grandparent: &str) -> Self {
        let gp = LayerDecl::grandparent(LayerId::new(grandparent).expect("valid layer id"), Version::new("v", 1, 0));
        ProjectBundle {
            recap_version: gp.version.clone(),
            layers: vec![gp],
            projects: vec![],
            units: vec![],
            routes: vec![],
            flows: vec![],
            contracts: vec![],
            events: vec![],
            reviewer_blocks: vec![],
            memos: vec![],
        }
    }

    pub fn grandparent(&self) -> Option<&LayerDecl> {
        self.layers.iter().find(|l| l.kind == LayerKind::Grandparent)
    }

    pub fn grandparent_mut(&mut self) -> Option<&mut LayerDecl> {
        self.layers.iter_mut().find(|l| l.kind == LayerKind::Grandparent)
    }

    pub fn layer(&self, id: &LayerId) -> Option<&LayerDecl> {
        self.layers.iter().find(|l| &l.id == id)
    }

    pub fn layer_mut(&mut self, id: &LayerId) -> Option<&mut LayerDecl> {
        self.layers.iter_mut().find(|l| &l.id == id)
    }

    pub fn layer_kind(&self, id: &LayerId) -> Option<LayerKind> {
        self.layer(id).map(|l| l.kind)
    }

    /// Layers from `id` up to the root, starting with `id` itself.
    /// Stops on cycles or dangling parents.
    pub fn ancestry(&self, id: &LayerId) -> Vec<&LayerDecl> {
        let mut out: Vec<&LayerDecl> = Vec::new();
        let mut cur = self.layer(id);
        while let Some(layer) = cur {
            if out.iter().any(|l| l.id == layer.id) {
                break;
            }
            out.push(layer);
            cur = layer.parent_ref.as_ref().and_then(|p| self.layer(p));
        }
        out
    }

    pub fn is_ancestor(&self, ancestor: &LayerId, of: &LayerId) -> bool {
        ancestor != of && self.ancestry(of).iter().any(|l| &l.id == ancestor)
    }

    /// Child layers whose ancestry includes `id` (or `id` itself, if a child).
    pub fn child_layers_under(&self, id: &LayerId) -> Vec<&LayerDecl> {
        self.layers
            .iter()
            .filter(|l| l.kind == LayerKind::Child && self.ancestry(&l.id).iter().any(|a| &a.id == id))
            .collect()
    }

    pub fn project(&self, id: &Identifier) -> Option<&ProjectDecl> {
        self.projects.iter().find(|p| &p.id == id)
    }

    pub fn project_mut(&mut self, id: &Identifier) -> Option<&mut ProjectDecl> {
        self.projects.iter_mut().find(|p| &p.id == id)
    }

    pub fn unit(&self, id: &Identifier) -> Option<&EvidentialUnit> {
        self.units.iter().find(|u| &u.study_id == id)
    }

    pub fn unit_mut(&mut self, id: &Identifier) -> Option<&mut EvidentialUnit> {
        self.units.iter_mut().find(|u| &u.study_id == id)
    }

    /// Units of a project that take part in tiering (not quarantined, not
    /// superseded by a split), ordered by study id.
    pub fn active_units(&self, project: &Identifier) -> Vec<&EvidentialUnit> {
        let mut v: Vec<_> = self.units.iter().filter(|u| &u.project_ref == project && u.is_active()).collect();
        v.sort_by(|a, b| a.study_id.cmp(&b.study_id));
        v
    }

    pub fn route(&self, id: &Identifier) -> Option<&Route> {
        self.routes.iter().find(|r| &r.id == id)
    }

    pub fn route_mut(&mut self, id: &Identifier) -> Option<&mut Route> {
        self.routes.iter_mut().find(|r| &r.id == id)
    }

    pub fn routes_of<'a>(&'a self, project: &Identifier) -> impl Iterator<Item = &'a Route> + 'a {
        let project = project.clone();
        self.routes.iter().filter(move |r| r.project_ref == project && !r.quarantined)
    }

    /// The committed route, if exactly one exists.
    pub fn committed_route(&self, project: &Identifier) -> Option<&Route> {
        let mut it = self.routes_of(project).filter(|r| r.is_committed());
        match (it.next(), it.next()) {
            (Some(r), None) => Some(r),
            _ => None,
        }
    }

    pub fn flow(&self, id: &str) -> Option<&FlowEvent> {
        self.flows.iter().find(|f| f.id == id)
    }

    pub fn contract(&self, id: &str) -> Option<&BoundaryContract> {
        self.contracts.iter().find(|c| c.id == id)
    }

    pub fn reviewer_block(&self, project: &Identifier) -> Option<&ReviewerBlock> {
        self.reviewer_blocks.iter().find(|b| &b.project_ref == project)
    }

    pub fn memo(&self, project: &Identifier) -> Option<&AnalyticMemo> {
        self.memos.iter().find(|m| &m.project_ref == project)
    }

    pub fn last_sequence(&self) -> u64 {
        self.events.last().map_or(0, |e| e.sequence)
    }

    /// Look up a route assumption by id across all routes.
    pub fn route_assumption(&self, id: &Identifier) -> Option<(&Route, &crate::routing::RouteAssumption)> {
        self.routes.iter().find_map(|r| r.assumptions.iter().find(|a| &a.id == id).map(|a| (r, a)))
    }
}

/// Add a new evidential unit. The unit's project must exist and its id must
/// be unused.
pub fn add_unit(bundle: &mut ProjectBundle, unit: EvidentialUnit, stamp: &Stamp) -> Result<(), Diagnostics> {
    let mut diags = Vec::new();
    let path = unit.study_id.to_string();
    if refs::declared_ids(bundle).contains_key(&unit.study_id) {
        diags.push(Diagnostic::at(Code::DupId, &path, format!("`{}` is already declared", unit.study_id)));
    }
    match bundle.project(&unit.project_ref) {
        None => diags.push(Diagnostic::at(Code::UnknownProject, &path, format!("unknown project `{}`", unit.project_ref))),
        Some(p) if p.layer() != unit.study_id.owner_layer() => diags.push(Diagnostic::at(
            Code::Namespace,
            &path,
            format!("unit must be declared in the layer of project `{}`", p.id),
        )),
        Some(_) => {}
    }
    diags.extend(unit.invariant_diagnostics(&path));
    crate::diag::check(diags)?;
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::DeclarationAdded {
            site: Site::Decl(unit.study_id.clone()),
            class: audit::DeclClass::Unit,
            record: serde_json::to_value(&unit).expect("units serialize"),
        },
        vec![unit.study_id.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    bundle.units.push(unit);
    bundle.events.push(event);
    Ok(())
}

fn decl_event(
    bundle: &ProjectBundle,
    stamp: &Stamp,
    site: Site,
    class: audit::DeclClass,
    record: serde_json::Value,
    affected: Vec<Identifier>,
) -> Result<AuditEvent, Diagnostics> {
    let event = audit::next_event(bundle, stamp, EventPayload::DeclarationAdded { site, class, record }, affected);
    audit::check_append(&bundle.events, &event)?;
    Ok(event)
}

/// Add a project to an existing child layer.
pub fn add_project(bundle: &mut ProjectBundle, project: ProjectDecl, stamp: &Stamp) -> Result<(), Diagnostics> {
    let path = project.id.to_string();
    let mut diags = Vec::new();
    if refs::declared_ids(bundle).contains_key(&project.id) {
        diags.push(Diagnostic::at(Code::DupId, &path, format!("`{}` is already declared", project.id)));
    }
    let layer = project.layer().and_then(|l| bundle.layer(&l));
    if project.id.namespace != crate::id::Namespace::Child || layer.map(|l| l.kind) != Some(LayerKind::Child) {
        diags.push(Diagnostic::at(Code::Namespace, &path, "projects are declared in an existing child layer"));
    }
    if !project.assignments.is_empty() {
        diags.push(Diagnostic::at(Code::DupAssignment, &path, "roles are assigned one at a time after tiering"));
    }
    crate::diag::check(diags)?;
    let record = serde_json::to_value(&project).expect("projects serialize");
    let event = decl_event(bundle, stamp, Site::Decl(project.id.clone()), audit::DeclClass::Project, record, vec![project.id.clone()])?;
    bundle.projects.push(project);
    bundle.events.push(event);
    Ok(())
}

/// Add a boundary contract. Incomplete contracts are accepted and reported
/// by the compliance check.
pub fn add_contract(bundle: &mut ProjectBundle, contract: BoundaryContract, stamp: &Stamp) -> Result<(), Diagnostics> {
    let path = format!("contract({})", contract.id);
    let mut diags = Vec::new();
    if bundle.contract(&contract.id).is_some() {
        diags.push(Diagnostic::at(Code::DupId, &path, format!("contract `{}` already exists", contract.id)));
    }
    for l in [&contract.origin_layer, &contract.destination_layer] {
        if bundle.layer(l).is_none() {
            diags.push(Diagnostic::at(Code::UnknownLayer, &path, format!("no layer `{l}`")));
        }
    }
    crate::diag::check(diags)?;
    let record = serde_json::to_value(&contract).expect("contracts serialize");
    let event = decl_event(bundle, stamp, Site::Contract(contract.id.clone()), audit::DeclClass::Contract, record, vec![])?;
    bundle.contracts.push(contract);
    bundle.events.push(event);
    Ok(())
}

fn require_project(bundle: &ProjectBundle, p: &Identifier) -> Result<(), Diagnostics> {
    match bundle.project(p) {
        Some(_) => Ok(()),
        None => Err(Diagnostic::at(Code::UnknownProject, p.to_string(), format!("unknown project `{p}`")).into()),
    }
}

/// Record (or replace) a project's Reviewer Block.
pub fn set_reviewer_block(bundle: &mut ProjectBundle, block: ReviewerBlock, stamp: &Stamp) -> Result<(), Diagnostics> {
    require_project(bundle, &block.project_ref)?;
    let p = block.project_ref.clone();
    let record = serde_json::to_value(&block).expect("blocks serialize");
    let event = decl_event(bundle, stamp, Site::ReviewerBlock(p.clone()), audit::DeclClass::ReviewerBlock, record, vec![p.clone()])?;
    bundle.reviewer_blocks.retain(|b| b.project_ref != p);
    bundle.reviewer_blocks.push(block);
    bundle.events.push(event);
    Ok(())
}

/// Record (or replace) a project's Analytic Memo.
pub fn set_memo(bundle: &mut ProjectBundle, memo: AnalyticMemo, stamp: &Stamp) -> Result<(), Diagnostics> {
    require_project(bundle, &memo.project_ref)?;
    let p = memo.project_ref.clone();
    let record = serde_json::to_value(&memo).expect("memos serialize");
    let event = decl_event(bundle, stamp, Site::Memo(p.clone()), audit::DeclClass::Memo, record, vec![p.clone()])?;
    bundle.memos.retain(|m| m.project_ref != p);
    bundle.memos.push(memo);
    bundle.events.push(event);
    Ok(())
}
