use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{call_form, Site};
use crate::bundle::refs::{self, DeclKind, RefSite};
use crate::bundle::ProjectBundle;
use crate::id::{IdError, Identifier, LayerId};
use crate::routing::unit_tier;
use crate::tiering::Tier;

/// A decision or report row that depends on a declaration.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Affected {
    Decl(Identifier),
    Tier(Identifier),
    Coherence(Identifier),
    StudyLogRow(Identifier),
    TierTableRow(Identifier),
    Constraints(LayerId),
    Project(Identifier),
    ReviewerBlock(Identifier),
    Flow(String),
}

impl fmt::Display for Affected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Affected::Decl(i) => write!(f, "{i}"),
            Affected::Tier(i) => write!(f, "tier({i})"),
            Affected::Coherence(i) => write!(f, "coherence({i})"),
            Affected::StudyLogRow(i) => write!(f, "study_log({i})"),
            Affected::TierTableRow(i) => write!(f, "tier_table({i})"),
            Affected::Constraints(l) => write!(f, "constraints({l})"),
            Affected::Project(i) => write!(f, "project({i})"),
            Affected::ReviewerBlock(i) => write!(f, "reviewer_block({i})"),
            Affected::Flow(x) => write!(f, "flow({x})"),
        }
    }
}

impl FromStr for Affected {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match call_form(s) {
            None => Affected::Decl(s.parse()?),
            Some(("tier", x)) => Affected::Tier(x.parse()?),
            Some(("coherence", x)) => Affected::Coherence(x.parse()?),
            Some(("study_log", x)) => Affected::StudyLogRow(x.parse()?),
            Some(("tier_table", x)) => Affected::TierTableRow(x.parse()?),
            Some(("constraints", x)) => Affected::Constraints(x.parse()?),
            Some(("project", x)) => Affected::Project(x.parse()?),
            Some(("reviewer_block", x)) => Affected::ReviewerBlock(x.parse()?),
            Some(("flow", x)) if !x.is_empty() => Affected::Flow(x.to_string()),
            Some(_) => return Err(IdError::Identifier(s.to_string())),
        })
    }
}

impl Serialize for Affected {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Affected {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

struct Graph<'a> {
    bundle: &'a ProjectBundle,
    decls: BTreeMap<Identifier, refs::DeclInfo>,
    referrers: BTreeMap<Identifier, Vec<RefSite>>,
}

impl Graph<'_> {
    /// Map an identifier to the node that stands for its declaration; route
    /// assumptions are part of their route.
    fn decl_node(&self, id: &Identifier) -> Affected {
        match self.decls.get(id).map(|d| d.kind) {
            Some(DeclKind::RouteAssumption) => self
                .bundle
                .route_assumption(id)
                .map(|(r, _)| Affected::Decl(r.id.clone()))
                .unwrap_or_else(|| Affected::Decl(id.clone())),
            _ => Affected::Decl(id.clone()),
        }
    }

    fn children_constraints(&self, layer: &LayerId) -> Vec<Affected> {
        self.bundle.child_layers_under(layer).into_iter().map(|c| Affected::Constraints(c.id.clone())).collect()
    }

    /// Nodes that cite `id`.
    fn citing(&self, id: &Identifier) -> Vec<Affected> {
        let mut out = Vec::new();
        for r in self.referrers.get(id).into_iter().flatten().filter(|r| r.active) {
            match &r.site {
                Site::Decl(by) => match self.decls.get(by).map(|d| d.kind) {
                    Some(DeclKind::Route) if r.field == "evidence" => out.push(Affected::Coherence(by.clone())),
                    Some(DeclKind::Project) | None => {}
                    Some(_) => out.push(Affected::Decl(by.clone())),
                },
                Site::ReviewerBlock(p) => out.push(Affected::ReviewerBlock(p.clone())),
                _ => {}
            }
        }
        out
    }

    fn successors(&self, node: &Affected) -> Vec<Affected> {
        let b = self.bundle;
        match node {
            Affected::Decl(id) => {
                let mut out = self.citing(id);
                if let Some(r) = b.route(id) {
                    for a in &r.assumptions {
                        out.extend(self.citing(&a.id));
                    }
                }
                if let Some(info) = self.decls.get(id) {
                    match info.kind {
                        DeclKind::Law | DeclKind::Abstraction(_) => out.extend(self.children_constraints(&info.layer)),
                        DeclKind::Unit => out.push(Affected::Tier(id.clone())),
                        DeclKind::Route | DeclKind::RouteAssumption => out.push(Affected::Coherence(id.clone())),
                        DeclKind::Project => {}
                    }
                }
                out
            }
            Affected::Tier(u) => {
                let mut out = vec![Affected::StudyLogRow(u.clone())];
                if let Some(unit) = b.unit(u) {
                    if unit_tier(unit).is_some_and(|t| t != Tier::Excluded) {
                        out.push(Affected::TierTableRow(u.clone()));
                    }
                    if let Some(r) = b.committed_route(&unit.project_ref) {
                        out.push(Affected::Coherence(r.id.clone()));
                    }
                }
                out
            }
            Affected::Constraints(l) => b
                .projects
                .iter()
                .filter(|p| p.layer().as_ref() == Some(l))
                .map(|p| Affected::Project(p.id.clone()))
                .collect(),
            Affected::Flow(f) => b.flow(f).map(|f| self.children_constraints(&f.dest_layer)).unwrap_or_default(),
            _ => vec![],
        }
    }
}

/// Transitive closure of everything that depends on `site`, excluding the
/// site itself. Quarantined declarations contribute no edges.
pub fn trace_downstream(site: &Site, bundle: &ProjectBundle) -> Vec<Affected> {
    let decls = refs::declared_ids(bundle);
    let mut referrers: BTreeMap<Identifier, Vec<RefSite>> = BTreeMap::new();
    for r in refs::references(bundle) {
        referrers.entry(r.target.clone()).or_default().push(r);
    }
    let g = Graph { bundle, decls, referrers };
    let start = match site {
        Site::Decl(id) => g.decl_node(id),
        Site::Flow(f) => Affected::Flow(f.clone()),
        Site::Contract(c) => {
            let flows: Vec<Affected> =
                bundle.flows.iter().filter(|f| f.contract_ref.as_deref() == Some(c)).map(|f| Affected::Flow(f.id.clone())).collect();
            return closure(&g, flows, None);
        }
        Site::ReviewerBlock(_) | Site::Memo(_) | Site::Layer(_) => return vec![],
    };
    closure(&g, g.successors(&start), Some(start))
}

fn closure(g: &Graph<'_>, seeds: Vec<Affected>, exclude: Option<Affected>) -> Vec<Affected> {
    let mut seen: BTreeSet<Affected> = BTreeSet::new();
    let mut queue: VecDeque<Affected> = seeds.into();
    while let Some(n) = queue.pop_front() {
        if Some(&n) == exclude.as_ref() || !seen.insert(n.clone()) {
            continue;
        }
        queue.extend(g.successors(&n));
    }
    seen.into_iter().collect()
}
