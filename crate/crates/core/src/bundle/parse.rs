use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{refs, ProjectBundle};
use crate::diag::{Code, Diagnostic, Diagnostics, Location};
use crate::id::{Identifier, LayerId, LayerKind, Namespace};

pub const TOP_LEVEL_KEYS: [&str; 10] =
    ["recap_version", "layers", "projects", "units", "routes", "flows", "contracts", "events", "reviewer_blocks", "memos"];

/// A parsed bundle plus the warnings raised while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedBundle {
    pub bundle: ProjectBundle,
    pub warnings: Vec<Diagnostic>,
}

/// Parse a bundle document. Fails with every structural error found; on
/// success the bundle is fully qualified and every reference resolves.
pub fn parse_bundle(text: &str) -> Result<ParsedBundle, Diagnostics> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        Diagnostics::single(Diagnostic::new(Code::Syntax, Location::line(e.line().max(1), e.column()), e.to_string()))
    })?;
    let Value::Object(mut map) = value else {
        return Err(Diagnostic::new(Code::Syntax, Location::line(1, 1), "a bundle is a JSON object").into());
    };
    let mut warnings = Vec::new();
    let unknown: Vec<String> = map.keys().filter(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())).cloned().collect();
    for k in unknown {
        map.remove(&k);
        warnings.push(Diagnostic::at(Code::UnknownKey, k.clone(), format!("unknown top-level key `{k}` ignored")));
    }
    let mut bundle: ProjectBundle = serde_path_to_error::deserialize(Value::Object(map)).map_err(|e| {
        let path = e.path().to_string();
        let code = if path.starts_with("events") { Code::PayloadSchema } else { Code::Syntax };
        Diagnostics::single(Diagnostic::at(code, path, e.inner().to_string()))
    })?;
    qualify(&mut bundle);
    let errors = structural_diagnostics(&bundle);
    if !errors.is_empty() {
        return Err(Diagnostics(errors));
    }
    Ok(ParsedBundle { bundle, warnings })
}

/// Canonical text of a bundle.
pub fn serialize_bundle(bundle: &ProjectBundle) -> String {
    serde_json::to_string_pretty(bundle).expect("bundles serialize") + "\n"
}

/// Give `id` the namespace and owner of `like` when it is a bare name.
fn beside(id: &mut Identifier, like: &Identifier) {
    if !id.is_qualified() && like.is_qualified() {
        id.namespace = like.namespace;
        id.owner = like.owner.clone();
    }
}

/// Bare names visible from each layer: its own declarations first, then
/// those of its ancestors.
struct Scope {
    names: BTreeMap<LayerId, Vec<Identifier>>,
    chains: BTreeMap<LayerId, Vec<LayerId>>,
}

impl Scope {
    fn new(b: &ProjectBundle) -> Self {
        let mut names: BTreeMap<LayerId, Vec<Identifier>> = BTreeMap::new();
        for layer in &b.layers {
            let v = names.entry(layer.id.clone()).or_default();
            v.extend(layer.laws.iter().map(|l| l.id.clone()));
            v.extend(layer.abstractions.iter().map(|a| a.id.clone()));
        }
        let chains = b.layers.iter().map(|l| (l.id.clone(), b.ancestry(&l.id).iter().map(|a| a.id.clone()).collect())).collect();
        Scope { names, chains }
    }

    fn resolve(&self, id: &mut Identifier, from: Option<&LayerId>) {
        if id.is_qualified() {
            return;
        }
        let Some(chain) = from.and_then(|l| self.chains.get(l)) else { return };
        for layer in chain {
            if let Some(found) = self.names.get(layer).and_then(|v| v.iter().find(|d| d.local_name == id.local_name)) {
                *id = found.clone();
                return;
            }
        }
    }
}

/// Qualify bare names against the layer that declares them.
fn qualify(b: &mut ProjectBundle) {
    for layer in &mut b.layers {
        let (kind, lid) = (layer.kind, layer.id.clone());
        for l in &mut layer.laws {
            l.id = l.id.qualified_in(kind, &lid);
        }
        for a in &mut layer.abstractions {
            a.id = a.id.qualified_in(kind, &lid);
        }
    }
    let scope = Scope::new(b);
    for layer in &mut b.layers {
        let lid = layer.id.clone();
        for a in &mut layer.abstractions {
            a.correspondence = std::mem::take(&mut a.correspondence)
                .into_iter()
                .map(|(mut m, mut c)| {
                    scope.resolve(&mut m, Some(&lid));
                    scope.resolve(&mut c, Some(&lid));
                    (m, c)
                })
                .collect();
        }
    }
    for p in &mut b.projects {
        for a in &mut p.assignments {
            beside(&mut a.unit_ref, &p.id);
            beside(&mut a.route_ref, &p.id);
        }
        for alt in &mut p.pending_alternatives {
            if let Some(r) = &mut alt.route_ref {
                beside(r, &p.id);
            }
        }
    }
    for u in &mut b.units {
        beside(&mut u.study_id, &u.project_ref);
        let layer = u.study_id.owner_layer();
        for m in &mut u.measurements {
            scope.resolve(&mut m.construct_ref, layer.as_ref());
            if let Some(k) = &mut m.class_ref {
                scope.resolve(k, layer.as_ref());
            }
        }
        if let Some(s) = &mut u.split_from {
            beside(s, &u.study_id);
        }
        let own = u.study_id.clone();
        for s in &mut u.superseded_by {
            beside(s, &own);
        }
    }
    for r in &mut b.routes {
        beside(&mut r.id, &r.project_ref);
        let layer = r.id.owner_layer();
        scope.resolve(&mut r.construct_ref, layer.as_ref());
        for a in &mut r.assumptions {
            beside(&mut a.id, &r.id);
            for e in &mut a.evidence {
                beside(&mut e.unit_ref, &r.id);
            }
        }
        for alt in &mut r.rejected_alternatives {
            if let Some(x) = &mut alt.route_ref {
                beside(x, &r.id);
            }
        }
    }
    for block in &mut b.reviewer_blocks {
        let p = block.project_ref.clone();
        for d in block.anticipated_critique.referenced_decisions.iter_mut().chain(block.assumptions_ref.iter_mut()) {
            beside(d, &p);
        }
    }
}

/// Grandparent count, namespaces, duplicate declarations and dangling
/// references.
pub fn structural_diagnostics(b: &ProjectBundle) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let gps = b.layers.iter().filter(|l| l.kind == LayerKind::Grandparent).count();
    if gps != 1 {
        out.push(Diagnostic::at(Code::NoGrandparent, "layers", format!("{gps} grandparent layers declared")));
    }
    let mut layer_ids = BTreeSet::new();
    for (i, l) in b.layers.iter().enumerate() {
        if !layer_ids.insert(&l.id) {
            out.push(Diagnostic::at(Code::DupId, format!("layers[{i}]"), format!("layer `{}` is declared more than once", l.id)));
        }
    }

    let kind_of = |l: &LayerId| b.layer_kind(l);
    let mut seen: BTreeMap<Identifier, String> = BTreeMap::new();
    for (id, info) in refs::declarations(b) {
        let in_gp_laws = info.kind == refs::DeclKind::Law && kind_of(&info.layer) == Some(LayerKind::Grandparent);
        let expected = match info.kind {
            refs::DeclKind::Law | refs::DeclKind::Abstraction(_) => kind_of(&info.layer).map(Namespace::of_kind),
            _ => Some(Namespace::Child),
        };
        let owner_ok = match id.namespace {
            Namespace::Gp => true,
            Namespace::Unqualified => false,
            _ => match info.kind {
                refs::DeclKind::Law | refs::DeclKind::Abstraction(_) => id.owner == info.layer.as_str(),
                _ => kind_of(&info.layer) == Some(LayerKind::Child),
            },
        };
        if !in_gp_laws && (Some(id.namespace) != expected || !owner_ok) {
            out.push(Diagnostic::at(Code::Namespace, &info.path, format!("`{id}` does not belong to the layer that declares it")));
        }
        match seen.get(&id) {
            Some(first) if !in_gp_laws => out.push(Diagnostic::at(
                Code::DupId,
                &info.path,
                format!("`{id}` is already declared at {first}"),
            )),
            Some(_) => {}
            None => {
                seen.insert(id, info.path);
            }
        }
    }
    for u in &b.units {
        if let (Some(own), Some(p)) = (u.study_id.owner_layer(), u.project_ref.owner_layer()) {
            if own != p && u.study_id.is_qualified() {
                out.push(Diagnostic::at(Code::Namespace, u.study_id.to_string(), "a unit lives in its project's layer"));
            }
        }
    }
    for r in &b.routes {
        if r.id.owner_layer() != r.project_ref.owner_layer() {
            out.push(Diagnostic::at(Code::Namespace, r.id.to_string(), "a route lives in its project's layer"));
        }
    }
    let mut flow_ids = BTreeSet::new();
    for (i, f) in b.flows.iter().enumerate() {
        if !flow_ids.insert(f.id.as_str()) {
            out.push(Diagnostic::at(Code::DupId, format!("flows[{i}]"), format!("flow `{}` is declared more than once", f.id)));
        }
        if let Some(c) = &f.contract_ref {
            if b.contract(c).is_none() {
                out.push(Diagnostic::at(Code::UnresolvedRef, format!("flows[{i}].contract_ref"), format!("unresolved contract `{c}`")));
            }
        }
    }
    let mut contract_ids = BTreeSet::new();
    for (i, c) in b.contracts.iter().enumerate() {
        if !contract_ids.insert(c.id.as_str()) {
            out.push(Diagnostic::at(Code::DupId, format!("contracts[{i}]"), format!("contract `{}` is declared more than once", c.id)));
        }
    }
    for (what, ids) in [
        ("reviewer block", b.reviewer_blocks.iter().map(|x| &x.project_ref).collect::<Vec<_>>()),
        ("memo", b.memos.iter().map(|x| &x.project_ref).collect()),
    ] {
        let mut seen = BTreeSet::new();
        for p in ids {
            if !seen.insert(p) {
                out.push(Diagnostic::at(Code::DupId, p.to_string(), format!("more than one {what} for `{p}`")));
            }
        }
    }

    for r in refs::references(b) {
        if !seen.contains_key(&r.target) {
            out.push(Diagnostic::at(Code::UnresolvedRef, &r.path, format!("unresolved reference `{}`", r.target)));
        }
    }
    out.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    out.dedup();
    out
}
