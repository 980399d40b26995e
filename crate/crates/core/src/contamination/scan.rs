use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::{
    check_flow, class_of, trace_downstream, ContaminationEvent, ContaminationRule, Direction, FlowVerdict, InfoClass, Nature, Site,
};
use crate::audit::EventPayload;
use crate::bundle::{refs, ProjectBundle};
use crate::diag::{Code, Diagnostic};
use crate::id::{Identifier, LayerId, LayerKind};
use crate::layers::inherited_named;

fn event_id(site: &Site, offending: Option<&Identifier>, rule: ContaminationRule) -> String {
    let key = format!("{site}|{}|{rule}", offending.map(|i| i.to_string()).unwrap_or_default());
    let hash = Sha256::digest(key.as_bytes());
    format!("CE-{}", hash.iter().take(5).map(|b| format!("{b:02x}")).collect::<String>())
}

fn event(
    bundle: &ProjectBundle,
    site: Site,
    offending: Option<Identifier>,
    rule: ContaminationRule,
    direction: Direction,
    nature: Nature,
    message: String,
) -> ContaminationEvent {
    ContaminationEvent {
        id: event_id(&site, offending.as_ref(), rule),
        decisions_affected: trace_downstream(&site, bundle),
        site,
        offending_ref: offending,
        rule_violated: rule,
        direction,
        nature,
        message,
        risks_introduced: String::new(),
        corrective_action: None,
        versioned_update: String::new(),
        timestamp: None,
    }
}

/// Classify a reference from layer `from` to content owned by `to`.
/// `None` when the reference is lawful.
pub(crate) fn classify_ref(
    bundle: &ProjectBundle,
    from: &LayerId,
    to: &LayerId,
    class: InfoClass,
) -> Option<(Direction, ContaminationRule)> {
    if from == to || bundle.is_ancestor(to, from) {
        return None;
    }
    let (Some(fk), Some(tk)) = (bundle.layer_kind(from), bundle.layer_kind(to)) else {
        return None;
    };
    if tk.level() < fk.level() || bundle.is_ancestor(from, to) {
        return Some((Direction::Upward, ContaminationRule::R1UpwardContent));
    }
    if bundle.contracts.iter().any(|c| c.authorizes(bundle, class, to, from)) {
        return None;
    }
    Some((Direction::Horizontal, ContaminationRule::R3HorizontalBorrowing))
}

/// Every unresolved violation currently present in the bundle: illegal
/// static references, inherited declarations redefined lower down, and
/// recorded flows the permission matrix rejects.
pub fn scan_bundle(bundle: &ProjectBundle) -> Vec<ContaminationEvent> {
    let declared = refs::declared_ids(bundle);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();

    for r in refs::references(bundle) {
        if !r.active || matches!(r.site, Site::Flow(_)) {
            continue;
        }
        let Some(from) = &r.layer else { continue };
        let (to, class) = match declared.get(&r.target) {
            Some(info) => (info.layer.clone(), class_of(info.kind)),
            None => match refs::owner_of(bundle, &r.target) {
                Some(l) => (l, InfoClass::Content),
                None => continue,
            },
        };
        let Some((direction, rule)) = classify_ref(bundle, from, &to, class) else { continue };
        if !seen.insert((r.site.clone(), r.target.clone(), rule)) {
            continue;
        }
        let message = format!("{} of layer {from} references `{}` owned by layer {to}", r.path, r.target);
        out.push(event(bundle, r.site, Some(r.target), rule, direction, Nature::of_class(class), message));
    }

    for layer in &bundle.layers {
        if layer.kind == LayerKind::Grandparent {
            continue;
        }
        let decls = layer
            .laws
            .iter()
            .filter(|l| !l.quarantined)
            .map(|l| (&l.id, l.text.as_str()))
            .chain(layer.abstractions.iter().filter(|a| !a.quarantined).map(|a| (&a.id, a.definition.as_str())));
        for (id, body) in decls {
            if let Some((orig, orig_body)) = inherited_named(bundle, &layer.id, &id.local_name) {
                if orig_body != body {
                    let message = format!("layer {} redefines inherited `{orig}`", layer.id);
                    out.push(event(
                        bundle,
                        Site::Decl(id.clone()),
                        Some(orig.clone()),
                        ContaminationRule::R2DownwardRewrite,
                        Direction::Downward,
                        Nature::Structural,
                        message,
                    ));
                }
            }
        }
    }

    for f in bundle.flows.iter().filter(|f| !f.quarantined) {
        if let Ok(FlowVerdict::Violation { direction, rule }) = check_flow(f, bundle) {
            let message = format!(
                "{} flow {} -> {} is not permitted",
                serde_json::to_value(f.info_class).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default(),
                f.source_layer,
                f.dest_layer
            );
            out.push(event(bundle, Site::Flow(f.id.clone()), None, rule, direction, Nature::of_class(f.info_class), message));
        }
    }

    out.sort_by(|a, b| (a.direction, &a.site, &a.id).cmp(&(b.direction, &b.site, &b.id)));
    out
}

/// Contamination events flagged in the log and never resolved.
pub fn flagged_unresolved(bundle: &ProjectBundle) -> Vec<ContaminationEvent> {
    let mut flagged: BTreeMap<&str, &ContaminationEvent> = BTreeMap::new();
    for e in &bundle.events {
        match &e.payload {
            EventPayload::ContaminationFlagged { contamination } => {
                flagged.insert(&contamination.id, contamination);
            }
            EventPayload::ContaminationResolved { contamination, .. } => {
                flagged.remove(contamination.id.as_str());
            }
            _ => {}
        }
    }
    flagged.into_values().cloned().collect()
}

/// Contamination findings for the compliance report.
pub fn contamination_findings(bundle: &ProjectBundle) -> Vec<Diagnostic> {
    let mut out: Vec<Diagnostic> = scan_bundle(bundle).iter().map(|e| e.diagnostic()).collect();
    for e in flagged_unresolved(bundle) {
        out.push(Diagnostic::at(Code::UnresolvedContamination, e.site.to_string(), format!("[{}] flagged but never resolved", e.id)));
    }
    for c in &bundle.contracts {
        let missing = c.missing_elements(bundle);
        if !missing.is_empty() {
            out.push(Diagnostic::at(
                Code::ContractIncomplete,
                Site::Contract(c.id.clone()).to_string(),
                format!("missing {}", missing.join(", ")),
            ));
        }
    }
    out
}
