use super::{scan_bundle, validate_insight, ContaminationEvent, CorrectiveAction, InsightEffect, InsightProposal, Site};
use crate::audit::{self, EventPayload, Stamp};
use crate::bundle::ProjectBundle;
use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::id::{strip_text_ref, Identifier};
use crate::layers::{Abstraction, Law};

/// How a contamination event is corrected.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    /// Mark the offending declaration or flow inert but keep it on record.
    Quarantine,
    /// Remove the offending reference, redefinition or flow.
    Reverse,
    /// Lift a methodological insight into the layer above, then quarantine
    /// (or, where that is impossible, reverse) the offending site.
    ExtractInsight(InsightProposal),
}

/// Mark a declaration or flow inert. Returns false for sites that cannot be
/// quarantined.
fn set_quarantined(bundle: &mut ProjectBundle, site: &Site) -> bool {
    match site {
        Site::Flow(f) => match bundle.flows.iter_mut().find(|x| &x.id == f) {
            Some(x) => {
                x.quarantined = true;
                true
            }
            None => false,
        },
        Site::Decl(id) => {
            for layer in &mut bundle.layers {
                if let Some(l) = layer.laws.iter_mut().find(|l| &l.id == id) {
                    l.quarantined = true;
                    return true;
                }
                if let Some(a) = layer.abstractions.iter_mut().find(|a| &a.id == id) {
                    a.quarantined = true;
                    return true;
                }
            }
            if let Some(u) = bundle.unit_mut(id) {
                u.quarantined = true;
                return true;
            }
            if let Some(r) = bundle.route_mut(id) {
                r.quarantined = true;
                return true;
            }
            false
        }
        _ => false,
    }
}

/// Text fields held by a site.
fn texts_mut<'a>(bundle: &'a mut ProjectBundle, site: &Site) -> Vec<&'a mut String> {
    let mut out: Vec<&'a mut String> = Vec::new();
    match site {
        Site::Decl(id) => {
            for layer in &mut bundle.layers {
                for l in layer.laws.iter_mut().filter(|l| &l.id == id) {
                    out.push(&mut l.text);
                }
                for a in layer.abstractions.iter_mut().filter(|a| &a.id == id) {
                    out.push(&mut a.definition);
                }
            }
            for p in bundle.projects.iter_mut().filter(|p| &p.id == id) {
                out.push(&mut p.question);
                for alt in &mut p.pending_alternatives {
                    out.push(&mut alt.sketch);
                    out.push(&mut alt.rationale);
                }
            }
            for u in bundle.units.iter_mut().filter(|u| &u.study_id == id) {
                out.push(&mut u.design_type);
                out.push(&mut u.tier_justification);
                out.extend(u.explicit_assumptions.iter_mut().map(|a| &mut a.text));
                for e in &mut u.retier_events {
                    out.extend([&mut e.source_of_information, &mut e.justification, &mut e.implications_for_route]);
                }
                out.extend(u.measurements.iter_mut().map(|m| &mut m.procedure));
                if let Some(s) = &mut u.study_log {
                    out.extend(s.bias_considerations.iter_mut().map(|b| &mut b.text));
                    out.extend([&mut s.measurement_definition_issues, &mut s.notes]);
                }
                if let Some(t) = &mut u.tier_table {
                    out.extend([&mut t.methods_summary, &mut t.strengths, &mut t.limitations]);
                }
            }
            for r in bundle.routes.iter_mut().filter(|r| &r.id == id) {
                out.push(&mut r.name);
                for a in &mut r.assumptions {
                    out.extend([&mut a.text, &mut a.plausibility, &mut a.failure_modes, &mut a.consequences_for_inference]);
                }
                out.extend(r.disconfirming_models.iter_mut());
                for alt in &mut r.rejected_alternatives {
                    out.extend([&mut alt.sketch, &mut alt.rationale]);
                }
                for rev in &mut r.revisions {
                    out.extend([&mut rev.justification, &mut rev.downstream_implications, &mut rev.change]);
                }
            }
        }
        Site::ReviewerBlock(p) => {
            for b in bundle.reviewer_blocks.iter_mut().filter(|b| &b.project_ref == p) {
                out.extend(b.methodological_findings.iter_mut());
                out.extend([
                    &mut b.conceptual_insight,
                    &mut b.anticipated_critique.text,
                    &mut b.anticipated_critique.response,
                    &mut b.disconfirming_model,
                ]);
            }
        }
        Site::Memo(p) => {
            for m in bundle.memos.iter_mut().filter(|m| &m.project_ref == p) {
                out.extend(m.sections.values_mut());
            }
        }
        Site::Flow(f) => {
            for x in bundle.flows.iter_mut().filter(|x| &x.id == f) {
                out.push(&mut x.payload);
            }
        }
        Site::Contract(_) | Site::Layer(_) => {}
    }
    out
}

/// Drop optional structured references to `target` held by `site`.
fn strip_structured(bundle: &mut ProjectBundle, site: &Site, target: &Identifier) {
    match site {
        Site::Decl(id) => {
            for layer in &mut bundle.layers {
                for a in layer.abstractions.iter_mut().filter(|a| &a.id == id) {
                    a.correspondence.retain(|m, c| m != target && c != target);
                }
            }
            for p in bundle.projects.iter_mut().filter(|p| &p.id == id) {
                p.assignments.retain(|a| &a.unit_ref != target && &a.route_ref != target);
                for alt in &mut p.pending_alternatives {
                    if alt.route_ref.as_ref() == Some(target) {
                        alt.route_ref = None;
                    }
                }
            }
            for u in bundle.units.iter_mut().filter(|u| &u.study_id == id) {
                u.measurements.retain(|m| &m.construct_ref != target);
                for m in &mut u.measurements {
                    if m.class_ref.as_ref() == Some(target) {
                        m.class_ref = None;
                    }
                }
            }
            for r in bundle.routes.iter_mut().filter(|r| &r.id == id) {
                for a in &mut r.assumptions {
                    a.evidence.retain(|e| &e.unit_ref != target);
                }
                for alt in &mut r.rejected_alternatives {
                    if alt.route_ref.as_ref() == Some(target) {
                        alt.route_ref = None;
                    }
                }
            }
        }
        Site::ReviewerBlock(p) => {
            for b in bundle.reviewer_blocks.iter_mut().filter(|b| &b.project_ref == p) {
                b.anticipated_critique.referenced_decisions.retain(|d| d != target);
                b.assumptions_ref.retain(|d| d != target);
            }
        }
        _ => {}
    }
}

/// Remove what the event points at. Returns false when nothing applies.
fn reverse(bundle: &mut ProjectBundle, e: &ContaminationEvent) -> bool {
    match (&e.site, &e.offending_ref) {
        (Site::Flow(f), None) => {
            let before = bundle.flows.len();
            bundle.flows.retain(|x| &x.id != f);
            before != bundle.flows.len()
        }
        (Site::Decl(id), Some(_)) if e.rule_violated == super::ContaminationRule::R2DownwardRewrite => {
            let mut removed = false;
            for layer in &mut bundle.layers {
                let n = layer.laws.len() + layer.abstractions.len();
                layer.laws.retain(|l| &l.id != id);
                layer.abstractions.retain(|a| &a.id != id);
                removed |= n != layer.laws.len() + layer.abstractions.len();
            }
            removed
        }
        (site, Some(target)) => {
            let before = bundle.clone();
            for t in texts_mut(bundle, site) {
                strip_text_ref(t, target);
            }
            strip_structured(bundle, site, target);
            *bundle != before
        }
        _ => false,
    }
}

fn apply_effect(bundle: &mut ProjectBundle, p: &InsightProposal) -> Option<InsightEffect> {
    let layer = bundle.layer_mut(&p.target_layer)?;
    match p.effect.as_ref()? {
        InsightEffect::AppendLaw { id, text } => {
            layer.laws.push(Law::new(id.clone(), text.clone()));
        }
        InsightEffect::AppendAbstraction { id, kind, definition } => {
            layer.abstractions.push(Abstraction::new(id.clone(), *kind, definition.clone()));
        }
        _ => return None,
    }
    p.effect.clone()
}

/// Correct a detected violation. The event must be currently detected by
/// [`scan_bundle`] or flagged and unresolved in the log, and its
/// documentation must be complete. Appends exactly one audit event.
pub fn resolve_contamination(
    bundle: &mut ProjectBundle,
    event: &ContaminationEvent,
    action: Action,
    stamp: &Stamp,
) -> Result<(), Diagnostics> {
    let live = scan_bundle(bundle).into_iter().find(|e| e.id == event.id);
    let known = live.clone().or_else(|| super::flagged_unresolved(bundle).into_iter().find(|e| e.id == event.id));
    let Some(found) = known else {
        return Err(Diagnostic::at(Code::UnknownContamination, event.site.to_string(), format!("no open contamination `{}`", event.id)).into());
    };
    let path = found.site.to_string();
    let missing = event.missing_documentation();
    if !missing.is_empty() {
        return Err(Diagnostic::at(Code::Undocumented, &path, format!("missing {}", missing.join(", "))).into());
    }

    let mut work = bundle.clone();
    let mut appended = None;
    let mut quarantined = None;
    let corrective = match &action {
        Action::Quarantine => {
            if !set_quarantined(&mut work, &found.site) {
                return Err(Diagnostic::at(Code::ActionInapplicable, &path, "only laws, abstractions, units, routes and flows can be quarantined").into());
            }
            quarantined = Some(found.site.clone());
            CorrectiveAction::Quarantined
        }
        Action::Reverse => {
            if let Site::Decl(id) = &found.site {
                if bundle.route(id).is_some_and(|r| r.is_frozen()) {
                    return Err(Diagnostic::at(Code::ActionInapplicable, &path, "a frozen route changes only through a revision").into());
                }
            }
            if !reverse(&mut work, &found) {
                return Err(Diagnostic::at(Code::ActionInapplicable, &path, "nothing to reverse at this site").into());
            }
            CorrectiveAction::Reversed
        }
        Action::ExtractInsight(p) => {
            let mut diags = validate_insight(p, bundle);
            if p.effect.is_none() {
                diags.push(Diagnostic::at(Code::EffectLayer, format!("insight({})", p.id), "the proposal adds nothing"));
            }
            if !diags.is_empty() {
                let mut all = vec![Diagnostic::at(Code::InsightRejected, &path, format!("insight `{}` failed {} check(s)", p.id, diags.len()))];
                all.extend(diags);
                return Err(Diagnostics(all));
            }
            appended = apply_effect(&mut work, p);
            if set_quarantined(&mut work, &found.site) {
                quarantined = Some(found.site.clone());
            } else if !reverse(&mut work, &found) {
                return Err(Diagnostic::at(Code::ActionInapplicable, &path, "the offending site cannot be neutralized").into());
            }
            CorrectiveAction::InsightExtracted
        }
    };
    if live.is_some() && scan_bundle(&work).iter().any(|e| e.id == found.id) {
        return Err(Diagnostic::at(Code::ActionInapplicable, &path, "the violation persists after the corrective action").into());
    }

    let mut record = found.clone();
    record.risks_introduced = event.risks_introduced.clone();
    record.versioned_update = event.versioned_update.clone();
    if !event.decisions_affected.is_empty() {
        record.decisions_affected = event.decisions_affected.clone();
    }
    record.corrective_action = Some(corrective);
    record.timestamp = Some(stamp.timestamp.clone());
    let affected = match &found.site {
        Site::Decl(id) => vec![id.clone()],
        _ => vec![],
    };
    let ev = audit::next_event(
        &work,
        stamp,
        EventPayload::ContaminationResolved { contamination: record, appended, quarantined },
        affected,
    );
    audit::check_append(&work.events, &ev)?;
    work.events.push(ev);
    *bundle = work;
    Ok(())
}

/// Record a detected violation in the log.
pub fn flag_contamination(bundle: &mut ProjectBundle, id: &str, stamp: &Stamp) -> Result<ContaminationEvent, Diagnostics> {
    let found = scan_bundle(bundle)
        .into_iter()
        .find(|e| e.id == id)
        .ok_or_else(|| Diagnostic::at(Code::UnknownContamination, "contamination", format!("`{id}` is not currently detected")))?;
    if super::flagged_unresolved(bundle).iter().any(|e| e.id == id) {
        return Err(Diagnostic::at(Code::DupId, found.site.to_string(), format!("`{id}` is already flagged")).into());
    }
    let affected = match &found.site {
        Site::Decl(i) => vec![i.clone()],
        _ => vec![],
    };
    let ev = audit::next_event(bundle, stamp, EventPayload::ContaminationFlagged { contamination: found.clone() }, affected);
    audit::check_append(&bundle.events, &ev)?;
    bundle.events.push(ev);
    Ok(found)
}

/// Quarantine a declaration or flow outside of a contamination resolution.
pub fn quarantine(bundle: &mut ProjectBundle, site: &Site, stamp: &Stamp) -> Result<(), Diagnostics> {
    let mut work = bundle.clone();
    if !set_quarantined(&mut work, site) {
        return Err(Diagnostic::at(Code::ActionInapplicable, site.to_string(), "only laws, abstractions, units, routes and flows can be quarantined").into());
    }
    let affected = match site {
        Site::Decl(i) => vec![i.clone()],
        _ => vec![],
    };
    let ev = audit::next_event(&work, stamp, EventPayload::DeclarationQuarantined { site: site.clone() }, affected);
    audit::check_append(&work.events, &ev)?;
    work.events.push(ev);
    *bundle = work;
    Ok(())
}
