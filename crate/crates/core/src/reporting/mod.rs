//! The mandatory study-level outputs and the compliance verdict.
//!
//! Reports are projections of the bundle: every narrative string they carry
//! is copied from a declaration, never composed by the engine.

mod compliance;
mod render;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bundle::ProjectBundle;
use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::id::Identifier;
use crate::routing::{unit_tier, Role};
use crate::tiering::Tier;

pub use compliance::{compliance_verdict, ComplianceReport, Verdict};
pub use render::{parse_artifact, render_report, Artifact, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasDirection {
    Attenuates,
    Inflates,
    Reverses,
    Nondirectional,
}

/// A bias consideration with its hypothesized direction of effect.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasNote {
    pub direction: BiasDirection,
    pub text: String,
}

/// Study Log content declared on a unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyLogFields {
    #[serde(default)]
    pub bias_considerations: Vec<BiasNote>,
    #[serde(default)]
    pub measurement_definition_issues: String,
    #[serde(default)]
    pub notes: String,
}

/// Tier Table content declared on a unit.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierTableFields {
    #[serde(default)]
    pub methods_summary: String,
    #[serde(default)]
    pub strengths: String,
    #[serde(default)]
    pub limitations: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyLogEntry {
    pub study_id: Identifier,
    pub design_type: String,
    pub tier_assignment: Tier,
    pub reasons_for_tiering: String,
    pub bias_considerations: Vec<BiasNote>,
    pub measurement_definition_issues: String,
    pub notes: String,
}

/// Evidence type: the assigned role, qualified by the route objective.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidenceType {
    pub role: Role,
    pub objective: String,
}

impl fmt::Display for EvidenceType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.role != Role::PrimaryInference {
            return f.write_str(self.role.label());
        }
        let mut chars = self.objective.chars();
        match chars.next() {
            Some(c) => write!(f, "{}{}", c.to_uppercase(), chars.as_str()),
            None => f.write_str(self.role.label()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierTableRow {
    pub study_id: Identifier,
    pub methods_summary: String,
    pub evidence_type: Option<EvidenceType>,
    pub strengths: String,
    pub limitations: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Critique {
    #[serde(default)]
    pub text: String,
    #[serde(default)]
    pub response: String,
    #[serde(default)]
    pub referenced_decisions: Vec<Identifier>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReviewerBlock {
    pub project_ref: Identifier,
    #[serde(default)]
    pub methodological_findings: Vec<String>,
    #[serde(default)]
    pub conceptual_insight: String,
    #[serde(default)]
    pub anticipated_critique: Critique,
    #[serde(default)]
    pub disconfirming_model: String,
    #[serde(default)]
    pub assumptions_ref: Vec<Identifier>,
}

impl ReviewerBlock {
    pub fn empty(project_ref: Identifier) -> Self {
        ReviewerBlock {
            project_ref,
            methodological_findings: vec![],
            conceptual_insight: String::new(),
            anticipated_critique: Critique::default(),
            disconfirming_model: String::new(),
            assumptions_ref: vec![],
        }
    }
}

pub const MEMO_SECTIONS: [&str; 5] = [
    "interpretation_under_assumptions",
    "uncertainty",
    "boundary_evaluation",
    "supplement_roles",
    "inheritance_compliance",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticMemo {
    pub project_ref: Identifier,
    #[serde(default)]
    pub sections: BTreeMap<String, String>,
}

/// One row per active unit of the project, excluded units included.
pub fn build_study_log(bundle: &ProjectBundle, project: &Identifier) -> Result<Vec<StudyLogEntry>, Diagnostics> {
    let mut rows = Vec::new();
    let mut diags = Vec::new();
    for u in bundle.active_units(project) {
        let path = u.study_id.to_string();
        let Some(tier) = unit_tier(u) else {
            diags.push(Diagnostic::at(Code::MissingField, &path, "unit has no tier"));
            continue;
        };
        if u.design_type.trim().is_empty() {
            diags.push(Diagnostic::at(Code::MissingField, &path, "design_type is empty"));
        }
        if u.tier_justification.trim().is_empty() {
            diags.push(Diagnostic::at(Code::MissingField, &path, "no reasons for tiering"));
        }
        let Some(log) = &u.study_log else {
            diags.push(Diagnostic::at(Code::MissingField, &path, "no study_log content declared"));
            continue;
        };
        if log.bias_considerations.is_empty() || log.bias_considerations.iter().any(|b| b.text.trim().is_empty()) {
            diags.push(Diagnostic::at(Code::BiasUndirected, &path, "bias considerations need a direction and a statement"));
        }
        rows.push(StudyLogEntry {
            study_id: u.study_id.clone(),
            design_type: u.design_type.clone(),
            tier_assignment: tier,
            reasons_for_tiering: u.tier_justification.clone(),
            bias_considerations: log.bias_considerations.clone(),
            measurement_definition_issues: log.measurement_definition_issues.clone(),
            notes: log.notes.clone(),
        });
    }
    crate::diag::check(diags)?;
    Ok(rows)
}

/// Rows for core and supplement units only, in study-id order.
pub fn build_tier_table(bundle: &ProjectBundle, project: &Identifier) -> Vec<TierTableRow> {
    let p = bundle.project(project);
    bundle
        .active_units(project)
        .into_iter()
        .filter(|u| unit_tier(u).is_some_and(|t| t != Tier::Excluded))
        .map(|u| {
            let fields = u.tier_table.clone().unwrap_or_default();
            let evidence_type = p.and_then(|p| p.assignment_for(&u.study_id)).map(|a| EvidenceType {
                role: a.role,
                objective: bundle.route(&a.route_ref).map(|r| r.objective.clone()).unwrap_or_default(),
            });
            TierTableRow {
                study_id: u.study_id.clone(),
                methods_summary: fields.methods_summary,
                evidence_type,
                strengths: fields.strengths,
                limitations: fields.limitations,
            }
        })
        .collect()
}

/// Completeness of the declared Study Log and Tier Table content.
pub fn output_diagnostics(bundle: &ProjectBundle, project: &Identifier) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let units = bundle.active_units(project);
    let path = project.to_string();
    if units.is_empty() {
        out.push(Diagnostic::at(Code::EmptyStudyLog, &path, "project has no evidential units"));
        return out;
    }
    if units.iter().all(|u| u.study_log.is_none()) {
        out.push(Diagnostic::at(Code::NoStudyLog, &path, "no unit declares Study Log content"));
    } else if let Err(d) = build_study_log(bundle, project) {
        out.extend(d.0);
    }
    let tabled: Vec<_> = units.iter().filter(|u| unit_tier(u).is_some_and(|t| t != Tier::Excluded)).collect();
    if !tabled.is_empty() && tabled.iter().all(|u| u.tier_table.is_none()) {
        out.push(Diagnostic::at(Code::NoTierTable, &path, "no core or supplement unit declares Tier Table content"));
    } else {
        for u in tabled {
            let upath = u.study_id.to_string();
            match &u.tier_table {
                None => out.push(Diagnostic::at(Code::MissingField, &upath, "no tier_table content declared")),
                Some(t) => {
                    for (k, v) in [("methods_summary", &t.methods_summary), ("strengths", &t.strengths), ("limitations", &t.limitations)] {
                        if v.trim().is_empty() {
                            out.push(Diagnostic::at(Code::MissingField, &upath, format!("tier_table.{k} is empty")));
                        }
                    }
                }
            }
        }
    }
    out
}

/// Decisions a critique may cite: the project's units and routes, and the
/// assumptions of those routes.
fn citable(bundle: &ProjectBundle, project: &Identifier) -> BTreeSet<Identifier> {
    let mut out: BTreeSet<Identifier> = bundle.active_units(project).into_iter().map(|u| u.study_id.clone()).collect();
    for r in bundle.routes_of(project) {
        out.insert(r.id.clone());
        out.extend(r.assumptions.iter().map(|a| a.id.clone()));
    }
    out
}

pub fn validate_reviewer_block(block: &ReviewerBlock, bundle: &ProjectBundle) -> Vec<Diagnostic> {
    let path = format!("reviewer_block({})", block.project_ref);
    let mut out = Vec::new();
    let findings = block.methodological_findings.iter().filter(|f| !f.trim().is_empty()).count();
    if findings < 2 {
        out.push(Diagnostic::at(Code::RbFindings, &path, format!("{findings} methodological finding(s), 2 required")));
    }
    if block.conceptual_insight.trim().is_empty() {
        out.push(Diagnostic::at(Code::RbInsight, &path, "no conceptual insight"));
    }
    if block.anticipated_critique.text.trim().is_empty() {
        out.push(Diagnostic::at(Code::RbCritique, &path, "no anticipated critique"));
    }
    let refs = &block.anticipated_critique.referenced_decisions;
    let allowed = citable(bundle, &block.project_ref);
    if refs.is_empty() || refs.iter().any(|r| !allowed.contains(r)) {
        out.push(Diagnostic::at(Code::RbCritiqueUnanchored, &path, "the critique must cite tiering or routing decisions of this project"));
    }
    if block.disconfirming_model.trim().is_empty() {
        out.push(Diagnostic::at(Code::RbDisconfirming, &path, "no disconfirming model"));
    }
    let listed: BTreeSet<&Identifier> = block.assumptions_ref.iter().collect();
    let expected: Option<BTreeSet<&Identifier>> =
        bundle.committed_route(&block.project_ref).map(|r| r.assumptions.iter().map(|a| &a.id).collect());
    if expected.as_ref() != Some(&listed) || listed.len() != block.assumptions_ref.len() {
        out.push(Diagnostic::at(Code::RbAssumptions, &path, "assumptions must list the committed route's assumptions exactly"));
    }
    out
}

pub fn validate_memo(memo: &AnalyticMemo) -> Vec<Diagnostic> {
    let path = format!("memo({})", memo.project_ref);
    MEMO_SECTIONS
        .iter()
        .filter(|k| memo.sections.get(**k).is_none_or(|v| v.trim().is_empty()))
        .map(|k| Diagnostic::at(Code::MemoSection, &path, format!("section `{k}` is missing or empty")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evidence_type_labels() {
        let e = |role, o: &str| EvidenceType { role, objective: o.into() }.to_string();
        assert_eq!(e(Role::PrimaryInference, "associational"), "Associational");
        assert_eq!(e(Role::MeasurementEvaluation, "measurement-evaluation"), "Measurement evaluation");
        assert_eq!(e(Role::PrimaryInference, ""), "Primary inference");
    }

    #[test]
    fn memo_sections_are_all_required() {
        let mut m = AnalyticMemo { project_ref: Identifier::child("C", "p"), sections: BTreeMap::new() };
        assert_eq!(validate_memo(&m).len(), 5);
        for k in MEMO_SECTIONS {
            m.sections.insert(k.to_string(), "text".into());
        }
        assert!(validate_memo(&m).is_empty());
    }
}
