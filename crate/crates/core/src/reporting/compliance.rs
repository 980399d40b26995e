use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bundle::{self, ProjectBundle};
use crate::diag::Diagnostic;
use crate::{audit, contamination, layers, routing, tiering};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Compliant,
    NonCompliant,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Compliant => "compliant",
            Verdict::NonCompliant => "non_compliant",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComplianceReport {
    pub verdict: Verdict,
    pub findings: Vec<Diagnostic>,
}

impl ComplianceReport {
    /// Build a report from findings; the verdict follows from their severities.
    pub fn from_findings(mut findings: Vec<Diagnostic>) -> Self {
        findings.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        findings.dedup();
        let verdict = if findings.iter().any(|d| d.is_error()) { Verdict::NonCompliant } else { Verdict::Compliant };
        ComplianceReport { verdict, findings }
    }

    pub fn is_compliant(&self) -> bool {
        self.verdict == Verdict::Compliant
    }
}

/// Run every validator over the bundle.
pub fn compliance_verdict(b: &ProjectBundle) -> ComplianceReport {
    let mut findings = bundle::structural_diagnostics(b);
    findings.extend(layers::validate_layers(b));
    for u in b.units.iter() {
        findings.extend(u.invariant_diagnostics(&u.study_id.to_string()));
        if u.is_active() {
            findings.extend(tiering::check_tier_declaration(u));
        }
    }
    for p in &b.projects {
        findings.extend(routing::route_compliance(b, &p.id));
        findings.extend(super::output_diagnostics(b, &p.id));
        match b.reviewer_block(&p.id) {
            Some(block) => findings.extend(super::validate_reviewer_block(block, b)),
            None => findings.push(Diagnostic::at(crate::diag::Code::NoReviewerBlock, p.id.to_string(), "no Reviewer Block")),
        }
        match b.memo(&p.id) {
            Some(m) => findings.extend(super::validate_memo(m)),
            None => findings.push(Diagnostic::at(crate::diag::Code::NoAnalyticMemo, p.id.to_string(), "no Analytic Memo")),
        }
    }
    findings.extend(contamination::contamination_findings(b));
    findings.extend(audit::check_log(&b.events));
    ComplianceReport::from_findings(findings)
}
