//! Core / Supplement / Excluded tiering from declared assessments.
//!
//! The engine never judges a study. Authors declare ordinal assessments on
//! four dimensions; [`compute_tier`] applies a fixed decision table to them
//! and every outcome carries the [`Rule`] that fired.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audit::{self, EventPayload, Stamp};
use crate::bundle::ProjectBundle;
use crate::diag::{self, Code, Diagnostic, Diagnostics};
use crate::id::{Identifier, Timestamp};
use crate::reporting::{StudyLogFields, TierTableFields};

/// Ordered by inferential privilege: `Excluded < Supplement < Core`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Excluded,
    Supplement,
    Core,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Excluded, Tier::Supplement, Tier::Core];

    pub fn as_str(self) -> &'static str {
        match self {
            Tier::Excluded => "excluded",
            Tier::Supplement => "supplement",
            Tier::Core => "core",
        }
    }

    /// Capitalized form used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Tier::Excluded => "Excluded",
            Tier::Supplement => "Supplement",
            Tier::Core => "Core",
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    Mismatch,
    Partial,
    Aligned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measurement {
    Failed,
    ConditionalProxy,
    MinorLimitation,
    Adequate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Design {
    Incompatible,
    Limited,
    Sufficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reporting {
    Opaque,
    Ambiguous,
    Transparent,
}

impl Alignment {
    pub const ALL: [Alignment; 3] = [Alignment::Mismatch, Alignment::Partial, Alignment::Aligned];
}
impl Measurement {
    pub const ALL: [Measurement; 4] =
        [Measurement::Failed, Measurement::ConditionalProxy, Measurement::MinorLimitation, Measurement::Adequate];
}
impl Design {
    pub const ALL: [Design; 3] = [Design::Incompatible, Design::Limited, Design::Sufficient];
}
impl Reporting {
    pub const ALL: [Reporting; 3] = [Reporting::Opaque, Reporting::Ambiguous, Reporting::Transparent];
}

/// The four assessed dimensions, used by [`DeclaredAssumption::covers`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    ConstructAlignment,
    Measurement,
    Design,
    Reporting,
}

impl Dimension {
    pub const ALL: [Dimension; 4] =
        [Dimension::ConstructAlignment, Dimension::Measurement, Dimension::Design, Dimension::Reporting];
}

/// One declared reading of an evidential unit. The variant order of each
/// field runs from worst to best.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Assessment {
    pub construct_alignment: Alignment,
    pub measurement: Measurement,
    pub design: Design,
    pub reporting: Reporting,
    pub speculation_required: bool,
}

impl Assessment {
    pub const PERFECT: Assessment = Assessment {
        construct_alignment: Alignment::Aligned,
        measurement: Measurement::Adequate,
        design: Design::Sufficient,
        reporting: Reporting::Transparent,
        speculation_required: false,
    };

    /// Every combination of the five fields (3 x 4 x 3 x 3 x 2 = 216).
    pub fn all() -> impl Iterator<Item = Assessment> {
        Alignment::ALL.into_iter().flat_map(|ca| {
            Measurement::ALL.into_iter().flat_map(move |m| {
                Design::ALL.into_iter().flat_map(move |d| {
                    Reporting::ALL.into_iter().flat_map(move |r| {
                        [false, true].into_iter().map(move |s| Assessment {
                            construct_alignment: ca,
                            measurement: m,
                            design: d,
                            reporting: r,
                            speculation_required: s,
                        })
                    })
                })
            })
        })
    }

    /// Dimensions that sit below the core threshold without disqualifying.
    pub fn sub_core(&self) -> BTreeSet<Dimension> {
        let mut out = BTreeSet::new();
        if self.construct_alignment == Alignment::Partial {
            out.insert(Dimension::ConstructAlignment);
        }
        if self.measurement == Measurement::ConditionalProxy {
            out.insert(Dimension::Measurement);
        }
        if self.design == Design::Limited {
            out.insert(Dimension::Design);
        }
        if self.reporting == Reporting::Ambiguous {
            out.insert(Dimension::Reporting);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeclaredAssumption {
    pub id: String,
    pub text: String,
    pub covers: BTreeSet<Dimension>,
}

/// A documented tier change.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReTierEvent {
    pub timestamp: Timestamp,
    pub source_of_information: String,
    pub justification: String,
    pub implications_for_route: String,
    pub old_tier: Tier,
    pub new_tier: Tier,
}

impl ReTierEvent {
    pub fn missing_fields(&self) -> Vec<&'static str> {
        [
            ("source_of_information", &self.source_of_information),
            ("justification", &self.justification),
            ("implications_for_route", &self.implications_for_route),
        ]
        .into_iter()
        .filter(|(_, v)| v.trim().is_empty())
        .map(|(k, _)| k)
        .collect()
    }
}

/// How a unit operationalizes a construct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementDecl {
    pub id: String,
    pub construct_ref: Identifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_ref: Option<Identifier>,
    #[serde(default)]
    pub procedure: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvidentialUnit {
    pub study_id: Identifier,
    pub project_ref: Identifier,
    pub design_type: String,
    pub interpretations: Vec<Assessment>,
    #[serde(default)]
    pub splittable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub declared_tier: Option<Tier>,
    #[serde(default)]
    pub tier_justification: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub explicit_assumptions: Vec<DeclaredAssumption>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub retier_events: Vec<ReTierEvent>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub measurements: Vec<MeasurementDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study_log: Option<StudyLogFields>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier_table: Option<TierTableFields>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split_from: Option<Identifier>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub superseded_by: Vec<Identifier>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quarantined: bool,
}

impl EvidentialUnit {
    pub fn new(study_id: Identifier, project_ref: Identifier, design_type: impl Into<String>, a: Assessment) -> Self {
        EvidentialUnit {
            study_id,
            project_ref,
            design_type: design_type.into(),
            interpretations: vec![a],
            splittable: false,
            declared_tier: None,
            tier_justification: String::new(),
            explicit_assumptions: vec![],
            retier_events: vec![],
            measurements: vec![],
            study_log: None,
            tier_table: None,
            split_from: None,
            superseded_by: vec![],
            quarantined: false,
        }
    }

    /// Takes part in tiering, routing and reporting.
    pub fn is_active(&self) -> bool {
        !self.quarantined && self.superseded_by.is_empty()
    }

    /// The declared tier folded through re-tiering records in timestamp order.
    pub fn effective_tier(&self) -> Option<Tier> {
        let mut events: Vec<&ReTierEvent> = self.retier_events.iter().collect();
        events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp));
        events.last().map(|e| e.new_tier).or(self.declared_tier)
    }

    pub fn covered(&self) -> BTreeSet<Dimension> {
        self.explicit_assumptions.iter().flat_map(|a| a.covers.iter().copied()).collect()
    }

    /// Checks that hold for any unit regardless of the rest of the bundle.
    pub fn invariant_diagnostics(&self, path: &str) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        if self.interpretations.is_empty() {
            out.push(Diagnostic::at(Code::NoInterpretation, path, "no interpretations declared"));
        }
        if self.declared_tier.is_some() && self.tier_justification.trim().is_empty() {
            out.push(Diagnostic::at(Code::NoJustification, path, "declared tier has no justification"));
        }
        for a in &self.explicit_assumptions {
            if a.covers.is_empty() {
                out.push(Diagnostic::at(
                    Code::AssumptionCovers,
                    format!("{path}.explicit_assumptions.{}", a.id),
                    "assumption covers no dimension",
                ));
            }
        }
        let mut current = self.declared_tier;
        for (i, e) in self.retier_events.iter().enumerate() {
            let epath = format!("{path}.retier_events[{i}]");
            let missing = e.missing_fields();
            if !missing.is_empty() {
                out.push(Diagnostic::at(Code::SilentRetier, &epath, format!("incomplete record: {}", missing.join(", "))));
            }
            match current {
                None => out.push(Diagnostic::at(Code::SilentRetier, &epath, "re-tiering a unit that was never declared")),
                Some(t) if t != e.old_tier => out.push(Diagnostic::at(
                    Code::StaleOldTier,
                    &epath,
                    format!("record starts from {} but the tier was {t}", e.old_tier),
                )),
                Some(_) => {}
            }
            if i > 0 && e.timestamp < self.retier_events[i - 1].timestamp {
                out.push(Diagnostic::at(Code::EventOrder, &epath, "re-tiering records out of timestamp order"));
            }
            current = Some(e.new_tier);
        }
        out
    }
}

/// Identifier of the decision-table row that produced a tier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "R_STEP1_MISMATCH")]
    Step1Mismatch,
    #[serde(rename = "R_STEP1_OPACITY")]
    Step1Opacity,
    #[serde(rename = "R_SPECULATION")]
    Speculation,
    #[serde(rename = "R_MEASUREMENT_FAILED")]
    MeasurementFailed,
    #[serde(rename = "R_DESIGN_INCOMPATIBLE")]
    DesignIncompatible,
    #[serde(rename = "R_CORE")]
    Core,
    #[serde(rename = "R_SUPPLEMENT_COVERED")]
    SupplementCovered,
    #[serde(rename = "R_UNCOVERED_AMBIGUITY")]
    UncoveredAmbiguity,
    #[serde(rename = "R_CONSERVATIVE_MERGE")]
    ConservativeMerge,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::Step1Mismatch => "R_STEP1_MISMATCH",
            Rule::Step1Opacity => "R_STEP1_OPACITY",
            Rule::Speculation => "R_SPECULATION",
            Rule::MeasurementFailed => "R_MEASUREMENT_FAILED",
            Rule::DesignIncompatible => "R_DESIGN_INCOMPATIBLE",
            Rule::Core => "R_CORE",
            Rule::SupplementCovered => "R_SUPPLEMENT_COVERED",
            Rule::UncoveredAmbiguity => "R_UNCOVERED_AMBIGUITY",
            Rule::ConservativeMerge => "R_CONSERVATIVE_MERGE",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Rule::Step1Mismatch => "construct mismatch excludes immediately",
            Rule::Step1Opacity => "opaque reporting excludes immediately",
            Rule::Speculation => "tiering would require speculative reconstruction",
            Rule::MeasurementFailed => "measurement does not approximate the construct",
            Rule::DesignIncompatible => "design cannot bear the inference",
            Rule::Core => "aligned, adequately measured, sufficient and transparent",
            Rule::SupplementCovered => "every sub-core dimension is covered by an explicit assumption",
            Rule::UncoveredAmbiguity => "an ambiguity is not covered by any explicit assumption",
            Rule::ConservativeMerge => "several unsplittable interpretations; the most conservative tier applies",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The decision table. Total over all assessments.
pub fn compute_tier(a: &Assessment, covered: &BTreeSet<Dimension>) -> (Tier, Rule) {
    if a.construct_alignment == Alignment::Mismatch {
        return (Tier::Excluded, Rule::Step1Mismatch);
    }
    if a.reporting == Reporting::Opaque {
        return (Tier::Excluded, Rule::Step1Opacity);
    }
    if a.speculation_required {
        return (Tier::Excluded, Rule::Speculation);
    }
    if a.measurement == Measurement::Failed {
        return (Tier::Excluded, Rule::MeasurementFailed);
    }
    if a.design == Design::Incompatible {
        return (Tier::Excluded, Rule::DesignIncompatible);
    }
    let gaps = a.sub_core();
    if gaps.is_empty() {
        return (Tier::Core, Rule::Core);
    }
    if gaps.is_subset(covered) {
        (Tier::Supplement, Rule::SupplementCovered)
    } else {
        (Tier::Excluded, Rule::UncoveredAmbiguity)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TierDecision {
    pub unit: Identifier,
    pub tier: Tier,
    pub rule: Rule,
    /// Per-interpretation outcomes; one entry for single-reading units.
    pub interpretations: Vec<(Tier, Rule)>,
}

impl fmt::Display for TierDecision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.tier, self.rule)
    }
}

pub fn tier_unit(u: &EvidentialUnit) -> Result<TierDecision, Diagnostic> {
    let path = u.study_id.to_string();
    if u.interpretations.is_empty() {
        return Err(Diagnostic::at(Code::NoInterpretation, path, "no interpretations declared"));
    }
    if u.interpretations.len() > 1 && u.splittable {
        return Err(Diagnostic::at(
            Code::MustSplit,
            path,
            format!("{} interpretations on a splittable unit; split it first", u.interpretations.len()),
        ));
    }
    let covered = u.covered();
    let each: Vec<(Tier, Rule)> = u.interpretations.iter().map(|a| compute_tier(a, &covered)).collect();
    let (tier, rule) = if each.len() == 1 {
        each[0]
    } else {
        (each.iter().map(|(t, _)| *t).min().expect("nonempty"), Rule::ConservativeMerge)
    };
    Ok(TierDecision { unit: u.study_id.clone(), tier, rule, interpretations: each })
}

/// Compare the unit's effective tier with the tier its assessments determine.
pub fn check_tier_declaration(u: &EvidentialUnit) -> Vec<Diagnostic> {
    let path = u.study_id.to_string();
    let mut out = Vec::new();
    let Some(declared) = u.effective_tier() else {
        out.push(Diagnostic::at(Code::MissingField, &path, "no tier declared"));
        return out;
    };
    if u.tier_justification.trim().is_empty() {
        out.push(Diagnostic::at(Code::NoJustification, &path, "declared tier has no justification"));
    }
    match tier_unit(u) {
        Err(d) => out.push(d),
        Ok(dec) if dec.tier != declared => out.push(Diagnostic::at(
            Code::TierMismatch,
            &path,
            format!("declared {declared}, assessments give {} ({})", dec.tier, dec.rule),
        )),
        Ok(_) => {}
    }
    out
}

fn active_unit<'a>(bundle: &'a ProjectBundle, id: &Identifier) -> Result<&'a EvidentialUnit, Diagnostics> {
    bundle
        .unit(id)
        .filter(|u| u.is_active())
        .ok_or_else(|| Diagnostic::at(Code::UnknownUnit, id.to_string(), format!("no active unit `{id}`")).into())
}

/// Record the first tier declaration of a unit.
pub fn declare_tier(
    bundle: &mut ProjectBundle,
    unit: &Identifier,
    tier: Tier,
    justification: &str,
    stamp: &Stamp,
) -> Result<TierDecision, Diagnostics> {
    let u = active_unit(bundle, unit)?;
    let path = unit.to_string();
    let mut diags = Vec::new();
    if u.declared_tier.is_some() {
        diags.push(Diagnostic::at(Code::SilentRetier, &path, "tier already declared; use a re-tiering record"));
    }
    if justification.trim().is_empty() {
        diags.push(Diagnostic::at(Code::NoJustification, &path, "a tier needs a justification"));
    }
    let decision = match tier_unit(u) {
        Ok(d) => Some(d),
        Err(d) => {
            diags.push(d);
            None
        }
    };
    if let Some(d) = &decision {
        if d.tier != tier {
            diags.push(Diagnostic::at(Code::TierMismatch, &path, format!("declared {tier}, assessments give {d}")));
        }
    }
    diag::check(diags)?;
    let decision = decision.expect("checked");
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::TierDeclared {
            unit: unit.clone(),
            tier,
            rule: decision.rule,
            justification: justification.to_string(),
        },
        vec![unit.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    let u = bundle.unit_mut(unit).expect("checked");
    u.declared_tier = Some(tier);
    u.tier_justification = justification.to_string();
    bundle.events.push(event);
    Ok(decision)
}

/// Change a unit's tier through a complete re-tiering record, replacing its
/// assessments in the same step so the declaration stays consistent.
pub fn apply_retier(
    bundle: &mut ProjectBundle,
    unit: &Identifier,
    record: ReTierEvent,
    interpretations: Vec<Assessment>,
    stamp: &Stamp,
) -> Result<(), Diagnostics> {
    let u = active_unit(bundle, unit)?;
    let path = unit.to_string();
    let mut diags = Vec::new();
    let missing = record.missing_fields();
    if !missing.is_empty() {
        diags.push(Diagnostic::at(Code::SilentRetier, &path, format!("incomplete re-tiering record: {}", missing.join(", "))));
    }
    match u.effective_tier() {
        None => diags.push(Diagnostic::at(Code::SilentRetier, &path, "unit has no declared tier to revise")),
        Some(t) if t != record.old_tier => diags.push(Diagnostic::at(
            Code::StaleOldTier,
            &path,
            format!("record starts from {} but the unit is {t}", record.old_tier),
        )),
        Some(_) => {}
    }
    if u.retier_events.last().is_some_and(|last| record.timestamp < last.timestamp) {
        diags.push(Diagnostic::at(Code::EventOrder, &path, "record predates the previous re-tiering"));
    }
    let mut revised = u.clone();
    revised.interpretations = interpretations;
    match tier_unit(&revised) {
        Err(d) => diags.push(d),
        Ok(d) if d.tier != record.new_tier => diags.push(Diagnostic::at(
            Code::TierMismatch,
            &path,
            format!("record moves to {}, revised assessments give {d}", record.new_tier),
        )),
        Ok(_) => {}
    }
    diag::check(diags)?;
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::Retier { unit: unit.clone(), record: record.clone() },
        vec![unit.clone()],
    );
    audit::check_append(&bundle.events, &event)?;
    revised.retier_events.push(record);
    *bundle.unit_mut(unit).expect("checked") = revised;
    bundle.events.push(event);
    Ok(())
}

/// Split a splittable unit into one unit per interpretation. The parts keep
/// the original's design and declared content and link back to it; the
/// original is retained but superseded.
pub fn split_unit(
    bundle: &mut ProjectBundle,
    unit: &Identifier,
    names: &[&str],
    stamp: &Stamp,
) -> Result<Vec<Identifier>, Diagnostics> {
    let u = active_unit(bundle, unit)?;
    let path = unit.to_string();
    let mut diags = Vec::new();
    if !u.splittable {
        diags.push(Diagnostic::at(Code::NotSplittable, &path, "unit is not declared splittable"));
    }
    let unique: BTreeSet<&&str> = names.iter().collect();
    if names.len() != u.interpretations.len() || unique.len() != names.len() {
        diags.push(Diagnostic::at(
            Code::NameArity,
            &path,
            format!("{} unique names needed, got {:?}", u.interpretations.len(), names),
        ));
    }
    let declared = crate::bundle::refs::declared_ids(bundle);
    let mut ids = Vec::new();
    for name in names {
        match format!("{}:{}:{name}", unit.namespace.prefix(), unit.owner).parse::<Identifier>() {
            Ok(id) if declared.contains_key(&id) => {
                diags.push(Diagnostic::at(Code::DupId, &path, format!("`{id}` is already declared")))
            }
            Ok(id) => ids.push(id),
            Err(e) => diags.push(Diagnostic::at(Code::NameArity, &path, e.to_string())),
        }
    }
    diag::check(diags)?;
    let parts: Vec<EvidentialUnit> = ids
        .iter()
        .zip(&u.interpretations)
        .map(|(id, a)| EvidentialUnit {
            study_id: id.clone(),
            interpretations: vec![*a],
            splittable: false,
            declared_tier: None,
            tier_justification: String::new(),
            retier_events: vec![],
            split_from: Some(unit.clone()),
            superseded_by: vec![],
            ..u.clone()
        })
        .collect();
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::UnitSplit { original: unit.clone(), parts: ids.clone() },
        std::iter::once(unit.clone()).chain(ids.iter().cloned()).collect(),
    );
    audit::check_append(&bundle.events, &event)?;
    bundle.unit_mut(unit).expect("checked").superseded_by = ids.clone();
    bundle.units.extend(parts);
    bundle.events.push(event);
    Ok(ids)
}
