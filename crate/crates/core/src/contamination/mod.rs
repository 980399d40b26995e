//! Cross-layer information movement: the flow-permission matrix, static
//! contamination scanning, downstream tracing, resolution and the gate that
//! upward insight must pass.

mod resolve;
mod scan;
mod trace;

use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::bundle::{refs, ProjectBundle};
use crate::audit::{self, Stamp};
use crate::diag::{Code, Diagnostic, Diagnostics};
use crate::id::{text_refs, IdError, Identifier, LayerId, LayerKind, Namespace, Timestamp};
use crate::layers::AbstractionKind;

pub use resolve::{flag_contamination, quarantine, resolve_contamination, Action};
pub use scan::{contamination_findings, flagged_unresolved, scan_bundle};
pub use trace::{trace_downstream, Affected};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoClass {
    Content,
    Measurement,
    Assumption,
    MethodologicalInsight,
}

impl InfoClass {
    pub const ALL: [InfoClass; 4] =
        [InfoClass::Content, InfoClass::Measurement, InfoClass::Assumption, InfoClass::MethodologicalInsight];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Upward,
    Downward,
    Horizontal,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Upward => "upward",
            Direction::Downward => "downward",
            Direction::Horizontal => "horizontal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nature {
    Content,
    Assumption,
    Measurement,
    Structural,
}

impl Nature {
    fn of_class(c: InfoClass) -> Nature {
        match c {
            InfoClass::Measurement => Nature::Measurement,
            InfoClass::Assumption => Nature::Assumption,
            InfoClass::Content | InfoClass::MethodologicalInsight => Nature::Content,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContaminationRule {
    #[serde(rename = "R1_upward_content")]
    R1UpwardContent,
    #[serde(rename = "R2_downward_rewrite")]
    R2DownwardRewrite,
    #[serde(rename = "R3_horizontal_borrowing")]
    R3HorizontalBorrowing,
    #[serde(rename = "R4_missing_contract")]
    R4MissingContract,
    #[serde(rename = "R5_meta_engine_insulation")]
    R5MetaEngineInsulation,
}

impl ContaminationRule {
    pub fn code(self) -> Code {
        match self {
            ContaminationRule::R1UpwardContent => Code::R1UpwardContent,
            ContaminationRule::R2DownwardRewrite => Code::R2DownwardRewrite,
            ContaminationRule::R3HorizontalBorrowing => Code::R3HorizontalBorrowing,
            ContaminationRule::R4MissingContract => Code::R4MissingContract,
            ContaminationRule::R5MetaEngineInsulation => Code::R5MetaEngineInsulation,
        }
    }
}

impl fmt::Display for ContaminationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code().as_str())
    }
}

/// Where something sits in the bundle, rendered as `child:C:S1`,
/// `flow(F1)`, `contract(K1)`, `reviewer_block(<project>)`,
/// `memo(<project>)` or `layer(C)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    Decl(Identifier),
    Flow(String),
    Contract(String),
    ReviewerBlock(Identifier),
    Memo(Identifier),
    Layer(LayerId),
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Site::Decl(id) => write!(f, "{id}"),
            Site::Flow(x) => write!(f, "flow({x})"),
            Site::Contract(x) => write!(f, "contract({x})"),
            Site::ReviewerBlock(p) => write!(f, "reviewer_block({p})"),
            Site::Memo(p) => write!(f, "memo({p})"),
            Site::Layer(l) => write!(f, "layer({l})"),
        }
    }
}

/// Split `name(inner)` into its parts.
pub(crate) fn call_form(s: &str) -> Option<(&str, &str)> {
    let (name, rest) = s.split_once('(')?;
    Some((name, rest.strip_suffix(')')?))
}

impl FromStr for Site {
    type Err = IdError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || IdError::Identifier(s.to_string());
        match call_form(s) {
            Some(("flow", x)) if !x.is_empty() => Ok(Site::Flow(x.to_string())),
            Some(("contract", x)) if !x.is_empty() => Ok(Site::Contract(x.to_string())),
            Some(("reviewer_block", p)) => Ok(Site::ReviewerBlock(p.parse()?)),
            Some(("memo", p)) => Ok(Site::Memo(p.parse()?)),
            Some(("layer", l)) => Ok(Site::Layer(l.parse()?)),
            Some(_) => Err(bad()),
            None => Ok(Site::Decl(s.parse()?)),
        }
    }
}

impl Serialize for Site {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Site {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// What an upward insight proposes to add (or, illegally, change).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum InsightEffect {
    AppendLaw { id: Identifier, text: String },
    AppendAbstraction { id: Identifier, kind: AbstractionKind, definition: String },
    Amend { target: Identifier, text: String },
    Rescind { target: Identifier },
}

impl InsightEffect {
    pub fn identifiers(&self) -> Vec<&Identifier> {
        match self {
            InsightEffect::AppendLaw { id, .. } | InsightEffect::AppendAbstraction { id, .. } => vec![id],
            InsightEffect::Amend { target, .. } | InsightEffect::Rescind { target } => vec![target],
        }
    }

    pub fn text(&self) -> &str {
        match self {
            InsightEffect::AppendLaw { text, .. } | InsightEffect::Amend { text, .. } => text,
            InsightEffect::AppendAbstraction { definition, .. } => definition,
            InsightEffect::Rescind { .. } => "",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowEvent {
    pub id: String,
    pub source_layer: LayerId,
    pub dest_layer: LayerId,
    pub info_class: InfoClass,
    pub payload: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effect: Option<InsightEffect>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contract_ref: Option<String>,
    pub timestamp: Timestamp,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quarantined: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryContract {
    pub id: String,
    pub info_type: InfoClass,
    pub origin_layer: LayerId,
    pub destination_layer: LayerId,
    #[serde(default)]
    pub legal_justification: String,
    #[serde(default)]
    pub no_reinterpretation_clause: bool,
    /// Sequence number of the audit event that documents the contract.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub documentation_ref: Option<u64>,
}

impl BoundaryContract {
    pub fn missing_elements(&self, bundle: &ProjectBundle) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.legal_justification.trim().is_empty() {
            out.push("legal_justification");
        }
        if !self.no_reinterpretation_clause {
            out.push("no_reinterpretation_clause");
        }
        if !self.documentation_ref.is_some_and(|s| bundle.events.iter().any(|e| e.sequence == s)) {
            out.push("documentation_ref");
        }
        out
    }

    fn authorizes(&self, bundle: &ProjectBundle, class: InfoClass, from: &LayerId, to: &LayerId) -> bool {
        self.info_type == class && &self.origin_layer == from && &self.destination_layer == to && self.missing_elements(bundle).is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsightProposal {
    pub id: String,
    pub origin_layer: LayerId,
    pub target_layer: LayerId,
    pub statement: String,
    pub effect: Option<InsightEffect>,
}

impl InsightProposal {
    pub fn referenced_terms(&self) -> Vec<Identifier> {
        let mut out: Vec<Identifier> = text_refs(&self.statement).into_iter().map(|(i, _)| i).collect();
        if let Some(e) = &self.effect {
            out.extend(text_refs(e.text()).into_iter().map(|(i, _)| i));
        }
        out
    }

    fn of_flow(f: &FlowEvent) -> Self {
        InsightProposal {
            id: f.id.clone(),
            origin_layer: f.source_layer.clone(),
            target_layer: f.dest_layer.clone(),
            statement: f.payload.clone(),
            effect: f.effect.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum FlowVerdict {
    Allowed,
    Violation { direction: Direction, rule: ContaminationRule },
}

/// The permission matrix for one recorded flow.
pub fn check_flow(f: &FlowEvent, bundle: &ProjectBundle) -> Result<FlowVerdict, Diagnostic> {
    let layer = |id: &LayerId| {
        bundle.layer(id).ok_or_else(|| Diagnostic::at(Code::UnknownLayer, format!("flow({})", f.id), format!("unknown layer `{id}`")))
    };
    let src = layer(&f.source_layer)?;
    let dst = layer(&f.dest_layer)?;
    use ContaminationRule::*;
    if src.id == dst.id || bundle.is_ancestor(&src.id, &dst.id) {
        return Ok(FlowVerdict::Allowed);
    }
    let upward = |rule| Ok(FlowVerdict::Violation { direction: Direction::Upward, rule });
    if bundle.is_ancestor(&dst.id, &src.id) || dst.kind.level() > src.kind.level() {
        // Contracts never legalize upward movement.
        if f.info_class != InfoClass::MethodologicalInsight {
            return upward(R1UpwardContent);
        }
        if validate_insight(&InsightProposal::of_flow(f), bundle).is_empty() {
            return Ok(FlowVerdict::Allowed);
        }
        return upward(if dst.kind == LayerKind::Grandparent { R5MetaEngineInsulation } else { R1UpwardContent });
    }
    match &f.contract_ref {
        None => Ok(FlowVerdict::Violation { direction: Direction::Horizontal, rule: R3HorizontalBorrowing }),
        Some(c) => match bundle.contract(c) {
            Some(k) if k.authorizes(bundle, f.info_class, &src.id, &dst.id) => Ok(FlowVerdict::Allowed),
            _ => Ok(FlowVerdict::Violation { direction: Direction::Horizontal, rule: R4MissingContract }),
        },
    }
}

static TERM_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"`([^`]+)`").unwrap());

/// Backtick-delimited technical terms, lowercased. Identifiers are excluded;
/// they are judged by namespace instead.
pub fn technical_terms(text: &str) -> Vec<String> {
    TERM_RE
        .captures_iter(text)
        .map(|c| c[1].trim().to_string())
        .filter(|t| !t.contains(':') || t.parse::<Identifier>().is_err())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Identifiers in `text` that belong to layers below a layer of `kind`.
pub fn lower_layer_refs(text: &str, kind: LayerKind) -> Vec<Identifier> {
    refs::lower_namespace_refs(text, kind)
}

/// Gate for upward insight. Empty means the proposal may pass.
pub fn validate_insight(p: &InsightProposal, bundle: &ProjectBundle) -> Vec<Diagnostic> {
    let path = format!("insight({})", p.id);
    let mut out = Vec::new();
    let (Some(origin), Some(target)) = (bundle.layer(&p.origin_layer), bundle.layer(&p.target_layer)) else {
        out.push(Diagnostic::at(Code::UnknownLayer, &path, "origin or target layer does not exist"));
        return out;
    };
    if origin.parent_ref.as_ref() != Some(&target.id) {
        out.push(Diagnostic::at(
            Code::InsightHop,
            &path,
            format!("`{}` is not the layer directly above `{}`", target.id, origin.id),
        ));
    }
    for id in p.referenced_terms() {
        let foreign = match id.namespace {
            Namespace::Child => true,
            Namespace::Parent => target.kind == LayerKind::Grandparent,
            _ => false,
        };
        if foreign {
            out.push(Diagnostic::at(Code::DomainTerm, &path, format!("references domain identifier `{id}`")));
        }
    }
    let mut terms = technical_terms(&p.statement);
    if let Some(e) = &p.effect {
        terms.extend(technical_terms(e.text()));
    }
    for t in terms {
        if !target.vocabulary.contains(&t) {
            out.push(Diagnostic::at(Code::ForeignVocab, &path, format!("term `{t}` is not in layer {}'s vocabulary", target.id)));
        }
    }
    let declared = refs::declared_ids(bundle);
    match &p.effect {
        None => {}
        Some(InsightEffect::Amend { target: t, .. }) | Some(InsightEffect::Rescind { target: t }) => {
            out.push(Diagnostic::at(Code::RewriteAttempt, &path, format!("insight would change `{t}`; only additions are allowed")))
        }
        Some(e @ (InsightEffect::AppendLaw { id, .. } | InsightEffect::AppendAbstraction { id, .. })) => {
            if declared.contains_key(id) {
                out.push(Diagnostic::at(Code::RewriteAttempt, &path, format!("`{id}` already exists")));
            }
            let fits = match e {
                InsightEffect::AppendLaw { .. } => target.kind == LayerKind::Grandparent && id.namespace == Namespace::Gp,
                _ => {
                    target.kind == LayerKind::Parent
                        && id.namespace == Namespace::Parent
                        && id.owner == target.id.as_str()
                }
            };
            if !fits {
                out.push(Diagnostic::at(Code::EffectLayer, &path, format!("`{id}` cannot be added to layer {}", target.id)));
            }
        }
    }
    out
}

/// One detected violation and, once resolved, its documentation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContaminationEvent {
    pub id: String,
    pub site: Site,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offending_ref: Option<Identifier>,
    pub rule_violated: ContaminationRule,
    pub direction: Direction,
    pub nature: Nature,
    #[serde(default)]
    pub message: String,
    #[serde(default)]
    pub risks_introduced: String,
    #[serde(default)]
    pub decisions_affected: Vec<Affected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrective_action: Option<CorrectiveAction>,
    #[serde(default)]
    pub versioned_update: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<Timestamp>,
}

impl ContaminationEvent {
    pub fn diagnostic(&self) -> Diagnostic {
        Diagnostic::at(self.rule_violated.code(), self.site.to_string(), format!("{} [{}] {}", self.direction, self.id, self.message))
    }

    /// Documentation fields still empty.
    pub fn missing_documentation(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if self.risks_introduced.trim().is_empty() {
            out.push("risks_introduced");
        }
        if self.versioned_update.trim().is_empty() {
            out.push("versioned_update");
        }
        out
    }
}

/// Record a flow that has happened. Illegal flows are recorded too: the
/// scanner reports them and they are then resolved.
pub fn record_flow(bundle: &mut ProjectBundle, flow: FlowEvent, stamp: &Stamp) -> Result<(), Diagnostics> {
    let path = format!("flow({})", flow.id);
    let mut diags = Vec::new();
    if bundle.flow(&flow.id).is_some() {
        diags.push(Diagnostic::at(Code::DupId, &path, format!("flow `{}` already exists", flow.id)));
    }
    if let Err(d) = check_flow(&flow, bundle) {
        diags.push(d);
    }
    if let Some(c) = &flow.contract_ref {
        if bundle.contract(c).is_none() {
            diags.push(Diagnostic::at(Code::UnresolvedRef, &path, format!("unresolved contract `{c}`")));
        }
    }
    crate::diag::check(diags)?;
    let event = audit::next_event(bundle, stamp, audit::EventPayload::FlowRecorded { flow: flow.clone() }, vec![]);
    audit::check_append(&bundle.events, &event)?;
    bundle.flows.push(flow);
    bundle.events.push(event);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectiveAction {
    Quarantined,
    Reversed,
    InsightExtracted,
}

fn class_of(kind: refs::DeclKind) -> InfoClass {
    match kind {
        refs::DeclKind::RouteAssumption => InfoClass::Assumption,
        refs::DeclKind::Abstraction(AbstractionKind::MeasurementClass) => InfoClass::Measurement,
        _ => InfoClass::Content,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn site_forms_round_trip() {
        for s in ["child:C:S1", "flow(F1)", "contract(K)", "reviewer_block(child:C:toy)", "memo(child:C:toy)", "layer(P)"] {
            assert_eq!(s.parse::<Site>().unwrap().to_string(), s);
        }
        assert!("bogus(x)".parse::<Site>().is_err());
    }

    #[test]
    fn technical_terms_skip_identifiers() {
        let t = technical_terms("`Operationalization stability` of `child:C:m1` and `design`");
        assert_eq!(t, ["operationalization stability", "design"]);
    }
}
