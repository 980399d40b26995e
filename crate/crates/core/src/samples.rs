//! Worked example bundles: the three-study toy program on abstract
//! constructs A, B and C, plus variants that each break one rule. The CLI
//! fixture corpus under `fixtures/` is generated from these builders.

use std::collections::BTreeMap;

use crate::audit::Stamp;
use crate::bundle::{self, ProjectBundle, ProjectDecl};
use crate::contamination::{self, FlowEvent, InfoClass};
use crate::diag::Diagnostics;
use crate::id::{Identifier, LayerId, Timestamp, Version};
use crate::layers::{Abstraction, AbstractionKind, LayerDecl, Law};
use crate::reporting::{AnalyticMemo, BiasDirection, BiasNote, Critique, ReviewerBlock, StudyLogFields, TierTableFields};
use crate::routing::{self, AssumptionEvidence, EvidenceVerdict, Role, Route, RouteAssumption, RouteBody, RouteStatus};
use crate::tiering::{self, Alignment, Assessment, DeclaredAssumption, Design, Dimension, EvidentialUnit, Measurement, MeasurementDecl, Reporting, Tier};

pub const ACTOR: &str = "analyst";

/// Hands out strictly increasing timestamps, one minute apart.
#[derive(Debug, Clone)]
pub struct Clock {
    minute: u32,
}

impl Clock {
    pub fn new() -> Self {
        Clock { minute: 0 }
    }

    /// A clock starting `minute` minutes after the first tick of [`Clock::new`].
    pub fn at(minute: u32) -> Self {
        Clock { minute }
    }

    pub fn tick(&mut self) -> Stamp {
        let start = chrono::NaiveDate::from_ymd_opt(2025, 3, 1).and_then(|d| d.and_hms_opt(9, 0, 0)).expect("valid date");
        let t = (start + chrono::Duration::minutes(self.minute.into())).format("%Y-%m-%dT%H:%M:%SZ").to_string();
        self.minute += 1;
        Stamp::new(ACTOR, Timestamp::new(t).expect("well-formed"))
    }
}

impl Default for Clock {
    fn default() -> Self {
        Self::new()
    }
}

pub fn layer(s: &str) -> LayerId {
    LayerId::new(s).expect("valid layer id")
}

pub fn p(name: &str) -> Identifier {
    Identifier::parent("P", name)
}

pub fn c(name: &str) -> Identifier {
    Identifier::child("C", name)
}

pub fn project_id() -> Identifier {
    c("toy")
}

fn construct(name: &str, def: &str) -> Abstraction {
    Abstraction::new(p(name), AbstractionKind::Construct, def)
}

fn measurement_class(name: &str, target: &str, def: &str) -> Abstraction {
    let mut a = Abstraction::new(p(name), AbstractionKind::MeasurementClass, def);
    a.correspondence.insert(p(name), p(target));
    a
}

/// Layers G, P and C with the toy constructs and correspondence rules, and
/// the toy project. No units, routes or events.
pub fn toy_declarations() -> ProjectBundle {
    let mut b = ProjectBundle::minimal("G");
    let gp = &mut b.layers[0];
    for (name, text) in [
        ("construct_A", "A is an abstract exposure construct."),
        ("construct_B", "B is an abstract intermediate construct."),
        ("construct_C", "C is an abstract outcome construct."),
        ("tiering_rules", "Units are tiered from declared assessments; ambiguity resolves toward the lower tier."),
        ("contamination_laws", "Content never moves upward; lower layers never rewrite what they inherit; projects never borrow each other's assumptions."),
    ] {
        gp.laws.push(Law::new(Identifier::gp(name), text));
    }
    gp.vocabulary = ["construct", "measurement", "tier", "route", "assumption", "proxy"].map(String::from).into();

    let mut parent = LayerDecl::parent(layer("P"), layer("G"), Version::new("P", 1, 0));
    parent.abstractions = vec![
        construct("A", "Exposure construct A, stated without reference to any instrument."),
        construct("B", "Intermediate construct B."),
        construct("C", "Outcome construct C."),
        measurement_class("m1", "A", "Procedures of type m1; they approximate A."),
        measurement_class("m2", "B", "Procedures of type m2; they approximate B."),
        measurement_class("m3", "C", "Procedures of type m3; they approximate C."),
    ];
    let child = LayerDecl::child(layer("C"), layer("P"), Version::new("C", 1, 0));
    b.layers.push(parent);
    b.layers.push(child);
    b.projects.push(ProjectDecl::new(project_id(), "How does A relate to C, mediated through B?"));
    b
}

fn measure(id: &str, construct: &str, class: &str, procedure: &str) -> MeasurementDecl {
    MeasurementDecl { id: id.into(), construct_ref: p(construct), class_ref: Some(p(class)), procedure: procedure.into() }
}

pub fn s1() -> EvidentialUnit {
    let a = Assessment {
        construct_alignment: Alignment::Aligned,
        measurement: Measurement::MinorLimitation,
        design: Design::Sufficient,
        reporting: Reporting::Transparent,
        speculation_required: false,
    };
    let mut u = EvidentialUnit::new(c("S1"), project_id(), "Observational (Abstract)", a);
    u.measurements = vec![
        measure("mA", "A", "m1", "m1 applied as specified"),
        measure("mB", "B", "m2", "partial proxy with known limitations"),
        measure("mC", "C", "m3", "m3 applied as specified"),
    ];
    u.study_log = Some(StudyLogFields {
        bias_considerations: vec![BiasNote { direction: BiasDirection::Nondirectional, text: "Proxy for B → nondirectional risk".into() }],
        measurement_definition_issues: "Partial misalignment for B".into(),
        notes: "Adequate for R2".into(),
    });
    u.tier_table = Some(TierTableFields {
        methods_summary: "Association between A and C via m1–m3 mapping".into(),
        strengths: "Clear construct A; transparent m1".into(),
        limitations: "Proxy for B".into(),
    });
    u
}

pub fn s2() -> EvidentialUnit {
    let a = Assessment {
        construct_alignment: Alignment::Partial,
        measurement: Measurement::ConditionalProxy,
        design: Design::Sufficient,
        reporting: Reporting::Ambiguous,
        speculation_required: false,
    };
    let mut u = EvidentialUnit::new(c("S2"), project_id(), "Observational (Abstract)", a);
    u.explicit_assumptions = vec![
        DeclaredAssumption {
            id: "partial_definitions".into(),
            text: "The missing parts of the A and B definitions do not change which construct is targeted.".into(),
            covers: [Dimension::ConstructAlignment, Dimension::Reporting].into(),
        },
        DeclaredAssumption {
            id: "proxy_conditions".into(),
            text: "The proxy procedures track A and B under the stated conditions.".into(),
            covers: [Dimension::Measurement].into(),
        },
    ];
    u.measurements = vec![measure("mA", "A", "m1", "ambiguous variant of m1"), measure("mB", "B", "m2", "ambiguous variant of m2")];
    u.study_log = Some(StudyLogFields {
        bias_considerations: vec![BiasNote { direction: BiasDirection::Attenuates, text: "Ambiguous A/B measurement → attenuation".into() }],
        measurement_definition_issues: "Ambiguous A/B".into(),
        notes: "Sensitivity and measurement evaluation only".into(),
    });
    u.tier_table = Some(TierTableFields {
        methods_summary: "A and B measured with partly specified procedures".into(),
        strengths: "Covers the same constructs as the core study".into(),
        limitations: "Construct definitions partially missing".into(),
    });
    u
}

pub fn s3() -> EvidentialUnit {
    let a = Assessment {
        construct_alignment: Alignment::Mismatch,
        measurement: Measurement::Failed,
        design: Design::Sufficient,
        reporting: Reporting::Opaque,
        speculation_required: false,
    };
    let mut u = EvidentialUnit::new(c("S3"), project_id(), "Unreported", a);
    u.study_log = Some(StudyLogFields {
        bias_considerations: vec![BiasNote { direction: BiasDirection::Nondirectional, text: "Unreported design elements → unknown risk".into() }],
        measurement_definition_issues: "Non-correspondence".into(),
        notes: "Recorded, not used".into(),
    });
    u
}

fn assumption(route: &str, name: &str, text: &str, evidence: &[(&str, EvidenceVerdict)]) -> RouteAssumption {
    RouteAssumption {
        id: c(&format!("{route}.{name}")),
        text: text.into(),
        plausibility: "Supported by the measurement correspondence declared in P".into(),
        failure_modes: "The procedure drifts away from the construct".into(),
        consequences_for_inference: "Estimates would describe the procedure, not the construct".into(),
        evidence: evidence.iter().map(|(u, v)| AssumptionEvidence { unit_ref: c(u), verdict: *v }).collect(),
        untestable: false,
    }
}

fn body(name: &str, construct: &str, objective: &str, assumptions: Vec<RouteAssumption>, disconfirming: &str) -> RouteBody {
    RouteBody {
        name: name.into(),
        construct_ref: p(construct),
        objective: objective.into(),
        assumptions,
        disconfirming_models: vec![disconfirming.into()],
        rejected_alternatives: vec![],
    }
}

pub fn r2_body() -> RouteBody {
    use EvidenceVerdict::Supports;
    body(
        "Associational estimation",
        "A",
        "associational",
        vec![
            assumption("R2", "m1_valid", "m1 valid for A", &[("S1", Supports)]),
            assumption("R2", "proxy_B_monotonic", "proxy B monotonic", &[("S1", Supports)]),
        ],
        "C may influence B rather than vice versa.",
    )
}

/// The exploratory routes and the rationale for not committing to each.
pub fn exploratory_routes() -> Vec<(Route, &'static str)> {
    let mk = |id: &str, name: &str, objective: &str, why: &'static str| {
        let mut a = assumption(id, "comparable_groups", "Groups differ only in A", &[]);
        a.untestable = true;
        let r = Route::new(c(id), project_id(), RouteStatus::Exploratory, body(name, "A", objective, vec![a], "Differences arise from selection."));
        (r, why)
    };
    vec![
        mk("R1", "Comparative estimation", "comparative", "No unit contrasts levels of A under a shared design"),
        mk("R3", "Measurement evaluation", "measurement-evaluation", "The question concerns A and C, not the procedures"),
        mk("R4", "Predictive modeling", "predictive", "Prediction of C is not the inferential target"),
    ]
}

pub fn reviewer_block() -> ReviewerBlock {
    ReviewerBlock {
        project_ref: project_id(),
        methodological_findings: vec!["Construct A measured reliably.".into(), "Proxy B introduces potential attenuation.".into()],
        conceptual_insight: "Operationalization of B remains unstable.".into(),
        anticipated_critique: Critique {
            text: "Why was a stronger proxy not used?".into(),
            response: "No unit offers a closer procedure for B; the proxy assumption is stated on the route.".into(),
            referenced_decisions: vec![c("R2")],
        },
        disconfirming_model: "C may influence B rather than vice versa.".into(),
        assumptions_ref: vec![c("R2.m1_valid"), c("R2.proxy_B_monotonic")],
    }
}

pub fn memo() -> AnalyticMemo {
    let sections: BTreeMap<String, String> = [
        ("interpretation_under_assumptions", "Read S1 as an association between A and C, conditional on m1 tracking A and the B proxy being monotonic."),
        ("uncertainty", "The B proxy is the main source of uncertainty; its direction of bias is not known."),
        ("boundary_evaluation", "Nothing beyond the association is claimed; S3 carries no weight."),
        ("supplement_roles", "S2 informs only the evaluation of the A and B procedures."),
        ("inheritance_compliance", "Constructs and correspondence come from P unchanged; no flows leave the project."),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect();
    AnalyticMemo { project_ref: project_id(), sections }
}

/// The full toy bundle, built by running the engine's operations over
/// [`toy_declarations`].
pub fn toy_bundle() -> Result<ProjectBundle, Diagnostics> {
    let mut b = toy_declarations();
    let mut clock = Clock::new();
    let project = project_id();
    for u in [s1(), s2(), s3()] {
        bundle::add_unit(&mut b, u, &clock.tick())?;
    }
    tiering::declare_tier(&mut b, &c("S1"), Tier::Core, "Construct alignment", &clock.tick())?;
    tiering::declare_tier(&mut b, &c("S2"), Tier::Supplement, "Partial mismatch", &clock.tick())?;
    tiering::declare_tier(&mut b, &c("S3"), Tier::Excluded, "Definition opacity", &clock.tick())?;
    for (r, why) in exploratory_routes() {
        routing::declare_route(&mut b, r, why, &clock.tick())?;
    }
    let r2 = Route::new(c("R2"), project.clone(), RouteStatus::Committed, r2_body());
    routing::declare_route(&mut b, r2, "", &clock.tick())?;
    routing::assign_role(&mut b, &c("S1"), &c("R2"), Role::PrimaryInference, &clock.tick())?;
    routing::assign_role(&mut b, &c("S2"), &c("R3"), Role::MeasurementEvaluation, &clock.tick())?;
    routing::freeze_route(&mut b, &project, &clock.tick())?;
    bundle::set_reviewer_block(&mut b, reviewer_block(), &clock.tick())?;
    bundle::set_memo(&mut b, memo(), &clock.tick())?;
    Ok(b)
}

/// The toy bundle plus a recorded flow in which the child reports that m1
/// redefines A to the grandparent.
pub fn contaminated_bundle() -> Result<ProjectBundle, Diagnostics> {
    let mut b = toy_bundle()?;
    let mut clock = Clock::at(100);
    let flow = FlowEvent {
        id: "F1".into(),
        source_layer: layer("C"),
        dest_layer: layer("G"),
        info_class: InfoClass::Measurement,
        payload: "m1 redefines A: A is whatever m1 records".into(),
        effect: None,
        contract_ref: None,
        timestamp: clock.tick().timestamp,
        quarantined: false,
    };
    contamination::record_flow(&mut b, flow, &clock.tick())?;
    Ok(b)
}

/// The toy bundle with a child-layer redefinition of A.
pub fn shadowed_bundle() -> Result<ProjectBundle, Diagnostics> {
    let mut b = toy_bundle()?;
    let child = b.layer_mut(&layer("C")).expect("toy has C");
    child.abstractions.push(Abstraction::new(c("A"), AbstractionKind::Construct, "A means whatever m1 measures"));
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_bundle_builds() {
        let b = toy_bundle().unwrap();
        assert_eq!(b.units.len(), 3);
        assert_eq!(b.routes.len(), 4);
        assert_eq!(b.layers.len(), 3);
    }

    #[test]
    fn clock_is_strictly_increasing() {
        let mut c = Clock::new();
        let stamps: Vec<_> = (0..200).map(|_| c.tick().timestamp).collect();
        assert!(stamps.windows(2).all(|w| w[0] < w[1]));
    }
}
