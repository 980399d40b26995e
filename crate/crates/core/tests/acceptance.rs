//! Acceptance suite. Prints one PASS/FAIL line per criterion with its time
//! limit, then fails if any criterion failed.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};

use recap_engine::audit;
use recap_engine::bundle::{self, ProjectBundle};
use recap_engine::contamination::{
    self, check_flow, Action, BoundaryContract, ContaminationRule, Direction, FlowEvent, FlowVerdict, InfoClass,
};
use recap_engine::id::{Identifier, Timestamp, Version};
use recap_engine::layers::{self, LayerDecl, Law};
use recap_engine::reporting::{self, Artifact, BiasDirection, BiasNote, StudyLogEntry, StudyLogFields, TierTableFields};
use recap_engine::routing::{self, AssumptionEvidence, EvidenceVerdict, Role, Route, RouteAssumption, RouteBody, RouteRevision, RouteStatus};
use recap_engine::samples::{self, c, layer, p, project_id, Clock};
use recap_engine::tiering::{
    self, Alignment, Assessment, DeclaredAssumption, Design, Dimension, EvidentialUnit, Measurement, Reporting, Tier,
};
use recap_engine::{parse_bundle, serialize_bundle, Code};

type Outcome = Result<String, String>;
type Criterion = (&'static str, &'static str, u64, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- AC1

fn ac1_toy_golden() -> Outcome {
    let b = samples::toy_bundle().map_err(|d| format!("toy does not build: {d:?}"))?;
    let expect = [("S1", Tier::Core, "R_CORE"), ("S2", Tier::Supplement, "R_SUPPLEMENT_COVERED"), ("S3", Tier::Excluded, "R_STEP1_MISMATCH")];
    for (id, tier, rule) in expect {
        let d = tiering::tier_unit(b.unit(&c(id)).unwrap()).map_err(|d| d.message)?;
        ensure(d.tier == tier && d.rule.as_str() == rule, || format!("{id}: got {d}"))?;
    }
    let proj = b.project(&project_id()).unwrap();
    let role = |u: &str| proj.assignment_for(&c(u)).map(|a| (a.route_ref.local_name.clone(), a.role));
    ensure(role("S1") == Some(("R2".into(), Role::PrimaryInference)), || format!("S1 role {:?}", role("S1")))?;
    ensure(role("S2").map(|r| r.1) == Some(Role::MeasurementEvaluation), || format!("S2 role {:?}", role("S2")))?;
    ensure(role("S3").is_none(), || "S3 holds a role".into())?;
    ensure(b.committed_route(&project_id()).map(|r| r.id.clone()) == Some(c("R2")), || "R2 is not the committed route".into())?;

    let log = reporting::build_study_log(&b, &project_id()).map_err(|d| format!("{d:?}"))?;
    let s1 = StudyLogEntry {
        study_id: c("S1"),
        design_type: "Observational (Abstract)".into(),
        tier_assignment: Tier::Core,
        reasons_for_tiering: "Construct alignment".into(),
        bias_considerations: vec![BiasNote { direction: BiasDirection::Nondirectional, text: "Proxy for B → nondirectional risk".into() }],
        measurement_definition_issues: "Partial misalignment for B".into(),
        notes: "Adequate for R2".into(),
    };
    ensure(log.iter().find(|r| r.study_id == c("S1")) == Some(&s1), || "S1 Study Log row differs".into())?;
    let table = reporting::build_tier_table(&b, &project_id());
    let row = table.iter().find(|r| r.study_id == c("S1")).ok_or("no S1 Tier Table row")?;
    let et = row.evidence_type.as_ref().ok_or("S1 has no evidence type")?;
    ensure(
        row.methods_summary == "Association between A and C via m1–m3 mapping"
            && et.role == Role::PrimaryInference
            && et.objective == "associational"
            && row.strengths == "Clear construct A; transparent m1"
            && row.limitations == "Proxy for B",
        || format!("S1 Tier Table row differs: {row:?}"),
    )?;
    let md = reporting::render_report(&Artifact::TierTable(table.clone()), reporting::Format::Markdown).map_err(|d| d.message)?;
    ensure(
        md.contains("| S1 | Association between A and C via m1–m3 mapping | Associational | Clear construct A; transparent m1 | Proxy for B |"),
        || "S1 Tier Table markdown row differs".into(),
    )?;
    let block = b.reviewer_block(&project_id()).ok_or("no Reviewer Block")?;
    let rb = reporting::validate_reviewer_block(block, &b);
    ensure(rb.is_empty(), || format!("Reviewer Block findings: {rb:?}"))?;
    let v = reporting::compliance_verdict(&b);
    ensure(v.is_compliant(), || format!("verdict {}: {:?}", v.verdict, v.findings))?;
    Ok("S1 core, S2 supplement, S3 excluded; rows match; compliant".into())
}

// ---------------------------------------------------------------- AC2, AC8

/// The tiering table stated independently: five exclusion gates in order,
/// then core when no dimension sits below the core threshold, otherwise
/// supplement only if every such dimension is covered.
fn tier_oracle(a: &Assessment, covered: &BTreeSet<Dimension>) -> (Tier, &'static str) {
    let gates = [
        (a.construct_alignment == Alignment::Mismatch, "R_STEP1_MISMATCH"),
        (a.reporting == Reporting::Opaque, "R_STEP1_OPACITY"),
        (a.speculation_required, "R_SPECULATION"),
        (a.measurement == Measurement::Failed, "R_MEASUREMENT_FAILED"),
        (a.design == Design::Incompatible, "R_DESIGN_INCOMPATIBLE"),
    ];
    if let Some((_, rule)) = gates.iter().find(|(hit, _)| *hit) {
        return (Tier::Excluded, rule);
    }
    let weak = [
        (a.construct_alignment != Alignment::Aligned, Dimension::ConstructAlignment),
        (a.measurement < Measurement::MinorLimitation, Dimension::Measurement),
        (a.design != Design::Sufficient, Dimension::Design),
        (a.reporting != Reporting::Transparent, Dimension::Reporting),
    ];
    let mut uncovered = 0;
    let mut any = false;
    for (is_weak, dim) in weak {
        if is_weak {
            any = true;
            if !covered.contains(&dim) {
                uncovered += 1;
            }
        }
    }
    match (any, uncovered) {
        (false, _) => (Tier::Core, "R_CORE"),
        (true, 0) => (Tier::Supplement, "R_SUPPLEMENT_COVERED"),
        _ => (Tier::Excluded, "R_UNCOVERED_AMBIGUITY"),
    }
}

fn tier_cases() -> Vec<(Assessment, BTreeSet<Dimension>)> {
    let all: BTreeSet<Dimension> = Dimension::ALL.into();
    Assessment::all().flat_map(|a| [(a, BTreeSet::new()), (a, all.clone())]).collect()
}

fn ac2_tier_oracle() -> Outcome {
    let cases = tier_cases();
    ensure(cases.len() == 432, || format!("{} cases", cases.len()))?;
    for (a, cov) in &cases {
        let (t, r) = tiering::compute_tier(a, cov);
        let (ot, or) = tier_oracle(a, cov);
        ensure(t == ot && r.as_str() == or, || format!("{a:?} {cov:?}: engine {t} {r}, oracle {ot} {or}"))?;
        let mut u = EvidentialUnit::new(c("S"), project_id(), "d", *a);
        if !cov.is_empty() {
            u.explicit_assumptions = vec![DeclaredAssumption { id: "all".into(), text: "t".into(), covers: cov.clone() }];
        }
        let d = tiering::tier_unit(&u).map_err(|d| d.message)?;
        ensure(d.tier == ot, || format!("tier_unit disagrees on {a:?}"))?;
    }
    Ok("432/432 cases agree with the oracle".into())
}

fn degradations(a: &Assessment, cov: &BTreeSet<Dimension>) -> Vec<(Assessment, BTreeSet<Dimension>)> {
    fn down<T: Copy + PartialEq>(all: &[T], v: T) -> Option<T> {
        let i = all.iter().position(|x| *x == v)?;
        i.checked_sub(1).map(|j| all[j])
    }
    let mut out = Vec::new();
    let mut push = |x: Assessment| out.push((x, cov.clone()));
    if let Some(v) = down(&Alignment::ALL, a.construct_alignment) {
        push(Assessment { construct_alignment: v, ..*a });
    }
    if let Some(v) = down(&Measurement::ALL, a.measurement) {
        push(Assessment { measurement: v, ..*a });
    }
    if let Some(v) = down(&Design::ALL, a.design) {
        push(Assessment { design: v, ..*a });
    }
    if let Some(v) = down(&Reporting::ALL, a.reporting) {
        push(Assessment { reporting: v, ..*a });
    }
    if !a.speculation_required {
        push(Assessment { speculation_required: true, ..*a });
    }
    for d in cov {
        let mut fewer = cov.clone();
        fewer.remove(d);
        out.push((*a, fewer));
    }
    out
}

fn ac8_monotone() -> Outcome {
    let mut n = 0;
    for (a, cov) in tier_cases() {
        let (t, _) = tiering::compute_tier(&a, &cov);
        for (b, cov2) in degradations(&a, &cov) {
            n += 1;
            let (t2, _) = tiering::compute_tier(&b, &cov2);
            ensure(t2 <= t, || format!("{a:?} -> {b:?} raised {t} to {t2}"))?;
        }
    }
    Ok(format!("{n} single-step degradations never raise the tier"))
}

// ---------------------------------------------------------------- AC3

/// G has parents P and P2; P has children C and C2; P2 has child C3.
const TREE: [(&str, Option<&str>); 6] = [("G", None), ("P", Some("G")), ("P2", Some("G")), ("C", Some("P")), ("C2", Some("P")), ("C3", Some("P2"))];

fn parent_of(x: &str) -> Option<&'static str> {
    TREE.iter().find(|(n, _)| *n == x).and_then(|(_, p)| *p)
}

fn ancestors(x: &str) -> Vec<&'static str> {
    let mut out = Vec::new();
    let mut cur = parent_of(x);
    while let Some(p) = cur {
        out.push(p);
        cur = parent_of(p);
    }
    out
}

fn depth(x: &str) -> usize {
    ancestors(x).len()
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum ContractState {
    Absent,
    Authorizing,
    OtherClass,
}

fn flow_oracle(from: &str, to: &str, class: InfoClass, contract: ContractState) -> Option<(Direction, ContaminationRule)> {
    if from == to || ancestors(to).contains(&from) {
        return None;
    }
    if ancestors(from).contains(&to) || depth(to) < depth(from) {
        if class == InfoClass::MethodologicalInsight && parent_of(from) == Some(to) {
            return None;
        }
        let rule = if class == InfoClass::MethodologicalInsight && to == "G" {
            ContaminationRule::R5MetaEngineInsulation
        } else {
            ContaminationRule::R1UpwardContent
        };
        return Some((Direction::Upward, rule));
    }
    match contract {
        ContractState::Authorizing => None,
        ContractState::Absent => Some((Direction::Horizontal, ContaminationRule::R3HorizontalBorrowing)),
        ContractState::OtherClass => Some((Direction::Horizontal, ContaminationRule::R4MissingContract)),
    }
}

fn class_name(c: InfoClass) -> String {
    serde_json::to_value(c).unwrap().as_str().unwrap().to_string()
}

fn tree_bundle() -> ProjectBundle {
    let mut b = ProjectBundle::minimal("G");
    for (name, parent) in TREE.iter().skip(1) {
        let parent = parent.unwrap();
        let v = Version::new(name, 1, 0);
        let decl = if parent == "G" { LayerDecl::parent(layer(name), layer(parent), v) } else { LayerDecl::child(layer(name), layer(parent), v) };
        b.layers.push(decl);
    }
    b
}

fn ac3_flow_matrix() -> Outcome {
    let mut b = tree_bundle();
    let mut clock = Clock::new();
    let names: Vec<&str> = TREE.iter().map(|(n, _)| *n).collect();
    for from in &names {
        for to in &names {
            for class in InfoClass::ALL {
                let contract = BoundaryContract {
                    id: format!("K-{from}-{to}-{}", class_name(class)),
                    info_type: class,
                    origin_layer: layer(from),
                    destination_layer: layer(to),
                    legal_justification: "Shared definitions are needed on both sides.".into(),
                    no_reinterpretation_clause: true,
                    documentation_ref: Some(b.last_sequence() + 1),
                };
                bundle::add_contract(&mut b, contract, &clock.tick()).map_err(|d| format!("{d:?}"))?;
            }
        }
    }
    let mut cases = 0;
    let mut upward_with_contract = 0;
    for from in &names {
        for to in &names {
            for class in InfoClass::ALL {
                for state in [ContractState::Absent, ContractState::Authorizing, ContractState::OtherClass] {
                    let contract_ref = match state {
                        ContractState::Absent => None,
                        ContractState::Authorizing => Some(format!("K-{from}-{to}-{}", class_name(class))),
                        ContractState::OtherClass => {
                            let other = InfoClass::ALL.into_iter().find(|k| *k != class).unwrap();
                            Some(format!("K-{from}-{to}-{}", class_name(other)))
                        }
                    };
                    let f = FlowEvent {
                        id: "F".into(),
                        source_layer: layer(from),
                        dest_layer: layer(to),
                        info_class: class,
                        payload: "State assumptions before estimating.".into(),
                        effect: None,
                        contract_ref,
                        timestamp: Timestamp::new("2025-03-01T00:00:00Z").unwrap(),
                        quarantined: false,
                    };
                    let got = match check_flow(&f, &b).map_err(|d| d.message)? {
                        FlowVerdict::Allowed => None,
                        FlowVerdict::Violation { direction, rule } => Some((direction, rule)),
                    };
                    let want = flow_oracle(from, to, class, state);
                    ensure(got == want, || format!("{from}->{to} {class:?} {state:?}: engine {got:?}, oracle {want:?}"))?;
                    if state == ContractState::Authorizing && class != InfoClass::MethodologicalInsight && depth(to) < depth(from) {
                        ensure(got.is_some_and(|(d, _)| d == Direction::Upward), || format!("{from}->{to} legalized by contract"))?;
                        upward_with_contract += 1;
                    }
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} cases agree; {upward_with_contract} contracted upward content flows all rejected"))
}

// ---------------------------------------------------------------- AC4

const SHADOWABLE: [&str; 6] = ["A", "B", "C", "m1", "m2", "m3"];

fn sibling_toy() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.layers.push(LayerDecl::child(layer("C2"), layer("P"), Version::new("C2", 1, 0)));
    b
}

fn ac4_injection() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let base = sibling_toy();
    ensure(contamination::scan_bundle(&base).is_empty(), || "base bundle is not clean".into())?;
    let content = [InfoClass::Content, InfoClass::Measurement, InfoClass::Assumption];
    let mut total = 0;
    for round in 0..200 {
        let mut b = base.clone();
        let mut clock = Clock::at(100);
        let k = rng.random_range(0..=5);
        let mut names: Vec<&str> = SHADOWABLE.to_vec();
        let mut expected: BTreeSet<(String, Direction)> = BTreeSet::new();
        for i in 0..k {
            match rng.random_range(0..3) {
                0 => {
                    let (src, dst) = *[("C", "P"), ("C", "G"), ("P", "G"), ("C2", "P")].choose(&mut rng).unwrap();
                    let f = flow(&format!("U{i}"), src, dst, *content.choose(&mut rng).unwrap(), &mut clock);
                    contamination::record_flow(&mut b, f, &clock.tick()).map_err(|d| format!("{d:?}"))?;
                    expected.insert((format!("flow(U{i})"), Direction::Upward));
                }
                1 => {
                    let (src, dst) = *[("C", "C2"), ("C2", "C")].choose(&mut rng).unwrap();
                    let class = *InfoClass::ALL.choose(&mut rng).unwrap();
                    let f = flow(&format!("H{i}"), src, dst, class, &mut clock);
                    contamination::record_flow(&mut b, f, &clock.tick()).map_err(|d| format!("{d:?}"))?;
                    expected.insert((format!("flow(H{i})"), Direction::Horizontal));
                }
                _ => {
                    let at = rng.random_range(0..names.len());
                    let name = names.swap_remove(at);
                    let decl = recap_engine::layers::Abstraction::new(
                        c(name),
                        recap_engine::layers::AbstractionKind::Construct,
                        format!("{name} is whatever the project's instrument records"),
                    );
                    b.layer_mut(&layer("C")).unwrap().abstractions.push(decl);
                    expected.insert((c(name).to_string(), Direction::Downward));
                }
            }
        }
        let events = contamination::scan_bundle(&b);
        let got: BTreeSet<(String, Direction)> = events.iter().map(|e| (e.site.to_string(), e.direction)).collect();
        ensure(events.len() == k && got == expected, || format!("round {round}: injected {expected:?}, scanned {got:?}"))?;
        total += k;
    }
    Ok(format!("200 bundles, {total} injected violations, exact detection"))
}

fn flow(id: &str, src: &str, dst: &str, class: InfoClass, clock: &mut Clock) -> FlowEvent {
    FlowEvent {
        id: id.into(),
        source_layer: layer(src),
        dest_layer: layer(dst),
        info_class: class,
        payload: "m1 redefines A for this project".into(),
        effect: None,
        contract_ref: None,
        timestamp: clock.tick().timestamp,
        quarantined: false,
    }
}

// ---------------------------------------------------------------- AC5

fn entry(from: &Version, to: &Version) -> layers::ChangelogEntry {
    common::changelog_entry(&from.to_string(), &to.to_string())
}

fn next_version(v: &Version) -> Version {
    let s = v.to_string();
    let (major, minor) = s.trim_start_matches('v').split_once('.').unwrap();
    Version::new("v", major.parse().unwrap(), minor.parse::<u32>().unwrap() + 1)
}

fn ac5_version_bumps() -> Outcome {
    let mut rng = StdRng::seed_from_u64(5);
    let protected: Vec<Law> = layers::protected_laws();
    let protected_bytes = |b: &ProjectBundle| -> Vec<String> {
        protected.iter().map(|p| serde_json::to_string(b.grandparent().unwrap().laws.iter().find(|l| l.id == p.id).unwrap()).unwrap()).collect()
    };
    let reference = protected_bytes(&ProjectBundle::minimal("G"));
    let (mut accepted, mut rejected) = (0, 0);
    for seq in 0..1000 {
        let mut b = ProjectBundle::minimal("G");
        let mut clock = Clock::new();
        for step in 0..rng.random_range(1..=6) {
            let gp = b.grandparent().unwrap();
            let old = gp.laws.clone();
            let to = next_version(&gp.version);
            let mut laws = old.clone();
            let legal = match rng.random_range(0..3) {
                0 => {
                    laws.push(Law::new(Identifier::gp(&format!("law_{seq}_{step}")), "Assumptions are stated before estimation."));
                    true
                }
                1 => {
                    laws.remove(rng.random_range(0..laws.len()));
                    false
                }
                _ => {
                    let i = rng.random_range(0..laws.len());
                    laws[i].text.push_str(" Except when convenient.");
                    false
                }
            };
            let before = serialize_bundle(&b);
            let e = entry(&b.grandparent().unwrap().version, &to);
            let result = layers::bump_version(&mut b, e, laws, &clock.tick());
            match (legal, result) {
                (true, Ok(())) => {
                    accepted += 1;
                    let now = &b.grandparent().unwrap().laws;
                    ensure(old.iter().all(|l| now.contains(l)), || format!("seq {seq}: law set shrank or changed"))?;
                    ensure(protected_bytes(&b) == reference, || format!("seq {seq}: protected law bytes changed"))?;
                }
                (false, Err(d)) => {
                    rejected += 1;
                    ensure(d.has(Code::LawRescinded) || d.has(Code::LawRewritten), || format!("seq {seq}: wrong codes {:?}", d.codes()))?;
                    ensure(serialize_bundle(&b) == before, || format!("seq {seq}: rejected bump changed the bundle"))?;
                }
                (legal, r) => return Err(format!("seq {seq} step {step}: legal={legal} but {:?}", r.err().map(|d| d.codes()))),
            }
        }
    }
    Ok(format!("1000 sequences: {accepted} appends accepted, {rejected} rescind/rewrite attempts rejected"))
}

// ---------------------------------------------------------------- AC6, AC7

fn route_body(i: usize, variant: usize) -> RouteBody {
    let objective = ["associational", "comparative", "descriptive"][variant % 3];
    RouteBody {
        name: format!("Route {i} variant {variant}"),
        construct_ref: p("A"),
        objective: objective.into(),
        assumptions: vec![RouteAssumption {
            id: c(&format!("R{i}.a")),
            text: "m1 tracks A".into(),
            plausibility: "Declared correspondence".into(),
            failure_modes: "Drift of the procedure".into(),
            consequences_for_inference: "Estimates describe m1 only".into(),
            evidence: vec![AssumptionEvidence { unit_ref: c("S1"), verdict: EvidenceVerdict::Supports }],
            untestable: false,
        }],
        disconfirming_models: vec!["C drives A.".into()],
        rejected_alternatives: vec![],
    }
}

fn tiered_toy_units() -> ProjectBundle {
    let mut b = samples::toy_declarations();
    let mut clock = Clock::new();
    for u in [samples::s1(), samples::s2(), samples::s3()] {
        bundle::add_unit(&mut b, u, &clock.tick()).unwrap();
    }
    for (u, t) in [("S1", Tier::Core), ("S2", Tier::Supplement), ("S3", Tier::Excluded)] {
        tiering::declare_tier(&mut b, &c(u), t, "declared", &clock.tick()).unwrap();
    }
    b
}

/// A random routing command. Returns whether it was accepted.
fn routing_command(b: &mut ProjectBundle, rng: &mut StdRng, clock: &mut Clock) -> bool {
    let i = rng.random_range(0..4);
    let id = c(&format!("R{i}"));
    let project = project_id();
    match rng.random_range(0..6) {
        0 => {
            let status = if rng.random_bool(0.5) { RouteStatus::Committed } else { RouteStatus::Exploratory };
            let route = Route::new(id, project, status, route_body(i, rng.random_range(0..3)));
            routing::declare_route(b, route, "Not the inferential target", &clock.tick()).is_ok()
        }
        1 => routing::edit_route(b, &id, route_body(i, rng.random_range(0..3)), &clock.tick()).is_ok(),
        2 => routing::freeze_route(b, &project, &clock.tick()).is_ok(),
        3 => {
            let stamp = clock.tick();
            let complete = rng.random_bool(0.7);
            let rev = RouteRevision::new(stamp.timestamp.clone(), if complete { "New evidence on m1" } else { "" }, "None", "objective");
            routing::revise_route(b, &id, rev, route_body(i, rng.random_range(0..3)), &stamp).is_ok()
        }
        4 => {
            let (u, role) = *[("S1", Role::PrimaryInference), ("S2", Role::MeasurementEvaluation), ("S2", Role::Sensitivity), ("S3", Role::Contextual)]
                .choose(rng)
                .unwrap();
            routing::assign_role(b, &c(u), &id, role, &clock.tick()).is_ok()
        }
        _ => {
            // An attempt to write a frozen body in place without a revision.
            let stamp = clock.tick();
            match b.route(&id) {
                Some(r) if r.is_frozen() => routing::edit_route(b, &id, route_body(i, 2), &stamp).is_ok(),
                _ => false,
            }
        }
    }
}

fn ac6_routing() -> Outcome {
    let mut rng = StdRng::seed_from_u64(6);
    let base = tiered_toy_units();
    let (mut commands, mut frozen_seen) = (0, 0);
    while commands < 10_000 {
        let mut b = base.clone();
        let mut clock = Clock::at(10);
        for _ in 0..50 {
            let snapshot: BTreeMap<Identifier, (String, usize)> =
                b.routes.iter().filter(|r| r.is_frozen()).map(|r| (r.id.clone(), (r.body().digest(), r.revisions.len()))).collect();
            routing_command(&mut b, &mut rng, &mut clock);
            commands += 1;
            let committed = b.routes.iter().filter(|r| r.is_committed()).count();
            ensure(committed <= 1, || format!("{committed} committed routes after command {commands}"))?;
            for r in b.routes.iter().filter(|r| r.is_frozen()) {
                ensure(r.expected_digest() == Some(r.body().digest().as_str()), || format!("{} differs from its recorded digest", r.id))?;
                if let Some((digest, revs)) = snapshot.get(&r.id) {
                    ensure(*digest == r.body().digest() || r.revisions.len() > *revs, || format!("{} mutated without a revision", r.id))?;
                }
            }
            frozen_seen += b.routes.iter().filter(|r| r.is_frozen()).count();
        }
    }
    ensure(frozen_seen > 0, || "no route was ever frozen".into())?;
    Ok(format!("{commands} commands; at most one committed route; frozen routes change only by revision"))
}

fn random_unit(rng: &mut StdRng, n: usize, all: &[Assessment]) -> EvidentialUnit {
    let a = *all.choose(rng).unwrap();
    let mut u = EvidentialUnit::new(c(&format!("S{n}")), project_id(), "Observational (Abstract)", a);
    let covers: BTreeSet<Dimension> = Dimension::ALL.into_iter().filter(|_| rng.random_bool(0.5)).collect();
    if !covers.is_empty() {
        u.explicit_assumptions = vec![DeclaredAssumption { id: "a".into(), text: "Stated gap".into(), covers }];
    }
    u.study_log = Some(StudyLogFields {
        bias_considerations: vec![BiasNote { direction: BiasDirection::Nondirectional, text: "Unknown".into() }],
        measurement_definition_issues: "None".into(),
        notes: "Generated".into(),
    });
    u.tier_table = Some(TierTableFields { methods_summary: "m".into(), strengths: "s".into(), limitations: "l".into() });
    u
}

fn any_command(b: &mut ProjectBundle, rng: &mut StdRng, clock: &mut Clock, all: &[Assessment], next_unit: &mut usize) -> bool {
    match rng.random_range(0..10) {
        0 => {
            *next_unit += 1;
            let u = random_unit(rng, *next_unit, all);
            bundle::add_unit(b, u, &clock.tick()).is_ok()
        }
        1 => {
            let n = rng.random_range(4..=(*next_unit).max(4));
            let Some(u) = b.unit(&c(&format!("S{n}"))) else { return false };
            let tier = match tiering::tier_unit(u) {
                Ok(d) if rng.random_bool(0.8) => d.tier,
                _ => *Tier::ALL.choose(rng).unwrap(),
            };
            tiering::declare_tier(b, &c(&format!("S{n}")), tier, "From the declared assessments", &clock.tick()).is_ok()
        }
        2 => {
            let (src, dst) = *[("C", "G"), ("C", "P"), ("P", "C"), ("G", "C")].choose(rng).unwrap();
            let id = format!("F{}", b.flows.len());
            let f = flow(&id, src, dst, *InfoClass::ALL.choose(rng).unwrap(), clock);
            contamination::record_flow(b, f, &clock.tick()).is_ok()
        }
        3 => {
            let Some(mut e) = contamination::scan_bundle(b).into_iter().next() else { return false };
            e.risks_introduced = "Redefinition of A".into();
            e.versioned_update = "Quarantined".into();
            let action = if rng.random_bool(0.5) { Action::Quarantine } else { Action::Reverse };
            contamination::resolve_contamination(b, &e, action, &clock.tick()).is_ok()
        }
        4 => {
            let gp = b.grandparent().unwrap();
            let mut laws = gp.laws.clone();
            if rng.random_bool(0.7) {
                laws.push(Law::new(Identifier::gp(&format!("law_{}", laws.len())), "Name the estimand first."));
            } else {
                laws.pop();
            }
            let e = entry(&gp.version, &next_version(&gp.version));
            layers::bump_version(b, e, laws, &clock.tick()).is_ok()
        }
        _ => routing_command(b, rng, clock),
    }
}

fn ac7_replay() -> Outcome {
    let mut rng = StdRng::seed_from_u64(7);
    let all: Vec<Assessment> = Assessment::all().collect();
    let initial = tiered_toy_units();
    let (mut accepted, mut rejected) = (0, 0);
    for seq in 0..1000 {
        let mut b = initial.clone();
        let mut clock = Clock::at(10);
        let mut next_unit = 3;
        // Serialization is a function of the bundle value, so an equal value
        // means equal bytes; the bytes themselves are compared once per sequence.
        let mut first_rejection = None;
        for _ in 0..rng.random_range(5..25) {
            let before = b.clone();
            if any_command(&mut b, &mut rng, &mut clock, &all, &mut next_unit) {
                accepted += 1;
            } else {
                rejected += 1;
                ensure(b == before, || format!("seq {seq}: a rejected command changed the bundle"))?;
                first_rejection.get_or_insert(before);
            }
        }
        if let Some(before) = first_rejection {
            let mut replayed = before.clone();
            let text = serialize_bundle(&before);
            let mut probe = Clock::at(100_000);
            ensure(!layers::bump_version(&mut replayed, entry(&Version::new("v", 0, 0), &Version::new("v", 0, 1)), vec![], &probe.tick()).is_ok(), || "stale bump accepted".into())?;
            ensure(serialize_bundle(&replayed) == text, || format!("seq {seq}: rejected bump changed the bytes"))?;
        }
        let d = audit::verify_replay(&initial, &b);
        ensure(d.is_empty(), || format!("seq {seq}: replay diverges: {d:?}"))?;
        if seq % 10 == 0 {
            let reparsed = parse_bundle(&serialize_bundle(&b)).map_err(|d| format!("seq {seq}: {d:?}"))?.bundle;
            ensure(reparsed == b, || format!("seq {seq}: bundle does not round-trip"))?;
        }
    }
    Ok(format!("1000 sequences, {accepted} accepted and {rejected} rejected commands; replay matches"))
}

// ---------------------------------------------------------------- AC9

fn ac9_partition() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let all: Vec<Assessment> = Assessment::all().collect();
    let mut rows = 0;
    for round in 0..500 {
        let mut b = samples::toy_declarations();
        let mut clock = Clock::new();
        for n in 0..rng.random_range(0..10) {
            let u = random_unit(&mut rng, n, &all);
            let id = u.study_id.clone();
            let tier = tiering::tier_unit(&u).map_err(|d| d.message)?.tier;
            bundle::add_unit(&mut b, u, &clock.tick()).map_err(|d| format!("{d:?}"))?;
            tiering::declare_tier(&mut b, &id, tier, "From the declared assessments", &clock.tick()).map_err(|d| format!("{d:?}"))?;
        }
        let log = reporting::build_study_log(&b, &project_id()).map_err(|d| format!("round {round}: {d:?}"))?;
        let table = reporting::build_tier_table(&b, &project_id());
        let log_ids: Vec<&Identifier> = log.iter().map(|r| &r.study_id).collect();
        let mut union: Vec<&Identifier> = table.iter().map(|r| &r.study_id).collect();
        union.extend(log.iter().filter(|r| r.tier_assignment == Tier::Excluded).map(|r| &r.study_id));
        let mut sorted_log = log_ids.clone();
        sorted_log.sort();
        union.sort();
        ensure(sorted_log == union, || format!("round {round}: {sorted_log:?} vs {union:?}"))?;
        ensure(log.len() == b.units.len(), || format!("round {round}: missing Study Log rows"))?;
        rows += log.len();
    }
    Ok(format!("500 bundles, {rows} Study Log rows partition exactly"))
}

// ---------------------------------------------------------------- AC10

fn ac10_cli() -> Outcome {
    let corpus = common::corpus();
    ensure(corpus.len() >= 12, || format!("only {} fixtures", corpus.len()))?;
    let dir = common::fixtures_dir();
    let mut codes = BTreeSet::new();
    for fx in &corpus {
        let path = dir.join(format!("{}.json", fx.name));
        let path = path.to_str().unwrap();
        let out = common::recap(&["validate", path]);
        let code = out.status.code().unwrap_or(-1);
        ensure(code == fx.validate_exit, || format!("{}: exit {code}, expected {}", fx.name, fx.validate_exit))?;
        codes.insert(code);
        if code == 2 {
            continue;
        }
        let bundle = parse_bundle(&fx.text).map_err(|d| format!("{d:?}"))?.bundle;
        let structured = common::recap(&["validate", path, "--format", "structured"]);
        let text = common::stdout(&structured);
        let parsed = reporting::parse_artifact(&text).map_err(|d| format!("{}: {d:?}", fx.name))?;
        ensure(parsed == Artifact::ComplianceReport(reporting::compliance_verdict(&bundle)), || format!("{}: report differs", fx.name))?;
        let again = reporting::render_report(&parsed, reporting::Format::Structured).map_err(|d| d.message)?;
        ensure(again == text, || format!("{}: structured report does not round-trip", fx.name))?;
        for kind in ["study-log", "tier-table"] {
            let out = common::recap(&["report", path, kind, "--format", "structured"]);
            if out.status.code() != Some(0) {
                continue;
            }
            let text = common::stdout(&out);
            let parsed = reporting::parse_artifact(&text).map_err(|d| format!("{} {kind}: {d:?}", fx.name))?;
            let again = reporting::render_report(&parsed, reporting::Format::Structured).map_err(|d| d.message)?;
            ensure(again == text, || format!("{} {kind}: does not round-trip", fx.name))?;
        }
    }
    ensure(codes == BTreeSet::from([0, 1, 2]), || format!("exit codes covered: {codes:?}"))?;
    Ok(format!("{} bundles; exits 0/1/2 covered; structured output round-trips", corpus.len()))
}

// ---------------------------------------------------------------- runner

#[test]
fn acceptance() {
    let criteria: [Criterion; 10] = [
        ("AC01", "toy golden", 1, ac1_toy_golden),
        ("AC02", "tier oracle, 432 cases", 1, ac2_tier_oracle),
        ("AC03", "flow matrix oracle", 1, ac3_flow_matrix),
        ("AC04", "contamination injection", 10, ac4_injection),
        ("AC05", "version bump sequences", 10, ac5_version_bumps),
        ("AC06", "one committed route, freeze integrity", 30, ac6_routing),
        ("AC07", "replay and atomic rejection", 30, ac7_replay),
        ("AC08", "degradation never raises the tier", 1, ac8_monotone),
        ("AC09", "Study Log = Tier Table + excluded", 10, ac9_partition),
        ("AC10", "CLI corpus", 5, ac10_cli),
    ];
    let mut failed = Vec::new();
    println!();
    for (id, name, limit, f) in criteria {
        let start = Instant::now();
        let outcome = f();
        let took = start.elapsed();
        let limit = Duration::from_secs(limit);
        let line = match (&outcome, took <= limit) {
            (Ok(detail), true) => format!("PASS {id} {name}: {detail} ({} ms, limit {} s)", took.as_millis(), limit.as_secs()),
            (Ok(detail), false) => format!("FAIL {id} {name}: {detail} but took {} ms, limit {} s", took.as_millis(), limit.as_secs()),
            (Err(why), _) => format!("FAIL {id} {name}: {why} ({} ms)", took.as_millis()),
        };
        println!("{line}");
        if line.starts_with("FAIL") {
            failed.push(id);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
