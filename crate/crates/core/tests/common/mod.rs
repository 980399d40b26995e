//! Shared builders for the integration tests: the on-disk fixture corpus and
//! small helpers for running the `recap` binary.
#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

use recap_engine::bundle::{ProjectBundle, ProjectDecl};
use recap_engine::id::{Identifier, Timestamp, Version};
use recap_engine::layers::{self, ChangelogEntry, LayerDecl, Law};
use recap_engine::routing::{EvidenceRoleAssignment, Role, RouteStatus};
use recap_engine::samples::{self, c, layer, Clock};
use recap_engine::serialize_bundle;

pub fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn recap(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_recap")).args(args).env("RECAP_NO_COLOR", "1").output().expect("recap runs")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// A bundle in the corpus and the exit code `recap validate` gives it.
pub struct Fixture {
    pub name: &'static str,
    pub text: String,
    pub validate_exit: i32,
}

fn fx(name: &'static str, b: &ProjectBundle, validate_exit: i32) -> Fixture {
    Fixture { name, text: serialize_bundle(b), validate_exit }
}

pub fn changelog_entry(from: &str, to: &str) -> ChangelogEntry {
    ChangelogEntry {
        from_version: from.parse().unwrap(),
        to_version: to.parse().unwrap(),
        motivating_insight: "Proxies for intermediate constructs need an explicit monotonicity statement.".into(),
        boundary_affected: "Route assumptions".into(),
        generalizability_reasoning: "Any mediated question relies on a proxy for its intermediate construct.".into(),
        timestamp: Timestamp::new("2025-04-01T10:00:00Z").unwrap(),
    }
}

pub fn appended_law() -> Law {
    Law::new(Identifier::gp("proxy_monotonicity"), "A proxy used for an intermediate construct states the direction in which it tracks that construct.")
}

/// A sibling child layer whose project cites an assumption of the toy
/// project's route.
fn horizontal() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.layers.push(LayerDecl::child(layer("C2"), layer("P"), Version::new("C2", 1, 0)));
    let other = Identifier::child("C2", "other");
    b.projects.push(ProjectDecl::new(other.clone(), "Does A persist over time?"));
    let mut block = samples::reviewer_block();
    block.project_ref = other.clone();
    block.anticipated_critique.referenced_decisions = vec![];
    block.assumptions_ref = vec![c("R2.m1_valid")];
    b.reviewer_blocks.push(block);
    let mut memo = samples::memo();
    memo.project_ref = other;
    b.memos.push(memo);
    b
}

fn two_routes() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.route_mut(&c("R1")).unwrap().status = RouteStatus::Committed;
    b
}

fn frozen_edited() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.route_mut(&c("R2")).unwrap().objective = "comparative".into();
    b
}

fn tier_mismatch() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.unit_mut(&c("S2")).unwrap().declared_tier = Some(recap_engine::tiering::Tier::Core);
    b
}

fn missing_reviewer_block() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.reviewer_blocks.clear();
    b
}

fn bumped() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    let mut laws = b.grandparent().unwrap().laws.clone();
    laws.push(appended_law());
    layers::bump_version(&mut b, changelog_entry("v1.0", "v1.1"), laws, &Clock::at(200).tick()).unwrap();
    b
}

fn rewritten_law() -> ProjectBundle {
    let mut b = bumped();
    let gp = b.grandparent_mut().unwrap();
    gp.laws.iter_mut().find(|l| l.id == appended_law().id).unwrap().text = "Proxies are acceptable.".into();
    b
}

fn bad_sequence() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.events[4].sequence += 10;
    b
}

fn unresolved() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    b.project_mut(&samples::project_id()).unwrap().assignments[1].route_ref = c("R9");
    b
}

fn excluded_assigned() -> ProjectBundle {
    let mut b = samples::toy_bundle().unwrap();
    // The engine refuses to assign an excluded unit, so write it in directly.
    let a = EvidenceRoleAssignment { unit_ref: c("S3"), route_ref: c("R2"), role: Role::Sensitivity };
    b.project_mut(&samples::project_id()).unwrap().assignments.push(a);
    b
}

/// Every bundle in the CLI corpus.
pub fn corpus() -> Vec<Fixture> {
    vec![
        fx("toy", &samples::toy_bundle().unwrap(), 0),
        fx("bumped", &bumped(), 0),
        fx("minimal", &ProjectBundle::minimal("G"), 0),
        fx("contaminated", &samples::contaminated_bundle().unwrap(), 1),
        fx("shadowed", &samples::shadowed_bundle().unwrap(), 1),
        fx("horizontal", &horizontal(), 1),
        fx("two_routes", &two_routes(), 1),
        fx("frozen_edited", &frozen_edited(), 1),
        fx("tier_mismatch", &tier_mismatch(), 1),
        fx("missing_reviewer_block", &missing_reviewer_block(), 1),
        fx("rewritten_law", &rewritten_law(), 1),
        fx("bad_sequence", &bad_sequence(), 1),
        fx("excluded_assigned", &excluded_assigned(), 1),
        fx("unresolved", &unresolved(), 2),
        Fixture { name: "malformed", text: "{\n  \"recap_version\": \"v1.0\",\n  \"layers\": [\n".into(), validate_exit: 2 },
    ]
}

/// Changelog files for `recap version bump`.
pub fn changelogs() -> Vec<(&'static str, String)> {
    let file = |entry: ChangelogEntry, key: &str, laws: Vec<Law>| {
        let mut v = serde_json::to_value(entry).unwrap();
        v[key] = serde_json::to_value(laws).unwrap();
        serde_json::to_string_pretty(&v).unwrap() + "\n"
    };
    let mut rewrite = samples::toy_declarations().grandparent().unwrap().laws.clone();
    rewrite[0].text.push_str(" Usually.");
    vec![
        ("changelog_append", file(changelog_entry("v1.0", "v1.1"), "append", vec![appended_law()])),
        ("changelog_rewrite", file(changelog_entry("v1.0", "v1.1"), "laws", rewrite)),
    ]
}
