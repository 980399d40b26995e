use std::collections::BTreeSet;

use proptest::prelude::*;
use proptest::sample::select;

use recap_engine::audit;
use recap_engine::bundle;
use recap_engine::id::Identifier;
use recap_engine::layers::{check_law_evolution, Law};
use recap_engine::reporting::{self, Artifact, BiasDirection, BiasNote, Format, StudyLogEntry};
use recap_engine::samples::{self, c, Clock};
use recap_engine::tiering::{compute_tier, Alignment, Assessment, Design, Dimension, Measurement, Reporting, Tier};
use recap_engine::{parse_bundle, serialize_bundle, Code};

fn assessment() -> impl Strategy<Value = Assessment> {
    (select(Alignment::ALL.to_vec()), select(Measurement::ALL.to_vec()), select(Design::ALL.to_vec()), select(Reporting::ALL.to_vec()), any::<bool>())
        .prop_map(|(construct_alignment, measurement, design, reporting, speculation_required)| Assessment {
            construct_alignment,
            measurement,
            design,
            reporting,
            speculation_required,
        })
}

fn dimensions() -> impl Strategy<Value = BTreeSet<Dimension>> {
    proptest::sample::subsequence(Dimension::ALL.to_vec(), 0..=4).prop_map(|v| v.into_iter().collect())
}

/// Pointwise "no better than" over the declared orders.
fn no_better(a: &Assessment, b: &Assessment) -> bool {
    a.construct_alignment <= b.construct_alignment
        && a.measurement <= b.measurement
        && a.design <= b.design
        && a.reporting <= b.reporting
        && a.speculation_required >= b.speculation_required
}

/// The pointwise worse of two assessments.
fn meet(x: &Assessment, y: &Assessment) -> Assessment {
    Assessment {
        construct_alignment: x.construct_alignment.min(y.construct_alignment),
        measurement: x.measurement.min(y.measurement),
        design: x.design.min(y.design),
        reporting: x.reporting.min(y.reporting),
        speculation_required: x.speculation_required || y.speculation_required,
    }
}

fn law_name() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,8}"
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn worse_assessments_never_get_a_higher_tier(x in assessment(), y in assessment(), cov in dimensions()) {
        let a = meet(&x, &y);
        let b = y;
        prop_assert!(no_better(&a, &b));
        prop_assert!(compute_tier(&a, &cov).0 <= compute_tier(&b, &cov).0);
    }

    #[test]
    fn more_coverage_never_lowers_the_tier(a in assessment(), small in dimensions(), extra in dimensions()) {
        let big: BTreeSet<Dimension> = small.union(&extra).copied().collect();
        prop_assert!(compute_tier(&a, &small).0 <= compute_tier(&a, &big).0);
    }

    #[test]
    fn only_fully_core_assessments_are_core(a in assessment(), cov in dimensions()) {
        let (tier, _) = compute_tier(&a, &cov);
        prop_assert_eq!(tier == Tier::Core, compute_tier(&a, &BTreeSet::new()).0 == Tier::Core);
        if tier == Tier::Core {
            prop_assert!(a.sub_core().is_empty());
        }
    }

    #[test]
    fn appending_laws_is_always_clean(names in proptest::collection::btree_set(law_name(), 0..6)) {
        let old = recap_engine::layers::protected_laws();
        let mut new = old.clone();
        new.extend(names.iter().map(|n| Law::new(Identifier::gp(&format!("x_{n}")), "Name the estimand.")));
        prop_assert!(check_law_evolution(&old, &new).is_empty());
    }

    #[test]
    fn dropping_any_law_is_rescission(drop in 0usize..4) {
        let old = recap_engine::layers::protected_laws();
        let mut new = old.clone();
        new.remove(drop % new.len());
        let codes: Vec<Code> = check_law_evolution(&old, &new).iter().map(|d| d.code).collect();
        prop_assert!(codes.contains(&Code::LawRescinded));
        prop_assert!(codes.contains(&Code::CoreTouched));
    }

    #[test]
    fn study_log_renders_one_row_per_entry(texts in proptest::collection::vec("[ -~\n|]{0,20}", 0..6)) {
        let rows: Vec<StudyLogEntry> = texts.iter().enumerate().map(|(i, t)| StudyLogEntry {
            study_id: c(&format!("S{i}")),
            design_type: t.clone(),
            tier_assignment: Tier::Supplement,
            reasons_for_tiering: t.clone(),
            bias_considerations: vec![BiasNote { direction: BiasDirection::Attenuates, text: t.clone() }],
            measurement_definition_issues: t.clone(),
            notes: t.clone(),
        }).collect();
        let art = Artifact::StudyLog(rows.clone());
        let md = reporting::render_report(&art, Format::Markdown).unwrap();
        prop_assert_eq!(md.lines().count(), rows.len() + 2);
        let csv_text = reporting::render_report(&art, Format::Csv).unwrap();
        let mut r = csv::Reader::from_reader(csv_text.as_bytes());
        let back: Vec<csv::StringRecord> = r.records().map(Result::unwrap).collect();
        prop_assert_eq!(back.len(), rows.len());
        for (rec, row) in back.iter().zip(&rows) {
            prop_assert_eq!(&rec[1], row.design_type.as_str());
        }
        let structured = reporting::render_report(&art, Format::Structured).unwrap();
        prop_assert_eq!(reporting::parse_artifact(&structured).unwrap(), art);
    }

    #[test]
    fn toy_unit_prefixes_parse_back_and_replay(n in 0usize..4) {
        let full = samples::toy_bundle().unwrap();
        let initial = samples::toy_declarations();
        // Rebuild the toy's first `n` operations.
        let mut b = initial.clone();
        let mut clock = Clock::new();
        let mut ops = 0;
        for u in [samples::s1(), samples::s2(), samples::s3()] {
            if ops < n { bundle::add_unit(&mut b, u, &clock.tick()).unwrap(); ops += 1; }
        }
        prop_assert!(b.events.len() <= full.events.len());
        prop_assert_eq!(&full.events[..b.events.len()], &b.events[..]);
        prop_assert!(audit::verify_replay(&initial, &b).is_empty());
        prop_assert_eq!(parse_bundle(&serialize_bundle(&b)).unwrap().bundle, b);
    }

    #[test]
    fn shuffled_sequence_numbers_are_reported(i in 0usize..14, j in 0usize..14) {
        prop_assume!(i != j);
        let mut events = samples::toy_bundle().unwrap().events;
        let (si, sj) = (events[i].sequence, events[j].sequence);
        events[i].sequence = sj;
        events[j].sequence = si;
        prop_assert!(audit::check_log(&events).iter().any(|d| d.code == Code::SequenceGap));
    }
}
