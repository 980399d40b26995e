//! Grandparent / parent / child hierarchy, downward constraint resolution and
//! the append-only evolution of grandparent laws.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::audit::{self, EventPayload, Stamp};
use crate::bundle::ProjectBundle;
use crate::contamination;
use crate::diag::{self, Code, Diagnostic, Diagnostics};
use crate::id::{Identifier, LayerId, LayerKind, Namespace, Timestamp, Version};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDecl {
    pub id: LayerId,
    pub kind: LayerKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_ref: Option<LayerId>,
    pub version: Version,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub laws: Vec<Law>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub abstractions: Vec<Abstraction>,
    /// Terms admitted at this layer; insight aimed here must be expressible in them.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub vocabulary: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Law {
    pub id: Identifier,
    pub text: String,
    #[serde(default)]
    pub immutable_core: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quarantined: bool,
}

impl Law {
    pub fn new(id: Identifier, text: impl Into<String>) -> Self {
        Law { id, text: text.into(), immutable_core: false, quarantined: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbstractionKind {
    Construct,
    MeasurementClass,
    DesignForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Abstraction {
    pub id: Identifier,
    pub kind: AbstractionKind,
    pub definition: String,
    /// Measurement class -> construct it approximates.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub correspondence: BTreeMap<Identifier, Identifier>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub quarantined: bool,
}

impl Abstraction {
    pub fn new(id: Identifier, kind: AbstractionKind, definition: impl Into<String>) -> Self {
        Abstraction { id, kind, definition: definition.into(), correspondence: BTreeMap::new(), quarantined: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChangelogEntry {
    pub from_version: Version,
    pub to_version: Version,
    pub motivating_insight: String,
    pub boundary_affected: String,
    pub generalizability_reasoning: String,
    pub timestamp: Timestamp,
}

impl ChangelogEntry {
    pub fn narrative_fields(&self) -> [(&'static str, &str); 3] {
        [
            ("motivating_insight", &self.motivating_insight),
            ("boundary_affected", &self.boundary_affected),
            ("generalizability_reasoning", &self.generalizability_reasoning),
        ]
    }

    pub fn missing_fields(&self) -> Vec<&'static str> {
        self.narrative_fields().into_iter().filter(|(_, v)| v.trim().is_empty()).map(|(k, _)| k).collect()
    }
}

/// The four laws every grandparent carries and no version may modify.
pub const PROTECTED_LAWS: [(&str, &str); 4] = [
    (
        "anti_reification",
        "A construct is a conceptual target of inference. No instrument, proxy or dataset may stand in for it or define it.",
    ),
    (
        "one_route",
        "Each project commits to exactly one inferential route. Other routes may be compared but never operated at the same time.",
    ),
    (
        "construct_measurement_separation",
        "Constructs and measurements are declared separately. A measurement approximates a construct and never redefines it.",
    ),
    (
        "downward_insulation",
        "Lower layers cannot alter grandparent laws. This layer changes only through abstracted, append-only methodological insight.",
    ),
];

pub fn protected_laws() -> Vec<Law> {
    PROTECTED_LAWS
        .iter()
        .map(|(name, text)| Law { id: Identifier::gp(name), text: text.to_string(), immutable_core: true, quarantined: false })
        .collect()
}

pub fn is_protected(id: &Identifier) -> bool {
    id.namespace == Namespace::Gp && PROTECTED_LAWS.iter().any(|(n, _)| *n == id.local_name)
}

impl LayerDecl {
    /// A grandparent seeded with the protected laws.
    pub fn grandparent(id: LayerId, version: Version) -> Self {
        LayerDecl {
            id,
            kind: LayerKind::Grandparent,
            parent_ref: None,
            version,
            laws: protected_laws(),
            abstractions: vec![],
            vocabulary: BTreeSet::new(),
        }
    }

    pub fn parent(id: LayerId, grandparent: LayerId, version: Version) -> Self {
        LayerDecl {
            id,
            kind: LayerKind::Parent,
            parent_ref: Some(grandparent),
            version,
            laws: vec![],
            abstractions: vec![],
            vocabulary: BTreeSet::new(),
        }
    }

    pub fn child(id: LayerId, parent: LayerId, version: Version) -> Self {
        LayerDecl { kind: LayerKind::Child, ..Self::parent(id, parent, version) }
    }

    pub fn abstraction(&self, id: &Identifier) -> Option<&Abstraction> {
        self.abstractions.iter().find(|a| &a.id == id)
    }
}

/// What a child layer inherits: every grandparent law and its parent's abstractions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectiveConstraintSet {
    pub child: LayerId,
    pub laws: Vec<Law>,
    pub abstractions: Vec<Abstraction>,
    /// (measurement class, construct) pairs.
    pub correspondences: Vec<(Identifier, Identifier)>,
}

pub fn resolve_constraints(bundle: &ProjectBundle, child: &LayerId) -> Result<EffectiveConstraintSet, Diagnostics> {
    let path = format!("layer({child})");
    let layer = bundle
        .layer(child)
        .ok_or_else(|| Diagnostic::at(Code::UnknownLayer, &path, format!("unknown layer `{child}`")))?;
    if layer.kind != LayerKind::Child {
        return Err(Diagnostic::at(Code::NotChild, &path, format!("`{child}` is a {} layer", layer.kind)).into());
    }
    let mut laws = Vec::new();
    let mut abstractions = Vec::new();
    for ancestor in bundle.ancestry(child).into_iter().skip(1) {
        match ancestor.kind {
            LayerKind::Grandparent => laws.extend(ancestor.laws.iter().filter(|l| !l.quarantined).cloned()),
            LayerKind::Parent => abstractions.extend(ancestor.abstractions.iter().filter(|a| !a.quarantined).cloned()),
            LayerKind::Child => {}
        }
    }
    laws.sort_by(|a, b| a.id.cmp(&b.id));
    abstractions.sort_by(|a, b| a.id.cmp(&b.id));
    let correspondences = abstractions
        .iter()
        .flat_map(|a| a.correspondence.iter().map(|(m, c)| (m.clone(), c.clone())))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    Ok(EffectiveConstraintSet { child: child.clone(), laws, abstractions, correspondences })
}

/// Compare two grandparent law sets. Empty iff `new` keeps every old law with
/// byte-identical text and every protected law unchanged.
pub fn check_law_evolution(old: &[Law], new: &[Law]) -> Vec<Diagnostic> {
    let new_by_id: BTreeMap<&Identifier, &Law> = new.iter().map(|l| (&l.id, l)).collect();
    let mut out = Vec::new();
    for o in old {
        let path = o.id.to_string();
        match new_by_id.get(&o.id) {
            None => {
                out.push(Diagnostic::at(Code::LawRescinded, &path, format!("law `{}` was removed", o.id)));
                if o.immutable_core {
                    out.push(Diagnostic::at(Code::CoreTouched, &path, format!("protected law `{}` was removed", o.id)));
                }
            }
            Some(n) => {
                if n.text != o.text {
                    out.push(Diagnostic::at(Code::LawRewritten, &path, format!("law `{}` changed its text", o.id)));
                }
                if o.immutable_core && (n.text != o.text || !n.immutable_core) {
                    out.push(Diagnostic::at(Code::CoreTouched, &path, format!("protected law `{}` was altered", o.id)));
                }
            }
        }
    }
    out
}

/// Structural checks on a grandparent law set, independent of history.
fn law_set_diagnostics(laws: &[Law]) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for law in laws {
        let path = law.id.to_string();
        if !seen.insert(&law.id) {
            out.push(Diagnostic::at(Code::DupId, &path, format!("law `{}` declared twice", law.id)));
        }
        if law.id.namespace != Namespace::Gp {
            out.push(Diagnostic::at(Code::Namespace, &path, "grandparent laws live in the gp namespace"));
        }
        if law.immutable_core && !is_protected(&law.id) {
            out.push(Diagnostic::at(Code::CoreTouched, &path, "only the protected laws may be immutable_core"));
        }
        for id in contamination::lower_layer_refs(&law.text, LayerKind::Grandparent) {
            out.push(Diagnostic::at(Code::UpwardContent, &path, format!("law text references `{id}`")));
        }
    }
    for law in protected_laws() {
        match laws.iter().find(|l| l.id == law.id) {
            None => out.push(Diagnostic::at(Code::CoreMissing, law.id.to_string(), format!("protected law `{}` is missing", law.id))),
            Some(l) if l.text != law.text || !l.immutable_core => out.push(Diagnostic::at(
                Code::CoreTouched,
                law.id.to_string(),
                format!("protected law `{}` differs from its permanent text", law.id),
            )),
            Some(_) => {}
        }
    }
    out
}

/// Advance the grandparent version with a changelog and an extended law set.
/// Rejected atomically: on any diagnostic the bundle is untouched.
pub fn bump_version(
    bundle: &mut ProjectBundle,
    entry: ChangelogEntry,
    new_laws: Vec<Law>,
    stamp: &Stamp,
) -> Result<(), Diagnostics> {
    let gp = bundle
        .grandparent()
        .ok_or_else(|| Diagnostic::at(Code::NoGrandparent, "layers", "bundle has no grandparent layer"))?;
    let mut diags = Vec::new();
    for field in entry.missing_fields() {
        diags.push(Diagnostic::at(Code::ChangelogIncomplete, format!("changelog.{field}"), format!("`{field}` is empty")));
    }
    for (field, text) in entry.narrative_fields() {
        for id in contamination::lower_layer_refs(text, LayerKind::Grandparent) {
            diags.push(Diagnostic::at(
                Code::UpwardContent,
                format!("changelog.{field}"),
                format!("only methodological reasoning is admissible; `{id}` is domain or project content"),
            ));
        }
    }
    if entry.from_version != gp.version {
        diags.push(Diagnostic::at(
            Code::StaleVersion,
            "changelog.from_version",
            format!("current version is {}, changelog starts from {}", gp.version, entry.from_version),
        ));
    }
    if entry.to_version.partial_cmp(&entry.from_version) != Some(std::cmp::Ordering::Greater) {
        diags.push(Diagnostic::at(
            Code::VersionOrder,
            "changelog.to_version",
            format!("{} is not greater than {}", entry.to_version, entry.from_version),
        ));
    }
    diags.extend(check_law_evolution(&gp.laws, &new_laws));
    diags.extend(law_set_diagnostics(&new_laws));
    diag::check(diags)?;

    let to = entry.to_version.clone();
    let event = audit::next_event(
        bundle,
        stamp,
        EventPayload::VersionBumped { changelog: entry, laws: new_laws.clone() },
        vec![],
    );
    audit::check_append(&bundle.events, &event)?;
    let gp = bundle.grandparent_mut().expect("checked above");
    gp.laws = new_laws;
    gp.version = to.clone();
    bundle.recap_version = to;
    bundle.events.push(event);
    Ok(())
}

/// An inherited law or abstraction that a declaration named `local_name` in
/// `layer` would shadow, with its body text.
pub fn inherited_named<'a>(bundle: &'a ProjectBundle, layer: &LayerId, local_name: &str) -> Option<(&'a Identifier, &'a str)> {
    bundle.ancestry(layer).into_iter().skip(1).find_map(|anc| {
        anc.laws
            .iter()
            .filter(|l| !l.quarantined && l.id.local_name == local_name)
            .map(|l| (&l.id, l.text.as_str()))
            .chain(
                anc.abstractions
                    .iter()
                    .filter(|a| !a.quarantined && a.id.local_name == local_name)
                    .map(|a| (&a.id, a.definition.as_str())),
            )
            .next()
    })
}

/// Structural validation of the hierarchy and of each layer's content.
pub fn validate_layers(bundle: &ProjectBundle) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    for layer in &bundle.layers {
        let path = format!("layer({})", layer.id);
        let parent_kind = layer.parent_ref.as_ref().and_then(|p| bundle.layer_kind(p));
        let expected = match layer.kind {
            LayerKind::Grandparent => None,
            LayerKind::Parent => Some(LayerKind::Grandparent),
            LayerKind::Child => Some(LayerKind::Parent),
        };
        if parent_kind != expected || (expected.is_none() && layer.parent_ref.is_some()) {
            out.push(Diagnostic::at(
                Code::LayerTree,
                &path,
                match expected {
                    None => "the grandparent has no parent".to_string(),
                    Some(k) => format!("a {} layer must name a {k} layer as parent_ref", layer.kind),
                },
            ));
        }
        for law in layer.laws.iter().filter(|l| !l.quarantined) {
            if layer.kind != LayerKind::Grandparent && inherited_named(bundle, &layer.id, &law.id.local_name).is_none() {
                out.push(Diagnostic::at(Code::LayerContent, law.id.to_string(), format!("{} layers may not declare laws", layer.kind)));
            }
        }
        for abs in layer.abstractions.iter().filter(|a| !a.quarantined) {
            if layer.kind != LayerKind::Parent && inherited_named(bundle, &layer.id, &abs.id.local_name).is_none() {
                out.push(Diagnostic::at(
                    Code::LayerContent,
                    abs.id.to_string(),
                    format!("{} layers may not declare abstractions", layer.kind),
                ));
            }
            for (m, c) in &abs.correspondence {
                let mk = layer.abstraction(m).map(|a| a.kind);
                let ck = layer.abstraction(c).map(|a| a.kind);
                if mk != Some(AbstractionKind::MeasurementClass) || ck != Some(AbstractionKind::Construct) {
                    out.push(Diagnostic::at(
                        Code::Correspondence,
                        abs.id.to_string(),
                        format!("`{m}` -> `{c}` must map a measurement class to a construct of layer {}", layer.id),
                    ));
                }
            }
        }
    }
    if let Some(gp) = bundle.grandparent() {
        let path = format!("layer({})", gp.id);
        if gp.version.prefix != "v" {
            out.push(Diagnostic::at(Code::BadVersion, &path, format!("system version `{}` must look like v1.0", gp.version)));
        }
        if bundle.recap_version != gp.version {
            out.push(Diagnostic::at(
                Code::VersionMismatch,
                "recap_version",
                format!("recap_version {} but grandparent is at {}", bundle.recap_version, gp.version),
            ));
        }
        out.extend(law_set_diagnostics(&gp.laws).into_iter().filter(|d| d.code != Code::UpwardContent));
        out.extend(law_history_diagnostics(bundle));
    }
    out
}

/// Law sets recorded at each version bump must grow monotonically, and the
/// current set must extend the last recorded one.
pub fn law_history_diagnostics(bundle: &ProjectBundle) -> Vec<Diagnostic> {
    let mut snapshots: Vec<(String, &[Law])> = bundle
        .events
        .iter()
        .filter_map(|e| match &e.payload {
            EventPayload::VersionBumped { changelog, laws } => Some((changelog.to_version.to_string(), laws.as_slice())),
            _ => None,
        })
        .collect();
    if let Some(gp) = bundle.grandparent() {
        snapshots.push(("current".to_string(), gp.laws.as_slice()));
    }
    let mut out = Vec::new();
    for pair in snapshots.windows(2) {
        for mut d in check_law_evolution(pair[0].1, pair[1].1) {
            d.message = format!("{} -> {}: {}", pair[0].0, pair[1].0, d.message);
            out.push(d);
        }
    }
    out
}
