mod common;

use std::fs;

use common::{changelogs, corpus, fixtures_dir};

/// The files under `fixtures/` are generated from the sample builders. Run
/// with `UPDATE_FIXTURES=1` to rewrite them after changing a builder.
#[test]
fn fixtures_match_their_builders() {
    let dir = fixtures_dir();
    let update = std::env::var_os("UPDATE_FIXTURES").is_some();
    let files = corpus().into_iter().map(|f| (f.name, f.text)).chain(changelogs());
    let mut stale = Vec::new();
    for (name, text) in files {
        let path = dir.join(format!("{name}.json"));
        if update {
            fs::create_dir_all(&dir).unwrap();
            fs::write(&path, &text).unwrap();
        } else if fs::read_to_string(&path).ok().as_deref() != Some(text.as_str()) {
            stale.push(name);
        }
    }
    assert!(stale.is_empty(), "stale fixtures {stale:?}; rerun with UPDATE_FIXTURES=1");
}

#[test]
fn corpus_is_large_enough_and_covers_every_exit_code() {
    let c = corpus();
    assert!(c.len() >= 12);
    for code in [0, 1, 2] {
        assert!(c.iter().any(|f| f.validate_exit == code), "no fixture exits {code}");
    }
}
