use std::path::Path;

use nlac_gateway::golden::{check, load_dir};

#[test]
fn golden_fixtures_parse_bit_exactly() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let fixtures = load_dir(&dir).unwrap();
    assert!(fixtures.len() >= 25, "only {} fixtures", fixtures.len());
    let failures: Vec<String> = fixtures
        .iter()
        .filter_map(|f| check(f).err().map(|e| format!("{}: {e}", f.name)))
        .collect();
    assert!(failures.is_empty(), "{}", failures.join("\n"));
}

#[test]
fn fixture_names_unique() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut names: Vec<String> = load_dir(&dir).unwrap().into_iter().map(|f| f.name).collect();
    let n = names.len();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), n);
}

#[test]
fn checker_rejects_wrong_expectations() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let fixtures = load_dir(&dir).unwrap();
    let with_expect = fixtures.iter().find(|f| f.expect.is_some()).unwrap();
    let mut bad = with_expect.clone();
    bad.expect = Some(serde_json::json!("something else"));
    assert!(check(&bad).is_err());
    let mut bad = with_expect.clone();
    bad.calls += 1;
    assert!(check(&bad).is_err());
    let with_error = fixtures.iter().find(|f| f.error.is_some()).unwrap();
    let mut bad = with_error.clone();
    bad.error = Some("preamble_typo".into());
    assert!(check(&bad).is_err());
}
