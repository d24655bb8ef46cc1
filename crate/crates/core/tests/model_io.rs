use std::path::PathBuf;

use treeshap_hd::{
    load_canonical, load_lightgbm_text, parse_canonical, parse_lightgbm_text, save_canonical,
    Dataset, Error,
};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn read_predictions(name: &str) -> Vec<f64> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.trim().parse().unwrap())
        .collect()
}

fn check_lightgbm(stem: &str, min_rows: usize) {
    let model = load_lightgbm_text(fixture(&format!("{stem}.txt"))).unwrap();
    let data = Dataset::from_csv(fixture(&format!("{stem}_data.csv"))).unwrap();
    let expected = read_predictions(&format!("{stem}_pred.csv"));
    assert!(expected.len() >= min_rows);
    assert_eq!(model.feature_names(), data.names());
    let got = model.predict(&data).unwrap();
    for (i, (g, e)) in got.iter().zip(&expected).enumerate() {
        assert!((g - e).abs() <= 1e-9, "row {i}: {g} vs {e}");
    }
}

#[test]
fn lightgbm_tiny_matches_reference_predictions() {
    check_lightgbm("lgbm_tiny", 4);
    let model = load_lightgbm_text(fixture("lgbm_tiny.txt")).unwrap();
    assert_eq!(model.max_path_depth(), 2);
    assert!(model.trees()[0].has_covers());
}

#[test]
fn lightgbm_regression_matches_reference_predictions() {
    check_lightgbm("lgbm_regression", 100);
    let model = load_lightgbm_text(fixture("lgbm_regression.txt")).unwrap();
    assert_eq!(model.trees().len(), 30);
}

#[test]
fn lightgbm_rejects_unsupported_trees() {
    let text = std::fs::read_to_string(fixture("lgbm_tiny.txt")).unwrap();
    let categorical = text.replace("decision_type=2 2 2", "decision_type=3 2 2");
    assert!(matches!(
        parse_lightgbm_text(&categorical),
        Err(Error::UnsupportedFeature(_))
    ));
    let zero_missing = text.replace("decision_type=2 2 2", "decision_type=2 6 2");
    assert!(matches!(
        parse_lightgbm_text(&zero_missing),
        Err(Error::UnsupportedFeature(_))
    ));
    let multi = text.replace("num_tree_per_iteration=1", "num_tree_per_iteration=3");
    assert!(matches!(
        parse_lightgbm_text(&multi),
        Err(Error::UnsupportedFeature(_))
    ));
    let linear = text.replace("is_linear=0", "is_linear=1");
    assert!(matches!(
        parse_lightgbm_text(&linear),
        Err(Error::UnsupportedFeature(_))
    ));
    let cut = &text[..text.find("left_child").unwrap()];
    assert!(matches!(parse_lightgbm_text(cut), Err(Error::Parse(_))));
}

#[test]
fn canonical_file_round_trip() {
    let model = load_canonical(fixture("stump.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("copy.json");
    save_canonical(&model, &path).unwrap();
    let again = load_canonical(&path).unwrap();
    assert_eq!(again.trees(), model.trees());
    assert_eq!(again.feature_names(), model.feature_names());
    assert_eq!(again.predict_row(&[0.1, 0.0, 0.0]), 1.0);
}

#[test]
fn lightgbm_converts_to_canonical() {
    let model = load_lightgbm_text(fixture("lgbm_regression.txt")).unwrap();
    let text = treeshap_hd::model::to_canonical_string(&model);
    let again = parse_canonical(&text).unwrap();
    let data = Dataset::from_csv(fixture("lgbm_regression_data.csv")).unwrap();
    assert_eq!(model.predict(&data).unwrap(), again.predict(&data).unwrap());
}

#[test]
fn canonical_validation_errors() {
    let dangling = r#"{"n_features": 1, "base_score": 0, "trees": [[
        {"kind": "split", "feature": 0, "threshold": 1, "left": 1, "right": 5},
        {"kind": "leaf", "weight": 1}]]}"#;
    assert!(matches!(
        parse_canonical(dangling),
        Err(Error::Validation(_))
    ));
    let bad_feature = r#"{"n_features": 1, "base_score": 0, "trees": [[
        {"kind": "split", "feature": 3, "threshold": 1, "left": 1, "right": 2},
        {"kind": "leaf", "weight": 1}, {"kind": "leaf", "weight": 2}]]}"#;
    assert!(matches!(
        parse_canonical(bad_feature),
        Err(Error::FeatureIndex { feature: 3, .. })
    ));
    assert!(matches!(parse_canonical("{"), Err(Error::Parse(_))));
}
