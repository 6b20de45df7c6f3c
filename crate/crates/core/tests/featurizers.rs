mod common;

#[test]
fn featurizer_widths_over_corpus() {
    let rows = common::dims::suite();
    assert_eq!(rows.len(), 12);
    for (name, width, n, bad) in rows {
        assert_eq!(n, 50, "{name}");
        assert!(bad.is_empty(), "{name} (expected {width}): {bad:?}");
    }
}
