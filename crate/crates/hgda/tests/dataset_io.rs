//! Dataset-directory parsing: happy paths and the named error cases.

use std::fs;

use hgda::graph::{Graph, GraphError};

fn write_dataset(dir: &std::path::Path, meta: &str, edges: &str, features: &str, labels: Option<&str>) {
    fs::write(dir.join("meta.json"), meta).unwrap();
    fs::write(dir.join("edges.csv"), edges).unwrap();
    fs::write(dir.join("features.csv"), features).unwrap();
    if let Some(l) = labels {
        fs::write(dir.join("labels.csv"), l).unwrap();
    }
}

const META3: &str = r#"{"name":"t","num_nodes":3,"num_classes":3,"feature_dim":2}"#;

#[test]
fn empty_edge_file_gives_empty_adjacency() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "", "0,0\n1,1\n2,2\n", Some("0\n1\n2\n"));
    let g = Graph::load(dir.path()).unwrap();
    assert_eq!(g.num_nodes(), 3);
    assert_eq!(g.num_edges(), 0);
    for v in 0..3 {
        assert!(g.neighbors(v).is_empty());
    }
}

#[test]
fn single_directed_line_is_symmetrized() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "0,1\n", "0,0\n1,1\n2,2\n", Some("0\n1\n2\n"));
    let g = Graph::load(dir.path()).unwrap();
    assert_eq!(g.neighbors(0), &[1]);
    assert_eq!(g.neighbors(1), &[0]);
}

#[test]
fn label_out_of_range_in_file() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "", "0,0\n1,1\n2,2\n", Some("0\n5\n1\n"));
    let err = Graph::load(dir.path()).unwrap_err();
    assert!(matches!(err, GraphError::LabelOutOfRange { value: 5, .. }));
}

#[test]
fn unknown_label_sentinel_loads_as_none() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "", "0,0\n1,1\n2,2\n", Some("0\n-1\n1\n"));
    let g = Graph::load(dir.path()).unwrap();
    assert_eq!(g.label(0), Some(0));
    assert_eq!(g.label(1), None);
    assert!(!g.is_fully_labeled());
}

#[test]
fn missing_labels_file_loads_unlabeled() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "0,1\n", "0,0\n1,1\n2,2\n", None);
    let g = Graph::load(dir.path()).unwrap();
    assert!(g.labels().is_none());
}

#[test]
fn missing_required_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("meta.json"), META3).unwrap();
    let err = Graph::load(dir.path()).unwrap_err();
    match err {
        GraphError::MissingFile(f) => assert!(f.ends_with("edges.csv")),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn non_rectangular_features_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "", "0,0\n1\n2,2\n", Some("0\n1\n2\n"));
    let err = Graph::load(dir.path()).unwrap_err();
    assert!(matches!(err, GraphError::NonRectangularFeatures { row: 2, .. }));
}

#[test]
fn edge_index_out_of_range_rejected() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "0,9\n", "0,0\n1,1\n2,2\n", Some("0\n1\n2\n"));
    let err = Graph::load(dir.path()).unwrap_err();
    assert!(matches!(err, GraphError::NodeOutOfRange { id: 9, .. }));
}

#[test]
fn self_loops_in_file_are_dropped() {
    let dir = tempfile::tempdir().unwrap();
    write_dataset(dir.path(), META3, "1,1\n0,2\n", "0,0\n1,1\n2,2\n", Some("0\n1\n2\n"));
    let g = Graph::load(dir.path()).unwrap();
    assert!(g.neighbors(1).is_empty());
    assert_eq!(g.num_edges(), 1);
}
