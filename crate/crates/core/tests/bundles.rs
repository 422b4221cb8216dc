use std::fs;
use std::path::{Path, PathBuf};

use efignn::verify::toy_dataset;
use efignn::{load_bundle, write_bundle, Error};

fn repo_data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
}

fn toy_fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/toy")
}

fn copy_dir(from: &Path, to: &Path) {
    fs::create_dir_all(to).unwrap();
    for e in fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        fs::copy(e.path(), to.join(e.file_name())).unwrap();
    }
}

#[test]
fn toy_fixture_matches_builtin() {
    let ds = load_bundle(toy_fixture()).unwrap();
    let want = toy_dataset();
    assert_eq!(ds.meta, want.meta);
    assert_eq!(ds.features, want.features);
    assert_eq!(ds.edges, want.edges);
    assert_eq!(ds.labels, want.labels);
    assert_eq!(ds.masks, want.masks);
}

#[test]
fn write_then_load_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset();
    write_bundle(dir.path(), &ds).unwrap();
    let back = load_bundle(dir.path()).unwrap();
    assert_eq!(back.features, ds.features);
    assert_eq!(back.edges, ds.edges);
    assert_eq!(back.masks, ds.masks);
    for f in ["meta.txt", "graph.edges", "features.bin", "labels.bin"] {
        assert_eq!(
            fs::read(dir.path().join(f)).unwrap(),
            fs::read(toy_fixture().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn citation_bundles_have_published_sizes() {
    for (name, nodes, features, classes, split) in [
        ("cora", 2708, 1433, 7, [1208, 500, 1000]),
        ("citeseer", 3327, 3703, 6, [1827, 500, 1000]),
        ("pubmed", 19717, 500, 3, [18217, 500, 1000]),
    ] {
        let ds = load_bundle(repo_data(name)).unwrap();
        assert_eq!(ds.meta.name, name);
        assert_eq!(
            (ds.meta.nodes, ds.meta.features, ds.meta.classes),
            (nodes, features, classes)
        );
        assert_eq!(ds.features.shape(), (nodes, features));
        let sizes = [
            ds.masks.train.len(),
            ds.masks.val.len(),
            ds.masks.test.len(),
        ];
        assert_eq!(sizes, split, "{name}");
        let values = ds.features.as_slice();
        if name == "pubmed" {
            assert!(values.iter().all(|&v| v >= 0.0));
        } else {
            assert!(values.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}

#[test]
fn tampered_meta_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&toy_fixture(), dir.path());
    let meta = fs::read_to_string(dir.path().join("meta.txt")).unwrap();
    fs::write(
        dir.path().join("meta.txt"),
        meta.replace("nodes=4", "nodes=5"),
    )
    .unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::MetaMismatch(_))
    ));
}

#[test]
fn broken_bundles_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&toy_fixture(), dir.path());
    fs::write(dir.path().join("graph.edges"), "0\t1\n3\t7\n").unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::EdgeOutOfRange { .. })
    ));

    copy_dir(&toy_fixture(), dir.path());
    fs::write(dir.path().join("split_val.idx"), "0\n").unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::SplitOverlap { .. })
    ));

    copy_dir(&toy_fixture(), dir.path());
    fs::remove_file(dir.path().join("labels.bin")).unwrap();
    assert!(matches!(
        load_bundle(dir.path()),
        Err(Error::MissingFile(_))
    ));
}
